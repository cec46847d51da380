import numpy as np
import pytest

from maxnorm_completion import (
    NoiseModel,
    ObservationSet,
    ValidationError,
    make_distribution,
    observe,
    sample_indices,
)
from maxnorm_completion.sampling import (
    format_distribution,
    format_observations,
    load_distribution,
    load_observations,
    parse_distribution,
    parse_observations,
    save_distribution,
    save_observations,
)


def test_uniform_distribution():
    dist = make_distribution("uniform", 4, 5)
    assert np.allclose(dist.probs, 1.0 / 20)
    assert dist.mu == pytest.approx(1.0, rel=1e-12)
    assert dist.L == pytest.approx(1.0, rel=1e-12)


def test_product_distribution_cells_and_flatness():
    dist = make_distribution("product", 2, 2,
                             row_marginals=[1 / 3, 2 / 3],
                             col_marginals=[0.5, 0.5])
    # Second row, first column cell carries (2/3) * (1/2) = 1/3.
    assert dist.probs[1, 0] == pytest.approx(1.0 / 3, rel=1e-12)
    assert dist.mu == pytest.approx(1.5, rel=1e-12)
    assert dist.L == pytest.approx(4.0 / 3, rel=1e-12)


def test_marginals_are_normalized_before_use():
    dist = make_distribution("product", 2, 2,
                             row_marginals=[2.0, 4.0], col_marginals=[3.0, 3.0])
    assert dist.probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert dist.probs[0, 0] == pytest.approx((1 / 3) * 0.5, rel=1e-12)


def test_explicit_zero_cell_rejected_when_positivity_required():
    probs = np.array([[0.5, 0.5], [0.0, 0.0]])
    with pytest.raises(ValidationError):
        make_distribution("explicit", 2, 2, probs=probs)
    dist = make_distribution("explicit", 2, 2, probs=probs, require_positive=False)
    assert dist.mu == np.inf


def test_flatness_parameters_never_below_one():
    rng = np.random.default_rng(3)
    for _ in range(50):
        probs = rng.uniform(0.05, 1.0, size=(3, 4))
        dist = make_distribution("explicit", 3, 4, probs=probs)
        assert dist.probs.sum() == pytest.approx(1.0, abs=1e-9)
        assert dist.mu >= 1.0 - 1e-12
        assert dist.L >= 1.0 - 1e-12


def test_point_mass_sampling():
    probs = np.zeros((3, 4))
    probs[2, 3] = 1.0
    dist = make_distribution("explicit", 3, 4, probs=probs, require_positive=False)
    idx = sample_indices(dist, 5, seed=0)
    assert np.array_equal(idx, np.tile([2, 3], (5, 1)))


def test_uniform_cell_frequencies():
    dist = make_distribution("uniform", 2, 2)
    idx = sample_indices(dist, 100_000, seed=42)
    for i in range(2):
        for j in range(2):
            freq = np.mean((idx[:, 0] == i) & (idx[:, 1] == j))
            assert 0.24 <= freq <= 0.26


def test_sampling_determinism():
    dist = make_distribution("uniform", 6, 7)
    a = sample_indices(dist, 1000, seed=9)
    b = sample_indices(dist, 1000, seed=9)
    assert np.array_equal(a, b)
    c = sample_indices(dist, 1000, seed=10)
    assert not np.array_equal(a, c)


def test_empirical_distribution_total_variation():
    rng = np.random.default_rng(5)
    probs = rng.uniform(0.2, 1.0, size=(5, 5))
    dist = make_distribution("explicit", 5, 5, probs=probs)
    idx = sample_indices(dist, 100_000, seed=77)
    counts = np.zeros((5, 5))
    np.add.at(counts, (idx[:, 0], idx[:, 1]), 1.0)
    tv = 0.5 * np.abs(counts / idx.shape[0] - dist.probs).sum()
    assert tv < 0.02


def test_observe_noiseless_copies_entries():
    M0 = np.arange(12.0).reshape(3, 4)
    idx = np.array([[0, 0], [2, 3], [1, 1]])
    obs = observe(M0, idx, NoiseModel(kind="none", sigma=0.0), seed=4)
    assert np.array_equal(obs.values, [0.0, 11.0, 5.0])


def test_observe_gaussian_moments():
    c = 2.5
    M0 = np.full((10, 10), c)
    dist = make_distribution("uniform", 10, 10)
    idx = sample_indices(dist, 100_000, seed=12)
    obs = observe(M0, idx, NoiseModel(kind="gaussian", sigma=1.0), seed=12)
    assert abs(obs.values.mean() - c) < 0.02
    assert abs(obs.values.var() - 1.0) < 0.05


def test_laplace_noise_variance_and_exponential_moment():
    # One million draws: unit variance, and the sub-exponential moment
    # condition E exp(|xi|/K) <= e holds at K = 2.
    M0 = np.zeros((1, 1))
    idx = np.zeros((1_000_000, 2), dtype=np.int64)
    obs = observe(M0, idx, NoiseModel(kind="laplace", sigma=1.0), seed=31)
    xi = obs.values
    assert abs(xi.var() - 1.0) < 0.05
    assert np.exp(np.abs(xi) / 2.0).mean() <= np.e


def test_observe_reproducible():
    M0 = np.arange(6.0).reshape(2, 3)
    idx = np.array([[0, 0], [1, 2], [1, 1], [0, 2]])
    noise = NoiseModel(kind="gaussian", sigma=0.3)
    a = observe(M0, idx, noise, seed=8)
    b = observe(M0, idx, noise, seed=8)
    assert np.array_equal(a.values, b.values)


def test_observe_index_out_of_range():
    with pytest.raises(ValidationError):
        observe(np.ones((2, 2)), np.array([[0, 2]]), NoiseModel(kind="none"), seed=0)


def test_noise_model_validation():
    with pytest.raises(ValidationError):
        NoiseModel(kind="cauchy", sigma=1.0)
    with pytest.raises(ValidationError):
        NoiseModel(kind="gaussian", sigma=-1.0)


def test_observation_round_trip(tmp_path):
    M0 = np.arange(20.0).reshape(4, 5) / 7.0
    dist = make_distribution("uniform", 4, 5)
    idx = sample_indices(dist, 30, seed=2)
    obs = observe(M0, idx, NoiseModel(kind="gaussian", sigma=0.1), seed=2)
    path = tmp_path / "obs.csv"
    save_observations(path, obs)
    back = load_observations(path)
    assert (back.d1, back.d2, back.n) == (4, 5, 30)
    assert np.array_equal(back.indices, obs.indices)
    assert np.array_equal(back.values, obs.values)


def test_observation_format_header():
    obs = ObservationSet(d1=2, d2=2, indices=np.array([[0, 1]]), values=np.array([0.5]))
    text = format_observations(obs)
    assert text.splitlines()[0] == "2,2,1"
    assert text.splitlines()[1] == "0,1,0.5"
    with pytest.raises(ValidationError):
        parse_observations("2,2,2\n0,1,0.5\n")


def test_distribution_round_trip(tmp_path):
    for dist in [
        make_distribution("uniform", 3, 4),
        make_distribution("product", 3, 4, row_marginals=[1, 2, 3],
                          col_marginals=[1, 1, 2, 4]),
        make_distribution("explicit", 2, 2,
                          probs=np.array([[0.1, 0.2], [0.3, 0.4]])),
    ]:
        path = tmp_path / f"{dist.kind}.dist"
        save_distribution(path, dist)
        back = load_distribution(path)
        assert back.kind == dist.kind
        assert np.allclose(back.probs, dist.probs, rtol=0, atol=1e-15)


def test_distribution_parse_errors():
    with pytest.raises(ValidationError):
        parse_distribution("2,2\ntriangular\n")
    with pytest.raises(ValidationError):
        parse_distribution("2,2\nproduct\n1,1\n")
