import numpy as np
import pytest

from maxnorm_completion import (
    ObservationSet,
    PartialMatrix,
    RankSearchConfig,
    SolverConfig,
    ValidationError,
    column_mean_init,
    estimate_rank,
    radius_sweep,
    spectral_magnitude,
)
from maxnorm_completion.model_select import (
    format_rank_report,
    load_rank_report,
    parse_rank_report,
    profile_distance,
    save_rank_report,
)


def _solver_template(max_iters=4000, tau=2.0, tol=1e-10):
    return SolverConfig(k=2, tau=tau, max_iters=max_iters, tol=tol, seed=0)


def test_column_mean_init_identity_on_full_observation():
    rng = np.random.default_rng(1)
    M = rng.normal(size=(5, 4))
    P = PartialMatrix(d1=5, d2=4, mask=np.ones((5, 4), dtype=bool), values=M)
    assert np.array_equal(column_mean_init(P), M)


def test_column_mean_init_fills_with_column_mean():
    values = np.array([[2.0, 1.0], [4.0, 1.0], [0.0, 1.0]])
    mask = np.array([[True, True], [True, True], [False, True]])
    P = PartialMatrix(d1=3, d2=2, mask=mask, values=values)
    out = column_mean_init(P)
    assert out[2, 0] == pytest.approx(3.0, rel=1e-15)
    # observed cells are copied bit-for-bit
    assert np.array_equal(out[mask], values[mask])


def test_column_mean_init_empty_column_uses_global_mean():
    values = np.array([[2.0, 0.0], [4.0, 0.0]])
    mask = np.array([[True, False], [True, False]])
    P = PartialMatrix(d1=2, d2=2, mask=mask, values=values)
    out = column_mean_init(P)
    assert np.allclose(out[:, 1], 3.0, rtol=0, atol=1e-15)


def test_column_mean_init_requires_an_observation():
    P = PartialMatrix(d1=2, d2=2, mask=np.zeros((2, 2), dtype=bool),
                      values=np.zeros((2, 2)))
    with pytest.raises(ValidationError):
        column_mean_init(P)


def test_spectral_magnitude_constant_column():
    M = np.full((8, 3), -2.5)
    F = spectral_magnitude(M)
    assert F.shape == (8, 3)
    assert np.allclose(F[0], 8 * 2.5, rtol=1e-12)
    assert np.allclose(F[1:], 0.0, atol=1e-9)


def test_spectral_magnitude_zero_matrix():
    assert np.array_equal(spectral_magnitude(np.zeros((4, 2))), np.zeros((4, 2)))


def test_spectral_magnitude_parseval():
    rng = np.random.default_rng(5)
    M = rng.normal(size=(16, 6))
    F = spectral_magnitude(M)
    lhs = (F ** 2).sum(axis=0)
    rhs = 16 * (M ** 2).sum(axis=0)
    assert np.allclose(lhs, rhs, rtol=1e-9)


def test_spectral_magnitude_invariant_to_cyclic_shift():
    rng = np.random.default_rng(7)
    col = rng.normal(size=(12, 1))
    shifted = np.roll(col, 5, axis=0)
    assert np.allclose(spectral_magnitude(col), spectral_magnitude(shifted), rtol=1e-9)


def test_from_observations_averages_duplicates():
    obs = ObservationSet(d1=2, d2=2,
                         indices=np.array([[0, 0], [0, 0], [1, 1]]),
                         values=np.array([1.0, 3.0, 5.0]))
    P = PartialMatrix.from_observations(obs)
    assert P.values[0, 0] == pytest.approx(2.0, rel=1e-15)
    assert P.values[1, 1] == 5.0
    assert P.observed_count == 2
    back = P.to_observations()
    assert back.n == 2


def test_estimate_rank_full_rank_one_matrix():
    rng = np.random.default_rng(11)
    M0 = np.outer(rng.uniform(0.5, 1.0, 8), rng.uniform(0.5, 1.0, 8))
    M0 /= np.abs(M0).max()
    P = PartialMatrix(d1=8, d2=8, mask=np.ones((8, 8), dtype=bool), values=M0)
    cfg = RankSearchConfig(alpha0=1.0, r_max=4, solver=_solver_template())
    est = estimate_rank(P, cfg, keep_profiles=True)
    rel = np.linalg.norm(est.chosen - M0) / np.linalg.norm(M0)
    assert rel < 1e-3
    assert [r for r, _ in est.errors] == [2, 3, 4]
    # e(r) >= 0, and recomputing from stored profiles reproduces it
    for r, e in est.errors:
        assert e >= 0.0
        recomputed = profile_distance(est.profile_init, est.profiles[r])
        assert abs(recomputed - e) <= 1e-12 * max(e, 1.0)


def test_estimate_rank_singleton_search():
    rng = np.random.default_rng(13)
    M0 = np.outer(rng.uniform(0.5, 1.0, 6), rng.uniform(0.5, 1.0, 6))
    P = PartialMatrix(d1=6, d2=6, mask=np.ones((6, 6), dtype=bool), values=M0)
    cfg = RankSearchConfig(alpha0=float(np.abs(M0).max()), r_max=2,
                           solver=_solver_template(max_iters=500))
    est = estimate_rank(P, cfg)
    assert est.r_star == 2
    assert len(est.errors) == 1


def test_estimate_rank_r_max_capped_by_dims():
    P = PartialMatrix(d1=3, d2=3, mask=np.ones((3, 3), dtype=bool),
                      values=np.ones((3, 3)))
    cfg = RankSearchConfig(alpha0=1.0, r_max=5, solver=_solver_template())
    with pytest.raises(ValidationError):
        estimate_rank(P, cfg)


def test_rank_search_config_validation():
    with pytest.raises(ValidationError):
        RankSearchConfig(alpha0=0.0, r_max=3, solver=_solver_template())
    with pytest.raises(ValidationError):
        RankSearchConfig(alpha0=1.0, r_max=1, solver=_solver_template())


def test_radius_sweep_runs_and_picks_minimum():
    rng = np.random.default_rng(17)
    M0 = np.outer(rng.uniform(0.5, 1.0, 6), rng.uniform(0.5, 1.0, 6))
    M0 /= np.abs(M0).max()
    mask = rng.random((6, 6)) < 0.9
    P = PartialMatrix(d1=6, d2=6, mask=mask, values=np.where(mask, M0, 0.0))
    cfg = RankSearchConfig(alpha0=1.0, r_max=4,
                           solver=_solver_template(max_iters=800))
    sweep = radius_sweep(P, cfg)
    radii = [rad for rad, _ in sweep.errors]
    assert radii[0] == pytest.approx(np.sqrt(2.0), rel=1e-12)
    assert all(b > a for a, b in zip(radii, radii[1:]))
    best = min(sweep.errors, key=lambda t: t[1])
    assert sweep.radius_star == best[0]


def test_rank_report_round_trip(tmp_path):
    rng = np.random.default_rng(19)
    M0 = np.outer(rng.uniform(0.5, 1.0, 6), rng.uniform(0.5, 1.0, 6))
    P = PartialMatrix(d1=6, d2=6, mask=np.ones((6, 6), dtype=bool), values=M0)
    cfg = RankSearchConfig(alpha0=float(np.abs(M0).max()), r_max=3,
                           solver=_solver_template(max_iters=300))
    est = estimate_rank(P, cfg)
    path = tmp_path / "rank.report"
    save_rank_report(path, est)
    errors, r_star, completion = load_rank_report(path)
    assert r_star == est.r_star
    assert [r for r, _ in errors] == [r for r, _ in est.errors]
    for (_, a), (_, b) in zip(errors, est.errors):
        assert a == b  # 17 significant digits round-trip
    assert np.array_equal(completion, est.chosen)


def test_parse_rank_report_rejects_missing_rank_line():
    with pytest.raises(ValidationError):
        parse_rank_report("2,0.5\n3,0.4\n")
