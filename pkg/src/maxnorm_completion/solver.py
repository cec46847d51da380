"""Factored first-order solvers for max-norm constrained least squares.

The estimator minimizes the empirical quadratic loss over matrices with
elementwise max <= alpha and factor row norms^2 <= radius, working on the
factor pair (U, V) directly.  Two algorithms:

  * fit_pgd      -- full projected gradient descent: simultaneous gradient
                    step on both factors, then a global rescale restoring
                    the elementwise bound, then row-wise Euclidean
                    projection onto the radius ball.
  * fit_stepwise -- per-observation gradient steps touching only row i of U
                    and row j of V, with the same rescale/projection applied
                    locally;  duplicate cells are visited once per epoch
                    with their values averaged.

Both are deterministic given (observations, constraints, config).
"""

from dataclasses import dataclass

import numpy as np

from . import _rng
from .core import ConstraintSet, Factorization, ValidationError, check_matrix, _frozen
from .sampling import ObservationSet

ALGORITHMS = ("pgd", "stepwise")

DEFAULT_TAU = 0.1
DEFAULT_TOL = 1e-7
DEFAULT_MAX_ITERS = 5000
DEFAULT_EPOCHS = 50
MAX_HALVINGS = 20

# Slack for the constraint checks reported on returned iterates.
FEASIBILITY_SLACK = 1e-9


class DivergenceError(RuntimeError):
    """Objective became non-finite (step size too large for the instance)."""

    def __init__(self, iteration: int, algorithm: str = "", message: str | None = None):
        self.iteration = iteration
        self.algorithm = algorithm
        if message is None:
            message = f"{algorithm} diverged at iteration {iteration}: objective is non-finite"
        super().__init__(message)


@dataclass(frozen=True)
class SolverConfig:
    k: int
    tau: float = DEFAULT_TAU
    max_iters: int = DEFAULT_MAX_ITERS
    tol: float = DEFAULT_TOL
    seed: int = 0
    algorithm: str = "pgd"
    epochs: int = DEFAULT_EPOCHS
    backtrack: bool = True  # halve tau on objective increase (pgd only)

    def __post_init__(self):
        if self.k < 1:
            raise ValidationError(f"factor width k must be >= 1, got {self.k}")
        if not (np.isfinite(self.tau) and self.tau > 0):
            raise ValidationError(f"tau must be positive, got {self.tau}")
        if self.max_iters < 1:
            raise ValidationError(f"max_iters must be >= 1, got {self.max_iters}")
        if not (np.isfinite(self.tol) and self.tol > 0):
            raise ValidationError(f"tol must be positive, got {self.tol}")
        if self.algorithm not in ALGORITHMS:
            raise ValidationError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.epochs < 1:
            raise ValidationError(f"epochs must be >= 1, got {self.epochs}")


@dataclass(frozen=True)
class SolveResult:
    factorization: Factorization
    objective_trace: tuple
    iterations_run: int
    feasible_rows: bool
    feasible_linf: bool
    completed: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "completed", _frozen(self.completed))


def default_factor_width(d1: int, d2: int, rank_hint=None) -> int:
    """k = rank_hint + 1 when a rank hint exists, else a fixed cap."""
    if rank_hint is not None:
        return min(d1, d2, rank_hint + 1)
    return min(d1, d2, 32)


def empirical_loss_and_grad(F: Factorization, obs: ObservationSet):
    """Empirical quadratic loss and its gradient w.r.t. the product matrix.

    loss = (1/n) sum_t (y_t - (U V^T)_{i_t j_t})^2.  The gradient is a dense
    d1 x d2 array, nonzero only at observed cells; repeated draws of a cell
    accumulate with multiplicity.
    """
    if (F.d1, F.d2) != (obs.d1, obs.d2):
        raise ValidationError(
            f"factorization shape ({F.d1}, {F.d2}) does not match "
            f"observations ({obs.d1}, {obs.d2})"
        )
    loss, grad = _loss_and_grad(F.U, F.V, obs)
    return loss, grad


def _predicted(U, V, idx):
    return np.einsum("ij,ij->i", U[idx[:, 0]], V[idx[:, 1]])


def _loss(U, V, obs):
    r = _predicted(U, V, obs.indices) - obs.values
    return float(r @ r) / obs.n


def _loss_and_grad(U, V, obs):
    n = obs.n
    resid = _predicted(U, V, obs.indices) - obs.values
    loss = float(resid @ resid) / n
    flat = obs.indices[:, 0] * obs.d2 + obs.indices[:, 1]
    grad = np.bincount(flat, weights=(2.0 / n) * resid,
                       minlength=obs.d1 * obs.d2).reshape(obs.d1, obs.d2)
    return loss, grad


def project_factor_rows(U, radius: float) -> np.ndarray:
    """Rescale every row whose squared l2 norm exceeds `radius` to exactly radius.

    This is the row-wise Euclidean projection onto {u : |u|_2^2 <= radius}.
    """
    if not radius > 0:
        raise ValidationError(f"radius must be positive, got {radius}")
    return _project_rows_inplace(check_matrix(U, "factor").copy(), radius)


def _project_rows_inplace(A, radius):
    # Non-finite rows pass through untouched; divergence shows up in the loss.
    sq = np.einsum("ij,ij->i", A, A)
    over = sq > radius
    if over.any():
        A[over] *= np.sqrt(radius / sq[over])[:, None]
    return A


def linf_rescale(F: Factorization, alpha: float) -> Factorization:
    """Shrink both factors so the product's elementwise max is exactly alpha.

    A no-op when the product already satisfies the bound (including the
    all-zero product).  Both factors get the same scalar factor, so the
    product scales by alpha / current_max.
    """
    if not alpha > 0:
        raise ValidationError(f"alpha must be positive, got {alpha}")
    U, V = _linf_rescale_arrays(F.U, F.V, alpha)
    if U is F.U:
        return F
    return Factorization(U=U, V=V)


def _linf_rescale_arrays(U, V, alpha):
    m = np.abs(U @ V.T).max()
    if m <= alpha:
        return U, V
    s = np.sqrt(alpha) / np.sqrt(m)
    return U * s, V * s


def init_factors(d1: int, d2: int, k: int, constraints: ConstraintSet,
                 seed: int) -> Factorization:
    """Seeded random start: i.i.d. normal entries with sd sqrt(sqrt(R)/k),
    then one rescale/projection pass so the start is feasible."""
    rng = _rng.stream_rng(seed, _rng.INIT)
    sd = np.sqrt(np.sqrt(constraints.radius) / k)
    U = rng.normal(scale=sd, size=(d1, k))
    V = rng.normal(scale=sd, size=(d2, k))
    U, V = _linf_rescale_arrays(U, V, constraints.alpha)
    U = project_factor_rows(U, constraints.radius)
    V = project_factor_rows(V, constraints.radius)
    return Factorization(U=U, V=V)


def fit(obs: ObservationSet, constraints: ConstraintSet, cfg: SolverConfig) -> SolveResult:
    """Dispatch on cfg.algorithm."""
    if cfg.algorithm == "pgd":
        return fit_pgd(obs, constraints, cfg)
    return fit_stepwise(obs, constraints, cfg)


def _check_width(cfg, obs):
    if cfg.k > obs.d1 + obs.d2:
        raise ValidationError(f"k={cfg.k} exceeds d1 + d2 = {obs.d1 + obs.d2}")


def _finish(U, V, trace, iterations, constraints) -> SolveResult:
    F = Factorization(U=U, V=V)
    completed = F.product()
    max_sq = max((F.U * F.U).sum(axis=1).max(), (F.V * F.V).sum(axis=1).max())
    return SolveResult(
        factorization=F,
        objective_trace=tuple(trace),
        iterations_run=iterations,
        feasible_rows=bool(max_sq <= constraints.radius + FEASIBILITY_SLACK),
        feasible_linf=bool(np.abs(completed).max() <= constraints.alpha + FEASIBILITY_SLACK),
        completed=completed,
    )


def fit_pgd(obs: ObservationSet, constraints: ConstraintSet, cfg: SolverConfig) -> SolveResult:
    """Projected gradient descent on the factor pair.

    Each iteration: simultaneous step (U - tau*G@V, V - tau*G.T@U) from the
    pre-step factors, global elementwise rescale, then row projection of both
    factors.  With backtracking enabled the step is halved (at most
    MAX_HALVINGS times) whenever the objective would increase; if no step
    helps, the iterate is kept and the solve stops.
    """
    if cfg.algorithm != "pgd":
        raise ValidationError(f"fit_pgd requires algorithm='pgd', got {cfg.algorithm!r}")
    _check_width(cfg, obs)
    alpha, radius = constraints.alpha, constraints.radius
    F0 = init_factors(obs.d1, obs.d2, cfg.k, constraints, cfg.seed)
    U, V = F0.U.copy(), F0.V.copy()
    loss, grad = _loss_and_grad(U, V, obs)
    trace = [loss]
    iterations = 0
    with np.errstate(over="ignore", invalid="ignore"):
        for it in range(1, cfg.max_iters + 1):
            tau = cfg.tau
            accepted = None
            for _ in range(MAX_HALVINGS + 1):
                Un = U - tau * (grad @ V)
                Vn = V - tau * (grad.T @ U)
                Un, Vn = _linf_rescale_arrays(Un, Vn, alpha)
                Un = _project_rows_inplace(Un, radius)
                Vn = _project_rows_inplace(Vn, radius)
                new_loss = _loss(Un, Vn, obs)
                if np.isfinite(new_loss) and (not cfg.backtrack
                                              or new_loss <= loss * (1 + 1e-12)):
                    accepted = (Un, Vn, new_loss)
                    break
                if not cfg.backtrack:
                    raise DivergenceError(iteration=it, algorithm="pgd")
                tau *= 0.5
            if accepted is None:
                break  # no admissible step; current iterate is the answer
            U, V, new_loss = accepted
            prev, loss = loss, new_loss
            trace.append(loss)
            iterations = it
            grad = None
            if abs(loss - prev) <= cfg.tol * max(prev, 1e-12):
                break
            _, grad = _loss_and_grad(U, V, obs)
    return _finish(U, V, trace, iterations, constraints)


def _dedupe_observations(obs: ObservationSet):
    """Unique observed cells with duplicate values averaged."""
    flat = obs.indices[:, 0] * obs.d2 + obs.indices[:, 1]
    uniq, inverse = np.unique(flat, return_inverse=True)
    sums = np.bincount(inverse, weights=obs.values)
    counts = np.bincount(inverse)
    rows, cols = np.divmod(uniq, obs.d2)
    return rows.astype(np.int64), cols.astype(np.int64), sums / counts


def fit_stepwise(obs: ObservationSet, constraints: ConstraintSet,
                 cfg: SolverConfig, audit_hook=None) -> SolveResult:
    """Per-cell gradient steps over the deduplicated observations.

    For each observed cell (i, j) in a seeded shuffled order: simultaneous
    step on rows U_i and V_j from their pre-step values, local elementwise
    rescale of the pair when |U_i V_j| > alpha, then row projection of the
    touched rows.  The recorded objective is the full empirical loss (with
    multiplicity) after each epoch.  A final global rescale/projection pass
    makes the returned iterate feasible for both constraints, since the
    per-pair rescale only controls the entries visited during the epoch.

    `audit_hook(i, j, u_sq, v_sq)`, when given, is called after every row
    update with the touched rows' squared norms (debug aid).
    """
    if cfg.algorithm != "stepwise":
        raise ValidationError(
            f"fit_stepwise requires algorithm='stepwise', got {cfg.algorithm!r}"
        )
    _check_width(cfg, obs)
    rows, cols, targets = _dedupe_observations(obs)
    F0 = init_factors(obs.d1, obs.d2, cfg.k, constraints, cfg.seed)
    U, V = F0.U.copy(), F0.V.copy()
    trace = [_loss(U, V, obs)]
    shuffle_rng = _rng.stream_rng(cfg.seed, _rng.SHUFFLE)
    with np.errstate(over="ignore", invalid="ignore"):
        return _stepwise_epochs(obs, cfg, constraints, U, V, rows, cols, targets,
                                trace, shuffle_rng, audit_hook)


def _stepwise_epochs(obs, cfg, constraints, U, V, rows, cols, targets, trace,
                     shuffle_rng, audit_hook):
    alpha, radius = constraints.alpha, constraints.radius
    m = rows.shape[0]
    loss = trace[-1]
    epochs_run = 0
    for epoch in range(1, cfg.epochs + 1):
        for t in shuffle_rng.permutation(m):
            i, j, y = rows[t], cols[t], targets[t]
            ui = U[i]
            vj = V[j]
            g = 2.0 * (ui @ vj - y)
            ui_new = ui - cfg.tau * g * vj
            vj_new = vj - cfg.tau * g * ui
            t_new = ui_new @ vj_new
            a = abs(t_new)
            if a > alpha:
                s = np.sqrt(alpha) / np.sqrt(a)
                ui_new = ui_new * s
                vj_new = vj_new * s
            nu = ui_new @ ui_new
            if nu > radius:
                ui_new = ui_new * np.sqrt(radius / nu)
            nv = vj_new @ vj_new
            if nv > radius:
                vj_new = vj_new * np.sqrt(radius / nv)
            U[i] = ui_new
            V[j] = vj_new
            if audit_hook is not None:
                audit_hook(int(i), int(j), float(ui_new @ ui_new), float(vj_new @ vj_new))
        new_loss = _loss(U, V, obs)
        if not np.isfinite(new_loss):
            raise DivergenceError(iteration=epoch, algorithm="stepwise")
        prev, loss = loss, new_loss
        trace.append(loss)
        epochs_run = epoch
        if abs(loss - prev) <= cfg.tol * max(prev, 1e-12):
            break
    U, V = _linf_rescale_arrays(U, V, alpha)
    U = _project_rows_inplace(U.copy(), radius)
    V = _project_rows_inplace(V.copy(), radius)
    final_loss = _loss(U, V, obs)
    if not np.isfinite(final_loss):
        raise DivergenceError(iteration=epochs_run, algorithm="stepwise")
    if final_loss != trace[-1]:
        trace.append(final_loss)
    return _finish(U, V, trace, epochs_run, constraints)
