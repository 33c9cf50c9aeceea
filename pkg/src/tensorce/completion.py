"""Low-rank tensor completion from sparse noisy observations.

Two solvers:

* :func:`tucker_complete` — alternating projection between the rank-
  constrained set (truncated HOSVD) and the data-consistency set (observed
  entries re-imposed). Returns the final low-rank projection.
* :func:`cp_wals_complete` — CP completion by missing-data-aware weighted
  alternating least squares over the observed entries, with random restarts
  selected by observed-data fit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import Observation
from .seeding import derive_rng
from .tensor_ops import (CPModel, Dims3, cp_reconstruct, truncated_hosvd,
                         tucker_reconstruct)


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ValueError(message)


@dataclass(frozen=True)
class TuckerCompletionConfig:
    """Multilinear ranks plus the stopping rule of the alternating projection."""

    ranks: Dims3
    max_iters: int = 20
    tol: float = 1e-6
    denom_guard: float = 1e-12

    def __post_init__(self):
        _require(self.max_iters >= 1, "max_iters must be >= 1")
        _require(self.tol > 0.0, "tol must be positive")
        _require(len(self.ranks) == 3 and min(self.ranks) >= 1,
                 f"ranks must be three positive integers, got {self.ranks}")


@dataclass(frozen=True)
class CPCompletionConfig:
    """CP rank and the weighted-ALS iteration budget.

    Restarts are plain i.i.d. complex Gaussian factor draws; the sweep loop
    stops once the relative change of the observed-fit NMSE between sweeps
    drops below ``tol``.
    """

    rank: int
    restarts: int = 3
    max_sweeps: int = 50
    tol: float = 1e-4
    ridge: float = 1e-8

    def __post_init__(self):
        _require(self.rank >= 1, "rank must be >= 1")
        _require(self.restarts >= 1, "restarts must be >= 1")
        _require(self.max_sweeps >= 1, "max_sweeps must be >= 1")
        _require(self.ridge >= 0.0, "ridge must be >= 0")


@dataclass(frozen=True, eq=False)
class TuckerCompletionResult:
    estimate: np.ndarray
    iterations: int
    converged: bool


@dataclass(frozen=True, eq=False)
class CPCompletionResult:
    estimate: np.ndarray
    best_fit: float                       # observed-entry NMSE of the winner
    model: CPModel
    restart_fits: tuple[float, ...]
    restart_sweeps: tuple[int, ...]
    diverged: bool                        # any restart ended above its start

    @property
    def sweeps(self) -> int:
        return self.restart_sweeps[int(np.argmin(self.restart_fits))]


def observed_nmse(est, obs: Observation) -> float:
    """Squared-error ratio on the pilot set: ||(est - y) o M||^2 / ||y o M||^2."""
    est = np.asarray(est)
    _require(est.shape == obs.dims,
             f"estimate shape {est.shape} does not match observation "
             f"{obs.dims}")
    m = obs.mask.mask
    ref = float(np.linalg.norm(obs.y[m]) ** 2)
    _require(ref > 0.0, "observation has zero pilot energy")
    return float(np.linalg.norm(est[m] - obs.y[m]) ** 2) / ref


def tucker_complete(obs: Observation, cfg: TuckerCompletionConfig,
                    callback=None) -> TuckerCompletionResult:
    """Tucker completion by alternating projection.

    Starting from the zero-filled observation, each iteration projects the
    current iterate onto the rank-``cfg.ranks`` set via truncated HOSVD and
    then re-imposes the observed entries. The relative change between
    successive iterates,

        delta_t = ||X_t - X_{t-1}||_F / (||Y o M||_F + denom_guard),

    stops the loop once below ``cfg.tol``; the returned estimate is the last
    low-rank projection (pilots not re-imposed). ``callback(t, x_hat,
    x_consistent, delta)``, when given, observes every iteration.
    """
    dims = obs.dims
    for r, d in zip(cfg.ranks, dims):
        _require(r <= d, f"rank {r} exceeds dimension {d}")
    m = obs.mask.mask
    pilot_norm = float(np.linalg.norm(obs.y[m]))
    if pilot_norm == 0.0:
        return TuckerCompletionResult(
            estimate=np.zeros(dims, dtype=np.complex128), iterations=0,
            converged=True)
    x_prev = obs.y.copy()
    x_hat = x_prev
    iterations = 0
    converged = False
    for t in range(1, cfg.max_iters + 1):
        x_hat = tucker_reconstruct(truncated_hosvd(x_prev, cfg.ranks))
        x_cons = np.where(m, obs.y, x_hat)
        delta = float(np.linalg.norm((x_cons - x_prev).ravel()))
        delta /= pilot_norm + cfg.denom_guard
        iterations = t
        if callback is not None:
            callback(t, x_hat, x_cons, delta)
        if delta < cfg.tol:
            converged = True
            break
        x_prev = x_cons
    return TuckerCompletionResult(estimate=x_hat, iterations=iterations,
                                  converged=converged)


def reimpose_pilots(estimate, obs: Observation) -> np.ndarray:
    """Replace the estimate's pilot entries by the observed values."""
    est = np.asarray(estimate)
    _require(est.shape == obs.dims, "estimate/observation shape mismatch")
    return np.where(obs.mask.mask, obs.y, est)


class _ModeSolver:
    """Per-mode least-squares machinery reused across sweeps.

    For one mode, groups the observed entries by their index along that mode
    (presorted once) so each sweep reduces to segment sums plus a batched
    R x R solve.
    """

    def __init__(self, rows: np.ndarray, dim: int, rank: int):
        self.dim = dim
        self.rank = rank
        order = np.argsort(rows, kind="stable")
        self.order = order
        sorted_rows = rows[order]
        starts = np.searchsorted(sorted_rows, np.arange(dim))
        counts = np.diff(np.append(starts, len(rows)))
        self.empty = counts == 0
        # reduceat rejects boundaries == len(rows) (trailing empty segments)
        self.starts = np.minimum(starts, len(rows) - 1)

    def solve(self, z: np.ndarray, yv: np.ndarray, ridge: float) -> np.ndarray:
        r = self.rank
        zs = z[self.order]
        outer = (zs.conj()[:, :, None] * zs[:, None, :]).reshape(len(zs), r * r)
        rhs = zs.conj() * yv[self.order][:, None]
        gram = np.add.reduceat(outer, self.starts, axis=0).reshape(self.dim, r, r)
        b = np.add.reduceat(rhs, self.starts, axis=0)
        if self.empty.any():
            # reduceat repeats the next segment for empty ones; rows with no
            # observed entries are defined to be zero.
            gram[self.empty] = 0.0
            b[self.empty] = 0.0
        gram = gram + max(ridge, 1e-300) * np.eye(r)
        return np.linalg.solve(gram, b[..., None])[..., 0]


def cp_wals_complete(obs: Observation, cfg: CPCompletionConfig,
                     rng: np.random.Generator | None = None,
                     fit_trace: list | None = None) -> CPCompletionResult:
    """CP completion by weighted alternating least squares.

    Each restart initializes factors i.i.d. CN(0, 1) and sweeps the modes
    cyclically: the update of factor row i along a mode is the ridge-
    regularized least-squares fit of the observed entries sharing index i
    against the Khatri-Rao rows of the other two factors. Rows with no
    observed entries are zero for the sweep. Across restarts the
    reconstruction with the smallest observed-entry NMSE wins.

    ``fit_trace``, when given, receives one list per restart with the
    regularized observed-fit objective after every sweep.
    """
    dims = obs.dims
    rank = cfg.rank
    if rng is None:
        rng = derive_rng(0, "cp-wals")
    idx = np.argwhere(obs.mask.mask)
    _require(len(idx) > 0, "observation has no pilot entries")
    ii, jj, kk = idx[:, 0], idx[:, 1], idx[:, 2]
    yv = obs.y[ii, jj, kk]
    ynorm2 = float(np.vdot(yv, yv).real)
    _require(ynorm2 > 0.0, "observation has zero pilot energy")
    solvers = [_ModeSolver(rows, dim, rank)
               for rows, dim in zip((ii, jj, kk), dims)]

    def fit_of(factors) -> float:
        a, b, c = factors
        resid = yv - np.einsum("er,er->e", a[ii] * b[jj], c[kk])
        return float(np.vdot(resid, resid).real) / ynorm2

    best = None
    restart_fits, restart_sweeps = [], []
    diverged = False
    for _ in range(cfg.restarts):
        factors = [
            (rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank)))
            / np.sqrt(2.0)
            for d in dims
        ]
        trace = [] if fit_trace is not None else None
        initial_fit = fit_of(factors)
        prev_fit = None
        sweeps = 0
        for sweep in range(cfg.max_sweeps):
            a, b, c = factors
            factors[0] = solvers[0].solve(b[jj] * c[kk], yv, cfg.ridge)
            a, b, c = factors
            factors[1] = solvers[1].solve(a[ii] * c[kk], yv, cfg.ridge)
            a, b, c = factors
            factors[2] = solvers[2].solve(a[ii] * b[jj], yv, cfg.ridge)
            fit = fit_of(factors)
            sweeps = sweep + 1
            if trace is not None:
                penalty = cfg.ridge * sum(
                    float(np.linalg.norm(f) ** 2) for f in factors)
                trace.append(fit * ynorm2 + penalty)
            if not np.isfinite(fit):
                fit = np.inf
                break
            if prev_fit is not None and \
                    abs(prev_fit - fit) / (prev_fit + 1e-300) < cfg.tol:
                prev_fit = fit
                break
            prev_fit = fit
        final_fit = prev_fit if prev_fit is not None else np.inf
        if fit_trace is not None:
            fit_trace.append(trace)
        restart_fits.append(final_fit)
        restart_sweeps.append(sweeps)
        if final_fit > initial_fit or not np.isfinite(final_fit):
            diverged = True
        if not np.isfinite(final_fit):
            continue
        if best is None or final_fit < best[0]:
            best = (final_fit, tuple(np.ascontiguousarray(f) for f in factors))
    _require(best is not None, "all CP restarts diverged")
    model = CPModel(rank=rank, factors=best[1])
    return CPCompletionResult(
        estimate=cp_reconstruct(model), best_fit=best[0], model=model,
        restart_fits=tuple(restart_fits), restart_sweeps=tuple(restart_sweeps),
        diverged=diverged)
