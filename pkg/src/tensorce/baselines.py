"""Classical estimators: zero-filling LS, per-fiber frequency LMMSE, and
simultaneous OMP over a Kronecker ULA steering dictionary.

The LMMSE baseline is normatively defined here as per-(i, j)-fiber Wiener
filtering along the frequency mode, with second-order statistics estimated
from an ensemble of training channel realizations drawn from the same
distribution as (but seeded disjointly from) the evaluation channels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import Observation, steering_vector
from .tensor_ops import as_tensor3

SOLVE_LOADING = 1e-10


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ValueError(message)


def ls_estimate(obs: Observation) -> np.ndarray:
    """Zero-filling least squares: the observation itself."""
    return obs.y.copy()


@dataclass(frozen=True, eq=False)
class FrequencyCovariance:
    """Ensemble frequency-mode covariance (Hermitian PSD, N_f x N_f)."""

    r_f: np.ndarray
    n_train: int

    def __post_init__(self):
        _require(self.r_f.ndim == 2 and self.r_f.shape[0] == self.r_f.shape[1],
                 "covariance must be square")
        _require(np.linalg.norm(self.r_f - self.r_f.conj().T)
                 <= 1e-10 * max(1.0, np.linalg.norm(self.r_f)),
                 "covariance must be Hermitian")

    @property
    def n_f(self) -> int:
        return self.r_f.shape[0]


def estimate_frequency_covariance(training_channels) -> FrequencyCovariance:
    """Average outer product of the length-N_f mode-3 fibers over all
    training realizations and antenna pairs, Hermitian-symmetrized."""
    channels = [as_tensor3(h) for h in training_channels]
    _require(len(channels) >= 2, "need at least two training channels")
    n_f = channels[0].shape[2]
    _require(all(h.shape[2] == n_f for h in channels),
             "training channels must share the subcarrier count")
    fibers = np.concatenate([h.reshape(-1, n_f) for h in channels], axis=0)
    r_f = (fibers.T @ fibers.conj()) / fibers.shape[0]
    r_f = (r_f + r_f.conj().T) / 2.0
    return FrequencyCovariance(r_f=r_f, n_train=len(channels))


def lmmse_estimate(obs: Observation, cov: FrequencyCovariance) -> np.ndarray:
    """Per-fiber frequency-mode LMMSE.

    For each (i, j) fiber with observed subcarrier set S:
    ``h_hat = R[:, S] (R[S, S] + noise_var I)^-1 y_S``; fibers with empty S
    are zero. All solves carry a small diagonal loading for safety.
    """
    n_r, n_t, n_f = obs.dims
    _require(cov.n_f == n_f,
             f"covariance size {cov.n_f} does not match N_f={n_f}")
    est = np.zeros(obs.dims, dtype=np.complex128)
    r = cov.r_f
    load = obs.noise_var + SOLVE_LOADING
    for i in range(n_r):
        mask_i = obs.mask.mask[i]
        y_i = obs.y[i]
        for j in range(n_t):
            s = np.flatnonzero(mask_i[j])
            if s.size == 0:
                continue
            a = r[np.ix_(s, s)] + load * np.eye(s.size)
            try:
                w = np.linalg.solve(a, y_i[j, s])
            except np.linalg.LinAlgError as exc:
                raise np.linalg.LinAlgError(
                    f"singular LMMSE solve at fiber ({i}, {j}) despite "
                    f"loading {load:.3e}") from exc
            est[i, j] = r[:, s] @ w
    return est


@dataclass(frozen=True, eq=False)
class AngularDictionary:
    """Steering dictionaries for both arrays, gridded uniformly in sin(angle)
    over [-1, 1)."""

    grid_rx: np.ndarray   # angles (radians), length G_r
    grid_tx: np.ndarray   # angles (radians), length G_t
    a_rx: np.ndarray      # N_r x G_r steering columns
    a_tx: np.ndarray      # N_t x G_t steering columns

    def __post_init__(self):
        _require(self.a_rx.shape[1] == len(self.grid_rx), "rx grid mismatch")
        _require(self.a_tx.shape[1] == len(self.grid_tx), "tx grid mismatch")

    @property
    def n_atoms(self) -> int:
        return self.a_rx.shape[1] * self.a_tx.shape[1]


def build_angular_dictionary(n_r: int, n_t: int, g_r: int | None = None,
                             g_t: int | None = None) -> AngularDictionary:
    """Dictionary with ``g`` sin-space grid points per array (default: one
    per antenna)."""
    g_r = n_r if g_r is None else g_r
    g_t = n_t if g_t is None else g_t
    _require(g_r >= 1 and g_t >= 1, "grid sizes must be >= 1")
    grid_rx = np.arcsin(-1.0 + 2.0 * np.arange(g_r) / g_r)
    grid_tx = np.arcsin(-1.0 + 2.0 * np.arange(g_t) / g_t)
    a_rx = np.stack([steering_vector(n_r, a) for a in grid_rx], axis=1)
    a_tx = np.stack([steering_vector(n_t, a) for a in grid_tx], axis=1)
    return AngularDictionary(grid_rx=grid_rx, grid_tx=grid_tx,
                             a_rx=a_rx, a_tx=a_tx)


def somp_estimate(obs: Observation, dictionary: AngularDictionary,
                  sparsity: int) -> np.ndarray:
    """Simultaneous OMP with one atom support shared across subcarriers.

    Greedy steps: score every (rx, tx) atom pair by the aggregate masked
    correlation with the per-subcarrier residuals (each subcarrier's term
    normalized by the atom's masked energy there), add the argmax to the
    support, re-fit every subcarrier by least squares on the masked selected
    atoms, and update residuals. After ``sparsity`` atoms the full tensor is
    synthesized from the per-subcarrier coefficients.
    """
    _require(sparsity >= 1, f"sparsity must be >= 1, got {sparsity}")
    n_r, n_t, n_f = obs.dims
    a_rx, a_tx = dictionary.a_rx, dictionary.a_tx
    _require(a_rx.shape[0] == n_r and a_tx.shape[0] == n_t,
             "dictionary array sizes do not match the observation")
    m = obs.mask.mask
    m_f = m.astype(np.float64)
    p_rx = np.abs(a_rx) ** 2
    p_tx = np.abs(a_tx) ** 2
    # per-subcarrier masked atom energies, shape (n_f, G_r, G_t)
    denom = np.einsum("ig,ijk,jh->kgh", p_rx, m_f, p_tx, optimize=True)
    residual = obs.y.copy()
    support: list[tuple[int, int]] = []
    estimate = np.zeros(obs.dims, dtype=np.complex128)
    mask_per_k = [np.flatnonzero(m[:, :, k].ravel()) for k in range(n_f)]
    y_per_k = [obs.y[:, :, k].ravel()[mask_per_k[k]] for k in range(n_f)]
    for _ in range(sparsity):
        corr = np.einsum("ig,ijk,jh->kgh", a_rx.conj(), residual, a_tx,
                         optimize=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            scores = np.where(denom > 0.0, np.abs(corr) ** 2 / denom, 0.0)
        scores = scores.sum(axis=0)
        for g, h in support:
            scores[g, h] = -np.inf
        g, h = np.unravel_index(int(np.argmax(scores)), scores.shape)
        support.append((int(g), int(h)))
        atoms = np.stack(
            [np.outer(a_rx[:, g], a_tx[:, h].conj()).ravel()
             for g, h in support], axis=1)   # (n_r*n_t, s)
        coeffs = np.zeros((n_f, len(support)), dtype=np.complex128)
        for k in range(n_f):
            rows = mask_per_k[k]
            if rows.size == 0:
                continue
            phi = atoms[rows]
            gram = phi.conj().T @ phi + SOLVE_LOADING * np.eye(len(support))
            coeffs[k] = np.linalg.solve(gram, phi.conj().T @ y_per_k[k])
        estimate = (atoms @ coeffs.T).reshape(n_r, n_t, n_f)
        residual = np.where(m, obs.y - estimate, 0.0 + 0.0j)
    return estimate
