"""Synthetic specular multipath channels, pilot masks, and noisy observations.

The channel is a sum of L specular paths over uniform linear arrays with
half-wavelength spacing at both ends:

    H[i, j, k] = sum_l  a_l * u(theta_l)[i] * conj(u(phi_l))[j]
                        * exp(-2j*pi*k*tau_l)

with 0-based subcarrier index k, angles uniform on [-pi/2, pi/2], delays
uniform on [0, 1), and complex Gaussian gains normalized per realization to
unit total power (sum |a_l|^2 == 1). Steering entries have unit magnitude
(no 1/sqrt(N) factor), so the mean per-entry channel power is 1.

Observations are entry-wise samples over a pilot index set with additive
circular complex Gaussian noise on the observed entries only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .seeding import DEFAULT_BASE_SEED, derive_rng
from .tensor_ops import Dims3, as_tensor3, frobenius_norm

RICH_EXTRA_PATHS = 25

MASK_PATTERNS = ("random", "grid", "comb")


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ValueError(message)


@dataclass(frozen=True)
class ChannelSpec:
    """Array geometry, subcarrier count and path count of a synthetic channel."""

    n_r: int
    n_t: int
    n_f: int
    n_paths: int
    seed: int = DEFAULT_BASE_SEED

    def __post_init__(self):
        _require(min(self.n_r, self.n_t, self.n_f) >= 1,
                 f"dimensions must be >= 1, got {self.dims}")
        _require(self.n_paths >= 1, f"n_paths must be >= 1, got {self.n_paths}")

    @property
    def dims(self) -> Dims3:
        return (self.n_r, self.n_t, self.n_f)

    @property
    def total(self) -> int:
        return self.n_r * self.n_t * self.n_f


@dataclass(frozen=True, eq=False)
class MultipathParams:
    """Per-path parameters of a specular channel realization."""

    angles_rx: np.ndarray   # radians in [-pi/2, pi/2]
    angles_tx: np.ndarray   # radians in [-pi/2, pi/2]
    gains: np.ndarray       # complex, sum |gain|^2 == 1
    delays: np.ndarray      # normalized delays in [0, 1)

    def __post_init__(self):
        n = len(self.gains)
        _require(len(self.angles_rx) == n and len(self.angles_tx) == n
                 and len(self.delays) == n,
                 "per-path parameter lists must share one length")
        power = float(np.sum(np.abs(self.gains) ** 2))
        _require(abs(power - 1.0) <= 1e-12,
                 f"total path power must be 1, got {power!r}")

    @property
    def n_paths(self) -> int:
        return len(self.gains)


def steering_vector(n: int, angle: float) -> np.ndarray:
    """ULA response at half-wavelength spacing: entry m is exp(1j*pi*m*sin(angle))."""
    _require(n >= 1, f"antenna count must be >= 1, got {n}")
    return np.exp(1j * np.pi * np.arange(n) * np.sin(angle))


def _draw_paths(n_paths: int, rng: np.random.Generator) -> MultipathParams:
    # Draw order is part of the reproducibility contract: angles_rx,
    # angles_tx, gains (re then im), delays.
    theta = rng.uniform(-np.pi / 2, np.pi / 2, n_paths)
    phi = rng.uniform(-np.pi / 2, np.pi / 2, n_paths)
    g = rng.standard_normal(n_paths) + 1j * rng.standard_normal(n_paths)
    gains = g / np.linalg.norm(g)
    delays = rng.random(n_paths)
    return MultipathParams(angles_rx=theta, angles_tx=phi, gains=gains,
                           delays=delays)


def _specular_tensor(dims: Dims3, params: MultipathParams) -> np.ndarray:
    n_r, n_t, n_f = dims
    a_r = np.exp(1j * np.pi * np.outer(np.sin(params.angles_rx), np.arange(n_r)))
    a_t = np.exp(1j * np.pi * np.outer(np.sin(params.angles_tx), np.arange(n_t)))
    f = np.exp(-2j * np.pi * np.outer(params.delays, np.arange(n_f)))
    return np.einsum("l,li,lj,lk->ijk", params.gains, a_r, a_t.conj(), f,
                     optimize=True)


def generate_channel(spec: ChannelSpec,
                     rng: np.random.Generator | None = None
                     ) -> tuple[np.ndarray, MultipathParams]:
    """Draw one specular channel realization and its path parameters."""
    if rng is None:
        rng = derive_rng(spec.seed, "channel")
    params = _draw_paths(spec.n_paths, rng)
    return _specular_tensor(spec.dims, params), params


def generate_rich_channel(spec: ChannelSpec, diffuse_fraction: float,
                          rng: np.random.Generator | None = None) -> np.ndarray:
    """Specular channel plus a weak quasi-isotropic component.

    Power mix sqrt(1-f) * specular(L paths) + sqrt(f) * diffuse term made of
    25 additional weak paths carrying total power f, then renormalized to
    unit mean per-entry power. Stands in for externally measured channels
    with higher effective rank than the pure specular model.
    """
    _require(0.0 <= diffuse_fraction < 1.0,
             f"diffuse_fraction must be in [0, 1), got {diffuse_fraction}")
    if rng is None:
        rng = derive_rng(spec.seed, "rich-channel")
    specular, _ = generate_channel(spec, rng)
    h = math.sqrt(1.0 - diffuse_fraction) * specular
    if diffuse_fraction > 0.0:
        diffuse = _specular_tensor(spec.dims, _draw_paths(RICH_EXTRA_PATHS, rng))
        h = h + math.sqrt(diffuse_fraction) * diffuse
    return h * (math.sqrt(spec.total) / frobenius_norm(h))


@dataclass(frozen=True, eq=False)
class PilotMask:
    """Pilot index set as a boolean tensor plus the requested ratio."""

    pattern: str
    mask: np.ndarray   # bool, shape dims
    rho: float         # requested pilot ratio

    def __post_init__(self):
        _require(self.pattern in MASK_PATTERNS,
                 f"unknown pattern {self.pattern!r}")
        _require(self.mask.dtype == bool and self.mask.ndim == 3,
                 "mask must be a boolean order-3 array")

    @property
    def dims(self) -> Dims3:
        return self.mask.shape

    @property
    def count(self) -> int:
        return int(self.mask.sum())

    @property
    def realized_rho(self) -> float:
        return self.count / self.mask.size

    @property
    def indices(self) -> np.ndarray:
        """Observed (i, j, k) triples in row-major order, no duplicates."""
        return np.argwhere(self.mask)


def _grid_strides(rho: float, dims: Dims3) -> tuple[int, int, int]:
    # Deterministic stride lattice: pick (s, s, s_f) with s_f >= s minimizing
    # |realized - requested|; ties break toward denser sampling.
    n_r, n_t, n_f = dims
    total = n_r * n_t * n_f
    best = None
    for s in range(1, max(n_r, n_t) + 1):
        n_rs = -(-n_r // s) * -(-n_t // s)
        for s_f in range(s, n_f + 1):
            realized = n_rs * -(-n_f // s_f) / total
            key = (abs(realized - rho), s, s_f)
            if best is None or key < best[0]:
                best = (key, (s, s, s_f))
    return best[1]


def generate_mask(pattern: str, rho: float, dims: Dims3,
                  rng: np.random.Generator | None = None) -> PilotMask:
    """Build a pilot mask.

    random : uniform sample without replacement of exactly round(rho*total)
             entries (requires ``rng``);
    grid   : deterministic stride lattice (s, s, s_f), s_f >= s, minimizing
             the realized-ratio error;
    comb   : all (i, j) observed on subcarriers k == 0 (mod ceil(1/rho)).
    """
    _require(pattern in MASK_PATTERNS,
             f"pattern must be one of {MASK_PATTERNS}, got {pattern!r}")
    _require(0.0 < rho <= 1.0, f"pilot ratio must be in (0, 1], got {rho}")
    n_r, n_t, n_f = dims
    total = n_r * n_t * n_f
    mask = np.zeros(dims, dtype=bool)
    if pattern == "random":
        _require(rng is not None, "random mask requires an rng")
        count = round(rho * total)
        flat = rng.choice(total, size=count, replace=False)
        mask.ravel()[flat] = True
    elif pattern == "grid":
        s_r, s_t, s_f = _grid_strides(rho, dims)
        mask[::s_r, ::s_t, ::s_f] = True
    else:
        step = math.ceil(1.0 / rho)
        mask[:, :, ::step] = True
    return PilotMask(pattern=pattern, mask=mask, rho=rho)


@dataclass(frozen=True, eq=False)
class Observation:
    """Noisy entry-wise observation of a channel tensor.

    ``y`` is exactly zero outside the pilot set; ``noise_var`` is the
    per-entry complex noise variance implied by ``snr_db`` and the source
    channel's mean per-entry power.
    """

    y: np.ndarray
    mask: PilotMask
    noise_var: float
    snr_db: float

    def __post_init__(self):
        _require(self.y.shape == self.mask.dims,
                 f"observation shape {self.y.shape} does not match mask "
                 f"{self.mask.dims}")
        _require(self.noise_var >= 0.0, "noise variance must be >= 0")

    @property
    def dims(self) -> Dims3:
        return self.y.shape


def observe(h, mask: PilotMask, snr_db: float,
            rng: np.random.Generator | None = None) -> Observation:
    """Sample ``h`` on the pilot set with AWGN on the observed entries.

    The noise variance is (||h||_F^2 / total) / 10^(snr_db/10); real and
    imaginary noise parts each carry half of it. ``snr_db=inf`` disables
    noise. Noise is drawn only for observed entries, in row-major index
    order.
    """
    h = as_tensor3(h)
    _require(h.shape == mask.dims,
             f"channel shape {h.shape} does not match mask {mask.dims}")
    y = np.where(mask.mask, h, 0.0 + 0.0j)
    if math.isinf(snr_db):
        return Observation(y=y, mask=mask, noise_var=0.0, snr_db=snr_db)
    power = frobenius_norm(h) ** 2 / h.size
    noise_var = power / 10.0 ** (snr_db / 10.0)
    _require(rng is not None, "finite-SNR observation requires an rng")
    flat = np.flatnonzero(mask.mask.ravel())
    noise = (rng.standard_normal(flat.size)
             + 1j * rng.standard_normal(flat.size)) * math.sqrt(noise_var / 2.0)
    y.ravel()[flat] += noise
    return Observation(y=y, mask=mask, noise_var=noise_var, snr_db=snr_db)
