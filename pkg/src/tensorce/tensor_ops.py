"""Dense order-3 complex tensor algebra.

Mode-n unfoldings (Kolda-Bader column ordering), mode products, truncated
HOSVD, and reconstruction from Tucker and CP factorizations. All operations
are pure functions of their inputs and work on C-contiguous complex128
arrays of shape ``(n1, n2, n3)``.

The unfolding convention is fixed project-wide: the mode-n unfolding places
mode-n fibers as columns, ordered so that the lower-numbered remaining mode
varies fastest. HOSVD factors are defined only up to per-column phase, so
callers must compare subspaces or reconstructions, never factor entries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

Dims3 = tuple[int, int, int]

_ORTHO_TOL = 1e-10


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ValueError(message)


def as_tensor3(x) -> np.ndarray:
    """Coerce ``x`` to a C-contiguous complex128 order-3 array."""
    a = np.ascontiguousarray(x, dtype=np.complex128)
    _require(a.ndim == 3, f"expected an order-3 tensor, got ndim={a.ndim}")
    return a


def frobenius_norm(x) -> float:
    """Frobenius norm: sqrt of the sum of squared entry magnitudes."""
    return float(np.linalg.norm(np.asarray(x).ravel()))


def unfold(x, mode: int) -> np.ndarray:
    """Mode-n unfolding of an order-3 tensor.

    Parameters
    ----------
    x : array_like, shape (n1, n2, n3)
    mode : {1, 2, 3}

    Returns
    -------
    ndarray, shape (n_mode, prod of remaining dims)
        Columns are the mode-n fibers, ordered with the lower-numbered
        remaining mode varying fastest. ``fold(unfold(x, m), m, x.shape)``
        restores ``x`` bit-exactly.
    """
    x = as_tensor3(x)
    _require(mode in (1, 2, 3), f"mode must be 1, 2 or 3, got {mode}")
    return np.reshape(
        np.moveaxis(x, mode - 1, 0), (x.shape[mode - 1], -1), order="F"
    )


def fold(m, mode: int, dims: Dims3) -> np.ndarray:
    """Inverse of :func:`unfold` under the same column ordering."""
    _require(mode in (1, 2, 3), f"mode must be 1, 2 or 3, got {mode}")
    _require(len(dims) == 3 and all(int(d) >= 1 for d in dims),
             f"dims must be three positive integers, got {dims}")
    m = np.asarray(m, dtype=np.complex128)
    rest = tuple(d for i, d in enumerate(dims) if i != mode - 1)
    expected = (dims[mode - 1], int(np.prod(rest)))
    _require(m.ndim == 2 and m.shape == expected,
             f"matrix shape {m.shape} inconsistent with dims {dims} mode {mode}")
    t = np.reshape(m, (dims[mode - 1],) + rest, order="F")
    return np.ascontiguousarray(np.moveaxis(t, 0, mode - 1))


def mode_product(x, u, mode: int) -> np.ndarray:
    """n-mode product ``x ×_mode u``.

    ``u`` has shape ``(r, n_mode)``; the result replaces dimension
    ``n_mode`` by ``r`` and equals ``fold(u @ unfold(x, mode), mode, .)``.
    """
    x = as_tensor3(x)
    u = np.asarray(u, dtype=np.complex128)
    _require(mode in (1, 2, 3), f"mode must be 1, 2 or 3, got {mode}")
    _require(u.ndim == 2 and u.shape[1] == x.shape[mode - 1],
             f"factor shape {u.shape} does not match mode-{mode} size "
             f"{x.shape[mode - 1]}")
    dims = list(x.shape)
    dims[mode - 1] = u.shape[0]
    return fold(u @ unfold(x, mode), mode, tuple(dims))


@dataclass(frozen=True, eq=False)
class TuckerModel:
    """Tucker factorization: core of shape ``ranks`` and three factors
    with orthonormal columns, ``factors[n]`` of shape (dim_n, rank_n)."""

    core: np.ndarray
    factors: tuple[np.ndarray, np.ndarray, np.ndarray]

    def __post_init__(self):
        core = as_tensor3(self.core)
        _require(len(self.factors) == 3, "expected three factor matrices")
        for n, u in enumerate(self.factors):
            _require(u.ndim == 2, f"factor {n} must be a matrix")
            _require(u.shape[1] == core.shape[n],
                     f"factor {n} column count {u.shape[1]} does not match "
                     f"core dim {core.shape[n]}")
            _require(u.shape[1] <= u.shape[0],
                     f"factor {n} rank {u.shape[1]} exceeds dimension {u.shape[0]}")
            gram = u.conj().T @ u
            err = np.linalg.norm(gram - np.eye(u.shape[1]))
            _require(err <= _ORTHO_TOL,
                     f"factor {n} columns not orthonormal (defect {err:.2e})")

    @property
    def ranks(self) -> Dims3:
        return self.core.shape

    @property
    def dims(self) -> Dims3:
        return tuple(u.shape[0] for u in self.factors)


@dataclass(frozen=True, eq=False)
class CPModel:
    """CP factorization: rank ``rank`` and three factors of shape
    (dim_n, rank); the tensor is the sum of rank-one outer products of
    corresponding factor columns."""

    rank: int
    factors: tuple[np.ndarray, np.ndarray, np.ndarray]

    def __post_init__(self):
        _require(self.rank >= 1, f"rank must be positive, got {self.rank}")
        _require(len(self.factors) == 3, "expected three factor matrices")
        for n, u in enumerate(self.factors):
            _require(u.ndim == 2 and u.shape[1] == self.rank,
                     f"factor {n} shape {u.shape} inconsistent with rank "
                     f"{self.rank}")

    @property
    def dims(self) -> Dims3:
        return tuple(u.shape[0] for u in self.factors)


def _leading_left_singular_vectors(a: np.ndarray, r: int) -> np.ndarray:
    # Left singular vectors via the Hermitian eigenproblem of a a^H: the
    # short side is always <= 128 here, which is far cheaper than a full
    # economy SVD of the (n, prod-of-rest) unfolding and yields the same
    # leading subspace.
    gram = a @ a.conj().T
    _, vecs = np.linalg.eigh(gram)
    return np.ascontiguousarray(vecs[:, ::-1][:, :r])


def truncated_hosvd(x, ranks: Dims3) -> TuckerModel:
    """Truncated higher-order SVD.

    Factors are the leading ``ranks[n]`` left singular vectors of the
    mode-(n+1) unfolding; the core is ``x`` contracted with the conjugate
    transposed factors along every mode.

    Raises
    ------
    ValueError
        If any requested rank is < 1 or exceeds the mode dimension.
    """
    x = as_tensor3(x)
    _require(len(ranks) == 3, f"ranks must be a triple, got {ranks}")
    for n, (r, d) in enumerate(zip(ranks, x.shape)):
        _require(1 <= int(r) <= d,
                 f"rank {r} out of range [1, {d}] for mode {n + 1}")
    factors = tuple(
        _leading_left_singular_vectors(unfold(x, mode), int(ranks[mode - 1]))
        for mode in (1, 2, 3)
    )
    core = x
    for mode, u in zip((1, 2, 3), factors):
        core = mode_product(core, u.conj().T, mode)
    return TuckerModel(core=core, factors=factors)


def tucker_reconstruct(model: TuckerModel) -> np.ndarray:
    """Dense tensor ``core ×_1 U1 ×_2 U2 ×_3 U3``."""
    x = as_tensor3(model.core)
    for mode, u in zip((1, 2, 3), model.factors):
        x = mode_product(x, u, mode)
    return x


def cp_reconstruct(model: CPModel) -> np.ndarray:
    """Dense tensor as the sum of ``rank`` outer products."""
    a, b, c = (np.asarray(f, dtype=np.complex128) for f in model.factors)
    return np.einsum("ir,jr,kr->ijk", a, b, c, optimize=True)
