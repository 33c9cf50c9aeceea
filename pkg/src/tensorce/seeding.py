"""Deterministic stream derivation for reproducible Monte Carlo experiments.

Every random quantity in the toolkit (channel draws, pilot masks, noise,
solver restarts) is produced by an independent counter-based generator whose
key is a hash of (base_seed, *tags). Distinct tag tuples give statistically
independent, individually reproducible streams, so concurrent workers never
share generator state.
"""

from __future__ import annotations

import hashlib

import numpy as np

DEFAULT_BASE_SEED = 42


def _canonical(part) -> str:
    if isinstance(part, float):
        return repr(part)
    if isinstance(part, (tuple, list)):
        return "(" + ",".join(_canonical(p) for p in part) + ")"
    return str(part)


def derive_seed(base_seed: int, *tags) -> int:
    """Derive a 64-bit seed from a base seed and an arbitrary tag tuple."""
    text = _canonical(base_seed) + "|" + "/".join(_canonical(t) for t in tags)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def derive_rng(base_seed: int, *tags) -> np.random.Generator:
    """Counter-based (Philox) generator on the stream named by ``tags``."""
    return np.random.Generator(np.random.Philox(key=derive_seed(base_seed, *tags)))
