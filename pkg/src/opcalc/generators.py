"""Seeded random instances: contractions, unitaries, gapped pairs, positive pairs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .calculus import Contraction
from .linalg import adj, op_norm, parse_order, schatten_norm


def trial_rng(master_seed: int, *keys: int) -> np.random.Generator:
    """Independent stream for ``(master_seed, *keys)``; the same keys give the same stream."""
    return np.random.default_rng([int(master_seed) & ((1 << 64) - 1), *[int(k) for k in keys]])


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def ginibre(rng: np.random.Generator, n: int, m: int | None = None) -> np.ndarray:
    m = n if m is None else m
    return (rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))) / np.sqrt(2.0)


def gen_contraction(seed, n: int, target_norm: float) -> Contraction:
    """Gaussian matrix rescaled to operator norm ``target_norm``."""
    if not 0.0 <= target_norm <= 1.0:
        raise ValueError("target norm must lie in [0, 1]")
    rng = _rng(seed)
    G = ginibre(rng, n)
    if target_norm == 0.0:
        return Contraction.from_matrix(np.zeros((n, n)))
    return Contraction.from_matrix(G * (target_norm / op_norm(G)))


def gen_unitary(seed, n: int) -> np.ndarray:
    """Haar unitary: QR of a Gaussian matrix with the diagonal phases of R removed."""
    if n < 1:
        raise ValueError("dimension must be >= 1")
    rng = _rng(seed)
    Q, R = np.linalg.qr(ginibre(rng, n))
    d = np.diag(R)
    return Q * (d / np.abs(d))


@dataclass(frozen=True, eq=False)
class GappedPair:
    T0: Contraction
    T1: Contraction
    clipped: bool
    scale: float


def gen_pair_with_gap(seed, n: int, norm0: float, gap: float, p) -> GappedPair:
    """``T0`` of norm ``norm0`` and ``T1 = T0 + s * Delta`` with ``||Delta||_p = gap``.

    ``s = 1`` unless ``T0 + Delta`` is not a contraction, in which case ``s``
    is the largest value on the segment that keeps ``T1`` contractive.
    """
    p = parse_order(p)
    if not 0.0 <= norm0 < 1.0:
        raise ValueError("norm0 must lie in [0, 1)")
    if gap < 0:
        raise ValueError("gap must be nonnegative")
    rng = _rng(seed)
    T0 = gen_contraction(rng, n, norm0)
    G = ginibre(rng, n)
    if gap == 0.0:
        return GappedPair(T0, T0, False, 1.0)
    Delta = G * (gap / schatten_norm(G, p))
    if op_norm(T0.mat + Delta) <= 1.0:
        return GappedPair(T0, Contraction.from_matrix(T0.mat + Delta), False, 1.0)
    lo, hi = 0.0, 1.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if op_norm(T0.mat + mid * Delta) <= 1.0:
            lo = mid
        else:
            hi = mid
    return GappedPair(T0, Contraction.from_matrix(T0.mat + lo * Delta), True, lo)


def gen_psd_pair(seed, n: int, delta: float) -> tuple[np.ndarray, np.ndarray]:
    """Positive contractions ``A`` (spectrum in ``[0, 1]``) and ``B`` (spectrum in ``[delta, 1]``)."""
    rng = _rng(seed)

    def draw(lo):
        Q = gen_unitary(rng, n)
        w = rng.uniform(lo, 1.0, n)
        M = (Q * w) @ adj(Q)
        return 0.5 * (M + adj(M))

    return draw(0.0), draw(delta)


def strict_norm_for_delta(delta: float) -> float:
    """Operator norm whose strictness margin is ``delta``."""
    return float(np.sqrt(1.0 - delta * delta))

