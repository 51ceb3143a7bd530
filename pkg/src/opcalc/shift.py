"""Spectral shift function for a pair of contractions, recovered from trace moments.

With ``f(e^{it}) = e^{int}`` the trace formula reads
``Tr[(T1^(n) - T0^(n)) X] = i n * int e^{int} eta(t) dt``, so the Fourier
data of ``eta`` are ``moment(n) / (i n)``. The constant term is fixed to zero.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .calculus import calc_fourier, finite_dilation
from .circlefn import CircleFunction
from .linalg import adj, as_cmat

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True, eq=False)
class ShiftFunction:
    """``eta_N(t) = (1/2pi) sum_{0<|n|<=N} c(n) e^{-int}`` with ``c(n) = int e^{int} eta dt``."""

    N: int
    coeffs: dict

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape, dtype=np.complex128)
        for n, c in self.coeffs.items():
            out = out + c * np.exp(-1j * n * t)
        return out / TWO_PI

    def pairing(self, f: CircleFunction) -> complex:
        """``int_0^{2pi} (d/dt f(e^{it})) eta_N(t) dt`` by orthogonality."""
        if f.degree > self.N:
            raise ValueError(f"degree {f.degree} exceeds recovery degree {self.N}")
        return complex(sum(1j * n * a * self.coeffs.get(n, 0) for n, a in f.coeffs.items() if n))

    def l1_norm(self, grid: int = 4096) -> float:
        t = np.arange(grid) * (TWO_PI / grid)
        return float(np.mean(np.abs(self(t))) * TWO_PI)


def _power(A: np.ndarray, n: int) -> np.ndarray:
    B = A if n > 0 else adj(A)
    return np.linalg.matrix_power(B, abs(n))


def moment(T0, T1, X, n: int, route: str = "direct", N: int | None = None) -> complex:
    """``Tr[(T1^(n) - T0^(n)) X]`` with ``T^(n) = (T*)^{|n|}`` for ``n < 0``.

    ``route="dilation"`` computes the same quantity as the trace of the
    compressed difference of dilation powers (dilation degree ``N >= |n|``).
    """
    if n == 0:
        raise ValueError("the zeroth moment is not defined (constants carry no shift)")
    A0 = T0.mat if hasattr(T0, "mat") else as_cmat(T0, square=True)
    A1 = T1.mat if hasattr(T1, "mat") else as_cmat(T1, square=True)
    X = as_cmat(X)
    if route == "direct":
        D = _power(A1, n) - _power(A0, n)
    elif route == "dilation":
        deg = abs(n) if N is None else N
        if deg < abs(n):
            raise ValueError("dilation degree below the moment order")
        d0, d1 = finite_dilation(A0, deg), finite_dilation(A1, deg)
        D = d1.compress(_power(d1.u, n)) - d0.compress(_power(d0.u, n))
    else:
        raise ValueError(f"unknown route {route!r}")
    return complex(np.trace(D @ X))


def eta_recover(T0, T1, X, N: int, route: str = "direct") -> ShiftFunction:
    """Fourier data ``c(n) = moment(n) / (i n)`` for ``0 < |n| <= N``."""
    if N < 1:
        raise ValueError("recovery degree must be >= 1")
    A0 = T0.mat if hasattr(T0, "mat") else as_cmat(T0, square=True)
    A1 = T1.mat if hasattr(T1, "mat") else as_cmat(T1, square=True)
    X = as_cmat(X)
    coeffs = {}
    if route == "direct":
        # running powers: each moment reuses the previous power
        for base0, base1, sign in ((A0, A1, 1), (adj(A0), adj(A1), -1)):
            P0 = np.eye(A0.shape[0], dtype=np.complex128)
            P1 = P0.copy()
            for k in range(1, N + 1):
                P0 = P0 @ base0
                P1 = P1 @ base1
                n = sign * k
                coeffs[n] = complex(np.trace((P1 - P0) @ X)) / (1j * n)
    else:
        for n in range(-N, N + 1):
            if n:
                coeffs[n] = moment(A0, A1, X, n, route=route, N=N) / (1j * n)
    return ShiftFunction(N=N, coeffs=dict(sorted(coeffs.items())))


def trace_formula_check(f: CircleFunction, T0, T1, X, eta: ShiftFunction) -> float:
    """``|Tr[(f(T1) - f(T0)) X] - int (d/dt f) eta_N dt|``."""
    if f.degree > eta.N:
        raise ValueError(f"degree {f.degree} exceeds recovery degree {eta.N}")
    X = as_cmat(X)
    lhs = complex(np.trace((calc_fourier(f, T1)[0] - calc_fourier(f, T0)[0]) @ X))
    return abs(lhs - eta.pairing(f))


def uniqueness_check(eta1: ShiftFunction, eta2: ShiftFunction) -> float:
    """Largest coefficient deviation between two recoveries of the same degree."""
    if eta1.N != eta2.N:
        raise ValueError("recoveries have different degrees")
    keys = set(eta1.coeffs) | set(eta2.coeffs)
    return max((abs(eta1.coeffs.get(n, 0) - eta2.coeffs.get(n, 0)) for n in keys), default=0.0)


def arc_jump_coeffs(theta: float, N: int) -> dict:
    """``int_0^theta e^{int} dt`` for ``0 < |n| <= N`` (indicator of the arc ``(0, theta)``)."""
    return {n: (np.exp(1j * n * theta) - 1.0) / (1j * n) for n in range(-N, N + 1) if n}


# -- files ------------------------------------------------------------------


def to_json(eta: ShiftFunction) -> dict:
    return {"N": eta.N, "coeffs": {str(n): [c.real, c.imag] for n, c in eta.coeffs.items()}}


def from_json(obj: dict) -> ShiftFunction:
    coeffs = {int(n): complex(re, im) for n, (re, im) in obj["coeffs"].items()}
    N = int(obj["N"])
    if any(n == 0 or abs(n) > N for n in coeffs):
        raise ValueError("coefficient index outside 0 < |n| <= N")
    return ShiftFunction(N=N, coeffs=dict(sorted(coeffs.items())))


def save(path, eta: ShiftFunction) -> None:
    Path(path).write_text(json.dumps(to_json(eta)))


def load(path) -> ShiftFunction:
    return from_json(json.loads(Path(path).read_text()))


def plot_data(eta: ShiftFunction, grid: int = 1024) -> tuple[str, str]:
    """Two-column text ``t Re eta`` and ``t Im eta`` on a uniform grid."""
    t = np.arange(grid) * (TWO_PI / grid)
    v = eta(t)
    re = "\n".join(f"{a!r} {b!r}" for a, b in zip(t.tolist(), v.real.tolist())) + "\n"
    im = "\n".join(f"{a!r} {b!r}" for a, b in zip(t.tolist(), v.imag.tolist())) + "\n"
    return re, im
