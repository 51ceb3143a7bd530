"""Lipschitz-type inequalities for contractions and their explicit constants.

Each checker returns a :class:`BoundReport` (``lhs <= rhs`` is the claim).
Ratio measurements for the non-explicit constants return a
:class:`RatioRecord` and are never asserted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .calculus import Contraction, as_contraction, calc_fourier, defects, finite_dilation
from .circlefn import CircleFunction, weighted_coeff_sum
from .linalg import INF, adj, as_cmat, herm_eig, parse_order, schatten_norm

ABS_TOL = 1e-9


@dataclass
class BoundReport:
    lhs: float
    rhs: float
    constant_used: float
    p: float
    instance_id: str = ""
    details: dict = field(default_factory=dict)

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def abs_tol(self) -> float:
        return ABS_TOL * max(1.0, self.rhs)

    @property
    def passed(self) -> bool:
        return self.slack >= -self.abs_tol


@dataclass
class RatioRecord:
    """``||f(T1) - f(T0)||_p / (||f||_arc ||T1 - T0||_p)`` with reference envelopes.

    ``envelope`` is ``2^{1/p}(2 + delta)/delta`` (the dilation constant; the
    unknown unitary constant multiplies it). ``mixed_ratio`` uses the
    denominator ``max(||dT||_p, ||dT||_{p/2}^{1/2})`` and ``k_p`` its constant.
    """

    ratio: float
    p: float
    f_id: str
    delta: float
    envelope: float
    k_p: float
    mixed_ratio: float
    lip_arc: float
    lip_chordal: float
    diff_norm: float
    gap_norm: float
    instance_id: str = ""


def dilation_constant(delta: float, p) -> float:
    """``2^{1/p} (2 + delta) / delta``."""
    p = parse_order(p)
    if delta <= 0:
        raise ValueError("strictness margin must be positive")
    root = 1.0 if p == INF else 2.0 ** (1.0 / p)
    return root * (2.0 + delta) / delta


def k_p(p) -> float:
    """Mixed-norm constant ``2^{1/p}(1 + sqrt 2)`` for ``p >= 2``, ``2^{1/p}(1 + 2^{2/p})`` below."""
    p = parse_order(p)
    if p == INF:
        return 1.0 + math.sqrt(2.0)
    root = 2.0 ** (1.0 / p)
    return root * (1.0 + math.sqrt(2.0)) if p >= 2 else root * (1.0 + 2.0 ** (2.0 / p))


def schatten_quasi(M, q: float) -> float:
    """``(sum s_i^q)^{1/q}`` for any ``q > 0`` (a quasi-norm when ``q < 1``)."""
    if q == INF:
        return schatten_norm(M, INF)
    s = np.linalg.svd(as_cmat(M), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0.0
    return float(s[0] * np.sum((s / s[0]) ** q) ** (1.0 / q))


# -- exponential integral for A - B -------------------------------------------


@dataclass(frozen=True)
class QuadConfig:
    """Gauss-Legendre settings on ``[0, t_max]``.

    ``adaptive`` bisects panels until the two-level difference is below
    ``tol`` times the integrand scale; otherwise ``panels`` equal panels are
    used. ``t_max`` defaults to ``max(40/delta, 40)``.
    """

    order: int = 16
    tol: float = 1e-13
    max_depth: int = 48
    adaptive: bool = True
    panels: int = 1
    t_max: float | None = None


def _gl_panel(C, R, a, b, x, w):
    t = 0.5 * (b - a) * x + 0.5 * (a + b)
    acc = np.zeros_like(C)
    for ti, wi in zip(t, w):
        acc += wi * np.exp(-ti * R)
    return C * acc * (0.5 * (b - a))


def exp_integral_diff(A, B, delta: float, quad: QuadConfig = QuadConfig()) -> tuple[np.ndarray, float]:
    """Quadrature of ``int_0^inf e^{-tA} (A^2 - B^2) e^{-tB} dt``, which equals ``A - B``.

    ``A, B`` are positive contractions with ``B >= delta I``. The integrand is
    formed in the eigenbases of ``A`` and ``B``. Returns the integral and an
    error estimate: accumulated panel differences plus the analytic tail
    ``||A^2 - B^2|| e^{-delta t_max}/delta``.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    A = as_cmat(A, square=True)
    B = as_cmat(B, square=True)
    a, Va = herm_eig(A)
    b, Vb = herm_eig(B)
    if a[0] < -1e-10 or b[0] < -1e-10:
        raise ValueError("inputs must be positive semidefinite")
    if b[0] < delta - 1e-10:
        raise ValueError(f"B is not bounded below by delta ({b[0]!r} < {delta!r})")
    D2 = A @ A - B @ B
    C = adj(Va) @ D2 @ Vb
    R = np.clip(a, 0.0, None)[:, None] + b[None, :]
    t_max = quad.t_max if quad.t_max is not None else max(40.0 / delta, 40.0)
    x, w = np.polynomial.legendre.leggauss(quad.order)
    scale = float(np.max(np.abs(C))) if C.size else 0.0
    total = np.zeros_like(C)
    err = 0.0
    if scale == 0.0:
        return np.zeros_like(A), 0.0
    if quad.adaptive:
        # dyadic starting panels resolve the fast-decaying modes near t = 0
        edges = [0.0] + [2.0 ** k for k in range(-3, 64) if 2.0 ** k < t_max] + [t_max]
        stack = [(lo, hi, _gl_panel(C, R, lo, hi, x, w), 0)
                 for lo, hi in zip(edges[-2::-1], edges[:0:-1])]
        while stack:
            lo, hi, whole, depth = stack.pop()
            mid = 0.5 * (lo + hi)
            left = _gl_panel(C, R, lo, mid, x, w)
            right = _gl_panel(C, R, mid, hi, x, w)
            diff = float(np.linalg.norm(left + right - whole))
            if diff <= quad.tol * scale or depth >= quad.max_depth:
                total += left + right
                err += diff
            else:
                stack.append((mid, hi, right, depth + 1))
                stack.append((lo, mid, left, depth + 1))
    else:
        edges = np.linspace(0.0, t_max, quad.panels + 1)
        for lo, hi in zip(edges[:-1], edges[1:]):
            total += _gl_panel(C, R, lo, hi, x, w)
    tail = schatten_norm(D2, INF) * math.exp(-delta * t_max) / delta
    return Va @ total @ adj(Vb), err + tail


# -- checkers ---------------------------------------------------------------


def sqrt_lipschitz_check(A, B, delta: float, p) -> BoundReport:
    """``||A - B||_p <= ||A^2 - B^2||_p / delta`` for positive ``A`` and ``B >= delta I``."""
    p = parse_order(p)
    A = as_cmat(A, square=True)
    B = as_cmat(B, square=True)
    if delta <= 0:
        raise ValueError("delta must be positive")
    b, _ = herm_eig(B)
    if b[0] < delta - 1e-10:
        raise ValueError("B is not bounded below by delta")
    lhs = schatten_norm(A - B, p)
    sq = schatten_norm(A @ A - B @ B, p)
    return BoundReport(lhs, sq / delta, 1.0 / delta, p)


def _strict(T: Contraction, what: str) -> None:
    if not T.is_strict:
        raise ValueError(f"{what} must be a strict contraction")


def defect_diff_check(T0, T1, p) -> tuple[BoundReport, BoundReport]:
    """Defect differences against ``2/delta ||T1 - T0||_p``, ``delta = sqrt(1 - ||T0||^2)``.

    ``details['gram']`` holds ``(||T1*T1 - T0*T0||_p, 2||T1 - T0||_p)`` and
    ``details['gram_star']`` the same for ``T T*``.
    """
    p = parse_order(p)
    T0, T1 = as_contraction(T0), as_contraction(T1)
    _strict(T0, "T0")
    d0, d1 = defects(T0), defects(T1)
    gap = schatten_norm(T1.mat - T0.mat, p)
    c = 2.0 / T0.delta
    gram = schatten_norm(T1.H @ T1.mat - T0.H @ T0.mat, p)
    gram_s = schatten_norm(T1.mat @ T1.H - T0.mat @ T0.H, p)
    det = {"gram": (gram, 2 * gap), "gram_star": (gram_s, 2 * gap)}
    rd = BoundReport(schatten_norm(d1.d_t - d0.d_t, p), c * gap, c, p, details=dict(det))
    rs = BoundReport(schatten_norm(d1.d_tstar - d0.d_tstar, p), c * gap, c, p, details=dict(det))
    return rd, rs


def dilation_diff_check(T0, T1, N: int, p) -> BoundReport:
    """``||u1 - u0||_p <= 2^{1/p}(2 + delta)/delta ||T1 - T0||_p`` for finite dilations.

    ``details`` records the two-term split: the shift part
    ``2^{1/p}||dT||_p`` and the defect part ``(||dD*||^p + ||dD||^p)^{1/p}``.
    """
    p = parse_order(p)
    T0, T1 = as_contraction(T0), as_contraction(T1)
    _strict(T0, "T0")
    u0 = finite_dilation(T0, N).u
    u1 = finite_dilation(T1, N).u
    gap = schatten_norm(T1.mat - T0.mat, p)
    c = dilation_constant(T0.delta, p)
    d0, d1 = defects(T0), defects(T1)
    nd = schatten_norm(d1.d_t - d0.d_t, p)
    nds = schatten_norm(d1.d_tstar - d0.d_tstar, p)
    if p == INF:
        shift_part, defect_part = gap, max(nd, nds)
    else:
        shift_part = 2.0 ** (1.0 / p) * gap
        defect_part = (nd ** p + nds ** p) ** (1.0 / p)
    det = {"shift_part": shift_part, "defect_part": defect_part}
    return BoundReport(schatten_norm(u1 - u0, p), c * gap, c, p, details=det)


def _fdiff(f: CircleFunction, T0, T1) -> np.ndarray:
    return calc_fourier(f, T1)[0] - calc_fourier(f, T0)[0]


def series_bound_check(f: CircleFunction, T0, T1, p) -> BoundReport:
    """``||f(T1) - f(T0)||_p <= (sum_{n != 0} |n fhat(n)|) ||T1 - T0||_p``."""
    p = parse_order(p)
    T0, T1 = as_contraction(T0), as_contraction(T1)
    c = weighted_coeff_sum(f)
    gap = schatten_norm(T1.mat - T0.mat, p)
    return BoundReport(schatten_norm(_fdiff(f, T0, T1), p), c * gap, c, p)


def strict_pair_check(f: CircleFunction, T0, T1, p) -> BoundReport:
    """``||f(T1) - f(T0)||_p <= sqrt2 ||f||_chord (1 - max(||T0||, ||T1||)^2)^{-1/2} ||T1 - T0||_p``."""
    p = parse_order(p)
    T0, T1 = as_contraction(T0), as_contraction(T1)
    _strict(T0, "T0")
    _strict(T1, "T1")
    r = max(T0.norm, T1.norm)
    c = math.sqrt(2.0) * f.lip_chordal / math.sqrt((1.0 - r) * (1.0 + r))
    gap = schatten_norm(T1.mat - T0.mat, p)
    return BoundReport(schatten_norm(_fdiff(f, T0, T1), p), c * gap, c, p)


def chain_check(f: CircleFunction, T0, T1) -> BoundReport:
    """Hilbert-Schmidt bound through the dilation:
    ``||f(T1) - f(T0)||_2 <= sqrt2 (2 + delta)/delta ||f||_chord ||T1 - T0||_2``."""
    T0, T1 = as_contraction(T0), as_contraction(T1)
    _strict(T0, "T0")
    c = dilation_constant(T0.delta, 2) * f.lip_chordal
    gap = schatten_norm(T1.mat - T0.mat, 2)
    return BoundReport(schatten_norm(_fdiff(f, T0, T1), 2), c * gap, c, 2.0)


def lipschitz_ratio(f: CircleFunction, T0, T1, p, N: int | None = None, f_id: str = "") -> RatioRecord:
    """Measured ratio against the arc-length seminorm; never asserted.

    ``N`` (default ``2 deg f + 2``) is checked against the degree so the
    compression route is valid; the difference itself uses the series route.
    """
    p = parse_order(p)
    T0, T1 = as_contraction(T0), as_contraction(T1)
    if N is None:
        N = 2 * f.degree + 2
    if f.degree > N:
        raise ValueError(f"degree {f.degree} exceeds dilation degree {N}")
    dT = T1.mat - T0.mat
    gap = schatten_norm(dT, p)
    arc = f.lip_arc
    if gap < 1e-12 or arc < 1e-12:
        raise ValueError("degenerate ratio denominator")
    diff = schatten_norm(_fdiff(f, T0, T1), p)
    mixed_den = max(gap, math.sqrt(schatten_quasi(dT, p / 2.0))) if p != INF else gap
    env = dilation_constant(T0.delta, p) if T0.is_strict else math.inf
    return RatioRecord(
        ratio=diff / (arc * gap), p=p, f_id=f_id or (f.name or ""), delta=T0.delta,
        envelope=env, k_p=k_p(p), mixed_ratio=diff / (arc * mixed_den), lip_arc=arc,
        lip_chordal=f.lip_chordal, diff_norm=diff, gap_norm=gap,
    )
