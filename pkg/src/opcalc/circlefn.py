"""Functions on the unit circle held as Fourier coefficient tables.

A :class:`CircleFunction` is either a trigonometric polynomial (the
coefficient table is the function) or a closed-form sampler whose
coefficients are only an approximation. Seminorms are computed from the
coefficients for polynomials and taken from hints for sampler-only functions.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Mapping

import numpy as np
import scipy.optimize

TWO_PI = 2.0 * math.pi

# Jackson kernel certificate constant: sup_N N * (1/2pi) int |t| J_N(t) dt is
# below 2.65, the grid-quadrature remainder adds at most 2/64 of that.
JACKSON_CONSTANT = 3.0
_JACKSON_OVERSAMPLE = 64

_MIN_GRID = 8192


@dataclass(frozen=True, eq=False)
class CircleFunction:
    """Function ``t -> f(e^{it})`` on the unit circle.

    ``coeffs`` maps ``n`` to the Fourier coefficient of ``z^n``. When
    ``sampler`` is given and ``exact_coeffs`` is false, the sampler is the
    function and the coefficients (possibly empty) are not authoritative.
    """

    coeffs: Mapping[int, complex] = field(default_factory=dict)
    sampler: Callable[[np.ndarray], np.ndarray] | None = None
    exact_coeffs: bool = True
    name: str | None = None
    lip_arc_hint: float | None = None
    lip_chordal_hint: float | None = None
    trunc_err: float = 0.0

    def __post_init__(self):
        clean = {int(n): complex(c) for n, c in self.coeffs.items() if c != 0}
        object.__setattr__(self, "coeffs", clean)

    @property
    def degree(self) -> int:
        return max((abs(n) for n in self.coeffs), default=0)

    @property
    def is_trig_poly(self) -> bool:
        return self.sampler is None or self.exact_coeffs

    def __call__(self, t):
        return evaluate(self, t)

    def __add__(self, other: CircleFunction) -> CircleFunction:
        return combine(1.0, self, 1.0, other)

    def scaled(self, alpha: complex) -> CircleFunction:
        return CircleFunction({n: alpha * c for n, c in self.coeffs.items()}, name=self.name)

    def derivative(self) -> CircleFunction:
        """``d/dt f(e^{it})`` as a trigonometric polynomial."""
        self._require_poly("derivative")
        return CircleFunction({n: 1j * n * c for n, c in self.coeffs.items()})

    def _require_poly(self, what: str) -> None:
        if not self.is_trig_poly:
            raise ValueError(f"{what} needs a trigonometric polynomial, got sampler-only {self.name!r}")

    @cached_property
    def lip_arc(self) -> float:
        return lip_arc(self)

    @cached_property
    def lip_chordal(self) -> float:
        return lip_chordal(self)

    @cached_property
    def sup_norm(self) -> float:
        return sup_norm(self)


def combine(alpha: complex, f: CircleFunction, beta: complex, g: CircleFunction) -> CircleFunction:
    """Coefficientwise ``alpha f + beta g`` of two polynomials."""
    f._require_poly("combine")
    g._require_poly("combine")
    out: dict[int, complex] = {}
    for n, c in f.coeffs.items():
        out[n] = out.get(n, 0) + alpha * c
    for n, c in g.coeffs.items():
        out[n] = out.get(n, 0) + beta * c
    return CircleFunction(out, trunc_err=abs(alpha) * f.trunc_err + abs(beta) * g.trunc_err)


def monomial(n: int, c: complex = 1.0) -> CircleFunction:
    return CircleFunction({n: c}, name=f"z^{n}")


def evaluate(f: CircleFunction, t):
    """Value of ``f`` at ``e^{it}``; vectorized over ``t``."""
    t = np.asarray(t, dtype=float)
    if f.sampler is not None and not f.exact_coeffs:
        return np.asarray(f.sampler(t), dtype=np.complex128)
    out = np.zeros(t.shape, dtype=np.complex128)
    for n, c in f.coeffs.items():
        out = out + c * np.exp(1j * n * t)
    return out[()] if out.ndim == 0 else out


def _grid_size(degree: int) -> int:
    return max(_MIN_GRID, 1 << int(math.ceil(math.log2(32 * (degree + 1)))))


def _grid_values(coeffs: Mapping[int, complex], M: int) -> np.ndarray:
    a = np.zeros(M, dtype=np.complex128)
    for n, c in coeffs.items():
        a[n % M] += c
    return np.fft.ifft(a) * M


def _poly_eval(coeffs: Mapping[int, complex], t: float, order: int = 0) -> complex:
    return sum(c * (1j * n) ** order * np.exp(1j * n * t) for n, c in coeffs.items())


def sup_abs_certificate(coeffs: Mapping[int, complex]) -> tuple[float, float]:
    """Sup of ``|g|`` for a trigonometric polynomial ``g``.

    Returns ``(value, upper)``: ``value`` is the grid maximum refined by
    Newton steps on ``|g|^2`` at its largest local maxima; ``upper`` is a
    rigorous bound from the grid maximum plus the second-derivative term
    ``h^2/8 * sup|q''|`` of ``q = |g|^2``.
    """
    if not coeffs:
        return 0.0, 0.0
    d = max(abs(n) for n in coeffs)
    M = _grid_size(d)
    h = TWO_PI / M
    q = np.abs(_grid_values(coeffs, M)) ** 2
    qmax = float(q.max())

    ns = np.array(sorted(coeffs))
    cs = np.array([coeffs[n] for n in ns])
    # |q''| <= sum k^2 |qhat_k|, qhat the autocorrelation of the coefficients
    diff = ns[:, None] - ns[None, :]
    prod = np.abs(cs[:, None] * cs[None, :].conj())
    q2 = float(np.sum(diff.astype(float) ** 2 * prod))
    upper = math.sqrt(qmax + q2 * h * h / 8.0)

    is_peak = (q >= np.roll(q, 1)) & (q >= np.roll(q, -1))
    peaks = np.flatnonzero(is_peak)
    peaks = peaks[np.argsort(q[peaks])[::-1][:64]]
    best = qmax
    for j in peaks:
        t = j * h
        for _ in range(8):
            g0 = _poly_eval(coeffs, t)
            g1 = _poly_eval(coeffs, t, 1)
            g2 = _poly_eval(coeffs, t, 2)
            dq = 2.0 * (g0.conjugate() * g1).real
            d2q = 2.0 * (abs(g1) ** 2 + (g0.conjugate() * g2).real)
            if d2q >= 0:
                break
            step = -dq / d2q
            if abs(step) > h:
                break
            t += step
            if abs(step) < 1e-15:
                break
        best = max(best, abs(_poly_eval(coeffs, t)) ** 2)
    value = math.sqrt(best) * (1.0 + 1e-12)
    return value, max(upper, value)


def sup_norm(f: CircleFunction) -> float:
    """Uniform norm of ``f`` on the circle."""
    if not f.is_trig_poly:
        t = np.linspace(0.0, TWO_PI, 1 << 16, endpoint=False)
        return float(np.max(np.abs(evaluate(f, t))))
    return sup_abs_certificate(f.coeffs)[0]


def lip_arc(f: CircleFunction) -> float:
    r"""Arc-length Lipschitz seminorm :math:`\sup |f(e^{i\lambda})-f(e^{i\mu})|/|\lambda-\mu|`.

    For a trigonometric polynomial this is ``max_t |d/dt f(e^{it})|``.
    """
    if not f.is_trig_poly:
        if f.lip_arc_hint is None:
            raise ValueError(f"sampler-only function {f.name!r} has no Lipschitz hint")
        return float(f.lip_arc_hint)
    return sup_abs_certificate(f.derivative().coeffs)[0]


def _dirichlet(n: np.ndarray, s: np.ndarray) -> np.ndarray:
    """``(e^{ins} - 1)/(e^{is} - 1)`` with the limit ``n`` at ``s = 0``."""
    s = np.asarray(s, dtype=float)
    half = np.sin(s / 2.0)
    small = np.abs(half) < 1e-300
    safe = np.where(small, 1.0, half)
    ratio = np.where(small, n, np.sin(n * s / 2.0) / safe)
    return np.exp(0.5j * (n - 1) * s) * ratio


def _chordal_value(ns: np.ndarray, cs: np.ndarray, s: float, mu: float) -> float:
    return abs(np.sum(cs * _dirichlet(ns, s) * np.exp(1j * (ns - 1) * mu)))


def lip_chordal(f: CircleFunction) -> float:
    r"""Chordal Lipschitz seminorm :math:`\sup |f(z)-f(w)|/|z-w|` over the circle.

    Writes ``h(mu + s, mu) = sum_n a_n D_n(s) e^{i(n-1)mu}``, scans a grid in
    ``(s, mu)`` with ``s in [0, pi]``, and polishes the best cells locally.
    The ``s = 0`` edge is ``lip_arc``.
    """
    if not f.is_trig_poly:
        if f.lip_chordal_hint is None:
            raise ValueError(f"sampler-only function {f.name!r} has no Lipschitz hint")
        return float(f.lip_chordal_hint)
    if not f.coeffs or set(f.coeffs) == {0}:
        return 0.0
    arc = lip_arc(f)
    ns = np.array(sorted(n for n in f.coeffs if n != 0))
    cs = np.array([f.coeffs[n] for n in ns])
    d = int(np.max(np.abs(ns)))
    Ms = max(512, 32 * d)
    Mmu = max(64, 1 << int(math.ceil(math.log2(16 * (d + 2)))))
    s_grid = np.linspace(0.0, math.pi, Ms + 1)
    # row i: coefficients of e^{i(n-1)mu}, evaluated on the mu grid via FFT
    table = np.zeros((s_grid.size, Mmu), dtype=np.complex128)
    K = cs[None, :] * _dirichlet(ns[None, :], s_grid[:, None])
    for j, n in enumerate(ns):
        table[:, (n - 1) % Mmu] += K[:, j]
    vals = np.abs(np.fft.ifft(table, axis=1) * Mmu)
    flat = np.argsort(vals, axis=None)[::-1][:16]
    best = float(vals.max())

    def neg(x):
        return -_chordal_value(ns, cs, x[0], x[1])

    hs, hmu = math.pi / Ms, TWO_PI / Mmu
    for idx in flat:
        i, j = np.unravel_index(idx, vals.shape)
        x0 = np.array([s_grid[i], j * hmu])
        bounds = [(max(0.0, x0[0] - 2 * hs), min(math.pi, x0[0] + 2 * hs)),
                  (x0[1] - 2 * hmu, x0[1] + 2 * hmu)]
        res = scipy.optimize.minimize(neg, x0, method="L-BFGS-B", bounds=bounds,
                                      options={"ftol": 1e-15, "gtol": 1e-12})
        best = max(best, -float(res.fun))
    return max(best * (1.0 + 1e-12), arc)


def divided_difference(f: CircleFunction, lam, mu, diag_tol: float = 1e-12):
    """``(f(e^{i lam}) - f(e^{i mu})) / (e^{i lam} - e^{i mu})``, zero on the diagonal.

    Pairs with ``|e^{i lam} - e^{i mu}| <= diag_tol`` count as diagonal.
    """
    lam = np.asarray(lam, dtype=float)
    mu = np.asarray(mu, dtype=float)
    z, w = np.exp(1j * lam), np.exp(1j * mu)
    den = z - w
    diag = np.abs(den) <= diag_tol
    num = evaluate(f, lam) - evaluate(f, mu)
    out = np.where(diag, 0.0, num / np.where(diag, 1.0, den))
    return out[()] if np.ndim(out) == 0 else out


def divided_difference_table(f: CircleFunction, lam, mu, diag_tol: float = 1e-12) -> np.ndarray:
    """Divided difference on the grid ``lam[:, None] x mu[None, :]``.

    Polynomials use the cancellation-free kernel form; samplers fall back to
    the quotient.
    """
    lam = np.asarray(lam, dtype=float)[:, None]
    mu = np.asarray(mu, dtype=float)[None, :]
    if not f.is_trig_poly:
        return divided_difference(f, lam, mu, diag_tol)
    diag = np.abs(np.exp(1j * lam) - np.exp(1j * mu)) <= diag_tol
    s = lam - mu
    out = np.zeros(np.broadcast(lam, mu).shape, dtype=np.complex128)
    for n, c in f.coeffs.items():
        if n != 0:
            out += c * _dirichlet(n, s) * np.exp(1j * (n - 1) * mu)
    out[diag] = 0.0
    return out


def weighted_coeff_sum(f: CircleFunction) -> float:
    r""":math:`\sum_{n \ne 0} |n \hat f(n)|`."""
    f._require_poly("weighted_coeff_sum")
    return float(sum(abs(n * c) for n, c in f.coeffs.items()))


def jackson_weights(N: int) -> dict[int, float]:
    """Fourier multipliers of the normalized Jackson kernel of degree ``<= N``.

    The kernel is the squared Fejer kernel of order ``m = N//2 + 1``, so its
    degree is ``2(m - 1) <= N``.
    """
    if N < 1:
        raise ValueError("Jackson degree must be >= 1")
    m = N // 2 + 1
    tri = 1.0 - np.abs(np.arange(-m + 1, m)) / m
    j = np.convolve(tri, tri)
    j /= j[j.size // 2]
    half = j.size // 2
    return {k: float(j[k + half]) for k in range(-half, half + 1)}


def jackson_moment(N: int) -> float:
    r"""``(1/2pi) \int_{-pi}^{pi} |t| J_N(t) dt`` computed exactly from the multipliers."""
    total = 0.0
    for k, w in jackson_weights(N).items():
        total += w * (math.pi / 2 if k == 0 else ((-1.0) ** k - 1.0) / (math.pi * k * k))
    return total


def jackson_truncate(sampler, N: int, lipschitz: float, name: str | None = None,
                     M: int | None = None) -> tuple[CircleFunction, float]:
    """Jackson-kernel approximant of degree ``<= N`` with a uniform error certificate.

    ``lipschitz`` is an arc-length Lipschitz constant of the sampled function.
    The certificate ``JACKSON_CONSTANT * lipschitz / N`` covers the kernel
    moment and the grid quadrature used for the coefficients (``M`` points,
    default ``64 N``).
    """
    if N < 1:
        raise ValueError("truncation degree must be >= 1")
    if M is None:
        M = max(_JACKSON_OVERSAMPLE * N, 1024)
    t = np.arange(M) * (TWO_PI / M)
    vals = np.asarray(sampler(t), dtype=np.complex128) * np.ones(M)
    fhat = np.fft.fft(vals) / M
    coeffs = {k: w * fhat[k % M] for k, w in jackson_weights(N).items()}
    # kernel moment plus 2 * E_{M-N-1}(f) for the trapezoid coefficients
    cert = jackson_moment(N) * lipschitz + 2.0 * JACKSON_CONSTANT * lipschitz / (M - N - 1)
    err = JACKSON_CONSTANT * lipschitz / N
    if cert > err:
        err = cert
    label = f"{name}@J{N}" if name else None
    return CircleFunction(coeffs, name=label, trunc_err=err), err


# -- function zoo -----------------------------------------------------------


def _abs_im(t):
    return np.abs(np.sin(t)).astype(np.complex128)


def _sawtooth(t):
    r = np.mod(t, TWO_PI)
    return np.minimum(r, TWO_PI - r).astype(np.complex128)


def _random_trig(degree: int, seed: int) -> dict[int, complex]:
    rng = np.random.default_rng(seed)
    out = {}
    for n in range(-degree, degree + 1):
        z = complex(rng.standard_normal(), rng.standard_normal())
        out[n] = z / (1 + abs(n)) ** 2
    return out


def zoo() -> dict[str, CircleFunction]:
    """Built-in test functions keyed by id."""
    out: dict[str, CircleFunction] = {}
    for n in range(-8, 9):
        out[f"z^{n}"] = monomial(n)
    out["re_z"] = CircleFunction({1: 0.5, -1: 0.5}, name="re_z")
    out["im_z"] = CircleFunction({1: -0.5j, -1: 0.5j}, name="im_z")
    out["abs_im_z"] = CircleFunction(sampler=_abs_im, exact_coeffs=False, name="abs_im_z",
                                     lip_arc_hint=1.0, lip_chordal_hint=1.0)
    out["sawtooth"] = CircleFunction(sampler=_sawtooth, exact_coeffs=False, name="sawtooth",
                                     lip_arc_hint=1.0, lip_chordal_hint=math.pi / 2)
    out["rand_trig_4"] = CircleFunction(_random_trig(4, 1104), name="rand_trig_4")
    out["rand_trig_6"] = CircleFunction(_random_trig(6, 1106), name="rand_trig_6")
    return out


def trig_zoo(max_degree: int = 8, jackson_degree: int = 16) -> dict[str, CircleFunction]:
    """Polynomial members of the zoo plus Jackson truncations of the samplers."""
    out = {}
    jdeg = min(jackson_degree, max_degree)
    for key, f in zoo().items():
        if f.is_trig_poly:
            if f.degree <= max_degree:
                out[key] = f
        elif jdeg >= 1:
            g, _ = jackson_truncate(f.sampler, jdeg, f.lip_arc_hint, name=key)
            out[g.name] = g
    return out


def resolve(fid: str) -> CircleFunction:
    """Look up a zoo id; ``name@J<N>`` denotes a Jackson truncation."""
    base, _, jack = fid.partition("@J")
    f = zoo()[base]
    if jack:
        g, _ = jackson_truncate(f.sampler, int(jack), f.lip_arc_hint, name=base)
        return g
    return f


# -- files ------------------------------------------------------------------


def to_json(f: CircleFunction) -> dict:
    f._require_poly("to_json")
    obj: dict = {"degree": f.degree,
                 "coeffs": {str(n): [c.real, c.imag] for n, c in sorted(f.coeffs.items())}}
    if f.name:
        obj["zoo_name"] = f.name
    return obj


def from_json(obj: dict) -> CircleFunction:
    coeffs = {int(n): complex(re, im) for n, (re, im) in obj["coeffs"].items()}
    f = CircleFunction(coeffs, name=obj.get("zoo_name"))
    if f.degree > int(obj["degree"]):
        raise ValueError("coefficient table exceeds declared degree")
    return f


def save(path, f: CircleFunction) -> None:
    Path(path).write_text(json.dumps(to_json(f)))


def load(path) -> CircleFunction:
    return from_json(json.loads(Path(path).read_text()))
