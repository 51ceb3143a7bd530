"""Contractions, defect operators, finite unitary dilations and functional calculus.

Three routes to ``f(T)``:

* :func:`calc_fourier` sums ``a_n T^n`` with ``T^{-n} = (T*)^n``;
* :func:`calc_spectral` applies ``f`` to the spectrum of a unitary;
* :func:`calc_dilation` compresses ``f(u)`` for a finite unitary dilation ``u``.

For trigonometric polynomials of degree at most the dilation degree the three
agree to roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circlefn import CircleFunction, evaluate
from .linalg import adj, as_cmat, op_norm, psd_sqrt, unitarity_residual, unitary_eig

NORM_SLACK = 1e-10


@dataclass(frozen=True, eq=False)
class Contraction:
    """A square matrix with operator norm at most one.

    ``delta`` is ``sqrt(1 - norm^2)``, the strictness margin (zero when the
    norm is one). ``renormalized`` marks inputs whose norm exceeded one by
    roundoff and were scaled back.
    """

    mat: np.ndarray
    norm: float
    delta: float
    renormalized: bool = False

    @classmethod
    def from_matrix(cls, M, slack: float = NORM_SLACK) -> Contraction:
        A = as_cmat(M, square=True)
        nrm = op_norm(A)
        flagged = False
        if nrm > 1.0 + slack:
            raise ValueError(f"not a contraction: operator norm {nrm!r}")
        if nrm > 1.0:
            A = A / nrm
            nrm = op_norm(A)
            flagged = True
            if nrm > 1.0:
                nrm = 1.0
        delta = float(np.sqrt(max(0.0, 1.0 - nrm * nrm))) if nrm < 1.0 else 0.0
        A.setflags(write=False)
        return cls(A, float(nrm), delta, flagged)

    @property
    def n(self) -> int:
        return self.mat.shape[0]

    @property
    def is_strict(self) -> bool:
        return self.norm < 1.0

    @property
    def H(self) -> np.ndarray:
        return adj(self.mat)


def as_contraction(T) -> Contraction:
    return T if isinstance(T, Contraction) else Contraction.from_matrix(T)


def _mat(T) -> np.ndarray:
    return T.mat if isinstance(T, Contraction) else as_cmat(T, square=True)


@dataclass(frozen=True, eq=False)
class DefectPair:
    d_t: np.ndarray
    d_tstar: np.ndarray


def defects(T) -> DefectPair:
    """``D_T = (I - T*T)^{1/2}`` and ``D_{T*} = (I - TT*)^{1/2}``.

    Both roots come from one SVD ``T = W S V*`` as ``V c V*`` and ``W c W*``
    with ``c = sqrt((1 - s)(1 + s))``, so ``T D_T = D_{T*} T`` holds to
    roundoff even when ``||T|| = 1``.
    """
    T = as_contraction(T)
    W, s, Vh = np.linalg.svd(T.mat)
    s = np.clip(s, 0.0, 1.0)
    c = np.sqrt((1.0 - s) * (1.0 + s))
    d_t = (adj(Vh) * c) @ Vh
    d_ts = (W * c) @ adj(W)
    return DefectPair(0.5 * (d_t + adj(d_t)), 0.5 * (d_ts + adj(d_ts)))


def defects_direct(T) -> DefectPair:
    """Defects as separate positive square roots; reference route for tests."""
    A = _mat(T)
    I = np.eye(A.shape[0])
    return DefectPair(psd_sqrt(I - adj(A) @ A), psd_sqrt(I - A @ adj(A)))


def defect_residuals(T, pair: DefectPair) -> dict[str, float]:
    A = _mat(T)
    I = np.eye(A.shape[0])
    return {
        "d_t": op_norm(pair.d_t @ pair.d_t + adj(A) @ A - I),
        "d_tstar": op_norm(pair.d_tstar @ pair.d_tstar + A @ adj(A) - I),
        "intertwine": op_norm(A @ pair.d_t - pair.d_tstar @ A),
    }


@dataclass(frozen=True, eq=False)
class FiniteDilation:
    """Unitary on ``N + 1`` copies of the base space whose compression to
    block ``block_index_of_H`` reproduces ``T^k`` for ``|k| <= valid_degree``."""

    u: np.ndarray
    base_dim: int
    valid_degree: int
    block_index_of_H: int = 0
    unitarity_residual: float = 0.0

    def compress(self, M: np.ndarray) -> np.ndarray:
        n, b = self.base_dim, self.block_index_of_H
        return M[b * n:(b + 1) * n, b * n:(b + 1) * n]

    def embed(self, X: np.ndarray) -> np.ndarray:
        """``X`` placed in the H block, zeros elsewhere."""
        m = self.u.shape[0]
        n, b = self.base_dim, self.block_index_of_H
        out = np.zeros((m, m), dtype=np.complex128)
        out[b * n:(b + 1) * n, b * n:(b + 1) * n] = X
        return out

    def block(self, i: int, j: int) -> np.ndarray:
        n = self.base_dim
        return self.u[i * n:(i + 1) * n, j * n:(j + 1) * n]


def dilation_matrix(T, N: int, pair: DefectPair | None = None) -> np.ndarray:
    """Block matrix on ``H^{N+1}``.

    First block column ``[T; D_T; 0; ...]``, last ``[D_{T*}; -T*; 0; ...]``,
    identities on the subdiagonal between them. ``N = 1`` is the rotation
    ``[[T, D_{T*}], [D_T, -T*]]``.
    """
    if N < 1:
        raise ValueError("dilation degree must be >= 1")
    A = _mat(T)
    n = A.shape[0]
    if pair is None:
        pair = defects(T)
    u = np.zeros(((N + 1) * n, (N + 1) * n), dtype=np.complex128)

    def put(i, j, B):
        u[i * n:(i + 1) * n, j * n:(j + 1) * n] = B

    put(0, 0, A)
    put(1, 0, pair.d_t)
    put(0, N, pair.d_tstar)
    put(1, N, -adj(A))
    I = np.eye(n)
    for k in range(1, N):
        put(k + 1, k, I)
    return u


def finite_dilation(T, N: int, max_residual: float = 1e-8) -> FiniteDilation:
    T = as_contraction(T)
    u = dilation_matrix(T, N)
    res = unitarity_residual(u)
    if res > max_residual:
        raise ValueError(f"dilation is not unitary (residual {res:.3e}); defect computation failed")
    return FiniteDilation(u=u, base_dim=T.n, valid_degree=N, unitarity_residual=res)


def power_residuals(T, dil: FiniteDilation) -> np.ndarray:
    """``||P u^k P - T^k||`` for ``k = -N..N`` (operator norm)."""
    A = _mat(T)
    N = dil.valid_degree
    out = np.zeros(2 * N + 1)
    Uk = np.eye(dil.u.shape[0], dtype=np.complex128)
    Tk = np.eye(A.shape[0], dtype=np.complex128)
    out[N] = op_norm(dil.compress(Uk) - Tk)
    for k in range(1, N + 1):
        Uk = dil.u @ Uk
        Tk = A @ Tk
        out[N + k] = op_norm(dil.compress(Uk) - Tk)
        out[N - k] = op_norm(dil.compress(adj(Uk)) - adj(Tk))
    return out


def calc_fourier(f: CircleFunction, T) -> tuple[np.ndarray, float]:
    """``sum_{n<0} a_n (T*)^{|n|} + sum_{n>=0} a_n T^n``.

    The error bound is the truncation certificate carried by ``f`` (zero for
    an exact polynomial); the von Neumann inequality transfers it to the
    operator.
    """
    if not f.is_trig_poly:
        raise ValueError(f"calc_fourier needs a trigonometric polynomial; truncate {f.name!r} first")
    A = _mat(T)
    n = A.shape[0]
    out = np.zeros((n, n), dtype=np.complex128)
    pos = max((k for k in f.coeffs if k > 0), default=0)
    neg = max((-k for k in f.coeffs if k < 0), default=0)
    out += f.coeffs.get(0, 0) * np.eye(n)
    P = np.eye(n, dtype=np.complex128)
    for k in range(1, pos + 1):
        P = P @ A
        if k in f.coeffs:
            out += f.coeffs[k] * P
    Ah = adj(A)
    P = np.eye(n, dtype=np.complex128)
    for k in range(1, neg + 1):
        P = P @ Ah
        if -k in f.coeffs:
            out += f.coeffs[-k] * P
    return out, float(f.trunc_err)


def calc_spectral(f: CircleFunction, U, tol: float = 1e-10, group_tol: float = 1e-8) -> np.ndarray:
    """``sum_j f(e^{i lambda_j}) P_j`` over the spectral projections of ``U``."""
    E = unitary_eig(U, tol=tol, group_tol=group_tol)
    return E.apply(lambda t: evaluate(f, t))


def calc_dilation(f: CircleFunction, T, N: int | None = None) -> tuple[np.ndarray, float]:
    """Compression of ``f(u)`` to ``H`` for the finite dilation of degree ``N``.

    ``N`` defaults to ``2 deg f + 2``.
    """
    if not f.is_trig_poly:
        raise ValueError("calc_dilation needs a trigonometric polynomial")
    if N is None:
        N = 2 * f.degree + 2
    if f.degree > N:
        raise ValueError(f"degree {f.degree} exceeds dilation degree {N}")
    dil = finite_dilation(T, max(N, 1))
    return dil.compress(calc_spectral(f, dil.u)), float(f.trunc_err)
