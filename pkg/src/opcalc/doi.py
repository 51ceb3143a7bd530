"""Double operator integrals over finite spectral decompositions.

For unitaries ``U = sum e^{i lambda_j} P_j`` and ``V = sum e^{i mu_k} Q_k``
the transformer is ``X -> sum_{j,k} Phi(lambda_j, mu_k) P_j X Q_k``. It is
evaluated in the two eigenbases as a Hadamard product, which is the same
double sum regrouped and does not depend on summation order.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .circlefn import CircleFunction, divided_difference_table, evaluate
from .linalg import SpectralDecomp, adj, as_cmat, schatten_norm, unitary_eig

DIAG_TOL = 1e-12
NEAR_DIAG = 1e-8


class NearDiagonalWarning(UserWarning):
    """A spectral pair fell between the diagonal tolerance and the grouping scale."""


@dataclass(frozen=True)
class DoiSymbol:
    """Symbol ``Phi(lambda, mu)``; ``evaluator`` is vectorized over broadcast arrays."""

    evaluator: Callable[[np.ndarray, np.ndarray], np.ndarray]
    sup_bound: float

    def table(self, lam, mu) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)[:, None]
        mu = np.asarray(mu, dtype=float)[None, :]
        out = np.asarray(self.evaluator(lam, mu), dtype=np.complex128)
        return np.broadcast_to(out, np.broadcast(lam, mu).shape)

    def __mul__(self, other: DoiSymbol) -> DoiSymbol:
        return DoiSymbol(lambda a, b: self.evaluator(a, b) * other.evaluator(a, b),
                         self.sup_bound * other.sup_bound)


def constant_symbol(c: complex = 1.0) -> DoiSymbol:
    return DoiSymbol(lambda a, b: np.full(np.broadcast(a, b).shape, c, dtype=np.complex128), abs(c))


def product_symbol(phi1, phi2, bound: float = 1.0) -> DoiSymbol:
    """``phi1(lambda) * phi2(mu)``."""
    return DoiSymbol(lambda a, b: phi1(a) * phi2(b), bound)


def linear_symbol(alpha: complex, phi: DoiSymbol, beta: complex, psi: DoiSymbol) -> DoiSymbol:
    return DoiSymbol(lambda a, b: alpha * phi.evaluator(a, b) + beta * psi.evaluator(a, b),
                     abs(alpha) * phi.sup_bound + abs(beta) * psi.sup_bound)


def h1_symbol(f: CircleFunction, diag_tol: float = DIAG_TOL) -> DoiSymbol:
    """Divided-difference symbol of ``f``; its sup is the chordal Lipschitz seminorm."""
    return DoiSymbol(lambda a, b: _h1_eval(f, a, b, diag_tol), f.lip_chordal)


def _h1_eval(f, a, b, diag_tol):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim == 2 and a.shape[1] == 1 and b.ndim == 2 and b.shape[0] == 1:
        return divided_difference_table(f, a[:, 0], b[0, :], diag_tol)
    a, b = np.broadcast_arrays(a, b)
    return divided_difference_table(f, a.ravel(), b.ravel(), diag_tol).diagonal().reshape(a.shape)


def _check_decomp(E: SpectralDecomp, tol: float = 1e-10) -> None:
    V = E.vectors
    res = np.max(np.abs(adj(V) @ V - np.eye(V.shape[1])))
    if res > tol:
        raise ValueError(f"spectral decomposition is not orthonormal (residual {res:.3e})")


def doi_apply(phi: DoiSymbol, E: SpectralDecomp, F: SpectralDecomp, X, *,
              check_bound: bool = True, bound_rtol: float = 1e-9) -> np.ndarray:
    """``sum_{j,k} Phi(lambda_j, mu_k) P_j X Q_k``."""
    X = as_cmat(X)
    if X.shape != (E.dim, F.dim):
        raise ValueError(f"dimension mismatch: X is {X.shape}, decompositions {E.dim}x{F.dim}")
    _check_decomp(E)
    _check_decomp(F)
    sym = phi.table(E.phases, F.phases)
    if check_bound:
        worst = float(np.max(np.abs(sym))) if sym.size else 0.0
        if worst > phi.sup_bound * (1 + bound_rtol) + 1e-12:
            raise ValueError(f"symbol exceeds its sup bound: {worst!r} > {phi.sup_bound!r}")
    weights = sym[np.ix_(E.labels, F.labels)]
    Xt = adj(E.vectors) @ X @ F.vectors
    return E.vectors @ (weights * Xt) @ adj(F.vectors)


def doi_apply_sum(phi: DoiSymbol, E: SpectralDecomp, F: SpectralDecomp, X) -> np.ndarray:
    """The double sum over spectral projections, term by term (reference route)."""
    X = as_cmat(X)
    out = np.zeros_like(X)
    sym = phi.table(E.phases, F.phases)
    Ps, Qs = E.projections(), F.projections()
    for j, P in enumerate(Ps):
        PX = P @ X
        for k, Q in enumerate(Qs):
            out += sym[j, k] * (PX @ Q)
    return out


def _near_diagonal_count(E: SpectralDecomp, F: SpectralDecomp, diag_tol: float) -> int:
    gap = np.abs(np.exp(1j * E.phases)[:, None] - np.exp(1j * F.phases)[None, :])
    return int(np.count_nonzero((gap > diag_tol) & (gap <= NEAR_DIAG)))


def birman_solomyak_delta(f: CircleFunction, U, V, *, diag_tol: float = DIAG_TOL,
                          tol: float = 1e-10, group_tol: float = 1e-8,
                          decomps: tuple[SpectralDecomp, SpectralDecomp] | None = None) -> np.ndarray:
    """Divided-difference transform of ``U - V``, which equals ``f(U) - f(V)``."""
    U = as_cmat(U, square=True)
    V = as_cmat(V, square=True)
    if decomps is None:
        decomps = (unitary_eig(U, tol, group_tol), unitary_eig(V, tol, group_tol))
    E, F = decomps
    near = _near_diagonal_count(E, F, diag_tol)
    if near:
        warnings.warn(f"{near} spectral pairs within {NEAR_DIAG:g} of the diagonal",
                      NearDiagonalWarning, stacklevel=2)
    return doi_apply(h1_symbol(f, diag_tol), E, F, U - V)


def commutator_identity_check(f: CircleFunction, U, V, X, *, diag_tol: float = DIAG_TOL,
                              decomps: tuple[SpectralDecomp, SpectralDecomp] | None = None) -> float:
    """``||f(U)X - Xf(V) - T_h(UX - XV)||_2``."""
    U = as_cmat(U, square=True)
    V = as_cmat(V, square=True)
    X = as_cmat(X)
    if decomps is None:
        decomps = (unitary_eig(U), unitary_eig(V))
    E, F = decomps
    fU = E.apply(lambda t: evaluate(f, t))
    fV = F.apply(lambda t: evaluate(f, t))
    rhs = doi_apply(h1_symbol(f, diag_tol), E, F, U @ X - X @ V)
    return schatten_norm(fU @ X - X @ fV - rhs, 2)


def doi_algebra_check(E: SpectralDecomp, F: SpectralDecomp, phi: DoiSymbol, psi: DoiSymbol, X,
                      alpha: complex = 1.0, beta: complex = 1.0) -> tuple[float, float]:
    """Residuals of ``T_{phi psi} = T_phi T_psi`` and of linearity in the symbol."""
    X = as_cmat(X)
    prod = doi_apply(phi * psi, E, F, X)
    comp = doi_apply(phi, E, F, doi_apply(psi, E, F, X))
    lin = doi_apply(linear_symbol(alpha, phi, beta, psi), E, F, X)
    sep = alpha * doi_apply(phi, E, F, X) + beta * doi_apply(psi, E, F, X)
    return schatten_norm(prod - comp, 2), schatten_norm(lin - sep, 2)
