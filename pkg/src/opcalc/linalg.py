"""Dense complex matrix kernel.

Matrices are plain ``complex128`` numpy arrays. Every routine here is a pure
function of its inputs; nothing caches or mutates.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg

INF = math.inf

# singular values below this fraction of sigma_max count as zero for p < 1.5
_SV_FLOOR = 1e-14


def as_cmat(M, *, square: bool = False) -> np.ndarray:
    """Validate ``M`` as a finite 2-D complex matrix and return a complex128 copy."""
    A = np.array(M, dtype=np.complex128)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-D matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    if square and A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    return A


def adj(M: np.ndarray) -> np.ndarray:
    return M.conj().T


def _check_order(p) -> float:
    if isinstance(p, str):
        if p.strip().lower() in ("inf", "infinity"):
            return INF
        try:
            p = float(p)
        except ValueError:
            raise ValueError(f"unknown Schatten order {p!r}") from None
    p = float(p)
    if math.isnan(p) or p < 1:
        raise ValueError(f"Schatten order must be >= 1, got {p}")
    return p


def parse_order(p) -> float:
    """Normalize a Schatten order: a real ``>= 1`` or ``inf`` (also the strings "inf"/"INF")."""
    return _check_order(p)


def schatten_norm(M, p) -> float:
    r"""Schatten ``p``-norm, the :math:`\ell^p` norm of the singular values.

    ``p = inf`` gives the operator norm.
    """
    p = _check_order(p)
    A = as_cmat(M)
    s = np.linalg.svd(A, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0.0
    if p == INF:
        return float(s[0])
    if p < 1.5:
        s = s[s > _SV_FLOOR * s[0]]
    if p == 1.0:
        return float(np.sum(s))
    if p == 2.0:
        return float(np.sqrt(np.sum(s * s)))
    # scale first so large p does not overflow
    return float(s[0] * np.sum((s / s[0]) ** p) ** (1.0 / p))


def op_norm(M) -> float:
    return schatten_norm(M, INF)


def herm_eig(H, tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending.

    The input is symmetrized as ``(H + H*)/2`` after the Hermitian check.
    """
    H = as_cmat(H, square=True)
    scale = op_norm(H)
    skew = op_norm(H - adj(H))
    if skew > tol * max(scale, 1.0):
        raise ValueError(f"matrix is not Hermitian (skew part {skew:.3e})")
    w, V = np.linalg.eigh(0.5 * (H + adj(H)))
    return w, V


def psd_sqrt(H, tol: float = 1e-10) -> np.ndarray:
    """Positive square root of a positive semidefinite matrix.

    Eigenvalues in ``[-tol, 0)`` are clamped to zero; anything lower is an error.
    """
    w, V = herm_eig(H, tol)
    if w.size and w[0] < -tol:
        raise ValueError(f"matrix is not positive semidefinite (eigenvalue {w[0]:.3e})")
    r = np.sqrt(np.clip(w, 0.0, None))
    S = (V * r) @ adj(V)
    return 0.5 * (S + adj(S))


def herm_func(H, func, tol: float = 1e-10) -> np.ndarray:
    """Apply a scalar function to a Hermitian matrix through its eigenbasis."""
    w, V = herm_eig(H, tol)
    return (V * func(w)) @ adj(V)


def expm_herm(H, t: float = 1.0, tol: float = 1e-10) -> np.ndarray:
    """``exp(t H)`` for Hermitian ``H``."""
    return herm_func(H, lambda w: np.exp(t * w), tol)


@dataclass(frozen=True, eq=False)
class SpectralDecomp:
    """Spectral resolution of a unitary matrix.

    ``vectors`` is unitary; column ``c`` belongs to group ``labels[c]`` whose
    phase is ``phases[labels[c]]``. Groups are the distinct spectral
    projections after merging eigenvalues closer than the grouping tolerance.
    """

    phases: np.ndarray
    vectors: np.ndarray
    labels: np.ndarray

    @property
    def dim(self) -> int:
        return self.vectors.shape[0]

    @property
    def column_phases(self) -> np.ndarray:
        return self.phases[self.labels]

    def projections(self) -> list[np.ndarray]:
        out = []
        for g in range(len(self.phases)):
            Vg = self.vectors[:, self.labels == g]
            out.append(Vg @ adj(Vg))
        return out

    def apply(self, func) -> np.ndarray:
        """``sum_j func(phase_j) P_j`` for a vectorized ``func`` of the phase."""
        vals = np.asarray(func(self.phases), dtype=np.complex128)[self.labels]
        return (self.vectors * vals) @ adj(self.vectors)

    def matrix(self) -> np.ndarray:
        return self.apply(lambda t: np.exp(1j * t))


def unitarity_residual(U) -> float:
    U = np.asarray(U)
    return op_norm(adj(U) @ U - np.eye(U.shape[1]))


def _group_phases(phases: np.ndarray, group_tol: float) -> tuple[np.ndarray, np.ndarray]:
    n = phases.size
    order = np.argsort(phases, kind="stable")
    sp = phases[order]
    labels_sorted = np.zeros(n, dtype=int)
    g = 0
    for i in range(1, n):
        if sp[i] - sp[i - 1] > group_tol:
            g += 1
        labels_sorted[i] = g
    ngroups = g + 1
    # a cluster straddling the 0 / 2pi cut joins the first one
    if ngroups > 1 and sp[0] + 2 * np.pi - sp[-1] <= group_tol:
        labels_sorted[labels_sorted == ngroups - 1] = 0
        ngroups -= 1
    labels = np.empty(n, dtype=int)
    labels[order] = labels_sorted
    reps = np.empty(ngroups)
    for k in range(ngroups):
        z = np.exp(1j * phases[labels == k]).mean()
        reps[k] = np.angle(z) % (2 * np.pi)
    return reps, labels


def unitary_eig(U, tol: float = 1e-10, group_tol: float = 1e-8) -> SpectralDecomp:
    """Spectral decomposition of a unitary matrix via the complex Schur form.

    Phases lie in ``[0, 2pi)``; eigenvalues within ``group_tol`` radians of
    each other share one spectral projection.
    """
    U = as_cmat(U, square=True)
    res = unitarity_residual(U)
    if res > tol:
        raise ValueError(f"matrix is not unitary (residual {res:.3e})")
    Tri, Z = scipy.linalg.schur(U, output="complex")
    phases = np.angle(np.diag(Tri)) % (2 * np.pi)
    # angle() can return exactly 2pi after the modulo of a tiny negative number
    phases[phases >= 2 * np.pi] = 0.0
    reps, labels = _group_phases(phases, group_tol)
    return SpectralDecomp(phases=reps, vectors=Z, labels=labels)


# -- matrix files -----------------------------------------------------------


def matrix_to_json(M) -> dict:
    A = as_cmat(M)
    entries = [[float(z.real), float(z.imag)] for z in A.ravel()]
    return {"rows": int(A.shape[0]), "cols": int(A.shape[1]), "entries": entries}


def matrix_from_json(obj: dict) -> np.ndarray:
    rows, cols = int(obj["rows"]), int(obj["cols"])
    entries = obj["entries"]
    if len(entries) != rows * cols:
        raise ValueError(f"expected {rows * cols} entries, got {len(entries)}")
    flat = np.array([complex(re, im) for re, im in entries], dtype=np.complex128)
    return as_cmat(flat.reshape(rows, cols))


def save_matrix(path, M) -> None:
    Path(path).write_text(json.dumps(matrix_to_json(M)))


def load_matrix(path) -> np.ndarray:
    return matrix_from_json(json.loads(Path(path).read_text()))
