"""Dense Hermitian/SPD helpers for the small per-point coefficient matrices.

Everything here operates on k-by-k matrices with k rarely above 9, so the
eigendecompositions are delegated to LAPACK via ``numpy.linalg``; the wrappers
add the validation and relative-tolerance conventions the rest of the package
relies on.  All tolerances are relative to the norm of the input, with an
absolute floor of 1e-300 so zero matrices compare cleanly.
"""

from __future__ import annotations

import numpy as np

from .errors import ConvergenceError, MatrixError, SingularMatrixError

__all__ = [
    "HermitianMatrix",
    "SPDMatrix",
    "eig_herm",
    "op_norm",
    "spd_sqrt",
    "spd_inv_sqrt",
]

HERMITIAN_RTOL = 1e-13
SINGULAR_RTOL = 1e-14
_FLOOR = 1e-300


def _norm_floor(value: float) -> float:
    return max(float(value), _FLOOR)


class HermitianMatrix:
    """A validated Hermitian matrix.

    The constructor symmetrizes entries and rejects inputs whose Hermitian
    defect exceeds ``HERMITIAN_RTOL`` relative to the Frobenius norm.
    """

    __slots__ = ("mat",)

    def __init__(self, entries, *, where: str = ""):
        a = np.asarray(entries)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise MatrixError(f"expected a square matrix, got shape {a.shape}{where}")
        dtype = np.complex128 if np.iscomplexobj(a) else np.float64
        a = a.astype(dtype, copy=True)
        defect = float(np.linalg.norm(a - a.conj().T))
        scale = _norm_floor(np.linalg.norm(a))
        if defect > HERMITIAN_RTOL * scale:
            raise MatrixError(
                f"matrix is not Hermitian: defect {defect:.3e} exceeds "
                f"{HERMITIAN_RTOL:.0e} relative{where}"
            )
        self.mat = 0.5 * (a + a.conj().T)

    @property
    def k(self) -> int:
        return self.mat.shape[0]

    def __array__(self, dtype=None, copy=None):
        if dtype is not None:
            return self.mat.astype(dtype)
        return self.mat

    def __repr__(self):
        return f"{type(self).__name__}({self.mat!r})"


class SPDMatrix(HermitianMatrix):
    """Hermitian and positive definite, checked by eigendecomposition."""

    __slots__ = ()

    def __init__(self, entries, *, where: str = ""):
        super().__init__(entries, where=where)
        w = np.linalg.eigvalsh(self.mat)
        if w[0] <= 0.0:
            raise MatrixError(
                f"matrix is not positive definite: smallest eigenvalue "
                f"{w[0]:.6e}{where}"
            )


def _as_hermitian(h, where: str = "") -> np.ndarray:
    if isinstance(h, HermitianMatrix):
        return h.mat
    return HermitianMatrix(h, where=where).mat


def eig_herm(h) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and orthonormal eigenvector columns.

    Accepts a HermitianMatrix or anything the HermitianMatrix constructor
    accepts.  Non-convergence raises ConvergenceError carrying the matrix.
    """
    a = _as_hermitian(h)
    try:
        w, u = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK rarely fails
        raise ConvergenceError(f"eigensolver did not converge: {exc}", matrix=a) from exc
    return w, u


def op_norm(h) -> float:
    """Operator (spectral) norm of a Hermitian matrix: max |eigenvalue|."""
    a = _as_hermitian(h)
    w = np.linalg.eigvalsh(a)
    return float(max(abs(w[0]), abs(w[-1])))


def _spd_power(s, exponent: float, where: str) -> np.ndarray:
    a = s.mat if isinstance(s, SPDMatrix) else SPDMatrix(s, where=where).mat
    w, u = np.linalg.eigh(a)
    if w[0] < SINGULAR_RTOL * _norm_floor(w[-1]):
        raise SingularMatrixError(
            f"numerically singular E: eigenvalue {w[0]:.6e} below "
            f"{SINGULAR_RTOL:.0e} of norm {w[-1]:.6e}{where}"
        )
    out = (u * np.power(w, exponent)) @ u.conj().T
    return 0.5 * (out + out.conj().T)


def spd_sqrt(s, *, where: str = "") -> np.ndarray:
    """Principal square root of an SPD matrix, as a plain array."""
    return _spd_power(s, 0.5, where)


def spd_inv_sqrt(s, *, where: str = "") -> np.ndarray:
    """Inverse principal square root of an SPD matrix, as a plain array."""
    return _spd_power(s, -0.5, where)
