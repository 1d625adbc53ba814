"""Coefficient systems for first-order symmetric hyperbolic operators.

A system is the data (Omega, k, E, A^1..A^d, V): an open box domain (possibly
unbounded, possibly with an excluded ball), a state dimension, an SPD weight
matrix field E, Hermitian coefficient fields A^j, and a Hermitian zero-order
field V.  Matrix fields evaluate pointwise and on tensor grids; entries are
either constants or expressions in the coordinates x, y, z.

The canonical transform re-expresses a system with weight E in an equivalent
E = identity form: the state is multiplied pointwise by E^{1/2}, the first
order coefficients become E^{-1/2} A^j E^{-1/2}, and a zero-order Hermitian
term built from the gradient of E^{-1/2} appears.  Gradients come from an
analytic evaluator when supplied, otherwise from central finite differences
with step 1e-5 (scaled by axis extent), shrunk with a warning near the
boundary.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import dsl
from .errors import MatrixError, ValidationError
from .matkernel import HermitianMatrix
from .sampling import halton_unit

__all__ = [
    "BoxDomain",
    "MatrixField",
    "ConstMatrixField",
    "ExprMatrixField",
    "FuncMatrixField",
    "CoefficientSystem",
    "ValidationReport",
    "eval_coeffs",
    "symbol",
    "canonicalize",
    "zero_order_term",
    "validate_system",
    "telegraph",
    "maxwell_isotropic",
    "maxwell_anisotropic",
    "elastic_isotropic",
    "elastic",
    "dirac_free",
    "CURL_GENERATORS",
    "STRAIN_GENERATORS",
]

FD_STEP_BASE = 1e-5


# --- domains ---------------------------------------------------------------

@dataclass(frozen=True)
class BoxDomain:
    """Open box, with per-side unbounded flags and an optional excluded ball.

    lower/upper always hold finite numbers used as the sampling window; a side
    flagged unbounded keeps its window value but is not treated as a true
    boundary (infinite values are accepted there too, but then no grid can be
    placed).  The excluded ball, when present, is part of the boundary.
    """

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    unbounded_lower: tuple[bool, ...] = ()
    unbounded_upper: tuple[bool, ...] = ()
    excluded_ball: tuple[tuple[float, ...], float] | None = None

    def __post_init__(self):
        lower = tuple(float(v) for v in self.lower)
        upper = tuple(float(v) for v in self.upper)
        if len(lower) != len(upper) or not lower:
            raise ValueError("lower and upper must be equal-length, non-empty")
        d = len(lower)
        ulo = tuple(self.unbounded_lower) if self.unbounded_lower else (False,) * d
        uhi = tuple(self.unbounded_upper) if self.unbounded_upper else (False,) * d
        if len(ulo) != d or len(uhi) != d:
            raise ValueError("unbounded flags must match the dimension")
        for j, (lo, hi) in enumerate(zip(lower, upper)):
            if math.isinf(lo) and not ulo[j]:
                raise ValueError(f"axis {j}: infinite lower bound without unbounded flag")
            if math.isinf(hi) and not uhi[j]:
                raise ValueError(f"axis {j}: infinite upper bound without unbounded flag")
            if not lo < hi:
                raise ValueError(f"axis {j}: lower {lo} must be below upper {hi}")
        ball = self.excluded_ball
        if ball is not None:
            center, radius = ball
            center = tuple(float(v) for v in center)
            if len(center) != d:
                raise ValueError("excluded ball center must match the dimension")
            if not radius > 0:
                raise ValueError("excluded ball radius must be positive")
            ball = (center, float(radius))
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "unbounded_lower", ulo)
        object.__setattr__(self, "unbounded_upper", uhi)
        object.__setattr__(self, "excluded_ball", ball)

    @property
    def d(self) -> int:
        return len(self.lower)

    @property
    def fully_unbounded(self) -> bool:
        return all(self.unbounded_lower) and all(self.unbounded_upper)

    def has_finite_boundary(self) -> bool:
        if self.excluded_ball is not None:
            return True
        return not (all(self.unbounded_lower) and all(self.unbounded_upper))

    def contains(self, x, strict: bool = True) -> bool:
        x = np.asarray(x, dtype=float)
        for j in range(self.d):
            if not self.unbounded_lower[j]:
                if x[j] < self.lower[j] or (strict and x[j] == self.lower[j]):
                    return False
            if not self.unbounded_upper[j]:
                if x[j] > self.upper[j] or (strict and x[j] == self.upper[j]):
                    return False
        if self.excluded_ball is not None:
            center, radius = self.excluded_ball
            r = float(np.linalg.norm(x - np.asarray(center)))
            if r < radius or (strict and r == radius):
                return False
        return True

    def boundary_distance(self, x) -> float:
        """Distance to the true boundary (bounded sides and excluded ball)."""
        x = np.asarray(x, dtype=float)
        dists = []
        for j in range(self.d):
            if not self.unbounded_lower[j]:
                dists.append(x[j] - self.lower[j])
            if not self.unbounded_upper[j]:
                dists.append(self.upper[j] - x[j])
        if self.excluded_ball is not None:
            center, radius = self.excluded_ball
            dists.append(float(np.linalg.norm(x - np.asarray(center))) - radius)
        return float(min(dists)) if dists else math.inf

    def center(self) -> np.ndarray:
        return 0.5 * (np.asarray(self.lower) + np.asarray(self.upper))

    def extent(self, j: int) -> float:
        return self.upper[j] - self.lower[j]


# --- matrix fields ---------------------------------------------------------

class MatrixField:
    """Base: a k-by-k matrix-valued function of position."""

    k: int

    def __call__(self, x) -> np.ndarray:
        raise NotImplementedError

    def on_grid(self, axes: tuple[np.ndarray, ...]) -> np.ndarray:
        """Evaluate on a tensor grid; default is a pointwise loop."""
        shape = tuple(len(ax) for ax in axes)
        probe = self(np.array([ax[0] for ax in axes]))
        out = np.empty(shape + (self.k, self.k), dtype=probe.dtype)
        mesh = np.meshgrid(*axes, indexing="ij")
        coords = np.stack([m.ravel() for m in mesh], axis=-1)
        flat = out.reshape(-1, self.k, self.k)
        for i, x in enumerate(coords):
            flat[i] = self(x)
        return out


class ConstMatrixField(MatrixField):
    def __init__(self, mat):
        mat = np.asarray(mat)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise MatrixError(f"constant field needs a square matrix, got {mat.shape}")
        dtype = np.complex128 if np.iscomplexobj(mat) else np.float64
        self.mat = mat.astype(dtype)
        self.mat.setflags(write=False)
        self.k = mat.shape[0]

    def __call__(self, x) -> np.ndarray:
        return self.mat

    def on_grid(self, axes) -> np.ndarray:
        shape = tuple(len(ax) for ax in axes)
        return np.broadcast_to(self.mat, shape + (self.k, self.k)).copy()

    @property
    def is_identity(self) -> bool:
        return bool(np.array_equal(self.mat, np.eye(self.k)))


class ExprMatrixField(MatrixField):
    """Entries are parsed expressions or numeric constants."""

    def __init__(self, entries):
        rows = [list(r) for r in entries]
        k = len(rows)
        if any(len(r) != k for r in rows):
            raise MatrixError("expression field needs a square entry table")
        self.k = k
        self.entries = []
        self.sources = []
        complex_const = False
        for r in rows:
            erow, srow = [], []
            for cell in r:
                if isinstance(cell, str):
                    erow.append(dsl.parse(cell))
                    srow.append(cell)
                elif isinstance(cell, dsl.Expr):
                    erow.append(cell)
                    srow.append("")
                else:
                    val = complex(cell)
                    if val.imag != 0.0:
                        complex_const = True
                        erow.append(val)
                    else:
                        erow.append(val.real)
                    srow.append("")
            self.entries.append(erow)
            self.sources.append(srow)
        self.dtype = np.complex128 if complex_const else np.float64

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty((self.k, self.k), dtype=self.dtype)
        for i in range(self.k):
            for j in range(self.k):
                cell = self.entries[i][j]
                if isinstance(cell, dsl.Expr):
                    out[i, j] = dsl.eval_expr(cell, x, source=self.sources[i][j])
                else:
                    out[i, j] = cell
        return out

    def on_grid(self, axes) -> np.ndarray:
        shape = tuple(len(ax) for ax in axes)
        mesh = np.meshgrid(*axes, indexing="ij", sparse=True)
        env = dict(zip(dsl.VARIABLES, mesh))
        out = np.zeros(shape + (self.k, self.k), dtype=self.dtype)
        for i in range(self.k):
            for j in range(self.k):
                cell = self.entries[i][j]
                if isinstance(cell, dsl.Expr):
                    val = dsl.eval_expr(cell, env, source=self.sources[i][j])
                    out[..., i, j] = np.broadcast_to(val, shape)
                else:
                    out[..., i, j] = cell
        return out


class FuncMatrixField(MatrixField):
    """Wraps an arbitrary callable point -> matrix (pointwise evaluation only)."""

    def __init__(self, fn, k: int):
        self.fn = fn
        self.k = int(k)

    def __call__(self, x) -> np.ndarray:
        out = np.asarray(self.fn(np.asarray(x, dtype=float)))
        if out.shape != (self.k, self.k):
            raise MatrixError(f"field callable returned shape {out.shape}, wanted {(self.k, self.k)}")
        return out


def _batched_inv_sqrt(mats: np.ndarray, what: str) -> np.ndarray:
    w, u = np.linalg.eigh(mats)
    if not np.all(np.isfinite(w)):
        raise MatrixError(f"non-finite eigenvalues while inverting {what}")
    floor = 1e-14 * np.maximum(w[..., -1], 1e-300)
    if np.any(w[..., 0] < floor):
        raise MatrixError(f"{what} is numerically singular on the grid")
    return np.einsum("...ij,...j,...kj->...ik", u, w**-0.5, u.conj())


def _point_inv_sqrt(mat: np.ndarray, where: str) -> np.ndarray:
    from .matkernel import spd_inv_sqrt

    return np.asarray(spd_inv_sqrt(mat, where=where))


class _ElasticWeightField(MatrixField):
    """E = blockdiag(rho * C^{-1}, I_3) for the 9-component elastic state."""

    def __init__(self, rho_expr: dsl.Expr, rho_source: str, stiffness: MatrixField):
        self.rho_expr = rho_expr
        self.rho_source = rho_source
        self.stiffness = stiffness
        self.k = 9

    def _rho(self, x) -> float:
        return dsl.eval_expr(self.rho_expr, np.atleast_1d(x), source=self.rho_source)

    def __call__(self, x) -> np.ndarray:
        C = self.stiffness(x)
        out = np.zeros((9, 9))
        out[:6, :6] = self._rho(x) * np.linalg.inv(C)
        out[6:, 6:] = np.eye(3)
        return out

    def on_grid(self, axes) -> np.ndarray:
        shape = tuple(len(ax) for ax in axes)
        Cg = self.stiffness.on_grid(axes)
        mesh = np.meshgrid(*axes, indexing="ij", sparse=True)
        rho = np.broadcast_to(
            dsl.eval_expr(self.rho_expr, dict(zip(dsl.VARIABLES, mesh)), source=self.rho_source),
            shape,
        )
        out = np.zeros(shape + (9, 9))
        out[..., :6, :6] = rho[..., None, None] * np.linalg.inv(Cg)
        for i in range(3):
            out[..., 6 + i, 6 + i] = 1.0
        return out


class _CanonicalAField(MatrixField):
    """E^{-1/2} A^j E^{-1/2} for a canonicalized system."""

    def __init__(self, E: MatrixField, A: MatrixField):
        self.E = E
        self.A = A
        self.k = A.k

    def __call__(self, x) -> np.ndarray:
        R = _point_inv_sqrt(self.E(x), where=f" (E at {np.asarray(x)})")
        out = R @ self.A(x) @ R
        return 0.5 * (out + out.conj().T)

    def on_grid(self, axes) -> np.ndarray:
        R = _batched_inv_sqrt(self.E.on_grid(axes), "E")
        A = self.A.on_grid(axes)
        out = R @ A @ R
        return 0.5 * (out + np.conj(np.swapaxes(out, -1, -2)))


def _fd_steps(domain: BoxDomain) -> np.ndarray:
    steps = np.empty(domain.d)
    for j in range(domain.d):
        ext = domain.extent(j)
        steps[j] = FD_STEP_BASE * max(1.0, ext if math.isfinite(ext) else 1.0)
    return steps


def _inv_sqrt_gradients(E: MatrixField, domain: BoxDomain, E_grad, x) -> list[np.ndarray]:
    """d/dx_j of E^{-1/2} at a point, analytic when available, else central FD."""
    x = np.asarray(x, dtype=float)
    if E_grad is not None:
        return [np.asarray(g(x)) for g in E_grad]
    steps = _fd_steps(domain)
    grads = []
    for j in range(domain.d):
        h = steps[j]
        room = []
        if not domain.unbounded_lower[j]:
            room.append(x[j] - domain.lower[j])
        if not domain.unbounded_upper[j]:
            room.append(domain.upper[j] - x[j])
        margin = min(room) if room else math.inf
        if h >= margin:
            h = 0.5 * margin
            warnings.warn(
                f"finite-difference step shrunk to {h:.3e} near the boundary "
                f"(axis {j}, point {x})",
                stacklevel=3,
            )
        xp, xm = x.copy(), x.copy()
        xp[j] += h
        xm[j] -= h
        Rp = _point_inv_sqrt(E(xp), where=f" (E at {xp})")
        Rm = _point_inv_sqrt(E(xm), where=f" (E at {xm})")
        grads.append((Rp - Rm) / (2.0 * h))
    return grads


def _trim_complex(mat: np.ndarray) -> np.ndarray:
    if np.iscomplexobj(mat) and not np.any(mat.imag):
        return mat.real.copy()
    return mat


class _CanonicalVField(MatrixField):
    """Zero-order term of the canonical form: gradient part plus E^{-1/2} V E^{-1/2}."""

    def __init__(self, E, A_fields, V, domain, E_grad):
        self.E = E
        self.A_fields = tuple(A_fields)
        self.V = V
        self.domain = domain
        self.E_grad = E_grad
        self.k = V.k

    def _v0_from(self, R, grads, A_vals) -> np.ndarray:
        k = self.k
        v0 = np.zeros((k, k), dtype=np.complex128)
        for A, G in zip(A_vals, grads):
            v0 += -0.5j * (R @ A @ G - G @ A @ R)
        return v0

    def __call__(self, x) -> np.ndarray:
        R = _point_inv_sqrt(self.E(x), where=f" (E at {np.asarray(x)})")
        grads = _inv_sqrt_gradients(self.E, self.domain, self.E_grad, x)
        A_vals = [A(x) for A in self.A_fields]
        out = self._v0_from(R, grads, A_vals) + R @ self.V(x) @ R
        out = 0.5 * (out + out.conj().T)
        return _trim_complex(out)

    def on_grid(self, axes) -> np.ndarray:
        steps = _fd_steps(self.domain)
        margins = [
            min(ax[0] - lo, hi - ax[-1])
            for ax, lo, hi in zip(axes, self.domain.lower, self.domain.upper)
        ]
        if self.E_grad is None and any(h >= m for h, m in zip(steps, margins)):
            return super().on_grid(axes)  # per-point fallback handles shrinking
        R = _batched_inv_sqrt(self.E.on_grid(axes), "E")
        shape = R.shape[:-2]
        out = np.zeros(shape + (self.k, self.k), dtype=np.complex128)
        for j, A in enumerate(self.A_fields):
            if self.E_grad is not None:
                G = self.E_grad[j].on_grid(axes)
            else:
                h = steps[j]
                ax_p = list(axes)
                ax_m = list(axes)
                ax_p[j] = axes[j] + h
                ax_m[j] = axes[j] - h
                G = (_batched_inv_sqrt(self.E.on_grid(tuple(ax_p)), "E")
                     - _batched_inv_sqrt(self.E.on_grid(tuple(ax_m)), "E")) / (2.0 * h)
            Aj = A.on_grid(axes)
            out += -0.5j * (R @ Aj @ G - G @ Aj @ R)
        out += R @ self.V.on_grid(axes) @ R
        out = 0.5 * (out + np.conj(np.swapaxes(out, -1, -2)))
        return _trim_complex(out)


# --- the system ------------------------------------------------------------

@dataclass(frozen=True)
class CoefficientSystem:
    """Immutable bundle (domain, k, E, A^1..A^d, V) plus optional metadata.

    ``E_grad``, when given, holds d evaluators for the gradient of E^{-1/2}
    used by the canonical transform.  ``kind``/``parts`` carry the structure
    the specialized velocity formulas need for the built-in families.
    """

    domain: BoxDomain
    k: int
    E: MatrixField
    A: tuple[MatrixField, ...]
    V: MatrixField
    E_grad: tuple[MatrixField, ...] | None = None
    label: str = ""
    kind: str = "custom"
    parts: dict = field(default=None, compare=False)
    canonical: bool = False

    def __post_init__(self):
        object.__setattr__(self, "A", tuple(self.A))
        if len(self.A) != self.domain.d:
            raise ValueError(
                f"need one first-order coefficient field per axis: got "
                f"{len(self.A)} for dimension {self.domain.d}"
            )
        for name, f in [("E", self.E), ("V", self.V)] + [
            (f"A[{j}]", a) for j, a in enumerate(self.A)
        ]:
            if f.k != self.k:
                raise ValueError(f"field {name} has size {f.k}, expected {self.k}")
        if self.E_grad is not None:
            grad = tuple(self.E_grad)
            if len(grad) != self.domain.d:
                raise ValueError("E_grad needs one evaluator per axis")
            object.__setattr__(self, "E_grad", grad)

    @property
    def d(self) -> int:
        return self.domain.d


def eval_coeffs(sys: CoefficientSystem, x):
    """(E, (A^1..A^d), V) at a point strictly inside the domain."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not sys.domain.contains(x, strict=True):
        raise ValueError(f"point {x} is not strictly inside the domain")
    return sys.E(x), tuple(A(x) for A in sys.A), sys.V(x)


def symbol(sys: CoefficientSystem, x, xi) -> HermitianMatrix:
    """Principal symbol sum_j xi_j A^j(x)."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if xi.shape != (sys.d,):
        raise ValueError(f"direction must be a {sys.d}-vector")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    acc = None
    for c, A in zip(xi, sys.A):
        term = c * A(x)
        acc = term if acc is None else acc + term
    return HermitianMatrix(acc)


def zero_order_term(sys: CoefficientSystem, x) -> np.ndarray:
    """The gradient-induced Hermitian zero-order term of the canonical form."""
    fld = _CanonicalVField(sys.E, sys.A, ConstMatrixField(np.zeros((sys.k, sys.k))),
                           sys.domain, sys.E_grad)
    return fld(x)


def canonicalize(sys: CoefficientSystem) -> CoefficientSystem:
    """Equivalent system with identity weight.

    Already-canonical systems (flag set, or constant identity E) are returned
    with only the flag updated; fields are reused unchanged.
    """
    if sys.canonical:
        return sys
    if isinstance(sys.E, ConstMatrixField) and sys.E.is_identity:
        return replace(sys, canonical=True)
    label = f"{sys.label} (canonical)" if sys.label else "canonical"
    return CoefficientSystem(
        domain=sys.domain,
        k=sys.k,
        E=ConstMatrixField(np.eye(sys.k)),
        A=tuple(_CanonicalAField(sys.E, A) for A in sys.A),
        V=_CanonicalVField(sys.E, sys.A, sys.V, sys.domain, sys.E_grad),
        label=label,
        kind=sys.kind,
        parts=sys.parts,
        canonical=True,
    )


# --- validation ------------------------------------------------------------

@dataclass
class ValidationReport:
    ok: bool
    samples: int
    worst_hermiticity: float
    min_eig_E: float
    min_eig_stiffness: float | None
    issues: list[str]

    def __str__(self):
        head = "PASS" if self.ok else "FAIL"
        lines = [
            f"validation {head}: {self.samples} sample points",
            f"  worst Hermitian defect (relative): {self.worst_hermiticity:.3e}",
            f"  min eigenvalue of E: {self.min_eig_E:.6e}",
        ]
        if self.min_eig_stiffness is not None:
            lines.append(f"  min eigenvalue of stiffness: {self.min_eig_stiffness:.6e}")
        lines.extend(f"  issue: {s}" for s in self.issues)
        return "\n".join(lines)


def _sample_points(domain: BoxDomain, count: int) -> np.ndarray:
    lower = np.asarray(domain.lower)
    extent = np.asarray(domain.upper) - lower
    pts = []
    budget = 8 * count + 64
    taken = 0
    u_all = halton_unit(budget, domain.d)
    for u in u_all:
        x = lower + u * extent
        if domain.contains(x, strict=True):
            pts.append(x)
            taken += 1
            if taken == count:
                break
    if taken < count:
        raise ValidationError(
            f"could not draw {count} interior sample points (domain mostly excluded?)"
        )
    return np.asarray(pts)


def _herm_defect(mat: np.ndarray) -> tuple[float, tuple[int, int]]:
    diff = np.abs(mat - mat.conj().T)
    scale = max(float(np.linalg.norm(mat)), 1e-300)
    ij = np.unravel_index(int(np.argmax(diff)), diff.shape)
    return float(diff[ij] / scale), (int(ij[0]) + 1, int(ij[1]) + 1)


def validate_system(sys: CoefficientSystem, samples: int = 256) -> ValidationReport:
    """Spot-check Hermiticity, positivity of E and stiffness symmetry/SPD."""
    pts = _sample_points(sys.domain, samples)
    issues: list[str] = []
    worst = 0.0
    min_eig_E = math.inf
    min_eig_C: float | None = None
    stiffness = (sys.parts or {}).get("stiffness")
    if stiffness is not None:
        min_eig_C = math.inf
    for x in pts:
        E = sys.E(x)
        defect, pair = _herm_defect(E)
        if defect > 1e-13:
            issues.append(f"E not Hermitian at {x}: entry {pair} defect {defect:.2e}")
        worst = max(worst, defect)
        ew = np.linalg.eigvalsh(0.5 * (E + E.conj().T))
        min_eig_E = min(min_eig_E, float(ew[0]))
        if ew[0] <= 0:
            issues.append(f"E not positive definite at {x}: eigenvalue {ew[0]:.3e}")
        for j, A in enumerate(sys.A):
            defect, pair = _herm_defect(A(x))
            worst = max(worst, defect)
            if defect > 1e-13:
                issues.append(
                    f"A[{j + 1}] not Hermitian at {x}: entry {pair} defect {defect:.2e}"
                )
        defect, pair = _herm_defect(sys.V(x))
        worst = max(worst, defect)
        if defect > 1e-13:
            issues.append(f"V not Hermitian at {x}: entry {pair} defect {defect:.2e}")
        if stiffness is not None:
            C = stiffness(x)
            diff = np.abs(C - C.T)
            ij = np.unravel_index(int(np.argmax(diff)), diff.shape)
            rel = float(diff[ij]) / max(float(np.linalg.norm(C)), 1e-300)
            if rel > 1e-13:
                issues.append(
                    f"stiffness asymmetric at {x}: entries "
                    f"({ij[0] + 1},{ij[1] + 1}) vs ({ij[1] + 1},{ij[0] + 1}) differ "
                    f"by {float(diff[ij]):.3e}"
                )
            cw = np.linalg.eigvalsh(0.5 * (C + C.T))
            min_eig_C = min(min_eig_C, float(cw[0]))
            if cw[0] <= 0:
                issues.append(f"stiffness not positive definite at {x}: eigenvalue {cw[0]:.3e}")
    # deduplicate while keeping order; repeated points produce identical text
    seen = set()
    unique = []
    for s in issues:
        if s not in seen:
            seen.add(s)
            unique.append(s)
    return ValidationReport(
        ok=not unique,
        samples=len(pts),
        worst_hermiticity=worst,
        min_eig_E=min_eig_E,
        min_eig_stiffness=min_eig_C,
        issues=unique,
    )


# --- built-in families -----------------------------------------------------

def _parse_scalar(src) -> tuple[dsl.Expr, str]:
    if isinstance(src, dsl.Expr):
        return src, ""
    if isinstance(src, (int, float)):
        return dsl.Num(float(src)), str(src)
    return dsl.parse(src), src


def _expr_grid(expr_rows) -> list[list]:
    return [[cell for cell in row] for row in expr_rows]


def _positivity_probe(domain, name, exprs_with_src, count=8):
    """Cheap construction-time check that scalar coefficients are positive."""
    pts = _sample_points(domain, count)
    for expr, src in exprs_with_src:
        for x in pts:
            val = dsl.eval_expr(expr, x, source=src)
            if not val > 0:
                raise ValidationError(
                    f"{name} must be positive: got {val:.6g} at sampled point {x}"
                )


def _spd_probe(domain, name, fld: MatrixField, count=8):
    pts = _sample_points(domain, count)
    for x in pts:
        m = fld(x)
        w = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
        if w[0] <= 0:
            raise ValidationError(
                f"{name} must be positive definite: eigenvalue {w[0]:.6g} "
                f"at sampled point {x}"
            )


_OFFDIAG2 = np.array([[0.0, 1.0], [1.0, 0.0]])


def telegraph(L="1", C="1", domain: BoxDomain | None = None) -> CoefficientSystem:
    """Lossless transmission line: state (current, voltage), weight diag(L, C)."""
    domain = domain or BoxDomain((0.0,), (1.0,))
    if domain.d != 1:
        raise ValueError("telegraph systems are one-dimensional")
    Le, Ls = _parse_scalar(L)
    Ce, Cs = _parse_scalar(C)
    _positivity_probe(domain, "L and C", [(Le, Ls), (Ce, Cs)])
    E = ExprMatrixField([[Le, 0.0], [0.0, Ce]])
    return CoefficientSystem(
        domain=domain,
        k=2,
        E=E,
        A=(ConstMatrixField(_OFFDIAG2),),
        V=ConstMatrixField(np.zeros((2, 2))),
        label="telegraph",
        kind="telegraph",
        parts={"L": (Le, Ls), "C": (Ce, Cs)},
    )


CURL_GENERATORS = (
    np.array([[0.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]]),
    np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]),
    np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]),
)


def _maxwell_A(d: int) -> tuple[ConstMatrixField, ...]:
    out = []
    for j in range(d):
        a = CURL_GENERATORS[j]
        A = np.zeros((6, 6))
        A[:3, 3:] = -a
        A[3:, :3] = -a.T
        out.append(ConstMatrixField(A))
    return tuple(out)


def _maxwell_system(eps_field, mu_field, domain, label) -> CoefficientSystem:
    if domain.d not in (2, 3):
        raise ValueError(
            "electromagnetic systems need d=2 (fields independent of the third "
            "coordinate) or d=3"
        )
    entries = [[0.0] * 6 for _ in range(6)]
    for i in range(3):
        for j in range(3):
            entries[i][j] = eps_field[i][j]
            entries[3 + i][3 + j] = mu_field[i][j]
    E = ExprMatrixField(entries)
    sysm = CoefficientSystem(
        domain=domain,
        k=6,
        E=E,
        A=_maxwell_A(domain.d),
        V=ConstMatrixField(np.zeros((6, 6))),
        label=label,
        kind="maxwell",
        parts={
            "eps": ExprMatrixField(eps_field),
            "mu": ExprMatrixField(mu_field),
        },
    )
    _spd_probe(domain, "permittivity", sysm.parts["eps"])
    _spd_probe(domain, "permeability", sysm.parts["mu"])
    return sysm


def maxwell_isotropic(eps="1", mu="1", domain: BoxDomain | None = None) -> CoefficientSystem:
    domain = domain or BoxDomain((0.0,) * 3, (1.0,) * 3)
    ee, _ = _parse_scalar(eps)
    me, _ = _parse_scalar(mu)
    zero = 0.0
    eps_field = [[ee if i == j else zero for j in range(3)] for i in range(3)]
    mu_field = [[me if i == j else zero for j in range(3)] for i in range(3)]
    return _maxwell_system(eps_field, mu_field, domain, "maxwell isotropic")


def maxwell_anisotropic(eps, mu, domain: BoxDomain | None = None) -> CoefficientSystem:
    """eps and mu are 3x3 tables of expressions/constants (must be symmetric)."""
    domain = domain or BoxDomain((0.0,) * 3, (1.0,) * 3)
    eps_field = [[_parse_scalar(c)[0] for c in row] for row in eps]
    mu_field = [[_parse_scalar(c)[0] for c in row] for row in mu]
    if len(eps_field) != 3 or len(mu_field) != 3:
        raise ValueError("eps and mu must be 3x3 tables")
    return _maxwell_system(eps_field, mu_field, domain, "maxwell anisotropic")


STRAIN_GENERATORS = (
    np.array([[1.0, 0, 0], [0, 0, 0], [0, 0, 0], [0, 1.0, 0], [0, 0, 0], [0, 0, 1.0]]),
    np.array([[0, 0, 0], [0, 1.0, 0], [0, 0, 0], [1.0, 0, 0], [0, 0, 1.0], [0, 0, 0]]),
    np.array([[0, 0, 0], [0, 0, 0], [0, 0, 1.0], [0, 0, 0], [0, 1.0, 0], [1.0, 0, 0]]),
)


def _elastic_A(d: int) -> tuple[ConstMatrixField, ...]:
    out = []
    for j in range(d):
        a = STRAIN_GENERATORS[j]
        A = np.zeros((9, 9))
        A[:6, 6:] = -a
        A[6:, :6] = -a.T
        out.append(ConstMatrixField(A))
    return tuple(out)


def _elastic_system(rho, stiffness_rows, domain, label) -> CoefficientSystem:
    if domain.d not in (1, 2, 3):
        raise ValueError("elastic systems support d=1, 2 or 3")
    rho_e, rho_s = _parse_scalar(rho)
    _positivity_probe(domain, "rho", [(rho_e, rho_s)])
    C = ExprMatrixField(stiffness_rows)
    if C.k != 6:
        raise ValueError("stiffness must be 6x6")
    _spd_probe(domain, "stiffness", C)
    return CoefficientSystem(
        domain=domain,
        k=9,
        E=_ElasticWeightField(rho_e, rho_s, C),
        A=_elastic_A(domain.d),
        V=ConstMatrixField(np.zeros((9, 9))),
        label=label,
        kind="elastic",
        parts={"rho": (rho_e, rho_s), "stiffness": C},
    )


def _num(v: float) -> dsl.Expr:
    return dsl.Num(float(v))


def _mul(a: dsl.Expr, b: dsl.Expr) -> dsl.Expr:
    return dsl.Bin("*", a, b)


def _div(a: dsl.Expr, b: dsl.Expr) -> dsl.Expr:
    return dsl.Bin("/", a, b)


def _add(a: dsl.Expr, b: dsl.Expr) -> dsl.Expr:
    return dsl.Bin("+", a, b)


def _sub(a: dsl.Expr, b: dsl.Expr) -> dsl.Expr:
    return dsl.Bin("-", a, b)


def elastic_isotropic(rho="1", K="1", mu="1", domain: BoxDomain | None = None) -> CoefficientSystem:
    """Isotropic stiffness from bulk modulus K and shear modulus mu."""
    domain = domain or BoxDomain((0.0,) * 3, (1.0,) * 3)
    Ke, Ks = _parse_scalar(K)
    me, ms = _parse_scalar(mu)
    _positivity_probe(domain, "K and mu", [(Ke, Ks), (me, ms)])
    diag = _add(Ke, _div(_mul(_num(4), me), _num(3)))
    off = _sub(Ke, _div(_mul(_num(2), me), _num(3)))
    rows = [[0.0] * 6 for _ in range(6)]
    for i in range(3):
        for j in range(3):
            rows[i][j] = diag if i == j else off
    for i in range(3, 6):
        rows[i][i] = me
    return _elastic_system(rho, rows, domain, "elastic isotropic")


def elastic(rho, stiffness, domain: BoxDomain | None = None) -> CoefficientSystem:
    """General elastic medium from the 21 upper-triangle stiffness entries.

    ``stiffness`` lists the upper triangle of the symmetric 6x6 stiffness
    matrix row-major: (1,1)..(1,6), (2,2)..(2,6), ..., (6,6).
    """
    domain = domain or BoxDomain((0.0,) * 3, (1.0,) * 3)
    vals = list(stiffness)
    if len(vals) != 21:
        raise ValueError(f"need 21 stiffness entries, got {len(vals)}")
    exprs = [_parse_scalar(v)[0] for v in vals]
    rows = [[0.0] * 6 for _ in range(6)]
    pos = 0
    for i in range(6):
        for j in range(i, 6):
            rows[i][j] = exprs[pos]
            rows[j][i] = exprs[pos]
            pos += 1
    return _elastic_system(rho, rows, domain, "elastic (anisotropic)")


_SIGMA = (
    np.array([[0, 1], [1, 0]], dtype=np.complex128),
    np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    np.array([[1, 0], [0, -1]], dtype=np.complex128),
)


def dirac_free(radius: float = 0.1, half_width: float = 2.0) -> CoefficientSystem:
    """Free Dirac operator on R^3 minus a ball around the origin.

    The puncture at the origin is modeled as an excluded ball of the given
    radius, treated as boundary; the box faces are flagged unbounded and only
    delimit the sampling window.
    """
    domain = BoxDomain(
        lower=(-half_width,) * 3,
        upper=(half_width,) * 3,
        unbounded_lower=(True,) * 3,
        unbounded_upper=(True,) * 3,
        excluded_ball=((0.0, 0.0, 0.0), radius),
    )
    A = []
    for s in _SIGMA:
        alpha = np.zeros((4, 4), dtype=np.complex128)
        alpha[:2, 2:] = s
        alpha[2:, :2] = s
        A.append(ConstMatrixField(alpha))
    return CoefficientSystem(
        domain=domain,
        k=4,
        E=ConstMatrixField(np.eye(4)),
        A=tuple(A),
        V=ConstMatrixField(np.zeros((4, 4))),
        label="free Dirac (punctured)",
        kind="dirac",
    )
