"""Local propagation-speed data for weighted symmetric hyperbolic systems.

The central object is the velocity matrix: the d-by-d real symmetric matrix
with entries Tr(B^j B^l), where B^j are the first-order coefficients of the
canonical (identity-weight) form of the system.  Its quadratic form bounds
the squared norm of the principal symbol in any direction, so its square
root bounds every characteristic speed.

Scalar summaries live alongside it: the largest characteristic speed in a
fixed direction, the direction-free maximum over the unit sphere (returned
as a certified lower/upper bracket, since the true supremum of a matrix norm
over directions has no closed form when the coefficients do not commute),
the per-axis coefficient-norm maximum, and a radial growth envelope for
unbounded domains.

``majorant`` produces a node-wise upper bound that is smooth at the grid
scale: the sampled matrix is mollified with a separable binomial kernel,
inflated by a slack factor, and nudged by a tiny regularizing multiple of
the identity so that downstream metric inversion stays finite even where
the field degenerates.
"""

from __future__ import annotations

import csv
import math
import warnings
from collections import namedtuple
from dataclasses import dataclass

import numpy as np

from .errors import MajorantError, UnsupportedSystemError, ValidationError
from .grids import Grid
from .matkernel import op_norm
from .sampling import unit_directions
from .systems import CoefficientSystem, canonicalize

__all__ = [
    "SpeedBracket",
    "VelocityField",
    "velocity_matrix",
    "velocity_matrix_structured",
    "char_speed",
    "chernoff_c",
    "fattorini_r",
    "radial_envelope",
    "majorant",
    "to_csv",
]

SpeedBracket = namedtuple("SpeedBracket", ["lower", "upper"])

MOLLIFIER = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0
PSD_RTOL = 1e-12
MAJORANT_RTOL = 1e-10
EPS_REG_REL = 1e-12
EPS_REG_FLOOR = 1e-12
MAX_SLACK_DOUBLINGS = 3


def _check_inside(sys: CoefficientSystem, x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not sys.domain.contains(x, strict=True):
        raise ValueError(f"point {x} is not inside the domain")
    return x


def _canonical_coeffs(can: CoefficientSystem, x) -> list[np.ndarray]:
    return [A(x) for A in can.A]


def velocity_matrix(sys: CoefficientSystem, x) -> np.ndarray:
    """The d-by-d matrix of traces Tr(B^j B^l) of canonical coefficients."""
    x = _check_inside(sys, x)
    can = canonicalize(sys)
    B = _canonical_coeffs(can, x)
    d = sys.d
    M = np.empty((d, d))
    for j in range(d):
        for l in range(j, d):
            t = float(np.trace(B[j] @ B[l]).real)
            M[j, l] = t
            M[l, j] = t
    return M


def _structured_maxwell(sys: CoefficientSystem, x) -> np.ndarray:
    from .systems import CURL_GENERATORS
    from .matkernel import spd_inv_sqrt

    eps = sys.parts["eps"](x)
    mu = sys.parts["mu"](x)
    re = spd_inv_sqrt(eps, where=f" (permittivity at {x})")
    rm = spd_inv_sqrt(mu, where=f" (permeability at {x})")
    d = sys.d
    blocks = [re @ CURL_GENERATORS[j] @ rm for j in range(d)]
    M = np.empty((d, d))
    for j in range(d):
        for l in range(j, d):
            t = 2.0 * float(np.trace(blocks[j] @ blocks[l].T))
            M[j, l] = t
            M[l, j] = t
    return M


def _structured_elastic(sys: CoefficientSystem, x) -> np.ndarray:
    from . import dsl
    from .systems import STRAIN_GENERATORS
    from .matkernel import spd_sqrt

    rho_expr, rho_src = sys.parts["rho"]
    rho = dsl.eval_expr(rho_expr, np.atleast_1d(x), source=rho_src)
    C = sys.parts["stiffness"](x)
    half = spd_sqrt(C, where=f" (stiffness at {x})")
    d = sys.d
    blocks = [half @ STRAIN_GENERATORS[j] for j in range(d)]
    M = np.empty((d, d))
    for j in range(d):
        for l in range(j, d):
            t = (2.0 / rho) * float(np.trace(blocks[j] @ blocks[l].T))
            M[j, l] = t
            M[l, j] = t
    return M


def velocity_matrix_structured(sys: CoefficientSystem, x) -> np.ndarray:
    """Closed-form velocity matrix for the built-in families.

    This bypasses the generic trace formula using the known block structure
    of the coefficients; its purpose is cross-validation of the generic path.
    """
    x = _check_inside(sys, x)
    if sys.kind == "telegraph":
        from . import dsl

        Le, Ls = sys.parts["L"]
        Ce, Cs = sys.parts["C"]
        L = dsl.eval_expr(Le, x, source=Ls)
        C = dsl.eval_expr(Ce, x, source=Cs)
        return np.array([[2.0 / (L * C)]])
    if sys.kind == "maxwell":
        return _structured_maxwell(sys, x)
    if sys.kind == "elastic":
        return _structured_elastic(sys, x)
    raise UnsupportedSystemError(
        f"no specialized velocity formula for kind {sys.kind!r}; "
        "use velocity_matrix instead"
    )


def char_speed(sys: CoefficientSystem, x, n) -> float:
    """Largest characteristic speed in direction n (normalized internally)."""
    x = _check_inside(sys, x)
    n = np.atleast_1d(np.asarray(n, dtype=float))
    norm = float(np.linalg.norm(n))
    if norm == 0.0:
        raise ValueError("direction must be nonzero")
    n = n / norm
    can = canonicalize(sys)
    B = _canonical_coeffs(can, x)
    sym = sum(c * b for c, b in zip(n, B))
    return op_norm(sym)


def fattorini_r(sys: CoefficientSystem, x) -> float:
    """Maximum over axes of the operator norm of the canonical coefficients."""
    x = _check_inside(sys, x)
    can = canonicalize(sys)
    return max(op_norm(A(x)) for A in can.A)


def chernoff_c(sys: CoefficientSystem, x) -> SpeedBracket:
    """Bracket for the supremum of characteristic speeds over directions.

    The lower end samples the unit sphere (both signs in 1-D, 128 angles in
    2-D, 256 near-uniform points in 3-D); the upper end is the smaller of
    sqrt(largest eigenvalue of the velocity matrix) and sqrt(d) times the
    per-axis coefficient-norm maximum.
    """
    x = _check_inside(sys, x)
    can = canonicalize(sys)
    B = _canonical_coeffs(can, x)
    d = sys.d
    lower = 0.0
    for n in unit_directions(d):
        sym = sum(c * b for c, b in zip(n, B))
        lower = max(lower, op_norm(sym))
    M = velocity_matrix(can, x)
    lam_max = float(np.linalg.eigvalsh(M)[-1])
    r = max(op_norm(b) for b in B)
    upper = min(math.sqrt(max(lam_max, 0.0)), math.sqrt(d) * r)
    upper = max(upper, lower)  # guard against rounding at the crossover
    return SpeedBracket(lower, upper)


def radial_envelope(sys: CoefficientSystem, radii, center=None) -> np.ndarray:
    """Nondecreasing envelope of speed upper bounds over spheres |x| = r.

    Only meaningful on fully unbounded domains (the growth of speeds toward
    infinity is what the envelope feeds into); shells may skip points inside
    an excluded ball.
    """
    if not sys.domain.fully_unbounded:
        raise UnsupportedSystemError(
            "the radial growth envelope applies to fully unbounded domains; "
            "for domains with finite boundary use the boundary distance probe"
        )
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or len(radii) == 0:
        raise ValueError("radii must be a non-empty 1-D sequence")
    if np.any(radii <= 0) or np.any(np.diff(radii) <= 0):
        raise ValueError("radii must be positive and strictly increasing")
    d = sys.d
    center = np.zeros(d) if center is None else np.asarray(center, dtype=float)
    dirs = unit_directions(d)
    from .systems import ConstMatrixField

    constant = isinstance(sys.E, ConstMatrixField) and all(
        isinstance(A, ConstMatrixField) for A in sys.A
    )
    cached = None
    out = np.empty(len(radii))
    running = 0.0
    for i, r in enumerate(radii):
        seen = False
        for u in dirs:
            x = center + r * u
            if not sys.domain.contains(x, strict=True):
                continue
            if constant:
                if cached is None:
                    cached = chernoff_c(sys, x).upper
                value = cached
            else:
                value = chernoff_c(sys, x).upper
            running = max(running, value)
            seen = True
        if not seen:
            raise ValueError(
                f"no admissible sample on the sphere of radius {r} "
                "(inside the excluded region?)"
            )
        out[i] = running
    return out


# --- sampled field on a grid ------------------------------------------------

def _node_norms(samples: np.ndarray) -> np.ndarray:
    return np.linalg.norm(samples, axis=(-2, -1))


@dataclass
class VelocityField:
    """Velocity matrices sampled on a grid, optionally with a majorant.

    ``M_samples`` has shape grid.shape + (d, d).  Construction validates
    symmetry, positive semi-definiteness to a relative tolerance, and (when
    present) that the majorant dominates the samples node-wise.
    """

    grid: Grid
    M_samples: np.ndarray
    majorant_samples: np.ndarray | None = None
    delta: float | None = None

    def __post_init__(self):
        d = self.grid.d
        want = self.grid.shape + (d, d)
        M = np.asarray(self.M_samples, dtype=float)
        if M.shape != want:
            raise ValidationError(f"M_samples shape {M.shape}, expected {want}")
        scale = max(float(_node_norms(M).max()), 1e-300)
        asym = float(np.abs(M - np.swapaxes(M, -1, -2)).max())
        if asym > 1e-10 * scale:
            raise ValidationError(f"M samples asymmetric: defect {asym:.3e}")
        M = 0.5 * (M + np.swapaxes(M, -1, -2))
        w = np.linalg.eigvalsh(M)
        if float(w[..., 0].min()) < -PSD_RTOL * scale:
            raise ValidationError(
                f"M samples are not positive semi-definite: eigenvalue "
                f"{float(w[..., 0].min()):.3e} vs scale {scale:.3e}"
            )
        self.M_samples = M
        if self.majorant_samples is not None:
            H = np.asarray(self.majorant_samples, dtype=float)
            if H.shape != want:
                raise ValidationError(f"majorant shape {H.shape}, expected {want}")
            _check_dominates(H, M)
            self.majorant_samples = H

    @classmethod
    def from_system(cls, sys: CoefficientSystem, grid: Grid) -> "VelocityField":
        can = canonicalize(sys)
        axes = grid.axes
        B = [A.on_grid(axes) for A in can.A]
        d = grid.d
        M = np.empty(grid.shape + (d, d))
        for j in range(d):
            for l in range(j, d):
                t = np.einsum("...ab,...ba->...", B[j], B[l]).real
                M[..., j, l] = t
                M[..., l, j] = t
        return cls(grid, M)

    @property
    def d(self) -> int:
        return self.grid.d


def _check_dominates(H: np.ndarray, M: np.ndarray) -> float:
    """Raise unless H - M is PSD node-wise (to tolerance); return worst margin."""
    gap = np.linalg.eigvalsh(H - M)[..., 0]
    tol = MAJORANT_RTOL * np.maximum(_node_norms(H), 1e-300)
    worst = float((gap + tol).min())
    if worst < 0.0:
        idx = np.unravel_index(int(np.argmin(gap + tol)), gap.shape)
        raise ValidationError(
            f"majorant fails to dominate at node {idx}: eigenvalue gap "
            f"{float(gap[idx]):.3e}"
        )
    return worst


def _smooth_axis(a: np.ndarray, axis: int) -> np.ndarray:
    pad = [(0, 0)] * a.ndim
    pad[axis] = (2, 2)
    ap = np.pad(a, pad, mode="edge")
    acc = np.zeros_like(a)
    sl = [slice(None)] * a.ndim
    for k, wk in enumerate(MOLLIFIER):
        sl[axis] = slice(k, k + a.shape[axis])
        acc += wk * ap[tuple(sl)]
    return acc


def _mollify(samples: np.ndarray, spatial_ndim: int) -> np.ndarray:
    out = samples
    for _ in range(2):
        for ax in range(spatial_ndim):
            out = _smooth_axis(out, ax)
    return out


def majorant(field: VelocityField, delta: float) -> VelocityField:
    """Attach a smooth node-wise upper bound (1+delta)*(mollified M) + eps*I.

    If domination fails at some node the slack is doubled, up to three times;
    the slack that finally worked is recorded on the returned field.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError(f"slack must lie in (0, 1), got {delta}")
    M = field.M_samples
    d = field.d
    norms = _node_norms(M)
    eps = max(EPS_REG_REL * float(norms.max()), EPS_REG_FLOOR)
    if float(norms.max()) == 0.0:
        warnings.warn(
            "velocity matrix vanishes on the whole grid; majorant degenerates "
            "to the regularization floor and the induced metric is meaningless",
            stacklevel=2,
        )
    smooth = _mollify(M, field.grid.d)
    eye = np.eye(d)
    cur = float(delta)
    for _ in range(MAX_SLACK_DOUBLINGS + 1):
        H = (1.0 + cur) * smooth + eps * eye
        gap = np.linalg.eigvalsh(H - M)[..., 0]
        tol = MAJORANT_RTOL * np.maximum(_node_norms(H), 1e-300)
        if float((gap + tol).min()) >= 0.0:
            return VelocityField(field.grid, M, majorant_samples=H, delta=cur)
        cur *= 2.0
    raise MajorantError(
        f"no majorant after raising slack to {cur / 2:g}: the sampled field "
        "varies too fast for this grid; refine the grid"
    )


def to_csv(field: VelocityField, path) -> None:
    """Write nodes and upper-triangle matrix entries as CSV.

    Columns: x1..xd, then M11, M12, ..., Mdd row-major over the upper
    triangle.  Full float64 precision (17 significant digits).
    """
    d = field.d
    header = [f"x{j + 1}" for j in range(d)]
    header += [f"M{i + 1}{j + 1}" for i in range(d) for j in range(i, d)]
    coords = field.grid.coords().reshape(-1, d)
    M = field.M_samples.reshape(-1, d, d)
    iu = [(i, j) for i in range(d) for j in range(i, d)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row_x, row_M in zip(coords, M):
            writer.writerow(
                [f"{v:.17g}" for v in row_x] + [f"{row_M[i, j]:.17g}" for i, j in iu]
            )
