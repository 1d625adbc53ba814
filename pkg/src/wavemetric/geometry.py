"""Completeness probes for the metric induced by a velocity majorant.

The metric of interest is the inverse of the majorant field: large
propagation speeds make directions cheap, vanishing speeds make regions
expensive, and the domain is metrically complete exactly when the boundary
(or infinity) sits at infinite distance.  Whether a given improper integral
or distance sequence diverges is not decidable from finitely many samples,
so every probe returns a graded verdict: certified-divergent,
likely-divergent, likely-convergent, or inconclusive.

Distances are computed on the sampling lattice with Dijkstra over an
extended neighbor stencil (two neighbors in 1-D, eight in 2-D, twenty-six in
3-D, with an optional sixteen-neighbor stencil in 2-D).  Lattice shortest
paths overestimate continuum geodesics by at most a known stencil-dependent
factor, recorded on each result.  Fast marching is deliberately not used:
anisotropic metrics break the causality ordering it relies on.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from . import dsl
from ._geokernels import ANISO_TIME, GEODESIC, ISO_TIME, dijkstra_lattice
from .errors import DomainEvalError, MajorantError, UnsupportedSystemError, ValidationError
from .grids import Grid
from .velocity import EPS_REG_FLOOR, EPS_REG_REL, VelocityField

__all__ = [
    "STENCIL_BOUNDS",
    "VERDICT_GRADES",
    "MetricField",
    "DistanceField",
    "CompletenessVerdict",
    "stencil_offsets",
    "metric_from_velocity",
    "lattice_geodesic",
    "eikonal_arrival",
    "boundary_distance_probe",
    "ray_completeness",
    "power_law_classify",
    "combine_classifications",
    "node_boundary_distances",
]

# worst-case ratio of lattice distance to straight-line metric distance for a
# constant metric: the secant of half the largest angular gap of the stencil
STENCIL_BOUNDS = {
    2: 1.0,
    8: 1.0 / math.cos(math.pi / 8.0),
    16: 1.0 / math.cos(math.atan(0.5) / 2.0),
    26: math.sqrt(1.0 + (math.sqrt(2.0) - 1.0) ** 2 + (math.sqrt(3.0) - math.sqrt(2.0)) ** 2),
}

_DEFAULT_STENCIL = {1: 2, 2: 8, 3: 26}
_ALLOWED_STENCILS = {1: (2,), 2: (8, 16), 3: (26,)}

VERDICT_GRADES = (
    "certified-divergent",
    "likely-divergent",
    "inconclusive",
    "likely-convergent",
)

CLASSIFY_WINDOW = 8
POWER_FIT_TOL = 0.01
GEOMETRIC_CONVERGENT_RATIO = 0.5
GEOMETRIC_DIVERGENT_RATIO = 0.9


def stencil_offsets(d: int, stencil: int | None = None) -> tuple[int, np.ndarray]:
    """Neighbor offsets for the lattice graph; returns (stencil size, offsets)."""
    if stencil is None:
        stencil = _DEFAULT_STENCIL[d]
    if stencil not in _ALLOWED_STENCILS.get(d, ()):
        raise ValueError(
            f"stencil {stencil} not available in {d}-D; "
            f"choose from {_ALLOWED_STENCILS.get(d, ())}"
        )
    if stencil == 2:
        offs = [(1,), (-1,)]
    elif stencil in (8, 26):
        offs = [o for o in itertools.product((-1, 0, 1), repeat=d) if any(o)]
    else:  # 16: the 8-neighborhood plus knight moves
        offs = [o for o in itertools.product((-1, 0, 1), repeat=2) if any(o)]
        offs += [
            o for o in itertools.product((-2, -1, 1, 2), repeat=2)
            if abs(o[0]) + abs(o[1]) == 3
        ]
    return stencil, np.array(sorted(offs), dtype=np.int64)


# --- fields ----------------------------------------------------------------

@dataclass
class MetricField:
    """SPD matrix per node; the inverse of a velocity majorant."""

    grid: Grid
    G_samples: np.ndarray
    degenerate: bool = False

    def __post_init__(self):
        d = self.grid.d
        want = self.grid.shape + (d, d)
        G = np.asarray(self.G_samples, dtype=float)
        if G.shape != want:
            raise ValidationError(f"G_samples shape {G.shape}, expected {want}")
        G = 0.5 * (G + np.swapaxes(G, -1, -2))
        w = np.linalg.eigvalsh(G)
        if float(w[..., 0].min()) <= 0.0:
            flat = int(np.argmin(w[..., 0]))
            idx = tuple(int(i) for i in np.unravel_index(flat, self.grid.shape))
            raise ValidationError(
                f"metric not positive definite at node {idx}: "
                f"eigenvalue {float(w[..., 0].min()):.3e}"
            )
        self.G_samples = G

    @property
    def d(self) -> int:
        return self.grid.d


def metric_from_velocity(fld: VelocityField) -> MetricField:
    """Invert the majorant node-wise, capping blowup where it degenerates."""
    if fld.majorant_samples is None:
        raise MajorantError(
            "velocity field carries no majorant; call majorant() before "
            "building the metric"
        )
    H = fld.majorant_samples
    w, u = np.linalg.eigh(H)
    norms = np.linalg.norm(H, axis=(-2, -1))
    floor = max(EPS_REG_REL * float(norms.max()), EPS_REG_FLOOR)
    degenerate = bool(np.any(w <= floor * (1.0 + 1e-9)))
    clipped = np.maximum(w, floor)
    G = np.einsum("...ij,...j,...kj->...ik", u, 1.0 / clipped, u)
    if degenerate:
        warnings.warn(
            "velocity majorant nearly vanishes at some nodes; metric "
            f"eigenvalues capped at {1.0 / floor:.3e}, distances through "
            "the degenerate region are unreliable",
            stacklevel=2,
        )
    return MetricField(fld.grid, G, degenerate=degenerate)


@dataclass
class DistanceField:
    """Per-node distance (or traversal time) from a source set."""

    grid: Grid
    values: np.ndarray
    source: str = ""
    stencil: int = 0
    consistency_bound: float = 1.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValidationError(f"values shape {v.shape}, expected {self.grid.shape}")
        self.values = v

    def __getitem__(self, idx):
        return self.values[idx]

    def to_csv(self, path) -> None:
        import csv

        d = self.grid.d
        coords = self.grid.coords().reshape(-1, d)
        vals = self.values.reshape(-1)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"x{j + 1}" for j in range(d)] + ["value"])
            for x, v in zip(coords, vals):
                writer.writerow([f"{c:.17g}" for c in x] + [f"{v:.17g}"])


def node_boundary_distances(grid: Grid) -> np.ndarray:
    """Distance from each node to the true domain boundary (inf if none)."""
    dom = grid.domain
    out = np.full(grid.shape, np.inf)
    for j in range(grid.d):
        sh = [1] * grid.d
        sh[j] = -1
        ax = grid.axes[j].reshape(sh)
        if not dom.unbounded_lower[j]:
            out = np.minimum(out, np.broadcast_to(ax - dom.lower[j], grid.shape))
        if not dom.unbounded_upper[j]:
            out = np.minimum(out, np.broadcast_to(dom.upper[j] - ax, grid.shape))
    if dom.excluded_ball is not None:
        center, radius = dom.excluded_ball
        delta = grid.coords() - np.asarray(center)
        out = np.minimum(out, np.linalg.norm(delta, axis=-1) - radius)
    return out


def _passable_mask(grid: Grid) -> np.ndarray:
    dom = grid.domain
    if dom.excluded_ball is None:
        return np.ones(grid.shape, dtype=bool)
    center, radius = dom.excluded_ball
    delta = grid.coords() - np.asarray(center)
    return np.linalg.norm(delta, axis=-1) > radius


def _normalize_sources(grid: Grid, sources) -> np.ndarray:
    if isinstance(sources, tuple) and all(isinstance(i, (int, np.integer)) for i in sources):
        sources = [sources]
    flat = []
    for s in sources:
        s = tuple(int(i) for i in np.atleast_1d(s))
        if len(s) != grid.d:
            raise ValueError(f"source index {s} does not match grid rank {grid.d}")
        for i, n in zip(s, grid.shape):
            if not 0 <= i < n:
                raise ValueError(f"source index {s} outside grid shape {grid.shape}")
        flat.append(int(np.ravel_multi_index(s, grid.shape)))
    if not flat:
        raise ValueError("at least one source node is required")
    return np.asarray(flat, dtype=np.int64)


def _strides(shape) -> np.ndarray:
    out = np.empty(len(shape), dtype=np.int64)
    acc = 1
    for j in range(len(shape) - 1, -1, -1):
        out[j] = acc
        acc *= shape[j]
    return out


def _run_dijkstra(grid, offsets, mode, mats, speed, passable, src) -> np.ndarray:
    d = grid.d
    n = grid.node_count
    shape = np.asarray(grid.shape, dtype=np.int64)
    if mats is None:
        mats_flat = np.zeros((1, d, d))
    else:
        mats_flat = np.ascontiguousarray(mats.reshape(n, d, d))
    if speed is None:
        speed_flat = np.zeros(1)
    else:
        speed_flat = np.ascontiguousarray(speed.reshape(n))
    dist = dijkstra_lattice(
        shape,
        _strides(grid.shape),
        np.asarray(grid.spacing),
        offsets,
        mode,
        mats_flat,
        speed_flat,
        passable.reshape(n),
        src,
    )
    return dist.reshape(grid.shape)


def lattice_geodesic(metric: MetricField, sources, *, stencil: int | None = None) -> DistanceField:
    """Shortest lattice distances under the node-sampled metric.

    Edge length between neighboring nodes is the quadratic form of the
    midpoint (matrix average) metric applied to the physical offset.
    """
    grid = metric.grid
    size, offsets = stencil_offsets(grid.d, stencil)
    src = _normalize_sources(grid, sources)
    dist = _run_dijkstra(
        grid, offsets, GEODESIC, metric.G_samples, None, _passable_mask(grid), src
    )
    return DistanceField(
        grid,
        dist,
        source=f"geodesic from {len(src)} node(s)",
        stencil=size,
        consistency_bound=STENCIL_BOUNDS[size],
    )


def eikonal_arrival(grid: Grid, speed, sources, *, stencil: int | None = None) -> DistanceField:
    """First-arrival times for a front moving at the given speed.

    ``speed`` is either a scalar array per node (isotropic) or a
    VelocityField, in which case the directional speed along an edge is the
    square root of the velocity-matrix quadratic form.  Nodes whose speed
    scale falls below 1e-12 of the maximum are impassable and stay at +inf.
    """
    passable = _passable_mask(grid)
    if isinstance(speed, VelocityField):
        if speed.grid is not grid and speed.grid.shape != grid.shape:
            raise ValueError("velocity field grid does not match")
        M = speed.M_samples
        scale = np.sqrt(np.maximum(np.linalg.eigvalsh(M)[..., -1], 0.0))
        passable = passable & (scale >= 1e-12 * float(scale.max()))
        mode, mats, sp = ANISO_TIME, M, None
    else:
        s = np.asarray(speed, dtype=float)
        if s.shape != grid.shape:
            raise ValueError(f"speed shape {s.shape}, expected {grid.shape}")
        if np.any(s < 0):
            raise ValueError("speed must be nonnegative")
        passable = passable & (s >= 1e-12 * float(s.max()))
        mode, mats, sp = ISO_TIME, None, s
    size, offsets = stencil_offsets(grid.d, stencil)
    src = _normalize_sources(grid, sources)
    dist = _run_dijkstra(grid, offsets, mode, mats, sp, passable, src)
    return DistanceField(
        grid,
        dist,
        source=f"arrival from {len(src)} node(s)",
        stencil=size,
        consistency_bound=STENCIL_BOUNDS[size],
    )


# --- divergence grading ----------------------------------------------------

@dataclass
class CompletenessVerdict:
    """Graded divergence evidence from a cutoff sequence."""

    classification: str
    criterion: str
    cutoffs: list
    integrals: list
    parameters: dict = field(default_factory=dict)

    @property
    def partial_integrals(self) -> list[tuple[float, float]]:
        return list(zip(self.cutoffs, self.integrals))

    def to_json(self) -> dict:
        return {
            "classification": self.classification,
            "criterion": self.criterion,
            "cutoffs": [float(c) for c in self.cutoffs],
            "integrals": [float(v) for v in self.integrals],
            "parameters": _json_safe(self.parameters),
        }


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isfinite(v):
            return v
        return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_json_safe(v) for v in obj.tolist()]
    return obj


def combine_classifications(classifications) -> str:
    """Weakest grade wins: completeness needs every escape route divergent."""
    ranked = [VERDICT_GRADES.index(c) for c in classifications]
    if not ranked:
        raise ValueError("no classifications to combine")
    return VERDICT_GRADES[max(ranked)]


def _classify_increments(increments, total: float) -> tuple[str, dict]:
    """Grade a sequence of positive partial-sum increments.

    If the log2 ratios of consecutive increments are stable (spread within
    1%), the tail is a measured power law: exponent ≥ -0.01 means the sum
    grows at least logarithmically (certified-divergent), a decisively
    negative exponent gives a Richardson-extrapolated finite limit.  With no
    stable exponent the cruder geometric-ratio rules decide, and anything
    left over is inconclusive.
    """
    inc = np.asarray(increments, dtype=float)
    extras: dict = {}
    if inc.size < 3:
        return "inconclusive", {"diagnostic": "fewer than 3 increments"}
    w = inc[-CLASSIFY_WINDOW:]
    tiny = 1e-14 * max(abs(total), float(inc.max(initial=0.0)), 1e-300)
    if float(w.max()) <= tiny:
        extras["limit_estimate"] = float(total)
        return "likely-convergent", extras
    if float(w[-1]) <= tiny and float(w.min()) >= -tiny:
        # refinement stopped changing the answer: saturated at resolution
        extras["limit_estimate"] = float(total)
        extras["diagnostic"] = "increments saturated"
        return "likely-convergent", extras
    if float(w.min()) <= 0.0:
        return "inconclusive", {"diagnostic": "stalled or non-positive increments"}
    rho = np.log2(w[1:] / w[:-1])
    spread = float(rho.max() - rho.min())
    mean = float(rho.mean())
    extras["tail_exponent"] = mean
    extras["exponent_spread"] = spread
    if spread <= POWER_FIT_TOL:
        if mean >= -POWER_FIT_TOL:
            return "certified-divergent", extras
        q = 2.0**mean
        extras["limit_estimate"] = float(total + w[-1] * q / (1.0 - q))
        return "likely-convergent", extras
    ratios = w[1:] / w[:-1]
    if np.all(np.diff(w) >= -1e-12 * float(w.max())):
        return "likely-divergent", extras
    if float(ratios.max()) <= GEOMETRIC_CONVERGENT_RATIO:
        q = float(ratios.max())
        extras["limit_estimate"] = float(total + w[-1] * q / (1.0 - q))
        return "likely-convergent", extras
    if float(ratios.min()) >= GEOMETRIC_DIVERGENT_RATIO:
        return "likely-divergent", extras
    return "inconclusive", extras


def power_law_classify(p: float) -> str:
    """Analytic verdict for a speed vanishing like delta^p at the boundary."""
    return "divergent" if p >= 1.0 else "convergent"


def _speed_callable(speed):
    if callable(speed):
        return speed, "<callable>"
    expr = dsl.parse(speed) if isinstance(speed, str) else speed
    free = dsl.expr_variables(expr)
    if not free <= {"x"}:
        raise ValueError(
            f"ray speed must be a function of x alone, found {sorted(free)}"
        )
    src = speed if isinstance(speed, str) else dsl.to_text(expr)

    def s(t: float) -> float:
        return dsl.eval_expr(expr, {"x": float(t)}, source=src)

    return s, src


def _cutoff_sequence(t0: float, t_end: float, n: int) -> list[float]:
    if math.isfinite(t_end):
        span = t_end - t0
        return [t_end - span * 0.5**k for k in range(1, n + 1)]
    if t0 > 0:
        return [t0 * 2.0**k for k in range(1, n + 1)]
    return [t0 + (2.0**k - 1.0) for k in range(1, n + 1)]


def ray_completeness(
    speed,
    t0: float,
    t_end: float,
    *,
    n_cutoffs: int = 24,
    tail: str | None = None,
    criterion: str = "ray-quadrature",
    extra_parameters: dict | None = None,
) -> CompletenessVerdict:
    """Grade divergence of the traversal-time integral of 1/speed.

    ``speed`` is a positive scalar profile of the ray parameter (a DSL
    expression in x, or a callable); ``t_end`` may be infinite.  Cutoffs
    approach ``t_end`` geometrically and the partial integrals are computed
    by adaptive quadrature segment by segment.  Declaring ``tail="const-over-t"``
    asserts an inverse-linear speed tail; it is certified only if the
    measured increments are constant within 1%.
    """
    t0 = float(t0)
    t_end = float(t_end)
    if not t_end > t0:
        raise ValueError(f"need t0 < t_end, got [{t0}, {t_end}]")
    if n_cutoffs < 4:
        raise ValueError("need at least 4 cutoffs")
    if tail not in (None, "const-over-t"):
        raise ValueError(f"unknown tail model {tail!r}")
    s, src = _speed_callable(speed)

    def integrand(t: float) -> float:
        v = s(t)
        if not v > 0:
            raise DomainEvalError(
                "speed must stay positive along the ray",
                point=t,
                fragment=src,
            )
        return 1.0 / v

    cutoffs = _cutoff_sequence(t0, t_end, n_cutoffs)
    params = {"t0": t0, "t_end": t_end, "n_cutoffs": n_cutoffs, "speed": src}
    if extra_parameters:
        params.update(extra_parameters)
    integrals: list[float] = []
    total = 0.0
    prev = t0
    diagnostic = None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # quad reports trouble via full_output
        for T in cutoffs:
            res = quad(integrand, prev, T, limit=200, full_output=1)
            val = res[0]
            if len(res) >= 4 or not math.isfinite(val):
                diagnostic = str(res[3]) if len(res) >= 4 else "non-finite segment"
                break
            total += val
            integrals.append(total)
            prev = T
    if diagnostic is not None:
        params["diagnostic"] = diagnostic
        return CompletenessVerdict(
            "inconclusive", criterion, cutoffs[: len(integrals)], integrals, params
        )
    inc = np.diff(np.asarray(integrals))
    if tail == "const-over-t":
        wnd = inc[-CLASSIFY_WINDOW:]
        m = float(wnd.mean())
        if m > 0 and float(np.abs(wnd - m).max()) <= POWER_FIT_TOL * m:
            params["tail_exponent"] = 0.0
            params["declared_tail"] = tail
            return CompletenessVerdict(
                "certified-divergent", criterion, cutoffs, integrals, params
            )
    cls, extras = _classify_increments(inc, total)
    params.update(extras)
    return CompletenessVerdict(cls, criterion, cutoffs, integrals, params)


def boundary_distance_probe(
    metric: MetricField,
    probe,
    margins,
    *,
    stencil: int | None = None,
) -> tuple[list[tuple[float, float]], CompletenessVerdict]:
    """Distances from a probe point to shrinking bands along the boundary.

    For each margin m the reported distance is the metric distance from the
    probe to the nearest node lying within m of the true boundary.  The
    growth of that sequence as margins shrink geometrically is graded with
    the same rules as the ray quadrature: logarithmic or faster growth is
    divergence evidence, a finite limit means the boundary is metrically
    reachable.
    """
    grid = metric.grid
    dom = grid.domain
    if not dom.has_finite_boundary():
        raise UnsupportedSystemError(
            "domain has no finite boundary; use the radial growth envelope "
            "for behavior at infinity"
        )
    probe = np.atleast_1d(np.asarray(probe, dtype=float))
    if not dom.contains(probe, strict=True):
        raise ValueError(f"probe point {probe} must lie inside the domain")
    m_arr = np.asarray(margins, dtype=float)
    if m_arr.ndim != 1 or len(m_arr) < 2:
        raise ValueError("margins must be a 1-D sequence with at least 2 entries")
    if np.any(m_arr <= 0) or np.any(np.diff(m_arr) >= 0):
        raise ValueError("margins must be positive and strictly decreasing")
    bdist = node_boundary_distances(grid)
    deepest = float(bdist[np.isfinite(bdist)].max())
    if float(m_arr[0]) >= deepest:
        raise ValueError(
            f"margin {m_arr[0]:.6g} reaches the deepest interior node "
            f"({deepest:.6g} from the boundary); start below that"
        )
    src_idx = grid.nearest_node(probe)
    dfield = lattice_geodesic(metric, [src_idx], stencil=stencil)
    pairs: list[tuple[float, float]] = []
    for m in m_arr:
        mask = bdist <= m
        if not mask.any():
            raise ValueError(
                f"margin {m:.6g} captures no grid nodes; refine the grid or "
                "stop at a larger margin"
            )
        pairs.append((float(m), float(dfield.values[mask].min())))
    dists = np.asarray([p[1] for p in pairs])
    params = {
        "probe": [float(v) for v in probe],
        "stencil": dfield.stencil,
        "consistency_bound": dfield.consistency_bound,
    }
    if metric.degenerate:
        params["warnings"] = [
            "degenerate-metric: distances cross regions where the velocity "
            "majorant was capped"
        ]
    if not np.all(np.isfinite(dists)):
        params["diagnostic"] = "some margin bands are unreachable from the probe"
        verdict = CompletenessVerdict(
            "inconclusive", "boundary-distance", list(m_arr), list(dists), params
        )
        return pairs, verdict
    cls, extras = _classify_increments(np.diff(dists), float(dists[-1]))
    params.update(extras)
    verdict = CompletenessVerdict(
        cls, "boundary-distance", list(m_arr), [float(v) for v in dists], params
    )
    return pairs, verdict
