"""Box-counting dimension of attractor clouds and the similarity-dimension root.

Grid occupancy stands in for covering numbers: ``N_delta`` is the number of
cells of a ``delta``-grid, anchored at a fixed origin, that contain a point.
Scales finer than four times the approximation error are refused because the
counts there measure the cloud, not the attractor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .attractor import AttractorApprox
from .errors import ConvergenceError, GDIFSError, InvalidGraphError, MapError
from .separation import OpenSetTuple, check_osc
from .system import GDIFS

SLOPE_TOL = 0.05
FLOOR_FACTOR = 4.0
MIN_SCALES = 4
HAUSDORFF_NOTE = ("box-counting slopes stand in for Hausdorff dimension; "
                  "equality of the two is assumed, not proven")


@dataclass(frozen=True)
class BoxCounts:
    scales: np.ndarray  # strictly decreasing
    counts: np.ndarray

    def rows(self) -> list[tuple[float, int]]:
        return [(float(s), int(c)) for s, c in zip(self.scales, self.counts)]


def _cell_count(points: np.ndarray, origin: np.ndarray, delta: float) -> int:
    idx = np.floor((points - origin) / delta).astype(np.int64)
    idx -= idx.min(axis=0)
    key = idx[:, 0].copy()
    for j in range(1, idx.shape[1]):
        key = key * (int(idx[:, j].max()) + 1) + idx[:, j]
    return int(np.unique(key).size)


def box_counts(points: np.ndarray, scales, origin=None, floor: float = 0.0) -> BoxCounts:
    """Occupied-cell counts of ``points`` at each scale.

    ``origin`` anchors the grid (default: the lower corner of the cloud's
    bounding box). Scales below ``floor`` raise :class:`GDIFSError`.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if len(pts) == 0:
        raise GDIFSError("box counting needs a nonempty cloud")
    sc = np.asarray(scales, dtype=float)
    if np.any(sc <= 0):
        raise GDIFSError("scales must be positive")
    if np.any(np.diff(sc) >= 0):
        raise GDIFSError("scales must be strictly decreasing")
    if np.any(sc < floor):
        raise GDIFSError(f"scale {sc.min():.3g} is below the resolution floor {floor:.3g}")
    o = pts.min(axis=0) if origin is None else np.broadcast_to(np.asarray(origin, dtype=float), pts.shape[1:])
    return BoxCounts(sc, np.array([_cell_count(pts, o, s) for s in sc], dtype=np.int64))


def cloud_box_counts(approx: AttractorApprox, vertex: int, scales,
                     points: np.ndarray | None = None) -> BoxCounts:
    """Counts of a vertex cloud on the grid anchored at its box corner, with the 4*error floor."""
    pts = approx.cloud(vertex) if points is None else points
    return box_counts(pts, scales, origin=approx.boxes[vertex - 1, 0],
                      floor=FLOOR_FACTOR * approx.error_bound)


def admissible_scales(approx: AttractorApprox, base: float = 2.0, count: int = 5,
                      coarsest: int = 2) -> np.ndarray:
    """The ``count`` finest scales ``base^-k`` (k >= coarsest) above the 4*error floor."""
    floor = FLOOR_FACTOR * approx.error_bound
    k_max = int(np.floor(-np.log(floor) / np.log(base) + 1e-12)) if floor > 0 else coarsest + count + 10
    while base ** -k_max < floor:
        k_max -= 1
    k_min = max(coarsest, k_max - count + 1)
    if k_max - k_min + 1 < MIN_SCALES:
        raise GDIFSError("the approximation is too coarse for four admissible scales; increase depth")
    return base ** -np.arange(k_min, k_max + 1, dtype=float)


@dataclass(frozen=True)
class DimensionEstimate:
    scales: list[float]
    counts: list[int]
    slope: float
    lower: float
    upper: float
    residual: float
    intercept: float

    def to_dict(self) -> dict:
        return {"scales": self.scales, "counts": self.counts, "slope": self.slope,
                "lower": self.lower, "upper": self.upper, "residual": self.residual}


def box_dimension(table: BoxCounts) -> DimensionEstimate:
    """Least-squares slope of ``log N`` against ``-log delta``.

    ``lower`` and ``upper`` are the extreme slopes between consecutive scales.
    """
    if len(table.scales) < MIN_SCALES:
        raise GDIFSError(f"box_dimension needs at least {MIN_SCALES} scales, got {len(table.scales)}")
    x = -np.log(table.scales)
    y = np.log(table.counts.astype(float))
    coef, res, *_ = np.polyfit(x, y, 1, full=True)
    pair = np.diff(y) / np.diff(x)
    residual = float(np.sqrt(res[0] / len(x))) if len(res) else 0.0
    slope = float(coef[0])
    return DimensionEstimate(table.scales.tolist(), table.counts.tolist(), slope,
                             float(min(pair.min(), slope)), float(max(pair.max(), slope)),
                             residual, float(coef[1]))


def spectral_radius(m: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(m))))


def ratio_matrix(system: GDIFS, s: float) -> np.ndarray:
    """``M(s)[i, k] = sum of r_e^s over edges i -> k``."""
    m = np.zeros((system.n, system.n))
    for e in system.edges:
        m[e.source - 1, e.target - 1] += system.maps[e.id].ratio ** s
    return m


def similarity_dimension(system: GDIFS, tol: float = 1e-12) -> float:
    """Root ``s`` of ``spectral_radius(M(s)) = 1`` on ``[0, d]``, by bisection."""
    if not system.is_similarity:
        raise MapError("similarity dimension needs every map to be a similarity")
    system.require_strongly_connected()

    def f(s):
        return spectral_radius(ratio_matrix(system, s)) - 1.0

    lo, hi = 0.0, float(system.dim)
    if f(lo) <= 0.0:
        return 0.0
    if f(hi) > 0.0:
        raise ConvergenceError(
            f"spectral radius stays above 1 on [0, {system.dim}]; the root is not bracketed"
        )
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class EqualityReport:
    estimates: dict[int, DimensionEstimate]
    max_difference: float
    tolerance: float
    similarity_dimension: float | None

    @property
    def passed(self) -> bool:
        return self.max_difference <= self.tolerance

    def to_dict(self) -> dict:
        return {"estimates": {str(v): e.to_dict() for v, e in sorted(self.estimates.items())},
                "max_difference": self.max_difference, "tolerance": self.tolerance,
                "similarity_dimension": self.similarity_dimension, "passed": self.passed,
                "note": HAUSDORFF_NOTE}


def check_vertex_dimension_equality(system: GDIFS, approx: AttractorApprox, scales,
                                    tol: float = SLOPE_TOL) -> EqualityReport:
    """Per-vertex box dimensions of a strongly connected system and their spread."""
    if not system.strongly_connected:
        raise InvalidGraphError("vertex dimensions agree only for strongly connected systems")
    est = {v: box_dimension(cloud_box_counts(approx, v, scales)) for v in system.graph.vertices}
    slopes = [e.slope for e in est.values()]
    sdim = similarity_dimension(system) if system.is_similarity else None
    return EqualityReport(est, float(max(slopes) - min(slopes)), tol, sdim)


@dataclass(frozen=True)
class RestrictedVertex:
    vertex: int
    full: DimensionEstimate
    restricted: DimensionEstimate | None
    kept_points: int

    @property
    def nonempty(self) -> bool:
        return self.kept_points > 0

    @property
    def difference(self) -> float | None:
        return None if self.restricted is None else abs(self.restricted.slope - self.full.slope)

    def passed(self, tol: float = SLOPE_TOL) -> bool:
        close = self.difference is not None and self.difference <= tol
        return self.nonempty == close

    def to_dict(self) -> dict:
        return {"vertex": self.vertex, "full": self.full.to_dict(),
                "restricted": None if self.restricted is None else self.restricted.to_dict(),
                "kept_points": self.kept_points, "nonempty": self.nonempty,
                "difference": self.difference}


@dataclass(frozen=True)
class RestrictedReport:
    vertices: list[RestrictedVertex]
    tolerance: float
    osc_verdict: str | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(v.passed(self.tolerance) for v in self.vertices)

    def to_dict(self) -> dict:
        return {"vertices": [v.to_dict() for v in self.vertices], "tolerance": self.tolerance,
                "osc_verdict": self.osc_verdict, "passed": self.passed,
                "notes": self.notes + [HAUSDORFF_NOTE]}


def dim_restricted(system: GDIFS, approx: AttractorApprox, open_sets: OpenSetTuple, scales,
                   tol: float = SLOPE_TOL, osc_resolution: float | None = None) -> RestrictedReport:
    """Compare the slope of ``A_i ∩ O_i`` with that of ``A_i`` for every vertex.

    A vertex passes when a nonempty restriction has a matching slope, or when
    the restriction is empty (nothing is asserted then). The open set
    condition is checked at ``osc_resolution`` when given and only recorded.
    """
    notes = []
    verdict = None
    if osc_resolution is not None:
        verdict = check_osc(system, open_sets, osc_resolution).verdict
        if verdict != "consistent":
            notes.append("the open sets fail the raster open set check")
    out = []
    for v in system.graph.vertices:
        pts = approx.cloud(v)
        full = box_dimension(cloud_box_counts(approx, v, scales))
        kept = pts[open_sets.contains(v, pts)] if v in open_sets.boxes else pts[:0]
        restricted = box_dimension(cloud_box_counts(approx, v, scales, kept)) if len(kept) else None
        out.append(RestrictedVertex(v, full, restricted, int(len(kept))))
    return RestrictedReport(out, tol, verdict, notes)


def closure_duplicates(points: np.ndarray, origin: np.ndarray, delta: float,
                       seed: int = 0) -> np.ndarray:
    """Copies of ``points`` moved at random but kept inside their own ``delta``-cell.

    Each copy moves a random fraction of the way towards its cell centre, so
    it never crosses a grid line of any coarser scale that is an integer
    multiple of ``delta``.
    """
    rng = np.random.default_rng(seed)
    cell = np.floor((points - origin) / delta)
    centre = origin + (cell + 0.5) * delta
    t = rng.random((len(points), 1))
    return points + t * (centre - points)
