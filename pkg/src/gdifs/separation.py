"""Strong and open set separation checks on cylinder clouds.

The gap between two cylinders is the set distance ``min |x - y|``. A cloud
gap alone only bounds it from below (after subtracting ``2 * error_bound``);
the upper end of the bracket comes from *witness* clouds whose points lie
exactly on the attractor, namely images of fixed points of cycles.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.ndimage import binary_erosion
from scipy.spatial import cKDTree

from .attractor import AttractorApprox, cylinder_set, expand_clouds
from .errors import GDIFSError, SeparationError
from .graph import Path, count_paths, shortest_cycle_through
from .system import GDIFS

SLACK = 1e-9
WITNESS_POINTS = 2**18
MIN_RESOLUTION_FRACTION = 2.0**-20
MAX_PIXELS = 10**8


# -- witness points ----------------------------------------------------------

def anchor_points(system: GDIFS) -> list[np.ndarray]:
    """Points known to lie exactly on each ``A_i``.

    For every edge ``e`` leaving ``i`` the fixed point of the shortest cycle
    starting with ``e`` belongs to ``A_i`` (and to the cylinder of ``e``).
    Vertices on no cycle inherit ``S_e`` images of their successors' anchors.
    """
    g = system.graph
    anchors: list[list[np.ndarray]] = [[] for _ in range(system.n)]
    for e in system.edges:
        try:
            cycle = shortest_cycle_through(g, e)
        except GDIFSError:
            continue
        comp = system.compose(Path(tuple(cycle)))
        fixed = np.linalg.solve(np.eye(system.dim) - comp.linear, comp.translation)
        anchors[e.source - 1].append(fixed)
    for _ in range(system.n):
        for e in system.edges:
            src, tgt = e.source - 1, e.target - 1
            if not anchors[src] and anchors[tgt]:
                anchors[src].append(system.edge_map(e)(anchors[tgt][0]))
    return [np.array(a) for a in anchors]


def witness_depth(system: GDIFS, n_anchors: int, limit: int = WITNESS_POINTS,
                  max_depth: int = 12) -> int:
    depth = 1
    while depth < max_depth and count_paths(system.graph, depth + 1).sum(axis=1).max() * n_anchors <= limit:
        depth += 1
    return depth


def witness_clouds(system: GDIFS, depth: int | None = None):
    """Exact attractor points arranged like :func:`compute_attractor` clouds."""
    anchors = anchor_points(system)
    if depth is None:
        depth = witness_depth(system, max(len(a) for a in anchors))
    pts, _, slices = expand_clouds(system, anchors, depth)
    return pts, slices, depth


# -- gaps -------------------------------------------------------------------

def _set_gap(a: np.ndarray, tree_b: cKDTree, lo_b: np.ndarray, hi_b: np.ndarray,
             best: float) -> float:
    """``min(best, dist(a, b))``; only points of ``a`` that could beat ``best`` are queried."""
    if np.isfinite(best):
        near = np.all((a >= lo_b - best) & (a <= hi_b + best), axis=1)
        a = a[near]
        if len(a) == 0:
            return best
    dist, _ = tree_b.query(a, distance_upper_bound=best if np.isfinite(best) else np.inf)
    return min(best, float(dist.min()))


def _pair_gaps(clouds: dict[tuple[int, int], np.ndarray]) -> dict[tuple, float]:
    """Exact set gap for every unordered pair of labelled clouds."""
    keys = sorted(clouds)
    trees = {k: cKDTree(clouds[k]) for k in keys}
    bounds = {k: (clouds[k].min(axis=0), clouds[k].max(axis=0)) for k in keys}
    out = {}
    for a, b in combinations(keys, 2):
        small, big = (a, b) if len(clouds[a]) <= len(clouds[b]) else (b, a)
        # a cheap finite upper bound lets the filtered query skip most points
        probe = clouds[small][:: max(1, len(clouds[small]) // 64)]
        guess = float(trees[big].query(probe)[0].min())
        out[(a, b)] = _set_gap(clouds[small], trees[big], *bounds[big], guess)
    return out


@dataclass
class SeparationReport:
    """Gap brackets ``[lower, upper]`` per source vertex and over all edge pairs.

    ``per_vertex_gaps[v]`` is the cloud gap between distinct cylinders leaving
    ``v`` (``inf`` if only one edge leaves ``v``).
    """

    per_vertex_gaps: dict[int, float]
    per_vertex_lower: dict[int, float]
    per_vertex_upper: dict[int, float]
    global_gap: float
    global_lower: float
    global_upper: float
    depth: int
    error_bound: float
    witness_depth: int
    closest_pair: tuple[int, int] | None = None
    tolerance: float | None = None
    verdict: str | None = None
    pair_gaps: dict[tuple[int, int], float] = field(default_factory=dict, repr=False)

    @property
    def min_vertex_lower(self) -> float:
        return min(self.per_vertex_lower.values())

    def to_dict(self) -> dict:
        return {
            "per_vertex_gaps": {str(v): g for v, g in sorted(self.per_vertex_gaps.items())},
            "per_vertex_lower": {str(v): g for v, g in sorted(self.per_vertex_lower.items())},
            "per_vertex_upper": {str(v): g for v, g in sorted(self.per_vertex_upper.items())},
            "global_gap": self.global_gap,
            "global_bracket": [self.global_lower, self.global_upper],
            "closest_pair": list(self.closest_pair) if self.closest_pair else None,
            "depth": self.depth,
            "witness_depth": self.witness_depth,
            "error_bound": self.error_bound,
            "tolerance": self.tolerance,
            "verdict": self.verdict,
        }


def cylinder_gap(system: GDIFS, approx: AttractorApprox,
                 witness_depth_: int | None = None) -> SeparationReport:
    """Gaps between depth-1 cylinders, per source vertex and globally.

    Lower ends are ``cloud gap - 2 * error_bound``; upper ends are gaps
    between exact witness points plus a ``1e-9`` slack.
    """
    if not approx.structured:
        raise GDIFSError("cylinder_gap needs a compute_attractor approximation")
    err = approx.error_bound
    clouds = {(e.source, e.id): approx.cylinder_cloud(e.source, e.id) for e in system.edges}
    wpts, wslices, wdepth = witness_clouds(system, witness_depth_)
    wclouds = {}
    for e in system.edges:
        a, b = wslices[e.source - 1][e.id]
        wclouds[(e.source, e.id)] = wpts[e.source - 1][a:b]
    gaps = _pair_gaps(clouds)
    wgaps = _pair_gaps(wclouds)
    vgap = {v: np.inf for v in system.graph.vertices}
    vup = {v: np.inf for v in system.graph.vertices}
    g_best, g_up, closest = np.inf, np.inf, None
    pair_gaps = {}
    for (a, b), gap in gaps.items():
        pair_gaps[(a[1], b[1])] = gap
        if gap < g_best:
            g_best, closest = gap, (a[1], b[1])
        g_up = min(g_up, wgaps[(a, b)] + SLACK)
        if a[0] == b[0]:
            vgap[a[0]] = min(vgap[a[0]], gap)
            vup[a[0]] = min(vup[a[0]], wgaps[(a, b)] + SLACK)
    vlow = {v: max(0.0, g - 2 * err) if np.isfinite(g) else np.inf for v, g in vgap.items()}
    return SeparationReport(
        per_vertex_gaps=vgap, per_vertex_lower=vlow, per_vertex_upper=vup,
        global_gap=float(g_best),
        global_lower=max(0.0, g_best - 2 * err) if np.isfinite(g_best) else np.inf,
        global_upper=float(g_up), depth=approx.depth, error_bound=err,
        witness_depth=wdepth, closest_pair=closest, pair_gaps=pair_gaps,
    )


def check_ssc(system: GDIFS, approx: AttractorApprox, tol: float = 1e-6,
              report: SeparationReport | None = None) -> SeparationReport:
    """Three-valued strong separation verdict.

    ``certified`` when every per-vertex lower bracket exceeds ``tol``,
    ``refuted`` when some per-vertex upper bracket is below ``tol``, and
    ``inconclusive`` otherwise (a deeper approximation may decide).
    """
    if report is None:
        report = cylinder_gap(system, approx)
    lows = report.per_vertex_lower.values()
    ups = report.per_vertex_upper.values()
    if all(lo > tol for lo in lows):
        verdict = "certified"
    elif any(up < tol for up in ups):
        verdict = "refuted"
    else:
        verdict = "inconclusive"
    report.tolerance = float(tol)
    report.verdict = verdict
    return report


def require_ssc(system: GDIFS, approx: AttractorApprox, tol: float = 1e-6) -> SeparationReport:
    report = check_ssc(system, approx, tol)
    if report.verdict != "certified":
        raise SeparationError(
            f"strong separation is {report.verdict} for {system.name or 'the system'} "
            f"(per-vertex lower brackets {report.per_vertex_lower}, tol {tol})"
        )
    return report


# -- open set condition -----------------------------------------------------

@dataclass(frozen=True)
class OpenSetTuple:
    """Per-vertex finite unions of open axis-aligned boxes.

    ``boxes[v]`` is a list of ``(lo, hi)`` pairs for vertex ``v`` (1-based).
    """

    boxes: dict[int, list[tuple[np.ndarray, np.ndarray]]]

    def __post_init__(self):
        clean = {}
        for v, items in self.boxes.items():
            if not items:
                raise GDIFSError(f"open set of vertex {v} is empty")
            out = []
            for lo, hi in items:
                lo = np.atleast_1d(np.asarray(lo, dtype=float))
                hi = np.atleast_1d(np.asarray(hi, dtype=float))
                if lo.shape != hi.shape or not np.all(lo < hi) or not np.all(np.isfinite(hi - lo)):
                    raise GDIFSError(f"open box ({lo}, {hi}) of vertex {v} is empty or unbounded")
                out.append((lo, hi))
            clean[int(v)] = out
        object.__setattr__(self, "boxes", clean)

    @classmethod
    def uniform(cls, system: GDIFS, lo, hi) -> "OpenSetTuple":
        return cls({v: [(lo, hi)] for v in system.graph.vertices})

    def contains(self, vertex: int, x: np.ndarray) -> np.ndarray:
        """Mask of points strictly inside ``O_vertex``."""
        inside = np.zeros(len(x), dtype=bool)
        for lo, hi in self.boxes[vertex]:
            inside |= np.all((x > lo) & (x < hi), axis=1)
        return inside

    def hull(self) -> tuple[np.ndarray, np.ndarray]:
        los = [lo for items in self.boxes.values() for lo, _ in items]
        his = [hi for items in self.boxes.values() for _, hi in items]
        return np.min(los, axis=0), np.max(his, axis=0)

    def to_dict(self) -> dict:
        return {str(v): [[lo.tolist(), hi.tolist()] for lo, hi in items]
                for v, items in sorted(self.boxes.items())}


@dataclass(frozen=True)
class OscReport:
    verdict: str  # "consistent at resolution" | "violated"
    resolution: float
    grid_shape: tuple[int, ...]
    witness: dict | None = None
    note: str = "a raster check can refute but never prove the open set condition"

    @property
    def consistent(self) -> bool:
        return self.verdict == "consistent"

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "resolution": self.resolution,
                "grid_shape": list(self.grid_shape), "witness": self.witness, "note": self.note}


def _pixel_centres(lo: np.ndarray, hi: np.ndarray, delta: float):
    size = float(np.max(hi - lo))
    if delta < MIN_RESOLUTION_FRACTION * size:
        raise GDIFSError(f"resolution {delta} is below 2^-20 of the box size {size}")
    shape = tuple(int(np.ceil((h - l) / delta)) + 2 for l, h in zip(lo, hi))
    if np.prod(shape, dtype=float) > MAX_PIXELS:
        raise GDIFSError(f"raster of shape {shape} is too large")
    axes = [lo[j] - delta + (np.arange(shape[j]) + 0.5) * delta for j in range(len(lo))]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1), shape


def check_osc(system: GDIFS, open_sets: OpenSetTuple, delta: float) -> OscReport:
    """Raster test of ``S_e(O_k) ⊆ O_i`` and pairwise disjointness of the images.

    A pixel belongs to ``S_e(O_k)`` when ``S_e^{-1}`` of its centre lies
    strictly inside ``O_k``.
    """
    missing = [v for v in system.graph.vertices if v not in open_sets.boxes]
    if missing:
        raise GDIFSError(f"no open set given for vertices {missing}")
    lo, hi = open_sets.hull()
    centres, shape = _pixel_centres(lo, hi, delta)
    inside = {v: open_sets.contains(v, centres) for v in system.graph.vertices}

    def witness(kind, flat, **extra):
        idx = np.unravel_index(int(flat), shape)
        return {"kind": kind, "pixel": [int(i) for i in idx],
                "centre": centres[flat].tolist(), **extra}

    for v in system.graph.vertices:
        images = []
        for e in system.graph.out_edges[v]:
            m = system.edge_map(e)
            img = open_sets.contains(e.target, m.inverse(centres))
            bad = np.flatnonzero(img & ~inside[v])
            if bad.size:
                return OscReport("violated", delta, shape,
                                 witness("containment", bad[0], edge=e.id, vertex=v))
            images.append((e.id, img))
        for (ea, ia), (eb, ib) in combinations(images, 2):
            both = np.flatnonzero(ia & ib)
            if both.size:
                return OscReport("violated", delta, shape,
                                 witness("overlap", both[0], edges=[ea, eb], vertex=v))
    return OscReport("consistent", delta, shape)


# -- interior overlap ---------------------------------------------------------

@dataclass(frozen=True)
class OverlapResult:
    area: float
    resolution: float
    common_pixels: int
    perimeter_estimate: float
    degenerate: bool

    def to_dict(self) -> dict:
        return {"area": self.area, "resolution": self.resolution,
                "common_pixels": self.common_pixels,
                "perimeter_estimate": self.perimeter_estimate, "degenerate": self.degenerate}


def _interior(mask: np.ndarray) -> np.ndarray:
    return binary_erosion(mask, structure=np.ones((3, 3), dtype=bool), border_value=0)


def interior_overlap(system: GDIFS, approx: AttractorApprox, edge_a: int, edge_b: int,
                     delta: float) -> OverlapResult:
    """Area ``delta^2 * #(common interior pixels)`` of two same-source cylinder rasters.

    A pixel is interior when its full 3x3 neighbourhood is set. The result is
    flagged degenerate when either raster has no interior at all.
    """
    if system.dim != 2:
        raise GDIFSError("interior_overlap needs a planar system")
    ea, eb = system.graph.edge_by_id[edge_a], system.graph.edge_by_id[edge_b]
    if edge_a == edge_b or ea.source != eb.source:
        raise GDIFSError("interior_overlap needs two distinct edges with the same source")
    v = ea.source
    origin = approx.boxes[v - 1, 0] - delta
    extent = approx.boxes[v - 1, 1] - origin + delta
    shape = tuple(int(np.ceil(x / delta)) + 1 for x in extent)
    rasters = []
    for e in (edge_a, edge_b):
        pts = approx.cylinder_cloud(v, e)
        idx = np.floor((pts - origin) / delta).astype(np.int64)
        idx = np.clip(idx, 0, np.array(shape) - 1)
        mask = np.zeros(shape, dtype=bool)
        mask[idx[:, 0], idx[:, 1]] = True
        rasters.append(_interior(mask))
    common = int(np.count_nonzero(rasters[0] & rasters[1]))
    degenerate = not (rasters[0].any() and rasters[1].any())
    boxes = [cylinder_set(system, Path((e,)), approx.boxes).bbox for e in (ea, eb)]
    lo = np.maximum(boxes[0][0], boxes[1][0])
    hi = np.minimum(boxes[0][1], boxes[1][1])
    perim = float(2 * np.sum(np.maximum(hi - lo, 0.0))) if np.all(hi >= lo) else 0.0
    return OverlapResult(delta * delta * common, delta, common, perim, degenerate)
