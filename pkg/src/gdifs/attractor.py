"""Certified finite approximations of the attractor tuple ``(A_1, ..., A_n)``.

The deterministic approximation at depth ``N`` is the cloud
``P_i = {S_w(c_k) : w in E^N_{i,k}}`` where ``c_k`` is the centre of an
invariant box ``Box_k`` containing ``A_k``. Each cloud point and the cylinder
``S_w(A_k)`` it stands for lie in ``S_w(Box_k)``, so the Hausdorff distance
between ``P_i`` and ``A_i`` is at most ``r^N * max_k diam(Box_k)``.

Clouds are stored in lexicographic edge-id order of their addresses. That
order is what lets :func:`verify_invariance` and the separation and coding
modules recover cylinders as contiguous slices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np
from scipy.spatial import cKDTree

from .errors import BudgetExceededError, ConvergenceError, GDIFSError, InvalidGraphError
from .graph import Path, count_paths
from .maps import ComposedMap
from .system import GDIFS

DEFAULT_CYLINDER_BUDGET = 10**6
BURN_IN = 100
SLACK = 1e-9
BRUTE_FORCE_PAIRS = 4_000_000


def invariant_bounding_boxes(system: GDIFS, tol: float = 1e-12,
                             max_iter: int = 10**4) -> np.ndarray:
    """Per-vertex boxes with ``S_e(Box_k) ⊆ Box_i`` for every edge ``i -> k``.

    Returns an array of shape ``(n, 2, d)`` holding ``[lo, hi]`` per vertex.
    The iteration starts from the cube circumscribing the ball of radius
    ``max|b_e| / (1 - r)`` and applies the box-image operator until stable.
    """
    r = system.max_ratio
    radius = float(np.max(np.linalg.norm(system.translation, axis=1))) / (1.0 - r)
    d, n = system.dim, system.n
    lo = np.full((n, d), -radius)
    hi = np.full((n, d), radius)
    limit = 1e6 * max(radius, 1.0)
    settled = None
    for it in range(max_iter):
        centre = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        img_c = np.einsum("eij,ej->ei", system.linear, centre[system.targets]) + system.translation
        img_h = np.einsum("eij,ej->ei", np.abs(system.linear), half[system.targets])
        new_lo = np.full((n, d), np.inf)
        new_hi = np.full((n, d), -np.inf)
        np.minimum.at(new_lo, system.sources, img_c - img_h)
        np.maximum.at(new_hi, system.sources, img_c + img_h)
        change = max(np.max(np.abs(new_lo - lo)), np.max(np.abs(new_hi - hi)))
        lo, hi = new_lo, new_hi
        if not np.all(np.isfinite(lo)) or np.max(np.abs(np.concatenate([lo, hi]))) > limit:
            break
        if change <= tol and settled is None:
            settled = it
        # a few extra sweeps let the last digits settle; stop at an exact fixed point
        if settled is not None and (change == 0.0 or it - settled >= 200):
            return np.stack([lo, hi], axis=1)
    raise ConvergenceError(
        "box-image iteration did not converge; the input is likely not contractive "
        "in the box norm"
    )


def box_diameters(boxes: np.ndarray) -> np.ndarray:
    return np.linalg.norm(boxes[:, 1] - boxes[:, 0], axis=1)


def hull_diameter(boxes: np.ndarray) -> float:
    """Diameter of the bounding box of all vertex boxes, an upper bound on diam of the union."""
    return float(np.linalg.norm(boxes[:, 1].max(axis=0) - boxes[:, 0].min(axis=0)))


@dataclass(eq=False)
class AttractorApprox:
    """Per-vertex point clouds approximating ``A_1..A_n``.

    ``points[v - 1]`` is the cloud of vertex ``v``. For deterministic clouds
    ``terminal[v - 1]`` holds the 0-based terminal vertex of every point's
    address, and ``slices[v - 1][edge_id]`` the contiguous block of points
    whose address starts with that edge.
    """

    depth: int
    points: list[np.ndarray]
    boxes: np.ndarray
    error_bound: float
    method: str = "cylinder"
    terminal: list[np.ndarray] | None = None
    slices: list[dict[int, tuple[int, int]]] | None = None
    seed: int | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    def cloud(self, vertex: int) -> np.ndarray:
        return self.points[vertex - 1]

    def cylinder_cloud(self, vertex: int, edge_id: int) -> np.ndarray:
        if self.slices is None:
            raise GDIFSError("cylinder clouds need a deterministic (compute_attractor) approximation")
        a, b = self.slices[vertex - 1][edge_id]
        return self.points[vertex - 1][a:b]

    def cylinder_tree(self, vertex: int, edge_id: int) -> cKDTree:
        key = ("tree", vertex, edge_id)
        if key not in self._cache:
            self._cache[key] = cKDTree(self.cylinder_cloud(vertex, edge_id))
        return self._cache[key]

    @property
    def union(self) -> np.ndarray:
        return np.concatenate(self.points)

    @property
    def structured(self) -> bool:
        return self.terminal is not None and self.slices is not None

    def diameter(self, vertex: int | None = None) -> float:
        pts = self.union if vertex is None else self.cloud(vertex)
        return cloud_diameter(pts)


def cloud_diameter(points: np.ndarray) -> float:
    """Exact diameter of a finite point set (via its convex hull when d = 2)."""
    pts = np.asarray(points, dtype=float)
    if len(pts) < 2:
        return 0.0
    d = pts.shape[1]
    if d == 1:
        return float(pts.max() - pts.min())
    if d == 2 and len(pts) > 3:
        from scipy.spatial import ConvexHull
        from scipy.spatial import QhullError
        try:
            pts = pts[ConvexHull(pts).vertices]
        except QhullError:
            pass
    if len(pts) > 4000:
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        keep = np.any((pts == lo) | (pts == hi), axis=1)
        pts = pts[keep] if keep.sum() >= 2 else pts
    best = 0.0
    for start in range(0, len(pts), 2048):
        blk = pts[start:start + 2048]
        best = max(best, float(np.sqrt(_sqdist(blk[:, None, :], pts[None, :, :]).max())))
    return best


def _sqdist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Squared distances with a fixed summation order over coordinates."""
    out = (a[..., 0] - b[..., 0]) ** 2
    for j in range(1, a.shape[-1]):
        out = out + (a[..., j] - b[..., j]) ** 2
    return out


def expand_clouds(system: GDIFS, seeds: list[np.ndarray], depth: int):
    """Images ``S_w(seeds[k])`` over all depth-``depth`` paths ``w`` from each vertex.

    Returns per-vertex ``(points, terminal, slices)`` in lexicographic order of
    addresses; ``slices[v][edge_id]`` spans the block whose address starts
    with that edge.
    """
    tdtype = np.min_scalar_type(max(system.n - 1, 1))
    pts = [np.asarray(s, dtype=float).reshape(-1, system.dim) for s in seeds]
    term = [np.full(len(p), k, dtype=tdtype) for k, p in enumerate(pts)]
    slices: list[dict[int, tuple[int, int]]] = []
    for _ in range(depth):
        new_pts, new_term, new_slices = [], [], []
        for v in range(system.n):
            blocks, tblocks, sl, pos = [], [], {}, 0
            for e in system.out_index[v]:
                k = system.targets[e]
                blocks.append(system.apply(e, pts[k]))
                tblocks.append(term[k])
                sl[system.edges[e].id] = (pos, pos + len(pts[k]))
                pos += len(pts[k])
            new_pts.append(np.concatenate(blocks))
            new_term.append(np.concatenate(tblocks))
            new_slices.append(sl)
        pts, term, slices = new_pts, new_term, new_slices
    return pts, term, slices


def compute_attractor(system: GDIFS, depth: int, budget: int = DEFAULT_CYLINDER_BUDGET,
                      boxes: np.ndarray | None = None) -> AttractorApprox:
    """Deterministic depth-``depth`` cylinder approximation of every ``A_i``."""
    if depth < 1:
        raise GDIFSError(f"depth must be >= 1, got {depth}")
    total = int(count_paths(system.graph, depth).sum())
    if total > budget:
        raise BudgetExceededError(
            f"{total} cylinders at depth {depth} exceed the budget {budget}; "
            "use chaos_game or a smaller depth"
        )
    if boxes is None:
        boxes = invariant_bounding_boxes(system)
    seeds = 0.5 * (boxes[:, 0] + boxes[:, 1])
    pts, term, slices = expand_clouds(system, [seeds[k][None, :] for k in range(system.n)], depth)
    err = system.max_ratio ** depth * float(box_diameters(boxes).max())
    return AttractorApprox(depth, pts, boxes, err, "cylinder", term, slices)


def chaos_game(system: GDIFS, n_points: int, seed: int, burn_in: int = BURN_IN,
               boxes: np.ndarray | None = None) -> AttractorApprox:
    """Random-iteration approximation; the walk follows edges from target to source.

    Every recorded point lies within ``r^burn_in * max diam(Box)`` of the
    attractor piece of the vertex it is recorded into. Density is not
    guaranteed, so the bound is one-sided.
    """
    in_index = [np.flatnonzero(system.targets == v) for v in range(system.n)]
    starving = [v + 1 for v, ix in enumerate(in_index) if len(ix) == 0]
    if starving:
        raise InvalidGraphError(f"vertices without incoming edges cannot be visited: {starving}")
    if boxes is None:
        boxes = invariant_bounding_boxes(system)
    rng = np.random.default_rng(seed)
    draws = rng.random(burn_in + n_points)
    lin, trans, src = system.linear, system.translation, system.sources
    v = 0
    x = 0.5 * (boxes[0, 0] + boxes[0, 1])
    rec_v = np.empty(n_points, dtype=np.int64)
    rec_x = np.empty((n_points, system.dim))
    for step, u in enumerate(draws):
        cand = in_index[v]
        e = cand[int(u * len(cand))]
        x = lin[e] @ x + trans[e]
        v = src[e]
        if step >= burn_in:
            rec_v[step - burn_in] = v
            rec_x[step - burn_in] = x
    pts = [rec_x[rec_v == k] for k in range(system.n)]
    empty = [k + 1 for k, p in enumerate(pts) if len(p) == 0]
    if empty:
        raise GDIFSError(f"no points recorded for vertices {empty}; increase n_points")
    err = system.max_ratio ** burn_in * float(box_diameters(boxes).max())
    return AttractorApprox(0, pts, boxes, err, "chaos", seed=seed)


# -- cylinder blocks --------------------------------------------------------

@dataclass(frozen=True)
class CylinderSet:
    address: Path
    composed: ComposedMap
    bbox: np.ndarray  # (2, d)


def cylinder_set(system: GDIFS, path: Path, boxes: np.ndarray) -> CylinderSet:
    comp = system.compose(path)
    k = path.terminal - 1
    c = 0.5 * (boxes[k, 0] + boxes[k, 1])
    h = 0.5 * (boxes[k, 1] - boxes[k, 0])
    centre = comp(c)
    half = np.abs(comp.linear) @ h
    return CylinderSet(path, comp, np.stack([centre - half, centre + half]))


def _expand_affine(system: GDIFS, lin: np.ndarray, trans: np.ndarray, term: np.ndarray):
    counts = system.outdeg[term]
    parent = np.repeat(np.arange(len(term)), counts)
    starts = np.repeat(np.cumsum(counts) - counts, counts)
    rank = np.arange(len(parent)) - starts
    ptr = np.concatenate([[0], np.cumsum(system.outdeg)])
    flat = np.concatenate(system.out_index)
    edge = flat[ptr[term[parent]] + rank]
    lp = lin[parent]
    new_t = np.einsum("nij,nj->ni", lp, system.translation[edge]) + trans[parent]
    return lp @ system.linear[edge], new_t, system.targets[edge]


def iter_cylinder_blocks(system: GDIFS, vertex: int, depth: int,
                         block: int = 2**18) -> Iterator[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Yield ``(linear, translation, terminal)`` for all depth-``depth`` cylinders
    from ``vertex`` in lexicographic order, at most about ``block`` at a time."""
    completions = [count_paths(system.graph, m).sum(axis=1) for m in range(depth + 1)]
    split = 0
    while split < depth and completions[depth - split].max() > block:
        split += 1
    d = system.dim
    lin = np.eye(d)[None]
    trans = np.zeros((1, d))
    term = np.array([vertex - 1])
    for _ in range(split):
        lin, trans, term = _expand_affine(system, lin, trans, term)
    leaves = completions[depth - split][term]
    start = 0
    while start < len(term):
        stop = start + 1
        acc = leaves[start]
        while stop < len(term) and acc + leaves[stop] <= block:
            acc += leaves[stop]
            stop += 1
        bl, bt, bk = lin[start:stop], trans[start:stop], term[start:stop]
        for _ in range(depth - split):
            bl, bt, bk = _expand_affine(system, bl, bt, bk)
        yield bl, bt, bk
        start = stop


def cylinder_boxes(system: GDIFS, vertex: int, depth: int,
                   boxes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Bounding boxes ``(lo, hi)`` of ``S_w(Box_k)`` for all depth-``depth`` cylinders."""
    los, his = [], []
    centre = 0.5 * (boxes[:, 0] + boxes[:, 1])
    half = 0.5 * (boxes[:, 1] - boxes[:, 0])
    for lin, trans, term in iter_cylinder_blocks(system, vertex, depth):
        c = np.einsum("nij,nj->ni", lin, centre[term]) + trans
        h = np.einsum("nij,nj->ni", np.abs(lin), half[term])
        los.append(c - h)
        his.append(c + h)
    return np.concatenate(los), np.concatenate(his)


def max_cylinder_diameter(system: GDIFS, depth: int, boxes: np.ndarray) -> float:
    """Largest bounding-box diameter over all depth-``depth`` cylinders of all vertices."""
    half = 0.5 * (boxes[:, 1] - boxes[:, 0])
    best = 0.0
    for v in range(1, system.n + 1):
        for lin, _, term in iter_cylinder_blocks(system, v, depth):
            h = np.einsum("nij,nj->ni", np.abs(lin), half[term])
            best = max(best, float(2.0 * np.sqrt(_sqdist(h, np.zeros_like(h)).max())))
    return best


# -- Hausdorff distances ----------------------------------------------------

def _nn_dist(queries: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Exact nearest-neighbour distance from each query to ``targets``."""
    q = np.atleast_2d(queries)
    if len(q) * len(targets) > BRUTE_FORCE_PAIRS * 16 and len(q) > 64:
        dist, _ = cKDTree(targets).query(q)
        return dist
    rows = max(2**14, 2**24 // max(len(q), 1))
    best = np.full(len(q), np.inf)
    for start in range(0, len(targets), rows):
        blk = targets[start:start + rows]
        best = np.minimum(best, _sqdist(q[:, None, :], blk[None, :, :]).min(axis=1))
    return np.sqrt(best)


def directed_hausdorff(p: np.ndarray, q: np.ndarray) -> float:
    """``max_{x in p} min_{y in q} |x - y|``, exact over the finite sets."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if len(p) == 0 or len(q) == 0:
        raise GDIFSError("Hausdorff distance needs nonempty point sets")
    if p.ndim == 1:
        p, q = p[:, None], q[:, None]
    if len(p) * len(q) <= BRUTE_FORCE_PAIRS:
        return float(np.sqrt(_sqdist(p[:, None, :], q[None, :, :]).min(axis=1).max()))
    dist, _ = cKDTree(q).query(p)
    return float(dist.max())


def hausdorff_distance(p: np.ndarray, q: np.ndarray) -> float:
    """Symmetric Hausdorff distance between two finite point sets.

    Brute force for small inputs, k-d tree nearest neighbours above that;
    both are exact.
    """
    return max(directed_hausdorff(p, q), directed_hausdorff(q, p))


def _refine(bounds: np.ndarray, queries: np.ndarray, unseen: float,
            nn: Callable[[np.ndarray], np.ndarray]) -> tuple[float, bool]:
    """Max over queries of the exact nn distance, given per-query upper bounds.

    Returns ``(value, complete)``; ``complete`` is False when unseen queries
    (with bounds up to ``unseen``) could still exceed the value.
    """
    order = np.argsort(-bounds, kind="stable")
    best, pos, batch = 0.0, 0, 1
    while pos < len(order):
        if bounds[order[pos]] <= best:
            return best, True
        sel = order[pos:pos + batch]
        best = max(best, float(nn(queries[sel]).max()))
        pos += batch
        batch = min(2 * batch, 4096)
    return best, unseen <= best


def _top_k(values: np.ndarray, k: int) -> tuple[np.ndarray, float]:
    if len(values) <= k:
        return np.arange(len(values)), -np.inf
    part = np.argpartition(values, len(values) - k - 1)
    return part[len(values) - k:], float(values[part[len(values) - k - 1]])


def _structured_invariance(system: GDIFS, approx: AttractorApprox, v: int,
                           k0: int = 512) -> float:
    """Exact Hausdorff distance between ``P_v`` and ``Q_v = ∪_e S_e(P_{t(e)})``.

    Each image point ``S_e(P_k)[j]`` has a parent in ``P_v`` (drop the last
    symbol of its address); parent/child distances bound the nearest-neighbour
    distances from above, so only the few points with the largest bounds
    need an exact search.
    """
    p_all = approx.points[v]
    t_all = approx.terminal[v]
    chunks = []
    for e in system.out_index[v]:
        a, b = approx.slices[v][system.edges[e].id]
        chunks.append((e, a, b))
    q_total = sum(len(approx.points[system.targets[e]]) for e, _, _ in chunks)
    keep_q = q_total <= 4_000_000

    def image(e):
        return system.apply(e, approx.points[system.targets[e]])

    k = k0
    while True:
        p_bound = np.empty(len(p_all))
        q_vals, q_pts, q_unseen, kept = [], [], -np.inf, []
        for e, a, b in chunks:
            qe = image(e)
            counts = system.outdeg[t_all[a:b]]
            if counts.sum() != len(qe):
                raise GDIFSError("approximation does not match the system's cylinder structure")
            parent = np.repeat(np.arange(a, b), counts)
            dist = np.sqrt(_sqdist(qe, p_all[parent]))
            starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
            p_bound[a:b] = np.minimum.reduceat(dist, starts)
            idx, rest = _top_k(dist, k)
            q_vals.append(dist[idx])
            q_pts.append(qe[idx])
            q_unseen = max(q_unseen, rest)
            if keep_q:
                kept.append(qe)
        q_vals = np.concatenate(q_vals)
        q_pts = np.concatenate(q_pts)
        q_to_p, ok1 = _refine(q_vals, q_pts, q_unseen, lambda x: _nn_dist(x, p_all))

        q_full = np.concatenate(kept) if keep_q else None

        def nn_q(x):
            if q_full is not None:
                return _nn_dist(x, q_full)
            return np.min([_nn_dist(x, image(e)) for e, _, _ in chunks], axis=0)

        idx, rest = _top_k(p_bound, k)
        p_to_q, ok2 = _refine(p_bound[idx], p_all[idx], rest, nn_q)
        if ok1 and ok2:
            return max(q_to_p, p_to_q)
        k *= 16


@dataclass(frozen=True)
class InvarianceReport:
    distances: list[float]
    tolerance: float
    error_bound: float
    depth: int

    @property
    def passed(self) -> bool:
        return all(dist <= self.tolerance for dist in self.distances)

    def to_dict(self) -> dict:
        return {"distances": self.distances, "tolerance": self.tolerance,
                "error_bound": self.error_bound, "depth": self.depth, "passed": self.passed}


def verify_invariance(system: GDIFS, approx: AttractorApprox,
                      tol: float | None = None) -> InvarianceReport:
    """Per-vertex Hausdorff distance between ``P_i`` and ``∪_{e: i->k} S_e(P_k)``.

    ``tol`` defaults to ``2 * error_bound``, which deterministic clouds are
    guaranteed to meet.
    """
    if tol is None:
        tol = 2.0 * approx.error_bound
    distances = []
    for v in range(system.n):
        if approx.structured:
            distances.append(_structured_invariance(system, approx, v))
        else:
            image = np.concatenate([system.apply(e, approx.points[system.targets[e]])
                                    for e in system.out_index[v]])
            distances.append(hausdorff_distance(approx.points[v], image))
    return InvarianceReport(distances, float(tol), approx.error_bound, approx.depth)
