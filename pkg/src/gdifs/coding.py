"""Symbolic addresses of attractor points and the coding map between two systems.

Under strong separation every point of ``A_i`` has a unique infinite address.
:func:`address_of` reads off a finite prefix by repeatedly choosing the
nearest depth-1 cylinder and pulling the point back through that map;
:func:`point_of` goes the other way. The conjugacy ``Phi`` sends a point of
the source attractor to the target point with the same address.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .attractor import AttractorApprox, box_diameters, cloud_diameter, compute_attractor, iter_cylinder_blocks
from .distortion import bdp_profile
from .errors import AmbiguousAddressError, GDIFSError, HypothesisError, InvalidGraphError
from .graph import Path, count_paths, edges_from_ids
from .separation import SeparationReport, require_ssc
from .system import GDIFS

MATCH_TOL = 1e-12
DEFAULT_DEPTH = 8


@dataclass(frozen=True)
class Address:
    """Finite prefix of an infinite admissible path starting at ``vertex``."""

    path: Path
    vertex: int

    def __post_init__(self):
        if self.path.initial != self.vertex:
            raise InvalidGraphError(
                f"address starts at vertex {self.path.initial}, expected {self.vertex}"
            )

    @property
    def depth(self) -> int:
        return len(self.path)

    @property
    def ids(self) -> tuple[int, ...]:
        return self.path.ids

    @property
    def terminal(self) -> int:
        return self.path.terminal


@dataclass(eq=False)
class Coder:
    """Address machinery for one SSC-certified system.

    Build it with :func:`make_coder`; it keeps the cylinder clouds used to
    pick addresses and the per-vertex gap used by the ambiguity guard.
    """

    system: GDIFS
    approx: AttractorApprox
    separation: SeparationReport
    diameter: float  # upper bound on diam of the union of all A_i

    @property
    def seeds(self) -> np.ndarray:
        return 0.5 * (self.approx.boxes[:, 0] + self.approx.boxes[:, 1])

    def guard(self, vertex: int) -> float:
        return self.separation.per_vertex_lower[vertex] / 4.0

    def convergence_bound(self, depth: int) -> float:
        """``r^m * max diam(Box_k)``: distance from ``point_of`` to the true limit point."""
        return self.system.max_ratio ** depth * float(box_diameters(self.approx.boxes).max())


def make_coder(system: GDIFS, depth: int = DEFAULT_DEPTH, tol: float = 1e-6,
               budget: int = 10**6) -> Coder:
    """Approximate the attractor and require certified strong separation."""
    approx = compute_attractor(system, depth, budget=budget)
    report = require_ssc(system, approx, tol)
    diam = cloud_diameter(approx.union) + 2.0 * approx.error_bound
    return Coder(system, approx, report, diam)


def _coder(obj) -> Coder:
    if isinstance(obj, Coder):
        return obj
    if isinstance(obj, ConjugacyMap):
        return obj.source
    if isinstance(obj, GDIFS):
        return make_coder(obj)
    raise TypeError(f"expected a Coder, ConjugacyMap or GDIFS, got {type(obj).__name__}")


def address_ids_batch(coder: Coder, x: np.ndarray, vertex: int, depth: int) -> np.ndarray:
    """Edge ids of the depth-``depth`` addresses of many points of ``A_vertex``.

    Returns an integer array of shape ``(len(x), depth)``. A point is
    ambiguous when its second-nearest cylinder is at most ``D1 / 4`` farther
    away than its nearest; :class:`AmbiguousAddressError` names the first one.
    """
    system, approx = coder.system, coder.approx
    y = np.array(np.atleast_2d(np.asarray(x, dtype=float)), dtype=float)
    if y.shape[1] != system.dim:
        y = y.reshape(-1, system.dim)
    current = np.full(len(y), vertex - 1, dtype=np.int64)
    out = np.empty((len(y), depth), dtype=np.int64)
    for level in range(depth):
        before = current.copy()
        for v in np.unique(before):
            sel = np.flatnonzero(before == v)
            edges = system.out_index[v]
            if len(edges) == 1:
                choice = np.zeros(len(sel), dtype=np.int64)
            else:
                dist = np.stack([
                    approx.cylinder_tree(v + 1, system.edges[e].id).query(y[sel])[0]
                    for e in edges
                ], axis=1)
                order = np.argsort(dist, axis=1, kind="stable")
                choice = order[:, 0]
                rows = np.arange(len(sel))
                margin = dist[rows, order[:, 1]] - dist[rows, choice]
                bad = np.flatnonzero(margin <= coder.guard(v + 1))
                if bad.size:
                    j = sel[bad[0]]
                    raise AmbiguousAddressError(
                        f"point {np.asarray(x).reshape(-1, system.dim)[j].tolist()} is no more than "
                        f"D1/4 = {coder.guard(v + 1):.3g} closer to one cylinder than to another "
                        f"at level {level + 1}"
                    )
            chosen = edges[choice]
            out[sel, level] = [system.edges[e].id for e in chosen]
            lin = system.linear[chosen]
            rhs = y[sel] - system.translation[chosen]
            y[sel] = np.linalg.solve(lin, rhs[..., None])[..., 0]
            current[sel] = system.targets[chosen]
    return out


def address_of(obj, x, vertex: int, depth: int) -> Address:
    """Depth-``depth`` address of a point ``x`` of ``A_vertex``.

    ``obj`` is a :class:`Coder`, a :class:`ConjugacyMap` (its source side)
    or a :class:`GDIFS` (a coder is built on the fly).
    """
    coder = _coder(obj)
    ids = address_ids_batch(coder, np.atleast_1d(np.asarray(x, dtype=float)), vertex, depth)[0]
    return Address(edges_from_ids(coder.system.graph, ids.tolist()), vertex)


def _compose_ids(system: GDIFS, ids: np.ndarray):
    """Linear parts, translations and terminal vertices of many equal-length paths."""
    idx = np.vectorize(system.edge_index.__getitem__, otypes=[np.int64])(ids)
    lin = system.linear[idx[:, 0]].copy()
    trans = system.translation[idx[:, 0]].copy()
    for col in range(1, ids.shape[1]):
        e = idx[:, col]
        trans = np.einsum("nij,nj->ni", lin, system.translation[e]) + trans
        lin = lin @ system.linear[e]
    return lin, trans, system.targets[idx[:, -1]]


def points_of_batch(system: GDIFS, ids: np.ndarray, seeds: np.ndarray) -> np.ndarray:
    """``S_w(seed of terminal vertex)`` for each row of edge ids ``w``."""
    lin, trans, term = _compose_ids(system, np.atleast_2d(ids))
    return np.einsum("nij,nj->ni", lin, seeds[term]) + trans


def point_of(obj, address: Address) -> np.ndarray:
    """``S_{e_1} o ... o S_{e_m}`` applied to the seed of the terminal vertex."""
    if isinstance(obj, GDIFS):
        from .attractor import invariant_bounding_boxes
        boxes = invariant_bounding_boxes(obj)
        system, seeds = obj, 0.5 * (boxes[:, 0] + boxes[:, 1])
    else:
        coder = _coder(obj)
        system, seeds = coder.system, coder.seeds
    comp = system.compose(address.path)
    return comp(seeds[address.terminal - 1])


@dataclass(frozen=True)
class RoundTrip:
    residual: float
    bound: float
    address: Address

    @property
    def ok(self) -> bool:
        return self.residual <= self.bound


def round_trip(obj, x, vertex: int, depth: int) -> RoundTrip:
    """``|point_of(address_of(x)) - x|`` against ``r^m diam + 2 error_bound``."""
    coder = _coder(obj)
    addr = address_of(coder, x, vertex, depth)
    y = point_of(coder, addr)
    residual = float(np.linalg.norm(y - np.atleast_1d(np.asarray(x, dtype=float))))
    bound = coder.convergence_bound(depth) + 2.0 * coder.approx.error_bound
    return RoundTrip(residual, bound, addr)


# -- conjugacy ----------------------------------------------------------------

@dataclass(eq=False)
class ConjugacyMap:
    """Coding map ``Phi: A_i -> B_i`` between two systems on one graph.

    ``regime`` is ``"dominated"`` (target contracts at least as strongly as the
    source on every edge) or ``"matched"`` (matched Lipschitz constants on all
    audited paths and bounded source distortion with constant ``K``).
    """

    source: Coder
    target: Coder
    depth: int
    regime: str
    K: float
    source_gap: float  # certified lower bracket of the source's global D1
    target_gap: float  # certified lower bracket of the target's global D2
    upper_bound: float
    lower_bound: float | None
    hypothesis: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "regime": self.regime, "K": self.K, "depth": self.depth,
            "source_gap": self.source_gap, "target_gap": self.target_gap,
            "source_diameter": self.source.diameter, "target_diameter": self.target.diameter,
            "upper_bound": self.upper_bound, "lower_bound": self.lower_bound,
            "hypothesis": self.hypothesis,
        }


def _matched_paths(source: GDIFS, target: GDIFS, audit_depth: int,
                   budget: int = 10**5) -> tuple[int | None, int]:
    """First depth at which composed Lipschitz constants differ (or None), and depth audited."""
    audited = 0
    for p in range(1, audit_depth + 1):
        if int(count_paths(source.graph, p).sum()) > budget:
            break
        for v in source.graph.vertices:
            blocks = zip(iter_cylinder_blocks(source, v, p), iter_cylinder_blocks(target, v, p))
            for (ls, _, _), (lt, _, _) in blocks:
                ss = np.linalg.svd(ls, compute_uv=False)
                st = np.linalg.svd(lt, compute_uv=False)
                bad = (np.abs(ss[:, 0] - st[:, 0]) > MATCH_TOL) | (np.abs(ss[:, -1] - st[:, -1]) > MATCH_TOL)
                if bad.any():
                    return p, audited
        audited = p
    return None, audited


def build_phi(source: GDIFS, target: GDIFS, depth: int = DEFAULT_DEPTH, tol: float = 1e-6,
              audit_depth: int = 8, budget: int = 10**6) -> ConjugacyMap:
    """Check the hypotheses and set up ``Phi`` with its certified Lipschitz bounds.

    Upper bound ``K * max diam(B) / D1``; in the matched regime also the
    lower bound ``D2 / (K * max diam(A))``. Gaps are certified lower
    brackets and diameters certified upper bounds, so both are conservative.
    """
    if not source.same_graph(target):
        raise InvalidGraphError("source and target systems must share the same graph")
    src = make_coder(source, depth, tol, budget)
    tgt = make_coder(target, depth, tol, budget)
    hyp: dict = {}
    edge_match = all(
        abs(source.maps[e.id].lower - target.maps[e.id].lower) <= MATCH_TOL
        and abs(source.maps[e.id].upper - target.maps[e.id].upper) <= MATCH_TOL
        for e in source.edges
    )
    regime = None
    K = 1.0
    if edge_match:
        first_bad, audited = _matched_paths(source, target, audit_depth)
        hyp["matched_edges"] = True
        hyp["matched_paths_audited_to"] = audited
        hyp["first_mismatched_depth"] = first_bad
        if first_bad is None:
            bdp = bdp_profile(source, max(audited, 2), allow_sampling=True)
            hyp["source_distortion"] = bdp.verdict
            if bdp.bounded:
                regime, K = "matched", float(bdp.K)
    if regime is None:
        failed = [
            f"edge {e.id}: target upper {target.maps[e.id].upper:.6g} > source lower {source.maps[e.id].lower:.6g}"
            for e in source.edges if target.maps[e.id].upper > source.maps[e.id].lower
        ]
        hyp["contraction_dominated"] = not failed
        if failed:
            reasons = []
            if not edge_match:
                reasons.append("Lipschitz constants are not matched edge by edge")
            elif hyp.get("first_mismatched_depth") is not None:
                reasons.append(f"composed constants differ at depth {hyp['first_mismatched_depth']}")
            elif hyp.get("source_distortion") == "unbounded":
                reasons.append("source distortion is unbounded")
            raise HypothesisError("neither hypothesis holds: " + "; ".join(reasons + failed))
        regime = "dominated"
    d1 = src.separation.global_lower
    d2 = tgt.separation.global_lower
    upper = K * tgt.diameter / d1
    lower = d2 / (K * src.diameter) if regime == "matched" else None
    return ConjugacyMap(src, tgt, depth, regime, K, d1, d2, upper, lower, hyp)


def apply_phi_batch(conj: ConjugacyMap, x: np.ndarray, vertex: int, depth: int | None = None) -> np.ndarray:
    depth = conj.depth if depth is None else depth
    ids = address_ids_batch(conj.source, x, vertex, depth)
    return points_of_batch(conj.target.system, ids, conj.target.seeds)


def apply_phi(conj: ConjugacyMap, x, vertex: int, depth: int | None = None) -> np.ndarray:
    """``Phi(x)``: the target point with the depth-``depth`` address of ``x``."""
    return apply_phi_batch(conj, np.atleast_1d(np.asarray(x, dtype=float)), vertex, depth)[0]


@dataclass(frozen=True)
class LipschitzAudit:
    min_ratio: float
    max_ratio: float
    histogram: list[int]
    bin_edges: list[float]
    n_pairs: int
    seed: int | None
    mode: str
    regime: str
    upper_bound: float
    lower_bound: float | None
    rel_tol: float = 1e-2

    @property
    def passed(self) -> bool:
        ok = self.max_ratio <= self.upper_bound * (1 + self.rel_tol)
        if self.lower_bound is not None:
            ok = ok and self.min_ratio >= self.lower_bound * (1 - self.rel_tol)
        return ok

    def to_dict(self) -> dict:
        return {"min_ratio": self.min_ratio, "max_ratio": self.max_ratio,
                "histogram": self.histogram, "bin_edges": self.bin_edges,
                "n_pairs": self.n_pairs, "seed": self.seed, "mode": self.mode,
                "regime": self.regime, "upper_bound": self.upper_bound,
                "lower_bound": self.lower_bound, "passed": self.passed}


def _ratios(conj: ConjugacyMap, v: int, ia: np.ndarray, ib: np.ndarray,
            images: dict[int, np.ndarray]) -> np.ndarray:
    pts = conj.source.approx.points[v]
    if v not in images:
        images[v] = apply_phi_batch(conj, pts, v + 1)
    num = np.linalg.norm(images[v][ia] - images[v][ib], axis=1)
    den = np.linalg.norm(pts[ia] - pts[ib], axis=1)
    return num / den


def empirical_lipschitz(conj: ConjugacyMap, n_pairs: int = 10**4, seed: int = 0,
                        exhaustive: bool = False, bins: int = 20) -> LipschitzAudit:
    """Ratios ``|Phi(x) - Phi(y)| / |x - y|`` over pairs of source cloud points.

    Sampled mode draws pairs within one vertex cloud and keeps those farther
    apart than ``10 * error_bound``. Exhaustive mode takes every unordered
    pair of distinct cloud points.
    """
    approx = conj.source.approx
    images: dict[int, np.ndarray] = {}
    chunks = []
    if exhaustive:
        for v in range(conj.source.system.n):
            ia, ib = np.triu_indices(len(approx.points[v]), k=1)
            chunks.append(_ratios(conj, v, ia, ib, images))
        used_seed = None
    else:
        if n_pairs < 1:
            raise GDIFSError("n_pairs must be at least 1")
        rng = np.random.default_rng(seed)
        sizes = np.array([len(p) for p in approx.points])
        need, attempts = n_pairs, 0
        while need > 0 and attempts < 100:
            attempts += 1
            vert = rng.integers(0, len(sizes), size=2 * need)
            ia = (rng.random(2 * need) * sizes[vert]).astype(np.int64)
            ib = (rng.random(2 * need) * sizes[vert]).astype(np.int64)
            for v in np.unique(vert):
                sel = vert == v
                a, b = ia[sel], ib[sel]
                far = np.linalg.norm(approx.points[v][a] - approx.points[v][b], axis=1) > 10 * approx.error_bound
                a, b = a[far][:need], b[far][:need]
                if len(a):
                    chunks.append(_ratios(conj, v, a, b, images))
                    need -= len(a)
                if need <= 0:
                    break
        if not chunks:
            raise GDIFSError("every sampled pair was closer than 10 * error_bound")
        used_seed = seed
    ratios = np.concatenate(chunks)
    counts, edges = np.histogram(ratios, bins=bins)
    return LipschitzAudit(float(ratios.min()), float(ratios.max()), counts.tolist(),
                          edges.tolist(), int(len(ratios)), used_seed,
                          "exhaustive" if exhaustive else "sampled", conj.regime,
                          conj.upper_bound, conj.lower_bound)
