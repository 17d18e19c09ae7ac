import numpy as np
import pytest

from gdifs import corpus
from gdifs.attractor import (chaos_game, compute_attractor, cylinder_boxes, cylinder_set,
                             directed_hausdorff, hausdorff_distance, invariant_bounding_boxes,
                             iter_cylinder_blocks, max_cylinder_diameter, verify_invariance)
from gdifs.errors import BudgetExceededError, ConvergenceError, GDIFSError, InvalidGraphError
from gdifs.graph import enumerate_terminal_paths
from gdifs.maps import ContractionMap
from gdifs.system import GDIFS

sim = ContractionMap.similarity


def _interval_oracle(system, iters=200):
    # independent per-vertex interval iteration for 1-D similarity systems with positive ratios
    lo = np.zeros(system.n)
    hi = np.ones(system.n)
    for _ in range(iters):
        nlo, nhi = np.full(system.n, np.inf), np.full(system.n, -np.inf)
        for e in system.edges:
            m = system.maps[e.id]
            a = m.ratio * lo[e.target - 1] + m.translation[0]
            b = m.ratio * hi[e.target - 1] + m.translation[0]
            nlo[e.source - 1] = min(nlo[e.source - 1], a)
            nhi[e.source - 1] = max(nhi[e.source - 1], b)
        lo, hi = nlo, nhi
    return lo, hi


def test_boxes_examples():
    b = invariant_bounding_boxes(corpus.cantor())
    assert np.allclose(b[0], [[0.0], [1.0]], atol=1e-9)
    single = GDIFS.from_edges(1, [(1, 1, sim(0.5, [1.0]))])
    assert np.allclose(invariant_bounding_boxes(single)[0], [[2.0], [2.0]], atol=1e-9)
    assert np.allclose(invariant_bounding_boxes(corpus.square_tiling())[0], [[0, 0], [1, 1]], atol=1e-9)
    fib = corpus.fibonacci_graph()
    lo, hi = _interval_oracle(fib)
    b = invariant_bounding_boxes(fib)
    assert np.allclose(b[:, 0, 0], lo, atol=1e-9) and np.allclose(b[:, 1, 0], hi, atol=1e-9)


@pytest.mark.parametrize("name", sorted(corpus.ALL_SYSTEMS))
def test_boxes_are_invariant(name):
    s = corpus.ALL_SYSTEMS[name]()
    b = invariant_bounding_boxes(s)
    for e in s.edges:
        k, i = e.target - 1, e.source - 1
        corners = np.array(np.meshgrid(*[b[k, :, j] for j in range(s.dim)], indexing="ij")).reshape(s.dim, -1).T
        img = s.maps[e.id](corners)
        assert np.all(img >= b[i, 0] - 1e-9) and np.all(img <= b[i, 1] + 1e-9)


def test_box_iteration_rejects_divergence():
    rot = ContractionMap.similarity(0.95, [1.0, 0.0], rotation=np.pi / 4)
    with pytest.raises(ConvergenceError):
        invariant_bounding_boxes(GDIFS.from_edges(1, [(1, 1, rot)]), max_iter=50)


def test_cantor_cloud():
    a = compute_attractor(corpus.cantor(), 8)
    pts = a.cloud(1)
    assert len(pts) == 256 and pts.min() >= 0 and pts.max() <= 1
    assert a.error_bound == pytest.approx(3.0**-8, rel=1e-9)
    # enumeration oracle: centres of the level-8 construction intervals
    digits = np.array(np.meshgrid(*[[0, 2]] * 8, indexing="ij")).reshape(8, -1).T
    left = (digits * 3.0 ** -np.arange(1, 9)).sum(axis=1)
    assert np.allclose(np.sort(pts[:, 0]), np.sort(left + 0.5 * 3.0**-8), atol=1e-14)


def test_fibonacci_cloud_size_and_single_map():
    a = compute_attractor(corpus.fibonacci_graph(), 6)
    assert len(a.cloud(1)) == 21 and len(a.cloud(2)) == 13
    single = GDIFS.from_edges(1, [(1, 1, sim(0.5, [1.0]))])
    a = compute_attractor(single, 5)
    assert np.allclose(a.cloud(1), [[2.0]], atol=1e-9)


def test_budget():
    with pytest.raises(BudgetExceededError, match="chaos_game"):
        compute_attractor(corpus.sierpinski_carpet(), 8)
    with pytest.raises(GDIFSError):
        compute_attractor(corpus.cantor(), 0)


def test_cloud_order_matches_path_enumeration():
    s = corpus.fibonacci_graph()
    a = compute_attractor(s, 5)
    seeds = 0.5 * (a.boxes[:, 0] + a.boxes[:, 1])
    for v in s.graph.vertices:
        paths = enumerate_terminal_paths(s.graph, v, 5)
        direct = np.array([s.compose(p)(seeds[p.terminal - 1]) for p in paths])
        assert np.allclose(direct, a.cloud(v), atol=1e-15)
        blocks = np.concatenate([np.einsum("nij,nj->ni", L, seeds[k]) + t
                                 for L, t, k in iter_cylinder_blocks(s, v, 5, block=4)])
        assert np.allclose(blocks, a.cloud(v), atol=1e-15)
        for e in s.graph.out_edges[v]:
            lo, hi = a.slices[v - 1][e.id]
            assert all(p.ids[0] == e.id for p in paths[lo:hi])


def test_chaos_game():
    s = corpus.cantor()
    a = chaos_game(s, 10**4, seed=11)
    b = chaos_game(s, 10**4, seed=11)
    assert all(np.array_equal(x, y) for x, y in zip(a.points, b.points))
    assert a.error_bound < 1e-40
    ref = compute_attractor(s, 10)
    assert directed_hausdorff(a.cloud(1), ref.cloud(1)) <= 3.0**-8
    single = GDIFS.from_edges(1, [(1, 1, sim(0.5, [1.0]))])
    assert np.allclose(chaos_game(single, 50, seed=0).cloud(1), 2.0)
    fib = chaos_game(corpus.fibonacci_graph(), 5000, seed=2)
    assert len(fib.cloud(1)) > 0 and len(fib.cloud(2)) > 0
    with pytest.raises(InvalidGraphError):
        chaos_game(GDIFS.from_edges(2, [(1, 1, sim(0.5, [0.0])), (2, 1, sim(0.5, [0.5]))]), 10, seed=0)


def test_hausdorff_examples():
    p = np.random.default_rng(0).random((50, 2))
    assert hausdorff_distance(p, p) == 0.0
    assert hausdorff_distance(np.array([[0.0]]), np.array([[1.0]])) == 1.0
    full = np.linspace(0, 1, 1000)[:, None]
    union = full[(full[:, 0] <= 1 / 3) | (full[:, 0] >= 2 / 3)]
    assert hausdorff_distance(union, full) == pytest.approx(1 / 6, abs=1e-3)
    with pytest.raises(GDIFSError):
        hausdorff_distance(np.empty((0, 1)), p[:, :1])


def test_hausdorff_tree_path_matches_brute_force():
    rng = np.random.default_rng(5)
    p, q = rng.random((3000, 2)), rng.random((2500, 2))
    brute = max(np.sqrt(((p[:, None] - q[None]) ** 2).sum(-1)).min(axis=1).max(),
                np.sqrt(((q[:, None] - p[None]) ** 2).sum(-1)).min(axis=1).max())
    assert hausdorff_distance(p, q) == pytest.approx(brute, rel=1e-12)


@pytest.mark.parametrize("name", sorted(corpus.INVARIANCE_CORPUS))
@pytest.mark.parametrize("depth", [4, 6])
def test_self_consistency(name, depth):
    s = corpus.ALL_SYSTEMS[name]()
    a = compute_attractor(s, depth)
    rep = verify_invariance(s, a)
    assert rep.passed and max(rep.distances) <= 2 * a.error_bound


@pytest.mark.parametrize("name", ["fibonacci", "square", "sierpinski", "two-vertex", "cantor3"])
def test_structured_invariance_matches_generic(name):
    # two independent routes to the same Hausdorff distance
    s = corpus.ALL_SYSTEMS[name]()
    a = compute_attractor(s, 5)
    rep = verify_invariance(s, a)
    for v in range(s.n):
        image = np.concatenate([s.apply(e, a.points[s.targets[e]]) for e in s.out_index[v]])
        assert rep.distances[v] == pytest.approx(hausdorff_distance(a.points[v], image), rel=1e-9, abs=1e-15)


def test_invariance_examples():
    s = corpus.cantor()
    a = compute_attractor(s, 8)
    assert verify_invariance(s, a, tol=2 * 3.0**-8).passed
    sq = corpus.square_tiling()
    b = compute_attractor(sq, 5)
    assert verify_invariance(sq, b, tol=2 * 0.5**5 * np.sqrt(2)).passed
    a.points[0][17] = 1.5
    rep = verify_invariance(s, a)
    assert not rep.passed and rep.distances[0] >= 0.1


@pytest.mark.parametrize("name", ["cantor3", "fibonacci", "square", "sierpinski"])
def test_monotone_refinement(name):
    s = corpus.ALL_SYSTEMS[name]()
    for n in (4, 6):
        a, b = compute_attractor(s, n), compute_attractor(s, n + 1)
        for v in s.graph.vertices:
            assert directed_hausdorff(b.cloud(v), a.cloud(v)) <= a.error_bound


@pytest.mark.parametrize("name", ["fibonacci", "sierpinski", "two-vertex"])
def test_nested_cylinders(name):
    s = corpus.ALL_SYSTEMS[name]()
    boxes = invariant_bounding_boxes(s)
    for v in s.graph.vertices:
        for p in enumerate_terminal_paths(s.graph, v, 3):
            outer = cylinder_set(s, p, boxes).bbox
            for e in s.graph.out_edges[p.terminal]:
                inner = cylinder_set(s, p + type(p)((e,)), boxes).bbox
                assert np.all(inner[0] >= outer[0] - 1e-9) and np.all(inner[1] <= outer[1] + 1e-9)
            c = cylinder_set(s, p, boxes)
            k = p.terminal - 1
            assert np.linalg.norm(c.bbox[1] - c.bbox[0]) <= c.composed.upper * np.sqrt(s.dim) * np.linalg.norm(boxes[k, 1] - boxes[k, 0]) + 2e-9


def test_cylinder_boxes_match_cylinder_sets():
    s = corpus.fibonacci_graph()
    boxes = invariant_bounding_boxes(s)
    lo, hi = cylinder_boxes(s, 1, 4, boxes)
    direct = np.array([cylinder_set(s, p, boxes).bbox for p in enumerate_terminal_paths(s.graph, 1, 4)])
    assert np.allclose(lo, direct[:, 0]) and np.allclose(hi, direct[:, 1])
    assert max_cylinder_diameter(s, 4, boxes) <= 3.0**-4 * 0.875 + 1e-12
