import numpy as np
import pytest

from gdifs import corpus
from gdifs.attractor import compute_attractor
from gdifs.errors import GDIFSError, SeparationError
from gdifs.maps import ContractionMap
from gdifs.separation import (OpenSetTuple, anchor_points, check_osc, check_ssc, cylinder_gap,
                              interior_overlap, require_ssc)
from gdifs.system import GDIFS

from conftest import cached_approx


def _brute_gap(a, b):
    return float(np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(-1)).min())


@pytest.mark.parametrize("ratio,gap", [(1 / 3, 1 / 3), (1 / 4, 1 / 2)])
def test_cantor_gap_examples(ratio, gap):
    s = corpus.cantor(ratio)
    a = compute_attractor(s, 8)
    rep = cylinder_gap(s, a)
    brute = _brute_gap(a.cylinder_cloud(1, 1), a.cylinder_cloud(1, 2))
    assert rep.global_gap == pytest.approx(brute, abs=1e-15)
    assert abs(rep.per_vertex_gaps[1] - gap) <= 2 * a.error_bound
    assert rep.per_vertex_lower[1] <= gap <= rep.per_vertex_upper[1]


def test_square_gap_is_zero():
    s = corpus.square_tiling()
    rep = cylinder_gap(s, cached_approx("square", 6))
    assert rep.per_vertex_upper[1] < 1e-6 and rep.global_lower == 0.0


def test_anchor_points_lie_on_attractor():
    s = corpus.fibonacci_graph()
    a = compute_attractor(s, 10)
    for v, pts in enumerate(anchor_points(s)):
        d = np.abs(a.points[v][:, None, 0] - pts[None, :, 0]).min(axis=0)
        assert np.all(d <= a.error_bound + 1e-12)


@pytest.mark.parametrize("name", ["cantor3", "cantor4", "fibonacci", "two-vertex", "square",
                                  "half-interval", "cantor-dust"])
def test_global_gap_below_vertex_gaps(name):
    s = corpus.ALL_SYSTEMS[name]()
    rep = cylinder_gap(s, cached_approx(name, 6))
    assert rep.global_gap <= min(rep.per_vertex_gaps.values())
    assert rep.global_lower <= rep.min_vertex_lower
    for v in s.graph.vertices:
        assert rep.per_vertex_lower[v] <= rep.per_vertex_upper[v]


def test_ssc_examples():
    c = corpus.cantor()
    rep = check_ssc(c, compute_attractor(c, 8))
    assert rep.verdict == "certified"
    assert rep.global_lower <= 1 / 3 <= rep.global_upper
    assert rep.global_upper - rep.global_lower <= 2 * 3.0**-8
    assert check_ssc(corpus.square_tiling(), cached_approx("square", 6)).verdict == "refuted"
    h = corpus.half_interval()
    assert check_ssc(h, compute_attractor(h, 8)).verdict == "refuted"
    with pytest.raises(SeparationError, match="refuted"):
        require_ssc(h, compute_attractor(h, 8))


def test_inconclusive_when_gap_within_error():
    # gap 1e-3 is hidden at depth 3 (error 0.5^3 * 0.5) but resolved deeper
    s = GDIFS.from_edges(1, [(1, 1, ContractionMap.similarity(0.4995, [0.0])), (1, 1, ContractionMap.similarity(0.4995, [0.5005]))])
    rep = check_ssc(s, compute_attractor(s, 3), tol=1e-6)
    assert rep.verdict == "inconclusive"
    assert check_ssc(s, compute_attractor(s, 14), tol=1e-6).verdict == "certified"


@pytest.mark.parametrize("name", ["cantor3", "cantor4", "fibonacci", "square", "half-interval",
                                  "sierpinski", "cantor-dust", "two-vertex"])
def test_bracket_soundness(name):
    s = corpus.ALL_SYSTEMS[name]()
    shallow = check_ssc(s, cached_approx(name, 5)).verdict
    deep = check_ssc(s, cached_approx(name, 7)).verdict
    if shallow in ("certified", "refuted"):
        assert deep == shallow


def test_ssc_report_serializes():
    c = corpus.cantor()
    d = check_ssc(c, compute_attractor(c, 6)).to_dict()
    assert {"per_vertex_gaps", "global_gap", "verdict", "depth", "error_bound", "tolerance"} <= set(d)


def test_osc_examples():
    sq = corpus.square_tiling()
    assert check_osc(sq, OpenSetTuple.uniform(sq, [0, 0], [1, 1]), 2.0**-6).consistent
    c = corpus.cantor()
    assert check_osc(c, OpenSetTuple.uniform(c, [0], [1]), 2.0**-10).consistent
    o = corpus.overlapping_interval()
    rep = check_osc(o, OpenSetTuple.uniform(o, [0], [1]), 2.0**-8)
    assert rep.verdict == "violated" and rep.witness["kind"] == "overlap"
    # interval-arithmetic oracle: the two images overlap exactly on (1/4, 1/2)
    assert 0.25 < rep.witness["centre"][0] < 0.5
    bad = OpenSetTuple.uniform(c, [0.1], [0.9])
    assert check_osc(c, bad, 2.0**-8).witness["kind"] == "containment"
    with pytest.raises(GDIFSError):
        check_osc(c, OpenSetTuple.uniform(c, [0], [1]), 2.0**-21)
    with pytest.raises(GDIFSError):
        OpenSetTuple({1: [([0.5], [0.5])]})


def test_overlap_examples():
    sq = corpus.square_tiling()
    a = cached_approx("square", 7)
    for delta in (2.0**-4, 2.0**-5, 2.0**-6):
        for e, f in [(1, 2), (1, 4), (2, 3)]:
            assert interior_overlap(sq, a, e, f, delta).area == 0.0
    o = corpus.overlapping_square()
    b = cached_approx("overlapping-square", 7)
    # exact rectangle intersection of the depth-1 images: [1/4, 1/2]^2, area 1/16
    for delta in (2.0**-5, 2.0**-6, 2.0**-7):
        r = interior_overlap(o, b, 1, 5, delta)
        assert 1 / 32 <= r.area <= 1 / 16 and not r.degenerate
        assert r.perimeter_estimate == pytest.approx(1.0)
    r = interior_overlap(sq, a, 1, 2, 4.0)
    assert r.degenerate and r.area <= 16.0
    with pytest.raises(GDIFSError):
        interior_overlap(sq, a, 1, 1, 0.1)
    c = corpus.cantor()
    with pytest.raises(GDIFSError):
        interior_overlap(c, compute_attractor(c, 4), 1, 2, 0.1)


@pytest.mark.parametrize("name", ["square", "sierpinski"])
def test_overlap_trend(name):
    s = corpus.ALL_SYSTEMS[name]()
    a = cached_approx(name, 8)
    out_ids = [e.id for e in s.graph.out_edges[1]]
    for i, e in enumerate(out_ids):
        for f in out_ids[i + 1:]:
            areas = [interior_overlap(s, a, e, f, 2.0**-k) for k in (4, 5, 6, 7)]
            assert all(x.area >= y.area for x, y in zip(areas, areas[1:]))
            assert areas[-1].area <= 4 * 2.0**-7 * areas[-1].perimeter_estimate
