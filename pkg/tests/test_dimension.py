import numpy as np
import pytest
from scipy.optimize import brentq

from gdifs import corpus
from gdifs.attractor import compute_attractor
from gdifs.dimension import (BoxCounts, admissible_scales, box_counts, box_dimension,
                             check_vertex_dimension_equality, closure_duplicates,
                             cloud_box_counts, dim_restricted, similarity_dimension)
from gdifs.errors import GDIFSError, InvalidGraphError, MapError
from gdifs.maps import ContractionMap
from gdifs.separation import OpenSetTuple
from gdifs.system import GDIFS

from conftest import cached_approx

LOG2_LOG3 = np.log(2) / np.log(3)
TWO_VERTEX_ROOT = 0.4965173325451845  # frozen root of 1 = 2^-s + 12^-s

# name, depth, grid base for the oracle agreement checks
SSC_SIMILARITY = [("cantor3", 10, 3), ("cantor4", 8, 4), ("fibonacci", 12, 3), ("two-vertex", 25, 2),
                  ("cantor-dust", 7, 4), ("planar-source", 10, 3), ("planar-target", 10, 3)]


def _wide_scales(approx, base):
    return admissible_scales(approx, base=base, count=40, coarsest=1)


def test_count_examples():
    g = (np.arange(64) + 0.5) / 64
    square = np.stack(np.meshgrid(g, g), axis=-1).reshape(-1, 2)
    assert box_counts(square, [1 / 8], origin=[0, 0]).counts.tolist() == [64]
    assert box_counts(np.array([[0.3, 0.7]]), [1.0, 0.1, 1e-6]).counts.tolist() == [1, 1, 1]
    a = compute_attractor(corpus.cantor(), 8)
    assert cloud_box_counts(a, 1, [3.0**-5]).counts.tolist() == [32]
    # brute-force oracle: level-5 construction intervals holding a cloud point
    cells = {int(np.floor(x * 3**5 + 1e-9)) for x in a.cloud(1)[:, 0]}
    assert len(cells) == 32


def test_count_preconditions():
    a = compute_attractor(corpus.cantor(), 8)
    with pytest.raises(GDIFSError, match="floor"):
        cloud_box_counts(a, 1, [3.0**-3, 3.0**-8])
    with pytest.raises(GDIFSError):
        box_counts(np.zeros((3, 1)), [0.1, 0.2])
    with pytest.raises(GDIFSError):
        box_counts(np.zeros((0, 1)), [0.1])


def test_slope_examples():
    a = compute_attractor(corpus.cantor(), 10)
    t = cloud_box_counts(a, 1, 3.0 ** -np.arange(3, 8))
    assert t.counts.tolist() == [8, 16, 32, 64, 128]
    est = box_dimension(t)
    assert abs(est.slope - LOG2_LOG3) <= 0.02 and est.lower <= est.slope <= est.upper
    g = (np.arange(256) + 0.5) / 256
    square = np.stack(np.meshgrid(g, g), axis=-1).reshape(-1, 2)
    assert box_dimension(box_counts(square, 2.0 ** -np.arange(3, 7), origin=[0, 0])).slope == pytest.approx(2, abs=0.02)
    assert box_dimension(box_counts(np.array([[0.5]]), 2.0 ** -np.arange(1, 6))).slope == pytest.approx(0, abs=1e-12)
    with pytest.raises(GDIFSError):
        box_dimension(BoxCounts(np.array([0.5, 0.25, 0.125]), np.array([1, 2, 4])))


def test_similarity_dimension_examples():
    assert similarity_dimension(corpus.cantor()) == pytest.approx(LOG2_LOG3, abs=1e-10)
    single = GDIFS.from_edges(1, [(1, 1, ContractionMap.similarity(0.5, [0.0]))])
    assert similarity_dimension(single) == 0.0
    with pytest.raises(MapError):
        similarity_dimension(corpus.anisotropic_map())


def test_two_vertex_root_against_characteristic_polynomial():
    # det(I - M(s)) = 1 - 2^-s - 12^-s, solved independently of the spectral-radius route
    root = brentq(lambda s: 1 - 2.0**-s - 12.0**-s, 0.0, 1.0, xtol=1e-15)
    assert root == pytest.approx(TWO_VERTEX_ROOT, abs=1e-12)
    assert similarity_dimension(corpus.two_vertex_dimension()) == pytest.approx(root, abs=1e-10)


@pytest.mark.parametrize("name,depth,base", SSC_SIMILARITY)
def test_oracle_agreement(name, depth, base):
    s = corpus.ALL_SYSTEMS[name]()
    a = cached_approx(name, depth, 10**7)
    sdim = similarity_dimension(s)
    for v in s.graph.vertices:
        assert abs(box_dimension(cloud_box_counts(a, v, _wide_scales(a, base))).slope - sdim) <= 0.05


def test_vertex_equality():
    c = corpus.cantor()
    a = compute_attractor(c, 10)
    assert check_vertex_dimension_equality(c, a, _wide_scales(a, 3)).max_difference == 0.0
    s = corpus.two_vertex_dimension()
    a = cached_approx("two-vertex", 25, 10**7)
    rep = check_vertex_dimension_equality(s, a, _wide_scales(a, 2))
    assert rep.passed
    assert all(abs(e.slope - TWO_VERTEX_ROOT) <= 0.05 for e in rep.estimates.values())
    loose = GDIFS.from_edges(2, [(1, 1, ContractionMap.similarity(1 / 3, [0.0])),
                                 (1, 2, ContractionMap.similarity(1 / 3, [2 / 3])),
                                 (2, 2, ContractionMap.similarity(1 / 2, [0.0]))])
    with pytest.raises(InvalidGraphError):
        check_vertex_dimension_equality(loose, compute_attractor(loose, 6), [0.5, 0.25, 0.125, 0.0625])


@pytest.mark.parametrize("name", sorted(corpus.ALL_SYSTEMS))
def test_closure_invariance(name):
    a = cached_approx(name, 6)
    for v in range(1, len(a.points) + 1):
        pts = a.cloud(v)
        origin = a.boxes[v - 1, 0]
        span = float(np.max(a.boxes[v - 1, 1] - a.boxes[v - 1, 0])) or 1.0
        delta = span * 2.0**-8
        dup = closure_duplicates(pts, origin, delta, seed=v)
        scales = delta * 2.0 ** -np.arange(-6, 1)
        base = box_counts(pts, scales, origin=origin)
        both = box_counts(np.concatenate([pts, dup]), scales, origin=origin)
        assert np.array_equal(base.counts, both.counts)


def test_monotonicity():
    a = compute_attractor(corpus.sierpinski_triangle(), 8)
    q = a.cloud(1)
    p = q[np.random.default_rng(0).random(len(q)) < 0.3]
    scales = 2.0 ** -np.arange(1, 7)
    np_, nq = box_counts(p, scales, origin=a.boxes[0, 0]), box_counts(q, scales, origin=a.boxes[0, 0])
    assert np.all(np_.counts <= nq.counts)
    assert box_dimension(np_).slope <= box_dimension(nq).slope + box_dimension(nq).residual + 1e-12


FILLED_SQUARE_BIAS = pytest.mark.xfail(
    strict=True,
    reason="sheared image of a filled square: perimeter cells bias the slope to about 1.92 "
           "over 2^-3..2^-7 at depth 10 (1.94 at depth 11), beyond the 0.05 tolerance")


@pytest.mark.parametrize("name,depth,base", SSC_SIMILARITY + [
    pytest.param("square", 10, 2, marks=FILLED_SQUARE_BIAS), ("sierpinski", 10, 2)])
def test_bilipschitz_proxy(name, depth, base):
    a = cached_approx(name, depth, 10**7)
    d = a.points[0].shape[1]
    m = np.array([[1.3, 0.4], [-0.2, 0.9]]) if d == 2 else np.array([[1.7]])
    # the image cloud is accurate to |m| * error_bound, so its floor is stretched too
    floor = 4 * a.error_bound * float(np.linalg.norm(m, 2))
    k_max = int(np.floor(-np.log(floor) / np.log(base)))
    scales = float(base) ** -np.arange(max(1, k_max - 4), k_max + 1)
    for v in range(1, len(a.points) + 1):
        pts = a.cloud(v)
        before = box_dimension(box_counts(pts, scales, origin=a.boxes[v - 1, 0])).slope
        after = box_dimension(box_counts(pts @ m.T + 0.3, scales, floor=floor)).slope
        assert abs(after - before) <= 0.05


def test_restricted_examples():
    sq = corpus.square_tiling()
    a = cached_approx("square", 8)
    scales = _wide_scales(a, 2)
    rep = dim_restricted(sq, a, OpenSetTuple.uniform(sq, [0, 0], [1, 1]), scales, osc_resolution=2.0**-6)
    v = rep.vertices[0]
    assert rep.passed and v.nonempty and rep.osc_verdict == "consistent"
    assert abs(v.restricted.slope - 2) <= 0.05 and abs(v.full.slope - 2) <= 0.05
    far = dim_restricted(sq, a, OpenSetTuple.uniform(sq, [2, 2], [3, 3]), scales)
    assert far.passed and not far.vertices[0].nonempty and far.vertices[0].restricted is None
    c = corpus.cantor()
    b = compute_attractor(c, 10)
    sc3 = _wide_scales(b, 3)
    rep = dim_restricted(c, b, OpenSetTuple.uniform(c, [0], [1]), sc3)
    v = rep.vertices[0]
    assert rep.passed and abs(v.full.slope - LOG2_LOG3) <= 0.05
    assert np.all(np.abs(np.array(v.full.counts) - np.array(v.restricted.counts)) <= 2)
