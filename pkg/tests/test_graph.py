import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gdifs.errors import InvalidGraphError, PathCapError
from gdifs.graph import (DirectedMultigraph, Edge, Path, count_paths, enumerate_paths,
                         enumerate_terminal_paths, is_strongly_connected, shortest_cycle_through,
                         validate_graph)

FIB = DirectedMultigraph.from_pairs(2, [(1, 1), (1, 2), (2, 1)])
CANTOR = DirectedMultigraph.from_pairs(1, [(1, 1), (1, 1)])


def test_validation_examples():
    assert validate_graph(DirectedMultigraph.from_pairs(1, [(1, 1)])).valid
    rep = validate_graph(DirectedMultigraph.from_pairs(2, [(1, 2)]))
    assert not rep.valid and rep.missing_outgoing == (2,)
    assert validate_graph(DirectedMultigraph.from_pairs(2, [(1, 2), (2, 1)])).valid
    rep = validate_graph(DirectedMultigraph.from_pairs(2, [(1, 5), (2, 1), (1, 1)]))
    assert rep.dangling == (1,)


def test_duplicate_ids_rejected():
    with pytest.raises(InvalidGraphError):
        DirectedMultigraph(1, (Edge(1, 1, 1), Edge(1, 1, 1)))


def test_strong_connectivity_examples():
    assert is_strongly_connected(CANTOR)
    assert not is_strongly_connected(DirectedMultigraph.from_pairs(2, [(1, 2), (2, 2)]))
    assert is_strongly_connected(DirectedMultigraph.from_pairs(2, [(1, 2), (2, 1)]))
    with pytest.raises(InvalidGraphError):
        is_strongly_connected(DirectedMultigraph.from_pairs(2, [(1, 2)]))


def test_enumeration_examples():
    assert len(enumerate_paths(CANTOR, 1, 1, 3)) == 8
    g = DirectedMultigraph.from_pairs(2, [(1, 1), (2, 2)])
    assert enumerate_paths(g, 1, 2, 1) == []
    assert len(enumerate_paths(FIB, 1, 1, 4)) == 5
    assert len(enumerate_terminal_paths(CANTOR, 1, 2)) == 4
    assert len(enumerate_terminal_paths(DirectedMultigraph.from_pairs(1, [(1, 1)]), 1, 5)) == 1
    assert len(enumerate_terminal_paths(FIB, 1, 3)) == 5
    assert count_paths(FIB, 6).sum(axis=1)[0] == 21


def test_enumeration_is_lexicographic_and_chained():
    paths = enumerate_terminal_paths(FIB, 1, 5)
    ids = [p.ids for p in paths]
    assert ids == sorted(ids)
    for p in paths:
        assert p.initial == 1
        assert all(a.target == b.source for a, b in zip(p.edges, p.edges[1:]))


def test_path_cap_and_length():
    with pytest.raises(PathCapError):
        enumerate_paths(CANTOR, 1, 1, 21)
    with pytest.raises(PathCapError):
        enumerate_paths(CANTOR, 1, 1, 0)
    assert len(enumerate_paths(CANTOR, 1, 1, 3, cap=3)) == 8


def test_path_invariants():
    with pytest.raises(InvalidGraphError):
        Path(())
    e1, e2, e3 = FIB.edges
    with pytest.raises(InvalidGraphError):
        Path((e2, e2))
    p = Path((e2, e3))
    assert (p.initial, p.terminal, len(p)) == (1, 1, 2)
    assert (p + Path((e1,))).ids == (2, 3, 1)


def test_shortest_cycle():
    e1, e2, e3 = FIB.edges
    assert [e.id for e in shortest_cycle_through(FIB, e1)] == [1]
    assert [e.id for e in shortest_cycle_through(FIB, e2)] == [2, 3]
    g = DirectedMultigraph.from_pairs(2, [(1, 2), (2, 2)])
    with pytest.raises(InvalidGraphError):
        shortest_cycle_through(g, g.edges[0])


@st.composite
def multigraphs(draw, max_n=4):
    n = draw(st.integers(1, max_n))
    pairs = [(v, draw(st.integers(1, n))) for v in range(1, n + 1)]
    extra = draw(st.lists(st.tuples(st.integers(1, n), st.integers(1, n)), max_size=6))
    return DirectedMultigraph.from_pairs(n, pairs + extra)


def _matrix_power(c: np.ndarray, p: int) -> np.ndarray:
    out = np.eye(len(c), dtype=object)
    for _ in range(p):
        out = np.array([[sum(out[i, k] * int(c[k, j]) for k in range(len(c)))
                         for j in range(len(c))] for i in range(len(c))], dtype=object)
    return out


@settings(max_examples=60, deadline=None)
@given(multigraphs(), st.integers(1, 4))
def test_path_counts_match_matrix_power(g, p):
    power = _matrix_power(g.adjacency_count, p)
    for i in g.vertices:
        for j in g.vertices:
            assert len(enumerate_paths(g, i, j, p)) == power[i - 1, j - 1]


@settings(max_examples=30, deadline=None)
@given(multigraphs(max_n=3), st.integers(1, 2), st.integers(1, 2))
def test_concatenation_closure(g, p, q):
    for i, k, j in itertools.product(g.vertices, repeat=3):
        target = {x.ids for x in enumerate_paths(g, i, j, p + q)}
        for a in enumerate_paths(g, i, k, p):
            for b in enumerate_paths(g, k, j, q):
                assert (a + b).ids in target


def _brute_reachable(g):
    reach = np.eye(g.n, dtype=bool) | (g.adjacency_count > 0)
    for k in range(g.n):
        reach |= reach[:, [k]] & reach[[k], :]
    return reach


@settings(max_examples=80, deadline=None)
@given(multigraphs(max_n=6))
def test_strong_connectivity_matches_brute_force(g):
    assert is_strongly_connected(g) == bool(_brute_reachable(g).all())
