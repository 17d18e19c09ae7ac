"""Directed multigraphs, admissible paths and path enumeration.

Direction convention: an edge ``i -> k`` (``source=i``, ``target=k``) carries a
map that sends the ``k``-th attractor piece into the ``i``-th one. A path
``(e_1, ..., e_p)`` chains ``target(e_m) == source(e_{m+1})`` and composes as
``S_{e_1} o ... o S_{e_p}``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidGraphError, PathCapError

DEFAULT_PATH_CAP = 20


@dataclass(frozen=True, order=True)
class Edge:
    id: int
    source: int
    target: int


@dataclass(frozen=True)
class Path:
    """A finite admissible path, ``p >= 1`` edges long."""

    edges: tuple[Edge, ...]

    def __post_init__(self):
        if len(self.edges) == 0:
            raise InvalidGraphError("a path has at least one edge")
        for a, b in zip(self.edges, self.edges[1:]):
            if a.target != b.source:
                raise InvalidGraphError(
                    f"edges {a.id} and {b.id} do not chain ({a.target} != {b.source})"
                )

    @property
    def initial(self) -> int:
        return self.edges[0].source

    @property
    def terminal(self) -> int:
        return self.edges[-1].target

    @property
    def ids(self) -> tuple[int, ...]:
        return tuple(e.id for e in self.edges)

    def __len__(self) -> int:
        return len(self.edges)

    def __add__(self, other: "Path") -> "Path":
        return Path(self.edges + other.edges)


@dataclass(frozen=True)
class ValidationReport:
    missing_outgoing: tuple[int, ...]
    dangling: tuple[int, ...]

    @property
    def valid(self) -> bool:
        return not self.missing_outgoing and not self.dangling


@dataclass(frozen=True)
class DirectedMultigraph:
    """Vertices ``1..n`` and a list of edges with unique ids.

    Construction does not validate; call :func:`validate_graph` (or
    :meth:`require_valid`) to check the outgoing-edge requirement.
    """

    n: int
    edges: tuple[Edge, ...] = field(default=())

    def __post_init__(self):
        if self.n < 1:
            raise InvalidGraphError("a graph needs at least one vertex")
        edges = tuple(sorted(self.edges, key=lambda e: e.id))
        ids = [e.id for e in edges]
        if len(set(ids)) != len(ids):
            raise InvalidGraphError("edge ids must be unique")
        object.__setattr__(self, "edges", edges)

    @classmethod
    def from_pairs(cls, n: int, pairs: Iterable[tuple[int, int]]) -> "DirectedMultigraph":
        """Build a graph whose edge ids are ``1, 2, ...`` in the order given."""
        return cls(n, tuple(Edge(k + 1, s, t) for k, (s, t) in enumerate(pairs)))

    @property
    def vertices(self) -> range:
        return range(1, self.n + 1)

    @cached_property
    def edge_by_id(self) -> dict[int, Edge]:
        return {e.id: e for e in self.edges}

    @cached_property
    def out_edges(self) -> dict[int, tuple[Edge, ...]]:
        out: dict[int, list[Edge]] = {v: [] for v in self.vertices}
        for e in self.edges:
            if e.source in out:
                out[e.source].append(e)
        return {v: tuple(es) for v, es in out.items()}

    @cached_property
    def in_edges(self) -> dict[int, tuple[Edge, ...]]:
        inc: dict[int, list[Edge]] = {v: [] for v in self.vertices}
        for e in self.edges:
            if e.target in inc:
                inc[e.target].append(e)
        return {v: tuple(es) for v, es in inc.items()}

    @cached_property
    def adjacency_count(self) -> np.ndarray:
        """``C[i-1, k-1] = |E_{i,k}|`` as an integer matrix."""
        c = np.zeros((self.n, self.n), dtype=np.int64)
        for e in self.edges:
            if 1 <= e.source <= self.n and 1 <= e.target <= self.n:
                c[e.source - 1, e.target - 1] += 1
        return c

    def require_valid(self) -> None:
        report = validate_graph(self)
        if not report.valid:
            raise InvalidGraphError(
                "invalid graph: vertices without outgoing edges "
                f"{list(report.missing_outgoing)}, dangling edges {list(report.dangling)}"
            )


def validate_graph(g: DirectedMultigraph) -> ValidationReport:
    dangling = tuple(
        e.id for e in g.edges if not (1 <= e.source <= g.n and 1 <= e.target <= g.n)
    )
    missing = tuple(v for v in g.vertices if not g.out_edges[v])
    return ValidationReport(missing_outgoing=missing, dangling=dangling)


def _reachable(g: DirectedMultigraph, start: int, reverse: bool = False) -> set[int]:
    nbrs = g.in_edges if reverse else g.out_edges
    seen = {start}
    queue = deque([start])
    while queue:
        v = queue.popleft()
        for e in nbrs[v]:
            w = e.source if reverse else e.target
            if w not in seen:
                seen.add(w)
                queue.append(w)
    return seen


def is_strongly_connected(g: DirectedMultigraph) -> bool:
    g.require_valid()
    everything = set(g.vertices)
    return _reachable(g, 1) == everything and _reachable(g, 1, reverse=True) == everything


def _check_length(p: int, cap: int) -> None:
    if p < 1:
        raise PathCapError(f"path length must be >= 1, got {p}")
    if p > cap:
        raise PathCapError(f"path length {p} exceeds the enumeration cap {cap}")


def _extend(g: DirectedMultigraph, prefix: list[Edge], remaining: int, out: list[Path],
            end: int | None) -> None:
    for e in g.out_edges[prefix[-1].target]:
        prefix.append(e)
        if remaining == 1:
            if end is None or e.target == end:
                out.append(Path(tuple(prefix)))
        else:
            _extend(g, prefix, remaining - 1, out, end)
        prefix.pop()


def enumerate_paths(g: DirectedMultigraph, i: int, j: int | None, p: int,
                    cap: int = DEFAULT_PATH_CAP) -> list[Path]:
    """All paths of length ``p`` from ``i`` to ``j``, in lexicographic edge-id order.

    ``j=None`` collects every terminal vertex (see :func:`enumerate_terminal_paths`).
    """
    _check_length(p, cap)
    g.require_valid()
    out: list[Path] = []
    for e in g.out_edges[i]:
        if p == 1:
            if j is None or e.target == j:
                out.append(Path((e,)))
        else:
            _extend(g, [e], p - 1, out, j)
    return out


def enumerate_terminal_paths(g: DirectedMultigraph, i: int, p: int,
                             cap: int = DEFAULT_PATH_CAP) -> list[Path]:
    return enumerate_paths(g, i, None, p, cap)


def count_paths(g: DirectedMultigraph, p: int) -> np.ndarray:
    """``C^p`` computed by repeated integer matrix products."""
    c = g.adjacency_count
    out = np.eye(g.n, dtype=np.int64)
    for _ in range(p):
        out = out @ c
    return out


def shortest_cycle_through(g: DirectedMultigraph, first: Edge) -> list[Edge]:
    """Shortest path that starts with ``first`` and returns to ``first.source``.

    Ties are broken towards lower edge ids. Raises when the source is not
    reachable from ``first.target``.
    """
    goal = first.source
    if first.target == goal:
        return [first]
    parent: dict[int, Edge] = {}
    seen = {first.target}
    queue = deque([first.target])
    while queue:
        v = queue.popleft()
        for e in g.out_edges[v]:
            if e.target in seen:
                continue
            parent[e.target] = e
            if e.target == goal:
                chain = [e]
                while chain[-1].source != first.target:
                    chain.append(parent[chain[-1].source])
                return [first] + chain[::-1]
            seen.add(e.target)
            queue.append(e.target)
    raise InvalidGraphError(f"no cycle through edge {first.id}")


def edges_from_ids(g: DirectedMultigraph, ids: Sequence[int]) -> Path:
    return Path(tuple(g.edge_by_id[k] for k in ids))
