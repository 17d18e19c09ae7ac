"""The graph-directed IFS container: a multigraph plus one contraction per edge."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping

import numpy as np

from .errors import InvalidGraphError, MapError
from .graph import DirectedMultigraph, Edge, Path, is_strongly_connected
from .maps import ContractionMap, compose

MAX_DIM = 3


@dataclass(frozen=True, eq=False)
class GDIFS:
    """A graph-directed iterated function system.

    ``maps[e.id]`` is the contraction attached to edge ``e``; it sends the
    attractor piece of ``e.target`` into the piece of ``e.source``.
    """

    graph: DirectedMultigraph
    maps: Mapping[int, ContractionMap]
    name: str = ""
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.graph.require_valid()
        missing = [e.id for e in self.graph.edges if e.id not in self.maps]
        if missing:
            raise MapError(f"edges without a map: {missing}")
        extra = sorted(set(self.maps) - set(self.graph.edge_by_id))
        if extra:
            raise MapError(f"maps attached to unknown edges: {extra}")
        dims = {m.dim for m in self.maps.values()}
        if len(dims) != 1:
            raise MapError(f"maps have mixed dimensions {sorted(dims)}")
        if not 1 <= dims.pop() <= MAX_DIM:
            raise MapError(f"only dimensions 1..{MAX_DIM} are supported")

    @classmethod
    def from_edges(cls, n: int, edges: list[tuple[int, int, ContractionMap]],
                   name: str = "") -> "GDIFS":
        """Edge ids are assigned ``1, 2, ...`` in list order."""
        g = DirectedMultigraph(n, tuple(Edge(k + 1, s, t) for k, (s, t, _) in enumerate(edges)))
        return cls(g, {k + 1: m for k, (_, _, m) in enumerate(edges)}, name=name)

    @property
    def n(self) -> int:
        return self.graph.n

    @cached_property
    def dim(self) -> int:
        return next(iter(self.maps.values())).dim

    @cached_property
    def edges(self) -> tuple[Edge, ...]:
        return self.graph.edges

    @cached_property
    def edge_index(self) -> dict[int, int]:
        return {e.id: k for k, e in enumerate(self.edges)}

    @cached_property
    def sources(self) -> np.ndarray:
        return np.array([e.source - 1 for e in self.edges], dtype=np.int64)

    @cached_property
    def targets(self) -> np.ndarray:
        return np.array([e.target - 1 for e in self.edges], dtype=np.int64)

    @cached_property
    def linear(self) -> np.ndarray:
        return np.stack([self.maps[e.id].linear for e in self.edges])

    @cached_property
    def translation(self) -> np.ndarray:
        return np.stack([self.maps[e.id].translation for e in self.edges])

    @cached_property
    def out_index(self) -> list[np.ndarray]:
        """Per 0-based vertex, indices into :attr:`edges` of its outgoing edges."""
        return [np.flatnonzero(self.sources == v) for v in range(self.n)]

    @cached_property
    def outdeg(self) -> np.ndarray:
        return np.array([len(ix) for ix in self.out_index], dtype=np.int64)

    @cached_property
    def max_ratio(self) -> float:
        """``r = max_e Lip+(S_e)``."""
        return max(m.upper for m in self.maps.values())

    @cached_property
    def is_similarity(self) -> bool:
        return all(m.kind == "similarity" for m in self.maps.values())

    @cached_property
    def strongly_connected(self) -> bool:
        return is_strongly_connected(self.graph)

    def edge_map(self, edge: Edge | int) -> ContractionMap:
        return self.maps[edge.id if isinstance(edge, Edge) else edge]

    def compose(self, path: Path):
        return compose(path, self.maps)

    def apply(self, edge_idx: int, x: np.ndarray) -> np.ndarray:
        """Apply the map of edge ``self.edges[edge_idx]`` to an ``(m, d)`` array."""
        return x @ self.linear[edge_idx].T + self.translation[edge_idx]

    def same_graph(self, other: "GDIFS") -> bool:
        return self.n == other.n and self.edges == other.edges

    def require_strongly_connected(self) -> None:
        if not self.strongly_connected:
            raise InvalidGraphError("the system is not strongly connected")
