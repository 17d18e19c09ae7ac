"""Reference systems used by the tests, the acceptance suite and the CLI examples."""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .maps import ContractionMap
from .system import GDIFS

sim = ContractionMap.similarity


def cantor(ratio: float = 1 / 3) -> GDIFS:
    """Middle-gap Cantor set ``{r x, r x + 1 - r}`` on one vertex."""
    return GDIFS.from_edges(1, [(1, 1, sim(ratio, [0.0])), (1, 1, sim(ratio, [1.0 - ratio]))],
                            name=f"cantor-{Fraction(ratio).limit_denominator(1000)}")


def half_interval() -> GDIFS:
    """``{x/2, x/2 + 1/2}``: the cylinders of [0, 1] touch at 1/2."""
    return GDIFS.from_edges(1, [(1, 1, sim(0.5, [0.0])), (1, 1, sim(0.5, [0.5]))],
                            name="half-interval")


def overlapping_interval() -> GDIFS:
    """``{x/2, x/2 + 1/4}``: image intervals overlap on (1/4, 1/2)."""
    return GDIFS.from_edges(1, [(1, 1, sim(0.5, [0.0])), (1, 1, sim(0.5, [0.25]))],
                            name="overlapping-interval")


def _grid_maps(ratio: float, offsets) -> list[tuple[int, int, ContractionMap]]:
    return [(1, 1, sim(ratio, [ratio * a, ratio * b])) for a, b in offsets]


def square_tiling() -> GDIFS:
    """Four quadrant maps of ratio 1/2; the attractor is the unit square."""
    return GDIFS.from_edges(1, _grid_maps(0.5, [(0, 0), (1, 0), (0, 1), (1, 1)]),
                            name="square-tiling")


def sierpinski_triangle() -> GDIFS:
    """Right-angle Sierpinski triangle with vertices (0,0), (1,0), (0,1)."""
    return GDIFS.from_edges(1, _grid_maps(0.5, [(0, 0), (1, 0), (0, 1)]),
                            name="sierpinski-triangle")


def sierpinski_carpet() -> GDIFS:
    offsets = [(a, b) for b in range(3) for a in range(3) if (a, b) != (1, 1)]
    return GDIFS.from_edges(1, _grid_maps(1 / 3, offsets), name="sierpinski-carpet")


def fibonacci_graph() -> GDIFS:
    """Two vertices, adjacency ``[[1, 1], [1, 0]]``, all ratios 1/3."""
    return GDIFS.from_edges(2, [
        (1, 1, sim(1 / 3, [0.0])),
        (1, 2, sim(1 / 3, [2 / 3])),
        (2, 1, sim(1 / 3, [1 / 3])),
    ], name="fibonacci-graph")


def two_vertex_dimension() -> GDIFS:
    """Strongly connected system with ratios 1/2 (1->1), 1/4 (1->2), 1/3 (2->1).

    Its similarity dimension solves ``1 = 2^-s + 12^-s``.
    """
    return GDIFS.from_edges(2, [
        (1, 1, sim(0.5, [0.0])),
        (1, 2, sim(0.25, [0.75])),
        (2, 1, sim(1 / 3, [0.0])),
    ], name="two-vertex-dimension")


def anisotropic_map() -> GDIFS:
    """Single affine self-loop ``(x, y) -> (x/2, y/3)``; distortion grows like 1.5^p."""
    return GDIFS.from_edges(1, [(1, 1, ContractionMap.affine(np.diag([0.5, 1 / 3]), [0.0, 0.0]))],
                            name="anisotropic")


def cantor_times_interval() -> GDIFS:
    """Product of the middle-thirds Cantor set with [0, 1]."""
    maps = [(1, 1, ContractionMap.affine(np.diag([1 / 3, 0.5]), [a, b]))
            for b in (0.0, 0.5) for a in (0.0, 2 / 3)]
    return GDIFS.from_edges(1, maps, name="cantor-x-interval")


def cantor_dust() -> GDIFS:
    """Four corner maps of ratio 1/4 in the unit square."""
    return GDIFS.from_edges(1, _grid_maps(0.25, [(0, 0), (3, 0), (0, 3), (3, 3)]),
                            name="cantor-dust")


def overlapping_square() -> GDIFS:
    """The four quadrant maps plus a centred copy ``(x/2 + 1/4, y/2 + 1/4)``.

    The attractor is still the unit square, and the centre cylinder overlaps
    each quadrant cylinder in a square of area 1/16.
    """
    maps = _grid_maps(0.5, [(0, 0), (1, 0), (0, 1), (1, 1)])
    maps.append((1, 1, sim(0.5, [0.25, 0.25])))
    return GDIFS.from_edges(1, maps, name="overlapping-square")


def planar_pair(translations_source=((0.0, 0.0), (2 / 3, 0.0)),
                translations_target=((0.0, 0.0), (2 / 3, 1 / 3)),
                ratio: float = 1 / 3) -> tuple[GDIFS, GDIFS]:
    """Two planar systems with identical linear parts and different translations."""
    src = GDIFS.from_edges(1, [(1, 1, sim(ratio, t)) for t in translations_source],
                           name="planar-source")
    tgt = GDIFS.from_edges(1, [(1, 1, sim(ratio, t)) for t in translations_target],
                           name="planar-target")
    return src, tgt


INVARIANCE_CORPUS = {
    "cantor3": lambda: cantor(1 / 3),
    "cantor4": lambda: cantor(1 / 4),
    "square": square_tiling,
    "sierpinski": sierpinski_triangle,
    "carpet": sierpinski_carpet,
    "fibonacci": fibonacci_graph,
}

CONNECTED_PLANAR = {
    "square": square_tiling,
    "sierpinski": sierpinski_triangle,
    "carpet": sierpinski_carpet,
}

ALL_SYSTEMS = {
    **INVARIANCE_CORPUS,
    "half-interval": half_interval,
    "overlapping-interval": overlapping_interval,
    "two-vertex": two_vertex_dimension,
    "anisotropic": anisotropic_map,
    "cantor-x-interval": cantor_times_interval,
    "cantor-dust": cantor_dust,
    "overlapping-square": overlapping_square,
    "planar-source": lambda: planar_pair()[0],
    "planar-target": lambda: planar_pair()[1],
}
