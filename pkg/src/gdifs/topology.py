"""Raster evidence for planar topological properties of attractor pieces.

Every verdict here holds at a stated resolution only. Set pixels are
8-connected and complement pixels 4-connected, the usual pairing that keeps
a diagonal chain of set pixels from leaking a hole.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .attractor import AttractorApprox, cloud_diameter, cylinder_boxes
from .errors import GDIFSError
from .system import GDIFS

COVER_EPS = 1e-7  # in pixel units; keeps boxes aligned with grid lines from spilling over
EIGHT = np.ones((3, 3), dtype=bool)
FOUR = ndimage.generate_binary_structure(2, 1)
TRIVIAL_NOTE = ("components of pixel diameter <= 2*delta are treated as trivial; "
                "single points cannot be resolved at finite resolution")
RESOLUTION_NOTE = "raster verdicts hold at the stated resolution only"


@dataclass(frozen=True)
class RasterGrid:
    """Boolean bitmap indexed ``[ix, iy]``; pixel ``(ix, iy)`` covers
    ``origin + delta * [ix, ix + 1) x [iy, iy + 1)``."""

    bitmap: np.ndarray
    origin: np.ndarray
    delta: float
    mode: str

    @property
    def shape(self) -> tuple[int, int]:
        return self.bitmap.shape

    @property
    def set_count(self) -> int:
        return int(np.count_nonzero(self.bitmap))

    def centres(self, mask: np.ndarray | None = None) -> np.ndarray:
        ix, iy = np.nonzero(self.bitmap if mask is None else mask)
        return self.origin + self.delta * (np.stack([ix, iy], axis=1) + 0.5)


def _check_planar(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise GDIFSError("rasterization needs planar (d = 2) input")
    if len(arr) == 0:
        raise GDIFSError("cannot rasterize an empty set")
    return arr


def rasterize_cloud(points: np.ndarray, delta: float, padding: int = 1,
                    origin=None, shape=None) -> RasterGrid:
    """Pixels containing at least one point (under-approximates the set)."""
    pts = _check_planar(points)
    if delta <= 0:
        raise GDIFSError("resolution must be positive")
    if origin is None:
        origin = pts.min(axis=0) - padding * delta
    origin = np.asarray(origin, dtype=float)
    idx = np.floor((pts - origin) / delta).astype(np.int64)
    if shape is None:
        shape = tuple(int(m) + 1 + padding for m in idx.max(axis=0))
    if idx.min() < 0 or np.any(idx >= np.array(shape)):
        raise GDIFSError("points fall outside the raster")
    bitmap = np.zeros(shape, dtype=bool)
    bitmap[idx[:, 0], idx[:, 1]] = True
    return RasterGrid(bitmap, origin, float(delta), "cloud")


def rasterize_boxes(lo: np.ndarray, hi: np.ndarray, delta: float, padding: int = 1,
                    origin=None, shape=None) -> RasterGrid:
    """Pixels meeting at least one closed box (over-approximates the covered set).

    A box whose side lies exactly on a grid line does not claim the pixel
    on the other side of that line.
    """
    lo = _check_planar(lo)
    hi = _check_planar(hi)
    if delta <= 0:
        raise GDIFSError("resolution must be positive")
    if origin is None:
        origin = lo.min(axis=0) - padding * delta
    origin = np.asarray(origin, dtype=float)
    a = np.floor((lo - origin) / delta + COVER_EPS).astype(np.int64)
    b = np.ceil((hi - origin) / delta - COVER_EPS).astype(np.int64) - 1
    b = np.maximum(a, b)
    if shape is None:
        shape = tuple(int(m) + 1 + padding for m in b.max(axis=0))
    if a.min() < 0 or np.any(b >= np.array(shape)):
        raise GDIFSError("boxes fall outside the raster")
    diff = np.zeros((shape[0] + 1, shape[1] + 1), dtype=np.int64)
    np.add.at(diff, (a[:, 0], a[:, 1]), 1)
    np.add.at(diff, (b[:, 0] + 1, a[:, 1]), -1)
    np.add.at(diff, (a[:, 0], b[:, 1] + 1), -1)
    np.add.at(diff, (b[:, 0] + 1, b[:, 1] + 1), 1)
    cover = diff.cumsum(axis=0).cumsum(axis=1)[: shape[0], : shape[1]] > 0
    return RasterGrid(cover, origin, float(delta), "cover")


def rasterize(system: GDIFS, approx: AttractorApprox, vertex: int, delta: float,
              mode: str = "cover", padding: int = 1) -> RasterGrid:
    """Raster of ``A_vertex`` on a grid anchored at its box corner minus the padding.

    ``cover`` marks every pixel meeting a depth-N cylinder bounding box,
    ``cloud`` every pixel holding a cloud point.
    """
    if system.dim != 2:
        raise GDIFSError("rasterization needs a planar system")
    if delta < 2 * approx.error_bound:
        raise GDIFSError(f"resolution {delta:.3g} is finer than 2 * error_bound = {2 * approx.error_bound:.3g}")
    box = approx.boxes[vertex - 1]
    origin = box[0] - padding * delta
    shape = tuple(int(np.ceil((box[1][j] - box[0][j]) / delta - COVER_EPS)) + 2 * padding for j in range(2))
    shape = tuple(max(s, 1 + 2 * padding) for s in shape)
    if mode == "cloud":
        return rasterize_cloud(approx.cloud(vertex), delta, padding, origin, shape)
    if mode == "cover":
        lo, hi = cylinder_boxes(system, vertex, approx.depth, approx.boxes)
        return rasterize_boxes(lo, hi, delta, padding, origin, shape)
    raise GDIFSError(f"unknown raster mode {mode!r}")


def count_holes(grid: RasterGrid | np.ndarray) -> int:
    """Number of 4-connected complement components that do not touch the border."""
    bitmap = grid.bitmap if isinstance(grid, RasterGrid) else np.asarray(grid, dtype=bool)
    labels, n = ndimage.label(~bitmap, structure=FOUR)
    if n == 0:
        return 0
    border = np.unique(np.concatenate([labels[0], labels[-1], labels[:, 0], labels[:, -1]]))
    return int(n - np.count_nonzero(border))


def boundary_pixels(bitmap: np.ndarray) -> np.ndarray:
    """Set pixels with a 4-neighbour that is unset or outside the grid."""
    inner = ndimage.binary_erosion(bitmap, structure=FOUR, border_value=0)
    return bitmap & ~inner


def boundary_connected(grid: RasterGrid | np.ndarray) -> tuple[bool, int]:
    """Whether the boundary pixels form exactly one 8-connected component."""
    bitmap = grid.bitmap if isinstance(grid, RasterGrid) else np.asarray(grid, dtype=bool)
    if not bitmap.any():
        raise GDIFSError("boundary of an empty set is undefined")
    _, n = ndimage.label(boundary_pixels(bitmap), structure=EIGHT)
    return n == 1, int(n)


def interior_pixels(bitmap: np.ndarray) -> np.ndarray:
    """Pixels whose full 3x3 neighbourhood is set."""
    return ndimage.binary_erosion(bitmap, structure=EIGHT, border_value=0)


def has_interior(grid: RasterGrid | np.ndarray) -> bool:
    bitmap = grid.bitmap if isinstance(grid, RasterGrid) else np.asarray(grid, dtype=bool)
    return bool(interior_pixels(bitmap).any())


@dataclass(frozen=True)
class ComponentSummary:
    count: int
    diameters: list[float]  # metric diameter between pixel centres, per component
    trivial: list[bool]
    density_radius: float  # inf when no component is non-trivial
    scale: float
    passed: bool

    @property
    def trivial_fraction(self) -> float:
        return float(np.mean(self.trivial)) if self.trivial else 0.0

    @property
    def nontrivial_count(self) -> int:
        return int(self.count - sum(self.trivial))


def _component_diameter(pix: np.ndarray) -> float:
    span = pix.max(axis=0) - pix.min(axis=0)
    if len(pix) <= 2 or span.max() == 0:
        return float(np.hypot(*span))
    return cloud_diameter(pix.astype(float))


def components_at_scale(grid: RasterGrid, scale: float | None = None) -> ComponentSummary:
    """8-connected components, their triviality, and the density radius.

    A component is trivial when its pixel-centre diameter is at most
    ``2 * delta``. The density radius is the largest distance from a set pixel
    to the nearest pixel of a non-trivial component; the check passes when
    every component is trivial or that radius is at most ``scale``.
    """
    delta = grid.delta
    scale = delta if scale is None else scale
    if scale < delta:
        raise GDIFSError("the density scale must be at least the resolution")
    labels, n = ndimage.label(grid.bitmap, structure=EIGHT)
    diam, trivial = [], []
    if n:
        order = np.argsort(labels.ravel(), kind="stable")
        flat = labels.ravel()[order]
        cut = np.searchsorted(flat, np.arange(1, n + 2))
        coords = np.stack(np.unravel_index(order, labels.shape), axis=1)
        for k in range(n):
            d = delta * _component_diameter(coords[cut[k]:cut[k + 1]])
            diam.append(d)
            trivial.append(d <= 2 * delta * (1 + 1e-12))
    nontrivial = np.isin(labels, 1 + np.flatnonzero(~np.array(trivial, dtype=bool))) if n else labels > 0
    if n and nontrivial.any():
        dist = ndimage.distance_transform_edt(~nontrivial)
        radius = float(dist[grid.bitmap].max() * delta)
        passed = radius <= scale
    else:
        radius = float("inf")
        passed = True
    return ComponentSummary(int(n), diam, trivial, radius, float(scale), passed)


@dataclass(frozen=True)
class TopologyReport:
    vertex: int
    resolution: float
    holes: int
    boundary_components: int
    boundary_connected: bool
    has_interior: bool
    components: int
    trivial_fraction: float
    density_radius: float
    density_scale: float
    density_passed: bool
    depth: int
    error_bound: float
    modes: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=lambda: [RESOLUTION_NOTE, TRIVIAL_NOTE])

    def to_dict(self) -> dict:
        return {
            "vertex": self.vertex, "resolution": self.resolution, "holes": self.holes,
            "boundary_components": self.boundary_components,
            "boundary_connected": self.boundary_connected, "has_interior": self.has_interior,
            "components": self.components, "trivial_fraction": self.trivial_fraction,
            "density_radius": self.density_radius, "density_scale": self.density_scale,
            "density_passed": self.density_passed, "depth": self.depth,
            "error_bound": self.error_bound, "modes": self.modes, "notes": self.notes,
        }


def topology_report(system: GDIFS, approx: AttractorApprox, vertex: int, delta: float,
                    mode: str = "cover", interior_mode: str = "cloud",
                    scale: float | None = None) -> TopologyReport:
    """Holes, boundary connectivity and components in ``mode``; interior in ``interior_mode``."""
    grid = rasterize(system, approx, vertex, delta, mode)
    igrid = grid if interior_mode == mode else rasterize(system, approx, vertex, delta, interior_mode)
    connected, nb = boundary_connected(grid)
    comps = components_at_scale(grid, scale)
    return TopologyReport(
        vertex=vertex, resolution=delta, holes=count_holes(grid), boundary_components=nb,
        boundary_connected=connected, has_interior=has_interior(igrid),
        components=comps.count, trivial_fraction=comps.trivial_fraction,
        density_radius=comps.density_radius, density_scale=comps.scale,
        density_passed=comps.passed, depth=approx.depth, error_bound=approx.error_bound,
        modes={"holes": mode, "boundary": mode, "components": mode, "interior": interior_mode},
    )


def depth_for_resolution(system: GDIFS, boxes: np.ndarray, delta: float, max_depth: int = 12) -> int:
    """Smallest depth whose cylinder bound ``r^N max diam(Box)`` is at most ``delta / 2``."""
    diam = float(np.linalg.norm(boxes[:, 1] - boxes[:, 0], axis=1).max())
    depth = 1
    while depth < max_depth and system.max_ratio ** depth * diam > delta / 2:
        depth += 1
    return depth
