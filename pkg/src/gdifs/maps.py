"""Affine and similarity contractions, their Lipschitz bounds, and compositions.

Bounds of a composed map always come from the singular values of the product
matrix. Multiplying per-edge bounds is loose exactly when the distortion of a
system is unbounded, which is what :func:`bdp_profile` is meant to detect.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import MapError

SIMILARITY_TOL = 1e-12
SVD_TOL = 1e-12


def _as_matrix(linear, d: int | None = None) -> np.ndarray:
    a = np.atleast_2d(np.asarray(linear, dtype=float))
    if a.shape[0] != a.shape[1]:
        raise MapError(f"linear part must be square, got shape {a.shape}")
    if d is not None and a.shape[0] != d:
        raise MapError(f"linear part has dimension {a.shape[0]}, expected {d}")
    return a


def rotation_matrix(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def singular_values(linear: np.ndarray) -> tuple[float, float]:
    """``(sigma_min, sigma_max)`` of a (small) square matrix."""
    sv = np.linalg.svd(np.atleast_2d(linear), compute_uv=False)
    return float(sv[-1]), float(sv[0])


@dataclass(frozen=True, eq=False)
class ContractionMap:
    """``x -> linear @ x + translation`` with certified Lipschitz bounds.

    Use :meth:`similarity` or :meth:`affine` to build one. ``lower`` and
    ``upper`` are the lower and upper Lipschitz constants; explicit overrides
    are accepted if they bracket the singular values of ``linear``.
    """

    linear: np.ndarray
    translation: np.ndarray
    kind: str = "affine"
    lower: float = 0.0
    upper: float = 0.0
    ratio: float | None = None
    spec: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        lin = _as_matrix(self.linear)
        d = lin.shape[0]
        t = np.asarray(self.translation, dtype=float).reshape(-1)
        if t.shape != (d,):
            raise MapError(f"translation must have {d} components, got {t.shape[0]}")
        lin.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "linear", lin)
        object.__setattr__(self, "translation", t)
        if self.kind not in ("similarity", "affine"):
            raise MapError(f"unknown map kind {self.kind!r}")
        smin, smax = singular_values(lin)
        if smin <= SVD_TOL:
            raise MapError("map is not injective (smallest singular value is 0)")
        if smax >= 1.0:
            raise MapError(f"map is not a contraction (upper Lipschitz constant {smax:.6g} >= 1)")
        if self.kind == "similarity":
            ratio = self.ratio if self.ratio is not None else smax
            if abs(smax - ratio) > SIMILARITY_TOL or abs(smin - ratio) > SIMILARITY_TOL:
                raise MapError("similarity linear part is not ratio * orthogonal")
            object.__setattr__(self, "ratio", float(ratio))
            object.__setattr__(self, "lower", float(ratio))
            object.__setattr__(self, "upper", float(ratio))
            return
        lower = self.lower if self.lower else smin
        upper = self.upper if self.upper else smax
        if not 0.0 < lower <= upper < 1.0:
            raise MapError(f"Lipschitz bounds must satisfy 0 < lower <= upper < 1, got ({lower}, {upper})")
        if lower > smin + SVD_TOL or upper < smax - SVD_TOL:
            raise MapError(
                f"override bounds ({lower}, {upper}) do not bracket singular values ({smin}, {smax})"
            )
        object.__setattr__(self, "lower", float(lower))
        object.__setattr__(self, "upper", float(upper))

    @classmethod
    def similarity(cls, ratio: float, translation: Sequence[float], rotation=None,
                   reflection: bool = False) -> "ContractionMap":
        """``ratio * Q`` where ``Q`` is a rotation (angle in radians for d=2, or
        an orthogonal matrix), optionally preceded by a reflection."""
        t = np.asarray(translation, dtype=float).reshape(-1)
        d = t.shape[0]
        q = np.eye(d)
        if reflection:
            q[-1, -1] = -1.0
        if rotation is not None:
            if np.ndim(rotation) == 0:
                if d != 2:
                    raise MapError("a scalar rotation angle needs dimension 2")
                rot = rotation_matrix(float(rotation))
            else:
                rot = _as_matrix(rotation, d)
                if not np.allclose(rot @ rot.T, np.eye(d), atol=SIMILARITY_TOL):
                    raise MapError("rotation matrix is not orthogonal")
            q = rot @ q
        spec = {"kind": "similarity", "ratio": float(ratio), "translation": t.tolist()}
        if rotation is not None:
            spec["rotation"] = rotation if np.ndim(rotation) == 0 else np.asarray(rotation).tolist()
        if reflection:
            spec["reflection"] = True
        return cls(ratio * q, t, kind="similarity", ratio=float(ratio), spec=spec)

    @classmethod
    def affine(cls, matrix, translation: Sequence[float], lower: float | None = None,
               upper: float | None = None) -> "ContractionMap":
        lin = _as_matrix(matrix)
        spec = {"kind": "affine", "matrix": lin.tolist(),
                "translation": np.asarray(translation, dtype=float).reshape(-1).tolist()}
        if lower is not None:
            spec["lower"] = lower
        if upper is not None:
            spec["upper"] = upper
        return cls(lin, translation, kind="affine", lower=lower or 0.0, upper=upper or 0.0,
                   spec=spec)

    @property
    def dim(self) -> int:
        return self.linear.shape[0]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return x @ self.linear.T + self.translation

    def inverse(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return np.linalg.solve(self.linear, (y - self.translation).T).T

    def fixed_point(self) -> np.ndarray:
        return np.linalg.solve(np.eye(self.dim) - self.linear, self.translation)

    def to_dict(self) -> dict:
        return dict(self.spec) if self.spec else {
            "kind": self.kind, "matrix": self.linear.tolist(),
            "translation": self.translation.tolist(),
        }


def lipschitz_bounds(m: ContractionMap) -> tuple[float, float]:
    """``(sigma_min, sigma_max)`` of the linear part.

    Raises :class:`MapError` for non-injective or non-contractive input.
    """
    smin, smax = singular_values(m.linear)
    if smin <= SVD_TOL:
        raise MapError("map is not injective (smallest singular value is 0)")
    if smax >= 1.0:
        raise MapError(f"map is not a contraction (upper Lipschitz constant {smax:.6g} >= 1)")
    return smin, smax


@dataclass(frozen=True, eq=False)
class ComposedMap:
    path: object
    linear: np.ndarray
    translation: np.ndarray
    lower: float
    upper: float

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.linear.T + self.translation


def compose(path, maps: Mapping[int, ContractionMap]) -> ComposedMap:
    """``S_{e_1} o ... o S_{e_p}`` for a :class:`~gdifs.graph.Path`.

    Paths made only of similarities get exact bounds ``prod(ratio)``, which
    equal the singular values of the product in exact arithmetic.
    """
    ids = path.ids
    first = maps[ids[0]]
    lin = np.array(first.linear)
    t = np.array(first.translation)
    all_sim = first.kind == "similarity"
    ratio = first.ratio if all_sim else None
    for k in ids[1:]:
        m = maps[k]
        t = lin @ m.translation + t
        lin = lin @ m.linear
        if all_sim and m.kind == "similarity":
            ratio *= m.ratio
        else:
            all_sim = False
    if all_sim:
        lower = upper = ratio
    else:
        lower, upper = singular_values(lin)
    return ComposedMap(path, lin, t, lower, upper)
