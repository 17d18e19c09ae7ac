"""System configuration files and report/artifact writers.

Config schema (JSON)::

    {
      "name": "cantor",
      "dimension": 1,
      "vertices": 1,
      "edges": [
        {"id": 1, "source": 1, "target": 1,
         "map": {"kind": "similarity", "ratio": "1/3", "translation": [0]}},
        {"id": 2, "source": 1, "target": 1,
         "map": {"kind": "affine", "matrix": [[0.3]], "translation": ["2/3"]},
         "lower": 0.3, "upper": 0.3}
      ],
      "open_sets": {"1": [[[0], [1]]]},
      "metadata": {"notes": "..."}
    }

Numbers may be given as fraction strings. Similarity maps accept an optional
``rotation`` (angle in radians for d = 2, or an orthogonal matrix) and
``reflection`` flag. All outputs are written atomically.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
import os
import tempfile
from fractions import Fraction
from pathlib import Path as FsPath
from typing import Any

import numpy as np

from .errors import ConfigError, GDIFSError
from .graph import DirectedMultigraph, Edge
from .maps import ContractionMap
from .separation import OpenSetTuple
from .system import GDIFS


# -- parsing -------------------------------------------------------------------

def _number(value: Any, where: str) -> float:
    if isinstance(value, bool):
        raise ConfigError(f"{where}: expected a number, got a boolean")
    if isinstance(value, (int, float)):
        out = float(value)
    elif isinstance(value, str):
        try:
            out = float(Fraction(value.strip()))
        except (ValueError, ZeroDivisionError):
            raise ConfigError(f"{where}: cannot parse {value!r} as a number") from None
    else:
        raise ConfigError(f"{where}: expected a number, got {type(value).__name__}")
    if not math.isfinite(out):
        raise ConfigError(f"{where}: value must be finite")
    return out


def _vector(value: Any, where: str, d: int | None = None) -> list[float]:
    if not isinstance(value, list):
        raise ConfigError(f"{where}: expected a list of numbers")
    out = [_number(v, f"{where}[{k}]") for k, v in enumerate(value)]
    if d is not None and len(out) != d:
        raise ConfigError(f"{where}: expected {d} components, got {len(out)}")
    return out


def _matrix(value: Any, where: str, d: int) -> list[list[float]]:
    if not isinstance(value, list) or len(value) != d:
        raise ConfigError(f"{where}: expected a {d}x{d} matrix")
    return [_vector(row, f"{where}[{k}]", d) for k, row in enumerate(value)]


def _require(obj: dict, key: str, where: str):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected an object")
    if key not in obj:
        raise ConfigError(f"{where}.{key}: missing required field")
    return obj[key]


def _int(value: Any, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where}: expected an integer")
    return value


def _edge_lines(text: str) -> list[int]:
    """Line number of each element of the top-level ``edges`` array (best effort)."""
    try:
        start = text.index("[", text.index('"edges"'))
    except ValueError:
        return []
    dec = json.JSONDecoder()
    lines, pos = [], start + 1
    while True:
        while pos < len(text) and text[pos] in " \t\r\n,":
            pos += 1
        if pos >= len(text) or text[pos] == "]":
            return lines
        lines.append(text.count("\n", 0, pos) + 1)
        try:
            _, pos = dec.raw_decode(text, pos)
        except json.JSONDecodeError:
            return lines


def _build_map(spec: Any, edge: dict, where: str, d: int) -> ContractionMap:
    kind = _require(spec, "kind", where)
    t = _vector(_require(spec, "translation", where), f"{where}.translation", d)
    lower = edge.get("lower", spec.get("lower"))
    upper = edge.get("upper", spec.get("upper"))
    lower = None if lower is None else _number(lower, f"{where}.lower")
    upper = None if upper is None else _number(upper, f"{where}.upper")
    if lower is not None and upper is not None and not 0.0 < lower <= upper < 1.0:
        raise ConfigError(f"{where}: overrides must satisfy 0 < lower <= upper < 1, got ({lower}, {upper})")
    try:
        if kind == "similarity":
            ratio = _number(_require(spec, "ratio", where), f"{where}.ratio")
            if not 0.0 < ratio < 1.0:
                raise ConfigError(f"{where}.ratio: contraction violated (ratio {ratio:g} not in (0, 1))")
            rot = spec.get("rotation")
            if isinstance(rot, list):
                rot = _matrix(rot, f"{where}.rotation", d)
            elif rot is not None:
                rot = _number(rot, f"{where}.rotation")
            m = ContractionMap.similarity(ratio, t, rotation=rot, reflection=bool(spec.get("reflection", False)))
            if (lower is not None and lower > ratio) or (upper is not None and upper < ratio):
                raise ConfigError(f"{where}: overrides ({lower}, {upper}) do not bracket the ratio {ratio:g}")
            return m
        if kind == "affine":
            mat = _matrix(_require(spec, "matrix", where), f"{where}.matrix", d)
            return ContractionMap.affine(mat, t, lower=lower, upper=upper)
    except ConfigError:
        raise
    except GDIFSError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    raise ConfigError(f"{where}.kind: unknown map kind {kind!r} (expected 'similarity' or 'affine')")


def _open_sets(raw: Any, d: int) -> OpenSetTuple:
    if not isinstance(raw, dict):
        raise ConfigError("open_sets: expected an object keyed by vertex")
    boxes = {}
    for key, items in raw.items():
        where = f"open_sets.{key}"
        try:
            v = int(key)
        except ValueError:
            raise ConfigError(f"{where}: vertex keys must be integers") from None
        if isinstance(items, list) and items and not isinstance(items[0][0], list):
            items = [items]
        if not isinstance(items, list) or not items:
            raise ConfigError(f"{where}: expected a nonempty list of [lo, hi] boxes")
        boxes[v] = [(_vector(b[0], f"{where}[{k}].lo", d), _vector(b[1], f"{where}[{k}].hi", d))
                    for k, b in enumerate(items)]
    try:
        return OpenSetTuple(boxes)
    except GDIFSError as exc:
        raise ConfigError(f"open_sets: {exc}") from None


def parse_system(data: Any, text: str = "") -> tuple[GDIFS, OpenSetTuple | None]:
    """Validate a decoded config and build the system (plus open sets, if any)."""
    d = _int(_require(data, "dimension", "config"), "dimension")
    n = _int(_require(data, "vertices", "config"), "vertices")
    raw_edges = _require(data, "edges", "config")
    if not isinstance(raw_edges, list) or not raw_edges:
        raise ConfigError("edges: expected a nonempty list")
    lines = _edge_lines(text)
    edges, maps = [], {}
    for k, raw in enumerate(raw_edges):
        where = f"edges[{k}]" + (f" (line {lines[k]})" if k < len(lines) else "")
        eid = _int(_require(raw, "id", where), f"{where}.id")
        src = _int(_require(raw, "source", where), f"{where}.source")
        tgt = _int(_require(raw, "target", where), f"{where}.target")
        for name, v in (("source", src), ("target", tgt)):
            if not 1 <= v <= n:
                raise ConfigError(f"{where}.{name}: dangling endpoint {v} (vertices are 1..{n})")
        if eid in maps:
            raise ConfigError(f"{where}.id: duplicate edge id {eid}")
        edges.append(Edge(eid, src, tgt))
        maps[eid] = _build_map(_require(raw, "map", where), raw, f"{where}.map", d)
    meta = data.get("metadata", {}) or {}
    if not isinstance(meta, dict):
        raise ConfigError("metadata: expected an object")
    try:
        system = GDIFS(DirectedMultigraph(n, tuple(edges)), maps,
                       name=str(data.get("name", meta.get("name", ""))), metadata=dict(meta))
    except GDIFSError as exc:
        raise ConfigError(f"config: {exc}") from None
    opens = _open_sets(data["open_sets"], d) if data.get("open_sets") is not None else None
    return system, opens


def load_system(path: str | os.PathLike) -> tuple[GDIFS, OpenSetTuple | None]:
    """Read a JSON config; errors name the file, line and field involved."""
    p = FsPath(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"{p}: cannot read config ({exc.strerror})") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
    try:
        return parse_system(data, text)
    except ConfigError as exc:
        raise ConfigError(f"{p}: {exc}") from None


def system_to_dict(system: GDIFS, open_sets: OpenSetTuple | None = None) -> dict:
    edges = []
    for e in system.edges:
        m = system.maps[e.id]
        edges.append({"id": e.id, "source": e.source, "target": e.target, "map": m.to_dict()})
    out = {"name": system.name, "dimension": system.dim, "vertices": system.n, "edges": edges}
    if open_sets is not None:
        out["open_sets"] = open_sets.to_dict()
    if system.metadata:
        out["metadata"] = system.metadata
    return out


def save_system(system: GDIFS, path, open_sets: OpenSetTuple | None = None) -> None:
    atomic_write_text(path, json.dumps(system_to_dict(system, open_sets), indent=2) + "\n")


# -- writers -------------------------------------------------------------------

def atomic_write_bytes(path, data: bytes) -> None:
    """Write to a temporary file in the target directory, then rename over ``path``."""
    target = FsPath(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def to_jsonable(obj: Any) -> Any:
    """Plain JSON types; non-finite floats become the strings ``"inf"``, ``"-inf"``, ``"nan"``."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def dumps_report(report: dict) -> str:
    return json.dumps(to_jsonable(report), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path, report: dict) -> None:
    atomic_write_text(path, dumps_report(report))


def cloud_csv(points_per_vertex: list[np.ndarray]) -> str:
    """CSV text with columns ``vertex,x1,...,xd``."""
    d = points_per_vertex[0].shape[1]
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["vertex"] + [f"x{j + 1}" for j in range(d)])
    for v, pts in enumerate(points_per_vertex, start=1):
        for row in pts:
            w.writerow([v] + [repr(float(x)) for x in row])
    return buf.getvalue()


def write_cloud_csv(path, approx) -> None:
    atomic_write_text(path, cloud_csv(approx.points))


def read_cloud_csv(path) -> dict[int, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return {int(v): data[data[:, 0] == v, 1:] for v in np.unique(data[:, 0])}


def write_table_csv(path, header: list[str], rows) -> None:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(x)) if isinstance(x, float) else x for x in row])
    atomic_write_text(path, buf.getvalue())


def pgm_bytes(bitmap: np.ndarray) -> bytes:
    """Binary PGM (P5): set pixels black, others white, with ``y`` pointing up."""
    img = np.where(np.asarray(bitmap, dtype=bool).T[::-1], 0, 255).astype(np.uint8)
    h, w = img.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + img.tobytes()


def write_pgm(path, bitmap: np.ndarray) -> None:
    atomic_write_bytes(path, pgm_bytes(bitmap))


def read_pgm(path) -> np.ndarray:
    """Inverse of :func:`write_pgm` (returns the boolean bitmap indexed ``[ix, iy]``)."""
    raw = FsPath(path).read_bytes()
    parts = raw.split(maxsplit=4)
    if parts[0] != b"P5":
        raise ConfigError(f"{path}: not a binary PGM")
    w, h = int(parts[1]), int(parts[2])
    pix = np.frombuffer(parts[4][: w * h], dtype=np.uint8).reshape(h, w)
    return (pix == 0)[::-1].T
