"""Command-line entry point: ``gdifs <command> CONFIG [options]``.

Exit codes: 0 pass, 1 refuted or violated, 2 inconclusive, 3 input error.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import io
from .attractor import compute_attractor, invariant_bounding_boxes, verify_invariance
from .coding import build_phi, empirical_lipschitz
from .dimension import (SLOPE_TOL, admissible_scales, box_dimension, check_vertex_dimension_equality,
                        cloud_box_counts, dim_restricted, similarity_dimension)
from .distortion import bdp_profile
from .errors import ConfigError, GDIFSError, HypothesisError, SeparationError
from .separation import check_osc, check_ssc, interior_overlap
from .topology import depth_for_resolution, rasterize, topology_report

PASS, FAIL, INCONCLUSIVE, INPUT_ERROR = 0, 1, 2, 3


def _scales(text: str | None, approx) -> np.ndarray:
    """``None`` (automatic), ``a,b,c`` (fractions allowed) or ``base:kmin:kmax``."""
    if text is None:
        return admissible_scales(approx)
    try:
        if ":" in text:
            base, k0, k1 = text.split(":")
            return float(Fraction(base)) ** -np.arange(int(k0), int(k1) + 1, dtype=float)
        return np.array([float(Fraction(s)) for s in text.split(",")])
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"--scales: cannot parse {text!r}") from None


def _delta(text: str | None, default: float | None = None) -> float | None:
    if text is None:
        return default
    try:
        value = float(Fraction(text))
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"--delta: cannot parse {text!r}") from None
    if value <= 0:
        raise ConfigError("--delta must be positive")
    return value


def _base(args, system, approx=None, **extra) -> dict:
    report = {
        "command": args.command,
        "system": system.name,
        "depth": approx.depth if approx is not None else getattr(args, "depth", None),
        "error_bound": approx.error_bound if approx is not None else None,
        "tolerance": getattr(args, "tol", None),
        "resolution": _delta(getattr(args, "delta", None)),
        "seed": getattr(args, "seed", None),
    }
    report.update(extra)
    return report


def _approx(args, system):
    return compute_attractor(system, args.depth, budget=args.budget)


def cmd_render(args, system, opens):
    approx = _approx(args, system)
    out = Path(args.out or ".")
    name = system.name or "system"
    csv_path = out / f"{name}_cloud.csv"
    io.write_cloud_csv(csv_path, approx)
    files = [str(csv_path)]
    delta = _delta(args.delta)
    if system.dim == 2:
        if delta is None:
            delta = max(2.0**-8, 2 * approx.error_bound)
        for v in system.graph.vertices:
            grid = rasterize(system, approx, v, delta, args.mode or "cloud")
            pgm = out / f"{name}_vertex{v}.pgm"
            io.write_pgm(pgm, grid.bitmap)
            files.append(str(pgm))
    inv = verify_invariance(system, approx)
    report = _base(args, system, approx, resolution=delta, mode=args.mode or "cloud",
                   files=files, points={str(v): len(p) for v, p in enumerate(approx.points, 1)},
                   invariance=inv.to_dict())
    return (PASS if inv.passed else FAIL), report


def cmd_check_ssc(args, system, opens):
    approx = _approx(args, system)
    rep = check_ssc(system, approx, args.tol)
    code = {"certified": PASS, "refuted": FAIL}.get(rep.verdict, INCONCLUSIVE)
    return code, _base(args, system, approx, separation=rep.to_dict(), verdict=rep.verdict)


def cmd_check_osc(args, system, opens):
    if opens is None:
        raise ConfigError("check-osc needs an open_sets entry in the config")
    delta = _delta(args.delta, 2.0**-8)
    rep = check_osc(system, opens, delta)
    return (PASS if rep.consistent else FAIL), _base(
        args, system, resolution=delta, osc=rep.to_dict(), verdict=rep.verdict,
        open_sets=opens.to_dict())


def cmd_bdp(args, system, opens):
    rep = bdp_profile(system, args.depth, budget=args.budget, allow_sampling=True, seed=args.seed)
    return (PASS if rep.bounded else FAIL), _base(args, system, bdp=rep.to_dict(), verdict=rep.verdict)


def cmd_dim(args, system, opens):
    approx = _approx(args, system)
    scales = _scales(args.scales, approx)
    est = {}
    rows = []
    for v in system.graph.vertices:
        table = cloud_box_counts(approx, v, scales)
        est[str(v)] = box_dimension(table).to_dict()
        rows += [(v, s, c) for s, c in table.rows()]
    sdim = None
    code = PASS
    if system.is_similarity and system.strongly_connected:
        try:
            sdim = similarity_dimension(system)
        except GDIFSError:
            sdim = None
        if sdim is not None and any(abs(e["slope"] - sdim) > SLOPE_TOL for e in est.values()):
            code = FAIL
    if args.out:
        io.write_table_csv(Path(args.out) / f"{system.name or 'system'}_counts.csv",
                           ["vertex", "delta", "count"], rows)
    return code, _base(args, system, approx, scales=scales.tolist(), estimates=est,
                       similarity_dimension=sdim, slope_tolerance=SLOPE_TOL)


def cmd_dim_equality(args, system, opens):
    approx = _approx(args, system)
    scales = _scales(args.scales, approx)
    rep = check_vertex_dimension_equality(system, approx, scales)
    return (PASS if rep.passed else FAIL), _base(args, system, approx, scales=scales.tolist(),
                                                 equality=rep.to_dict())


def cmd_dim_restricted(args, system, opens):
    if opens is None:
        raise ConfigError("dim-restricted needs an open_sets entry in the config")
    approx = _approx(args, system)
    scales = _scales(args.scales, approx)
    rep = dim_restricted(system, approx, opens, scales, osc_resolution=_delta(args.delta))
    return (PASS if rep.passed else FAIL), _base(args, system, approx, scales=scales.tolist(),
                                                 restricted=rep.to_dict())


def cmd_phi(args, system, opens):
    target, _ = io.load_system(args.target)
    try:
        conj = build_phi(system, target, args.depth, args.tol, budget=args.budget)
    except SeparationError as exc:
        msg = str(exc)
        code = FAIL if "refuted" in msg else INCONCLUSIVE
        return code, _base(args, system, error=msg, verdict="separation not certified")
    except HypothesisError as exc:
        return FAIL, _base(args, system, error=str(exc), verdict="hypothesis failed")
    audit = empirical_lipschitz(conj, args.pairs, args.seed, exhaustive=args.exhaustive)
    return (PASS if audit.passed else FAIL), _base(
        args, system, conj.source.approx, target=target.name, conjugacy=conj.to_dict(),
        audit=audit.to_dict(), verdict="pass" if audit.passed else "fail")


def cmd_topology(args, system, opens):
    if system.dim != 2:
        raise ConfigError("topology needs a planar system")
    delta = _delta(args.delta, 2.0**-6)
    depth = args.depth
    if depth is None:
        depth = depth_for_resolution(system, invariant_bounding_boxes(system), delta)
    approx = compute_attractor(system, depth, budget=args.budget)
    reports = [topology_report(system, approx, v, delta, args.mode or "cover").to_dict()
               for v in system.graph.vertices]
    return PASS, _base(args, system, approx, resolution=delta, vertices=reports)


def cmd_report(args, system, opens):
    approx = _approx(args, system)
    parts: dict = {"invariance": verify_invariance(system, approx).to_dict()}
    ssc = check_ssc(system, approx, args.tol)
    parts["separation"] = ssc.to_dict()
    parts["bdp"] = bdp_profile(system, min(args.depth, 12), budget=args.budget,
                               allow_sampling=True, seed=args.seed).to_dict()
    try:
        scales = _scales(args.scales, approx)
        parts["dimension"] = {str(v): box_dimension(cloud_box_counts(approx, v, scales)).to_dict()
                              for v in system.graph.vertices}
        if system.is_similarity and system.strongly_connected:
            parts["similarity_dimension"] = similarity_dimension(system)
    except GDIFSError as exc:
        parts["dimension"] = {"error": str(exc)}
    delta = _delta(args.delta)
    if opens is not None:
        parts["osc"] = check_osc(system, opens, delta or 2.0**-8).to_dict()
    if system.dim == 2:
        tdelta = delta or max(2.0**-6, 2 * approx.error_bound)
        parts["topology"] = [topology_report(system, approx, v, tdelta).to_dict()
                             for v in system.graph.vertices]
        if ssc.verdict != "certified":
            for v in system.graph.vertices:
                out = system.graph.out_edges[v]
                parts.setdefault("interior_overlap", {})[str(v)] = {
                    f"{a.id}-{b.id}": interior_overlap(system, approx, a.id, b.id, tdelta).to_dict()
                    for k, a in enumerate(out) for b in out[k + 1:]
                }
    return PASS, _base(args, system, approx, **parts)


COMMANDS = {
    "render": (cmd_render, "write the point cloud (CSV) and per-vertex rasters (PGM)"),
    "check-ssc": (cmd_check_ssc, "bracket cylinder gaps and decide strong separation"),
    "check-osc": (cmd_check_osc, "raster check of the open sets in the config"),
    "bdp": (cmd_bdp, "bounded-distortion profile of composed maps"),
    "dim": (cmd_dim, "per-vertex box-counting dimension"),
    "dim-equality": (cmd_dim_equality, "compare box dimensions across vertices"),
    "dim-restricted": (cmd_dim_restricted, "box dimension restricted to the open sets"),
    "phi": (cmd_phi, "build the coding map to a second system and audit its Lipschitz bounds"),
    "topology": (cmd_topology, "holes, boundary connectivity, interior and components"),
    "report": (cmd_report, "aggregate JSON report"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gdifs", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, helptext) in COMMANDS.items():
        p = sub.add_parser(name, help=helptext)
        p.add_argument("config", help="system JSON file")
        if name == "phi":
            p.add_argument("target", help="target system JSON file")
            p.add_argument("--exhaustive", action="store_true", help="scan all cloud pairs")
        default_depth = None if name == "topology" else 8
        p.add_argument("--depth", type=int, default=default_depth,
                       help="approximation depth (topology: chosen from --delta when omitted)")
        p.add_argument("--delta", help="raster resolution, e.g. 0.0123 or 1/81")
        p.add_argument("--scales", help="box-counting scales: 'a,b,c' or 'base:kmin:kmax'")
        p.add_argument("--pairs", type=int, default=10**4, help="sampled pairs for the Lipschitz audit")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--tol", type=float, default=1e-6, help="separation tolerance")
        p.add_argument("--budget", type=int, default=10**6, help="maximum cylinder or path count")
        p.add_argument("--mode", choices=["cloud", "cover"], help="raster mode")
        p.add_argument("--no-timestamp", action="store_true", help="omit the timestamp from the report")
        p.add_argument("--out", help="output directory for artifacts; the report goes to stdout")
        p.add_argument("--report", help="also write the JSON report to this file")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handler = COMMANDS[args.command][0]
    try:
        system, opens = io.load_system(args.config)
        code, report = handler(args, system, opens)
    except HypothesisError as exc:
        print(f"gdifs: {exc}", file=sys.stderr)
        return FAIL
    except (ConfigError, GDIFSError, OSError) as exc:
        print(f"gdifs: {exc}", file=sys.stderr)
        return INPUT_ERROR
    report["exit_code"] = code
    if not args.no_timestamp:
        report["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    text = io.dumps_report(report)
    if args.report:
        io.atomic_write_text(args.report, text)
    sys.stdout.write(text)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
