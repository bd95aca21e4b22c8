"""Command line front end: ``enclosure <subcommand> --config run.ini``.

Every subcommand writes its artifacts and ``resolved_config.ini`` into the
output directory. On failure the exit code is nonzero and a JSON document
``{"failures": [...]}`` is printed to stderr.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

from .cgo import ProbeParams, WaveNumbers, probe
from .config import ConfigError, RunConfig, describe_defaults, emit_config, parse_config
from .fem import EigenvalueError, generate_mesh, write_mesh
from .geometry import GeometryError, sup_tau
from .indicator import ForwardModel
from .reconstruct import (
    RangeError,
    ResolutionCheck,
    h_sweep,
    indicator_sample,
    reconstruction_json,
    sample_row,
    slope_rate_check,
    sweep_rows,
    trace_boundary,
    write_svg,
    CSV_HEADER,
)
from . import validate as _validate

EXIT_FAILURE = 1
EXIT_CONFIG = 2


class Failure(Exception):
    def __init__(self, stage, message, **extra):
        super().__init__(message)
        self.record = {"stage": stage, "error": message, **extra}


def _base_params(cfg: RunConfig, d=1.0, h=0.5):
    p = cfg.probe
    return ProbeParams(d, h, p.eps_band, p.quad_order, p.angular_guard)


def _model(cfg: RunConfig):
    mesh = generate_mesh(cfg.domain, cfg.material, cfg.mesh_size, cfg.refine_inclusions)
    try:
        return ForwardModel(mesh, cfg.material)
    except EigenvalueError as exc:
        raise Failure("fem", str(exc)) from None


def _levels(cfg, frame, given):
    """d values for probe/indicate/sweep: given ones, else 5 evenly spaced in 1/d."""
    if given:
        return [float(d) for d in given]
    d_min, d_max = cfg.d_range(frame)
    return [1.0 / t for t in np.linspace(1.0 / d_max, 1.0 / d_min, 5)]


def _write(path, text):
    with open(path, "w") as fh:
        fh.write(text)


def _sweep_kw(cfg):
    return {"window": cfg.probe.window, "prefactor": cfg.probe.prefactor, "noise": cfg.noise_level, "seed": cfg.seed}


def cmd_mesh(cfg, args, out):
    mesh = generate_mesh(cfg.domain, cfg.material, cfg.mesh_size, cfg.refine_inclusions)
    write_mesh(mesh, os.path.join(out, "mesh.txt"))
    info = {
        "nodes": int(mesh.n_nodes),
        "triangles": int(len(mesh.triangles)),
        "boundary_nodes": int(len(mesh.boundary_nodes)),
        "max_edge": float(mesh.edge_lengths().max()),
        "min_area": float(mesh.areas().min()),
        "metadata": mesh.metadata,
    }
    _write(os.path.join(out, "mesh_info.json"), json.dumps(info, indent=2, default=str) + "\n")
    return []


def cmd_probe(cfg, args, out):
    mesh = generate_mesh(cfg.domain, cfg.material, cfg.mesh_size, cfg.refine_inclusions)
    waves = WaveNumbers.from_material(cfg.material)
    pts = mesh.nodes[mesh.boundary_nodes]
    lines = ["cone,N,theta0,d,h,node,x1,x2,re_f1,im_f1,re_f2,im_f2"]
    for name, fr in zip(cfg.cone_names, cfg.cones):
        for d in _levels(cfg, fr, args.d):
            for h in cfg.probe.h_grid:
                val = probe(fr, waves, _base_params(cfg, d, h), pts).value
                for node, (x, y), (f1, f2) in zip(mesh.boundary_nodes, pts, val):
                    lines.append(
                        f"{name},{fr.order},{float(fr.axis)!r},{float(d)!r},{float(h)!r},{node},{float(x)!r},{float(y)!r},"
                        f"{float(f1.real)!r},{float(f1.imag)!r},{float(f2.real)!r},{float(f2.imag)!r}"
                    )
    _write(os.path.join(out, "probe_trace.csv"), "\n".join(lines) + "\n")
    return []


def cmd_indicate(cfg, args, out):
    model = _model(cfg)
    waves = WaveNumbers.from_material(cfg.material)
    rows, below = [CSV_HEADER], []
    samples = []
    for fr in cfg.cones:
        for d in _levels(cfg, fr, args.d):
            for h in cfg.probe.h_grid:
                s = indicator_sample(model, fr, waves, _base_params(cfg), d, h)
                samples.append((fr, s))
                rows.append(sample_row(fr, s))
                below.append(s.absE <= s.floor)
    _write(os.path.join(out, "indicator.csv"), "\n".join(rows) + "\n")
    floors = [{"d": float(s.d), "h": float(s.h), "abs_E": float(s.absE), "floor": float(s.floor)} for _, s in samples]
    _write(os.path.join(out, "indicator_floor.json"), json.dumps({"all_below_floor": bool(all(below)), "samples": floors}, indent=2) + "\n")
    return []


def cmd_sweep(cfg, args, out):
    model = _model(cfg)
    waves = WaveNumbers.from_material(cfg.material)
    res = ResolutionCheck(model, waves, cfg.probe.quad_order) if cfg.probe.resolution_tol is not None else None
    sweeps, summary = [], []
    for idx, fr in enumerate(cfg.cones):
        for d in _levels(cfg, fr, args.d):
            sw = h_sweep(
                model, fr, waves, _base_params(cfg), d, cfg.probe.h_grid, key=idx, jobs=args.jobs,
                resolution=res, resolution_tol=cfg.probe.resolution_tol, **_sweep_kw(cfg),
            )
            sweeps.append(sw)
            item = {
                "cone": cfg.cone_names[idx], "d": sw.d, "inv_d": 1 / sw.d, "slope": sw.slope,
                "raw_slope": sw.raw_slope, "classification": sw.classification, "flags": sw.flags,
            }
            if args.s_star is not None:
                item["rate_check"] = slope_rate_check(sw, args.s_star, cfg.probe.eps_band)
            summary.append(item)
    _write(os.path.join(out, "sweep.csv"), CSV_HEADER + "\n" + "".join(r + "\n" for r in sweep_rows(sweeps)))
    _write(os.path.join(out, "sweep_summary.json"), json.dumps(summary, indent=2) + "\n")
    return []


def cmd_reconstruct(cfg, args, out):
    model = _model(cfg)
    waves = WaveNumbers.from_material(cfg.material)
    res = ResolutionCheck(model, waves, cfg.probe.quad_order) if cfg.probe.resolution_tol is not None else None
    truth = None
    if args.oracle:
        truth = [max([sup_tau(fr, s) for s in cfg.material.inclusions] or [0.0]) for fr in cfg.cones]
    ranges = [cfg.d_range(fr) for fr in cfg.cones]
    rec = trace_boundary(
        model, cfg.cones, waves, _base_params(cfg), ranges, cfg.probe.bisection_tol, cfg.probe.h_grid,
        jobs=args.jobs, s_star_true=truth, resolution=res, resolution_tol=cfg.probe.resolution_tol, **_sweep_kw(cfg),
    )
    doc = reconstruction_json(rec)
    if truth is not None:
        for item, t in zip(doc["directions"], truth):
            item["s_star_oracle"] = t
    _write(os.path.join(out, "reconstruction.json"), json.dumps(doc, indent=1) + "\n")
    sweeps = [sw for est in rec.estimates if est is not None for sw in est.sweeps]
    _write(os.path.join(out, "sweeps.csv"), CSV_HEADER + "\n" + "".join(r + "\n" for r in sweep_rows(sweeps)))
    if args.plot or cfg.plot:
        write_svg(os.path.join(out, "reconstruction.svg"), cfg.domain, cfg.material, rec)
    return [
        {"stage": "reconstruct", "cone": name, "error": err}
        for name, err in zip(cfg.cone_names, rec.errors)
        if err is not None
    ]


def cmd_validate(cfg, args, out):
    results = _validate.run_all(cfg, seed=cfg.seed)
    report = {"suites": [r.as_dict() for r in results], "passed": all(r.passed for r in results)}
    _write(os.path.join(out, "validation_report.json"), json.dumps(report, indent=2) + "\n")
    for r in results:
        print(r.line())
    return [{"stage": "validate", "suite": r.name, "error": "suite failed", "measured": r.as_dict()["measured"]} for r in results if not r.passed]


COMMANDS = {
    "mesh": (cmd_mesh, "generate the mesh and write mesh.txt"),
    "probe": (cmd_probe, "write probe traces on the boundary nodes"),
    "indicate": (cmd_indicate, "evaluate the indicator over the h-grid"),
    "sweep": (cmd_sweep, "classify h-sweeps at several levels"),
    "reconstruct": (cmd_reconstruct, "estimate s_* per cone and the carve-out"),
    "validate": (cmd_validate, "run the property suites"),
}


def build_parser():
    epilog = "configuration keys (INI):\n" + describe_defaults()
    parser = argparse.ArgumentParser(
        prog="enclosure",
        description="Enclosure-method reconstruction of elastic inclusions.",
        epilog=epilog,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, text) in COMMANDS.items():
        p = sub.add_parser(name, help=text, description=text, epilog=epilog, formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("--config", required=True, help="INI configuration file")
        p.add_argument("--out", help="output directory (overrides output.directory)")
        p.add_argument("--plot", action="store_true", help="write SVG plots")
        p.add_argument("--jobs", type=int, default=1, help="worker threads (default 1)")
        p.add_argument("--seed", type=int, help="noise seed (overrides noise.seed)")
        p.add_argument("--noise", type=float, help="noise level (overrides noise.level)")
        if name in ("probe", "indicate", "sweep"):
            p.add_argument("--d", type=float, action="append", help="level d (repeatable); default 5 levels across the range")
        if name == "sweep":
            p.add_argument("--s-star", type=float, help="known s_* for rate checks")
        if name == "reconstruct":
            p.add_argument("--oracle", action="store_true", help="add sup-tau oracle values and rate checks")
    return parser


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    kw = {}
    if args.out:
        kw["out_dir"] = args.out
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed: must be nonnegative")
        kw["seed"] = args.seed
    if args.noise is not None:
        if not 0 <= args.noise < 1:
            raise ConfigError("--noise: must lie in [0, 1)")
        kw["noise_level"] = args.noise
    if args.jobs < 1:
        raise ConfigError("--jobs: must be at least 1")
    return replace(cfg, **kw)


def _fail(failures, code):
    json.dump({"failures": failures}, sys.stderr, indent=1)
    sys.stderr.write("\n")
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _apply_overrides(parse_config(args.config), args)
    except ConfigError as exc:
        return _fail([{"stage": "config", "error": str(exc)}], EXIT_CONFIG)
    os.makedirs(cfg.out_dir, exist_ok=True)
    _write(os.path.join(cfg.out_dir, "resolved_config.ini"), emit_config(cfg))
    fn = COMMANDS[args.command][0]
    try:
        failures = fn(cfg, args, cfg.out_dir)
    except Failure as exc:
        failures = [exc.record]
    except (GeometryError, RangeError, EigenvalueError, ValueError) as exc:
        failures = [{"stage": args.command, "error": str(exc)}]
    if failures:
        return _fail(failures, EXIT_FAILURE)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
