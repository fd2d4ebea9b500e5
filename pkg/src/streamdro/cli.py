"""Command line entry point: ``streamdro {run, cross-validate, elbow, report}``."""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import yaml

from .benchmark import (BenchmarkConfig, apply_overrides, read_metrics, run_benchmark, summarize,
                        write_manifest, write_metrics, write_report)
from .distributions import read_csv
from .portfolio import generate_returns
from .radius import RadiusSchedule, cross_validate_schedule, default_cv_grid
from .stream import elbow_curve, elbow_select_K

log = logging.getLogger("streamdro")


def _load_config(args) -> BenchmarkConfig:
    overrides = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            overrides = yaml.safe_load(fh) or {}
        if not isinstance(overrides, dict):
            raise ValueError("config file must hold a mapping")
    scale = overrides.pop("scale", None) or args.scale
    cfg = BenchmarkConfig.for_scale(scale)
    cfg = apply_overrides(cfg, overrides)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if getattr(args, "methods", None):
        cfg = dataclasses.replace(cfg, methods=tuple(args.methods.split(",")))
    if getattr(args, "reps", None):
        cfg = dataclasses.replace(cfg, portfolio=dataclasses.replace(cfg.portfolio, repetitions=args.reps))
    return cfg


def _parse_grid(text: str) -> list[int]:
    if ".." in text:
        lo, hi = text.split("..")
        return list(range(int(lo), int(hi) + 1))
    return [int(v) for v in text.split(",")]


def cmd_run(args) -> int:
    cfg = _load_config(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = run_benchmark(cfg)
    write_metrics(rows, out / "metrics.csv")
    write_manifest(cfg, out / "manifest.json", {"summary": summarize(rows)})
    write_report(rows, out)
    print(f"wrote {len(rows)} rows to {out / 'metrics.csv'}")
    return 0


def cmd_cross_validate(args) -> int:
    cfg = _load_config(args)
    cands = default_cv_grid()
    if args.grid:
        cands = [RadiusSchedule("power_law", c=float(c), exponent=float(e))
                 for c, e in (pair.split(":") for pair in args.grid.split(","))]
    method = "compressed" if "compressed" in cfg.methods else cfg.methods[0]

    def runner(schedule):
        run_cfg = dataclasses.replace(cfg, schedule=schedule, methods=(method,), diagnostics=False)
        return run_benchmark(run_cfg)

    def evaluator(rows):
        return [r["val"] for r in rows if r["solved"] and r["val"] == r["val"]]

    best, scores = cross_validate_schedule(cands, runner, evaluator)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = {"chosen": dataclasses.asdict(best), "label": best.label(),
              "scores": {c.label(): s for c, s in zip(cands, scores)}}
    (out / "cross_validation.json").write_text(json.dumps(result, indent=2))
    print(f"chosen schedule: {best.label()}")
    return 0


def cmd_elbow(args) -> int:
    grid = _parse_grid(args.grid)
    if args.data:
        data = read_csv(args.data).atoms
    else:
        cfg = _load_config(args)
        data = generate_returns(cfg.portfolio, [cfg.seed, 0, 0], max(cfg.portfolio.n0, max(grid)) * 10)
    curve = elbow_curve(data, grid)
    K = elbow_select_K(data, grid, frac=args.frac)
    for k, v in zip(grid, curve):
        print(f"K={k:3d}  D2^2={v:.6g}")
    print(f"K={K}")
    return 0


def cmd_report(args) -> int:
    rows = read_metrics(Path(args.metrics))
    out = Path(args.out_dir)
    paths = write_report(rows, out)
    print(json.dumps(summarize(rows), indent=2))
    for p in paths:
        print(f"wrote {p}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="streamdro")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="YAML file with config overrides")
        p.add_argument("--seed", type=int)
        p.add_argument("--scale", choices=("desk", "paper"), default="desk")
        p.add_argument("--methods", help="comma-separated subset of compressed,full_dro,saa")
        p.add_argument("--reps", type=int, help="override the repetition count")
        p.add_argument("--out-dir", default="results")

    p = sub.add_parser("run", help="run the portfolio benchmark")
    common(p)
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("cross-validate", help="choose a power-law radius on validation data")
    common(p)
    p.add_argument("--grid", help="comma-separated c:e pairs (default: built-in grid)")
    p.set_defaults(func=cmd_cross_validate)
    p = sub.add_parser("elbow", help="pick K by the elbow rule")
    common(p)
    p.add_argument("--grid", default="1..10")
    p.add_argument("--data", help="CSV of datapoints (default: synthetic returns)")
    p.add_argument("--frac", type=float, default=0.1)
    p.set_defaults(func=cmd_elbow)
    p = sub.add_parser("report", help="aggregate a metrics file into plot data")
    p.add_argument("--metrics", required=True)
    p.add_argument("--out-dir", default="results")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, RuntimeError, OSError, yaml.YAMLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
