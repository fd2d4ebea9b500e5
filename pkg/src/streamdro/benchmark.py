"""Repetition harness for the portfolio benchmark: metric rows, manifest, plot data."""
from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .clustering import ClusteringConfig
from .portfolio import (PortfolioConfig, build_cvar_problem, cvar_ambiguity, empirical_confidence,
                        evaluate_out_of_sample, generate_returns, split_decision, tau_minimized_cvar)
from .radius import RadiusSchedule
from .stream import StreamPolicy, run_stream

log = logging.getLogger(__name__)

TIME_COLUMNS = ("cluster_time", "solve_time", "step_time")
COLUMNS = ("rep", "method", "t", "n_t", "K_t", "solved", "status", "carried", "nodes", "eps", "value",
           "certificate", "oos", "oos_cvar", "val", "W1", "W2", "D2", "Phi", "MW1", "delta",
           "psi_under", "psi_over") + TIME_COLUMNS

SCALES = {
    "desk": dict(d=10, gamma=3, K=10, T=500, solve_every=25, repetitions=10, n0=5, N_val=200,
                 N_test=200, omega=0.2, orientation=-1.0),
    "paper": dict(d=50, gamma=8, K=25, T=2000, solve_every=100, repetitions=30, n0=5, N_val=200,
                  N_test=200, omega=0.2, orientation=-1.0),
}


@dataclass
class BenchmarkConfig:
    portfolio: PortfolioConfig = field(default_factory=PortfolioConfig)
    schedule: RadiusSchedule = field(default_factory=RadiusSchedule)
    clustering: dict = field(default_factory=lambda: {"compressed": ClusteringConfig("reclustering", K=10)})
    methods: tuple = ("compressed", "full_dro", "saa")
    seed: int = 0
    diagnostics: bool = True
    drift_threshold: float | None = None
    batch_size: int = 1

    @classmethod
    def for_scale(cls, scale: str = "desk", **overrides) -> BenchmarkConfig:
        if scale not in SCALES:
            raise ValueError(f"unknown scale {scale!r}")
        pc = PortfolioConfig(**SCALES[scale])
        cfg = cls(portfolio=pc, clustering={"compressed": ClusteringConfig("reclustering", K=pc.K)})
        return apply_overrides(cfg, overrides)


def _build(cls, values: dict, section: str):
    unknown = set(values) - {f.name for f in dataclasses.fields(cls)}
    if unknown:
        raise ValueError(f"unknown {section} keys: {sorted(unknown)}")
    return cls(**values)


def apply_overrides(cfg: BenchmarkConfig, data: dict) -> BenchmarkConfig:
    """Merge a nested dict (as read from YAML) into a config."""
    data = dict(data or {})
    if "portfolio" in data:
        pc = dataclasses.asdict(cfg.portfolio)
        pover = data.pop("portfolio")
        if "d" in pover and pover["d"] != cfg.portfolio.d:
            # per-asset arrays belong to the old dimension; regenerate unless given
            for key in ("xi", "sigma", "mu", "correlation"):
                pc[key] = None
        pc.update(pover)
        cfg = dataclasses.replace(cfg, portfolio=_build(PortfolioConfig, pc, "portfolio"))
        if "K" in pover and "clustering" not in data:
            cfg = dataclasses.replace(cfg, clustering={k: dataclasses.replace(v, K=cfg.portfolio.K)
                                                       for k, v in cfg.clustering.items()})
    if isinstance(data.get("schedule"), RadiusSchedule):
        cfg = dataclasses.replace(cfg, schedule=data.pop("schedule"))
    elif "schedule" in data:
        sc = dataclasses.asdict(cfg.schedule)
        sc.update(data.pop("schedule"))
        cfg = dataclasses.replace(cfg, schedule=_build(RadiusSchedule, sc, "schedule"))
    if "clustering" in data:
        cl = data.pop("clustering")
        if "algorithm" in cl or "K" in cl:
            cl = {"compressed": cl}
        cfg = dataclasses.replace(cfg, clustering={k: v if isinstance(v, ClusteringConfig)
                                                   else _build(ClusteringConfig, v, "clustering") for k, v in cl.items()})
    if "methods" in data:
        data["methods"] = tuple(data["methods"])
    unknown = set(data) - {f.name for f in dataclasses.fields(cfg)}
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return dataclasses.replace(cfg, **data)


def rep_data(pc: PortfolioConfig, seed: int, rep: int):
    """Training stream, validation and test sets for one repetition."""
    stream = generate_returns(pc, [seed, rep, 0], pc.n0 + pc.T)
    val = generate_returns(pc, [seed, rep, 1], pc.N_val)
    test = generate_returns(pc, [seed, rep, 2], pc.N_test)
    return stream, val, test


def run_repetition(cfg: BenchmarkConfig, rep: int) -> list[dict]:
    pc = cfg.portfolio
    stream, val, test = rep_data(pc, cfg.seed, rep)
    problem = build_cvar_problem(pc, init_data=stream[:pc.n0])
    policy = StreamPolicy(horizon=pc.T, n0=pc.n0, batch_size=cfg.batch_size, solve_every=pc.solve_every,
                          drift_threshold=cfg.drift_threshold)

    def evaluator(method, t, z, report):
        x, tau = split_decision(z)
        return {"oos": evaluate_out_of_sample(x, tau, test, pc.omega),
                "oos_cvar": tau_minimized_cvar(x, test, pc.omega),
                "val": evaluate_out_of_sample(x, tau, val, pc.omega)}

    clustering = {k: v for k, v in cfg.clustering.items()} if "compressed" in cfg.methods else None
    result = run_stream(stream, clustering, cvar_ambiguity(cfg.schedule), problem, policy,
                        methods=cfg.methods, evaluator=evaluator, diagnostics=cfg.diagnostics)
    rows = []
    for method, recs in result.records.items():
        for r in recs:
            row = {"rep": rep, "method": method, "t": r.t, "n_t": r.n_t, "K_t": r.K_t,
                   "solved": int(r.solved), "status": r.status, "carried": int(r.carried),
                   "nodes": r.report.nodes if r.report is not None else 0, "eps": r.eps,
                   "value": r.value, "certificate": r.certificate,
                   "cluster_time": r.cluster_time, "solve_time": r.solve_time, "step_time": r.step_time}
            for key in ("oos", "oos_cvar", "val"):
                row[key] = r.metrics.get(key, math.nan)
            for key in ("W1", "W2", "D2", "Phi", "MW1", "delta", "psi_under", "psi_over"):
                row[key] = r.diagnostics.get(key, math.nan)
            rows.append(row)
    return rows


def run_benchmark(cfg: BenchmarkConfig, reps: int | None = None) -> list[dict]:
    reps = cfg.portfolio.repetitions if reps is None else reps
    rows = []
    for rep in range(reps):
        t0 = time.perf_counter()
        rows.extend(run_repetition(cfg, rep))
        log.info("repetition %d done in %.1fs", rep, time.perf_counter() - t0)
    return rows


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_metrics(rows: list[dict], path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(COLUMNS)
        for row in rows:
            w.writerow([_fmt(row.get(c, math.nan)) for c in COLUMNS])


def read_metrics(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for row in rows:
        conv = {}
        for k, v in row.items():
            if k in ("method", "status"):
                conv[k] = v
            elif k in ("rep", "t", "n_t", "K_t", "solved", "carried", "nodes"):
                conv[k] = int(v)
            else:
                conv[k] = float(v)
        out.append(conv)
    return out


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if dataclasses.is_dataclass(obj):
        return {k: _jsonable(v) for k, v in dataclasses.asdict(obj).items()}
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def write_manifest(cfg: BenchmarkConfig, path: Path, extra: dict | None = None) -> None:
    reps = cfg.portfolio.repetitions
    manifest = {
        "config": _jsonable(cfg),
        "seeds": {"base": cfg.seed, "repetitions": list(range(reps)),
                  "streams": "default_rng([base, rep, k]) with k = 0 train, 1 validation, 2 test"},
        "schedule": cfg.schedule.label(),
    }
    if extra:
        manifest.update(_jsonable(extra))
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True))


def solved_matrix(rows: list[dict], method: str, key: str):
    """``(reps, solve steps)`` array of ``key`` and the step grid."""
    sel = [r for r in rows if r["method"] == method and r["solved"]]
    reps = sorted({r["rep"] for r in sel})
    ts = sorted({r["t"] for r in sel})
    M = np.full((len(reps), len(ts)), np.nan)
    ri = {r: i for i, r in enumerate(reps)}
    ti = {t: i for i, t in enumerate(ts)}
    for r in sel:
        M[ri[r["rep"]], ti[r["t"]]] = r[key]
    return M, np.array(ts)


def confidence_series(rows: list[dict], method: str):
    C, ts = solved_matrix(rows, method, "certificate")
    O, _ = solved_matrix(rows, method, "oos")
    return empirical_confidence(C, O), ts


PLOT_QUANTITIES = ("certificate", "oos", "oos_cvar", "value", "solve_time", "step_time", "W1", "W2",
                   "D2", "Phi", "K_t")


def write_report(rows: list[dict], out_dir: Path) -> list[Path]:
    """Mean and 25th / 75th percentiles across repetitions, per method and solve step."""
    out_dir = Path(out_dir) / "plotdata"
    out_dir.mkdir(parents=True, exist_ok=True)
    methods = sorted({r["method"] for r in rows})
    written = []
    for q in PLOT_QUANTITIES:
        path = out_dir / f"{q}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["method", "t", "mean", "p25", "p75"])
            for m in methods:
                M, ts = solved_matrix(rows, m, q)
                if np.all(np.isnan(M)):
                    continue
                for j, t in enumerate(ts):
                    col = M[:, j][np.isfinite(M[:, j])]
                    if col.size == 0:
                        continue
                    w.writerow([m, int(t), repr(float(col.mean())), repr(float(np.percentile(col, 25))),
                                repr(float(np.percentile(col, 75)))])
        written.append(path)
    path = out_dir / "confidence.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "t", "confidence"])
        for m in methods:
            conf, ts = confidence_series(rows, m)
            for t, c in zip(ts, conf):
                w.writerow([m, int(t), repr(float(c))])
    written.append(path)
    return written


def summarize(rows: list[dict]) -> dict:
    """Headline numbers used by the acceptance checks and the CLI."""
    out = {}
    methods = sorted({r["method"] for r in rows})
    for m in methods:
        sel = [r for r in rows if r["method"] == m and r["solved"]]
        if not sel:
            continue
        last_t = max(r["t"] for r in sel)
        last = [r for r in sel if r["t"] == last_t]
        conf, ts = confidence_series(rows, m)
        out[m] = {
            "mean_oos": float(np.nanmean([r["oos"] for r in sel])),
            "mean_oos_cvar": float(np.nanmean([r["oos_cvar"] for r in sel])),
            "final_n": int(last[0]["n_t"]),
            "final_solve_time": float(np.mean([r["solve_time"] for r in last])),
            "confidence": dict(zip((int(t) for t in ts), (float(c) for c in conf))),
            "max_psi_over": float(np.nanmax([r["psi_over"] for r in sel])) if m not in ("full_dro", "saa") else 0.0,
        }
    return out
