"""Sequential decide / observe / update loop over a data stream."""
from __future__ import annotations

import dataclasses
import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import numpy as np

from .bounds import CertificateError, certificate, compute_bound_inputs, psi_over, psi_under
from .clustering import ClusteringConfig, kmeans, make_clusterer
from .conic import SolverConfig
from .distributions import EmpiricalDistribution
from .dro import (AmbiguitySpec, BranchAndBoundConfig, DecisionSpec, lipschitz_constants,
                  solve_compressed_dro, solve_full_dro, solve_saa)
from .radius import radius_at
from .support import ConfigurationError, SupportSet

log = logging.getLogger(__name__)

BASELINES = ("full_dro", "saa")


@dataclass
class StreamPolicy:
    horizon: int
    n0: int = 5
    batch_size: int = 1
    solve_every: int = 25
    drift_threshold: float | None = None

    def __post_init__(self):
        if self.horizon < 1 or self.solve_every < 1 or self.batch_size < 1 or self.n0 < 1:
            raise ConfigurationError("horizon, solve_every, batch_size and n0 must be positive")
        if self.drift_threshold is not None and self.drift_threshold < 0:
            raise ConfigurationError("drift threshold must be nonnegative")

    def scheduled(self, t: int) -> bool:
        return t % self.solve_every == 0 or t == self.horizon


@dataclass
class ProblemSpec:
    pieces: list
    decision: DecisionSpec
    support: SupportSet = field(default_factory=SupportSet.full)
    lipschitz: np.ndarray | None = None  # overrides the automatic constants
    name: str = "problem"


@dataclass
class StepRecord:
    method: str
    t: int
    n_t: int
    K_t: int
    solved: bool
    eps: float = np.nan
    report: object | None = None
    status: str = ""
    value: float = np.nan
    x: np.ndarray | None = None
    carried: bool = False
    certificate: float = np.nan
    diagnostics: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    cluster_time: float = 0.0
    solve_time: float = 0.0

    @property
    def step_time(self) -> float:
        return self.cluster_time + self.solve_time


@dataclass
class StreamResult:
    records: dict[str, list[StepRecord]]
    truncated: bool = False
    peak_retained: int = 0
    clusterers: dict = field(default_factory=dict)

    def solved(self, method: str) -> list[StepRecord]:
        return [r for r in self.records[method] if r.solved]


def _batches(source):
    if isinstance(source, np.ndarray):
        return iter(np.atleast_2d(source))
    return iter(source)


def _take(it, count: int) -> np.ndarray:
    rows = []
    for _ in range(count):
        try:
            rows.append(np.asarray(next(it), dtype=float))
        except StopIteration:
            break
    return np.array(rows)


def run_stream(source: Iterable, clustering: ClusteringConfig | Mapping[str, ClusteringConfig] | None,
               ambiguity: AmbiguitySpec, problem: ProblemSpec, policy: StreamPolicy,
               methods: Iterable[str] = ("compressed", "full_dro", "saa"),
               evaluator: Callable | None = None, diagnostics: bool = True,
               solver: SolverConfig | None = None, bnb: BranchAndBoundConfig | None = None) -> StreamResult:
    """Run one repetition.

    ``source`` yields one datapoint per item. ``clustering`` is a single
    config (method name ``"compressed"``) or a mapping from method name to
    config. ``evaluator(method, t, x, report)`` returns extra metrics for
    every solve. Diagnostics need the raw history and are skipped otherwise.
    """
    if ambiguity.schedule is None:
        raise ConfigurationError("ambiguity spec has no radius schedule")
    methods = list(methods)
    compressed: dict[str, ClusteringConfig] = {}
    if "compressed" in methods:
        if clustering is None:
            raise ConfigurationError("compressed method needs a clustering config")
        if isinstance(clustering, ClusteringConfig):
            compressed["compressed"] = clustering
        else:
            compressed.update(clustering)
    for m in methods:
        if m not in BASELINES and m != "compressed":
            raise ConfigurationError(f"unknown method {m!r}")
    baselines = [m for m in methods if m in BASELINES]
    keep_history = diagnostics or bool(baselines)
    solver = solver or SolverConfig()

    it = _batches(source)
    init = _take(it, policy.n0)
    if init.shape[0] < policy.n0:
        raise ValueError("source yields fewer than n0 points")
    history = EmpiricalDistribution(init) if keep_history else None

    clusterers = {}
    for name, cfg in compressed.items():
        if diagnostics and not cfg.track_labels:
            cfg = dataclasses.replace(cfg, track_labels=True)
        c = make_clusterer(cfg, problem.support, horizon=policy.horizon)
        c.initialize(init)
        clusterers[name] = c

    M = problem.lipschitz
    if M is None:
        M = lipschitz_constants(problem.pieces, problem.decision, ambiguity.norm)
    M = np.asarray(M, dtype=float)

    def retained(batch_rows: int) -> int:
        n = batch_rows + (history.n if history is not None else 0)
        return n + sum(c.retained_points for c in clusterers.values())

    peak = retained(0) if keep_history else init.shape[0]
    names = list(clusterers) + baselines
    records = {m: [] for m in names}
    last = {m: None for m in names}  # (x, certificate) of the last successful solve
    prev_means = {name: None for name in clusterers}
    n_t = policy.n0
    truncated = False

    for t in range(1, policy.horizon + 1):
        batch = _take(it, policy.batch_size)
        if batch.shape[0] == 0:
            truncated = True
            log.warning("source exhausted at step %d of %d", t, policy.horizon)
            break
        n_t += batch.shape[0]
        peak = max(peak, retained(batch.shape[0]))
        if history is not None:
            history.extend(batch)

        ctime = {}
        for name, c in clusterers.items():
            t0 = time.perf_counter()
            c.update(batch, t)
            ctime[name] = time.perf_counter() - t0
        peak = max(peak, retained(0))

        solve_now = policy.scheduled(t)
        if not solve_now and policy.drift_threshold is not None:
            for name, c in clusterers.items():
                prev = prev_means[name]
                means = c.distribution.means
                if prev is None or prev.shape != means.shape or \
                        np.max(np.abs(means - prev)) >= policy.drift_threshold:
                    solve_now = True
                    break

        eps = radius_at(ambiguity.schedule, t, n_t)
        for name in names:
            clus = clusterers.get(name)
            K_t = clus.distribution.K if clus is not None else n_t
            rec = StepRecord(method=name, t=t, n_t=n_t, K_t=K_t, solved=solve_now,
                             cluster_time=ctime.get(name, 0.0))
            if solve_now:
                rec.eps = eps
                _solve_step(rec, name, clus, history, problem, ambiguity, eps, M, solver, bnb,
                            diagnostics, last)
                if evaluator is not None and rec.x is not None:
                    rec.metrics.update(evaluator(name, t, rec.x, rec.report))
            elif last[name] is not None:
                rec.x = last[name][0]
            records[name].append(rec)
        if solve_now:
            for name, c in clusterers.items():
                prev_means[name] = c.distribution.means.copy()

    return StreamResult(records, truncated, peak, clusterers)


def _solve_step(rec, name, clus, history, problem, ambiguity, eps, M, solver, bnb, diagnostics, last):
    t0 = time.perf_counter()
    if clus is not None:
        dist = clus.distribution
        report = solve_compressed_dro(problem.pieces, problem.support, ambiguity, dist, eps,
                                      problem.decision, solver, bnb)
    elif name == "full_dro":
        report = solve_full_dro(history, problem.pieces, problem.support, ambiguity, eps,
                                problem.decision, solver, bnb)
    else:
        report = solve_saa(history, problem.pieces, problem.decision, solver, bnb)
    rec.solve_time = time.perf_counter() - t0
    rec.report, rec.status = report, report.status
    if not report.ok:
        log.warning("%s solve at t=%d failed (%s); carrying previous decision", name, rec.t, report.status)
        if last[name] is not None:
            rec.x, rec.certificate = last[name]
            rec.carried = True
        return
    rec.value, rec.x = report.value, report.x
    if clus is None:
        rec.certificate = certificate(report)
        rec.diagnostics = {"psi_under": 0.0, "psi_over": 0.0}
    elif diagnostics:
        inputs = compute_bound_inputs(report, problem.pieces, dist, history, clus.labels(),
                                      problem.support, M=M)
        pu, po = psi_under(inputs), psi_over(inputs)
        rec.certificate = report.value + pu
        rec.diagnostics = {"W1": inputs.W1, "W2": inputs.W2, "D2": inputs.D2, "Phi": inputs.Phi,
                           "delta": inputs.delta, "psi_under": pu, "psi_over": po,
                           "MW1": float(np.max(M)) * inputs.W1}
    else:
        try:
            rec.certificate = certificate(report, None)
        except CertificateError:
            rec.certificate = np.nan
    last[name] = (rec.x, rec.certificate)


def elbow_curve(data, K_grid, seed: int = 0) -> np.ndarray:
    """``(D^K_2)^2`` for each ``K`` (k-means objective divided by ``n``)."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    return np.array([kmeans(data, int(K), seed=seed).objective / data.shape[0] for K in K_grid])


def elbow_select_K(initial_data, K_grid, frac: float = 0.1, seed: int = 0, zero_tol: float = 1e-12) -> int:
    """Knee of the clustering-value curve.

    The smallest ``K`` whose value is numerically zero wins outright. Otherwise
    the first ``K`` after which the next decrease is below ``frac`` times the
    decrease that led into it; the last grid value if no such knee exists.
    """
    K_grid = [int(k) for k in K_grid]
    if not K_grid:
        raise ValueError("K grid is empty")
    data = np.atleast_2d(np.asarray(initial_data, dtype=float))
    if data.shape[0] < max(K_grid):
        raise ValueError("need at least max(K_grid) datapoints")
    curve = elbow_curve(data, K_grid, seed)
    scale = max(float(np.mean(np.sum((data - data.mean(0)) ** 2, axis=1))), 1e-300)
    for K, v in zip(K_grid, curve):
        if v <= zero_tol * scale or v <= 1e-300:
            return K
    drops = -np.diff(curve)
    for i in range(1, len(drops)):
        if drops[i] < frac * drops[i - 1]:
            return K_grid[i]
    return K_grid[-1]
