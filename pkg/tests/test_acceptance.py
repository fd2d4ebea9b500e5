"""Acceptance gate. Each criterion records one PASS/FAIL line for the summary."""
import csv
import dataclasses
import itertools
import time

import numpy as np
import pytest

from streamdro.benchmark import (TIME_COLUMNS, BenchmarkConfig, apply_overrides, confidence_series,
                                 run_benchmark, run_repetition, solved_matrix, summarize, write_metrics)
from streamdro.bounds import compute_bound_inputs, psi_over, psi_under
from streamdro.clustering import ClusteringConfig, Reclustering, kmeans
from streamdro.conic import SolverConfig
from streamdro.distributions import ClusteredDistribution
from streamdro.dro import (NORMS, AffinePiece, AmbiguitySpec, DecisionSpec, dual_norm, solve_compressed_dro,
                           solve_dro, solve_full_dro)
from streamdro.portfolio import cvar_pieces
from streamdro.radius import RadiusSchedule, cross_validate_schedule, default_cv_grid
from streamdro.support import SupportSet
from streamdro.transport import DiscreteMeasure, wasserstein_p

from conftest import record

pytestmark = pytest.mark.acceptance

TIGHT = SolverConfig(tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10)
FULL = SupportSet.full()
L2 = AmbiguitySpec(1, "l2")


def cvar_decision(d, gamma=None, upper=None):
    hi = np.r_[np.ones(d), 1.0] if upper is None else upper
    return DecisionSpec(np.r_[np.zeros(d), -1.0], hi, A_eq=np.r_[np.ones(d), 0.0][None, :], b_eq=[1.0],
                        cardinality=gamma, card_indices=np.arange(d) if gamma else None)


def returns(rng, n, d):
    # two regimes so that clustering is not trivial
    return rng.normal(0.005, 0.04, size=(n, d)) + rng.choice([-0.03, 0.03], size=(n, 1))


# ------------------------------------------------------------------ 1

def test_criterion_1_exact_collapse():
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(20):
        rng = np.random.default_rng([1, seed])
        d, n = 5, 30
        data = returns(rng, n, d)
        rc = Reclustering(ClusteringConfig("reclustering", K=n + int(rng.integers(0, 5))))
        rc.initialize(data)
        eps = float(rng.uniform(0.001, 0.05))
        pieces = cvar_pieces(d, 0.2)
        comp = solve_compressed_dro(pieces, FULL, L2, rc.distribution, eps, cvar_decision(d))
        full = solve_full_dro(data, pieces, FULL, L2, eps, cvar_decision(d))
        worst = max(worst, abs(comp.value - full.value) / max(abs(full.value), 1e-12))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-6 and elapsed < 120
    record("1", ok, f"max rel diff {worst:.2e} (tol 1e-6), {elapsed:.1f}s (budget 120s)")
    assert ok


# ------------------------------------------------------------------ 2

def test_criterion_2_sandwich():
    fails = []
    for seed in range(50):
        rng = np.random.default_rng([2, seed])
        d, K = 5, 5
        n = int(rng.integers(K, 51))
        data = returns(rng, n, d)
        res = kmeans(data, K, seed=seed)
        clustered = ClusteredDistribution.from_labels(data, res.labels)
        eps = float(rng.uniform(0.001, 0.05))
        pieces = cvar_pieces(d, 0.2)
        M = np.array([0.0, np.sqrt(d) / 0.2])
        full = solve_full_dro(data, pieces, FULL, L2, eps, cvar_decision(d))
        comp = solve_compressed_dro(pieces, FULL, L2, clustered, eps, cvar_decision(d))
        b = compute_bound_inputs(comp, pieces, clustered, data, res.labels, FULL, M)
        lo, hi = full.value - psi_under(b), full.value + psi_over(b)
        if not (lo <= comp.value + 1e-6 and comp.value <= hi + 1e-6):
            fails.append(seed)
    record("2", not fails, f"{50 - len(fails)}/50 instances satisfy H - psi_under <= H^K <= H + psi_over")
    assert not fails


# ------------------------------------------------------------------ 3

def test_criterion_3_concave_specialization():
    worst = np.inf
    for seed in range(20):
        rng = np.random.default_rng([3, seed])
        d, n = 3, 25
        data = rng.normal(size=(n, d))
        clustered = ClusteredDistribution.from_labels(data, kmeans(data, 4, seed=seed).labels)
        piece = [AffinePiece(rng.normal(size=(d, 2)), rng.normal(size=d), rng.normal(size=2), rng.normal())]
        dec = DecisionSpec(-np.ones(2), np.ones(2))
        eps = float(rng.uniform(0, 0.3))
        full = solve_full_dro(data, piece, FULL, L2, eps, dec, TIGHT)
        comp = solve_compressed_dro(piece, FULL, L2, clustered, eps, dec, TIGHT)
        worst = min(worst, comp.value - full.value)
    ok = worst >= -1e-8
    record("3", ok, f"min (H^K - H) = {worst:.2e} over 20 instances (tol -1e-8)")
    assert ok


# ------------------------------------------------------------------ 4

def test_criterion_4_affine_oracle():
    worst = 0.0
    for i in range(50):
        rng = np.random.default_rng([4, i])
        norm = NORMS[i % 3]
        d, n, K = int(rng.integers(1, 7)), int(rng.integers(1, 4)), int(rng.integers(1, 9))
        p = AffinePiece(rng.normal(size=(d, n)), rng.normal(size=d), rng.normal(size=n), rng.normal())
        x = rng.uniform(-1, 1, size=n)
        atoms = rng.normal(size=(K, d))
        w = rng.dirichlet(np.ones(K))
        eps = float(rng.uniform(0, 1))
        rep = solve_dro([p], FULL, AmbiguitySpec(1, norm), atoms, w, eps, DecisionSpec(x, x), TIGHT)
        exact = w @ atoms @ p.a(x) + p.b(x) + eps * dual_norm(p.a(x), norm)
        worst = max(worst, abs(rep.value - exact))
    ok = worst <= 1e-8
    record("4", ok, f"max |H - closed form| = {worst:.2e} over 50 instances (tol 1e-8)")
    assert ok


# ------------------------------------------------------------------ 5

def quantile_w1(x, wx, y, wy):
    """Integral of |F^-1 - G^-1| over (0, 1), merging both quantile grids."""
    ox, oy = np.argsort(x), np.argsort(y)
    x, wx, y, wy = x[ox], wx[ox], y[oy], wy[oy]
    levels = np.unique(np.concatenate([[0.0], np.cumsum(wx), np.cumsum(wy)]).clip(0, 1))
    levels[-1] = 1.0
    mids = (levels[:-1] + levels[1:]) / 2
    qx = x[np.minimum(np.searchsorted(np.cumsum(wx), mids), len(x) - 1)]
    qy = y[np.minimum(np.searchsorted(np.cumsum(wy), mids), len(y) - 1)]
    return float(np.sum(np.abs(qx - qy) * np.diff(levels)))


def test_criterion_5_transport():
    worst = 0.0
    for i in range(100):
        rng = np.random.default_rng([5, i])
        m, n = rng.integers(1, 9, size=2)
        P = DiscreteMeasure(rng.normal(size=(m, 1)), rng.dirichlet(np.ones(m)))
        Q = DiscreteMeasure(rng.normal(size=(n, 1)) + 0.5, rng.dirichlet(np.ones(n)))
        oracle = quantile_w1(P.atoms[:, 0], P.weights, Q.atoms[:, 0], Q.weights)
        worst = max(worst, abs(wasserstein_p(P, Q, 1) - oracle))
    axiom_viol = 0.0
    for i in range(100):
        rng = np.random.default_rng([55, i])
        P, Q, R = (DiscreteMeasure(rng.normal(size=(k, 2)), rng.dirichlet(np.ones(k)))
                   for k in rng.integers(1, 7, size=3))
        for p in (1.0, 2.0):
            pq, qp = wasserstein_p(P, Q, p), wasserstein_p(Q, P, p)
            tri = pq - wasserstein_p(P, R, p) - wasserstein_p(R, Q, p)
            axiom_viol = max(axiom_viol, abs(pq - qp), tri, wasserstein_p(P, P, p))
    ok = worst <= 1e-9 and axiom_viol <= 1e-9
    record("5", ok, f"1-D oracle max err {worst:.2e}; worst axiom violation {axiom_viol:.2e} (tol 1e-9)")
    assert ok


# ------------------------------------------------------------------ 6

def test_criterion_6_branch_and_bound():
    worst = 0.0
    for i in range(20):
        rng = np.random.default_rng([6, i])
        d = int(rng.integers(4, 13))
        gamma = int(rng.integers(1, min(4, d)))
        data = returns(rng, int(rng.integers(10, 25)), d)
        pieces = cvar_pieces(d, 0.2)
        eps = float(rng.uniform(0, 0.03))
        rep = solve_full_dro(data, pieces, FULL, L2, eps, cvar_decision(d, gamma), TIGHT)
        best = np.inf
        for supp in itertools.combinations(range(d), gamma):
            hi = np.r_[np.zeros(d), 1.0]
            hi[list(supp)] = 1.0
            best = min(best, solve_full_dro(data, pieces, FULL, L2, eps, cvar_decision(d, upper=hi), TIGHT).value)
        worst = max(worst, abs(rep.value - best))
    ok = worst <= 1e-8
    record("6", ok, f"max |B&B - enumeration| = {worst:.2e} over 20 instances (tol 1e-8)")
    assert ok


# ------------------------------------------------------------------ 7

REFERENCE = RadiusSchedule("power_law", c=0.0025, exponent=1 / 40)


@pytest.fixture(scope="module")
def desk_rows():
    cfg = dataclasses.replace(BenchmarkConfig.for_scale("desk"), schedule=REFERENCE)
    t0 = time.perf_counter()
    rows = run_benchmark(cfg)
    return rows, time.perf_counter() - t0


@pytest.fixture(scope="module")
def desk_cv():
    cfg = BenchmarkConfig.for_scale("desk")
    t0 = time.perf_counter()

    def runner(schedule):
        return run_benchmark(dataclasses.replace(cfg, schedule=schedule, methods=("compressed",),
                                                 diagnostics=False))

    def evaluator(rows):
        return [r["val"] for r in rows if r["solved"]]

    cands = default_cv_grid()
    best, scores = cross_validate_schedule(cands, runner, evaluator)
    return best, dict(zip([c.label() for c in cands], scores)), time.perf_counter() - t0


def _final_solve_times(rows, method):
    T, _ = solved_matrix(rows, method, "solve_time")
    n, _ = solved_matrix(rows, method, "n_t")
    return float(np.mean(T[:, -1])), int(n[0, -1])


def test_criterion_7a_speed(desk_rows):
    rows, _ = desk_rows
    comp, n = _final_solve_times(rows, "compressed")
    full, _ = _final_solve_times(rows, "full_dro")
    ratio = full / comp
    ok = ratio >= 5
    record("7a", ok, f"final solve at n={n}: full {full:.3f}s vs compressed {comp:.4f}s, ratio {ratio:.1f} (need >= 5)")
    assert ok


def test_criterion_7b_out_of_sample(desk_rows):
    rows, _ = desk_rows
    s = summarize(rows)
    c, f = s["compressed"]["mean_oos"], s["full_dro"]["mean_oos"]
    gap = abs(c - f) / abs(f)
    ok = gap <= 0.05
    record("7b", ok, f"mean out-of-sample compressed {c:.5f} vs full {f:.5f}, gap {100 * gap:.2f}% (need <= 5%)")
    assert ok


def test_criterion_7c_confidence(desk_rows):
    rows, _ = desk_rows
    saa, ts = confidence_series(rows, "saa")
    dro = {m: confidence_series(rows, m) for m in ("compressed", "full_dro")}
    saa_ok = bool(np.all(saa < 0.2))
    dro_min = min(float(np.min(c[t >= 100])) for c, t in dro.values())
    dro_ok = dro_min >= 0.7
    ok = saa_ok and dro_ok
    record("7c", ok, f"SAA confidence max {np.max(saa):.2f} (need < 0.2: {'ok' if saa_ok else 'no'}); "
                     f"DRO confidence min for t>=100 {dro_min:.2f} (need >= 0.7: {'ok' if dro_ok else 'no'})")
    assert ok


def test_criterion_7d_psi_over_zero(desk_rows):
    rows, elapsed = desk_rows
    vals = [r["psi_over"] for r in rows if r["method"] == "compressed" and r["solved"]]
    ok = len(vals) > 0 and all(v == 0.0 for v in vals)
    record("7d", ok, f"psi_over == 0 at all {len(vals)} compressed solves; benchmark took {elapsed:.0f}s")
    assert ok


def test_criterion_7_cross_validation(desk_cv, desk_rows):
    best, scores, elapsed = desk_cv
    _, bench_time = desk_rows
    total = elapsed + bench_time
    ok = REFERENCE.label() in scores and total < 1800
    record("7cv", ok, f"cross-validated pick {best.label()} (reference score "
                      f"{scores[REFERENCE.label()]:.5f}, best {scores[best.label()]:.5f}); "
                      f"desk runtime {total:.0f}s (budget 1800s)")
    assert ok


# ------------------------------------------------------------------ 8

def diag_config(T=2000, tau=1700):
    return apply_overrides(BenchmarkConfig.for_scale("desk"), {
        "portfolio": {"T": T}, "methods": ["compressed"], "schedule": dataclasses.asdict(REFERENCE),
        "clustering": {"algorithm": "reclustering", "K": 10, "freeze_time": tau}})


def test_criterion_8_convergence():
    rows = [r for r in run_repetition(diag_config(), 0) if r["solved"]]
    T = max(r["t"] for r in rows)
    window = [r for r in rows if r["t"] >= 0.8 * T]
    changes = {}
    for key in ("W1", "D2", "Phi"):
        v = np.array([r[key] for r in window])
        changes[key] = float((v.max() - v.min()) / abs(v[-1]))
    phi_ok = all(r["Phi"] <= r["MW1"] for r in rows)
    ok = all(c < 0.05 for c in changes.values()) and phi_ok
    detail = ", ".join(f"{k} {100 * v:.2f}%" for k, v in changes.items())
    record("8", ok, f"range over t>={int(0.8 * T)} relative to final: {detail} (need < 5%); "
                    f"Phi <= max M W1 at {sum(r['Phi'] <= r['MW1'] for r in rows)}/{len(rows)} solves")
    assert ok


# ------------------------------------------------------------------ 9

def _strip(path):
    with open(path) as fh:
        return [{k: v for k, v in r.items() if k not in TIME_COLUMNS} for r in csv.DictReader(fh)]


def test_criterion_9_determinism(tmp_path):
    runs = {
        "desk": apply_overrides(BenchmarkConfig.for_scale("desk"), {"portfolio": {"T": 75, "repetitions": 2}}),
        "diag": diag_config(T=150, tau=100),
    }
    same = {}
    for name, cfg in runs.items():
        files = []
        for k in range(2):
            path = tmp_path / f"{name}{k}.csv"
            write_metrics(run_benchmark(cfg), path)
            files.append(_strip(path))
        same[name] = files[0] == files[1] and len(files[0]) > 0
    ok = all(same.values())
    record("9", ok, "identical metrics without time columns: " + ", ".join(f"{k} {v}" for k, v in same.items()))
    assert ok
