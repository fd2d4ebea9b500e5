"""Wasserstein DRO over a weighted reference measure, plus the SAA baseline.

The objective is ``f(u, x) = max_j a_j(x)^T u + b_j(x)`` with ``a_j, b_j``
affine in ``x``. For a reference measure with atoms ``u^k`` and weights
``theta_k`` the worst-case expectation over an order-``r`` Wasserstein ball
of radius ``eps`` is the value of

    min   sum_k theta_k s_k
    s.t.  b_j(x) + sigma_S(y_jk) - z_jk^T u^k + pen(z_jk, lam) + lam eps^r <= s_k
          z_jk - y_jk = -a_j(x)
          x in X

where ``pen`` is ``0`` under ``||z||_* <= lam`` for ``r = 1`` and
``phi(q) lam ||z / lam||_*^q`` otherwise (``q`` the conjugate exponent).
"""
from __future__ import annotations

import heapq
import itertools
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .conic import (INACCURATE, INFEASIBLE, NUMERICAL, OPTIMAL, ConicProgram, ConicSolution,
                    SolverConfig)
from .distributions import ClusteredDistribution, EmpiricalDistribution
from .support import ConfigurationError, SupportSet

log = logging.getLogger(__name__)

NORMS = ("l1", "l2", "linf")
DUAL = {"l1": np.inf, "l2": 2, "linf": 1}


def dual_norm(z, norm: str, axis=-1):
    return np.linalg.norm(z, ord=DUAL[norm], axis=axis)


def phi(q: float) -> float:
    """Coefficient of the conjugate of ``lam * ||.||^r``."""
    return (q - 1.0) ** (q - 1.0) / q ** q


@dataclass
class AffinePiece:
    """``u -> (A x + alpha)^T u + B^T x + beta``; ``A`` is ``d x n``."""

    A: np.ndarray
    alpha: np.ndarray
    B: np.ndarray
    beta: float = 0.0

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.alpha = np.asarray(self.alpha, dtype=float).ravel()
        self.B = np.asarray(self.B, dtype=float).ravel()
        self.beta = float(self.beta)
        d, n = self.A.shape
        if self.alpha.shape != (d,) or self.B.shape != (n,):
            raise ConfigurationError("affine piece dimensions are inconsistent")

    @property
    def d(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    def a(self, x) -> np.ndarray:
        return self.A @ x + self.alpha

    def b(self, x) -> float:
        return float(self.B @ x + self.beta)


def objective_values(pieces, x, U) -> np.ndarray:
    """``f(u, x)`` for every row ``u`` of ``U``."""
    U = np.atleast_2d(U)
    vals = np.column_stack([U @ p.a(x) + p.b(x) for p in pieces])
    return vals.max(axis=1)


@dataclass
class AmbiguitySpec:
    order: float = 1.0
    norm: str = "l2"
    schedule: object | None = None

    def __post_init__(self):
        if not np.isfinite(self.order):
            raise ConfigurationError("order r = inf is not supported")
        if self.order < 1:
            raise ConfigurationError("Wasserstein order must be >= 1")
        if self.norm not in NORMS:
            raise ConfigurationError(f"unsupported norm {self.norm!r}")

    @property
    def q(self) -> float:
        return math.inf if self.order == 1 else self.order / (self.order - 1.0)


@dataclass
class DecisionSpec:
    """``lower <= x <= upper``, ``A_eq x = b_eq``, ``A_ub x <= b_ub``, and an
    optional cardinality limit on ``x[card_indices]``."""

    lower: np.ndarray
    upper: np.ndarray
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    A_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    cardinality: int | None = None
    card_indices: np.ndarray | None = None

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float).ravel()
        self.upper = np.asarray(self.upper, dtype=float).ravel()
        if self.lower.shape != self.upper.shape:
            raise ConfigurationError("decision bounds have different shapes")
        if not (np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper))):
            raise ConfigurationError("decision region must be bounded (finite box required)")
        if np.any(self.lower > self.upper):
            raise ConfigurationError("decision lower bound exceeds upper bound")
        if self.cardinality is not None:
            idx = np.arange(self.n) if self.card_indices is None else np.asarray(self.card_indices)
            self.card_indices = idx.astype(int)
            if np.any(self.lower[idx] > 0) or np.any(self.upper[idx] < 0):
                raise ConfigurationError("cardinality-limited coordinates must allow x_i = 0")

    @property
    def n(self) -> int:
        return self.lower.shape[0]


@dataclass
class BranchAndBoundConfig:
    rel_gap: float = 1e-6
    int_tol: float = 1e-7
    max_nodes: int = 100_000
    rounding: bool = True


@dataclass
class SolveReport:
    value: float
    x: np.ndarray | None
    lam: float
    s: np.ndarray | None
    z: np.ndarray | None  # solver values, shape (J, K, d)
    dual_coeffs: np.ndarray | None  # closed form -a_j(x), shape (J, K, d)
    status: str
    wall_time: float
    nodes: int = 0
    method: str = ""
    eps: float = 0.0
    weights: np.ndarray | None = None
    atoms: np.ndarray | None = None
    notes: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.status in (OPTIMAL, INACCURATE)


# ---------------------------------------------------------------- building

@dataclass
class DecisionIndex:
    x: np.ndarray
    v: np.ndarray | None
    v_ub_rows: np.ndarray | None  # local inequality rows "v_i <= ub"
    v_lb_rows: np.ndarray | None  # local inequality rows "-v_i <= -lb"


def _add_decision(prog: ConicProgram, dec: DecisionSpec) -> DecisionIndex:
    n = dec.n
    x = prog.var("x", n)
    eye = np.arange(n)
    prog.add_le_block(eye, x, np.ones(n), dec.upper, "x<=ub")
    prog.add_le_block(eye, x, -np.ones(n), -dec.lower, "x>=lb")
    if dec.A_eq is not None:
        A = np.atleast_2d(dec.A_eq)
        r, c = np.nonzero(A)
        prog.add_eq_block(r, x[c], A[r, c], np.asarray(dec.b_eq, dtype=float).ravel(), "A_eq")
    if dec.A_ub is not None:
        A = np.atleast_2d(dec.A_ub)
        r, c = np.nonzero(A)
        prog.add_le_block(r, x[c], A[r, c], np.asarray(dec.b_ub, dtype=float).ravel(), "A_ub")
    if dec.cardinality is None:
        return DecisionIndex(x, None, None, None)
    idx = dec.card_indices
    m = idx.shape[0]
    v = prog.var("v", m)
    rows = np.repeat(np.arange(m), 2)
    cols = np.column_stack([x[idx], v]).ravel()
    prog.add_le_block(rows, cols, np.column_stack([np.ones(m), -dec.upper[idx]]).ravel(),
                      np.zeros(m), "x<=U v")
    prog.add_le_block(rows, cols, np.column_stack([-np.ones(m), dec.lower[idx]]).ravel(),
                      np.zeros(m), "x>=L v")
    ub0 = prog.add_le_block(np.arange(m), v, np.ones(m), np.ones(m), "v<=1")
    lb0 = prog.add_le_block(np.arange(m), v, -np.ones(m), np.zeros(m), "v>=0")
    prog.add_le_block(np.zeros(m), v, np.ones(m), [float(dec.cardinality)], "sum v<=gamma")
    return DecisionIndex(x, v, ub0 + np.arange(m), lb0 + np.arange(m))


@dataclass
class DROProgram:
    program: ConicProgram
    decision: DecisionIndex
    lam: int | None
    s: np.ndarray
    z: np.ndarray | None  # (J, K, d) variable indices
    J: int
    K: int


def _norm_rows(prog: ConicProgram, z, head: int, norm: str, tag: str) -> None:
    """``||z||_* <= var[head]``."""
    d = z.shape[0]
    if norm == "l2":
        rows = np.concatenate([[0], np.arange(1, d + 1)])
        prog.add_soc_block(rows, np.concatenate([[head], z]), np.ones(d + 1), np.zeros(d + 1), tag)
    elif norm == "l1":  # dual is l_inf
        rows = np.repeat(np.arange(2 * d), 2)
        cols = np.column_stack([np.concatenate([z, z]), np.full(2 * d, head)]).ravel()
        vals = np.column_stack([np.concatenate([np.ones(d), -np.ones(d)]), -np.ones(2 * d)]).ravel()
        prog.add_le_block(rows, cols, vals, np.zeros(2 * d), tag)
    else:  # dual is l1
        e = prog.var(f"e{tag}", d)
        rows = np.repeat(np.arange(2 * d), 2)
        cols = np.column_stack([np.concatenate([z, z]), np.concatenate([e, e])]).ravel()
        vals = np.column_stack([np.concatenate([np.ones(d), -np.ones(d)]), -np.ones(2 * d)]).ravel()
        prog.add_le_block(rows, cols, vals, np.zeros(2 * d), tag)
        prog.add_le_block(np.zeros(d + 1), np.concatenate([e, [head]]),
                          np.concatenate([np.ones(d), [-1.0]]), [0.0], tag)


def build_reformulation(pieces, support: SupportSet, ambiguity: AmbiguitySpec, atoms, weights,
                        eps: float, decision: DecisionSpec, shared_dual: bool | None = None) -> DROProgram:
    """Conic program for the worst case over the ball around ``sum_k w_k delta_{atoms_k}``.

    With full-space support ``y = 0`` pins every ``z_jk`` to ``-a_j(x)``, so a
    single copy per piece is exact (``shared_dual``, the default there). Pass
    ``shared_dual=False`` for one block of variables per (piece, atom).
    """
    if eps < 0:
        raise ValueError("radius must be nonnegative")
    atoms = np.atleast_2d(np.asarray(atoms, dtype=float))
    weights = np.asarray(weights, dtype=float).ravel()
    K, d = atoms.shape
    if K == 0:
        raise ValueError("reference measure is empty")
    if weights.shape != (K,):
        raise ValueError("weights do not match atoms")
    J = len(pieces)
    for p in pieces:
        if p.d != d or p.n != decision.n:
            raise ConfigurationError("piece dimensions do not match data/decision")
    r = ambiguity.order
    prog = ConicProgram()
    dec = _add_decision(prog, decision)
    x = dec.x
    lam = prog.var("lam", 1)[0]
    s = prog.var("s", K)
    prog.set_cost(s, weights)
    prog.add_le(lam, -1.0, 0.0, "lam>=0")
    eps_r = eps ** r

    if support.kind == "box":
        up_ok = np.isfinite(support.upper)
        lo_ok = np.isfinite(support.lower)
    sparse_A = []
    for p in pieces:
        ri, ci = np.nonzero(p.A)
        sparse_A.append((ri, x[ci], p.A[ri, ci]))
    B_nz = [np.nonzero(p.B)[0] for p in pieces]

    if shared_dual is None:
        shared_dual = support.kind == "full"
    if shared_dual and support.kind != "full":
        raise ConfigurationError("shared dual variables are only exact for full-space support")
    if shared_dual:
        return _build_shared(prog, dec, lam, s, pieces, ambiguity, atoms, eps_r, sparse_A, B_nz)

    z_idx = np.empty((J, K, d), dtype=np.int64)
    for k in range(K):
        uk = atoms[k]
        for j, p in enumerate(pieces):
            tag = f"{j},{k}"
            z = prog.var(f"z{tag}", d)
            z_idx[j, k] = z
            # z - y + A_j x = -alpha_j
            e_rows = [np.arange(d), sparse_A[j][0]]
            e_cols = [z, sparse_A[j][1]]
            e_vals = [np.ones(d), sparse_A[j][2]]
            # b_j(x) + sigma_S(y) - u^T z + w + eps^r lam - s_k <= -beta_j
            i_cols = [x[B_nz[j]], z, [lam, s[k]]]
            i_vals = [p.B[B_nz[j]], -uk, [eps_r, -1.0]]
            if support.kind == "box":
                for sign, ok, bound in ((1.0, up_ok, support.upper), (-1.0, lo_ok, support.lower)):
                    ii = np.nonzero(ok)[0]
                    if ii.size == 0:
                        continue
                    yv = prog.var(f"y{'+' if sign > 0 else '-'}{tag}", ii.size)
                    prog.add_le_block(np.arange(ii.size), yv, -np.ones(ii.size), np.zeros(ii.size), "y>=0")
                    e_rows.append(ii); e_cols.append(yv); e_vals.append(-sign * np.ones(ii.size))
                    i_cols.append(yv); i_vals.append(sign * bound[ii])
            elif support.kind == "polyhedron":
                m = support.G.shape[0]
                mu = prog.var(f"mu{tag}", m)
                prog.add_le_block(np.arange(m), mu, -np.ones(m), np.zeros(m), "mu>=0")
                gr, gc = np.nonzero(support.G)
                # y_i = sum_m G[m, i] mu_m
                e_rows.append(gc); e_cols.append(mu[gr]); e_vals.append(-support.G[gr, gc])
                i_cols.append(mu); i_vals.append(support.h)
            prog.add_eq_block(np.concatenate(e_rows), np.concatenate(e_cols), np.concatenate(e_vals),
                              -p.alpha, f"conj {tag}")
            # w >= phi(q) lam (t / lam)^q  <=>  w^(1/q) lam^(1-1/q) >= phi^(1/q) t
            w = _pen_rows(prog, z, lam, ambiguity, tag)
            if w is not None:
                i_cols.append([w]); i_vals.append([1.0])
            ic = np.concatenate([np.asarray(c, dtype=np.int64) for c in i_cols])
            iv = np.concatenate([np.asarray(v, dtype=float) for v in i_vals])
            prog.add_le_block(np.zeros(ic.shape[0]), ic, iv, [-p.beta], f"epi {tag}")
    return DROProgram(prog, dec, lam, s, z_idx, J, K)


def _pen_rows(prog, z, lam, ambiguity, tag):
    """Norm / power rows for one dual vector; returns the ``w`` index or None."""
    if ambiguity.order == 1:
        _norm_rows(prog, z, lam, ambiguity.norm, tag)
        return None
    q = ambiguity.q
    t = prog.var(f"t{tag}", 1)[0]
    w = prog.var(f"w{tag}", 1)[0]
    _norm_rows(prog, z, t, ambiguity.norm, tag)
    prog.add_pow(1.0 / q, [([w], [1.0], 0.0), ([lam], [1.0], 0.0), ([t], [phi(q) ** (1.0 / q)], 0.0)], tag)
    return w


def _build_shared(prog, dec, lam, s, pieces, ambiguity, atoms, eps_r, sparse_A, B_nz) -> DROProgram:
    K, d = atoms.shape
    J = len(pieces)
    x = dec.x
    z_idx = np.empty((J, K, d), dtype=np.int64)
    for j, p in enumerate(pieces):
        z = prog.var(f"z{j}", d)
        z_idx[j] = z
        prog.add_eq_block(np.concatenate([np.arange(d), sparse_A[j][0]]),
                          np.concatenate([z, sparse_A[j][1]]),
                          np.concatenate([np.ones(d), sparse_A[j][2]]), -p.alpha, f"conj {j}")
        w = _pen_rows(prog, z, lam, ambiguity, str(j))
        # b_j(x) - u_k^T z + w + eps^r lam - s_k <= -beta_j, one row per atom
        nb = B_nz[j].shape[0]
        width = nb + d + 2 + (w is not None)
        rows = np.repeat(np.arange(K), width)
        cols = [np.tile(x[B_nz[j]], (K, 1)), np.tile(z, (K, 1)), np.full((K, 1), lam), s[:, None]]
        vals = [np.tile(p.B[B_nz[j]], (K, 1)), -atoms, np.full((K, 1), eps_r), -np.ones((K, 1))]
        if w is not None:
            cols.append(np.full((K, 1), w)); vals.append(np.ones((K, 1)))
        prog.add_le_block(rows, np.hstack(cols).ravel(), np.hstack(vals).ravel(),
                          np.full(K, -p.beta), f"epi {j}")
    return DROProgram(prog, dec, lam, s, z_idx, J, K)


def _build_saa(pieces, atoms, decision: DecisionSpec) -> DROProgram:
    atoms = np.atleast_2d(np.asarray(atoms, dtype=float))
    N = atoms.shape[0]
    if N == 0:
        raise ValueError("SAA needs at least one datapoint")
    prog = ConicProgram()
    dec = _add_decision(prog, decision)
    s = prog.var("s", N)
    prog.set_cost(s, np.full(N, 1.0 / N))
    n = decision.n
    for p in pieces:
        # (A^T u_i + B)^T x - s_i <= -(alpha^T u_i + beta)
        coef = atoms @ p.A + p.B
        rows = np.repeat(np.arange(N), n + 1)
        cols = np.column_stack([np.tile(dec.x, (N, 1)), s[:, None]]).ravel()
        vals = np.column_stack([coef, -np.ones(N)]).ravel()
        prog.add_le_block(rows, cols, vals, -(atoms @ p.alpha + p.beta), "epi")
    return DROProgram(prog, dec, None, s, None, len(pieces), N)


# ---------------------------------------------------------------- solving

def _implied_v(xv, dec: DecisionSpec):
    idx = dec.card_indices
    scale = np.maximum(np.maximum(np.abs(dec.lower[idx]), np.abs(dec.upper[idx])), 1e-300)
    return np.abs(xv[idx]) / scale


def branch_and_bound(dp: DROProgram, decision: DecisionSpec, solver: SolverConfig | None = None,
                     bnb: BranchAndBoundConfig | None = None) -> tuple[ConicSolution, int, str]:
    """Best-first branch and bound over the cardinality binaries.

    Returns ``(solution, nodes, status)``. Without a cardinality limit this
    is a single relaxation solve.
    """
    solver = solver or SolverConfig()
    bnb = bnb or BranchAndBoundConfig()
    prog = dp.program
    di = dp.decision
    if decision.cardinality is None:
        sol = prog.solve(solver)
        return sol, 1, sol.status
    _, b0, _, _ = prog.compile()
    off = prog.le_offset()
    m = di.v.shape[0]
    gamma = decision.cardinality

    def run(lb, ub):
        b = b0.copy()
        b[off + di.v_ub_rows] = ub
        b[off + di.v_lb_rows] = -lb
        return prog.solve(solver, b_override=b)

    counter = itertools.count()
    root_lb, root_ub = np.zeros(m), np.ones(m)
    root = run(root_lb, root_ub)
    nodes = 1
    if root.status not in (OPTIMAL, INACCURATE):
        return root, nodes, root.status
    heap = [(root.objective, next(counter), root_lb, root_ub, root)]
    best: ConicSolution | None = None
    inc = math.inf
    degraded = root.status == INACCURATE
    if bnb.rounding:
        # incumbent from the gamma largest coordinates of the root relaxation
        vimp = _implied_v(root.x[di.x], decision)
        keep = np.argsort(-vimp, kind="stable")[:gamma]
        ub = np.zeros(m)
        ub[keep] = 1.0
        guess = run(root_lb, ub)
        nodes += 1
        if guess.status in (OPTIMAL, INACCURATE):
            inc, best = guess.objective, guess

    while heap:
        bound, _, lb, ub, sol = heapq.heappop(heap)
        if bound > inc + bnb.rel_gap * abs(inc):
            break
        xv = sol.x[di.x]
        vimp = _implied_v(xv, decision)
        free = (lb == 0) & (ub == 1)
        active = (lb == 1) | (free & (vimp > bnb.int_tol))
        if active.sum() <= gamma:
            pub = np.where(active, 1.0, 0.0)
            pub = np.where(lb == 1, 1.0, pub)
            polished = run(lb, pub)
            nodes += 1
            cand = polished if polished.status in (OPTIMAL, INACCURATE) else sol
            if cand.objective < inc:
                inc, best = cand.objective, cand
            continue
        frac = np.where(free & (vimp > bnb.int_tol) & (vimp < 1 - bnb.int_tol), vimp, np.nan)
        if np.all(np.isnan(frac)):
            frac = np.where(free & (vimp > bnb.int_tol), vimp, np.nan)
        i = int(np.nanargmin(np.abs(frac - 0.5)))
        for fix in (1.0, 0.0):
            clb, cub = lb.copy(), ub.copy()
            clb[i] = cub[i] = fix
            if clb.sum() > gamma:
                continue
            child = run(clb, cub)
            nodes += 1
            if child.status == INFEASIBLE:
                continue
            if child.status not in (OPTIMAL, INACCURATE):
                log.warning("branch-and-bound node failed with status %s; dropped", child.status)
                degraded = True
                continue
            degraded |= child.status == INACCURATE
            if child.objective <= inc + bnb.rel_gap * abs(inc):
                heapq.heappush(heap, (child.objective, next(counter), clb, cub, child))
        if nodes >= bnb.max_nodes:
            log.warning("branch-and-bound node limit reached")
            degraded = True
            break
    if best is None:
        return root, nodes, INFEASIBLE if not degraded else NUMERICAL
    return best, nodes, INACCURATE if degraded else OPTIMAL


def _report(dp: DROProgram, sol, nodes, status, pieces, elapsed, method, eps, atoms, weights):
    if sol.x is None or status not in (OPTIMAL, INACCURATE):
        return SolveReport(np.nan, None, np.nan, None, None, None, status, elapsed, nodes, method, eps,
                           weights, atoms)
    xs = sol.x
    x = xs[dp.decision.x]
    z = dual = None
    lam = float(xs[dp.lam]) if dp.lam is not None else 0.0
    if dp.z is not None:
        z = xs[dp.z]
        dual = np.stack([np.broadcast_to(-p.a(x), (dp.K, p.d)) for p in pieces])
    return SolveReport(value=float(sol.objective), x=x, lam=lam, s=xs[dp.s], z=z, dual_coeffs=dual,
                       status=status, wall_time=elapsed, nodes=nodes, method=method, eps=eps,
                       weights=weights, atoms=atoms)


def solve_dro(pieces, support: SupportSet, ambiguity: AmbiguitySpec, atoms, weights, eps: float,
              decision: DecisionSpec, solver: SolverConfig | None = None,
              bnb: BranchAndBoundConfig | None = None, method: str = "dro",
              shared_dual: bool | None = None) -> SolveReport:
    t0 = time.perf_counter()
    atoms = np.atleast_2d(np.asarray(atoms, dtype=float))
    weights = np.asarray(weights, dtype=float)
    dp = build_reformulation(pieces, support, ambiguity, atoms, weights, eps, decision, shared_dual)
    sol, nodes, status = branch_and_bound(dp, decision, solver, bnb)
    return _report(dp, sol, nodes, status, pieces, time.perf_counter() - t0, method, eps, atoms, weights)


def solve_compressed_dro(pieces, support, ambiguity, clustered: ClusteredDistribution, eps, decision,
                         solver=None, bnb=None, shared_dual=None) -> SolveReport:
    if clustered.K == 0:
        raise ValueError("clustered distribution is empty")
    return solve_dro(pieces, support, ambiguity, clustered.means, clustered.weights, eps, decision,
                     solver, bnb, method="compressed", shared_dual=shared_dual)


def _atoms_of(emp) -> np.ndarray:
    return emp.atoms if isinstance(emp, EmpiricalDistribution) else np.atleast_2d(np.asarray(emp, float))


def solve_full_dro(emp, pieces, support, ambiguity, eps, decision, solver=None, bnb=None,
                   shared_dual=None) -> SolveReport:
    atoms = _atoms_of(emp)
    w = np.full(atoms.shape[0], 1.0 / atoms.shape[0])
    return solve_dro(pieces, support, ambiguity, atoms, w, eps, decision, solver, bnb, method="full_dro",
                     shared_dual=shared_dual)


def solve_saa(emp, pieces, decision, solver=None, bnb=None) -> SolveReport:
    t0 = time.perf_counter()
    atoms = _atoms_of(emp)
    dp = _build_saa(pieces, atoms, decision)
    sol, nodes, status = branch_and_bound(dp, decision, solver, bnb)
    w = np.full(atoms.shape[0], 1.0 / atoms.shape[0])
    return _report(dp, sol, nodes, status, pieces, time.perf_counter() - t0, "saa", 0.0, atoms, w)


# ---------------------------------------------------------------- constants

def lipschitz_constants(pieces, decision: DecisionSpec, norm: str = "l2",
                        max_vertex_dims: int = 16) -> np.ndarray:
    """``max_{x in box} ||A_j x + alpha_j||_*`` per piece.

    Exact by vertex enumeration when at most ``max_vertex_dims`` coordinates
    enter ``A_j``; otherwise the triangle-inequality bound.
    """
    out = []
    for p in pieces:
        cols = np.nonzero(np.any(p.A != 0, axis=0) & (decision.upper > decision.lower))[0]
        base = decision.lower.copy()
        if cols.size <= max_vertex_dims:
            best = 0.0
            for corner in itertools.product((0, 1), repeat=cols.size):
                x = base.copy()
                sel = np.asarray(corner, dtype=bool)
                x[cols[sel]] = decision.upper[cols[sel]]
                best = max(best, float(dual_norm(p.a(x), norm)))
            out.append(best)
        else:
            reach = np.maximum(np.abs(decision.lower), np.abs(decision.upper))
            col_norms = dual_norm(p.A.T, norm)
            out.append(float(dual_norm(p.alpha, norm) + col_norms @ reach))
    return np.array(out)
