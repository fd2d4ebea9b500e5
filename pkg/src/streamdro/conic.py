"""Solver-agnostic conic program description with a Clarabel backend.

Programs have the form ``min c^T x  s.t.  b - A x in K`` where ``K`` is a
product of zero, nonnegative, second-order and 3-d power cones. Rows are
collected by cone family and stacked in that order at solve time.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import clarabel
import numpy as np
import scipy.sparse as sp

OPTIMAL = "optimal"
INACCURATE = "inaccurate"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
NUMERICAL = "numerical_failure"

_STATUS = {
    "Solved": OPTIMAL,
    "AlmostSolved": INACCURATE,
    "PrimalInfeasible": INFEASIBLE,
    "AlmostPrimalInfeasible": INFEASIBLE,
    "DualInfeasible": UNBOUNDED,
    "AlmostDualInfeasible": UNBOUNDED,
}


@dataclass
class SolverConfig:
    tol_gap_abs: float = 1e-8
    tol_gap_rel: float = 1e-8
    tol_feas: float = 1e-8
    max_iter: int = 200
    verbose: bool = False

    def settings(self) -> clarabel.DefaultSettings:
        s = clarabel.DefaultSettings()
        s.tol_gap_abs = self.tol_gap_abs
        s.tol_gap_rel = self.tol_gap_rel
        s.tol_feas = self.tol_feas
        s.max_iter = self.max_iter
        s.verbose = self.verbose
        s.presolve_enable = False  # keeps row indices stable for b updates
        return s


class _Rows:
    def __init__(self):
        self.r: list[np.ndarray] = []
        self.c: list[np.ndarray] = []
        self.v: list[np.ndarray] = []
        self.b: list[float] = []
        self.labels: list[str] = []

    @property
    def n(self) -> int:
        return len(self.b)

    def add(self, cols, vals, rhs: float, label: str = "") -> int:
        cols = np.asarray(cols, dtype=np.int64).ravel()
        vals = np.asarray(vals, dtype=float).ravel()
        i = len(self.b)
        self.r.append(np.full(cols.shape[0], i, dtype=np.int64))
        self.c.append(cols)
        self.v.append(vals)
        self.b.append(float(rhs))
        self.labels.append(label)
        return i

    def add_block(self, local_rows, cols, vals, rhs, label: str = "") -> int:
        """Append ``len(rhs)`` rows at once; ``local_rows`` index into the block."""
        rhs = np.asarray(rhs, dtype=float).ravel()
        i0 = len(self.b)
        self.r.append(np.asarray(local_rows, dtype=np.int64).ravel() + i0)
        self.c.append(np.asarray(cols, dtype=np.int64).ravel())
        self.v.append(np.asarray(vals, dtype=float).ravel())
        self.b.extend(rhs.tolist())
        self.labels.extend([label] * rhs.shape[0])
        return i0

    def matrix(self, nvar: int):
        if not self.b:
            return sp.csc_matrix((0, nvar)), np.zeros(0)
        r = np.concatenate(self.r)
        c = np.concatenate(self.c)
        v = np.concatenate(self.v)
        return sp.csc_matrix((v, (r, c)), shape=(len(self.b), nvar)), np.array(self.b)


@dataclass
class ConicSolution:
    status: str
    x: np.ndarray | None
    objective: float
    time: float
    iterations: int = 0


class ConicProgram:
    """Incremental builder. Variables are allocated in named blocks."""

    def __init__(self):
        self.nvar = 0
        self.blocks: dict[str, tuple[int, int]] = {}
        self._c: dict[int, float] = {}
        self.eq = _Rows()
        self.le = _Rows()
        self.soc: list[_Rows] = []
        self.pow: list[tuple[float, _Rows]] = []
        self._compiled = None
        self._solver = None

    # -- variables
    def var(self, name: str, size: int) -> np.ndarray:
        if name in self.blocks:
            raise KeyError(f"variable block {name!r} already exists")
        idx = np.arange(self.nvar, self.nvar + size)
        self.blocks[name] = (self.nvar, size)
        self.nvar += size
        self._compiled = None
        return idx

    def index(self, name: str) -> np.ndarray:
        start, size = self.blocks[name]
        return np.arange(start, start + size)

    def set_cost(self, cols, vals) -> None:
        for c, v in zip(np.atleast_1d(cols), np.atleast_1d(vals)):
            self._c[int(c)] = self._c.get(int(c), 0.0) + float(v)

    # -- constraints: each row is  sum vals * x[cols]  (op)  rhs
    def add_eq(self, cols, vals, rhs, label="") -> int:
        self._compiled = None
        return self.eq.add(cols, vals, rhs, label)

    def add_le(self, cols, vals, rhs, label="") -> int:
        self._compiled = None
        return self.le.add(cols, vals, rhs, label)

    def add_eq_block(self, local_rows, cols, vals, rhs, label="") -> int:
        self._compiled = None
        return self.eq.add_block(local_rows, cols, vals, rhs, label)

    def add_le_block(self, local_rows, cols, vals, rhs, label="") -> int:
        self._compiled = None
        return self.le.add_block(local_rows, cols, vals, rhs, label)

    def add_soc(self, rows: list[tuple], label="") -> None:
        """``||(e_1, ..., e_m)|| <= e_0`` where each ``e_i = (cols, vals, const)``."""
        block = _Rows()
        for cols, vals, const in rows:
            # s = b - A x must equal the affine expression e = vals.x + const
            block.add(cols, -np.asarray(vals, dtype=float), const, label)
        self.soc.append(block)
        self._compiled = None

    def add_soc_block(self, local_rows, cols, vals, consts, label="") -> None:
        """Bulk form of :meth:`add_soc`; row 0 of the block is the cone head."""
        block = _Rows()
        block.add_block(local_rows, cols, -np.asarray(vals, dtype=float), consts, label)
        self.soc.append(block)
        self._compiled = None

    def add_pow(self, alpha: float, rows: list[tuple], label="") -> None:
        """``e_0^alpha e_1^(1-alpha) >= |e_2|`` with ``e_0, e_1 >= 0``."""
        block = _Rows()
        for cols, vals, const in rows:
            block.add(cols, -np.asarray(vals, dtype=float), const, label)
        self.pow.append((alpha, block))
        self._compiled = None

    # -- compilation
    def compile(self):
        if self._compiled is not None:
            return self._compiled
        mats, rhs, cones = [], [], []
        A, b = self.eq.matrix(self.nvar)
        if self.eq.n:
            mats.append(A); rhs.append(b); cones.append(clarabel.ZeroConeT(self.eq.n))
        A, b = self.le.matrix(self.nvar)
        if self.le.n:
            mats.append(A); rhs.append(b); cones.append(clarabel.NonnegativeConeT(self.le.n))
        for block in self.soc:
            A, b = block.matrix(self.nvar)
            mats.append(A); rhs.append(b); cones.append(clarabel.SecondOrderConeT(block.n))
        for alpha, block in self.pow:
            A, b = block.matrix(self.nvar)
            mats.append(A); rhs.append(b); cones.append(clarabel.PowerConeT(alpha))
        A = sp.vstack(mats, format="csc") if mats else sp.csc_matrix((0, self.nvar))
        b = np.concatenate(rhs) if rhs else np.zeros(0)
        q = np.zeros(self.nvar)
        for k, v in self._c.items():
            q[k] = v
        self._compiled = (A, b, cones, q)
        self._solver = None
        return self._compiled

    def le_offset(self) -> int:
        """Row offset of the first inequality row in the stacked system."""
        return self.eq.n

    def solve(self, config: SolverConfig | None = None, b_override=None) -> ConicSolution:
        config = config or SolverConfig()
        A, b, cones, q = self.compile()
        if b_override is not None:
            b = b_override
        t0 = time.perf_counter()
        try:
            cached = self._solver
            if cached is not None and cached[0] is config:
                # only the right-hand side changes between branch-and-bound nodes
                solver = cached[1]
                solver.update(b=b)
            else:
                P = sp.csc_matrix((self.nvar, self.nvar))
                solver = clarabel.DefaultSolver(P, q, A, b, cones, config.settings())
                self._solver = (config, solver)
            sol = solver.solve()
        except Exception:  # solver-internal failure
            self._solver = None
            return ConicSolution(NUMERICAL, None, np.nan, time.perf_counter() - t0)
        elapsed = time.perf_counter() - t0
        status = _STATUS.get(str(sol.status).split(".")[-1], NUMERICAL)
        x = np.array(sol.x) if status in (OPTIMAL, INACCURATE) else None
        obj = float(q @ x) if x is not None else np.nan
        return ConicSolution(status, x, obj, elapsed, int(sol.iterations))

    def debug_dump(self, max_rows: int = 200) -> str:
        """Human-readable listing of the variables, objective and rows."""
        names = {}
        for name, (start, size) in self.blocks.items():
            for i in range(size):
                names[start + i] = f"{name}[{i}]" if size > 1 else name
        out = [f"variables: {self.nvar}"]
        out += [f"  {name}: {size}" for name, (_, size) in self.blocks.items()]
        out.append("minimize " + " + ".join(f"{v:g}*{names[k]}" for k, v in sorted(self._c.items())))

        def fmt(rows: _Rows, op: str, tag: str):
            M, b = rows.matrix(self.nvar)
            M = M.tocsr()
            lines = []
            for i in range(min(rows.n, max_rows)):
                lo, hi = M.indptr[i], M.indptr[i + 1]
                terms = " + ".join(f"{v:g}*{names[int(c)]}" for c, v in zip(M.indices[lo:hi], M.data[lo:hi]))
                label = rows.labels[i] and " " + rows.labels[i]
                lines.append(f"  [{tag}{label}] {terms or '0'} {op} {b[i]:g}")
            if rows.n > max_rows:
                lines.append(f"  ... {rows.n - max_rows} more")
            return lines

        out.append(f"equalities: {self.eq.n}")
        out += fmt(self.eq, "==", "eq")
        out.append(f"inequalities: {self.le.n}")
        out += fmt(self.le, "<=", "le")
        out.append(f"second-order cones: {len(self.soc)} (rows are b - A x)")
        for block in self.soc[:max_rows]:
            out += fmt(block, "(soc)", "soc")
        out.append(f"power cones: {len(self.pow)}")
        for alpha, block in self.pow[:max_rows]:
            out += fmt(block, f"(pow {alpha:g})", "pow")
        return "\n".join(out)
