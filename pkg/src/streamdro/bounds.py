"""Certificate adjustments relating the compressed and full DRO values.

Missing constants are treated as infinite, so the clause that needs them
drops out of the minimum. If no clause survives there is no certificate.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .distributions import ClusteredDistribution
from .dro import SolveReport, objective_values
from .support import SupportSet
from .transport import clustering_distance_W, clustering_phi, clustering_value_D

log = logging.getLogger(__name__)

INF = math.inf


class CertificateError(ValueError):
    pass


@dataclass
class BoundInputs:
    eps: float
    M: np.ndarray | None = None  # per-piece Lipschitz constants
    L: np.ndarray | None = None  # per-piece smoothness constants (0 for affine)
    L_global: float | None = None  # smoothness of the max; unknown for J >= 2
    W1: float = INF
    W2: float = INF
    D2: float = INF
    Phi: float = INF
    delta: float | None = None
    grad_norm: float | None = None

    def __post_init__(self):
        for name in ("eps", "W1", "W2", "D2", "Phi"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.M is not None:
            self.M = np.asarray(self.M, dtype=float)
        if self.L is not None:
            self.L = np.asarray(self.L, dtype=float)


def _lipschitz_clause(b: BoundInputs) -> float:
    if b.M is None or not np.isfinite(b.W1):
        return INF
    return float(np.max(b.M)) * (2 * b.eps + b.W1)


def _finite_min(clauses, what: str) -> float:
    finite = [c for c in clauses if np.isfinite(c)]
    if not finite:
        raise CertificateError(f"every clause of {what} is infinite; supply M or L constants")
    return float(min(finite))


def psi_under(b: BoundInputs) -> float:
    """Lower adjustment: how far the compressed value may fall below the full one."""
    smooth = INF
    if b.grad_norm is not None and b.L_global is not None and np.isfinite(b.W2):
        r = 2 * b.eps + b.W2
        smooth = b.grad_norm * r + 0.5 * b.L_global * r ** 2
    return _finite_min([b.Phi, _lipschitz_clause(b), smooth], "psi_under")


def psi_over(b: BoundInputs) -> float:
    """Upper adjustment: how far the compressed value may exceed the full one."""
    curv = INF
    if b.L is not None and b.delta is not None and np.isfinite(b.D2):
        curv = b.delta + float(np.max(b.L / 2.0)) * b.D2 ** 2
    return _finite_min([curv, _lipschitz_clause(b)], "psi_over")


def delta_estimate(support: SupportSet, eps: float, M=None) -> tuple[float, bool]:
    """Support effect. Returns ``(value, is_surrogate)``.

    Zero for full-space support, otherwise the conservative ``2 max_j M_j eps``.
    """
    if support.kind == "full":
        return 0.0, False
    if eps > 1:
        log.warning("support-effect surrogate used outside its small-radius regime (eps=%g)", eps)
    if M is None:
        return INF, True
    return 2.0 * float(np.max(M)) * eps, True


def gradient_norm_term(pieces, x, clustered: ClusteredDistribution) -> float:
    """``sqrt(sum_k theta_k ||a_{j*}(x)||^2)`` with ``j*`` the active piece at each mean."""
    means = clustered.means
    vals = np.column_stack([means @ p.a(x) + p.b(x) for p in pieces])
    active = np.argmax(vals, axis=1)
    grads = np.array([pieces[j].a(x) for j in active])
    return float(np.sqrt(clustered.weights @ np.sum(grads ** 2, axis=1)))


def smoothness_constants(pieces) -> tuple[np.ndarray, float | None]:
    """Affine pieces are 0-smooth; the max of two or more is not smooth."""
    L = np.zeros(len(pieces))
    return L, (0.0 if len(pieces) == 1 else None)


def compute_bound_inputs(report: SolveReport, pieces, clustered: ClusteredDistribution, history,
                         labels, support: SupportSet, M=None, max_atoms: int = 5000) -> BoundInputs:
    """Evaluate diagnostics and constants for one solved step."""
    L, L_glob = smoothness_constants(pieces)
    W1 = clustering_distance_W(history, clustered, 1, max_atoms=max_atoms)
    W2 = clustering_distance_W(history, clustered, 2, max_atoms=max_atoms)
    D2 = clustering_value_D(labels, history, clustered, 2)
    Phi = clustering_phi(labels, history, clustered, report.dual_coeffs)
    delta, _ = delta_estimate(support, report.eps, M)
    return BoundInputs(eps=report.eps, M=M, L=L, L_global=L_glob, W1=W1, W2=W2, D2=D2, Phi=Phi,
                       delta=delta, grad_norm=gradient_norm_term(pieces, report.x, clustered))


def certificate(report: SolveReport, inputs: BoundInputs | None = None, residual: float = 0.0) -> float:
    """``H + psi_under`` for compressed solves, ``H`` otherwise; ``residual`` is added if given."""
    if not report.ok:
        raise CertificateError(f"no certificate for a report with status {report.status}")
    if report.method != "compressed":
        return report.value + residual
    if inputs is None:
        raise CertificateError("compressed certificate needs bound inputs")
    return report.value + psi_under(inputs) + residual


def in_sample_value(report: SolveReport, pieces) -> float:
    """Expected objective of the decision under the report's own reference measure."""
    return float(report.weights @ objective_values(pieces, report.x, report.atoms))
