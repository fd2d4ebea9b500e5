"""Discrete optimal transport and clustering diagnostics."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .distributions import ClusteredDistribution, EmpiricalDistribution

log = logging.getLogger(__name__)

_ORD = {"l1": 1, "l2": 2, "linf": np.inf}


@dataclass
class DiscreteMeasure:
    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.atoms = np.atleast_2d(np.asarray(self.atoms, dtype=float))
        self.weights = np.asarray(self.weights, dtype=float).ravel()
        if self.atoms.shape[0] != self.weights.shape[0]:
            raise ValueError("atoms and weights differ in length")
        if np.any(self.weights < 0):
            raise ValueError("weights must be nonnegative")
        if abs(self.weights.sum() - 1.0) > 1e-12 * max(1, len(self.weights)):
            raise ValueError(f"weights sum to {self.weights.sum():.15g}, not 1")

    @classmethod
    def uniform(cls, atoms) -> DiscreteMeasure:
        atoms = np.atleast_2d(np.asarray(atoms, dtype=float))
        return cls(atoms, np.full(atoms.shape[0], 1.0 / atoms.shape[0]))

    @classmethod
    def from_clustered(cls, clustered: ClusteredDistribution) -> DiscreteMeasure:
        return cls(clustered.means, clustered.weights)


def cost_matrix(X, Y, p: float = 1.0, norm: str = "l2") -> np.ndarray:
    diff = X[:, None, :] - Y[None, :, :]
    return np.linalg.norm(diff, ord=_ORD[norm], axis=2) ** p


def wasserstein_p(P: DiscreteMeasure, Q: DiscreteMeasure, p: float = 1.0, norm: str = "l2") -> float:
    """Exact ``W_p`` via the transportation LP; returns the ``p``-th root."""
    if not np.isfinite(p) or p < 1:
        raise ValueError("p must be finite and >= 1")
    if P.atoms.shape[1] != Q.atoms.shape[1]:
        raise ValueError("measures live in different dimensions")
    # atoms with zero mass carry no constraint and only enlarge the LP
    pa, pw = P.atoms[P.weights > 0], P.weights[P.weights > 0]
    qa, qw = Q.atoms[Q.weights > 0], Q.weights[Q.weights > 0]
    m, n = len(pw), len(qw)
    C = cost_matrix(pa, qa, p, norm)
    if m == 1 or n == 1:
        cost = float(pw @ C @ qw)
        return max(cost, 0.0) ** (1.0 / p)
    rows = sp.vstack([sp.kron(sp.eye(m), np.ones((1, n))), sp.kron(np.ones((1, m)), sp.eye(n))])
    b = np.concatenate([pw, qw])
    # one marginal constraint is implied by the others
    res = linprog(C.ravel(), A_eq=rows.tocsr()[:-1], b_eq=b[:-1], bounds=(0, None), method="highs")
    if res.status != 0:
        raise RuntimeError(f"transport LP failed: {res.message}")
    return max(float(res.fun), 0.0) ** (1.0 / p)


def _emp_atoms(emp) -> np.ndarray:
    return emp.atoms if isinstance(emp, EmpiricalDistribution) else np.atleast_2d(np.asarray(emp, float))


def clustering_distance_W(emp, clustered: ClusteredDistribution, p: float = 1.0,
                          max_atoms: int = 5000, seed: int = 0) -> float:
    """``W_p`` (Euclidean) between the uniform empirical measure and the cluster means."""
    atoms = _emp_atoms(emp)
    if atoms.shape[0] > max_atoms:
        idx = np.random.default_rng(seed).choice(atoms.shape[0], max_atoms, replace=False)
        log.info("W_%g on a uniform subsample of %d of %d atoms", p, max_atoms, atoms.shape[0])
        atoms = atoms[np.sort(idx)]
    return wasserstein_p(DiscreteMeasure.uniform(atoms), DiscreteMeasure.from_clustered(clustered), p)


def _check_partition(labels, n, K):
    labels = np.asarray(labels)
    if labels.shape != (n,):
        raise ValueError("assignments must give one label per atom")
    if not np.issubdtype(labels.dtype, np.integer) or labels.min() < 0 or labels.max() >= K:
        raise ValueError("assignments are not a partition into the given clusters")
    return labels


def clustering_value_D(assignments, emp, clustered: ClusteredDistribution, p: float = 2.0) -> float:
    """Root-mean ``p``-th power distance of each atom to its cluster mean."""
    atoms = _emp_atoms(emp)
    labels = _check_partition(assignments, atoms.shape[0], clustered.K)
    dev = np.linalg.norm(atoms - clustered.means[labels], axis=1)
    return float(np.mean(dev ** p) ** (1.0 / p))


def clustering_phi(assignments, emp, clustered: ClusteredDistribution, dual_coeffs) -> float:
    """Mean over atoms of ``max_j (-z_jk)^T (u - mean_k)``; zero for one piece."""
    atoms = _emp_atoms(emp)
    labels = _check_partition(assignments, atoms.shape[0], clustered.K)
    z = np.asarray(dual_coeffs, dtype=float)
    if z.ndim != 3 or z.shape[1] != clustered.K or z.shape[2] != atoms.shape[1]:
        raise ValueError("dual coefficients must have shape (J, K, d)")
    if z.shape[0] == 1:
        return 0.0
    dev = atoms - clustered.means[labels]
    vals = np.einsum("jnd,nd->jn", -z[:, labels, :], dev)
    return float(vals.max(axis=0).mean())
