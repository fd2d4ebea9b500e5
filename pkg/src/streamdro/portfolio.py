"""Sparse CVaR portfolio problem and its synthetic return generator."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import genpareto, norm

from .dro import AffinePiece, AmbiguitySpec, DecisionSpec
from .stream import ProblemSpec
from .support import ConfigurationError, SupportSet


def illustrative_marginals(d: int):
    """Shape, scale and location per asset. Not fitted to any market data."""
    xi = np.linspace(0.05, 0.25, d)
    sigma = np.linspace(0.012, 0.025, d)
    target_mean = np.linspace(0.0002, 0.0008, d)
    mu = target_mean - sigma / (1 - xi)
    return xi, sigma, mu


def one_factor_correlation(d: int, low: float = 0.4, high: float = 0.8) -> np.ndarray:
    b = np.linspace(low, high, d)
    C = np.outer(b, b)
    np.fill_diagonal(C, 1.0)
    return C


@dataclass
class PortfolioConfig:
    d: int = 10
    gamma: int = 3
    omega: float = 0.2
    xi: np.ndarray | None = None
    sigma: np.ndarray | None = None
    mu: np.ndarray | None = None
    correlation: np.ndarray | None = None
    orientation: float = 1.0  # -1 mirrors the marginals (heavy loss tail)
    tau_max: float | None = None
    T: int = 500
    n0: int = 5
    N_val: int = 200
    N_test: int = 200
    repetitions: int = 10
    K: int = 10
    solve_every: int = 25

    def __post_init__(self):
        if not 0 < self.omega <= 1:
            raise ConfigurationError("omega must lie in (0, 1]")
        if not 1 <= self.gamma <= self.d:
            raise ConfigurationError("gamma must satisfy 1 <= gamma <= d")
        xi, sigma, mu = illustrative_marginals(self.d)
        self.xi = xi if self.xi is None else np.broadcast_to(np.asarray(self.xi, float), (self.d,)).copy()
        self.sigma = sigma if self.sigma is None else np.broadcast_to(np.asarray(self.sigma, float), (self.d,)).copy()
        self.mu = mu if self.mu is None else np.broadcast_to(np.asarray(self.mu, float), (self.d,)).copy()
        if np.any(self.sigma <= 0):
            raise ConfigurationError("Pareto scales must be positive")
        C = one_factor_correlation(self.d) if self.correlation is None else np.asarray(self.correlation, float)
        if C.shape != (self.d, self.d) or not np.allclose(C, C.T):
            raise ConfigurationError("correlation must be a symmetric d x d matrix")
        if not np.allclose(np.diag(C), 1.0):
            raise ConfigurationError("correlation must have unit diagonal")
        if np.linalg.eigvalsh(C).min() < -1e-10:
            raise ConfigurationError("correlation matrix is not positive semidefinite")
        self.correlation = C


def _copula_factor(C: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(C)
    return V * np.sqrt(np.clip(w, 0.0, None))


def generate_returns(config: PortfolioConfig, seed, count: int) -> np.ndarray:
    """Gaussian-copula draws with generalized-Pareto marginals."""
    if count == 0:
        return np.zeros((0, config.d))
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((count, config.d)) @ _copula_factor(config.correlation).T
    # isf(sf(z)) == ppf(cdf(z)) without rounding the upper tail to 1
    X = genpareto.isf(norm.sf(Z), c=config.xi, loc=config.mu, scale=config.sigma)
    if config.orientation < 0:
        X = 2 * config.mu - X
    return X


def cvar_pieces(d: int, omega: float) -> list[AffinePiece]:
    """Decision is ``(x, tau)``; ``f = max(tau, (1 - 1/omega) tau - v^T x / omega)``."""
    n = d + 1
    e_tau = np.zeros(n)
    e_tau[-1] = 1.0
    p1 = AffinePiece(np.zeros((d, n)), np.zeros(d), e_tau, 0.0)
    A2 = np.zeros((d, n))
    A2[:, :d] = -np.eye(d) / omega
    p2 = AffinePiece(A2, np.zeros(d), (1 - 1 / omega) * e_tau, 0.0)
    return [p1, p2]


def build_cvar_problem(config: PortfolioConfig, init_data=None, cardinality: bool = True) -> ProblemSpec:
    d = config.d
    if config.tau_max is not None:
        tau_max = config.tau_max
    elif init_data is not None and len(init_data):
        tau_max = 10.0 * float(np.max(np.abs(init_data)))
    else:
        tau_max = 1.0
    lower = np.r_[np.zeros(d), -tau_max]
    upper = np.r_[np.ones(d), tau_max]
    A_eq = np.r_[np.ones(d), 0.0][None, :]
    dec = DecisionSpec(lower, upper, A_eq=A_eq, b_eq=[1.0],
                       cardinality=config.gamma if cardinality else None,
                       card_indices=np.arange(d) if cardinality else None)
    return ProblemSpec(pieces=cvar_pieces(d, config.omega), decision=dec, support=SupportSet.full(),
                       lipschitz=np.array([0.0, 1.0 / config.omega]), name="cvar_portfolio")


def cvar_ambiguity(schedule) -> AmbiguitySpec:
    return AmbiguitySpec(order=1.0, norm="l2", schedule=schedule)


def evaluate_out_of_sample(x, tau: float, test_set, omega: float) -> float:
    """Average of ``max(tau, tau + (-v^T x - tau) / omega)`` over the test set."""
    test_set = np.atleast_2d(test_set)
    if test_set.shape[0] == 0:
        raise ValueError("empty test set")
    loss = -test_set @ np.asarray(x)
    return float(np.mean(np.maximum(tau, tau + (loss - tau) / omega)))


def tau_minimized_cvar(x, test_set, omega: float) -> float:
    """``min_tau`` of the same average; the CVaR of the loss sample."""
    test_set = np.atleast_2d(test_set)
    if test_set.shape[0] == 0:
        raise ValueError("empty test set")
    loss = np.sort(-test_set @ np.asarray(x))
    N = loss.shape[0]
    # convex piecewise linear in tau with kinks at the losses; evaluate every kink
    tail = np.concatenate([np.cumsum(loss[::-1])[::-1][1:], [0.0]])
    above = np.arange(N - 1, -1, -1)
    vals = loss + (tail - above * loss) / (N * omega)
    return float(vals.min())


def split_decision(z) -> tuple[np.ndarray, float]:
    z = np.asarray(z)
    return z[:-1], float(z[-1])


def empirical_confidence(certificates, out_of_sample) -> np.ndarray:
    """Per time step, the fraction of repetitions with certificate >= out-of-sample.

    Inputs are ``(reps, steps)`` arrays; NaN pairs are left out of the count.
    """
    C = np.atleast_2d(np.asarray(certificates, dtype=float))
    O = np.atleast_2d(np.asarray(out_of_sample, dtype=float))
    if C.shape != O.shape:
        raise ValueError(f"misaligned series: {C.shape} vs {O.shape}")
    valid = np.isfinite(O) & ~np.isnan(C)
    hits = (C >= O) & valid
    counts = valid.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(counts > 0, hits.sum(axis=0) / counts, np.nan)
