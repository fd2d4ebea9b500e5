"""Ambiguity radius schedules."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .support import ConfigurationError

KINDS = ("light_tail", "bounded_explicit", "dimension_free", "power_law")


@dataclass
class RadiusSchedule:
    """``kind`` selects the formula; unused parameters are ignored.

    ``eta_inflation`` is added to every radius (use ``2 * eta_K`` for the
    covering-radius enlargement). ``residual_coeff`` feeds the reported
    residual ``rho_t = residual_coeff / n_t``, which is metadata only.
    """

    kind: str = "power_law"
    c: float = 0.0025
    exponent: float = 1.0 / 40
    beta0: float = 0.05
    d: int | None = None
    p: float = 1.0
    rho: float = 1.0
    beta: float = 0.05
    eta_inflation: float = 0.0
    residual_coeff: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown schedule kind {self.kind!r}")
        if self.eta_inflation < 0:
            raise ConfigurationError("eta_inflation must be nonnegative")
        if self.kind in ("light_tail", "bounded_explicit") and self.d is None:
            raise ConfigurationError(f"{self.kind} schedule needs the dimension d")
        if self.kind == "bounded_explicit" and self.p >= self.d / 2:
            raise ConfigurationError("explicit bounded radius requires p < d/2")

    def residual(self, n_t: int) -> float:
        return self.residual_coeff / n_t

    def label(self) -> str:
        if self.kind == "power_law":
            return f"power_law(c={self.c:g},e={self.exponent:g})"
        return self.kind


def beta_sequence(t: int, beta0: float) -> float:
    return beta0 / (t + 1) ** 2


def radius_at(schedule: RadiusSchedule, t: int, n_t: int) -> float:
    if n_t < 1:
        raise ValueError("n_t must be >= 1")
    s = schedule
    if s.kind == "power_law":
        base = s.c * n_t ** (-s.exponent)
    elif s.kind == "dimension_free":
        base = s.c * math.sqrt(math.log(n_t) / n_t)
    elif s.kind == "light_tail":
        beta_t = beta_sequence(t, s.beta0)
        if not 0 < beta_t < 1:
            raise ValueError(f"beta_t = {beta_t} is outside (0, 1)")
        base = s.c * (math.log(1.0 / beta_t) / n_t) ** min(s.p / s.d, 0.5)
    else:
        base = explicit_bounded_radius(n_t, s.beta, s.rho, s.d, s.p)
    return base + s.eta_inflation


def _explicit_C(d: int, p: float) -> float:
    return math.sqrt(d) * 2 ** ((d - 2) / (2 * p)) * (
        1 / (1 - 2 ** (p - d / 2)) + 1 / (1 - 2 ** (-p))) ** (1 / p)


def explicit_bounded_radius(N: int, beta: float, rho: float, d: int, p: float) -> float:
    """Radius for a support of diameter-scale ``rho`` in dimension ``d``."""
    if p >= d / 2:
        raise ConfigurationError("explicit bounded radius requires p < d/2")
    if not 0 < beta < 1:
        raise ValueError("beta must lie in (0, 1)")
    if rho <= 0:
        raise ValueError("rho must be positive")
    C = _explicit_C(d, p)
    sd = math.sqrt(d)
    return 2 * rho * (C * N ** (-1 / d) + sd * (2 * math.log(1 / beta)) ** (1 / (2 * p)) * N ** (-1 / (2 * p)))


def compact_constants(d: int, p: float) -> tuple[float, float]:
    """``(C_star, c_star)`` of the compact representation."""
    C = _explicit_C(d, p)
    sd_d = math.sqrt(d) ** d
    return C ** d / (2 * sd_d), 1.0 / (2 ** d * sd_d)


def compact_bounded_radius(N: int, beta: float, rho: float, d: int, p: float) -> float:
    """``2 rho (ln(C_star / beta) / (c_star N))^(1/d)``."""
    C_star, c_star = compact_constants(d, p)
    return 2 * rho * (math.log(C_star / beta) / (c_star * N)) ** (1 / d)


def default_cv_grid() -> list[RadiusSchedule]:
    cs = list(np.geomspace(1e-4, 1e-1, 4)) + [0.0025]
    es = [0.0, 1 / 40, 1 / 10, 1 / 2]
    return [RadiusSchedule("power_law", c=float(c), exponent=e) for c, e in itertools.product(cs, es)]


def cross_validate_schedule(candidates: Sequence[RadiusSchedule], runner: Callable,
                            evaluator: Callable | None = None):
    """Pick the candidate with the lowest mean validation score.

    ``runner(schedule)`` runs the experiment; ``evaluator(result)`` turns its
    output into one score or a sequence of per-repetition scores (defaults to
    the identity). Ties go to the first listed candidate. Returns
    ``(best, scores)``.
    """
    if not candidates:
        raise ValueError("no candidate schedules")
    scores = []
    for cand in candidates:
        try:
            out = runner(cand)
            score = evaluator(out) if evaluator is not None else out
        except Exception as exc:
            raise RuntimeError(f"cross-validation failed for candidate {cand.label()}") from exc
        scores.append(float(np.mean(score)))
    best = int(np.argmin(scores))
    return candidates[best], scores
