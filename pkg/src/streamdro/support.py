"""Support sets for the uncertain parameter."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class SupportSet:
    """``kind`` is one of ``"full"``, ``"box"``, ``"polyhedron"``.

    Box bounds may be infinite on either side (half-bounded domains).
    A polyhedron is ``{u : G u <= h}``.
    """

    kind: str = "full"
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    G: np.ndarray | None = None
    h: np.ndarray | None = None

    @classmethod
    def full(cls) -> SupportSet:
        return cls("full")

    @classmethod
    def box(cls, lower, upper) -> SupportSet:
        lower = np.asarray(lower, dtype=float).ravel()
        upper = np.asarray(upper, dtype=float).ravel()
        if lower.shape != upper.shape:
            raise ConfigurationError("box bounds have different shapes")
        if np.any(lower > upper):
            raise ConfigurationError("box lower bound exceeds upper bound")
        return cls("box", lower=lower, upper=upper)

    @classmethod
    def polyhedron(cls, G, h) -> SupportSet:
        G = np.atleast_2d(np.asarray(G, dtype=float))
        h = np.asarray(h, dtype=float).ravel()
        if G.shape[0] != h.shape[0]:
            raise ConfigurationError("G and h row counts differ")
        res = linprog(np.zeros(G.shape[1]), A_ub=G, b_ub=h, bounds=[(None, None)] * G.shape[1],
                      method="highs")
        if res.status != 0:
            raise ConfigurationError("polyhedral support is empty")
        return cls("polyhedron", G=G, h=h)

    @property
    def bounded_box(self) -> bool:
        return (self.kind == "box" and np.all(np.isfinite(self.lower))
                and np.all(np.isfinite(self.upper)))

    def contains(self, u, tol: float = 1e-9) -> bool:
        u = np.asarray(u, dtype=float)
        if self.kind == "full":
            return True
        if self.kind == "box":
            return bool(np.all(u >= self.lower - tol) and np.all(u <= self.upper + tol))
        return bool(np.all(self.G @ u <= self.h + tol))

    def support_function(self, y) -> float:
        """``sup_{u in S} y^T u`` (may be ``inf``)."""
        y = np.asarray(y, dtype=float)
        if self.kind == "full":
            return 0.0 if not np.any(y) else np.inf
        if self.kind == "box":
            with np.errstate(invalid="ignore"):
                terms = np.where(y > 0, y * self.upper, np.where(y < 0, y * self.lower, 0.0))
            return float(np.sum(terms))
        res = linprog(-y, A_ub=self.G, b_ub=self.h, bounds=[(None, None)] * len(y), method="highs")
        if res.status == 3:
            return np.inf
        return float(-res.fun)
