"""Raw stream history and the compressed (clustered) empirical measure."""
from __future__ import annotations

import copy
import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class DimensionError(ValueError):
    pass


class EmpiricalDistribution:
    """Append-only store of observed atoms with implied uniform weights."""

    def __init__(self, atoms=None, dim: int | None = None):
        self._chunks: list[np.ndarray] = []
        self._count = 0
        self.dim = dim
        self._cache: np.ndarray | None = None
        if atoms is not None:
            self.extend(atoms)

    def __len__(self) -> int:
        return self._count

    @property
    def n(self) -> int:
        return self._count

    def extend(self, points) -> None:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.size == 0:
            return
        if self.dim is None:
            self.dim = pts.shape[1]
        if pts.shape[1] != self.dim:
            raise DimensionError(f"expected dimension {self.dim}, got {pts.shape[1]}")
        self._chunks.append(pts.copy())
        self._count += pts.shape[0]
        self._cache = None

    def append(self, point) -> None:
        self.extend(np.asarray(point, dtype=float).reshape(1, -1))

    @property
    def atoms(self) -> np.ndarray:
        if self._cache is None:
            if self._chunks:
                self._cache = np.vstack(self._chunks)
                self._chunks = [self._cache]
            else:
                self._cache = np.zeros((0, self.dim or 0))
        return self._cache

    @property
    def weights(self) -> np.ndarray:
        return np.full(self._count, 1.0 / self._count) if self._count else np.zeros(0)


def empirical_mean(dist: EmpiricalDistribution) -> np.ndarray:
    if dist.n == 0:
        raise ValueError("empirical mean of an empty distribution")
    return dist.atoms.mean(axis=0)


@dataclass
class ClusterStat:
    """One cluster: running mean, exact count, fixed center and spread.

    Weights are not stored here; they are derived from counts by the
    owning :class:`ClusteredDistribution`.
    """

    mean: np.ndarray
    count: int
    center: np.ndarray
    rmse: float = 0.0

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.center = np.asarray(self.center, dtype=float)
        self.count = int(self.count)
        if self.rmse < 0:
            raise ValueError("rmse must be nonnegative")


@dataclass
class ClusteredDistribution:
    clusters: list[ClusterStat] = field(default_factory=list)

    @property
    def total(self) -> int:
        return sum(c.count for c in self.clusters)

    @property
    def K(self) -> int:
        return len(self.clusters)

    @property
    def dim(self) -> int:
        return self.clusters[0].mean.shape[0]

    @property
    def counts(self) -> np.ndarray:
        return np.array([c.count for c in self.clusters], dtype=np.int64)

    @property
    def weights(self) -> np.ndarray:
        counts = self.counts.astype(float)
        return counts / counts.sum()

    @property
    def means(self) -> np.ndarray:
        return np.array([c.mean for c in self.clusters])

    @property
    def centers(self) -> np.ndarray:
        return np.array([c.center for c in self.clusters])

    def incorporate(self, point, k: int) -> None:
        """Add ``point`` to cluster ``k`` in place (running-average mean)."""
        if not 0 <= k < len(self.clusters):
            raise IndexError(f"cluster index {k} out of range for K={len(self.clusters)}")
        point = np.asarray(point, dtype=float)
        c = self.clusters[k]
        if point.shape != c.mean.shape:
            raise DimensionError(f"point shape {point.shape} != cluster mean shape {c.mean.shape}")
        c.count += 1
        c.mean = c.mean + (point - c.mean) / c.count

    def nonempty(self) -> ClusteredDistribution:
        return ClusteredDistribution([c for c in self.clusters if c.count > 0])

    def copy(self) -> ClusteredDistribution:
        return copy.deepcopy(self)

    @classmethod
    def from_atoms(cls, atoms) -> ClusteredDistribution:
        """Each atom as its own singleton cluster (the uncompressed measure)."""
        atoms = np.atleast_2d(np.asarray(atoms, dtype=float))
        return cls([ClusterStat(mean=a, count=1, center=a) for a in atoms])

    @classmethod
    def from_labels(cls, points, labels, centers=None) -> ClusteredDistribution:
        """Cluster statistics from an explicit partition; empty labels dropped."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        labels = np.asarray(labels)
        n_labels = int(labels.max()) + 1 if labels.size else 0
        clusters = []
        for k in range(n_labels):
            members = points[labels == k]
            if len(members) == 0:
                continue
            mean = members.mean(axis=0)
            rmse = float(np.sqrt(np.mean(np.sum((members - mean) ** 2, axis=1))))
            center = mean if centers is None else np.asarray(centers[k], dtype=float)
            clusters.append(ClusterStat(mean=mean, count=len(members), center=center, rmse=rmse))
        return cls(clusters)


def incorporate_point(dist: ClusteredDistribution, point, cluster_index: int) -> ClusteredDistribution:
    """Return a copy of ``dist`` with ``point`` added to ``cluster_index``."""
    out = dist.copy()
    out.incorporate(point, cluster_index)
    return out


def read_csv(path: str | Path) -> EmpiricalDistribution:
    """One datapoint per row; a non-numeric first row is treated as a header."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for i, row in enumerate(reader):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                rows.append([float(cell) for cell in row])
            except ValueError:
                if i == 0:
                    continue
                raise
    if not rows:
        return EmpiricalDistribution()
    dim = len(rows[0])
    for j, row in enumerate(rows):
        if len(row) != dim:
            raise DimensionError(f"row {j} has {len(row)} columns, expected {dim}")
    return EmpiricalDistribution(np.array(rows), dim=dim)
