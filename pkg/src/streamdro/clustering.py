"""Online clustering algorithms that build the compressed reference measure.

Three algorithms share one interface (``initialize``, ``update``,
``distribution``):

* :class:`SupCover` fixes a greedy k-centers cover of a bounded box up front.
* :class:`Reclustering` reruns warm-started k-means over the full history
  until the freeze time, then assigns to the frozen centers.
* :class:`OnlineClustering` keeps ``Q`` microclusters and ``K`` macroclusters
  (k-means over microcluster centers) and never stores raw points.

Cluster assignment is always to the nearest center, ties going to the lowest
index.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .distributions import ClusteredDistribution, ClusterStat, DimensionError
from .support import ConfigurationError, SupportSet

log = logging.getLogger(__name__)

ALGORITHMS = ("supcover", "reclustering", "online")


@dataclass
class ClusteringConfig:
    algorithm: str = "reclustering"
    K: int = 10
    Q: int | None = None
    # int, "never", or "auto" (ceil(0.85 * horizon), resolved by the stream engine)
    freeze_time: int | str = "auto"
    kmeans_max_iters: int = 100
    kmeans_tol: float = 1e-8
    rng_seed: int = 0
    # "every" refreshes the macro layer after each micro update,
    # "before_solve" defers it until the distribution is read
    macro_refresh: str = "every"
    track_labels: bool = False

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigurationError(f"unknown clustering algorithm {self.algorithm!r}")
        if self.K < 1:
            raise ConfigurationError("K must be positive")
        if self.Q is None:
            self.Q = 5 * self.K
        if self.Q < self.K:
            raise ConfigurationError("Q must be at least K")
        if isinstance(self.freeze_time, int) and self.freeze_time < 1:
            raise ConfigurationError("freeze time must be >= 1")
        if self.macro_refresh not in ("every", "before_solve"):
            raise ConfigurationError("macro_refresh must be 'every' or 'before_solve'")

    def resolved_freeze(self, horizon: int | None = None) -> float:
        """Freeze time as a number (``inf`` for never)."""
        if self.freeze_time == "never":
            return math.inf
        if self.freeze_time == "auto":
            if horizon is None:
                return math.inf
            return float(max(1, math.ceil(0.85 * horizon)))
        return float(self.freeze_time)


# ---------------------------------------------------------------- primitives

def nearest_center(points, centers):
    """Nearest-center labels and distances; ties to the lowest index."""
    points = np.atleast_2d(points)
    centers = np.atleast_2d(centers)
    d2 = _sqdist(points, centers)
    labels = np.argmin(d2, axis=1)
    return labels, np.sqrt(d2[np.arange(len(points)), labels])


def _sqdist(a, b):
    diff = a[:, None, :] - b[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def greedy_k_centers(points, K: int, seed: int = 0):
    """Farthest-point traversal; returns ``(centers, radius)``.

    The first center is drawn uniformly; each subsequent center is the point
    farthest from the current set. Duplicate points are never selected twice,
    so fewer than ``K`` centers come back when there are fewer distinct points.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[0] == 0:
        raise ValueError("greedy k-centers on empty input")
    if K < 1:
        raise ValueError("K must be positive")
    rng = np.random.default_rng(seed)
    idx = [int(rng.integers(points.shape[0]))]
    dist = np.linalg.norm(points - points[idx[0]], axis=1)
    while len(idx) < K:
        far = int(np.argmax(dist))
        if dist[far] == 0.0:
            break
        idx.append(far)
        dist = np.minimum(dist, np.linalg.norm(points - points[far], axis=1))
    return points[idx].copy(), float(dist.max())


@dataclass
class KMeansResult:
    centers: np.ndarray
    labels: np.ndarray
    objective: float
    history: list = field(default_factory=list)
    n_iter: int = 0
    K_requested: int = 0

    @property
    def K(self) -> int:
        return self.centers.shape[0]


def _kmeans_pp(points, weights, K, rng):
    probs = weights / weights.sum()
    centers = [points[rng.choice(len(points), p=probs)]]
    d2 = np.sum((points - centers[0]) ** 2, axis=1)
    for _ in range(1, K):
        mass = weights * d2
        if mass.sum() <= 0:
            break
        c = points[rng.choice(len(points), p=mass / mass.sum())]
        centers.append(c)
        d2 = np.minimum(d2, np.sum((points - c) ** 2, axis=1))
    return np.array(centers)


def _extend_farthest(points, centers, K):
    centers = list(centers)
    d = np.min(_sqdist(points, np.array(centers)), axis=1)
    while len(centers) < K:
        far = int(np.argmax(d))
        if d[far] == 0.0:
            break
        centers.append(points[far])
        d = np.minimum(d, np.sum((points - points[far]) ** 2, axis=1))
    return np.array(centers)


def kmeans(points, K: int, warm_start=None, weights=None, max_iters: int = 100,
           tol: float = 1e-8, seed: int = 0) -> KMeansResult:
    """Weighted Lloyd iteration under squared Euclidean cost.

    Without a warm start the centers are seeded by k-means++. A warm start
    with fewer than ``K`` centers is topped up with farthest points. If fewer
    than ``K`` distinct (positively weighted) points exist, ``K`` is reduced.
    An empty cluster is reseeded at the point farthest from its center.
    Iteration stops when the largest center shift is below ``tol``.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = points.shape[0]
    weights = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    if np.any(weights < 0):
        raise ValueError("k-means weights must be nonnegative")
    active = weights > 0
    pts, w = points[active], weights[active]
    n_distinct = np.unique(pts, axis=0).shape[0]
    K_eff = min(K, n_distinct)
    if K_eff < K:
        log.debug("k-means: K=%d reduced to %d distinct points", K, K_eff)

    if warm_start is not None and len(warm_start) > 0:
        centers = np.atleast_2d(np.asarray(warm_start, dtype=float))[:K_eff].copy()
        if centers.shape[0] < K_eff:
            centers = _extend_farthest(pts, centers, K_eff)
    else:
        centers = _kmeans_pp(pts, w, K_eff, np.random.default_rng(seed))
        if centers.shape[0] < K_eff:
            centers = _extend_farthest(pts, centers, K_eff)

    history = []
    it = 0
    for it in range(1, max_iters + 1):
        d2 = _sqdist(pts, centers)
        labels = np.argmin(d2, axis=1)
        mind = d2[np.arange(len(pts)), labels]
        history.append(float(np.dot(w, mind)))
        new = centers.copy()
        taken = set()
        for k in range(centers.shape[0]):
            mask = labels == k
            wk = w[mask].sum()
            if wk > 0:
                new[k] = w[mask] @ pts[mask] / wk
            else:
                order = np.argsort(-mind, kind="stable")
                for i in order:
                    if int(i) not in taken:
                        taken.add(int(i))
                        new[k] = pts[i]
                        mind[i] = 0.0
                        break
        shift = float(np.max(np.linalg.norm(new - centers, axis=1)))
        centers = new
        if shift < tol:
            break

    labels_all, _ = nearest_center(points, centers)
    d2 = _sqdist(pts, centers)
    obj = float(np.dot(w, d2.min(axis=1)))
    return KMeansResult(centers=centers, labels=labels_all, objective=obj, history=history,
                        n_iter=it, K_requested=K)


def supcover_init(support: SupportSet, K: int, seed: int = 0, max_candidates: int = 20000):
    """Greedy cover of a bounded box by ``K`` balls; returns ``(centers, eta)``.

    The farthest-point search runs over a lattice of the box plus its corners.
    The returned radius adds the lattice half-cell diagonal, so it is a
    guaranteed covering radius for the whole box.
    """
    if support.kind != "box" or not support.bounded_box:
        raise ConfigurationError("SupCover requires a bounded box support")
    lo, hi = support.lower, support.upper
    d = lo.shape[0]
    width = hi - lo
    live = width > 0
    m = int(live.sum())
    if m == 0:
        return lo[None, :].copy(), 0.0
    per_axis = max(2, int(math.floor(max_candidates ** (1.0 / m))))
    axes = [np.linspace(lo[i], hi[i], per_axis) if live[i] else np.array([lo[i]]) for i in range(d)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    if m <= 12:
        corners = np.array(np.meshgrid(*[[lo[i], hi[i]] for i in range(d)], indexing="ij"))
        grid = np.vstack([grid, corners.reshape(d, -1).T])
    centers, eta = greedy_k_centers(grid, K, seed=seed)
    spacing = np.where(live, width / (per_axis - 1), 0.0)
    return centers, float(eta + 0.5 * np.linalg.norm(spacing))


# ---------------------------------------------------------------- algorithms

class _Clusterer:
    """Shared plumbing: label tracking and the stream-facing interface."""

    config: ClusteringConfig

    def __init__(self, config: ClusteringConfig, horizon: int | None = None):
        self.config = config
        self.tau = config.resolved_freeze(horizon)
        self.t = 0
        self.dim: int | None = None

    def _check(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.dim is None:
            self.dim = points.shape[1]
        elif points.shape[1] != self.dim:
            raise DimensionError(f"expected dimension {self.dim}, got {points.shape[1]}")
        return points

    @property
    def frozen(self) -> bool:
        return self.t >= self.tau

    @property
    def retained_points(self) -> int:
        return 0

    def labels(self) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


class SupCover(_Clusterer):
    """Fixed Voronoi cells of a greedy cover of a bounded box."""

    def __init__(self, config: ClusteringConfig, support: SupportSet, horizon: int | None = None):
        super().__init__(config, horizon)
        self.support = support
        self.centers, self.eta = supcover_init(support, config.K, seed=config.rng_seed)
        self.dim = self.centers.shape[1]
        self._dist = ClusteredDistribution(
            [ClusterStat(mean=c.copy(), count=0, center=c.copy()) for c in self.centers])
        self._labels: list[int] = []

    def initialize(self, points) -> None:
        self._assign(self._check(points))

    def update(self, points, t: int) -> None:
        self.t = t
        self._assign(self._check(points))

    def _assign(self, points):
        labels, _ = nearest_center(points, self.centers)
        for u, k in zip(points, labels):
            c = self._dist.clusters[k]
            if c.count == 0:
                c.mean = np.zeros_like(u)
            self._dist.incorporate(u, int(k))
        if self.config.track_labels:
            self._labels.extend(int(k) for k in labels)

    @property
    def distribution(self) -> ClusteredDistribution:
        return self._dist.nonempty()

    def labels(self) -> np.ndarray:
        counts = self._dist.counts
        remap = np.cumsum(counts > 0) - 1
        return remap[np.asarray(self._labels, dtype=int)]

    def to_dict(self) -> dict:
        return {
            "kind": "supcover", "config": asdict(self.config), "t": self.t,
            "support": {"lower": self.support.lower.tolist(), "upper": self.support.upper.tolist()},
            "centers": self.centers.tolist(), "eta": self.eta,
            "clusters": [_stat_dict(c) for c in self._dist.clusters], "labels": list(self._labels),
        }

    @classmethod
    def from_dict(cls, data: dict) -> SupCover:
        cfg = ClusteringConfig(**data["config"])
        obj = cls.__new__(cls)
        _Clusterer.__init__(obj, cfg)
        obj.tau = cfg.resolved_freeze(None) if cfg.freeze_time != "auto" else math.inf
        obj.t = data["t"]
        obj.support = SupportSet.box(data["support"]["lower"], data["support"]["upper"])
        obj.centers = np.array(data["centers"])
        obj.eta = data["eta"]
        obj.dim = obj.centers.shape[1]
        obj._dist = ClusteredDistribution([_stat_from(c) for c in data["clusters"]])
        obj._labels = list(data["labels"])
        return obj


class Reclustering(_Clusterer):
    """Warm-started k-means over the whole history until the freeze time."""

    def __init__(self, config: ClusteringConfig, horizon: int | None = None):
        super().__init__(config, horizon)
        self._points: list[np.ndarray] = []
        self._cache: np.ndarray | None = None
        self.centers: np.ndarray | None = None
        self._labels = np.zeros(0, dtype=int)
        self._dist = ClusteredDistribution()
        self.last_kmeans: KMeansResult | None = None

    @property
    def history(self) -> np.ndarray:
        if self._cache is None:
            self._cache = np.vstack(self._points)
            self._points = [self._cache]
        return self._cache

    @property
    def retained_points(self) -> int:
        return self.history.shape[0] if self._points else 0

    def _fit(self):
        cfg = self.config
        res = kmeans(self.history, cfg.K, warm_start=self.centers, max_iters=cfg.kmeans_max_iters,
                     tol=cfg.kmeans_tol, seed=cfg.rng_seed)
        self.last_kmeans = res
        used = np.unique(res.labels)
        remap = -np.ones(res.K, dtype=int)
        remap[used] = np.arange(len(used))
        self.centers = res.centers[used]
        self._labels = remap[res.labels]
        self._dist = ClusteredDistribution.from_labels(self.history, self._labels, self.centers)

    def initialize(self, points) -> None:
        self._points.append(self._check(points).copy())
        self._cache = None
        self._fit()

    def update(self, points, t: int) -> None:
        points = self._check(points)
        self.t = t
        if t >= self.tau:
            labels, _ = nearest_center(points, self.centers)
            for u, k in zip(points, labels):
                self._dist.incorporate(u, int(k))
            self._points.append(points.copy())
            self._cache = None
            self._labels = np.concatenate([self._labels, labels])
        else:
            self._points.append(points.copy())
            self._cache = None
            self._fit()

    @property
    def distribution(self) -> ClusteredDistribution:
        return self._dist

    def labels(self) -> np.ndarray:
        return self._labels.copy()

    def to_dict(self) -> dict:
        return {
            "kind": "reclustering", "config": asdict(self.config), "t": self.t, "tau": self.tau,
            "points": self.history.tolist() if self._points else [],
            "centers": None if self.centers is None else self.centers.tolist(),
            "labels": self._labels.tolist(),
            "clusters": [_stat_dict(c) for c in self._dist.clusters],
        }

    @classmethod
    def from_dict(cls, data: dict) -> Reclustering:
        obj = cls(ClusteringConfig(**data["config"]))
        obj.t, obj.tau = data["t"], data["tau"]
        if data["points"]:
            obj._points = [np.array(data["points"], dtype=float)]
            obj.dim = obj._points[0].shape[1]
        obj.centers = None if data["centers"] is None else np.array(data["centers"])
        obj._labels = np.array(data["labels"], dtype=int)
        obj._dist = ClusteredDistribution([_stat_from(c) for c in data["clusters"]])
        return obj


@dataclass
class MicroCluster:
    center: np.ndarray
    mean: np.ndarray
    count: int
    m2: float  # sum of squared deviations from the mean
    uid: int
    rmse_init: float = 0.0  # heuristic spread used while the cluster is a singleton

    @property
    def rmse(self) -> float:
        if self.count < 2:
            return self.rmse_init
        return math.sqrt(max(self.m2, 0.0) / self.count)

    def add(self, u) -> None:
        old = self.mean
        self.count += 1
        self.mean = old + (u - old) / self.count
        self.m2 += float(np.dot(u - old, u - self.mean))


class OnlineClustering(_Clusterer):
    """Two-layer micro/macro clustering that discards raw datapoints."""

    def __init__(self, config: ClusteringConfig, horizon: int | None = None):
        super().__init__(config, horizon)
        self.micro: list[MicroCluster] = []
        self.macro_centers: np.ndarray | None = None
        self.macro_assignment = np.zeros(0, dtype=int)
        self._dist = ClusteredDistribution()
        self._dirty = False
        self._next_uid = 0
        self._alias: dict[int, int] = {}
        self._point_uids: list[int] = []
        self._frozen_labels: list[int] | None = None
        self.merges = 0

    # -- micro layer
    def _new_uid(self) -> int:
        self._next_uid += 1
        return self._next_uid - 1

    def _singleton_rmse(self, exclude=None) -> float:
        vals = [m.rmse for m in self.micro if m is not exclude and m.rmse > 0]
        return 2.0 * min(vals) if vals else 0.0

    def _micro_centers(self) -> np.ndarray:
        return np.array([m.center for m in self.micro])

    def initialize(self, points) -> None:
        points = self._check(points)
        cfg = self.config
        centers, _ = greedy_k_centers(points, cfg.Q, seed=cfg.rng_seed)
        labels, _ = nearest_center(points, centers)
        for q, c in enumerate(centers):
            members = points[labels == q]
            mean = members.mean(axis=0)
            m2 = float(np.sum((members - mean) ** 2))
            self.micro.append(MicroCluster(center=c.copy(), mean=mean, count=len(members), m2=m2,
                                           uid=self._new_uid()))
        for m in self.micro:
            if m.count < 2:
                m.rmse_init = self._singleton_rmse(exclude=m)
        if cfg.track_labels:
            self._point_uids.extend(self.micro[q].uid for q in labels)
        self._refresh_macro()

    def _absorb_or_spawn(self, u) -> None:
        labels, dists = nearest_center(u[None, :], self._micro_centers())
        q, d = int(labels[0]), float(dists[0])
        target = self.micro[q]
        if d <= 2.0 * target.rmse:
            target.add(u)
            uid = target.uid
        else:
            new = MicroCluster(center=u.copy(), mean=u.copy(), count=1, m2=0.0, uid=self._new_uid(),
                               rmse_init=self._singleton_rmse())
            self.micro.append(new)
            uid = new.uid
            if len(self.micro) > self.config.Q:
                self._merge_closest()
        if self.config.track_labels:
            self._point_uids.append(uid)

    def _merge_closest(self) -> None:
        centers = self._micro_centers()
        d2 = _sqdist(centers, centers)
        d2[np.tril_indices(len(centers))] = np.inf
        i, j = np.unravel_index(int(np.argmin(d2)), d2.shape)
        a, b = self.micro[i], self.micro[j]
        n = a.count + b.count
        mean = (a.count * a.mean + b.count * b.mean) / n
        diff = a.mean - b.mean
        m2 = a.m2 + b.m2 + a.count * b.count / n * float(np.dot(diff, diff))
        center = (a.count * a.center + b.count * b.center) / n
        merged = MicroCluster(center=center, mean=mean, count=n, m2=m2, uid=self._new_uid(),
                              rmse_init=max(a.rmse_init, b.rmse_init))
        self._alias[a.uid] = merged.uid
        self._alias[b.uid] = merged.uid
        self.micro = [m for k, m in enumerate(self.micro) if k not in (i, j)]
        self.micro.append(merged)
        self.merges += 1

    # -- macro layer
    def _refresh_macro(self) -> None:
        cfg = self.config
        centers = self._micro_centers()
        counts = np.array([m.count for m in self.micro], dtype=float)
        res = kmeans(centers, cfg.K, warm_start=self.macro_centers, weights=counts,
                     max_iters=cfg.kmeans_max_iters, tol=cfg.kmeans_tol, seed=cfg.rng_seed)
        used = np.unique(res.labels)
        remap = -np.ones(res.K, dtype=int)
        remap[used] = np.arange(len(used))
        self.macro_centers = res.centers[used]
        self.macro_assignment = remap[res.labels]
        clusters = []
        for k in range(len(used)):
            members = [m for m, a in zip(self.micro, self.macro_assignment) if a == k]
            n = sum(m.count for m in members)
            mean = sum(m.count * m.mean for m in members) / n
            m2 = sum(m.m2 + m.count * float(np.sum((m.mean - mean) ** 2)) for m in members)
            clusters.append(ClusterStat(mean=mean, count=n, center=self.macro_centers[k].copy(),
                                        rmse=math.sqrt(m2 / n)))
        self._dist = ClusteredDistribution(clusters)
        self._dirty = False

    def _freeze(self) -> None:
        if self._dirty:
            self._refresh_macro()
        if self.config.track_labels:
            self._frozen_labels = list(self._macro_labels_from_micro())

    def _macro_labels_from_micro(self) -> np.ndarray:
        index = {m.uid: q for q, m in enumerate(self.micro)}
        out = np.empty(len(self._point_uids), dtype=int)
        for i, uid in enumerate(self._point_uids):
            while uid in self._alias:
                uid = self._alias[uid]
            out[i] = self.macro_assignment[index[uid]]
        return out

    def update(self, points, t: int) -> None:
        points = self._check(points)
        was_frozen = self.frozen
        self.t = t
        if self.frozen:
            if not was_frozen:
                self._freeze()
            labels, _ = nearest_center(points, self.macro_centers)
            for u, k in zip(points, labels):
                self._dist.incorporate(u, int(k))
            if self._frozen_labels is not None:
                self._frozen_labels.extend(int(k) for k in labels)
            return
        for u in points:
            self._absorb_or_spawn(u)
        self._dirty = True
        if self.config.macro_refresh == "every":
            self._refresh_macro()

    @property
    def distribution(self) -> ClusteredDistribution:
        if self._dirty:
            self._refresh_macro()
        return self._dist

    @property
    def centers(self) -> np.ndarray:
        return self.macro_centers

    def labels(self) -> np.ndarray:
        if not self.config.track_labels:
            raise RuntimeError("label tracking is disabled for this clusterer")
        if self._frozen_labels is not None:
            return np.asarray(self._frozen_labels, dtype=int)
        if self._dirty:
            self._refresh_macro()
        return self._macro_labels_from_micro()

    def to_dict(self) -> dict:
        if self._dirty:
            self._refresh_macro()
        return {
            "kind": "online", "config": asdict(self.config), "t": self.t, "tau": self.tau,
            "micro": [{"center": m.center.tolist(), "mean": m.mean.tolist(), "count": m.count,
                       "m2": m.m2, "uid": m.uid, "rmse_init": m.rmse_init} for m in self.micro],
            "macro_centers": self.macro_centers.tolist(),
            "macro_assignment": self.macro_assignment.tolist(),
            "clusters": [_stat_dict(c) for c in self._dist.clusters],
            "next_uid": self._next_uid, "alias": [[k, v] for k, v in self._alias.items()],
            "point_uids": list(self._point_uids), "frozen_labels": self._frozen_labels,
            "merges": self.merges,
        }

    @classmethod
    def from_dict(cls, data: dict) -> OnlineClustering:
        obj = cls(ClusteringConfig(**data["config"]))
        obj.t, obj.tau = data["t"], data["tau"]
        obj.micro = [MicroCluster(center=np.array(m["center"]), mean=np.array(m["mean"]),
                                  count=m["count"], m2=m["m2"], uid=m["uid"],
                                  rmse_init=m["rmse_init"]) for m in data["micro"]]
        obj.dim = obj.micro[0].center.shape[0] if obj.micro else None
        obj.macro_centers = np.array(data["macro_centers"])
        obj.macro_assignment = np.array(data["macro_assignment"], dtype=int)
        obj._dist = ClusteredDistribution([_stat_from(c) for c in data["clusters"]])
        obj._next_uid = data["next_uid"]
        obj._alias = {k: v for k, v in data["alias"]}
        obj._point_uids = list(data["point_uids"])
        obj._frozen_labels = data["frozen_labels"]
        obj.merges = data["merges"]
        return obj


def _stat_dict(c: ClusterStat) -> dict:
    return {"mean": c.mean.tolist(), "count": c.count, "center": c.center.tolist(), "rmse": c.rmse}


def _stat_from(d: dict) -> ClusterStat:
    return ClusterStat(mean=np.array(d["mean"]), count=d["count"], center=np.array(d["center"]),
                       rmse=d["rmse"])


def make_clusterer(config: ClusteringConfig, support: SupportSet | None = None,
                   horizon: int | None = None):
    if config.algorithm == "supcover":
        if support is None:
            raise ConfigurationError("SupCover needs a bounded box support")
        return SupCover(config, support, horizon)
    if config.algorithm == "reclustering":
        return Reclustering(config, horizon)
    return OnlineClustering(config, horizon)


def load_checkpoint(data: dict):
    kinds = {"supcover": SupCover, "reclustering": Reclustering, "online": OnlineClustering}
    return kinds[data["kind"]].from_dict(data)


def recluster_step(state: Reclustering, new_point, t: int) -> Reclustering:
    state.update(np.atleast_2d(new_point), t)
    return state


def online_cluster_step(state: OnlineClustering, new_point, t: int) -> OnlineClustering:
    state.update(np.atleast_2d(new_point), t)
    return state
