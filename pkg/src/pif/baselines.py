"""Reference detectors: axis-aligned isolation forest and local outlier factor."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, KTooLarge
from .forest import adjustment_c, default_height_limit
from .preference import pairwise_distances

__all__ = [
    "IForParams",
    "IsolationForest",
    "ifor_fit_score",
    "LofParams",
    "LocalOutlierFactor",
    "lof_score",
]

# Random attribute probes before falling back to a full range scan.
_ATTRIBUTE_PROBES = 32


@dataclass(frozen=True)
class IForParams:
    t: int = 100
    psi: int = 256
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.t < 1:
            raise ValueError(f"t must be >= 1, got {self.t}")
        if self.psi < 2:
            raise ValueError(f"psi must be >= 2, got {self.psi}")


@dataclass
class _AxisTree:
    feature: np.ndarray  # -1 on leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    size: np.ndarray  # training size at leaves, -1 on internal nodes
    depth: np.ndarray

    def route(self, x: np.ndarray) -> np.ndarray:
        leaf_value = self.depth + np.array(
            [adjustment_c(int(s)) if s >= 0 else 0.0 for s in self.size]
        )
        node = np.zeros(x.shape[0], dtype=np.int64)
        out = np.empty(x.shape[0])
        active = np.arange(x.shape[0])
        while active.size:
            nd = node[active]
            leaf = self.size[nd] >= 0
            out[active[leaf]] = leaf_value[nd[leaf]]
            active = active[~leaf]
            nd = nd[~leaf]
            go_left = x[active, self.feature[nd]] < self.threshold[nd]
            node[active] = np.where(go_left, self.left[nd], self.right[nd])
        return out


class _AxisGrower:
    def __init__(self, x, limit, rng):
        self.x = x
        self.limit = limit
        self.rng = rng
        self.nodes: list[list] = []

    def _pick_feature(self, idx):
        n_features = self.x.shape[1]
        for _ in range(_ATTRIBUTE_PROBES):
            q = int(self.rng.integers(n_features))
            col = self.x[idx, q]
            lo, hi = col.min(), col.max()
            if hi > lo:
                return q, lo, hi
        block = self.x[idx]
        lo_all = block.min(axis=0)
        hi_all = block.max(axis=0)
        candidates = np.flatnonzero(hi_all > lo_all)
        if candidates.size == 0:
            return None
        q = int(candidates[self.rng.integers(candidates.size)])
        return q, lo_all[q], hi_all[q]

    def grow(self, idx: np.ndarray, depth: int) -> int:
        pos = len(self.nodes)
        self.nodes.append([-1, 0.0, -1, -1, idx.size, depth])
        if depth >= self.limit or idx.size <= 1:
            return pos
        picked = self._pick_feature(idx)
        if picked is None:
            return pos
        q, lo, hi = picked
        split = lo
        while split <= lo:
            split = self.rng.uniform(lo, hi)
        below = self.x[idx, q] < split
        left = self.grow(idx[below], depth + 1)
        right = self.grow(idx[~below], depth + 1)
        self.nodes[pos] = [q, split, left, right, -1, depth]
        return pos

    def tree(self) -> _AxisTree:
        cols = list(zip(*self.nodes))
        return _AxisTree(
            np.array(cols[0], dtype=np.int64),
            np.array(cols[1], dtype=float),
            np.array(cols[2], dtype=np.int64),
            np.array(cols[3], dtype=np.int64),
            np.array(cols[4], dtype=np.int64),
            np.array(cols[5], dtype=np.int64),
        )


class IsolationForest:
    """Isolation forest with random axis-parallel splits.

    A node picks an attribute uniformly among those that are not constant on
    its points and a split value uniformly inside that attribute's range. A
    node whose points are all identical becomes a leaf. Height limit,
    leaf correction and score match :class:`pif.forest.PiForest`.
    """

    def __init__(self, params: IForParams | None = None):
        self.params = params or IForParams()
        self.trees: list[_AxisTree] = []
        self.sample_size = 0
        self.n_features = 0

    def fit(self, data) -> "IsolationForest":
        x = np.asarray(data, dtype=float)
        if x.ndim != 2 or x.shape[0] < 2:
            raise ValueError(f"need a 2-D array with at least 2 rows, got {x.shape}")
        n = x.shape[0]
        self.sample_size = min(self.params.psi, n)
        self.n_features = x.shape[1]
        limit = default_height_limit(self.sample_size, 2)
        self.trees = []
        for stream in np.random.SeedSequence(self.params.rng_seed).spawn(self.params.t):
            rng = np.random.default_rng(stream)
            rows = np.sort(rng.choice(n, size=self.sample_size, replace=False))
            grower = _AxisGrower(x, limit, rng)
            grower.grow(rows, 0)
            self.trees.append(grower.tree())
        return self

    def path_lengths(self, data) -> np.ndarray:
        x = np.asarray(data, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.n_features:
            raise DimensionMismatch(
                f"model expects dimension {self.n_features}, got shape {x.shape}"
            )
        return np.column_stack([tree.route(x) for tree in self.trees])

    def score_samples(self, data) -> np.ndarray:
        mean_h = self.path_lengths(data).mean(axis=1)
        return np.power(2.0, -mean_h / adjustment_c(self.sample_size))


def ifor_fit_score(data, params: IForParams | None = None) -> np.ndarray:
    forest = IsolationForest(params).fit(data)
    return forest.score_samples(data)


@dataclass(frozen=True)
class LofParams:
    k: int = 10
    metric: str = "euclidean"

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.metric not in ("euclidean", "tanimoto", "jaccard"):
            raise ValueError(f"unknown metric {self.metric!r}")


# Keeps densities finite when k or more points coincide.
_LRD_EPS = 1e-10


def _neighbourhoods(dist: np.ndarray, k: int):
    """k-distance and tie-inclusive k-neighbourhood masks for each row."""
    kdist = np.partition(dist, k - 1, axis=1)[:, k - 1]
    return kdist, dist <= kdist[:, None]


class LocalOutlierFactor:
    """Local outlier factor under a pluggable metric.

    The k-neighbourhood of a point holds every other point whose distance does
    not exceed its k-distance, so ties at the boundary are all included.
    :meth:`fit_score` scores the training set leaving each point out of its
    own neighbourhood; :meth:`score_samples` scores new points against it.
    """

    def __init__(self, params: LofParams | None = None):
        self.params = params or LofParams()
        self.train_: np.ndarray | None = None

    def fit(self, data, distances=None) -> "LocalOutlierFactor":
        """Fit on ``data``; ``distances`` may supply its precomputed pairwise matrix."""
        x = np.asarray(data, dtype=float)
        if x.ndim != 2:
            raise ValueError(f"expected a 2-D array, got shape {x.shape}")
        if self.params.k >= x.shape[0]:
            raise KTooLarge(f"k={self.params.k} must be smaller than n={x.shape[0]}")
        self.train_ = x
        if distances is None:
            dist = pairwise_distances(x, x, self.params.metric)
        else:
            dist = np.array(distances, dtype=float)
            if dist.shape != (x.shape[0], x.shape[0]):
                raise DimensionMismatch(f"distance matrix shape {dist.shape} for {x.shape[0]} rows")
        np.fill_diagonal(dist, np.inf)
        self.kdist_, mask = _neighbourhoods(dist, self.params.k)
        self.lrd_ = self._lrd(dist, mask)
        self._train_lof = (mask * self.lrd_[None, :]).sum(1) / mask.sum(1) / self.lrd_
        return self

    def _lrd(self, dist, mask):
        reach = np.maximum(dist, self.kdist_[None, :])
        mean_reach = np.where(mask, reach, 0.0).sum(1) / mask.sum(1)
        return 1.0 / (mean_reach + _LRD_EPS)

    def fit_score(self, data, distances=None) -> np.ndarray:
        self.fit(data, distances)
        return self._train_lof.copy()

    def score_samples(self, data) -> np.ndarray:
        if self.train_ is None:
            raise RuntimeError("LocalOutlierFactor is not fitted")
        q = np.asarray(data, dtype=float)
        if q.ndim != 2 or q.shape[1] != self.train_.shape[1]:
            raise DimensionMismatch(
                f"model expects dimension {self.train_.shape[1]}, got shape {q.shape}"
            )
        dist = pairwise_distances(q, self.train_, self.params.metric)
        _, mask = _neighbourhoods(dist, self.params.k)
        lrd_q = self._lrd(dist, mask)
        return (mask * self.lrd_[None, :]).sum(1) / mask.sum(1) / lrd_q


def lof_score(data, params: LofParams | None = None) -> np.ndarray:
    """LOF of every row of ``data`` with respect to the others."""
    return LocalOutlierFactor(params).fit_score(data)
