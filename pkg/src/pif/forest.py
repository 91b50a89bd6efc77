"""Isolation trees built from nested Voronoi tessellations.

Every internal node draws ``b`` seeds from the points that reached it and
sends each point to its nearest seed. Anomalies end up isolated after few
splits, so a short average path length means a high anomaly score.

Seeds are stored once per forest in a seed bank; nodes refer to bank rows.
All three metrics are evaluated from inner products and squared norms, which
lets routing a batch of queries reduce to one matrix product per forest.
"""

from __future__ import annotations

import math
from functools import cached_property
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import DimensionMismatch
from .preference import PreferenceMatrix, _tanimoto_from_products

__all__ = [
    "METRICS",
    "EULER_GAMMA",
    "adjustment_c",
    "default_height_limit",
    "PifParams",
    "ExternalNode",
    "InternalNode",
    "PiTree",
    "PiForest",
    "voronoi_partition",
    "build_tree",
    "build_forest",
    "path_length",
    "score",
]

METRICS = ("tanimoto", "jaccard", "euclidean")
EULER_GAMMA = 0.5772156649015329
TIE_TOL = 1e-12
# Above this many rows the full Gram matrix is not cached during fitting.
_GRAM_CACHE_ROWS = 4096
_QUERY_CHUNK = 4096


def adjustment_c(n: int) -> float:
    """Average path length of an unsuccessful search in a binary tree of ``n`` keys.

    ``c(0) = c(1) = 0``, ``c(2) = 1`` and ``2 H(n-1) - 2 (n-1) / n`` beyond,
    with the harmonic number approximated by ``ln(i) + gamma``.
    """
    if n < 0:
        raise ValueError(f"n must be non-negative, got {n}")
    if n <= 1:
        return 0.0
    if n == 2:
        return 1.0
    return 2.0 * (math.log(n - 1) + EULER_GAMMA) - 2.0 * (n - 1) / n


def default_height_limit(psi: int, b: int) -> int:
    """Smallest integer ``l >= 1`` with ``b**l >= psi``, i.e. ``ceil(log_b psi)``."""
    level = 1
    while b**level < psi:
        level += 1
    return level


@dataclass(frozen=True)
class PifParams:
    t: int = 100
    psi: int = 256
    b: int = 2
    height_limit: int | None = None
    metric: str = "tanimoto"
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.t < 1:
            raise ValueError(f"t must be >= 1, got {self.t}")
        if self.b < 2:
            raise ValueError(f"b must be >= 2, got {self.b}")
        if self.psi < self.b:
            raise ValueError(f"psi must be >= b, got psi={self.psi}, b={self.b}")
        if self.height_limit is not None and self.height_limit < 1:
            raise ValueError(f"height_limit must be >= 1, got {self.height_limit}")
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}, got {self.metric!r}")

    def limit_for(self, sample_size: int) -> int:
        if self.height_limit is not None:
            return self.height_limit
        return default_height_limit(max(sample_size, 2), self.b)


@dataclass(frozen=True)
class ExternalNode:
    size: int


@dataclass(frozen=True)
class InternalNode:
    seeds: tuple[int, ...]  # rows of the owning tree's seed bank
    children: tuple["Node", ...]


Node = Union[ExternalNode, InternalNode]


def _keys(ip, sq_x, sq_s, metric: str):
    """Comparison keys for nearest-seed search (squared distance for euclidean)."""
    if metric == "euclidean":
        return np.maximum(sq_x + sq_s - 2.0 * ip, 0.0)
    return _tanimoto_from_products(ip, sq_x, sq_s)


def _nearest(keys: np.ndarray, sq_x, sq_s, metric: str) -> np.ndarray:
    """Index of the nearest seed along the last axis, lowest index on ties."""
    best = keys.min(axis=-1, keepdims=True)
    if metric == "euclidean":
        tol = TIE_TOL * (1.0 + sq_x + np.max(sq_s, axis=-1, keepdims=True))
    else:
        tol = TIE_TOL
    return np.argmax(keys <= best + tol, axis=-1)


def _as_matrix(points) -> np.ndarray:
    if isinstance(points, PreferenceMatrix):
        return points.values
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D array of vectors, got shape {arr.shape}")
    return arr


def voronoi_partition(points, seeds, metric: str = "tanimoto") -> list[np.ndarray]:
    """Split ``points`` into the Voronoi cells of ``seeds``.

    Returns one array of row indices into ``points`` per seed. A point goes
    to the seed at minimal distance; ties go to the lowest seed index.
    """
    x = _as_matrix(points)
    s = _as_matrix(seeds)
    if x.shape[1] != s.shape[1]:
        raise DimensionMismatch(f"points have dim {x.shape[1]}, seeds {s.shape[1]}")
    sq_x = np.einsum("ij,ij->i", x, x)[:, None]
    sq_s = np.einsum("ij,ij->i", s, s)[None, :]
    keys = _keys(x @ s.T, sq_x, sq_s, metric)
    cell = _nearest(keys, sq_x, sq_s, metric)
    return [np.flatnonzero(cell == i) for i in range(s.shape[0])]


class _Grower:
    """Recursive tree construction over a precomputed Gram matrix."""

    def __init__(self, gram, sq, rows, b, limit, metric, rng):
        self.gram = gram  # indexed by local positions
        self.sq = sq
        self.rows = rows  # local position -> global row id
        self.b = b
        self.limit = limit
        self.metric = metric
        self.rng = rng

    def grow(self, idx: np.ndarray, height: int) -> Node:
        if height >= self.limit or idx.size < self.b:
            return ExternalNode(int(idx.size))
        seeds = idx[self.rng.choice(idx.size, size=self.b, replace=False)]
        sq_x = self.sq[idx][:, None]
        sq_s = self.sq[seeds][None, :]
        keys = _keys(self.gram[np.ix_(idx, seeds)], sq_x, sq_s, self.metric)
        cell = _nearest(keys, sq_x, sq_s, self.metric)
        children = tuple(
            self.grow(idx[cell == i], height + 1) for i in range(self.b)
        )
        return InternalNode(tuple(int(r) for r in self.rows[seeds]), children)


def _remap(node: Node, mapping: dict[int, int]) -> Node:
    if isinstance(node, ExternalNode):
        return node
    return InternalNode(
        tuple(mapping[s] for s in node.seeds),
        tuple(_remap(c, mapping) for c in node.children),
    )


def _collect_seeds(node: Node, out: set[int]) -> None:
    if isinstance(node, InternalNode):
        out.update(node.seeds)
        for child in node.children:
            _collect_seeds(child, out)


@dataclass
class _FlatTree:
    seeds: np.ndarray  # (N, b), -1 on leaves
    children: np.ndarray  # (N, b), -1 on leaves
    sizes: np.ndarray  # (N,), training size at leaves, -1 on internal nodes
    depth: np.ndarray  # (N,)

    @classmethod
    def from_root(cls, root: Node, b: int) -> "_FlatTree":
        seeds, children, sizes, depth = [], [], [], []

        def visit(node: Node, d: int) -> int:
            pos = len(sizes)
            seeds.append([-1] * b)
            children.append([-1] * b)
            sizes.append(-1)
            depth.append(d)
            if isinstance(node, ExternalNode):
                sizes[pos] = node.size
            else:
                seeds[pos] = list(node.seeds)
                children[pos] = [visit(c, d + 1) for c in node.children]
            return pos

        visit(root, 0)
        return cls(
            np.array(seeds, dtype=np.int64).reshape(-1, b),
            np.array(children, dtype=np.int64).reshape(-1, b),
            np.array(sizes, dtype=np.int64),
            np.array(depth, dtype=np.int64),
        )

    def to_root(self) -> Node:
        def build(pos: int) -> Node:
            if self.sizes[pos] >= 0:
                return ExternalNode(int(self.sizes[pos]))
            return InternalNode(
                tuple(int(s) for s in self.seeds[pos]),
                tuple(build(int(c)) for c in self.children[pos]),
            )

        return build(0)

    @cached_property
    def leaf_values(self) -> np.ndarray:
        c = np.array([adjustment_c(int(s)) if s >= 0 else 0.0 for s in self.sizes])
        return self.depth + c


@dataclass
class PiTree:
    """One tree plus a reference to the bank its seed indices point into."""

    root: Node
    seed_bank: np.ndarray
    b: int
    metric: str
    _flat: _FlatTree | None = field(default=None, repr=False, compare=False)

    @property
    def flat(self) -> _FlatTree:
        if self._flat is None:
            self._flat = _FlatTree.from_root(self.root, self.b)
        return self._flat

    def seed_vectors(self, node: InternalNode) -> np.ndarray:
        return self.seed_bank[list(node.seeds)]

    def depth(self) -> int:
        return int(self.flat.depth.max())

    def path_length(self, p, e: int = 0) -> float:
        return path_length(p, self, e)

    def _route(self, gram_q: np.ndarray, sq_q: np.ndarray, sq_bank: np.ndarray):
        """Path length of every query given query-bank inner products."""
        flat = self.flat
        leaf_value = flat.leaf_values
        is_leaf = flat.sizes >= 0
        nq = gram_q.shape[0]
        node = np.zeros(nq, dtype=np.int64)
        out = np.empty(nq)
        active = np.arange(nq)
        while active.size:
            nd = node[active]
            leaf = is_leaf[nd]
            if leaf.any():
                out[active[leaf]] = leaf_value[nd[leaf]]
                active = active[~leaf]
                nd = nd[~leaf]
                if not active.size:
                    break
            s = flat.seeds[nd]
            sq_x = sq_q[active][:, None]
            sq_s = sq_bank[s]
            keys = _keys(gram_q[active[:, None], s], sq_x, sq_s, self.metric)
            cell = _nearest(keys, sq_x, sq_s, self.metric)
            node[active] = flat.children[nd, cell]
        return out


def build_tree(points, current_height: int, params: PifParams, rng=None) -> PiTree:
    """Grow a single tree on all rows of ``points``.

    The returned tree's seed bank is ``points`` itself.
    """
    x = _as_matrix(points)
    rng = np.random.default_rng(params.rng_seed) if rng is None else rng
    gram = x @ x.T
    sq = np.diag(gram).copy()
    rows = np.arange(x.shape[0])
    grower = _Grower(gram, sq, rows, params.b, params.limit_for(x.shape[0]), params.metric, rng)
    root = grower.grow(rows, current_height)
    return PiTree(root, x, params.b, params.metric)


class PiForest:
    """An ensemble of ``t`` trees sharing one seed bank.

    Build with :func:`build_forest` or :meth:`fit`.
    """

    def __init__(self, roots, seed_bank, params: PifParams, sample_size: int):
        self.params = params
        self.seed_bank = np.ascontiguousarray(seed_bank, dtype=float)
        self.sample_size = int(sample_size)
        self.trees = [
            PiTree(root, self.seed_bank, params.b, params.metric) for root in roots
        ]
        self._sq_bank = np.einsum("ij,ij->i", self.seed_bank, self.seed_bank)

    @classmethod
    def fit(cls, prefs, params: PifParams | None = None) -> "PiForest":
        return build_forest(prefs, params or PifParams())

    @property
    def n_features(self) -> int:
        return self.seed_bank.shape[1]

    @property
    def normalizer(self) -> float:
        """``c`` of the per-tree sample size, the denominator of the score exponent."""
        return adjustment_c(self.sample_size)

    def path_lengths(self, points) -> np.ndarray:
        """Path lengths of every row of ``points`` in every tree, shape ``(n, t)``."""
        q = _as_matrix(points)
        if q.shape[1] != self.n_features:
            raise DimensionMismatch(
                f"forest expects dimension {self.n_features}, got {q.shape[1]}"
            )
        out = np.empty((q.shape[0], len(self.trees)))
        for start in range(0, q.shape[0], _QUERY_CHUNK):
            chunk = q[start : start + _QUERY_CHUNK]
            gram_q = chunk @ self.seed_bank.T
            sq_q = np.einsum("ij,ij->i", chunk, chunk)
            for j, tree in enumerate(self.trees):
                out[start : start + chunk.shape[0], j] = tree._route(gram_q, sq_q, self._sq_bank)
        return out

    def score_samples(self, points) -> np.ndarray:
        """Anomaly scores in ``(0, 1]``; higher is more anomalous."""
        mean_h = self.path_lengths(points).mean(axis=1)
        return np.power(2.0, -mean_h / self.normalizer)

    def __len__(self) -> int:
        return len(self.trees)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PiForest):
            return NotImplemented
        return (
            self.params == other.params
            and self.sample_size == other.sample_size
            and np.array_equal(self.seed_bank, other.seed_bank)
            and [t.root for t in self.trees] == [t.root for t in other.trees]
        )


def build_forest(prefs, params: PifParams) -> PiForest:
    """Fit ``params.t`` trees, each on a subsample without replacement.

    Tree ``i`` draws from its own child of ``SeedSequence(params.rng_seed)``,
    so it does not depend on the order in which trees are built.
    """
    x = _as_matrix(prefs)
    n = x.shape[0]
    if n < 2:
        raise ValueError(f"need at least 2 samples to build a forest, got {n}")
    sample_size = min(params.psi, n)
    limit = params.limit_for(sample_size)
    streams = np.random.SeedSequence(params.rng_seed).spawn(params.t)

    full_gram = None
    if n <= _GRAM_CACHE_ROWS:
        full_gram = x @ x.T
    roots = []
    for stream in streams:
        rng = np.random.default_rng(stream)
        rows = np.sort(rng.choice(n, size=sample_size, replace=False))
        if full_gram is not None:
            gram = full_gram[np.ix_(rows, rows)]
        else:
            sub = x[rows]
            gram = sub @ sub.T
        sq = np.diag(gram).copy()
        grower = _Grower(gram, sq, rows, params.b, limit, params.metric, rng)
        roots.append(grower.grow(np.arange(sample_size), 0))

    used: set[int] = set()
    for root in roots:
        _collect_seeds(root, used)
    bank_rows = np.array(sorted(used), dtype=np.int64)
    mapping = {int(r): i for i, r in enumerate(bank_rows)}
    roots = [_remap(root, mapping) for root in roots]
    bank = x[bank_rows] if bank_rows.size else np.zeros((0, x.shape[1]))
    return PiForest(roots, bank, params, sample_size)


def path_length(p, tree: PiTree, e: int = 0) -> float:
    """Depth at which ``p`` lands in ``tree`` plus the leaf-size correction."""
    p = np.asarray(p, dtype=float)
    if p.shape != (tree.seed_bank.shape[1],):
        raise DimensionMismatch(
            f"tree expects dimension {tree.seed_bank.shape[1]}, got {p.shape}"
        )
    sq_p = float(p @ p)
    node = tree.root
    while isinstance(node, InternalNode):
        s = tree.seed_vectors(node)
        sq_s = np.einsum("ij,ij->i", s, s)
        keys = _keys(s @ p, sq_p, sq_s, tree.metric)
        node = node.children[int(_nearest(keys, sq_p, sq_s, tree.metric))]
        e += 1
    return e + adjustment_c(node.size)


def score(p, forest: PiForest) -> float:
    """Anomaly score of a single vector: ``2 ** (-mean path length / c(psi))``."""
    h = np.array([path_length(p, tree, 0) for tree in forest.trees])
    return float(2.0 ** (-h.mean() / forest.normalizer))
