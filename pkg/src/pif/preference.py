"""Preference embedding and the Tanimoto / Jaccard distances.

A point is mapped to a vector in ``[0, 1]^m`` whose ``j``-th entry is the
preference it grants to the ``j``-th model of a pool sampled RANSAC-style
from the data.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DegenerateSample, DimensionMismatch, NonBinaryInput, PoolExhausted
from .geometry import (
    ModelFamily,
    ModelInstance,
    as_points,
    fit_minimal,
    params_array,
    residual_matrix,
)

__all__ = [
    "MAX_RETRIES",
    "PHI_EXPONENTS",
    "EmbeddingConfig",
    "PreferenceMatrix",
    "sample_pool",
    "embed",
    "tanimoto",
    "jaccard",
    "pairwise_distances",
]

MAX_RETRIES = 100
PHI_EXPONENTS = ("sigma", "sigma_squared")


@dataclass(frozen=True)
class EmbeddingConfig:
    """Parameters of the preference embedding.

    ``phi_exponent`` selects the Gaussian denominator: ``"sigma"`` gives
    ``exp(-d**2 / sigma)``, ``"sigma_squared"`` gives ``exp(-d**2 / sigma**2)``.
    """

    sigma: float
    pool_multiplier: float = 10.0
    binarize: bool = False
    rng_seed: int = 0
    phi_exponent: str = "sigma"

    def __post_init__(self) -> None:
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not (np.isfinite(self.pool_multiplier) and self.pool_multiplier > 0):
            raise ValueError(
                f"pool_multiplier must be positive, got {self.pool_multiplier}"
            )
        if self.phi_exponent not in PHI_EXPONENTS:
            raise ValueError(
                f"phi_exponent must be one of {PHI_EXPONENTS}, got {self.phi_exponent!r}"
            )

    def pool_size(self, n_points: int) -> int:
        return max(1, int(round(self.pool_multiplier * n_points)))


@dataclass
class PreferenceMatrix:
    """Rows are the preference vectors of the embedded points."""

    values: np.ndarray
    binary: bool = False

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError("preference matrix must be 2-dimensional")
        if self.values.size and (self.values.min() < 0 or self.values.max() > 1):
            raise ValueError("preferences must lie in [0, 1]")
        if self.binary and not np.isin(self.values, (0.0, 1.0)).all():
            raise NonBinaryInput("binary preference matrix has non-binary entries")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]

    def __len__(self) -> int:
        return self.n

    def to_csv(self, path: str | Path) -> None:
        fmt = "%d" if self.binary else "%.17g"
        header = ",".join(f"p_{j}" for j in range(self.m))
        np.savetxt(path, self.values, fmt=fmt, delimiter=",", header=header, comments="")

    @classmethod
    def read_csv(cls, path: str | Path) -> "PreferenceMatrix":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if not header or not all(h == f"p_{j}" for j, h in enumerate(header)):
                raise ValueError(f"{path}: header must be p_0..p_{{m-1}}")
            rows = []
            for lineno, row in enumerate(reader, start=2):
                if len(row) != len(header):
                    raise ValueError(
                        f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}"
                    )
                try:
                    rows.append([float(v) for v in row])
                except ValueError as exc:
                    raise ValueError(f"{path}:{lineno}: {exc}") from None
        values = np.array(rows, dtype=float).reshape(len(rows), len(header))
        return cls(values, binary=bool(np.isin(values, (0.0, 1.0)).all()))


def sample_pool(
    points, family: ModelFamily | str, m: int, rng_seed: int = 0
) -> list[ModelInstance]:
    """Draw ``m`` models, each fitted to a uniform minimal sample of ``points``.

    Degenerate minimal samples are redrawn, at most ``MAX_RETRIES`` times per
    model; past that ``PoolExhausted`` is raised.
    """
    family = ModelFamily.parse(family)
    pts = as_points(points)
    k = family.minimal_sample_size
    if pts.shape[0] < k:
        raise ValueError(
            f"{family.value} models need at least {k} points, got {pts.shape[0]}"
        )
    if m < 1:
        raise ValueError(f"pool size must be >= 1, got {m}")
    rng = np.random.default_rng(rng_seed)
    n = pts.shape[0]
    pool = []
    for slot in range(m):
        for _ in range(MAX_RETRIES + 1):
            idx = rng.choice(n, size=k, replace=False)
            try:
                pool.append(fit_minimal(family, pts[idx]))
                break
            except DegenerateSample:
                continue
        else:
            raise PoolExhausted(
                f"slot {slot}: {MAX_RETRIES} consecutive degenerate minimal samples"
            )
    return pool


def embed(points, pool: Sequence[ModelInstance], config: EmbeddingConfig) -> PreferenceMatrix:
    family, params = params_array(pool)
    delta = residual_matrix(family, params, points)
    inliers = delta <= 3.0 * config.sigma
    if config.binarize:
        return PreferenceMatrix(inliers.astype(float), binary=True)
    denom = config.sigma if config.phi_exponent == "sigma" else config.sigma**2
    values = np.where(inliers, np.exp(-(delta**2) / denom), 0.0)
    return PreferenceMatrix(values, binary=False)


def _check_pair(p, q) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape or p.ndim != 1:
        raise DimensionMismatch(f"vectors of shape {p.shape} and {q.shape}")
    return p, q


def _tanimoto_from_products(ip, sq_p, sq_q):
    """Tanimoto distance given inner products and squared norms.

    The 0/0 case (both vectors all-zero) is defined as distance 0.
    """
    denom = sq_p + sq_q - ip
    with np.errstate(invalid="ignore", divide="ignore"):
        d = np.where(denom > 0, 1.0 - ip / np.where(denom > 0, denom, 1.0), 0.0)
    return np.clip(d, 0.0, 1.0)


def tanimoto(p, q) -> float:
    """Tanimoto distance between two non-negative vectors."""
    p, q = _check_pair(p, q)
    return float(_tanimoto_from_products(p @ q, p @ p, q @ q))


def jaccard(p, q) -> float:
    """Jaccard distance ``1 - |p & q| / |p | q|`` between binary vectors."""
    p, q = _check_pair(p, q)
    if not (np.isin(p, (0.0, 1.0)).all() and np.isin(q, (0.0, 1.0)).all()):
        raise NonBinaryInput("jaccard distance needs 0/1 vectors")
    pb = p.astype(bool)
    qb = q.astype(bool)
    union = int(np.count_nonzero(pb | qb))
    if union == 0:
        return 0.0
    return 1.0 - np.count_nonzero(pb & qb) / union


def pairwise_distances(a, b, metric: str) -> np.ndarray:
    """Distance matrix between rows of ``a`` and rows of ``b``.

    ``metric`` is ``"tanimoto"``, ``"jaccard"`` (Tanimoto on 0/1 data) or
    ``"euclidean"``.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatch(f"dimensions {a.shape[1]} and {b.shape[1]} differ")
    if metric == "euclidean":
        from scipy.spatial.distance import cdist

        return cdist(a, b)
    if metric == "jaccard" and not (
        np.isin(a, (0.0, 1.0)).all() and np.isin(b, (0.0, 1.0)).all()
    ):
        raise NonBinaryInput("jaccard distance needs 0/1 vectors")
    if metric not in ("tanimoto", "jaccard"):
        raise ValueError(f"unknown metric {metric!r}")
    ip = a @ b.T
    sq_a = np.einsum("ij,ij->i", a, a)
    sq_b = np.einsum("ij,ij->i", b, b)
    return _tanimoto_from_products(ip, sq_a[:, None], sq_b[None, :])
