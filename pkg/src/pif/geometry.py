"""Parametric 2D model families, minimal-sample fitting and point residuals.

Lines are kept in Hessian normal form ``a*x + b*y + c = 0`` with
``a**2 + b**2 == 1`` so the residual is a single dot product. Circles are
``(cx, cy, r)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateSample

__all__ = [
    "ModelFamily",
    "ModelInstance",
    "as_points",
    "fit_minimal",
    "residual",
    "residuals",
    "params_array",
    "residual_matrix",
]

_DET_TOL = 1e-12


class ModelFamily(enum.Enum):
    LINE = "line"
    CIRCLE = "circle"

    @property
    def minimal_sample_size(self) -> int:
        return 2 if self is ModelFamily.LINE else 3

    @classmethod
    def parse(cls, value: "ModelFamily | str") -> "ModelFamily":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(
                f"unknown model family {value!r}; expected 'line' or 'circle'"
            ) from None


@dataclass(frozen=True)
class ModelInstance:
    """A fitted line ``(a, b, c)`` or circle ``(cx, cy, r)``."""

    kind: ModelFamily
    params: tuple[float, float, float]

    def __post_init__(self) -> None:
        p = np.asarray(self.params, dtype=float)
        if p.shape != (3,) or not np.all(np.isfinite(p)):
            raise ValueError(f"invalid model parameters {self.params!r}")
        if self.kind is ModelFamily.LINE:
            if abs(np.hypot(p[0], p[1]) - 1.0) > 1e-9:
                raise ValueError("line normal must have unit norm")
        elif p[2] <= 0:
            raise ValueError("circle radius must be strictly positive")

    def residuals(self, points) -> np.ndarray:
        return residuals(self, points)


def as_points(points) -> np.ndarray:
    """Validate and return an ``(n, 2)`` float array of finite points."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1 and arr.shape[0] == 2:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"expected points of shape (n, 2), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("points must be finite")
    return arr


def _fit_line(sample: np.ndarray) -> ModelInstance:
    p, q = sample
    scale = max(1.0, float(np.abs(sample).max()))
    d = q - p
    length = float(np.hypot(d[0], d[1]))
    if length <= _DET_TOL * scale:
        raise DegenerateSample("line sample points coincide")
    a, b = -d[1] / length, d[0] / length
    c = -(a * p[0] + b * p[1])
    return ModelInstance(ModelFamily.LINE, (float(a), float(b), float(c)))


def _fit_circle(sample: np.ndarray) -> ModelInstance:
    # Perpendicular bisectors of AB and AC, solved in coordinates centred on A.
    a = sample[0]
    u = sample[1] - a
    v = sample[2] - a
    det = 2.0 * (u[0] * v[1] - u[1] * v[0])
    extent = float(np.ptp(sample, axis=0).max())
    if extent == 0.0 or abs(det) < _DET_TOL * extent**2:
        raise DegenerateSample("circle sample points are collinear")
    uu = u @ u
    vv = v @ v
    cx = (v[1] * uu - u[1] * vv) / det
    cy = (u[0] * vv - v[0] * uu) / det
    r = float(np.hypot(cx, cy))
    return ModelInstance(
        ModelFamily.CIRCLE, (float(cx + a[0]), float(cy + a[1]), r)
    )


def fit_minimal(family: ModelFamily | str, sample) -> ModelInstance:
    """Fit the unique model of ``family`` through a minimal sample.

    Raises
    ------
    DegenerateSample
        If the sample points coincide (line) or are collinear (circle).
    """
    family = ModelFamily.parse(family)
    pts = as_points(sample)
    if pts.shape[0] != family.minimal_sample_size:
        raise ValueError(
            f"{family.value} needs exactly {family.minimal_sample_size} points,"
            f" got {pts.shape[0]}"
        )
    if family is ModelFamily.LINE:
        return _fit_line(pts)
    return _fit_circle(pts)


def residuals(model: ModelInstance, points) -> np.ndarray:
    pts = as_points(points)
    p0, p1, p2 = model.params
    if model.kind is ModelFamily.LINE:
        return np.abs(pts[:, 0] * p0 + pts[:, 1] * p1 + p2)
    return np.abs(np.hypot(pts[:, 0] - p0, pts[:, 1] - p1) - p2)


def residual(model: ModelInstance, p) -> float:
    """Orthogonal distance of a single point from ``model``."""
    return float(residuals(model, p)[0])


def params_array(pool: Sequence[ModelInstance]) -> tuple[ModelFamily, np.ndarray]:
    """Stack a homogeneous pool into ``(family, params)`` with params ``(m, 3)``."""
    if len(pool) == 0:
        raise ValueError("model pool is empty")
    kind = pool[0].kind
    if any(model.kind is not kind for model in pool):
        raise ValueError("model pool mixes families")
    return kind, np.array([model.params for model in pool], dtype=float)


def residual_matrix(family: ModelFamily, params: np.ndarray, points) -> np.ndarray:
    """Residuals of every point against every model, shape ``(n, m)``."""
    pts = as_points(points)
    params = np.asarray(params, dtype=float)
    x = pts[:, 0:1]
    y = pts[:, 1:2]
    if family is ModelFamily.LINE:
        return np.abs(x * params[:, 0] + y * params[:, 1] + params[:, 2])
    return np.abs(np.hypot(x - params[:, 0], y - params[:, 1]) - params[:, 2])
