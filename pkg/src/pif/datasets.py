"""Synthetic 2D benchmarks: stairs and stars of line segments, sets of circles.

Presets reproduce the cardinalities of the reference benchmark suite. Where
only the geometry's look is known, concrete shapes are fixed here:

* ``star<k>``: ``k`` segments of length 2 through the origin at angles
  ``i * pi / k``;
* ``stair<k>``: alternating horizontal and vertical unit segments climbing
  from the origin;
* ``circle<k>``: non-concentric circles with centres on a coarse grid and
  radii in ``[0.5, 1.5]``.

Anomalies are uniform in the bounding box of the normal points, redrawn (up
to 50 times each) while they lie within ``3 * noise_sigma`` of a structure.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import InvalidRatio
from .geometry import ModelFamily

__all__ = [
    "DEFAULT_SIGMA",
    "SWEEP_RATIOS",
    "StructureSpec",
    "DatasetSpec",
    "LabeledDataset",
    "PRESETS",
    "preset",
    "generate",
    "contamination_sweep",
    "concentric_circles",
]

DEFAULT_SIGMA = 0.01
SWEEP_RATIOS = (0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
ANOMALY = -1
_ANOMALY_RETRIES = 50


@dataclass(frozen=True)
class StructureSpec:
    """A segment ``(x0, y0, x1, y1)`` or a circle ``(cx, cy, r)`` with a point count."""

    kind: str
    params: tuple[float, ...]
    count: int

    def __post_init__(self) -> None:
        if self.kind == "segment":
            if len(self.params) != 4:
                raise ValueError("segment needs (x0, y0, x1, y1)")
        elif self.kind == "circle":
            if len(self.params) != 3 or self.params[2] <= 0:
                raise ValueError("circle needs (cx, cy, r) with r > 0")
        else:
            raise ValueError(f"unknown structure kind {self.kind!r}")
        if self.count < 0:
            raise ValueError("structure point count must be non-negative")

    @property
    def family(self) -> ModelFamily:
        return ModelFamily.LINE if self.kind == "segment" else ModelFamily.CIRCLE

    def sample(self, count: int, sigma: float, rng: np.random.Generator) -> np.ndarray:
        u = rng.random(count)
        if self.kind == "segment":
            x0, y0, x1, y1 = self.params
            pts = np.column_stack([x0 + u * (x1 - x0), y0 + u * (y1 - y0)])
        else:
            cx, cy, r = self.params
            angle = 2.0 * np.pi * u
            pts = np.column_stack([cx + r * np.cos(angle), cy + r * np.sin(angle)])
        return pts + rng.normal(scale=sigma, size=pts.shape)

    def distance(self, points: np.ndarray) -> np.ndarray:
        """Euclidean distance from each point to the structure itself."""
        if self.kind == "segment":
            x0, y0, x1, y1 = self.params
            a = np.array([x0, y0])
            d = np.array([x1 - x0, y1 - y0])
            u = np.clip(((points - a) @ d) / (d @ d), 0.0, 1.0)
            return np.linalg.norm(points - (a + u[:, None] * d), axis=1)
        cx, cy, r = self.params
        return np.abs(np.hypot(points[:, 0] - cx, points[:, 1] - cy) - r)


@dataclass(frozen=True)
class DatasetSpec:
    name: str
    structures: tuple[StructureSpec, ...]
    anomaly_count: int
    noise_sigma: float = DEFAULT_SIGMA
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if not self.structures:
            raise ValueError("dataset needs at least one structure")
        kinds = {s.kind for s in self.structures}
        if len(kinds) != 1:
            raise ValueError("all structures of a dataset must share one kind")
        if self.anomaly_count < 0:
            raise ValueError("anomaly_count must be non-negative")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")

    @property
    def family(self) -> ModelFamily:
        return self.structures[0].family

    @property
    def normal_count(self) -> int:
        return sum(s.count for s in self.structures)

    @property
    def total(self) -> int:
        return self.normal_count + self.anomaly_count

    def with_seed(self, seed: int) -> "DatasetSpec":
        return replace(self, rng_seed=seed)


@dataclass
class LabeledDataset:
    """Points with labels: structure index for normal data, -1 for anomalies."""

    points: np.ndarray
    labels: np.ndarray
    name: str = ""
    family: ModelFamily = ModelFamily.LINE
    sigma: float = DEFAULT_SIGMA
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 2)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.labels.shape != (self.points.shape[0],):
            raise ValueError("label count must equal point count")

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def is_anomaly(self) -> np.ndarray:
        return self.labels == ANOMALY

    def summary(self) -> str:
        parts = [f"|X|={len(self)}", f"|A|={int(self.is_anomaly.sum())}"]
        for s in sorted(set(self.labels[self.labels >= 0].tolist())):
            parts.append(f"|S_{s + 1}|={int((self.labels == s).sum())}")
        return f"{self.name or 'dataset'}: " + " ".join(parts)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "y", "label"])
            for (x, y), label in zip(self.points.tolist(), self.labels.tolist()):
                writer.writerow([repr(x), repr(y), label])

    @classmethod
    def read_csv(cls, path: str | Path, **kwargs) -> "LabeledDataset":
        points, labels = [], []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != ["x", "y", "label"]:
                raise ValueError(f"{path}: header must be x,y,label, got {header}")
            for lineno, row in enumerate(reader, start=2):
                if len(row) != 3:
                    raise ValueError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
                try:
                    x, y, label = float(row[0]), float(row[1]), int(row[2])
                except ValueError as exc:
                    raise ValueError(f"{path}:{lineno}: {exc}") from None
                if not (math.isfinite(x) and math.isfinite(y)):
                    raise ValueError(f"{path}:{lineno}: non-finite coordinate")
                if label < ANOMALY:
                    raise ValueError(f"{path}:{lineno}: invalid label {label}")
                points.append((x, y))
                labels.append(label)
        return cls(np.array(points).reshape(-1, 2), np.array(labels, dtype=np.int64), **kwargs)


def _stair(counts) -> tuple[StructureSpec, ...]:
    out = []
    x, y = 0.0, 0.0
    for i, count in enumerate(counts):
        nx, ny = (x + 1.0, y) if i % 2 == 0 else (x, y + 1.0)
        out.append(StructureSpec("segment", (x, y, nx, ny), count))
        x, y = nx, ny
    return tuple(out)


def _star(counts) -> tuple[StructureSpec, ...]:
    k = len(counts)
    out = []
    for i, count in enumerate(counts):
        a = i * math.pi / k
        dx, dy = math.cos(a), math.sin(a)
        out.append(StructureSpec("segment", (-dx, -dy, dx, dy), count))
    return tuple(out)


# Centres on a grid of spacing 2 and radii in [0.5, 1.5]; neighbours overlap.
_CIRCLES = (
    (0.0, 0.0, 1.0),
    (2.0, 0.0, 0.75),
    (0.0, 2.0, 1.25),
    (2.0, 2.0, 0.6),
    (4.0, 1.0, 1.1),
)


def _circles(counts) -> tuple[StructureSpec, ...]:
    return tuple(StructureSpec("circle", _CIRCLES[i], c) for i, c in enumerate(counts))


def _build_presets() -> dict[str, DatasetSpec]:
    table = {
        "stair3": (_stair, (272, 64, 64), 400),
        "stair4": (_stair, (50,) * 4, 200),
        "star5": (_star, (50,) * 5, 250),
        "star11": (_star, (50,) * 11, 550),
        "circle3": (_circles, (376, 62, 62), 500),
        "circle4": (_circles, (50,) * 4, 200),
        "circle5": (_circles, (50,) * 5, 250),
    }
    return {
        name: DatasetSpec(name, maker(counts), anomalies)
        for name, (maker, counts, anomalies) in table.items()
    }


PRESETS: dict[str, DatasetSpec] = _build_presets()


def preset(name: str, seed: int = 0, noise_sigma: float | None = None) -> DatasetSpec:
    try:
        spec = PRESETS[name]
    except KeyError:
        raise ValueError(
            f"unknown preset {name!r}; choose from {', '.join(PRESETS)}"
        ) from None
    spec = spec.with_seed(seed)
    if noise_sigma is not None:
        spec = replace(spec, noise_sigma=noise_sigma)
    return spec


def generate(spec: DatasetSpec) -> LabeledDataset:
    rng = np.random.default_rng(spec.rng_seed)
    parts, labels = [], []
    for i, structure in enumerate(spec.structures):
        parts.append(structure.sample(structure.count, spec.noise_sigma, rng))
        labels.append(np.full(structure.count, i, dtype=np.int64))
    normal = np.concatenate(parts) if parts else np.zeros((0, 2))
    lo = normal.min(axis=0)
    hi = normal.max(axis=0)
    radius = 3.0 * spec.noise_sigma

    def near_structure(p: np.ndarray) -> np.ndarray:
        d = np.min([s.distance(p) for s in spec.structures], axis=0)
        return d <= radius

    anomalies = rng.uniform(lo, hi, size=(spec.anomaly_count, 2))
    if radius > 0:
        redo = near_structure(anomalies)
        for _ in range(_ANOMALY_RETRIES):
            if not redo.any():
                break
            anomalies[redo] = rng.uniform(lo, hi, size=(int(redo.sum()), 2))
            redo[redo] = near_structure(anomalies[redo])
    points = np.concatenate([normal, anomalies])
    labels.append(np.full(spec.anomaly_count, ANOMALY, dtype=np.int64))
    return LabeledDataset(
        points,
        np.concatenate(labels),
        name=spec.name,
        family=spec.family,
        sigma=spec.noise_sigma,
        meta={"seed": spec.rng_seed},
    )


def _apportion(weights, total: int) -> list[int]:
    """Split ``total`` proportionally to ``weights`` by largest remainders."""
    w = np.asarray(weights, dtype=float)
    exact = total * w / w.sum()
    counts = np.floor(exact).astype(int)
    order = np.argsort(-(exact - counts), kind="stable")
    counts[order[: total - counts.sum()]] += 1
    return counts.tolist()


def contamination_sweep(
    base: str, ratio: float, rng_seed: int = 0, total: int = 1000
) -> LabeledDataset:
    """``base`` geometry with ``total`` points of which a fraction ``ratio`` are anomalies.

    ``base`` is ``"stair3"`` or ``"circle5"``; normal points keep the preset's
    proportions across structures.
    """
    if not any(math.isclose(ratio, r) for r in SWEEP_RATIOS):
        raise InvalidRatio(f"ratio must be one of {SWEEP_RATIOS}, got {ratio}")
    name = base.removesuffix("-like")
    if name not in ("stair3", "circle5"):
        raise ValueError(f"sweep base must be stair3 or circle5, got {base!r}")
    spec = PRESETS[name]
    n_anom = int(round(ratio * total))
    counts = _apportion([s.count for s in spec.structures], total - n_anom)
    structures = tuple(replace(s, count=c) for s, c in zip(spec.structures, counts))
    sweep = replace(
        spec,
        name=f"{name}@{ratio:g}",
        structures=structures,
        anomaly_count=n_anom,
        rng_seed=rng_seed,
    )
    return generate(sweep)


def concentric_circles(
    rng_seed: int = 0,
    per_circle: int = 150,
    anomaly_count: int = 150,
    radii: tuple[float, float] = (0.5, 1.0),
    noise_sigma: float = DEFAULT_SIGMA,
    interior: bool = False,
) -> LabeledDataset:
    """Two concentric circles with anomalies uniform in their bounding box.

    With ``interior=True`` only anomalies inside the outer circle are kept
    (oversampling the box so the count is unchanged).
    """
    draw = 3 * anomaly_count if interior else anomaly_count
    spec = DatasetSpec(
        "concentric",
        tuple(StructureSpec("circle", (0.0, 0.0, r), per_circle) for r in radii),
        draw,
        noise_sigma,
        rng_seed,
    )
    data = generate(spec)
    if interior:
        inside = np.hypot(data.points[:, 0], data.points[:, 1]) < max(radii)
        keep = ~data.is_anomaly
        keep[np.flatnonzero(data.is_anomaly & inside)[:anomaly_count]] = True
        data.points, data.labels = data.points[keep], data.labels[keep]
        data.name = "concentric-interior"
    return data
