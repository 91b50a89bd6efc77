"""End-to-end detector: sample a model pool, embed, fit a forest, score."""

from __future__ import annotations

import numpy as np

from .forest import PifParams, PiForest, build_forest
from .geometry import ModelFamily, ModelInstance, as_points, params_array
from .preference import EmbeddingConfig, PreferenceMatrix, embed, sample_pool

__all__ = ["PreferenceIsolationForest"]


class PreferenceIsolationForest:
    """Anomaly detector for 2D points lying on lines or circles.

    Parameters
    ----------
    family : ModelFamily or str
        Model family used to build the preference pool.
    embedding : EmbeddingConfig
        Noise scale, pool multiplier and preference function.
    params : PifParams, optional
        Forest parameters. The metric defaults to Jaccard when the embedding
        is binarized and to Tanimoto otherwise.

    Examples
    --------
    >>> from pif.datasets import generate, preset
    >>> data = generate(preset("stair4", seed=1))
    >>> det = PreferenceIsolationForest("line", EmbeddingConfig(sigma=data.sigma))
    >>> scores = det.fit(data.points).score_samples(data.points)
    """

    def __init__(self, family, embedding: EmbeddingConfig, params: PifParams | None = None):
        self.family = ModelFamily.parse(family)
        self.embedding = embedding
        if params is None:
            params = PifParams(metric="jaccard" if embedding.binarize else "tanimoto")
        self.params = params
        self.pool_: list[ModelInstance] | None = None
        self.forest_: PiForest | None = None

    def transform(self, points) -> PreferenceMatrix:
        if self.pool_ is None:
            raise RuntimeError("detector is not fitted")
        return embed(points, self.pool_, self.embedding)

    def fit(self, points) -> "PreferenceIsolationForest":
        pts = as_points(points)
        m = self.embedding.pool_size(pts.shape[0])
        self.pool_ = sample_pool(pts, self.family, m, self.embedding.rng_seed)
        self.forest_ = build_forest(self.transform(pts), self.params)
        return self

    def score_samples(self, points) -> np.ndarray:
        if self.forest_ is None:
            raise RuntimeError("detector is not fitted")
        return self.forest_.score_samples(self.transform(points).values)

    def fit_score(self, points) -> np.ndarray:
        return self.fit(points).score_samples(points)

    @property
    def pool_params(self) -> np.ndarray:
        return params_array(self.pool_)[1]
