"""
Anomalies on a staircase
========================

Points on four line segments plus uniform clutter. We score them three ways
and compare the ROC AUC.
"""

import numpy as np

from pif import EmbeddingConfig, PifParams, PreferenceIsolationForest, build_forest, roc_auc
from pif.baselines import IForParams, ifor_fit_score
from pif.datasets import generate, preset

data = generate(preset("stair4", seed=1))
print(data.summary())

###############################################################################
# In the plane, a Voronoi forest only sees Euclidean density.
ambient = build_forest(data.points, PifParams(metric="euclidean")).score_samples(data.points)

###############################################################################
# In preference space each point becomes a vector of its closeness to 4000
# random lines. Points on the same segment like the same lines.
det = PreferenceIsolationForest("line", EmbeddingConfig(sigma=data.sigma, rng_seed=1))
pref_scores = det.fit_score(data.points)
prefs = det.transform(data.points)
print(f"preference matrix: {prefs.n} x {prefs.m}, "
      f"{np.count_nonzero(prefs.values) / prefs.values.size:.1%} nonzero")

###############################################################################
# Axis-aligned splits on the same preference matrix, for reference.
axis = ifor_fit_score(prefs.values, IForParams(rng_seed=1))

for name, s in [("PIF, ambient l2", ambient), ("PIF, Tanimoto", pref_scores),
                ("iFor, preferences", axis)]:
    print(f"{name:>18}: AUC {roc_auc(s, data.is_anomaly):.3f}")
