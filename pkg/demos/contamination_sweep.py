"""
Changing the share of anomalies
===============================

Hold |X| = 1000 on the stair3 geometry and raise the anomaly fraction.
Compare PIF with LOF at a few neighbourhood sizes. Three runs per ratio keep
this quick; the acceptance suite uses ten. Writes ``sweep.svg``.
"""

from collections import defaultdict

from pif.evaluation import ExperimentConfig, MethodSpec, run_experiment
from pif.plotting import sweep_chart

ratios = [0.1, 0.3, 0.5, 0.7, 0.9]
methods = [MethodSpec("pif")] + [MethodSpec("lof", {"k": k}) for k in (25, 75, 150)]
config = ExperimentConfig([], methods, embeddings=("continuous",), runs=3,
                          sweep={"bases": ["stair3"], "ratios": ratios})
report = run_experiment(config)

series = defaultdict(list)
for cell in report.cells:
    ratio = float(cell.dataset.split("@")[1])
    series[cell.method].append((ratio, cell.mean_auc))

for method, pts in series.items():
    aucs = [a for _, a in sorted(pts)]
    print(f"{method:>18}: " + " ".join(f"{a:.2f}" for a in aucs)
          + f"   range {max(aucs) - min(aucs):.2f}")

with open("sweep.svg", "w") as fh:
    fh.write(sweep_chart(dict(series), "stair3, AUC vs anomaly share"))
