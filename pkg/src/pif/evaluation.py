"""AUC, paired t-tests and the multi-run experiment harness."""

from __future__ import annotations

import csv
import io
import math
import warnings
import zlib
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import DegenerateLabels, DimensionMismatch, ZeroVarianceWarning

__all__ = [
    "T_CRITICAL_05",
    "roc_auc",
    "TTestResult",
    "paired_t_test",
    "MethodSpec",
    "ExperimentConfig",
    "RunResult",
    "CellStats",
    "EvalReport",
    "run_experiment",
    "cell_seed",
]

# Two-sided critical values of Student's t at alpha = 0.05, df = 1..30.
T_CRITICAL_05 = (
    12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
    2.201, 2.179, 2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086,
    2.080, 2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042,
)


def roc_auc(scores, labels) -> float:
    """Area under the ROC curve with anomalies (``True``/1) as positives.

    Equals the Mann-Whitney probability that a random anomaly outscores a
    random normal point, ties counting one half.
    """
    s = np.asarray(scores, dtype=float).ravel()
    y = np.asarray(labels).astype(bool).ravel()
    if s.shape != y.shape:
        raise DimensionMismatch(f"{s.size} scores for {y.size} labels")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateLabels("AUC needs at least one anomaly and one normal point")
    ranks = rankdata(s)
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


@dataclass(frozen=True)
class TTestResult:
    t: float
    significant: bool
    df: int
    zero_variance: bool = False


def _critical(df: int) -> float:
    return T_CRITICAL_05[min(df, len(T_CRITICAL_05)) - 1]


def paired_t_test(a, b) -> TTestResult:
    """Two-sided paired t-test at alpha = 0.05.

    When every difference is identical the statistic is undefined: a
    :class:`ZeroVarianceWarning` is emitted and ``t`` is ``0`` for equal
    samples, ``+inf``/``-inf`` otherwise, significant iff the mean differs
    from zero.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise DimensionMismatch(f"paired samples of shape {a.shape} and {b.shape}")
    n = a.size
    if n < 2:
        raise ValueError("paired t-test needs at least 2 pairs")
    d = a - b
    mean = d.mean()
    sd = d.std(ddof=1)
    if sd == 0.0 or np.all(d == d[0]):
        warnings.warn("all paired differences are identical", ZeroVarianceWarning, stacklevel=2)
        t = 0.0 if mean == 0 else math.copysign(math.inf, mean)
        return TTestResult(t, bool(mean != 0), n - 1, zero_variance=True)
    t = float(mean / (sd / math.sqrt(n)))
    return TTestResult(t, abs(t) > _critical(n - 1), n - 1)


EMBEDDINGS = ("ambient", "binary", "continuous")
_DEFAULT_METRIC = {"ambient": "euclidean", "binary": "jaccard", "continuous": "tanimoto"}


@dataclass(frozen=True)
class MethodSpec:
    """One detector configuration.

    ``name`` is ``pif``, ``ifor`` or ``lof``; ``params`` holds ``t``,
    ``psi``, ``b`` (forests), ``k`` (LOF) and an optional ``metric``
    override. ``embeddings`` restricts which spaces the method runs in.
    """

    name: str
    params: dict = field(default_factory=dict)
    label: str | None = None
    embeddings: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if self.name not in ("pif", "ifor", "lof"):
            raise ValueError(f"unknown method {self.name!r}")

    def metric(self, embedding: str) -> str:
        return self.params.get("metric", _DEFAULT_METRIC[embedding])

    def id(self, embedding: str) -> str:
        if self.label:
            return self.label
        if self.name == "ifor":
            return "ifor"
        if self.name == "lof":
            return f"lof-k{self.params.get('k', 10)}-{self.metric(embedding)}"
        return f"pif-{self.metric(embedding)}"


@dataclass
class ExperimentConfig:
    datasets: Sequence[str]
    methods: Sequence[MethodSpec]
    embeddings: Sequence[str] = EMBEDDINGS
    runs: int = 10
    seed: int = 0
    pool_multiplier: float = 10.0
    phi_exponent: str = "sigma"
    sigma: float | None = None
    sweep: dict | None = None

    def __post_init__(self) -> None:
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        for e in self.embeddings:
            if e not in EMBEDDINGS:
                raise ValueError(f"unknown embedding {e!r}")

    def cells(self):
        """Datasets of the grid, sweep datasets last, as ``(name, base, ratio)``."""
        out = [(name, name, None) for name in self.datasets]
        if self.sweep:
            for base in self.sweep["bases"]:
                for ratio in self.sweep["ratios"]:
                    out.append((f"{base}@{ratio:g}", base, ratio))
        return out


@dataclass(frozen=True)
class RunResult:
    method: str
    dataset: str
    embedding: str
    seed: int
    auc: float
    run: int = 0
    error: str = ""


@dataclass(frozen=True)
class CellStats:
    method: str
    dataset: str
    embedding: str
    mean_auc: float
    std_auc: float
    runs: int
    min_auc: float
    max_auc: float


def cell_seed(master: int, *names: str | int) -> int:
    """Seed of one experiment cell, stable across processes and unaffected by other cells."""
    words = [int(master) & 0xFFFFFFFF, (int(master) >> 32) & 0xFFFFFFFF]
    for name in names:
        words.append(name if isinstance(name, int) else zlib.crc32(str(name).encode()))
    return int(np.random.SeedSequence(words).generate_state(2, np.uint64)[0] >> 1)


# -- experiment execution ---------------------------------------------------


def _make_dataset(base: str, ratio, seed: int, sigma):
    from .datasets import contamination_sweep, generate, preset

    if ratio is None:
        return generate(preset(base, seed, noise_sigma=sigma))
    data = contamination_sweep(base, ratio, seed)
    return data


def _score(method: MethodSpec, embedding: str, x: np.ndarray, seed: int,
           distances: dict | None = None) -> np.ndarray:
    from .baselines import IForParams, IsolationForest, LocalOutlierFactor, LofParams
    from .forest import PifParams, build_forest

    p = method.params
    if method.name == "pif":
        params = PifParams(
            t=p.get("t", 100),
            psi=p.get("psi", 256),
            b=p.get("b", 2),
            metric=method.metric(embedding),
            rng_seed=seed,
        )
        return build_forest(x, params).score_samples(x)
    if method.name == "ifor":
        forest = IsolationForest(IForParams(p.get("t", 100), p.get("psi", 256), seed))
        return forest.fit(x).score_samples(x)
    from .preference import pairwise_distances

    metric = method.metric(embedding)
    lof = LocalOutlierFactor(LofParams(p.get("k", 10), metric))
    if distances is None:
        return lof.fit_score(x)
    # several k values on one space share the distance matrix
    if (embedding, metric) not in distances:
        distances[(embedding, metric)] = pairwise_distances(x, x, metric)
    return lof.fit_score(x, distances[(embedding, metric)])


def _method_embeddings(config: ExperimentConfig, method: MethodSpec) -> list[str]:
    return [e for e in config.embeddings if method.embeddings is None or e in method.embeddings]


def _run_unit(config: ExperimentConfig, dataset: str, base: str, ratio, run: int):
    from .preference import EmbeddingConfig, embed, sample_pool

    data_seed = cell_seed(config.seed, "data", dataset, run)
    results = []
    try:
        data = _make_dataset(base, ratio, data_seed, config.sigma)
        sigma = config.sigma or data.sigma
        spaces = {}
        if "ambient" in config.embeddings:
            spaces["ambient"] = data.points
        if {"binary", "continuous"} & set(config.embeddings):
            pool_seed = cell_seed(config.seed, "pool", dataset, run)
            cfg = EmbeddingConfig(
                sigma, config.pool_multiplier, rng_seed=pool_seed,
                phi_exponent=config.phi_exponent,
            )
            pool = sample_pool(data.points, data.family, cfg.pool_size(len(data)), pool_seed)
            if "continuous" in config.embeddings:
                spaces["continuous"] = embed(data.points, pool, cfg).values
            if "binary" in config.embeddings:
                spaces["binary"] = embed(
                    data.points, pool, EmbeddingConfig(sigma, binarize=True)
                ).values
    except Exception as exc:  # recorded per cell, the run continues
        msg = f"{type(exc).__name__}: {exc}"
        for method in config.methods:
            for embedding in _method_embeddings(config, method):
                results.append(
                    RunResult(method.id(embedding), dataset, embedding, data_seed, math.nan, run, msg)
                )
        return results

    distances: dict = {}
    for method in config.methods:
        for embedding in _method_embeddings(config, method):
            mid = method.id(embedding)
            seed = cell_seed(config.seed, "method", dataset, mid, embedding, run)
            try:
                scores = _score(method, embedding, spaces[embedding], seed, distances)
                auc = roc_auc(scores, data.is_anomaly)
                results.append(RunResult(mid, dataset, embedding, seed, auc, run))
            except Exception as exc:
                results.append(
                    RunResult(mid, dataset, embedding, seed, math.nan, run,
                              f"{type(exc).__name__}: {exc}")
                )
    return results


def run_experiment(config: ExperimentConfig, jobs: int = 1, progress=None) -> "EvalReport":
    """Run every (dataset, run) unit and aggregate AUCs into a report.

    Each unit generates its dataset, embeds it once and scores it with every
    method, so methods are compared on paired data. Results do not depend on
    ``jobs``.
    """
    units = [
        (dataset, base, ratio, run)
        for dataset, base, ratio in config.cells()
        for run in range(config.runs)
    ]
    results: list[RunResult] = []
    if jobs <= 1:
        for unit in units:
            results.extend(_run_unit(config, *unit))
            if progress:
                progress(unit)
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_unit, config, *unit) for unit in units]
            for unit, fut in zip(units, futures):
                results.extend(fut.result())
                if progress:
                    progress(unit)
    return EvalReport.from_results(results, config)


# -- reporting --------------------------------------------------------------


@dataclass
class EvalReport:
    results: list[RunResult]
    cells: list[CellStats]
    metadata: dict = field(default_factory=dict)

    @classmethod
    def from_results(cls, results: Iterable[RunResult], config: ExperimentConfig | None = None):
        results = sorted(results, key=lambda r: (r.dataset, r.embedding, r.method, r.run))
        groups: dict[tuple, list[float]] = defaultdict(list)
        order: list[tuple] = []
        for r in results:
            key = (r.method, r.dataset, r.embedding)
            if key not in groups:
                order.append(key)
            if r.error == "":
                groups[key].append(r.auc)
            else:
                groups.setdefault(key, [])
        cells = []
        for key in order:
            aucs = np.array(groups[key])
            if aucs.size:
                cells.append(CellStats(*key, float(aucs.mean()), float(aucs.std(ddof=0)),
                                       int(aucs.size), float(aucs.min()), float(aucs.max())))
            else:
                cells.append(CellStats(*key, math.nan, math.nan, 0, math.nan, math.nan))
        metadata = {}
        if config is not None:
            metadata = {
                "runs": config.runs,
                "seed": config.seed,
                "pool_multiplier": config.pool_multiplier,
                "phi_exponent": config.phi_exponent,
                "randomness": "dataset, pool and method re-drawn per run",
                "methods": [
                    {"name": m.name, **{k: v for k, v in _method_defaults(m).items()}}
                    for m in config.methods
                ],
            }
        return cls(list(results), cells, metadata)

    def cell(self, method: str, dataset: str, embedding: str | None = None) -> CellStats:
        for c in self.cells:
            if c.method == method and c.dataset == dataset and (
                embedding is None or c.embedding == embedding
            ):
                return c
        raise KeyError((method, dataset, embedding))

    def aucs(self, method: str, dataset: str, embedding: str | None = None) -> np.ndarray:
        rows = [
            r for r in self.results
            if r.method == method and r.dataset == dataset
            and (embedding is None or r.embedding == embedding) and not r.error
        ]
        return np.array([r.auc for r in sorted(rows, key=lambda r: r.run)])

    def datasets(self) -> list[str]:
        return list(dict.fromkeys(c.dataset for c in self.cells))

    def columns(self) -> list[tuple[str, str]]:
        return list(dict.fromkeys((c.embedding, c.method) for c in self.cells))

    def t_tests(self) -> list[dict]:
        """Pairwise paired t-tests between cells of the same dataset and embedding."""
        out = []
        by_ds: dict[tuple, list[CellStats]] = defaultdict(list)
        for c in self.cells:
            by_ds[(c.dataset, c.embedding)].append(c)
        for (dataset, embedding), cells in by_ds.items():
            for c1, c2 in combinations(cells, 2):
                a = self.aucs(c1.method, dataset, embedding)
                b = self.aucs(c2.method, dataset, embedding)
                if a.size != b.size or a.size < 2:
                    continue
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", ZeroVarianceWarning)
                    res = paired_t_test(a, b)
                out.append({
                    "dataset": dataset, "embedding": embedding,
                    "a": c1.method, "b": c2.method, "t": res.t,
                    "significant": res.significant,
                })
        return out

    def significantly_best(self, dataset: str, embedding: str) -> str | None:
        """Method that beats every competitor of its embedding on ``dataset``, if any."""
        cells = [c for c in self.cells if c.dataset == dataset and c.embedding == embedding]
        if len(cells) < 2:
            return None
        best = max(cells, key=lambda c: c.mean_auc)
        a = self.aucs(best.method, dataset, embedding)
        for other in cells:
            if other is best:
                continue
            b = self.aucs(other.method, dataset, embedding)
            if a.size != b.size or a.size < 2:
                return None
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ZeroVarianceWarning)
                if not paired_t_test(a, b).significant:
                    return None
        return best.method

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["method", "dataset", "embedding", "mean_auc", "std_auc", "runs"])
        for c in self.cells:
            writer.writerow([c.method, c.dataset, c.embedding,
                             f"{c.mean_auc:.6f}", f"{c.std_auc:.6f}", c.runs])
        return buf.getvalue()

    def raw_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["method", "dataset", "embedding", "run", "seed", "auc", "error"])
        for r in self.results:
            writer.writerow([r.method, r.dataset, r.embedding, r.run, r.seed,
                             "" if math.isnan(r.auc) else repr(r.auc), r.error])
        return buf.getvalue()

    def sweep_csv(self) -> str:
        """``base,ratio,method,embedding,mean_auc`` rows for contamination-sweep cells."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["base", "ratio", "method", "embedding", "mean_auc"])
        for c in self.cells:
            if "@" not in c.dataset:
                continue
            base, ratio = c.dataset.split("@")
            writer.writerow([base, ratio, c.method, c.embedding, f"{c.mean_auc:.6f}"])
        return buf.getvalue()

    def to_text(self) -> str:
        """Aligned table, one column per (embedding, method) and a Mean row.

        ``*`` marks the best AUC of a dataset; ``!`` additionally marks it as
        significantly better than every competitor in its embedding.
        """
        columns = self.columns()
        datasets = [d for d in self.datasets() if "@" not in d]
        if not datasets:
            datasets = self.datasets()
        value = {(c.dataset, c.embedding, c.method): c.mean_auc for c in self.cells}
        header = ["dataset"] + [f"{m} [{e}]" for e, m in columns]
        rows = []
        for ds in datasets + ["Mean"]:
            if ds == "Mean":
                vals = [np.nanmean([value.get((d, e, m), math.nan) for d in datasets])
                        for e, m in columns]
            else:
                vals = [value.get((ds, e, m), math.nan) for e, m in columns]
            finite = [v for v in vals if not math.isnan(v)]
            best = max(finite) if finite else None
            cells = []
            for (e, m), v in zip(columns, vals):
                text = "-" if math.isnan(v) else f"{v:.3f}"
                mark = ""
                if best is not None and v == best:
                    mark = "*"
                    if ds != "Mean" and self.significantly_best(ds, e) == m:
                        mark = "*!"
                cells.append(text + mark)
            rows.append([ds] + cells)
        widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]
        lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
        lines.append("  ".join("-" * w for w in widths))
        for r in rows:
            lines.append("  ".join(v.ljust(w) for v, w in zip(r, widths)))
        return "\n".join(lines) + "\n"


def _method_defaults(method: MethodSpec) -> dict:
    p = dict(method.params)
    if method.name in ("pif", "ifor"):
        p.setdefault("t", 100)
        p.setdefault("psi", 256)
    if method.name == "pif":
        p.setdefault("b", 2)
    if method.name == "lof":
        p.setdefault("k", 10)
    return p
