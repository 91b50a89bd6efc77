"""Command-line front end: ``pif <generate|embed|score|evaluate|plot>``.

Exit codes: 0 on success, 1 on runtime failure, 2 on usage or validation
errors. ``PIF_LOG`` (error, warn, info, debug) sets the log level.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .datasets import (
    PRESETS,
    DatasetSpec,
    LabeledDataset,
    StructureSpec,
    contamination_sweep,
    generate,
    preset,
)
from .geometry import ModelFamily

log = logging.getLogger("pif")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _setup_logging() -> None:
    level = os.environ.get("PIF_LOG", "warn").lower()
    levels = {"error": logging.ERROR, "warn": logging.WARNING, "warning": logging.WARNING,
              "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


# -- generate ---------------------------------------------------------------


def _spec_from_file(path: str, seed: int) -> DatasetSpec:
    try:
        raw = json.loads(Path(path).read_text())
        structures = tuple(
            StructureSpec(s["kind"], tuple(s["params"]), int(s["count"]))
            for s in raw["structures"]
        )
        return DatasetSpec(
            raw.get("name", Path(path).stem),
            structures,
            int(raw["anomaly_count"]),
            float(raw.get("noise_sigma", 0.01)),
            seed,
        )
    except (OSError, KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"invalid dataset spec {path}: {exc}") from None


def cmd_generate(args) -> int:
    if args.ratio is not None:
        if not args.preset:
            raise UsageError("--ratio requires --preset stair3 or circle5")
        data = contamination_sweep(args.preset, args.ratio, args.seed)
    elif args.preset:
        data = generate(preset(args.preset, args.seed, noise_sigma=args.noise_sigma))
    else:
        data = generate(_spec_from_file(args.spec, args.seed))
    out = args.out or f"{data.name}.csv"
    data.to_csv(out)
    print(data.summary())
    return EXIT_OK


# -- embed ------------------------------------------------------------------


def _read_points(path: str) -> LabeledDataset:
    try:
        return LabeledDataset.read_csv(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None


def cmd_embed(args) -> int:
    from .preference import EmbeddingConfig, embed, sample_pool

    data = _read_points(args.data)
    cfg = EmbeddingConfig(args.sigma, args.pool_multiplier, args.binarize, args.seed,
                          args.phi_exponent)
    pool = sample_pool(data.points, args.family, cfg.pool_size(len(data)), args.seed)
    prefs = embed(data.points, pool, cfg)
    prefs.to_csv(args.out)
    print(f"embedded {prefs.n} points into {prefs.m} preferences -> {args.out}")
    return EXIT_OK


# -- score ------------------------------------------------------------------


def _read_input(path: str):
    """Return ``(matrix, kind, labels)`` where kind is 'ambient' or 'preference'."""
    from .preference import PreferenceMatrix

    try:
        with open(path) as fh:
            first = fh.readline().strip()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None
    if first == "x,y,label":
        data = LabeledDataset.read_csv(path)
        return data.points, "ambient", data
    if first.startswith("p_0"):
        prefs = PreferenceMatrix.read_csv(path)
        return prefs.values, "binary" if prefs.binary else "preference", None
    raise UsageError(f"{path}: expected an x,y,label or p_0..p_m-1 header")


def _build_model(args, kind: str):
    from .baselines import IForParams, IsolationForest, LocalOutlierFactor, LofParams
    from .detector import PreferenceIsolationForest
    from .forest import PifParams, PiForest
    from .preference import EmbeddingConfig

    if args.method == "ifor":
        return IsolationForest(IForParams(args.t, args.psi, args.seed)), {
            "t": args.t, "psi": args.psi}
    if args.method == "lof":
        metric = args.metric or ("euclidean" if kind == "ambient" else
                                 "jaccard" if kind == "binary" else "tanimoto")
        return LocalOutlierFactor(LofParams(args.k, metric)), {"k": args.k, "metric": metric}
    if kind == "ambient" and args.family:
        if args.sigma is None:
            raise UsageError("--family needs --sigma for the preference embedding")
        emb = EmbeddingConfig(args.sigma, args.pool_multiplier, args.binarize, args.seed,
                              args.phi_exponent)
        metric = args.metric or ("jaccard" if args.binarize else "tanimoto")
        params = PifParams(args.t, args.psi, args.b, args.height_limit, metric, args.seed)
        return PreferenceIsolationForest(args.family, emb, params), {
            "t": args.t, "psi": args.psi, "b": args.b, "metric": metric,
            "family": ModelFamily.parse(args.family).value, "sigma": args.sigma,
            "pool_multiplier": args.pool_multiplier}
    metric = args.metric or ("euclidean" if kind == "ambient" else
                             "jaccard" if kind == "binary" else "tanimoto")
    params = PifParams(args.t, args.psi, args.b, args.height_limit, metric, args.seed)
    return _ForestModel(params), {"t": args.t, "psi": args.psi, "b": args.b, "metric": metric}


class _ForestModel:
    """Fit/score wrapper so a bare forest looks like the other detectors."""

    def __init__(self, params):
        self.params = params
        self.forest = None

    def fit(self, x):
        from .forest import build_forest

        self.forest = build_forest(x, self.params)
        return self

    def score_samples(self, x):
        return self.forest.score_samples(x)


def _fit_score(model, x):
    from .baselines import LocalOutlierFactor

    if isinstance(model, LocalOutlierFactor):
        return model.fit_score(x)
    return model.fit(x).score_samples(x)


def _grid(points: np.ndarray, n: int) -> np.ndarray:
    lo, hi = points.min(axis=0), points.max(axis=0)
    gx, gy = np.meshgrid(np.linspace(lo[0], hi[0], n), np.linspace(lo[1], hi[1], n))
    return np.column_stack([gx.ravel(), gy.ravel()])


def _header(args, info: dict) -> str:
    fields = {"method": args.method, **info, "seed": args.seed}
    return "# " + " ".join(f"{k}={v}" for k, v in fields.items()) + "\n"


def cmd_score(args) -> int:
    from .persistence import load_model, save_model

    x, kind, data = _read_input(args.input)
    if args.load_model:
        model = load_model(args.load_model)
        scores = model.score_samples(x)
        info = {"model": args.load_model}
    else:
        model, info = _build_model(args, kind)
        scores = _fit_score(model, x)
        if args.save_model:
            save_model(model.forest if isinstance(model, _ForestModel) else model,
                       args.save_model)
    lines = [_header(args, info), "score\n"]
    lines += [f"{s!r}\n" for s in scores.tolist()]
    out = args.out or "scores.csv"
    Path(out).write_text("".join(lines))
    if data is not None and data.is_anomaly.any() and not data.is_anomaly.all():
        from .evaluation import roc_auc

        print(f"AUC={roc_auc(scores, data.is_anomaly):.4f}")
    if args.grid:
        if kind != "ambient":
            raise UsageError("--grid needs ambient x,y input")
        grid = _grid(x, args.grid)
        gs = model.score_samples(grid)
        grid_out = Path(out).with_name(Path(out).stem + "_grid.csv")
        rows = ["x,y,score\n"] + [f"{a!r},{b!r},{s!r}\n" for (a, b), s in zip(grid.tolist(), gs.tolist())]
        grid_out.write_text("".join(rows))
        print(f"grid scores -> {grid_out}")
    print(f"wrote {len(scores)} scores -> {out}")
    return EXIT_OK


# -- evaluate ---------------------------------------------------------------

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["methods"],
    "properties": {
        "datasets": {"type": "array", "items": {"enum": list(PRESETS)}},
        "methods": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["name"],
                "properties": {
                    "name": {"enum": ["pif", "ifor", "lof"]},
                    "label": {"type": "string"},
                    "embeddings": {"type": "array",
                                   "items": {"enum": ["ambient", "binary", "continuous"]}},
                    "params": {
                        "type": "object",
                        "additionalProperties": False,
                        "properties": {
                            "t": {"type": "integer", "minimum": 1},
                            "psi": {"type": "integer", "minimum": 2},
                            "b": {"type": "integer", "minimum": 2},
                            "k": {"type": "integer", "minimum": 1},
                            "metric": {"enum": ["tanimoto", "jaccard", "euclidean"]},
                        },
                    },
                },
            },
        },
        "embeddings": {"type": "array", "minItems": 1,
                       "items": {"enum": ["ambient", "binary", "continuous"]}},
        "runs": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "pool_multiplier": {"type": "number", "exclusiveMinimum": 0},
        "phi_exponent": {"enum": ["sigma", "sigma_squared"]},
        "sigma": {"type": "number", "exclusiveMinimum": 0},
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "required": ["bases"],
            "properties": {
                "bases": {"type": "array", "minItems": 1,
                          "items": {"enum": ["stair3", "circle5"]}},
                "ratios": {"type": "array", "minItems": 1, "items": {"type": "number"}},
            },
        },
        "output_dir": {"type": "string"},
    },
}


def load_config(path: str):
    import jsonschema

    from .datasets import SWEEP_RATIOS
    from .evaluation import EMBEDDINGS, ExperimentConfig, MethodSpec

    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot load config {path}: {exc}") from None
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise UsageError(f"invalid config {path} at {where}: {exc.message}") from None
    if not raw.get("datasets") and not raw.get("sweep"):
        raise UsageError(f"config {path} names no datasets and no sweep")
    sweep = raw.get("sweep")
    if sweep is not None:
        sweep = {"bases": sweep["bases"], "ratios": sweep.get("ratios", list(SWEEP_RATIOS))}
    methods = [
        MethodSpec(m["name"], m.get("params", {}), m.get("label"),
                   tuple(m["embeddings"]) if "embeddings" in m else None)
        for m in raw["methods"]
    ]
    config = ExperimentConfig(
        datasets=raw.get("datasets", []),
        methods=methods,
        embeddings=tuple(raw.get("embeddings", EMBEDDINGS)),
        runs=raw.get("runs", 10),
        seed=raw.get("seed", 0),
        pool_multiplier=raw.get("pool_multiplier", 10.0),
        phi_exponent=raw.get("phi_exponent", "sigma"),
        sigma=raw.get("sigma"),
        sweep=sweep,
    )
    return config, raw.get("output_dir")


def cmd_evaluate(args) -> int:
    from .evaluation import run_experiment

    config, out_dir = load_config(args.config)
    if args.seed is not None:
        config.seed = args.seed
    out = Path(args.out or out_dir or "results")
    out.mkdir(parents=True, exist_ok=True)
    jobs = args.jobs or os.cpu_count() or 1
    report = run_experiment(
        config, jobs=jobs,
        progress=lambda unit: log.info("done %s run %d", unit[0], unit[3]),
    )
    (out / "report.csv").write_text(report.to_csv())
    (out / "report.txt").write_text(report.to_text())
    (out / "raw_aucs.csv").write_text(report.raw_csv())
    (out / "metadata.json").write_text(json.dumps(report.metadata, indent=2, sort_keys=True) + "\n")
    ttests = ["dataset,embedding,a,b,t,significant\n"] + [
        f"{r['dataset']},{r['embedding']},{r['a']},{r['b']},{r['t']!r},{int(r['significant'])}\n"
        for r in report.t_tests()
    ]
    (out / "ttests.csv").write_text("".join(ttests))
    if config.sweep:
        (out / "sweep.csv").write_text(report.sweep_csv())
    failed = [r for r in report.results if r.error]
    for r in failed:
        log.warning("cell failed: %s %s %s run %d: %s", r.method, r.dataset, r.embedding, r.run, r.error)
    print(report.to_text(), end="")
    print(f"wrote report to {out}/" + (f" ({len(failed)} failed cells)" if failed else ""))
    return EXIT_OK


# -- plot -------------------------------------------------------------------


def cmd_plot(args) -> int:
    from .plotting import plot_file

    try:
        svg = plot_file(args.input, args.title or "")
    except OSError as exc:
        raise UsageError(f"cannot read {args.input}: {exc}") from None
    Path(args.out).write_text(svg)
    print(f"wrote {args.out}")
    return EXIT_OK


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pif", description="Preference isolation forest toolkit")
    parser.add_argument("--version", action="version", version=f"pif {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master random seed")
    common.add_argument("-o", "--out", help="output path")

    g = sub.add_parser("generate", parents=[common], help="write a synthetic dataset CSV")
    src = g.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=sorted(PRESETS))
    src.add_argument("--spec", help="JSON dataset spec")
    g.add_argument("--ratio", type=float, help="anomaly ratio for a 1000-point sweep variant")
    g.add_argument("--noise-sigma", type=float)
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("embed", parents=[common], help="embed points into preference space")
    e.add_argument("data")
    e.add_argument("--family", required=True, choices=["line", "circle"])
    e.add_argument("--sigma", required=True, type=float)
    e.add_argument("--pool-multiplier", type=float, default=10.0)
    e.add_argument("--binarize", action="store_true")
    e.add_argument("--phi-exponent", choices=["sigma", "sigma_squared"], default="sigma")
    e.set_defaults(func=cmd_embed)

    s = sub.add_parser("score", parents=[common], help="score points or preference vectors")
    s.add_argument("input")
    s.add_argument("--method", required=True, choices=["pif", "ifor", "lof"])
    s.add_argument("--metric", choices=["tanimoto", "jaccard", "euclidean"])
    s.add_argument("--t", type=int, default=100)
    s.add_argument("--psi", type=int, default=256)
    s.add_argument("--b", type=int, default=2)
    s.add_argument("--height-limit", type=int)
    s.add_argument("--k", type=int, default=10)
    s.add_argument("--family", choices=["line", "circle"],
                   help="embed ambient input against a sampled model pool first")
    s.add_argument("--sigma", type=float)
    s.add_argument("--pool-multiplier", type=float, default=10.0)
    s.add_argument("--binarize", action="store_true")
    s.add_argument("--phi-exponent", choices=["sigma", "sigma_squared"], default="sigma")
    s.add_argument("--save-model")
    s.add_argument("--load-model")
    s.add_argument("--grid", type=int, help="also score an N x N grid over the data")
    s.set_defaults(func=cmd_score)

    v = sub.add_parser("evaluate", help="run an experiment described by a JSON config")
    v.add_argument("config")
    v.add_argument("--seed", type=int, help="override the config's master seed")
    v.add_argument("--jobs", type=int, help="worker processes (default: logical cores)")
    v.add_argument("-o", "--out", help="output directory")
    v.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("plot", help="render a sweep CSV or score grid to SVG")
    p.add_argument("input")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--title")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "embed" and not args.out:
            parser.error("embed needs -o/--out")
    except SystemExit as exc:  # argparse: usage errors exit 2, --help/--version 0
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"pif {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"pif {args.command}: invalid input: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:
        log.debug("failure", exc_info=True)
        print(f"pif {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
