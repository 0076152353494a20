"""Command-line interface.

Subcommands:

* ``evolve``   -- run the evolutionary search described by a JSON config and
  write the run report, generation log and elite activation curves (CSV
  plus rendered PNG) to the output directory.
* ``baseline`` -- train the same architecture with the fixed rectifier
  max(x, 0) on the input/hidden layers and a logistic output over several
  seeded runs, reporting the best run by test F1.
* ``map``      -- map a comma-separated genotype to expression texts.
* ``curves``   -- sample an expression over an interval to CSV (and PNG).
* ``eval``     -- train once with expressions read from a file and print the
  resulting metrics.

All artifacts are written atomically and embed the resolved configuration,
so a run can be replayed exactly.  Exit status is 0 on success, 1 for
config/data/grammar problems and 2 for malformed command arguments.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import tempfile

import numpy as np

from . import evolution, network as nn, plots
from .data import (
    BUILTIN_SCHEMAS,
    DataError,
    Dataset,
    DatasetSchema,
    load_csv,
    shuffle_split,
    standardize,
)
from .expressions import Bounded, ExpressionError, Input, parse_text, sample_curve, to_text
from .grammar import (
    Grammar,
    GrammarError,
    MappingOverflowError,
    default_grammar,
    load_grammar,
    map_genotype,
    validate_genotype,
)
from .metrics import compute_metrics

RELU = Bounded("max", Input(), 0.0)


class ConfigError(ValueError):
    """Bad run configuration; the message names the offending key."""


class UsageError(ValueError):
    """Malformed command-line argument values."""


# --- atomic file helpers ----------------------------------------------------


def _write_text_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def _write_json_atomic(path: str, obj) -> None:
    _write_text_atomic(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_curve_csv(path: str, points: list[tuple[float, float]]) -> None:
    lines = ["x,y"] + [f"{x!r},{y!r}" for x, y in points]
    _write_text_atomic(path, "\n".join(lines) + "\n")


# --- configuration ----------------------------------------------------------


@dataclasses.dataclass
class RunSettings:
    dataset_path: str
    schema: DatasetSchema
    evo: evolution.EvolutionConfig
    net: nn.NetworkConfig
    standardize: bool
    output_dir: str
    seed: int
    runs: int
    resplit_per_run: bool
    grammar: Grammar
    config_echo: dict


def _check_keys(section: dict, allowed: set[str], context: str) -> None:
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise ConfigError(f"unknown {context} key(s): {', '.join(unknown)}")


def _parse_schema(spec, base: str) -> DatasetSchema:
    if isinstance(spec, str):
        if spec not in BUILTIN_SCHEMAS:
            known = ", ".join(sorted(BUILTIN_SCHEMAS))
            raise ConfigError(f"unknown dataset schema {spec!r} (bundled: {known})")
        return BUILTIN_SCHEMAS[spec]
    if not isinstance(spec, dict):
        raise ConfigError("dataset.schema must be a bundled name or an object")
    allowed = {
        "name",
        "label_column",
        "positive_token",
        "negative_token",
        "drop_columns",
        "hidden_layers",
    }
    _check_keys(spec, allowed, "dataset.schema")
    try:
        return DatasetSchema(
            name=spec.get("name", "custom"),
            label_column=spec.get("label_column", -1),
            positive_token=spec.get("positive_token"),
            negative_token=spec.get("negative_token"),
            drop_columns=tuple(spec.get("drop_columns", ())),
            hidden_layers=int(spec.get("hidden_layers", 1)),
        )
    except (TypeError, ValueError) as err:
        raise ConfigError(f"bad dataset.schema: {err}") from None


def _build(cls, section: dict, context: str, **overrides):
    fields = {f.name for f in dataclasses.fields(cls)}
    _check_keys(section, fields - set(overrides), context)
    try:
        return cls(**{**section, **overrides})
    except (TypeError, ValueError) as err:
        raise ConfigError(f"bad {context} section: {err}") from None


def load_settings(config_path: str) -> RunSettings:
    """Read and validate a JSON run configuration.

    Relative dataset/grammar/output paths are resolved against the config
    file's directory.  Every parameter has a default taken from the
    experiment design, so a minimal config needs only the dataset entry.
    """
    try:
        with open(config_path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read config {config_path}: {err}") from None
    except json.JSONDecodeError as err:
        raise ConfigError(f"config {config_path} is not valid JSON: {err}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")

    allowed = {
        "dataset",
        "hidden_layers",
        "seed",
        "standardize",
        "output_dir",
        "evolution",
        "network",
        "runs",
        "resplit_per_run",
        "grammar",
    }
    _check_keys(cfg, allowed, "config")

    base = os.path.dirname(os.path.abspath(config_path))

    dataset_section = cfg.get("dataset")
    if not isinstance(dataset_section, dict) or "path" not in dataset_section:
        raise ConfigError('config needs a "dataset" object with a "path"')
    _check_keys(dataset_section, {"path", "schema"}, "dataset")
    dataset_path = os.path.join(base, dataset_section["path"])
    schema = _parse_schema(dataset_section.get("schema", "custom"), base)

    hidden_layers = int(cfg.get("hidden_layers", schema.hidden_layers))
    seed = int(cfg.get("seed", 0))

    evo = _build(
        evolution.EvolutionConfig,
        dict(cfg.get("evolution", {})),
        "evolution",
        seed=seed,
    )
    try:
        evo.validate()
    except ValueError as err:
        raise ConfigError(f"bad evolution section: {err}") from None

    net_section = dict(cfg.get("network", {}))
    if "moment_decays" in net_section:
        net_section["moment_decays"] = tuple(net_section["moment_decays"])
    net = _build(
        nn.NetworkConfig,
        net_section,
        "network",
        n_features=1,
        hidden_layers=hidden_layers,
    )
    try:
        net.validate()
    except ValueError as err:
        raise ConfigError(f"bad network section: {err}") from None

    grammar = default_grammar()
    if "grammar" in cfg:
        grammar_path = os.path.join(base, cfg["grammar"])
        try:
            with open(grammar_path, encoding="utf-8") as fh:
                grammar = load_grammar(fh.read())
        except OSError as err:
            raise ConfigError(f"cannot read grammar {grammar_path}: {err}") from None

    echo = {
        "dataset": {"path": dataset_section["path"], "schema": dataset_section.get("schema", "custom")},
        "hidden_layers": hidden_layers,
        "seed": seed,
        "standardize": bool(cfg.get("standardize", True)),
        "evolution": {
            f.name: getattr(evo, f.name) for f in dataclasses.fields(evo)
        },
        "network": {
            f.name: list(v) if isinstance(v := getattr(net, f.name), tuple) else v
            for f in dataclasses.fields(net)
            if f.name != "n_features"
        },
        "runs": int(cfg.get("runs", 10)),
        "resplit_per_run": bool(cfg.get("resplit_per_run", True)),
    }
    if "grammar" in cfg:
        echo["grammar"] = cfg["grammar"]

    return RunSettings(
        dataset_path=dataset_path,
        schema=schema,
        evo=evo,
        net=net,
        standardize=bool(cfg.get("standardize", True)),
        output_dir=os.path.join(base, cfg.get("output_dir", "runs")),
        seed=seed,
        runs=int(cfg.get("runs", 10)),
        resplit_per_run=bool(cfg.get("resplit_per_run", True)),
        grammar=grammar,
        config_echo=echo,
    )


# --- baseline runner --------------------------------------------------------


def run_baseline(
    dataset: Dataset,
    net_cfg: nn.NetworkConfig,
    runs: int = 10,
    seed: int = 0,
    standardize_features: bool = True,
    resplit_per_run: bool = True,
) -> list[dict]:
    """Train the rectifier/logistic reference network over ``runs`` seeds.

    Run i uses seed+i; with ``resplit_per_run`` the data is reshuffled per
    run, otherwise one split (from the base seed) is frozen for all runs.
    Returns one record per run with train accuracy and test metrics.
    """
    if runs < 1:
        raise ValueError("runs must be at least 1")
    cfg = dataclasses.replace(net_cfg, output_activation=nn.FIXED_SIGMOID)
    records = []
    for r in range(runs):
        run_seed = seed + r
        split_seed = run_seed if resplit_per_run else seed
        split = shuffle_split(dataset, seed=split_seed)
        if standardize_features:
            split = standardize(split)
        cfg_run = dataclasses.replace(cfg, n_features=split.X_train.shape[1])
        activations = [RELU] * cfg_run.n_activations
        net = nn.init_network(
            cfg_run, activations, seed=evolution.derive_seed("baseline-init", run_seed)
        )
        report = nn.train(
            net,
            split.X_train,
            split.y_train,
            split.X_val,
            split.y_val,
            cfg_run,
            seed=evolution.derive_seed("baseline-train", run_seed),
        )
        record = {
            "run": r,
            "seed": run_seed,
            "failed": report.failed,
            "train_accuracy": 0.0,
            "validation_accuracy": report.validation_accuracy,
            "mae": 1.0,
            "rmse": 1.0,
            "f1": 0.0,
        }
        if not report.failed:
            train_labels = nn.predict_labels(net, split.X_train)
            record["train_accuracy"] = float(np.mean(train_labels == split.y_train))
            test = compute_metrics(split.y_test, nn.predict_labels(net, split.X_test))
            record.update(mae=test.mae, rmse=test.rmse, f1=test.f1)
        records.append(record)
    return records


# --- commands ---------------------------------------------------------------


def _apply_overrides(settings: RunSettings, args) -> None:
    """Fold command-line overrides in, keeping the echoed config replayable."""
    if getattr(args, "no_standardize", False):
        settings.standardize = False
        settings.config_echo["standardize"] = False
    runs = getattr(args, "runs", None)
    if runs is not None:
        settings.runs = runs
        settings.config_echo["runs"] = runs


def cmd_evolve(args) -> int:
    settings = load_settings(args.config)
    _apply_overrides(settings, args)
    dataset = load_csv(settings.dataset_path, settings.schema)
    report = evolution.run(
        dataset,
        settings.evo,
        settings.net,
        grammar=settings.grammar,
        standardize_features=settings.standardize,
    )
    outdir = settings.output_dir
    os.makedirs(outdir, exist_ok=True)

    payload = {"config": settings.config_echo, **report.as_dict()}
    _write_json_atomic(os.path.join(outdir, "report.json"), payload)

    lines = ["generation,best_fitness,mean_fitness,failures"]
    for record in report.records:
        lines.append(
            f"{record.generation},{record.best_fitness!r},{record.mean_fitness!r},{record.failures}"
        )
    _write_text_atomic(os.path.join(outdir, "generations.csv"), "\n".join(lines) + "\n")
    plots.save_fitness_figure(report.records, os.path.join(outdir, "fitness.png"))

    for i, expr in enumerate(report.elite.phenotypes or [], start=1):
        points = sample_curve(expr)
        stem = os.path.join(outdir, f"elite_curve_layer{i}")
        _write_curve_csv(stem + ".csv", points)
        plots.save_curve_figure(points, to_text(expr), stem + ".png")

    print(f"elite fitness {report.elite.fitness:.4f} (test F1 {report.elite.test_f1:.4f})")
    for i, text in enumerate(report.elite.phenotype_texts(), start=1):
        print(f"  layer {i}: {text}")
    print(f"artifacts in {outdir}")
    return 0


def cmd_baseline(args) -> int:
    settings = load_settings(args.config)
    _apply_overrides(settings, args)
    dataset = load_csv(settings.dataset_path, settings.schema)
    runs = settings.runs
    records = run_baseline(
        dataset,
        settings.net,
        runs=runs,
        seed=settings.seed,
        standardize_features=settings.standardize,
        resplit_per_run=settings.resplit_per_run,
    )
    best = max(records, key=lambda r: r["f1"])
    outdir = settings.output_dir
    os.makedirs(outdir, exist_ok=True)

    payload = {"config": settings.config_echo, "runs": records, "best": best}
    _write_json_atomic(os.path.join(outdir, "baseline.json"), payload)

    table = [
        "dataset,training_accuracy,mae,rmse,f1_score",
        f"{dataset.name},{best['train_accuracy']!r},{best['mae']!r},{best['rmse']!r},{best['f1']!r}",
    ]
    _write_text_atomic(os.path.join(outdir, "baseline.csv"), "\n".join(table) + "\n")

    lines = ["run,seed,train_accuracy,validation_accuracy,mae,rmse,f1"]
    for r in records:
        lines.append(
            f"{r['run']},{r['seed']},{r['train_accuracy']!r},{r['validation_accuracy']!r},"
            f"{r['mae']!r},{r['rmse']!r},{r['f1']!r}"
        )
    _write_text_atomic(os.path.join(outdir, "baseline_runs.csv"), "\n".join(lines) + "\n")
    plots.save_baseline_figure([r["f1"] for r in records], os.path.join(outdir, "baseline_f1.png"))

    print(
        f"best of {runs} runs: F1 {best['f1']:.4f} "
        f"(MAE {best['mae']:.4f}, RMSE {best['rmse']:.4f}), artifacts in {outdir}"
    )
    return 0


def cmd_map(args) -> int:
    try:
        codons = [int(c) for c in args.genotype.split(",")]
    except ValueError:
        raise UsageError("genotype must be comma-separated integers") from None
    try:
        genotype = validate_genotype(codons)
    except ValueError as err:
        raise UsageError(str(err)) from None
    grammar = default_grammar()
    if args.grammar:
        with open(args.grammar, encoding="utf-8") as fh:
            grammar = load_grammar(fh.read())
    exprs, trace = map_genotype(genotype, grammar, n_functions=args.functions)
    for expr in exprs:
        print(to_text(expr))
    print(f"consumed: {trace.codons_consumed}")
    print(f"wraps: {trace.wraps_used}")
    return 0


def cmd_curves(args) -> int:
    expr = parse_text(args.expression)
    points = sample_curve(expr, args.lo, args.hi, args.points)
    _write_curve_csv(args.out, points)
    written = [args.out]
    if not args.no_figure:
        fig_path = os.path.splitext(args.out)[0] + ".png"
        plots.save_curve_figure(points, to_text(expr), fig_path)
        written.append(fig_path)
    print("wrote " + ", ".join(written))
    return 0


def cmd_eval(args) -> int:
    settings = load_settings(args.config)
    _apply_overrides(settings, args)
    with open(args.expressions, encoding="utf-8") as fh:
        texts = [line.strip() for line in fh if line.strip() and not line.startswith("#")]
    exprs = [parse_text(t) for t in texts]
    dataset = load_csv(settings.dataset_path, settings.schema)
    split = shuffle_split(dataset, seed=settings.seed)
    if settings.standardize:
        split = standardize(split)
    cfg = dataclasses.replace(settings.net, n_features=split.X_train.shape[1])
    if len(exprs) != cfg.n_activations:
        raise UsageError(
            f"expected {cfg.n_activations} expressions for {cfg.hidden_layers} "
            f"hidden layer(s) with {cfg.output_activation} output, got {len(exprs)}"
        )
    net = nn.init_network(cfg, exprs, seed=evolution.derive_seed("eval-init", settings.seed))
    report = nn.train(
        net,
        split.X_train,
        split.y_train,
        split.X_val,
        split.y_val,
        cfg,
        seed=evolution.derive_seed("eval-train", settings.seed),
    )
    result = {
        "expressions": [to_text(e) for e in exprs],
        "failed": report.failed,
        "failure_kind": report.failure_kind,
        "epochs_run": report.epochs_run,
        "validation_accuracy": report.validation_accuracy,
        "metrics": None,
    }
    if not report.failed:
        metrics = compute_metrics(split.y_test, nn.predict_labels(net, split.X_test))
        result["metrics"] = metrics.as_dict()
    print(json.dumps(result, indent=2, sort_keys=True))
    if args.output_dir:
        os.makedirs(args.output_dir, exist_ok=True)
        _write_json_atomic(os.path.join(args.output_dir, "metrics.json"), result)
        _write_text_atomic(os.path.join(args.output_dir, "model.txt"), nn.dump_network(net))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="actevo",
        description="Evolve task-specific neural-network activation functions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evolve", help="run the evolutionary search from a JSON config")
    p.add_argument("--config", required=True, help="path to the JSON run configuration")
    p.add_argument("--no-standardize", action="store_true",
                   help="train on raw feature scales instead of z-scores")
    p.set_defaults(fn=cmd_evolve)

    p = sub.add_parser("baseline", help="train the fixed rectifier reference network")
    p.add_argument("--config", required=True)
    p.add_argument("--runs", type=int, default=None, help="override the number of seeded runs")
    p.add_argument("--no-standardize", action="store_true",
                   help="train on raw feature scales instead of z-scores")
    p.set_defaults(fn=cmd_baseline)

    p = sub.add_parser("map", help="map a genotype to activation expressions")
    p.add_argument("--genotype", required=True, help="30 comma-separated integers in [0, 100]")
    p.add_argument("--functions", type=int, default=1, help="expressions to derive (default 1)")
    p.add_argument("--grammar", default=None, help="optional BNF grammar file")
    p.set_defaults(fn=cmd_map)

    p = sub.add_parser("curves", help="sample an expression over an interval")
    p.add_argument("--expression", required=True)
    p.add_argument("--lo", type=float, default=-10.0)
    p.add_argument("--hi", type=float, default=10.0)
    p.add_argument("--points", type=int, default=1000)
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--no-figure", action="store_true", help="skip the PNG rendering")
    p.set_defaults(fn=cmd_curves)

    p = sub.add_parser("eval", help="train once with expressions from a file")
    p.add_argument("--expressions", required=True, help="file with one expression per line")
    p.add_argument("--config", required=True)
    p.add_argument("--output-dir", default=None, help="also write metrics.json and model.txt")
    p.add_argument("--no-standardize", action="store_true",
                   help="train on raw feature scales instead of z-scores")
    p.set_defaults(fn=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (ConfigError, DataError, GrammarError, MappingOverflowError, ExpressionError, OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
