"""Command-line entry point.

Subcommands: fit, predict, benchmark, simulate, score, aggregate. Every
output file gets a sibling <name>.manifest.json recording the command,
resolved arguments, seeds, input digests, tool version, and timestamp.
All randomness flows from --seed (or the simulate config), so reruns with
identical inputs produce byte-identical primary outputs.

Exit codes: 0 success, 1 usage error, 2 data/validation error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .baselines import ForestConfig, MlpConfig
from .dataset import encode_indicators, ingest_csv, standardize_within_group
from .errors import DataError, NumericalError
from .evaluation import (
    benchmark_suite,
    benchmark_table_to_dict,
    range_report_to_dict,
    recall_aggregates,
    render_benchmark_text,
)
from .model_spec import builtin_recall_model, parse_model_spec, validate_model
from .pls import (
    fit_pls,
    fitted_from_dict,
    fitted_to_dict,
    predict_pls,
    sensitivity_levers,
)
from .synth import default_synth_config, generate_synthetic, load_synth_config
from .dataset import write_csv

log = logging.getLogger("pathlens")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit code 1 instead of argparse's 2
        raise UsageError(message)


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_manifest(out_path, command: str, arguments: dict, inputs: list) -> None:
    manifest = {
        "command": command,
        "arguments": {k: v for k, v in sorted(arguments.items())},
        "inputs": {str(p): _sha256(p) for p in inputs},
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    path = Path(str(out_path) + ".manifest.json")
    path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")


def _dump_json(payload: dict, out_path) -> None:
    Path(out_path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _load_model(arg: str):
    if arg == "builtin":
        return validate_model(builtin_recall_model())
    return validate_model(parse_model_spec(Path(arg).read_text(encoding="utf-8")))


def _encoded(path, model):
    raw = ingest_csv(path, model.spec)
    return raw, encode_indicators(raw, model.spec)


def _cmd_fit(args) -> int:
    model = _load_model(args.model)
    _, encoded = _encoded(args.data, model)
    standardized, params = standardize_within_group(encoded, args.group_column)
    fitted = fit_pls(standardized, model, params)
    _dump_json(fitted_to_dict(fitted), args.out)
    _write_manifest(
        args.out,
        "fit",
        {"data": args.data, "model": args.model, "group_column": args.group_column},
        [args.data] + ([] if args.model == "builtin" else [args.model]),
    )
    return 0


def _cmd_predict(args) -> int:
    fitted = fitted_from_dict(json.loads(Path(args.model_file).read_text()))
    _, encoded = _encoded(args.data, fitted.model)
    predictions = predict_pls(fitted, encoded)
    with open(args.out, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(
            ["study", "participant", "object", "probability", "label", "recall"]
        )
        for i, meta in enumerate(encoded.row_meta):
            writer.writerow(
                [
                    *meta,
                    repr(float(predictions.probability[i])),
                    int(predictions.label[i]),
                    int(predictions.truth[i]),
                ]
            )
    _write_manifest(
        args.out,
        "predict",
        {"model_file": args.model_file, "data": args.data},
        [args.model_file, args.data],
    )
    return 0


def _cmd_benchmark(args) -> int:
    model = _load_model(args.model)
    datasets = []
    for path in args.data:
        _, encoded = _encoded(path, model)
        datasets.append((Path(path).stem, encoded))
    table = benchmark_suite(
        datasets,
        model,
        forest_cfg=ForestConfig(tree_count=args.trees, seed=args.seed),
        mlp_cfg=MlpConfig(seed=args.seed),
        k=args.k,
        seed=args.seed,
    )
    text = render_benchmark_text(table)
    if args.out:
        json_path = Path(args.out).with_suffix(".json")
        text_path = Path(args.out).with_suffix(".txt")
        _dump_json(benchmark_table_to_dict(table), json_path)
        text_path.write_text(text)
        arguments = {
            "data": list(args.data),
            "k": args.k,
            "seed": args.seed,
            "trees": args.trees,
            "model": args.model,
        }
        _write_manifest(json_path, "benchmark", arguments, args.data)
        _write_manifest(text_path, "benchmark", arguments, args.data)
    sys.stdout.write(text)
    return 0


def _cmd_simulate(args) -> int:
    cfg = load_synth_config(args.config) if args.config else default_synth_config()
    if args.seed is not None:
        cfg.seed = args.seed
    table = generate_synthetic(cfg)
    write_csv(table, args.out)
    _write_manifest(
        args.out,
        "simulate",
        {"config": args.config or "default", "seed": cfg.seed},
        [args.config] if args.config else [],
    )
    return 0


def _cmd_score(args) -> int:
    fitted = fitted_from_dict(json.loads(Path(args.model_file).read_text()))
    _, encoded = _encoded(args.row, fitted.model)
    if encoded.n_rows != 1:
        raise DataError(f"score expects a single-row CSV, got {encoded.n_rows} rows")
    predictions = predict_pls(fitted, encoded)
    report = sensitivity_levers(fitted, encoded, args.delta)
    payload = {
        "probability": float(predictions.probability[0]),
        "label": int(predictions.label[0]),
        "delta": report.delta,
        "group": report.group,
        "effects": [
            {
                "indicator": effect.indicator,
                "construct": effect.construct,
                "effect": effect.effect,
            }
            for effect in report.effects
        ],
    }
    if args.out:
        _dump_json(payload, args.out)
        _write_manifest(
            args.out,
            "score",
            {"model_file": args.model_file, "row": args.row, "delta": args.delta},
            [args.model_file, args.row],
        )
    else:
        sys.stdout.write(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    return 0


def _cmd_aggregate(args) -> int:
    model = _load_model("builtin")
    raw = ingest_csv(args.data, model.spec)
    payload = range_report_to_dict(recall_aggregates(raw))
    if args.out:
        _dump_json(payload, args.out)
        _write_manifest(args.out, "aggregate", {"data": args.data}, [args.data])
    else:
        sys.stdout.write(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="pathlens", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit the PLS model on a CSV")
    fit.add_argument("--data", required=True)
    fit.add_argument("--model", default="builtin", help="'builtin' or a model file")
    fit.add_argument("--group-column", default="study")
    fit.add_argument("--out", required=True)
    fit.set_defaults(func=_cmd_fit)

    predict = sub.add_parser("predict", help="per-row probabilities from a fitted model")
    predict.add_argument("--model-file", required=True)
    predict.add_argument("--data", required=True)
    predict.add_argument("--out", required=True)
    predict.set_defaults(func=_cmd_predict)

    bench = sub.add_parser("benchmark", help="SEM/RF/MLP on shared CV folds")
    bench.add_argument("--data", action="append", required=True)
    bench.add_argument("--model", default="builtin")
    bench.add_argument("--k", type=int, default=10)
    bench.add_argument("--seed", type=int, default=42)
    bench.add_argument("--trees", type=int, default=500)
    bench.add_argument("--out", help="output prefix for .json and .txt tables")
    bench.set_defaults(func=_cmd_benchmark)

    simulate = sub.add_parser("simulate", help="generate a synthetic dataset CSV")
    simulate.add_argument("--config", help="SynthConfig JSON (default: built-in config)")
    simulate.add_argument("--seed", type=int, help="override the config seed")
    simulate.add_argument("--out", required=True)
    simulate.set_defaults(func=_cmd_simulate)

    score = sub.add_parser("score", help="recall probability + mitigation levers for one row")
    score.add_argument("--model-file", required=True)
    score.add_argument("--row", required=True)
    score.add_argument("--delta", type=float, default=1.0)
    score.add_argument("--out")
    score.set_defaults(func=_cmd_score)

    aggregate = sub.add_parser("aggregate", help="participant/object recall ranges")
    aggregate.add_argument("--data", required=True)
    aggregate.add_argument("--out")
    aggregate.set_defaults(func=_cmd_aggregate)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
