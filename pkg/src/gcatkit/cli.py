"""Command-line entry point.

Subcommands: ingest, stats, train-transe, train-encoder, train-decoder,
evaluate, gradcheck, proximity, report, pipeline. Configuration flows
CLI flag > config file (--config, ``key = value`` lines) > defaults.

Exit codes: 0 success, 2 usage error, 3 configuration error,
4 training divergence, 1 any other package error (printed as a single
machine-parsable line on stderr).
"""

from __future__ import annotations

import argparse
import sys

from . import gradcheck as gc
from .config import resolve_config
from .errors import DivergenceError, GcatkitError, InvalidConfigError
from .evaluate import Metrics, report
from .graph import demo_graph, first_order_vector, second_order_proximity
from .pipeline import (load_bundle, run_decoder, run_encoder, run_evaluate,
                       run_pipeline, run_transe, stats_lines, write_manifest)

_CONFIG_FLAGS: list[tuple[str, type]] = [
    ("train", str), ("valid", str), ("test", str), ("workdir", str),
    ("dim", int), ("n_head", int), ("d_k", int), ("d_out", int),
    ("p_mid", int), ("p_out", int), ("n_hop", int),
    ("gamma_transe", float), ("gamma_encoder", float),
    ("num_filters", int), ("reg_lambda", float),
    ("lr", float), ("batch_size", int), ("neg_ratio", int),
    ("epochs_transe", int), ("epochs_encoder", int), ("epochs_decoder", int),
    ("seed", int), ("k_list", str),
]
_BOOL_FLAGS = ["toy", "eval_raw", "plain_sgd", "filtered_negatives", "joint_finetune"]


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file")
    for name, typ in _CONFIG_FLAGS:
        p.add_argument(f"--{name.replace('_', '-')}", type=typ, default=None, dest=name)
    for name in _BOOL_FLAGS:
        p.add_argument(f"--{name.replace('_', '-')}", action="store_true",
                       default=None, dest=name)


def _config_from(args: argparse.Namespace):
    overrides = {name: getattr(args, name) for name, _ in _CONFIG_FLAGS}
    overrides.update({name: getattr(args, name) for name in _BOOL_FLAGS})
    return resolve_config(args.config, overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gcatkit",
                                     description="Knowledge-graph link prediction toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in [
        ("ingest", "load and validate a dataset (writes toy files with --toy)"),
        ("stats", "print entity/relation/split counts"),
        ("train-transe", "stage 1: translational initialization"),
        ("train-encoder", "stage 2: attention encoder"),
        ("train-decoder", "stage 3: convolutional decoder"),
        ("pipeline", "all three stages, then evaluation"),
    ]:
        p = sub.add_parser(name, help=help_text)
        _add_config_args(p)

    p = sub.add_parser("evaluate", help="ranking evaluation of a trained stage")
    _add_config_args(p)
    p.add_argument("--stage", choices=["transe", "encoder", "decoder"], default="decoder")

    p = sub.add_parser("gradcheck", help="finite-difference checks of the three losses")
    p.add_argument("--seed", type=int, default=1)

    p = sub.add_parser("proximity", help="weighted-graph proximity demo")
    p.add_argument("--demo", action="store_true", required=True)

    p = sub.add_parser("report", help="reformat a metrics CSV")
    p.add_argument("--metrics", required=True)
    p.add_argument("--format", choices=["markdown", "csv"], default="markdown")
    return parser


def _cmd_proximity() -> int:
    g = demo_graph()
    vec = first_order_vector(g, 0)
    print("first-order vector of vertex 1:", "[" + ", ".join(f"{x:g}" for x in vec) + "]")
    for a, b in ((1, 2), (1, 5)):
        value = second_order_proximity(g, a - 1, b - 1)
        print(f"second-order proximity({a}, {b}) = {value:.2f}")
    return 0


def _cmd_gradcheck(seed: int) -> int:
    results = gc.run_all(seed)
    ok = True
    for name, err in results.items():
        print(f"gradcheck {name}: max relative error = {err:.3e}")
        ok = ok and err < gc.THRESHOLD
    print("gradcheck:", "PASS" if ok else "FAIL", f"(threshold {gc.THRESHOLD:g})")
    return 0 if ok else 1


def _parse_metrics_csv(path) -> Metrics:
    with open(path, "r", encoding="utf-8") as fh:
        header, row = [line.strip().split(",") for line in fh.read().strip().split("\n")[:2]]
    hits = {}
    mr = mrr = 0.0
    for name, value in zip(header, row):
        if name.startswith("H@"):
            hits[int(name[2:])] = float(value) / 100.0
        elif name == "MR":
            mr = float(value)
        elif name == "MRR":
            mrr = float(value)
    return Metrics(mr=mr, mrr=mrr, hits=hits, query_count=0)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "proximity":
            return _cmd_proximity()
        if args.command == "gradcheck":
            return _cmd_gradcheck(args.seed)
        if args.command == "report":
            print(report(_parse_metrics_csv(args.metrics), args.format))
            return 0

        cfg = _config_from(args)
        if args.command in ("ingest", "stats"):
            bundle = load_bundle(cfg)
            for line in stats_lines(bundle):
                print(line)
            if args.command == "ingest":
                print(f"ok: {cfg.train}, {cfg.valid}, {cfg.test}")
            return 0

        bundle = load_bundle(cfg)
        if args.command == "train-transe":
            run_transe(bundle, cfg)
        elif args.command == "train-encoder":
            run_encoder(bundle, cfg)
        elif args.command == "train-decoder":
            run_decoder(bundle, cfg)
        elif args.command == "evaluate":
            result = run_evaluate(bundle, cfg, args.stage)
            print(f"filtered ({args.stage}):")
            print(report(result.filtered, "markdown"))
            if cfg.eval_raw:
                print("raw:")
                print(report(result.raw, "markdown"))
        elif args.command == "pipeline":
            result = run_pipeline(cfg)
            print("filtered (decoder):")
            print(report(result.filtered, "markdown"))
            if cfg.eval_raw:
                print("raw:")
                print(report(result.raw, "markdown"))
            return 0
        write_manifest(cfg.workdir, cfg, args.command)
        return 0
    except InvalidConfigError as exc:
        _print_error(exc)
        return 3
    except DivergenceError as exc:
        _print_error(exc)
        return 4
    except GcatkitError as exc:
        _print_error(exc)
        return 1


def _print_error(exc: Exception) -> None:
    message = str(exc).replace("\n", " ")
    print(f"error: {type(exc).__name__}: {message}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
