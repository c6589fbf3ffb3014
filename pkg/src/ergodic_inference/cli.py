"""Command line entry point: simulate, estimate, classify, verify, experiment.

Exit codes: 0 success, 1 a verification check failed, 2 bad arguments or
config, 3 not enough data for a single-shot estimate.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import tempfile

import numpy as np

from . import __version__
from .estimators import InsufficientData, QuerySet, RegressionConfig, estimate_conditional
from .pattern_recognition import LabeledSeries, estimate_eta
from .processes import build_process
from .quantization import parse_scheme
from .verification import (
    Atom,
    ExperimentSpec,
    ConvergenceReport,
    Record,
    lemma2_check,
    oracle_equivalence,
    parse_grid,
    run_experiment,
)

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_INSUFFICIENT = 0, 1, 2, 3


class ConfigError(Exception):
    pass


def write_output(path, text: str) -> None:
    """Write ``text`` to ``path`` atomically, or to stdout when ``path`` is None."""
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _header_lines(config: dict) -> str:
    return (
        f"# version: {json.dumps(__version__)}\n"
        f"# config: {json.dumps(config, sort_keys=True)}\n"
    )


def read_series(path) -> np.ndarray:
    values = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                values.append(float(line))
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: not a number: {line!r}") from None
    return np.asarray(values)


def read_labeled(path) -> LabeledSeries:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(line for line in fh if not line.startswith("#")) if r]
    if not rows:
        raise ConfigError(f"{path} is empty")
    header, body = rows[0], rows[1:]
    if not header or header[-1].strip() != "y" or not all(h.strip().startswith("x_") for h in header[:-1]):
        raise ConfigError("labeled CSV header must be x_1,...,x_d,y")
    if not body or body[-1][-1].strip() != "":
        raise ConfigError("the last row is the query point and must have an empty y")
    try:
        features = [[float(v) for v in r[:-1]] for r in body]
        labels = [int(r[-1]) for r in body[:-1]]
    except ValueError as exc:
        raise ConfigError(f"bad value in {path}: {exc}") from None
    try:
        return LabeledSeries(np.asarray(features), np.asarray(labels, dtype=np.int64))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _matrix(text):
    return [[float(v) for v in row.split(",")] for row in text.split(";")]


def _floats(text):
    return [float(v) for v in text.split(",")]


def _process_config(args) -> dict:
    name = args.process
    picks = {
        "bernoulli": {"p": args.p},
        "uniform": {},
        "markov": {"P": args.matrix, "emission": args.emission},
        "ar1": {"a": args.a, "noise_sd": args.sd, "D": args.D, "burn_in": args.burn_in},
        "rotation": {"alpha": args.alpha, "threshold": args.threshold},
        "labeled": {"probs": args.probs, "breakpoints": args.breakpoints, "low": args.low, "high": args.high},
    }[name]
    config = {"name": name}
    config.update({k: v for k, v in picks.items() if v is not None})
    return config


def cmd_simulate(args) -> int:
    config = _process_config(args)
    try:
        process = build_process(config)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    header = _header_lines({"process": config, "seed": args.seed, "length": args.length})
    if process.labeled:
        path = process.sample_labeled(args.seed, args.length)
        lines = ["x_1,y"]
        for i, (x, y) in enumerate(zip(path.features[:, 0], path.labels)):
            hide = args.hide_last_label and i == path.labels.size - 1
            lines.append(f"{float(x)!r},{'' if hide else int(y)}")
        body = "\n".join(lines) + "\n"
    else:
        values = process.sample(args.seed, args.length)
        body = "".join(f"{float(v)!r}\n" for v in values)
    write_output(args.output, header + body)
    return EXIT_OK


def cmd_estimate(args) -> int:
    scheme = parse_scheme(args.scheme)
    queries = [(q, QuerySet.parse(q)) for q in args.query]
    grid = parse_grid(args.cdf_grid) if args.cdf_grid else None
    cfg = RegressionConfig(args.clip_D, clip=True) if args.clip_D is not None else None
    past = read_series(args.input)
    if past.size == 0:
        raise ConfigError("input series is empty")
    try:
        ec = estimate_conditional(past, scheme)
    except InsufficientData as exc:
        print(f"insufficient data: {exc}", file=sys.stderr)
        return EXIT_INSUFFICIENT
    result = {
        "meta": {
            "version": __version__,
            "config": {
                "input": args.input,
                "scheme": str(scheme),
                "query": args.query,
                "cdf_grid": args.cdf_grid,
                "clip_D": args.clip_D,
            },
        },
        "k": ec.k,
        "lambdas": list(ec.ladder.lambdas),
        "taus": list(ec.ladder.taus),
        "probs": {text: ec.prob(q) for text, q in queries},
        "cdf": [{"x": float(x), "F": ec.cdf(x)} for x in grid] if grid is not None else [],
        "mean": ec.mean(cfg),
    }
    write_output(args.output, json.dumps(result, indent=2) + "\n")
    return EXIT_OK


def cmd_classify(args) -> int:
    scheme = parse_scheme(args.scheme)
    data = read_labeled(args.input)
    try:
        est = estimate_eta(data, scheme)
    except InsufficientData as exc:
        print(f"insufficient data: {exc}", file=sys.stderr)
        return EXIT_INSUFFICIENT
    result = {
        "meta": {"version": __version__, "config": {"input": args.input, "scheme": str(scheme)}},
        "eta": est.eta,
        "k": est.k,
        "decision": est.decision,
    }
    write_output(args.output, json.dumps(result, indent=2) + "\n")
    return EXIT_OK


def _load_json(path) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return data


VERIFY_DEFAULTS = {
    "master_seed": 0,
    "binary_strings": 1000,
    "real_strings": 200,
    "min_length": 8,
    "max_length": 512,
    "lemma2": {
        "process": {"name": "markov", "P": [[0.9, 0.1], [0.2, 0.8]]},
        "j": 2,
        "atom": {"pattern": [1]},
        "query": "{1}",
        "paths": 100_000,
        "se_multiple": 3.0,
        "scheme": "alphabet:2",
    },
    "output": None,
}


def _merge_verify_config(data: dict) -> dict:
    unknown = set(data) - set(VERIFY_DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    config = {**VERIFY_DEFAULTS, **data}
    lemma = data.get("lemma2")
    if lemma is not None:
        if not isinstance(lemma, dict):
            raise ConfigError("lemma2 must be an object (or omitted)")
        unknown = set(lemma) - set(VERIFY_DEFAULTS["lemma2"])
        if unknown:
            raise ConfigError(f"unknown lemma2 keys: {sorted(unknown)}")
        config["lemma2"] = {**VERIFY_DEFAULTS["lemma2"], **lemma}
    return config


def run_verify(config: dict) -> tuple[ConvergenceReport, bool]:
    """Oracle equivalence plus the recurrence-unbiasedness check; returns the report and overall pass."""
    records = []
    rows = oracle_equivalence(
        config["binary_strings"],
        config["real_strings"],
        config["min_length"],
        config["max_length"],
        config["master_seed"],
    )
    for family, length, index, kappa, match in rows:
        records.append(Record(family, length, index, kappa, "ladder_match", float(match)))
    ok = all(r[-1] for r in rows)
    lemma = config["lemma2"]
    process = build_process(lemma["process"])
    report = lemma2_check(
        process,
        int(lemma["j"]),
        Atom(tuple(lemma["atom"]["pattern"]), lemma["atom"].get("lam")),
        QuerySet.parse(lemma["query"]),
        int(lemma["paths"]),
        seed=config["master_seed"],
        scheme=parse_scheme(lemma["scheme"]) if lemma.get("scheme") else None,
        se_multiple=float(lemma["se_multiple"]),
    )
    for metric in ("n_paths", "n_atom", "n_unresolved", "freq_tau", "freq_zero", "pooled_se", "paired_se"):
        records.append(Record(process.name, None, None, None, f"lemma2_{metric}", float(getattr(report, metric))))
    records.append(Record(process.name, None, None, None, "lemma2_pass", float(report.verdict == "PASS")))
    ok = ok and report.verdict == "PASS"
    header = {"version": __version__, "config": config, "master_seed": config["master_seed"]}
    return ConvergenceReport(records, [], header), ok


def cmd_verify(args) -> int:
    data = _load_json(args.config) if args.config else {}
    config = _merge_verify_config(data)
    if args.output:
        config["output"] = args.output
    try:
        report, ok = run_verify(config)
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"bad verify config: {exc}") from None
    write_output(config["output"], report.to_csv())
    print("verify: " + ("PASS" if ok else "FAIL"), file=sys.stderr)
    return EXIT_OK if ok else EXIT_FAILED


def cmd_experiment(args) -> int:
    data = _load_json(args.config)
    try:
        spec = ExperimentSpec.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad experiment config: {exc}") from None
    if args.output:
        spec.output = args.output
    if args.workers:
        spec.workers = args.workers
    report = run_experiment(spec)
    write_output(spec.output, report.to_csv())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ergodic-inference", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a sample path")
    p.add_argument("--process", required=True, choices=["bernoulli", "uniform", "markov", "ar1", "rotation", "labeled"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--length", type=int, required=True)
    p.add_argument("--output")
    p.add_argument("--p", type=float)
    p.add_argument("--matrix", type=_matrix, help="rows separated by ';', e.g. '0.9,0.1;0.2,0.8'")
    p.add_argument("--emission", type=_floats)
    p.add_argument("--a", type=float)
    p.add_argument("--sd", type=float)
    p.add_argument("--D", type=float)
    p.add_argument("--burn-in", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--threshold", type=float)
    p.add_argument("--probs", type=_floats)
    p.add_argument("--breakpoints", type=_floats)
    p.add_argument("--low", type=float)
    p.add_argument("--high", type=float)
    p.add_argument("--hide-last-label", action="store_true", help="leave y empty on the last row")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="conditional distribution of the next value")
    p.add_argument("--input", required=True)
    p.add_argument("--scheme", default="dyadic")
    p.add_argument("--query", action="append", default=[], help="'(a,b]' or '{v1,v2}'")
    p.add_argument("--cdf-grid", help="lo:hi:step")
    p.add_argument("--clip-D", type=float)
    p.add_argument("--output")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("classify", help="a posteriori label probability at the query row")
    p.add_argument("--input", required=True)
    p.add_argument("--scheme", default="dyadic")
    p.add_argument("--output")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("verify", help="oracle equivalence and recurrence-unbiasedness check")
    p.add_argument("--config")
    p.add_argument("--output")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("experiment", help="consistency / online / classification experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--output")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
