"""Command-line entry point: ``fedalu run | sweep | validate``.

Exit codes: 0 success, 1 configuration or dataset error, 2 training abort.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, format_config, load_config
from .datasets import IDXFormatError
from .engine import Federation, RunResult, TrainingAborted, run

METRICS_COLUMNS = ["round", "mean_accuracy_pct", "cum_comm_c0", "wall_seconds"]
SUMMARY_COLUMNS = ["s", "converged_accuracy_pct", "total_comm_c0", "exchanges"]

EXIT_OK, EXIT_CONFIG, EXIT_ABORT = 0, 1, 2


def _f(x: float) -> str:
    return f"{x:.6f}"


def write_metrics(path: Path, result: RunResult, timing: bool) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRICS_COLUMNS)
        for m in result.metrics:
            # wall-clock time would break byte-identical reruns unless asked for
            w.writerow([m.round, _f(m.mean_accuracy_pct), _f(m.cum_comm_c0), _f(m.wall_seconds if timing else 0.0)])


def summary_row(s: int, result: RunResult) -> list:
    return [s, _f(result.converged_accuracy), _f(result.ledger.total_c0), len(result.ledger.exchange_rounds)]


def write_summary(path: Path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        w.writerows(rows)


def _load(args) -> RunConfig:
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg


def _report_config_error(exc: ConfigError) -> None:
    for problem in exc.problems:
        print(f"error: {problem}", file=sys.stderr)


def _out_dir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError([f"cannot create output directory {out}: {exc.strerror or exc}"]) from exc
    return out


def _prepare(cfg: RunConfig) -> Federation:
    try:
        return Federation.build(cfg)
    except (OSError, IDXFormatError, ValueError) as exc:
        raise ConfigError([f"dataset: {exc}"]) from exc


def cmd_run(args) -> int:
    try:
        cfg = _load(args)
        out = _out_dir(args.out_dir)
        fed = _prepare(cfg)
    except ConfigError as exc:
        _report_config_error(exc)
        return EXIT_CONFIG
    try:
        result = run(cfg, fed)
    except TrainingAborted as exc:
        print(f"error: training aborted at {exc}", file=sys.stderr)
        return EXIT_ABORT
    write_metrics(out / "metrics.csv", result, cfg.timing)
    write_summary(out / "summary.csv", [summary_row(cfg.s, result)])
    print(f"converged accuracy {result.converged_accuracy:.2f}% with {result.ledger.total_c0:g} C0 -> {out}")
    return EXIT_OK


def parse_s_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError([f"--s-list={text}: expected comma-separated integers"]) from None
    problems = []
    if not values:
        problems.append("--s-list: no values given")
    if len(set(values)) != len(values):
        problems.append(f"--s-list={text}: values must be distinct")
    problems += [f"--s-list: s={v} violates s >= 1" for v in values if v < 1]
    if problems:
        raise ConfigError(problems)
    return values


def cmd_sweep(args) -> int:
    try:
        cfg = _load(args)
        s_values = parse_s_list(args.s_list)
        out = _out_dir(args.out_dir)
        # one federation for every s: same partition and initial models
        fed = _prepare(cfg)
    except ConfigError as exc:
        _report_config_error(exc)
        return EXIT_CONFIG
    rows = []
    for s in s_values:
        run_cfg = cfg.replace(s=s)
        try:
            result = run(run_cfg, fed)
        except TrainingAborted as exc:
            print(f"error: s={s}: training aborted at {exc}", file=sys.stderr)
            return EXIT_ABORT
        write_metrics(out / f"metrics_s{s}.csv", result, cfg.timing)
        rows.append(summary_row(s, result))
        print(f"s={s}: converged accuracy {result.converged_accuracy:.2f}% with {result.ledger.total_c0:g} C0")
    write_summary(out / "sweep_summary.csv", rows)
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        _report_config_error(exc)
        return EXIT_CONFIG
    sys.stdout.write(format_config(cfg))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedalu", description="Federated distillation with accumulated local updates.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-round progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run the same experiment for several accumulation periods")
    p.add_argument("--config", required=True)
    p.add_argument("--s-list", required=True, help="comma-separated periods, e.g. 1,3,5,10")
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", help="check a config file and print the effective config")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
