"""Command-line entry points.

Subcommands: gen, check, compile, attack, search, bench, report.
Exit codes: 0 success, 1 validation error (bad arguments, parse failures,
failed checks), 2 runtime abort.  All files are UTF-8; floats are printed
with 17 significant digits.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .analysis import inputs_check
from .bench import BenchConfig, benchmark, curve_from_logs, emit_reports, load_run_log
from .compiler import compile_to_tac
from .engine import ControllerConfig, attack, distance_test
from .generate import GenConfig, gen_random
from .jsonio import dumps
from .oracles import MlpFormatError, parse_oracle_spec
from .program import ProgramError
from .rng import stream
from .search import SearchConfig, run_search
from .text import ParseError, format_program, format_tac, parse_program

__all__ = ["main"]

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


class ValidationFailure(Exception):
    pass


def _write_out(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _gen_config(args) -> GenConfig:
    return GenConfig(max_len=args.max_len, n_hyperparams=args.hyperparams,
                     hyperparam_init=args.hyper_init, unused_bias=args.bias,
                     predefined=not args.no_predefined)


def _add_gen_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--max-len", type=int, default=20)
    p.add_argument("--hyperparams", type=int, default=1)
    p.add_argument("--hyper-init", type=float, default=0.01)
    p.add_argument("--bias", type=float, default=4.0)
    p.add_argument("--no-predefined", action="store_true")


def cmd_gen(args) -> int:
    cfg = _gen_config(args)
    texts = []
    for i in range(args.count):
        program = gen_random(cfg, stream(args.seed, "gen", i))
        texts.append(format_program(program))
    _write_out("\n".join(texts), args.output)
    return EXIT_OK


def cmd_check(args) -> int:
    text = Path(args.file).read_text(encoding="utf-8")
    program = parse_program(text)
    result = inputs_check(program)
    if not result.ok:
        print(f"FAIL inputs check: {result.reason}")
        return EXIT_VALIDATION
    print("PASS inputs check")
    if args.distance_test:
        if not distance_test(program, dim=args.dim):
            print("FAIL distance test")
            return EXIT_VALIDATION
        print("PASS distance test")
    return EXIT_OK


def cmd_compile(args) -> int:
    program = parse_program(Path(args.file).read_text(encoding="utf-8"))
    _write_out(format_tac(compile_to_tac(program)), args.output)
    return EXIT_OK


def _benign_example(oracle, dim: int, rng, cap: int = 1_000_000) -> np.ndarray:
    for _ in range(cap):
        x = rng.standard_normal(dim)
        if not oracle.decide(x):
            return x
    raise ValidationFailure("could not sample a benign example from the oracle")


def _adversarial_example(oracle, dim: int, rng, cap: int = 1_000_000) -> np.ndarray:
    for _ in range(cap):
        x = rng.standard_normal(dim)
        if oracle.decide(x):
            return x
    raise ValidationFailure("could not sample an adversarial fallback from the oracle")


def cmd_attack(args) -> int:
    program = parse_program(Path(args.program).read_text(encoding="utf-8"))
    oracle = parse_oracle_spec(args.oracle)
    if getattr(oracle, "dim", None) is None:
        oracle.dim = args.dim
    if oracle.dim != args.dim:
        raise ValidationFailure(f"oracle dimension {oracle.dim} != --dim {args.dim}")
    x0 = _benign_example(oracle, args.dim, stream(args.seed, "example"))
    fallback = _adversarial_example(oracle, args.dim, stream(args.seed, "fallback"))
    log = attack(program, oracle, x0, fallback=fallback, budget=args.budget,
                 rng=stream(args.seed, "attack"), adaptation_enabled=not args.no_adapt)
    lines = [dumps({"q": q, "d": d}) for q, d in log.records]
    summary = {
        "summary": True,
        "found_start": log.found_start,
        "start_queries": log.start_queries,
        "initial_distance": log.initial_distance,
        "d_min": log.d_min,
        "queries": log.queries,
        "iterations": log.iterations,
        "budget": log.budget,
        "accepted": log.accepted,
        "hyper_final": list(log.hyper_final),
    }
    if args.epsilon is not None:
        summary["epsilon"] = args.epsilon
        summary["success"] = log.d_min is not None and log.d_min < args.epsilon
    lines.append(dumps(summary))
    _write_out("\n".join(lines) + "\n", args.output)
    return EXIT_OK


def _load_config(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationFailure(f"config {path} is not valid JSON: {exc}") from exc


def cmd_search(args) -> int:
    raw = _load_config(args.config)
    gen = GenConfig(**raw.pop("gen", {}))
    controller = ControllerConfig(**raw.pop("controller", {}))
    try:
        cfg = SearchConfig(gen=gen, controller=controller, **raw)
    except TypeError as exc:
        raise ValidationFailure(f"bad search config: {exc}") from exc
    result = run_search(cfg, out_dir=args.out)
    print(dumps(result.stats, indent=2))
    return EXIT_OK


def cmd_bench(args) -> int:
    raw = _load_config(args.config)
    oracle = parse_oracle_spec(raw["oracle"])
    dim = int(raw.get("dim", getattr(oracle, "dim", 16)))
    if getattr(oracle, "dim", None) is None:
        oracle.dim = dim
    cfg = BenchConfig(budget=int(raw["budget"]), epsilon=float(raw["epsilon"]),
                      seed=int(raw.get("seed", 0)),
                      aggregate=raw.get("aggregate", "median"),
                      checkpoints=tuple(raw.get("checkpoints", (2000, 4000, 20000))))
    programs = {}
    for name, path in raw["programs"].items():
        programs[name] = parse_program(Path(path).read_text(encoding="utf-8"))
    rng = stream(cfg.seed, "bench-examples")
    examples = np.array([_benign_example(oracle, dim, rng)
                         for _ in range(int(raw.get("n_examples", 10)))])
    fallback = _adversarial_example(oracle, dim, stream(cfg.seed, "bench-fallback"))
    out = Path(args.out)
    result = benchmark(programs, oracle, examples, cfg, fallback=fallback,
                       log_dir=out / "logs")
    emit_reports(result.curves, out, cfg.checkpoints)
    for name, skipped in result.excluded.items():
        if skipped:
            print(f"{name}: excluded misclassified examples {skipped}")
    print(f"wrote reports to {out}")
    return EXIT_OK


def cmd_report(args) -> int:
    logs_dir = Path(args.logs)
    groups: dict[str, list] = {}
    for path in sorted(logs_dir.glob("*.jsonl")):
        name = path.stem.rsplit("__", 1)[0]
        groups.setdefault(name, []).append(load_run_log(path))
    if not groups:
        raise ValidationFailure(f"no run logs (*.jsonl) found in {logs_dir}")
    curves = {name: curve_from_logs(logs, args.epsilon, args.aggregate)
              for name, logs in groups.items()}
    emit_reports(curves, args.out, tuple(args.checkpoints))
    print(f"wrote reports to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="autoda",
                                     description="Synthesize and run decision-based attack programs.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate random programs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=1)
    _add_gen_flags(p)
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("check", help="validate a program and run the static/dynamic filters")
    p.add_argument("file")
    p.add_argument("--distance-test", action="store_true")
    p.add_argument("--dim", type=int, default=32)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("compile", help="compile a program to slot-addressed form")
    p.add_argument("file")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("attack", help="run one attack and write its log as JSON lines")
    p.add_argument("--program", required=True)
    p.add_argument("--oracle", required=True)
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--no-adapt", action="store_true")
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("search", help="run the two-stage batched program search")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("bench", help="benchmark programs over an example set")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("report", help="rebuild reports from persisted run logs")
    p.add_argument("--logs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--aggregate", choices=("median", "mean"), default="median")
    p.add_argument("--checkpoints", type=int, nargs="+", default=list((2000, 4000, 20000)))
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, ProgramError, MlpFormatError, ValidationFailure, ValueError,
            FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # runtime abort
        print(f"aborted: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
