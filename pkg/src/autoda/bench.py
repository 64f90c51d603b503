"""Benchmark harness: attack curves over example sets, persistence, reports.

A benchmark runs one attack per (program, example) pair and derives two
step-function curves per program: aggregated l2 distortion vs. queries and
success rate vs. queries, where success means the best adversarial distance
has dropped below epsilon.  Per-run logs are persisted as JSON lines (one
``{"q": ..., "d": ...}`` record per accepted update plus a trailing summary
record), and every report is derivable offline from those logs alone.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .engine import ControllerConfig, RunLog, attack
from .jsonio import dumps, format_float
from .oracles import DecisionOracle
from .rng import stream

__all__ = [
    "BenchConfig", "Curve", "BenchResult", "run_log_lines", "save_run_log",
    "load_run_log", "curve_from_logs", "benchmark", "emit_reports",
]

DEFAULT_CHECKPOINTS = (2_000, 4_000, 20_000)


@dataclass(frozen=True)
class BenchConfig:
    budget: int
    epsilon: float
    seed: int = 0
    aggregate: str = "median"  # or "mean"
    noise_scale: float = 1.0
    checkpoints: tuple[int, ...] = DEFAULT_CHECKPOINTS

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if self.aggregate not in ("median", "mean"):
            raise ValueError("aggregate must be 'median' or 'mean'")


@dataclass
class Curve:
    """Right-continuous step functions sampled at every logged query count."""

    queries: list[int]
    distortion: list[float | None]  # None while no run has found its start yet
    success_rate: list[float]

    def at(self, q: int) -> tuple[float, float] | None:
        """Curve value at the greatest logged query count <= q."""
        idx = np.searchsorted(self.queries, q, side="right") - 1
        if idx < 0:
            return None
        return self.distortion[idx], self.success_rate[idx]


@dataclass
class BenchResult:
    curves: dict[str, Curve]
    logs: dict[str, list[RunLog]]
    excluded: dict[str, list[int]] = field(default_factory=dict)


def run_log_lines(log: RunLog) -> list[str]:
    """Serialize a run as JSON lines: accepted updates, then one summary."""
    lines = [dumps({"q": q, "d": d}) for q, d in log.records]
    lines.append(dumps({
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
    }))
    return lines


def save_run_log(log: RunLog, path: str | Path) -> None:
    Path(path).write_text("\n".join(run_log_lines(log)) + "\n", encoding="utf-8")


def load_run_log(source: str | Path) -> RunLog:
    """Rebuild a RunLog from its JSON-lines form (a file path, or raw text
    containing at least one newline)."""
    text = str(source)
    if "\n" not in text:
        text = Path(source).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty run log")
    summary = json.loads(lines[-1])
    if not summary.get("summary"):
        raise ValueError("run log is missing its trailing summary record")
    log = RunLog(
        records=[(json.loads(ln)["q"], json.loads(ln)["d"]) for ln in lines[:-1]],
        found_start=summary["found_start"],
        start_queries=summary["start_queries"],
        initial_distance=summary["initial_distance"],
        d_min=summary["d_min"],
        queries=summary["queries"],
        iterations=summary["iterations"],
        budget=summary["budget"],
        hyper_final=tuple(summary["hyper_final"]),
    )
    return log


def curve_from_logs(logs: list[RunLog], epsilon: float, aggregate: str = "median") -> Curve:
    """Merge per-example runs into distortion and success-rate step curves.

    At a query count q each run contributes its best distance achieved with
    <= q queries; runs whose starting point is not yet found contribute no
    distortion value and count as unsuccessful.
    """
    events: list[list[tuple[int, float]]] = []
    grid: set[int] = set()
    for log in logs:
        if not log.found_start:
            events.append([])
            continue
        ev = [(log.start_queries, log.initial_distance)] + list(log.records)
        events.append(ev)
        grid.update(q for q, _ in ev)
    queries = sorted(grid)
    agg = np.median if aggregate == "median" else np.mean
    distortion: list[float] = []
    success: list[float] = []
    n = len(logs)
    for q in queries:
        current = []
        got = 0
        for ev in events:
            d = None
            for eq, ed in ev:
                if eq > q:
                    break
                d = ed
            if d is not None:
                current.append(d)
                if d < epsilon:
                    got += 1
        distortion.append(float(agg(current)) if current else None)
        success.append(got / n if n else 0.0)
    return Curve(queries, distortion, success)


def benchmark(programs: dict, oracle: DecisionOracle, examples, cfg: BenchConfig,
              fallback=None, controller: ControllerConfig | None = None,
              log_dir: str | Path | None = None) -> BenchResult:
    """Attack every (program, example) pair and build per-program curves.

    Examples the oracle already labels adversarial are excluded and reported
    (their index lands in ``result.excluded``).  Streams are keyed
    (seed, "bench", program name, example index) so runs are independent and
    reproducible.  Logs are persisted to ``log_dir`` when given.
    """
    examples = np.asarray(examples, dtype=np.float64)
    curves: dict[str, Curve] = {}
    all_logs: dict[str, list[RunLog]] = {}
    excluded: dict[str, list[int]] = {}
    for name, program in programs.items():
        logs = []
        skipped = []
        for j in range(len(examples)):
            x0 = examples[j]
            if oracle.decide(x0):
                skipped.append(j)
                continue
            log = attack(program, oracle, x0, fallback=fallback, budget=cfg.budget,
                         controller=controller, rng=stream(cfg.seed, "bench", name, j),
                         noise_scale=cfg.noise_scale)
            if log_dir is not None:
                path = Path(log_dir)
                path.mkdir(parents=True, exist_ok=True)
                save_run_log(log, path / f"{name}__{j}.jsonl")
            logs.append(log)
        all_logs[name] = logs
        excluded[name] = skipped
        curves[name] = curve_from_logs(logs, cfg.epsilon, cfg.aggregate)
    return BenchResult(curves, all_logs, excluded)


def emit_reports(curves: dict[str, Curve], out_dir: str | Path,
                 checkpoints: tuple[int, ...] = DEFAULT_CHECKPOINTS) -> list[Path]:
    """Write one CSV per program plus a JSON summary at the query checkpoints."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    summary: dict[str, dict] = {}
    for name, curve in curves.items():
        path = out / f"{name}.csv"
        rows = ["queries,median_distortion,success_rate"]
        for q, d, s in zip(curve.queries, curve.distortion, curve.success_rate):
            cell = "" if d is None else format_float(d)
            rows.append(f"{q},{cell},{format_float(s)}")
        path.write_text("\n".join(rows) + "\n", encoding="utf-8")
        written.append(path)
        marks = {}
        for cp in checkpoints:
            at = curve.at(cp)
            marks[str(cp)] = None if at is None else {
                "distortion": at[0], "success_rate": at[1]}
        summary[name] = marks
    spath = out / "summary.json"
    spath.write_text(dumps(summary, indent=2) + "\n", encoding="utf-8")
    written.append(spath)
    return written
