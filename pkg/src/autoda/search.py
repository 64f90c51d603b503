"""Two-stage batched program search under a global oracle-query budget.

Workers repeatedly generate programs, filter them (inputs check, then
distance test), and assemble survivors into batches.  Each batch shares one
example, one starting point and one noise stream; every survivor runs a
short stage-1 walk with adaptation disabled so the ratios are mutually
comparable, and the batch winner gets a long stage-2 evaluation on the
search's fixed examples with adaptation enabled.

Determinism contract: every random draw comes from a stream keyed by
(seed, batch index, role), so results are byte-identical for any worker
count.  Batches run speculatively in parallel but are consumed in index
order; when the remaining budget cannot cover a batch's natural cost, that
batch is re-run with the remainder as a hard cap, making the total oracle
query count exactly equal to the budget.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import kernels
from .engine import ControllerConfig, attack, distortion_ratio, find_start
from .generate import GenConfig, gen_from_uniforms, uniform_block_size
from .jsonio import dumps
from .oracles import DecisionOracle, parse_oracle_spec
from .program import SsaProgram
from .rng import stream
from .text import format_program

__all__ = [
    "SearchConfig", "BatchResult", "SearchRecord", "SearchResult", "Pools",
    "build_pools", "run_batch", "stage1_batch", "stage2_eval", "run_search",
    "ABLATION_SUBSETS", "ablation_settings", "run_ablation",
]

GEN_BLOCK = 8192
# safety valve: a filter configuration that passes (almost) nothing must not spin forever
MAX_GENERATED_PER_BATCH = 100_000_000


@dataclass(frozen=True)
class SearchConfig:
    oracle: str
    query_budget: int
    dim: int = 16
    seed: int = 0
    batch_size: int = 150
    stage1_iters: int = 100
    stage2_iters: int = 10_000
    n_stage2_examples: int = 10
    workers: int = 1
    top_k: int = 10
    pool_size: int = 64
    stage2_adaptation: bool = True
    gen: GenConfig = field(default_factory=GenConfig)
    controller: ControllerConfig = field(default_factory=ControllerConfig)

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.stage2_iters <= self.stage1_iters:
            raise ValueError("stage2_iters must exceed stage1_iters")
        if self.query_budget < 0:
            raise ValueError("query_budget must be >= 0")
        if self.workers < 1 or self.pool_size < 1 or self.n_stage2_examples < 1:
            raise ValueError("workers, pool_size and n_stage2_examples must be >= 1")


@dataclass(frozen=True)
class Pools:
    """Fixed points every batch draws from: benign examples, one adversarial
    fallback starting point, and the stage-2 evaluation examples."""

    examples: np.ndarray
    fallback: np.ndarray
    stage2_examples: np.ndarray


def _rejection_draw(oracle: DecisionOracle, dim: int, rng, adversarial: bool,
                    count: int, cap: int = 1_000_000) -> np.ndarray:
    out = []
    for _ in range(cap):
        x = rng.standard_normal(dim)
        if oracle.decide(x) == adversarial:
            out.append(x)
            if len(out) == count:
                return np.array(out)
    raise RuntimeError("could not draw labelled pool points; oracle labels look one-sided")


def build_pools(cfg: SearchConfig, oracle: DecisionOracle) -> Pools:
    """Label pool points with uncounted decide() calls; queries start at the attack."""
    examples = _rejection_draw(oracle, cfg.dim, stream(cfg.seed, "pool"), False, cfg.pool_size)
    fallback = _rejection_draw(oracle, cfg.dim, stream(cfg.seed, "pool", "fallback"), True, 1)[0]
    stage2 = _rejection_draw(oracle, cfg.dim, stream(cfg.seed, "pool", "stage2"), False,
                             cfg.n_stage2_examples)
    return Pools(examples, fallback, stage2)


@dataclass
class BatchResult:
    index: int
    generated: int = 0
    failed_inputs: int = 0
    failed_distance: int = 0
    evaluated: int = 0
    start_queries: int = 0
    queries: int = 0
    winner_text: str | None = None
    winner_stage1_ratio: float | None = None
    stage2_ratios: list[float] = field(default_factory=list)
    stage2_mean: float | None = None


@dataclass(frozen=True)
class SearchRecord:
    batch: int
    program: str | None
    stage1_ratio: float | None
    stage2_mean_ratio: float | None
    stage2_ratios: tuple[float, ...]
    queries: int
    counters: dict

    def to_json(self) -> str:
        return dumps({
            "batch": self.batch,
            "program": self.program,
            "stage1_ratio": self.stage1_ratio,
            "stage2_mean_ratio": self.stage2_mean_ratio,
            "stage2_ratios": list(self.stage2_ratios),
            "queries": self.queries,
            "counters": self.counters,
        })


@dataclass
class SearchResult:
    records: list[SearchRecord]
    stats: dict
    batches: list[BatchResult]


def _generate_survivors(gen: GenConfig, rng, want: int, distance_cases,
                        counters: BatchResult | None = None,
                        do_inputs_check: bool = True, do_distance_test: bool = True,
                        require_hyperparams: bool = True,
                        ) -> tuple[list[np.ndarray], tuple, np.ndarray]:
    """Draw uniform blocks until ``want`` programs pass the filters.

    Returns (survivor uniform rows, encoded op arrays for the batched
    kernel, meta array).  Survivors stay in encoded form; a survivor's
    uniform row regenerates its structured program on demand.
    """
    tx0, tx, tn, tthr = distance_cases
    block = uniform_block_size(gen)
    ml = gen.max_len
    out_ops = np.empty((want, ml), dtype=np.int64)
    out_dest = np.empty((want, ml), dtype=np.int64)
    out_a = np.empty((want, ml), dtype=np.int64)
    out_b = np.empty((want, ml), dtype=np.int64)
    out_meta = np.empty((want, 4), dtype=np.int64)
    rows: list[np.ndarray] = []
    generated = failed_inputs = failed_distance = 0
    have = 0
    while have < want:
        if generated > MAX_GENERATED_PER_BATCH:
            raise RuntimeError("filters reject essentially every program; giving up")
        uniforms = rng.random((GEN_BLOCK, block))
        g, fi, fd, ns = kernels.gen_filter_batch(
            uniforms, ml, gen.n_hyperparams, gen.hyperparam_init, gen.unused_bias,
            gen.predefined, do_inputs_check, require_hyperparams, do_distance_test,
            tx0, tx, tn, tthr,
            out_ops[have:], out_dest[have:], out_a[have:], out_b[have:], out_meta[have:])
        for s in range(ns):
            rows.append(uniforms[out_meta[have + s, 3]].copy())
        generated += g
        failed_inputs += fi
        failed_distance += fd
        have += ns
    if counters is not None:
        counters.generated += generated
        counters.failed_inputs += failed_inputs
        counters.failed_distance += failed_distance
        counters.evaluated += want
    enc = (out_ops, out_dest, out_a, out_b)
    return rows, enc, out_meta


def stage1_batch(rows: list[np.ndarray], gen: GenConfig, oracle: DecisionOracle,
                 x0, x1, noise_rng, iters: int, controller: ControllerConfig,
                 budget: int | None = None, encoded=None, meta=None,
                 ) -> tuple[list[float], int]:
    """Short comparable walks: shared example, start and noise, adaptation off.

    ``noise_rng`` is a zero-argument factory so every program sees identical
    noise rows.  Returns (ratios, total queries).  When the pre-encoded
    kernel arrays are given and the oracle has kernel parameters, the whole
    batch runs inside the compiled loop; the python path is bitwise equal.
    """
    params = oracle.kernel_params()
    if params is not None and encoded is not None:
        kind, ovec, oscal, oside = params
        noise = noise_rng().standard_normal((iters, len(x0)))
        ratios = np.zeros(len(rows))
        queries_out = np.zeros(len(rows), dtype=np.int64)
        total = kernels.stage1_eval(
            encoded[0], encoded[1], encoded[2], encoded[3], meta,
            len(rows), gen.n_hyperparams, gen.hyperparam_init,
            np.asarray(x0, dtype=np.float64), np.asarray(x1, dtype=np.float64), noise,
            kind, ovec, float(oscal), oside,
            False, controller.alpha, controller.lo, controller.hi,
            controller.p_target, controller.p_init,
            -1 if budget is None else budget, ratios, queries_out)
        oracle.add_queries(int(total))
        return [float(r) for r in ratios], int(total)
    ratios = []
    total = 0
    for row in rows:
        remaining = None if budget is None else budget - total
        log = attack(gen_from_uniforms(gen, row), oracle, x0, start=x1, budget=remaining,
                     max_iters=iters, controller=controller, rng=noise_rng(),
                     adaptation_enabled=False)
        ratios.append(distortion_ratio(log))
        total += log.queries
    return ratios, total


def stage2_eval(program: SsaProgram, oracle: DecisionOracle, pools: Pools,
                cfg: SearchConfig, budget: int | None = None,
                ) -> tuple[list[float], int]:
    """Long evaluation on the fixed stage-2 examples, adaptation enabled.

    Streams are keyed (seed, "stage2", example index) only, so every batch
    winner sees identical starting points and noise.  Returns (per-example
    ratios, queries spent); examples whose starting-point search ran out of
    budget contribute no ratio.
    """
    ratios = []
    total = 0
    for j in range(cfg.n_stage2_examples):
        remaining = None if budget is None else budget - total
        log = attack(program, oracle, pools.stage2_examples[j], fallback=pools.fallback,
                     budget=remaining, max_iters=cfg.stage2_iters, controller=cfg.controller,
                     rng=stream(cfg.seed, "stage2", j),
                     adaptation_enabled=cfg.stage2_adaptation)
        total += log.queries
        if log.found_start:
            ratios.append(distortion_ratio(log))
    return ratios, total


def run_batch(cfg: SearchConfig, index: int, budget: int | None = None,
              oracle: DecisionOracle | None = None, pools: Pools | None = None,
              ) -> BatchResult:
    """Generate, filter, stage-1 evaluate and stage-2 evaluate one batch."""
    if oracle is None:
        oracle = parse_oracle_spec(cfg.oracle)
    if pools is None:
        pools = build_pools(cfg, oracle)
    res = BatchResult(index=index)

    ex_rng = stream(cfg.seed, "batch", index, "example")
    pick = min(int(ex_rng.random() * len(pools.examples)), len(pools.examples) - 1)
    x0 = pools.examples[pick]

    x1, start_q = find_start(oracle, x0, stream(cfg.seed, "batch", index, "start"),
                             fallback=pools.fallback, budget=budget)
    res.start_queries = start_q
    res.queries = start_q
    if x1 is None:
        return res
    remaining = None if budget is None else budget - res.queries

    from .engine import _default_distance_cases
    rows, enc, meta = _generate_survivors(
        cfg.gen, stream(cfg.seed, "batch", index, "gen"), cfg.batch_size,
        _default_distance_cases(10, 32), counters=res)

    def noise_rng():
        return stream(cfg.seed, "batch", index, "noise")

    ratios, q1 = stage1_batch(rows, cfg.gen, oracle, x0, x1, noise_rng, cfg.stage1_iters,
                              cfg.controller, budget=remaining, encoded=enc, meta=meta)
    res.queries += q1
    if remaining is not None:
        remaining -= q1

    best = int(np.argmin(ratios))
    winner = gen_from_uniforms(cfg.gen, rows[best])
    res.winner_text = format_program(winner)
    res.winner_stage1_ratio = float(ratios[best])

    s2, q2 = stage2_eval(winner, oracle, pools, cfg, budget=remaining)
    res.queries += q2
    res.stage2_ratios = s2
    if s2:
        res.stage2_mean = float(np.mean(s2))
    return res


_worker_state: dict = {}


def _batch_worker(cfg: SearchConfig, index: int) -> BatchResult:
    key = (cfg.oracle, cfg.dim, cfg.seed, cfg.pool_size, cfg.n_stage2_examples)
    state = _worker_state.get(key)
    if state is None:
        oracle = parse_oracle_spec(cfg.oracle)
        state = (oracle, build_pools(cfg, oracle))
        _worker_state.clear()
        _worker_state[key] = state
    return run_batch(cfg, index, oracle=state[0], pools=state[1])


def _record(res: BatchResult) -> SearchRecord:
    return SearchRecord(
        batch=res.index,
        program=res.winner_text,
        stage1_ratio=res.winner_stage1_ratio,
        stage2_mean_ratio=res.stage2_mean,
        stage2_ratios=tuple(res.stage2_ratios),
        queries=res.queries,
        counters={"generated": res.generated, "failed_inputs": res.failed_inputs,
                  "failed_distance": res.failed_distance, "evaluated": res.evaluated},
    )


def run_search(cfg: SearchConfig, out_dir: str | Path | None = None) -> SearchResult:
    """Run batches until the query budget is spent exactly; rank by stage-2 mean."""
    oracle = parse_oracle_spec(cfg.oracle)
    pools = build_pools(cfg, oracle)
    remaining = cfg.query_budget
    batches: list[BatchResult] = []

    def consume(res: BatchResult) -> int:
        nonlocal remaining
        if res.queries > remaining:
            res = run_batch(cfg, res.index, budget=remaining, oracle=oracle, pools=pools)
        remaining -= res.queries
        batches.append(res)
        return remaining

    if cfg.workers == 1:
        index = 0
        while remaining > 0:
            consume(run_batch(cfg, index, oracle=oracle, pools=pools))
            index += 1
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            futures = {}
            next_submit = 0
            next_consume = 0
            while remaining > 0:
                while len(futures) < 2 * cfg.workers:
                    futures[next_submit] = ex.submit(_batch_worker, cfg, next_submit)
                    next_submit += 1
                consume(futures.pop(next_consume).result())
                next_consume += 1
            for fut in futures.values():
                fut.cancel()

    records = [_record(b) for b in batches]
    records.sort(key=lambda r: (r.stage2_mean_ratio is None,
                                r.stage2_mean_ratio if r.stage2_mean_ratio is not None else 0.0,
                                r.batch))
    stats = {
        "query_budget": cfg.query_budget,
        "queries": sum(b.queries for b in batches),
        "batches": len(batches),
        "generated": sum(b.generated for b in batches),
        "failed_inputs": sum(b.failed_inputs for b in batches),
        "failed_distance": sum(b.failed_distance for b in batches),
        "evaluated": sum(b.evaluated for b in batches),
    }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "results.jsonl", "w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(rec.to_json() + "\n")
        with open(out / "stats.json", "w", encoding="utf-8") as fh:
            fh.write(dumps(stats, indent=2) + "\n")
        rank = 0
        for rec in records:
            if rec.program is None or rank >= cfg.top_k:
                continue
            (out / f"top_{rank:03d}.txt").write_text(rec.program, encoding="utf-8")
            rank += 1
    return SearchResult(records, stats, batches)


# ---------------------------------------------------------------------------
# ablation harness: cumulative technique subsets

ABLATION_SUBSETS = ("base", "+predefined", "+inputs_check", "+distance_test", "+compact")


def ablation_settings(subset: str, base: GenConfig | None = None,
                      ) -> tuple[GenConfig, bool, bool]:
    """(GenConfig, inputs_check on, distance_test on) for a cumulative subset."""
    gen = base or GenConfig()
    level = ABLATION_SUBSETS.index(subset)
    gen = replace(gen,
                  predefined=level >= 1,
                  unused_bias=gen.unused_bias if level >= 4 else 1.0)
    return gen, level >= 2, level >= 3


def _ablation_cell(oracle_spec: str, dim: int, subset: str, seed: int,
                   n_programs: int, stage1_iters: int, gen_base: GenConfig | None,
                   controller: ControllerConfig, n_examples: int = 1) -> float:
    """Best stage-1 score over n_programs surviving programs for one subset/seed.

    A program's score is its stage-1 distortion ratio averaged over
    ``n_examples`` examples; more than one example damps single-example
    luck so the cell minimum reflects robust programs.  The examples,
    starting points, noise and generation uniforms are shared across
    subsets for a given seed (common random numbers), so subset scores
    form a paired comparison: subsets that differ only by a filter
    evaluate overlapping program populations.

    The inputs check here gates on the three data inputs only
    (``require_hyperparams=False``): these short comparable walks run
    with hyperparameter adjustment disabled, so hyperparameter liveness
    says nothing about a program's stage-1 quality.
    """
    from .engine import _default_distance_cases
    oracle = parse_oracle_spec(oracle_spec)
    gen, do_ic, do_dt = ablation_settings(subset, gen_base)
    rows, enc, meta = _generate_survivors(
        gen, stream(seed, "ablation", "gen"), n_programs,
        _default_distance_cases(10, 32), do_inputs_check=do_ic, do_distance_test=do_dt,
        require_hyperparams=False)

    total = np.zeros(n_programs)
    for j in range(n_examples):
        x0 = _rejection_draw(oracle, dim, stream(seed, "ablation", "example", j), False, 1)[0]
        fallback = _rejection_draw(oracle, dim, stream(seed, "ablation", "fallback", j),
                                   True, 1)[0]
        x1, _ = find_start(oracle, x0, stream(seed, "ablation", "start", j),
                           fallback=fallback)

        def noise_rng(j=j):
            return stream(seed, "ablation", "noise", j)

        ratios, _ = stage1_batch(rows, gen, oracle, x0, x1, noise_rng, stage1_iters,
                                 controller, encoded=enc, meta=meta)
        total += np.asarray(ratios)
    return float(total.min() / n_examples)


def run_ablation(oracle_spec: str, dim: int = 16, n_programs: int = 100_000,
                 seeds=(0, 1, 2, 3, 4), stage1_iters: int = 100, workers: int = 1,
                 gen_base: GenConfig | None = None,
                 controller: ControllerConfig | None = None,
                 n_examples: int = 1) -> dict[str, list[float]]:
    """Best stage-1 score per technique subset, one value per seed."""
    controller = controller or ControllerConfig()
    cells = [(subset, seed) for subset in ABLATION_SUBSETS for seed in seeds]
    results: dict[tuple, float] = {}
    if workers == 1:
        for subset, seed in cells:
            results[(subset, seed)] = _ablation_cell(
                oracle_spec, dim, subset, seed, n_programs, stage1_iters,
                gen_base, controller, n_examples)
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            futs = {ex.submit(_ablation_cell, oracle_spec, dim, subset, seed,
                              n_programs, stage1_iters, gen_base, controller,
                              n_examples): (subset, seed)
                    for subset, seed in cells}
            for fut, cell in futs.items():
                results[cell] = fut.result()
    return {subset: [results[(subset, seed)] for seed in seeds]
            for subset in ABLATION_SUBSETS}
