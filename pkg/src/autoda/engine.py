"""Random-walk attack engine.

One run walks a current adversarial example x toward the original example x0
by repeatedly executing a proposal program on (x0, x, gaussian noise),
querying the oracle only for proposals that are finite and strictly closer
to x0 than the current best, and accepting proposals the oracle labels
adversarial.  A negative-feedback controller keeps the acceptance rate near
a target by scaling the program's hyperparameters.

Budgets count oracle queries, including those spent finding the starting
point.  Proposals that fail the closer-than-best check cost no query but
still count as failed trials for the controller.

For halfspace/sphere oracles the loop runs inside the compiled kernel; the
python loop here is the reference (and carries arbitrary oracles such as the
MLP).  Both paths are bitwise identical given the same noise stream.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .oracles import DecisionOracle
from .program import SsaProgram, TacProgram

__all__ = [
    "ControllerConfig", "AttackState", "RunLog", "StartPointError",
    "controller_f", "controller_step", "find_start", "distance_test",
    "make_distance_cases", "attack", "distortion_ratio",
]

NOISE_BLOCK = 4096
DISTANCE_TEST_SEED_PATH = ("distance-test",)


class StartPointError(RuntimeError):
    pass


@dataclass(frozen=True)
class ControllerConfig:
    """Negative-feedback step-size controller; the damping exponent is fixed at 1/10."""

    alpha: float = 0.95
    lo: float = 0.5
    hi: float = 1.5
    p_target: float = 0.25
    p_init: float = 0.25

    def __post_init__(self):
        if not 0.0 < self.lo < 1.0 < self.hi:
            raise ValueError("need 0 < lo < 1 < hi")
        if not 0.0 < self.p_target < 1.0:
            raise ValueError("need 0 < p_target < 1")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("need 0 < alpha < 1")


def controller_f(p: float, cfg: ControllerConfig) -> float:
    """Piecewise linear factor with f(0)=lo, f(p_target)=1, f(1)=hi; p clamped to [0,1]."""
    return float(kernels.ctrl_factor(float(p), cfg.lo, cfg.hi, cfg.p_target))


@dataclass
class AttackState:
    """Mutable per-run state of the random walk."""

    x0: np.ndarray
    x: np.ndarray
    d_min: float
    p: float
    hyper_values: np.ndarray
    queries: int = 0
    adaptation_enabled: bool = True


def controller_step(state: AttackState, success: int, cfg: ControllerConfig) -> AttackState:
    """Update the decayed success rate, then scale every hyperparameter by f(p)^(1/10)."""
    state.p = float(kernels.ctrl_update(state.p, float(success), state.hyper_values,
                                        cfg.alpha, cfg.lo, cfg.hi, cfg.p_target))
    return state


@dataclass
class RunLog:
    """Per-run trace: one (query index, d_min) record per accepted update."""

    records: list[tuple[int, float]] = field(default_factory=list)
    found_start: bool = False
    start_queries: int = 0
    initial_distance: float | None = None
    d_min: float | None = None
    queries: int = 0
    iterations: int = 0
    budget: int | None = None
    hyper_final: tuple[float, ...] = ()
    x_final: np.ndarray | None = None

    @property
    def accepted(self) -> int:
        return len(self.records)


def distortion_ratio(log: RunLog) -> float:
    """Final perturbation norm over starting perturbation norm; lower is better."""
    if not log.found_start or log.initial_distance is None:
        raise ValueError("run has no starting point; distortion ratio undefined")
    if log.initial_distance == 0.0:
        raise ValueError("zero initial distance; distortion ratio undefined")
    return log.d_min / log.initial_distance


def find_start(oracle: DecisionOracle, x0, rng: np.random.Generator, max_tries: int = 100,
               fallback=None, noise_scale: float = 1.0, budget: int | None = None,
               ) -> tuple[np.ndarray | None, int]:
    """Search for an adversarial starting point by adding gaussian noise to x0.

    After ``max_tries`` failures the (caller-guaranteed adversarial) fallback
    is queried and returned; a non-adversarial fallback is a hard error.
    Returns (x1 or None if the budget ran out, queries used).
    """
    x0 = np.asarray(x0, dtype=np.float64)
    queries = 0
    for _ in range(max_tries):
        if budget is not None and queries >= budget:
            return None, queries
        cand = x0 + noise_scale * rng.standard_normal(len(x0))
        queries += 1
        if oracle.query(cand):
            return cand, queries
    if fallback is None:
        raise StartPointError(f"no starting point within {max_tries} tries and no fallback given")
    if budget is not None and queries >= budget:
        return None, queries
    fallback = np.asarray(fallback, dtype=np.float64)
    queries += 1
    if not oracle.query(fallback):
        raise StartPointError("fallback starting point is not adversarial")
    return fallback.copy(), queries


def make_distance_cases(n_cases: int, dim: int, rng: np.random.Generator):
    """Seeded (x0, x, n) tuples for the distance test; x = x0 + gaussian offset."""
    tx0 = rng.standard_normal((n_cases, dim))
    tx = tx0 + rng.standard_normal((n_cases, dim))
    tn = rng.standard_normal((n_cases, dim))
    thr = np.array([float(kernels.l2_dist(tx[c], tx0[c])) for c in range(n_cases)])
    return tx0, tx, tn, thr


_default_cases: dict[tuple[int, int], tuple] = {}


def _default_distance_cases(n_cases: int, dim: int):
    # fixed per process so every filter call sees the same ten tuples
    key = (n_cases, dim)
    if key not in _default_cases:
        from .rng import stream
        _default_cases[key] = make_distance_cases(n_cases, dim, stream(0, *DISTANCE_TEST_SEED_PATH))
    return _default_cases[key]


def distance_test(program: SsaProgram | TacProgram, n_cases: int = 10, dim: int = 32,
                  cases=None) -> bool:
    """Dynamic filter: on every seeded case the program's output must be finite
    and strictly closer to x0 than x is."""
    tx0, tx, tn, thr = cases if cases is not None else _default_distance_cases(n_cases, dim)
    enc = program.encode()
    S = np.zeros(max(enc.n_scalar, 1))
    V = np.zeros((max(enc.n_vector, 1), tx0.shape[1]))
    for c in range(tx0.shape[0]):
        S[enc.hyper_slots] = enc.hyper_init
        V[enc.input_slots[0]] = tx0[c]
        V[enc.input_slots[1]] = tx[c]
        V[enc.input_slots[2]] = tn[c]
        kernels.exec_body(enc.ops, enc.dest, enc.a, enc.b, S, V)
        out = V[enc.return_slot]
        if not kernels.all_finite(out):
            return False
        if not float(kernels.l2_dist(out, tx0[c])) < thr[c]:
            return False
    return True


def attack(program: SsaProgram | TacProgram, oracle: DecisionOracle, x0, *,
           fallback=None, start=None, budget: int | None = None, max_iters: int | None = None,
           controller: ControllerConfig | None = None, rng: np.random.Generator,
           adaptation_enabled: bool = True, noise_scale: float = 1.0,
           start_max_tries: int = 100, use_kernel: bool | None = None) -> RunLog:
    """Run the full random walk; see the module docstring.

    Either ``budget`` (oracle queries, starting-point search included) or
    ``max_iters`` (proposal iterations) must be given; the loop stops at
    whichever limit is hit first.
    """
    if budget is None and max_iters is None:
        raise ValueError("either budget or max_iters is required")
    cfg = controller or ControllerConfig()
    x0 = np.asarray(x0, dtype=np.float64)
    dim = len(x0)
    log = RunLog(budget=budget)

    if start is None:
        x1, start_queries = find_start(oracle, x0, rng, max_tries=start_max_tries,
                                       fallback=fallback, noise_scale=noise_scale, budget=budget)
        log.start_queries = start_queries
        log.queries = start_queries
        if x1 is None:
            return log
    else:
        x1 = np.asarray(start, dtype=np.float64)
    log.found_start = True
    x = x1.copy()
    d_min = float(kernels.l2_dist(x, x0))
    log.initial_distance = d_min

    enc = program.encode()
    hypers = np.array(enc.hyper_init, dtype=np.float64)
    p = cfg.p_init
    S = np.zeros(max(enc.n_scalar, 1))
    V = np.zeros((max(enc.n_vector, 1), dim))
    params = oracle.kernel_params()
    fast = params is not None if use_kernel is None else (use_kernel and params is not None)
    if use_kernel and params is None:
        raise ValueError("oracle has no kernel parameters; cannot force the kernel path")

    queries = log.queries
    iterations = 0
    # iteration safety net: a program that never proposes closer points makes
    # no queries, so a pure query budget alone cannot terminate
    iter_limit = max_iters if max_iters is not None else max(1_000_000, 200 * budget)
    while iterations < iter_limit and (budget is None or queries < budget):
        block = min(NOISE_BLOCK, iter_limit - iterations)
        noise = rng.standard_normal((block, dim))
        if fast:
            kind, ovec, oscal, oside = params
            before = queries
            kbudget = -1 if budget is None else budget
            log_q = np.zeros(block, dtype=np.int64)
            log_d = np.zeros(block, dtype=np.float64)
            d_min, p, queries, n_logged, done = kernels.attack_run(
                enc.ops, enc.dest, enc.a, enc.b, enc.hyper_slots, enc.input_slots,
                enc.return_slot, S, V, hypers, x0, x, d_min, noise,
                kind, ovec, float(oscal), oside, queries, kbudget,
                adaptation_enabled, cfg.alpha, cfg.lo, cfg.hi, cfg.p_target, p,
                log_q, log_d)
            oracle.add_queries(queries - before)
            for i in range(n_logged):
                log.records.append((int(log_q[i]), float(log_d[i])))
            iterations += done
            if done < block:  # budget hit inside the block
                break
        else:
            in0, in1, in2 = enc.input_slots
            for row in noise:
                if budget is not None and queries >= budget:
                    break
                V[in0] = x0
                V[in1] = x
                V[in2] = row
                S[enc.hyper_slots] = hypers
                kernels.exec_body(enc.ops, enc.dest, enc.a, enc.b, S, V)
                out = V[enc.return_slot]
                k = 0.0
                if kernels.all_finite(out):
                    dist = float(kernels.l2_dist(out, x0))
                    if dist < d_min:
                        queries += 1
                        if oracle.query(out):
                            k = 1.0
                            d_min = dist
                            x[:] = out
                            log.records.append((queries, d_min))
                if adaptation_enabled:
                    p = float(kernels.ctrl_update(p, k, hypers, cfg.alpha, cfg.lo,
                                                  cfg.hi, cfg.p_target))
                iterations += 1
            if budget is not None and queries >= budget:
                break

    log.d_min = d_min
    log.queries = queries
    log.iterations = iterations
    log.hyper_final = tuple(float(h) for h in hypers)
    log.x_final = x
    return log
