"""Random program generation.

Programs are drawn instruction by instruction: opcodes uniformly from the
feasible set (all ten mid-program, the four vector-result ones for the final
slot) and operands from kind-compatible prior values, weighting values that
have not been consumed yet by ``unused_bias``.  Optionally the three
predefined operations v = x0 - x, d = ||v||, u = v / d are emitted first and
count toward the length budget.

Randomness is consumed from a flat block of uniforms, exactly three per
generated instruction, so the python generator and the batch kernel in
:mod:`autoda.kernels` produce identical programs from identical blocks.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .ops import ALL_OPS, Kind, Op, VECTOR_RESULT_OPS
from .program import Instruction, SsaProgram, ValueId

__all__ = ["GenConfig", "ProgramBuilder", "emit_predefined", "gen_random", "gen_from_uniforms",
           "UNIFORMS_PER_INSTR", "uniform_block_size"]

UNIFORMS_PER_INSTR = 3


@dataclass(frozen=True)
class GenConfig:
    max_len: int = 20
    n_hyperparams: int = 1
    hyperparam_init: float = 0.01
    unused_bias: float = 4.0
    predefined: bool = True
    seed: int = 0

    def __post_init__(self):
        min_len = 4 if self.predefined else 1
        if self.max_len < min_len:
            raise ValueError(f"max_len must be >= {min_len}")
        if self.n_hyperparams < 0:
            raise ValueError("n_hyperparams must be >= 0")
        if self.unused_bias < 1.0:
            raise ValueError("unused_bias must be >= 1")

    def without_technique(self, **kwargs) -> "GenConfig":
        return replace(self, **kwargs)


def uniform_block_size(cfg: GenConfig) -> int:
    return UNIFORMS_PER_INSTR * cfg.max_len


class ProgramBuilder:
    """Incremental SSA construction with per-value consumption tracking."""

    def __init__(self, cfg: GenConfig):
        self.cfg = cfg
        self.kinds: list[Kind] = []
        self.used: list[bool] = []
        self.body: list[Instruction] = []
        for _ in range(cfg.n_hyperparams):
            self.kinds.append(Kind.SCALAR)
            self.used.append(False)
        for _ in range(3):
            self.kinds.append(Kind.VECTOR)
            self.used.append(False)

    @property
    def n_values(self) -> int:
        return len(self.kinds)

    @property
    def input_indices(self) -> tuple[int, int, int]:
        h = self.cfg.n_hyperparams
        return (h, h + 1, h + 2)

    def has_kind(self, kind: Kind) -> bool:
        return kind in self.kinds

    def append(self, op: Op, arg_indices: tuple[int, ...]) -> int:
        """Append one instruction, marking operands consumed. Returns the dest index."""
        args = tuple(ValueId(i, self.kinds[i]) for i in arg_indices)
        dest_index = self.n_values
        dest = ValueId(dest_index, op.result_kind)
        self.body.append(Instruction(dest, op, args))
        for i in arg_indices:
            self.used[i] = True
        self.kinds.append(op.result_kind)
        self.used.append(False)
        return dest_index

    def candidates(self, kind: Kind) -> list[int]:
        return [i for i, k in enumerate(self.kinds) if k is kind]

    def feasible(self, op: Op) -> bool:
        return all(self.has_kind(k) for k in op.param_kinds)

    def finish(self) -> SsaProgram:
        h = self.cfg.n_hyperparams
        return SsaProgram(
            hyperparams=tuple((ValueId(i, Kind.SCALAR), self.cfg.hyperparam_init) for i in range(h)),
            inputs=tuple(ValueId(i, Kind.VECTOR) for i in self.input_indices),
            body=tuple(self.body),
            return_id=self.body[-1].dest,
        )


def emit_predefined(builder: ProgramBuilder) -> ProgramBuilder:
    """Prefix the body with v = x0 - x, d = ||v||, u = v / d."""
    if builder.body:
        raise ValueError("predefined operations must come first")
    i_x0, i_x, _ = builder.input_indices
    v = builder.append(Op.SUB_VV, (i_x0, i_x))
    d = builder.append(Op.NORM_V, (v,))
    builder.append(Op.DIV_VS, (v, d))
    return builder


def _pick(items, u: float) -> int:
    idx = int(u * len(items))
    return items[min(idx, len(items) - 1)]


def _pick_operand(builder: ProgramBuilder, kind: Kind, u: float) -> int:
    bias = builder.cfg.unused_bias
    total = 0.0
    cands = []
    weights = []
    for i, k in enumerate(builder.kinds):
        if k is kind:
            w = 1.0 if builder.used[i] else bias
            cands.append(i)
            weights.append(w)
            total += w
    target = u * total
    acc = 0.0
    for i, w in zip(cands, weights):
        acc += w
        if target < acc:
            return i
    return cands[-1]


def gen_from_uniforms(cfg: GenConfig, u: np.ndarray) -> SsaProgram:
    """Deterministic generation from a uniform block of size >= 3 * max_len."""
    builder = ProgramBuilder(cfg)
    if cfg.predefined:
        emit_predefined(builder)
    cursor = 0
    while len(builder.body) < cfg.max_len:
        final = len(builder.body) == cfg.max_len - 1
        pool = VECTOR_RESULT_OPS if final else ALL_OPS
        feasible = [op for op in pool if builder.feasible(op)]
        op = Op(_pick(feasible, u[cursor]))
        args = []
        for j, kind in enumerate(op.param_kinds):
            args.append(_pick_operand(builder, kind, u[cursor + 1 + j]))
            builder.used[args[-1]] = True
        cursor += UNIFORMS_PER_INSTR
        builder.append(op, tuple(args))
    return builder.finish()


def gen_random(cfg: GenConfig, rng: np.random.Generator) -> SsaProgram:
    """Generate one structurally valid program of length exactly max_len."""
    return gen_from_uniforms(cfg, rng.random(uniform_block_size(cfg)))
