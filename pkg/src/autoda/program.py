"""Program representations and reference interpreters.

Two forms of the same straight-line language:

* ``SsaProgram`` — every value assigned exactly once, ids drawn from one
  global definition sequence (``s0``, ``v1``, ...).  The form produced by the
  generator and consumed by static analysis.
* ``TacProgram`` — slot-addressed three-address code where slots are
  reusable.  The execution form emitted by the compiler.

Both carry an ``encode()`` lowering to flat numpy arrays shared by the
reference interpreter here and the fast kernels in :mod:`autoda.kernels`.
Interpreters are pure: identical inputs give bitwise-identical outputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .ops import Kind, Op

PROGRAM_INPUT_NAMES = ("x0", "x", "n")


class ProgramError(ValueError):
    """A program violates a structural invariant."""


@dataclass(frozen=True)
class ValueId:
    """Position in the global definition sequence plus a kind."""

    index: int
    kind: Kind

    def __str__(self) -> str:
        return f"{self.kind.value}{self.index}"


def sid(index: int) -> ValueId:
    return ValueId(index, Kind.SCALAR)


def vid(index: int) -> ValueId:
    return ValueId(index, Kind.VECTOR)


@dataclass(frozen=True)
class Instruction:
    dest: ValueId
    op: Op
    args: tuple[ValueId, ...]

    def __str__(self) -> str:
        return f"{self.dest} = {self.op.mnemonic}({','.join(str(a) for a in self.args)})"


@dataclass(frozen=True)
class EncodedProgram:
    """Flat array form consumed by the interpreters and kernels.

    Operand/destination indices are kind-local slot numbers: scalars index a
    float64 pool ``S``, vectors a ``(n_vector, dim)`` pool ``V``.  Unused
    operand slots hold -1.
    """

    ops: np.ndarray
    dest: np.ndarray
    a: np.ndarray
    b: np.ndarray
    n_scalar: int
    n_vector: int
    hyper_slots: np.ndarray
    hyper_init: np.ndarray
    input_slots: np.ndarray
    return_slot: int


# Enum member access is surprisingly slow on the hot path; dispatch on ints.
(_ADD_SS, _SUB_SS, _MUL_SS, _DIV_SS, _ADD_VV, _SUB_VV, _MUL_VS, _DIV_VS,
 _DOT_VV) = (int(op) for op in (Op.ADD_SS, Op.SUB_SS, Op.MUL_SS, Op.DIV_SS,
                                Op.ADD_VV, Op.SUB_VV, Op.MUL_VS, Op.DIV_VS, Op.DOT_VV))


def exec_encoded(enc: EncodedProgram, hyper_values, x0, x, n) -> np.ndarray:
    """Reference executor for the encoded form. Returns a fresh vector."""
    dim = len(x0)
    S = np.zeros(max(enc.n_scalar, 1), dtype=np.float64)
    V = np.zeros((max(enc.n_vector, 1), dim), dtype=np.float64)
    for slot, value in zip(enc.hyper_slots, hyper_values):
        S[slot] = value
    for slot, vec in zip(enc.input_slots, (x0, x, n)):
        V[slot] = vec
    ops, dest, aa, bb = enc.ops, enc.dest, enc.a, enc.b
    with np.errstate(all="ignore"):
        for i in range(len(ops)):
            op = ops[i]
            if op == _ADD_SS:
                S[dest[i]] = S[aa[i]] + S[bb[i]]
            elif op == _SUB_SS:
                S[dest[i]] = S[aa[i]] - S[bb[i]]
            elif op == _MUL_SS:
                S[dest[i]] = S[aa[i]] * S[bb[i]]
            elif op == _DIV_SS:
                S[dest[i]] = S[aa[i]] / S[bb[i]]
            elif op == _ADD_VV:
                V[dest[i]] = V[aa[i]] + V[bb[i]]
            elif op == _SUB_VV:
                V[dest[i]] = V[aa[i]] - V[bb[i]]
            elif op == _MUL_VS:
                V[dest[i]] = V[aa[i]] * S[bb[i]]
            elif op == _DIV_VS:
                V[dest[i]] = V[aa[i]] / S[bb[i]]
            elif op == _DOT_VV:
                acc = np.float64(0.0)
                va, vb = V[aa[i]], V[bb[i]]
                for j in range(dim):
                    acc = acc + va[j] * vb[j]
                S[dest[i]] = acc
            else:  # NORM_V
                acc = np.float64(0.0)
                va = V[aa[i]]
                for j in range(dim):
                    acc = acc + va[j] * va[j]
                S[dest[i]] = np.sqrt(acc)
    return V[enc.return_slot].copy()


def _encode_body(body, slot_of, n_scalar, n_vector, hyper_slots, hyper_init, input_slots, return_slot):
    k = len(body)
    ops = np.empty(k, dtype=np.int64)
    dest = np.empty(k, dtype=np.int64)
    a = np.full(k, -1, dtype=np.int64)
    b = np.full(k, -1, dtype=np.int64)
    for i, instr in enumerate(body):
        ops[i] = int(instr.op)
        dest[i] = slot_of(instr.dest)
        a[i] = slot_of(instr.args[0])
        if len(instr.args) > 1:
            b[i] = slot_of(instr.args[1])
    return EncodedProgram(
        ops=ops,
        dest=dest,
        a=a,
        b=b,
        n_scalar=n_scalar,
        n_vector=n_vector,
        hyper_slots=np.asarray(hyper_slots, dtype=np.int64),
        hyper_init=np.asarray(hyper_init, dtype=np.float64),
        input_slots=np.asarray(input_slots, dtype=np.int64),
        return_slot=return_slot,
    )


@dataclass(frozen=True)
class SsaProgram:
    """Straight-line SSA program.

    ``hyperparams`` are scalar ids with initial values, ``inputs`` are the
    three vector ids in the fixed role order (x0, x, n), ``body`` is the
    instruction list and ``return_id`` is the last instruction's (vector)
    result.  Global indices are contiguous: hyperparams first, then inputs,
    then one id per instruction.
    """

    hyperparams: tuple[tuple[ValueId, float], ...]
    inputs: tuple[ValueId, ValueId, ValueId]
    body: tuple[Instruction, ...]
    return_id: ValueId

    def __post_init__(self):
        self.validate()

    @property
    def n_hyperparams(self) -> int:
        return len(self.hyperparams)

    @property
    def hyper_init(self) -> tuple[float, ...]:
        return tuple(v for _, v in self.hyperparams)

    def all_values(self):
        """All value ids in definition order."""
        out = [h for h, _ in self.hyperparams]
        out.extend(self.inputs)
        out.extend(instr.dest for instr in self.body)
        return out

    def validate(self) -> None:
        next_index = 0
        kinds: dict[int, Kind] = {}
        for h, _ in self.hyperparams:
            if h.kind is not Kind.SCALAR:
                raise ProgramError(f"hyperparameter {h} must be scalar")
            if h.index != next_index:
                raise ProgramError(f"hyperparameter {h} out of sequence (expected index {next_index})")
            kinds[h.index] = h.kind
            next_index += 1
        if len(self.inputs) != 3:
            raise ProgramError("exactly three inputs (x0, x, n) are required")
        for v in self.inputs:
            if v.kind is not Kind.VECTOR:
                raise ProgramError(f"input {v} must be a vector")
            if v.index != next_index:
                raise ProgramError(f"input {v} out of sequence (expected index {next_index})")
            kinds[v.index] = v.kind
            next_index += 1
        if not self.body:
            raise ProgramError("empty body")
        for instr in self.body:
            if len(instr.args) != instr.op.arity:
                raise ProgramError(f"{instr}: {instr.op.notation} takes {instr.op.arity} operand(s)")
            for arg, want in zip(instr.args, instr.op.param_kinds):
                if arg.index not in kinds:
                    raise ProgramError(f"{instr}: operand {arg} used before definition")
                if kinds[arg.index] is not arg.kind or arg.kind is not want:
                    raise ProgramError(f"{instr}: operand {arg} has kind {kinds[arg.index].name}, "
                                       f"{instr.op.notation} expects {want.name}")
            if instr.dest.index in kinds:
                raise ProgramError(f"{instr}: {instr.dest} assigned more than once")
            if instr.dest.index != next_index:
                raise ProgramError(f"{instr}: {instr.dest} out of sequence (expected index {next_index})")
            if instr.dest.kind is not instr.op.result_kind:
                raise ProgramError(f"{instr}: {instr.op.notation} produces a "
                                   f"{instr.op.result_kind.name}, dest is {instr.dest.kind.name}")
            kinds[instr.dest.index] = instr.dest.kind
            next_index += 1
        if self.return_id.kind is not Kind.VECTOR:
            raise ProgramError(f"return value {self.return_id} must be a vector")
        if self.return_id != self.body[-1].dest:
            raise ProgramError("return value must be the last instruction's result")

    @cached_property
    def _encoded(self) -> EncodedProgram:
        slot: dict[int, int] = {}
        counts = {Kind.SCALAR: 0, Kind.VECTOR: 0}
        for v in self.all_values():
            slot[v.index] = counts[v.kind]
            counts[v.kind] += 1
        return _encode_body(
            self.body,
            lambda v: slot[v.index],
            n_scalar=counts[Kind.SCALAR],
            n_vector=counts[Kind.VECTOR],
            hyper_slots=[slot[h.index] for h, _ in self.hyperparams],
            hyper_init=list(self.hyper_init),
            input_slots=[slot[v.index] for v in self.inputs],
            return_slot=slot[self.return_id.index],
        )

    def encode(self) -> EncodedProgram:
        return self._encoded


@dataclass(frozen=True)
class TacInstruction:
    dest: int
    op: Op
    args: tuple[int, ...]

    def __str__(self) -> str:
        rendered = ",".join(f"{k.value}{a}" for k, a in zip(self.op.param_kinds, self.args))
        return f"{self.op.result_kind.value}{self.dest} = {self.op.mnemonic}({rendered})"


@dataclass(frozen=True)
class TacProgram:
    """Slot-addressed three-address program; slots may be reassigned."""

    n_scalar_slots: int
    n_vector_slots: int
    hyperparams: tuple[tuple[int, float], ...]  # (scalar slot, initial value)
    input_slots: tuple[int, int, int]  # vector slots for (x0, x, n)
    body: tuple[TacInstruction, ...]
    return_slot: int

    def __post_init__(self):
        self.validate()

    @property
    def n_hyperparams(self) -> int:
        return len(self.hyperparams)

    @property
    def hyper_init(self) -> tuple[float, ...]:
        return tuple(v for _, v in self.hyperparams)

    def validate(self) -> None:
        def check(slot: int, kind: Kind, what: str) -> None:
            pool = self.n_scalar_slots if kind is Kind.SCALAR else self.n_vector_slots
            if not 0 <= slot < pool:
                raise ProgramError(f"{what}: {kind.value}{slot} outside slot pool of size {pool}")

        for s, _ in self.hyperparams:
            check(s, Kind.SCALAR, "hyperparameter")
        for v in self.input_slots:
            check(v, Kind.VECTOR, "input")
        for instr in self.body:
            if len(instr.args) != instr.op.arity:
                raise ProgramError(f"{instr}: {instr.op.notation} takes {instr.op.arity} operand(s)")
            for arg, want in zip(instr.args, instr.op.param_kinds):
                check(arg, want, str(instr))
            check(instr.dest, instr.op.result_kind, str(instr))
        check(self.return_slot, Kind.VECTOR, "return")

    @cached_property
    def _encoded(self) -> EncodedProgram:
        return _encode_body(
            self.body,
            lambda s: s,
            n_scalar=self.n_scalar_slots,
            n_vector=self.n_vector_slots,
            hyper_slots=[s for s, _ in self.hyperparams],
            hyper_init=list(self.hyper_init),
            input_slots=list(self.input_slots),
            return_slot=self.return_slot,
        )

    def encode(self) -> EncodedProgram:
        return self._encoded


def _as_vectors(*vecs):
    out = tuple(np.asarray(v, dtype=np.float64) for v in vecs)
    dims = {v.shape for v in out}
    if len(dims) != 1 or out[0].ndim != 1:
        raise ProgramError(f"input vectors must share one dimension, got shapes {sorted(dims)}")
    return out


def run_ssa(p: SsaProgram, hyper_values, x0, x, n) -> np.ndarray:
    """Evaluate an SSA program. Pure; non-finite values propagate per IEEE."""
    if len(hyper_values) != p.n_hyperparams:
        raise ProgramError(f"expected {p.n_hyperparams} hyperparameter value(s), got {len(hyper_values)}")
    return exec_encoded(p.encode(), hyper_values, *_as_vectors(x0, x, n))


def run_tac(p: TacProgram, hyper_values, x0, x, n) -> np.ndarray:
    """Evaluate a TAC program. Same contract as :func:`run_ssa`."""
    if len(hyper_values) != p.n_hyperparams:
        raise ProgramError(f"expected {p.n_hyperparams} hyperparameter value(s), got {len(hyper_values)}")
    return exec_encoded(p.encode(), hyper_values, *_as_vectors(x0, x, n))
