"""Instruction set of the scalar/vector DSL.

Ten opcodes with fixed signatures.  Kinds are scalar or vector; all vectors
in one evaluation share a single dimension.  Arithmetic is 64-bit IEEE with
no reassociation: reductions (DOT, NORM) accumulate strictly left to right
so that every executor in this package produces bitwise-identical results.
"""

from __future__ import annotations

import enum

import numpy as np


class Kind(enum.Enum):
    SCALAR = "s"
    VECTOR = "v"

    def __repr__(self) -> str:
        return self.name


class Op(enum.IntEnum):
    """Opcodes. The integer values are the wire encoding used by the kernels."""

    ADD_SS = 0
    SUB_SS = 1
    MUL_SS = 2
    DIV_SS = 3
    ADD_VV = 4
    SUB_VV = 5
    MUL_VS = 6
    DIV_VS = 7
    DOT_VV = 8
    NORM_V = 9

    @property
    def mnemonic(self) -> str:
        return _MNEMONIC[self]

    @property
    def notation(self) -> str:
        """Full typed name, e.g. ``ADD.SS``."""
        return _NOTATION[self]

    @property
    def arity(self) -> int:
        return len(SIGNATURES[self][0])

    @property
    def param_kinds(self) -> tuple[Kind, ...]:
        return SIGNATURES[self][0]

    @property
    def result_kind(self) -> Kind:
        return SIGNATURES[self][1]


# op -> ((param kinds), result kind)
SIGNATURES: dict[Op, tuple[tuple[Kind, ...], Kind]] = {
    Op.ADD_SS: ((Kind.SCALAR, Kind.SCALAR), Kind.SCALAR),
    Op.SUB_SS: ((Kind.SCALAR, Kind.SCALAR), Kind.SCALAR),
    Op.MUL_SS: ((Kind.SCALAR, Kind.SCALAR), Kind.SCALAR),
    Op.DIV_SS: ((Kind.SCALAR, Kind.SCALAR), Kind.SCALAR),
    Op.ADD_VV: ((Kind.VECTOR, Kind.VECTOR), Kind.VECTOR),
    Op.SUB_VV: ((Kind.VECTOR, Kind.VECTOR), Kind.VECTOR),
    Op.MUL_VS: ((Kind.VECTOR, Kind.SCALAR), Kind.VECTOR),
    Op.DIV_VS: ((Kind.VECTOR, Kind.SCALAR), Kind.VECTOR),
    Op.DOT_VV: ((Kind.VECTOR, Kind.VECTOR), Kind.SCALAR),
    Op.NORM_V: ((Kind.VECTOR,), Kind.SCALAR),
}

_MNEMONIC = {
    Op.ADD_SS: "ADD",
    Op.SUB_SS: "SUB",
    Op.MUL_SS: "MUL",
    Op.DIV_SS: "DIV",
    Op.ADD_VV: "ADD",
    Op.SUB_VV: "SUB",
    Op.MUL_VS: "MUL",
    Op.DIV_VS: "DIV",
    Op.DOT_VV: "DOT",
    Op.NORM_V: "NORM",
}

_NOTATION = {op: f"{_MNEMONIC[op]}.{''.join(k.value for k in SIGNATURES[op][0]).upper()}" for op in Op}

ALL_OPS: tuple[Op, ...] = tuple(Op)
VECTOR_RESULT_OPS: tuple[Op, ...] = tuple(op for op in Op if op.result_kind is Kind.VECTOR)
SCALAR_RESULT_OPS: tuple[Op, ...] = tuple(op for op in Op if op.result_kind is Kind.SCALAR)

# mnemonic -> candidate typed opcodes; operand kinds disambiguate uniquely
OPS_BY_MNEMONIC: dict[str, tuple[Op, ...]] = {}
for _op in Op:
    OPS_BY_MNEMONIC.setdefault(_MNEMONIC[_op], ())
    OPS_BY_MNEMONIC[_MNEMONIC[_op]] += (_op,)


def resolve_mnemonic(mnemonic: str, arg_kinds: tuple[Kind, ...]) -> Op | None:
    """Resolve an untyped mnemonic against operand kinds; None if no signature fits."""
    for op in OPS_BY_MNEMONIC.get(mnemonic, ()):
        if op.param_kinds == arg_kinds:
            return op
    return None


def seq_dot(a: np.ndarray, b: np.ndarray) -> np.float64:
    """Dot product with strict left-to-right accumulation."""
    acc = np.float64(0.0)
    for i in range(a.shape[0]):
        acc = acc + a[i] * b[i]
    return acc


def eval_op(op: Op, *operands):
    """Evaluate one operation.

    Scalars are numpy float64 (so division by zero follows IEEE instead of
    raising); vectors are float64 arrays.  Raises ValueError on a structural
    mismatch, which cannot occur for validated programs.
    """
    kinds = tuple(Kind.VECTOR if isinstance(x, np.ndarray) and x.ndim == 1 else Kind.SCALAR for x in operands)
    if kinds != op.param_kinds:
        raise ValueError(f"{op.notation} applied to operand kinds {kinds}")
    if op in (Op.ADD_VV, Op.SUB_VV, Op.DOT_VV) and operands[0].shape != operands[1].shape:
        raise ValueError(f"{op.notation}: dimension mismatch {operands[0].shape} vs {operands[1].shape}")
    with np.errstate(all="ignore"):
        if op is Op.ADD_SS or op is Op.ADD_VV:
            return operands[0] + operands[1]
        if op is Op.SUB_SS or op is Op.SUB_VV:
            return operands[0] - operands[1]
        if op is Op.MUL_SS:
            return operands[0] * operands[1]
        if op is Op.DIV_SS:
            return operands[0] / operands[1]
        if op is Op.MUL_VS:
            return operands[0] * operands[1]
        if op is Op.DIV_VS:
            return operands[0] / operands[1]
        if op is Op.DOT_VV:
            return seq_dot(operands[0], operands[1])
        if op is Op.NORM_V:
            return np.sqrt(seq_dot(operands[0], operands[0]))
    raise AssertionError(op)
