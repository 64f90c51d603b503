"""Line-oriented on-disk program format.

Layout: ``param s<i> = <float>`` lines, then three ``input v<i>`` lines
(roles x0, x, n in order), then instruction lines
``<id> = <MNEMONIC>(<id>[,<id>])``, then ``return v<i>``.  ``#`` starts a
comment.  Mnemonics are untyped (ADD/SUB/MUL/DIV/DOT/NORM); operand kinds
resolve them to typed opcodes, which is unambiguous for this signature set.

The same syntax covers both forms.  SSA ids live in one global sequence and
may not be reassigned; TAC ids denote kind-local reusable slots and
reassignment is legal.  Floats are written with 17 significant digits so the
round-trip is exact.
"""

from __future__ import annotations

import re

from .ops import Kind, resolve_mnemonic
from .program import Instruction, ProgramError, SsaProgram, TacInstruction, TacProgram, ValueId

__all__ = ["ParseError", "parse_program", "format_program", "parse_tac", "format_tac", "format_float"]


class ParseError(ProgramError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


def format_float(x: float) -> str:
    return format(float(x), ".17g")


_ID_RE = re.compile(r"([sv])(\d+)$")
_PARAM_RE = re.compile(r"param\s+(\S+)\s*=\s*(\S+)$")
_INPUT_RE = re.compile(r"input\s+(\S+)$")
_INSTR_RE = re.compile(r"(\S+)\s*=\s*([A-Z]+)\(([^)]*)\)$")
_RETURN_RE = re.compile(r"return\s+(\S+)$")


def _parse_id(token: str, lineno: int) -> tuple[Kind, int]:
    m = _ID_RE.match(token)
    if not m:
        raise ParseError(lineno, f"malformed value id {token!r}")
    return (Kind.SCALAR if m.group(1) == "s" else Kind.VECTOR), int(m.group(2))


def _lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line


def _parse_common(text: str):
    """Shared line classification: params, inputs, instructions, return."""
    params: list[tuple[int, Kind, int, float]] = []
    inputs: list[tuple[int, Kind, int]] = []
    instrs: list[tuple[int, tuple[Kind, int], str, list[tuple[Kind, int]]]] = []
    ret: tuple[int, Kind, int] | None = None
    for lineno, line in _lines(text):
        if ret is not None:
            raise ParseError(lineno, "content after return")
        if line.startswith("param"):
            if inputs or instrs:
                raise ParseError(lineno, "param lines must come first")
            m = _PARAM_RE.match(line)
            if not m:
                raise ParseError(lineno, f"malformed param line {line!r}")
            kind, index = _parse_id(m.group(1), lineno)
            if kind is not Kind.SCALAR:
                raise ParseError(lineno, "hyperparameters must be scalars")
            try:
                value = float(m.group(2))
            except ValueError:
                raise ParseError(lineno, f"bad float {m.group(2)!r}") from None
            params.append((lineno, kind, index, value))
        elif line.startswith("input"):
            if instrs:
                raise ParseError(lineno, "input lines must precede instructions")
            m = _INPUT_RE.match(line)
            if not m:
                raise ParseError(lineno, f"malformed input line {line!r}")
            kind, index = _parse_id(m.group(1), lineno)
            if kind is not Kind.VECTOR:
                raise ParseError(lineno, "inputs must be vectors")
            inputs.append((lineno, kind, index))
        elif line.startswith("return"):
            m = _RETURN_RE.match(line)
            if not m:
                raise ParseError(lineno, f"malformed return line {line!r}")
            kind, index = _parse_id(m.group(1), lineno)
            ret = (lineno, kind, index)
        else:
            m = _INSTR_RE.match(line)
            if not m:
                raise ParseError(lineno, f"cannot parse {line!r}")
            dest = _parse_id(m.group(1), lineno)
            args_text = m.group(3).strip()
            args = [_parse_id(t.strip(), lineno) for t in args_text.split(",")] if args_text else []
            instrs.append((lineno, dest, m.group(2), args))
    if len(inputs) != 3:
        raise ParseError(0, f"expected 3 input lines, found {len(inputs)}")
    if not instrs:
        raise ParseError(0, "no instructions")
    if ret is None:
        raise ParseError(0, "missing return line")
    return params, inputs, instrs, ret


def parse_program(text: str) -> SsaProgram:
    """Parse SSA text. Raises :class:`ParseError` with a line number."""
    params, inputs, instrs, ret = _parse_common(text)
    kinds: dict[int, Kind] = {}

    hyperparams = []
    for lineno, kind, index, value in params:
        if index in kinds:
            raise ParseError(lineno, f"s{index} declared more than once")
        kinds[index] = kind
        hyperparams.append((ValueId(index, kind), value))
    input_ids = []
    for lineno, kind, index in inputs:
        if index in kinds:
            raise ParseError(lineno, f"v{index} declared more than once")
        kinds[index] = kind
        input_ids.append(ValueId(index, kind))

    body = []
    for lineno, (dkind, dindex), mnemonic, args in instrs:
        arg_ids = []
        for akind, aindex in args:
            if aindex not in kinds:
                raise ParseError(lineno, f"operand {akind.value}{aindex} used before definition")
            if kinds[aindex] is not akind:
                raise ParseError(lineno, f"{akind.value}{aindex} was defined as "
                                         f"{kinds[aindex].value}{aindex}")
            arg_ids.append(ValueId(aindex, akind))
        op = resolve_mnemonic(mnemonic, tuple(a.kind for a in arg_ids))
        rendered = f"{dkind.value}{dindex} = {mnemonic}({','.join(str(a) for a in arg_ids)})"
        if op is None:
            raise ParseError(lineno, f"kind mismatch in {rendered!r}: no {mnemonic} "
                                     f"signature takes ({','.join(a.kind.name for a in arg_ids)})")
        if op.result_kind is not dkind:
            raise ParseError(lineno, f"kind mismatch in {rendered!r}: {op.notation} "
                                     f"produces a {op.result_kind.name}")
        if dindex in kinds:
            raise ParseError(lineno, f"{dkind.value}{dindex} assigned more than once (SSA form)")
        kinds[dindex] = dkind
        body.append(Instruction(ValueId(dindex, dkind), op, tuple(arg_ids)))

    lineno, rkind, rindex = ret
    if rkind is not Kind.VECTOR:
        raise ParseError(lineno, "return value must be a vector")
    if rindex not in kinds:
        raise ParseError(lineno, f"return of undefined value v{rindex}")
    try:
        return SsaProgram(
            hyperparams=tuple(hyperparams),
            inputs=tuple(input_ids),
            body=tuple(body),
            return_id=ValueId(rindex, rkind),
        )
    except ParseError:
        raise
    except ProgramError as exc:
        raise ParseError(lineno, str(exc)) from None


def format_program(p: SsaProgram) -> str:
    lines = [f"param {h} = {format_float(value)}" for h, value in p.hyperparams]
    lines += [f"input {v}  # {role}" for v, role in zip(p.inputs, ("x0", "x", "n"))]
    lines += [str(instr) for instr in p.body]
    lines.append(f"return {p.return_id}")
    return "\n".join(lines) + "\n"


def parse_tac(text: str) -> TacProgram:
    """Parse TAC text. Slot reassignment is legal; reads of never-written slots are not."""
    params, inputs, instrs, ret = _parse_common(text)
    written = {Kind.SCALAR: set(), Kind.VECTOR: set()}

    hyperparams = []
    for lineno, kind, index, value in params:
        if index in written[kind]:
            raise ParseError(lineno, f"s{index} declared more than once")
        written[kind].add(index)
        hyperparams.append((index, value))
    input_slots = []
    for lineno, kind, index in inputs:
        if index in written[kind]:
            raise ParseError(lineno, f"v{index} declared more than once")
        written[kind].add(index)
        input_slots.append(index)

    body = []
    for lineno, (dkind, dindex), mnemonic, args in instrs:
        for akind, aindex in args:
            if aindex not in written[akind]:
                raise ParseError(lineno, f"slot {akind.value}{aindex} read before first write")
        op = resolve_mnemonic(mnemonic, tuple(k for k, _ in args))
        if op is None or op.result_kind is not dkind:
            raise ParseError(lineno, f"no {mnemonic} signature matches operand/result kinds")
        written[dkind].add(dindex)
        body.append(TacInstruction(dindex, op, tuple(i for _, i in args)))

    lineno, rkind, rindex = ret
    if rkind is not Kind.VECTOR:
        raise ParseError(lineno, "return value must be a vector")
    if rindex not in written[Kind.VECTOR]:
        raise ParseError(lineno, f"return of never-written slot v{rindex}")
    n_scalar = 1 + max([s for s in written[Kind.SCALAR]] or [-1])
    n_vector = 1 + max([v for v in written[Kind.VECTOR]] or [-1])
    try:
        return TacProgram(
            n_scalar_slots=n_scalar,
            n_vector_slots=n_vector,
            hyperparams=tuple(hyperparams),
            input_slots=tuple(input_slots),
            body=tuple(body),
            return_slot=rindex,
        )
    except ProgramError as exc:
        raise ParseError(lineno, str(exc)) from None


def format_tac(p: TacProgram) -> str:
    lines = [f"param s{slot} = {format_float(value)}" for slot, value in p.hyperparams]
    lines += [f"input v{slot}  # {role}" for slot, role in zip(p.input_slots, ("x0", "x", "n"))]
    lines += [str(instr) for instr in p.body]
    lines.append(f"return v{p.return_slot}")
    return "\n".join(lines) + "\n"
