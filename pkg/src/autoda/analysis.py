"""Static analyses over SSA programs.

Liveness is purely syntactic: the backward transitive closure of operand
dependence starting at the return value.  No constant folding, no algebraic
simplification.
"""

from __future__ import annotations

from dataclasses import dataclass

from .program import Instruction, SsaProgram, ValueId

__all__ = ["live_set", "dead_instructions", "inputs_check", "InputsCheckResult"]


def live_set(p: SsaProgram) -> set[ValueId]:
    """Value ids that can influence the return value."""
    by_index = {instr.dest.index: instr for instr in p.body}
    live: set[ValueId] = set()
    stack = [p.return_id]
    while stack:
        v = stack.pop()
        if v in live:
            continue
        live.add(v)
        instr = by_index.get(v.index)
        if instr is not None:
            stack.extend(instr.args)
    return live


def dead_instructions(p: SsaProgram) -> list[Instruction]:
    """Instructions whose result is not in the live set, in program order."""
    live = live_set(p)
    return [instr for instr in p.body if instr.dest not in live]


@dataclass(frozen=True)
class InputsCheckResult:
    ok: bool
    missing: ValueId | None = None
    missing_role: str | None = None

    def __bool__(self) -> bool:
        return self.ok

    @property
    def reason(self) -> str:
        if self.ok:
            return "pass"
        return f"{self.missing_role} ({self.missing}) does not reach the return value"


def inputs_check(p: SsaProgram, *, require_hyperparams: bool = True) -> InputsCheckResult:
    """Pass iff every input (and, by default, every hyperparameter) is live.

    Fails name the first missing value, inputs (x0, x, n) before
    hyperparameters.
    """
    live = live_set(p)
    for v, role in zip(p.inputs, ("x0", "x", "n")):
        if v not in live:
            return InputsCheckResult(False, v, f"input {role}")
    if require_hyperparams:
        for i, (h, _) in enumerate(p.hyperparams):
            if h not in live:
                return InputsCheckResult(False, h, f"hyperparameter {i}")
    return InputsCheckResult(True)
