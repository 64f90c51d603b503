"""SSA to TAC lowering: dead-code elimination, then linear-scan slot allocation.

Dead instructions (per :func:`autoda.analysis.live_set`) are dropped.  Slots
are assigned in a single forward pass over the surviving instructions: when a
value's last use is reached its slot returns to a kind-local free pool, and
each destination takes the lowest-index free slot or a fresh one.  Inputs and
hyperparameters occupy slots from index 0 and become reusable after their
last use.  Instructions are never reordered, so TAC execution is bitwise
equal to SSA execution.

Optimal allocation is NP-complete; this pass is linear and deterministic.
"""

from __future__ import annotations

import heapq

from .analysis import live_set
from .ops import Kind
from .program import ProgramError, SsaProgram, TacInstruction, TacProgram

__all__ = ["compile_to_tac", "check_slots"]


def compile_to_tac(p: SsaProgram) -> TacProgram:
    live = live_set(p)
    emitted = [instr for instr in p.body if instr.dest in live]

    # slot assignment for the pre-initialized values
    slot: dict[int, int] = {}
    fresh = {Kind.SCALAR: 0, Kind.VECTOR: 0}
    for h, _ in p.hyperparams:
        slot[h.index] = fresh[Kind.SCALAR]
        fresh[Kind.SCALAR] += 1
    for v in p.inputs:
        slot[v.index] = fresh[Kind.VECTOR]
        fresh[Kind.VECTOR] += 1

    last_use: dict[int, int] = {}
    for pos, instr in enumerate(emitted):
        for arg in instr.args:
            last_use[arg.index] = pos
    last_use[p.return_id.index] = len(emitted)  # the return keeps its slot

    free = {Kind.SCALAR: [], Kind.VECTOR: []}
    for v in [h for h, _ in p.hyperparams] + list(p.inputs):
        if v.index not in last_use:
            heapq.heappush(free[v.kind], slot[v.index])

    body = []
    for pos, instr in enumerate(emitted):
        arg_slots = tuple(slot[a.index] for a in instr.args)
        for a in dict.fromkeys(instr.args):  # dedupe: a value used twice frees once
            if last_use[a.index] == pos:
                heapq.heappush(free[a.kind], slot[a.index])
        kind = instr.op.result_kind
        if free[kind]:
            d = heapq.heappop(free[kind])
        else:
            d = fresh[kind]
            fresh[kind] += 1
        slot[instr.dest.index] = d
        body.append(TacInstruction(d, instr.op, arg_slots))

    return TacProgram(
        n_scalar_slots=fresh[Kind.SCALAR],
        n_vector_slots=fresh[Kind.VECTOR],
        hyperparams=tuple((slot[h.index], value) for h, value in p.hyperparams),
        input_slots=tuple(slot[v.index] for v in p.inputs),
        body=tuple(body),
        return_slot=slot[p.return_id.index],
    )


def check_slots(p: TacProgram) -> None:
    """Abstract interpretation over slot states: no read before first write.

    Raises ProgramError on violation; validated programs execute without
    touching uninitialized storage.
    """
    written = {Kind.SCALAR: set(s for s, _ in p.hyperparams), Kind.VECTOR: set(p.input_slots)}
    for instr in p.body:
        for a, kind in zip(instr.args, instr.op.param_kinds):
            if a not in written[kind]:
                raise ProgramError(f"{instr}: slot {kind.value}{a} read before first write")
        written[instr.op.result_kind].add(instr.dest)
    if p.return_slot not in written[Kind.VECTOR]:
        raise ProgramError(f"return slot v{p.return_slot} never written")
