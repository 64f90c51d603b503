"""Structural invariants of the two program forms and their interpreters."""

import numpy as np
import pytest

from autoda.compiler import compile_to_tac
from autoda.ops import Op
from autoda.program import (
    Instruction,
    ProgramError,
    SsaProgram,
    TacInstruction,
    TacProgram,
    run_ssa,
    run_tac,
    sid,
    vid,
)


def make_minimal(return_last=True):
    """param s0; inputs v1..v3; v4 = SUB(v1, v2); v5 = MUL(v4, s0)."""
    body = (
        Instruction(vid(4), Op.SUB_VV, (vid(1), vid(2))),
        Instruction(vid(5), Op.MUL_VS, (vid(4), sid(0))),
    )
    return SsaProgram(hyperparams=((sid(0), 0.5),),
                      inputs=(vid(1), vid(2), vid(3)),
                      body=body, return_id=vid(5))


def test_value_ids_compare_kind_and_index():
    assert sid(5) != vid(5)
    assert sid(5) == sid(5)
    assert str(sid(2)) == "s2" and str(vid(7)) == "v7"


def test_minimal_program_runs():
    p = make_minimal()
    x0 = np.array([1.0, 2.0])
    x = np.array([3.0, 5.0])
    out = run_ssa(p, [0.5], x0, x, np.zeros(2))
    assert np.array_equal(out, (x0 - x) * 0.5)


def test_unique_assignment_enforced():
    body = (
        Instruction(vid(4), Op.SUB_VV, (vid(1), vid(2))),
        Instruction(vid(4), Op.ADD_VV, (vid(1), vid(2))),
    )
    with pytest.raises(ProgramError):
        SsaProgram(hyperparams=((sid(0), 0.5),), inputs=(vid(1), vid(2), vid(3)),
                   body=body, return_id=vid(4))


def test_use_before_definition_rejected():
    body = (Instruction(vid(4), Op.ADD_VV, (vid(5), vid(1))),
            Instruction(vid(5), Op.SUB_VV, (vid(1), vid(2))))
    with pytest.raises(ProgramError):
        SsaProgram(hyperparams=((sid(0), 0.5),), inputs=(vid(1), vid(2), vid(3)),
                   body=body, return_id=vid(5))


def test_kind_mismatch_rejected():
    body = (Instruction(vid(4), Op.MUL_VS, (vid(1), vid(2))),)
    with pytest.raises(ProgramError):
        SsaProgram(hyperparams=((sid(0), 0.5),), inputs=(vid(1), vid(2), vid(3)),
                   body=body, return_id=vid(4))


def test_return_must_be_last_vector_dest():
    body = (
        Instruction(vid(4), Op.SUB_VV, (vid(1), vid(2))),
        Instruction(s5 := sid(5), Op.NORM_V, (vid(4),)),
    )
    with pytest.raises(ProgramError):
        SsaProgram(hyperparams=((sid(0), 0.5),), inputs=(vid(1), vid(2), vid(3)),
                   body=body, return_id=s5)
    with pytest.raises(ProgramError):
        SsaProgram(hyperparams=((sid(0), 0.5),), inputs=(vid(1), vid(2), vid(3)),
                   body=body, return_id=vid(4))


def test_noncontiguous_indices_rejected():
    body = (Instruction(vid(7), Op.SUB_VV, (vid(1), vid(2))),)
    with pytest.raises(ProgramError):
        SsaProgram(hyperparams=((sid(0), 0.5),), inputs=(vid(1), vid(2), vid(3)),
                   body=body, return_id=vid(7))


def test_encode_roundtrip_execution():
    p = make_minimal()
    enc = p.encode()
    assert enc.hyper_init == (0.5,)
    assert len(enc.ops) == 2
    x0 = np.array([2.0, 0.0, 1.0])
    x = np.array([1.0, 1.0, 1.0])
    assert np.array_equal(run_ssa(p, [0.5], x0, x, np.zeros(3)),
                          (x0 - x) * 0.5)


def test_tac_slot_reuse_is_legal():
    from autoda.compiler import check_slots
    # s-slot 0 is written twice; fine in slot-addressed form
    body = (
        TacInstruction(0, Op.NORM_V, (0,)),
        TacInstruction(0, Op.NORM_V, (1,)),
        TacInstruction(3, Op.MUL_VS, (0, 0)),
    )
    p = TacProgram(n_scalar_slots=1, n_vector_slots=4, hyperparams=(),
                   input_slots=(0, 1, 2), body=body, return_slot=3)
    check_slots(p)
    out = run_tac(p, [], np.array([3.0, 4.0]), np.array([1.0, 0.0]), np.zeros(2))
    assert np.array_equal(out, np.array([3.0, 4.0]))


def test_tac_read_before_write_detected():
    from autoda.compiler import check_slots
    body = (TacInstruction(3, Op.MUL_VS, (0, 0)),)  # scalar slot 0 never written
    p = TacProgram(n_scalar_slots=1, n_vector_slots=4, hyperparams=(),
                   input_slots=(0, 1, 2), body=body, return_slot=3)
    with pytest.raises(ProgramError):
        check_slots(p)


def test_ssa_and_tac_agree_on_minimal(boundary):
    rng = np.random.default_rng(3)
    tac = compile_to_tac(boundary)
    hypers = [v for _, v in boundary.hyperparams]
    for _ in range(5):
        x0, x, n = rng.standard_normal((3, 8))
        a = run_ssa(boundary, hypers, x0, x, n)
        b = run_tac(tac, hypers, x0, x, n)
        assert np.array_equal(a, b)
