"""Liveness and the static inputs check."""

from autoda.analysis import dead_instructions, inputs_check, live_set
from autoda.text import parse_program

USES_EVERYTHING = """\
param s0 = 0.01
input v1  # x0
input v2  # x
input v3  # n
v4 = SUB(v1,v2)
v5 = MUL(v3,s0)
v6 = ADD(v4,v5)
v7 = ADD(v2,v6)
return v7
"""

IGNORES_NOISE = """\
param s0 = 0.01
input v1  # x0
input v2  # x
input v3  # n
v4 = SUB(v1,v2)
v5 = MUL(v4,s0)
v6 = MUL(v3,s0)
v7 = ADD(v2,v5)
return v7
"""


def test_full_use_passes():
    result = inputs_check(parse_program(USES_EVERYTHING))
    assert result.ok
    assert bool(result)


def test_unused_noise_fails_and_names_the_input():
    result = inputs_check(parse_program(IGNORES_NOISE))
    assert not result.ok
    assert "n" in result.reason
    assert "v3" in result.reason or "n" in result.reason


def test_unused_hyperparameter_fails():
    text = USES_EVERYTHING.replace("v5 = MUL(v3,s0)", "s5 = NORM(v3)\nv6 = MUL(v3,s5)") \
                          .replace("v6 = ADD(v4,v5)", "v7 = ADD(v4,v6)") \
                          .replace("v7 = ADD(v2,v6)", "v8 = ADD(v2,v7)") \
                          .replace("return v7", "return v8")
    result = inputs_check(parse_program(text))
    assert not result.ok
    assert "s0" in result.reason
    assert inputs_check(parse_program(text), require_hyperparams=False).ok


def test_dead_instructions_found():
    p = parse_program(IGNORES_NOISE)
    dead = dead_instructions(p)
    assert [str(i.dest) for i in dead] == ["v6"]


def test_live_set_is_backward_closure():
    p = parse_program(IGNORES_NOISE)
    live = {str(v) for v in live_set(p)}
    assert live == {"s0", "v1", "v2", "v4", "v5", "v7"}


def test_inputs_check_reports_inputs_before_hyperparams():
    # nothing but x0 reaches the return; the x input is named first
    text = """\
param s0 = 0.01
input v1  # x0
input v2  # x
input v3  # n
v4 = ADD(v1,v1)
return v4
"""
    result = inputs_check(parse_program(text))
    assert not result.ok
    assert "x" in result.reason.split("s0")[0]
