"""Controller dynamics, starting-point search, distance test, attack loop."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from autoda.engine import (
    AttackState,
    ControllerConfig,
    StartPointError,
    attack,
    controller_f,
    controller_step,
    distance_test,
    distortion_ratio,
    find_start,
)
from autoda.oracles import HalfspaceOracle
from autoda.reference import boundary_reference, noise_step_reference
from autoda.rng import stream
from autoda.text import parse_program

CFG = ControllerConfig()


def make_state(p=0.25, hypers=(0.01,)):
    return AttackState(x0=np.zeros(2), x=np.ones(2), d_min=1.0, p=p,
                       hyper_values=np.array(hypers))


class TestController:
    def test_anchor_values_exact(self):
        assert controller_f(0.0, CFG) == 0.5
        assert controller_f(CFG.p_target, CFG) == 1.0
        assert controller_f(1.0, CFG) == 1.5

    def test_clamps_out_of_range(self):
        assert controller_f(-0.5, CFG) == 0.5
        assert controller_f(1.5, CFG) == 1.5

    def test_midpoint_of_upper_segment(self):
        assert controller_f(0.5, CFG) == pytest.approx(1.0 + 0.5 * (0.5 - 0.25) / 0.75)

    def test_p_update_then_scale(self):
        state = make_state(p=0.25)
        controller_step(state, 1, CFG)
        assert state.p == pytest.approx(0.2875)
        assert state.p == CFG.alpha * 0.25 + (1.0 - CFG.alpha) * 1.0

    def test_fixed_point_at_target(self):
        state = make_state(p=CFG.p_target)
        s0 = state.hyper_values[0]
        # k alternating so that p stays exactly at p_target requires k = p_target;
        # instead hold p at the target by resetting and check the scale is identity
        for _ in range(100):
            state.p = CFG.p_target
            before = state.hyper_values.copy()
            controller_step(state, 1, CFG)
            state.hyper_values[:] = before  # isolate the factor at p=p_target
        assert controller_f(CFG.p_target, CFG) ** 0.1 == 1.0
        assert state.hyper_values[0] == s0

    @given(st.integers(0, 1), st.floats(0.0, 1.0))
    def test_p_stays_in_unit_interval(self, k, p):
        state = make_state(p=p)
        controller_step(state, k, CFG)
        assert 0.0 <= state.p <= 1.0

    def test_ten_step_shrink_bounds(self):
        for forced, low, high in [(0, 0.5, 1.0), (1, 1.0, 1.5)]:
            state = make_state(p=CFG.p_init)
            before = state.hyper_values[0]
            for _ in range(10):
                controller_step(state, forced, CFG)
            change = state.hyper_values[0] / before
            if forced == 0:
                assert low <= change < high
            else:
                assert low < change <= high


class TestFindStart:
    def test_counts_every_query(self, halfspace16):
        x0 = np.zeros(16)
        x1, q = find_start(halfspace16, x0, stream(0, "fs"))
        assert x1 is not None
        assert q == halfspace16.queries
        assert halfspace16.decide(x1)

    def test_fallback_costs_one_more_query(self, halfspace16):
        class NeverAdversarial(HalfspaceOracle):
            def decide(self, x):
                return False

        oracle = NeverAdversarial(np.ones(16), 0.0)
        fb = np.zeros(16)
        with pytest.raises(StartPointError):
            find_start(oracle, np.zeros(16), stream(0, "fs2"), fallback=fb)
        assert oracle.queries == 101  # 100 tries + the fallback query

    def test_no_fallback_raises(self, halfspace16):
        class NeverAdversarial(HalfspaceOracle):
            def decide(self, x):
                return False

        with pytest.raises(StartPointError):
            find_start(NeverAdversarial(np.ones(16), 0.0), np.zeros(16), stream(0, "fs3"))

    def test_budget_exhaustion_returns_none(self, halfspace16):
        class NeverAdversarial(HalfspaceOracle):
            def decide(self, x):
                return False

        oracle = NeverAdversarial(np.ones(16), 0.0)
        x1, q = find_start(oracle, np.zeros(16), stream(0, "fs4"), budget=7)
        assert x1 is None and q == 7


class TestDistanceTest:
    def test_reference_programs_pass(self):
        assert distance_test(boundary_reference())
        assert distance_test(noise_step_reference())

    def test_identity_like_program_fails(self):
        # returns x + 0*stuff: distance equal, not strictly less
        p = parse_program("""\
param s0 = 0.01
input v1  # x0
input v2  # x
input v3  # n
s4 = SUB(s0,s0)
v5 = MUL(v3,s4)
v6 = ADD(v2,v5)
return v6
""")
        assert not distance_test(p)

    def test_return_x0_passes(self):
        p = parse_program("""\
param s0 = 0.01
input v1  # x0
input v2  # x
input v3  # n
s4 = DOT(v2,v3)
s5 = MUL(s4,s0)
s6 = SUB(s5,s5)
v7 = MUL(v1,s6)
v8 = ADD(v1,v7)
return v8
""")
        assert distance_test(p)

    def test_small_noise_step_fails_with_high_probability(self):
        # x + s0*n halves the distance only with probability ~1/2 per case
        p = parse_program("""\
param s0 = 0.01
input v1  # x0
input v2  # x
input v3  # n
s4 = NORM(v1)
s5 = DIV(s4,s4)
s6 = MUL(s0,s5)
v7 = MUL(v3,s6)
v8 = ADD(v2,v7)
return v8
""")
        assert not distance_test(p)


class TestAttack:
    def test_budget_is_exact(self, halfspace_setup):
        oracle, x0, x1 = halfspace_setup
        oracle.reset_counter()
        log = attack(boundary_reference(), oracle, x0, start=x1, budget=500,
                     rng=stream(1, "att"))
        assert log.queries == 500
        assert oracle.queries == 500

    def test_budget_includes_start_queries(self, halfspace_setup):
        oracle, x0, _ = halfspace_setup
        oracle.reset_counter()
        fb = np.zeros(16)
        fb[0] = 3.0
        log = attack(boundary_reference(), oracle, x0, fallback=fb, budget=300,
                     rng=stream(2, "att"))
        assert log.start_queries >= 1
        assert log.queries == 300 == oracle.queries

    def test_logged_distances_strictly_decrease(self, halfspace_setup):
        oracle, x0, x1 = halfspace_setup
        log = attack(boundary_reference(), oracle, x0, start=x1, budget=800,
                     rng=stream(3, "att"))
        ds = [d for _, d in log.records]
        assert all(b < a for a, b in zip(ds, ds[1:]))
        assert log.d_min == ds[-1]

    def test_adaptation_disabled_freezes_hyperparameters(self, halfspace_setup):
        oracle, x0, x1 = halfspace_setup
        p = boundary_reference()
        log = attack(p, oracle, x0, start=x1, max_iters=200, rng=stream(4, "att"),
                     adaptation_enabled=False)
        assert log.hyper_final == p.hyper_init

    def test_distortion_ratio(self, halfspace_setup):
        oracle, x0, x1 = halfspace_setup
        log = attack(boundary_reference(), oracle, x0, start=x1, budget=2000,
                     rng=stream(5, "att"))
        r = distortion_ratio(log)
        assert 0.25 <= r < 1.0  # analytic optimum is 0.25

    def test_non_adversarial_proposals_cost_no_queries(self, halfspace_setup):
        oracle, x0, x1 = halfspace_setup
        # the identity-like program never proposes a closer point: 0 queries
        p = parse_program("""\
param s0 = 0.01
input v1  # x0
input v2  # x
input v3  # n
s4 = SUB(s0,s0)
s5 = DOT(v1,v3)
s6 = MUL(s5,s4)
v7 = MUL(v3,s6)
v8 = ADD(v2,v7)
return v8
""")
        oracle.reset_counter()
        log = attack(p, oracle, x0, start=x1, max_iters=50, rng=stream(6, "att"))
        assert oracle.queries == 0
        assert log.queries == 0
        assert log.iterations == 50

    def test_requires_some_limit(self, halfspace_setup):
        oracle, x0, x1 = halfspace_setup
        with pytest.raises(ValueError):
            attack(boundary_reference(), oracle, x0, start=x1, rng=stream(0, "att"))
