import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scucb.collusion import (CollusionProgram, CollusionSolution, constraint_slack, deadlines_for,
                             is_feasible, lsi_variant_plan, plan_to_strategy, solve_collusion_bruteforce,
                             variant_order, variant_strategies)
from scucb.oracle import CapabilityError

from oracles import collusion_scan


def test_zero_budgets_pull_nothing():
    sol = solve_collusion_bruteforce(CollusionProgram([0.0, 0.0], [0.3, 0.5]), 20)
    assert sol.pulls == (0, 0) and sol.objective == 0.0


def test_single_arm_matches_full_scan():
    prog = CollusionProgram([100.0], [0.5])
    sol = solve_collusion_bruteforce(prog, 500)
    best = max(y for y in range(501)
               if y == 0 or 100.0 / y + math.sqrt(3 * math.log(max(y, 1)) / y)
               >= 0.5 + math.sqrt(3 * math.log(max(y, 1))))
    assert sol.pulls == (best,)
    assert sol.objective == pytest.approx(0.5 * best)
    assert is_feasible(prog, sol)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0, 15), min_size=1, max_size=2), st.data(), st.integers(1, 25))
def test_matches_independent_scan(budgets, data, y_cap):
    deltas = data.draw(st.lists(st.floats(0.05, 1.0), min_size=len(budgets), max_size=len(budgets)))
    unit = data.draw(st.booleans())
    prog = CollusionProgram(budgets, deltas, unit_weights=unit)
    sol = solve_collusion_bruteforce(prog, y_cap)
    ref = collusion_scan(budgets, deltas, list(prog.weights), y_cap)
    assert sol.objective == pytest.approx(ref, rel=1e-12, abs=1e-12)
    assert is_feasible(prog, sol)


def test_objective_scales_with_deltas():
    prog = CollusionProgram([5.0, 3.0], [0.2, 0.4])
    sol = CollusionSolution((0, 1), (3, 2), (3, 5), 0.0)
    w1 = float(np.dot(prog.weights, sol.pulls))
    w2 = float(np.dot(CollusionProgram([5.0, 3.0], [0.4, 0.8]).weights, sol.pulls))
    assert w2 == pytest.approx(2 * w1)


def test_capability_limits():
    with pytest.raises(CapabilityError):
        solve_collusion_bruteforce(CollusionProgram(np.ones(7), np.ones(7)), 1)
    with pytest.raises(CapabilityError):
        solve_collusion_bruteforce(CollusionProgram(np.ones(5), np.ones(5)), 100)


def test_deadlines_and_slack():
    assert deadlines_for((1, 0), (3, 4)) == (7, 4)
    assert constraint_slack(1.0, 0.5, 0, 10) == math.inf
    assert constraint_slack(10.0, 0.5, 1, 1) == pytest.approx(9.5)


def test_is_feasible_rejects_bad_order_and_deadline():
    prog = CollusionProgram([10.0, 10.0], [0.5, 0.5])
    assert not is_feasible(prog, CollusionSolution((0, 0), (1, 1), (1, 2), 1.0))
    assert not is_feasible(prog, CollusionSolution((0, 1), (2, 2), (2, 3), 2.0))


class TestPlans:
    def test_zero_solution_is_none(self):
        prog = CollusionProgram([0.0, 0.0], [0.2, 0.3])
        strategies = plan_to_strategy(prog, solve_collusion_bruteforce(prog, 5))
        assert [s.kind for s in strategies] == ["none", "none"]

    def test_single_arm_spend_within_budget(self):
        prog = CollusionProgram([50.0], [0.5])
        sol = CollusionSolution((0,), (10,), (10,), 5.0)
        (s,) = plan_to_strategy(prog, sol)
        assert sum(s.plan) <= 50.0 + 1e-12
        assert len(s.plan) == 10

    def test_infeasible_plan_rejected(self):
        prog = CollusionProgram([0.1], [0.9])
        with pytest.raises(ValueError):
            plan_to_strategy(prog, CollusionSolution((0,), (50,), (50,), 45.0))


class TestVariants:
    def test_orders(self):
        assert variant_order("pb", [30, 10, 20], [0, 0, 0]) == (0, 2, 1)
        assert variant_order("pd", [0, 0, 0], [0.1, 0.3, 0.2]) == (0, 2, 1)
        assert variant_order("pbd", [30, 10, 20], [0.1, 0.3, 0.2]) == (1, 2, 0)
        with pytest.raises(ValueError):
            variant_order("px", [1], [1])

    def test_plan_spends_whole_budget(self):
        plan = lsi_variant_plan("pb", [3.0, 1.0, 0.2], [0.5, 0.5, 0.5], m=3)
        spent = {}
        for arm, _, amount in plan:
            spent[arm] = spent.get(arm, 0.0) + amount
        assert spent == pytest.approx({0: 3.0, 1: 1.0, 2: 0.2})
        assert (0, 4, 2.5) in plan and (1, 5, 0.5) in plan

    def test_strategies_match_plan(self):
        ss = variant_strategies("pd", [3.0, 1.0], [0.4, 0.2], m=2)
        assert [s.release_round for s in ss] == [4, 3]
        assert [s.init_amount for s in ss] == [0.4, 0.2]
