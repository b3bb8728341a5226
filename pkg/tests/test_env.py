import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scucb.env import (ArmHistory, BudgetLedger, ConstraintError, Environment, ManipulationStrategy,
                       ProblemInstance, compute_manipulation, env_step, expected_reward,
                       raw_reward_table, sample_raw_reward, smoothness, subset_reward)
from scucb.rng import arm_streams

from oracles import coverage_by_hand


def linear(means, budgets=None, k=1):
    means = np.asarray(means, dtype=float)
    return ProblemInstance(means, np.zeros_like(means) if budgets is None else budgets, k)


def fresh_env(inst, kinds, seed=0):
    strategies = [ManipulationStrategy(kd) for kd in kinds]
    return Environment(inst, strategies, arm_streams(seed, "reward", inst.m),
                       arm_streams(seed, "strategy", inst.m))


class TestInstance:
    def test_rejects_bad_means_and_k(self):
        with pytest.raises(ValueError):
            linear([1.2, 0.3])
        with pytest.raises(ValueError):
            linear([0.2, 0.3], k=3)
        with pytest.raises(ValueError):
            ProblemInstance([0.2], [-1.0], 1)

    def test_b_max_and_zeroed_optimum(self):
        inst = ProblemInstance([0.9, 0.2, 0.5], [5.0, 7.0, 3.0], 1).zero_optimal_budgets()
        assert inst.budgets.tolist() == [0.0, 7.0, 3.0]
        assert inst.b_max == 7.0
        assert inst.optimal_subset() == (0,)

    def test_gaps_to_optimal(self):
        inst = linear([0.9, 0.8, 0.3], k=2)
        np.testing.assert_allclose(inst.gaps_to_optimal(), [0.0, 0.0, 0.5])


class TestRawRewards:
    @pytest.mark.parametrize("seed", [0, 1, 99])
    def test_degenerate_bernoulli(self, seed):
        inst = linear([1.0, 0.0])
        rng = np.random.default_rng(seed)
        assert sample_raw_reward(inst, 0, rng) == 1.0
        assert sample_raw_reward(inst, 1, rng) == 0.0

    def test_law_of_large_numbers(self):
        inst = linear([0.5])
        draws = raw_reward_table(inst, 0, np.random.default_rng(7), 100_000)
        assert abs(draws.mean() - 0.5) < 0.01

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            sample_raw_reward(linear([0.5]), 3, np.random.default_rng(0))

    @pytest.mark.parametrize("dist", ["bernoulli", "gaussian"])
    def test_table_matches_scalar_stream(self, dist):
        inst = ProblemInstance([0.3, 0.7], [0.0, 0.0], 1, distribution=dist, sigma=0.4)
        table = raw_reward_table(inst, 1, np.random.default_rng(3), 200)
        rng = np.random.default_rng(3)
        scalar = [sample_raw_reward(inst, 1, rng) for _ in range(200)]
        assert table.tolist() == scalar

    def test_gaussian_is_clipped(self):
        inst = ProblemInstance([0.5], [0.0], 1, distribution="gaussian", sigma=3.0)
        draws = raw_reward_table(inst, 0, np.random.default_rng(1), 5000)
        assert draws.min() == 0.0 and draws.max() == 1.0


class TestManipulation:
    def test_none_is_zero(self):
        ledger = BudgetLedger([10.0])
        assert compute_manipulation(ManipulationStrategy("none"), ArmHistory(0), ledger, 0, 1) == 0.0

    def test_lsi_spends_everything_on_first_pull(self):
        ledger = BudgetLedger([50.0])
        hist = ArmHistory(0)
        s = ManipulationStrategy("lsi")
        z = compute_manipulation(s, hist, ledger, 0, 1)
        assert z == 50.0
        ledger.debit(0, z)
        hist.append(1, 0.0, z)
        assert compute_manipulation(s, hist, ledger, 0, 2) == 0.0
        assert ledger.spent[0] == 50.0

    def test_random_clamps_to_zero_when_exhausted(self):
        ledger = BudgetLedger([1.0])
        ledger.debit(0, 1.0)
        z = compute_manipulation(ManipulationStrategy("random"), ArmHistory(0), ledger, 0, 1,
                                 np.random.default_rng(0))
        assert z == 0.0

    def test_random_is_uniform_capped(self):
        ledger = BudgetLedger([100.0])
        rng = np.random.default_rng(4)
        u = np.random.default_rng(4).random()
        assert compute_manipulation(ManipulationStrategy("random"), ArmHistory(0), ledger, 0, 1, rng) == u

    def test_timed_variant(self):
        s = ManipulationStrategy("pb_lsi", init_amount=0.3, release_round=7)
        ledger = BudgetLedger([5.0])
        hist = ArmHistory(0)
        z = compute_manipulation(s, hist, ledger, 0, 1)
        assert z == 0.3
        ledger.debit(0, z)
        hist.append(1, 1.0, z)
        assert compute_manipulation(s, hist, ledger, 0, 6) == 0.0
        assert compute_manipulation(s, hist, ledger, 0, 7) == pytest.approx(4.7)

    def test_plan_pays_per_pull(self):
        s = ManipulationStrategy("collusion_plan", plan=(2.0, 2.0))
        ledger = BudgetLedger([3.0])
        hist = ArmHistory(0)
        paid = []
        for t in range(1, 5):
            z = ledger.debit(0, compute_manipulation(s, hist, ledger, 0, t))
            hist.append(t, 0.0, z)
            paid.append(z)
        assert paid == [2.0, 1.0, 0.0, 0.0]

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            ManipulationStrategy("bribe")


class TestEnvStep:
    def test_zero_budget_signal_is_raw(self):
        inst = linear([0.4, 0.6])
        env = fresh_env(inst, ["lsi", "lsi"])
        tr = env.step((1,), 1)
        assert tr.manipulation == (0.0,)
        assert tr.observed == tr.raw

    def test_lsi_first_pull_example(self):
        inst = ProblemInstance([1.0, 0.2], [3.0, 0.0], 1)
        env = fresh_env(inst, ["lsi", "none"])
        tr = env.step((0,), 1)
        assert tr.observed == (4.0,)
        assert env.ledger.spent[0] == 3.0

    def test_hidden_reward_linear(self):
        inst = linear([0.9, 0.8, 0.3], k=2)
        env = fresh_env(inst, ["none"] * 3)
        assert env.step((0, 1), 1).hidden_reward == pytest.approx(1.7)

    @pytest.mark.parametrize("bad", [(0,), (0, 0), (0, 5), (0, 1, 2)])
    def test_constraint_errors(self, bad):
        env = fresh_env(linear([0.1, 0.2, 0.3], k=2), ["none"] * 3)
        with pytest.raises(ConstraintError):
            env.step(bad, 1)

    def test_budget_conservation_every_round(self):
        inst = ProblemInstance([0.9, 0.4, 0.5, 0.1], [0.0, 3.0, 2.5, 4.0], 2)
        env = fresh_env(inst, ["none", "random", "lsi", "random"], seed=5)
        rng = np.random.default_rng(0)
        for t in range(1, 400):
            env.step(tuple(rng.choice(4, 2, replace=False)), t)
            for i in range(4):
                h = env.histories[i]
                assert sum(h.manipulation) == pytest.approx(env.ledger.spent[i], abs=1e-12)
                assert env.ledger.spent[i] <= inst.budgets[i]
                assert env.ledger.spent[i] + env.ledger.remaining[i] == pytest.approx(inst.budgets[i])

    def test_strategy_only_sees_own_history(self):
        class Sentinel(ArmHistory):
            def __getattribute__(self, name):
                raise AssertionError("foreign history was read")

        inst = ProblemInstance([0.9, 0.4, 0.5], [0.0, 3.0, 2.0], 1)
        strategies = [ManipulationStrategy(k) for k in ("none", "lsi", "random")]
        histories = [Sentinel(0), ArmHistory(1), Sentinel(2)]
        ledger = BudgetLedger(inst.budgets)
        tr = env_step(inst, strategies, ledger, histories, (1,), 1,
                      arm_streams(0, "reward", 3), arm_streams(0, "strategy", 3))
        assert tr.manipulation == (3.0,)
        assert histories[1].rounds == [1]

    def test_determinism(self):
        inst = ProblemInstance([0.9, 0.4, 0.5], [0.0, 3.0, 2.0], 2)

        def play(seed):
            env = fresh_env(inst, ["none", "random", "lsi"], seed)
            return [env.step(((t % 3), (t + 1) % 3), t) for t in range(1, 60)]

        assert play(11) == play(11)
        assert play(11) != play(12)


class TestRewardFamilies:
    def test_linear_examples(self):
        inst = linear([0.9, 0.8, 0.3], k=2)
        assert expected_reward(inst, (0, 1)) == pytest.approx(1.7)
        assert expected_reward(inst, ()) == 0.0

    def test_coverage_example(self):
        inst = ProblemInstance([0.5, 0.5], [0.0, 0.0], 2, family="coverage",
                               weights=[1.0], probs=[[1.0], [1.0]])
        assert expected_reward(inst, (0, 1)) == pytest.approx(0.75)

    def test_coverage_matches_hand_formula(self, rng):
        w = rng.uniform(0, 2, 4)
        p = rng.uniform(0, 1, (6, 4))
        mu = rng.uniform(0, 1, 6)
        inst = ProblemInstance(mu, np.zeros(6), 3, family="coverage", weights=w, probs=p)
        for s in [(0, 1, 2), (1, 4, 5), (0, 3, 5)]:
            assert expected_reward(inst, s) == pytest.approx(coverage_by_hand(mu, w, p, s), rel=1e-12)


@st.composite
def mean_pairs(draw, family):
    m = draw(st.integers(2, 8))
    k = draw(st.integers(1, m))
    lo = draw(st.lists(st.floats(0, 1), min_size=m, max_size=m))
    bump = draw(st.lists(st.floats(0, 1), min_size=m, max_size=m))
    hi = [min(1.0, a + b) for a, b in zip(lo, bump)]
    n_t = 3
    w = draw(st.lists(st.floats(0, 2), min_size=n_t, max_size=n_t))
    p = draw(st.lists(st.lists(st.floats(0, 1), min_size=n_t, max_size=n_t), min_size=m, max_size=m))
    subset = draw(st.lists(st.integers(0, m - 1), min_size=k, max_size=k, unique=True))
    if family == "linear":
        inst = ProblemInstance(lo, np.zeros(m), k)
    else:
        inst = ProblemInstance(lo, np.zeros(m), k, family="coverage", weights=w, probs=p)
    return inst, np.array(lo), np.array(hi), tuple(subset)


@pytest.mark.parametrize("family", ["linear", "coverage"])
@settings(max_examples=500, deadline=None)
@given(data=st.data())
def test_monotonicity(family, data):
    inst, lo, hi, s = data.draw(mean_pairs(family))
    assert subset_reward(inst.shape, lo, s) <= subset_reward(inst.shape, hi, s) + 1e-12


@pytest.mark.parametrize("family", ["linear", "coverage"])
@settings(max_examples=500, deadline=None)
@given(data=st.data())
def test_bounded_smoothness(family, data):
    inst, lo, hi, s = data.draw(mean_pairs(family))
    f, f_inv = smoothness(inst.shape)
    lam = float(np.max(np.abs(hi - lo)))
    assert abs(subset_reward(inst.shape, lo, s) - subset_reward(inst.shape, hi, s)) <= f(lam) + 1e-12
    if f(1.0) > 0:
        assert f_inv(f(0.3)) == pytest.approx(0.3)
