"""Strategic arms: stochastic rewards, budgeted manipulation, semi-bandit feedback."""
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional

import numpy as np

from . import _kernels as K

FAMILIES = ("linear", "coverage")
DISTRIBUTIONS = ("bernoulli", "gaussian")
STRATEGY_KINDS = ("none", "lsi", "random", "pb_lsi", "pd_lsi", "pbd_lsi", "collusion_plan")

_KIND_CODES = {
    "none": K.STRAT_NONE,
    "lsi": K.STRAT_LSI,
    "random": K.STRAT_RANDOM,
    "pb_lsi": K.STRAT_TIMED,
    "pd_lsi": K.STRAT_TIMED,
    "pbd_lsi": K.STRAT_TIMED,
    "collusion_plan": K.STRAT_PLAN,
}


class ConstraintError(ValueError):
    """An arm subset violates the instance's action constraint."""


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    means: np.ndarray
    budgets: np.ndarray
    k: int
    family: str = "linear"
    weights: Optional[np.ndarray] = None
    probs: Optional[np.ndarray] = None
    distribution: str = "bernoulli"
    sigma: float = 0.5

    def __post_init__(self):
        means = np.asarray(self.means, dtype=float)
        budgets = np.asarray(self.budgets, dtype=float)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "budgets", budgets)
        if means.ndim != 1 or means.size == 0:
            raise ValueError("means must be a non-empty vector")
        if budgets.shape != means.shape:
            raise ValueError("budgets must have one entry per arm")
        if np.any(means < 0) or np.any(means > 1):
            raise ValueError("means must lie in [0, 1]")
        if np.any(budgets < 0):
            raise ValueError("budgets must be nonnegative")
        if not 1 <= self.k <= means.size:
            raise ValueError(f"action size k={self.k} outside [1, {means.size}]")
        if self.family not in FAMILIES:
            raise ValueError(f"unknown reward family {self.family!r}")
        if self.distribution not in DISTRIBUTIONS:
            raise ValueError(f"unknown distribution {self.distribution!r}")
        if self.family == "coverage":
            if self.weights is None or self.probs is None:
                raise ValueError("coverage family needs weights and link probabilities")
            w = np.asarray(self.weights, dtype=float)
            p = np.asarray(self.probs, dtype=float)
            if p.shape != (means.size, w.size):
                raise ValueError("probs must have shape (m, n_targets)")
            if np.any(p < 0) or np.any(p > 1) or np.any(w < 0):
                raise ValueError("coverage weights must be >= 0 and probs in [0, 1]")
            object.__setattr__(self, "weights", w)
            object.__setattr__(self, "probs", p)

    @property
    def m(self):
        return self.means.size

    @property
    def b_max(self):
        return float(self.budgets.max())

    @property
    def shape(self):
        return InstanceShape(self.m, self.k, self.family, self.weights, self.probs)

    def optimal_subset(self):
        return best_subset(self.shape, self.means)[0]

    def gaps_to_optimal(self):
        """Per-arm gap to the weakest arm of the optimal subset, floored at 0."""
        opt = self.optimal_subset()
        return np.maximum(self.means[list(opt)].min() - self.means, 0.0)

    def with_budgets(self, budgets):
        return ProblemInstance(self.means, budgets, self.k, self.family, self.weights,
                               self.probs, self.distribution, self.sigma)

    def zero_optimal_budgets(self):
        budgets = self.budgets.copy()
        budgets[list(self.optimal_subset())] = 0.0
        return self.with_budgets(budgets)


@dataclass(frozen=True, eq=False)
class InstanceShape:
    """What an oracle may know about an instance: sizes and the reward family, no means."""
    m: int
    k: int
    family: str = "linear"
    weights: Optional[np.ndarray] = None
    probs: Optional[np.ndarray] = None


def _check_subset(m, k, subset):
    subset = tuple(sorted(int(i) for i in subset))
    if len(set(subset)) != len(subset):
        raise ConstraintError(f"duplicate arms in {subset}")
    if len(subset) != k:
        raise ConstraintError(f"subset {subset} has size {len(subset)}, need {k}")
    if subset and (subset[0] < 0 or subset[-1] >= m):
        raise ConstraintError(f"subset {subset} has arms outside [0, {m})")
    return subset


def subset_reward(shape, mu, subset):
    """r_mu(S) for any mean-like vector; no cardinality check."""
    idx = np.asarray(sorted(subset), dtype=np.int64)
    if shape.family == "linear":
        # left-to-right, matching the fused simulation loop bit for bit
        total = 0.0
        for i in idx:
            total += float(mu[i])
        return total
    return float(K.coverage_value(np.asarray(mu, dtype=float), shape.weights, shape.probs, idx))


def expected_reward(instance, subset):
    """Pre-manipulation expected reward of an arm subset."""
    subset = tuple(int(i) for i in subset)
    if any(i < 0 or i >= instance.m for i in subset) or len(set(subset)) != len(subset):
        raise ConstraintError(f"invalid subset {subset}")
    return subset_reward(instance.shape, instance.means, subset)


def all_subsets(m, k):
    return list(combinations(range(m), k))


def subset_rewards(shape, mu, subsets):
    """Vectorised r_mu over a list of equal-size subsets."""
    mu = np.asarray(mu, dtype=float)
    idx = np.asarray(subsets, dtype=np.int64).reshape(len(subsets), -1)
    if shape.family == "linear":
        return mu[idx].sum(axis=1)
    # (n_subsets, k, n_targets)
    miss = 1.0 - mu[idx][:, :, None] * shape.probs[idx]
    return (shape.weights * (1.0 - miss.prod(axis=1))).sum(axis=1)


def best_subset(shape, mu):
    """Exact argmax over all k-subsets; ties to the lexicographically first subset."""
    subsets = all_subsets(shape.m, shape.k)
    values = subset_rewards(shape, mu, subsets)
    j = int(np.argmax(values))
    return subsets[j], float(values[j])


def smoothness(shape):
    """Bounded-smoothness modulus ``f`` and its inverse for the family."""
    if shape.family == "linear":
        c = float(shape.k)
    else:
        c = float((shape.weights * shape.probs.sum(axis=0)).sum())
    # c = 0 means the reward ignores the means; no gap is then resolvable
    return (lambda lam: c * lam), (lambda delta: delta / c if c > 0 else math.inf)


def sample_raw_reward(instance, arm, rng):
    if not 0 <= arm < instance.m:
        raise IndexError(f"arm {arm} out of range for m={instance.m}")
    mu = instance.means[arm]
    if instance.distribution == "bernoulli":
        return 1.0 if rng.random() < mu else 0.0
    return float(min(max(mu + instance.sigma * rng.standard_normal(), 0.0), 1.0))


def raw_reward_table(instance, arm, rng, n):
    """The first ``n`` values ``sample_raw_reward`` would return on this stream."""
    if not 0 <= arm < instance.m:
        raise IndexError(f"arm {arm} out of range for m={instance.m}")
    mu = instance.means[arm]
    if instance.distribution == "bernoulli":
        return (rng.random(n) < mu).astype(float)
    return np.clip(mu + instance.sigma * rng.standard_normal(n), 0.0, 1.0)


class BudgetLedger:
    def __init__(self, budgets):
        self.budgets = np.array(budgets, dtype=float)
        self.spent = np.zeros_like(self.budgets)

    @property
    def remaining(self):
        return np.maximum(self.budgets - self.spent, 0.0)

    def remaining_for(self, arm):
        return max(float(self.budgets[arm] - self.spent[arm]), 0.0)

    def debit(self, arm, amount):
        """Spend up to ``amount`` for ``arm``; returns what was actually spent."""
        z, self.spent[arm] = K.clamp_spend(float(amount), float(self.spent[arm]),
                                           float(self.budgets[arm]))
        return z


@dataclass
class ArmHistory:
    """One arm's own record: which rounds it was pulled in, and what it drew and added."""
    arm: int
    rounds: list = field(default_factory=list)
    raw: list = field(default_factory=list)
    manipulation: list = field(default_factory=list)

    @property
    def n_pulls(self):
        return len(self.rounds)

    def pulled_at(self, t):
        return t in self.rounds

    def indicators(self, horizon):
        ind = np.zeros(horizon, dtype=bool)
        ind[np.asarray(self.rounds, dtype=np.int64) - 1] = True
        return ind

    def append(self, t, x, z):
        if self.rounds and t <= self.rounds[-1]:
            raise ValueError("history is append-only in round order")
        self.rounds.append(t)
        self.raw.append(x)
        self.manipulation.append(z)


@dataclass(frozen=True)
class ManipulationStrategy:
    """Maps an arm's own history to a nonnegative manipulation.

    ``init_amount``/``release_round`` drive the prioritised LSI variants and
    ``plan`` holds per-pull amounts for a collusion plan.
    """
    kind: str = "none"
    init_amount: float = 0.0
    release_round: int = 0
    plan: tuple = ()

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ValueError(f"unknown strategy kind {self.kind!r}")

    @property
    def code(self):
        return _KIND_CODES[self.kind]


def compute_manipulation(strategy, history, ledger, arm, t, rng=None):
    """Manipulation arm ``arm`` adds at round ``t`` (not yet debited).

    ``rng`` is the arm's own strategy stream; it is consumed once per pull by
    the ``random`` kind only.
    """
    remaining = ledger.remaining_for(arm)
    u = 0.0
    if strategy.kind == "random":
        if rng is None:
            raise ValueError("random strategy needs the arm's strategy stream")
        u = rng.random()
    plan = np.asarray(strategy.plan, dtype=float) if strategy.plan else np.zeros(1)
    request = K.manipulation_amount(strategy.code, history.n_pulls, t, remaining,
                                    float(strategy.init_amount), int(strategy.release_round),
                                    plan, len(strategy.plan), u)
    return min(max(float(request), 0.0), remaining)


@dataclass(frozen=True)
class RoundTrace:
    t: int
    subset: tuple
    raw: tuple
    manipulation: tuple
    hidden_reward: float

    @property
    def observed(self):
        return tuple(x + z for x, z in zip(self.raw, self.manipulation))


def env_step(instance, strategies, ledger, histories, subset, t, reward_rngs, strategy_rngs):
    """Play ``subset`` at round ``t``.

    Each selected arm draws from its own reward stream, its strategy sees only
    its own history, the ledger is debited, and the history extended.
    """
    subset = _check_subset(instance.m, instance.k, subset)
    xs, zs = [], []
    for i in subset:
        x = sample_raw_reward(instance, i, reward_rngs[i])
        z = compute_manipulation(strategies[i], histories[i], ledger, i, t, strategy_rngs[i])
        z = ledger.debit(i, z)
        histories[i].append(t, x, z)
        xs.append(x)
        zs.append(z)
    return RoundTrace(t, subset, tuple(xs), tuple(zs), expected_reward(instance, subset))


class Environment:
    """Owns the mutable side of a run: ledger, histories and per-arm streams."""

    def __init__(self, instance, strategies, reward_rngs, strategy_rngs):
        if len(strategies) != instance.m:
            raise ValueError("need one strategy per arm")
        self.instance = instance
        self.strategies = list(strategies)
        self.ledger = BudgetLedger(instance.budgets)
        self.histories = [ArmHistory(i) for i in range(instance.m)]
        self.reward_rngs = reward_rngs
        self.strategy_rngs = strategy_rngs

    def step(self, subset, t):
        return env_step(self.instance, self.strategies, self.ledger, self.histories,
                        subset, t, self.reward_rngs, self.strategy_rngs)
