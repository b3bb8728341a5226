"""Sequential subset-selection learners: SCUCB and its baselines.

All learners share one interface: ``select(t, rng)`` returns an arm subset and
``update(subset, observed, t)`` folds in the semi-bandit feedback (the
manipulated signals x + z of the pulled arms).
"""
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels as K
from .oracle import OracleSpec, select as oracle_run

POLICY_KINDS = ("scucb", "cucb", "tscb", "exp3cb", "eta_ucb")
EXP3_MC_SAMPLES = 1000
_LOG_WEIGHT_FLOOR = -700.0


def ucb_index(mean, count, t, b_max, gamma=1.0):
    """mean + gamma * sqrt(3 ln t / (2 K)) + B_max / K, unclipped."""
    if count < 1:
        raise ValueError("UCB index needs at least one pull")
    if t < 2:
        raise ValueError("UCB index is defined from round 2 on")
    return mean + gamma * math.sqrt(3.0 * math.log(t) / (2.0 * count)) + b_max / count


@dataclass
class PolicyState:
    m: int
    k: int
    counts: np.ndarray = None
    sums: np.ndarray = None
    gamma: float = 1.0
    b_max: float = 0.0
    # policy extras
    beta_a: Optional[np.ndarray] = None
    beta_b: Optional[np.ndarray] = None
    log_weights: Optional[np.ndarray] = None
    last_inclusion: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.counts is None:
            self.counts = np.zeros(self.m)
        if self.sums is None:
            self.sums = np.zeros(self.m)

    @property
    def means(self):
        """Running averages of observed signals; 0 for arms never pulled."""
        out = np.zeros(self.m)
        np.divide(self.sums, self.counts, out=out, where=self.counts > 0)
        return out

    def fold(self, subset, observed):
        subset = tuple(subset)
        if len(observed) != len(subset):
            raise ValueError(f"{len(observed)} signals for {len(subset)} arms")
        for i, s in zip(subset, observed):
            self.counts[i] += 1.0
            self.sums[i] += s


class Policy:
    kind = None

    def __init__(self, shape, oracle=None, gamma=1.0, b_max=0.0):
        self.shape = shape
        self.oracle = oracle if oracle is not None else OracleSpec()
        self.state = PolicyState(shape.m, shape.k, gamma=gamma, b_max=b_max)
        self.last_oracle_failed = False

    def scores(self, t, rng):
        raise NotImplementedError

    def select(self, t, rng, oracle_rng=None):
        sel = oracle_run(self.oracle, self.scores(t, rng), self.shape, oracle_rng)
        self.last_oracle_failed = sel.failed
        return sel.subset

    def update(self, subset, observed, t):
        self.state.fold(subset, observed)


class SCUCB(Policy):
    kind = "scucb"

    def scores(self, t, rng=None):
        s = self.state
        out = np.empty(s.m)
        return K.ucb_indices(s.sums, s.counts, float(t), float(s.b_max), float(s.gamma), out)


class CUCB(SCUCB):
    """SCUCB with the budget term switched off."""
    kind = "cucb"

    def __init__(self, shape, oracle=None, gamma=1.0, b_max=0.0):
        super().__init__(shape, oracle, gamma, 0.0)


class EtaUCB(Policy):
    """UCB with confidence width sqrt(2 ln(K^2 / eta^2) / K), as in the budget lower-bound analysis."""
    kind = "eta_ucb"

    def __init__(self, shape, oracle=None, eta=0.1, **_):
        super().__init__(shape, oracle)
        self.eta = float(eta)

    def scores(self, t, rng=None):
        s = self.state
        out = np.empty(s.m)
        return K.eta_ucb_indices(s.sums, s.counts, self.eta, out)


class TSCB(Policy):
    """Combinatorial Thompson sampling with Beta(1, 1) priors.

    Signals are clipped to [0, 1] and turned into Bernoulli trials, which keeps
    the Beta update conjugate when manipulation pushes a signal above 1.
    """
    kind = "tscb"

    def __init__(self, shape, oracle=None, **_):
        super().__init__(shape, oracle)
        self.state.beta_a = np.ones(shape.m)
        self.state.beta_b = np.ones(shape.m)

    def scores(self, t, rng):
        return rng.beta(self.state.beta_a, self.state.beta_b)

    def update(self, subset, observed, t, rng=None):
        super().update(subset, observed, t)
        for i, s in zip(subset, observed):
            if rng.random() < min(max(s, 0.0), 1.0):
                self.state.beta_a[i] += 1.0
            else:
                self.state.beta_b[i] += 1.0


class EXP3CB(Policy):
    """Exponential weights over arms; k arms drawn without replacement each round.

    Arm inclusion probabilities under the without-replacement draw have no
    closed form, so they are estimated by Monte Carlo (the realised draw
    counts as one of the samples, which keeps every estimate positive).
    """
    kind = "exp3cb"

    def __init__(self, shape, oracle=None, horizon=10_000, **_):
        super().__init__(shape, oracle)
        m = shape.m
        self.explore = min(1.0, math.sqrt(m * math.log(max(m, 2)) / ((math.e - 1.0) * horizon)))
        self.rate = self.explore / m
        self.state.log_weights = np.zeros(m)

    def distribution(self):
        lw = self.state.log_weights
        w = np.exp(lw - lw.max())
        return (1.0 - self.explore) * w / w.sum() + self.explore / self.shape.m

    @property
    def weights(self):
        return np.exp(self.state.log_weights)

    def _draw(self, log_p, rng, size=None):
        # Gumbel top-k == successive sampling without replacement
        shape = (self.shape.m,) if size is None else (size, self.shape.m)
        keys = log_p + rng.gumbel(size=shape)
        return np.argsort(-keys, axis=-1, kind="stable")[..., : self.shape.k]

    def select(self, t, rng, oracle_rng=None):
        log_p = np.log(self.distribution())
        chosen = self._draw(log_p, rng)
        samples = self._draw(log_p, rng, EXP3_MC_SAMPLES)
        hits = np.zeros(self.shape.m)
        np.add.at(hits, samples.ravel(), 1.0)
        hits[chosen] += 1.0
        self.state.last_inclusion = hits / (EXP3_MC_SAMPLES + 1)
        self.last_oracle_failed = False
        return tuple(sorted(int(i) for i in chosen))

    def update(self, subset, observed, t, rng=None):
        super().update(subset, observed, t)
        incl = self.state.last_inclusion
        lw = self.state.log_weights
        for i, s in zip(subset, observed):
            loss = 1.0 - min(max(s, 0.0), 1.0)
            p = incl[i] if incl is not None else self.shape.k / self.shape.m
            lw[i] -= self.rate * loss / p
        lw -= lw.max()
        np.maximum(lw, _LOG_WEIGHT_FLOOR, out=lw)


_POLICIES = {cls.kind: cls for cls in (SCUCB, CUCB, TSCB, EXP3CB, EtaUCB)}


def make_policy(kind, shape, oracle=None, gamma=1.0, b_max=0.0, horizon=10_000, eta=0.1):
    if kind not in _POLICIES:
        raise ValueError(f"unknown policy {kind!r}; choose from {POLICY_KINDS}")
    cls = _POLICIES[kind]
    if cls in (SCUCB, CUCB):
        return cls(shape, oracle, gamma=gamma, b_max=b_max)
    return cls(shape, oracle, horizon=horizon, eta=eta)


def init_subset(t, m, k):
    """Round t <= m of initialisation: arm t-1 plus the lowest-indexed other arms."""
    out = np.empty(k, dtype=np.int64)
    return tuple(int(i) for i in K.init_subset(t, m, k, out))


def initialize(policy, play, rng=None):
    """Run rounds 1..m, each containing its own arm; ``play(subset, t)`` returns the signals."""
    m, k = policy.shape.m, policy.shape.k
    for t in range(1, m + 1):
        subset = init_subset(t, m, k)
        observed = play(subset, t)
        policy_update(policy, subset, observed, t, rng)
    return policy.state


def policy_select(policy, t, rng, oracle_rng=None):
    return policy.select(t, rng, oracle_rng)


def policy_update(policy, subset, observed, t, rng=None):
    if isinstance(policy, (TSCB, EXP3CB)):
        policy.update(subset, observed, t, rng)
    else:
        policy.update(subset, observed, t)
    return policy.state
