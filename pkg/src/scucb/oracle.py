"""(alpha, beta)-approximation oracles over fixed-size arm subsets."""
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from . import _kernels as K
from .env import InstanceShape, all_subsets, subset_reward, subset_rewards

ORACLE_KINDS = ("exact_topk", "greedy_coverage", "failing_wrapper")
MAX_ENUMERABLE_ARMS = 15


class CapabilityError(ValueError):
    """Request exceeds what exhaustive enumeration can handle."""


@dataclass(frozen=True)
class OracleSpec:
    kind: str = "exact_topk"
    inner: Optional["OracleSpec"] = None
    beta_factor: float = 1.0

    def __post_init__(self):
        if self.kind not in ORACLE_KINDS:
            raise ValueError(f"unknown oracle kind {self.kind!r}")
        if self.kind == "failing_wrapper":
            if self.inner is None:
                raise ValueError("failing_wrapper needs an inner oracle")
            if not 0.0 < self.beta_factor <= 1.0:
                raise ValueError("beta must lie in (0, 1]")

    @property
    def alpha(self):
        if self.kind == "exact_topk":
            return 1.0
        if self.kind == "greedy_coverage":
            return 1.0 - 1.0 / math.e
        return self.inner.alpha

    @property
    def beta(self):
        if self.kind == "failing_wrapper":
            return self.inner.beta * self.beta_factor
        return 1.0


def failing(inner, beta):
    return OracleSpec("failing_wrapper", inner=inner, beta_factor=beta)


class Selection(NamedTuple):
    subset: tuple
    failed: bool


def select(spec, estimates, shape, rng=None):
    """Run the oracle; ``failed`` is True when an injected failure replaced the answer."""
    est = np.asarray(estimates, dtype=float)
    if est.shape != (shape.m,):
        raise ValueError(f"expected {shape.m} estimates, got shape {est.shape}")
    out = np.empty(shape.k, dtype=np.int64)
    if spec.kind == "exact_topk":
        if shape.family == "linear":
            return Selection(tuple(int(i) for i in K.top_k(est, shape.k, out)), False)
        subsets = all_subsets(shape.m, shape.k)
        j = int(np.argmax(subset_rewards(shape, np.clip(est, 0.0, 1.0), subsets)))
        return Selection(subsets[j], False)
    if spec.kind == "greedy_coverage":
        if shape.family != "coverage":
            raise ValueError("greedy_coverage needs the coverage family")
        K.greedy_coverage(est, shape.weights, shape.probs, shape.k, out)
        return Selection(tuple(int(i) for i in out), False)
    if rng is None:
        raise ValueError("failing_wrapper needs an rng")
    inner = select(spec.inner, est, shape, rng)
    if inner.failed:
        return inner
    if rng.random() < spec.beta_factor:
        return inner
    pick = rng.choice(shape.m, size=shape.k, replace=False)
    return Selection(tuple(sorted(int(i) for i in pick)), True)


def oracle_select(spec, estimates, shape, rng=None):
    return select(spec, estimates, shape, rng).subset


def oracle_guarantee_check(spec, estimates, shape, trials, rng):
    """Fraction of oracle calls whose subset reaches alpha * OPT at ``estimates``."""
    if shape.m > MAX_ENUMERABLE_ARMS:
        raise CapabilityError(f"m={shape.m} too large to enumerate (max {MAX_ENUMERABLE_ARMS})")
    est = np.asarray(estimates, dtype=float)
    eval_mu = np.clip(est, 0.0, 1.0) if shape.family == "coverage" else est
    opt = float(subset_rewards(shape, eval_mu, all_subsets(shape.m, shape.k)).max())
    threshold = spec.alpha * opt
    hits = 0
    for _ in range(trials):
        s = oracle_select(spec, est, shape, rng)
        if subset_reward(shape, eval_mu, s) >= threshold - 1e-12:
            hits += 1
    return hits / trials


def random_coverage_shape(m, k, n_targets, rng, density=0.5):
    """Random coverage family: unit weights, sparse links with uniform probabilities."""
    weights = rng.uniform(0.5, 1.5, size=n_targets)
    probs = rng.uniform(0.0, 1.0, size=(m, n_targets)) * (rng.random((m, n_targets)) < density)
    return InstanceShape(m, k, "coverage", weights, probs)
