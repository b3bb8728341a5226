"""Ground truth and regret accounting: optima, gaps, bounds and pull counters."""
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .env import all_subsets, subset_rewards
from .oracle import CapabilityError

MAX_GAP_ARMS = 20
MAX_GAP_SUBSETS = 2_000_000


@dataclass(frozen=True, eq=False)
class GapReport:
    """Exhaustive view of an instance at approximation ratio ``alpha``.

    Per-arm gaps are NaN for arms that belong to no suboptimal subset; such
    arms are left out of ``delta_min``/``delta_max``, which are NaN when no
    suboptimal subset exists at all.
    """
    opt: float
    opt_subset: tuple
    alpha: float
    subsets: list
    rewards: np.ndarray
    suboptimal: np.ndarray
    arm_delta_min: np.ndarray
    arm_delta_max: np.ndarray
    delta_min: float
    delta_max: float

    def __post_init__(self):
        object.__setattr__(self, "_lookup", {s: j for j, s in enumerate(self.subsets)})

    def is_suboptimal(self, subset):
        return bool(self.suboptimal[self._lookup[tuple(sorted(int(i) for i in subset))]])

    @property
    def suboptimal_subsets(self):
        return [s for s, bad in zip(self.subsets, self.suboptimal) if bad]


def compute_opt_and_gaps(instance, alpha=1.0):
    m, k = instance.m, instance.k
    if m > MAX_GAP_ARMS or math.comb(m, k) > MAX_GAP_SUBSETS:
        raise CapabilityError(f"C({m},{k}) subsets is too many to enumerate")
    subsets = all_subsets(m, k)
    rewards = subset_rewards(instance.shape, instance.means, subsets)
    j = int(np.argmax(rewards))
    opt = float(rewards[j])
    threshold = alpha * opt
    bad = rewards < threshold
    lo = np.full(m, np.nan)
    hi = np.full(m, np.nan)
    for s, r, b in zip(subsets, rewards, bad):
        if not b:
            continue
        gap = threshold - r
        for i in s:
            if not gap >= lo[i]:  # NaN-aware min
                lo[i] = gap
            if not gap <= hi[i]:
                hi[i] = gap
    defined = ~np.isnan(lo)
    dmin = float(lo[defined].min()) if defined.any() else math.nan
    dmax = float(hi[defined].max()) if defined.any() else math.nan
    return GapReport(opt, subsets[j], float(alpha), subsets, rewards, bad, lo, hi, dmin, dmax)


def regret_of_trace(hidden_rewards, opt, alpha=1.0, beta=1.0, horizon=None):
    """T * alpha * beta * OPT minus the summed pre-manipulation rewards; may be negative."""
    r = np.asarray(hidden_rewards, dtype=float)
    T = r.size if horizon is None else horizon
    return T * alpha * beta * opt - float(r.sum())


def regret_curve(hidden_rewards, opt, alpha=1.0, beta=1.0):
    r = np.asarray(hidden_rewards, dtype=float)
    t = np.arange(1, r.size + 1)
    return t * (alpha * beta * opt) - np.cumsum(r)


def theorem1_bound(m, delta_max, delta_min, b_max, horizon, f_inv):
    """Closed-form SCUCB regret ceiling with natural log."""
    if not delta_min > 0:
        raise ValueError("the bound needs a positive minimum gap")
    g = f_inv(delta_min)
    if not g > 0:
        raise ValueError("inverse smoothness at the minimum gap must be positive")
    return m * delta_max * ((8.0 * b_max * g + 6.0 * math.log(horizon)) / g**2
                            + math.pi**2 / 3.0 + 1.0)


def lemma1_monitor(true_means, state, spent, t):
    """Per-arm confidence-event flags and widths at round ``t`` (state from rounds < t).

    Width is sqrt(3 ln t / (2K)) + rho / K with rho the budget actually spent.
    """
    counts = state.counts
    if np.any(counts < 1):
        raise ValueError("every arm needs a pull before the confidence event is defined")
    widths = np.sqrt(3.0 * math.log(t) / (2.0 * counts)) + np.asarray(spent) / counts
    dev = np.abs(state.sums / counts - np.asarray(true_means))
    return dev <= widths, widths


def lemma1_violated(true_means, state, spent, t):
    """Same event as :func:`lemma1_monitor`, evaluated by the kernel used in fused runs."""
    return bool(K.lemma1_violated(state.sums, state.counts, np.asarray(spent, dtype=float),
                                  np.asarray(true_means, dtype=float), float(t)))


def lemma1_series_bound(m, t):
    return min(1.0, 2.0 * m / float(t) ** 2)


def theorem2_budget_check(delta, pulls, eta):
    """(delta - sqrt(2 ln(K^2/eta^2) / K)) * K, floored at 0."""
    if pulls < 1:
        raise ValueError("need at least one pull")
    if not 0 < eta < 1:
        raise ValueError("eta must lie in (0, 1)")
    width = math.sqrt(2.0 * math.log(pulls**2 / eta**2) / pulls)
    return max(0.0, (delta - width) * pulls)


def suboptimal_pull_counters(subsets, report, m=None):
    """Replay the suboptimal-pull counters N_i over rounds 1..T.

    Counters start at 1 after the m initialisation rounds; afterwards a round
    playing a suboptimal subset increments the smallest counter among its arms
    (lowest index on ties).
    """
    m = len(report.arm_delta_min) if m is None else m
    n = np.ones(m, dtype=np.int64)
    for t, s in enumerate(subsets, start=1):
        if t <= m or not report.is_suboptimal(s):
            continue
        members = sorted(int(i) for i in s)
        winner = min(members, key=lambda i: (n[i], i))
        n[winner] += 1
    return n


def suboptimal_rounds(subsets, report, skip=0):
    return sum(1 for t, s in enumerate(subsets, start=1) if t > skip and report.is_suboptimal(s))
