"""Hot loops shared by the object API and the fused simulation path.

Every function here is valid both as numba nopython code and as plain
Python; see :mod:`scucb._accel` for the switch. Keep them scalar-loop style
so both backends perform the same floating point operations in the same
order.
"""
import math

import numpy as np

from ._accel import njit

# manipulation strategy codes understood by the fused loop
STRAT_NONE = 0
STRAT_LSI = 1
STRAT_RANDOM = 2
STRAT_TIMED = 3
STRAT_PLAN = 4

# learner index codes
INDEX_SCUCB = 0
INDEX_ETA_UCB = 1


@njit
def ucb_indices(sums, counts, t, bmax, gamma, out):
    log_t = math.log(t)
    for i in range(sums.shape[0]):
        k = counts[i]
        out[i] = sums[i] / k + gamma * math.sqrt(3.0 * log_t / (2.0 * k)) + bmax / k
    return out


@njit
def eta_ucb_indices(sums, counts, eta, out):
    for i in range(sums.shape[0]):
        k = counts[i]
        out[i] = sums[i] / k + math.sqrt(2.0 * math.log(k * k / (eta * eta)) / k)
    return out


@njit
def top_k(values, k, out):
    """Indices of the k largest values, ties to the lower index, sorted ascending."""
    m = values.shape[0]
    taken = np.zeros(m, dtype=np.bool_)
    for j in range(k):
        best = -1
        for i in range(m):
            if taken[i]:
                continue
            if best < 0 or values[i] > values[best]:
                best = i
        taken[best] = True
    n = 0
    for i in range(m):
        if taken[i]:
            out[n] = i
            n += 1
    return out


@njit
def coverage_value(mu, weights, probs, subset):
    total = 0.0
    for j in range(weights.shape[0]):
        miss = 1.0
        for s in range(subset.shape[0]):
            i = subset[s]
            miss *= 1.0 - mu[i] * probs[i, j]
        total += weights[j] * (1.0 - miss)
    return total


@njit
def greedy_coverage(est, weights, probs, k, out):
    """Standard greedy on the coverage objective; estimates are clipped to [0, 1]."""
    m = est.shape[0]
    n_targets = weights.shape[0]
    mu = np.empty(m)
    for i in range(m):
        mu[i] = min(max(est[i], 0.0), 1.0)
    miss = np.ones(n_targets)
    taken = np.zeros(m, dtype=np.bool_)
    for _ in range(k):
        best = -1
        best_gain = 0.0
        for i in range(m):
            if taken[i]:
                continue
            gain = 0.0
            for j in range(n_targets):
                gain += weights[j] * miss[j] * mu[i] * probs[i, j]
            if best < 0 or gain > best_gain:
                best = i
                best_gain = gain
        taken[best] = True
        for j in range(n_targets):
            miss[j] *= 1.0 - mu[best] * probs[best, j]
    n = 0
    for i in range(m):
        if taken[i]:
            out[n] = i
            n += 1
    return out


@njit
def init_subset(t, m, k, out):
    """Round t (1-indexed, t <= m): arm t-1 plus the lowest-indexed other arms."""
    own = t - 1
    taken = np.zeros(m, dtype=np.bool_)
    taken[own] = True
    need = k - 1
    for i in range(m):
        if need == 0:
            break
        if not taken[i]:
            taken[i] = True
            need -= 1
    n = 0
    for i in range(m):
        if taken[i]:
            out[n] = i
            n += 1
    return out


@njit
def manipulation_amount(kind, n_prev, t, remaining, init_amount, release_round,
                        plan_row, plan_len, u):
    """Requested spend before clamping; ``u`` is the arm's strategy uniform for this pull."""
    if kind == STRAT_LSI:
        return remaining if n_prev == 0 else 0.0
    if kind == STRAT_RANDOM:
        return u
    if kind == STRAT_TIMED:
        if n_prev == 0:
            return init_amount
        if t >= release_round:
            return remaining
        return 0.0
    if kind == STRAT_PLAN:
        if n_prev < plan_len:
            return plan_row[n_prev]
        return 0.0
    return 0.0


@njit
def clamp_spend(request, spent, budget):
    remaining = budget - spent
    if remaining < 0.0:
        remaining = 0.0
    z = min(max(request, 0.0), remaining)
    return z, min(spent + z, budget)


@njit
def lemma1_violated(sums, counts, spent, mu, t):
    log_t = math.log(t)
    for i in range(mu.shape[0]):
        k = counts[i]
        width = math.sqrt(3.0 * log_t / (2.0 * k)) + spent[i] / k
        if abs(sums[i] / k - mu[i]) > width:
            return True
    return False


@njit
def simulate_index_policy(mu, k, horizon, index_kind, bmax, gamma, eta, raw,
                          budgets, kinds, init_amounts, release_rounds,
                          plans, plan_lens, strat_u):
    """Full run of an index learner with the exact top-k oracle on the linear family.

    ``raw[i, j]`` is arm i's raw reward on its j-th pull and ``strat_u[i, j]``
    the matching strategy uniform. Returns per-round subsets, raw draws,
    manipulations, hidden expected rewards and Lemma-1 violation flags, plus
    the final counters.
    """
    m = mu.shape[0]
    subsets = np.empty((horizon, k), dtype=np.int64)
    xs = np.empty((horizon, k))
    zs = np.empty((horizon, k))
    hidden = np.empty(horizon)
    violated = np.zeros(horizon, dtype=np.bool_)
    counts = np.zeros(m)
    sums = np.zeros(m)
    spent = np.zeros(m)
    pulls = np.zeros(m, dtype=np.int64)
    index = np.empty(m)
    chosen = np.empty(k, dtype=np.int64)
    for t in range(1, horizon + 1):
        if t <= m:
            init_subset(t, m, k, chosen)
        else:
            violated[t - 1] = lemma1_violated(sums, counts, spent, mu, t)
            if index_kind == INDEX_ETA_UCB:
                eta_ucb_indices(sums, counts, eta, index)
            else:
                ucb_indices(sums, counts, t, bmax, gamma, index)
            top_k(index, k, chosen)
        r = 0.0
        for s in range(k):
            i = chosen[s]
            n_prev = pulls[i]
            x = raw[i, n_prev]
            request = manipulation_amount(
                kinds[i], n_prev, t, budgets[i] - spent[i], init_amounts[i],
                release_rounds[i], plans[i], plan_lens[i], strat_u[i, n_prev])
            z, spent[i] = clamp_spend(request, spent[i], budgets[i])
            pulls[i] = n_prev + 1
            counts[i] += 1.0
            sums[i] += x + z
            subsets[t - 1, s] = i
            xs[t - 1, s] = x
            zs[t - 1, s] = z
            r += mu[i]
        hidden[t - 1] = r
    return subsets, xs, zs, hidden, violated, counts, sums, spent


@njit
def collusion_grid_search(order, budgets, deltas, weights, y_cap, best_y):
    """Best feasible Y for one fixed permutation by exhaustive grid scan.

    Deadlines are set to the prefix sums of Y along ``order``; the constraint
    slack B/Y + sqrt(3 ln t)(1/sqrt(Y) - 1) is nonincreasing in t for Y >= 1,
    so the smallest admissible deadline is always the best one. Y = 0 is
    always feasible. Returns the objective; ``best_y`` receives the argmax
    (first in lexicographic order on ties).
    """
    m = order.shape[0]
    y = np.zeros(m, dtype=np.int64)
    best = -1.0
    found = False
    while True:
        ok = True
        prefix = 0
        for j in range(m):
            i = order[j]
            prefix += y[i]
            yi = y[i]
            if yi == 0:
                continue
            root = math.sqrt(3.0 * math.log(prefix))
            lhs = budgets[i] / yi + root / math.sqrt(yi)
            if lhs < deltas[i] + root:
                ok = False
                break
        if ok:
            obj = 0.0
            for i in range(m):
                obj += weights[i] * y[i]
            if not found or obj > best:
                best = obj
                found = True
                for i in range(m):
                    best_y[i] = y[i]
        # mixed-radix increment, last position fastest
        pos = m - 1
        while pos >= 0:
            y[pos] += 1
            if y[pos] <= y_cap:
                break
            y[pos] = 0
            pos -= 1
        if pos < 0:
            break
    return best
