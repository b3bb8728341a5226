"""Coordinated manipulation: the small collusion program and LSI spend orders."""
import math
from dataclasses import dataclass
from itertools import permutations
from typing import Optional

import numpy as np

from . import _kernels as K
from .env import ManipulationStrategy
from .oracle import CapabilityError

MAX_COLLUSION_ARMS = 6
MAX_GRID_POINTS = 50_000_000
VARIANTS = ("pb", "pd", "pbd")


@dataclass(frozen=True, eq=False)
class CollusionProgram:
    """maximise sum_i w_i Y_i subject to, for some order i_1..i_m,

        B_i / Y_i + sqrt(3 ln t_i / Y_i) >= delta_i + sqrt(3 ln t_i)
        t_{i_j} >= Y_{i_1} + ... + Y_{i_j}

    with w = delta (regret objective) or w = 1 (pull-count objective).
    """
    budgets: np.ndarray
    deltas: np.ndarray
    unit_weights: bool = False
    horizon: Optional[int] = None

    def __post_init__(self):
        b = np.asarray(self.budgets, dtype=float)
        d = np.asarray(self.deltas, dtype=float)
        if b.shape != d.shape or b.ndim != 1:
            raise ValueError("budgets and deltas must be vectors of equal length")
        object.__setattr__(self, "budgets", b)
        object.__setattr__(self, "deltas", d)

    @property
    def m(self):
        return self.budgets.size

    @property
    def weights(self):
        return np.ones(self.m) if self.unit_weights else self.deltas


@dataclass(frozen=True)
class CollusionSolution:
    order: tuple
    pulls: tuple
    deadlines: tuple
    objective: float

    def as_dict(self):
        return {"order": list(self.order), "pulls": list(self.pulls),
                "deadlines": list(self.deadlines), "objective": self.objective}


def deadlines_for(order, pulls):
    """Smallest admissible deadlines: prefix sums of the pulls along ``order``."""
    t = [0] * len(pulls)
    total = 0
    for i in order:
        total += pulls[i]
        t[i] = total
    return tuple(t)


def constraint_slack(budget, delta, pulls, deadline):
    if pulls == 0:
        return math.inf
    root = math.sqrt(3.0 * math.log(deadline))
    return budget / pulls + root / math.sqrt(pulls) - (delta + root)


def is_feasible(program, solution, tol=1e-9):
    if sorted(solution.order) != list(range(program.m)):
        return False
    prefix = 0
    for i in solution.order:
        prefix += solution.pulls[i]
        y = solution.pulls[i]
        if y < 0 or (y > 0 and solution.deadlines[i] < prefix):
            return False
        if y > 0 and constraint_slack(program.budgets[i], program.deltas[i], y,
                                      solution.deadlines[i]) < -tol:
            return False
    return True


def solve_collusion_bruteforce(program, y_cap):
    """Exact maximiser over permutations x {0..y_cap}^m.

    Ties go to the lexicographically smallest (permutation, Y).
    """
    m = program.m
    if m > MAX_COLLUSION_ARMS:
        raise CapabilityError(f"m={m} arms exceeds the brute-force limit {MAX_COLLUSION_ARMS}")
    if math.factorial(m) * (y_cap + 1) ** m > MAX_GRID_POINTS:
        raise CapabilityError(f"search space m!*(Y_cap+1)^m too large for Y_cap={y_cap}")
    best = None
    y = np.zeros(m, dtype=np.int64)
    for order in permutations(range(m)):
        obj = K.collusion_grid_search(np.asarray(order, dtype=np.int64), program.budgets,
                                      program.deltas, program.weights, int(y_cap), y)
        if best is None or obj > best[0]:
            best = (obj, order, tuple(int(v) for v in y))
    obj, order, pulls = best
    return CollusionSolution(tuple(order), pulls, deadlines_for(order, pulls), float(obj))


def plan_to_strategy(program, solution):
    """Per-arm strategies paying B_i evenly over the first Y_i pulls.

    An even spread keeps the manipulated mean near mu_i + B_i / Y_i, which
    the program's constraint says is enough to stay competitive for Y_i pulls.
    """
    if not is_feasible(program, solution):
        raise ValueError("collusion solution violates the program's constraints")
    out = []
    for i in range(program.m):
        y = solution.pulls[i]
        b = float(program.budgets[i])
        if y == 0 or b == 0.0:
            out.append(ManipulationStrategy("none"))
        else:
            out.append(ManipulationStrategy("collusion_plan", plan=(b / y,) * y))
    return out


def variant_order(kind, budgets, deltas):
    budgets = np.asarray(budgets, dtype=float)
    deltas = np.asarray(deltas, dtype=float)
    if kind == "pb":
        key = -budgets
    elif kind == "pd":
        key = deltas
    elif kind == "pbd":
        key = budgets - deltas
    else:
        raise ValueError(f"unknown LSI variant {kind!r}; choose from {VARIANTS}")
    return tuple(int(i) for i in np.argsort(key, kind="stable"))


def lsi_variant_plan(kind, budgets, deltas, m, k=1):
    """(arm, round, amount) spends for PB-, PD- or PBD-LSI.

    Each arm pays min(delta_i, B_i) on its first initialisation pull and the
    rest at round m + j, j being its 1-based place in the variant's order.
    Arms 0..k-1 are first pulled in round 1, arm i >= k in round i + 1.
    """
    budgets = np.asarray(budgets, dtype=float)
    deltas = np.asarray(deltas, dtype=float)
    plan = []
    for j, i in enumerate(variant_order(kind, budgets, deltas), start=1):
        first = min(float(deltas[i]), float(budgets[i]))
        rest = float(budgets[i]) - first
        if first > 0:
            plan.append((i, 1 if i < k else i + 1, first))
        if rest > 0:
            plan.append((i, m + j, rest))
    return sorted(plan, key=lambda r: (r[1], r[0]))


def variant_strategies(kind, budgets, deltas, m):
    order = variant_order(kind, budgets, deltas)
    release = {i: m + j for j, i in enumerate(order, start=1)}
    return [ManipulationStrategy(f"{kind}_lsi", init_amount=min(float(deltas[i]), float(budgets[i])),
                                 release_round=release[i])
            for i in range(len(order))]
