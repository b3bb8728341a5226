"""Config-driven experiment runner: instances, runs, sweeps and result files."""
import csv
import hashlib
import io
import json
import math
import os
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional

import numpy as np
import yaml

from . import _kernels as K
from ._accel import backend_name
from .collusion import CollusionProgram, plan_to_strategy, solve_collusion_bruteforce, variant_strategies
from .env import (DISTRIBUTIONS, FAMILIES, Environment, ManipulationStrategy, ProblemInstance,
                  RoundTrace, raw_reward_table)
from .metrics import (compute_opt_and_gaps, lemma1_series_bound, lemma1_violated, regret_curve,
                      suboptimal_pull_counters)
from .oracle import ORACLE_KINDS, OracleSpec, failing, random_coverage_shape
from .policy import POLICY_KINDS, initialize, make_policy, policy_update
from .rng import arm_streams, stream

OUTPUT_DIR_ENV = "SCUCB_OUTPUT_DIR"
BUDGET_RULES = ("uniform", "fixed", "list")
HARNESS_STRATEGIES = ("none", "lsi", "random", "pb_lsi", "pd_lsi", "pbd_lsi", "collusion_plan")
SWEEP_AXES = ("b_max", "k", "m", "policies", "gamma", "strategy", "horizon")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    m: int = 10
    k: int = 2
    horizon: int = 5000
    b_max: float = 50.0
    budget_rule: str = "uniform"
    budgets: Optional[list] = None
    means: Optional[list] = None
    policies: list = field(default_factory=lambda: ["scucb", "cucb"])
    strategy: str = "lsi"
    oracle: str = "exact_topk"
    oracle_beta: float = 1.0
    gamma: float = 0.2
    learner_b_max: Optional[float] = None
    eta: float = 0.1
    distribution: str = "bernoulli"
    sigma: float = 0.5
    family: str = "linear"
    n_targets: int = 5
    collusion_y_cap: int = 20
    seeds: list = field(default_factory=lambda: list(range(10)))
    stride: Optional[int] = None

    @property
    def replications(self):
        return len(self.seeds)

    @property
    def record_stride(self):
        if self.stride is not None:
            return self.stride
        return 1 if self.horizon <= 10_000 else 10

    @property
    def learner_budget(self):
        return self.b_max if self.learner_b_max is None else self.learner_b_max

    def validate(self):
        if self.m < 1 or not 1 <= self.k <= self.m:
            raise ConfigError(f"need 1 <= k <= m, got m={self.m}, k={self.k}")
        if self.horizon <= self.m:
            raise ConfigError("horizon must exceed the number of arms")
        if self.b_max < 0 or self.learner_budget < 0:
            raise ConfigError("budgets must be nonnegative")
        if self.budget_rule not in BUDGET_RULES:
            raise ConfigError(f"budget_rule must be one of {BUDGET_RULES}")
        if self.budget_rule == "list" and (self.budgets is None or len(self.budgets) != self.m):
            raise ConfigError("budget_rule 'list' needs one budget per arm")
        if self.means is not None and len(self.means) != self.m:
            raise ConfigError("means must have one entry per arm")
        if not self.policies:
            raise ConfigError("at least one policy is required")
        for p in self.policies:
            if p not in POLICY_KINDS:
                raise ConfigError(f"unknown policy {p!r}; choose from {POLICY_KINDS}")
        if self.strategy not in HARNESS_STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        if self.oracle not in ORACLE_KINDS or self.oracle == "failing_wrapper":
            raise ConfigError("oracle must be exact_topk or greedy_coverage (use oracle_beta to inject failures)")
        if self.oracle == "greedy_coverage" and self.family != "coverage":
            raise ConfigError("greedy_coverage needs family 'coverage'")
        if not 0 < self.oracle_beta <= 1:
            raise ConfigError("oracle_beta must lie in (0, 1]")
        if not 0 <= self.gamma <= 1:
            raise ConfigError("gamma must lie in [0, 1]")
        if self.distribution not in DISTRIBUTIONS or self.family not in FAMILIES:
            raise ConfigError("unknown distribution or reward family")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if self.record_stride < 1:
            raise ConfigError("stride must be positive")
        return self

    def oracle_spec(self):
        spec = OracleSpec(self.oracle)
        return failing(spec, self.oracle_beta) if self.oracle_beta < 1 else spec

    def to_dict(self):
        return asdict(self)

    def config_hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    @classmethod
    def from_mapping(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


def load_config(path, overrides=None):
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping at the top level")
    data.update(overrides or {})
    return ExperimentConfig.from_mapping(data).validate()


# instance and strategies

def build_instance(config, seed):
    rng = stream(seed, "instance")
    m = config.m
    means = np.asarray(config.means, dtype=float) if config.means is not None else rng.random(m)
    weights = probs = None
    if config.family == "coverage":
        shape = random_coverage_shape(m, config.k, config.n_targets, rng)
        weights, probs = shape.weights, shape.probs
    if config.budget_rule == "uniform":
        budgets = rng.uniform(0.0, config.b_max, size=m)
    elif config.budget_rule == "fixed":
        budgets = np.full(m, float(config.b_max))
    else:
        budgets = np.asarray(config.budgets, dtype=float)
    inst = ProblemInstance(means, budgets, config.k, config.family, weights, probs,
                           config.distribution, config.sigma)
    return inst.zero_optimal_budgets()


def build_strategies(config, instance):
    kind = config.strategy
    m = instance.m
    if kind in ("pb_lsi", "pd_lsi", "pbd_lsi"):
        return variant_strategies(kind[:-4], instance.budgets, instance.gaps_to_optimal(), m)
    if kind == "collusion_plan":
        program = CollusionProgram(instance.budgets, instance.gaps_to_optimal(), horizon=config.horizon)
        return plan_to_strategy(program, solve_collusion_bruteforce(program, config.collusion_y_cap))
    return [ManipulationStrategy(kind if b > 0 else "none") for b in instance.budgets]


# single runs

@dataclass(eq=False)
class RunResult:
    policy: str
    seed: int
    instance: ProblemInstance
    opt: float
    alpha: float
    beta: float
    subsets: np.ndarray
    raw: np.ndarray
    manipulation: np.ndarray
    hidden: np.ndarray
    lemma1_violated: np.ndarray
    counts: np.ndarray
    sums: np.ndarray
    spent: np.ndarray
    oracle_failed: np.ndarray
    engine: str

    @property
    def horizon(self):
        return self.hidden.size

    @property
    def regret(self):
        return regret_curve(self.hidden, self.opt, self.alpha, self.beta)

    @property
    def cumulative_reward(self):
        return np.cumsum(self.hidden)

    @property
    def final_regret(self):
        return float(self.regret[-1])

    def round_traces(self):
        for t in range(self.horizon):
            yield RoundTrace(t + 1, tuple(int(i) for i in self.subsets[t]),
                             tuple(float(x) for x in self.raw[t]),
                             tuple(float(z) for z in self.manipulation[t]), float(self.hidden[t]))

    def pull_counters(self):
        report = compute_opt_and_gaps(self.instance, self.alpha)
        return suboptimal_pull_counters(self.subsets, report, self.instance.m)


def _fused_supported(config, policy):
    return (policy in ("scucb", "cucb", "eta_ucb") and config.oracle == "exact_topk"
            and config.oracle_beta == 1.0 and config.family == "linear")


def _strategy_arrays(strategies, horizon):
    m = len(strategies)
    kinds = np.array([s.code for s in strategies], dtype=np.int64)
    init = np.array([s.init_amount for s in strategies], dtype=float)
    release = np.array([s.release_round for s in strategies], dtype=np.int64)
    width = max(1, max(len(s.plan) for s in strategies))
    plans = np.zeros((m, width))
    plan_lens = np.zeros(m, dtype=np.int64)
    for i, s in enumerate(strategies):
        plans[i, : len(s.plan)] = s.plan
        plan_lens[i] = len(s.plan)
    return kinds, init, release, plans, plan_lens


def _run_fused(config, seed, policy, instance, strategies):
    T, m = config.horizon, instance.m
    raw = np.stack([raw_reward_table(instance, i, rng, T)
                    for i, rng in enumerate(arm_streams(seed, "reward", m))])
    strat_u = np.stack([rng.random(T) for rng in arm_streams(seed, "strategy", m)])
    kinds, init, release, plans, plan_lens = _strategy_arrays(strategies, T)
    index_kind = K.INDEX_ETA_UCB if policy == "eta_ucb" else K.INDEX_SCUCB
    bmax = config.learner_budget if policy == "scucb" else 0.0
    subsets, xs, zs, hidden, violated, counts, sums, spent = K.simulate_index_policy(
        instance.means, config.k, T, index_kind, float(bmax), float(config.gamma), float(config.eta),
        raw, instance.budgets, kinds, init, release, plans, plan_lens, strat_u)
    return subsets, xs, zs, hidden, violated, counts, sums, spent, np.zeros(T, dtype=bool)


def _run_objects(config, seed, policy_kind, instance, strategies):
    T, m, k = config.horizon, instance.m, instance.k
    env = Environment(instance, strategies, arm_streams(seed, "reward", m),
                      arm_streams(seed, "strategy", m))
    policy = make_policy(policy_kind, instance.shape, config.oracle_spec(), gamma=config.gamma,
                         b_max=config.learner_budget, horizon=T, eta=config.eta)
    policy_rng = stream(seed, "policy")
    oracle_rng = stream(seed, "oracle")
    subsets = np.empty((T, k), dtype=np.int64)
    xs = np.empty((T, k))
    zs = np.empty((T, k))
    hidden = np.empty(T)
    violated = np.zeros(T, dtype=bool)
    failed = np.zeros(T, dtype=bool)

    def play(subset, t):
        tr = env.step(subset, t)
        subsets[t - 1] = tr.subset
        xs[t - 1] = tr.raw
        zs[t - 1] = tr.manipulation
        hidden[t - 1] = tr.hidden_reward
        return tr.observed

    initialize(policy, play, policy_rng)
    for t in range(m + 1, T + 1):
        violated[t - 1] = lemma1_violated(instance.means, policy.state, env.ledger.spent, t)
        subset = policy.select(t, policy_rng, oracle_rng)
        failed[t - 1] = policy.last_oracle_failed
        observed = play(subset, t)
        policy_update(policy, subset, observed, t, policy_rng)
    st = policy.state
    return subsets, xs, zs, hidden, violated, st.counts.copy(), st.sums.copy(), env.ledger.spent.copy(), failed


def run_single(config, seed, policy=None, engine="auto"):
    """One replication of one policy; deterministic in (config, seed)."""
    config.validate()
    policy = policy or config.policies[0]
    if policy not in POLICY_KINDS:
        raise ConfigError(f"unknown policy {policy!r}")
    instance = build_instance(config, seed)
    strategies = build_strategies(config, instance)
    spec = config.oracle_spec()
    if engine == "auto":
        engine = "fused" if _fused_supported(config, policy) else "objects"
    if engine == "fused":
        if not _fused_supported(config, policy):
            raise ConfigError(f"fused engine does not cover policy={policy}, oracle={config.oracle}")
        out = _run_fused(config, seed, policy, instance, strategies)
    elif engine == "objects":
        out = _run_objects(config, seed, policy, instance, strategies)
    else:
        raise ConfigError(f"unknown engine {engine!r}")
    opt = compute_opt_and_gaps(instance, spec.alpha).opt if instance.family == "coverage" \
        else float(np.sort(instance.means)[::-1][: instance.k].sum())
    return RunResult(policy, int(seed), instance, opt, spec.alpha, spec.beta, *out, engine=engine)


# sweeps and summaries

@dataclass(eq=False)
class RunSummary:
    policy: str
    cell: str
    seeds: list
    final_regret: list
    final_reward: list
    regret_curves: np.ndarray  # (n_seeds, T)
    reward_curves: np.ndarray
    lemma1_rate: np.ndarray  # (T,) fraction of seeds violating the confidence event
    config_hash: str

    @property
    def final_regret_mean(self):
        return float(np.mean(self.final_regret))

    @property
    def final_regret_std(self):
        return float(np.std(self.final_regret))

    @property
    def final_reward_mean(self):
        return float(np.mean(self.final_reward))

    @property
    def final_reward_std(self):
        return float(np.std(self.final_reward))

    @property
    def mean_curve(self):
        return self.regret_curves.mean(axis=0)


def _cell_label(axis, value):
    if axis is None:
        return "base"
    if isinstance(value, (list, tuple)):
        value = "+".join(str(v) for v in value)
    return f"{axis}={value}"


def _run_task(args):
    config, seed, policy = args
    r = run_single(config, seed, policy)
    return r.regret, r.cumulative_reward, r.lemma1_violated


def _summaries(config, label, workers):
    tasks = [(config, s, p) for p in config.policies for s in config.seeds]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_run_task, tasks))
    else:
        results = [_run_task(t) for t in tasks]
    out = []
    n = len(config.seeds)
    for j, p in enumerate(config.policies):
        chunk = results[j * n:(j + 1) * n]
        regrets = np.stack([c[0] for c in chunk])
        rewards = np.stack([c[1] for c in chunk])
        viol = np.stack([c[2] for c in chunk]).mean(axis=0)
        out.append(RunSummary(p, label, list(config.seeds), [float(r[-1]) for r in regrets],
                              [float(r[-1]) for r in rewards], regrets, rewards, viol,
                              config.config_hash()))
    return out


def run_experiment(config, workers=1):
    config.validate()
    return _summaries(config, _cell_label(None, None), workers)


def run_sweep(config, axis=None, values=None, workers=1):
    """Cross product of ``values`` along ``axis`` with every configured policy.

    All cells share the seed list, so each (cell, seed) sees the same
    environment streams and comparisons across policies are paired.
    """
    config.validate()
    if axis is None:
        return run_experiment(config, workers)
    if axis not in SWEEP_AXES:
        raise ConfigError(f"cannot sweep over {axis!r}; choose from {SWEEP_AXES}")
    out = []
    for v in values:
        if axis == "policies":
            cell = replace(config, policies=[v] if isinstance(v, str) else list(v))
        else:
            cell = replace(config, **{axis: v})
        out.extend(_summaries(cell.validate(), _cell_label(axis, v), workers))
    return out


# confidence-event and budget studies

def lemma1_study(m=5, horizon=10_000, seeds=range(50), checkpoints=(100, 1000, 10_000), k=2,
                 gamma=1.0):
    """Empirical P(not E_t) without manipulation against min(1, 2m/t^2) + 3 sigma."""
    config = ExperimentConfig(m=m, k=k, horizon=horizon, b_max=0.0, budget_rule="fixed",
                              policies=["scucb"], strategy="none", gamma=gamma,
                              seeds=list(seeds)).validate()
    viol = np.stack([run_single(config, s).lemma1_violated for s in config.seeds])
    n = viol.shape[0]
    rows = []
    for t in checkpoints:
        bound = lemma1_series_bound(m, t)
        sigma = math.sqrt(bound * (1.0 - bound) / n)
        freq = float(viol[:, t - 1].mean())
        rows.append({"t": int(t), "frequency": freq, "bound": bound,
                     "tolerance": 3.0 * sigma, "ok": freq <= bound + 3.0 * sigma})
    return rows


def pull_count_study(budgets=(0.0, 500.0, 2000.0), delta=0.3, best_mean=0.8, eta=0.1,
                     horizon=20_000, seeds=range(50)):
    """Two-arm eta-UCB with one LSI arm; returns {budget: pull counts per seed}."""
    out = {}
    for b in budgets:
        config = ExperimentConfig(m=2, k=1, horizon=horizon, means=[best_mean, best_mean - delta],
                                  budget_rule="list", budgets=[0.0, float(b)], b_max=float(b),
                                  policies=["eta_ucb"], strategy="lsi", eta=eta,
                                  seeds=list(seeds)).validate()
        out[float(b)] = [int(run_single(config, s).counts[1]) for s in config.seeds]
    return out


# output

def fingerprint():
    import numba
    return {"python": platform.python_version(), "numpy": np.__version__,
            "numba": numba.__version__, "backend": backend_name(), "platform": platform.platform()}


def default_output_dir():
    return os.environ.get(OUTPUT_DIR_ENV, "results")


def csv_text(summaries, stride=1):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["policy", "cell", "seed", "t", "cum_regret", "cum_reward"])
    for s in summaries:
        T = s.regret_curves.shape[1]
        for j, seed in enumerate(s.seeds):
            for t in range(stride, T + 1, stride):
                w.writerow([s.policy, s.cell, seed, t, repr(float(s.regret_curves[j, t - 1])),
                            repr(float(s.reward_curves[j, t - 1]))])
    return buf.getvalue()


def summary_json(summaries, config):
    return {
        "config": config.to_dict(),
        "config_hash": config.config_hash(),
        "environment": fingerprint(),
        "cells": [{
            "policy": s.policy,
            "cell": s.cell,
            "seeds": list(s.seeds),
            "final_regret": list(s.final_regret),
            "final_reward": list(s.final_reward),
            "final_regret_mean": s.final_regret_mean,
            "final_regret_std": s.final_regret_std,
            "final_reward_mean": s.final_reward_mean,
            "final_reward_std": s.final_reward_std,
            "mean_regret_curve": [float(v) for v in s.mean_curve],
            "lemma1_violation_rate": [float(v) for v in s.lemma1_rate],
            "config_hash": s.config_hash,
        } for s in summaries],
    }


def emit_results(summaries, config, fmt, path, stride=None):
    """Write ``csv`` (one row per recorded round) or ``json`` (per-cell summary)."""
    stride = config.record_stride if stride is None else stride
    if fmt == "csv":
        text = csv_text(summaries, stride)
    elif fmt == "json":
        text = json.dumps(summary_json(summaries, config), indent=1)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(text)
    return path


def load_summary_json(path):
    with open(path) as fh:
        return json.load(fh)
