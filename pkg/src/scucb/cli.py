"""Command line entry point: ``scucb <subcommand> ...``."""
import argparse
import json
import math
import os
import sys

import numpy as np
import yaml

from .collusion import CollusionProgram, solve_collusion_bruteforce
from .env import ProblemInstance, smoothness
from .harness import (ConfigError, ExperimentConfig, default_output_dir, emit_results, lemma1_study,
                      load_config, run_experiment, run_sweep)
from .metrics import compute_opt_and_gaps, theorem1_bound, theorem2_budget_check


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text):
    return [int(v) for v in text.split(",") if v.strip()]


def _seeds(text):
    # "10" means seeds 0..9, "3,5,8" is an explicit list
    vals = _ints(text)
    return list(range(vals[0])) if len(vals) == 1 and "," not in text else vals


_FLAG_FIELDS = {
    "m": ("m", int),
    "k": ("k", int),
    "horizon": ("horizon", int),
    "b_max": ("b_max", float),
    "gamma": ("gamma", float),
    "strategy": ("strategy", str),
    "policies": ("policies", lambda s: [p for p in s.split(",") if p]),
    "seeds": ("seeds", _seeds),
    "budget_rule": ("budget_rule", str),
    "stride": ("stride", int),
}


def _add_config_args(p):
    p.add_argument("--config", help="YAML file with ExperimentConfig fields")
    p.add_argument("--m", dest="m")
    p.add_argument("--k", dest="k")
    p.add_argument("--horizon", "-T", dest="horizon")
    p.add_argument("--b-max", dest="b_max")
    p.add_argument("--gamma", dest="gamma")
    p.add_argument("--strategy", dest="strategy")
    p.add_argument("--policies", dest="policies", help="comma separated, e.g. scucb,cucb")
    p.add_argument("--seeds", dest="seeds", help="a count N (seeds 0..N-1) or a comma list")
    p.add_argument("--budget-rule", dest="budget_rule")
    p.add_argument("--stride", dest="stride")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config field; VALUE is parsed as YAML")
    p.add_argument("--out", help="output directory (default: $SCUCB_OUTPUT_DIR, else ./results)")
    p.add_argument("--format", default="csv,json", help="csv, json or both")
    p.add_argument("--workers", type=int, default=1)


def _config_from_args(args):
    overrides = {}
    for name, (key, conv) in _FLAG_FIELDS.items():
        raw = getattr(args, name, None)
        if raw is not None:
            overrides[key] = conv(raw)
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = yaml.safe_load(value)
    if args.config:
        return load_config(args.config, overrides)
    return ExperimentConfig.from_mapping(overrides).validate()


def _write(summaries, config, args, stem):
    out_dir = args.out or default_output_dir()
    written = []
    for fmt in [f.strip() for f in args.format.split(",") if f.strip()]:
        path = os.path.join(out_dir, f"{stem}.{fmt}")
        written.append(emit_results(summaries, config, fmt, path))
    return written


def _print_table(summaries):
    for s in summaries:
        print(f"{s.cell:>16}  {s.policy:>7}  regret {s.final_regret_mean:10.3f} "
              f"+- {s.final_regret_std:8.3f}  reward {s.final_reward_mean:10.3f}")


def cmd_run(args):
    config = _config_from_args(args)
    summaries = run_experiment(config, workers=args.workers)
    _print_table(summaries)
    for path in _write(summaries, config, args, f"run_{config.config_hash()}"):
        print(f"wrote {path}")


def cmd_sweep(args):
    config = _config_from_args(args)
    if args.axis == "policies":
        values = [v for v in args.values.split(",") if v]
    elif args.axis in ("k", "m", "horizon"):
        values = _ints(args.values)
    elif args.axis == "strategy":
        values = args.values.split(",")
    else:
        values = _floats(args.values)
    summaries = run_sweep(config, args.axis, values, workers=args.workers)
    _print_table(summaries)
    for path in _write(summaries, config, args, f"sweep_{args.axis}_{config.config_hash()}"):
        print(f"wrote {path}")


def _json_num(x):
    return None if isinstance(x, float) and math.isnan(x) else x


def cmd_gaps(args):
    if args.means:
        means = _floats(args.means)
        inst = ProblemInstance(means, np.zeros(len(means)), int(args.k or 1))
    else:
        from .harness import build_instance
        config = _config_from_args(args)
        inst = build_instance(config, args.seed)
    rep = compute_opt_and_gaps(inst, args.alpha)
    print(json.dumps({
        "opt": rep.opt,
        "opt_subset": list(rep.opt_subset),
        "alpha": rep.alpha,
        "delta_min": _json_num(rep.delta_min),
        "delta_max": _json_num(rep.delta_max),
        "arm_delta_min": [_json_num(float(v)) for v in rep.arm_delta_min],
        "arm_delta_max": [_json_num(float(v)) for v in rep.arm_delta_max],
        "n_suboptimal_subsets": int(rep.suboptimal.sum()),
        "means": [float(v) for v in inst.means],
        "budgets": [float(v) for v in inst.budgets],
    }, indent=1))


def cmd_verify_lemma1(args):
    rows = lemma1_study(m=args.m, horizon=args.horizon, seeds=range(args.seeds),
                        checkpoints=_ints(args.checkpoints), k=args.k, gamma=args.gamma)
    print(json.dumps(rows, indent=1))
    if not all(r["ok"] for r in rows):
        return 1


def cmd_bound(args):
    if args.which == "theorem1":
        if args.family_constant is not None:
            c = args.family_constant
            f_inv = lambda d: d / c  # noqa: E731
        else:
            f_inv = smoothness(ProblemInstance(np.zeros(args.m), np.zeros(args.m), args.k).shape)[1]
        value = theorem1_bound(args.m, args.delta_max, args.delta_min, args.b_max, args.horizon, f_inv)
    else:
        value = theorem2_budget_check(args.delta, args.pulls, args.eta)
    print(json.dumps({"bound": args.which, "value": value}))


def cmd_collude(args):
    program = CollusionProgram(_floats(args.budgets), _floats(args.deltas),
                               unit_weights=args.unit_weights)
    sol = solve_collusion_bruteforce(program, args.y_cap)
    print(json.dumps(sol.as_dict(), indent=1))


def build_parser():
    parser = argparse.ArgumentParser(prog="scucb", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run every configured policy over the seeds")
    _add_config_args(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="sweep one config axis")
    _add_config_args(p)
    p.add_argument("--axis", required=True)
    p.add_argument("--values", required=True, help="comma separated axis values")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gaps", help="print OPT, S* and suboptimality gaps")
    _add_config_args(p)
    p.add_argument("--means", help="comma separated means (otherwise generated from the config)")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gaps)

    p = sub.add_parser("verify-lemma1", help="confidence-event violation study without manipulation")
    p.add_argument("--m", type=int, default=5)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--horizon", type=int, default=10_000)
    p.add_argument("--seeds", type=int, default=50)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--checkpoints", default="100,1000,10000")
    p.set_defaults(func=cmd_verify_lemma1)

    p = sub.add_parser("bound", help="evaluate the regret bound or the minimum-budget bound")
    bsub = p.add_subparsers(dest="which", required=True)
    b1 = bsub.add_parser("theorem1")
    b1.add_argument("--m", type=int, required=True)
    b1.add_argument("--k", type=int, default=1, help="action size, sets f(x) = k x for linear rewards")
    b1.add_argument("--family-constant", type=float, help="use f(x) = c x instead")
    b1.add_argument("--delta-max", type=float, required=True)
    b1.add_argument("--delta-min", type=float, required=True)
    b1.add_argument("--b-max", type=float, required=True)
    b1.add_argument("--horizon", type=int, required=True)
    b2 = bsub.add_parser("theorem2")
    b2.add_argument("--delta", type=float, required=True)
    b2.add_argument("--pulls", type=int, required=True)
    b2.add_argument("--eta", type=float, default=0.1)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("collude", help="solve the collusion program by brute force")
    p.add_argument("--budgets", required=True)
    p.add_argument("--deltas", required=True)
    p.add_argument("--y-cap", type=int, default=20)
    p.add_argument("--unit-weights", action="store_true")
    p.set_defaults(func=cmd_collude)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        rc = args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return rc or 0


if __name__ == "__main__":
    sys.exit(main())
