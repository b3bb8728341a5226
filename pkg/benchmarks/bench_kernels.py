"""Numba backend against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--horizon 5000] [--repeat 3]

Each backend runs in its own interpreter because the choice is made at import
time from SCUCB_DISABLE_NUMBA. Compilation is excluded by a warm-up call, and
the final regrets of both backends are checked for equality.
"""
import argparse
import json
import os
import subprocess
import sys
import time


def child(horizon, m, k, y_cap, repeat):
    from scucb._accel import backend_name
    from scucb.collusion import CollusionProgram, solve_collusion_bruteforce
    from scucb.harness import ExperimentConfig, run_single

    cfg = ExperimentConfig(m=m, k=k, horizon=horizon, b_max=50.0, strategy="lsi", seeds=[0])
    prog = CollusionProgram([30.0, 12.0, 5.0], [0.3, 0.2, 0.1])
    cases = {
        "scucb run (fused)": lambda: run_single(cfg, 0, "scucb").final_regret,
        "collusion solve m=3": lambda: solve_collusion_bruteforce(prog, y_cap).objective,
    }
    out = {"backend": backend_name(), "cases": {}}
    for name, fn in cases.items():
        value = fn()  # warm-up / compile
        best = float("inf")
        for _ in range(repeat):
            t0 = time.perf_counter()
            fn()
            best = min(best, time.perf_counter() - t0)
        out["cases"][name] = {"seconds": best, "value": value}
    print(json.dumps(out))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--horizon", type=int, default=5000)
    ap.add_argument("--m", type=int, default=10)
    ap.add_argument("--k", type=int, default=2)
    ap.add_argument("--y-cap", type=int, default=20)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.child:
        child(args.horizon, args.m, args.k, args.y_cap, args.repeat)
        return

    results = {}
    for flag in ("0", "1"):
        env = dict(os.environ, SCUCB_DISABLE_NUMBA=flag)
        cmd = [sys.executable, __file__, "--child", "--horizon", str(args.horizon), "--m", str(args.m),
               "--k", str(args.k), "--y-cap", str(args.y_cap), "--repeat", str(args.repeat)]
        proc = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True)
        data = json.loads(proc.stdout.strip().splitlines()[-1])
        results[data["backend"]] = data["cases"]
    if len(results) < 2:
        print(f"only one backend available: {list(results)}")
        return
    fast, slow = results["numba"], results["python"]
    print(f"{'case':<24}{'numba s':>12}{'python s':>12}{'speedup':>10}  same result")
    for name in fast:
        a, b = fast[name], slow[name]
        print(f"{name:<24}{a['seconds']:>12.4f}{b['seconds']:>12.4f}"
              f"{b['seconds'] / a['seconds']:>9.0f}x  {a['value'] == b['value']}")


if __name__ == "__main__":
    main()
