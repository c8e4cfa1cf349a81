"""Sweep channel noise, run batches of sessions, and compare the observed
success fraction with the closed-form lower bound.

    python3 scripts/end_to_end.py --sessions 200 --n 2000 --workers 4
"""

import argparse
import time

from sbb84.cli import aggregate, run_trials, trial_row
from sbb84.qsim import ChannelParams
from sbb84.session import ProtocolConfig


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sessions", type=int, default=200)
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--m", type=int, default=20)
    ap.add_argument("--ns", type=int, default=100)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    print(f"{'eps':>5} {'success':>8} {'bound':>8} {'mismatch':>9} {'rounds':>6} {'g':>6} {'key_len':>8} {'aborts'}")
    for eps in (0.0, 0.01, 0.03, 0.05, 0.08, 0.1, 0.12):
        cfg = ProtocolConfig(n=args.n, m=args.m, n_s=args.ns, channel=ChannelParams(eps, eps, 0.0))
        t0 = time.perf_counter()
        results = run_trials(cfg, args.sessions, args.seed, args.workers)
        rows = [trial_row(i, args.seed + i, r) for i, r in enumerate(results)]
        agg, cmp = aggregate(rows, cfg.m)
        bound = cmp["mean_success_lower_bound"]
        print(f"{eps:5.2f} {agg['success_rate']:8.3f} {bound if bound is not None else float('nan'):8.4f} "
              f"{cmp['mismatch_rate']:9.2e} {agg['mean_rounds']:6.2f} {agg['mean_g']:6.2f} "
              f"{agg['mean_key_len']:8.1f} {agg['abort_reasons'] or '-'}  ({time.perf_counter() - t0:.1f}s)")


if __name__ == "__main__":
    main()
