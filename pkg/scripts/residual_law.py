"""Kept-bit disagreement after one crude pairing round, against eps^2/((1-eps)^2+eps^2).

    python3 scripts/residual_law.py --bits 200000 --seed 1
"""

import argparse

import numpy as np

from sbb84.analysis import kept_error_rate
from sbb84.gf2 import BitVec
from sbb84.reconcile import PairingPlan, crude_round


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--bits", type=int, default=200_000)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)

    print(f"{'eps':>6} {'measured':>10} {'predicted':>10} {'eps^2':>9} {'z':>6} {'kept':>8}")
    for eps in (0.01, 0.02, 0.05, 0.1, 0.15, 0.2, 0.3):
        a = rng.integers(0, 2, args.bits, dtype=np.uint8)
        b = a ^ (rng.random(args.bits) < eps).astype(np.uint8)
        ka, kb, _ = crude_round(BitVec.from_bits(a), BitVec.from_bits(b), PairingPlan.random(args.bits, rng))
        rate = (ka ^ kb).weight() / ka.nbits
        pred = kept_error_rate(eps)
        z = (rate - pred) / np.sqrt(pred * (1 - pred) / ka.nbits)
        print(f"{eps:6.2f} {rate:10.6f} {pred:10.6f} {eps * eps:9.6f} {z:6.2f} {ka.nbits:8d}")


if __name__ == "__main__":
    main()
