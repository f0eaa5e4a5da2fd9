"""Desync rate when one downlink round of the first sync is attacked."""

import argparse
import math

from a2c2.harness import sync_failure_probe
from a2c2.protocol.params import ceil_pow

ap = argparse.ArgumentParser()
ap.add_argument("--M", type=int, default=4)
ap.add_argument("--K", type=int, default=10)
ap.add_argument("--T", type=int, default=400)
ap.add_argument("--trials", type=int, default=10_000)
args = ap.parse_args()

rounds = ceil_pow(args.T, 0.5)
p = 1 / rounds
for target in ("last", 0, None):
    rate = sync_failure_probe(args.M, args.K, args.T, args.trials, target_round=target, seed=1)
    print(f"target={target!s:5s} rate={rate:.4f}")
print(f"reference 1/rounds = {p:.4f}, 3 sigma = {3 * math.sqrt(p * (1 - p) / args.trials):.4f}")
