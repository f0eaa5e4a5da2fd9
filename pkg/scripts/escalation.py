"""Where the alpha-unaware estimate settles when bursts have a fixed length."""

import argparse
from collections import Counter

from a2c2 import env
from a2c2.harness import run_episode
from a2c2.protocol.params import ceil_pow

ap = argparse.ArgumentParser()
ap.add_argument("--T", type=int, default=100_000)
ap.add_argument("--eps", type=float, default=0.05)
ap.add_argument("--burst", type=int, default=31)
ap.add_argument("--n-bursts", type=int, default=600)
ap.add_argument("--seeds", type=int, default=10)
args = ap.parse_args()

levels = [round(j * args.eps, 10) for j in range(int(round(1 / args.eps)) + 1)]
target = next(a for a in levels if ceil_pow(args.T, a) > args.burst)
print(f"smallest grid exponent whose repetition length exceeds {args.burst}: {target}")
finals = Counter()
for seed in range(args.seeds):
    L = env.gen_burst_adversary(10, args.T, 0.2, 0.9, 0.9, args.burst, args.n_bursts, seed=900 + seed)
    tr = run_episode("alpha_unaware", L, 4, 10, args.T, seed, [seed * 10 + m for m in range(4)], {"eps": args.eps})
    finals[round(tr.final_estimates[0], 6)] += 1
    print(f"seed {seed}: history {[round(x, 3) for x in tr.estimate_histories[0]]}")
print("final estimates:", dict(finals))
