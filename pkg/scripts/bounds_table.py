"""Log-growth of each regret bound from M=2 to M=16, plus the bound vs attack exponent."""

import argparse
import math

import numpy as np

from a2c2.harness import MODELS, theory_bound

ap = argparse.ArgumentParser()
ap.add_argument("--K", type=int, default=10)
ap.add_argument("--attack", type=float, default=0.7)
args = ap.parse_args()

print("T      " + "  ".join(f"{m:>20s}" for m in MODELS))
for T in (1e4, 1e5, 1e6, 1e8):
    growth = [math.log(theory_bound(m, 16, args.K, T, args.attack) / theory_bound(m, 2, args.K, T, args.attack)) for m in MODELS]
    print(f"{T:.0e}  " + "  ".join(f"{g:20.3f}" for g in growth))

print("\nbound at M=4, T=1e6 against the attack exponent")
for a in np.linspace(0, 1, 11):
    print(f"{a:4.1f}  " + "  ".join(f"{theory_bound(m, 4, args.K, 1e6, a):20.4g}" for m in MODELS))
