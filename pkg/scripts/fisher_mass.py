"""Share of squared Frobenius mass in the top singular value of importance-like weights.

    python scripts/fisher_mass.py
"""
import argparse

import numpy as np

from wlra.data import first_singular_mass, gen_fisher_like
from wlra.solvers import svd_w, weighted_loss, plain_svd_baseline


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=256)
    ap.add_argument("--d", type=int, default=128)
    ap.add_argument("--k", type=int, default=8)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    A = rng.standard_normal((args.n, args.d))
    print(f"{'noise':>6} {'mass':>7} {'svd_w r=1':>12} {'svd':>12}")
    for noise in (0.0, 0.01, 0.02, 0.05, 0.1, 0.2):
        W = gen_fisher_like(args.n, args.d, noise, seed=1)
        ours = weighted_loss(A, W, svd_w(A, W, args.k, r=1).to_dense())
        base = weighted_loss(A, W, plain_svd_baseline(A, args.k))
        print(f"{noise:>6.2f} {first_singular_mass(W):>7.4f} {ours:>12.4g} {base:>12.4g}")


if __name__ == "__main__":
    main()
