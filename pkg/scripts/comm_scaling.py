"""Message length of the column subset protocol as column sparsity grows.

    python scripts/comm_scaling.py --n 1024 --d 4 --r 2
"""
import argparse

from wlra.comm import build_sparse_column_instance, encode_css
from wlra.solvers import css_wlra


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=1024)
    ap.add_argument("--d", type=int, default=4)
    ap.add_argument("--r", type=int, default=2)
    ap.add_argument("--eps", type=float, default=1.0)
    ap.add_argument("--seeds", type=int, default=5)
    args = ap.parse_args()

    print(f"{'s':>6} {'mean bits':>12} {'ratio':>7}")
    prev = None
    s = 16
    while s <= args.n // 2:
        bits = []
        for seed in range(args.seeds):
            A, W = build_sparse_column_instance(args.n, args.d, s, args.r, seed=seed)
            bits.append(encode_css(A, css_wlra(A, W, 1, eps=args.eps, r=args.r)).total_bits)
        mean = sum(bits) / len(bits)
        ratio = f"{mean / prev:7.3f}" if prev else " " * 7
        print(f"{s:>6} {mean:>12.1f} {ratio}")
        prev = mean
        s *= 2


if __name__ == "__main__":
    main()
