"""Mixture-of-Gaussians sweep: every solver at ranks 1..20, mean loss over trials.

    python scripts/mog_experiment.py --out mog.csv --weight-rank 2
"""
import argparse

from wlra import bench


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--d", type=int, default=50)
    ap.add_argument("--k", type=int, default=5)
    ap.add_argument("--r", type=int, default=3)
    ap.add_argument("--trials", type=int, default=5)
    ap.add_argument("--ranks", default="1-20")
    ap.add_argument("--weight-rank", default="auto")
    ap.add_argument("--solvers", default="svd_w,svd_w_then_em,em,greedy,sample,adam,svd")
    ap.add_argument("--out", default="mog_results.csv")
    args = ap.parse_args()

    lo, _, hi = args.ranks.partition("-")
    ranks = list(range(int(lo), int(hi or lo) + 1))
    wr = args.weight_rank if args.weight_rank == "auto" else int(args.weight_rank)
    cfg = bench.BenchConfig(
        dataset={"kind": "mog", "params": {"n": args.n, "d": args.d, "k": args.k, "r": args.r}},
        solvers=args.solvers.split(","), ranks=ranks, trials=args.trials,
        weight_rank=wr, instance_trials=True, output=args.out)
    rows = bench.run_sweep(cfg)
    bench.write_results(rows, args.out)
    print(bench.format_table(bench.summarize(rows, [r for r in (5, 10, 20) if r in ranks])))


if __name__ == "__main__":
    main()
