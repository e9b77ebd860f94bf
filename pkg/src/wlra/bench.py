"""Solver sweeps over ranks and trials, with the results CSV schema.

A sweep row records the weighted loss under the instance's true weight,
wall-clock seconds around the solve call only, an iteration count and the
number of stored parameters.

``svd_w`` at sweep rank ``k`` uses weight rank ``r_w``: the weight is
replaced by its rank-``r_w`` truncation when its rank is larger, and ``W o A``
is approximated at rank ``min(r_w * k, min(n, d))``.
"""
from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .baselines import em_wlra, factored_gd_wlra, greedy_wlra
from .data import (
    GENERATOR_NAME,
    MogSpec,
    PlantedSpec,
    gen_mog,
    gen_planted,
    read_matrix,
)
from .errors import ParameterError, ParseError
from .solvers import (
    SolverReport,
    css_wlra,
    plain_svd_baseline,
    refine_reweighted_em,
    sample_wlra,
    svd_w,
    truncate,
    weight_surrogate,
    weighted_loss,
)
from .weights import dense_weight, weight_rank

SOLVERS = ("svd_w", "svd_w_randomized", "em", "greedy", "sample", "adam", "svd", "css",
           "svd_w_then_em")
CSV_HEADER = ["dataset", "solver", "rank", "trial", "seed", "loss", "seconds", "iterations",
              "params"]
EM_ITERS = 25
ADAM_EPOCHS = 100
CSS_EPS = 0.5
RANDOMIZED_EPS = 0.1
SIDECAR = "provenance.json"


@dataclass
class Instance:
    name: str
    A: np.ndarray
    W: object
    weight_rank: int | None = None  # declared bound, if known


@dataclass
class BenchConfig:
    dataset: dict  # {"kind": "mog"|"planted"|"files", ...}
    solvers: list
    ranks: list
    trials: int = 5
    seed: int = 0
    output: str | None = None
    weight_rank: int | str = "auto"
    instance_trials: bool = False
    sample_t: int | None = None
    jobs: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ParameterError("trials must be at least 1")
        if not self.ranks or any(r < 1 for r in self.ranks) or \
                list(self.ranks) != sorted(set(self.ranks)):
            raise ParameterError(f"ranks must be positive and ascending, got {self.ranks}")
        unknown = [s for s in self.solvers if s not in SOLVERS]
        if unknown:
            raise ParameterError(
                f"unknown solver(s) {', '.join(unknown)}; valid names: {', '.join(SOLVERS)}")


def mog_spec_from(params, seed_offset=0):
    p = {key: int(val) for key, val in params.items() if key in ("n", "d", "k", "r", "seed")}
    p["seed"] = p.get("seed", 0) + seed_offset
    return MogSpec(**p)


def planted_spec_from(params, seed_offset=0):
    p = {}
    for key, val in params.items():
        if key in ("n", "d", "k", "r", "seed"):
            p[key] = int(val)
        elif key in ("noise", "noise_sigma"):
            p["noise_sigma"] = float(val)
    p["seed"] = p.get("seed", 0) + seed_offset
    return PlantedSpec(**p)


def load_instance(dataset, seed_offset=0):
    kind = dataset["kind"]
    params = dataset.get("params", {})
    if kind == "mog":
        spec = mog_spec_from(params, seed_offset)
        A, W, _ = gen_mog(spec)
        return Instance(dataset.get("name", "mog"), A, W, spec.k * spec.r)
    if kind == "planted":
        spec = planted_spec_from(params, seed_offset)
        A, W, _ = gen_planted(spec)
        return Instance(dataset.get("name", "planted"), A, W, spec.r)
    if kind == "files":
        root = Path(dataset["path"])
        meta = {}
        if (root / SIDECAR).exists():
            meta = json.loads((root / SIDECAR).read_text())
        files = meta.get("files", {})
        A = read_matrix(root / files.get("A", _find(root, "A")))
        W = read_matrix(root / files.get("W", _find(root, "W")))
        if A.shape != W.shape:
            raise ParameterError(f"A {A.shape} and W {W.shape} differ in shape")
        return Instance(dataset.get("name", root.name), A, W, meta.get("weight_rank"))
    raise ParameterError(f"unknown dataset kind {kind!r}")


def _find(root, stem):
    for ext in (".wlrm", ".csv"):
        if (root / (stem + ext)).exists():
            return stem + ext
    raise ParameterError(f"no {stem}.wlrm or {stem}.csv in {root}")


def resolve_weight_rank(inst, setting):
    if setting == "auto":
        return inst.weight_rank if inst.weight_rank else weight_rank(inst.W)
    r = int(setting)
    if r < 1:
        raise ParameterError("weight rank must be positive")
    return r


def run_solver(name, inst, k, seed, r_w, sample_t=None):
    """Run one solver at sweep rank ``k``; returns a :class:`SolverReport`."""
    A, W = inst.A, inst.W
    n, d = A.shape
    if k > min(n, d):
        raise ParameterError(f"rank {k} exceeds min(n, d) = {min(n, d)}")
    iterations = 1
    S = weight_surrogate(W, r_w) if name in ("svd_w", "svd_w_randomized", "css",
                                             "svd_w_then_em") else None
    rho = min(r_w * k, n, d)

    start = time.perf_counter()
    if name == "svd_w":
        out = svd_w(A, S, rho, r=1)
    elif name == "svd_w_randomized":
        out = svd_w(A, S, rho, r=1, method="randomized", eps=RANDOMIZED_EPS, seed=seed)
    elif name == "svd_w_then_em":
        out, _ = refine_reweighted_em(A, W, svd_w(A, S, rho, r=1), iters=EM_ITERS)
        iterations = EM_ITERS
    elif name == "em":
        out, _ = em_wlra(A, W, k, iters=EM_ITERS, seed=seed)
        iterations = EM_ITERS
    elif name == "greedy":
        out, _ = greedy_wlra(A, W, k)
        iterations = k
    elif name == "adam":
        out, _ = factored_gd_wlra(A, W, k, epochs=ADAM_EPOCHS, seed=seed)
        iterations = ADAM_EPOCHS
    elif name == "svd":
        out = plain_svd_baseline(A, k)
    elif name == "sample":
        t = sample_t or min(n, 4 * k)
        approx, _ = sample_wlra(A, W, k, t, seed=seed)
        out = truncate(approx, k)
    elif name == "css":
        out = css_wlra(A, S, rho, eps=CSS_EPS, r=1, seed=seed)
    else:
        raise ParameterError(f"unknown solver {name!r}; valid names: {', '.join(SOLVERS)}")
    seconds = time.perf_counter() - start

    if name in ("svd_w", "svd_w_randomized", "svd_w_then_em", "css") and S is not W:
        loss = weighted_loss(A, W, out.to_dense())
    else:
        loss = weighted_loss(A, W, out)
    return SolverReport(name, k, seed, max(loss, 0.0), seconds, iterations, int(out.params),
                        GENERATOR_NAME)


def _task(args):
    cfg, solver, k, trial = args
    offset = trial if cfg.instance_trials else 0
    inst = load_instance(cfg.dataset, offset)
    seed = cfg.seed + trial
    r_w = resolve_weight_rank(inst, cfg.weight_rank)
    rep = run_solver(solver, inst, k, seed, r_w, cfg.sample_t)
    return {"dataset": inst.name, "solver": solver, "rank": k, "trial": trial, "seed": seed,
            "loss": rep.loss, "seconds": rep.seconds, "iterations": rep.iterations,
            "params": rep.params}


def run_sweep(cfg):
    """All (solver, rank, trial) rows, sorted by solver, rank and trial."""
    tasks = [(cfg, s, k, t) for s in cfg.solvers for k in cfg.ranks for t in range(cfg.trials)]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(cfg.jobs) as pool:
            rows = list(pool.map(_task, tasks))
    else:
        cache = {}
        rows = []
        for task in tasks:
            _, solver, k, trial = task
            offset = trial if cfg.instance_trials else 0
            if offset not in cache:
                cache[offset] = load_instance(cfg.dataset, offset)
            inst = cache[offset]
            seed = cfg.seed + trial
            rep = run_solver(solver, inst, k, seed, resolve_weight_rank(inst, cfg.weight_rank),
                             cfg.sample_t)
            rows.append({"dataset": inst.name, "solver": solver, "rank": k, "trial": trial,
                         "seed": seed, "loss": rep.loss, "seconds": rep.seconds,
                         "iterations": rep.iterations, "params": rep.params})
    rows.sort(key=lambda r: (r["solver"], r["rank"], r["trial"]))
    return rows


def write_results(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in rows:
            w.writerow([r["dataset"], r["solver"], r["rank"], r["trial"], r["seed"],
                        repr(float(r["loss"])), f"{r['seconds']:.6f}", r["iterations"],
                        r["params"]])


def read_results(path):
    """Parse a results CSV, rejecting any header other than the stable schema."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: row 1: empty file") from None
        if header != CSV_HEADER:
            raise ParseError(f"{path}: row 1: header {','.join(header)!r} does not match "
                             f"{','.join(CSV_HEADER)!r}")
        for rowno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(CSV_HEADER):
                raise ParseError(f"{path}: row {rowno}: expected {len(CSV_HEADER)} fields, "
                                 f"got {len(rec)}")
            try:
                rows.append({"dataset": rec[0], "solver": rec[1], "rank": int(rec[2]),
                             "trial": int(rec[3]), "seed": int(rec[4]), "loss": float(rec[5]),
                             "seconds": float(rec[6]), "iterations": int(rec[7]),
                             "params": int(rec[8])})
            except ValueError as exc:
                raise ParseError(f"{path}: row {rowno}: {exc}") from None
    return rows


def summarize(rows, ranks=None):
    """Mean loss and seconds per (dataset, solver, rank)."""
    groups = {}
    for r in rows:
        if ranks and r["rank"] not in ranks:
            continue
        groups.setdefault((r["dataset"], r["solver"], r["rank"]), []).append(r)
    out = []
    for (ds, solver, rank), rs in sorted(groups.items()):
        out.append({"dataset": ds, "solver": solver, "rank": rank, "trials": len(rs),
                    "mean_loss": float(np.mean([r["loss"] for r in rs])),
                    "mean_seconds": float(np.mean([r["seconds"] for r in rs]))})
    return out


def format_table(summary):
    head = f"{'dataset':<16} {'solver':<16} {'rank':>5} {'trials':>6} {'mean_loss':>14} {'mean_seconds':>13}"
    lines = [head, "-" * len(head)]
    for s in summary:
        lines.append(f"{s['dataset']:<16} {s['solver']:<16} {s['rank']:>5d} {s['trials']:>6d} "
                     f"{s['mean_loss']:>14.6g} {s['mean_seconds']:>13.6f}")
    return "\n".join(lines)


def gnuplot_script(results_csv, solvers):
    plots = ", \\\n     ".join(
        f"'< grep \",{s},\" {results_csv}' using 3:6 smooth unique with linespoints title '{s}'"
        for s in solvers)
    return ("set datafile separator ','\nset logscale y\nset xlabel 'rank'\n"
            f"set ylabel 'weighted loss'\nplot {plots}\n")

