import numpy as np
import pytest

from wlra import bench
from wlra.errors import ParameterError, ParseError

PLANTED = {"kind": "planted", "params": {"n": "30", "d": "20", "k": "3", "r": "2",
                                         "noise": "0.1", "seed": "1"}}


def test_sweep_rows_and_schema(tmp_path):
    cfg = bench.BenchConfig(dataset=PLANTED, solvers=list(bench.SOLVERS), ranks=[1, 2],
                            trials=2, seed=3)
    rows = bench.run_sweep(cfg)
    assert len(rows) == len(bench.SOLVERS) * 2 * 2
    path = tmp_path / "r.csv"
    bench.write_results(rows, path)
    assert path.read_text().splitlines()[0] == ",".join(bench.CSV_HEADER)
    back = bench.read_results(path)
    assert [r["loss"] for r in back] == [r["loss"] for r in rows]
    table = bench.format_table(bench.summarize(back, [2]))
    assert "svd_w" in table and " 1 " not in table.splitlines()[2]


def test_svd_w_beats_svd_on_planted():
    cfg = bench.BenchConfig(dataset=PLANTED, solvers=["svd_w", "svd"], ranks=[1, 2, 3], trials=1)
    m = {(r["solver"], r["rank"]): r["loss"] for r in bench.run_sweep(cfg)}
    assert all(m[("svd_w", k)] <= m[("svd", k)] for k in (1, 2, 3))


def test_sweep_is_deterministic_apart_from_timing():
    cfg = bench.BenchConfig(dataset=PLANTED, solvers=["em", "adam", "sample"], ranks=[2],
                            trials=2)
    a, b = bench.run_sweep(cfg), bench.run_sweep(cfg)
    assert [r["loss"] for r in a] == [r["loss"] for r in b]


def test_config_validation():
    with pytest.raises(ParameterError):
        bench.BenchConfig(dataset=PLANTED, solvers=["nope"], ranks=[1])
    with pytest.raises(ParameterError):
        bench.BenchConfig(dataset=PLANTED, solvers=["svd"], ranks=[2, 1])
    with pytest.raises(ParameterError):
        bench.BenchConfig(dataset=PLANTED, solvers=["svd"], ranks=[1], trials=0)


def test_read_results_errors(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b\n")
    with pytest.raises(ParseError, match="row 1"):
        bench.read_results(p)
    p.write_text(",".join(bench.CSV_HEADER) + "\nx,svd,one,0,0,1.0,0.1,1,5\n")
    with pytest.raises(ParseError, match="row 2"):
        bench.read_results(p)


def test_weight_rank_resolution():
    inst = bench.load_instance(PLANTED)
    assert bench.resolve_weight_rank(inst, "auto") == 2
    assert bench.resolve_weight_rank(inst, 5) == 5
    inst.weight_rank = None
    assert bench.resolve_weight_rank(inst, "auto") == 2
    with pytest.raises(ParameterError):
        bench.resolve_weight_rank(inst, 0)


def test_gnuplot_mentions_every_solver():
    script = bench.gnuplot_script("r.csv", ["svd", "em"])
    assert ",svd," in script and ",em," in script and np.char.count(script, "plot") >= 1
