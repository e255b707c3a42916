import csv

import numpy as np
import pytest

from jbdgsvd.errors import InvalidInput
from jbdgsvd.harness.cli import main
from jbdgsvd.harness.experiment import (
    DIAG_COLUMNS, EXIT_ERROR, EXIT_OK, EXIT_PARTIAL, RunConfig, build_pair, make_config,
    read_config_file, run_experiment, run_sweep,
)
from jbdgsvd.harness.generators import gen_A1L1
from jbdgsvd.harness.mmio import write_matrix_market


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_minimal_run_row_count(tmp_path):
    cfg = RunConfig(gen="a1l1:100,100", steps=20, tau=1e-10, out=str(tmp_path / "o"))
    oc = run_experiment(cfg)
    assert oc.exit_code == EXIT_OK
    rows = _rows(tmp_path / "o" / "diagnostics.csv")
    assert tuple(rows[0]) == DIAG_COLUMNS
    assert len(rows) == 21
    assert (tmp_path / "o" / "report.txt").exists()


def test_rerun_is_byte_identical(tmp_path):
    outs = []
    for name in ("a", "b"):
        cfg = RunConfig(gen="a2l2:40", steps=12, tau=1e-10, extract="2:largest:bhat", diag="full",
                        out=str(tmp_path / "same"))
        run_experiment(cfg)
        outs.append({f: (tmp_path / "same" / f).read_bytes()
                     for f in ("diagnostics.csv", "estimates.csv", "history.csv", "report.txt")})
    assert outs[0] == outs[1]


def test_sweep_orthogonality_loss_order(tmp_path):
    cfg = RunConfig(gen="a1l1:200,1000", steps=80, reorth="none", out=str(tmp_path))
    first = []
    for oc in run_sweep(cfg, [1e-6, 1e-10]):
        rows = _rows(oc.out_dir / "diagnostics.csv")[1:]
        orth = [float(r[DIAG_COLUMNS.index("orth_v")]) for r in rows]
        first.append(next(i for i, v in enumerate(orth, 1) if v > 1e-2))
    assert first[0] < first[1]


def test_diag_levels_blank_columns(tmp_path):
    run_experiment(RunConfig(gen="a1l1:30,10", steps=3, diag="off", out=str(tmp_path / "off")))
    row = _rows(tmp_path / "off" / "diagnostics.csv")[1]
    for col in ("orth_v", "orth_u", "orth_uhat", "norm_g"):
        assert row[DIAG_COLUMNS.index(col)] == ""
    run_experiment(RunConfig(gen="a1l1:30,10", steps=3, diag="full", out=str(tmp_path / "full")))
    row = _rows(tmp_path / "full" / "diagnostics.csv")[1]
    assert float(row[DIAG_COLUMNS.index("norm_g")]) >= 0


def test_breakdown_gives_partial_exit(tmp_path):
    oc = run_experiment(RunConfig(gen="a1l1:5,10", steps=10, inner="exact", out=str(tmp_path)))
    assert oc.exit_code == EXIT_PARTIAL
    rows = _rows(tmp_path / "diagnostics.csv")
    assert len(rows) - 1 == oc.factorization.k


def test_errors_map_to_exit_one(tmp_path):
    oc = run_experiment(RunConfig(a=str(tmp_path / "missing.mtx"), l="l1d", out=str(tmp_path / "x")))
    assert oc.exit_code == EXIT_ERROR
    oc = run_experiment(RunConfig(gen="a1l1:30,10", inner="exact", dense_cap=10, out=str(tmp_path / "y")))
    assert oc.exit_code == EXIT_ERROR


def test_config_validation():
    with pytest.raises(InvalidInput):
        RunConfig()
    with pytest.raises(InvalidInput):
        RunConfig(a="x.mtx", gen="a2l2:10")
    with pytest.raises(InvalidInput):
        RunConfig(a="x.mtx")
    with pytest.raises(InvalidInput):
        RunConfig(gen="a2l2:10", diag="verbose")
    with pytest.raises(InvalidInput):
        RunConfig(gen="a2l2:10", extract="2:top:b")
    with pytest.raises(InvalidInput):
        RunConfig(gen="a2l2:10", reorth="householder")


def test_build_pair_variants(tmp_path):
    P, kappa = build_pair(RunConfig(gen="a1l1:10,50"))
    assert (P.m, P.p, P.n, kappa) == (10, 10, 10, 50.0)
    P, kappa = build_pair(RunConfig(gen="random:6,5,4,3"))
    assert (P.m, P.p, P.n, kappa) == (6, 5, 4, None)
    P, kappa = build_pair(RunConfig(gen="a2l2:12", l="l1d:2"))
    assert P.p == 11 and kappa is None
    np.testing.assert_array_equal(P.L.to_dense()[0, :2], [2, -2])
    write_matrix_market(tmp_path / "a.mtx", gen_A1L1(6, 3.0).pair.A)
    P, _ = build_pair(RunConfig(a=str(tmp_path / "a.mtx"), l="l1d"))
    assert (P.m, P.p, P.n) == (6, 5, 6)
    for bad in ("nope:1", "a1l1:10", "random:1,2", "a2l2:x"):
        with pytest.raises(InvalidInput):
            build_pair(RunConfig(gen=bad))


def test_config_file_and_precedence(tmp_path):
    cfg_path = tmp_path / "run.cfg"
    cfg_path.write_text("# desk run\ngen = a1l1:40,10\nsteps = 7\ntau-bar = 1e-9\nreorth = none\n")
    values = read_config_file(cfg_path)
    assert values == {"gen": "a1l1:40,10", "steps": 7, "tau_bar": 1e-9, "reorth": "none"}
    cfg = make_config(values, steps=3, reorth=None)
    assert cfg.steps == 3 and cfg.reorth == "none" and cfg.tau_bar == 1e-9
    bad = tmp_path / "bad.cfg"
    bad.write_text("color = blue\n")
    with pytest.raises(InvalidInput):
        read_config_file(bad)
    bad.write_text("steps\n")
    with pytest.raises(InvalidInput):
        read_config_file(bad)


def test_cli_end_to_end(tmp_path, capsys):
    out = tmp_path / "cli"
    code = main(["--gen", "a2l2:40", "--steps", "30", "--tau", "1e-10", "--extract", "1:largest:b",
                 "--out", str(out), "--diag", "basic"])
    assert code == 0
    assert "c_1" in capsys.readouterr().out
    est = _rows(out / "estimates.csv")
    assert est[0][0] == "index" and abs(float(est[1][2]) - 0.99) < 1e-6


def test_cli_config_flag_override(tmp_path):
    cfg_path = tmp_path / "c.cfg"
    cfg_path.write_text(f"gen = a1l1:30,10\nsteps = 9\nout = {tmp_path / 'cfgout'}\n")
    assert main(["--config", str(cfg_path), "--steps", "4"]) == 0
    assert len(_rows(tmp_path / "cfgout" / "diagnostics.csv")) == 5


def test_cli_errors(tmp_path, capsys):
    assert main(["--steps", "3"]) == EXIT_ERROR
    assert "jbdgsvd:" in capsys.readouterr().err
    assert main(["--gen", "a1l1:5,10", "--steps", "9", "--inner", "exact", "--out", str(tmp_path)]) == EXIT_PARTIAL
    assert main(["--gen", "a1l1:20,10", "--sweep-tau", "1e-6,1e-8", "--steps", "3",
                 "--out", str(tmp_path / "sw")]) == 0
    assert (tmp_path / "sw" / "tau_1e-06" / "diagnostics.csv").exists()


def test_history_rows_keyed_by_step(tmp_path):
    cfg = RunConfig(gen="a2l2:30", steps=12, tau=1e-10, extract="3:largest:b", out=str(tmp_path / "h"))
    oc = run_experiment(cfg)
    assert oc.exit_code == EXIT_OK
    rows = _rows(tmp_path / "h" / "history.csv")
    assert rows[0] == ["step", "c_1", "c_2", "c_3"]
    assert [r[0] for r in rows[1:]] == [str(k) for k in range(1, 13)]
    # c_j first exists at step j
    assert rows[1][2:] == ["", ""] and rows[2][3] == "" and rows[3][3] != ""
    for e in oc.estimates:
        assert float(rows[12][e.index]) == e.c
