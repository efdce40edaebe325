import io
import os
import subprocess
import sys

import numpy as np
import pytest

from hybrid_radar import cli
from hybrid_radar.signal_model import Scenario, sinr_profile
from hybrid_radar.sdp import SolverError

FAST = """
[scenario]
K = 1
[algorithm]
max_outer = 3
Q = 50
"""


def write(tmp_path, text, name="c.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def run(kind, tmp_path, text=FAST, seed=None, out="out"):
    err = io.StringIO()
    code = cli.run_experiment(kind, write(tmp_path, text), str(tmp_path / out), seed, err)
    return code, err.getvalue(), tmp_path / out


def meta(path):
    return dict(line.split("=", 1) for line in (path / "run.meta").read_text().splitlines())


def test_design_outputs(tmp_path):
    code, err, out = run("design", tmp_path)
    assert code == 0, err
    prof = cli.read_csv(out / "sinr_profile.csv")
    assert [int(r["k"]) for r in prof] == [-1, 0, 1]
    m = meta(out)
    assert m["status"] == "ok" and m["kind"] == "design" and m["seed"] == "42"
    assert m["designs"] == "1"
    raw = (out / "sinr_profile.csv").read_bytes()
    assert b"\r\n" not in raw
    conv = cli.read_csv(out / "convergence.csv")
    assert list(conv[0]) == ["outer_iter", "objective_linear", "objective_db"]
    for r in conv:
        assert float(r["objective_db"]) == pytest.approx(10 * np.log10(float(r["objective_linear"])), abs=1e-12)
    assert float(conv[-1]["objective_linear"]) <= float(m["result.objective"]) * (1 + 1e-15)


def test_design_points_reproduce_sinr(tmp_path, model):
    code, err, out = run("design", tmp_path)
    assert code == 0
    pts = cli.read_design_points(out / "design_points.csv")
    prof = cli.read_csv(out / "sinr_profile.csv")
    dp = pts[int(prof[0]["design_id"])]
    sc = Scenario.from_db(25, 25, K=1)
    again = sinr_profile(sc, dp, model)
    np.testing.assert_allclose(again, [float(r["sinr_linear"]) for r in prof], rtol=1e-9)


def test_bit_identical_reruns(tmp_path):
    run("design", tmp_path, out="a")
    run("design", tmp_path, out="b")
    for name in ("sinr_profile.csv", "convergence.csv", "design_points.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_seed_precedence(tmp_path):
    _, _, out = run("design", tmp_path, FAST + "seed = 7\n", out="cfg")
    assert meta(out)["seed"] == "7"
    _, _, out = run("design", tmp_path, FAST + "seed = 7\n", seed=9, out="flag")
    assert meta(out)["seed"] == "9"
    assert meta(out)["algorithm.seed"] == "9"


def test_config_error_exit_code(tmp_path):
    code, err, _ = run("design", tmp_path, "[scenario]\nN = x\n")
    assert code == 2
    assert "c.ini:2" in err


def test_kind_conflict(tmp_path):
    code, err, _ = run("design", tmp_path, "[experiment]\nkind = contour\n")
    assert code == 2 and "conflicts" in err


def test_numerical_failure_exit_code(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise SolverError("forced")
    monkeypatch.setattr(cli, "mm_design", boom)
    code, err, out = run("design", tmp_path)
    assert code == 3 and "numerical failure" in err
    assert meta(out)["status"] == "numerical_failure"


def test_contour(tmp_path):
    text = "[algorithm]\nmax_outer = 2\nQ = 30\n[experiment]\ngrid_min_db = 20\ngrid_max_db = 25\ngrid_step_db = 5\n"
    code, err, out = run("contour", tmp_path, text)
    assert code == 0, err
    rows = cli.read_csv(out / "contour.csv")
    assert len(rows) == 4 * 4
    assert {r["config"] for r in rows} == {"hybrid-TxRx", "hybrid-Rx", "active-only", "passive-only"}
    for r in rows:
        if r["config"] == "active-only":
            assert float(r["sinr_db"]) == pytest.approx(float(r["gamma_r_db"]))


def test_k_sweep_and_robustness(tmp_path):
    text = "[algorithm]\nmax_outer = 2\nQ = 30\n[experiment]\nK_values = 0, 1\ndesign_K = 0\nk_min = -2\nk_max = 2\n"
    code, err, out = run("k-sweep", tmp_path, text, out="ks")
    assert code == 0, err
    rows = cli.read_csv(out / "k_sweep.csv")
    assert len(rows) == 2 * 2 * 2
    assert list(rows[0]) == ["K", "mode", "config", "sinr_db", "design_id"]
    code, err, out = run("robustness", tmp_path, text, out="rb")
    assert code == 0, err
    rows = cli.read_csv(out / "robustness.csv")
    assert len(rows) == 2 * 5
    assert sorted({int(r["k"]) for r in rows}) == [-2, -1, 0, 1, 2]


def test_detect(tmp_path):
    text = ("[algorithm]\nmax_outer = 2\nQ = 30\n[experiment]\ndesign_K = 0\nP_f = 0.01\n"
            "trials_h0 = 2000\ntrials_h1 = 1000\nsnr_grid_db = 0, 20\n")
    code, err, out = run("detect", tmp_path, text)
    assert code == 0, err
    rows = cli.read_csv(out / "detection.csv")
    names = {r["config"] for r in rows}
    assert names == {"hybrid-WS-K0", "hybrid-MM-K0", "active-only", "passive-only"}
    for r in rows:
        p = float(r["pm"])
        assert 0 <= p <= 1
        assert float(r["half_width_95"]) == pytest.approx(1.96 * np.sqrt(p * (1 - p) / 1000), rel=1e-12)


def test_convergence_kind(tmp_path):
    code, err, out = run("convergence", tmp_path)
    assert code == 0, err
    for mode in ("MM", "WS"):
        rows = cli.read_csv(out / f"convergence_{mode}.csv")
        assert int(meta(out)[f"result.iterations_{mode}"]) == len(rows)


def test_main_and_console_entry(tmp_path):
    cfgp = write(tmp_path, FAST)
    assert cli.main(["design", "--config", cfgp, "--out", str(tmp_path / "m"), "--seed", "3"]) == 0
    with pytest.raises(SystemExit) as e:
        cli.main(["bogus"])
    assert e.value.code == 2
    res = subprocess.run([sys.executable, "-m", "hybrid_radar.cli", "design", "--config", cfgp,
                          "--out", str(tmp_path / "s")], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert os.path.exists(tmp_path / "s" / "run.meta")


def test_process_workers_do_not_change_results(tmp_path):
    base = "[algorithm]\nmax_outer = 2\nQ = 30\nworkers = {}\n[experiment]\nK_values = 0, 1\n"
    run("k-sweep", tmp_path, base.format(1), out="w1")
    run("k-sweep", tmp_path, base.format(2), out="w2")
    for name in ("k_sweep.csv", "design_points.csv"):
        assert (tmp_path / "w1" / name).read_bytes() == (tmp_path / "w2" / name).read_bytes()
