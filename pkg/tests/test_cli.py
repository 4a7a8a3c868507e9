import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from lpinfer.asymptotics import indifference_lp_vs_arla, indifference_lp_vs_lpna
from lpinfer.cli import bundled, main, read_series
from lpinfer.exceptions import ConfigInvalid
from lpinfer.montecarlo import McResultTable, load_experiment_file


def _rows(text):
    return list(csv.reader(io.StringIO(text)))


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def ar1_dgp(tmp_path):
    p = tmp_path / "ar1.json"
    p.write_text(json.dumps({"kind": "ar1", "rho": 0.5}))
    return p


def test_indifference_small(capsys):
    code, out, _ = run(["indifference", "--h-max", 3], capsys)
    assert code == 0
    rows = _rows(out)
    assert rows[0] == ["h", "rho_lower", "rho_upper"]
    assert [int(r[0]) for r in rows[1:]] == [2, 3]
    np.testing.assert_allclose([float(x) for x in rows[1][1:]], [0.57735, 0.57735], atol=1e-5)
    oracle = [((-1 + math.sqrt(33)) / 2) ** -0.5, ((-1 + math.sqrt(21)) / 2) ** -0.5]
    np.testing.assert_allclose([float(x) for x in rows[2][1:]], oracle, atol=1e-9)
    np.testing.assert_allclose([float(x) for x in rows[2][1:]], [0.64930, 0.74716], atol=1e-4)


def test_indifference_full_and_round_trip(tmp_path, capsys):
    out = tmp_path / "curves.csv"
    assert run(["indifference", "--h-max", 60, "--out", out], capsys)[0] == 0
    rows = _rows(out.read_text())[1:]
    assert len(rows) == 59
    for h, lo, hi in rows:
        lo, hi = float(lo), float(hi)
        assert 0 < lo < 1 and 0 < hi < 1
        assert lo == pytest.approx(indifference_lp_vs_arla(int(h)), abs=1e-9)
        assert hi == pytest.approx(indifference_lp_vs_lpna(int(h)), abs=1e-9)
    assert run(["indifference", "--h-max", 1], capsys)[0] == 2


def test_simulate_is_deterministic(ar1_dgp, tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(["simulate", ar1_dgp, "--T", 100, "--seed", 3, "--out", a], capsys)[0] == 0
    assert run(["simulate", ar1_dgp, "--T", 100, "--seed", 3, "--out", b], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    s = read_series(a)
    assert s.data.shape == (100, 1) and s.columns == ("y1",)
    run(["simulate", ar1_dgp, "--T", 100, "--seed", 4, "--out", b], capsys)
    assert a.read_bytes() != b.read_bytes()


def test_simulate_explosive_warns(tmp_path, capsys):
    p = tmp_path / "x.json"
    p.write_text(json.dumps({"n": 1, "p": 1, "lag_blocks": [[[1.2]]]}))
    code, out, err = run(["simulate", p, "--T", 100], capsys)
    assert code == 0 and "warning" in err and "explosive" in err.lower()
    assert np.isfinite(np.loadtxt(io.StringIO(out), delimiter=",", skiprows=1)).all()
    # |y_t| passes 1e100 after roughly log(1e100) / log(1.2) ~ 1263 steps
    code, _, err = run(["simulate", p, "--T", 3000], capsys)
    assert code == 4 and "exceeded" in err


def test_simulate_bad_dgp_files(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text("{broken")
    assert run(["simulate", p], capsys)[0] == 2
    p.write_text(json.dumps({"n": 1, "lag_blocks": [[[0.5]]]}))
    code, _, err = run(["simulate", p], capsys)
    assert code == 2 and "'p'" in err
    assert run(["simulate", tmp_path / "missing.json"], capsys)[0] == 2


def test_simulate_estimate_pipeline(ar1_dgp, tmp_path, capsys):
    data = tmp_path / "y.csv"
    run(["simulate", ar1_dgp, "--T", 240, "--seed", 1, "--out", data], capsys)
    for method in ("LP-LA", "LP", "AR", "LP-LA_b", "AR-LA_b", "LP-LA_pairs"):
        code, out, err = run(["estimate", data, "--lags", 1, "--horizons", "1-3", "--method", method, "--boot-draws", 100], capsys)
        assert code == 0, err
        rows = _rows(out)
        assert rows[0] == ["horizon", "point", "se", "lo", "hi", "method"]
        assert [r[0] for r in rows[1:]] == ["1", "2", "3"]
        assert all(float(r[3]) <= float(r[1]) <= float(r[4]) for r in rows[1:]) or method == "AR-LA_b"


def test_estimate_intervals_cover_truth_across_seeds(ar1_dgp, tmp_path, capsys):
    hits = []
    for seed in range(10):
        data = tmp_path / f"y{seed}.csv"
        run(["simulate", ar1_dgp, "--T", 240, "--seed", seed, "--out", data], capsys)
        code, out, _ = run(["estimate", data, "--lags", 1, "--horizons", "1-12", "--boot-draws", 300, "--seed", seed], capsys)
        assert code == 0
        for h, _, _, lo, hi, _ in _rows(out)[1:]:
            hits.append(float(lo) <= 0.5 ** int(h) <= float(hi))
    assert np.mean(hits) >= 0.8


def test_subprocess_pipeline(ar1_dgp, tmp_path):
    sim = subprocess.run(
        [sys.executable, "-m", "lpinfer", "simulate", str(ar1_dgp), "--T", "100", "--seed", "2"],
        capture_output=True, text=True, check=True,
    )
    est = subprocess.run(
        [sys.executable, "-m", "lpinfer", "estimate", "-", "--lags", "1", "--horizons", "1,2", "--method", "LP-LA"],
        input=sim.stdout, capture_output=True, text=True,
    )
    assert est.returncode == 0, est.stderr
    assert len(_rows(est.stdout)) == 3


def test_estimate_rejects_bad_input(tmp_path, capsys):
    vals = np.random.default_rng(0).standard_normal((60, 2))
    good = "a,b\n" + "".join(f"{x!r},{y!r}\n" for x, y in vals.tolist())
    p = tmp_path / "d.csv"
    p.write_text(good.replace(f"\n{vals[2, 0].item()!r},", "\nabc,", 1))
    code, _, err = run(["estimate", p, "--method", "LP-LA"], capsys)
    assert code == 2 and "row" in err and "column" in err
    p.write_text(good)
    assert run(["estimate", p, "--lags", 0, "--method", "LP-LA"], capsys)[0] == 2
    assert run(["estimate", p, "--horizons", "0-3", "--method", "LP-LA"], capsys)[0] == 2
    assert run(["estimate", p, "--shock-weight", "1,2,3", "--method", "LP-LA"], capsys)[0] == 2
    assert run(["estimate", p, "--response", "zzz", "--method", "LP-LA"], capsys)[0] == 2
    code, out, _ = run(["estimate", p, "--response", "b", "--shock-weight", "a", "--method", "LP-LA", "--horizons", "2"], capsys)
    assert code == 0 and len(_rows(out)) == 2
    p.write_text("a\n" + "\n".join(str(k) for k in range(10)) + "\n")
    assert run(["estimate", p, "--method", "LP-LA"], capsys)[0] == 2
    # a deterministic sinusoid obeys an exact recursion, so its lags are collinear
    p.write_text("a\n" + "".join(f"{math.sin(k)!r}\n" for k in range(60)))
    code, _, err = run(["estimate", p, "--method", "LP-LA"], capsys)
    assert code == 4 and "condition number" in err


def test_read_series_missing_cell(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("a,b\n" + "1,2\n" * 20 + "3,\n" + "1,2\n" * 20)
    with pytest.raises(ConfigInvalid, match="row 22"):
        read_series(p)


def _tiny_experiment(tmp_path):
    p = tmp_path / "exp.json"
    p.write_text(json.dumps({
        "schema_version": 1,
        "experiments": [{"dgp": {"kind": "ar1", "rho": 0.9}, "methods": ["LP-LA_b", "AR"], "horizons": [1, 4],
                         "reps": 3, "bootstrap_draws": 60}],
    }))
    return p


def test_mc_reps1_twice_identical(tmp_path, capsys):
    exp = _tiny_experiment(tmp_path)
    for tag in "ab":
        code, _, err = run(["mc", exp, "--reps", 1, "--seed", 7, "--threads", 1, "--out", tmp_path / tag], capsys)
        assert code == 0, err
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    tab = McResultTable.from_csv(tmp_path / "a.csv")
    assert len(tab.rows) == 4 and {r.reps for r in tab.rows} == {1}
    assert McResultTable.from_json(tmp_path / "a.json") == tab


def test_mc_config_errors_name_field(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"schema_version": 1, "experiments": [{"dgp": {"kind": "ar1", "rho": 0.5}, "methods": ["LP"]}]}))
    code, _, err = run(["mc", p], capsys)
    assert code == 2 and "horizons" in err
    p.write_text('{"schema_version": 1, "experiments": [')
    code, _, err = run(["mc", p], capsys)
    assert code == 2 and "malformed JSON" in err
    p.write_text(json.dumps({"schema_version": 1, "experiments": [{"dgp": {"kind": "ar1"}, "horizons": [1], "methods": ["LP"]}]}))
    code, _, err = run(["mc", p], capsys)
    assert code == 2 and "dgp.rho" in err
    assert run(["mc"], capsys)[0] == 2


def test_bundled_supplement_layout():
    configs, _ = load_experiment_file(bundled("var4_supplement.json"))
    assert len(configs) == 4
    keys = {(c.dgp.rho, m.label, h) for c in configs for m in c.methods for h in c.horizons}
    assert len(keys) == 4 * 5 * 5


def test_compare_exit_codes(tmp_path, capsys):
    ref = McResultTable.from_csv(bundled("var4_reference.csv"))
    obs = McResultTable([r for r in ref.rows if r.method == "LP-LA_b"])
    obs.to_csv(tmp_path / "obs.csv")
    code, out, _ = run(["compare", tmp_path / "obs.csv", "paper_var4"], capsys)
    assert code == 0 and "FAIL" not in out
    text = (tmp_path / "obs.csv").read_text().replace("0.91000000000000003", "0.85", 1)
    (tmp_path / "bad.csv").write_text(text)
    code, out, _ = run(["compare", tmp_path / "bad.csv", "paper_var4"], capsys)
    assert code == 1 and out.count("FAIL") == 1
    (tmp_path / "other.csv").write_text("dgp,method,horizon,coverage,median_length,failed,reps\nx,LP,1,0.9,1,0,10\n")
    assert run(["compare", tmp_path / "other.csv", "paper_var4"], capsys)[0] == 2
