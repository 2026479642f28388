import csv
import io
import json
import math

import pytest

from boxen import cli
from boxen.model import ConfigError

GOLDEN = {
    "simulate": "trial,seed,mse,phi_on,phi_off,iters,kkt_residual,converged,se_mse,se_phi_on,se_phi_off",
    "sweep": "axis,value,estimator,status,theory_mse,theory_phi_on,theory_phi_off,emp_mse,emp_phi_on,"
             "emp_phi_off,se_mse,se_phi_on,se_phi_off,trials,nonconverged",
    "trace": "lambda1,lambda2,objective,round",
    "predict": "tau,beta,theta,mse,phi_on,phi_off",
}


def read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# manifest_sha256=")
    return lines[1], list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))


def test_column_schemas_are_pinned():
    assert ",".join(cli.SIMULATE_COLUMNS) == GOLDEN["simulate"]
    assert ",".join(cli.SWEEP_COLUMNS) == GOLDEN["sweep"]
    assert ",".join(cli.TRACE_COLUMNS) == GOLDEN["trace"]
    assert ",".join(cli.PREDICT_COLUMNS) == GOLDEN["predict"]


def test_predict_record(fig1_file, capsys, tmp_path):
    out = tmp_path / "p.csv"
    assert cli.main(["predict", "--config", str(fig1_file), "--out", str(out)]) == 0
    rec = json.loads(capsys.readouterr().out)
    assert list(rec) == cli.PREDICT_COLUMNS
    assert all(math.isfinite(v) for v in rec.values()) and rec["mse"] >= 0
    header, rows = read_csv(out)
    assert header == GOLDEN["predict"] and float(rows[0]["mse"]) == rec["mse"]
    man = json.loads((tmp_path / "p.csv.manifest.json").read_text())
    assert man["command"] == "predict" and man["config"]["sigma_z2"] == pytest.approx(0.2)


def test_predict_no_uncertainty_identity(fig1_file, capsys):
    assert cli.main(["predict", "--config", str(fig1_file), "--set", "eps2=0"]) == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["mse"] == pytest.approx(0.7 * rec["tau"] ** 2 - 0.2, abs=1e-12)


def test_missing_lambda1_names_field(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("delta = 0.7\nkappa = 0.1\neps2 = 0.1\nsnr = 0.5\nlambda2 = 0.5\n")
    assert cli.main(["predict", "--config", str(cfg)]) == 1
    assert "lambda1" in capsys.readouterr().err


@pytest.mark.parametrize("override", ["lambda1=abc", "kappa=2", "bogus=1", "sigma_z2=0.2", "u=0.5"])
def test_invalid_input_exit_code(fig1_file, override):
    assert cli.main(["predict", "--config", str(fig1_file), "--set", override]) == 1


def test_missing_config_file(tmp_path):
    assert cli.main(["predict", "--config", str(tmp_path / "nope.cfg")]) == 1


def test_numerical_failure_exit_code(fig1_file, monkeypatch):
    from boxen.theory import SaddleError

    def boom(*a, **k):
        raise SaddleError("bracket exhausted")

    monkeypatch.setattr(cli, "predict", boom)
    assert cli.main(["predict", "--config", str(fig1_file)]) == 2


def test_simulate_nonconvergence_exit_code(fig1_file, tmp_path, monkeypatch):
    from boxen import experiments
    from boxen.solver import SolverOptions

    orig = experiments.simulate

    def limited(*a, **k):
        k["opts"] = SolverOptions(max_iters=2)
        return orig(*a, **k)

    monkeypatch.setattr(cli, "simulate", limited)
    out = tmp_path / "s.csv"
    assert cli.main(["simulate", "--config", str(fig1_file), "--n", "50", "--trials", "2", "--out", str(out)]) == 2
    _, rows = read_csv(out)
    assert [r["converged"] for r in rows] == ["false", "false", "0/2"]


def test_simulate_deterministic_and_manifest_roundtrip(fig1_file, tmp_path):
    a, b, c = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "c.csv"
    args = ["simulate", "--config", str(fig1_file), "--n", "60", "--trials", "3", "--seed", "4"]
    assert cli.main(args + ["--out", str(a)]) == 0
    assert cli.main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert cli.main(["simulate", "--manifest", str(a) + ".manifest.json", "--out", str(c)]) == 0
    assert c.read_bytes() == a.read_bytes()
    header, rows = read_csv(a)
    assert header == GOLDEN["simulate"]
    assert [r["trial"] for r in rows] == ["0", "1", "2", "summary"]
    assert [r["seed"] for r in rows[:3]] == ["4", "5", "6"]
    assert rows[-1]["converged"] == "3/3"


def test_simulate_rejects_small_n(fig1_file):
    assert cli.main(["simulate", "--config", str(fig1_file), "--n", "5", "--trials", "1"]) == 1
    assert cli.main(["simulate", "--config", str(fig1_file), "--n", "50", "--trials", "0"]) == 1


def test_simulate_zero_estimator_at_huge_lambda1(fig1_file, tmp_path):
    out = tmp_path / "z.csv"
    assert cli.main(["simulate", "--config", str(fig1_file), "--set", "lambda1=1000", "--n", "100",
                     "--trials", "20", "--out", str(out)]) == 0
    _, rows = read_csv(out)
    s = rows[-1]
    # kappa n entries are exactly one and the estimate is exactly zero
    assert float(s["mse"]) == pytest.approx(0.1, abs=3 * float(s["se_mse"]) + 1e-12)


def test_sweep_theory_only(fig1_file, tmp_path):
    out = tmp_path / "sw.csv"
    vals = "0.05,0.2,0.5,2"
    assert cli.main(["sweep", "--config", str(fig1_file), "--axis", "lambda2", "--values", vals,
                     "--trials", "0", "--estimators", "box_en,standard_en", "--out", str(out)]) == 0
    header, rows = read_csv(out)
    assert header == GOLDEN["sweep"]
    assert [(r["value"], r["estimator"]) for r in rows][:2] == [("0.05", "box_en"), ("0.05", "standard_en")]
    assert all(r["status"] == "ok" for r in rows)
    for i in range(0, len(rows), 2):
        assert float(rows[i]["theory_mse"]) <= float(rows[i + 1]["theory_mse"])


@pytest.mark.parametrize("axis, values, direction", [("eps2", "0,0.05,0.1,0.2", 1), ("delta", "0.5,0.7,0.9,1.2", -1)])
def test_sweep_trends(fig1_file, tmp_path, axis, values, direction):
    out = tmp_path / "t.csv"
    assert cli.main(["sweep", "--config", str(fig1_file), "--axis", axis, "--values", values,
                     "--trials", "0", "--out", str(out)]) == 0
    mses = [float(r["theory_mse"]) for r in read_csv(out)[1]]
    assert all(direction * (b - a) >= 0 for a, b in zip(mses, mses[1:]))


def test_sweep_with_simulation(fig1_file, tmp_path):
    out = tmp_path / "s.csv"
    assert cli.main(["sweep", "--config", str(fig1_file), "--axis", "lambda1", "--values", "0.1,1",
                     "--n", "60", "--trials", "3", "--out", str(out)]) == 0
    rows = read_csv(out)[1]
    assert all(r["trials"] == "3" and r["emp_mse"] != "" for r in rows)


def test_sweep_failed_point_recorded(fig1_file, tmp_path):
    out = tmp_path / "f.csv"
    code = cli.main(["sweep", "--config", str(fig1_file), "--axis", "eps2", "--values", "0.1,1.5",
                     "--trials", "0", "--out", str(out)])
    rows = read_csv(out)[1]
    assert code == 2
    assert rows[0]["status"] == "ok" and rows[1]["status"] != "ok"


def test_sweep_bad_estimator(fig1_file):
    assert cli.main(["sweep", "--config", str(fig1_file), "--axis", "lambda2", "--values", "1",
                     "--trials", "0", "--estimators", "lasso"]) == 1


def test_tune_single_point(fig1_file, tmp_path, capsys):
    out = tmp_path / "tr.csv"
    assert cli.main(["tune", "--config", str(fig1_file), "--grid-l1", "0.3", "--grid-l2", "0.7",
                     "--out", str(out)]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["lambda1_star"] == 0.3 and res["lambda2_star"] == 0.7
    header, rows = read_csv(out)
    assert header == GOLDEN["trace"] and len(rows) == 1


def test_tune_support_default_omega(fig1_file, capsys):
    assert cli.main(["tune", "--config", str(fig1_file), "--objective", "support_score",
                     "--grid-l1", "0.1,1,2", "--grid-l2", "0.5"]) == 0
    assert json.loads(capsys.readouterr().out)["omega"] == 0.5


def test_tune_omega_without_support_objective(fig1_file):
    assert cli.main(["tune", "--config", str(fig1_file), "--omega", "0.3"]) == 1
    assert cli.main(["tune", "--config", str(fig1_file), "--grid-l1", "1,0.1"]) == 1


def test_config_parsing():
    raw = cli.read_config_text("delta: 0.7\n# comment\nkappa = 0.1  # trailing\neps2 = 0\nsnr = 0.5\n"
                               "lambda1 = 0.1\nlambda2 = 1\nl = -inf\nu = inf\n"
                               "prior.atoms = [(1.0, 0.5), (2.0, 0.5)]\nprior.unit_variance = true\n")
    cfg, prior = cli.build_problem(raw)
    assert cfg.sigma_z2 == pytest.approx(0.2) and cfg.l == -math.inf and cfg.u == math.inf
    assert prior.second_moment == pytest.approx(1.0)


def test_config_parsing_errors():
    with pytest.raises(ConfigError) as info:
        cli.read_config_text("delta 0.7\n")
    assert "line 1" in str(info.value)
    base = {"delta": 0.7, "kappa": 0.1, "eps2": 0.1, "lambda1": 0.1, "lambda2": 0.5}
    with pytest.raises(ConfigError):
        cli.build_problem(base)  # neither sigma_z2 nor snr
    with pytest.raises(ConfigError):
        cli.build_problem({**base, "sigma_z2": 0.2, "snr": 0.5})
    with pytest.raises(ConfigError):
        cli.build_problem({**base, "sigma_z2": 0.2, "prior.atoms": "nope"})


def test_manifest_hash_ignores_timestamp(fig1):
    from boxen.model import Prior

    a = cli.make_manifest("predict", fig1, Prior.bernoulli())
    b = dict(a, timestamp="1970-01-01T00:00:00+00:00")
    assert cli.manifest_hash(a) == cli.manifest_hash(b)
    assert cli.manifest_hash(a) != cli.manifest_hash(dict(a, seed=1))
