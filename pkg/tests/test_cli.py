import csv
import json

import pytest

from fpplab import FormatError
from fpplab.cli import main, resolve_config, build_parser
from fpplab.runner import RunConfig, emit_plotdata, to_csv, execute


def run_cli(args, tmp_path, name="run"):
    out = tmp_path / name
    code = main([*args, "--out", str(out)])
    return code, out


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_validate_prints_a1(tmp_path, capsys):
    code, _ = run_cli(["validate", "--dist", "atoms:0:0.1,1:0.9", "--d", "2"], tmp_path)
    assert code == 0
    out = capsys.readouterr().out
    assert "(A1) true" in out and "margin 0.4" in out


def test_estimate_mu_deterministic(tmp_path, capsys):
    code, out = run_cli(["estimate-mu", "--dist", "atoms:1:1.0", "--xi", "1,0", "--n", "8,16,32", "--replicas", "10",
                         "--seed", "7"], tmp_path)
    assert code == 0
    assert "mu_hat = 1.0" in capsys.readouterr().out
    rows = read_rows(out / "results.csv")
    assert [r["n"] for r in rows] == ["8", "16", "32"]
    assert all(float(r["var"]) == 0 for r in rows)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["summary"]["mu_hat"] == 1.0 and manifest["master_seed"] == 7


def test_csv_uses_lf_and_commas(tmp_path):
    _, out = run_cli(["estimate-mu", "--dist", "atoms:1:1.0", "--n", "4,8", "--replicas", "2"], tmp_path)
    raw = (out / "results.csv").read_bytes()
    assert b"\r" not in raw and raw.count(b"\n") == 3
    assert raw.startswith(b"experiment,d,dist,xi_or_theta,n,replicas,mean,var,ci,extra\n")


def test_unknown_experiment_is_usage_error(capsys):
    assert main(["bogus"]) == 64


def test_bad_flag_value_is_usage_error(tmp_path):
    assert main(["validate", "--d", "two"]) == 64
    assert run_cli(["validate", "--dist", "gauss:0:1"], tmp_path)[0] == 64


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["validate", "--dist", "uniform:0:1", "--out", str(blocker / "sub")]) == 74


def test_assumption_violation_exit(tmp_path):
    code, _ = run_cli(["estimate-mu", "--dist", "atoms:0:0.7,1:0.3", "--n", "4", "--replicas", "2"], tmp_path)
    assert code == 2
    code, _ = run_cli(["variance-scan", "--dist", "uniform:0:1", "--n", "4,8", "--replicas", "3"], tmp_path)
    assert code == 2


def test_resource_refusal_exit(tmp_path):
    code, _ = run_cli(["lambda", "--dist", "atoms:1:1.0", "--n", "20000000", "--M", "1", "--mu-ref", "1"], tmp_path)
    assert code == 3


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\ndist = atoms:1:1.0\nn = 4,8\nreplicas = 3\nseed = 11\n")
    args = build_parser().parse_args(["estimate-mu", "--config", str(cfg), "--replicas", "5"])
    rc = resolve_config("estimate-mu", args)
    assert rc.dist == "atoms:1:1.0" and rc.n_grid == (4, 8) and rc.master_seed == 11
    assert rc.replicas == 5


def test_config_unknown_key(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("colour = blue\n")
    assert main(["validate", "--config", str(cfg)]) == 64


def test_config_text_roundtrip():
    rc = RunConfig("coupling", dist="uniform:0:1", n_grid=(8, 16), xi=(1.0, 0.0), replicas=7, master_seed=3)
    lines = dict(line.split("=", 1) for line in rc.to_text().splitlines())
    again = RunConfig("coupling", **{k: v for k, v in lines.items() if k != "experiment"})
    assert again.to_dict() == rc.to_dict()


def test_rerun_from_manifest_is_byte_identical(tmp_path):
    code, first = run_cli(["estimate-mu", "--dist", "uniform:0.5:1.5", "--n", "6,12", "--replicas", "8",
                           "--seed", "5", "--xi", "3,4"], tmp_path, "a")
    assert code == 0
    code, second = run_cli(["estimate-mu", "--manifest", str(first / "manifest.json"), "--workers", "3"],
                           tmp_path, "b")
    assert code == 0
    assert (first / "results.csv").read_bytes() == (second / "results.csv").read_bytes()


def test_default_workers_from_env(tmp_path, monkeypatch):
    monkeypatch.setenv("FPP_LAB_WORKERS", "2")
    args = build_parser().parse_args(["validate"])
    assert resolve_config("validate", args).workers == 2


# --- plot data ---------------------------------------------------------------


def test_plotdata_zero_gaps(tmp_path):
    code, out = run_cli(["convergence-gap", "--dist", "atoms:1:1.0", "--n", "4,8,16", "--replicas", "2",
                         "--mu-ref", "1"], tmp_path)
    assert code == 0
    emit_plotdata(out)
    assert "no positive gaps; fit skipped" in (out / "summary.txt").read_text()


def test_plotdata_variance_columns(tmp_path):
    code, out = run_cli(["variance-scan", "--dist", "atoms:1:0.8,2:0.2", "--n", "4,8,16", "--replicas", "10",
                         "--theta", "0,0.5"], tmp_path)
    assert code == 0
    files = emit_plotdata(out)
    dats = sorted(p for p in files if p.name.startswith("variance_theta"))
    assert len(dats) == 2
    rows = [line.split() for line in dats[0].read_text().splitlines() if not line.startswith("#")]
    assert len(rows) == 3 and all(len(r) == 2 for r in rows)
    assert "slope" in (out / "summary.txt").read_text()


def test_plotdata_coupling_monotonicity(tmp_path):
    code, out = run_cli(["coupling", "--dist", "uniform:0:1", "--n", "8,16,32", "--replicas", "10"], tmp_path)
    assert code == 0
    emit_plotdata(out)
    assert "p_neq nonincreasing in n: yes" in (out / "summary.txt").read_text()


def test_plotdata_concentration(tmp_path):
    code, out = run_cli(["concentration", "--dist", "atoms:1:1.0", "--n", "8", "--replicas", "4", "--half-width",
                         "1", "--u", "0,0.1"], tmp_path)
    assert code == 0
    emit_plotdata(out)
    assert (out / "tail.dat").exists()


def test_plotdata_missing_columns(tmp_path):
    code, out = run_cli(["convergence-gap", "--dist", "atoms:1:1.0", "--n", "4,8", "--replicas", "2",
                         "--mu-ref", "1"], tmp_path)
    (out / "results.csv").write_text("n\n4\n8\n")
    with pytest.raises(FormatError):
        emit_plotdata(out)
    assert main(["plotdata", str(out)]) == 65


@pytest.mark.parametrize("argv", [
    ["oriented-speed", "--q", "1.0,0.0", "--horizon", "50", "--replicas", "3"],
    ["pc", "--radius", "6", "--replicas", "6"],
    ["vec-pc", "--horizon", "40", "--replicas", "6"],
    ["skeleton-demo", "--dist", "uniform:0.5:1.5", "--n", "16", "--M", "2", "--replicas", "3"],
    ["lambda", "--dist", "atoms:1:1.0", "--n", "3", "--M", "1", "--mu-ref", "1", "--l", "2"],
    ["expectation-gap", "--dist", "uniform:0:1", "--n", "8", "--replicas", "3"],
])
def test_every_experiment_runs(argv, tmp_path):
    code, out = run_cli(argv, tmp_path)
    assert code == 0
    assert (out / "results.csv").exists() and (out / "manifest.json").exists()
    emit_plotdata(out)


def test_lambda_cli_worked_instance(tmp_path):
    cfg = RunConfig("lambda", dist="atoms:1:1.0", n_grid=(3,), M=1, mu_ref=1.0)
    res = execute(cfg)
    assert res.summary["Lambda"]["3"] == -1.0
    assert "p=1,0x2" in to_csv(res)


def test_oriented_speed_cli_values(tmp_path):
    res = execute(RunConfig("oriented-speed", q=(1.0,), horizon=30, replicas=2))
    assert res.rows[0][1:3] == [1.0, 1.0]
