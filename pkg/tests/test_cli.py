import json

import pytest

from nonconv.cli import build_parser, load_config, main
from nonconv.exceptions import ConfigInvalid
from nonconv.models import Suite


def write_config(tmp_path, **overrides):
    payload = {
        "model": "bernoulli",
        "function": "product2",
        "suites": ["asclt"],
        "horizon": {"n_max": 1000, "calibration_lanes": 5, "asclt_paths": 10, "U": 20},
        "seed": 7,
    }
    payload.update(overrides)
    path = tmp_path / "experiment.json"
    path.write_text(json.dumps(payload), encoding="utf-8")
    return str(path)


def read(path):
    return json.loads(path.read_text(encoding="utf-8"))


# ----- COMMANDS

def test_list_suites(capsys):
    assert main(["list-suites"]) == 0
    out = capsys.readouterr().out.split()
    assert out == [s.value for s in Suite]


def test_describe_two_state(capsys):
    assert main(["describe", "two-state"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["second_eigenvalue"] == pytest.approx(0.4)
    assert data["psi"][0] == pytest.approx(0.4)
    assert len(data["psi"]) == 5


def test_describe_unknown_entity():
    assert main(["describe", "no-such-model"]) == 2


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        build_parser().parse_args(["--version"])
    assert exc.value.code == 0
    assert "nonconv" in capsys.readouterr().out


# ----- CONFIG

def test_missing_seed_is_rejected(tmp_path):
    path = tmp_path / "experiment.json"
    path.write_text(json.dumps({"model": "bernoulli", "function": "product2", "suites": ["asclt"]}), encoding="utf-8")
    with pytest.raises(ConfigInvalid):
        load_config(str(path))
    assert main(["run", str(path)]) == 2


def test_unknown_keys_are_rejected(tmp_path):
    path = write_config(tmp_path, colour="blue")
    assert main(["run", path, "--out", str(tmp_path / "out")]) == 2


def test_missing_file_is_config_error(tmp_path):
    assert main(["run", str(tmp_path / "absent.json")]) == 2


def test_unknown_model_name_is_config_error(tmp_path):
    path = write_config(tmp_path, model="no-such-model")
    assert main(["run", path, "--out", str(tmp_path / "out")]) == 2


def test_seed_override(tmp_path):
    config = load_config(write_config(tmp_path), seed_override=99)
    assert config.seed == 99


# ----- RUNS

def test_short_asclt_run_is_inconclusive(tmp_path):
    out = tmp_path / "out"
    assert main(["run", write_config(tmp_path), "--out", str(out)]) == 0
    report = read(out / "asclt.json")
    assert report["suite"] == "asclt"
    assert report["verdict"] == "inconclusive"
    assert report["warning"] is True
    assert report["payload"]["points"][0]["pass"] in (True, False)
    assert read(out / "covariance.json")["R11"] == pytest.approx(0.25)
    summary = read(out / "summary.json")
    assert summary["exit_code"] == 0
    assert summary["suites"]["asclt"]["verdict"] == "inconclusive"
    assert (out / "asclt_ks.csv").read_text(encoding="utf-8").splitlines()[0] == "n,ks,threshold,pass"


def test_runs_are_deterministic(tmp_path):
    path = write_config(tmp_path, suites=["asclt", "mixing"])
    assert main(["run", path, "--out", str(tmp_path / "a")]) == 0
    assert main(["run", path, "--out", str(tmp_path / "b"), "--threads", "3"]) == 0
    for name in ("asclt.json", "mixing.json", "covariance.json", "summary.json", "mixing_profile.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_degenerate_model_fails_with_exit_one(tmp_path):
    path = write_config(tmp_path, model={"kind": "iid", "bernoulli": 1.0})
    out = tmp_path / "out"
    assert main(["run", path, "--out", str(out)]) == 1
    assert read(out / "asclt.json")["verdict"] == "fail"
    assert read(out / "summary.json")["failed"] == ["asclt"]


def test_mixing_on_dyadic_map_is_inconclusive(tmp_path):
    path = write_config(tmp_path, model="dyadic", suites=["mixing"])
    out = tmp_path / "out"
    assert main(["run", path, "--out", str(out)]) == 0
    report = read(out / "mixing.json")
    assert report["verdict"] == "inconclusive"
    assert report["warning"] is True


def test_seed_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("NONCONV_SEED", "123")
    path = write_config(tmp_path, suites=["mixing"], model="two-state")
    out = tmp_path / "out"
    assert main(["run", path, "--out", str(out)]) == 0
    assert read(out / "mixing.json")["provenance"]["seed"] == "123"


def test_variance_suite_end_to_end(tmp_path):
    path = write_config(tmp_path, suites=["variance"], horizon={"N": 2000, "replicas": 200, "U": 20})
    out = tmp_path / "out"
    assert main(["run", path, "--out", str(out)]) == 0
    report = read(out / "variance.json")
    assert report["verdict"] == "pass"
    assert report["payload"]["R11"] == pytest.approx(0.25)
    lines = (out / "variance_finals.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "replica,value"
    assert len(lines) == 201


def test_covariance_suite_end_to_end(tmp_path):
    verdicts = []
    for seed in range(3):
        path = write_config(tmp_path, suites=["covariance"], seed=seed,
                            horizon={"t": 2000, "replicas": 200, "U": 20})
        out = tmp_path / f"out{seed}"
        code = main(["run", path, "--out", str(out)])
        report = read(out / "covariance_check.json")
        assert code == (0 if report["verdict"] == "pass" else 1)
        assert report["payload"]["drift"]["t_grid"] == [250, 500, 1000, 2000]
        assert [e["i"] for e in report["payload"]["comparison"]] == [1, 1, 2]
        assert read(out / "covariance.json")["matrix"] == pytest.approx([[1 / 16, 1 / 32], [1 / 32, 1 / 16]])
        verdicts.append(report["verdict"])
    assert verdicts.count("pass") >= 2


def test_lil_suite_end_to_end(tmp_path):
    path = write_config(tmp_path, suites=["lil"],
                        horizon={"n_max": 2000, "lil_seeds": 10, "calibration_lanes": 20, "U": 20})
    out = tmp_path / "out"
    code = main(["run", path, "--out", str(out)])
    report = read(out / "lil.json")
    assert code == (1 if report["verdict"] == "fail" else 0)
    assert len(report["payload"]["maxima"]) == 10
    low, high = report["payload"]["band"]
    assert 0.0 <= low < high
    lines = (out / "lil_maxima.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "seed,max_abs_f"
    assert len(lines) == 11


def test_blocks_suite_end_to_end(tmp_path):
    path = write_config(tmp_path, suites=["blocks"], horizon={"t_grid": [256, 1024, 4096], "replicas": 50})
    out = tmp_path / "out"
    code = main(["run", path, "--out", str(out)])
    report = read(out / "blocks.json")
    assert code == (1 if report["verdict"] == "fail" else 0)
    assert [c["component"] for c in report["payload"]["components"]] == [1, 2]
    assert (out / "blocks_schedule.csv").read_text(encoding="utf-8").splitlines()[0] == "j,a,b,r"
    assert read(out / "summary.json")["suites"]["blocks"]["verdict"] == report["verdict"]
