import csv
import json
import math

import pytest

import har_main


def write_config(path, **changes):
    desc = {
        "density": {"type": "uniform", "body": {"type": "ball", "center": [0, 0], "radius": 1}},
        "integrand": {"name": "constant", "c": 1.0},
        "n": 200,
        "n0": 3,
        "reps": 3,
        "seed": 1234,
    }
    desc.update(changes)
    path.write_text(json.dumps(desc))
    return str(path)


def read_csv(path):
    with open(path) as f:
        return list(csv.DictReader(f))


def run_json(capsys, argv):
    code = har_main.main(argv)
    return code, json.loads(capsys.readouterr().out) if code == 0 else None


def test_estimate_constant_integrand(tmp_path):
    out = tmp_path / "out"
    code = har_main.main(["estimate", "--config", write_config(tmp_path / "exp.json"), "--out", str(out)])
    assert code == 0
    rows = read_csv(out / "results.csv")
    assert [float(r["value"]) for r in rows] == [1.0, 1.0, 1.0]
    assert [r["rep"] for r in rows] == ["0", "1", "2"]
    assert {r["seed"] for r in rows} == {"1234"}
    assert len(read_csv(out / "timings.csv")) == 3
    summary = json.loads((out / "summary.json").read_text())
    assert summary["mean"] == 1.0
    assert summary["std_error"] == 0.0
    assert summary["kernel_steps"] == 3 * 200 * 3
    resolved = json.loads((out / "config.json").read_text())
    assert resolved["out"] == str(out)
    assert "parallel" not in resolved


def test_estimate_is_reproducible_across_parallelism(tmp_path):
    config = write_config(tmp_path / "exp.json", integrand={"name": "coordinate", "index": 1}, n=3000, reps=2,
                          reference=0.0)
    runs = []
    for name, parallel in (("a", "1"), ("b", "1"), ("c", "4")):
        out = tmp_path / name
        assert har_main.main(["estimate", "--config", config, "--out", str(out), "--parallel", parallel]) == 0
        runs.append(((out / "results.csv").read_bytes(), (out / "summary.json").read_bytes()))
    assert runs[0] == runs[1] == runs[2]
    summary = json.loads(runs[0][1])
    assert summary["mse"] >= 0.0
    assert abs(summary["mean"]) < 0.1


def test_estimate_seed_override_changes_values(tmp_path):
    config = write_config(tmp_path / "exp.json", integrand={"name": "coordinate", "index": 1}, reps=1)
    har_main.main(["estimate", "--config", config, "--out", str(tmp_path / "a")])
    har_main.main(["estimate", "--config", config, "--out", str(tmp_path / "b"), "--seed", "5"])
    a, b = read_csv(tmp_path / "a" / "results.csv"), read_csv(tmp_path / "b" / "results.csv")
    assert b[0]["seed"] == "5"
    assert a[0]["value"] != b[0]["value"]


def test_estimate_check_failure_exit_code(tmp_path):
    out = tmp_path / "out"
    config = write_config(tmp_path / "exp.json", check={"reference": 0.0, "tolerance": 0.01})
    assert har_main.main(["estimate", "--config", config, "--out", str(out)]) == 3
    summary = json.loads((out / "summary.json").read_text())
    assert summary["check"]["pass"] is False
    assert summary["check"]["deviation"] == 1.0


def test_estimate_config_errors(tmp_path):
    assert har_main.main(["estimate", "--config", str(tmp_path / "missing.json")]) == 2
    broken = tmp_path / "broken.json"
    broken.write_text("{\"n\": ")
    assert har_main.main(["estimate", "--config", str(broken)]) == 2
    assert har_main.main(["estimate", "--config", write_config(tmp_path / "bad.json", n=0)]) == 2


def test_estimate_impractical_schedule_is_a_config_error(tmp_path):
    config = write_config(tmp_path / "exp.json", density={"type": "gaussian", "sigma": [[1, 0], [0, 1]]},
                          n0="from-theorem", schedule={"eps": 0.1})
    assert har_main.main(["estimate", "--config", config, "--out", str(tmp_path / "out")]) == 2
    assert not (tmp_path / "out").exists()


def test_schedule_worked_example(capsys):
    code, payload = run_json(capsys, ["schedule", "--eps", "0.1", "--d", "3", "--r", "1", "--R", "2",
                                      "--kappa", "100"])
    assert code == 0
    assert payload["n"] == 100
    assert payload["impractical"] is True
    assert payload["n0"] == pytest.approx(6.528e31, rel=1e-3)
    assert payload["variant"] == "bounded"
    assert payload["params"]["d"] == 3
    assert payload["trace"]


def test_schedule_variants_and_sources(capsys, tmp_path):
    _, bounded = run_json(capsys, ["schedule", "--eps", "0.1", "--d", "3", "--r", "1", "--R", "2", "--kappa", "100"])
    _, average = run_json(capsys, ["schedule", "--eps", "0.1", "--d", "3", "--r", "1", "--R", "2", "--kappa", "100",
                                   "--variant", "average"])
    assert average["variant"] == "average"
    assert average["log_n0"] > bounded["log_n0"]
    _, huge = run_json(capsys, ["schedule", "--eps", "0.1", "--d", "3", "--r", "1", "--R", "2",
                                "--log-kappa", "800"])
    assert math.isfinite(huge["log_n0"])
    config = write_config(tmp_path / "exp.json", density={"type": "gaussian", "sigma": [[1, 0], [0, 1]]})
    code, from_config = run_json(capsys, ["schedule", "--eps", "0.2", "--config", config])
    assert code == 0
    assert from_config["params"]["d"] == 2


def test_schedule_errors(capsys):
    assert har_main.main(["schedule", "--eps", "0.7", "--d", "3", "--r", "1", "--R", "2", "--kappa", "100"]) == 2
    assert har_main.main(["schedule", "--eps", "0.1", "--d", "3", "--r", "1"]) == 2
    assert har_main.main(["schedule", "--eps", "0.1", "--d", "3", "--r", "1", "--R", "2", "--kappa", "1"]) == 2


def test_rstar_table(tmp_path):
    assert har_main.main(["rstar", "--d-max", "1", "--out", str(tmp_path / "one")]) == 0
    assert len(read_csv(tmp_path / "one" / "r_star.csv")) == 1
    assert har_main.main(["rstar", "--d-max", "100", "--out", str(tmp_path / "all")]) == 0
    rows = read_csv(tmp_path / "all" / "r_star.csv")
    assert [int(r["d"]) for r in rows] == list(range(1, 101))
    assert float(rows[1]["r_star"]) == pytest.approx(math.log(8.0 / 7.0), rel=1e-12)
    assert har_main.main(["rstar", "--d-max", "0", "--out", str(tmp_path / "none")]) == 2


def test_gaussian_params_identity(capsys):
    code, payload = run_json(capsys, ["gaussian-params", "--d", "2"])
    assert code == 0
    assert payload["r"] == pytest.approx(0.36542, abs=1e-5)
    assert payload["R"] == pytest.approx(0.70711, abs=1e-5)
    assert payload["kappa"] == pytest.approx(3.29744, abs=1e-5)
    assert payload["kappa_overflow_prone"] is False
    _, large = run_json(capsys, ["gaussian-params", "--d", "100"])
    assert large["kappa_overflow_prone"] is True
    assert math.isfinite(large["log_kappa"])


def test_gaussian_params_sigma_files(capsys, tmp_path):
    as_json = tmp_path / "sigma.json"
    as_json.write_text("[[4, 0], [0, 1]]")
    _, payload = run_json(capsys, ["gaussian-params", "--sigma", str(as_json)])
    assert payload["R"] == pytest.approx(math.sqrt(5.0) / 2.0, rel=1e-12)
    as_text = tmp_path / "sigma.txt"
    as_text.write_text("4 0\n0 1\n")
    _, from_text = run_json(capsys, ["gaussian-params", "--sigma", str(as_text)])
    assert from_text == payload
    indefinite = tmp_path / "indefinite.json"
    indefinite.write_text("[[1, 0], [0, -1]]")
    assert har_main.main(["gaussian-params", "--sigma", str(indefinite)]) == 2
    assert har_main.main(["gaussian-params"]) == 2


@pytest.mark.slow
def test_validate_quick(tmp_path):
    out = tmp_path / "validate"
    assert har_main.main(["validate", "--quick", "--out", str(out), "--parallel", "2"]) == 0
    rows = read_csv(out / "reports.csv")
    assert rows and all(r["pass"] == "True" for r in rows)
    assert len(json.loads((out / "reports.json").read_text())) == len(rows)
