import json
import math

import pytest

from config import FROM_THEOREM, ConfigError, ExperimentConfig
from densities import ClassVariant, GaussianDensity, UniformDensity
from estimators import EstimatorMode
from geometry import Ball, Box


def disk_config(**changes):
    desc = {
        "density": {"type": "uniform", "body": {"type": "ball", "center": [0, 0], "radius": 1}},
        "integrand": {"name": "halfspace_indicator", "a": [1, 0], "b": 0},
        "n": 100,
        "n0": 5,
        "seed": 7,
    }
    desc.update(changes)
    return desc


def gaussian_config(**changes):
    desc = {
        "density": {"type": "gaussian", "sigma": [[1, 0], [0, 1]]},
        "integrand": {"name": "coordinate", "index": 1},
        "n": 100,
        "n0": FROM_THEOREM,
        "seed": 0,
        "schedule": {"eps": 0.1},
    }
    desc.update(changes)
    return desc


def test_defaults_and_round_trip():
    cfg = ExperimentConfig.from_dict(disk_config())
    assert cfg.mode == "multi"
    assert cfg.reps == 1
    assert cfg.parallel is None
    assert ExperimentConfig.from_json(cfg.to_json()) == cfg
    assert "parallel" not in cfg.to_dict()


def test_unknown_key_is_reported():
    with pytest.raises(ConfigError, match="burn_in: unknown key"):
        ExperimentConfig.from_dict(disk_config(burn_in=10))


@pytest.mark.parametrize("key, value, message", [
    ("n", "100", "n: expected int, got str"),
    ("n0", 2.5, "n0: expected int, got float"),
    ("seed", True, "seed: expected int, got bool"),
    ("reps", 0, "reps: must be at least 1"),
    ("n", 0, "n: must be at least 1"),
    ("n0", -1, "n0: must be nonnegative"),
    ("seed", -3, "seed: must be an unsigned 64-bit integer"),
    ("mode", "parallel", "mode: expected multi or single"),
    ("parallel", 0, "parallel: must be at least 1"),
    ("check", {"reference": 0.5}, "check.tolerance: missing required key"),
])
def test_field_errors_name_the_key(key, value, message):
    with pytest.raises(ConfigError, match=message):
        ExperimentConfig.from_dict(disk_config(**{key: value}))


def test_missing_key():
    desc = disk_config()
    del desc["integrand"]
    with pytest.raises(ConfigError, match="integrand: missing required key"):
        ExperimentConfig.from_dict(desc)


def test_descriptor_errors_carry_their_section():
    with pytest.raises(ConfigError, match="density: unknown body type"):
        ExperimentConfig.from_dict(disk_config(density={"type": "uniform", "body": {"type": "torus"}}))
    with pytest.raises(ConfigError, match="density: missing key 'radius'"):
        ExperimentConfig.from_dict(disk_config(density={"type": "uniform", "body": {"type": "ball", "center": [0]}}))
    with pytest.raises(ConfigError, match="integrand: unknown integrand"):
        ExperimentConfig.from_dict(disk_config(integrand={"name": "sine"}))


def test_json_syntax_error_has_position():
    text = '{\n  "n": 100,\n  "n0" 5\n}'
    with pytest.raises(ConfigError, match=r"exp\.json:3:8"):
        ExperimentConfig.from_json(text, source="exp.json")


def test_load_reports_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="missing.json"):
        ExperimentConfig.load(str(tmp_path / "missing.json"))
    path = tmp_path / "exp.json"
    path.write_text(json.dumps(disk_config(n=3)))
    assert ExperimentConfig.load(str(path)).n == 3


def test_from_theorem_needs_schedule():
    with pytest.raises(ConfigError, match="schedule: required"):
        ExperimentConfig.from_dict(disk_config(n0=FROM_THEOREM))
    with pytest.raises(ConfigError, match="schedule.eps: must lie in"):
        ExperimentConfig.from_dict(gaussian_config(schedule={"eps": 0.5}))
    with pytest.raises(ConfigError, match="schedule.variant"):
        ExperimentConfig.from_dict(gaussian_config(schedule={"eps": 0.1, "variant": "tight"}))
    with pytest.raises(ConfigError, match="class_params: required"):
        ExperimentConfig.from_dict(disk_config(n0=FROM_THEOREM, schedule={"eps": 0.1}))


def test_G_defaults():
    assert ExperimentConfig.from_dict(disk_config()).build_G().to_dict() == Ball([0.0, 0.0], 1.0).to_dict()
    cfg = ExperimentConfig.from_dict(gaussian_config())
    assert cfg.build_G().to_dict() == Ball([0.0, 0.0], 1.0).to_dict()
    cfg = ExperimentConfig.from_dict(disk_config(G={"type": "box", "lo": [-0.5, -0.5], "hi": [0.5, 0.5]}))
    assert isinstance(cfg.build_G(), Box)


def test_G_must_match_and_be_bounded():
    with pytest.raises(ConfigError, match="G: dimension mismatch"):
        ExperimentConfig.from_dict(disk_config(G={"type": "ball", "center": [0, 0, 0], "radius": 1}))
    with pytest.raises(ConfigError, match="G: must be a bounded body"):
        ExperimentConfig.from_dict(disk_config(G={"type": "fullspace", "dim": 2}))


def test_class_params_from_gaussian():
    params = ExperimentConfig.from_dict(gaussian_config()).build_class_params()
    assert params.d == 2
    assert params.variant == ClassVariant.bounded
    assert params.kappa == pytest.approx(2.0 * math.sqrt(math.e), rel=1e-9)
    average = ExperimentConfig.from_dict(gaussian_config(schedule={"eps": 0.1, "variant": "average"}))
    assert average.build_class_params().variant == ClassVariant.average


def test_class_params_given_explicitly():
    cfg = ExperimentConfig.from_dict(disk_config(n0=FROM_THEOREM, schedule={"eps": 0.2},
                                                 class_params={"r": 0.5, "R": 1.0, "kappa": 4.0}))
    params = cfg.build_class_params()
    assert (params.d, params.r, params.R, params.kappa) == (2, 0.5, 1.0, 4.0)
    with pytest.raises(ConfigError, match="class_params: kappa must be at least"):
        ExperimentConfig.from_dict(disk_config(n0=FROM_THEOREM, schedule={"eps": 0.2},
                                               class_params={"r": 0.5, "R": 1.0, "kappa": 1.5}))


def test_replace_overrides_and_revalidates():
    cfg = ExperimentConfig.from_dict(disk_config())
    changed = cfg.replace(seed=99, out=None, parallel=2)
    assert changed.seed == 99
    assert changed.out == cfg.out
    assert changed.parallel == 2
    with pytest.raises(ConfigError):
        cfg.replace(n=0)


def test_estimator_config():
    cfg = ExperimentConfig.from_dict(disk_config(mode="single", parallel=3))
    est = cfg.estimator_config()
    assert isinstance(est.density, UniformDensity)
    assert (est.n, est.n0, est.mode, est.parallel) == (100, 5, EstimatorMode.single, 3)
    assert cfg.estimator_config(n=10, n0=2, parallel=1).n0 == 2
    assert ExperimentConfig.from_dict(disk_config()).estimator_config().parallel >= 1
    unresolved = ExperimentConfig.from_dict(gaussian_config())
    assert isinstance(unresolved.build_density(), GaussianDensity)
    with pytest.raises(ConfigError, match="resolved"):
        unresolved.estimator_config()
