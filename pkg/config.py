"""
JSON experiment configuration for the `estimate` command.

Example:

    {
      "density": {"type": "uniform", "body": {"type": "ball", "center": [0, 0], "radius": 1}},
      "G": {"type": "ball", "center": [0, 0], "radius": 1},
      "integrand": {"name": "halfspace_indicator", "a": [1, 0], "b": 0},
      "mode": "multi",
      "n": 10000,
      "n0": 50,
      "reps": 50,
      "seed": 1234,
      "out": "./data/estimate/exp_0",
      "reference": 0.5,
      "check": {"reference": 0.5, "tolerance": 0.02}
    }

"n0" may be "from-theorem", together with "schedule": {"eps": 0.1, "variant": "bounded"} and
class parameters, either "class_params": {"r": .., "R": .., "kappa": ..} or derived from a
gaussian density.
"""
import json
import os
from dataclasses import asdict, dataclass

from densities import ClassParams, ClassVariant, GaussianDensity, density_from_dict, gaussian_class_params
from estimators import EstimatorConfig, EstimatorMode, integrand_from_dict
from geometry import Ball, body_from_dict

FROM_THEOREM = "from-theorem"
_KEYS = {"density", "G", "integrand", "mode", "n", "n0", "reps", "seed", "out", "parallel", "reference",
         "check", "schedule", "class_params"}


class ConfigError(Exception):
    pass


def _require(desc, key, path, kinds):
    if key not in desc:
        raise ConfigError(f"{path}{key}: missing required key")
    value = desc[key]
    if not isinstance(value, kinds) or isinstance(value, bool):
        raise ConfigError(f"{path}{key}: expected {_kind_name(kinds)}, got {type(value).__name__}")
    return value


def _optional(desc, key, path, kinds, default=None):
    if key not in desc or desc[key] is None:
        return default
    return _require(desc, key, path, kinds)


def _kind_name(kinds):
    kinds = kinds if isinstance(kinds, tuple) else (kinds,)
    return " or ".join(k.__name__ for k in kinds)


@dataclass(frozen=True)
class ExperimentConfig:
    density: dict
    integrand: dict
    n: int
    n0: int | str
    seed: int
    G: dict | None = None
    mode: str = "multi"
    reps: int = 1
    out: str = "./data/estimate/exp_0"
    parallel: int | None = None
    reference: float | None = None
    check: dict | None = None
    schedule: dict | None = None
    class_params: dict | None = None

    @classmethod
    def from_dict(cls, desc: dict) -> "ExperimentConfig":
        if not isinstance(desc, dict):
            raise ConfigError(f"config: expected a JSON object, got {type(desc).__name__}")
        unknown = sorted(set(desc) - _KEYS)
        if unknown:
            raise ConfigError(f"{unknown[0]}: unknown key")
        n0 = desc.get("n0")
        if n0 != FROM_THEOREM:
            n0 = _require(desc, "n0", "", int)
        cfg = cls(
            density=_require(desc, "density", "", dict),
            integrand=_require(desc, "integrand", "", dict),
            n=_require(desc, "n", "", int),
            n0=n0,
            seed=_require(desc, "seed", "", int),
            G=_optional(desc, "G", "", dict),
            mode=_optional(desc, "mode", "", str, "multi"),
            reps=_optional(desc, "reps", "", int, 1),
            out=_optional(desc, "out", "", str, cls.out),
            parallel=_optional(desc, "parallel", "", int),
            reference=_optional(desc, "reference", "", (int, float)),
            check=_optional(desc, "check", "", dict),
            schedule=_optional(desc, "schedule", "", dict),
            class_params=_optional(desc, "class_params", "", dict),
        )
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, text: str, source: str = "<config>") -> "ExperimentConfig":
        try:
            desc = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{source}:{e.lineno}:{e.colno}: {e.msg}") from e
        try:
            return cls.from_dict(desc)
        except ConfigError as e:
            raise ConfigError(f"{source}: {e}") from e

    @classmethod
    def load(cls, path: str) -> "ExperimentConfig":
        try:
            with open(path) as f:
                text = f.read()
        except OSError as e:
            raise ConfigError(f"{path}: {e.strerror}") from e
        return cls.from_json(text, source=path)

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def replace(self, **changes) -> "ExperimentConfig":
        desc = self.to_dict()
        desc.update({k: v for k, v in changes.items() if v is not None})
        return ExperimentConfig.from_dict(desc)

    def validate(self):
        if self.mode not in ("multi", "single"):
            raise ConfigError(f"mode: expected multi or single, got {self.mode!r}")
        if self.n < 1:
            raise ConfigError(f"n: must be at least 1, got {self.n}")
        if self.n0 != FROM_THEOREM and self.n0 < 0:
            raise ConfigError(f"n0: must be nonnegative, got {self.n0}")
        if self.reps < 1:
            raise ConfigError(f"reps: must be at least 1, got {self.reps}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed: must be an unsigned 64-bit integer, got {self.seed}")
        if self.parallel is not None and self.parallel < 1:
            raise ConfigError(f"parallel: must be at least 1, got {self.parallel}")
        if self.check is not None:
            for key in ("reference", "tolerance"):
                _require(self.check, key, "check.", (int, float))
        if self.n0 == FROM_THEOREM:
            if self.schedule is None:
                raise ConfigError("schedule: required when n0 is from-theorem")
            eps = _require(self.schedule, "eps", "schedule.", (int, float))
            if not 0 < eps < 0.5:
                raise ConfigError(f"schedule.eps: must lie in (0, 1/2), got {eps}")
            variant = self.schedule.get("variant", "bounded")
            if variant not in ("bounded", "average"):
                raise ConfigError(f"schedule.variant: expected bounded or average, got {variant!r}")
        # building the runtime objects surfaces every descriptor error with its key path
        self.build_density()
        self.build_integrand()
        self.build_G()
        if self.n0 == FROM_THEOREM:
            self.build_class_params()

    def build_density(self):
        try:
            return density_from_dict(self.density)
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"density: {_reason(e)}") from e

    def build_integrand(self):
        dim = self.build_density().dim
        try:
            return integrand_from_dict(self.integrand, dim)
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"integrand: {_reason(e)}") from e

    def build_G(self):
        """G from the config; defaults to the support when bounded, else the unit ball."""
        density = self.build_density()
        if self.G is None:
            if density.body.bounded:
                return density.body
            return Ball([0.0] * density.dim, 1.0)
        try:
            G = body_from_dict(self.G)
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"G: {_reason(e)}") from e
        if G.dim != density.dim:
            raise ConfigError(f"G: dimension mismatch, G is {G.dim}-dimensional, density is {density.dim}")
        if not G.bounded:
            raise ConfigError("G: must be a bounded body")
        return G

    def build_class_params(self) -> ClassParams:
        variant = ClassVariant((self.schedule or {}).get("variant", "bounded"))
        density = self.build_density()
        try:
            if self.class_params is not None:
                return ClassParams.from_dict({"d": density.dim, "variant": variant.value,
                                              "G": self.build_G().to_dict(), **self.class_params})
            if isinstance(density, GaussianDensity):
                params = gaussian_class_params(density)
                return ClassParams(d=params.d, r=params.r, R=params.R, log_kappa=params.log_kappa,
                                   variant=variant, G=params.G)
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"class_params: {_reason(e)}") from e
        raise ConfigError("class_params: required for from-theorem schedules of non-gaussian densities")

    def estimator_config(self, n: int | None = None, n0: int | None = None,
                         parallel: int | None = None) -> EstimatorConfig:
        if n0 is None:
            if self.n0 == FROM_THEOREM:
                raise ConfigError("n0: from-theorem has to be resolved to a step count first")
            n0 = self.n0
        return EstimatorConfig(
            density=self.build_density(),
            f=self.build_integrand(),
            G=self.build_G(),
            n=n or self.n,
            n0=n0,
            mode=EstimatorMode(self.mode),
            parallel=parallel or self.parallel or os.cpu_count() or 1,
        )


def _reason(e: Exception) -> str:
    if isinstance(e, KeyError):
        return f"missing key {e.args[0]!r}"
    return str(e)

