"""
Experiment configuration: parsing, validation, hashing and JSON I/O.

A config is one JSON document; unknown keys at any level are rejected.
"""

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from bandit_env import BanditInstance, make_instance
from errors import ConfigError, DomainError, ReportIOError
from lemma_suite import LemmaSettings
from policies import DEFAULT_BETA_SCHEDULE, DEFAULT_SIGMA_SCHEDULE, PolicyMode, Schedule

LAB_VERSION = "0.1.0"

REQUIRED_KEYS = ("means", "mode", "T", "replications", "seed", "alpha")
OPTIONAL_KEYS = ("checkpoints", "sigma", "beta", "output_dir", "bands", "lemmas")


def _interval(name: str, value: Any) -> Tuple[float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(f"bands.{name} must be a [lower, upper] pair, got {value!r}")
    lower, upper = (float(v) for v in value)
    if not (math.isfinite(lower) and math.isfinite(upper)):
        raise ConfigError(f"bands.{name} must be finite, got {value!r}")
    if lower > upper:
        raise ConfigError(f"bands.{name} has lower > upper: {value!r}")
    return lower, upper


@dataclass(frozen=True)
class Bands:
    """Acceptance bands checked by the CLI"""
    optimal_ratio: Tuple[float, float] = (0.85, 1.15)
    suboptimal_ratio: Tuple[float, float] = (0.5, 1.5)
    coverage: Tuple[float, float] = (0.92, 0.97)
    ks_level: float = 0.01
    regret_slack: float = 3.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "optimal_ratio": list(self.optimal_ratio),
            "suboptimal_ratio": list(self.suboptimal_ratio),
            "coverage": list(self.coverage),
            "ks_level": self.ks_level,
            "regret_slack": self.regret_slack,
        }

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]]) -> "Bands":
        if data is None:
            return cls()
        if not isinstance(data, dict):
            raise ConfigError(f"bands block must be an object, got {data!r}")
        unknown = set(data) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ConfigError(f"unknown keys in bands block: {sorted(unknown)}")
        values: Dict[str, Any] = {}
        try:
            for key in ("optimal_ratio", "suboptimal_ratio", "coverage"):
                if key in data:
                    values[key] = _interval(key, data[key])
            for key in ("ks_level", "regret_slack"):
                if key in data:
                    values[key] = float(data[key])
        except (TypeError, ValueError):
            raise ConfigError(f"band values must be numbers: {data!r}")
        bands = cls(**values)
        if not 0.0 < bands.ks_level < 1.0:
            raise ConfigError(f"bands.ks_level must lie in (0, 1), got {bands.ks_level}")
        if not (math.isfinite(bands.regret_slack) and bands.regret_slack > 0.0):
            raise ConfigError(f"bands.regret_slack must be finite and positive, got {bands.regret_slack}")
        return bands


def default_checkpoints(horizon: int, n_arms: int) -> List[int]:
    """Geometric checkpoints {T/100, T/10, T/3, T}, dropping those before every arm is pulled"""
    raw = [round(horizon / 100), round(horizon / 10), round(horizon / 3), horizon]
    return sorted({int(c) for c in raw if c >= n_arms})


def _as_int(name: str, value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    # json.load accepts NaN and Infinity
    if isinstance(value, float) and (not math.isfinite(value) or not value.is_integer()):
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    return int(value)


@dataclass(frozen=True)
class ExperimentConfig:
    """A validated Monte Carlo experiment"""
    means: Tuple[float, ...]
    mode: PolicyMode
    horizon: int
    replications: int
    seed: int
    alpha: float
    checkpoints: Tuple[int, ...]
    sigma: Schedule = DEFAULT_SIGMA_SCHEDULE
    beta: Schedule = DEFAULT_BETA_SCHEDULE
    output_dir: str = "out"
    bands: Bands = field(default_factory=Bands)
    lemmas: LemmaSettings = field(default_factory=LemmaSettings)

    @property
    def n_arms(self) -> int:
        return len(self.means)

    def instance(self) -> BanditInstance:
        return make_instance(self.means)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "means": list(self.means),
            "mode": self.mode.value,
            "T": self.horizon,
            "replications": self.replications,
            "seed": self.seed,
            "alpha": self.alpha,
            "checkpoints": list(self.checkpoints),
            "sigma": self.sigma.to_dict(),
            "beta": self.beta.to_dict(),
            "output_dir": self.output_dir,
            "bands": self.bands.to_dict(),
            "lemmas": self.lemmas.to_dict(),
        }

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def with_overrides(
        self,
        seed: Optional[int] = None,
        replications: Optional[int] = None,
        output_dir: Optional[str] = None
    ) -> "ExperimentConfig":
        """Command-line overrides win over the file"""
        data = self.to_dict()
        if seed is not None:
            data["seed"] = seed
        if replications is not None:
            data["replications"] = replications
        if output_dir is not None:
            data["output_dir"] = str(output_dir)
        return ExperimentConfig.from_dict(data)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(data) - set(REQUIRED_KEYS) - set(OPTIONAL_KEYS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        missing = [key for key in REQUIRED_KEYS if key not in data]
        if missing:
            raise ConfigError(f"missing config keys: {missing}")

        if not isinstance(data["means"], list):
            raise ConfigError("means must be a list of numbers")
        try:
            instance = make_instance(data["means"])
        except DomainError as exc:
            raise ConfigError(f"invalid means: {exc}")

        mode = PolicyMode.parse(data["mode"])
        horizon = _as_int("T", data["T"])
        if horizon <= instance.n_arms:
            raise ConfigError(f"T={horizon} must exceed the number of arms K={instance.n_arms}")
        replications = _as_int("replications", data["replications"])
        if replications < 1:
            raise ConfigError(f"replications must be at least 1, got {replications}")
        seed = _as_int("seed", data["seed"])
        if not 0 <= seed < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {seed}")
        try:
            alpha = float(data["alpha"])
        except (TypeError, ValueError):
            raise ConfigError(f"alpha must be a number, got {data['alpha']!r}")
        if not 0.0 < alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {alpha}")

        if "checkpoints" in data:
            raw = data["checkpoints"]
            if not isinstance(raw, list) or not raw:
                raise ConfigError("checkpoints must be a nonempty list")
            checkpoints = [_as_int("checkpoint", c) for c in raw]
            if any(b <= a for a, b in zip(checkpoints, checkpoints[1:])):
                raise ConfigError(f"checkpoints must be strictly increasing: {checkpoints}")
            if checkpoints[0] < instance.n_arms:
                raise ConfigError(f"checkpoints must be >= K={instance.n_arms}: {checkpoints}")
            if checkpoints[-1] != horizon:
                raise ConfigError(f"the last checkpoint must equal T={horizon}: {checkpoints}")
        else:
            checkpoints = default_checkpoints(horizon, instance.n_arms)

        output_dir = data.get("output_dir", "out")
        if not isinstance(output_dir, str) or not output_dir:
            raise ConfigError(f"output_dir must be a nonempty string, got {output_dir!r}")

        return cls(
            means=instance.means,
            mode=mode,
            horizon=horizon,
            replications=replications,
            seed=seed,
            alpha=alpha,
            checkpoints=tuple(checkpoints),
            sigma=Schedule.from_dict(data["sigma"]) if "sigma" in data else DEFAULT_SIGMA_SCHEDULE,
            beta=Schedule.from_dict(data["beta"]) if "beta" in data else DEFAULT_BETA_SCHEDULE,
            output_dir=output_dir,
            bands=Bands.from_dict(data.get("bands")),
            lemmas=LemmaSettings.from_dict(data.get("lemmas")),
        )

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "ExperimentConfig":
        path = Path(path)
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except FileNotFoundError:
            raise ReportIOError("config file not found", path)
        except OSError as exc:
            raise ReportIOError(f"cannot read config ({exc.strerror})", path)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}")
        return cls.from_dict(data)
