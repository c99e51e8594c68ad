"""Run configuration: nested dataclasses, desk and paper presets, TOML/JSON loading.

Every physical constant lives here as a default so that the orchestration
code never hard-codes one.
"""
from __future__ import annotations

import dataclasses
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

__all__ = [
    "ModelConfig",
    "DataConfig",
    "PriorConfig",
    "SensitivityConfig",
    "SamplerConfig",
    "DiagnosticsConfig",
    "HifiSection",
    "RunConfig",
    "PRESETS",
    "load_config",
    "apply_overrides",
]


@dataclass
class ModelConfig:
    length: float = 4.0
    n_points: int = 512
    u_mean: float = 1.0
    nu_p: float = 0.01
    ic_center: float = 1.0
    ic_width: float = 0.1
    # truth for synthetic data
    alpha: float = 1.5
    nu: float = 0.05


@dataclass
class DataConfig:
    series_kind: str = "spatial"
    n_obs: int = 512
    t_obs: float = 0.5
    x_obs: float = 2.0
    t_max: float = 4.0
    sigma: float = 0.005
    # noise level assumed by the likelihood; defaults to ``sigma``
    likelihood_sigma: float | None = None

    def __post_init__(self):
        if self.series_kind not in ("spatial", "time"):
            raise ValueError(f"series_kind must be 'spatial' or 'time', got {self.series_kind!r}")
        if self.n_obs < 1:
            raise ValueError("n_obs must be positive")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")


@dataclass
class PriorConfig:
    decay_factor: float = 1e10
    nu_max: float | None = None


@dataclass
class SensitivityConfig:
    n_base: int = 1024
    threshold: float = 1e-4
    mass: float = 0.95
    aggregation: str = "median"
    K: int | None = None  # skip selection and infer modes 1..K


@dataclass
class SamplerConfig:
    n_steps: int = 300_000
    burn_in: int = 100_000
    adapt_start: int = 1000
    adapt_interval: int = 100
    initial_proposal_scale: float = 0.05
    dr_scale: float = 0.2
    epsilon: float = 1e-8


@dataclass
class DiagnosticsConfig:
    n_kl_samples: int | None = None
    n_predictive: int = 500
    predictive_times: list[float] = field(default_factory=lambda: [1.0, 2.0, 4.0])


@dataclass
class HifiSection:
    n_x: int = 256
    n_y: int = 32
    length_y: float = 1.0
    n_members: int = 64
    sigma2: float = 1.0
    ell_x: float = 0.2
    ell_y: float = 0.2
    t_obs: float = 0.4
    t_extrap: float = 1.0
    variance_floor: float = 1e-6
    # "auto" shrinks correlations only when members do not outnumber observations
    shrinkage: str | float = "auto"
    n_workers: int = 1
    safety: float = 0.5


SECTIONS = {
    "model": ModelConfig,
    "data": DataConfig,
    "prior": PriorConfig,
    "sensitivity": SensitivityConfig,
    "sampler": SamplerConfig,
    "diagnostics": DiagnosticsConfig,
    "hifi": HifiSection,
}


@dataclass
class RunConfig:
    case: str = "frade"
    seed: int = 0
    out: str = "run"
    preset: str = "paper"
    model: ModelConfig = field(default_factory=ModelConfig)
    data: DataConfig = field(default_factory=DataConfig)
    prior: PriorConfig = field(default_factory=PriorConfig)
    sensitivity: SensitivityConfig = field(default_factory=SensitivityConfig)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    diagnostics: DiagnosticsConfig = field(default_factory=DiagnosticsConfig)
    hifi: HifiSection = field(default_factory=HifiSection)

    def __post_init__(self):
        if self.case not in ("frade", "hifi"):
            raise ValueError(f"case must be 'frade' or 'hifi', got {self.case!r}")
        if self.case == "hifi" and self.model.n_points != self.hifi.n_x:
            raise ValueError("hifi runs need model.n_points equal to hifi.n_x")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        unknown = set(data) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        for name, kind in SECTIONS.items():
            if name in data:
                data[name] = _section(kind, data[name], name)
        return cls(**data)


def _section(kind, values, name):
    if isinstance(values, kind):
        return values
    known = {f.name for f in dataclasses.fields(kind)}
    unknown = set(values) - known
    if unknown:
        raise ValueError(f"unknown keys in [{name}]: {sorted(unknown)}")
    return kind(**values)


# Overrides applied on top of the defaults; the defaults are the full-scale settings.
PRESETS = {
    "paper": {
        "frade": {},
        "hifi": {"model": {"n_points": 512},
                 "hifi": {"n_x": 512, "n_y": 64, "n_members": 576}},
    },
    "desk": {
        "frade": {"sampler": {"n_steps": 50_000, "burn_in": 10_000}},
        "hifi": {"model": {"n_points": 256},
                 "sampler": {"n_steps": 50_000, "burn_in": 10_000}},
    },
}


def _merge(base: dict, extra: dict) -> dict:
    out = dict(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def read_config_file(path) -> dict:
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".json":
        return json.loads(text)
    if path.suffix.lower() == ".toml":
        return tomllib.loads(text)
    raise ValueError(f"{path}: config must be .toml or .json")


def load_config(path=None, preset: str | None = None, case: str | None = None, **overrides) -> RunConfig:
    """Defaults, then preset, then file contents, then explicit overrides.

    ``case`` picks the preset branch when the file does not set it.
    """
    file_data = read_config_file(path) if path is not None else {}
    case = overrides.get("case") or file_data.get("case") or case or "frade"
    preset = preset or file_data.get("preset") or "paper"
    if preset not in PRESETS:
        raise ValueError(f"unknown preset {preset!r}")
    data = _merge({"case": case, "preset": preset}, PRESETS[preset][case])
    data = _merge(data, file_data)
    data = _merge(data, {k: v for k, v in overrides.items() if v is not None})
    data["preset"] = preset
    return RunConfig.from_dict(data)


def apply_overrides(config: RunConfig, **overrides) -> RunConfig:
    data = _merge(config.to_dict(), {k: v for k, v in overrides.items() if v is not None})
    return RunConfig.from_dict(data)
