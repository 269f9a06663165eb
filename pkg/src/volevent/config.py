"""Run configuration: a YAML/JSON file with flat dotted keys plus overrides.

Nested mappings are flattened, so ``{"bootstrap": {"replications": 100}}``
and ``{"bootstrap.replications": 100}`` are equivalent.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping, Optional

import yaml

from .errors import ConfigError
from .garch import GarchParams
from .marketdata import OutcomeGroup, WindowSpec

TABLE_WINDOWS = ("-2d,+2d", "-1w,+1w", "-2w,+2w", "-1m,+1m", "-1m,+2m")

# flat key -> (attribute, converter)
_KEYS = {
    "data.prices": ("price_file", str),
    "data.cases": ("case_file", str),
    "data.market_ticker": ("market_ticker", str),
    "windows": ("windows", list),
    "groups": ("groups", list),
    "estimation.length": ("estimation_length", int),
    "estimation.min_obs": ("min_obs", int),
    "estimator.normalization": ("normalization", str),
    "bootstrap.replications": ("replications", int),
    "seed": ("seed", int),
    "workers": ("workers", int),
    "output.dir": ("output_dir", str),
    "regress.window": ("regress_window", str),
    "regress.robust": ("robust", bool),
    "regress.extra": ("regress_extra", list),
    "regress.skip_incomplete": ("skip_incomplete", bool),
    "simulate.K": ("sim_K", int),
    "simulate.T": ("sim_T", int),
    "simulate.window": ("sim_window", str),
    "simulate.injected_M": ("sim_injected_M", float),
    "simulate.market_sd": ("sim_market_sd", float),
    "simulate.psi0": ("sim_psi0", float),
    "simulate.psi1": ("sim_psi1", float),
    "simulate.psi2": ("sim_psi2", float),
    "simulate.alpha": ("sim_alpha", float),
    "simulate.beta": ("sim_beta", float),
    "simulate.groups": ("sim_groups", list),
    "simulate.covariates": ("sim_covariates", bool),
    "simulate.feature_effects": ("sim_feature_effects", dict),
}

# does not change any output; left out of the manifest echo
VOLATILE_KEYS = ("workers", "output.dir")


@dataclass
class RunConfig:
    price_file: Optional[str] = None
    case_file: Optional[str] = None
    market_ticker: str = "MKT"
    windows: list = field(default_factory=lambda: list(TABLE_WINDOWS))
    groups: Optional[list] = None
    estimation_length: int = 500
    min_obs: int = 100
    normalization: str = "printed"
    replications: int = 5000
    seed: int = 0
    workers: int = 1
    output_dir: str = "out"
    regress_window: str = "-1m,+2m"
    robust: bool = False
    regress_extra: list = field(default_factory=list)
    skip_incomplete: bool = True
    sim_K: int = 20
    sim_T: int = 1200
    sim_window: str = "-1m,+2m"
    sim_injected_M: float = 1.0
    sim_market_sd: float = 0.01
    sim_psi0: float = 1e-5
    sim_psi1: float = 0.90
    sim_psi2: float = 0.05
    sim_alpha: float = 0.0
    sim_beta: float = 1.0
    sim_groups: list = field(default_factory=lambda: ["investor", "state", "settled"])
    sim_covariates: bool = True
    sim_feature_effects: dict = field(default_factory=dict)

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "RunConfig":
        cfg = cls()
        for key, value in flatten(data).items():
            cfg.set(key, value)
        cfg.validate()
        return cfg

    def set(self, key: str, value: Any) -> None:
        try:
            attr, conv = _KEYS[key]
        except KeyError:
            raise ConfigError(f"unknown config key {key!r}") from None
        if conv is list and isinstance(value, str):
            value = [v.strip() for v in value.split(";") if v.strip()]
        try:
            if conv is bool and isinstance(value, str):
                value = value.strip().lower() in ("1", "true", "yes", "on")
            elif conv is dict and isinstance(value, str):
                value = yaml.safe_load(value)
                if not isinstance(value, dict):
                    raise ValueError("expected a mapping")
            else:
                value = conv(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {exc}") from None
        setattr(self, attr, value)

    def validate(self) -> None:
        if self.replications < 1:
            raise ConfigError("bootstrap.replications must be at least 1")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.estimation_length < 1:
            raise ConfigError("estimation.length must be positive")
        if self.normalization not in ("printed", "unbiased"):
            raise ConfigError("estimator.normalization must be 'printed' or 'unbiased'")
        try:
            self.window_specs()
            WindowSpec.parse(self.regress_window)
            WindowSpec.parse(self.sim_window)
            if self.groups:
                [OutcomeGroup.parse(g) for g in self.groups]
            [OutcomeGroup.parse(g) for g in self.sim_groups]
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def window_specs(self) -> list[WindowSpec]:
        return [WindowSpec.parse(w) for w in self.windows]

    def group_values(self) -> Optional[list[str]]:
        if not self.groups:
            return None
        return [OutcomeGroup.parse(g).value for g in self.groups]

    def sim_params(self) -> GarchParams:
        return GarchParams(self.sim_alpha, self.sim_beta, self.sim_psi0, self.sim_psi1, self.sim_psi2)

    def require_inputs(self) -> tuple[Path, Path]:
        paths = []
        for key, value in (("data.prices", self.price_file), ("data.cases", self.case_file)):
            if not value:
                raise ConfigError(f"{key} is not set")
            path = Path(value)
            if not path.is_file():
                raise ConfigError(f"{key}: file not found: {path}")
            paths.append(path)
        return paths[0], paths[1]

    def echo(self) -> dict:
        """Flat key/value view of the configuration, minus volatile keys."""
        out = {}
        by_attr = {attr: key for key, (attr, _) in _KEYS.items()}
        for f in fields(self):
            key = by_attr[f.name]
            if key not in VOLATILE_KEYS:
                out[key] = getattr(self, f.name)
        return out


def flatten(data: Mapping[str, Any], prefix: str = "") -> dict[str, Any]:
    out = {}
    for key, value in data.items():
        full = f"{prefix}{key}"
        if isinstance(value, Mapping) and full not in _KEYS:
            out.update(flatten(value, full + "."))
        else:
            out[full] = value
    return out


def load_config(path=None, overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    data: dict = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            loaded = yaml.safe_load(path.read_text())
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, Mapping):
            raise ConfigError(f"{path}: top level must be a mapping")
        data = flatten(loaded)
        base = path.parent
        for key in ("data.prices", "data.cases"):
            if key in data and data[key] and not Path(str(data[key])).is_absolute():
                data[key] = str(base / str(data[key]))
    if overrides:
        data.update(flatten(overrides))
    return RunConfig.from_mapping(data)
