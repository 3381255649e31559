"""Flat ``key = value`` configuration covering every simulator section.

All sections share one namespace so a single text file (or environment
variables prefixed with ``D2DCLUST_``) can set any knob.
"""

from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping

ENV_PREFIX = "D2DCLUST_"


class ConfigError(ValueError):
    """Raised for unreadable files, unknown keys and invalid values."""


@dataclass(frozen=True)
class ScenarioConfig:
    inter_site_distance: float = 500.0
    num_macro: int = 7
    small_cells_per_macro: int = 4
    min_enb_sc_distance: float = 125.0
    min_sc_sc_distance: float = 25.0
    users_per_macro_area: int = 60
    voip_fraction: float = 0.5
    voip_rate: float = 64e3
    ftp_rate: float = 700e3
    ftp_alpha: float = 0.05
    user_speed: float = 3.0  # km/h
    rng_seed: int = 1
    sim_duration: float = 60.0
    timestep: float = 1.0

    def validate(self) -> None:
        if not self.inter_site_distance > 0:
            raise ConfigError("inter_site_distance must be > 0")
        if self.min_enb_sc_distance < 0 or self.min_sc_sc_distance < 0:
            raise ConfigError("minimum distances must be >= 0")
        if not 0.0 <= self.voip_fraction <= 1.0:
            raise ConfigError("voip_fraction must lie in [0, 1]")
        if not 0.0 <= self.ftp_alpha <= 1.0:
            raise ConfigError("ftp_alpha must lie in [0, 1]")
        if self.num_macro < 1 or self.small_cells_per_macro < 0 or self.users_per_macro_area < 0:
            raise ConfigError("num_macro >= 1, small_cells_per_macro >= 0, users_per_macro_area >= 0")
        if self.user_speed < 0:
            raise ConfigError("user_speed must be >= 0")
        if not (self.timestep > 0 and self.sim_duration > 0):
            raise ConfigError("timestep and sim_duration must be > 0")


@dataclass(frozen=True)
class RadioConfig:
    attenuation_factor: float = 0.6
    prb_bandwidth: float = 180e3
    subframe: float = 1e-3
    noise_density: float = -174.0
    ue_noise_figure: float = 9.0
    bs_noise_figure: float = 5.0
    sinr_floor: float = -10.0
    sinr_cap: float = 22.0
    ue_max_power: float = 20.0
    d2d_max_power: float = 18.0
    interference_mode: str = "full_load"
    cre_bias: float = 0.0  # dB added to small-cell RSRP

    def validate(self) -> None:
        if not 0.0 < self.attenuation_factor <= 1.0:
            raise ConfigError("attenuation_factor must lie in (0, 1]")
        if not self.sinr_floor < self.sinr_cap:
            raise ConfigError("sinr_floor must be below sinr_cap")
        if self.prb_bandwidth <= 0 or self.subframe <= 0:
            raise ConfigError("prb_bandwidth and subframe must be > 0")
        if self.interference_mode not in ("full_load", "activity_scaled"):
            raise ConfigError(f"unknown interference_mode {self.interference_mode!r}")


@dataclass(frozen=True)
class PowerModel:
    """UE power figures (W unless noted) and per-user PRB caps."""

    idle_power: float = 0.02
    connected_power: float = 1.0
    ul_target_power: float = -78.0  # dBm per PRB
    compensation: float = 0.8
    d2d_power: float = 8.0  # dBm per PRB: the 18 dBm D2D maximum spread over m_max_d2d_member PRBs
    m_max_dl: float = 10.0
    m_max_ul: float = 10.0
    m_max_head_dl: float = 10.0
    m_max_head_ul: float = 10.0
    m_max_d2d_head: float = 10.0
    m_max_d2d_member: float = 10.0

    def validate(self) -> None:
        if not self.connected_power > self.idle_power >= 0:
            raise ConfigError("need connected_power > idle_power >= 0")
        if not 0.0 <= self.compensation <= 1.0:
            raise ConfigError("compensation must lie in [0, 1]")
        caps = (self.m_max_dl, self.m_max_ul, self.m_max_head_dl, self.m_max_head_ul,
                self.m_max_d2d_head, self.m_max_d2d_member)
        if min(caps) < 1:
            raise ConfigError("all PRB caps must be >= 1")

    @property
    def delta_power(self) -> float:
        return self.connected_power - self.idle_power

    @property
    def d2d_power_w(self) -> float:
        return dbm_to_w(self.d2d_power)


@dataclass(frozen=True)
class CalbConfig:
    calb_dl_fraction: float = 0.2
    calb_ul_fraction: float = 0.1

    def validate(self) -> None:
        if self.calb_dl_fraction < 0 or self.calb_ul_fraction < 0:
            raise ConfigError("CaLB thresholds must be >= 0")


@dataclass(frozen=True)
class CeeaConfig:
    ceea_period: float = 60.0
    ceea_subperiod: float = 5.0
    ceea_w_max: float = 0.2

    def validate(self) -> None:
        if self.ceea_subperiod <= 0 or self.ceea_period < self.ceea_subperiod:
            raise ConfigError("need 0 < ceea_subperiod <= ceea_period")
        ratio = self.ceea_period / self.ceea_subperiod
        if abs(ratio - round(ratio)) > 1e-9:
            raise ConfigError("ceea_period must be a multiple of ceea_subperiod")
        if self.ceea_w_max < 0:
            raise ConfigError("ceea_w_max must be >= 0")

    @property
    def n_subperiods(self) -> int:
        return int(round(self.ceea_period / self.ceea_subperiod))


ALGORITHMS = (
    "none", "optimal", "energy_constrained", "core", "ecore",
    "ecore+calb", "ecore+ceea", "ecore+calb+ceea",
)


@dataclass(frozen=True)
class EngineConfig:
    algorithm: str = "ecore"
    replications: int = 100
    recluster_interval: float = 1.0
    subframes_per_step: int = 100
    solver_max_users: int = 25
    energy_w: float = 0.5
    solver_node_budget: int = 2_000_000

    def validate(self) -> None:
        for name in self.algorithm.split(","):
            if name.strip() not in ALGORITHMS:
                raise ConfigError(f"unknown algorithm {name.strip()!r}; choose from {', '.join(ALGORITHMS)}")
        if self.replications < 1 or self.subframes_per_step < 1:
            raise ConfigError("replications and subframes_per_step must be >= 1")
        if self.recluster_interval <= 0:
            raise ConfigError("recluster_interval must be > 0")

    @property
    def algorithms(self) -> tuple[str, ...]:
        return tuple(a.strip() for a in self.algorithm.split(","))


_SECTIONS = ("scenario", "radio", "power", "calb", "ceea", "engine")


@dataclass(frozen=True)
class SimConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    radio: RadioConfig = field(default_factory=RadioConfig)
    power: PowerModel = field(default_factory=PowerModel)
    calb: CalbConfig = field(default_factory=CalbConfig)
    ceea: CeeaConfig = field(default_factory=CeeaConfig)
    engine: EngineConfig = field(default_factory=EngineConfig)

    def validate(self) -> "SimConfig":
        for name in _SECTIONS:
            getattr(self, name).validate()
        return self

    def with_values(self, values: Mapping[str, Any]) -> "SimConfig":
        """Return a copy with flat ``key -> value`` overrides applied."""
        index = _key_index()
        updates: dict[str, dict[str, Any]] = {}
        for key, raw in values.items():
            if key not in index:
                raise ConfigError(f"unknown config key {key!r}")
            section, ftype = index[key]
            updates.setdefault(section, {})[key] = _coerce(key, raw, ftype)
        kwargs = {s: dataclasses.replace(getattr(self, s), **updates[s]) if s in updates else getattr(self, s)
                  for s in _SECTIONS}
        return SimConfig(**kwargs)

    def flat(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for s in _SECTIONS:
            out.update(dataclasses.asdict(getattr(self, s)))
        return out

    def to_text(self) -> str:
        return "".join(f"{k} = {_fmt(v)}\n" for k, v in self.flat().items())


def _fmt(v: Any) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _key_index() -> dict[str, tuple[str, type]]:
    index = {}
    hints = {"float": float, "int": int, "str": str, "bool": bool}
    for s, cls in zip(_SECTIONS, (ScenarioConfig, RadioConfig, PowerModel, CalbConfig, CeeaConfig, EngineConfig)):
        for f in fields(cls):
            index[f.name] = (s, hints[f.type] if isinstance(f.type, str) else f.type)
    return index


def _coerce(key: str, raw: Any, ftype: type) -> Any:
    if not isinstance(raw, str):
        return ftype(raw)
    text = raw.strip()
    try:
        if ftype is bool:
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if ftype is int:
            return int(float(text)) if "e" in text.lower() else int(text)
        if ftype is float:
            value = float(text)
            if math.isnan(value):
                raise ValueError("nan")
            return value
        return text
    except ValueError:
        raise ConfigError(f"invalid value {raw!r} for {key} (expected {ftype.__name__})") from None


def parse_text(text: str, source: str = "<string>") -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = value
    return values


def env_overrides(environ: Mapping[str, str] | None = None) -> dict[str, str]:
    environ = os.environ if environ is None else environ
    index = _key_index()
    out = {}
    for name, value in environ.items():
        if name.startswith(ENV_PREFIX):
            key = name[len(ENV_PREFIX):].lower()
            if key in index:
                out[key] = value
    return out


def load_config(path: str | os.PathLike | None = None, *, environ: Mapping[str, str] | None = None,
                overrides: Mapping[str, Any] | None = None) -> SimConfig:
    """Defaults, then the file at ``path``, then env vars, then ``overrides``.

    ``path`` may be ``None`` or the literal ``"default"`` for pure defaults.
    """
    cfg = SimConfig()
    if path is not None and str(path) != "default":
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {p}: {exc.strerror or exc}") from None
        cfg = cfg.with_values(parse_text(text, str(p)))
    cfg = cfg.with_values(env_overrides(environ))
    if overrides:
        cfg = cfg.with_values(overrides)
    return cfg.validate()


def dbm_to_w(dbm):
    return 10.0 ** ((dbm - 30.0) / 10.0)


def db_to_lin(db):
    return 10.0 ** (db / 10.0)


def lin_to_db(lin):
    import numpy as np

    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(lin)
