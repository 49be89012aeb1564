"""Experiment configuration files (TOML, versioned, strict keys)."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .lqr import GainSchedule, SystemSpec

SCHEMA_VERSION = 1
ALLOCATION_MODES = ("optimal", "uniform", "exhaustive")
DEFAULT_EXHAUSTIVE_MAX_HORIZON = 6


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Jump:
    t_jump: int
    a1: float
    a2: float


@dataclass(frozen=True)
class SystemConfig:
    # exactly one of a / a_seq / jump is set
    a: Optional[float] = None
    a_seq: Optional[tuple] = None
    jump: Optional[Jump] = None
    b: float = 1.0
    q: float = 2.0
    d: float = 5.0
    x0: float = 100.0
    horizon: int = 11
    sigma_z2: float = 1.0
    c2: float = 100.0
    terminal_weight: Optional[float] = None
    fixed_gain: Optional[float] = None

    def spec(self, a: Optional[float] = None, b: Optional[float] = None) -> SystemSpec:
        """Build the plant, optionally overriding a constant A and/or B."""
        common = dict(
            b=self.b if b is None else b,
            q=self.q,
            d=self.d,
            x0=self.x0,
            sigma_z2=self.sigma_z2,
            c2=self.c2,
            terminal_weight=self.terminal_weight,
        )
        if a is not None:
            return SystemSpec.constant(a, self.horizon, **common)
        if self.jump is not None:
            j = self.jump
            return SystemSpec.with_jump(j.a1, j.a2, j.t_jump, self.horizon, **common)
        if self.a_seq is not None:
            return SystemSpec(a_seq=self.a_seq, **common)
        return SystemSpec.constant(self.a, self.horizon, **common)

    def fixed_gains(self) -> Optional[GainSchedule]:
        if self.fixed_gain is None:
            return None
        return GainSchedule.constant(self.fixed_gain, self.horizon)


@dataclass(frozen=True)
class Sweep:
    parameter: str
    start: float
    stop: float
    step: float

    def values(self) -> list[float]:
        n = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return [round(self.start + i * self.step, 12) for i in range(n)]


@dataclass(frozen=True)
class MonteCarlo:
    replications: int = 100_000
    master_seed: int = 0


@dataclass(frozen=True)
class ExperimentConfig:
    system: SystemConfig
    budget: float
    allocation_modes: tuple = ("optimal", "uniform")
    sweep: Optional[Sweep] = None
    mc: MonteCarlo = field(default_factory=MonteCarlo)
    grid_step: float = 0.05
    output_dir: str = "results"
    profile_pairs: tuple = ()
    max_candidates: int = 10**8
    exhaustive_max_horizon: int = DEFAULT_EXHAUSTIVE_MAX_HORIZON
    source_hash: str = ""

    def with_overrides(
        self, seed: Optional[int] = None, replications: Optional[int] = None
    ) -> "ExperimentConfig":
        mc = self.mc
        if seed is not None:
            mc = replace(mc, master_seed=int(seed))
        if replications is not None:
            if replications < 1:
                raise ConfigError("replications must be >= 1")
            mc = replace(mc, replications=int(replications))
        return replace(self, mc=mc)


_TOP_KEYS = {
    "schema_version",
    "system",
    "budget",
    "allocation_modes",
    "sweep",
    "mc",
    "grid_step",
    "output_dir",
    "profile",
    "max_candidates",
    "exhaustive_max_horizon",
}
_SYSTEM_KEYS = {
    "a", "a_seq", "jump", "b", "q", "d", "x0", "horizon",
    "sigma_z2", "c2", "terminal_weight", "fixed_gain",
}
_JUMP_KEYS = {"t_jump", "a1", "a2"}
_SWEEP_KEYS = {"parameter", "from", "to", "step"}
_MC_KEYS = {"replications", "master_seed"}
_PROFILE_KEYS = {"pairs"}


def _reject_unknown(table: dict, allowed: set, where: str) -> None:
    extra = sorted(set(table) - allowed)
    if extra:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(extra)}")


def _table(raw: dict, key: str, where: str) -> dict:
    value = raw.get(key, {})
    if not isinstance(value, dict):
        raise ConfigError(f"{where}.{key} must be a table")
    return value


def parse_config(raw: dict, source_hash: str = "") -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("configuration root must be a table")
    _reject_unknown(raw, _TOP_KEYS, "top level")
    version = raw.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(
            f"schema_version must be {SCHEMA_VERSION}, got {version!r}"
        )

    sys_raw = _table(raw, "system", "config")
    _reject_unknown(sys_raw, _SYSTEM_KEYS, "[system]")
    given = [k for k in ("a", "a_seq", "jump") if k in sys_raw]
    if len(given) > 1:
        raise ConfigError(f"[system] takes only one of a / a_seq / jump, got {given}")
    sys_kwargs = {k: v for k, v in sys_raw.items() if k not in ("jump", "a_seq")}
    if "a_seq" in sys_raw:
        sys_kwargs["a_seq"] = tuple(float(v) for v in sys_raw["a_seq"])
        sys_kwargs.setdefault("horizon", len(sys_kwargs["a_seq"]))
        if sys_kwargs["horizon"] != len(sys_kwargs["a_seq"]):
            raise ConfigError("[system] horizon disagrees with len(a_seq)")
    if "jump" in sys_raw:
        jump = _table(sys_raw, "jump", "[system]")
        _reject_unknown(jump, _JUMP_KEYS, "[system.jump]")
        try:
            sys_kwargs["jump"] = Jump(int(jump["t_jump"]), float(jump["a1"]), float(jump["a2"]))
        except KeyError as exc:
            raise ConfigError(f"[system.jump] missing {exc}") from None
    if not given:
        sys_kwargs["a"] = 1.0
    system = SystemConfig(**sys_kwargs)
    if system.horizon < 1:
        raise ConfigError("[system] horizon must be >= 1")

    if "budget" not in raw:
        raise ConfigError("budget is required")
    budget = float(raw["budget"])
    if budget < 0:
        raise ConfigError("budget must be nonnegative")

    modes = tuple(raw.get("allocation_modes", ("optimal", "uniform")))
    bad = [m for m in modes if m not in ALLOCATION_MODES]
    if bad or not modes:
        raise ConfigError(f"allocation_modes must be a nonempty subset of {ALLOCATION_MODES}")

    sweep = None
    if "sweep" in raw:
        s = _table(raw, "sweep", "config")
        _reject_unknown(s, _SWEEP_KEYS, "[sweep]")
        if s.get("parameter", "A") != "A":
            raise ConfigError("only parameter = \"A\" can be swept")
        try:
            sweep = Sweep("A", float(s["from"]), float(s["to"]), float(s["step"]))
        except KeyError as exc:
            raise ConfigError(f"[sweep] missing {exc}") from None
        if not sweep.step > 0 or sweep.stop < sweep.start:
            raise ConfigError("[sweep] needs step > 0 and to >= from")

    mc_raw = _table(raw, "mc", "config")
    _reject_unknown(mc_raw, _MC_KEYS, "[mc]")
    mc = MonteCarlo(**{k: int(v) for k, v in mc_raw.items()})
    if mc.replications < 1:
        raise ConfigError("[mc] replications must be >= 1")
    if mc.master_seed < 0:
        raise ConfigError("[mc] master_seed must be nonnegative")

    pairs = ()
    if "profile" in raw:
        p = _table(raw, "profile", "config")
        _reject_unknown(p, _PROFILE_KEYS, "[profile]")
        pairs = tuple((float(a), float(b)) for a, b in p.get("pairs", ()))

    grid_step = float(raw.get("grid_step", 0.05))
    if not grid_step > 0:
        raise ConfigError("grid_step must be positive")
    cap = int(raw.get("exhaustive_max_horizon", DEFAULT_EXHAUSTIVE_MAX_HORIZON))
    if "exhaustive" in modes and system.horizon > cap:
        raise ConfigError(
            f"exhaustive mode needs horizon <= {cap}, got {system.horizon}"
        )

    cfg = ExperimentConfig(
        system=system,
        budget=budget,
        allocation_modes=modes,
        sweep=sweep,
        mc=mc,
        grid_step=grid_step,
        output_dir=str(raw.get("output_dir", "results")),
        profile_pairs=pairs,
        max_candidates=int(raw.get("max_candidates", 10**8)),
        exhaustive_max_horizon=cap,
        source_hash=source_hash,
    )
    try:
        system.spec()
    except ValueError as exc:
        raise ConfigError(f"[system] {exc}") from None
    return cfg


def load_config(path) -> ExperimentConfig:
    data = Path(path).read_bytes()
    try:
        raw = tomllib.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    try:
        return parse_config(raw, hashlib.sha256(data).hexdigest())
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
