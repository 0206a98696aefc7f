"""Run configuration: a flat ``key = value`` text file with ``#`` comments."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path

from .evolve import EvolveConfig
from .presets import PRESETS


class ConfigError(ValueError):
    """Malformed or invalid configuration; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None, path: str | None = None,
                 key: str | None = None):
        self.line = line
        self.key = key
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(part) for part in text.split(",") if part.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(part) for part in text.split(",") if part.strip())


def _optional_float(text: str) -> float | None:
    return None if text.lower() in ("none", "") else float(text)


@dataclass(frozen=True)
class RunConfig:
    n1: int = 16
    n2: int = 16
    n3: int = 17
    delta: float = 0.25
    r: float | None = None
    r_sweep: tuple[float, ...] = (0.2, 0.1, 0.05, 0.025)
    dt: float = 1e-3
    t_end: float = 0.1
    b: float = 1.0
    rt_policy: str = "warn"
    epsilon: float = 0.25
    smallness_policy: str = "warn"
    preset: str = "generic"
    out: str = "out"
    seed: int = 0
    checkpoint_interval: int = 0
    kappa: float = 1e-4
    n3_sweep: tuple[int, ...] = (9, 17, 33)
    mms_rhs: str = "manufactured"
    n_random: int = 50

    def validate(self) -> None:
        """Raise ConfigError naming the first offending key."""
        checks = [
            ("n1", self.n1 > 0 and self.n1 % 2 == 0, "must be a positive even integer"),
            ("n2", self.n2 > 0 and self.n2 % 2 == 0, "must be a positive even integer"),
            ("n3", self.n3 >= 5, "must be at least 5"),
            ("delta", 0 < self.delta <= 0.5, "must lie in (0, 0.5]"),
            ("r", self.r is None or 0 < self.r <= 1, "must lie in (0, 1]"),
            ("r_sweep", bool(self.r_sweep) and all(0 < r <= 1 for r in self.r_sweep),
             "needs radii in (0, 1]"),
            ("dt", self.dt > 0, "must be positive"),
            ("t_end", 0 < self.t_end <= 1, "must lie in (0, 1]"),
            ("b", self.b > 0, "must be positive"),
            ("rt_policy", self.rt_policy in ("warn", "abort"), "must be warn or abort"),
            ("smallness_policy", self.smallness_policy in ("warn", "abort"),
             "must be warn or abort"),
            ("epsilon", 0 < self.epsilon <= 1, "must lie in (0, 1]"),
            ("preset", self.preset in PRESETS, f"must be one of {', '.join(PRESETS)}"),
            ("seed", self.seed >= 0, "must be nonnegative"),
            ("checkpoint_interval", self.checkpoint_interval >= 0, "must be nonnegative"),
            ("kappa", math.isfinite(self.kappa) and self.kappa >= 0, "must be nonnegative"),
            ("n3_sweep", bool(self.n3_sweep) and all(n >= 5 for n in self.n3_sweep),
             "needs sizes of at least 5"),
            ("mms_rhs", self.mms_rhs in ("manufactured", "zero"), "must be manufactured or zero"),
            ("n_random", self.n_random > 0, "must be positive"),
        ]
        for key, ok, message in checks:
            if not ok:
                raise ConfigError(f"{key} {message}", key=key)

    def evolve_config(self) -> EvolveConfig:
        return EvolveConfig(dt=self.dt, t_end=self.t_end, b=self.b, rt_policy=self.rt_policy,
                            epsilon=self.epsilon, smallness_policy=self.smallness_policy,
                            delta=self.delta)

    def with_overrides(self, **changes) -> RunConfig:
        changes = {k: v for k, v in changes.items() if v is not None}
        new = dataclasses.replace(self, **changes)
        new.validate()
        return new


# annotations are strings under postponed evaluation
_PARSERS = {
    "int": int,
    "float": float,
    "str": str,
    "float | None": _optional_float,
    "tuple[float, ...]": _floats,
    "tuple[int, ...]": _ints,
}

FIELDS = {f.name: _PARSERS[f.type] for f in dataclasses.fields(RunConfig)}


def parse_config(text: str, path: str | None = None) -> RunConfig:
    values: dict = {}
    lines: dict[str, int] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", number, path)
        key, _, value = (part.strip() for part in line.partition("="))
        if key not in FIELDS:
            raise ConfigError(f"unknown key {key!r}", number, path)
        if key in values:
            raise ConfigError(f"duplicate key {key!r} (first set on line {lines[key]})",
                              number, path)
        try:
            values[key] = FIELDS[key](value)
        except ValueError:
            raise ConfigError(f"bad value {value!r} for {key}", number, path) from None
        lines[key] = number
    cfg = RunConfig(**values)
    try:
        cfg.validate()
    except ConfigError as exc:
        raise ConfigError(str(exc), lines.get(exc.key), path, exc.key) from None
    return cfg


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", path=str(path)) from None
    return parse_config(text, str(path))


def format_config(cfg: RunConfig) -> str:
    """Render a config back to the file format (round-trips through parse_config)."""
    out = []
    for f in dataclasses.fields(cfg):
        value = getattr(cfg, f.name)
        if isinstance(value, tuple):
            text = ", ".join(repr(v) for v in value)
        elif value is None:
            text = "none"
        else:
            text = str(value)
        out.append(f"{f.name} = {text}")
    return "\n".join(out) + "\n"

