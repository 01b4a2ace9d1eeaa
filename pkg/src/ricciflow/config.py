"""Plain-text run configuration.

INI sections [run], [initial], [verify].  Every key is validated against
the chosen scenario: unknown keys, unknown sections, unknown checks, and
malformed twist matrices are rejected rather than ignored.  Unset keys
take the scenario's defaults, so a config is a diff against its preset.

serialize_config emits a canonical form; parsing it back yields an equal
RunConfig (the round trip is idempotent).
"""

import configparser
from dataclasses import dataclass
from typing import Optional, Union

from . import engine, presets, verify
from .bundle import Holonomy


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


MODES = ("modified", "unmodified")

_RUN_KEYS = ("scenario", "mode", "n", "t_end", "cfl", "dt_min", "dt_max",
             "curvature_stop", "snapshot_dt", "output_dir", "expected_stop",
             "max_steps")


@dataclass(frozen=True)
class RunConfig:
    scenario: str
    mode: str
    n: int
    t_end: float
    cfl: float
    dt_min: float
    dt_max: float
    curvature_stop: float
    snapshot_dt: float
    output_dir: str
    expected_stop: str
    max_steps: int
    initial: tuple                      # sorted (key, value) pairs
    holonomy: Optional[tuple]           # four integers, or None
    verify_enabled: bool
    checks: Union[None, str, tuple]     # None = default set, "all", or names
    tolerances: tuple                   # sorted (check, value) pairs

    @property
    def initial_dict(self):
        return dict(self.initial)

    @property
    def tolerance_dict(self):
        return dict(self.tolerances)


def _parse_float(section, key, raw):
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(
            f"[{section}] {key} must be a number, got {raw!r}"
        ) from None


def _parse_int(section, key, raw):
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(
            f"[{section}] {key} must be an integer, got {raw!r}"
        ) from None


def _parse_bool(section, key, raw):
    lowered = raw.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"[{section}] {key} must be a boolean, got {raw!r}")


def parse_config(text):
    """Parse INI text into a validated RunConfig."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None

    unknown = set(parser.sections()) - {"run", "initial", "verify"}
    if unknown:
        raise ConfigError(f"unknown sections: {', '.join(sorted(unknown))}")
    if not parser.has_section("run"):
        raise ConfigError("missing required section [run]")

    run = dict(parser.items("run"))
    for key in run:
        if key not in _RUN_KEYS:
            raise ConfigError(f"unknown [run] key {key!r}")
    if "scenario" not in run:
        raise ConfigError("[run] scenario is required")
    try:
        preset = presets.get(run["scenario"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    mode = run.get("mode", preset.mode)
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
    expected = run.get("expected_stop", preset.expected_stop)
    if expected not in engine.STOP_REASONS:
        raise ConfigError(
            f"expected_stop must be one of {engine.STOP_REASONS}, "
            f"got {expected!r}"
        )

    n = _parse_int("run", "n", run["n"]) if "n" in run else preset.n
    if n < 4:
        raise ConfigError(f"n must be at least 4, got {n}")
    max_steps = (_parse_int("run", "max_steps", run["max_steps"])
                 if "max_steps" in run else 2_000_000)
    if max_steps < 1:
        raise ConfigError(f"max_steps must be positive, got {max_steps}")

    def run_float(key, default):
        if key not in run:
            return default
        return _parse_float("run", key, run[key])

    initial = dict(preset.initial_defaults)
    holonomy = None
    if parser.has_section("initial"):
        for key, raw in parser.items("initial"):
            if key == "holonomy":
                cells = raw.split()
                if len(cells) != 4:
                    raise ConfigError(
                        f"holonomy needs four integers, got {raw!r}"
                    )
                entries = tuple(_parse_int("initial", "holonomy", c)
                                for c in cells)
                if preset.holonomy is None:
                    raise ConfigError(
                        f"scenario {preset.name!r} does not take a twist matrix"
                    )
                if (not preset.holonomy_overridable
                        and entries != preset.holonomy):
                    raise ConfigError(
                        f"scenario {preset.name!r} fixes its twist matrix"
                    )
                try:
                    Holonomy.from_entries(*entries)
                except ValueError as exc:
                    raise ConfigError(str(exc)) from None
                holonomy = entries
            elif key in initial:
                initial[key] = _parse_float("initial", key, raw)
            else:
                raise ConfigError(
                    f"scenario {preset.name!r} does not take initial key "
                    f"{key!r}; allowed: {', '.join(sorted(initial))}"
                )

    verify_enabled = True
    checks = None
    tolerances = {}
    if parser.has_section("verify"):
        for key, raw in parser.items("verify"):
            if key == "enabled":
                verify_enabled = _parse_bool("verify", "enabled", raw)
            elif key == "checks":
                value = raw.strip()
                if value in ("default", ""):
                    checks = None
                elif value == "all":
                    checks = "all"
                else:
                    names = tuple(c.strip() for c in value.split(","))
                    for name in names:
                        if name not in verify.CHECK_NAMES:
                            raise ConfigError(f"unknown check {name!r}")
                    checks = names
            elif key in verify.CHECK_NAMES:
                tolerances[key] = _parse_float("verify", key, raw)
            else:
                raise ConfigError(f"unknown [verify] key {key!r}")

    return RunConfig(
        scenario=preset.name,
        mode=mode,
        n=n,
        t_end=run_float("t_end", preset.t_end),
        cfl=run_float("cfl", preset.cfl),
        dt_min=run_float("dt_min", preset.dt_min),
        dt_max=run_float("dt_max", preset.dt_max),
        curvature_stop=run_float("curvature_stop", preset.curvature_stop),
        snapshot_dt=run_float("snapshot_dt", preset.snapshot_dt),
        output_dir=run.get("output_dir", f"runs/{preset.name}"),
        expected_stop=expected,
        max_steps=max_steps,
        initial=tuple(sorted(initial.items())),
        holonomy=holonomy if holonomy is not None else preset.holonomy,
        verify_enabled=verify_enabled,
        checks=checks,
        tolerances=tuple(sorted(tolerances.items())),
    )


def load_config(path):
    with open(path, "r", encoding="ascii") as handle:
        return parse_config(handle.read())


def serialize_config(config):
    """Canonical INI text; parse_config(serialize_config(c)) == c."""
    lines = ["[run]"]
    lines.append(f"scenario = {config.scenario}")
    lines.append(f"mode = {config.mode}")
    lines.append(f"n = {config.n}")
    for key in ("t_end", "cfl", "dt_min", "dt_max", "curvature_stop",
                "snapshot_dt"):
        lines.append(f"{key} = {repr(getattr(config, key))}")
    lines.append(f"output_dir = {config.output_dir}")
    lines.append(f"expected_stop = {config.expected_stop}")
    lines.append(f"max_steps = {config.max_steps}")
    lines.append("")
    lines.append("[initial]")
    if config.holonomy is not None:
        lines.append("holonomy = " + " ".join(str(v) for v in config.holonomy))
    for key, value in config.initial:
        lines.append(f"{key} = {repr(value)}")
    lines.append("")
    lines.append("[verify]")
    lines.append(f"enabled = {'true' if config.verify_enabled else 'false'}")
    if config.checks is None:
        lines.append("checks = default")
    elif config.checks == "all":
        lines.append("checks = all")
    else:
        lines.append("checks = " + ",".join(config.checks))
    for key, value in config.tolerances:
        lines.append(f"{key} = {repr(value)}")
    lines.append("")
    return "\n".join(lines)
