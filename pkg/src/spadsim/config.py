"""TOML run configuration.

Sections ``[detector0]``, ``[detector1]``, ``[resolver]`` and ``[run]``::

    [run]
    preset = "sim3"              # optional base: D0/D1 parameters + dead-time preset
    frequencies_hz = [1e3, 1e6]
    n_bits_per_point = 1_000_000
    master_seed = "0x2a"
    rate_mode = "direct"         # or "calibrated"

    [detector0]
    afterpulse_prob = 0.047
    afterpulse_tau_ns = 33.0
    dead_time_model = "ramp"     # "constant" or "ramp"
    dead_time_ns = 13.8
    ramp_knee_hz = 5e6
    ramp_max_hz = 1e7
    dead_time_max_ns = 16.8

    [resolver]
    coincidence_window_ns = 12.0

Keys left out fall back to the preset (``sim2`` when none is named).
"""

from __future__ import annotations

import sys
from dataclasses import replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .detector import DEAD_TIME_PRESETS, ConstantDeadTime, DetectorParams, RateRampDeadTime
from .harness import RunConfig, preset_config
from .resolver import ResolverConfig
from .sampling import parse_seed

DETECTOR_KEYS = {"photon_rate_hz", "afterpulse_prob", "afterpulse_tau_ns", "dead_time_model",
                 "dead_time_ns", "ramp_knee_hz", "ramp_max_hz", "dead_time_max_ns",
                 "dead_time_preset"}
RUN_KEYS = {"preset", "frequencies_hz", "n_bits_per_point", "master_seed", "rate_mode"}
RESOLVER_KEYS = {"coincidence_window_ns"}


class ConfigError(ValueError):
    pass


def _check_keys(section: str, table: dict, allowed: set[str]) -> None:
    extra = set(table) - allowed
    if extra:
        raise ConfigError(f"[{section}] has unknown keys: {', '.join(sorted(extra))}")


def _dead_time(table: dict, base):
    if "dead_time_preset" in table:
        return DEAD_TIME_PRESETS[table["dead_time_preset"]]
    kind = table.get("dead_time_model")
    if kind is None and "dead_time_ns" not in table:
        return base
    if kind is None:
        kind = "ramp" if isinstance(base, RateRampDeadTime) else "constant"
    d0 = float(table.get("dead_time_ns", base.dead_ns))
    if kind == "constant":
        return ConstantDeadTime(d0)
    if kind == "ramp":
        ramp = base if isinstance(base, RateRampDeadTime) else DEAD_TIME_PRESETS["sim3"]
        return RateRampDeadTime(d0, float(table.get("ramp_knee_hz", ramp.f_knee_hz)),
                                float(table.get("ramp_max_hz", ramp.f_max_hz)),
                                float(table.get("dead_time_max_ns", ramp.dead_max_ns)))
    raise ConfigError(f"dead_time_model must be 'constant' or 'ramp', got {kind!r}")


def _detector(table: dict, base: DetectorParams) -> DetectorParams:
    return DetectorParams(float(table.get("photon_rate_hz", base.photon_rate_hz)),
                          float(table.get("afterpulse_prob", base.afterpulse_prob)),
                          float(table.get("afterpulse_tau_ns", base.afterpulse_tau_ns)),
                          _dead_time(table, base.dead_time))


def config_from_dict(data: dict) -> RunConfig:
    _check_keys("top level", data, {"run", "detector0", "detector1", "resolver"})
    run = data.get("run", {})
    _check_keys("run", run, RUN_KEYS)
    for name in ("detector0", "detector1"):
        _check_keys(name, data.get(name, {}), DETECTOR_KEYS)
    _check_keys("resolver", data.get("resolver", {}), RESOLVER_KEYS)
    if run.get("preset", "sim2") not in DEAD_TIME_PRESETS:
        raise ConfigError(f"unknown preset {run['preset']!r}; choose from "
                          f"{', '.join(sorted(DEAD_TIME_PRESETS))}")
    try:
        cfg = preset_config(run.get("preset", "sim2"))
        d0 = _detector(data.get("detector0", {}), cfg.detector0)
        d1 = _detector(data.get("detector1", {}), cfg.detector1)
        window = data.get("resolver", {}).get("coincidence_window_ns",
                                              cfg.resolver.coincidence_window_ns)
        return replace(cfg, detector0=d0, detector1=d1,
                       resolver=ResolverConfig(float(window)),
                       frequencies_hz=tuple(run.get("frequencies_hz", cfg.frequencies_hz)),
                       n_bits_per_point=int(run.get("n_bits_per_point", cfg.n_bits_per_point)),
                       master_seed=parse_seed(run.get("master_seed", cfg.master_seed)),
                       rate_mode=run.get("rate_mode", cfg.rate_mode),
                       label=run.get("preset", "custom"))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad configuration value: {exc}") from exc


def load_config(path) -> RunConfig:
    with Path(path).open("rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(data)
