"""YAML experiment files with dotted-path overrides.

Top-level sections (all optional)::

    seed: 7
    episodes:   {dq_spread: 0.7, scenario_1: {7m: {t_drop_mean_ms: 140, ...}}}
    detector:   {t_drop_threshold_ms: 500, t_recovery_threshold_ms: 3000, ...}
    handoff:    {discovery_ms: 1500, auth_ms: 400, assoc_ms: 849, corner_rule: true, ...}
    scenario:   {duration_ms: ..., aps: [...], stas: [...], walls: [...], ...}
    sweep:      {t_drop_ms: [250, 500, 750], t_recovery_ms: [1000, 3000, 6000], trials: 500}
    trace:      {scenario: 1, distance_m: 7.0, lead_ms: 1000, tail_ms: 4000}
    timing:     {trials: 10000}
"""

from __future__ import annotations

import copy
from pathlib import Path
from typing import Any, Iterable, Mapping

import yaml

from picocell60.detector import Centroid, DetectorConfig, centroids_for
from picocell60.distributions import EpisodeDistributions
from picocell60.handoff import HandoffConfig
from picocell60.sim import ConfigError, ScenarioConfig, scenario_from_dict

DEFAULT_SEED = 7

SECTIONS = {"seed", "episodes", "detector", "handoff", "scenario", "sweep", "trace", "timing"}

DEFAULTS: dict[str, Any] = {
    "seed": DEFAULT_SEED,
    "episodes": {},
    "detector": {},
    "handoff": {},
    "sweep": {"t_drop_ms": [250, 500, 750], "t_recovery_ms": [1000, 3000, 6000],
              "trials": 500, "distance_m": 7.0, "sliding_drop_window": True},
    "trace": {"scenario": 1, "distance_m": 7.0, "lead_ms": 1000, "tail_ms": 4000,
              "environment": "IndoorRoom"},
    "timing": {"trials": 10000},
}

_DETECTOR_KEYS = {"t_drop_threshold_ms", "t_recovery_threshold_ms", "drop_trigger_units",
                  "reference_window_ms", "sliding_drop_window", "centroid_distance_m", "centroids"}
_HANDOFF_KEYS = {"discovery_ms", "auth_ms", "assoc_ms", "corner_quality_floor", "corner_rule",
                 "blockage_handoff"}


def _merge(base: dict, extra: Mapping) -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, Mapping) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def set_dotted(data: dict, dotted: str, value: Any) -> None:
    """``a.b.0.c`` walks dicts by key and lists by index, creating dicts as needed."""
    keys = dotted.split(".")
    node: Any = data
    for i, key in enumerate(keys):
        last = i == len(keys) - 1
        if isinstance(node, list):
            try:
                idx = int(key)
                if last:
                    node[idx] = value
                else:
                    node = node[idx]
            except (ValueError, IndexError):
                raise ConfigError(f"bad list index {key!r} in {dotted!r}") from None
            continue
        if not isinstance(node, dict):
            raise ConfigError(f"cannot descend into {'.'.join(keys[:i])!r} in {dotted!r}")
        if last:
            node[key] = value
        else:
            node = node.setdefault(key, {})


def parse_override(item: str) -> tuple[str, Any]:
    key, sep, raw = item.partition("=")
    if not sep or not key.strip():
        raise ConfigError(f"override must look like key=value, got {item!r}")
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse value in {item!r}: {exc}") from None
    return key.strip(), value


def load(path: str | Path | None = None, overrides: Iterable[str] = ()) -> dict[str, Any]:
    data: Mapping[str, Any] = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        try:
            data = yaml.safe_load(p.read_text()) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{p}: invalid YAML: {exc}") from None
        if not isinstance(data, Mapping):
            raise ConfigError(f"{p}: top level must be a mapping")
    unknown = set(data) - SECTIONS
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    merged = _merge(DEFAULTS, data)
    for item in overrides:
        key, value = parse_override(item)
        if key.split(".")[0] not in SECTIONS:
            raise ConfigError(f"override {key!r} does not name a config section")
        set_dotted(merged, key, value)
    return merged


def _check_keys(section: Mapping, allowed: set, name: str) -> None:
    extra = set(section) - allowed
    if extra:
        raise ConfigError(f"unknown keys in {name}: {sorted(extra)}")


def distributions(cfg: Mapping[str, Any]) -> EpisodeDistributions:
    try:
        return EpisodeDistributions.from_dict(cfg.get("episodes") or {})
    except (ValueError, TypeError, AttributeError) as exc:
        raise ConfigError(f"episodes: {exc}") from None


def detector(cfg: Mapping[str, Any], distance_m: float | None = None) -> DetectorConfig:
    sec = dict(cfg.get("detector") or {})
    _check_keys(sec, _DETECTOR_KEYS, "detector")
    dists = distributions(cfg)
    try:
        if "centroids" in sec:
            cents = tuple(Centroid(int(c[0]), float(c[1]), float(c[2])) for c in sec.pop("centroids"))
        else:
            cents = centroids_for(sec.pop("centroid_distance_m", distance_m), dists)
        sec.pop("centroid_distance_m", None)
        return DetectorConfig(centroids=cents, **sec)
    except (ValueError, TypeError, IndexError) as exc:
        raise ConfigError(f"detector: {exc}") from None


def handoff(cfg: Mapping[str, Any]) -> HandoffConfig:
    sec = dict(cfg.get("handoff") or {})
    _check_keys(sec, _HANDOFF_KEYS, "handoff")
    try:
        return HandoffConfig(detector=detector(cfg), **sec)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"handoff: {exc}") from None


def scenario(cfg: Mapping[str, Any], seed: int | None = None) -> ScenarioConfig:
    if not cfg.get("scenario"):
        raise ConfigError("config has no scenario section")
    return scenario_from_dict(cfg["scenario"], handoff(cfg), distributions(cfg),
                              seed if seed is not None else cfg.get("seed", DEFAULT_SEED))
