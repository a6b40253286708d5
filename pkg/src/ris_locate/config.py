"""JSON run configuration with unit-bearing keys.

Layout::

    {
      "system": {"wavelength_m": 0.01, "p_t_dbm": 10, ...},
      "pose":   {"position_m": [0, 0], "orientation_rad": 0.5235987755982988},
      "search": {"nu_grid": 720, ...}
    }

Logarithmic quantities may be given in dB units or in linear units (never
both); :func:`serialize` always writes the linear form so that a parse of
its output reproduces the configuration exactly. When neither noise
variance key is present it is derived as ``n_f * N_0 * N_c * delta_f``.
"""
from __future__ import annotations

import json
from dataclasses import fields
from importlib import resources
from pathlib import Path

import numpy as np

from .estimator import SearchSettings
from .geometry import RisPose
from .signal import SystemConfig, db_to_linear, dbm_to_watts


class ConfigError(ValueError):
    pass


# key -> (SystemConfig field, converter)
_PLAIN = {
    "wavelength_m": ("wavelength", float),
    "element_spacing_m": ("delta", float),
    "num_elements": ("M", int),
    "num_subcarriers": ("N_c", int),
    "num_transmissions": ("T", int),
    "subcarrier_spacing_hz": ("delta_f", float),
    "tx_gain": ("G_t", float),
    "rx_gain": ("G_r", float),
    "ifft_size": ("N_F", int),
    "speed_of_light_m_s": ("c", float),
    "tx_position_m": ("p_tx", lambda v: _pair(v, "tx_position_m")),
    "rx_position_m": ("p_rx", lambda v: _pair(v, "rx_position_m")),
}
# field -> (log key, log -> linear, linear key)
_LOG = {
    "P_t": ("p_t_dbm", dbm_to_watts, "p_t_w"),
    "noise_variance": ("noise_variance_dbm", dbm_to_watts, "noise_variance_w"),
    "noise_psd": ("noise_psd_dbm_hz", dbm_to_watts, "noise_psd_w_hz"),
    "noise_figure": ("noise_figure_db", db_to_linear, "noise_figure_linear"),
}
_SECTIONS = ("system", "pose", "search")
_POSE_KEYS = ("position_m", "orientation_rad")


def _pair(v, key):
    if not (isinstance(v, (list, tuple)) and len(v) == 2):
        raise ConfigError(f"{key}: expected a list of two numbers, got {v!r}")
    return (float(v[0]), float(v[1]))


def _number(v, key, kind=float):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {v!r}")
    if kind is int:
        if float(v) != int(v):
            raise ConfigError(f"{key}: expected an integer, got {v!r}")
        return int(v)
    return float(v)


def default_config_path() -> Path:
    return Path(str(resources.files("ris_locate") / "data" / "default_config.json"))


def load_json(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return doc


def parse_config(path) -> tuple[SystemConfig, RisPose, SearchSettings]:
    """Read and validate a config file."""
    return config_from_dict(load_json(path), source=str(path))


def config_from_dict(doc: dict, source: str = "<config>") -> tuple[SystemConfig, RisPose, SearchSettings]:
    problems = []
    for k in doc:
        if k not in _SECTIONS:
            problems.append(f"unknown section {k!r}")
    sys_doc = doc.get("system", {})
    pose_doc = doc.get("pose", {})
    search_doc = doc.get("search", {})

    kw = {}
    known = set(_PLAIN) | {k for log, _, lin in _LOG.values() for k in (log, lin)}
    for k, v in sys_doc.items():
        if k not in known:
            problems.append(f"system: unknown key {k!r}")
            continue
        try:
            if k in _PLAIN:
                name, conv = _PLAIN[k]
                kw[name] = conv(v) if name in ("p_tx", "p_rx") else _number(v, k, conv)
        except ConfigError as exc:
            problems.append(f"system: {exc}")
    for name, (log_key, to_lin, lin_key) in _LOG.items():
        if log_key in sys_doc and lin_key in sys_doc:
            problems.append(f"system: give only one of {log_key!r} and {lin_key!r}")
            continue
        try:
            if log_key in sys_doc:
                kw[name] = float(to_lin(_number(sys_doc[log_key], log_key)))
            elif lin_key in sys_doc:
                kw[name] = _number(sys_doc[lin_key], lin_key)
        except ConfigError as exc:
            problems.append(f"system: {exc}")

    for k in pose_doc:
        if k not in _POSE_KEYS:
            problems.append(f"pose: unknown key {k!r}")
    pose_args = []
    try:
        pose_args = [_pair(pose_doc.get("position_m", [0.0, 0.0]), "position_m"),
                     _number(pose_doc.get("orientation_rad", np.pi / 6), "orientation_rad")]
    except ConfigError as exc:
        problems.append(f"pose: {exc}")

    search_kw = {}
    valid_search = {f.name for f in fields(SearchSettings)}
    for k, v in search_doc.items():
        if k not in valid_search:
            problems.append(f"search: unknown key {k!r}")
        else:
            search_kw[k] = v

    cfg = settings = None
    if not problems:
        try:
            if "noise_variance" not in kw:
                kw["noise_variance"] = SystemConfig(**kw).derived_noise_variance()
            cfg = SystemConfig(**kw)
        except (ValueError, TypeError) as exc:
            problems.append(f"system: {exc}")
        try:
            settings = SearchSettings(**search_kw)
        except (ValueError, TypeError) as exc:
            problems.append(f"search: {exc}")
    if problems:
        raise ConfigError(f"{source}: " + "; ".join(problems))
    return cfg, RisPose(*pose_args), settings


def serialize(cfg: SystemConfig, pose: RisPose, s: SearchSettings) -> dict:
    """Inverse of :func:`config_from_dict` (linear units, exact floats)."""
    system = {}
    for key, (name, _) in _PLAIN.items():
        v = getattr(cfg, name)
        system[key] = list(v) if isinstance(v, tuple) else v
    for name, (_, _, lin_key) in _LOG.items():
        system[lin_key] = getattr(cfg, name)
    return {
        "system": system,
        "pose": {"position_m": [float(pose.center[0]), float(pose.center[1])], "orientation_rad": float(pose.alpha)},
        "search": {f.name: getattr(s, f.name) for f in fields(SearchSettings)},
    }


def apply_overrides(s: SearchSettings, overrides: dict) -> SearchSettings:
    """New settings with ``overrides`` (strings or values) applied; unknown names raise."""
    valid = {f.name: f for f in fields(SearchSettings)}
    kw = {}
    for k, v in overrides.items():
        if k not in valid:
            raise ConfigError(f"unknown search setting {k!r}")
        cur = getattr(s, k)
        if isinstance(v, str):
            if isinstance(cur, bool):
                if v.lower() not in ("true", "false", "1", "0"):
                    raise ConfigError(f"search setting {k}: expected true/false, got {v!r}")
                v = v.lower() in ("true", "1")
            elif isinstance(cur, int):
                v = int(v)
            elif isinstance(cur, float):
                v = float(v)
        kw[k] = v
    try:
        return SearchSettings(**{**{f: getattr(s, f) for f in valid}, **kw})
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
