"""Sectioned ``key = value`` configuration files.

Example::

    [system]
    fc = 100e9
    M = 8

    [geometry]
    user_layout = random

    [experiment]
    bandwidths = [1e9, 5e9, 10e9, 20e9]

Values are Python literals (numbers, lists, tuples, True/False); anything
that does not parse as a literal is taken as a bare string. Unknown
sections or keys are errors reported with their line number.
"""
import ast
from dataclasses import fields

from .errors import ConfigError
from .scenario import ScenarioConfig

SECTIONS = {
    "system": ("fc", "B", "M", "Nt", "Nrf", "Kt", "R", "N1", "N2", "S1", "S2", "K",
               "Pmax", "noise_dbm", "kappa_abs", "delta", "seed", "structure",
               "aperture_gain", "realizable_delays", "csi_model"),
    "geometry": ("geometry_mode", "bs_position", "bs_axis", "ris_positions",
                 "ris_spacing", "ris_normal", "ris_row_axis", "user_center",
                 "user_radius", "user_layout", "user_positions", "user_sides",
                 "theta_b", "u_b", "v_b", "d_b", "u_rk", "v_rk", "d_rk"),
    "solver": ("tol", "max_iter", "admm_rho", "admm_tol", "admm_max_iter",
               "qcqp_tol", "monotone_tol"),
}

EXPERIMENT_KEYS = ("bandwidths", "structures", "schemes", "subsurfaces", "powers",
                   "deltas", "draws", "repetitions", "links")

_FIELD_DEFAULTS = {f.name: f.default for f in fields(ScenarioConfig)}
_SECTION_OF = {key: sec for sec, keys in SECTIONS.items() for key in keys}
assert set(_SECTION_OF) == set(_FIELD_DEFAULTS), "config sections out of sync"


def parse_value(text):
    text = text.strip()
    lowered = text.lower()
    if lowered in ("true", "yes", "on"):
        return True
    if lowered in ("false", "no", "off"):
        return False
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def coerce(key, value):
    """Type-check ``value`` against the default of config field ``key``."""
    default = _FIELD_DEFAULTS[key]
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key} expects true/false, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, (int, float)) \
                or float(value) != int(value):
            raise ConfigError(f"{key} expects an integer, got {value!r}")
        return int(value)
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key} expects a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{key} expects a name, got {value!r}")
        return value
    if isinstance(default, tuple):
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            value = (value,)
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{key} expects a list, got {value!r}")
        return tuple(tuple(v) if isinstance(v, list) else v for v in value)
    raise ConfigError(f"cannot coerce {key}")  # pragma: no cover


def parse_text(text, source="<config>"):
    """Return ``(config_overrides, experiment_overrides)`` from file text."""
    cfg, exp = {}, {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].split(";", 1)[0].strip()
        if not line:
            continue
        where = f"{source}:{lineno}"
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"{where}: malformed section header {raw.strip()!r}")
            section = line[1:-1].strip().lower()
            if section not in SECTIONS and section != "experiment":
                raise ConfigError(f"{where}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ConfigError(f"{where}: expected 'key = value', got {raw.strip()!r}")
        if section is None:
            raise ConfigError(f"{where}: key outside of any section")
        key, value = (part.strip() for part in line.split("=", 1))
        if section == "experiment":
            if key not in EXPERIMENT_KEYS:
                raise ConfigError(f"{where}: unknown experiment key {key!r}")
            target = exp
        else:
            if key not in SECTIONS[section]:
                hint = f" (belongs in [{_SECTION_OF[key]}])" if key in _SECTION_OF else ""
                raise ConfigError(f"{where}: unknown key {key!r} in [{section}]{hint}")
            target = cfg
        if key in target:
            raise ConfigError(f"{where}: duplicate key {key!r}")
        try:
            target[key] = parse_value(value) if target is exp else coerce(key, parse_value(value))
        except ConfigError as exc:
            raise ConfigError(f"{where}: {exc}") from None
    return cfg, exp


def parse_assignment(item):
    """``key=value`` or ``section.key=value`` from the command line."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not key=value")
    key, value = (p.strip() for p in item.split("=", 1))
    section = None
    if "." in key:
        section, key = key.split(".", 1)
    if section == "experiment" or (section is None and key in EXPERIMENT_KEYS):
        if key not in EXPERIMENT_KEYS:
            raise ConfigError(f"unknown experiment key {key!r}")
        return "experiment", key, parse_value(value)
    if key not in _FIELD_DEFAULTS:
        raise ConfigError(f"unknown config key {key!r}")
    if section is not None and _SECTION_OF[key] != section:
        raise ConfigError(f"{key!r} belongs in [{_SECTION_OF[key]}], not [{section}]")
    return "config", key, coerce(key, parse_value(value))


def load(path=None, overrides=(), base=None):
    """Resolve a config file plus overrides into ``(ScenarioConfig, experiment dict)``."""
    cfg_values, exp_values = {}, {}
    if path is not None:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
        cfg_values, exp_values = parse_text(text, str(path))
    for item in overrides:
        kind, key, value = parse_assignment(item)
        (exp_values if kind == "experiment" else cfg_values)[key] = value
    base = ScenarioConfig() if base is None else base
    return base.replace(**cfg_values), exp_values


def format_config(cfg):
    """Resolved config in the file format (round-trips through :func:`parse_text`)."""
    values = cfg.as_dict()
    out = []
    for section, keys in SECTIONS.items():
        out.append(f"[{section}]")
        out.extend(f"{key} = {_render(values[key])}" for key in keys)
        out.append("")
    return "\n".join(out)


def _render(value):
    if isinstance(value, str):
        return value
    return repr(value)
