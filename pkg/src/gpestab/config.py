"""INI-style run configuration with strict key validation.

Every subcommand owns a fixed set of ``[section] key = value`` entries;
unknown sections or keys are rejected before any computation starts.
"""
from __future__ import annotations

import configparser
import hashlib
import re
from pathlib import Path

import numpy as np

from .model import ConfigurationError

# section -> key -> (parser, default); default None means optional, ... means required
_num = float


def _int(s: str) -> int:
    return int(s)


def _str(s: str) -> str:
    return s.strip()


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


_LINSPACE = re.compile(r"^linspace\(\s*([^,]+),\s*([^,]+),\s*([^,)]+)\)$")


def parse_values(s: str) -> tuple[float, ...]:
    """``1.0``, ``0.1, 0.2, 0.3`` or ``linspace(a, b, n)``."""
    s = s.strip()
    m = _LINSPACE.match(s)
    if m:
        a, b, n = float(m.group(1)), float(m.group(2)), int(m.group(3))
        return tuple(float(v) for v in np.linspace(a, b, n))
    return tuple(float(v) for v in s.split(",") if v.strip())


REQUIRED = ...

GRID = {"n_points": (_int, 128), "n_periods": (_int, 1), "period_length": (_num, None),
        "backend": (_str, "fd")}
POTENTIAL = {"variant": (_str, "Zero"), "V0": (_num, None), "k": (_num, None),
             "wavenumber": (_num, None), "file": (_str, None)}

SCHEMAS = {
    "solve": {
        "grid": GRID,
        "potential": POTENTIAL,
        "solve": {"method": (_str, "newton"), "g1": (_num, REQUIRED), "mu": (_num, None),
                  "N": (_num, None), "n_lattice": (_int, 1), "tol": (_num, 1e-10),
                  "guess": (_str, "auto"), "guess_amplitude": (_num, None), "max_iter": (_int, 50)},
        "output": {"state": (_str, "state.json")},
    },
    "classify": {
        "classify": {"state": (_str, None), "eps": (_num, None)},
        "output": {"verdict": (_str, "verdict.json"), "csv": (_str, "verdict.csv")},
    },
    "evolve": {
        "evolve": {"state": (_str, REQUIRED), "equation": (_str, "linearized"), "init": (_str, "mode"),
                   "mode_index": (_int, 0), "fourier_index": (_int, 1), "T1_0": (_num, 1.0),
                   "T2_0": (_num, 0.0), "epsilon": (_num, 1e-4), "dt": (_num, None),
                   "t_end": (_num, 10.0), "scheme": (_str, "leapfrog"), "record_every": (_int, 1),
                   "fit_from": (_num, None)},
        "output": {"trajectory": (_str, "trajectory.csv")},
    },
    "control": {
        "control": {"state": (_str, REQUIRED), "mode_index": (_int, 0), "variant": (_str, "pair"),
                    "dt": (_num, None), "window": (_num, None), "magnitude": (_num, None),
                    "record_every": (_int, 1)},
        "output": {"report": (_str, "control.json")},
    },
    "sweep": {
        "sweep": {"V0": (parse_values, None), "k": (parse_values, None), "g1": (parse_values, None),
                  "mu": (parse_values, None), "N": (parse_values, None), "axes": (_str, None),
                  "n_points": (_int, 128), "n_periods": (_int, 1), "n_lattice": (_int, 1),
                  "backend": (_str, "spectral"), "newton_tol": (_num, 1e-10), "eps": (_num, None),
                  "workers": (_int, 1), "timeout": (_num, None), "max_points": (_int, 10000)},
        "output": {"csv": (_str, "sweep.csv"), "manifest": (_str, "sweep.manifest.json")},
    },
    "elliptic-check": {
        "elliptic": {"moduli": (parse_values, (0.0, 0.2, 0.5, 0.7, 0.9, 0.99, 1.0)),
                     "n_samples": (_int, 201), "x_max": (_num, 20.0)},
        "output": {"report": (_str, "elliptic_check.csv")},
    },
}


def config_hash(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def load_config(path: str | Path | None, subcommand: str) -> tuple[dict, str]:
    """Parse and validate; returns ``(config, sha256-prefix of the file text)``."""
    schema = SCHEMAS[subcommand]
    text = ""
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as err:
            raise ConfigurationError(f"cannot read config {path}: {err}") from err
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as err:
        raise ConfigurationError(f"malformed config: {err}") from err
    for section in parser.sections():
        if section not in schema:
            raise ConfigurationError(f"unknown section [{section}] for '{subcommand}'")
    out: dict = {}
    for section, keys in schema.items():
        given = parser[section] if parser.has_section(section) else {}
        for key in given:
            if key not in keys:
                raise ConfigurationError(f"unknown key '{key}' in [{section}]")
        block = {}
        for key, (conv, default) in keys.items():
            if key in given:
                try:
                    block[key] = conv(given[key])
                except ValueError as err:
                    raise ConfigurationError(f"[{section}] {key}: {err}") from err
            elif default is REQUIRED:
                raise ConfigurationError(f"[{section}] {key} is required")
            else:
                block[key] = default
        block["_given"] = tuple(given)
        out[section] = block
    return out, config_hash(text)
