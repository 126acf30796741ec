"""JSON run configuration: schema, unit normalization and defaults.

Every frequency-like field accepts a bare number (rad/s) or one of
``{"hz": f}``, ``{"two_pi_hz": f}`` (both meaning 2π f rad/s) and
``{"rad_s": w}``. Times are in seconds. Unknown keys are rejected.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .analysis import AnalysisSettings
from .meanfield import IntegratorSettings, RecordSettings
from .model import PhysicalParams, Pulse, PulseSequence, hahn_sequence


class ConfigError(ValueError):
    """Invalid configuration document."""


SAMPLINGS = ("grid", "lattice", "quantile", "iid")

# section -> key -> (kind, default); kind "freq" accepts unit objects
_REQUIRED = object()
SCHEMA: dict[str, dict[str, tuple[str, Any]]] = {
    "physical": {
        "kappa": ("freq", _REQUIRED),
        "gamma": ("freq", 0.0),
        "Gamma_deph": ("freq", 0.0),
        "g_single": ("freq", 0.0),
        "N_spins": ("number", 1.0),
        "delta_c": ("freq", 0.0),
        "inhomogeneous_fwhm": ("freq", 0.0),
        "distribution": ("str", "gaussian"),
    },
    "ensemble": {
        "N_k": ("int", 2000),
        "sampling": ("str", "grid"),
        "span_fwhm": ("number", 1.0),
    },
    "hahn": {
        "tau": ("number", _REQUIRED),
        "F": ("freq", _REQUIRED),
        "t1": ("number", 0.20e-6),
        "d1": ("number", 0.22e-6),
        "d2": ("number", 0.43e-6),
        "phase1": ("number", 0.0),
        "phase2": ("number", 0.0),
        "t_end": ("number|null", None),
    },
    "pulse": {
        "t_start": ("number", _REQUIRED),
        "duration": ("number", _REQUIRED),
        "amplitude": ("freq", _REQUIRED),
        "phase": ("number", 0.0),
    },
    "integrator": {
        "dt": ("number|null", None),
        "scheme": ("str", "rk4"),
        "c_stab": ("number", 0.3),
        "eps_int": ("number", 1e-4),
        "dephasing_factor": ("number", 2.0),
    },
    "record": {
        "stride": ("number", 10e-9),
        "bloch_classes": ("intlist", []),
    },
    "analysis": {
        "tau": ("number|null", None),
        "window_frac": ("number", 0.45),
        "max_order": ("int", 10),
        "noise_floor": ("number", 1e-6),
        "guard": ("number|null", None),
    },
    "averaging": {
        "realizations": ("int", 1),
        "base_seed": ("int", 0),
        "keep_realizations": ("bool", False),
        "observable": ("str", "photons"),
        "workers": ("int", 1),
    },
    "analytic": {
        "beta": ("number", 1.0),
        "tau": ("number|null", None),
        "t_end": ("number|null", None),
        "n_points": ("int", 4001),
    },
    "sweep": {
        "name": ("str", "sweep"),
        "axes": ("axes", []),
        "budget": ("int", 1000),
    },
}
TOP_LEVEL = ("physical", "ensemble", "sequence", "integrator", "record", "analysis", "averaging", "analytic", "sweep")


def to_rad_s(value, where: str = "value") -> float:
    """Normalize a frequency given as a number (rad/s) or a one-key unit object."""
    if isinstance(value, bool):
        raise ConfigError(f"{where}: expected a frequency, got a boolean")
    if isinstance(value, (int, float)):
        out = float(value)
    elif isinstance(value, dict):
        if len(value) != 1:
            raise ConfigError(f"{where}: a unit object needs exactly one of hz, two_pi_hz, rad_s")
        (unit, x), = value.items()
        if unit not in ("hz", "two_pi_hz", "rad_s"):
            raise ConfigError(f"{where}: unknown unit {unit!r} (use hz, two_pi_hz or rad_s)")
        if isinstance(x, bool) or not isinstance(x, (int, float)):
            raise ConfigError(f"{where}: unit value must be a number")
        out = float(x) if unit == "rad_s" else 2.0 * math.pi * float(x)
    else:
        raise ConfigError(f"{where}: expected a number or unit object, got {type(value).__name__}")
    if not math.isfinite(out):
        raise ConfigError(f"{where}: must be finite")
    return out


def _coerce(kind: str, value, where: str):
    if kind == "freq":
        return to_rad_s(value, where)
    if kind == "number|null" and value is None:
        return None
    if kind in ("number", "number|null"):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ConfigError(f"{where}: expected a finite number")
        return float(value)
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise ConfigError(f"{where}: expected an integer")
        return int(value)
    if kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true or false")
        return value
    if kind == "str":
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string")
        return value
    if kind == "intlist":
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected a list of integers")
        return [_coerce("int", v, f"{where}[{i}]") for i, v in enumerate(value)]
    if kind == "axes":
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected a list of axes")
        axes = []
        for i, ax in enumerate(value):
            if not isinstance(ax, dict) or set(ax) != {"path", "values"}:
                raise ConfigError(f"{where}[{i}]: an axis is {{'path': str, 'values': [...]}}")
            if not isinstance(ax["path"], str) or not isinstance(ax["values"], list) or not ax["values"]:
                raise ConfigError(f"{where}[{i}]: path must be a string and values a non-empty list")
            axes.append({"path": ax["path"], "values": list(ax["values"])})
        return axes
    raise AssertionError(kind)


def _section(data, name: str, where: str) -> dict:
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object")
    spec = SCHEMA[name]
    unknown = sorted(set(data) - set(spec))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {unknown}; allowed: {sorted(spec)}")
    out = {}
    for key, (kind, default) in spec.items():
        if key in data:
            out[key] = _coerce(kind, data[key], f"{where}.{key}")
        elif default is _REQUIRED:
            raise ConfigError(f"{where}.{key} is required")
        else:
            out[key] = copy.deepcopy(default)
    return out


def normalize(data: dict) -> dict:
    """Validate a raw document and return it fully resolved (defaults filled, rad/s)."""
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = sorted(set(data) - set(TOP_LEVEL))
    if unknown:
        raise ConfigError(f"unknown top-level key(s) {unknown}; allowed: {list(TOP_LEVEL)}")
    if "physical" not in data:
        raise ConfigError("physical section is required")
    out = {name: _section(data.get(name), name, name) for name in TOP_LEVEL if name != "sequence"}
    seq = data.get("sequence")
    if seq is None:
        out["sequence"] = None
    elif not isinstance(seq, dict):
        raise ConfigError("sequence: expected an object")
    elif "hahn" in seq:
        if set(seq) != {"hahn"}:
            raise ConfigError("sequence: use either {'hahn': {...}} or {'pulses': [...], 't_end': ...}")
        out["sequence"] = {"hahn": _section(seq["hahn"], "hahn", "sequence.hahn")}
    else:
        if set(seq) != {"pulses", "t_end"}:
            raise ConfigError("sequence: use either {'hahn': {...}} or {'pulses': [...], 't_end': ...}")
        if not isinstance(seq["pulses"], list):
            raise ConfigError("sequence.pulses: expected a list")
        pulses = [_section(p, "pulse", f"sequence.pulses[{i}]") for i, p in enumerate(seq["pulses"])]
        out["sequence"] = {"pulses": pulses, "t_end": _coerce("number", seq["t_end"], "sequence.t_end")}
    _check_values(out)
    return out


def _check_values(c: dict) -> None:
    if c["ensemble"]["sampling"] not in SAMPLINGS:
        raise ConfigError(f"ensemble.sampling must be one of {SAMPLINGS}")
    if c["ensemble"]["N_k"] < 1:
        raise ConfigError("ensemble.N_k must be >= 1")
    if not c["ensemble"]["span_fwhm"] > 0:
        raise ConfigError("ensemble.span_fwhm must be > 0")
    if c["averaging"]["realizations"] < 1:
        raise ConfigError("averaging.realizations must be >= 1")
    if c["averaging"]["workers"] < 1:
        raise ConfigError("averaging.workers must be >= 1")
    if c["averaging"]["observable"] not in ("photons", "complex_mean"):
        raise ConfigError("averaging.observable must be 'photons' or 'complex_mean'")
    if c["sweep"]["budget"] < 1:
        raise ConfigError("sweep.budget must be >= 1")
    if not 0 < c["analytic"]["beta"] <= 1:
        raise ConfigError("analytic.beta must lie in (0, 1]")
    if c["analytic"]["n_points"] < 2:
        raise ConfigError("analytic.n_points must be >= 2")
    # construct the domain objects once so their own validation is reported as a config error
    try:
        cfg = RunConfig._build(c)
        if c["sequence"] is not None:
            cfg.sequence
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


@dataclass(frozen=True)
class RunConfig:
    """Resolved configuration; ``data`` is the normalized document it was built from."""

    data: dict
    params: PhysicalParams
    integrator: IntegratorSettings
    record: RecordSettings
    analysis: AnalysisSettings

    @classmethod
    def _build(cls, c: dict) -> "RunConfig":
        return cls(
            data=c,
            params=PhysicalParams(**c["physical"]),
            integrator=IntegratorSettings(**c["integrator"]),
            record=RecordSettings(stride=c["record"]["stride"], bloch_classes=tuple(c["record"]["bloch_classes"])),
            analysis=AnalysisSettings(**{k: v for k, v in c["analysis"].items() if k != "tau"}),
        )

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        return cls._build(normalize(data))

    def to_dict(self) -> dict:
        return copy.deepcopy(self.data)

    @property
    def ensemble(self) -> dict:
        return self.data["ensemble"]

    @property
    def averaging(self) -> dict:
        return self.data["averaging"]

    @property
    def sequence(self) -> PulseSequence:
        seq = self.data["sequence"]
        if seq is None:
            raise ConfigError("this command needs a sequence section")
        if "hahn" in seq:
            h = seq["hahn"]
            return hahn_sequence(h["tau"], h["t1"], h["d1"], h["d2"], h["F"], h["phase1"], h["phase2"], h["t_end"])
        return PulseSequence(tuple(Pulse(**p) for p in seq["pulses"]), seq["t_end"])

    @property
    def tau(self) -> float:
        """Echo spacing for analysis: analysis.tau, else the Hahn delay, else analytic.tau."""
        for value in (
            self.data["analysis"]["tau"],
            (self.data["sequence"] or {}).get("hahn", {}).get("tau"),
            self.data["analytic"]["tau"],
        ):
            if value is not None:
                return value
        raise ConfigError("no τ given: set analysis.tau, sequence.hahn.tau or analytic.tau")

    def replace(self, **dotted) -> "RunConfig":
        """Copy with values set at dotted paths, e.g. replace(**{"ensemble.N_k": 500})."""
        data = self.to_dict()
        for path, value in dotted.items():
            set_path(data, path, value)
        return RunConfig.from_dict(data)


def set_path(data: dict, path: str, value) -> None:
    keys = path.split(".")
    node = data
    for k in keys[:-1]:
        if not isinstance(node, dict) or k not in node or node[k] is None:
            raise ConfigError(f"path {path!r}: no section {k!r}")
        node = node[k]
    if not isinstance(node, dict) or keys[-1] not in node:
        raise ConfigError(f"path {path!r}: unknown key {keys[-1]!r}")
    node[keys[-1]] = value


def load_config(path: str | Path) -> RunConfig:
    """Read a config file; a run's meta.json is accepted too (its ``config`` entry is used)."""
    text = Path(path).read_text()  # OSError propagates: unreadable, not invalid
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if isinstance(data, dict) and "config" in data and "version" in data:
        data = data["config"]
    return RunConfig.from_dict(data)
