"""Experiment configuration files.

Configs are YAML with explicit units in every key name. They are validated
against :data:`CONFIG_SCHEMA` before anything is built; validation errors
carry the offending field path and, when known, the line number.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Dict, Optional

import jsonschema
import numpy as np
import yaml

from .beamline import ANGSTROM, BeamlineConfig, BeamSpec, TuningErrors
from .coherence import BeamGeometry
from .devices import (
    MwpPair,
    Polarizer,
    QuartzBlockSet,
    RfFlipperQuartet,
    Slit,
    SpinPhaseCoil,
    solve_focusing,
)
from .quantum import MWP_ANGLES, AngleSet

__all__ = [
    "ConfigError",
    "CONFIG_SCHEMA",
    "FORMAT_VERSION",
    "ExperimentConfig",
    "load_config",
    "parse_config",
    "validate",
    "bundled_configs",
    "bundled_config_path",
]

FORMAT_VERSION = 1

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_unit = {"type": "number", "minimum": 0, "maximum": 1}
_pairs = {"type": "array", "items": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}}
_range = {
    "type": "object",
    "properties": {"start_deg": _num, "stop_deg": _num, "num": {"type": "integer", "minimum": 1},
                   "endpoint": {"type": "boolean"}},
    "required": ["start_deg", "stop_deg", "num"],
    "additionalProperties": False,
}
_grid = {"oneOf": [{"type": "array", "items": _num, "minItems": 1}, _range]}

CONFIG_SCHEMA: Dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["format_version", "instrument", "beam"],
    "additionalProperties": False,
    "properties": {
        "format_version": {"const": FORMAT_VERSION},
        "label": {"type": "string"},
        "description": {"type": "string"},
        "instrument": {
            "type": "object",
            "required": ["type"],
            "additionalProperties": False,
            "properties": {
                "type": {"enum": ["mwp", "rf"]},
                "mwp": {
                    "type": "object",
                    "required": ["field_mT", "separation_m"],
                    "additionalProperties": False,
                    "properties": {"field_mT": _nonneg, "separation_m": _pos,
                                   "film_angle_deg": {"type": "number", "exclusiveMinimum": 0,
                                                      "exclusiveMaximum": 90}},
                },
                "rf": {
                    "type": "object",
                    "required": ["mode", "distances_m"],
                    "additionalProperties": False,
                    "properties": {
                        "mode": {"enum": ["conventional", "overlap"]},
                        "nu1_kHz": _nonneg,
                        "frequencies_kHz": {"type": "array", "items": _nonneg,
                                            "minItems": 4, "maxItems": 4},
                        "angles_deg": {"type": "array", "items": _num, "minItems": 4, "maxItems": 4},
                        "distances_m": {
                            "type": "object",
                            "required": ["L12", "L2S", "LS3", "L34"],
                            "additionalProperties": False,
                            "properties": {k: _pos for k in ("L12", "L2S", "LS3", "L34")},
                        },
                        "entanglement_length_nm": _pos,
                    },
                    "anyOf": [{"required": ["nu1_kHz"]}, {"required": ["frequencies_kHz"]}],
                },
            },
        },
        "spin_coil": {
            "type": "object",
            "required": ["field_mT", "path_length_m"],
            "additionalProperties": False,
            "properties": {"field_mT": _num, "path_length_m": _pos},
        },
        "quartz": {
            "type": "object",
            "required": ["count", "angle_deg", "sld_per_m2"],
            "additionalProperties": False,
            "properties": {
                "count": {"type": "integer", "minimum": 0},
                "angle_deg": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 90},
                "sld_per_m2": _num,
                "transmission": _pairs,
            },
        },
        "beam": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "wavelength_angstrom": _pos,
                "incident_flux": _nonneg,
                "background": _nonneg,
                "polarization": _unit,
                "polarization_table": _pairs,
                "monitor": _pos,
                "tof_bins_angstrom": {"type": "array", "items": _pos, "minItems": 1},
            },
        },
        "geometry": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "slit_width_mm": _pos,
                "slit_distance_m": _pos,
                "wavelength_spread_angstrom": _pos,
                "beta_t_nm": _pos,
            },
            "dependentRequired": {"slit_width_mm": ["slit_distance_m"],
                                  "slit_distance_m": ["slit_width_mm"]},
        },
        "stray_phase_deg": _num,
        "asymmetry": {"type": "number", "exclusiveMinimum": -1, "exclusiveMaximum": 1},
        "rf_tuning": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"alpha0_rad_per_angstrom": _num, "phi_rf_deg": _num,
                           "cubic_rad_per_angstrom3": _num},
        },
        "scan": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"alphas": _grid, "chis": _grid, "tof": {"type": "boolean"}},
        },
        "analysis": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "angles_deg": {"type": "array", "items": _num, "minItems": 4, "maxItems": 4},
                "pooled": {"type": "boolean"},
                "trials": {"type": "integer", "minimum": 100},
                "background": _nonneg,
            },
        },
    },
}


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads ``1e5`` and ``2.5e-3`` as floats."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
    |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
    |\.[0-9_]+(?:[eE][-+][0-9]+)?
    |[-+]?\.(?:inf|Inf|INF)
    |\.(?:nan|NaN|NAN))$""", re.X),
    list("-+0123456789."),
)


class ConfigError(ValueError):
    """Config file failed to parse or validate."""

    def __init__(self, problems, source=None):
        self.problems = list(problems)
        where = f"{source}: " if source else ""
        super().__init__("\n".join(where + p for p in self.problems))


def _line_of(node, path):
    """Line number (1-based) of the YAML node at ``path``, if it can be found."""
    line = None
    for key in path:
        if node is None:
            break
        line = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            nxt = None
            for k, v in node.value:
                if k.value == str(key):
                    nxt, line = v, k.start_mark.line + 1
                    break
            node = nxt
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
        else:
            node = None
    if node is not None:
        line = node.start_mark.line + 1
    return line


def validate(data: Any, text: Optional[str] = None, source=None) -> None:
    """Raise :class:`ConfigError` listing every schema violation."""
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(map(str, e.absolute_path)))
    if not errors:
        _check_semantics(data, source)
        return
    root = yaml.compose(text) if text else None
    problems = []
    for e in errors:
        path = list(e.absolute_path)
        field_name = ".".join(map(str, path)) or "<root>"
        line = _line_of(root, path) if root is not None else None
        prefix = f"line {line}: " if line else ""
        problems.append(f"{prefix}{field_name}: {e.message}")
    raise ConfigError(problems, source)


def _check_semantics(data, source):
    problems = []
    inst = data["instrument"]
    kind = inst["type"]
    if kind not in inst:
        problems.append(f"instrument.{kind}: section required for instrument type {kind!r}")
    beam = data["beam"]
    tof = data.get("scan", {}).get("tof", False)
    if "wavelength_angstrom" not in beam and not tof:
        problems.append("beam.wavelength_angstrom: required unless scan.tof is true")
    if tof and "tof_bins_angstrom" not in beam:
        problems.append("beam.tof_bins_angstrom: required when scan.tof is true")
    if kind == "rf" and "rf" in inst:
        rf = inst["rf"]
        freqs = rf.get("frequencies_kHz")
        if rf["mode"] == "conventional" and freqs and len(set(freqs)) != 1:
            problems.append("instrument.rf.frequencies_kHz: conventional mode needs equal frequencies")
    if problems:
        raise ConfigError(problems, source)


@dataclass
class ExperimentConfig:
    """Validated config: the beamline plus scan and analysis settings."""

    beamline: BeamlineConfig
    alphas: np.ndarray
    chis: np.ndarray
    tof: bool
    angles: AngleSet
    pooled: bool
    trials: int
    background: float
    raw: Dict[str, Any]
    source: Optional[str] = None

    @property
    def label(self) -> str:
        return self.beamline.label


def _grid(spec, default):
    if spec is None:
        return default
    if isinstance(spec, dict):
        return np.deg2rad(np.linspace(spec["start_deg"], spec["stop_deg"], spec["num"],
                                      endpoint=spec.get("endpoint", True)))
    return np.deg2rad(np.asarray(spec, dtype=float))


DEFAULT_ALPHAS = np.linspace(-np.pi, np.pi, 30, endpoint=False)
DEFAULT_CHIS = np.linspace(-np.pi, np.pi, 9)


def _rf_quartet(rf) -> RfFlipperQuartet:
    d = rf["distances_m"]
    dist = (d["L12"], d["L2S"], d["LS3"], d["L34"])
    if "frequencies_kHz" in rf:
        freqs = tuple(1e3 * f for f in rf["frequencies_kHz"])
    elif rf["mode"] == "overlap":
        nu1 = 1e3 * rf["nu1_kHz"]
        freqs = (nu1, *solve_focusing(nu1, *dist))
    else:
        freqs = (1e3 * rf["nu1_kHz"],) * 4
    angles = tuple(np.deg2rad(rf.get("angles_deg", [70.0] * 4)))
    xi = rf.get("entanglement_length_nm")
    return RfFlipperQuartet(freqs, dist, angles, rf["mode"], None if xi is None else xi * 1e-9)


def build(data: Dict[str, Any], source=None) -> ExperimentConfig:
    inst = data["instrument"]
    beam_d = data["beam"]
    scan = data.get("scan", {})
    tof = bool(scan.get("tof", False))
    bins = tuple(b * ANGSTROM for b in beam_d.get("tof_bins_angstrom", ()))
    lam = beam_d.get("wavelength_angstrom")
    lam = lam * ANGSTROM if lam is not None else None

    elements = [Polarizer("polarizer")]
    geom_d = data.get("geometry", {})
    if "slit_width_mm" in geom_d:
        elements.append(Slit(geom_d["slit_width_mm"] * 1e-3))
    if inst["type"] == "mwp":
        m = inst["mwp"]
        theta = np.deg2rad(m.get("film_angle_deg", 45.0))
        elements.insert(1, MwpPair(m["field_mT"] * 1e-3, m["separation_m"], theta, "entangler"))
    else:
        elements.insert(1, _rf_quartet(inst["rf"]))
    if "spin_coil" in data:
        c = data["spin_coil"]
        elements.insert(2, SpinPhaseCoil(c["field_mT"] * 1e-3, c["path_length_m"]))
    if "quartz" in data:
        q = data["quartz"]
        curve = tuple(tuple(p) for p in q.get("transmission", ()))
        elements.append(QuartzBlockSet(q["count"], np.deg2rad(q["angle_deg"]), q["sld_per_m2"], curve))
    if inst["type"] == "mwp":
        m = inst["mwp"]
        theta = np.deg2rad(m.get("film_angle_deg", 45.0))
        elements.append(MwpPair(m["field_mT"] * 1e-3, m["separation_m"], theta, "disentangler"))
    elements.append(Polarizer("analyzer"))

    beam = BeamSpec(
        wavelength=lam,
        incident_flux=beam_d.get("incident_flux", 1e5),
        background=beam_d.get("background", 0.0),
        polarization=beam_d.get("polarization", 1.0),
        polarization_table=tuple(tuple(p) for p in beam_d.get("polarization_table", ())),
        monitor=beam_d.get("monitor", 1.0),
        tof_bins=bins,
    )
    ref = lam if lam is not None else (bins[0] if bins else None)
    geometry = None
    if "slit_width_mm" in geom_d:
        spread = geom_d.get("wavelength_spread_angstrom")
        geometry = BeamGeometry(geom_d["slit_width_mm"] * 1e-3, geom_d["slit_distance_m"], ref,
                                None if spread is None else spread * ANGSTROM)
    beta_meas = geom_d.get("beta_t_nm")
    tuning = None
    if "rf_tuning" in data:
        t = data["rf_tuning"]
        tuning = TuningErrors(t.get("alpha0_rad_per_angstrom", 0.0),
                              np.deg2rad(t.get("phi_rf_deg", 0.0)),
                              t.get("cubic_rad_per_angstrom3", 0.0))
    cfg = BeamlineConfig(
        elements=tuple(elements), beam=beam, geometry=geometry,
        stray_phase=np.deg2rad(data.get("stray_phase_deg", 0.0)), tuning=tuning,
        asymmetry=data.get("asymmetry", 0.0), reference_wavelength=ref,
        beta_t_measured=None if beta_meas is None else beta_meas * 1e-9,
        label=data.get("label", ""),
    )
    an = data.get("analysis", {})
    angles = AngleSet.from_degrees(*an["angles_deg"]) if "angles_deg" in an else MWP_ANGLES
    return ExperimentConfig(
        beamline=cfg,
        alphas=_grid(scan.get("alphas"), DEFAULT_ALPHAS),
        chis=_grid(scan.get("chis"), DEFAULT_CHIS),
        tof=tof,
        angles=angles,
        pooled=bool(an.get("pooled", tof)),
        trials=int(an.get("trials", 1000)),
        background=float(an.get("background", 0.0)),
        raw=data,
        source=None if source is None else str(source),
    )


def parse_config(text: str, source=None) -> ExperimentConfig:
    try:
        data = yaml.load(text, Loader=_Loader)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        line = f"line {mark.line + 1}: " if mark is not None else ""
        raise ConfigError([f"{line}YAML syntax error: {exc.problem}"], source) from None
    if not isinstance(data, dict):
        raise ConfigError(["<root>: config must be a mapping"], source)
    validate(data, text, source)
    try:
        return build(data, source)
    except ValueError as exc:
        raise ConfigError([str(exc)], source) from None


def bundled_configs():
    """Names of the example configs shipped with the package."""
    root = resources.files("spinpath") / "configs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def bundled_config_path(name: str) -> Path:
    path = Path(str(resources.files("spinpath") / "configs" / f"{name}.yaml"))
    if not path.exists():
        raise FileNotFoundError(f"no bundled config named {name!r}; have {bundled_configs()}")
    return path


def load_config(path_or_name) -> ExperimentConfig:
    """Load a config file; a bare name falls back to the bundled examples."""
    p = Path(path_or_name)
    if not p.exists() and p.suffix == "" and p.name == str(path_or_name):
        p = bundled_config_path(str(path_or_name))
    return parse_config(p.read_text(), source=p)
