"""CSV and JSON serialization for scan datasets and witness reports."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .analysis import WitnessReport
from .beamline import ScanDataset
from .coherence import RegimeDescriptor
from .quantum import TSIRELSON_BOUND, AngleSet

__all__ = [
    "SchemaError",
    "write_dataset",
    "read_dataset",
    "metadata_path",
    "report_to_dict",
    "report_from_dict",
    "write_reports",
    "read_reports",
    "REPORT_COLUMNS",
    "SUMMARY_COLUMNS",
    "summary_rows",
    "write_rows",
]

FORMAT_VERSION = 1


class SchemaError(ValueError):
    """A file does not follow the expected layout."""


def metadata_path(csv_path) -> Path:
    p = Path(csv_path)
    return p.with_name(p.stem + ".meta.json")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def write_dataset(ds: ScanDataset, path) -> Path:
    """Write the records as CSV and the metadata as a JSON sidecar."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ScanDataset.COLUMNS)
        for row in zip(ds.alpha, ds.chi, ds.wavelength, ds.counts, ds.monitor, ds.transmission):
            w.writerow([repr(float(v)) for v in row])
    meta = dict(ds.metadata, format_version=FORMAT_VERSION)
    metadata_path(path).write_text(json.dumps(_jsonable(meta), indent=2, sort_keys=True) + "\n")
    return path


def read_dataset(path) -> ScanDataset:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if tuple(header) != ScanDataset.COLUMNS:
            raise SchemaError(
                f"{path}: line 1: header must be {','.join(ScanDataset.COLUMNS)}, "
                f"got {','.join(header)}"
            )
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise SchemaError(f"{path}: line {lineno}: expected {len(header)} fields")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise SchemaError(f"{path}: line {lineno}: {exc}") from None
    if not rows:
        raise SchemaError(f"{path}: no records")
    meta = {}
    mp = metadata_path(path)
    if mp.exists():
        meta = json.loads(mp.read_text())
    cols = np.asarray(rows, dtype=float).T
    try:
        return ScanDataset(*cols, metadata=meta)
    except ValueError as exc:
        raise SchemaError(f"{path}: {exc}") from None


REPORT_COLUMNS = (
    "label", "wavelength_m", "S", "sigma_S", "polarization", "max_witness",
    "E11", "E12", "E21", "E22", "alpha1", "alpha2", "chi1", "chi2",
    "theta0", "mode", "xi_m", "beta_t_m", "xi_over_beta_t", "regime", "verdict",
)


def report_to_dict(r: WitnessReport) -> dict:
    a = r.angles
    return _jsonable({
        "label": r.label,
        "wavelength_m": r.wavelength,
        "S": r.S,
        "sigma_S": r.sigma_S,
        "polarization": r.polarization,
        "max_witness": r.max_witness,
        "E11": r.expectations[0], "E12": r.expectations[1],
        "E21": r.expectations[2], "E22": r.expectations[3],
        "alpha1": a.alpha1, "alpha2": a.alpha2, "chi1": a.chi1, "chi2": a.chi2,
        "theta0": r.theta0,
        "mode": r.mode,
        "xi_m": r.xi,
        "beta_t_m": r.beta_t,
        "xi_over_beta_t": None if r.regime is None else r.regime.ratio,
        "regime": None if r.regime is None else r.regime.tag,
        "verdict": r.verdict,
    })


def report_from_dict(d: dict) -> WitnessReport:
    missing = [k for k in ("S", "polarization") if k not in d]
    if missing:
        raise SchemaError(f"report lacks fields {missing}")

    def num(key, default=float("nan")):
        v = d.get(key)
        return default if v is None or v == "" else float(v)

    ratio = d.get("xi_over_beta_t")
    regime = None
    if ratio not in (None, ""):
        ratio = float(ratio)
        regime = RegimeDescriptor(ratio, "separated" if ratio > 1.0 else "overlapping")
    angles = AngleSet(num("alpha1", 0.0), num("alpha2", 0.0), num("chi1", 0.0), num("chi2", 0.0))
    es = tuple(num(k) for k in ("E11", "E12", "E21", "E22"))
    return WitnessReport(
        S=float(d["S"]), expectations=es, polarization=float(d["polarization"]),
        angles=angles, sigma_S=num("sigma_S"), theta0=num("theta0", 0.0),
        mode=d.get("mode") or "scan", regime=regime,
        xi=None if d.get("xi_m") in (None, "") else float(d["xi_m"]),
        beta_t=None if d.get("beta_t_m") in (None, "") else float(d["beta_t_m"]),
        wavelength=None if d.get("wavelength_m") in (None, "") else float(d["wavelength_m"]),
        label=d.get("label") or "",
    )


def write_reports(reports, json_path, csv_path=None):
    json_path = Path(json_path)
    payload = {"format_version": FORMAT_VERSION, "reports": [report_to_dict(r) for r in reports]}
    json_path.write_text(json.dumps(payload, indent=2) + "\n")
    if csv_path is not None:
        write_rows(csv_path, REPORT_COLUMNS, [report_to_dict(r) for r in reports])


def read_reports(path):
    """Reports from a JSON report file or a report CSV."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        return [report_from_dict(r) for r in rows]
    payload = json.loads(path.read_text())
    if isinstance(payload, dict) and "reports" in payload:
        items = payload["reports"]
    elif isinstance(payload, list):
        items = payload
    else:
        items = [payload]
    return [report_from_dict(d) for d in items]


SUMMARY_COLUMNS = (
    "label", "xi_nm", "beta_t_nm", "xi_over_beta_t", "polarization", "S", "sigma_S",
    "S_over_pol", "sigma_S_over_pol", "classical_bound", "tsirelson_bound", "flag",
)


def summary_rows(reports):
    """One row per report: witness over polarization against xi / beta_t."""
    rows = []
    for r in reports:
        ratio = r.regime.ratio if r.regime is not None else (
            r.xi / r.beta_t if r.xi and r.beta_t else float("nan"))
        s_pol = r.S / r.polarization if r.polarization else float("nan")
        sig = r.sigma_S / r.polarization if r.polarization else float("nan")
        flags = []
        if not s_pol >= 2.0:
            flags.append("below_classical")
        if s_pol > TSIRELSON_BOUND + 3.0 * (sig if math.isfinite(sig) else 0.0):
            flags.append("above_tsirelson")
        rows.append({
            "label": r.label,
            "xi_nm": None if r.xi is None else r.xi * 1e9,
            "beta_t_nm": None if r.beta_t is None else r.beta_t * 1e9,
            "xi_over_beta_t": ratio,
            "polarization": r.polarization,
            "S": r.S,
            "sigma_S": r.sigma_S,
            "S_over_pol": s_pol,
            "sigma_S_over_pol": sig,
            "classical_bound": 2.0,
            "tsirelson_bound": TSIRELSON_BOUND,
            "flag": ";".join(flags),
        })
    return rows


def write_rows(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), extrasaction="ignore")
        w.writeheader()
        for row in rows:
            w.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in columns})
