"""Command-line entry point: ``spinpath <command> ...``.

Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import io
from .analysis import (
    CoverageError,
    FitError,
    witness_from_dataset,
    witness_uncertainty_mc,
    _key,
)
from .beamline import ANGSTROM, simulate_scan, simulate_tof_scan, transmission_correct
from .coherence import beta_l, beta_t, delta_y_profile, overlap_regime, write_profile_csv
from .config import FORMAT_VERSION, ConfigError, ExperimentConfig, load_config, validate
from .devices import RfFlipperQuartet, UnsupportedComputation, solve_focusing
from .quantum import MWP_ANGLES, AngleSet

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3


@dataclass
class RunManifest:
    command: str
    config_path: Optional[str]
    output_dir: Optional[str]
    seed: Optional[int]
    format_version: int = FORMAT_VERSION

    def write(self, out: Path):
        (out / "manifest.json").write_text(json.dumps(asdict(self), indent=2) + "\n")


class UsageError(ValueError):
    pass


def _out_dir(args) -> Optional[Path]:
    if not getattr(args, "out", None):
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _parse_angles(text: str) -> AngleSet:
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"--angles: cannot parse {text!r}") from None
    if len(vals) != 4:
        raise UsageError("--angles needs four comma-separated values a1,a2,c1,c2 in degrees")
    return AngleSet.from_degrees(*vals)


def _parse_floats(text: str, n: int, flag: str):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"{flag}: cannot parse {text!r}") from None
    if len(vals) != n:
        raise UsageError(f"{flag}: expected {n} comma-separated values")
    return vals


# simulate ---------------------------------------------------------------

def cmd_simulate(args) -> int:
    exp = load_config(args.config)
    cfg = exp.beamline
    if args.flux is not None:
        if args.flux < 0:
            raise UsageError("--flux must be nonnegative")
        cfg = cfg.with_beam(incident_flux=args.flux)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if exp.tof:
            ds = simulate_tof_scan(cfg, exp.alphas, exp.chis, seed=args.seed)
        else:
            ds = simulate_scan(cfg, exp.alphas, exp.chis, seed=args.seed)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    for msg in ds.metadata.get("warnings", []):
        print(f"warning: {msg}", file=sys.stderr)
    ds.metadata["config"] = exp.raw
    if args.flux is not None:
        ds.metadata["config"] = json.loads(json.dumps(exp.raw))
        ds.metadata["config"]["beam"]["incident_flux"] = args.flux
    out = _out_dir(args) or Path(".")
    path = io.write_dataset(ds, out / "dataset.csv")
    RunManifest("simulate", str(args.config), str(out), args.seed).write(out)
    print(f"wrote {len(ds)} records to {path}")
    return EXIT_OK


# analyze ----------------------------------------------------------------

def _embedded_config(ds) -> Optional[ExperimentConfig]:
    raw = ds.metadata.get("config")
    if not raw:
        return None
    from .config import build

    validate(raw)
    return build(raw)


def _curve_rows(ds, rep, background):
    rows = []
    sub = ds if rep.wavelength is None else ds.at_wavelength(rep.wavelength)
    for a, c, lam, n in zip(sub.alpha, sub.chi, sub.wavelength, sub.counts):
        fitted = None
        if rep.fits:
            if rep.mode == "pooled":
                f = rep.fits.get(np.nan) or next(iter(rep.fits.values()))
                fitted = float(f(a + c)) + background
            else:
                f = rep.fits.get(float(_key(c))) or next(iter(rep.fits.values()))
                fitted = float(f(a)) + background
        rows.append({"wavelength_m": lam, "chi_rad": c, "alpha_rad": a,
                     "counts": n, "fitted": fitted})
    return rows


def cmd_analyze(args) -> int:
    ds = io.read_dataset(args.dataset)
    embedded = _embedded_config(ds)
    if args.angles:
        angles = _parse_angles(args.angles)
    elif embedded is not None:
        angles = embedded.angles
    else:
        angles = MWP_ANGLES
    trials = args.trials
    if trials is None:
        trials = embedded.trials if embedded is not None else 1000
    if trials and trials < 100:
        raise UsageError("--trials must be 0 (skip) or at least 100")
    background = args.background
    if background is None:
        background = embedded.background if embedded is not None else 0.0
    if not args.no_transmission_correct:
        ds = transmission_correct(ds)
    use_fits = not args.raw_counts
    lams = ds.wavelengths()
    pooled = args.pooled or (lams.size > 1 and use_fits)

    reports, curves = [], []
    for lam in lams:
        rep = witness_from_dataset(ds, angles, use_fits=use_fits, pooled=pooled,
                                   background=background, wavelength=lam)
        if trials:
            rep.sigma_S = witness_uncertainty_mc(ds, angles, trials, seed=args.seed,
                                                 use_fits=use_fits, pooled=pooled,
                                                 background=background, wavelength=lam)
        reports.append(rep)
        curves.extend(_curve_rows(ds, rep, background))

    out = _out_dir(args) or Path(".")
    io.write_reports(reports, out / "report.json", out / "report.csv")
    io.write_rows(out / "curves.csv", ("wavelength_m", "chi_rad", "alpha_rad", "counts", "fitted"),
                  curves)
    io.write_rows(out / "summary.csv", io.SUMMARY_COLUMNS, io.summary_rows(reports))
    RunManifest("analyze", None, str(out), args.seed).write(out)
    for rep in reports:
        lam = "" if rep.wavelength is None else f"{rep.wavelength / ANGSTROM:5.2f} A  "
        print(f"{lam}S = {rep.S:.4f} +/- {rep.sigma_S:.4f}  Pol = {rep.polarization:.4f}  "
              f"2*sqrt2*Pol = {rep.max_witness:.4f}  [{rep.verdict}]")
    return EXIT_OK


# focus ------------------------------------------------------------------

def cmd_focus(args) -> int:
    dist = _parse_floats(args.distances, 4, "--distances")
    if min(dist) <= 0:
        raise UsageError("distances must be positive")
    if args.nu1 <= 0:
        raise UsageError("--nu1 must be positive")
    if args.wavelength <= 0:
        raise UsageError("--wavelength must be positive")
    nu1 = args.nu1 * 1e3
    if args.conventional:
        freqs = (nu1,) * 4
        mode = "conventional"
    else:
        freqs = (nu1, *solve_focusing(nu1, *dist))
        mode = "overlap"
    rf = RfFlipperQuartet(freqs, tuple(dist), mode=mode)
    profile = delta_y_profile(rf, args.wavelength * ANGSTROM)

    print(f"mode: {mode}")
    for i, f in enumerate(freqs, start=1):
        print(f"  nu{i} = {f / 1e3:10.3f} kHz")
    if args.conventional:
        print("  note: equal frequencies; the guide field is reversed after RF2 so the "
              "second pair undoes the separation")
    print("delta_y breakpoints:")
    for lab, y, d in zip(profile.labels, profile.positions, profile.delta_y):
        print(f"  {lab:<6} y = {y:7.3f} m   delta_y = {d * 1e9:10.3f} nm")
    ok = True
    if mode == "overlap":
        tol = 1e-12 * profile.max_abs
        ok = abs(profile.at("sample")) < tol and abs(profile.at("RF4")) < tol
        print(f"zero check at sample and RF4: {'ok' if ok else 'FAILED'}")
    out = _out_dir(args)
    if out is not None:
        io.write_rows(out / "frequencies.csv", ("flipper", "frequency_kHz"),
                      [{"flipper": f"RF{i}", "frequency_kHz": f / 1e3}
                       for i, f in enumerate(freqs, start=1)])
        write_profile_csv(profile, out / "profile.csv")
        RunManifest("focus", None, str(out), None).write(out)
    return EXIT_OK if ok else EXIT_NUMERIC


# coherence --------------------------------------------------------------

def cmd_coherence(args) -> int:
    exp = load_config(args.config)
    cfg = exp.beamline
    rows = {"label": cfg.label}
    geom = cfg.geometry
    bt = cfg.beta_t()
    if geom is not None:
        rows["beta_t_geometric_nm"] = beta_t(geom) * 1e9
        if geom.wavelength_spread is not None:
            rows["beta_l_nm"] = beta_l(geom) * 1e9
    if bt is not None:
        rows["beta_t_nm"] = bt * 1e9
    try:
        xi = cfg.entanglement_length()
    except UnsupportedComputation as exc:
        xi = None
        print(f"note: {exc}", file=sys.stderr)
    if xi is not None:
        rows["xi_nm"] = xi * 1e9
        if bt is not None:
            reg = overlap_regime(xi, bt)
            rows["xi_over_beta_t"] = reg.ratio
            rows["regime"] = reg.tag
    for k, v in rows.items():
        print(f"{k:>22}: {v:.6g}" if isinstance(v, float) else f"{k:>22}: {v}")
    out = _out_dir(args)
    ent = cfg.entangler
    if isinstance(ent, RfFlipperQuartet):
        profile = delta_y_profile(ent, cfg.wavelength)
        print(f"{'max |delta_y| nm':>22}: {profile.max_abs * 1e9:.6g}")
        if out is not None:
            write_profile_csv(profile, out / "profile.csv", samples=args.samples)
    if out is not None:
        (out / "coherence.json").write_text(json.dumps(rows, indent=2) + "\n")
        RunManifest("coherence", str(args.config), str(out), None).write(out)
    return EXIT_OK


# report -----------------------------------------------------------------

def cmd_report(args) -> int:
    reports = []
    for p in args.reports:
        reports.extend(io.read_reports(p))
    if not reports:
        raise UsageError("no reports found in the given files")
    rows = io.summary_rows(reports)
    print(f"{'label':<16}{'xi/beta_t':>10}{'Pol':>7}{'S':>8}{'sigma':>8}{'S/Pol':>8}  flag")
    for r in rows:
        print(f"{r['label'][:15]:<16}{r['xi_over_beta_t']:>10.3g}{r['polarization']:>7.3f}"
              f"{r['S']:>8.3f}{r['sigma_S']:>8.3f}{r['S_over_pol']:>8.3f}  {r['flag']}")
    out = _out_dir(args)
    if out is not None:
        io.write_rows(out / "summary.csv", io.SUMMARY_COLUMNS, rows)
        RunManifest("report", None, str(out), None).write(out)
    return EXIT_OK


# ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spinpath",
                                description="Spin-path entanglement witness simulation and analysis")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate a phase scan from a config")
    s.add_argument("--config", required=True, help="YAML config path or bundled config name")
    s.add_argument("--seed", type=int, default=0, help="RNG seed for Poisson noise")
    s.add_argument("--out", default=".", help="output directory")
    s.add_argument("--flux", type=float, default=None, help="override incident flux (counts)")
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("analyze", help="compute the witness from a dataset CSV")
    a.add_argument("dataset", help="dataset CSV with a .meta.json sidecar")
    a.add_argument("--out", default=".", help="output directory")
    a.add_argument("--angles", help="a1,a2,c1,c2 in degrees")
    a.add_argument("--trials", type=int, default=None, help="Monte Carlo trials (0 skips)")
    a.add_argument("--seed", type=int, default=0, help="Monte Carlo seed")
    a.add_argument("--raw-counts", action="store_true", help="use raw counts instead of fits")
    a.add_argument("--no-transmission-correct", action="store_true",
                   help="skip division by the quartz transmission")
    a.add_argument("--pooled", action="store_true", help="single cosine fit in alpha+chi")
    a.add_argument("--background", type=float, default=None,
                   help="known background per cell to subtract")
    a.set_defaults(func=cmd_analyze)

    f = sub.add_parser("focus", help="solve the flipper focusing condition")
    f.add_argument("--nu1", type=float, required=True, help="RF1 frequency in kHz")
    f.add_argument("--distances", required=True, help="L12,L2S,LS3,L34 in meters")
    f.add_argument("--conventional", action="store_true", help="all four flippers at nu1")
    f.add_argument("--wavelength", type=float, default=4.0,
                   help="wavelength for the separation profile, angstrom")
    f.add_argument("--out", default=None, help="directory for CSV output")
    f.set_defaults(func=cmd_focus)

    c = sub.add_parser("coherence", help="coherence lengths and overlap regime")
    c.add_argument("--config", required=True, help="YAML config path or bundled config name")
    c.add_argument("--out", default=None, help="directory for JSON/CSV output")
    c.add_argument("--samples", type=int, default=200, help="points in the profile CSV")
    c.set_defaults(func=cmd_coherence)

    r = sub.add_parser("report", help="summarize witness reports")
    r.add_argument("reports", nargs="+", help="report.json or report.csv files")
    r.add_argument("--out", default=None, help="directory for summary.csv")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FitError, UnsupportedComputation, np.linalg.LinAlgError, FloatingPointError,
            ZeroDivisionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except CoverageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ConfigError, io.SchemaError, UsageError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
