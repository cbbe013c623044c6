"""End-to-end beamline: device composition, intensity model and synthetic counts."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple

import numpy as np

from . import quantum
from .coherence import BeamGeometry, beta_t
from .devices import (
    MwpPair,
    QuartzBlockSet,
    RfFlipperQuartet,
    mwp_entanglement_length,
    rf_entanglement_length,
)

__all__ = [
    "BeamSpec",
    "TuningErrors",
    "BeamlineConfig",
    "CountRecord",
    "ScanDataset",
    "expected_intensity",
    "intensity_from_state",
    "simulate_scan",
    "simulate_tof_scan",
    "polarization_curve",
    "transmission_correct",
    "TOF_BAND_ANGSTROM",
]

ANGSTROM = 1e-10
# wavelength range over which the RF flippers achieve a full pi flip
TOF_BAND_ANGSTROM = (3.5, 7.5)


@dataclass(frozen=True)
class BeamSpec:
    """Incident beam.

    ``polarization`` is either a constant or, via ``polarization_table``,
    interpolated in wavelength from ``(lambda_angstrom, Pol)`` pairs.
    ``incident_flux`` is the expected count per phase setting at full
    transmission and unit monitor.
    """

    wavelength: Optional[float] = None
    incident_flux: float = 1e5
    background: float = 0.0
    polarization: float = 1.0
    polarization_table: Tuple[Tuple[float, float], ...] = ()
    monitor: float = 1.0
    tof_bins: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.incident_flux < 0:
            raise ValueError("incident flux must be nonnegative")
        if self.background < 0:
            raise ValueError("background must be nonnegative")
        if not 0.0 <= self.polarization <= 1.0:
            raise ValueError("polarization must lie in [0, 1]")
        for _, p in self.polarization_table:
            if not 0.0 <= p <= 1.0:
                raise ValueError("tabulated polarization must lie in [0, 1]")
        if self.monitor <= 0:
            raise ValueError("monitor factor must be positive")

    def polarization_at(self, wavelength):
        if not self.polarization_table:
            return np.full(np.shape(wavelength), self.polarization, dtype=float)
        table = np.asarray(sorted(self.polarization_table), dtype=float)
        return np.interp(np.asarray(wavelength) / ANGSTROM, table[:, 0], table[:, 1])


@dataclass(frozen=True)
class TuningErrors:
    """Echo and RF phase errors of a time-of-flight setup.

    ``alpha0`` is in rad/angstrom, ``cubic`` (the path-phase coefficient used
    for calibration curves) in rad/angstrom^3, ``phi_rf`` in radians.
    """

    alpha0: float = 0.0
    phi_rf: float = 0.0
    cubic: float = 0.0

    def phase(self, wavelength):
        """Extra spin phase ``phi_rf - alpha0 * lambda`` (lambda in meters)."""
        return self.phi_rf - self.alpha0 * np.asarray(wavelength) / ANGSTROM


@dataclass(frozen=True)
class BeamlineConfig:
    """Ordered devices plus beam, geometry and phase-error settings."""

    elements: Tuple[object, ...]
    beam: BeamSpec = BeamSpec()
    geometry: Optional[BeamGeometry] = None
    stray_phase: float = 0.0
    tuning: Optional[TuningErrors] = None
    asymmetry: float = 0.0
    reference_wavelength: Optional[float] = None
    beta_t_measured: Optional[float] = None
    label: str = ""

    def __post_init__(self):
        n_ent = n_dis = 0
        for el in self.elements:
            role = getattr(el, "role", None)
            if role in ("entangler", "both"):
                n_ent += 1
            if role in ("disentangler", "both"):
                n_dis += 1
        if n_ent != 1 or n_dis != 1:
            raise ValueError(
                f"need exactly one entangler and one disentangler, found {n_ent} and {n_dis}"
            )

    @property
    def entangler(self):
        for el in self.elements:
            if getattr(el, "role", None) in ("entangler", "both"):
                return el
        raise LookupError("no entangler")  # unreachable after validation

    @property
    def quartz(self) -> Optional[QuartzBlockSet]:
        for el in self.elements:
            if isinstance(el, QuartzBlockSet):
                return el
        return None

    @property
    def wavelength(self) -> float:
        lam = self.beam.wavelength or self.reference_wavelength
        if lam is None and self.geometry is not None:
            lam = self.geometry.wavelength
        if lam is None:
            raise ValueError("configuration has no wavelength")
        return lam

    def entanglement_length(self, wavelength=None):
        lam = self.wavelength if wavelength is None else wavelength
        ent = self.entangler
        if isinstance(ent, MwpPair):
            return mwp_entanglement_length(ent, lam)
        if isinstance(ent, RfFlipperQuartet):
            xi_ref = rf_entanglement_length(ent)
            # the RF spin-echo length also grows as lambda^2
            return xi_ref * (np.asarray(lam) / self.wavelength) ** 2
        raise TypeError(f"unsupported entangler {type(ent).__name__}")

    def beta_t(self) -> Optional[float]:
        """Measured transverse coherence length if given, else the slit value."""
        if self.beta_t_measured is not None:
            return self.beta_t_measured
        return None if self.geometry is None else beta_t(self.geometry)

    def transmission(self, chi):
        q = self.quartz
        if q is None:
            return np.ones(np.shape(chi))
        return q.transmission(chi)

    def with_beam(self, **changes) -> "BeamlineConfig":
        return replace(self, beam=replace(self.beam, **changes))


@dataclass(frozen=True)
class CountRecord:
    alpha: float
    chi: float
    wavelength: float
    counts: float
    monitor: float = 1.0
    transmission: float = 1.0


@dataclass
class ScanDataset:
    """Column-oriented count records plus free-form metadata."""

    alpha: np.ndarray
    chi: np.ndarray
    wavelength: np.ndarray
    counts: np.ndarray
    monitor: np.ndarray
    transmission: np.ndarray
    metadata: dict = field(default_factory=dict)

    COLUMNS = ("alpha_rad", "chi_rad", "wavelength_m", "counts", "monitor", "transmission")

    def __post_init__(self):
        cols = [np.asarray(c, dtype=float) for c in
                (self.alpha, self.chi, self.wavelength, self.counts, self.monitor, self.transmission)]
        n = {c.shape for c in cols}
        if len(n) != 1 or cols[0].ndim != 1:
            raise ValueError("dataset columns must be 1-d arrays of equal length")
        (self.alpha, self.chi, self.wavelength, self.counts,
         self.monitor, self.transmission) = cols
        if np.any(self.counts < 0):
            raise ValueError("counts must be nonnegative")
        if np.any((self.transmission <= 0) | (self.transmission > 1)):
            raise ValueError("transmission must lie in (0, 1]")
        if np.any(self.monitor <= 0):
            raise ValueError("monitor must be positive")

    def __len__(self):
        return self.counts.size

    @classmethod
    def from_records(cls, records: Sequence[CountRecord], metadata=None) -> "ScanDataset":
        cols = np.array([[r.alpha, r.chi, r.wavelength, r.counts, r.monitor, r.transmission]
                         for r in records], dtype=float).reshape(-1, 6)
        return cls(*cols.T, metadata=dict(metadata or {}))

    @property
    def records(self):
        return [CountRecord(*row) for row in zip(self.alpha, self.chi, self.wavelength,
                                                 self.counts, self.monitor, self.transmission)]

    def wavelengths(self) -> np.ndarray:
        return np.unique(self.wavelength)

    def select(self, mask) -> "ScanDataset":
        mask = np.asarray(mask)
        return ScanDataset(self.alpha[mask], self.chi[mask], self.wavelength[mask],
                           self.counts[mask], self.monitor[mask], self.transmission[mask],
                           dict(self.metadata))

    def at_wavelength(self, wavelength, rtol=1e-9) -> "ScanDataset":
        sel = self.select(np.isclose(self.wavelength, wavelength, rtol=rtol, atol=0))
        if len(sel) == 0:
            raise KeyError(f"no records at wavelength {wavelength!r}")
        return sel

    def with_counts(self, counts) -> "ScanDataset":
        return ScanDataset(self.alpha, self.chi, self.wavelength, counts,
                           self.monitor, self.transmission, dict(self.metadata))


def _phase_argument(cfg: BeamlineConfig, alpha, chi, wavelength):
    arg = np.asarray(alpha) + np.asarray(chi) + cfg.stray_phase
    if cfg.tuning is not None:
        arg = arg + cfg.tuning.phase(wavelength)
    return arg


def expected_intensity(cfg: BeamlineConfig, phases, wavelength=None):
    """Mean detector counts for a phase setting.

    ``N = I0 T(|chi|) [1 + Pol cos(alpha + chi + theta0)] / 2 + BG``, with
    the contrast reduced by ``sqrt(1 - asymmetry^2)`` for unequal branches.
    ``phases`` is a :class:`~spinpath.quantum.PhasePair` or an
    ``(alpha, chi)`` tuple of arrays.
    """
    alpha, chi = (phases.alpha, phases.chi) if isinstance(phases, quantum.PhasePair) else phases
    lam = cfg.wavelength if wavelength is None else wavelength
    pol = cfg.beam.polarization_at(lam) * np.sqrt(1.0 - cfg.asymmetry**2)
    t = cfg.transmission(chi)
    arg = _phase_argument(cfg, alpha, chi, lam)
    n = 0.5 * cfg.beam.incident_flux * t * (1.0 + pol * np.cos(arg)) + cfg.beam.background
    return n if np.ndim(n) else float(n)


def intensity_from_state(cfg: BeamlineConfig, phases: quantum.PhasePair, wavelength=None) -> float:
    """Same mean counts, computed by evolving the density matrix."""
    lam = cfg.wavelength if wavelength is None else wavelength
    pol = float(cfg.beam.polarization_at(lam))
    state = quantum.bell_state(pol, cfg.asymmetry)
    offset = float(_phase_argument(cfg, 0.0, 0.0, lam))
    prob = quantum.detection_probability(state, quantum.PhasePair(phases.alpha + offset, phases.chi))
    t = float(cfg.transmission(phases.chi))
    return cfg.beam.incident_flux * t * prob + cfg.beam.background


def _poisson(means, seed, start=0):
    # one stream per record index keeps serial and parallel runs identical
    out = np.empty(len(means), dtype=float)
    for i, mu in enumerate(means):
        out[i] = np.random.default_rng([seed, start + i]).poisson(mu)
    return out


def _base_metadata(cfg: BeamlineConfig, seed, kind):
    meta = {
        "kind": kind,
        "seed": int(seed),
        "label": cfg.label,
        "instrument": type(cfg.entangler).__name__,
        "corrected": False,
        "background": cfg.beam.background,
        "incident_flux": cfg.beam.incident_flux,
        "stray_phase": cfg.stray_phase,
    }
    ent = cfg.entangler
    if isinstance(ent, RfFlipperQuartet):
        meta["mode"] = ent.mode
    try:
        meta["xi"] = float(cfg.entanglement_length())
    except Exception:  # xi is optional metadata
        meta["xi"] = None
    bt = cfg.beta_t()
    meta["beta_t"] = None if bt is None else float(bt)
    return meta


def simulate_scan(cfg: BeamlineConfig, alphas, chis, seed: int = 0, wavelength=None) -> ScanDataset:
    """Poisson counts on the full (chi, alpha) grid at one wavelength."""
    alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
    chis = np.atleast_1d(np.asarray(chis, dtype=float))
    if alphas.size == 0 or chis.size == 0:
        raise ValueError("phase grids must be nonempty")
    lam = cfg.wavelength if wavelength is None else wavelength
    cc, aa = np.meshgrid(chis, alphas, indexing="ij")
    aa, cc = aa.ravel(), cc.ravel()
    mean = np.asarray(expected_intensity(cfg, (aa, cc), lam), dtype=float)
    mon = np.full(aa.size, cfg.beam.monitor)
    counts = _poisson(mean * mon, seed)
    if cfg.beam.incident_flux == 0:
        warnings.warn("incident flux is zero; all signal counts vanish", RuntimeWarning)
    meta = _base_metadata(cfg, seed, "scan")
    return ScanDataset(aa, cc, np.full(aa.size, lam), counts, mon,
                       cfg.transmission(cc), meta)


def simulate_tof_scan(cfg: BeamlineConfig, alphas, chis, seed: int = 0,
                      wavelengths=None) -> ScanDataset:
    """Wavelength-binned scan.

    ``alphas`` and ``chis`` are the phases at the reference wavelength.
    In each bin the spin phase scales as ``lambda`` and the path phase as
    ``lambda * xi(lambda)``, i.e. ``lambda^3``.
    """
    if wavelengths is None:
        wavelengths = np.asarray(cfg.beam.tof_bins, dtype=float)
    wavelengths = np.atleast_1d(np.asarray(wavelengths, dtype=float))
    if wavelengths.size == 0:
        raise ValueError("no wavelength bins")
    alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
    chis = np.atleast_1d(np.asarray(chis, dtype=float))
    if alphas.size == 0 or chis.size == 0:
        raise ValueError("phase grids must be nonempty")
    lam_ref = cfg.wavelength
    meta = _base_metadata(cfg, seed, "tof")
    lo, hi = TOF_BAND_ANGSTROM
    band = wavelengths / ANGSTROM
    meta["warnings"] = [
        f"bin {b:g} A lies outside the {lo}-{hi} A flipper band"
        for b in band if not lo - 1e-9 <= b <= hi + 1e-9
    ]
    cc, aa = np.meshgrid(chis, alphas, indexing="ij")
    aa, cc = aa.ravel(), cc.ravel()
    cols, bins = [], []
    start = 0
    for lam in wavelengths:
        s = lam / lam_ref
        a_bin, c_bin = aa * s, cc * s**3
        mean = np.asarray(expected_intensity(cfg, (a_bin, c_bin), lam), dtype=float)
        mon = np.full(aa.size, cfg.beam.monitor)
        counts = _poisson(mean * mon, seed, start)
        start += aa.size
        cols.append((a_bin, c_bin, np.full(aa.size, lam), counts, mon, cfg.transmission(c_bin)))
        tuning = cfg.tuning or TuningErrors()
        bins.append({
            "wavelength_m": float(lam),
            "polarization": float(cfg.beam.polarization_at(lam)),
            "tuning_phase": float(tuning.phase(lam)),
            "normalized_polarization": float(_eq_normalized(tuning, 0.0, lam / ANGSTROM)),
        })
    meta["bins"] = bins
    stacked = [np.concatenate(c) for c in zip(*cols)]
    return ScanDataset(*stacked, metadata=meta)


def _eq_normalized(tuning: TuningErrors, spin_coefficient, lam_angstrom):
    num = np.cos((spin_coefficient - tuning.alpha0) * lam_angstrom
                 + tuning.cubic * lam_angstrom**3 + tuning.phi_rf)
    return num / np.cos(tuning.alpha0 * lam_angstrom - tuning.phi_rf)


def polarization_curve(cfg: BeamlineConfig, spin_coefficient: float, wavelengths,
                       path_coefficient: Optional[float] = None) -> np.ndarray:
    """Noiseless normalized polarization versus wavelength.

    Polarization is read off the intensity model as ``2 (N - BG) / (I0 T) - 1``
    with spin phase ``spin_coefficient * lambda`` and path phase
    ``path_coefficient * lambda^3`` (angstrom units), then divided by the
    value with no applied phase.
    """
    tuning = cfg.tuning or TuningErrors()
    b = tuning.cubic if path_coefficient is None else path_coefficient
    lam = np.asarray(wavelengths, dtype=float)
    la = lam / ANGSTROM
    flat = replace(cfg, elements=tuple(e for e in cfg.elements if not isinstance(e, QuartzBlockSet)))
    i0 = flat.beam.incident_flux

    def pol(alpha, chi):
        n = np.asarray(expected_intensity(flat, (alpha, chi), lam)) - flat.beam.background
        return 2.0 * n / i0 - 1.0

    return pol(spin_coefficient * la, b * la**3) / pol(0.0 * la, 0.0 * la)


def transmission_correct(ds: ScanDataset) -> ScanDataset:
    """Divide counts by quartz transmission and monitor."""
    if ds.metadata.get("corrected"):
        return ds
    if np.any(ds.transmission <= 0) or np.any(ds.monitor <= 0):
        raise ZeroDivisionError("zero transmission or monitor")
    out = ds.with_counts(ds.counts / (ds.transmission * ds.monitor))
    out.metadata["corrected"] = True
    return out
