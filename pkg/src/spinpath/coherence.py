"""Coherence lengths, longitudinal branch separation and overlap regimes."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .devices import CONSTANTS, PhysicalConstants, RfFlipperQuartet, solve_focusing

__all__ = [
    "BeamGeometry",
    "WavepacketSpec",
    "SeparationProfile",
    "RegimeDescriptor",
    "beta_t",
    "beta_l",
    "separation_rate",
    "delta_y_profile",
    "overlap_regime",
    "longitudinal_overlap_factor",
    "write_profile_csv",
]


@dataclass(frozen=True)
class BeamGeometry:
    """Slit width ``a``, slit-to-point distance, wavelength and its spread (m)."""

    slit_width: float
    distance: float
    wavelength: float
    wavelength_spread: Optional[float] = None

    def __post_init__(self):
        for name in ("slit_width", "distance", "wavelength"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.wavelength_spread is not None and not self.wavelength_spread > 0:
            raise ValueError("wavelength_spread must be positive")

    @property
    def wavenumber(self) -> float:
        return 2.0 * np.pi / self.wavelength


@dataclass(frozen=True)
class WavepacketSpec:
    """Single-neutron packet; intrinsic widths are optional (rarely known)."""

    mean_wavevector: float
    transverse_intrinsic: Optional[float] = None
    longitudinal_intrinsic: Optional[float] = None

    def check_against(self, geom: BeamGeometry):
        if self.transverse_intrinsic is not None and self.transverse_intrinsic < beta_t(geom):
            raise ValueError("intrinsic transverse coherence cannot be below the beam value")


@dataclass(frozen=True)
class SeparationProfile:
    """Piecewise-linear longitudinal separation along the beamline.

    ``positions`` and ``delta_y`` are the breakpoints (m); ``labels`` name
    them (RF1, RF2, sample, RF3, RF4).
    """

    positions: Tuple[float, ...]
    delta_y: Tuple[float, ...]
    labels: Tuple[str, ...]
    mode: str

    def __call__(self, y):
        return np.interp(y, self.positions, self.delta_y)

    def at(self, label: str) -> float:
        return self.delta_y[self.labels.index(label)]

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.delta_y)))

    def slopes(self) -> np.ndarray:
        return np.diff(self.delta_y) / np.diff(self.positions)


@dataclass(frozen=True)
class RegimeDescriptor:
    ratio: float
    tag: str  # "separated" or "overlapping"

    @property
    def overlapping(self) -> bool:
        return self.tag == "overlapping"


def beta_t(geom: BeamGeometry) -> float:
    """Transverse beam coherence length ``l / (k a)``."""
    return geom.distance / (geom.wavenumber * geom.slit_width)


def beta_l(geom: BeamGeometry) -> float:
    """Longitudinal beam coherence length ``lambda^2 / d_lambda``."""
    if geom.wavelength_spread is None:
        raise ValueError("geometry has no wavelength spread")
    return geom.wavelength**2 / geom.wavelength_spread


def separation_rate(frequency, wavelength, constants: PhysicalConstants = CONSTANTS):
    """Growth of the branch separation per meter of flight.

    An energy split ``2 h nu`` between the branches gives a velocity
    difference ``2 h nu / (m v)`` and so ``2 h nu / (m v^2)`` per meter.
    """
    v = constants.velocity(wavelength)
    return 2.0 * constants.planck * np.asarray(frequency) / (constants.neutron_mass * v**2)


# sign with which each flipper frequency enters the running energy split
_FLIP_SIGNS = {
    # guide field reversed after RF2: the second pair mirrors the first
    "conventional": (1.0, -1.0, -1.0, 1.0),
    "overlap": (1.0, -1.0, 1.0, -1.0),
}


def delta_y_profile(
    rf: RfFlipperQuartet, wavelength: float, constants: PhysicalConstants = CONSTANTS
) -> SeparationProfile:
    """Longitudinal separation of the two branches between RF1 and RF4."""
    if wavelength <= 0:
        raise ValueError("wavelength must be positive")
    nu = np.asarray(rf.frequencies, dtype=float)
    if rf.mode == "conventional" and np.ptp(nu) != 0:
        raise ValueError("conventional mode requires equal flipper frequencies")
    if rf.mode == "overlap":
        expected = solve_focusing(nu[0], *rf.distances)
        if np.max(np.abs(nu[1:] - expected)) > 1e-3 * max(np.max(np.abs(nu)), 1e-300):
            raise ValueError("overlap-mode frequencies violate the focusing condition")

    signs = np.asarray(_FLIP_SIGNS[rf.mode])
    net = np.cumsum(signs * nu)  # net split after RF1, RF2, RF3, RF4
    pos = rf.positions()
    labels = ("RF1", "RF2", "sample", "RF3", "RF4")
    x = np.array([pos[k] for k in labels])
    # net split active on each segment RF1-RF2, RF2-S, S-RF3, RF3-RF4
    seg_net = np.array([net[0], net[1], net[1], net[2]])
    rates = separation_rate(seg_net, wavelength, constants)
    dy = np.concatenate([[0.0], np.cumsum(rates * np.diff(x))])
    return SeparationProfile(tuple(x.tolist()), tuple(dy.tolist()), labels, rf.mode)


def overlap_regime(xi: float, beta: float) -> RegimeDescriptor:
    """Classify path overlap from entanglement and transverse coherence lengths.

    Equality counts as overlapping.
    """
    if xi <= 0 or beta <= 0:
        raise ValueError("lengths must be positive")
    ratio = xi / beta
    return RegimeDescriptor(ratio, "separated" if ratio > 1.0 else "overlapping")


def longitudinal_overlap_factor(delta_y, delta_l):
    """Gaussian envelope overlap ``exp(-dy^2 / (4 Delta_l^2))``; diagnostic only."""
    if np.any(np.asarray(delta_l) <= 0):
        raise ValueError("longitudinal width must be positive")
    return np.exp(-np.asarray(delta_y) ** 2 / (4.0 * np.asarray(delta_l) ** 2))


def write_profile_csv(profile: SeparationProfile, path, samples: Optional[int] = None):
    """Write ``position_m, delta_y_m`` rows (breakpoints, or a uniform grid)."""
    if samples:
        y = np.linspace(profile.positions[0], profile.positions[-1], samples)
        dy = profile(y)
    else:
        y, dy = profile.positions, profile.delta_y
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["position_m", "delta_y_m"])
        for a, b in zip(y, dy):
            w.writerow([repr(float(a)), repr(float(b))])
