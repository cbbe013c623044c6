"""Beamline device parameterizations and their closed-form phase formulas.

All quantities are SI (meters, tesla, hertz, radians) unless the name says
otherwise. Quartz scattering length density is always supplied by the
caller.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

__all__ = [
    "PhysicalConstants",
    "CONSTANTS",
    "QuartzBlockSet",
    "SpinPhaseCoil",
    "MwpPair",
    "RfFlipperQuartet",
    "Slit",
    "Polarizer",
    "SingularAngleError",
    "UnsupportedComputation",
    "path_phase",
    "tent_phase_divergence",
    "spin_phase",
    "mwp_entanglement_length",
    "solve_focusing",
    "rf_entanglement_length",
]


class SingularAngleError(ValueError):
    """A device angle makes a closed-form expression diverge."""


class UnsupportedComputation(RuntimeError):
    """The requested quantity has no model and must be supplied as calibration."""


@dataclass(frozen=True)
class PhysicalConstants:
    c_alpha: float = 4.632e14  # T^-1 m^-2, spin-phase (Larmor) constant
    c_xi: float = 1.474e14  # T^-1 m^-2, Wollaston-prism entanglement constant
    planck: float = 6.62607015e-34  # J s
    neutron_mass: float = 1.67492749804e-27  # kg
    gyromagnetic_ratio: float = 1.83247171e8  # rad s^-1 T^-1 (magnitude)

    def larmor_constant(self) -> float:
        """``gamma_n m_n / h``; should reproduce ``c_alpha``."""
        return self.gyromagnetic_ratio * self.neutron_mass / self.planck

    def velocity(self, wavelength):
        """Neutron speed (m/s) for a de Broglie wavelength in meters."""
        return self.planck / (self.neutron_mass * np.asarray(wavelength, dtype=float))


CONSTANTS = PhysicalConstants()


@dataclass(frozen=True)
class QuartzBlockSet:
    """Path-phase shifter made of ``count`` inclined quartz blocks.

    ``transmission_curve`` is a table of ``(|chi|, T)`` pairs used for
    piecewise-linear interpolation; an empty table means ``T = 1``.
    """

    count: int
    angle: float
    sld: float
    transmission_curve: Tuple[Tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.count < 0:
            raise ValueError("block count must be nonnegative")
        for _, t in self.transmission_curve:
            if not 0.0 <= t <= 1.0:
                raise ValueError(f"transmission {t} outside [0, 1]")

    def transmission(self, chi):
        """Transmission for path phase(s) ``chi``; depends on ``|chi|`` only."""
        chi = np.abs(np.asarray(chi, dtype=float))
        if not self.transmission_curve:
            return np.ones_like(chi)
        table = np.asarray(sorted(self.transmission_curve), dtype=float)
        return np.interp(chi, table[:, 0], table[:, 1])


@dataclass(frozen=True)
class SpinPhaseCoil:
    field: float
    path_length: float

    def __post_init__(self):
        if self.path_length <= 0:
            raise ValueError("coil path length must be positive")


@dataclass(frozen=True)
class MwpPair:
    """A pair of magnetic Wollaston prisms; ``role`` is entangler or disentangler."""

    field: float
    separation: float
    film_angle: float = np.pi / 4
    role: str = "entangler"

    def __post_init__(self):
        if self.separation <= 0:
            raise ValueError("MWP separation must be positive")
        if not 0.0 <= self.film_angle < np.pi / 2:
            raise ValueError("film angle must lie in [0, pi/2)")
        if self.role not in ("entangler", "disentangler"):
            raise ValueError(f"unknown MWP role {self.role!r}")


@dataclass(frozen=True)
class RfFlipperQuartet:
    """Four RF flippers: RF1/RF2 entangle, RF3/RF4 disentangle.

    ``distances`` are ``(L12, L2S, LS3, L34)``; ``angles`` are the flipper
    inclinations in radians. In overlap mode the frequencies have to satisfy
    the focusing condition (see :func:`solve_focusing`).
    """

    frequencies: Tuple[float, float, float, float]
    distances: Tuple[float, float, float, float]
    angles: Tuple[float, float, float, float] = (np.deg2rad(70.0),) * 4
    mode: str = "conventional"
    entanglement_length: Optional[float] = None

    def __post_init__(self):
        if self.mode not in ("conventional", "overlap"):
            raise ValueError(f"unknown RF mode {self.mode!r}")
        if len(self.frequencies) != 4 or len(self.distances) != 4:
            raise ValueError("RF quartet needs four frequencies and four distances")
        if min(self.distances) <= 0:
            raise ValueError("RF flipper distances must be positive")
        nu = np.asarray(self.frequencies, dtype=float)
        if self.mode == "conventional":
            if not np.allclose(nu, nu[0], rtol=0, atol=0):
                raise ValueError("conventional mode requires equal flipper frequencies")
        else:
            expected = solve_focusing(nu[0], *self.distances)
            # 0.1% of the largest frequency; tabulated settings are rounded to 1 kHz
            if np.max(np.abs(nu[1:] - expected)) > 1e-3 * np.max(np.abs(nu)):
                raise ValueError(
                    "overlap-mode frequencies violate the focusing condition: "
                    f"expected {np.round(expected, 1)} Hz, got {nu[1:]}"
                )

    @property
    def role(self) -> str:
        return "both"

    def positions(self) -> dict:
        """Positions (m) of RF1, RF2, sample, RF3, RF4 measured from RF1."""
        l12, l2s, ls3, l34 = self.distances
        return {
            "RF1": 0.0,
            "RF2": l12,
            "sample": l12 + l2s,
            "RF3": l12 + l2s + ls3,
            "RF4": l12 + l2s + ls3 + l34,
        }


@dataclass(frozen=True)
class Slit:
    width: float
    position: float = 0.0

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("slit width must be positive")


@dataclass(frozen=True)
class Polarizer:
    kind: str = "polarizer"  # or "analyzer"
    efficiency: float = 1.0


def path_phase(blocks: QuartzBlockSet, wavelength, xi):
    """Relative path phase ``2 m lambda xi rho / sin(2 phi)``."""
    s = np.sin(2.0 * blocks.angle)
    if abs(s) < 1e-15:
        raise SingularAngleError("block angle of 0 or pi/2 gives a singular path phase")
    return 2.0 * blocks.count * np.asarray(wavelength) * np.asarray(xi) * blocks.sld / s


def tent_phase_divergence(blocks: QuartzBlockSet, wavelength, xi, divergence):
    """Path phase seen by a ray tilted by ``divergence`` in a tent arrangement.

    Half of the blocks sit at ``+phi`` and half at ``-phi``, so the ray meets
    angles ``phi + d`` and ``phi - d`` equally often and the linear term in
    ``d`` cancels.
    """
    if blocks.count % 2:
        raise ValueError("tent configuration needs an even number of blocks")
    if abs(divergence) >= abs(blocks.angle):
        raise ValueError("divergence must be smaller than the block angle")
    up = QuartzBlockSet(blocks.count, blocks.angle + divergence, blocks.sld)
    down = QuartzBlockSet(blocks.count, blocks.angle - divergence, blocks.sld)
    return 0.5 * (path_phase(up, wavelength, xi) + path_phase(down, wavelength, xi))


def spin_phase(coil: SpinPhaseCoil, wavelength, constants: PhysicalConstants = CONSTANTS):
    """Larmor spin phase ``C_alpha lambda B d``."""
    return constants.c_alpha * np.asarray(wavelength) * coil.field * coil.path_length


def mwp_entanglement_length(mwp: MwpPair, wavelength, constants: PhysicalConstants = CONSTANTS):
    """Entanglement length ``C_xi lambda^2 B L cot(theta_f)`` of a Wollaston pair."""
    if abs(np.sin(mwp.film_angle)) < 1e-15:
        raise SingularAngleError("film angle of 0 gives an infinite entanglement length")
    lam = np.asarray(wavelength)
    return constants.c_xi * lam**2 * mwp.field * mwp.separation / np.tan(mwp.film_angle)


def solve_focusing(nu1: float, l12: float, l2s: float, ls3: float, l34: float) -> np.ndarray:
    """Overlap-mode frequencies ``(nu2, nu3, nu4)`` from ``nu1`` and the geometry.

    ``nu2`` zeroes the longitudinal separation at the sample, ``nu3`` zeroes
    it again at RF4, and ``nu4`` restores the net frequency sum.
    """
    if min(l12, l2s, ls3, l34) <= 0:
        raise ValueError("all flipper distances must be positive")
    if nu1 < 0:
        raise ValueError("nu1 must be nonnegative")
    nu2 = (l12 + l2s) / l2s * nu1
    nu3 = (ls3 + l34) / l34 * (nu2 - nu1)
    nu4 = nu3 - nu2 + nu1
    return np.array([nu2, nu3, nu4])


def rf_entanglement_length(rf: RfFlipperQuartet, wavelength=None):
    """Calibrated entanglement length of an RF quartet.

    There is no closed form for the RF transverse splitting in terms of the
    flipper settings, so the value must come from calibration.
    """
    if rf.entanglement_length is None:
        raise UnsupportedComputation(
            "RF entanglement length has no closed form; "
            "set entanglement_length from a path-phase calibration"
        )
    return rf.entanglement_length
