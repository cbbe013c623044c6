"""Two-qubit spin (x) path states, Bloch-plane observables and the CHSH witness.

Basis ordering is spin-major::

    |up, path1>, |up, path2>, |down, path1>, |down, path2>

Everything here works on dense 4x4 complex matrices. The module is the
exact reference that the beamline intensity model and the count-based
analysis are checked against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SpinPathState",
    "PhasePair",
    "BlochObservable",
    "AngleSet",
    "PAULI_X",
    "PAULI_Y",
    "IDENTITY2",
    "bell_state",
    "product_state",
    "apply_phases",
    "expectation",
    "correlation",
    "witness_analytic",
    "project_plus_x_both",
    "detection_probability",
    "optimal_angles",
    "MWP_ANGLES",
    "TSIRELSON_BOUND",
    "CLASSICAL_BOUND",
]

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
IDENTITY2 = np.eye(2, dtype=complex)

TSIRELSON_BOUND = 2.0 * np.sqrt(2.0)
CLASSICAL_BOUND = 2.0

_HERMITIAN_TOL = 1e-12
_TRACE_TOL = 1e-12
_EIG_TOL = 1e-12


class SpinPathState:
    """Density operator on spin (x) path.

    Parameters
    ----------
    density : array_like, shape (4, 4)
        Hermitian, unit-trace, positive semidefinite matrix.
    validate : bool
        Check the physical invariants on construction.
    """

    __slots__ = ("_rho",)

    def __init__(self, density, validate=True):
        rho = np.array(density, dtype=complex)
        if rho.shape != (4, 4):
            raise ValueError(f"density must be 4x4, got {rho.shape}")
        if validate:
            _check_density(rho)
        rho.setflags(write=False)
        self._rho = rho

    @property
    def density(self) -> np.ndarray:
        return self._rho

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self._rho)))

    @property
    def purity(self) -> float:
        return float(np.real(np.trace(self._rho @ self._rho)))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self._rho)

    def spin_marginal(self) -> np.ndarray:
        return np.einsum("ajbj->ab", self._rho.reshape(2, 2, 2, 2))

    def path_marginal(self) -> np.ndarray:
        return np.einsum("iaib->ab", self._rho.reshape(2, 2, 2, 2))

    def mix(self, other: "SpinPathState", weight: float) -> "SpinPathState":
        """Return ``weight * self + (1 - weight) * other``."""
        return SpinPathState(weight * self._rho + (1.0 - weight) * other.density)

    def __repr__(self):
        return f"SpinPathState(trace={self.trace:.3g}, purity={self.purity:.6g})"


def _check_density(rho):
    if np.max(np.abs(rho - rho.conj().T)) > _HERMITIAN_TOL:
        raise ValueError("density matrix is not Hermitian")
    tr = np.trace(rho)
    if abs(tr - 1.0) > _TRACE_TOL:
        raise ValueError(f"density matrix trace is {tr.real:.15g}, expected 1")
    lo = np.linalg.eigvalsh(rho).min()
    if lo < -_EIG_TOL:
        raise ValueError(f"density matrix has negative eigenvalue {lo:.3g}")


@dataclass(frozen=True)
class PhasePair:
    """Spin phase ``alpha`` and path phase ``chi`` in radians."""

    alpha: float
    chi: float

    def __post_init__(self):
        if not (np.isfinite(self.alpha) and np.isfinite(self.chi)):
            raise ValueError("phases must be finite")

    @property
    def total(self) -> float:
        return self.alpha + self.chi

    def canonical(self) -> "PhasePair":
        """Both phases wrapped into (-pi, pi]."""
        return PhasePair(_wrap(self.alpha), _wrap(self.chi))

    def __neg__(self):
        return PhasePair(-self.alpha, -self.chi)


def _wrap(x):
    y = -((-x + np.pi) % (2 * np.pi) - np.pi)
    return float(y)


@dataclass(frozen=True)
class BlochObservable:
    """``cos(angle) sigma_x + sin(angle) sigma_y`` acting on one subsystem."""

    subsystem: str
    angle: float

    def __post_init__(self):
        if self.subsystem not in ("spin", "path"):
            raise ValueError(f"subsystem must be 'spin' or 'path', got {self.subsystem!r}")

    def matrix(self) -> np.ndarray:
        return np.cos(self.angle) * PAULI_X + np.sin(self.angle) * PAULI_Y


@dataclass(frozen=True)
class AngleSet:
    """Two spin angles and two path angles for the CHSH witness (radians)."""

    alpha1: float
    alpha2: float
    chi1: float
    chi2: float

    def __post_init__(self):
        if not np.all(np.isfinite([self.alpha1, self.alpha2, self.chi1, self.chi2])):
            raise ValueError("angles must be finite")

    def pairs(self):
        """The four (alpha, chi) settings with their sign in the witness."""
        return (
            (self.alpha1, self.chi1, 1.0),
            (self.alpha1, self.chi2, 1.0),
            (self.alpha2, self.chi1, 1.0),
            (self.alpha2, self.chi2, -1.0),
        )

    def is_optimal(self, tol=1e-9) -> bool:
        """True when the settings give the Tsirelson value for the Bell state."""
        ok_sum = abs(_wrap(self.alpha1 + self.chi1 + np.pi / 4)) < tol
        ok_a = abs(_wrap(self.alpha2 - self.alpha1 - np.pi / 2)) < tol
        ok_c = abs(_wrap(self.chi2 - self.chi1 - np.pi / 2)) < tol
        return ok_sum and ok_a and ok_c

    @classmethod
    def from_degrees(cls, alpha1, alpha2, chi1, chi2):
        return cls(*np.deg2rad([alpha1, alpha2, chi1, chi2]))


# Settings used in the Wollaston-prism measurement protocol.
MWP_ANGLES = AngleSet(-3 * np.pi / 4, -np.pi / 4, -3 * np.pi / 2, -np.pi)


def optimal_angles(alpha1: float = -3 * np.pi / 4) -> AngleSet:
    """Maximal-violation settings for a given first spin angle."""
    chi1 = -np.pi / 4 - alpha1
    return AngleSet(alpha1, alpha1 + np.pi / 2, chi1, chi1 + np.pi / 2)


def bell_state(p: float = 1.0, asymmetry: float = 0.0) -> SpinPathState:
    """Entangled state after the entangler, with spin depolarization.

    The pure part is ``(|up,path1> + |down,path2>)/sqrt(2)``; the spin is
    depolarized by mixing in ``(1 - p)`` of the maximally mixed spin state
    tensored with the path marginal. ``asymmetry`` tilts the branch weights
    to ``(1 +/- asymmetry)/2``.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"depolarization p must lie in [0, 1], got {p}")
    if not -1.0 < asymmetry < 1.0:
        raise ValueError(f"asymmetry must lie in (-1, 1), got {asymmetry}")
    psi = np.zeros(4, dtype=complex)
    psi[0] = np.sqrt((1.0 + asymmetry) / 2.0)
    psi[3] = np.sqrt((1.0 - asymmetry) / 2.0)
    pure = np.outer(psi, psi.conj())
    path = np.einsum("iaib->ab", pure.reshape(2, 2, 2, 2))
    mixed = np.kron(IDENTITY2 / 2.0, path)
    return SpinPathState(p * pure + (1.0 - p) * mixed)


def product_state(spin: np.ndarray, path: np.ndarray) -> SpinPathState:
    """Tensor product of single-qubit density matrices."""
    return SpinPathState(np.kron(np.asarray(spin, complex), np.asarray(path, complex)))


def _phase_unitary(phases: PhasePair) -> np.ndarray:
    return np.diag(
        [1.0, np.exp(1j * phases.chi), np.exp(1j * phases.alpha), np.exp(1j * phases.total)]
    )


def apply_phases(state: SpinPathState, phases: PhasePair) -> SpinPathState:
    """Give the down-spin branch ``e^{i alpha}`` and the path-2 branch ``e^{i chi}``."""
    u = _phase_unitary(phases)
    rho = u @ state.density @ u.conj().T
    # exact Hermitian symmetrization removes rounding asymmetry
    return SpinPathState(0.5 * (rho + rho.conj().T), validate=False)


def expectation(state: SpinPathState, spin_obs: BlochObservable, path_obs: BlochObservable) -> float:
    """``Tr(rho sigma^s_u (x) sigma^p_v)``."""
    if spin_obs.subsystem == path_obs.subsystem:
        raise ValueError("observables must act on distinct subsystems")
    if spin_obs.subsystem == "path":
        spin_obs, path_obs = path_obs, spin_obs
    op = np.kron(spin_obs.matrix(), path_obs.matrix())
    return float(np.real(np.trace(state.density @ op)))


def correlation(state: SpinPathState, alpha: float, chi: float) -> float:
    """Shorthand for :func:`expectation` at spin angle ``alpha``, path angle ``chi``."""
    return expectation(state, BlochObservable("spin", alpha), BlochObservable("path", chi))


def witness_analytic(state: SpinPathState, angles: AngleSet) -> float:
    """CHSH combination E11 + E12 + E21 - E22 evaluated exactly."""
    return float(sum(sign * correlation(state, a, c) for a, c, sign in angles.pairs()))


def _projector(angle):
    v = np.array([1.0, np.exp(1j * angle)]) / np.sqrt(2.0)
    return np.outer(v, v.conj())


def project_plus_x_both(state: SpinPathState, phases_of_projectors: PhasePair) -> float:
    """``Tr(rho P^s(alpha) (x) P^p(chi))`` with rank-one Bloch-plane projectors."""
    op = np.kron(_projector(phases_of_projectors.alpha), _projector(phases_of_projectors.chi))
    return float(np.real(np.trace(state.density @ op)))


def detection_probability(state: SpinPathState, phases: PhasePair) -> float:
    """Probability that the analyzer passes the neutron after phase shifts.

    Evolves the state with ``phases`` and projects both subsystems on +x;
    for the Bell state this is ``(1 + cos(alpha + chi)) / 2``.
    """
    evolved = apply_phases(state, phases)
    return 2.0 * project_plus_x_both(evolved, PhasePair(0.0, 0.0))
