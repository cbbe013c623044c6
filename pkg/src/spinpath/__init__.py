"""Simulation and analysis of spin-path entanglement witnesses for single neutrons.

Modules
-------
quantum    two-qubit spin/path states, phase operations and the CHSH witness
devices    phase shifters, entanglers and the flipper focusing condition
coherence  coherence lengths, branch separation and overlap regime
beamline   intensity model and Poisson-noise scan simulation
analysis   cosine fits, four-point expectations, witness and its uncertainty
config     YAML experiment configs
io         dataset and report files
cli        ``spinpath`` command
"""

from .analysis import (
    CosineFit,
    CoverageError,
    FitError,
    WitnessReport,
    fit_cosine,
    fit_tof_polarization,
    four_point_expectation,
    witness_from_dataset,
    witness_uncertainty_mc,
)
from .beamline import (
    BeamlineConfig,
    BeamSpec,
    ScanDataset,
    TuningErrors,
    expected_intensity,
    simulate_scan,
    simulate_tof_scan,
    transmission_correct,
)
from .coherence import BeamGeometry, beta_l, beta_t, delta_y_profile, overlap_regime
from .config import load_config
from .devices import (
    MwpPair,
    QuartzBlockSet,
    RfFlipperQuartet,
    SpinPhaseCoil,
    path_phase,
    solve_focusing,
    spin_phase,
)
from .quantum import (
    CLASSICAL_BOUND,
    MWP_ANGLES,
    TSIRELSON_BOUND,
    AngleSet,
    PhasePair,
    SpinPathState,
    bell_state,
    witness_analytic,
)

__version__ = "0.1.0"
