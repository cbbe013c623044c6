import numpy as np
import pytest

from spinpath.beamline import BeamlineConfig, BeamSpec
from spinpath.devices import MwpPair, QuartzBlockSet

A = 1e-10
ALPHAS = np.linspace(-np.pi, np.pi, 24, endpoint=False)
CHIS = np.linspace(-np.pi, np.pi, 9)


def make_mwp_config(pol=1.0, flux=1e5, background=0.0, stray=0.0, curve=(), asymmetry=0.0,
                    wavelength=5.4 * A, beta_t=None, **beam):
    elements = (
        MwpPair(66.47e-3, 0.21, np.pi / 4, "entangler"),
        QuartzBlockSet(2, np.pi / 4, 4.18e14, tuple(curve)),
        MwpPair(66.47e-3, 0.21, np.pi / 4, "disentangler"),
    )
    spec = BeamSpec(wavelength=wavelength, incident_flux=flux, background=background,
                    polarization=pol, **beam)
    return BeamlineConfig(elements, spec, stray_phase=stray, asymmetry=asymmetry,
                          beta_t_measured=beta_t, label="test")


@pytest.fixture
def mwp_config():
    return make_mwp_config
