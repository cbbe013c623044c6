import csv

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spinpath.coherence import (
    BeamGeometry,
    WavepacketSpec,
    beta_l,
    beta_t,
    delta_y_profile,
    longitudinal_overlap_factor,
    overlap_regime,
    separation_rate,
    write_profile_csv,
)
from spinpath.devices import CONSTANTS, RfFlipperQuartet, solve_focusing

A = 1e-10
DIST = (1.20, 2.383, 1.065, 1.18)
pos = st.floats(0.1, 10.0)


def overlap_quartet(nu1=600e3):
    return RfFlipperQuartet((nu1, *solve_focusing(nu1, *DIST)), DIST, mode="overlap")


def conventional_quartet(nu=500e3):
    return RfFlipperQuartet((nu,) * 4, DIST, mode="conventional")


class TestBeta:
    def test_two_mm_slit(self):
        g = BeamGeometry(2e-3, 3.26, 5.4 * A)
        assert beta_t(g) == pytest.approx(140e-9, rel=2e-3)

    @given(pos, pos, pos)
    def test_beta_t_homogeneity(self, a, l, lam):
        g = BeamGeometry(a * 1e-3, l, lam * A)
        assert beta_t(BeamGeometry(a * 0.5e-3, l, lam * A)) == pytest.approx(2 * beta_t(g))
        assert beta_t(BeamGeometry(a * 1e-3, 3 * l, lam * A)) == pytest.approx(3 * beta_t(g))
        assert beta_t(BeamGeometry(a * 1e-3, l, 2 * lam * A)) == pytest.approx(2 * beta_t(g))
        assert beta_t(g) > 0

    def test_wide_slit_limit(self):
        assert beta_t(BeamGeometry(1e3, 3.0, 5e-10)) < 1e-12

    def test_beta_l(self):
        assert beta_l(BeamGeometry(1e-3, 1.0, 4 * A, 0.08 * A)) == pytest.approx(20e-9)
        assert beta_l(BeamGeometry(1e-3, 1.0, 4 * A, 4 * A)) == pytest.approx(4 * A)
        assert beta_l(BeamGeometry(1e-3, 1.0, 4 * A, 1e-9 * A)) > 1.0

    @given(pos, pos)
    def test_beta_l_homogeneity(self, lam, frac):
        g = BeamGeometry(1e-3, 1.0, lam * A, frac * 0.01 * lam * A)
        g2 = BeamGeometry(1e-3, 1.0, 2 * lam * A, 2 * frac * 0.01 * lam * A)
        assert beta_l(g2) == pytest.approx(2 * beta_l(g))

    def test_beta_l_needs_spread(self):
        with pytest.raises(ValueError):
            beta_l(BeamGeometry(1e-3, 1.0, 4 * A))

    def test_invalid_geometry(self):
        with pytest.raises(ValueError):
            BeamGeometry(0.0, 1.0, 4 * A)

    def test_intrinsic_below_beam_rejected(self):
        g = BeamGeometry(2e-3, 3.26, 5.4 * A)
        with pytest.raises(ValueError):
            WavepacketSpec(1.0, transverse_intrinsic=1e-9).check_against(g)


class TestSeparation:
    def test_rate_oracle(self):
        lam = 4 * A
        v = CONSTANTS.planck / (CONSTANTS.neutron_mass * lam)
        expected = 2 * CONSTANTS.planck * 500e3 / (CONSTANTS.neutron_mass * v**2)
        assert separation_rate(500e3, lam) == pytest.approx(expected, rel=1e-14)

    def test_conventional_flat_between_rf2_and_rf3(self):
        prof = delta_y_profile(conventional_quartet(), 4 * A)
        assert prof.at("RF2") > 0
        slopes = prof.slopes()
        assert abs(slopes[1]) < 1e-15 and abs(slopes[2]) < 1e-15
        assert prof.at("sample") == prof.at("RF2") == prof.at("RF3")

    def test_conventional_closes_at_rf4(self):
        prof = delta_y_profile(conventional_quartet(), 4 * A)
        # RF3-RF4 is shorter than RF1-RF2, so the echo is only partial
        expected = separation_rate(500e3, 4 * A) * (DIST[0] - DIST[3])
        assert prof.at("RF4") == pytest.approx(expected, rel=1e-12)

    def test_overlap_zeros(self):
        prof = delta_y_profile(overlap_quartet(), 4 * A)
        assert abs(prof.at("sample")) < 1e-12 * prof.max_abs
        assert abs(prof.at("RF4")) < 1e-12 * prof.max_abs

    @given(st.floats(1e3, 2e6), st.floats(2.0, 10.0))
    def test_overlap_zeros_any_setting(self, nu1, lam):
        prof = delta_y_profile(overlap_quartet(nu1), lam * A)
        assert abs(prof.at("sample")) < 1e-12 * prof.max_abs
        assert abs(prof.at("RF4")) < 1e-12 * prof.max_abs

    def test_zero_frequency(self):
        prof = delta_y_profile(conventional_quartet(0.0), 4 * A)
        assert prof.max_abs == 0.0

    @given(st.floats(2.0, 8.0))
    def test_quadratic_in_wavelength(self, lam):
        rf = conventional_quartet()
        r = delta_y_profile(rf, 2 * lam * A).at("RF2") / delta_y_profile(rf, lam * A).at("RF2")
        assert r == pytest.approx(4.0, rel=1e-9)

    def test_linear_in_distance(self):
        prof = delta_y_profile(conventional_quartet(), 4 * A)
        per_m = prof.at("RF2") / DIST[0]
        assert per_m == pytest.approx(separation_rate(500e3, 4 * A), rel=1e-12)

    def test_interpolation(self):
        prof = delta_y_profile(conventional_quartet(), 4 * A)
        assert prof(0.6) == pytest.approx(prof.at("RF2") / 2)

    def test_csv(self, tmp_path):
        prof = delta_y_profile(overlap_quartet(), 4 * A)
        path = tmp_path / "p.csv"
        write_profile_csv(prof, path, samples=11)
        rows = list(csv.reader(open(path)))
        assert rows[0] == ["position_m", "delta_y_m"]
        assert len(rows) == 12


class TestRegime:
    def test_separated(self):
        r = overlap_regime(1600e-9, 100e-9)
        assert r.ratio == pytest.approx(16.0) and r.tag == "separated"

    def test_boundary_is_overlapping(self):
        assert overlap_regime(1e-7, 1e-7).tag == "overlapping"

    def test_overlapping(self):
        r = overlap_regime(85e-9, 350e-9)
        assert r.ratio == pytest.approx(0.243, abs=1e-3) and r.overlapping

    def test_invalid(self):
        with pytest.raises(ValueError):
            overlap_regime(0.0, 1e-7)


class TestOverlapFactor:
    def test_values(self):
        assert longitudinal_overlap_factor(0.0, 1e-8) == 1.0
        assert longitudinal_overlap_factor(2e-8, 1e-8) == pytest.approx(np.exp(-1))

    def test_monotone(self):
        dy = np.linspace(0, 1e-7, 50)
        assert np.all(np.diff(longitudinal_overlap_factor(dy, 2e-8)) < 0)
