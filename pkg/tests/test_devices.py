import time

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spinpath.devices import (
    CONSTANTS,
    MwpPair,
    QuartzBlockSet,
    RfFlipperQuartet,
    SingularAngleError,
    SpinPhaseCoil,
    UnsupportedComputation,
    mwp_entanglement_length,
    path_phase,
    rf_entanglement_length,
    solve_focusing,
    spin_phase,
    tent_phase_divergence,
)

A = 1e-10
DIST = (1.20, 2.383, 1.065, 1.18)
QUARTZ_SLD = 4.18e14
pos = st.floats(1e-3, 10.0)


def test_larmor_constant_consistent_with_gyromagnetic_ratio():
    assert CONSTANTS.larmor_constant() == pytest.approx(CONSTANTS.c_alpha, rel=1e-3)


class TestPathPhase:
    def test_45_degrees(self):
        q = QuartzBlockSet(2, np.pi / 4, QUARTZ_SLD)
        lam, xi = 5.4 * A, 600e-9
        assert path_phase(q, lam, xi) == pytest.approx(4 * lam * xi * QUARTZ_SLD, rel=1e-14)

    def test_no_blocks(self):
        assert path_phase(QuartzBlockSet(0, 0.7, QUARTZ_SLD), 5e-10, 1e-7) == 0.0

    def test_mwp_value(self):
        q = QuartzBlockSet(2, np.pi / 4, QUARTZ_SLD)
        assert path_phase(q, 5.4 * A, 600e-9) == pytest.approx(0.542, abs=1e-3)

    @given(st.integers(0, 8), st.floats(0.05, 1.5), pos, pos)
    def test_matches_closed_form(self, m, phi, lam, xi):
        q = QuartzBlockSet(m, phi, QUARTZ_SLD)
        expected = 2 * m * (lam * A) * (xi * 1e-7) * QUARTZ_SLD / np.sin(2 * phi)
        assert path_phase(q, lam * A, xi * 1e-7) == pytest.approx(expected, rel=1e-12)

    def test_singular_angle(self):
        with pytest.raises(SingularAngleError):
            path_phase(QuartzBlockSet(2, np.pi / 2, QUARTZ_SLD), 5e-10, 1e-7)

    def test_transmission_interpolates_on_magnitude(self):
        q = QuartzBlockSet(2, 0.7, QUARTZ_SLD, ((0.0, 1.0), (2.0, 0.8)))
        assert q.transmission(1.0) == pytest.approx(0.9)
        assert q.transmission(-1.0) == pytest.approx(0.9)
        assert QuartzBlockSet(2, 0.7, QUARTZ_SLD).transmission(3.0) == 1.0

    def test_bad_transmission(self):
        with pytest.raises(ValueError):
            QuartzBlockSet(2, 0.7, QUARTZ_SLD, ((0.0, 1.2),))


class TestTent:
    q = QuartzBlockSet(2, np.pi / 5, QUARTZ_SLD)
    lam, xi = 5.4 * A, 600e-9

    def test_zero_divergence(self):
        assert tent_phase_divergence(self.q, self.lam, self.xi, 0.0) == pytest.approx(
            path_phase(self.q, self.lam, self.xi), rel=1e-15)

    def test_first_order_cancels(self):
        h = 1e-5
        chi0 = path_phase(self.q, self.lam, self.xi)
        slope = (tent_phase_divergence(self.q, self.lam, self.xi, h)
                 - tent_phase_divergence(self.q, self.lam, self.xi, -h)) / (2 * h)
        assert abs(slope) < 1e-6 * chi0
        # a single inclined block has a first-order slope
        single = (path_phase(QuartzBlockSet(2, self.q.angle + h, QUARTZ_SLD), self.lam, self.xi)
                  - path_phase(QuartzBlockSet(2, self.q.angle - h, QUARTZ_SLD), self.lam, self.xi)) / (2 * h)
        assert abs(single) > 1e-2 * chi0

    def test_second_order_scaling(self):
        chi0 = path_phase(self.q, self.lam, self.xi)
        d = 1e-3
        r = ((tent_phase_divergence(self.q, self.lam, self.xi, d) - chi0)
             / (tent_phase_divergence(self.q, self.lam, self.xi, d / 2) - chi0))
        assert r == pytest.approx(4.0, rel=0.05)

    def test_odd_count_rejected(self):
        with pytest.raises(ValueError):
            tent_phase_divergence(QuartzBlockSet(3, 0.6, QUARTZ_SLD), self.lam, self.xi, 1e-3)


class TestSpinPhase:
    def test_value(self):
        assert spin_phase(SpinPhaseCoil(1e-3, 0.1), 5.4 * A) == pytest.approx(25.01, abs=0.01)

    def test_zero_field(self):
        assert spin_phase(SpinPhaseCoil(0.0, 0.1), 5.4 * A) == 0.0

    @given(pos, pos, pos)
    def test_linear_in_each_input(self, lam, b, d):
        base = spin_phase(SpinPhaseCoil(b * 1e-3, d), lam * A)
        assert spin_phase(SpinPhaseCoil(2 * b * 1e-3, d), lam * A) == pytest.approx(2 * base)
        assert spin_phase(SpinPhaseCoil(b * 1e-3, 2 * d), lam * A) == pytest.approx(2 * base)
        assert spin_phase(SpinPhaseCoil(b * 1e-3, d), 2 * lam * A) == pytest.approx(2 * base)

    def test_odd_in_field(self):
        assert spin_phase(SpinPhaseCoil(-1e-3, 0.1), 5e-10) == pytest.approx(
            -spin_phase(SpinPhaseCoil(1e-3, 0.1), 5e-10))


class TestMwp:
    def test_six_hundred_nm(self):
        mwp = MwpPair(66.5e-3, 0.21, np.pi / 4)
        assert mwp_entanglement_length(mwp, 5.4 * A) == pytest.approx(600e-9, rel=1e-3)

    def test_zero_field(self):
        assert mwp_entanglement_length(MwpPair(0.0, 0.21), 5.4 * A) == 0.0

    def test_quadratic_in_wavelength(self):
        mwp = MwpPair(0.05, 0.21)
        assert mwp_entanglement_length(mwp, 8 * A) == pytest.approx(4 * mwp_entanglement_length(mwp, 4 * A))

    def test_singular_angle(self):
        with pytest.raises(SingularAngleError):
            mwp_entanglement_length(MwpPair(0.05, 0.21, 0.0), 5e-10)


class TestFocusing:
    def test_reference_values(self):
        t = time.perf_counter()
        nu = solve_focusing(600e3, *DIST)
        assert time.perf_counter() - t < 1e-3
        assert np.allclose(nu / 1e3, [902, 575, 273], atol=1.0)

    def test_zero_input(self):
        assert np.array_equal(solve_focusing(0.0, *DIST), [0.0, 0.0, 0.0])

    @given(st.floats(0, 2e6), pos, pos, pos, pos)
    def test_sum_rule(self, nu1, a, b, c, d):
        nu2, nu3, nu4 = solve_focusing(nu1, a, b, c, d)
        assert nu4 - nu3 + nu2 - nu1 == pytest.approx(0.0, abs=1e-9 * max(nu1, 1.0) * 1e3)

    def test_nonpositive_distance(self):
        with pytest.raises(ValueError):
            solve_focusing(600e3, -1.2, 2.383, 1.065, 1.18)

    def test_quartet_accepts_rounded_frequencies(self):
        rf = RfFlipperQuartet((600e3, 902e3, 575e3, 273e3), DIST, mode="overlap")
        assert rf.role == "both"

    def test_quartet_rejects_unfocused(self):
        with pytest.raises(ValueError, match="focusing"):
            RfFlipperQuartet((600e3, 800e3, 575e3, 273e3), DIST, mode="overlap")

    def test_conventional_needs_equal_frequencies(self):
        with pytest.raises(ValueError):
            RfFlipperQuartet((500e3, 501e3, 500e3, 500e3), DIST)

    def test_positions(self):
        p = RfFlipperQuartet((5e5,) * 4, DIST).positions()
        assert p["sample"] == pytest.approx(3.583)
        assert p["RF4"] == pytest.approx(sum(DIST))


class TestRfEntanglementLength:
    @pytest.mark.parametrize("xi", [85e-9, 93e-9])
    def test_override(self, xi):
        rf = RfFlipperQuartet((5e5,) * 4, DIST, entanglement_length=xi)
        assert rf_entanglement_length(rf, 4 * A) == xi

    def test_missing_override(self):
        with pytest.raises(UnsupportedComputation):
            rf_entanglement_length(RfFlipperQuartet((5e5,) * 4, DIST), 4 * A)
