#!/usr/bin/env python3
"""
Test suite for the biphoton interferogram forward model.

Tests cover:
- Envelope shapes and their FWHM
- Grid construction and exact antisymmetry
- Spectrum positivity, symmetry and the equal-envelope reduction
- FUT phase bookkeeping and fringe chirp
- Visibility and the pump coherence check
- Resampling
"""

import math
import unittest
from pathlib import Path
import sys

import numpy as np
from scipy.signal import find_peaks

# Add scripts directory to path
sys.path.insert(0, str(Path(__file__).parent))

from dispersion_models import FiberSegment, SpecSheet, degeneracy_omega, phi_fut_detuning
from exceptions import GridMismatchError, InsufficientDataError, OutOfRangeError
from synthesis import (
    SINC2_HALF_MAX_X,
    FrequencyGrid,
    InterferometerSetup,
    Interferogram,
    SpdcEnvelope,
    coherence_check,
    envelope_detuning,
    envelope_spectrum,
    resample,
    setup_hash,
    synthesize,
    total_phase_detuning,
    visibility,
)

SMF28 = SpecSheet(1313.0, 0.085)
OMEGA_DEG = degeneracy_omega(780.2)


def make_setup(fut_length=5.0, peak2=0.9, fwhm2=2.0 * math.pi * 11.5, **kwargs):
    """Two-source SMF-28 setup at a 780.2 nm pump."""
    return InterferometerSetup(
        pump_wavelength=780.2,
        source1=SpdcEnvelope(OMEGA_DEG, 2.0 * math.pi * 12.0),
        source2=SpdcEnvelope(OMEGA_DEG, fwhm2, peak=peak2),
        internal_segments=(FiberSegment(SMF28, 0.5, "pigtails"),),
        internal_poly=(0.6,),
        fut=FiberSegment(SMF28, fut_length, "fut") if fut_length is not None else None,
        **kwargs
    )


class TestEnvelopes(unittest.TestCase):
    """Test SPDC envelope shapes."""

    def test_half_maximum_at_half_fwhm(self):
        """Test both shapes fall to half their peak at δ = ±fwhm/2."""
        for shape in ("gaussian", "sinc2"):
            env = SpdcEnvelope(OMEGA_DEG, 30.0, shape=shape, peak=2.0)
            values = envelope_detuning(env, np.array([-15.0, 0.0, 15.0]))
            self.assertAlmostEqual(values[1], 2.0, places=12)
            self.assertAlmostEqual(values[0], 1.0, places=9)
            self.assertAlmostEqual(values[2], 1.0, places=9)

    def test_sinc2_half_max_constant(self):
        """Test the sinc² half-maximum argument is about 1.3916/π."""
        self.assertAlmostEqual(SINC2_HALF_MAX_X * math.pi, 1.39156, places=4)

    def test_envelope_never_negative(self):
        """Test sinc² envelopes stay >= 0 through their nulls."""
        env = SpdcEnvelope(OMEGA_DEG, 10.0, shape="sinc2")
        values = envelope_detuning(env, np.linspace(-60.0, 60.0, 2001))
        self.assertTrue(np.all(values >= 0.0))

    def test_invalid_envelope_rejected(self):
        """Test unknown shapes and non-positive widths are rejected."""
        with self.assertRaises(OutOfRangeError):
            SpdcEnvelope(OMEGA_DEG, 10.0, shape="lorentzian")
        with self.assertRaises(OutOfRangeError):
            SpdcEnvelope(OMEGA_DEG, 0.0)

    def test_envelope_spectrum_metadata(self):
        """Test envelope_spectrum samples the grid and records its source."""
        grid = FrequencyGrid.symmetric(50.0, 101)
        spectrum = envelope_spectrum(SpdcEnvelope(OMEGA_DEG, 40.0), grid)
        self.assertEqual(spectrum.metadata["source"], "envelope")
        self.assertEqual(spectrum.grid, grid)
        self.assertEqual(spectrum.values.argmax(), 50)


class TestFrequencyGrid(unittest.TestCase):
    """Test detuning grids."""

    def test_symmetric_grid_is_exactly_antisymmetric(self):
        """Test points()[i] == −points()[n−1−i] bit for bit."""
        points = FrequencyGrid.symmetric(2.0 * math.pi * 8.0, 16001).points()
        self.assertTrue(np.array_equal(points, -points[::-1]))
        self.assertEqual(points[8000], 0.0)

    def test_endpoints_and_spacing(self):
        """Test the grid hits its bounds and reports its spacing."""
        grid = FrequencyGrid(-3.0, 5.0, 9)
        points = grid.points()
        self.assertEqual(points[0], -3.0)
        self.assertEqual(points[-1], 5.0)
        self.assertEqual(grid.spacing, 1.0)
        self.assertFalse(grid.is_symmetric)

    def test_invalid_grid_rejected(self):
        """Test degenerate grids raise."""
        with self.assertRaises(OutOfRangeError):
            FrequencyGrid(1.0, 1.0, 10)
        with self.assertRaises(OutOfRangeError):
            FrequencyGrid(-1.0, 1.0, 1)


class TestInterferogram(unittest.TestCase):
    """Test the sampled-spectrum container."""

    def test_non_increasing_axis_rejected(self):
        """Test a detuning axis must be strictly increasing."""
        with self.assertRaises(GridMismatchError):
            Interferogram(np.array([0.0, 0.0, 1.0]), np.ones(3), OMEGA_DEG)

    def test_negative_spectrum_rejected(self):
        """Test spectra must be non-negative but normalized data may not be."""
        with self.assertRaises(OutOfRangeError):
            Interferogram(np.array([0.0, 1.0]), np.array([1.0, -0.5]), OMEGA_DEG)
        normalized = Interferogram(np.array([0.0, 1.0]), np.array([1.0, -0.5]), OMEGA_DEG, kind="normalized")
        self.assertEqual(normalized.values[1], -0.5)

    def test_non_finite_rejected(self):
        """Test NaN samples are rejected."""
        with self.assertRaises(OutOfRangeError):
            Interferogram(np.array([0.0, 1.0]), np.array([1.0, np.nan]), OMEGA_DEG)

    def test_wavelength_axis(self):
        """Test δ = 0 maps to the degenerate wavelength."""
        spectrum = Interferogram(np.array([-1.0, 0.0, 1.0]), np.ones(3), OMEGA_DEG)
        self.assertAlmostEqual(spectrum.wavelength[1], 1560.4, places=9)
        self.assertGreater(spectrum.wavelength[0], spectrum.wavelength[2])
        self.assertTrue(spectrum.is_symmetric())


class TestSynthesize(unittest.TestCase):
    """Test the coincidence spectrum S(δ)."""

    def setUp(self):
        self.grid = FrequencyGrid.symmetric(2.0 * math.pi * 8.0, 16001)

    def test_non_negative_and_symmetric(self):
        """Test S >= 0 and S(δ) == S(−δ) exactly on a symmetric grid."""
        spectrum = synthesize(make_setup(), self.grid)
        self.assertTrue(np.all(spectrum.values >= 0.0))
        self.assertTrue(np.array_equal(spectrum.values, spectrum.values[::-1]))

    def test_equal_envelopes_reduce_to_raised_cosine(self):
        """Test F1 == F2 gives S = 2F·(1 + cos Φ)."""
        setup = make_setup(peak2=1.0, fwhm2=2.0 * math.pi * 12.0)
        spectrum = synthesize(setup, self.grid)
        delta = self.grid.points()
        f = envelope_detuning(setup.source1, delta)
        expected = 2.0 * f * (1.0 + np.cos(total_phase_detuning(setup, delta)))
        self.assertTrue(np.allclose(spectrum.values, expected, rtol=1e-12, atol=1e-15))

    def test_removing_fut_removes_only_fut_phase(self):
        """Test Φ_with − Φ_without equals the FUT phase."""
        setup = make_setup()
        delta = self.grid.points()
        difference = total_phase_detuning(setup, delta) - total_phase_detuning(setup.without_fut(), delta)
        expected = phi_fut_detuning(setup.fut, delta, OMEGA_DEG)
        self.assertTrue(np.allclose(difference, expected, rtol=0.0, atol=1e-10))

    def test_fringes_chirp_outward(self):
        """Test fringe spacing shrinks monotonically away from degeneracy."""
        spectrum = synthesize(make_setup(), self.grid)
        positive = spectrum.detuning > 0
        minima, _ = find_peaks(-spectrum.values[positive])
        positions = spectrum.detuning[positive][minima]
        spacing = np.diff(positions)
        self.assertGreater(len(spacing), 30)
        # outer fringes are only a few grid steps apart, so compare the resolved ones
        self.assertTrue(np.all(np.diff(spacing[:15]) < 0))
        self.assertLess(spacing[-1], spacing[0] / 3.0)

    def test_metadata(self):
        """Test provenance metadata on synthesized spectra."""
        setup = make_setup()
        spectrum = synthesize(setup, self.grid)
        self.assertTrue(spectrum.metadata["with_fut"])
        self.assertEqual(spectrum.metadata["fut_length_m"], 5.0)
        self.assertEqual(spectrum.metadata["setup_hash"], setup_hash(setup))
        self.assertTrue(spectrum.metadata["coherence_passed"])
        without = synthesize(setup.without_fut(), self.grid)
        self.assertFalse(without.metadata["with_fut"])
        self.assertNotEqual(without.metadata["setup_hash"], spectrum.metadata["setup_hash"])

    def test_envelope_mismatch_rejected(self):
        """Test sources centred away from ω_p/2 are rejected."""
        with self.assertRaises(OutOfRangeError):
            InterferometerSetup(
                pump_wavelength=780.2,
                source1=SpdcEnvelope(OMEGA_DEG + 1.0, 50.0),
                source2=SpdcEnvelope(OMEGA_DEG, 50.0),
            )

    def test_short_coherence_warns_but_synthesizes(self):
        """Test a failing coherence check logs a warning and is recorded."""
        setup = make_setup(pump_linewidth_mhz=1000.0, path_mismatch_m=0.03)
        with self.assertLogs('synthesis', level='WARNING') as logs:
            spectrum = synthesize(setup, self.grid)
        self.assertIn("coherence", logs.output[0])
        self.assertFalse(spectrum.metadata["coherence_passed"])


class TestVisibility(unittest.TestCase):
    """Test local fringe visibility."""

    def test_ratio_quarter_gives_point_eight(self):
        """Test F2/F1 = 0.25 gives V = 0.8."""
        env1 = SpdcEnvelope(OMEGA_DEG, 50.0)
        env2 = SpdcEnvelope(OMEGA_DEG, 50.0, peak=0.25)
        self.assertAlmostEqual(visibility(env1, env2, OMEGA_DEG), 0.8, places=12)

    def test_ratio_for_three_quarters(self):
        """Test F2/F1 ≈ 0.204 gives V ≈ 0.75."""
        env1 = SpdcEnvelope(OMEGA_DEG, 50.0)
        env2 = SpdcEnvelope(OMEGA_DEG, 50.0, peak=0.2038)
        self.assertAlmostEqual(visibility(env1, env2, OMEGA_DEG), 0.75, places=3)

    def test_equal_envelopes_give_unit_visibility(self):
        """Test identical sources give V = 1 everywhere."""
        env = SpdcEnvelope(OMEGA_DEG, 50.0)
        omega = OMEGA_DEG + np.linspace(-20.0, 20.0, 41)
        self.assertTrue(np.allclose(visibility(env, env, omega), 1.0, rtol=0.0, atol=1e-15))

    def test_both_zero_raises(self):
        """Test visibility is undefined where both envelopes vanish."""
        env = SpdcEnvelope(OMEGA_DEG, 50.0, peak=0.0)
        with self.assertRaises(InsufficientDataError):
            visibility(env, env, OMEGA_DEG)


class TestCoherenceCheck(unittest.TestCase):
    """Test the pump coherence-length check."""

    def test_narrow_linewidth_coherence_length(self):
        """Test a 100 kHz pump gives roughly 650 m of coherence."""
        check = coherence_check(0.1, 0.03)
        self.assertAlmostEqual(check.coherence_length_m, 650.0, delta=5.0)
        self.assertTrue(check.passed)

    def test_broad_linewidth_fails(self):
        """Test a 1 GHz pump cannot cover a 3 cm mismatch with margin."""
        check = coherence_check(1000.0, 0.03)
        self.assertFalse(check.passed)
        self.assertLess(check.ratio, 100.0)

    def test_zero_mismatch_passes(self):
        """Test a perfectly balanced interferometer always passes."""
        check = coherence_check(1000.0, 0.0)
        self.assertTrue(check.passed)
        self.assertIsNone(check.ratio)

    def test_invalid_linewidth(self):
        """Test a non-positive linewidth raises."""
        with self.assertRaises(OutOfRangeError):
            coherence_check(0.0, 0.03)


class TestResample(unittest.TestCase):
    """Test linear resampling."""

    def test_linear_data_interpolated_exactly(self):
        """Test a linear function survives resampling."""
        delta = np.linspace(-10.0, 10.0, 201)
        source = Interferogram(delta, 3.0 + 0.5 * delta, OMEGA_DEG, kind="normalized")
        target = FrequencyGrid.symmetric(9.0, 37)
        result = resample(source, target)
        self.assertTrue(np.allclose(result.values, 3.0 + 0.5 * target.points(), rtol=0.0, atol=1e-12))
        self.assertEqual(result.grid, target)
        self.assertTrue(result.metadata["resampled"])

    def test_out_of_span_raises(self):
        """Test extrapolation is refused."""
        source = Interferogram(np.linspace(-1.0, 1.0, 11), np.ones(11), OMEGA_DEG)
        with self.assertRaises(OutOfRangeError):
            resample(source, FrequencyGrid.symmetric(2.0, 11))


def run_all_tests():
    """Run all synthesis tests."""
    loader = unittest.TestLoader()
    suite = unittest.TestSuite()

    suite.addTests(loader.loadTestsFromTestCase(TestEnvelopes))
    suite.addTests(loader.loadTestsFromTestCase(TestFrequencyGrid))
    suite.addTests(loader.loadTestsFromTestCase(TestInterferogram))
    suite.addTests(loader.loadTestsFromTestCase(TestSynthesize))
    suite.addTests(loader.loadTestsFromTestCase(TestVisibility))
    suite.addTests(loader.loadTestsFromTestCase(TestCoherenceCheck))
    suite.addTests(loader.loadTestsFromTestCase(TestResample))

    runner = unittest.TextTestRunner(verbosity=2)
    result = runner.run(suite)

    return result.wasSuccessful()


if __name__ == '__main__':
    success = run_all_tests()
    sys.exit(0 if success else 1)
