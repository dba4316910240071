#!/usr/bin/env python3
"""
Test suite for the inverse pipeline.

Tests cover:
- value(σ) notation
- Normalization of spectra to the fringe term
- Raised-cosine fitting, sign convention and failure modes
- Pointwise phase recovery and its agreement with the fit
- Reference subtraction and conversion to k2 / D
- Two-wavelength slope and the sensitivity estimate
- The full noiseless pipeline and the bootstrap
"""

import dataclasses
import math
import threading
import unittest
from unittest.mock import patch
from pathlib import Path
import sys

import numpy as np

# Add scripts directory to path
sys.path.insert(0, str(Path(__file__).parent))

from dispersion_models import FiberSegment, SpecSheet, d_param, degeneracy_omega, k2_at, k2_from_d
import extraction
from exceptions import (
    FitConvergenceError,
    GridMismatchError,
    InsufficientDataError,
    NumericalError,
    OutOfRangeError,
    UndersampledFringesError,
)
from extraction import (
    DispersionEstimate,
    ExtractionOptions,
    PhaseTrace,
    bootstrap_uncertainty,
    curvature_from_trace,
    estimate_dispersion,
    extract_phase_pointwise,
    fit_raised_cosine,
    format_uncertainty,
    min_measurable_dl,
    normalize,
    parse_uncertainty,
    run_extraction,
    slope_from_two,
    subtract_reference,
)
from run_config import load_configuration
from synthesis import (
    FrequencyGrid,
    InterferometerSetup,
    Interferogram,
    SpdcEnvelope,
    envelope_spectrum,
    synthesize,
)

SMF28 = SpecSheet(1313.0, 0.085)
PUMP = 780.2
OMEGA_DEG = degeneracy_omega(PUMP)
WINDOW = 2.0 * math.pi * 5.0
D_TRUTH = d_param(SMF28, 2.0 * PUMP)


def fringes(c0, c2, half_width, n_points):
    """Noiseless normalized interferogram n = cos(c0 + c2·δ²)."""
    grid = FrequencyGrid.symmetric(half_width, n_points)
    delta = grid.points()
    return Interferogram(delta, np.cos(c0 + c2 * delta * delta), OMEGA_DEG, grid=grid, kind="normalized")


def pipeline_inputs(fut_length=5.0, n_points=None):
    """with-FUT, without-FUT and envelope spectra from the bundled configuration."""
    config = load_configuration()
    setup = config.build_setup(PUMP)
    if fut_length != 5.0:
        setup = dataclasses.replace(setup, fut=FiberSegment(SMF28, fut_length))
    grid = config.build_grid()
    if n_points is not None:
        grid = FrequencyGrid(grid.delta_min, grid.delta_max, n_points)
    return (synthesize(setup, grid), synthesize(setup.without_fut(), grid),
            envelope_spectrum(setup.source1, grid), envelope_spectrum(setup.source2, grid))


def parametric_trace(delta_c2, sigma_c2=1e-4):
    delta = np.linspace(-WINDOW, WINDOW, 101)
    return PhaseTrace(
        detuning=delta,
        phase=delta_c2 * delta ** 2,
        sigma=np.ones_like(delta),
        mask=np.ones_like(delta, dtype=bool),
        method="parametric",
        coefficients=np.array([delta_c2, 0.0]),
        covariance=np.diag([sigma_c2 ** 2, 0.0]),
    )


class TestUncertaintyNotation(unittest.TestCase):
    """Test compact value(σ) formatting."""

    def test_published_values(self):
        """Test the reference D and slope values format as published."""
        self.assertEqual(format_uncertainty(16.69, 0.05), "16.69(5)")
        self.assertEqual(format_uncertainty(16.06, 0.11), "16.06(11)")
        self.assertEqual(format_uncertainty(0.07875, 0.0151), "0.079(15)")

    def test_parse(self):
        """Test parsing recovers value and σ."""
        value, sigma = parse_uncertainty("16.06(11)")
        self.assertAlmostEqual(value, 16.06, places=12)
        self.assertAlmostEqual(sigma, 0.11, places=12)
        with self.assertRaises(ValueError):
            parse_uncertainty("16.06 ± 0.11")

    def test_non_positive_sigma_prints_value(self):
        """Test σ = 0 falls back to the bare value."""
        self.assertEqual(format_uncertainty(16.5, 0.0), "16.5")


class TestNormalize(unittest.TestCase):
    """Test isolation of the fringe term."""

    def setUp(self):
        self.grid = FrequencyGrid.symmetric(40.0, 4001)
        self.delta = self.grid.points()
        self.env1 = envelope_spectrum(SpdcEnvelope(OMEGA_DEG, 60.0), self.grid)
        self.env2 = envelope_spectrum(SpdcEnvelope(OMEGA_DEG, 55.0, peak=0.8), self.grid)
        self.phase = 0.25 * math.pi + 0.2 * self.delta ** 2
        f1, f2 = self.env1.values, self.env2.values
        self.spectrum = f1 + f2 + 2.0 * np.sqrt(f1 * f2) * np.cos(self.phase)

    def test_exact_fringe_term(self):
        """Test n = cos Φ is recovered from a synthetic spectrum."""
        measured = Interferogram(self.delta, self.spectrum, OMEGA_DEG, grid=self.grid)
        result = normalize(measured, self.env1, self.env2)
        self.assertEqual(result.kind, "normalized")
        self.assertTrue(np.allclose(result.values[result.mask], np.cos(self.phase[result.mask]),
                                    rtol=0.0, atol=1e-12))
        self.assertEqual(result.metadata["clip_fraction"], 0.0)

    def test_explicit_scale(self):
        """Test a scaled spectrum normalizes exactly with its scale given."""
        measured = Interferogram(self.delta, 0.01 * self.spectrum, OMEGA_DEG, grid=self.grid)
        result = normalize(measured, self.env1, self.env2, scale=0.01)
        self.assertTrue(np.allclose(result.values[result.mask], np.cos(self.phase[result.mask]),
                                    rtol=0.0, atol=1e-12))

    def test_unit_area_scale_estimated(self):
        """Test the scale of a unit-area spectrum is estimated from the data."""
        area = float(np.sum(0.5 * (self.spectrum[1:] + self.spectrum[:-1]) * np.diff(self.delta)))
        measured = Interferogram(self.delta, self.spectrum / area, OMEGA_DEG, grid=self.grid,
                                 metadata={"normalization": "unit_area"})
        result = normalize(measured, self.env1, self.env2)
        self.assertAlmostEqual(result.metadata["scale"] * area, 1.0, delta=0.02)

    def test_envelope_floor_masks_tails(self):
        """Test points where an envelope is below the floor are masked out."""
        measured = Interferogram(self.delta, self.spectrum, OMEGA_DEG, grid=self.grid)
        result = normalize(measured, self.env1, self.env2, floor=0.5)
        self.assertFalse(result.mask[0])
        self.assertTrue(result.mask[2000])
        self.assertTrue(np.all(np.isinf(normalize(
            Interferogram(self.delta, self.spectrum, OMEGA_DEG, sigma=np.ones_like(self.delta)),
            self.env1, self.env2, floor=0.5).sigma[~result.mask])))

    def test_clipping_recorded(self):
        """Test values beyond ±1.2 are clipped and counted."""
        measured = Interferogram(self.delta, 3.0 * self.spectrum, OMEGA_DEG, grid=self.grid)
        result = normalize(measured, self.env1, self.env2)
        self.assertLessEqual(float(np.max(result.values)), 1.2)
        self.assertGreater(result.metadata["clip_fraction"], 0.0)

    def test_grid_mismatch_raises(self):
        """Test envelopes on another grid are rejected."""
        other = envelope_spectrum(SpdcEnvelope(OMEGA_DEG, 60.0), FrequencyGrid.symmetric(40.0, 4000))
        measured = Interferogram(self.delta, self.spectrum, OMEGA_DEG, grid=self.grid)
        with self.assertRaises(GridMismatchError):
            normalize(measured, other, self.env2)

    def test_all_masked_raises(self):
        """Test a vanishing envelope leaves nothing to normalize."""
        silent = Interferogram(self.delta, np.zeros_like(self.delta), OMEGA_DEG, grid=self.grid)
        measured = Interferogram(self.delta, self.spectrum, OMEGA_DEG, grid=self.grid)
        with self.assertRaises(InsufficientDataError):
            normalize(measured, self.env1, silent)


class TestFitRaisedCosine(unittest.TestCase):
    """Test the parametric phase fit."""

    def test_solver_failure_becomes_convergence_error(self):
        """Test a ValueError from the solver ends as FitConvergenceError after every restart."""
        with patch("extraction.least_squares", side_effect=ValueError("Residuals are not finite")):
            with self.assertRaises(FitConvergenceError) as ctx:
                fit_raised_cosine(fringes(0.1, 0.5, 6.0, 2401))
        self.assertIn("least-squares solver failed", ctx.exception.diagnostics["messages"][0])

    def test_exact_model_recovered(self):
        """Test n = cos(0.1 + 0.5δ²) on [−6, 6] gives c0 = 0.1, c2 = 0.5, c4 = 0, V = 1."""
        fit = fit_raised_cosine(fringes(0.1, 0.5, 6.0, 2401))
        self.assertAlmostEqual(fit.c0, 0.1, places=6)
        self.assertAlmostEqual(fit.c2, 0.5, places=6)
        self.assertAlmostEqual(fit.c4, 0.0, places=6)
        self.assertAlmostEqual(fit.visibility, 1.0, places=6)
        self.assertFalse(fit.weighted)
        self.assertEqual(fit.covariance.shape, (4, 4))

    def test_five_metre_fut_curvature(self):
        """Test a 5 m SMF-28 synthetic fits to c2 = −k2·L."""
        env = SpdcEnvelope(OMEGA_DEG, 2.0 * math.pi * 12.0)
        setup = InterferometerSetup(PUMP, env, env, fut=FiberSegment(SMF28, 5.0))
        grid = FrequencyGrid.symmetric(2.0 * math.pi * 8.0, 16001)
        measured = synthesize(setup, grid)
        normalized = normalize(measured, envelope_spectrum(env, grid), envelope_spectrum(env, grid))
        fit = fit_raised_cosine(normalized)
        expected = -k2_at(SMF28, OMEGA_DEG) * 0.005
        self.assertAlmostEqual(expected, 0.1068, delta=0.0005)
        self.assertAlmostEqual(fit.c2 / expected, 1.0, places=6)

    def test_reports_non_negative_curvature(self):
        """Test the mirrored phase branch is reported with c2 >= 0."""
        data = fringes(0.2, -0.5, 6.0, 2401)
        fit = fit_raised_cosine(data)
        self.assertAlmostEqual(fit.c2, 0.5, places=6)
        self.assertAlmostEqual(fit.c0, -0.2, places=6)
        mirrored = fit_raised_cosine(data, phase_sign=-1)
        self.assertAlmostEqual(mirrored.c2, -0.5, places=6)
        self.assertAlmostEqual(mirrored.c0, 0.2, places=6)

    def test_quadratic_only_fit(self):
        """Test include_c4=False pins c4 to zero."""
        fit = fit_raised_cosine(fringes(0.1, 0.5, 6.0, 2401), include_c4=False)
        self.assertEqual(fit.c4, 0.0)
        self.assertEqual(fit.sigma_c4, 0.0)
        self.assertAlmostEqual(fit.c2, 0.5, places=6)

    def test_too_little_data_raises(self):
        """Test a short window with few fringes is refused."""
        with self.assertRaises(InsufficientDataError):
            fit_raised_cosine(fringes(0.0, 0.5, 1.0, 21))

    def test_undersampled_fringes_raise(self):
        """Test fewer than four samples per fringe at the edge is refused."""
        with self.assertRaises(UndersampledFringesError) as ctx:
            fit_raised_cosine(fringes(0.3, 20.0, 10.0, 2001))
        self.assertLess(ctx.exception.samples_per_fringe, 4.0)


class TestPointwisePhase(unittest.TestCase):
    """Test arccos-and-count phase recovery."""

    def test_quadratic_phase_recovered(self):
        """Test n = cos(0.5δ²) gives Φ = 0.5δ² away from stationary points."""
        data = fringes(0.0, 0.5, 6.0, 2401)
        trace = extract_phase_pointwise(data)
        truth = 0.5 * data.detuning ** 2
        away = trace.mask & (np.abs(np.sin(truth)) > 0.05)
        self.assertLess(float(np.max(np.abs(trace.phase[away] - truth[away]))), 1e-6)
        self.assertLess(trace.asymmetry, 1e-9)

    def test_trace_is_even(self):
        """Test the recovered phase is exactly even."""
        trace = extract_phase_pointwise(fringes(0.3, 0.1, 20.0, 4001))
        self.assertTrue(np.array_equal(trace.phase, trace.phase[::-1]))

    def test_asymmetric_grid_raises(self):
        """Test a grid that is not symmetric about zero is refused."""
        delta = np.linspace(-5.0, 6.0, 1101)
        data = Interferogram(delta, np.cos(0.5 * delta ** 2), OMEGA_DEG, kind="normalized")
        with self.assertRaises(GridMismatchError):
            extract_phase_pointwise(data)

    def test_undersampled_raises(self):
        """Test undersampled fringes are refused."""
        with self.assertRaises(UndersampledFringesError):
            extract_phase_pointwise(fringes(0.3, 20.0, 10.0, 2001))


class TestOracleEquivalence(unittest.TestCase):
    """Test fit and pointwise phases agree on noiseless data."""

    def test_agreement_across_dispersion_magnitudes(self):
        """Test max |ΔΦ| < 0.01 rad for DL from 0.002 to 2 ps/nm."""
        lambda_deg = 2.0 * PUMP
        for dl in (0.002, 0.02, 0.2, 1.0, 2.0):
            c2 = -k2_from_d(dl * 1e3, lambda_deg) * 1e-3
            data = fringes(0.3, c2, 2.0 * math.pi * 8.0, 16001)
            window = (-WINDOW, WINDOW)
            fit = fit_raised_cosine(data, window)
            trace = extract_phase_pointwise(data, window)
            difference = trace.phase[trace.mask] - fit.phase(trace.detuning[trace.mask])
            self.assertLess(float(np.max(np.abs(difference))), 0.01, f"DL = {dl} ps/nm")


class TestPointwiseEdges(unittest.TestCase):
    """Test partial fringes at the ends of each branch keep the right branch."""

    def test_trailing_partial_fringe(self):
        """Test the samples past the last extremum follow c0 + c2·δ² to the window edge."""
        lambda_deg = 2.0 * PUMP
        for dl in (0.02, 0.2, 1.0, 2.0):
            c2 = -k2_from_d(dl * 1e3, lambda_deg) * 1e-3
            data = fringes(0.3, c2, 2.0 * math.pi * 8.0, 16001)
            trace = extract_phase_pointwise(data, (-WINDOW, WINDOW))
            delta = trace.detuning[trace.mask]
            error = np.abs(trace.phase[trace.mask] - (0.3 + c2 * delta * delta))
            edge = np.abs(delta) > 0.9 * WINDOW
            with self.subTest(dl=dl):
                self.assertLess(float(np.max(error[edge])), 1e-3)
                self.assertLess(float(np.max(error)), 1e-3)

    def test_edge_phase_is_not_a_multiple_of_pi(self):
        """Test a window ending 0.2π past a fringe maximum reports 8.2π there."""
        c2 = 8.2 * math.pi / WINDOW ** 2 - 0.3 / WINDOW ** 2
        data = fringes(0.3, c2, WINDOW, 4001)
        trace = extract_phase_pointwise(data)
        self.assertAlmostEqual(trace.phase[-1], 8.2 * math.pi, places=6)
        self.assertAlmostEqual(trace.phase[0], 8.2 * math.pi, places=6)

    def test_leading_partial_fringe(self):
        """Test c0 close to π keeps the ascending branch before the first minimum."""
        data = fringes(2.9, 0.05, 20.0, 4001)
        trace = extract_phase_pointwise(data)
        error = np.abs(trace.phase - (2.9 + 0.05 * trace.detuning ** 2))
        self.assertLess(float(np.max(error)), 1e-3)


class TestSubtractAndEstimate(unittest.TestCase):
    """Test reference subtraction and the conversion to D."""

    def test_opposite_curvatures_subtract_magnitudes(self):
        """Test arms curving in opposite directions give |c2_with| − |c2_without|."""
        with_fut = fit_raised_cosine(fringes(0.1, 0.5, 6.0, 2401), (-6.0, 6.0))
        without_fut = fit_raised_cosine(fringes(0.1, -0.2, 6.0, 2401), (-6.0, 6.0))
        self.assertGreater(without_fut.c2, 0.0)
        trace = subtract_reference(with_fut, without_fut)
        self.assertAlmostEqual(trace.coefficients[0], 0.3, places=5)

    def test_curvature_linear_algebra_failure(self):
        """Test a LinAlgError in the curvature regression surfaces as NumericalError."""
        delta = np.linspace(-WINDOW, WINDOW, 101)
        trace = PhaseTrace(detuning=delta, phase=0.1 * delta ** 2, sigma=np.full_like(delta, 0.01),
                           mask=np.ones_like(delta, dtype=bool))
        with patch("extraction.np.linalg.lstsq", side_effect=np.linalg.LinAlgError("SVD did not converge")):
            with self.assertRaises(NumericalError):
                curvature_from_trace(trace)

    def test_published_chain(self):
        """Test Δc2 for D = 16.69 at 1560.4 nm over 5 m is about 0.1079 ps²."""
        delta_c2 = -k2_from_d(16.69, 1560.4) * 0.005
        self.assertAlmostEqual(delta_c2, 0.1079, places=4)
        estimate = estimate_dispersion(parametric_trace(delta_c2), 5.0, 1560.4)
        self.assertAlmostEqual(estimate.d, 16.69, places=9)
        self.assertAlmostEqual(estimate.k2, k2_from_d(16.69, 1560.4), places=9)
        self.assertEqual(estimate.method, "parametric")

    def test_forward_example(self):
        """Test Δc2 = 0.1068 ps² over 5 m gives k2 ≈ −21.36 and D ≈ 16.53."""
        estimate = estimate_dispersion(parametric_trace(0.1068), 5.0, 1560.4)
        self.assertAlmostEqual(estimate.k2, -21.36, delta=0.01)
        self.assertAlmostEqual(estimate.d, 16.53, delta=0.01)

    def test_sigma_propagates(self):
        """Test σ_D follows from σ(Δc2)."""
        estimate = estimate_dispersion(parametric_trace(0.1068, sigma_c2=5e-4), 5.0, 1560.4)
        self.assertAlmostEqual(estimate.d_sigma / estimate.d, 5e-4 / 0.1068, places=9)

    def test_non_positive_length_raises(self):
        """Test L <= 0 cannot be converted."""
        for length in (0.0, -5.0):
            with self.assertRaises(OutOfRangeError):
                estimate_dispersion(parametric_trace(0.1068), length, 1560.4)

    def test_mixed_inputs_rejected(self):
        """Test a fit cannot be subtracted from a trace."""
        fit = fit_raised_cosine(fringes(0.1, 0.5, 6.0, 2401))
        with self.assertRaises(GridMismatchError):
            subtract_reference(fit, parametric_trace(0.1))

    def test_mismatched_windows_rejected(self):
        """Test fits over different windows cannot be subtracted."""
        data = fringes(0.1, 0.5, 6.0, 2401)
        first = fit_raised_cosine(data, (-6.0, 6.0))
        second = fit_raised_cosine(data, (-5.0, 5.0))
        with self.assertRaises(GridMismatchError):
            subtract_reference(first, second)

    def test_identical_fits_subtract_to_zero(self):
        """Test subtracting a fit from itself leaves no phase."""
        fit = fit_raised_cosine(fringes(0.1, 0.5, 6.0, 2401))
        trace = subtract_reference(fit, fit)
        self.assertTrue(np.all(trace.phase == 0.0))
        self.assertEqual(trace.coefficients[0], 0.0)


class TestSlopeAndSensitivity(unittest.TestCase):
    """Test the two-wavelength slope and the sensitivity figure."""

    def make_estimate(self, d, sigma, lambda_deg):
        return DispersionEstimate(lambda_deg=lambda_deg, k2=k2_from_d(d, lambda_deg), k2_sigma=0.0,
                                  d=d, d_sigma=sigma, l_fut=5.0, method="parametric")

    def test_published_slope(self):
        """Test 16.69(5) and 16.06(11) give S = 0.0788(151)."""
        slope = slope_from_two(self.make_estimate(16.69, 0.05, 1560.4),
                               self.make_estimate(16.06, 0.11, 1552.4))
        self.assertAlmostEqual(slope.slope, 0.07875, places=9)
        self.assertAlmostEqual(slope.slope_sigma, 0.0151, places=4)
        self.assertAlmostEqual(slope.midpoint, 1556.4, places=9)
        self.assertEqual(slope.formatted(), "0.079(15)")

    def test_order_does_not_matter(self):
        """Test swapping the estimates leaves the slope unchanged."""
        first = self.make_estimate(16.69, 0.05, 1560.4)
        second = self.make_estimate(16.06, 0.11, 1552.4)
        self.assertAlmostEqual(slope_from_two(first, second).slope, slope_from_two(second, first).slope, places=12)

    def test_same_wavelength_raises(self):
        """Test a slope needs two distinct wavelengths."""
        with self.assertRaises(OutOfRangeError):
            slope_from_two(self.make_estimate(16.69, 0.05, 1560.4), self.make_estimate(16.6, 0.05, 1560.4))

    def test_minimum_measurable_dl(self):
        """Test 10 THz of bandwidth resolves about 0.002 ps/nm."""
        value = min_measurable_dl(2.0 * math.pi * 10.0)
        self.assertAlmostEqual(value, 0.00196, delta=5e-5)
        self.assertLess(abs(value / 0.002 - 1.0), 0.1)
        with self.assertRaises(OutOfRangeError):
            min_measurable_dl(0.0)


class TestRunExtraction(unittest.TestCase):
    """Test the full noiseless pipeline."""

    @classmethod
    def setUpClass(cls):
        cls.inputs = pipeline_inputs()

    def test_parametric_recovers_d(self):
        """Test the parametric pipeline recovers D within 0.1 %."""
        result = run_extraction(*self.inputs, l_fut=5.0)
        self.assertLess(abs(result.estimate.d / D_TRUTH - 1.0), 1e-3)
        self.assertEqual(result.warnings, [])
        for key in ("visibility", "clip_fraction", "fringe_asymmetry_with_fut", "fringe_asymmetry_without_fut",
                    "delta_c2", "reduced_chi2_with"):
            self.assertIn(key, result.diagnostics)
        self.assertNotIn("phase_asymmetry", result.diagnostics)
        self.assertAlmostEqual(result.diagnostics["visibility"], 1.0, places=3)

    def test_pointwise_recovers_d(self):
        """Test the pointwise pipeline recovers D within 0.1 %."""
        result = run_extraction(*self.inputs, l_fut=5.0, options=ExtractionOptions(method="pointwise"))
        self.assertLess(abs(result.estimate.d / D_TRUTH - 1.0), 1e-3)
        self.assertEqual(result.estimate.method, "pointwise")
        self.assertIn("phase_asymmetry", result.diagnostics)
        self.assertNotIn("fringe_asymmetry_with_fut", result.diagnostics)
        self.assertTrue(np.array_equal(result.delta_trace.phase, result.delta_trace.phase[::-1]))

    def test_fut_phase_matches_segment_phase(self):
        """Test the recovered Φ_FUT matches the segment phase over the window."""
        result = run_extraction(*self.inputs, l_fut=5.0)
        trace = result.delta_trace
        truth = -k2_at(SMF28, OMEGA_DEG) * 0.005 * trace.detuning ** 2
        self.assertLess(float(np.max(np.abs(trace.phase - truth))), 1e-4)

    def test_length_scaling_invariance(self):
        """Test 5 m and 10 m of the same fiber give the same D."""
        longer = run_extraction(*pipeline_inputs(fut_length=10.0), l_fut=10.0)
        shorter = run_extraction(*self.inputs, l_fut=5.0)
        self.assertAlmostEqual(longer.estimate.d / shorter.estimate.d, 1.0, places=6)

    def test_identical_inputs_give_zero_with_warning(self):
        """Test with-FUT == without-FUT gives D = 0 and a warning."""
        _, without, env1, env2 = self.inputs
        with self.assertLogs('extraction', level='WARNING'):
            result = run_extraction(without, without, env1, env2, l_fut=5.0)
        self.assertEqual(result.estimate.d, 0.0)
        self.assertEqual(len(result.warnings), 1)

    def test_zero_length_gives_null_result(self):
        """Test l_fut = 0 reports the phase difference without an estimate."""
        result = run_extraction(*self.inputs, l_fut=0.0)
        self.assertIsNone(result.estimate)
        self.assertIn("delta_c2", result.diagnostics)

    def test_negative_length_raises(self):
        """Test a negative FUT length is refused."""
        with self.assertRaises(OutOfRangeError):
            run_extraction(*self.inputs, l_fut=-1.0)


class TestBootstrap(unittest.TestCase):
    """Test the resampling uncertainty."""

    def test_noiseless_spread_is_zero(self):
        """Test spectra without counts or σ give zero bootstrap spread."""
        inputs = pipeline_inputs(n_points=4001)
        estimate = bootstrap_uncertainty(*inputs, l_fut=5.0, n_resamples=50, workers=4)
        self.assertAlmostEqual(estimate.d_sigma_bootstrap, 0.0, places=12)
        self.assertEqual(estimate.n_bootstrap, 50)

    def test_failed_resamples_are_counted(self):
        """Test resamples that raise inside numpy or scipy count as failures instead of aborting."""
        inputs = pipeline_inputs(n_points=4001)
        real = extraction.run_extraction
        calls = []
        lock = threading.Lock()

        def flaky(*args, **kwargs):
            with lock:
                calls.append(None)
                call = len(calls)
            if call > 1 and call % 10 == 2:
                raise ValueError("residuals are not finite") if call % 20 == 2 else np.linalg.LinAlgError("singular")
            return real(*args, **kwargs)

        with patch("extraction.run_extraction", side_effect=flaky):
            estimate = bootstrap_uncertainty(*inputs, l_fut=5.0, n_resamples=50)
        self.assertEqual(estimate.n_bootstrap, 45)

    def test_too_few_resamples_raise(self):
        """Test fewer than 50 resamples are refused."""
        inputs = pipeline_inputs(n_points=4001)
        with self.assertRaises(OutOfRangeError):
            bootstrap_uncertainty(*inputs, l_fut=5.0, n_resamples=10)


def run_all_tests():
    """Run all extraction tests."""
    loader = unittest.TestLoader()
    suite = unittest.TestSuite()

    suite.addTests(loader.loadTestsFromTestCase(TestUncertaintyNotation))
    suite.addTests(loader.loadTestsFromTestCase(TestNormalize))
    suite.addTests(loader.loadTestsFromTestCase(TestFitRaisedCosine))
    suite.addTests(loader.loadTestsFromTestCase(TestPointwisePhase))
    suite.addTests(loader.loadTestsFromTestCase(TestOracleEquivalence))
    suite.addTests(loader.loadTestsFromTestCase(TestPointwiseEdges))
    suite.addTests(loader.loadTestsFromTestCase(TestSubtractAndEstimate))
    suite.addTests(loader.loadTestsFromTestCase(TestSlopeAndSensitivity))
    suite.addTests(loader.loadTestsFromTestCase(TestRunExtraction))
    suite.addTests(loader.loadTestsFromTestCase(TestBootstrap))

    runner = unittest.TextTestRunner(verbosity=2)
    result = runner.run(suite)

    return result.wasSuccessful()


if __name__ == '__main__':
    success = run_all_tests()
    sys.exit(0 if success else 1)
