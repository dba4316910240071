#!/usr/bin/env python3
"""
Forward model of the biphoton spectral interferogram.

Two SPDC sources pumped by the same laser emit into a shared signal/idler
mode. With the joint spectral amplitudes of the sources taken as real
envelopes F1, F2 and the relative phase Φ(δ) accumulated between them,
the coincidence spectrum at detuning δ = ω − ω_deg is

    S(δ) = F1(δ) + F2(δ) + 2·sqrt(F1(δ)·F2(δ))·cos Φ(δ)

Φ collects the internal fiber segments, an even polynomial for pigtails
and other fixed contributions, and optionally the fiber under test (FUT).
"""

import dataclasses
import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np
from scipy.constants import c as _C_M_PER_S
from scipy.optimize import brentq

from dispersion_models import (
    FiberSegment,
    degeneracy_omega,
    omega_to_wavelength,
    phi_fut_detuning,
)
from exceptions import GridMismatchError, InsufficientDataError, OutOfRangeError

logger = logging.getLogger(__name__)

ENVELOPE_SHAPES = ("gaussian", "sinc2")
GAUSSIAN_FWHM_FACTOR = 4.0 * math.log(2.0)

# Half-maximum argument of np.sinc(x)**2, i.e. sin(πx)/(πx) = 1/√2
SINC2_HALF_MAX_X = brentq(lambda x: np.sinc(x) ** 2 - 0.5, 0.1, 0.9, xtol=1e-15)

DEFAULT_GROUP_INDEX = 1.468
COHERENCE_MARGIN = 100.0


@dataclass(frozen=True)
class SpdcEnvelope:
    """Spectral envelope of one SPDC source.

    Attributes:
        omega_deg: Degenerate angular frequency (rad/ps)
        fwhm: Full width at half maximum in detuning (rad/ps)
        shape: "gaussian" or "sinc2"
        peak: Value at degeneracy (relative units)
    """
    omega_deg: float
    fwhm: float
    shape: str = "gaussian"
    peak: float = 1.0

    def __post_init__(self):
        if self.shape not in ENVELOPE_SHAPES:
            raise OutOfRangeError(f"envelope shape must be one of {ENVELOPE_SHAPES}, got '{self.shape}'")
        if not (math.isfinite(self.fwhm) and self.fwhm > 0):
            raise OutOfRangeError(f"envelope fwhm must be positive, got {self.fwhm}", value=self.fwhm)
        if not (math.isfinite(self.peak) and self.peak >= 0):
            raise OutOfRangeError(f"envelope peak must be >= 0, got {self.peak}", value=self.peak)
        if not (math.isfinite(self.omega_deg) and self.omega_deg > 0):
            raise OutOfRangeError(f"omega_deg must be positive, got {self.omega_deg}")


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform detuning grid [delta_min, delta_max] with n_points samples (rad/ps)."""
    delta_min: float
    delta_max: float
    n_points: int

    def __post_init__(self):
        if self.n_points < 2:
            raise OutOfRangeError(f"grid needs at least 2 points, got {self.n_points}")
        if not (math.isfinite(self.delta_min) and math.isfinite(self.delta_max)):
            raise OutOfRangeError("grid bounds must be finite")
        if self.delta_min >= self.delta_max:
            raise OutOfRangeError(f"grid bounds must be increasing, got [{self.delta_min}, {self.delta_max}]")

    @classmethod
    def symmetric(cls, half_width: float, n_points: int) -> "FrequencyGrid":
        return cls(-float(half_width), float(half_width), int(n_points))

    @property
    def is_symmetric(self) -> bool:
        return self.delta_min == -self.delta_max

    @property
    def spacing(self) -> float:
        return (self.delta_max - self.delta_min) / (self.n_points - 1)

    def points(self) -> np.ndarray:
        # Integer numerators keep a symmetric grid exactly antisymmetric
        n = self.n_points
        u = (2.0 * np.arange(n) - (n - 1)) / (n - 1)
        centre = 0.5 * (self.delta_min + self.delta_max)
        half = 0.5 * (self.delta_max - self.delta_min)
        return centre + half * u


@dataclass(frozen=True)
class InterferometerSetup:
    """Full description of the two-source interferometer at one pump wavelength.

    Attributes:
        pump_wavelength: Pump wavelength λ_p (nm)
        source1, source2: Envelopes of the two SPDC sources
        internal_segments: Fiber segments always present between the sources
        internal_poly: Even-polynomial phase coefficients for δ⁰, δ², δ⁴, ...
        fut: Fiber under test, or None
        pump_linewidth_mhz: Pump laser linewidth (MHz)
        path_mismatch_m: Path length mismatch between pump and biphoton paths (m)
        group_index: Group index used for the pump coherence length
    """
    pump_wavelength: float
    source1: SpdcEnvelope
    source2: SpdcEnvelope
    internal_segments: Tuple[FiberSegment, ...] = ()
    internal_poly: Tuple[float, ...] = ()
    fut: Optional[FiberSegment] = None
    pump_linewidth_mhz: float = 0.1
    path_mismatch_m: float = 0.0
    group_index: float = DEFAULT_GROUP_INDEX

    def __post_init__(self):
        if not (math.isfinite(self.pump_wavelength) and self.pump_wavelength > 0):
            raise OutOfRangeError(f"pump wavelength must be positive, got {self.pump_wavelength}")
        object.__setattr__(self, "internal_segments", tuple(self.internal_segments))
        object.__setattr__(self, "internal_poly", tuple(float(a) for a in self.internal_poly))
        omega_deg = self.omega_deg
        for name, env in (("source1", self.source1), ("source2", self.source2)):
            if not math.isclose(env.omega_deg, omega_deg, rel_tol=1e-12):
                raise OutOfRangeError(
                    f"{name} is centred at {env.omega_deg} rad/ps but the pump gives ω_p/2 = {omega_deg}"
                )

    @property
    def omega_p(self) -> float:
        return 2.0 * self.omega_deg

    @property
    def omega_deg(self) -> float:
        return degeneracy_omega(self.pump_wavelength)

    @property
    def lambda_deg(self) -> float:
        return 2.0 * self.pump_wavelength

    def without_fut(self) -> "InterferometerSetup":
        return dataclasses.replace(self, fut=None)


@dataclass
class Interferogram:
    """Values sampled on a strictly increasing detuning axis.

    ``kind`` is "spectrum" for non-negative spectral intensities and
    "normalized" for the fringe term n(δ) produced by normalization.
    """
    detuning: np.ndarray
    values: np.ndarray
    omega_deg: float
    sigma: Optional[np.ndarray] = None
    counts: Optional[np.ndarray] = None
    mask: Optional[np.ndarray] = None
    grid: Optional[FrequencyGrid] = None
    kind: str = "spectrum"
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.detuning = np.asarray(self.detuning, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        n = self.detuning.size
        if self.detuning.ndim != 1 or self.values.shape != self.detuning.shape:
            raise GridMismatchError("detuning and values must be 1-D arrays of equal length")
        if n == 0:
            raise InsufficientDataError("interferogram has no samples")
        if not (np.all(np.isfinite(self.detuning)) and np.all(np.isfinite(self.values))):
            raise OutOfRangeError("interferogram contains non-finite samples")
        if n > 1 and np.any(np.diff(self.detuning) <= 0):
            raise GridMismatchError("detuning must be strictly increasing")
        if self.kind == "spectrum" and np.any(self.values < 0):
            raise OutOfRangeError("spectral intensities must be non-negative")
        if self.sigma is not None:
            self.sigma = np.asarray(self.sigma, dtype=float)
            if self.sigma.shape != self.detuning.shape:
                raise GridMismatchError("sigma must match the detuning axis")
        if self.counts is not None:
            self.counts = np.asarray(self.counts)
        if self.mask is not None:
            self.mask = np.asarray(self.mask, dtype=bool)
            if self.mask.shape != self.detuning.shape:
                raise GridMismatchError("mask must match the detuning axis")

    @property
    def wavelength(self) -> np.ndarray:
        """Signal wavelength (nm) of each sample."""
        return omega_to_wavelength(self.omega_deg + self.detuning)

    @property
    def lambda_deg(self) -> float:
        return omega_to_wavelength(self.omega_deg)

    def is_symmetric(self, atol: float = 1e-9) -> bool:
        """True when the detuning axis is symmetric about zero."""
        scale = max(1.0, float(np.max(np.abs(self.detuning))))
        return bool(np.allclose(self.detuning, -self.detuning[::-1], rtol=0.0, atol=atol * scale))

    def select(self, keep: np.ndarray) -> "Interferogram":
        """Subset of samples where ``keep`` is True."""
        keep = np.asarray(keep, dtype=bool)
        return Interferogram(
            detuning=self.detuning[keep],
            values=self.values[keep],
            omega_deg=self.omega_deg,
            sigma=None if self.sigma is None else self.sigma[keep],
            counts=None if self.counts is None else self.counts[keep],
            mask=None if self.mask is None else self.mask[keep],
            grid=None,
            kind=self.kind,
            metadata=dict(self.metadata),
        )


@dataclass(frozen=True)
class CoherenceCheck:
    """Outcome of the pump coherence-length check.

    ratio is coherence length over path mismatch; None when the mismatch is zero.
    """
    passed: bool
    ratio: Optional[float]
    coherence_length_m: float


def envelope_detuning(env: SpdcEnvelope, delta: np.ndarray) -> np.ndarray:
    """Envelope value at detuning δ (rad/ps); exactly even in δ."""
    x = np.asarray(delta, dtype=float) / env.fwhm
    if env.shape == "gaussian":
        return env.peak * np.exp(-GAUSSIAN_FWHM_FACTOR * x * x)
    return env.peak * np.sinc(2.0 * SINC2_HALF_MAX_X * x) ** 2


def envelope_value(env: SpdcEnvelope, omega: np.ndarray) -> np.ndarray:
    """Envelope value at angular frequency ω (rad/ps).

    Gaussian: peak·exp(−4 ln2·(δ/fwhm)²). sinc²: the sinc² shape scaled so
    its full width at half maximum equals fwhm. Always >= 0.
    """
    delta = np.asarray(omega, dtype=float) - env.omega_deg
    return envelope_detuning(env, delta)


def envelope_spectrum(env: SpdcEnvelope, grid: FrequencyGrid) -> Interferogram:
    """Single-source spectrum of ``env`` sampled on ``grid``."""
    delta = grid.points()
    return Interferogram(
        detuning=delta,
        values=envelope_detuning(env, delta),
        omega_deg=env.omega_deg,
        grid=grid,
        metadata={"source": "envelope", "shape": env.shape, "fwhm_radps": env.fwhm},
    )


def _even_polynomial(coefficients: Tuple[float, ...], delta: np.ndarray) -> np.ndarray:
    d2 = delta * delta
    result = np.zeros_like(delta)
    for coefficient in reversed(coefficients):
        result = result * d2 + coefficient
    return result


def total_phase_detuning(setup: InterferometerSetup, delta: np.ndarray) -> np.ndarray:
    """Total relative phase Φ(δ) in rad."""
    delta = np.asarray(delta, dtype=float)
    omega_deg = setup.omega_deg
    phase = _even_polynomial(setup.internal_poly, delta)
    for segment in setup.internal_segments:
        phase = phase + phi_fut_detuning(segment, delta, omega_deg)
    if setup.fut is not None:
        phase = phase + phi_fut_detuning(setup.fut, delta, omega_deg)
    return phase


def total_phase(setup: InterferometerSetup, omega: np.ndarray) -> np.ndarray:
    """Φ_total(ω) = Φ_int(ω) + Φ_FUT(ω), the FUT term only when present."""
    return total_phase_detuning(setup, np.asarray(omega, dtype=float) - setup.omega_deg)


def visibility(env1: SpdcEnvelope, env2: SpdcEnvelope, omega: np.ndarray) -> np.ndarray:
    """Local fringe visibility 2·sqrt(F1·F2)/(F1 + F2).

    Raises:
        InsufficientDataError: Where both envelopes vanish
    """
    f1 = envelope_value(env1, omega)
    f2 = envelope_value(env2, omega)
    total = f1 + f2
    if np.any(total <= 0):
        raise InsufficientDataError("visibility undefined where both envelopes are zero")
    result = 2.0 * np.sqrt(f1 * f2) / total
    return float(result) if np.ndim(omega) == 0 else result


def coherence_check(pump_linewidth_mhz: float, path_mismatch_m: float,
                    group_index: float = DEFAULT_GROUP_INDEX,
                    margin: float = COHERENCE_MARGIN) -> CoherenceCheck:
    """Check that the pump coherence length dwarfs the path mismatch.

    L_coh = (c/n_g)/(π·Δν). The check passes when L_coh >= margin·mismatch.
    A 100 kHz linewidth gives roughly 650 m.
    """
    if pump_linewidth_mhz <= 0:
        raise OutOfRangeError(f"pump linewidth must be positive, got {pump_linewidth_mhz} MHz")
    if path_mismatch_m < 0:
        raise OutOfRangeError(f"path mismatch must be >= 0, got {path_mismatch_m} m")

    coherence_length = (_C_M_PER_S / group_index) / (math.pi * pump_linewidth_mhz * 1e6)
    if path_mismatch_m == 0:
        return CoherenceCheck(passed=True, ratio=None, coherence_length_m=coherence_length)
    ratio = coherence_length / path_mismatch_m
    return CoherenceCheck(passed=ratio >= margin, ratio=ratio, coherence_length_m=coherence_length)


def setup_hash(setup: InterferometerSetup) -> str:
    """Short stable hash of a setup for provenance headers."""
    payload = json.dumps(dataclasses.asdict(setup), sort_keys=True, default=repr)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def synthesize(setup: InterferometerSetup, grid: FrequencyGrid) -> Interferogram:
    """Noise-free coincidence spectrum S(δ) on ``grid``.

    A failing coherence check is reported as a warning and recorded in the
    metadata; the spectrum is still produced.
    """
    delta = grid.points()
    f1 = envelope_detuning(setup.source1, delta)
    f2 = envelope_detuning(setup.source2, delta)
    phase = total_phase_detuning(setup, delta)
    spectrum = f1 + f2 + 2.0 * np.sqrt(f1 * f2) * np.cos(phase)
    spectrum = np.maximum(spectrum, 0.0)

    check = coherence_check(setup.pump_linewidth_mhz, setup.path_mismatch_m, setup.group_index)
    if not check.passed:
        logger.warning(
            f"Pump coherence length {check.coherence_length_m:.3g} m is less than "
            f"{COHERENCE_MARGIN:g}x the path mismatch {setup.path_mismatch_m:g} m"
        )

    logger.debug(f"Synthesized {grid.n_points} points at λ_p={setup.pump_wavelength} nm "
                 f"(fut={'yes' if setup.fut is not None else 'no'})")

    return Interferogram(
        detuning=delta,
        values=spectrum,
        omega_deg=setup.omega_deg,
        grid=grid,
        metadata={
            "source": "synthesis",
            "setup_hash": setup_hash(setup),
            "with_fut": setup.fut is not None,
            "fut_length_m": setup.fut.length if setup.fut is not None else 0.0,
            "pump_wavelength_nm": setup.pump_wavelength,
            "lambda_deg_nm": setup.lambda_deg,
            "coherence_passed": check.passed,
            "coherence_length_m": check.coherence_length_m,
        },
    )


def resample(interferogram: Interferogram, grid: FrequencyGrid) -> Interferogram:
    """Linearly interpolate values (and σ, mask) onto ``grid``.

    Raises:
        OutOfRangeError: If ``grid`` reaches outside the sampled detuning span
    """
    delta = grid.points()
    source = interferogram.detuning
    if delta[0] < source[0] or delta[-1] > source[-1]:
        raise OutOfRangeError(
            f"resampling grid [{delta[0]:.4g}, {delta[-1]:.4g}] exceeds data span "
            f"[{source[0]:.4g}, {source[-1]:.4g}] rad/ps"
        )
    sigma = None
    if interferogram.sigma is not None:
        sigma = np.interp(delta, source, interferogram.sigma)
    mask = None
    if interferogram.mask is not None:
        mask = np.interp(delta, source, interferogram.mask.astype(float)) > 0.999
    return Interferogram(
        detuning=delta,
        values=np.interp(delta, source, interferogram.values),
        omega_deg=interferogram.omega_deg,
        sigma=sigma,
        mask=mask,
        grid=grid,
        kind=interferogram.kind,
        metadata=dict(interferogram.metadata, resampled=True),
    )
