#!/usr/bin/env python3
"""
Fiber dispersion models and the phase a fiber segment imprints on a biphoton.

Three model kinds are supported:

- SpecSheet: the manufacturer two-parameter formula
  D(λ) = (S0/4)·(λ − λ0⁴/λ³), valid over 1200-1700 nm.
- TaylorBeta: the propagation constant expanded about a reference angular
  frequency, with local k2(ω) = k2 + k3·(ω − ω_ref) + (k4/2)·(ω − ω_ref)².
- TabulatedD: measured (λ, D) pairs, linearly interpolated.

Units used throughout:
    wavelength  nm
    ω, δ        rad/ps   (ω = 2πν, ν in THz)
    D           ps/(nm·km)
    slope       ps/(nm²·km)
    k2          ps²/km
    k4          ps⁴/km
    length      m

The segment phase is expanded about the degenerate frequency ω_deg = ω_p/2.
Odd orders cancel between signal and idler, so only even powers of the
detuning δ = ω − ω_deg survive:

    Φ(δ) = offset − [k2·δ² + (k4/12)·δ⁴] · L_km
"""

import logging
import math
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
from scipy.constants import c as _C_M_PER_S

from exceptions import OutOfRangeError

logger = logging.getLogger(__name__)

# Speed of light in nm/ps (1 m/s = 1e-3 nm/ps)
C_NM_PER_PS = _C_M_PER_S * 1e-3
TWO_PI_C = 2.0 * math.pi * C_NM_PER_PS

SPEC_SHEET_RANGE_NM = (1200.0, 1700.0)
DEFAULT_SLOPE_STEP_NM = 0.1

# Typical SMF-28 patchcord spread used for the spec-sheet bounds
SMF28_LAMBDA0_RANGE_NM = (1308.0, 1318.0)
SMF28_S0 = 0.085

ArrayLike = Union[float, np.ndarray]


def wavelength_to_omega(wavelength_nm: ArrayLike) -> ArrayLike:
    """Angular frequency (rad/ps) of a vacuum wavelength (nm)."""
    return TWO_PI_C / wavelength_nm


def omega_to_wavelength(omega: ArrayLike) -> ArrayLike:
    """Vacuum wavelength (nm) of an angular frequency (rad/ps)."""
    return TWO_PI_C / omega


def degeneracy_omega(pump_wavelength_nm: float) -> float:
    """Degenerate signal/idler angular frequency ω_p/2 for a pump wavelength."""
    return 0.5 * wavelength_to_omega(pump_wavelength_nm)


@dataclass(frozen=True)
class SpecSheet:
    """Manufacturer dispersion formula.

    Attributes:
        lambda0: Zero-dispersion wavelength (nm)
        s0: Zero-dispersion slope (ps/(nm²·km))
    """
    lambda0: float
    s0: float

    def __post_init__(self):
        if not (math.isfinite(self.lambda0) and self.lambda0 > 0):
            raise OutOfRangeError(f"lambda0 must be positive, got {self.lambda0}", value=self.lambda0)
        if not (math.isfinite(self.s0) and self.s0 > 0):
            raise OutOfRangeError(f"s0 must be positive, got {self.s0}", value=self.s0)


@dataclass(frozen=True)
class TaylorBeta:
    """Propagation-constant expansion about omega_ref (rad/ps).

    k2 in ps²/km, k3 in ps³/km, k4 in ps⁴/km.
    """
    omega_ref: float
    k2: float
    k3: float = 0.0
    k4: float = 0.0

    def __post_init__(self):
        for name in ("omega_ref", "k2", "k3", "k4"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise OutOfRangeError(f"TaylorBeta.{name} must be finite, got {value}", value=value)
        if self.omega_ref <= 0:
            raise OutOfRangeError(f"omega_ref must be positive, got {self.omega_ref}", value=self.omega_ref)


@dataclass(frozen=True)
class TabulatedD:
    """Measured dispersion table, strictly increasing in wavelength (nm)."""
    wavelengths: Tuple[float, ...]
    values: Tuple[float, ...]

    def __post_init__(self):
        wl = np.asarray(self.wavelengths, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if wl.ndim != 1 or wl.shape != vals.shape:
            raise OutOfRangeError("TabulatedD needs matching 1-D wavelength and value sequences")
        if wl.size < 2:
            raise OutOfRangeError(f"TabulatedD needs at least 2 points, got {wl.size}")
        if not (np.all(np.isfinite(wl)) and np.all(np.isfinite(vals))):
            raise OutOfRangeError("TabulatedD entries must be finite")
        if np.any(np.diff(wl) <= 0):
            raise OutOfRangeError("TabulatedD wavelengths must be strictly increasing")
        object.__setattr__(self, "wavelengths", tuple(float(x) for x in wl))
        object.__setattr__(self, "values", tuple(float(x) for x in vals))

    @property
    def valid_range(self) -> Tuple[float, float]:
        return self.wavelengths[0], self.wavelengths[-1]


DispersionModel = Union[SpecSheet, TaylorBeta, TabulatedD]


@dataclass(frozen=True)
class FiberSegment:
    """A length of fiber (m) described by a dispersion model."""
    model: DispersionModel
    length: float
    label: str = ""

    def __post_init__(self):
        if not (math.isfinite(self.length) and self.length >= 0):
            raise OutOfRangeError(f"fiber length must be >= 0 m, got {self.length}", value=self.length)


def _scalar_or_array(values: np.ndarray, original: ArrayLike) -> ArrayLike:
    if np.ndim(original) == 0:
        return float(values)
    return values


def _check_range(lam: np.ndarray, low: float, high: float, what: str) -> None:
    if not np.all(np.isfinite(lam)):
        raise OutOfRangeError(f"{what}: wavelength must be finite")
    if np.any(lam < low) or np.any(lam > high):
        bad = lam[(lam < low) | (lam > high)]
        raise OutOfRangeError(
            f"{what}: wavelength {float(bad.flat[0]):.3f} nm outside validity range [{low}, {high}] nm",
            value=float(bad.flat[0]),
            valid_range=(low, high)
        )


def k2_from_d(d: ArrayLike, wavelength_nm: ArrayLike) -> ArrayLike:
    """Convert D (ps/(nm·km)) to k2 (ps²/km): k2 = −D·λ²/(2πc).

    Raises:
        OutOfRangeError: On non-finite input or non-positive wavelength
    """
    d_arr = np.asarray(d, dtype=float)
    lam = np.asarray(wavelength_nm, dtype=float)
    if not (np.all(np.isfinite(d_arr)) and np.all(np.isfinite(lam))):
        raise OutOfRangeError("k2_from_d: non-finite input")
    if np.any(lam <= 0):
        raise OutOfRangeError("k2_from_d: wavelength must be positive")
    result = -d_arr * lam * lam / TWO_PI_C
    return _scalar_or_array(result, d if np.ndim(d) else wavelength_nm)


def d_from_k2(k2: ArrayLike, wavelength_nm: ArrayLike) -> ArrayLike:
    """Convert k2 (ps²/km) to D (ps/(nm·km)): D = −2πc·k2/λ²."""
    k2_arr = np.asarray(k2, dtype=float)
    lam = np.asarray(wavelength_nm, dtype=float)
    if not (np.all(np.isfinite(k2_arr)) and np.all(np.isfinite(lam))):
        raise OutOfRangeError("d_from_k2: non-finite input")
    if np.any(lam <= 0):
        raise OutOfRangeError("d_from_k2: wavelength must be positive")
    result = -TWO_PI_C * k2_arr / (lam * lam)
    return _scalar_or_array(result, k2 if np.ndim(k2) else wavelength_nm)


def d_param(model: DispersionModel, wavelength_nm: ArrayLike) -> ArrayLike:
    """Dispersion parameter D(λ) in ps/(nm·km).

    Args:
        model: SpecSheet, TaylorBeta or TabulatedD
        wavelength_nm: Scalar or array of wavelengths (nm)

    Returns:
        D with the same shape as the input

    Raises:
        OutOfRangeError: When λ lies outside the model's validity window

    Example:
        >>> round(d_param(SpecSheet(1313.0, 0.085), 1560.4), 2)
        16.53
    """
    lam = np.asarray(wavelength_nm, dtype=float)

    if isinstance(model, SpecSheet):
        _check_range(lam, *SPEC_SHEET_RANGE_NM, what="SpecSheet")
        ratio = model.lambda0 / lam
        # λ − λ0·(λ0/λ)³ is exactly zero at λ = λ0
        result = (model.s0 / 4.0) * (lam - model.lambda0 * ratio ** 3)
    elif isinstance(model, TabulatedD):
        _check_range(lam, *model.valid_range, what="TabulatedD")
        result = np.interp(lam, model.wavelengths, model.values)
    elif isinstance(model, TaylorBeta):
        if not np.all(np.isfinite(lam)) or np.any(lam <= 0):
            raise OutOfRangeError("TaylorBeta: wavelength must be positive and finite")
        result = np.asarray(d_from_k2(k2_at(model, wavelength_to_omega(lam)), lam))
    else:
        raise TypeError(f"Unsupported dispersion model: {type(model).__name__}")

    return _scalar_or_array(np.asarray(result, dtype=float), wavelength_nm)


def dispersion_slope(model: DispersionModel, wavelength_nm: float,
                     step: float = DEFAULT_SLOPE_STEP_NM) -> float:
    """dD/dλ in ps/(nm²·km).

    SpecSheet uses the analytic derivative (S0/4)·(1 + 3λ0⁴/λ⁴). Other models
    use a central difference, falling back to a one-sided difference at the
    edges of a tabulated range.
    """
    lam = float(wavelength_nm)
    if isinstance(model, SpecSheet):
        _check_range(np.asarray(lam), *SPEC_SHEET_RANGE_NM, what="SpecSheet")
        ratio = model.lambda0 / lam
        return (model.s0 / 4.0) * (1.0 + 3.0 * ratio ** 4)

    low, high = lam - step, lam + step
    if isinstance(model, TabulatedD):
        _check_range(np.asarray(lam), *model.valid_range, what="TabulatedD")
        low = max(low, model.valid_range[0])
        high = min(high, model.valid_range[1])
        if high <= low:
            raise OutOfRangeError(f"TabulatedD: no room for a slope step at {lam} nm")
    return (d_param(model, high) - d_param(model, low)) / (high - low)


def k2_at(model: DispersionModel, omega: ArrayLike) -> ArrayLike:
    """Local second-order coefficient k2(ω) in ps²/km."""
    if isinstance(model, TaylorBeta):
        offset = np.asarray(omega, dtype=float) - model.omega_ref
        result = model.k2 + model.k3 * offset + 0.5 * model.k4 * offset * offset
        return _scalar_or_array(np.asarray(result, dtype=float), omega)
    lam = omega_to_wavelength(np.asarray(omega, dtype=float))
    return _scalar_or_array(np.asarray(k2_from_d(d_param(model, lam), lam)), omega)


def k4_at(model: DispersionModel, omega: float) -> float:
    """Fourth-order coefficient in ps⁴/km; only TaylorBeta carries one."""
    if isinstance(model, TaylorBeta):
        return model.k4
    return 0.0


def phi_fut_detuning(segment: FiberSegment, delta: ArrayLike, omega_deg: float,
                     offset: float = 0.0) -> ArrayLike:
    """Segment phase as a function of detuning δ from degeneracy (rad/ps).

    Exactly even in δ and exactly linear in segment length.

    Raises:
        OutOfRangeError: If |δ| reaches ω_deg or the model is out of range at ω_deg
    """
    delta_arr = np.asarray(delta, dtype=float)
    if np.any(np.abs(delta_arr) >= omega_deg):
        raise OutOfRangeError("detuning must stay below the degenerate frequency")

    if segment.length == 0:
        return _scalar_or_array(np.full_like(delta_arr, offset), delta)

    length_km = segment.length / 1000.0
    k2 = k2_at(segment.model, omega_deg)
    k4 = k4_at(segment.model, omega_deg)
    d2 = delta_arr * delta_arr
    phase = offset - (k2 * d2 + (k4 / 12.0) * d2 * d2) * length_km
    return _scalar_or_array(phase, delta)


def phi_fut(segment: FiberSegment, omega: ArrayLike, omega_p: float,
            include_offset: bool = False, offset: float = 0.0) -> ArrayLike:
    """Phase Φ(ω) imprinted on the biphoton by a fiber segment.

    Args:
        segment: Fiber segment (model + length in m)
        omega: Signal angular frequency (rad/ps), scalar or array
        omega_p: Pump angular frequency (rad/ps)
        include_offset: Add the constant segment offset
        offset: Constant phase (rad) from propagation of the pump

    Returns:
        Φ in rad, even in δ = ω − ω_p/2

    Example:
        With SpecSheet(1313, 0.085), L = 5 m and δ = 2π·5 rad/ps the
        result is about +105 rad.
    """
    omega_deg = 0.5 * omega_p
    delta = np.asarray(omega, dtype=float) - omega_deg
    phase = phi_fut_detuning(segment, delta, omega_deg, offset if include_offset else 0.0)
    return _scalar_or_array(np.asarray(phase), omega)


def spec_sheet_bounds(wavelength_nm: float,
                      lambda0_range: Tuple[float, float] = SMF28_LAMBDA0_RANGE_NM,
                      s0: float = SMF28_S0) -> Tuple[float, float]:
    """Lower and upper D (ps/(nm·km)) over a spread of zero-dispersion wavelengths."""
    values = [d_param(SpecSheet(lambda0, s0), wavelength_nm) for lambda0 in lambda0_range]
    return min(values), max(values)
