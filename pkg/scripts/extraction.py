#!/usr/bin/env python3
"""
Inverse pipeline: from measured interferograms to D and dispersion slope.

Steps, per pump wavelength:

1. normalize        S → n(δ) = (S − F1 − F2)/(2·sqrt(F1·F2))
2. phase recovery   raised-cosine fit (parametric) or fringe-counting
                    unwrap (pointwise), on the with-FUT and without-FUT data
3. subtract         Φ_FUT = Φ_with − Φ_without
4. estimate         k2 = −Δc2/L_km and D = −2πc·k2/λ²

Two pumps give two (λ_deg, D) points and a finite-difference slope.

cos Φ cannot tell Φ from −Φ. Every fit reports the branch with c2 >= 0
unless asked otherwise, and the pointwise unwrap follows the same rule, so
both traces of a subtraction share one convention.
"""

import dataclasses
import logging
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import least_squares
from scipy.signal import find_peaks, savgol_filter

from dispersion_models import TWO_PI_C, d_from_k2
from exceptions import (
    BootstrapError,
    DispersionToolError,
    FitConvergenceError,
    GridMismatchError,
    InsufficientDataError,
    NumericalError,
    OutOfRangeError,
    UndersampledFringesError,
)
from synthesis import FrequencyGrid, Interferogram, resample

logger = logging.getLogger(__name__)

DEFAULT_WINDOW_HALF_WIDTH = 2.0 * math.pi * 5.0
DEFAULT_ENVELOPE_FLOOR = 0.05
CLIP_LIMIT = 1.2
DEFAULT_PHASE_THRESHOLD = 2.5
MIN_FIT_POINTS = 50
MIN_FIT_FRINGES = 8
MIN_SAMPLES_PER_FRINGE = 4.0
FIT_TOLERANCE = 1e-12
RESTART_C2_FACTORS = (1.0, 0.97, 1.03, 0.9, 1.1)
RESTART_C0_SHIFTS = (0.0, 0.5 * math.pi, -0.5 * math.pi)
ACCEPTABLE_REDUCED_CHI2 = 4.0
ACCEPTABLE_UNWEIGHTED_RMS = 0.05
SMOOTHING_WINDOW = 11
EDGE_REBOUND_SIGMAS = 3.0
MIN_BOOTSTRAP_RESAMPLES = 50
MAX_BOOTSTRAP_FAILURE_SHARE = 0.2
HIGH_CLIP_FRACTION = 0.05

_UNCERTAINTY_PATTERN = re.compile(r"^\s*([-+]?\d+(?:\.(\d+))?)\((\d+)\)\s*$")


@dataclass
class PhaseTrace:
    """Recovered phase Φ(δ) with per-point uncertainty.

    Traces produced by subtracting two parametric fits also carry the
    coefficient pair (Δc2, Δc4) and its 2×2 covariance.
    """
    detuning: np.ndarray
    phase: np.ndarray
    sigma: np.ndarray
    mask: np.ndarray
    method: str = "pointwise"
    asymmetry: float = 0.0
    asymmetry_expected: float = 0.0
    coefficients: Optional[np.ndarray] = None
    covariance: Optional[np.ndarray] = None

    def __post_init__(self):
        self.detuning = np.asarray(self.detuning, dtype=float)
        self.phase = np.asarray(self.phase, dtype=float)
        self.sigma = np.asarray(self.sigma, dtype=float)
        self.mask = np.asarray(self.mask, dtype=bool)
        shape = self.detuning.shape
        if self.phase.shape != shape or self.sigma.shape != shape or self.mask.shape != shape:
            raise GridMismatchError("phase trace arrays must share one shape")
        if np.any(self.sigma[self.mask] <= 0):
            raise OutOfRangeError("masked-in phase points need sigma > 0")


@dataclass(frozen=True)
class RaisedCosineFit:
    """Result of fitting n + 1 ≈ A·(1 + V·exp(−r·u²)·cos(c0 + c2·δ² + c4·δ⁴)).

    ``covariance`` is 4×4 over (c0, c2, c4, V), scaled by the reduced χ².
    """
    c0: float
    c2: float
    c4: float
    visibility: float
    amplitude: float
    rolloff: float
    covariance: np.ndarray
    residual_rms: float
    reduced_chi2: float
    window: Tuple[float, float]
    n_points: int
    include_c4: bool
    weighted: bool
    phase_sign: int = 1

    @property
    def sigma_c2(self) -> float:
        return float(math.sqrt(max(self.covariance[1, 1], 0.0)))

    @property
    def sigma_c4(self) -> float:
        return float(math.sqrt(max(self.covariance[2, 2], 0.0)))

    def phase(self, delta: np.ndarray) -> np.ndarray:
        d2 = np.asarray(delta, dtype=float) ** 2
        return self.c0 + self.c2 * d2 + self.c4 * d2 * d2


@dataclass(frozen=True)
class DispersionEstimate:
    """D and k2 at one degenerate wavelength."""
    lambda_deg: float
    k2: float
    k2_sigma: float
    d: float
    d_sigma: float
    l_fut: float
    method: str
    delta_c2: float = 0.0
    delta_c2_sigma: float = 0.0
    d_sigma_bootstrap: Optional[float] = None
    n_bootstrap: int = 0

    def formatted(self) -> str:
        sigma = self.d_sigma_bootstrap if self.d_sigma_bootstrap else self.d_sigma
        return format_uncertainty(self.d, sigma)


@dataclass(frozen=True)
class SlopeEstimate:
    """Finite-difference dispersion slope between two degenerate wavelengths."""
    slope: float
    slope_sigma: float
    lambda_pair: Tuple[float, float]

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lambda_pair[0] + self.lambda_pair[1])

    def formatted(self) -> str:
        return format_uncertainty(self.slope, self.slope_sigma)


@dataclass(frozen=True)
class ExtractionOptions:
    """Knobs of the inverse pipeline.

    fit_rolloff=None enables the visibility roll-off only for measured
    spectra, i.e. those that carry σ.
    """
    window_half_width: float = DEFAULT_WINDOW_HALF_WIDTH
    include_c4: bool = True
    fit_rolloff: Optional[bool] = None
    envelope_floor: float = DEFAULT_ENVELOPE_FLOOR
    method: str = "parametric"
    phase_sign: int = 1

    def __post_init__(self):
        if self.method not in ("parametric", "pointwise"):
            raise OutOfRangeError(f"method must be 'parametric' or 'pointwise', got '{self.method}'")
        if self.phase_sign not in (1, -1):
            raise OutOfRangeError(f"phase_sign must be +1 or -1, got {self.phase_sign}")
        if not self.window_half_width > 0:
            raise OutOfRangeError("window_half_width must be positive")


@dataclass
class ExtractionResult:
    """Everything the pipeline learned about one pump wavelength."""
    delta_trace: PhaseTrace
    estimate: Optional[DispersionEstimate]
    fit_with: Optional[RaisedCosineFit] = None
    fit_without: Optional[RaisedCosineFit] = None
    trace_with: Optional[PhaseTrace] = None
    trace_without: Optional[PhaseTrace] = None
    diagnostics: Dict[str, Any] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)


# ---------------------------------------------------------------------------
# Uncertainty notation
# ---------------------------------------------------------------------------

def format_uncertainty(value: float, sigma: float) -> str:
    """Compact value(σ) notation, e.g. 16.69(5) or 16.06(11).

    σ keeps two significant digits when its leading digit is 1, else one.
    """
    if not (math.isfinite(value) and math.isfinite(sigma)) or sigma <= 0:
        return f"{value:.6g}"
    exponent = math.floor(math.log10(sigma))
    leading = sigma / 10.0 ** exponent
    digits = 2 if leading < 2.0 else 1
    decimals = digits - 1 - exponent
    if decimals <= 0:
        return f"{value:.0f}({sigma:.0f})"
    sigma_digits = int(round(sigma * 10.0 ** decimals))
    return f"{value:.{decimals}f}({sigma_digits})"


def parse_uncertainty(text: str) -> Tuple[float, float]:
    """Inverse of format_uncertainty: "16.69(5)" → (16.69, 0.05)."""
    match = _UNCERTAINTY_PATTERN.match(text)
    if not match:
        raise ValueError(f"not in value(sigma) notation: '{text}'")
    decimals = len(match.group(2) or "")
    return float(match.group(1)), int(match.group(3)) * 10.0 ** (-decimals)


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------

def _same_axis(a: np.ndarray, b: np.ndarray) -> bool:
    if a.shape != b.shape:
        return False
    scale = max(1.0, float(np.max(np.abs(a))))
    return bool(np.allclose(a, b, rtol=0.0, atol=1e-9 * scale))


def normalize(measured: Interferogram, env1: Interferogram, env2: Interferogram,
              floor: float = DEFAULT_ENVELOPE_FLOOR, scale: Optional[float] = None) -> Interferogram:
    """Isolate the fringe term n(δ) = (S/scale − F1 − F2)/(2·sqrt(F1·F2)).

    Points where either envelope falls below ``floor`` times its peak are
    masked out. n is clipped to ±1.2 and the clipped share recorded.

    Args:
        measured: Coincidence spectrum S
        env1, env2: Single-source spectra on the same grid
        floor: Relative envelope floor for the mask
        scale: Factor relating S to the envelope units. None picks 1.0 for
            synthetic spectra and Σ S / Σ (F1 + F2) over the mask for
            unit-area spectrometer output.

    Raises:
        GridMismatchError: When the three inputs are not on one grid
        InsufficientDataError: When every point is masked out
    """
    if not (_same_axis(measured.detuning, env1.detuning) and _same_axis(measured.detuning, env2.detuning)):
        raise GridMismatchError("measured spectrum and envelopes are not on the same grid")

    f1, f2 = env1.values, env2.values
    mask = (f1 > floor * f1.max()) & (f2 > floor * f2.max()) if f1.max() > 0 and f2.max() > 0 \
        else np.zeros_like(f1, dtype=bool)
    if measured.mask is not None:
        mask &= measured.mask
    if not np.any(mask):
        raise InsufficientDataError("all points fall below the envelope floor")

    if scale is None:
        if measured.metadata.get("normalization") == "unit_area":
            scale = float(measured.values[mask].sum() / (f1[mask] + f2[mask]).sum())
        else:
            scale = 1.0
    if not scale > 0:
        raise InsufficientDataError("measured spectrum has no weight inside the envelope mask")

    cross = 2.0 * np.sqrt(f1 * f2)
    safe_cross = np.where(mask, cross, 1.0)
    raw = np.where(mask, (measured.values / scale - f1 - f2) / safe_cross, 0.0)
    clipped = np.clip(raw, -CLIP_LIMIT, CLIP_LIMIT)
    clip_fraction = float(np.count_nonzero(clipped[mask] != raw[mask]) / np.count_nonzero(mask))
    if clip_fraction > HIGH_CLIP_FRACTION:
        logger.warning(f"{clip_fraction:.1%} of normalized points were clipped to ±{CLIP_LIMIT}")

    sigma = None
    if measured.sigma is not None:
        sigma = np.where(mask, measured.sigma / (scale * safe_cross), np.inf)

    return Interferogram(
        detuning=measured.detuning,
        values=clipped,
        omega_deg=measured.omega_deg,
        sigma=sigma,
        mask=mask,
        grid=measured.grid,
        kind="normalized",
        metadata=dict(measured.metadata, clip_fraction=clip_fraction, scale=scale),
    )


def asymmetry_metric(normalized: Interferogram, window: Optional[Tuple[float, float]] = None) -> Tuple[float, float]:
    """RMS of the odd part of n(δ) and its expectation from noise alone."""
    if not normalized.is_symmetric():
        raise GridMismatchError("asymmetry needs a grid symmetric about zero")
    keep = _window_mask(normalized, window)
    keep = keep & keep[::-1]
    if not np.any(keep):
        raise InsufficientDataError("no points inside the asymmetry window")
    odd = 0.5 * (normalized.values - normalized.values[::-1])
    value = float(np.sqrt(np.mean(odd[keep] ** 2)))
    if normalized.sigma is None:
        return value, 0.0
    spread = 0.5 * np.sqrt(normalized.sigma ** 2 + normalized.sigma[::-1] ** 2)
    return value, float(np.sqrt(np.mean(spread[keep] ** 2)))


def _window_mask(normalized: Interferogram, window: Optional[Tuple[float, float]]) -> np.ndarray:
    keep = np.ones_like(normalized.detuning, dtype=bool) if normalized.mask is None else normalized.mask.copy()
    if window is not None:
        keep &= (normalized.detuning >= window[0]) & (normalized.detuning <= window[1])
    return keep


# ---------------------------------------------------------------------------
# Fringe counting
# ---------------------------------------------------------------------------

def _parabolic_vertex(x: np.ndarray, y: np.ndarray, i: int) -> float:
    if i <= 0 or i >= len(x) - 1:
        return float(x[i])
    x0, x1, x2 = x[i - 1], x[i], x[i + 1]
    y0, y1, y2 = y[i - 1], y[i], y[i + 1]
    denom = (x0 - x1) * (x0 - x2) * (x1 - x2)
    a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom
    b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom
    if a == 0:
        return float(x1)
    return float(np.clip(-b / (2.0 * a), x0, x2))


def _edge_extremum(signal: np.ndarray, i: int, threshold: float, rebound: float) -> bool:
    """True for a peak whose outer side is cut short by an end of the branch.

    No sample between the peak and that end may be higher, and the fall toward
    it must exceed the rebound level. The interior side still has to clear
    the prominence threshold.
    """
    height = signal[i]
    # (inner, outer) with inner ordered to end next to the peak
    for inner, outer in ((signal[:i], signal[i + 1:]), (signal[i + 1:][::-1], signal[:i][::-1])):
        if outer.size == 0 or height <= np.max(outer) or height - np.min(outer) <= rebound:
            continue
        higher = np.flatnonzero(inner > height)
        stretch = inner[higher[-1] + 1:] if higher.size else inner
        if stretch.size and height - np.min(stretch) >= threshold:
            return True
    return False


def _turning_points(x: np.ndarray, n: np.ndarray, sigma: Optional[np.ndarray]) -> List[Tuple[int, int, float]]:
    """Fringe extrema as (index, kind, vertex); kind +1 for minima, −1 for maxima.

    Interior extrema need a quarter of the fringe span as prominence. The
    extremum before a partial fringe at either end of the branch is judged on
    its interior side only.
    """
    smooth = n
    if sigma is not None and n.size >= 3 * SMOOTHING_WINDOW:
        smooth = savgol_filter(n, SMOOTHING_WINDOW, 3)
    span = float(np.ptp(smooth))
    if span <= 0:
        return []
    threshold = 0.25 * span
    rebound = 0.0
    if sigma is not None and np.any(np.isfinite(sigma)):
        rebound = EDGE_REBOUND_SIGMAS * float(np.median(sigma[np.isfinite(sigma)]))
    points = []
    for kind, signal in ((1, -smooth), (-1, smooth)):
        peaks, props = find_peaks(signal, prominence=0.0)
        for i, prominence in zip(peaks, props["prominences"]):
            if prominence >= threshold or _edge_extremum(signal, int(i), threshold, rebound):
                points.append((int(i), kind, _parabolic_vertex(x, smooth, int(i))))
    return sorted(points)


def _unwrap_branch(x: np.ndarray, n: np.ndarray,
                   sigma: Optional[np.ndarray]) -> Tuple[np.ndarray, List[Tuple[float, float]], List[int]]:
    """Continuous phase along one branch (x >= 0, increasing) by fringe counting.

    Returns the phase, (vertex, phase) anchors at turning points and the
    turning-point indices.
    """
    base = np.arccos(np.clip(n, -1.0, 1.0))
    points = _turning_points(x, n, sigma)

    if not points:
        sign = 1.0 if base[-1] >= base[0] else -1.0
        return sign * base, [], []

    sign = 1.0 if points[0][1] == 1 else -1.0
    order = 0
    phase = np.empty_like(base)
    anchors: List[Tuple[float, float]] = []
    start = 0
    for index, kind, vertex in points:
        phase[start:index] = 2.0 * math.pi * order + sign * base[start:index]
        before = 2.0 * math.pi * order + sign * base[index]
        if kind == 1:
            # A minimum always opens the next order, even after a missed maximum
            order += 1
            sign = -1.0
            anchors.append((vertex, (2 * order - 1) * math.pi))
        else:
            if sign > 0:
                order += 1
            sign = 1.0
            anchors.append((vertex, 2.0 * math.pi * order))
        after = 2.0 * math.pi * order + sign * base[index]
        phase[index] = _turning_sample_phase(x, phase, index, vertex, before, after)
        start = index + 1
    phase[start:] = 2.0 * math.pi * order + sign * base[start:]
    return phase, anchors, [p[0] for p in points]


def _turning_sample_phase(x: np.ndarray, phase: np.ndarray, index: int, vertex: float,
                          before: float, after: float) -> float:
    """Pick the branch for the sample nearest a fringe extremum.

    Linear extrapolation from the two previous samples decides when they
    exist; otherwise the side of the parabolic vertex does.
    """
    if index >= 2 and x[index - 1] > x[index - 2]:
        slope = (phase[index - 1] - phase[index - 2]) / (x[index - 1] - x[index - 2])
        predicted = phase[index - 1] + slope * (x[index] - x[index - 1])
        return before if abs(before - predicted) <= abs(after - predicted) else after
    return before if vertex >= x[index] else after


def _check_sampling(indices: List[int]) -> None:
    if len(indices) < 2:
        return
    samples_per_fringe = 2.0 * float(np.min(np.diff(indices[-3:])))
    if samples_per_fringe < MIN_SAMPLES_PER_FRINGE:
        raise UndersampledFringesError(
            f"only {samples_per_fringe:.1f} samples per fringe near the window edge",
            samples_per_fringe=samples_per_fringe
        )


def _branches(normalized: Interferogram, keep: np.ndarray):
    """Split a symmetric window into positive and mirrored negative branches."""
    delta = normalized.detuning
    pos = keep & (delta >= 0)
    neg = keep & (delta <= 0)
    x_pos = delta[pos]
    x_neg = -delta[neg][::-1]
    return pos, neg, x_pos, x_neg


def extract_phase_pointwise(normalized: Interferogram,
                            window: Optional[Tuple[float, float]] = None) -> PhaseTrace:
    """Recover Φ(δ) point by point from arccos(n) and fringe counting.

    Each side of δ = 0 is unwrapped outward from the centre. Passing a
    minimum moves to the next order on the descending branch, passing a
    maximum returns to the ascending branch. The two sides are averaged,
    their half-difference is reported as the asymmetry.

    Raises:
        GridMismatchError: If the grid is not symmetric about zero
        UndersampledFringesError: Below four samples per fringe at the edge
    """
    if not normalized.is_symmetric():
        raise GridMismatchError("pointwise extraction needs a grid symmetric about zero")
    keep = _window_mask(normalized, window)
    keep = keep & keep[::-1]
    if np.count_nonzero(keep) < 3:
        raise InsufficientDataError("too few points inside the extraction window")

    noisy = normalized.sigma is not None
    pos, neg, x_pos, x_neg = _branches(normalized, keep)
    n_pos = normalized.values[pos]
    n_neg = normalized.values[neg][::-1]
    s_pos = normalized.sigma[pos] if noisy else None
    s_neg = normalized.sigma[neg][::-1] if noisy else None

    phase_pos, _, idx_pos = _unwrap_branch(x_pos, n_pos, s_pos)
    phase_neg, _, idx_neg = _unwrap_branch(x_neg, n_neg, s_neg)
    _check_sampling(idx_pos)
    _check_sampling(idx_neg)

    even = 0.5 * (phase_pos + phase_neg)
    odd = 0.5 * (phase_pos - phase_neg)

    n_all = normalized.values
    if noisy:
        sigma_n = normalized.sigma
    else:
        sigma_n = np.full_like(n_all, np.finfo(float).eps)
    sigma_phase = sigma_n / np.sqrt(np.maximum(1.0 - np.clip(n_all, -1.0, 1.0) ** 2, 1e-3))
    sigma_phase = np.where(np.isfinite(sigma_phase), sigma_phase, 1e6)

    phase = np.zeros_like(n_all)
    phase[pos] = even
    phase[neg] = even[::-1]

    sigma_pos = sigma_phase[pos]
    sigma_neg = sigma_phase[neg][::-1]
    sigma_even = 0.5 * np.sqrt(sigma_pos ** 2 + sigma_neg ** 2)
    sigma_out = np.full_like(n_all, 1e6)
    sigma_out[pos] = sigma_even
    sigma_out[neg] = sigma_even[::-1]

    asymmetry = float(np.sqrt(np.mean(odd ** 2)))
    asymmetry_expected = float(np.sqrt(np.mean(sigma_even ** 2))) if noisy else 0.0

    return PhaseTrace(
        detuning=normalized.detuning,
        phase=phase,
        sigma=sigma_out,
        mask=keep,
        method="pointwise",
        asymmetry=asymmetry,
        asymmetry_expected=asymmetry_expected,
    )


# ---------------------------------------------------------------------------
# Raised-cosine fit
# ---------------------------------------------------------------------------

def _ladder_seed(normalized: Interferogram, keep: np.ndarray) -> Tuple[float, float]:
    """(c0, c2) seed from the fringe ladder of the even part of n(δ)."""
    delta = normalized.detuning
    symmetric = normalized.is_symmetric() and np.array_equal(keep, keep[::-1])
    pos = keep & (delta >= 0)
    x = delta[pos]
    n = normalized.values[pos]
    sigma = None if normalized.sigma is None else normalized.sigma[pos]
    if symmetric:
        n = 0.5 * (n + normalized.values[keep & (delta <= 0)][::-1])
        if sigma is not None:
            sigma = sigma / math.sqrt(2.0)
    if x.size < 3:
        x = np.abs(delta[keep])
        order = np.argsort(x)
        x, n = x[order], normalized.values[keep][order]
        if sigma is not None:
            sigma = normalized.sigma[keep][order]

    phase, anchors, indices = _unwrap_branch(x, n, sigma)
    _check_sampling(indices)
    if len(anchors) >= 2:
        ax = np.array([a[0] for a in anchors])
        ay = np.array([a[1] for a in anchors])
        c2, c0 = np.polyfit(ax * ax, ay, 1)
    else:
        c2, c0 = np.polyfit(x * x, phase, 1)
    return float(c0), float(c2)


def _cosine_model(params: np.ndarray, u2: np.ndarray, layout: Dict[str, int]) -> Tuple[np.ndarray, ...]:
    c0, b2, v, a = params[layout["c0"]], params[layout["b2"]], params[layout["v"]], params[layout["a"]]
    b4 = params[layout["b4"]] if "b4" in layout else 0.0
    r = params[layout["r"]] if "r" in layout else 0.0
    theta = c0 + b2 * u2 + b4 * u2 * u2
    envelope = np.exp(-r * u2)
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    model = a * (1.0 + v * envelope * cos_t)
    return model, theta, envelope, cos_t, sin_t


def _fit_once(p0: np.ndarray, u2: np.ndarray, y: np.ndarray, weights: np.ndarray,
              layout: Dict[str, int], lower: np.ndarray, upper: np.ndarray):
    def residuals(p):
        model = _cosine_model(p, u2, layout)[0]
        return (y - model) * weights

    def jacobian(p):
        _, _, envelope, cos_t, sin_t = _cosine_model(p, u2, layout)
        a, v = p[layout["a"]], p[layout["v"]]
        common = -a * v * envelope * sin_t
        jac = np.empty((u2.size, p.size))
        jac[:, layout["c0"]] = common
        jac[:, layout["b2"]] = common * u2
        if "b4" in layout:
            jac[:, layout["b4"]] = common * u2 * u2
        jac[:, layout["v"]] = a * envelope * cos_t
        jac[:, layout["a"]] = 1.0 + v * envelope * cos_t
        if "r" in layout:
            jac[:, layout["r"]] = -a * v * envelope * cos_t * u2
        return -jac * weights[:, None]

    p0 = np.clip(p0, lower, upper)
    try:
        return least_squares(residuals, p0, jac=jacobian, bounds=(lower, upper), method="trf",
                             ftol=FIT_TOLERANCE, xtol=FIT_TOLERANCE, gtol=FIT_TOLERANCE, max_nfev=2000)
    except (ValueError, np.linalg.LinAlgError) as e:
        raise NumericalError(f"least-squares solver failed: {e}") from e


def fit_raised_cosine(normalized: Interferogram, window: Optional[Tuple[float, float]] = None,
                      include_c4: bool = True, fit_rolloff: bool = False,
                      phase_sign: int = 1) -> RaisedCosineFit:
    """Fit n + 1 ≈ A·(1 + V·exp(−r·u²)·cos(c0 + c2·δ² + c4·δ⁴)).

    Weighted by 1/σ when σ is present. Seeds come from the fringe ladder;
    perturbed restarts run only when the first solution is poor.

    Args:
        normalized: Output of normalize()
        window: (δ_min, δ_max) in rad/ps; defaults to ±2π·5 rad/ps
        include_c4: Fit the quartic term
        fit_rolloff: Fit the visibility roll-off r (otherwise r = 0)
        phase_sign: +1 reports the c2 >= 0 branch, −1 the mirrored branch

    Raises:
        InsufficientDataError: Fewer than 50 points and fewer than 8 fringes
        FitConvergenceError: No acceptable solution after bounded restarts

    Example:
        Noiseless n = cos(0.1 + 0.5·δ²) on [−6, 6] gives c0 = 0.1,
        c2 = 0.5, c4 = 0 and V = 1.
    """
    if window is None:
        window = (-DEFAULT_WINDOW_HALF_WIDTH, DEFAULT_WINDOW_HALF_WIDTH)
    keep = _window_mask(normalized, window)
    if normalized.sigma is not None:
        keep &= np.isfinite(normalized.sigma) & (normalized.sigma > 0)

    x = normalized.detuning[keep]
    y = normalized.values[keep] + 1.0
    if x.size == 0:
        raise InsufficientDataError("no points inside the fit window")

    c0_seed, c2_seed = _ladder_seed(normalized, keep)
    edge = float(np.max(np.abs(x)))
    fringes = abs(c2_seed) * edge * edge / (2.0 * math.pi)
    if x.size < MIN_FIT_POINTS and fringes < MIN_FIT_FRINGES:
        raise InsufficientDataError(
            f"fit window holds {x.size} points and {fringes:.1f} fringes; need {MIN_FIT_POINTS} points or {MIN_FIT_FRINGES} fringes"
        )

    weighted = normalized.sigma is not None
    weights = 1.0 / normalized.sigma[keep] if weighted else np.ones_like(x)
    u2 = (x / edge) ** 2

    names = ["c0", "b2"] + (["b4"] if include_c4 else []) + ["v", "a"] + (["r"] if fit_rolloff else [])
    layout = {name: i for i, name in enumerate(names)}
    lower = np.full(len(names), -np.inf)
    upper = np.full(len(names), np.inf)
    lower[layout["v"]], upper[layout["v"]] = 0.0, 1.05
    lower[layout["a"]] = 0.0
    if fit_rolloff:
        lower[layout["r"]] = 0.0

    hi, lo = np.percentile(y, 98), np.percentile(y, 2)
    a_seed = max(0.5 * (hi + lo), 1e-3)
    v_seed = float(np.clip((hi - lo) / max(hi + lo, 1e-12), 0.05, 1.0))

    def start(c2_factor: float, c0_shift: float) -> np.ndarray:
        p = np.zeros(len(names))
        p[layout["c0"]] = c0_seed + c0_shift
        p[layout["b2"]] = c2_seed * c2_factor * edge * edge
        p[layout["v"]] = v_seed
        p[layout["a"]] = a_seed
        if fit_rolloff:
            p[layout["r"]] = 1e-3
        return p

    dof = max(x.size - len(names), 1)
    starts = [(f, s) for s in RESTART_C0_SHIFTS for f in RESTART_C2_FACTORS]
    best = None
    messages = []
    for attempt, (factor, shift) in enumerate(starts):
        try:
            result = _fit_once(start(factor, shift), u2, y, weights, layout, lower, upper)
        except NumericalError as e:
            messages.append(str(e))
            logger.debug(f"Raised-cosine restart {attempt + 1}/{len(starts)} failed: {e}")
            continue
        messages.append(result.message)
        if result.status > 0 and (best is None or result.cost < best.cost):
            best = result
        if best is not None:
            quality = 2.0 * best.cost / dof
            acceptable = quality <= ACCEPTABLE_REDUCED_CHI2 if weighted else math.sqrt(quality) <= ACCEPTABLE_UNWEIGHTED_RMS
            if acceptable:
                break
        logger.debug(f"Raised-cosine restart {attempt + 1}/{len(starts)}: cost={result.cost:.4g}")

    if best is None:
        raise FitConvergenceError(
            f"raised-cosine fit did not converge after {len(starts)} starts",
            diagnostics={"messages": messages, "seed_c0": c0_seed, "seed_c2": c2_seed}
        )

    params = best.x
    reduced_chi2 = 2.0 * best.cost / dof
    jac = best.jac
    try:
        cov_params = np.linalg.pinv(jac.T @ jac) * reduced_chi2
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"fit covariance could not be computed: {e}") from e

    # Back to physical units: c2 = b2/edge², c4 = b4/edge⁴
    rows = [layout["c0"], layout["b2"], layout.get("b4"), layout["v"]]
    scales = [1.0, 1.0 / edge ** 2, 1.0 / edge ** 4, 1.0]
    covariance = np.zeros((4, 4))
    for i, (ri, si) in enumerate(zip(rows, scales)):
        for j, (rj, sj) in enumerate(zip(rows, scales)):
            if ri is not None and rj is not None:
                covariance[i, j] = cov_params[ri, rj] * si * sj

    c0 = float(params[layout["c0"]])
    c2 = float(params[layout["b2"]]) / edge ** 2
    c4 = float(params[layout["b4"]]) / edge ** 4 if include_c4 else 0.0

    flip = 1.0 if c2 >= 0 else -1.0
    flip *= phase_sign
    if flip < 0:
        c0, c2, c4 = -c0, -c2, -c4
        signs = np.array([-1.0, -1.0, -1.0, 1.0])
        covariance = covariance * np.outer(signs, signs)
    c0 = math.remainder(c0, 2.0 * math.pi)

    model = _cosine_model(params, u2, layout)[0]
    residual_rms = float(np.sqrt(np.mean((y - model) ** 2)))

    logger.debug(f"Raised-cosine fit: c2={c2:.6g} ps², V={params[layout['v']]:.3f}, "
                 f"reduced χ²={reduced_chi2:.3g}, {x.size} points")

    return RaisedCosineFit(
        c0=c0,
        c2=c2,
        c4=c4,
        visibility=float(params[layout["v"]]),
        amplitude=float(params[layout["a"]]),
        rolloff=float(params[layout["r"]]) if fit_rolloff else 0.0,
        covariance=covariance,
        residual_rms=residual_rms,
        reduced_chi2=float(reduced_chi2),
        window=(float(window[0]), float(window[1])),
        n_points=int(x.size),
        include_c4=include_c4,
        weighted=weighted,
        phase_sign=phase_sign,
    )


# ---------------------------------------------------------------------------
# Subtraction and conversion to D
# ---------------------------------------------------------------------------

def _fit_trace(delta_c: np.ndarray, covariance: np.ndarray, window: Tuple[float, float],
               n_points: int = 401) -> PhaseTrace:
    delta = FrequencyGrid(window[0], window[1], n_points).points()
    d2 = delta * delta
    d4 = d2 * d2
    phase = delta_c[0] * d2 + delta_c[1] * d4
    variance = d4 * covariance[0, 0] + d4 * d4 * covariance[1, 1] + 2.0 * d2 * d4 * covariance[0, 1]
    sigma = np.sqrt(np.maximum(variance, 0.0))
    sigma = np.where(sigma > 0, sigma, np.finfo(float).tiny)
    return PhaseTrace(
        detuning=delta,
        phase=phase,
        sigma=sigma,
        mask=np.ones_like(delta, dtype=bool),
        method="parametric",
        coefficients=np.asarray(delta_c, dtype=float),
        covariance=covariance,
    )


def subtract_reference(with_fut, without_fut) -> PhaseTrace:
    """Φ_FUT = Φ_with − Φ_without with the constant term zeroed.

    Accepts two RaisedCosineFit results on the same window or two
    PhaseTraces on the same detuning axis.

    Both inputs must share one sign convention, and each is reported on
    its own c2 >= 0 branch. When the true curvatures of the two arms have
    opposite signs the result is |c2_with| − |c2_without| rather than
    c2_with − c2_without; cos Φ carries no information that could reveal
    this, so the reference arm must be known to curve the same way as
    the arm with the FUT.

    Raises:
        GridMismatchError: On mixed kinds or mismatched windows/axes
    """
    if isinstance(with_fut, RaisedCosineFit) and isinstance(without_fut, RaisedCosineFit):
        if not np.allclose(with_fut.window, without_fut.window, rtol=0.0, atol=1e-9):
            raise GridMismatchError(f"fit windows differ: {with_fut.window} vs {without_fut.window}")
        if with_fut.phase_sign != without_fut.phase_sign:
            raise GridMismatchError("fits use opposite phase-sign conventions")
        delta_c = np.array([with_fut.c2 - without_fut.c2, with_fut.c4 - without_fut.c4])
        covariance = with_fut.covariance[1:3, 1:3] + without_fut.covariance[1:3, 1:3]
        return _fit_trace(delta_c, covariance, with_fut.window)

    if isinstance(with_fut, PhaseTrace) and isinstance(without_fut, PhaseTrace):
        if not _same_axis(with_fut.detuning, without_fut.detuning):
            raise GridMismatchError("phase traces are not on the same detuning axis")
        mask = with_fut.mask & without_fut.mask
        phase = with_fut.phase - without_fut.phase
        if np.any(mask):
            centre = int(np.argmin(np.where(mask, np.abs(with_fut.detuning), np.inf)))
            phase = phase - phase[centre]
        return PhaseTrace(
            detuning=with_fut.detuning,
            phase=phase,
            sigma=np.sqrt(with_fut.sigma ** 2 + without_fut.sigma ** 2),
            mask=mask,
            method="pointwise",
            asymmetry=math.hypot(with_fut.asymmetry, without_fut.asymmetry),
            asymmetry_expected=math.hypot(with_fut.asymmetry_expected, without_fut.asymmetry_expected),
        )

    raise GridMismatchError(
        f"cannot subtract {type(without_fut).__name__} from {type(with_fut).__name__}"
    )


def curvature_from_trace(trace: PhaseTrace) -> Tuple[float, float, np.ndarray]:
    """Quadratic coefficient of Φ(δ) and its σ.

    Parametric traces carry their coefficients; pointwise traces are fitted
    with a weighted linear regression Φ = a0 + a2·δ² + a4·δ⁴.

    Returns:
        (c2, σ_c2, [c2, c4]) in ps² and ps⁴
    """
    if trace.coefficients is not None and trace.covariance is not None:
        return float(trace.coefficients[0]), float(math.sqrt(max(trace.covariance[0, 0], 0.0))), trace.coefficients

    keep = trace.mask & np.isfinite(trace.sigma)
    if np.count_nonzero(keep) < 4:
        raise InsufficientDataError("too few phase points for a curvature fit")
    d2 = trace.detuning[keep] ** 2
    design = np.column_stack([np.ones_like(d2), d2, d2 * d2])
    weights = 1.0 / trace.sigma[keep]
    weighted_design = design * weights[:, None]
    target = trace.phase[keep] * weights
    try:
        solution, _, _, _ = np.linalg.lstsq(weighted_design, target, rcond=None)
        residual = target - weighted_design @ solution
        dof = max(d2.size - 3, 1)
        covariance = np.linalg.pinv(weighted_design.T @ weighted_design) * float(residual @ residual) / dof
    except (ValueError, np.linalg.LinAlgError) as e:
        raise NumericalError(f"curvature fit failed: {e}") from e
    sigma_c2 = float(math.sqrt(max(covariance[1, 1], 0.0)))
    return float(solution[1]), sigma_c2, solution[1:]


def estimate_dispersion(delta_phase: PhaseTrace, l_fut: float, lambda_deg: float) -> DispersionEstimate:
    """Convert the FUT phase curvature to k2 and D.

    k2 = −Δc2/L_km, D = −2πc·k2/λ_deg².

    Raises:
        OutOfRangeError: If l_fut <= 0 (m)
    """
    if not (math.isfinite(l_fut) and l_fut > 0):
        raise OutOfRangeError(f"fiber-under-test length must be positive, got {l_fut} m", value=l_fut)
    delta_c2, sigma_c2, _ = curvature_from_trace(delta_phase)
    length_km = l_fut * 1e-3
    k2 = -delta_c2 / length_km
    k2_sigma = sigma_c2 / length_km
    d = float(d_from_k2(k2, lambda_deg))
    d_sigma = TWO_PI_C * k2_sigma / (lambda_deg * lambda_deg)
    return DispersionEstimate(
        lambda_deg=lambda_deg,
        k2=k2,
        k2_sigma=k2_sigma,
        d=d,
        d_sigma=d_sigma,
        l_fut=l_fut,
        method=delta_phase.method,
        delta_c2=delta_c2,
        delta_c2_sigma=sigma_c2,
    )


def slope_from_two(first: DispersionEstimate, second: DispersionEstimate) -> SlopeEstimate:
    """(D1 − D2)/(λ1 − λ2) with σ from the quadrature sum of the two σ_D.

    Raises:
        OutOfRangeError: If both estimates share one wavelength
    """
    span = first.lambda_deg - second.lambda_deg
    if span == 0:
        raise OutOfRangeError(f"both estimates are at {first.lambda_deg} nm; slope undefined")
    sigma1 = first.d_sigma_bootstrap or first.d_sigma
    sigma2 = second.d_sigma_bootstrap or second.d_sigma
    return SlopeEstimate(
        slope=(first.d - second.d) / span,
        slope_sigma=math.sqrt(sigma1 ** 2 + sigma2 ** 2) / abs(span),
        lambda_pair=(first.lambda_deg, second.lambda_deg),
    )


def min_measurable_dl(bandwidth: float, phase_threshold: float = DEFAULT_PHASE_THRESHOLD,
                      wavelength_nm: float = 1560.4) -> float:
    """Smallest dispersion-length product (ps/nm) resolvable over a bandwidth.

    The FUT must add at least ``phase_threshold`` rad at the edge of the
    full bandwidth B (rad/ps): DL_min = 2πc·threshold/(λ²·(B/2)²).
    10 THz, 2.5 rad and 1560.4 nm give about 0.002 ps/nm.
    """
    if not bandwidth > 0:
        raise OutOfRangeError(f"bandwidth must be positive, got {bandwidth}")
    half = 0.5 * bandwidth
    return TWO_PI_C * phase_threshold / (wavelength_nm * wavelength_nm * half * half)


# ---------------------------------------------------------------------------
# Orchestration
# ---------------------------------------------------------------------------

def _analysis_view(spectrum: Interferogram, half_width: float, spacing: Optional[float]) -> Interferogram:
    """Restrict a spectrum to ±half_width on a symmetric uniform axis."""
    grid = spectrum.grid
    if grid is not None and grid.is_symmetric and spacing is None:
        keep = np.abs(spectrum.detuning) <= half_width * (1.0 + 1e-12)
        return spectrum.select(keep)
    step = spacing if spacing is not None else float(np.median(np.diff(spectrum.detuning)))
    n_half = int(math.floor(half_width / step))
    return resample(spectrum, FrequencyGrid.symmetric(n_half * step, 2 * n_half + 1))


def _analysis_spacing(*spectra: Interferogram) -> Optional[float]:
    uniform = all(s.grid is not None and s.grid.is_symmetric for s in spectra)
    aligned = all(_same_axis(spectra[0].detuning, s.detuning) for s in spectra[1:])
    if uniform and aligned:
        return None
    measured = [s for s in spectra if s.grid is None] or list(spectra)
    return float(max(np.median(np.diff(s.detuning)) for s in measured))


def run_extraction(with_fut: Interferogram, without_fut: Interferogram,
                   env1: Interferogram, env2: Interferogram,
                   l_fut: float, lambda_deg: Optional[float] = None,
                   options: Optional[ExtractionOptions] = None) -> ExtractionResult:
    """Full inverse pipeline for one pump wavelength.

    With l_fut == 0 the result carries the phase difference but no estimate,
    which serves as a null check.
    """
    options = options or ExtractionOptions()
    if lambda_deg is None:
        lambda_deg = with_fut.lambda_deg
    if l_fut < 0:
        raise OutOfRangeError(f"fiber-under-test length must be >= 0, got {l_fut} m", value=l_fut)

    half = options.window_half_width
    spacing = _analysis_spacing(with_fut, without_fut, env1, env2)
    views = [_analysis_view(s, half, spacing) for s in (with_fut, without_fut, env1, env2)]
    with_view, without_view, env1_view, env2_view = views

    norm_with = normalize(with_view, env1_view, env2_view, floor=options.envelope_floor)
    norm_without = normalize(without_view, env1_view, env2_view, floor=options.envelope_floor)
    if not norm_with.is_symmetric():
        raise GridMismatchError("analysis grid is not symmetric about zero")

    window = (-half, half)
    result = ExtractionResult(delta_trace=None, estimate=None)
    fit_rolloff = options.fit_rolloff
    if fit_rolloff is None:
        fit_rolloff = norm_with.sigma is not None

    if options.method == "parametric":
        result.fit_with = fit_raised_cosine(norm_with, window, options.include_c4, fit_rolloff, options.phase_sign)
        result.fit_without = fit_raised_cosine(norm_without, window, options.include_c4, fit_rolloff, options.phase_sign)
        result.delta_trace = subtract_reference(result.fit_with, result.fit_without)
        with_odd, with_odd_expected = asymmetry_metric(norm_with, window)
        without_odd, without_odd_expected = asymmetry_metric(norm_without, window)
        result.diagnostics.update({
            "fringe_asymmetry_with_fut": with_odd,
            "fringe_asymmetry_with_fut_expected": with_odd_expected,
            "fringe_asymmetry_without_fut": without_odd,
            "fringe_asymmetry_without_fut_expected": without_odd_expected,
            "visibility": result.fit_without.visibility,
            "visibility_with_fut": result.fit_with.visibility,
            "rolloff_with_fut": result.fit_with.rolloff,
            "residual_rms_with": result.fit_with.residual_rms,
            "residual_rms_without": result.fit_without.residual_rms,
            "reduced_chi2_with": result.fit_with.reduced_chi2,
            "reduced_chi2_without": result.fit_without.reduced_chi2,
        })
    else:
        result.trace_with = extract_phase_pointwise(norm_with, window)
        result.trace_without = extract_phase_pointwise(norm_without, window)
        result.delta_trace = subtract_reference(result.trace_with, result.trace_without)
        result.diagnostics.update({
            "phase_asymmetry": result.delta_trace.asymmetry,
            "phase_asymmetry_expected": result.delta_trace.asymmetry_expected,
        })

    result.diagnostics.update({
        "clip_fraction": max(norm_with.metadata["clip_fraction"], norm_without.metadata["clip_fraction"]),
        "analysis_points": int(norm_with.detuning.size),
        "window_half_width_radps": half,
    })

    delta_c2, sigma_c2, _ = curvature_from_trace(result.delta_trace)
    result.diagnostics["delta_c2"] = delta_c2
    result.diagnostics["delta_c2_sigma"] = sigma_c2
    if abs(delta_c2) <= 2.0 * sigma_c2 or delta_c2 == 0.0:
        message = (f"with-FUT and without-FUT phases are indistinguishable at {lambda_deg:.1f} nm "
                   f"(Δc2 = {delta_c2:.3g} ± {sigma_c2:.2g} ps²)")
        logger.warning(message)
        result.warnings.append(message)
    if result.diagnostics["clip_fraction"] > HIGH_CLIP_FRACTION:
        message = f"{result.diagnostics['clip_fraction']:.1%} of normalized points clipped"
        logger.warning(message)
        result.warnings.append(message)

    if l_fut > 0:
        result.estimate = estimate_dispersion(result.delta_trace, l_fut, lambda_deg)
        logger.info(f"D({lambda_deg:.1f} nm) = {result.estimate.formatted()} ps/(nm·km)")
    return result


def _poisson_resample(spectrum: Interferogram, rng: np.random.Generator) -> Interferogram:
    if spectrum.counts is not None:
        counts = np.asarray(spectrum.counts, dtype=float)
        drawn = rng.poisson(np.maximum(counts, 0.0))
        ratio = np.where(counts > 0, drawn / np.where(counts > 0, counts, 1.0), 1.0)
        values = spectrum.values * ratio
    elif spectrum.sigma is not None:
        values = np.maximum(spectrum.values + rng.normal(0.0, 1.0, spectrum.values.size) * spectrum.sigma, 0.0)
    else:
        return spectrum
    return dataclasses.replace(spectrum, values=values, metadata=dict(spectrum.metadata))


def bootstrap_uncertainty(with_fut: Interferogram, without_fut: Interferogram,
                          env1: Interferogram, env2: Interferogram,
                          l_fut: float, lambda_deg: Optional[float] = None,
                          options: Optional[ExtractionOptions] = None,
                          n_resamples: int = 200, seed: int = 0, workers: int = 1) -> DispersionEstimate:
    """Re-run the pipeline on Poisson resamples of the measured counts.

    Resample i uses SeedSequence(seed, spawn_key=(i,)); results are merged in
    index order so the spread does not depend on ``workers``.

    Returns:
        The base estimate with d_sigma_bootstrap set to the spread of D

    Raises:
        OutOfRangeError: If n_resamples < 50
        BootstrapError: If more than 20 % of re-fits fail
    """
    if n_resamples < MIN_BOOTSTRAP_RESAMPLES:
        raise OutOfRangeError(f"n_resamples must be >= {MIN_BOOTSTRAP_RESAMPLES}, got {n_resamples}")
    base = run_extraction(with_fut, without_fut, env1, env2, l_fut, lambda_deg, options)
    if base.estimate is None:
        raise OutOfRangeError("bootstrap needs a positive fiber-under-test length")

    def one(index: int) -> Optional[float]:
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))
        try:
            resampled = run_extraction(_poisson_resample(with_fut, rng), _poisson_resample(without_fut, rng),
                                       env1, env2, l_fut, lambda_deg, options)
        except (DispersionToolError, ValueError, np.linalg.LinAlgError) as e:
            logger.debug(f"Bootstrap resample {index} failed: {e}")
            return None
        return resampled.estimate.d

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        values = list(pool.map(one, range(n_resamples)))

    succeeded = np.array([v for v in values if v is not None])
    failures = n_resamples - succeeded.size
    if failures > MAX_BOOTSTRAP_FAILURE_SHARE * n_resamples:
        raise BootstrapError(f"{failures} of {n_resamples} bootstrap re-fits failed",
                             failures=failures, attempts=n_resamples)
    if failures:
        logger.warning(f"{failures} of {n_resamples} bootstrap re-fits failed")

    spread = float(np.std(succeeded, ddof=1)) if succeeded.size > 1 else 0.0
    return dataclasses.replace(base.estimate, d_sigma_bootstrap=spread, n_bootstrap=int(succeeded.size))
