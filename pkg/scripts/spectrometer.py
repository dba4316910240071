#!/usr/bin/env python3
"""
Time-of-flight fiber spectrometer with photon-counting noise.

Signal and idler travel through a dispersive medium of dispersion-length
product DL (ps/nm) before detection. Their arrival-time difference maps
frequency to time:

    Δt(λ_s) = DL·(λ_s − λ_i),   λ_i = λ_s·λ_p/(λ_s − λ_p)

which simplifies to DL·λ_s·(λ_s − 2λ_p)/(λ_s − λ_p). In the detuning
variable this is the exactly odd function

    Δt(δ) = −4πc·DL·δ/(ω_deg² − δ²)

Events are drawn from a spectrum by inverse-CDF sampling, smeared with
Gaussian detector jitter, mixed with uniform dark coincidences and
histogrammed. The histogram is mapped back to a spectral density with the
Jacobian of the delay map.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from dispersion_models import TWO_PI_C, degeneracy_omega, omega_to_wavelength, wavelength_to_omega
from exceptions import InsufficientDataError, OutOfRangeError
from synthesis import Interferogram

logger = logging.getLogger(__name__)

FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))
JITTER_MODES = ("effective", "per_detector")
DEFAULT_SHARD_SIZE = 1 << 18
JITTER_PAD_SIGMAS = 5.0
INVERSE_XTOL = 1e-15


@dataclass(frozen=True)
class SpectrometerConfig:
    """Time-of-flight spectrometer settings.

    Attributes:
        medium_dl: Dispersion-length product of the medium (ps/nm)
        jitter_fwhm: Timing jitter FWHM (ps). In "effective" mode this is the
            combined jitter of the coincidence measurement; in
            "per_detector" mode it applies to each detector and the two
            add in quadrature.
        bin_width: Histogram bin width (ps)
        pair_count: Expected number of detected pairs (Poisson mean)
        dark_fraction: Fraction of events that are uniform dark coincidences
        rng_seed: Seed for all random draws
        jitter_mode: "effective" or "per_detector"
        window_nm: Half-width of the calibrated window about λ_deg (nm)
        workers: Threads used for sharded sampling
        shard_size: Events per shard
    """
    medium_dl: float = 340.0
    jitter_fwhm: float = 256.0
    bin_width: float = 16.0
    pair_count: float = 1e6
    dark_fraction: float = 0.0
    rng_seed: int = 0
    jitter_mode: str = "effective"
    window_nm: float = 150.0
    workers: int = 1
    shard_size: int = DEFAULT_SHARD_SIZE

    def __post_init__(self):
        if not math.isfinite(self.medium_dl) or self.medium_dl == 0:
            raise OutOfRangeError(f"medium_dl must be finite and non-zero, got {self.medium_dl}")
        if not (math.isfinite(self.jitter_fwhm) and self.jitter_fwhm >= 0):
            raise OutOfRangeError(f"jitter_fwhm must be >= 0 ps, got {self.jitter_fwhm}")
        if not (math.isfinite(self.bin_width) and self.bin_width > 0):
            raise OutOfRangeError(f"bin_width must be positive, got {self.bin_width}")
        if not (math.isfinite(self.pair_count) and self.pair_count > 0):
            raise OutOfRangeError(f"pair_count must be positive, got {self.pair_count}")
        if not 0.0 <= self.dark_fraction < 1.0:
            raise OutOfRangeError(f"dark_fraction must be in [0, 1), got {self.dark_fraction}")
        if self.jitter_mode not in JITTER_MODES:
            raise OutOfRangeError(f"jitter_mode must be one of {JITTER_MODES}, got '{self.jitter_mode}'")
        if not (math.isfinite(self.window_nm) and self.window_nm > 0):
            raise OutOfRangeError(f"window_nm must be positive, got {self.window_nm}")
        if self.workers < 1 or self.shard_size < 1:
            raise OutOfRangeError("workers and shard_size must be >= 1")

    @property
    def combined_jitter(self) -> float:
        """Jitter FWHM (ps) of the arrival-time difference."""
        if self.jitter_mode == "per_detector":
            return math.sqrt(2.0) * self.jitter_fwhm
        return self.jitter_fwhm


@dataclass
class TimeDelayHistogram:
    """Coincidence counts versus arrival-time difference."""
    edges: np.ndarray
    counts: np.ndarray
    config: SpectrometerConfig
    total_counts: int
    lambda_pump: float
    n_dark: int = 0

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=float)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.edges.ndim != 1 or self.edges.size != self.counts.size + 1:
            raise OutOfRangeError("histogram needs len(edges) == len(counts) + 1")
        if np.any(np.diff(self.edges) <= 0):
            raise OutOfRangeError("histogram edges must be strictly increasing")
        if np.any(self.counts < 0):
            raise OutOfRangeError("histogram counts must be non-negative")
        if int(self.counts.sum()) != int(self.total_counts):
            raise OutOfRangeError(
                f"histogram total {self.total_counts} does not match the sum of counts {int(self.counts.sum())}"
            )

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])


def derive_seed(master: int, *keys: int) -> int:
    """Independent 63-bit sub-seed for (master, keys...)."""
    sequence = np.random.SeedSequence(int(master), spawn_key=tuple(int(k) for k in keys))
    return int(sequence.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def _calibrated_detuning_range(config: SpectrometerConfig, omega_deg: float) -> Tuple[float, float]:
    lambda_deg = omega_to_wavelength(omega_deg)
    if config.window_nm >= lambda_deg:
        raise OutOfRangeError(f"window_nm {config.window_nm} must be smaller than λ_deg {lambda_deg:.3f}")
    low = wavelength_to_omega(lambda_deg + config.window_nm) - omega_deg
    high = wavelength_to_omega(lambda_deg - config.window_nm) - omega_deg
    return low, high


def _delay(config: SpectrometerConfig, delta: np.ndarray, omega_deg: float) -> np.ndarray:
    return -2.0 * TWO_PI_C * config.medium_dl * delta / (omega_deg * omega_deg - delta * delta)


def delay_jacobian(config: SpectrometerConfig, delta: np.ndarray, omega_deg: float) -> np.ndarray:
    """dΔt/dδ in ps per rad/ps."""
    delta = np.asarray(delta, dtype=float)
    w2 = omega_deg * omega_deg
    d2 = delta * delta
    return -2.0 * TWO_PI_C * config.medium_dl * (w2 + d2) / ((w2 - d2) ** 2)


def delay_from_detuning(config: SpectrometerConfig, delta: np.ndarray, omega_deg: float) -> np.ndarray:
    """Arrival-time difference (ps) at detuning δ; odd in δ.

    Raises:
        OutOfRangeError: If δ lies outside the calibrated window
    """
    delta_arr = np.asarray(delta, dtype=float)
    low, high = _calibrated_detuning_range(config, omega_deg)
    if np.any(delta_arr < low) or np.any(delta_arr > high):
        raise OutOfRangeError(
            f"detuning outside the calibrated ±{config.window_nm} nm window",
            valid_range=(low, high)
        )
    result = _delay(config, delta_arr, omega_deg)
    return float(result) if np.ndim(delta) == 0 else result


def delay_map(config: SpectrometerConfig, lambda_signal: np.ndarray, lambda_pump: float) -> np.ndarray:
    """Δt(λ_s) = DL·λ_s·(λ_s − 2λ_p)/(λ_s − λ_p) in ps.

    Zero at degeneracy, positive above it for DL > 0.

    Raises:
        OutOfRangeError: If λ_s is outside λ_deg ± window_nm

    Example:
        >>> round(delay_map(SpectrometerConfig(), 1561.4, 780.2), 1)
        679.6
    """
    lam = np.asarray(lambda_signal, dtype=float)
    lambda_deg = 2.0 * lambda_pump
    if not np.all(np.isfinite(lam)) or np.any(np.abs(lam - lambda_deg) > config.window_nm):
        raise OutOfRangeError(
            f"signal wavelength outside calibrated window {lambda_deg:.2f} ± {config.window_nm} nm",
            valid_range=(lambda_deg - config.window_nm, lambda_deg + config.window_nm)
        )
    result = config.medium_dl * lam * (lam - lambda_deg) / (lam - lambda_pump)
    return float(result) if np.ndim(lambda_signal) == 0 else result


def delay_range(config: SpectrometerConfig, omega_deg: float) -> Tuple[float, float]:
    """Smallest and largest delay (ps) inside the calibrated window."""
    low, high = _calibrated_detuning_range(config, omega_deg)
    ends = _delay(config, np.array([low, high]), omega_deg)
    return float(ends.min()), float(ends.max())


def detuning_from_delay(config: SpectrometerConfig, delay: np.ndarray, omega_deg: float) -> np.ndarray:
    """Invert the delay map for detuning δ (rad/ps) by Brent bracketing."""
    delays = np.atleast_1d(np.asarray(delay, dtype=float))
    low, high = _calibrated_detuning_range(config, omega_deg)
    t_min, t_max = delay_range(config, omega_deg)
    if np.any(delays < t_min) or np.any(delays > t_max) or not np.all(np.isfinite(delays)):
        raise OutOfRangeError(
            f"delay outside the calibrated range [{t_min:.1f}, {t_max:.1f}] ps",
            valid_range=(t_min, t_max)
        )

    k = -2.0 * TWO_PI_C * config.medium_dl
    w2 = omega_deg * omega_deg
    result = np.empty_like(delays)
    for i, target in enumerate(delays):
        if target == 0.0:
            result[i] = 0.0
            continue
        result[i] = brentq(lambda d: k * d / (w2 - d * d) - target, low, high,
                           xtol=INVERSE_XTOL, maxiter=200)
    return float(result[0]) if np.ndim(delay) == 0 else result


def inverse_delay_map(config: SpectrometerConfig, delay: np.ndarray, lambda_pump: float) -> np.ndarray:
    """Signal wavelength (nm) producing arrival-time difference ``delay`` (ps).

    Raises:
        OutOfRangeError: If the delay has no preimage in the calibrated window
    """
    omega_deg = degeneracy_omega(lambda_pump)
    delta = np.asarray(detuning_from_delay(config, delay, omega_deg))
    result = omega_to_wavelength(omega_deg + delta)
    return float(result) if np.ndim(delay) == 0 else result


def resolution(config: SpectrometerConfig) -> float:
    """Spectral resolution (nm): max(jitter, bin width)/|DL|. 256 ps at 340 ps/nm gives 0.753 nm."""
    return max(config.combined_jitter, config.bin_width) / abs(config.medium_dl)


def _inverse_cdf(spectrum: Interferogram) -> Tuple[np.ndarray, np.ndarray]:
    delta = spectrum.detuning
    values = spectrum.values
    if delta.size == 1:
        if values[0] <= 0:
            raise InsufficientDataError("spectrum has zero total weight")
        return np.array([0.0, 1.0]), np.array([delta[0], delta[0]])
    cell_mass = 0.5 * (values[:-1] + values[1:]) * np.diff(delta)
    total = float(cell_mass.sum())
    if not total > 0:
        raise InsufficientDataError("spectrum has zero total weight")
    cdf = np.concatenate(([0.0], np.cumsum(cell_mass))) / total
    cdf[-1] = 1.0
    return cdf, delta


def _sample_shard(index: int, size: int, cdf: np.ndarray, nodes: np.ndarray,
                  config: SpectrometerConfig, omega_deg: float,
                  n_bins: int, t_range: Tuple[float, float]) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence(config.rng_seed, spawn_key=(index,)))
    delta = np.interp(rng.random(size), cdf, nodes)
    times = _delay(config, delta, omega_deg)
    sigma = config.combined_jitter * FWHM_TO_SIGMA
    if sigma > 0:
        times = times + rng.normal(0.0, sigma, size)
    counts, _ = np.histogram(times, bins=n_bins, range=t_range)
    return counts


def sample_events(spectrum: Interferogram, config: SpectrometerConfig,
                  lambda_pump: Optional[float] = None) -> TimeDelayHistogram:
    """Draw photon pairs from ``spectrum`` and histogram their delays.

    The total number of detected pairs is Poisson distributed with mean
    ``pair_count``; a binomial share of them are dark coincidences spread
    uniformly over the histogram window. Signal events are drawn in
    fixed-size shards, each with its own sub-seed, so the histogram is the
    same for any number of workers.

    Args:
        spectrum: Non-negative spectrum on a strictly increasing detuning axis
        config: Spectrometer settings (seed included)
        lambda_pump: Pump wavelength (nm); defaults to the spectrum's degeneracy

    Returns:
        TimeDelayHistogram with Σ counts == total_counts

    Raises:
        InsufficientDataError: If the spectrum has zero total weight
        OutOfRangeError: If the spectrum reaches past the calibrated window
    """
    if spectrum.kind != "spectrum":
        raise OutOfRangeError("only non-negative spectra can be sampled")
    if lambda_pump is None:
        lambda_pump = 0.5 * spectrum.lambda_deg
    omega_deg = degeneracy_omega(lambda_pump)

    low, high = _calibrated_detuning_range(config, omega_deg)
    if spectrum.detuning[0] < low or spectrum.detuning[-1] > high:
        raise OutOfRangeError(
            f"spectrum spans {spectrum.wavelength.min():.1f}-{spectrum.wavelength.max():.1f} nm, "
            f"outside the calibrated window {2 * lambda_pump:.1f} ± {config.window_nm} nm"
        )

    cdf, nodes = _inverse_cdf(spectrum)

    sigma_t = config.combined_jitter * FWHM_TO_SIGMA
    extent = float(np.max(np.abs(_delay(config, nodes[[0, -1]], omega_deg))))
    n_half = int(math.ceil((extent + JITTER_PAD_SIGMAS * sigma_t + config.bin_width) / config.bin_width))
    edges = config.bin_width * np.arange(-n_half, n_half + 1, dtype=float)
    t_range = (float(edges[0]), float(edges[-1]))
    n_bins = 2 * n_half

    master = np.random.default_rng(config.rng_seed)
    n_total = int(master.poisson(config.pair_count))
    n_dark = int(master.binomial(n_total, config.dark_fraction)) if config.dark_fraction > 0 else 0
    n_signal = n_total - n_dark

    shard_sizes: List[int] = [config.shard_size] * (n_signal // config.shard_size)
    if n_signal % config.shard_size:
        shard_sizes.append(n_signal % config.shard_size)

    logger.debug(f"Sampling {n_signal} signal + {n_dark} dark events in {len(shard_sizes)} shards "
                 f"({config.workers} workers, {n_bins} bins of {config.bin_width} ps)")

    counts = np.zeros(n_bins, dtype=np.int64)
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        shard_counts = pool.map(
            lambda item: _sample_shard(item[0], item[1], cdf, nodes, config, omega_deg, n_bins, t_range),
            enumerate(shard_sizes)
        )
        for partial in shard_counts:
            counts += partial

    if n_dark:
        dark_times = master.uniform(t_range[0], t_range[1], n_dark)
        dark_counts, _ = np.histogram(dark_times, bins=n_bins, range=t_range)
        counts += dark_counts

    total = int(counts.sum())
    if total < n_total:
        logger.debug(f"{n_total - total} events fell outside the histogram window")

    return TimeDelayHistogram(
        edges=edges,
        counts=counts,
        config=config,
        total_counts=total,
        lambda_pump=lambda_pump,
        n_dark=n_dark,
    )


def histogram_to_spectrum(histogram: TimeDelayHistogram, lambda_pump: Optional[float] = None,
                          subtract_background: bool = True) -> Interferogram:
    """Map a delay histogram back to a unit-area spectral density in δ.

    density(δ) = counts·|dΔt/dδ|/(bin_width·N), with Poisson σ taken from
    max(counts, 1). The expected uniform dark level is subtracted first when
    the configuration has a non-zero dark fraction.

    Raises:
        InsufficientDataError: If the histogram holds no counts
    """
    if histogram.total_counts <= 0:
        raise InsufficientDataError("histogram is empty")
    if lambda_pump is None:
        lambda_pump = histogram.lambda_pump
    config = histogram.config
    omega_deg = degeneracy_omega(lambda_pump)

    centers = histogram.centers
    t_min, t_max = delay_range(config, omega_deg)
    keep = (centers >= t_min) & (centers <= t_max)
    if not np.any(keep):
        raise OutOfRangeError("no histogram bins fall inside the calibrated window")
    if not np.all(keep):
        logger.debug(f"Dropping {int((~keep).sum())} bins outside the calibrated window")

    raw = histogram.counts[keep].astype(float)
    background = 0.0
    normalization = float(histogram.total_counts)
    if subtract_background and config.dark_fraction > 0:
        background = histogram.total_counts * config.dark_fraction / histogram.counts.size
        normalization *= 1.0 - config.dark_fraction
    signal = np.maximum(raw - background, 0.0)

    delta = np.asarray(detuning_from_delay(config, centers[keep], omega_deg))
    jacobian = np.abs(delay_jacobian(config, delta, omega_deg))
    bin_widths = np.diff(histogram.edges)[keep]
    scale = jacobian / (bin_widths * normalization)

    order = np.argsort(delta)
    return Interferogram(
        detuning=delta[order],
        values=(signal * scale)[order],
        omega_deg=omega_deg,
        sigma=(np.sqrt(np.maximum(raw, 1.0)) * scale)[order],
        counts=histogram.counts[keep][order],
        kind="spectrum",
        metadata={
            "source": "spectrometer",
            "normalization": "unit_area",
            "pump_wavelength_nm": lambda_pump,
            "lambda_deg_nm": 2.0 * lambda_pump,
            "total_counts": int(histogram.total_counts),
            "background_per_bin": background,
            "bin_width_ps": config.bin_width,
            "jitter_fwhm_ps": config.combined_jitter,
            "medium_dl_ps_per_nm": config.medium_dl,
        },
    )
