#!/usr/bin/env python3
"""
Run configuration and report schemas.

Configuration files are JSON documents validated by pydantic models that
reject unknown keys. Units in the file: wavelengths nm, envelope widths and
windows THz, lengths m, linewidth MHz, times ps.

Configuration precedence:
    1. CLI flags (--seed, --out) - highest priority
    2. Configuration file
    3. Model defaults - lowest priority
"""

import hashlib
import json
import logging
import math
from pathlib import Path
from typing import Annotated, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from dispersion_models import FiberSegment, SpecSheet, TabulatedD, TaylorBeta, degeneracy_omega
from exceptions import ConfigurationError
from extraction import ExtractionOptions
from spectrometer import SpectrometerConfig
from synthesis import FrequencyGrid, InterferometerSetup, SpdcEnvelope

logger = logging.getLogger(__name__)

TOOL_VERSION = "1.0.0"
DEFAULT_CONFIG_PATH = Path(__file__).parent.parent / "configs" / "smf28_two_pump.json"


def thz_to_radps(value_thz: float) -> float:
    """Angular detuning (rad/ps) of a frequency offset in THz."""
    return 2.0 * math.pi * value_thz


class StrictModel(BaseModel):
    '''Base for every configuration block: unknown keys are errors.'''
    model_config = ConfigDict(
        extra="forbid",
        str_strip_whitespace=True,
        validate_assignment=True
    )


class SpecSheetConfig(StrictModel):
    kind: Literal["spec_sheet"] = "spec_sheet"
    lambda0_nm: float = Field(..., gt=0, description="Zero-dispersion wavelength (nm)")
    s0: float = Field(..., gt=0, description="Zero-dispersion slope (ps/(nm²·km))")

    def build(self) -> SpecSheet:
        return SpecSheet(self.lambda0_nm, self.s0)


class TaylorBetaConfig(StrictModel):
    kind: Literal["taylor_beta"] = "taylor_beta"
    omega_ref_radps: float = Field(..., gt=0)
    k2: float = Field(..., description="ps²/km")
    k3: float = Field(default=0.0, description="ps³/km")
    k4: float = Field(default=0.0, description="ps⁴/km")

    def build(self) -> TaylorBeta:
        return TaylorBeta(self.omega_ref_radps, self.k2, self.k3, self.k4)


class TabulatedConfig(StrictModel):
    kind: Literal["tabulated"] = "tabulated"
    points: List[Tuple[float, float]] = Field(..., min_length=2, description="(wavelength nm, D) pairs")

    @field_validator("points")
    @classmethod
    def increasing(cls, v):
        wavelengths = [p[0] for p in v]
        if any(b <= a for a, b in zip(wavelengths, wavelengths[1:])):
            raise ValueError("wavelengths must be strictly increasing")
        return v

    def build(self) -> TabulatedD:
        return TabulatedD(tuple(p[0] for p in self.points), tuple(p[1] for p in self.points))


DispersionModelConfig = Annotated[
    Union[SpecSheetConfig, TaylorBetaConfig, TabulatedConfig],
    Field(discriminator="kind")
]


class FiberSegmentConfig(StrictModel):
    model: DispersionModelConfig
    length_m: float = Field(..., ge=0, description="Segment length (m)")
    label: str = ""

    def build(self) -> FiberSegment:
        return FiberSegment(self.model.build(), self.length_m, self.label)


class EnvelopeConfig(StrictModel):
    fwhm_thz: float = Field(..., gt=0, description="Envelope FWHM (THz)")
    shape: Literal["gaussian", "sinc2"] = "gaussian"
    peak: float = Field(default=1.0, gt=0)

    def build(self, omega_deg: float) -> SpdcEnvelope:
        return SpdcEnvelope(omega_deg, thz_to_radps(self.fwhm_thz), self.shape, self.peak)


class GridConfig(StrictModel):
    half_width_thz: float = Field(default=8.0, gt=0)
    n_points: int = Field(default=16001, ge=2)

    def build(self) -> FrequencyGrid:
        return FrequencyGrid.symmetric(thz_to_radps(self.half_width_thz), self.n_points)


class InterferometerConfig(StrictModel):
    source1: EnvelopeConfig
    source2: EnvelopeConfig
    internal_segments: List[FiberSegmentConfig] = Field(default_factory=list)
    internal_poly: List[float] = Field(default_factory=list, description="Coefficients of δ⁰, δ², δ⁴, ...")
    fut: Optional[FiberSegmentConfig] = None
    pump_linewidth_mhz: float = Field(default=0.1, gt=0)
    path_mismatch_m: float = Field(default=0.03, ge=0)
    group_index: float = Field(default=1.468, gt=0)
    grid: GridConfig = Field(default_factory=GridConfig)


class SpectrometerSettings(StrictModel):
    medium_dl_ps_per_nm: float = 340.0
    jitter_fwhm_ps: float = Field(default=256.0, ge=0)
    jitter_mode: Literal["effective", "per_detector"] = "effective"
    bin_width_ps: float = Field(default=16.0, gt=0)
    pair_count: float = Field(default=1e6, gt=0)
    dark_fraction: float = Field(default=0.0, ge=0, lt=1)
    window_nm: float = Field(default=150.0, gt=0)
    workers: int = Field(default=1, ge=1)

    @field_validator("medium_dl_ps_per_nm")
    @classmethod
    def nonzero(cls, v):
        if v == 0:
            raise ValueError("must be non-zero")
        return v

    def build(self, seed: int) -> SpectrometerConfig:
        return SpectrometerConfig(
            medium_dl=self.medium_dl_ps_per_nm,
            jitter_fwhm=self.jitter_fwhm_ps,
            bin_width=self.bin_width_ps,
            pair_count=self.pair_count,
            dark_fraction=self.dark_fraction,
            rng_seed=seed,
            jitter_mode=self.jitter_mode,
            window_nm=self.window_nm,
            workers=self.workers,
        )


class ExtractionSettings(StrictModel):
    window_half_width_thz: float = Field(default=5.0, gt=0)
    method: Literal["parametric", "pointwise"] = "parametric"
    include_c4: bool = True
    fit_rolloff: Optional[bool] = None
    envelope_floor: float = Field(default=0.05, gt=0, lt=1)
    phase_sign: Literal[1, -1] = 1
    bootstrap_resamples: int = Field(default=0, ge=0, description="0 disables the bootstrap")
    workers: int = Field(default=1, ge=1)

    @field_validator("bootstrap_resamples")
    @classmethod
    def enough_resamples(cls, v):
        if 0 < v < 50:
            raise ValueError("bootstrap needs at least 50 resamples (or 0 to disable)")
        return v

    def build(self) -> ExtractionOptions:
        return ExtractionOptions(
            window_half_width=thz_to_radps(self.window_half_width_thz),
            include_c4=self.include_c4,
            fit_rolloff=self.fit_rolloff,
            envelope_floor=self.envelope_floor,
            method=self.method,
            phase_sign=self.phase_sign,
        )


class AcceptanceSettings(StrictModel):
    d_relative_tolerance: float = Field(default=0.01, gt=0)
    slope_sigmas: float = Field(default=3.0, gt=0)
    null_sigmas: float = Field(default=3.0, gt=0)


class RunConfig(StrictModel):
    '''Top-level run configuration.'''
    experiment: str = Field(default="run", min_length=1, pattern=r"^[A-Za-z0-9_.-]+$")
    pump_wavelengths_nm: List[float] = Field(..., min_length=1, max_length=2)
    interferometer: InterferometerConfig
    spectrometer: SpectrometerSettings = Field(default_factory=SpectrometerSettings)
    extraction: ExtractionSettings = Field(default_factory=ExtractionSettings)
    acceptance: AcceptanceSettings = Field(default_factory=AcceptanceSettings)
    seed: int = Field(default=0, ge=0)
    output_dir: str = "out"

    @field_validator("pump_wavelengths_nm")
    @classmethod
    def positive_pumps(cls, v):
        if any(not (p > 0) for p in v):
            raise ValueError("pump wavelengths must be positive")
        if len(set(v)) != len(v):
            raise ValueError("pump wavelengths must be distinct")
        return v

    def build_setup(self, pump_wavelength_nm: float) -> InterferometerSetup:
        omega_deg = degeneracy_omega(pump_wavelength_nm)
        block = self.interferometer
        return InterferometerSetup(
            pump_wavelength=pump_wavelength_nm,
            source1=block.source1.build(omega_deg),
            source2=block.source2.build(omega_deg),
            internal_segments=tuple(s.build() for s in block.internal_segments),
            internal_poly=tuple(block.internal_poly),
            fut=block.fut.build() if block.fut is not None else None,
            pump_linewidth_mhz=block.pump_linewidth_mhz,
            path_mismatch_m=block.path_mismatch_m,
            group_index=block.group_index,
        )

    def build_grid(self) -> FrequencyGrid:
        return self.interferometer.grid.build()

    def config_hash(self) -> str:
        """Hash of everything that affects results; the output location is excluded."""
        canonical = json.dumps(self.model_dump(mode="json", exclude={"output_dir"}), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def _format_validation_error(error: ValidationError) -> Tuple[str, Optional[str]]:
    lines = []
    first_key = None
    for item in error.errors():
        key = ".".join(str(part) for part in item["loc"])
        first_key = first_key or key
        lines.append(f"{key}: {item['msg']}")
    return "; ".join(lines), first_key


def parse_configuration(data: Dict) -> RunConfig:
    """Validate an already-decoded configuration mapping."""
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        message, key = _format_validation_error(e)
        raise ConfigurationError(f"invalid configuration: {message}", key=key) from e


def load_configuration(config_path: Optional[Path] = None) -> RunConfig:
    """
    Load and validate a JSON run configuration.

    Args:
        config_path: Path to the configuration file (defaults to the bundled
            two-pump SMF-28 configuration)

    Returns:
        Validated RunConfig

    Raises:
        ConfigurationError: Missing file, JSON syntax error (with line
            number) or schema violation (with the dotted key path)
    """
    if config_path is None:
        config_path = DEFAULT_CONFIG_PATH
    config_path = Path(config_path)
    if not config_path.exists():
        raise ConfigurationError(f"configuration file not found: {config_path}")

    try:
        with open(config_path) as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"{config_path}: invalid JSON at line {e.lineno}: {e.msg}", line=e.lineno) from e

    config = parse_configuration(data)
    logger.debug(f"Loaded configuration '{config.experiment}' from {config_path} (hash {config.config_hash()})")
    return config


# ---------------------------------------------------------------------------
# Report schema
# ---------------------------------------------------------------------------

class EstimateRecord(StrictModel):
    lambda_deg_nm: float
    k2_ps2_per_km: float
    k2_sigma: float
    d_ps_per_nm_km: float
    d_sigma: float
    d_sigma_bootstrap: Optional[float] = None
    n_bootstrap: int = 0
    l_fut_m: float
    method: str
    formatted: str
    within_spec_sheet_bounds: Optional[bool] = None


class SlopeRecord(StrictModel):
    slope_ps_per_nm2_km: float
    slope_sigma: float
    lambda_pair_nm: Tuple[float, float]
    midpoint_nm: float
    formatted: str


class CheckRecord(StrictModel):
    name: str
    passed: bool
    detail: str = ""


class PumpResult(StrictModel):
    pump_wavelength_nm: float
    lambda_deg_nm: float
    estimate: Optional[EstimateRecord] = None
    delta_c2_ps2: float
    delta_c2_sigma: float
    diagnostics: Dict[str, Optional[float]] = Field(default_factory=dict)


class Provenance(StrictModel):
    tool_version: str = TOOL_VERSION
    config_hash: Optional[str] = None
    seed: Optional[int] = None
    inputs: List[str] = Field(default_factory=list)


class Report(StrictModel):
    '''Machine-readable outcome of an extract or roundtrip run.'''
    experiment: str
    pumps: List[PumpResult] = Field(default_factory=list)
    slope: Optional[SlopeRecord] = None
    warnings: List[str] = Field(default_factory=list)
    checks: List[CheckRecord] = Field(default_factory=list)
    accepted: Optional[bool] = None
    provenance: Provenance = Field(default_factory=Provenance)

    @model_validator(mode="after")
    def finite_numbers(self):
        for pump in self.pumps:
            for key, value in pump.diagnostics.items():
                if value is not None and not math.isfinite(value):
                    raise ValueError(f"diagnostic {key} is not finite")
        return self
