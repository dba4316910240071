#!/usr/bin/env python3
"""
Command-line surface and file formats.

Subcommands:
    simulate      synthesize with-FUT / without-FUT spectra per pump
    spectrometer  pass spectra through the time-of-flight spectrometer
    extract       recover D (and the slope for two pumps) from spectra
    roundtrip     simulate → spectrometer → extract, with acceptance checks

Files:
    spectrum CSV   "# key: value" header, then
                   detuning_radps,wavelength_nm,intensity[,sigma]
    histogram CSV  "# key: value" header, then bin_center_ps,counts
    report JSON    pydantic Report (lossless float round-trip)

Exit codes: 0 success, 2 configuration error, 3 numeric failure,
4 acceptance failure.
"""

import argparse
import io
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from dispersion_models import d_param, dispersion_slope, spec_sheet_bounds
from exceptions import ConfigurationError, DispersionToolError
from extraction import (
    DispersionEstimate,
    ExtractionOptions,
    ExtractionResult,
    SlopeEstimate,
    bootstrap_uncertainty,
    run_extraction,
    slope_from_two,
)
from run_config import (
    TOOL_VERSION,
    CheckRecord,
    EstimateRecord,
    Provenance,
    PumpResult,
    Report,
    RunConfig,
    SlopeRecord,
    load_configuration,
    parse_configuration,
)
from spectrometer import TimeDelayHistogram, derive_seed, histogram_to_spectrum, sample_events
from synthesis import FrequencyGrid, Interferogram, envelope_spectrum, synthesize

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_ACCEPTANCE = 4

SPECTRUM_COLUMNS = ("detuning_radps", "wavelength_nm", "intensity", "sigma")
HISTOGRAM_COLUMNS = ("bin_center_ps", "counts")
FLOAT_FORMAT = "%.17g"


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

def atomic_write_text(path: Path, text: str) -> None:
    """Write text via a temporary sibling and an atomic rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    temp_path = path.parent / f"{path.name}.tmp"
    temp_path.write_text(text, encoding="utf-8")
    temp_path.replace(path)


def _header_lines(header: Dict[str, Any]) -> List[str]:
    return [f"# {key}: {header[key]}" for key in header]


def _parse_header_value(text: str) -> Any:
    if text in ("True", "False"):
        return text == "True"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def _split_comments(path: Path) -> Tuple[Dict[str, Any], List[str]]:
    header: Dict[str, Any] = {}
    body: List[str] = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.startswith("#"):
                key, sep, value = line[1:].strip().partition(":")
                if sep:
                    key = key.strip()
                    # hashes stay text even when they look numeric
                    header[key] = value.strip() if key.endswith("hash") else _parse_header_value(value.strip())
            elif line.strip():
                body.append(line)
    return header, body


def write_spectrum_csv(path: Path, spectrum: Interferogram, header: Optional[Dict[str, Any]] = None) -> Path:
    """Write a spectrum with a self-describing header."""
    fields: Dict[str, Any] = {
        "tool_version": TOOL_VERSION,
        "kind": spectrum.kind,
        "omega_deg_radps": repr(float(spectrum.omega_deg)),
        "units": "detuning rad/ps, wavelength nm, intensity relative",
    }
    for key, value in spectrum.metadata.items():
        if isinstance(value, (str, int, float, bool)):
            fields[key] = repr(float(value)) if isinstance(value, float) else value
    fields.update(header or {})

    columns = [spectrum.detuning, spectrum.wavelength, spectrum.values]
    names = list(SPECTRUM_COLUMNS[:3])
    if spectrum.sigma is not None:
        columns.append(spectrum.sigma)
        names.append(SPECTRUM_COLUMNS[3])

    buffer = io.StringIO()
    buffer.write("\n".join(_header_lines(fields)) + "\n")
    buffer.write(",".join(names) + "\n")
    np.savetxt(buffer, np.column_stack(columns), delimiter=",", fmt=FLOAT_FORMAT)
    atomic_write_text(path, buffer.getvalue())
    logger.debug(f"Wrote {len(spectrum.detuning)} spectrum rows to {path}")
    return Path(path)


def read_spectrum_csv(path: Path) -> Interferogram:
    """Read a spectrum written by write_spectrum_csv.

    Raises:
        ConfigurationError: If the file lacks the header or columns needed
    """
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"spectrum file not found: {path}")
    header, body = _split_comments(path)
    if not body:
        raise ConfigurationError(f"{path}: no column header")
    names = [name.strip() for name in body[0].split(",")]
    if names[:3] != list(SPECTRUM_COLUMNS[:3]):
        raise ConfigurationError(f"{path}: expected columns {','.join(SPECTRUM_COLUMNS)}, got {body[0].strip()}")
    if "omega_deg_radps" not in header:
        raise ConfigurationError(f"{path}: header lacks omega_deg_radps", key="omega_deg_radps")

    data = np.loadtxt(io.StringIO("".join(body[1:])), delimiter=",", ndmin=2)
    detuning = data[:, 0]
    grid = None
    if detuning.size >= 2:
        candidate = FrequencyGrid(float(detuning[0]), float(detuning[-1]), int(detuning.size))
        if np.array_equal(candidate.points(), detuning):
            grid = candidate

    return Interferogram(
        detuning=detuning,
        values=data[:, 2],
        omega_deg=float(header["omega_deg_radps"]),
        sigma=data[:, 3] if "sigma" in names else None,
        grid=grid,
        kind=str(header.get("kind", "spectrum")),
        metadata=header,
    )


def write_histogram_csv(path: Path, histogram: TimeDelayHistogram, header: Optional[Dict[str, Any]] = None) -> Path:
    fields: Dict[str, Any] = {
        "tool_version": TOOL_VERSION,
        "units": "bin_center ps, counts coincidences",
        "pump_wavelength_nm": repr(float(histogram.lambda_pump)),
        "bin_width_ps": repr(float(histogram.config.bin_width)),
        "medium_dl_ps_per_nm": repr(float(histogram.config.medium_dl)),
        "jitter_fwhm_ps": repr(float(histogram.config.combined_jitter)),
        "total_counts": int(histogram.total_counts),
        "dark_counts": int(histogram.n_dark),
        "seed": int(histogram.config.rng_seed),
    }
    fields.update(header or {})
    buffer = io.StringIO()
    buffer.write("\n".join(_header_lines(fields)) + "\n")
    buffer.write(",".join(HISTOGRAM_COLUMNS) + "\n")
    for center, count in zip(histogram.centers, histogram.counts):
        buffer.write(f"{float(center)!r},{int(count)}\n")
    atomic_write_text(path, buffer.getvalue())
    return Path(path)


def write_report(path: Path, report: Report) -> Path:
    atomic_write_text(path, report.model_dump_json(indent=2) + "\n")
    return Path(path)


def read_report(path: Path) -> Report:
    return Report.model_validate_json(Path(path).read_text(encoding="utf-8"))


def _tag(config: RunConfig, pump_wavelength: float) -> str:
    return f"{config.experiment}_{pump_wavelength:.1f}nm"


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExtractionInputs:
    """Paths of the four spectra needed for one pump wavelength."""
    with_fut: Path
    without_fut: Path
    envelope1: Path
    envelope2: Path


def cmd_simulate(config: RunConfig, out_dir: Path) -> List[Path]:
    """Synthesize spectra for every pump in ``config``.

    Writes {tag}_without_fut.csv, {tag}_with_fut.csv (only when a FUT is
    configured) and the two single-source envelopes under envelopes/.
    """
    out_dir = Path(out_dir)
    grid = config.build_grid()
    header = {"config_hash": config.config_hash(), "seed": config.seed}
    written: List[Path] = []

    if config.interferometer.fut is None:
        logger.warning("Configuration has no FUT block; writing without-FUT spectra only")

    for pump in config.pump_wavelengths_nm:
        setup = config.build_setup(pump)
        tag = _tag(config, pump)
        written.append(write_spectrum_csv(out_dir / f"{tag}_without_fut.csv",
                                          synthesize(setup.without_fut(), grid), header))
        if setup.fut is not None:
            written.append(write_spectrum_csv(out_dir / f"{tag}_with_fut.csv", synthesize(setup, grid), header))
        for index, env in enumerate((setup.source1, setup.source2), start=1):
            write_spectrum_csv(out_dir / "envelopes" / f"{tag}_source{index}.csv",
                               envelope_spectrum(env, grid),
                               dict(header, pump_wavelength_nm=repr(pump), lambda_deg_nm=repr(2.0 * pump)))
    return written


def cmd_spectrometer(spectrum_paths: Sequence[Path], config: RunConfig, out_dir: Path) -> List[Path]:
    """Histogram each spectrum through the spectrometer and map it back."""
    out_dir = Path(out_dir)
    written: List[Path] = []
    for index, path in enumerate(spectrum_paths):
        spectrum = read_spectrum_csv(path)
        pump = float(spectrum.metadata.get("pump_wavelength_nm", 0.5 * spectrum.lambda_deg))
        settings = config.spectrometer.build(derive_seed(config.seed, index))
        histogram = sample_events(spectrum, settings, pump)
        recovered = histogram_to_spectrum(histogram, pump)
        header = {"config_hash": config.config_hash(), "input": Path(path).name}
        recovered.metadata.update({k: v for k, v in spectrum.metadata.items()
                                   if k in ("with_fut", "fut_length_m", "setup_hash", "pump_wavelength_nm")})
        recovered.metadata.update(_coherence_fields(spectrum.metadata))
        stem = Path(path).stem
        written.append(write_histogram_csv(out_dir / f"{stem}_histogram.csv", histogram, header))
        written.append(write_spectrum_csv(out_dir / f"{stem}_recovered.csv", recovered, header))
        logger.info(f"{Path(path).name}: {histogram.total_counts} coincidences histogrammed")
    return written


def _estimate_record(estimate: DispersionEstimate) -> EstimateRecord:
    try:
        low, high = spec_sheet_bounds(estimate.lambda_deg)
        within = bool(low <= estimate.d <= high)
    except DispersionToolError:
        within = None
    return EstimateRecord(
        lambda_deg_nm=estimate.lambda_deg,
        k2_ps2_per_km=estimate.k2,
        k2_sigma=estimate.k2_sigma,
        d_ps_per_nm_km=estimate.d,
        d_sigma=estimate.d_sigma,
        d_sigma_bootstrap=estimate.d_sigma_bootstrap,
        n_bootstrap=estimate.n_bootstrap,
        l_fut_m=estimate.l_fut,
        method=estimate.method,
        formatted=estimate.formatted(),
        within_spec_sheet_bounds=within,
    )


def _slope_record(slope: SlopeEstimate) -> SlopeRecord:
    return SlopeRecord(
        slope_ps_per_nm2_km=slope.slope,
        slope_sigma=slope.slope_sigma,
        lambda_pair_nm=slope.lambda_pair,
        midpoint_nm=slope.midpoint,
        formatted=slope.formatted(),
    )


def _coherence_fields(metadata: Dict[str, Any]) -> Dict[str, Any]:
    return {k: metadata[k] for k in ("coherence_passed", "coherence_length_m") if k in metadata}


def _note_coherence(report: Report, metadata: Dict[str, Any]) -> None:
    """Copy the pump coherence check of the with-FUT spectrum into the last pump entry."""
    if "coherence_length_m" in metadata:
        report.pumps[-1].diagnostics["coherence_length_m"] = float(metadata["coherence_length_m"])
    if metadata.get("coherence_passed") is False:
        report.warnings.append(f"pump coherence check failed at {report.pumps[-1].lambda_deg_nm:.1f} nm")


def _pump_result(pump: float, lambda_deg: float, result: ExtractionResult,
                 estimate: Optional[DispersionEstimate]) -> PumpResult:
    diagnostics = {k: float(v) for k, v in result.diagnostics.items()
                   if isinstance(v, (int, float)) and math.isfinite(v)}
    return PumpResult(
        pump_wavelength_nm=pump,
        lambda_deg_nm=lambda_deg,
        estimate=_estimate_record(estimate) if estimate is not None else None,
        delta_c2_ps2=float(result.diagnostics["delta_c2"]),
        delta_c2_sigma=float(result.diagnostics["delta_c2_sigma"]),
        diagnostics=diagnostics,
    )


def _extract_one(spectra: Tuple[Interferogram, ...], l_fut: float, options: ExtractionOptions,
                 bootstrap: int, seed: int, workers: int) -> Tuple[ExtractionResult, Optional[DispersionEstimate]]:
    with_fut, without_fut, env1, env2 = spectra
    result = run_extraction(with_fut, without_fut, env1, env2, l_fut, None, options)
    estimate = result.estimate
    if bootstrap and estimate is not None:
        estimate = bootstrap_uncertainty(with_fut, without_fut, env1, env2, l_fut, None, options,
                                         n_resamples=bootstrap, seed=seed, workers=workers)
    return result, estimate


def cmd_extract(inputs: Sequence[ExtractionInputs], l_fut: float, out_dir: Path,
                options: Optional[ExtractionOptions] = None, experiment: str = "extract",
                bootstrap: int = 0, seed: int = 0, workers: int = 1,
                config_hash: Optional[str] = None) -> Report:
    """Recover D per pump (and the slope for two pumps) from spectrum files.

    Writes report.json and one {lambda}_phase_fut.csv trace per pump.
    """
    out_dir = Path(out_dir)
    options = options or ExtractionOptions()
    report = Report(experiment=experiment,
                    provenance=Provenance(config_hash=config_hash, seed=seed,
                                          inputs=[str(p) for group in inputs for p in
                                                  (group.with_fut, group.without_fut, group.envelope1, group.envelope2)]))
    estimates: List[DispersionEstimate] = []

    for index, group in enumerate(inputs):
        spectra = tuple(read_spectrum_csv(p) for p in (group.with_fut, group.without_fut,
                                                       group.envelope1, group.envelope2))
        lambda_deg = spectra[0].lambda_deg
        result, estimate = _extract_one(spectra, l_fut, options, bootstrap, derive_seed(seed, index), workers)
        report.warnings.extend(result.warnings)
        report.pumps.append(_pump_result(0.5 * lambda_deg, lambda_deg, result, estimate))
        _note_coherence(report, spectra[0].metadata)
        if estimate is not None:
            estimates.append(estimate)
        _write_phase_trace(out_dir / f"{experiment}_{lambda_deg:.1f}nm_phase_fut.csv", result, spectra[0].omega_deg)

    if len(estimates) == 2:
        report.slope = _slope_record(slope_from_two(*estimates))
    write_report(out_dir / "report.json", report)
    return report


def _write_phase_trace(path: Path, result: ExtractionResult, omega_deg: float) -> None:
    trace = result.delta_trace
    keep = trace.mask
    spectrum = Interferogram(
        detuning=trace.detuning[keep],
        values=trace.phase[keep],
        omega_deg=omega_deg,
        sigma=trace.sigma[keep],
        kind="phase",
        metadata={"method": trace.method},
    )
    write_spectrum_csv(path, spectrum, {"units": "detuning rad/ps, wavelength nm, phase rad"})


def _roundtrip_checks(config: RunConfig, pump: float, result: ExtractionResult,
                      estimate: Optional[DispersionEstimate]) -> List[CheckRecord]:
    fut = config.interferometer.fut
    tag = f"{2.0 * pump:.1f}nm"
    if fut is None:
        return []
    if fut.length_m == 0:
        delta_c2 = result.diagnostics["delta_c2"]
        sigma = result.diagnostics["delta_c2_sigma"]
        passed = abs(delta_c2) <= config.acceptance.null_sigmas * sigma + 1e-12
        return [CheckRecord(name=f"null_phase_{tag}", passed=passed,
                            detail=f"Δc2 = {delta_c2:.3g} ± {sigma:.2g} ps²")]

    truth = float(d_param(fut.model.build(), 2.0 * pump))
    relative = abs(estimate.d - truth) / abs(truth) if truth != 0 else abs(estimate.d)
    return [CheckRecord(
        name=f"d_relative_error_{tag}",
        passed=relative <= config.acceptance.d_relative_tolerance,
        detail=f"D = {estimate.formatted()} vs model {truth:.4f} ps/(nm·km), relative error {relative:.2e}",
    )]


def cmd_roundtrip(config: RunConfig, out_dir: Path) -> Report:
    """Simulate, measure and extract every configured pump, then judge acceptance."""
    out_dir = Path(out_dir)
    grid = config.build_grid()
    options = config.extraction.build()
    fut = config.interferometer.fut
    l_fut = fut.length_m if fut is not None else 0.0
    report = Report(experiment=config.experiment,
                    provenance=Provenance(config_hash=config.config_hash(), seed=config.seed))
    estimates: List[DispersionEstimate] = []

    if fut is None:
        raise ConfigurationError("roundtrip needs an interferometer.fut block", key="interferometer.fut")

    for pump_index, pump in enumerate(config.pump_wavelengths_nm):
        setup = config.build_setup(pump)
        measured = []
        for arm, arm_setup in enumerate((setup, setup.without_fut())):
            settings = config.spectrometer.build(derive_seed(config.seed, pump_index, arm))
            synthesized = synthesize(arm_setup, grid)
            histogram = sample_events(synthesized, settings, pump)
            measured.append(histogram_to_spectrum(histogram, pump))
            measured[-1].metadata.update(_coherence_fields(synthesized.metadata))
        envelopes = (envelope_spectrum(setup.source1, grid), envelope_spectrum(setup.source2, grid))

        result, estimate = _extract_one((measured[0], measured[1]) + envelopes, l_fut, options,
                                        config.extraction.bootstrap_resamples,
                                        derive_seed(config.seed, pump_index, 2), config.extraction.workers)
        report.warnings.extend(result.warnings)
        _note_coherence(report, measured[0].metadata)
        report.pumps.append(_pump_result(pump, setup.lambda_deg, result, estimate))
        report.checks.extend(_roundtrip_checks(config, pump, result, estimate))
        if estimate is not None:
            estimates.append(estimate)

    if len(estimates) == 2:
        slope = slope_from_two(*estimates)
        report.slope = _slope_record(slope)
        truth = dispersion_slope(fut.model.build(), slope.midpoint)
        passed = abs(slope.slope - truth) <= config.acceptance.slope_sigmas * slope.slope_sigma
        report.checks.append(CheckRecord(
            name="slope",
            passed=passed,
            detail=f"S = {slope.formatted()} vs model {truth:.4f} ps/(nm²·km)",
        ))

    report.accepted = all(check.passed for check in report.checks)
    write_report(out_dir / "roundtrip_report.json", report)
    return report


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='biphoton-dispersion',
        description='Simulate and analyse biphoton spectral interferograms for fiber dispersion',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python cli_io.py simulate --out out/                     # Bundled two-pump SMF-28 config
  python cli_io.py spectrometer --spectrum out/x.csv       # Time-of-flight spectrometer
  python cli_io.py extract --with W.csv --without R.csv --env1 E1.csv --env2 E2.csv --l-fut 5
  python cli_io.py roundtrip --config configs/smf28_two_pump.json --seed 7

Exit codes:
  0 success, 2 configuration error, 3 numeric failure, 4 acceptance failure.
        """
    )
    parser.add_argument('--version', action='version', version=f'%(prog)s {TOOL_VERSION}')
    parser.add_argument('--config', type=Path, metavar='PATH', help='Run configuration JSON (default: bundled SMF-28 config)')
    parser.add_argument('--seed', type=int, metavar='N', help='Override the configuration seed')
    parser.add_argument('--out', type=Path, metavar='DIR', help='Output directory (default: config output_dir)')
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument('--quiet', action='store_true', help='Only print warnings and errors')
    verbosity.add_argument('--verbose', action='store_true', help='Enable debug logging')

    commands = parser.add_subparsers(dest='command', required=True)
    commands.add_parser('simulate', help='Synthesize with/without-FUT spectra')

    spectro = commands.add_parser('spectrometer', help='Run spectra through the spectrometer')
    spectro.add_argument('--spectrum', type=Path, action='append', required=True, metavar='CSV',
                         help='Spectrum CSV (repeatable)')

    extract = commands.add_parser('extract', help='Recover D and slope from spectra')
    extract.add_argument('--with', dest='with_fut', type=Path, action='append', required=True, metavar='CSV')
    extract.add_argument('--without', dest='without_fut', type=Path, action='append', required=True, metavar='CSV')
    extract.add_argument('--env1', type=Path, action='append', required=True, metavar='CSV')
    extract.add_argument('--env2', type=Path, action='append', required=True, metavar='CSV')
    extract.add_argument('--l-fut', type=float, required=True, metavar='M', help='FUT length in metres')
    extract.add_argument('--bootstrap', type=int, default=None, metavar='N', help='Bootstrap resamples (>= 50)')

    commands.add_parser('roundtrip', help='Simulate, measure, extract and check acceptance')
    return parser


def _run(args: argparse.Namespace) -> int:
    config = load_configuration(args.config)
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.out is not None:
        updates["output_dir"] = str(args.out)
    if updates:
        config = parse_configuration(dict(config.model_dump(mode="json"), **updates))
    out_dir = Path(config.output_dir)

    if args.command == 'simulate':
        written = cmd_simulate(config, out_dir)
        if not args.quiet:
            print(f"✅ Wrote {len(written)} spectra to {out_dir}")
        return EXIT_OK

    if args.command == 'spectrometer':
        written = cmd_spectrometer(args.spectrum, config, out_dir)
        if not args.quiet:
            print(f"✅ Wrote {len(written)} files to {out_dir}")
        return EXIT_OK

    if args.command == 'extract':
        groups = (args.with_fut, args.without_fut, args.env1, args.env2)
        if len({len(g) for g in groups}) != 1:
            raise ConfigurationError("--with, --without, --env1 and --env2 must be given the same number of times")
        bootstrap = config.extraction.bootstrap_resamples if args.bootstrap is None else args.bootstrap
        if 0 < bootstrap < 50:
            raise ConfigurationError("--bootstrap needs at least 50 resamples", key="bootstrap")
        inputs = [ExtractionInputs(*paths) for paths in zip(*groups)]
        report = cmd_extract(inputs, args.l_fut, out_dir, config.extraction.build(), config.experiment,
                             bootstrap, config.seed, config.extraction.workers, config.config_hash())
        if not args.quiet:
            for pump in report.pumps:
                if pump.estimate is not None:
                    print(f"📏 D({pump.lambda_deg_nm:.1f} nm) = {pump.estimate.formatted} ps/(nm·km)")
            if report.slope is not None:
                print(f"📐 S = {report.slope.formatted} ps/(nm²·km)")
        return EXIT_OK

    report = cmd_roundtrip(config, out_dir)
    if not args.quiet:
        for check in report.checks:
            print(f"{'✅' if check.passed else '❌'} {check.name}: {check.detail}")
    return EXIT_OK if report.accepted else EXIT_ACCEPTANCE


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run the command-line interface.

    Configuration precedence:
        1. CLI flags (--seed, --out) - highest priority
        2. Configuration file (--config or the bundled default)
        3. Model defaults - lowest priority

    Returns the process exit code.
    """
    parser = build_parser()
    args = parser.parse_args(argv)

    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format='%(levelname)s: %(message)s', force=True)

    try:
        return _run(args)
    except ConfigurationError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except DispersionToolError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_NUMERIC
    except (ValueError, np.linalg.LinAlgError) as e:
        # numpy/scipy failures on degenerate data
        logger.error(f"Numeric failure: {e}")
        return EXIT_NUMERIC


if __name__ == '__main__':
    sys.exit(main())
