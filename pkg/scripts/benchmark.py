#!/usr/bin/env python3
"""
Performance Benchmarking Suite for biphoton-dispersion

Measures, per benchmark scenario (docs/benchmark-scenarios.json):
- Noise-free synthesis time
- Spectrometer sampling time and throughput, serial and parallel
- Extraction time for one pump wavelength
- Relative error of D after a full roundtrip
- Memory usage of a roundtrip subprocess (peak RSS)

Outputs:
- docs/performance-metrics.json (machine-readable)
- docs/performance-report.md (human-readable)
"""

import json
import os
import statistics
import subprocess
import sys
import tempfile
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

# Add scripts directory to path
sys.path.insert(0, str(Path(__file__).parent))

from dispersion_models import d_param
from exceptions import DispersionToolError
from extraction import run_extraction
from run_config import RunConfig, load_configuration, parse_configuration
from spectrometer import derive_seed, histogram_to_spectrum, sample_events
from synthesis import envelope_spectrum, synthesize

# Try importing psutil for memory monitoring (optional)
try:
    import psutil
    HAS_PSUTIL = True
except ImportError:
    HAS_PSUTIL = False
    print("Warning: psutil not available. Memory monitoring will be skipped.")
    print("Install with: pip install psutil")

PROJECT_ROOT = Path(__file__).parent.parent
PARALLEL_WORKERS = 4


@dataclass
class PerformanceMetrics:
    """Schema for performance metrics"""
    scenario_id: str
    scenario_name: str
    grid_points: int
    pair_count: float

    # Forward model
    synthesis_times: List[float]  # 3 runs
    synthesis_median: float

    # Spectrometer
    sampling_time_serial: float
    sampling_time_parallel: float
    parallel_speedup: float
    pairs_per_second: float

    # Inverse pipeline
    extraction_time: float
    d_relative_error: Optional[float]

    # Memory usage (peak RSS in MB)
    peak_memory_mb: Optional[float]

    # Timestamp
    timestamp: str


def load_benchmark_scenarios() -> List[Dict[str, Any]]:
    """Load benchmark scenarios from docs/benchmark-scenarios.json"""
    scenario_file = PROJECT_ROOT / "docs" / "benchmark-scenarios.json"

    if not scenario_file.exists():
        raise FileNotFoundError(f"Benchmark scenarios file not found: {scenario_file}")

    with open(scenario_file, 'r') as f:
        data = json.load(f)

    return data['scenarios']


def scenario_config(scenario: Dict[str, Any]) -> RunConfig:
    """Bundled configuration with the scenario's spectrometer overrides applied."""
    config = load_configuration(PROJECT_ROOT / scenario['config'])
    overrides = scenario.get('spectrometer', {})
    if not overrides:
        return config
    data = config.model_dump(mode="json")
    data['spectrometer'].update(overrides)
    return parse_configuration(data)


def measure_synthesis(config: RunConfig, runs: int = 3) -> List[float]:
    """
    Measure noise-free synthesis of the with-FUT spectrum (N runs).
    Returns list of times in seconds.
    """
    setup = config.build_setup(config.pump_wavelengths_nm[0])
    grid = config.build_grid()
    times = []
    for run_num in range(runs):
        print(f"    Run {run_num + 1}/{runs}...", end=' ', flush=True)
        start_time = time.perf_counter()
        synthesize(setup, grid)
        elapsed = time.perf_counter() - start_time
        times.append(elapsed)
        print(f"{elapsed * 1000:.1f}ms")
    return times


def measure_sampling(config: RunConfig, workers: int) -> float:
    """Time one spectrometer pass over the with-FUT spectrum with ``workers`` threads."""
    pump = config.pump_wavelengths_nm[0]
    spectrum = synthesize(config.build_setup(pump), config.build_grid())
    settings = config.spectrometer.model_copy(update={"workers": workers}).build(config.seed)
    start_time = time.perf_counter()
    sample_events(spectrum, settings, pump)
    return time.perf_counter() - start_time


def measure_extraction(config: RunConfig) -> Tuple[float, Optional[float]]:
    """
    Time one extraction on measured spectra.
    Returns (seconds, relative D error or None).
    """
    pump = config.pump_wavelengths_nm[0]
    setup = config.build_setup(pump)
    grid = config.build_grid()
    measured = []
    for arm, arm_setup in enumerate((setup, setup.without_fut())):
        settings = config.spectrometer.build(derive_seed(config.seed, arm))
        measured.append(histogram_to_spectrum(sample_events(synthesize(arm_setup, grid), settings, pump), pump))
    envelopes = [envelope_spectrum(env, grid) for env in (setup.source1, setup.source2)]
    l_fut = setup.fut.length if setup.fut is not None else 0.0

    start_time = time.perf_counter()
    result = run_extraction(measured[0], measured[1], *envelopes, l_fut, None, config.extraction.build())
    elapsed = time.perf_counter() - start_time

    if result.estimate is None:
        return elapsed, None
    truth = float(d_param(setup.fut.model, setup.lambda_deg))
    return elapsed, abs(result.estimate.d - truth) / abs(truth)


def measure_memory_usage(config_path: Path) -> Optional[float]:
    """
    Measure peak memory usage of a roundtrip subprocess (MB).
    Returns peak RSS in megabytes, or None if psutil unavailable.
    """
    if not HAS_PSUTIL:
        return None

    print("  Measuring memory usage...", end=' ', flush=True)
    cli_script = Path(__file__).parent / "cli_io.py"

    with tempfile.TemporaryDirectory() as out_dir, open(os.devnull, 'r') as devnull:
        process = psutil.Popen(
            [sys.executable, str(cli_script), "--quiet", "--config", str(config_path),
             "--out", out_dir, "roundtrip"],
            stdin=devnull,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
        )

        peak_rss = 0
        try:
            while process.is_running() and process.poll() is None:
                try:
                    peak_rss = max(peak_rss, process.memory_info().rss)
                except (psutil.NoSuchProcess, psutil.AccessDenied):
                    break
                time.sleep(0.1)
            process.wait()
        except (psutil.Error, OSError, subprocess.SubprocessError) as e:
            print(f"ERROR: {e}")
            return None

    peak_mb = peak_rss / (1024 * 1024)
    print(f"{peak_mb:.1f} MB")
    return peak_mb


def run_performance_benchmark(scenario: Dict[str, Any]) -> PerformanceMetrics:
    """
    Run the complete benchmark on one scenario.
    Returns PerformanceMetrics object.
    """
    print(f"\nBenchmarking: {scenario['name']}")
    print("=" * 60)
    config = scenario_config(scenario)

    print("  Measuring synthesis (3 runs)...")
    synthesis_times = measure_synthesis(config)
    synthesis_median = statistics.median(synthesis_times)

    print("  Measuring spectrometer sampling...", end=' ', flush=True)
    serial = measure_sampling(config, 1)
    parallel = measure_sampling(config, PARALLEL_WORKERS)
    speedup = serial / parallel if parallel > 0 else 0.0
    print(f"{serial:.2f}s serial, {parallel:.2f}s with {PARALLEL_WORKERS} workers")

    print("  Measuring extraction...", end=' ', flush=True)
    extraction_time, d_error = measure_extraction(config)
    print(f"{extraction_time:.2f}s")

    peak_memory = measure_memory_usage(PROJECT_ROOT / scenario['config'])

    metrics = PerformanceMetrics(
        scenario_id=scenario['id'],
        scenario_name=scenario['name'],
        grid_points=config.interferometer.grid.n_points,
        pair_count=config.spectrometer.pair_count,
        synthesis_times=synthesis_times,
        synthesis_median=synthesis_median,
        sampling_time_serial=serial,
        sampling_time_parallel=parallel,
        parallel_speedup=speedup,
        pairs_per_second=config.spectrometer.pair_count / serial if serial > 0 else 0.0,
        extraction_time=extraction_time,
        d_relative_error=d_error,
        peak_memory_mb=peak_memory,
        timestamp=time.strftime("%Y-%m-%d %H:%M:%S")
    )

    print(f"\nSummary:")
    print(f"  Synthesis: {synthesis_median * 1000:.1f}ms")
    print(f"  Sampling: {metrics.pairs_per_second:.3g} pairs/s (speedup {speedup:.1f}x)")
    if d_error is not None:
        print(f"  D relative error: {d_error:.2e}")
    if peak_memory:
        print(f"  Peak memory: {peak_memory:.1f} MB")

    return metrics


def save_metrics_json(all_metrics: List[PerformanceMetrics], output_path: Path):
    """Save performance metrics to JSON file"""
    data = {
        "version": "1.0",
        "generated": time.strftime("%Y-%m-%d %H:%M:%S"),
        "metrics": [asdict(m) for m in all_metrics]
    }

    with open(output_path, 'w') as f:
        json.dump(data, f, indent=2)

    print(f"\nMetrics saved to: {output_path}")


def generate_performance_report(all_metrics: List[PerformanceMetrics], output_path: Path):
    """Generate human-readable performance report in Markdown"""

    report_lines = [
        "# Performance Benchmark Report",
        "",
        f"**Generated:** {time.strftime('%Y-%m-%d %H:%M:%S')}",
        "",
        "## Timing",
        "",
        "| Scenario | Grid | Pairs | Synthesis | Sampling (1 / 4 workers) | Extraction |",
        "|----------|------|-------|-----------|--------------------------|------------|"
    ]

    for m in all_metrics:
        report_lines.append(
            f"| {m.scenario_name} | {m.grid_points} | {m.pair_count:.0e} | {m.synthesis_median * 1000:.1f}ms | "
            f"{m.sampling_time_serial:.2f}s / {m.sampling_time_parallel:.2f}s | {m.extraction_time:.2f}s |"
        )

    report_lines.extend([
        "",
        "## Accuracy",
        "",
        "| Scenario | D relative error | Within 1% |",
        "|----------|------------------|-----------|"
    ])

    for m in all_metrics:
        if m.d_relative_error is None:
            report_lines.append(f"| {m.scenario_name} | n/a (null scenario) | - |")
        else:
            status = "✅" if m.d_relative_error <= 0.01 else "⚠️"
            report_lines.append(f"| {m.scenario_name} | {m.d_relative_error:.2e} | {status} |")

    if any(m.peak_memory_mb for m in all_metrics):
        report_lines.extend([
            "",
            "## Memory Usage",
            "",
            "| Scenario | Peak RSS (MB) |",
            "|----------|---------------|"
        ])
        for m in all_metrics:
            if m.peak_memory_mb:
                report_lines.append(f"| {m.scenario_name} | {m.peak_memory_mb:.1f} MB |")

    report_lines.extend([
        "",
        "---",
        "",
        f"*Report generated by `scripts/benchmark.py` on {time.strftime('%Y-%m-%d %H:%M:%S')}*"
    ])

    with open(output_path, 'w') as f:
        f.write('\n'.join(report_lines) + '\n')

    print(f"Report saved to: {output_path}")


def main():
    """Main benchmark execution"""
    print("=" * 60)
    print("Performance Benchmark Suite")
    print("biphoton-dispersion")
    print("=" * 60)

    scenarios = load_benchmark_scenarios()
    print(f"\nLoaded {len(scenarios)} benchmark scenarios")

    all_metrics = []
    for scenario in scenarios:
        try:
            all_metrics.append(run_performance_benchmark(scenario))
        except (DispersionToolError, OSError, ValueError, KeyError) as e:
            print(f"\n❌ Benchmark failed for {scenario['name']}: {e}")
            continue

    if not all_metrics:
        print("\n❌ No benchmarks completed successfully")
        return 1

    metrics_json_path = PROJECT_ROOT / "docs" / "performance-metrics.json"
    report_md_path = PROJECT_ROOT / "docs" / "performance-report.md"

    save_metrics_json(all_metrics, metrics_json_path)
    generate_performance_report(all_metrics, report_md_path)

    print("\n" + "=" * 60)
    print("✅ Benchmark suite completed successfully!")
    print("=" * 60)
    print(f"\nResults:")
    print(f"  - Machine-readable: {metrics_json_path}")
    print(f"  - Human-readable:   {report_md_path}")

    return 0


if __name__ == "__main__":
    sys.exit(main())
