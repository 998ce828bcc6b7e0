import logging
import math
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np

from config.run_config import NetworkSection, RunConfig
from core.detector_design import DetectorDesigner, Environment
from core.errors import DomainError
from core.homodyne_sim import DetectorModel, HomodyneSimulator
from core.optimizer import GaConfig, optimize_ga
from core.quantization_entropy import (
    AdcConfig,
    NoisePartition,
    QuantizedCodes,
    auto_adc,
    code_histogram,
    empirical_min_entropy,
    entropy_report,
    generation_rate_bound,
    quantize,
    sigma_ratio_for_entropy,
)
from core.rf_network import (
    Comparison,
    FrequencySweep,
    Goal,
    GoalSet,
    LumpedElement,
    NetworkTopology,
    TwoPortNetwork,
    evaluate_chain,
    evaluate_goals,
    sensitivity_analysis,
    stability_factors,
)
from core.spectrum import (
    estimate_spectrum,
    measure_band_flatness,
    measure_bandwidth,
    measure_cmrr,
    measure_snr_spectrum,
    power_sweep,
)
from core.stat_tests import BitSequence, SuiteReport, default_tests, run_suite
from core.toeplitz_extractor import (
    ExtractionResult,
    ExtractorConfig,
    SizingMode,
    ToeplitzSeed,
    effective_rate,
    efficiency,
    extract_stream,
    size_output,
    throughput_bench,
)
from core.tomography import (
    GridSpec,
    HeterodyneModel,
    calibrate_shot_noise,
    calibration_powers,
    compare_husimi,
    generate_heterodyne_stream,
    normalize_quadratures,
    reconstruct_husimi,
    theoretical_vacuum_husimi,
)
from tools.bitfile import read_bits, read_sidecar, write_bits, write_float_stream
from tools.reports import config_digest, write_csv, write_report
from tools.touchstone import read_touchstone


logger = logging.getLogger(__name__)

# Keys that change how a run executes but not what it computes
EXECUTION_KEYS = ("workers", "output_dir")

# Channel indices of the simulated homodyne source
ELECTRONIC_CHANNEL = 3
SOURCE_CHANNEL_BASE = 16

BANDWIDTH_REF_FREQ = 1.0e8  # Hz
SWEEP_POWERS = (0.25e-3, 0.5e-3, 1.0e-3, 2.0e-3)  # W
SNR_PROBE_FREQS = (0.1e9, 0.5e9, 1.0e9, 1.75e9)  # Hz
SWEEP_MAX_SAMPLES = 1 << 18
TARGET_ENTROPY_BITS = 6.63


def build_topology(section: NetworkSection, base_dir: Path = None) -> NetworkTopology:
    """
    Turn the [network] element tables into a topology.

    sparam_block values are Touchstone paths, resolved against base_dir.
    """
    elements = []
    for i, table in enumerate(section.elements):
        kind = table["kind"]
        value = table["value"]
        if kind == "sparam_block":
            path = Path(value)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            value = read_touchstone(path)
        bounds = table.get("bounds")
        if bounds is not None:
            if len(bounds) != 2:
                raise DomainError(f"network.elements[{i}].bounds: expected [low, high]")
            bounds = (float(bounds[0]), float(bounds[1]))
        element = LumpedElement(kind, value if kind == "sparam_block" else float(value),
                                bounds, table.get("label", ""))
        element.validate()
        elements.append(element)
    return NetworkTopology(tuple(elements))


def default_goals(sweep: FrequencySweep) -> GoalSet:
    """Input match S11 < -10 dB over the middle fifth of the sweep."""
    lo, hi = sweep.span
    centre, half = (lo + hi) / 2, (hi - lo) / 10
    return GoalSet((Goal("S11", Comparison.BELOW, -10.0, (centre - half, centre + half)),))


def build_goals(tables: List[Dict], sweep: FrequencySweep) -> GoalSet:
    if not tables:
        return default_goals(sweep)
    goals = []
    for table in tables:
        band = table["band"]
        goals.append(Goal(str(table["parameter"]), str(table["comparison"]),
                          float(table["threshold_db"]), (float(band[0]), float(band[1]))))
    return GoalSet(tuple(goals))


def network_rows(n: TwoPortNetwork) -> List[Tuple]:
    columns = [n.param_db(name) for name in ("S11", "S21", "S12", "S22")]
    return [(float(f), *(float(c[k]) for c in columns)) for k, f in enumerate(n.frequencies)]


class ExperimentRunner:
    """
    Runs experiments described by a RunConfig.

    Coordinates between:
    - Detector design math
    - Two-port network analysis and optimization
    - The simulated homodyne source, quantization and entropy estimation
    - Toeplitz extraction and the statistical test suite
    - Husimi tomography

    Every report embeds the config digest, seed and calculation mode. Wall
    clock times never go into reports.
    """

    def __init__(self, config: RunConfig, base_dir: Path = None):
        """
        Initialize the runner.

        Args:
            config: Validated run configuration
            base_dir: Directory relative file references are resolved against
        """
        config.validate()
        self.config = config
        self.base_dir = Path(base_dir) if base_dir is not None else Path.cwd()
        self.out_root = Path(config.output_dir)
        document = {k: v for k, v in config.to_dict().items() if k not in EXECUTION_KEYS}
        self.digest = config_digest(document)

    # Helpers

    def out_dir(self, command: str) -> Path:
        return self.out_root / command

    def header(self, command: str) -> Dict:
        return {
            "command": command,
            "config_digest": self.digest,
            "rng_seed": self.config.rng_seed,
            "mode": self.config.mode,
        }

    def _resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p

    def detector_model(self, sample_rate: float = None) -> DetectorModel:
        d = self.config.detector
        return DetectorModel(
            sample_rate=sample_rate or d.sample_rate,
            shot_noise_psd_per_mw=d.shot_noise_psd_per_mw,
            elec_noise_psd=d.elec_noise_psd,
            f3db=d.f3db,
            ripple_db=d.ripple_db,
            ripple_period=d.ripple_period,
            saturation_power=d.saturation_power,
            pd_gain_ratio=d.pd_gain_ratio,
            flicker_corner=d.flicker_corner,
            tone_volts_per_mw=d.tone_volts_per_mw,
            rng_seed=self.config.rng_seed,
        )

    def sweep(self) -> FrequencySweep:
        n = self.config.network
        return FrequencySweep.linear(n.f_start, n.f_stop, n.n_points)

    def network(self) -> TwoPortNetwork:
        """The configured network: a Touchstone file, or the element topology."""
        n = self.config.network
        if n.touchstone:
            return read_touchstone(self._resolve(n.touchstone))
        return evaluate_chain(build_topology(n, self.base_dir), self.sweep(), n.z_ref)

    # Detector design

    def design_snr(self, photodiode: str = None) -> Dict:
        """Shot-noise-limited SNR for the catalog photodiodes, inline records included."""
        d = self.config.design
        designer = DetectorDesigner(Environment(d.temperature, d.optical_power), self.config.calc_mode)
        catalog = d.photodiode_catalog()
        selected = photodiode or d.photodiode
        if selected not in catalog:
            raise DomainError(f"unknown photodiode {selected!r}")

        rows, skipped = [], []
        for label, pd in catalog.items():
            try:
                value = designer.photodiode_snr(pd).value_db
            except DomainError as exc:
                logger.info("skipping %s: %s", label, exc)
                skipped.append(label)
                continue
            rows.append((label, value, round(value, 2)))

        report = {
            **self.header("design-snr"),
            "photodiode": selected,
            "snr": designer.photodiode_snr(catalog[selected]).to_dict(),
            "skipped": skipped,
        }
        out = self.out_dir("design-snr")
        write_csv(out / "photodiodes.csv", ["photodiode", "snr_db", "snr_db_rounded"], rows)
        write_report(out / "report.json", report)
        return report

    def design_cascade(self, photodiode: str = None, amplifiers: List[str] = None) -> Dict:
        """Two-stage noise figure and output SNR for each amplifier."""
        d = self.config.design
        designer = DetectorDesigner(Environment(d.temperature, d.optical_power), self.config.calc_mode)
        photodiodes, stages = d.photodiode_catalog(), d.amplifier_catalog()
        selected = photodiode or d.photodiode
        names = amplifiers or d.amplifiers or list(stages)
        unknown = [n for n in names if n not in stages]
        if selected not in photodiodes:
            unknown.insert(0, selected)
        if unknown:
            raise DomainError(f"unknown component(s): {', '.join(unknown)}")

        rows = designer.compare_amplifiers(photodiodes[selected], [stages[n] for n in names])
        report = {**self.header("design-cascade"), "photodiode": selected, "chains": rows}
        out = self.out_dir("design-cascade")
        write_csv(out / "cascade.csv", ["amplifier", "noise_figure_db", "output_snr_db"],
                  [(r["amplifier"], r["noise_figure"]["value_db"], r["output_snr"]["value_db"])
                   for r in rows])
        write_report(out / "report.json", report)
        return report

    # RF network

    def stability(self) -> Dict:
        network = self.network()
        result = stability_factors(network)
        out = self.out_dir("stability")
        write_csv(out / "stability.csv", ["frequency_hz", "k", "mu_source", "mu_load", "status"],
                  [(r.frequency, r.k_factor, r.mu_source, r.mu_load, r.status.value)
                   for r in result.records])
        report = {**self.header("stability"), **result.to_dict()}
        write_report(out / "report.json", report)
        return report

    def sensitivity(self) -> Dict:
        n = self.config.network
        topology = build_topology(n, self.base_dir)
        entries = sensitivity_analysis(topology, self.sweep(), n.z_ref, n.goal_param, n.rel_step)
        out = self.out_dir("sensitivity")
        write_csv(out / "sensitivity.csv", ["index", "label", "kind", "sensitivity_db", "tunable", "clamped"],
                  [(e.index, e.label, e.kind, e.sensitivity, e.tunable, e.clamped) for e in entries])
        report = {
            **self.header("sensitivity"),
            "goal_param": n.goal_param,
            "rel_step": n.rel_step,
            "ranking": [{"label": e.label, "kind": e.kind, "sensitivity_db": e.sensitivity,
                         "tunable": e.tunable, "clamped": e.clamped} for e in entries],
        }
        write_report(out / "report.json", report)
        return report

    def optimize(self) -> Dict:
        n, ga = self.config.network, self.config.ga
        sweep = self.sweep()
        topology = build_topology(n, self.base_dir)
        goals = build_goals(self.config.goals, sweep)
        cfg = GaConfig(
            population=ga.population,
            generations=ga.generations,
            mutation_rate=ga.mutation_rate,
            crossover_rate=ga.crossover_rate,
            rng_seed=self.config.rng_seed,
            tournament_size=ga.tournament_size,
            mutation_sigma_decades=ga.mutation_sigma_decades,
            elitism=ga.elitism,
            workers=self.config.workers,
        )

        initial_cost = evaluate_goals(evaluate_chain(topology, sweep, n.z_ref), goals)
        result = optimize_ga(topology, goals, cfg, sweep, n.z_ref)
        best = evaluate_chain(result.topology, sweep, n.z_ref)

        out = self.out_dir("optimize")
        write_csv(out / "ga_trace.csv", ["generation", "best_cost"], result.trace_rows())
        write_csv(out / "response.csv", ["frequency_hz", "s11_db", "s21_db", "s12_db", "s22_db"],
                  network_rows(best))
        report = {
            **self.header("optimize"),
            "initial_cost": initial_cost,
            "best_cost": result.best_cost,
            "generations_run": result.generations_run,
            "goals_met": result.best_cost == 0.0,
            "elements": [{"label": e.label or e.kind.value, "kind": e.kind.value, "value": e.value}
                         for e in result.topology.elements if e.is_passive],
        }
        write_report(out / "report.json", report)
        return report

    # Homodyne source

    def simulate(self, export_stream: bool = False) -> Dict:
        """Spectra, SNR, bandwidth, flatness, LO power sweep and CMRR of the detector model."""
        d = self.config.detector
        model = self.detector_model()
        simulator = HomodyneSimulator(model)

        # Step 1: vacuum and electronic-only spectra
        vacuum = simulator.generate_vacuum_stream(d.lo_power, d.n_samples)
        electronic = simulator.generate_vacuum_stream(0.0, d.n_samples, channel=ELECTRONIC_CHANNEL)
        sig = estimate_spectrum(vacuum, d.segment_len)
        noise = estimate_spectrum(electronic, d.segment_len)
        nyquist = model.sample_rate / 2

        # Step 2: figures of merit
        snr = {f"{f:.6g}": measure_snr_spectrum(sig, noise, f) for f in SNR_PROBE_FREQS if f < nyquist}
        band = (BANDWIDTH_REF_FREQ, min(d.f3db / 2, 0.9 * nyquist))
        bandwidth = measure_bandwidth(sig, BANDWIDTH_REF_FREQ)
        flatness = measure_band_flatness(sig, band)

        # Step 3: LO power sweep and common-mode rejection
        sweep_samples = min(d.n_samples, SWEEP_MAX_SAMPLES)
        sweep = power_sweep(model, SWEEP_POWERS, sweep_samples, band, d.segment_len)
        single, balanced = simulator.generate_cm_tone_streams(d.lo_power, d.tone_freq, d.tone_depth, d.n_samples)
        cmrr = measure_cmrr(estimate_spectrum(single, d.segment_len),
                            estimate_spectrum(balanced, d.segment_len), d.tone_freq)

        out = self.out_dir("simulate")
        write_csv(out / "spectra.csv", ["frequency_hz", "vacuum_psd_db", "electronic_psd_db"],
                  [(f, a, b) for (f, a), (_, b) in zip(sig.to_rows(), noise.to_rows())])
        write_csv(out / "power_sweep.csv", ["lo_power_w", "band_mean_psd_db"],
                  zip(sweep["powers"], sweep["band_mean_psd_db"]))
        if export_stream:
            write_float_stream(out / "vacuum.f32", vacuum.samples, model.sample_rate,
                               d.lo_power, self.config.rng_seed)

        report = {
            **self.header("simulate"),
            "sample_rate": model.sample_rate,
            "lo_power": d.lo_power,
            "resolution_bw": sig.resolution_bw,
            "snr_db": snr,
            "bandwidth_3db_hz": bandwidth,
            "flatness_band_hz": list(band),
            "flatness_db": flatness,
            "power_sweep_slope_db_per_doubling": sweep["slope_db_per_doubling"],
            "cmrr_db": cmrr,
            "cmrr_tone_hz": d.tone_freq,
        }
        write_report(out / "report.json", report)
        return report

    def _source_simulator(self) -> HomodyneSimulator:
        return HomodyneSimulator(self.detector_model(self.config.adc.sample_rate))

    def calibrate_noise(self, simulator: HomodyneSimulator) -> NoisePartition:
        """Partition the source noise from one LO-on and one LO-off record."""
        d = self.config.detector
        measured = simulator.generate_vacuum_stream(d.lo_power, d.n_samples, channel=SOURCE_CHANNEL_BASE)
        electronic = simulator.generate_vacuum_stream(0.0, d.n_samples, channel=ELECTRONIC_CHANNEL)
        noise = NoisePartition.from_streams(measured.samples, electronic.samples, self.config.noise.emax_sigmas)
        logger.info("noise partition: sigma_q %.4g V, sigma_e %.4g V", noise.sigma_q, noise.sigma_e)
        return noise

    def adc_for(self, noise: NoisePartition) -> AdcConfig:
        a = self.config.adc
        if a.half_range is not None:
            return AdcConfig(a.bits, a.half_range)
        return auto_adc(noise, a.bits, a.range_sigmas)

    def source_codes(self, simulator: HomodyneSimulator, adc: AdcConfig, n_codes: int) -> QuantizedCodes:
        """
        Quantized source stream built from consecutive records.

        Record k is channel SOURCE_CHANNEL_BASE + k, so the first record is
        the one the calibration used.
        """
        record = self.config.detector.n_samples
        lo_power = self.config.detector.lo_power
        parts, saturated, produced, k = [], 0, 0, 0
        while produced < n_codes:
            stream = simulator.generate_vacuum_stream(lo_power, record, channel=SOURCE_CHANNEL_BASE + k)
            q = quantize(stream, adc)
            take = min(record, n_codes - produced)
            parts.append(q.codes[:take])
            saturated += int(q.saturation_count)
            produced += take
            k += 1
        return QuantizedCodes(np.concatenate(parts), adc.bits, saturated)

    def _entropy_stage(self) -> Tuple[HomodyneSimulator, NoisePartition, AdcConfig]:
        simulator = self._source_simulator()
        noise = self.calibrate_noise(simulator)
        return simulator, noise, self.adc_for(noise)

    def entropy(self) -> Dict:
        simulator, noise, adc = self._entropy_stage()
        codes = self.source_codes(simulator, adc, self.config.detector.n_samples)
        result = entropy_report(codes, noise, adc)

        out = self.out_dir("entropy")
        counts = code_histogram(codes.codes, adc.bits)
        write_csv(out / "histogram.csv", ["code", "count"], enumerate(counts.tolist()))
        report = {
            **self.header("entropy"),
            **self._entropy_fields(noise, adc, result),
            "sigma_ratio_for_target": {
                "target_bits": TARGET_ENTROPY_BITS,
                "sigma_q_over_delta": sigma_ratio_for_entropy(TARGET_ENTROPY_BITS),
            },
        }
        write_report(out / "report.json", report)
        return report

    def _entropy_fields(self, noise: NoisePartition, adc: AdcConfig, result) -> Dict:
        return {
            "noise": {"sigma_q": noise.sigma_q, "sigma_e": noise.sigma_e, "e_max": noise.e_max},
            "adc": {"bits": adc.bits, "half_range": adc.half_range, "bin_width": adc.bin_width,
                    "sample_rate": self.config.adc.sample_rate},
            "sigma_q_over_delta": noise.sigma_q / adc.bin_width,
            "entropy": result.to_dict(),
            "generation_rate_bound_bps": generation_rate_bound(result.h_min_conditional,
                                                               self.config.adc.sample_rate),
        }

    # Extraction

    def extractor_config(self, h_min_per_bit: float) -> Tuple[ExtractorConfig, SizingMode]:
        e = self.config.extractor
        mode = SizingMode.from_calc_mode(self.config.calc_mode)
        h = e.h_min_per_bit if e.h_min_per_bit is not None else h_min_per_bit
        m_out = size_output(e.n_in, h, e.epsilon_hash, mode)
        return ExtractorConfig(e.n_in, m_out, e.epsilon_hash, h), mode

    def extractor_seed(self, cfg: ExtractorConfig) -> ToeplitzSeed:
        e = self.config.extractor
        if e.seed_file:
            path = self._resolve(e.seed_file)
            if not path.exists():
                raise FileNotFoundError(f"No seed file found at {path}")
            return ToeplitzSeed.from_bytes(path.read_bytes(), cfg.seed_length)
        return ToeplitzSeed.from_int(self.config.rng_seed, cfg.seed_length)

    def _extract(self, codes: np.ndarray, adc_bits: int, cfg: ExtractorConfig) -> ExtractionResult:
        return extract_stream(codes, adc_bits, cfg, self.extractor_seed(cfg),
                              channels=self.config.extractor.channels, workers=self.config.workers)

    def _extraction_fields(self, cfg: ExtractorConfig, mode: SizingMode, result: ExtractionResult) -> Dict:
        e = self.config.extractor
        return {
            "sizing_mode": mode.value,
            "n_in": cfg.n_in,
            "m_out": cfg.m_out,
            "epsilon_hash": cfg.epsilon_hash,
            "h_min_per_bit": cfg.h_min_per_bit,
            "efficiency": efficiency(cfg),
            "effective_rate_bps": effective_rate(e.channels, self.config.adc.sample_rate,
                                                 self.config.adc.bits, cfg.m_out, cfg.n_in),
            "seed_source": "file" if e.seed_file else "rng_seed",
            "extraction": result.to_dict(),
        }

    def extract(self, codes_path: str = None, bench_blocks: int = 0) -> Dict:
        """
        Extract a code file, or the simulated source when no file is given.

        A throughput benchmark, when requested, goes to bench.json: its
        timings are machine dependent.
        """
        out = self.out_dir("extract")
        if codes_path:
            path = self._resolve(codes_path)
            if not path.exists():
                raise FileNotFoundError(f"No code file found at {path}")
            adc_bits = int(read_sidecar(path).get("adc_bits", self.config.adc.bits))
            codes = np.fromfile(path, dtype=np.uint8)
            h = self.config.extractor.h_min_per_bit
            if h is None:
                # no noise model for an external file: fall back to the empirical estimate
                h = empirical_min_entropy(codes, adc_bits) / adc_bits
                logger.warning("no h_min_per_bit configured; using the empirical estimate %.4f", h)
            source = {"codes_file": str(codes_path), "adc_bits": adc_bits}
        else:
            simulator, noise, adc = self._entropy_stage()
            codes_q = self.source_codes(simulator, adc, self.config.detector.n_samples)
            result = entropy_report(codes_q, noise, adc)
            codes, adc_bits, h = codes_q.codes, adc.bits, result.h_min_per_bit
            source = {"simulated": True, "adc_bits": adc_bits, "entropy": result.to_dict()}

        cfg, mode = self.extractor_config(h)
        extraction = self._extract(codes, adc_bits, cfg)
        fields = self._extraction_fields(cfg, mode, extraction)
        write_bits(out / "extracted.bin", extraction.merged_bits(), {
            "n_in": cfg.n_in, "m_out": cfg.m_out, "blocks": extraction.blocks,
            "channels": extraction.channels, "seed_digests": extraction.seed_digests,
            "config_digest": self.digest,
        })
        report = {**self.header("extract"), "source": source, **fields}
        write_report(out / "report.json", report)

        if bench_blocks:
            workers = sorted({1, self.config.workers})
            write_report(out / "bench.json", throughput_bench(cfg, bench_blocks, workers, self.config.rng_seed))
        return report

    # Tomography

    def husimi(self) -> Dict:
        t = self.config.tomography
        model = HeterodyneModel(t.slope_p, t.intercept_p, t.slope_q, t.intercept_q,
                                self.config.adc.sample_rate, self.config.rng_seed)

        # Step 1: shot-noise calibration over the LO power grid
        powers = calibration_powers()
        streams = [generate_heterodyne_stream(p, model, t.n_pairs, stream_index=k)
                   for k, p in enumerate(powers)]
        fits = calibrate_shot_noise(streams)

        # Step 2: normalize the measurement stream and histogram it
        measurement = generate_heterodyne_stream(t.at_power, model, t.n_pairs, stream_index=len(powers))
        points = normalize_quadratures(measurement, fits, t.at_power)
        spec = GridSpec(t.bins, t.extent)
        grid = reconstruct_husimi(points, spec)
        theory = theoretical_vacuum_husimi(spec)

        out = self.out_dir("husimi")
        write_csv(out / "calibration.csv", ["lo_power_w", "variance_p", "variance_q"],
                  [(s.lo_power, float(np.var(s.p)), float(np.var(s.q))) for s in streams])
        write_csv(out / "husimi.csv", ["re_alpha", "im_alpha", "density", "vacuum_density"],
                  [(x, y, q, float(theory.density[i // spec.bins, i % spec.bins]))
                   for i, (x, y, q) in enumerate(grid.to_rows())])
        report = {
            **self.header("husimi"),
            "calibration": {name: fit.to_dict() for name, fit in fits.items()},
            "at_power": t.at_power,
            "variances": points.variances(),
            "degenerate": points.degenerate,
            "peak_density": grid.peak_density(),
            "vacuum_peak_density": 1 / math.pi,
            "overlap": compare_husimi(grid, theory),
            "in_grid_fraction": grid.in_grid_fraction,
            "coverage_warning": grid.coverage_warning,
        }
        write_report(out / "report.json", report)
        return report

    # Statistical tests

    def _sequences(self, bits: np.ndarray) -> List[BitSequence]:
        s = self.config.suite
        count = min(s.batch_size, bits.size // s.sequence_len)
        if count < s.batch_size:
            logger.warning("only %d full sequences of %d bits available (batch size %d)",
                           count, s.sequence_len, s.batch_size)
        return [BitSequence(bits[i * s.sequence_len:(i + 1) * s.sequence_len]) for i in range(count)]

    def _suite(self, bits: np.ndarray) -> SuiteReport:
        s = self.config.suite
        return run_suite(self._sequences(bits), s.alpha,
                         default_tests(s.block_len, s.serial_m, s.apen_m), self.config.workers)

    def _write_suite(self, out: Path, suite: SuiteReport):
        write_csv(out / "suite.csv", ["test", "proportion", "within_ci"], suite.rows())

    def test_bits(self, bits_path: str = None) -> Dict:
        """Run the suite on a packed bit file, or on seeded PCG64 reference bits."""
        s = self.config.suite
        if bits_path:
            bits, _ = read_bits(self._resolve(bits_path))
            source = {"bits_file": str(bits_path)}
        else:
            rng = np.random.default_rng(self.config.rng_seed)
            bits = rng.integers(0, 2, size=s.batch_size * s.sequence_len, dtype=np.uint8)
            source = {"reference_generator": "PCG64"}

        suite = self._suite(bits)
        out = self.out_dir("test")
        self._write_suite(out, suite)
        report = {**self.header("test"), "source": source, "sequence_len": s.sequence_len,
                  "suite": suite.to_dict()}
        write_report(out / "report.json", report)
        return report

    # End to end

    def pipeline(self) -> Dict:
        """
        simulate -> quantize -> entropy -> size -> extract -> test.

        Exactly enough source samples are generated to fill the test batch.
        """
        s, e = self.config.suite, self.config.extractor

        # Step 1: calibrate the source and pick the ADC range
        simulator, noise, adc = self._entropy_stage()
        calibration = self.source_codes(simulator, adc, self.config.detector.n_samples)
        ent = entropy_report(calibration, noise, adc)

        # Step 2: size the extractor from the conditional min-entropy
        cfg, mode = self.extractor_config(ent.h_min_per_bit)
        needed_bits = s.batch_size * s.sequence_len
        blocks = -(-needed_bits // cfg.m_out)
        n_codes = -(-(blocks * cfg.n_in) // adc.bits)
        logger.info("pipeline: %d blocks of %d -> %d bits from %d codes", blocks, cfg.n_in, cfg.m_out, n_codes)

        # Step 3: extract
        codes = self.source_codes(simulator, adc, n_codes)
        extraction = self._extract(codes.codes, adc.bits, cfg)
        bits = extraction.merged_bits()

        # Step 4: test
        suite = self._suite(bits)

        out = self.out_dir("pipeline")
        write_bits(out / "extracted.bin", bits, {
            "n_in": cfg.n_in, "m_out": cfg.m_out, "blocks": extraction.blocks,
            "channels": extraction.channels, "seed_digests": extraction.seed_digests,
            "config_digest": self.digest,
        })
        self._write_suite(out, suite)
        report = {
            **self.header("pipeline"),
            **self._entropy_fields(noise, adc, ent),
            **self._extraction_fields(cfg, mode, extraction),
            "source_saturation_count": codes.saturation_count,
            "suite": suite.to_dict(),
            "all_passed": suite.all_passed,
        }
        write_report(out / "report.json", report)
        return report
