import logging
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Dict, List, Optional

from config.run_config import RunConfig
from config.settings import settings
from core.errors import (
    ApplicabilityError,
    CalibrationError,
    ConfigValidationError,
    DomainError,
    MeasurementError,
    ParseError,
    SizingError,
)
from cli.experiment import ExperimentRunner
from cli.parser import build_parser
from tools.reports import write_timestamps


logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s [%(levelname)s] [%(name)s] %(message)s"

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_DOMAIN = 3
EXIT_PARSE = 4
EXIT_APPLICABILITY = 5

# Order matters: ParseError and ApplicabilityError are checked before their relatives
EXIT_CODES = (
    (ConfigValidationError, EXIT_CONFIG),
    (ParseError, EXIT_PARSE),
    (ApplicabilityError, EXIT_APPLICABILITY),
    (DomainError, EXIT_DOMAIN),
    (SizingError, EXIT_DOMAIN),
    (CalibrationError, EXIT_DOMAIN),
    (MeasurementError, EXIT_DOMAIN),
)


def exit_code_for(exc: BaseException) -> int:
    """Map an exception to the process exit code of its category."""
    for cls, code in EXIT_CODES:
        if isinstance(exc, cls):
            return code
    return EXIT_UNEXPECTED


def configure_logging(verbose: bool = False):
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO, format=LOG_FORMAT, force=True)


def load_config(args) -> RunConfig:
    """
    Load the run configuration and apply the command-line overrides.

    Args:
        args: Parsed arguments

    Returns:
        Validated RunConfig
    """
    config = RunConfig.load(args.config)
    return config.with_overrides(seed=args.seed, mode=args.mode, output_dir=args.out, workers=args.workers)


def _print_summary(lines: List[str]):
    for line in lines:
        print(line)


def handle_design_snr(runner: ExperimentRunner, args) -> Dict:
    report = runner.design_snr(args.photodiode)
    snr = report["snr"]
    _print_summary([f"{report['photodiode']}: {snr['value_db_rounded']:.2f} dB ({report['mode']})"])
    return report


def handle_design_cascade(runner: ExperimentRunner, args) -> Dict:
    report = runner.design_cascade(args.photodiode, args.amplifier)
    _print_summary([
        f"{row['amplifier']}: NF {row['noise_figure']['value_db_rounded']:.2f} dB, "
        f"output SNR {row['output_snr']['value_db_rounded']:.2f} dB"
        for row in report["chains"]
    ])
    return report


def handle_stability(runner: ExperimentRunner, args) -> Dict:
    report = runner.stability()
    verdict = "unconditionally stable" if report["stable_everywhere"] else "not unconditionally stable"
    _print_summary([f"{verdict}; min K {report['min_k']:.4g}"])
    return report


def handle_sensitivity(runner: ExperimentRunner, args) -> Dict:
    report = runner.sensitivity()
    _print_summary([f"{e['label']}: {e['sensitivity_db']:.4g} dB" for e in report["ranking"]])
    return report


def handle_optimize(runner: ExperimentRunner, args) -> Dict:
    report = runner.optimize()
    _print_summary([f"best cost {report['best_cost']:.6g} after {report['generations_run']} generation(s)"]
                   + [f"{e['label']} = {e['value']:.6g}" for e in report["elements"]])
    return report


def handle_simulate(runner: ExperimentRunner, args) -> Dict:
    report = runner.simulate(export_stream=args.export_stream)
    bandwidth = report["bandwidth_3db_hz"]
    _print_summary([
        f"bandwidth {bandwidth / 1e9:.3f} GHz" if bandwidth else "no -3 dB point in the spectrum",
        f"flatness +/-{report['flatness_db']:.2f} dB",
        f"power sweep slope {report['power_sweep_slope_db_per_doubling']:.2f} dB per doubling",
        f"CMRR {report['cmrr_db']:.1f} dB",
    ])
    return report


def handle_entropy(runner: ExperimentRunner, args) -> Dict:
    report = runner.entropy()
    ent = report["entropy"]
    _print_summary([f"conditional min-entropy {ent['h_min_conditional']:.4f} bits/sample "
                    f"(empirical {ent['h_min_empirical']:.4f}), safe={ent['safe']}"])
    return report


def handle_extract(runner: ExperimentRunner, args) -> Dict:
    report = runner.extract(args.codes, args.bench)
    _print_summary([f"{report['extraction']['output_bits']} bits extracted, "
                    f"m_out={report['m_out']} n_in={report['n_in']} ({report['sizing_mode']})"])
    return report


def handle_husimi(runner: ExperimentRunner, args) -> Dict:
    report = runner.husimi()
    _print_summary([f"peak density {report['peak_density']:.4f} (vacuum {report['vacuum_peak_density']:.4f}), "
                    f"overlap {report['overlap']:.4f}"])
    return report


def handle_test(runner: ExperimentRunner, args) -> Dict:
    report = runner.test_bits(args.bits)
    _print_summary([f"all tests within CI: {report['suite']['all_passed']}"])
    return report


def handle_pipeline(runner: ExperimentRunner, args) -> Dict:
    report = runner.pipeline()
    _print_summary([
        f"h_min {report['entropy']['h_min_conditional']:.4f} bits/sample, "
        f"m_out {report['m_out']} of {report['n_in']}",
        f"effective rate {report['effective_rate_bps'] / 1e9:.4f} Gbps",
        f"suite all passed: {report['all_passed']}",
    ])
    return report


HANDLERS: Dict[str, Callable] = {
    "design-snr": handle_design_snr,
    "design-cascade": handle_design_cascade,
    "stability": handle_stability,
    "sensitivity": handle_sensitivity,
    "optimize": handle_optimize,
    "simulate": handle_simulate,
    "entropy": handle_entropy,
    "extract": handle_extract,
    "husimi": handle_husimi,
    "test": handle_test,
    "pipeline": handle_pipeline,
}


def main(argv: Optional[List[str]] = None) -> int:
    """
    Command-line entry point.

    Returns:
        Process exit code
    """
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    started = datetime.now(timezone.utc)

    try:
        settings.validate()
        config = load_config(args)
        base_dir = Path(args.config).resolve().parent if args.config else Path.cwd()
        runner = ExperimentRunner(config, base_dir)
        HANDLERS[args.command](runner, args)
        write_timestamps(runner.out_dir(args.command), started)
    except ConfigValidationError as exc:
        for problem in exc.problems:
            logger.error("config: %s", problem)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        logger.error("%s", exc)
        return EXIT_DOMAIN
    except ValueError as exc:
        code = exit_code_for(exc)
        logger.error("%s: %s", type(exc).__name__, exc)
        return code
    except Exception:
        logger.exception("unexpected failure")
        return EXIT_UNEXPECTED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
