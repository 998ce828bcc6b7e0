import argparse


SUBCOMMANDS = (
    "design-snr",
    "design-cascade",
    "stability",
    "sensitivity",
    "optimize",
    "simulate",
    "entropy",
    "extract",
    "husimi",
    "test",
    "pipeline",
)


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError(f"{text} is not an unsigned 64-bit integer")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"{text} must be a positive integer")
    return value


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML run configuration (defaults when omitted)")
    common.add_argument("--seed", type=_u64, help="rng seed, overrides the config")
    common.add_argument("--mode", choices=("paper-literal", "standard"),
                        help="calculation mode, overrides the config")
    common.add_argument("--out", help="output directory, overrides the config")
    common.add_argument("--workers", type=_positive_int, help="worker threads, overrides the config")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = argparse.ArgumentParser(
        prog="bhd-qrng",
        description="Design and verification chain of a balanced homodyne vacuum-noise QRNG.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("design-snr", parents=[common], help="shot-noise-limited photodiode SNR")
    p.add_argument("--photodiode", help="catalog label or inline [[design.photodiodes]] label")

    p = sub.add_parser("design-cascade", parents=[common], help="amplifier noise figure and output SNR")
    p.add_argument("--photodiode", help="catalog label or inline [[design.photodiodes]] label")
    p.add_argument("--amplifier", action="append", metavar="LABEL",
                   help="repeat to compare several (default: all in the config)")

    sub.add_parser("stability", parents=[common], help="Rollett K and mu factors of the network")
    sub.add_parser("sensitivity", parents=[common], help="element sensitivity ranking")
    sub.add_parser("optimize", parents=[common], help="genetic optimization of element values")

    p = sub.add_parser("simulate", parents=[common], help="simulated detector spectra and figures of merit")
    p.add_argument("--export-stream", action="store_true", help="also write the vacuum stream as float32")

    sub.add_parser("entropy", parents=[common], help="quantization and min-entropy of the source")

    p = sub.add_parser("extract", parents=[common], help="Toeplitz extraction")
    p.add_argument("--codes", help="ADC code file (one code per byte, JSON sidecar)")
    p.add_argument("--bench", type=int, default=0, metavar="BLOCKS",
                   help="also time extraction of BLOCKS synthetic blocks")

    sub.add_parser("husimi", parents=[common], help="shot-noise calibration and Husimi reconstruction")

    p = sub.add_parser("test", parents=[common], help="statistical test suite")
    p.add_argument("--bits", help="packed bit file with JSON sidecar (default: PCG64 reference bits)")

    sub.add_parser("pipeline", parents=[common], help="simulate, quantize, extract and test end to end")
    return parser
