"""
NIST SP 800-22 style randomness tests.

Seven tests are implemented: frequency (monobit), block frequency, runs,
longest run of ones in a block, cumulative sums, serial and approximate
entropy. P-values follow the reference formulas (erfc and the regularized
upper incomplete gamma function).
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np
from scipy import special, stats

from config.settings import settings
from core.errors import ApplicabilityError, DomainError


logger = logging.getLogger(__name__)

MIN_BATCH = 10

# (block length M, class upper bounds v_0..v_K, class probabilities) by minimum n
LONGEST_RUN_TABLES = (
    (750_000, 10_000, (10, 11, 12, 13, 14, 15, 16),
     (0.0882, 0.2092, 0.2483, 0.1933, 0.1208, 0.0675, 0.0727)),
    (6_272, 128, (4, 5, 6, 7, 8, 9),
     (0.1174, 0.2430, 0.2493, 0.1752, 0.1027, 0.1124)),
    (128, 8, (1, 2, 3, 4),
     (0.2148, 0.3672, 0.2305, 0.1875)),
)


@dataclass(frozen=True)
class BitSequence:
    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=np.uint8)
        if bits.ndim != 1 or bits.size == 0:
            raise DomainError("bit sequence must be one-dimensional and non-empty")
        if np.any(bits > 1):
            raise DomainError("bit sequence may only hold 0 and 1")
        object.__setattr__(self, "bits", bits)

    @classmethod
    def from_packed(cls, data: bytes, length: int) -> "BitSequence":
        """MSB-first packed bytes with an explicit bit count."""
        if len(data) * 8 < length:
            raise DomainError(f"{len(data)} bytes cannot hold {length} bits")
        return cls(np.unpackbits(np.frombuffer(data, dtype=np.uint8), count=length))

    def __len__(self) -> int:
        return self.bits.size

    @property
    def plus_minus(self) -> np.ndarray:
        return 2 * self.bits.astype(np.int64) - 1


@dataclass(frozen=True)
class TestResult:
    __test__ = False

    test_name: str
    p_value: float
    passed: bool
    params_echo: str = ""

    def to_dict(self) -> Dict:
        return {"test_name": self.test_name, "p_value": self.p_value,
                "passed": self.passed, "params_echo": self.params_echo}


def _result(name: str, p: float, alpha: float, echo: str = "") -> TestResult:
    p = min(1.0, max(0.0, float(p)))
    return TestResult(name, p, p >= alpha, echo)


def _require(condition: bool, message: str):
    if not condition:
        raise ApplicabilityError(message)


def monobit_frequency(s: BitSequence, alpha: float = None) -> TestResult:
    alpha = alpha or settings.ALPHA
    n = len(s)
    _require(n >= 100, f"frequency test needs n >= 100, got {n}")
    s_obs = abs(int(s.plus_minus.sum())) / math.sqrt(n)
    return _result("monobit_frequency", special.erfc(s_obs / math.sqrt(2)), alpha, f"n={n}")


def block_frequency(s: BitSequence, block_len: int = None, alpha: float = None) -> TestResult:
    alpha = alpha or settings.ALPHA
    m = block_len or settings.BLOCK_FREQUENCY_LEN
    n = len(s)
    _require(n >= 100 and m >= 2 and n >= m, f"block frequency test needs n >= 100 and M <= n (n={n}, M={m})")

    blocks = n // m
    pi = s.bits[: blocks * m].reshape(blocks, m).mean(axis=1)
    chi2 = 4 * m * float(np.sum((pi - 0.5) ** 2))
    return _result("block_frequency", special.gammaincc(blocks / 2, chi2 / 2), alpha, f"n={n} M={m}")


def runs(s: BitSequence, alpha: float = None) -> TestResult:
    alpha = alpha or settings.ALPHA
    n = len(s)
    _require(n >= 100, f"runs test needs n >= 100, got {n}")

    pi = float(s.bits.mean())
    # frequency prerequisite
    if abs(pi - 0.5) >= 2 / math.sqrt(n):
        return _result("runs", 0.0, alpha, f"n={n} prerequisite failed pi={pi:.6f}")

    v_obs = 1 + int(np.count_nonzero(s.bits[1:] != s.bits[:-1]))
    num = abs(v_obs - 2 * n * pi * (1 - pi))
    den = 2 * math.sqrt(2 * n) * pi * (1 - pi)
    return _result("runs", special.erfc(num / den), alpha, f"n={n}")


def _longest_runs(blocks: np.ndarray) -> np.ndarray:
    current = np.zeros(blocks.shape[0], dtype=np.int64)
    longest = np.zeros(blocks.shape[0], dtype=np.int64)
    for col in blocks.T:
        current = (current + 1) * col
        np.maximum(longest, current, out=longest)
    return longest


def longest_run_in_block(s: BitSequence, alpha: float = None) -> TestResult:
    alpha = alpha or settings.ALPHA
    n = len(s)
    _require(n >= 128, f"longest run test needs n >= 128, got {n}")

    m, bounds, probs = next((m, b, p) for n_min, m, b, p in LONGEST_RUN_TABLES if n >= n_min)
    n_blocks = n // m
    longest = _longest_runs(s.bits[: n_blocks * m].reshape(n_blocks, m))

    clipped = np.clip(longest, bounds[0], bounds[-1])
    v = np.array([np.count_nonzero(clipped == b) for b in bounds], dtype=float)
    expected = n_blocks * np.asarray(probs)
    chi2 = float(np.sum((v - expected) ** 2 / expected))
    k = len(bounds) - 1
    return _result("longest_run_in_block", special.gammaincc(k / 2, chi2 / 2), alpha, f"n={n} M={m} N={n_blocks}")


def cumulative_sums(s: BitSequence, mode: str = "forward", alpha: float = None) -> TestResult:
    alpha = alpha or settings.ALPHA
    if mode not in ("forward", "backward"):
        raise DomainError(f"unknown cumulative sums mode {mode!r}")
    n = len(s)
    _require(n >= 100, f"cumulative sums test needs n >= 100, got {n}")

    x = s.plus_minus if mode == "forward" else s.plus_minus[::-1]
    z = int(np.max(np.abs(np.cumsum(x))))
    root_n = math.sqrt(n)

    total = 0.0
    for k in range(int((-n / z + 1) / 4), int((n / z - 1) / 4) + 1):
        total += special.ndtr((4 * k + 1) * z / root_n) - special.ndtr((4 * k - 1) * z / root_n)
    for k in range(int((-n / z - 3) / 4), int((n / z - 1) / 4) + 1):
        total -= special.ndtr((4 * k + 3) * z / root_n) - special.ndtr((4 * k + 1) * z / root_n)
    return _result(f"cumulative_sums_{mode}", 1.0 - total, alpha, f"n={n} z={z}")


def _pattern_counts(bits: np.ndarray, m: int) -> np.ndarray:
    """Counts of every overlapping m-bit pattern, wrapping around the end."""
    if m == 0:
        return np.array([bits.size])
    wrapped = np.concatenate([bits, bits[: m - 1]]).astype(np.int64)
    n = bits.size
    values = np.zeros(n, dtype=np.int64)
    for k in range(m):
        values = (values << 1) | wrapped[k:k + n]
    return np.bincount(values, minlength=1 << m)


def _psi_squared(bits: np.ndarray, m: int) -> float:
    if m <= 0:
        return 0.0
    counts = _pattern_counts(bits, m).astype(float)
    n = bits.size
    return (1 << m) / n * float(np.sum(counts ** 2)) - n


def serial(s: BitSequence, m: int = None, variant: str = "delta1", alpha: float = None) -> TestResult:
    """
    Serial test.

    Args:
        variant: 'delta1' reports the first difference statistic,
            'delta2' the second difference
    """
    alpha = alpha or settings.ALPHA
    m = m or settings.SERIAL_M
    if variant not in ("delta1", "delta2"):
        raise DomainError(f"unknown serial variant {variant!r}")
    n = len(s)
    _require(m >= 2 and m < int(math.log2(n)) - 2, f"serial test needs 2 <= m < log2(n) - 2 (n={n}, m={m})")

    psi_m, psi_1, psi_2 = (_psi_squared(s.bits, m - d) for d in range(3))
    if variant == "delta1":
        p = special.gammaincc(2 ** (m - 2), (psi_m - psi_1) / 2)
    else:
        p = special.gammaincc(2 ** (m - 3), (psi_m - 2 * psi_1 + psi_2) / 2)
    return _result(f"serial_{variant}", p, alpha, f"n={n} m={m}")


def _phi(bits: np.ndarray, m: int) -> float:
    counts = _pattern_counts(bits, m)
    c = counts[counts > 0] / bits.size
    return float(np.sum(c * np.log(c)))


def approximate_entropy(s: BitSequence, m: int = None, alpha: float = None) -> TestResult:
    alpha = alpha or settings.ALPHA
    m = m or settings.APEN_M
    n = len(s)
    _require(m >= 1 and m < int(math.log2(n)) - 5,
             f"approximate entropy test needs 1 <= m < log2(n) - 5 (n={n}, m={m})")

    apen = _phi(s.bits, m) - _phi(s.bits, m + 1)
    chi2 = 2 * n * (math.log(2) - apen)
    return _result("approximate_entropy", special.gammaincc(2 ** (m - 1), chi2 / 2), alpha, f"n={n} m={m}")


TestFn = Callable[..., TestResult]


def default_tests(block_len: int = None, serial_m: int = None, apen_m: int = None) -> Dict[str, TestFn]:
    """Suite rows; the serial and cumulative sums tests each report two rows."""
    return {
        "monobit_frequency": monobit_frequency,
        "block_frequency": partial(block_frequency, block_len=block_len),
        "runs": runs,
        "longest_run_in_block": longest_run_in_block,
        "cumulative_sums_forward": partial(cumulative_sums, mode="forward"),
        "cumulative_sums_backward": partial(cumulative_sums, mode="backward"),
        "serial_delta1": partial(serial, m=serial_m, variant="delta1"),
        "serial_delta2": partial(serial, m=serial_m, variant="delta2"),
        "approximate_entropy": partial(approximate_entropy, m=apen_m),
    }


def proportion_interval(alpha: float, k: int) -> Tuple[float, float]:
    """Pass-proportion confidence interval (1 - alpha) +/- 3 sqrt(alpha (1 - alpha) / k)."""
    p_hat = 1 - alpha
    half = 3 * math.sqrt(p_hat * (1 - p_hat) / k)
    return p_hat - half, p_hat + half


def pvalue_uniformity(p_values: Sequence[float], level: float = 0.01) -> Dict:
    """Kolmogorov-Smirnov check of P-values against U(0, 1)."""
    p_values = np.asarray(p_values, dtype=float)
    if p_values.size == 0:
        raise DomainError("no P-values to check")
    result = stats.kstest(p_values, "uniform")
    critical = float(stats.kstwo.ppf(1 - level, p_values.size))
    return {"statistic": float(result.statistic), "p_value": float(result.pvalue),
            "critical": critical, "uniform": float(result.statistic) < critical}


@dataclass
class SuiteReport:
    alpha: float
    batch_size: int
    ci_low: float
    ci_high: float
    results: Dict[str, List[TestResult]] = field(default_factory=dict)

    def proportion(self, name: str) -> float:
        rows = self.results[name]
        return sum(r.passed for r in rows) / len(rows)

    def verdict(self, name: str) -> bool:
        return self.ci_low <= self.proportion(name) <= self.ci_high

    @property
    def all_passed(self) -> bool:
        return all(self.verdict(name) for name in self.results)

    def uniformity(self, name: str) -> Dict:
        return pvalue_uniformity([r.p_value for r in self.results[name]])

    def rows(self) -> List[Tuple[str, float, bool]]:
        return [(name, self.proportion(name), self.verdict(name)) for name in self.results]

    def to_dict(self) -> Dict:
        return {
            "alpha": self.alpha,
            "batch_size": self.batch_size,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "all_passed": self.all_passed,
            "tests": {
                name: {
                    "proportion": self.proportion(name),
                    "within_ci": self.verdict(name),
                    "p_values": [r.p_value for r in rows],
                }
                for name, rows in self.results.items()
            },
        }


def run_suite(
    sequences: Sequence[BitSequence],
    alpha: float = None,
    tests: Dict[str, TestFn] = None,
    workers: int = None
) -> SuiteReport:
    """
    Run every test on every sequence of a batch.

    Args:
        sequences: Batch of at least 10 sequences
        alpha: Significance level
        tests: Mapping of row name to test function (default: default_tests())
        workers: Worker threads over sequences

    Returns:
        SuiteReport with per-test pass proportions and the confidence interval
    """
    alpha = alpha or settings.ALPHA
    workers = workers or settings.WORKERS
    tests = tests or default_tests()
    k = len(sequences)
    if k < MIN_BATCH:
        raise DomainError(f"suite needs a batch of at least {MIN_BATCH} sequences, got {k}")

    def run_one(seq: BitSequence) -> Dict[str, TestResult]:
        return {name: fn(seq, alpha=alpha) for name, fn in tests.items()}

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_sequence = list(pool.map(run_one, sequences))
    else:
        per_sequence = [run_one(seq) for seq in sequences]

    ci_low, ci_high = proportion_interval(alpha, k)
    report = SuiteReport(alpha, k, ci_low, ci_high,
                         {name: [r[name] for r in per_sequence] for name in tests})
    for name, proportion, ok in report.rows():
        logger.info("%-26s proportion %.4f %s", name, proportion, "ok" if ok else "OUTSIDE CI")
    return report
