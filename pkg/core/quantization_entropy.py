import logging
import math
from dataclasses import asdict, dataclass
from typing import Dict, Optional, Tuple, Union

import numpy as np
from scipy import integrate, special

from config.settings import settings
from core.errors import CalibrationError, DomainError
from core.homodyne_sim import SampleStream


logger = logging.getLogger(__name__)

MAX_ADC_BITS = 16


@dataclass(frozen=True)
class AdcConfig:
    bits: int = settings.ADC_BITS
    half_range: float = 1.0  # V

    def validate(self) -> bool:
        if not 1 <= self.bits <= MAX_ADC_BITS:
            raise DomainError(f"ADC bits must lie in [1, {MAX_ADC_BITS}]")
        if not self.half_range > 0:
            raise DomainError("ADC half range must be positive")
        return True

    @property
    def levels(self) -> int:
        return 1 << self.bits

    @property
    def bin_width(self) -> float:
        return 2 * self.half_range / self.levels


@dataclass(frozen=True)
class NoisePartition:
    sigma_q: float  # V
    sigma_e: float = 0.0  # V
    e_max: float = 0.0  # V

    def validate(self) -> bool:
        if not self.sigma_q > 0:
            raise DomainError("sigma_q must be positive")
        if self.sigma_e < 0 or self.e_max < 0:
            raise DomainError("sigma_e and e_max must be non-negative")
        return True

    @property
    def sigma_total(self) -> float:
        return math.hypot(self.sigma_q, self.sigma_e)

    @classmethod
    def from_streams(cls, measured: np.ndarray, electronic: np.ndarray,
                     emax_sigmas: float = None) -> "NoisePartition":
        """
        Partition measured noise using an electronic-only (LO off) record.

        The quantum variance is the measured variance minus the electronic
        variance; e_max is a multiple of the electronic standard deviation.

        Raises:
            CalibrationError: If the electronic record carries as much or more
                variance than the measured one
        """
        emax_sigmas = settings.EMAX_SIGMA_MULTIPLIER if emax_sigmas is None else emax_sigmas
        var_total = float(np.var(measured))
        var_e = float(np.var(electronic))
        if var_total <= var_e:
            raise CalibrationError("measured variance does not exceed the electronic noise variance")
        sigma_e = math.sqrt(var_e)
        return cls(math.sqrt(var_total - var_e), sigma_e, emax_sigmas * sigma_e)


@dataclass(frozen=True)
class QuantizedCodes:
    codes: np.ndarray
    bits: int
    saturation_count: int = 0

    def __len__(self) -> int:
        return self.codes.size


@dataclass(frozen=True)
class EntropyReport:
    h_min_empirical: float  # bits
    h_min_conditional: float  # bits
    c1: float
    c2: float
    safe: bool
    qcnr_db: Optional[float]
    qcnr_infinite: bool
    bits: int
    saturation_count: int = 0

    @property
    def h_min_per_bit(self) -> float:
        return self.h_min_conditional / self.bits

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["h_min_per_bit"] = self.h_min_per_bit
        return data


def quantize(s: Union[SampleStream, np.ndarray], adc: AdcConfig) -> QuantizedCodes:
    """
    Map voltages to ADC codes.

    Bins are left-closed, right-open: code k covers [-R + k*delta, -R + (k+1)*delta).
    Values below -R give code 0, values at or above +R give the top code;
    both are counted as saturated.

    Args:
        s: Sample stream or raw voltages
        adc: ADC configuration

    Returns:
        QuantizedCodes holding the codes and the saturation count

    Raises:
        DomainError: If any sample is NaN or infinite
    """
    adc.validate()
    samples = s.samples if isinstance(s, SampleStream) else np.asarray(s, dtype=float)
    if not np.all(np.isfinite(samples)):
        raise DomainError(f"{int(np.count_nonzero(~np.isfinite(samples)))} samples are NaN or infinite")

    raw = np.floor((samples + adc.half_range) / adc.bin_width)
    saturated = int(np.count_nonzero((samples < -adc.half_range) | (samples >= adc.half_range)))
    codes = np.clip(raw, 0, adc.levels - 1).astype(np.uint8 if adc.bits <= 8 else np.uint16)

    if saturated:
        logger.warning("%d of %d samples saturated the ADC", saturated, samples.size)
    return QuantizedCodes(codes, adc.bits, saturated)


def code_histogram(codes: np.ndarray, bits: int) -> np.ndarray:
    """Counts per code; histograms of shards can be added together."""
    return np.bincount(np.asarray(codes, dtype=np.int64), minlength=1 << bits)


def min_entropy_from_counts(counts: np.ndarray) -> float:
    total = int(np.sum(counts))
    if total == 0:
        raise DomainError("cannot estimate min-entropy from an empty sample")
    return float(-math.log2(int(np.max(counts)) / total)) + 0.0


def empirical_min_entropy(codes: np.ndarray, bits: int) -> float:
    """-log2 of the most frequent code's relative frequency."""
    codes = np.asarray(codes)
    if codes.size == 0:
        raise DomainError("code sequence is empty")
    return min_entropy_from_counts(code_histogram(codes, bits))


def conditional_min_entropy(noise: NoisePartition, adc: AdcConfig) -> Tuple[float, float, float]:
    """
    Quantum min-entropy conditioned on the classical noise.

    c1 is the worst-case probability of the lowest bin under a classical
    excursion of e_max; c2 is the probability of the central bin.

    Args:
        noise: Noise partition
        adc: ADC configuration

    Returns:
        (h, c1, c2) with h = -log2(max(c1, c2))
    """
    noise.validate()
    adc.validate()
    delta = adc.bin_width
    scale = math.sqrt(2) * noise.sigma_q

    x1 = (noise.e_max - adc.half_range + 1.5 * delta) / scale
    c1 = 0.5 * float(special.erfc(-x1))
    c2 = float(special.erf(delta / (2 * scale)))
    h = -math.log2(max(c1, c2))
    return h, c1, c2


def check_safety(noise: NoisePartition, adc: AdcConfig) -> bool:
    _, c1, c2 = conditional_min_entropy(noise, adc)
    return c1 <= c2


def qcnr(noise: NoisePartition) -> float:
    """Quantum-to-classical noise ratio in dB; math.inf when sigma_e is zero."""
    if noise.sigma_e == 0:
        return math.inf
    return 10 * math.log10(noise.sigma_q ** 2 / noise.sigma_e ** 2)


def sigma_ratio_for_entropy(h_bits: float) -> float:
    """sigma_Q / delta for which the central-bin probability equals 2**-h_bits."""
    if not h_bits > 0:
        raise DomainError("target entropy must be positive")
    return 1.0 / (2 * math.sqrt(2) * float(special.erfinv(2.0 ** -h_bits)))


def max_bin_probability_bruteforce(sigma: float, adc: AdcConfig, mean: float = 0.0) -> float:
    """
    Largest bin probability of a quantized Gaussian, by numeric integration
    of the density over every ADC bin (saturating end bins included).
    """
    adc.validate()
    if not sigma > 0:
        raise DomainError("sigma must be positive")

    def density(v):
        return math.exp(-0.5 * ((v - mean) / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi))

    edges = -adc.half_range + adc.bin_width * np.arange(adc.levels + 1)
    probs = np.empty(adc.levels)
    for k in range(adc.levels):
        probs[k] = integrate.quad(density, edges[k], edges[k + 1], epsabs=1e-15, epsrel=1e-13)[0]
    # saturating end bins also collect the tails
    probs[0] += 0.5 * float(special.erfc((mean + adc.half_range) / (math.sqrt(2) * sigma)))
    probs[-1] += 0.5 * float(special.erfc((adc.half_range - mean) / (math.sqrt(2) * sigma)))
    return float(probs.max())


def generation_rate_bound(h_bits: float, sample_rate: float) -> float:
    """Upper bound on the raw secure generation rate (bits/s)."""
    return h_bits * sample_rate


def auto_adc(noise: NoisePartition, bits: int = None, range_sigmas: float = 4.0) -> AdcConfig:
    """ADC whose half range spans range_sigmas total-noise standard deviations."""
    return AdcConfig(bits or settings.ADC_BITS, range_sigmas * noise.sigma_total)


def entropy_report(codes: QuantizedCodes, noise: NoisePartition, adc: AdcConfig) -> EntropyReport:
    h, c1, c2 = conditional_min_entropy(noise, adc)
    ratio = qcnr(noise)
    infinite = math.isinf(ratio)
    report = EntropyReport(
        h_min_empirical=empirical_min_entropy(codes.codes, adc.bits),
        h_min_conditional=h,
        c1=c1,
        c2=c2,
        safe=c1 <= c2,
        qcnr_db=None if infinite else ratio,
        qcnr_infinite=infinite,
        bits=adc.bits,
        saturation_count=codes.saturation_count,
    )
    if not report.safe:
        logger.warning("operating point is not safe: c1=%.3g > c2=%.3g", c1, c2)
    logger.info("min-entropy %.4f bits/sample (empirical %.4f)", h, report.h_min_empirical)
    return report
