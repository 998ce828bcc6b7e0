"""Spectrum estimation and the detector figures of merit measured on it."""
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage, signal

from config.settings import settings
from core.errors import DomainError, MeasurementError
from core.homodyne_sim import DetectorModel, HomodyneSimulator, SampleStream


logger = logging.getLogger(__name__)

TONE_HALF_WIDTH_BINS = 2
PROMINENCE_FLOOR_BINS = 24
MIN_TONE_PROMINENCE_DB = 10.0


@dataclass(frozen=True)
class SpectrumEstimate:
    frequencies: np.ndarray  # Hz
    psd_db: np.ndarray  # dB re 1 V^2/Hz
    resolution_bw: float  # Hz

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "psd_db", np.asarray(self.psd_db, dtype=float))
        if f.size == 0 or f.shape != self.psd_db.shape:
            raise DomainError("spectrum needs one PSD value per frequency")
        if f[0] < 0 or np.any(np.diff(f) <= 0):
            raise DomainError("spectrum frequencies must be non-negative and strictly increasing")

    @property
    def psd(self) -> np.ndarray:
        """Linear PSD (V^2/Hz)."""
        return 10 ** (self.psd_db / 10)

    def same_grid(self, other: "SpectrumEstimate") -> bool:
        return self.frequencies.shape == other.frequencies.shape and np.array_equal(
            self.frequencies, other.frequencies)

    def bin_index(self, f: float) -> int:
        if not self.frequencies[0] <= f <= self.frequencies[-1]:
            raise DomainError(f"{f:.6g} Hz lies outside the spectrum grid")
        return int(np.argmin(np.abs(self.frequencies - f)))

    def to_rows(self) -> List[Tuple[float, float]]:
        return list(zip(self.frequencies.tolist(), self.psd_db.tolist()))


def _is_power_of_two(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


def estimate_spectrum(s: SampleStream, segment_len: int = None) -> SpectrumEstimate:
    """
    Averaged-periodogram (Welch) PSD of a sample stream.

    Hann window, 50% overlap, no detrending, one-sided density scaling, so
    the PSD integrates to the stream's mean-square value.

    Args:
        s: Sample stream
        segment_len: Segment length, a power of two no longer than the stream

    Returns:
        SpectrumEstimate on [0, sample_rate/2]

    Raises:
        DomainError: If segment_len is not a power of two or exceeds the stream
    """
    segment_len = segment_len or settings.SEGMENT_LEN
    if not _is_power_of_two(segment_len):
        raise DomainError(f"segment length {segment_len} is not a power of two")
    if segment_len > len(s):
        raise DomainError(f"segment length {segment_len} exceeds stream length {len(s)}")

    freqs, psd = signal.welch(
        s.samples,
        fs=s.sample_rate,
        window="hann",
        nperseg=segment_len,
        noverlap=segment_len // 2,
        detrend=False,
        return_onesided=True,
        scaling="density",
    )
    with np.errstate(divide="ignore"):
        psd_db = 10 * np.log10(psd)
    return SpectrumEstimate(freqs, psd_db, s.sample_rate / segment_len)


def _smooth_db(psd_db: np.ndarray, bins: int, average: bool = False) -> np.ndarray:
    """Median-smooth a dB spectrum, optionally followed by a moving average.

    The DC and Nyquist bins carry half weight in a one-sided estimate and are
    replaced by their neighbours before smoothing.
    """
    values = psd_db.copy()
    if values.size >= 3:
        values[0], values[-1] = values[1], values[-2]
    if bins > 1 and values.size >= bins:
        values = ndimage.median_filter(values, size=bins, mode="nearest")
        if average:
            values = ndimage.uniform_filter1d(values, size=bins, mode="nearest")
    return values


def measure_snr_spectrum(sig: SpectrumEstimate, noise: SpectrumEstimate, f: float,
                         smoothing_bins: int = None) -> float:
    """SNR (dB) at the bin nearest f, comparing median-smoothed spectra."""
    if not sig.same_grid(noise):
        raise DomainError("signal and noise spectra are on different frequency grids")
    k = sig.bin_index(f)
    bins = smoothing_bins or settings.SMOOTHING_BINS
    return float(_smooth_db(sig.psd_db, bins)[k] - _smooth_db(noise.psd_db, bins)[k])


def _band_mask(s: SpectrumEstimate, band: Tuple[float, float]) -> np.ndarray:
    lo, hi = band
    if lo > hi:
        raise DomainError("band edges are reversed")
    if lo < s.frequencies[0] or hi > s.frequencies[-1]:
        raise DomainError("band lies outside the spectrum grid")
    mask = (s.frequencies >= lo) & (s.frequencies <= hi)
    if not mask.any():
        raise DomainError("band contains no spectrum bins")
    return mask


def measure_band_flatness(s: SpectrumEstimate, band: Tuple[float, float],
                          smoothing_bins: int = None) -> float:
    """
    In-band flatness as a +/- value.

    Returns:
        Half the peak-to-peak range (dB) of the median-smoothed in-band PSD
    """
    mask = _band_mask(s, band)
    smoothed = _smooth_db(s.psd_db, smoothing_bins or settings.SMOOTHING_BINS)[mask]
    return float((smoothed.max() - smoothed.min()) / 2)


def measure_bandwidth(s: SpectrumEstimate, ref_freq: float,
                      smoothing_bins: int = None) -> Optional[float]:
    """
    Lowest frequency above ref_freq where the smoothed PSD is 3 dB below it.

    The crossing is linearly interpolated between the two bracketing bins.

    Returns:
        -3 dB frequency in Hz, or None when the PSD never falls 3 dB
    """
    k_ref = s.bin_index(ref_freq)
    smoothed = _smooth_db(s.psd_db, smoothing_bins or settings.SMOOTHING_BINS, average=True)
    target = smoothed[k_ref] - 3.0

    below = np.nonzero(smoothed[k_ref + 1:] <= target)[0]
    if below.size == 0:
        logger.info("no -3 dB crossing above %.4g Hz", ref_freq)
        return None

    k = k_ref + 1 + int(below[0])
    f0, f1 = s.frequencies[k - 1], s.frequencies[k]
    y0, y1 = smoothed[k - 1], smoothed[k]
    if y0 == y1:
        return float(f1)
    return float(f0 + (target - y0) * (f1 - f0) / (y1 - y0))


def tone_prominence(s: SpectrumEstimate, tone_freq: float) -> float:
    """Peak bin near tone_freq relative to the median of the surrounding floor (dB)."""
    k = s.bin_index(tone_freq)
    lo = max(0, k - TONE_HALF_WIDTH_BINS)
    hi = min(s.psd_db.size, k + TONE_HALF_WIDTH_BINS + 1)
    peak = s.psd_db[lo:hi].max()

    floor_lo = max(1, k - PROMINENCE_FLOOR_BINS)
    floor_hi = min(s.psd_db.size, k + PROMINENCE_FLOOR_BINS + 1)
    floor_idx = [i for i in range(floor_lo, floor_hi) if abs(i - k) > TONE_HALF_WIDTH_BINS + 1]
    if not floor_idx:
        raise MeasurementError("not enough bins around the tone to estimate the floor")
    return float(peak - np.median(s.psd_db[floor_idx]))


def _tone_power(s: SpectrumEstimate, k: int) -> float:
    lo = max(0, k - TONE_HALF_WIDTH_BINS)
    hi = min(s.psd_db.size, k + TONE_HALF_WIDTH_BINS + 1)
    return float(np.sum(s.psd[lo:hi]) * s.resolution_bw)


def measure_cmrr(single_pd: SpectrumEstimate, balanced: SpectrumEstimate, tone_freq: float) -> float:
    """
    Common-mode rejection at tone_freq.

    Tone power is integrated over the window main lobe in both spectra.

    Raises:
        MeasurementError: If the tone is not at least 10 dB above the floor
            in the single-photodiode spectrum
        DomainError: If the grids differ
    """
    if not single_pd.same_grid(balanced):
        raise DomainError("single-PD and balanced spectra are on different frequency grids")
    prominence = tone_prominence(single_pd, tone_freq)
    if prominence < MIN_TONE_PROMINENCE_DB:
        raise MeasurementError(
            f"tone at {tone_freq:.6g} Hz is only {prominence:.1f} dB above the floor")

    k = single_pd.bin_index(tone_freq)
    return 10 * math.log10(_tone_power(single_pd, k) / _tone_power(balanced, k))


def band_mean_psd_db(s: SpectrumEstimate, band: Tuple[float, float]) -> float:
    return float(10 * np.log10(np.mean(s.psd[_band_mask(s, band)])))


def power_sweep(
    model: DetectorModel,
    powers: Sequence[float],
    n_samples: int,
    band: Tuple[float, float],
    segment_len: int = None
) -> Dict:
    """
    Band-mean PSD versus LO power, with the fitted dB-per-doubling slope.

    Args:
        model: Detector model
        powers: LO powers in W (positive, at least two)
        n_samples: Samples per stream
        band: Averaging band in Hz
        segment_len: Welch segment length

    Returns:
        Dictionary with 'powers', 'band_mean_psd_db' and 'slope_db_per_doubling'
    """
    powers = [float(p) for p in powers]
    if len(powers) < 2 or min(powers) <= 0:
        raise DomainError("power sweep needs at least two positive LO powers")

    simulator = HomodyneSimulator(model)
    levels = []
    for p in powers:
        spec = estimate_spectrum(simulator.generate_vacuum_stream(p, n_samples), segment_len)
        levels.append(band_mean_psd_db(spec, band))
        logger.debug("LO %.3g W -> band mean %.3f dB", p, levels[-1])

    slope = float(np.polyfit(np.log2(powers), levels, 1)[0])
    return {"powers": powers, "band_mean_psd_db": levels, "slope_db_per_doubling": slope}
