"""
Statistical model of a balanced homodyne detector looking at vacuum.

PSDs are one-sided, in V^2/Hz. Shot noise scales with the (clamped) LO power
and is shaped by a single-pole response with optional in-band ripple;
electronic noise is white with an optional 1/f term.
"""
import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from core.errors import DomainError


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DetectorModel:
    sample_rate: float = 8.0e9  # Hz
    shot_noise_psd_per_mw: float = 1.0e-12  # V^2/Hz per mW of LO
    elec_noise_psd: float = 1.0e-16  # V^2/Hz
    f3db: float = 1.9e9  # Hz
    ripple_db: float = 0.0  # peak in-band deviation
    ripple_period: float = 4.0e8  # Hz
    saturation_power: float = 2.0e-3  # W
    pd_gain_ratio: float = 1.0  # responsivity PD2/PD1
    flicker_corner: float = 0.0  # Hz, 0 disables the 1/f term
    tone_volts_per_mw: float = 0.1  # tone amplitude per mW at full modulation depth
    rng_seed: int = 0

    def validate(self) -> bool:
        if not self.sample_rate > 0:
            raise DomainError("sample_rate must be positive")
        if not self.f3db > 0:
            raise DomainError("f3db must be positive")
        if not self.saturation_power > 0:
            raise DomainError("saturation_power must be positive")
        if not self.pd_gain_ratio > 0:
            raise DomainError("pd_gain_ratio must be positive")
        if self.shot_noise_psd_per_mw < 0 or self.elec_noise_psd < 0:
            raise DomainError("noise densities must be non-negative")
        if self.ripple_db < 0 or not self.ripple_period > 0:
            raise DomainError("ripple_db must be non-negative and ripple_period positive")
        if self.flicker_corner < 0:
            raise DomainError("flicker_corner must be non-negative")
        return True

    def effective_power(self, lo_power: float) -> float:
        """LO power after the saturation clamp (W)."""
        return min(lo_power, self.saturation_power)

    def response(self, f: np.ndarray) -> np.ndarray:
        """Power response |H(f)|^2 including ripple."""
        f = np.asarray(f, dtype=float)
        shape = 1.0 / (1.0 + (f / self.f3db) ** 2)
        if self.ripple_db:
            shape = shape * 10 ** (self.ripple_db * np.sin(2 * np.pi * f / self.ripple_period) / 10)
        return shape

    def shot_psd(self, f: np.ndarray, lo_power: float) -> np.ndarray:
        return self.shot_noise_psd_per_mw * self.effective_power(lo_power) * 1e3 * self.response(f)

    def elec_psd(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        psd = np.full(f.shape, self.elec_noise_psd)
        if self.flicker_corner:
            with np.errstate(divide="ignore"):
                flicker = np.where(f > 0, self.flicker_corner / np.maximum(f, 1e-300), 0.0)
            psd = psd * (1.0 + flicker)
        return psd


@dataclass(frozen=True)
class SampleStream:
    samples: np.ndarray  # V
    sample_rate: float  # Hz
    lo_power: float  # W

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        object.__setattr__(self, "samples", samples)
        if samples.size == 0:
            raise DomainError("sample stream is empty")
        if not np.all(np.isfinite(samples)):
            raise DomainError("sample stream contains non-finite values")

    def __len__(self) -> int:
        return self.samples.size

    @property
    def variance(self) -> float:
        return float(np.var(self.samples))


def _shaped_noise(rng: np.random.Generator, n: int, fs: float, psd_fn) -> np.ndarray:
    """Gaussian noise with one-sided PSD psd_fn(f), shaped in the frequency domain."""
    white = rng.standard_normal(n)
    f = np.fft.rfftfreq(n, d=1.0 / fs)
    # unit-variance white noise has one-sided PSD 2/fs
    gain = np.sqrt(psd_fn(f) * fs / 2.0)
    return np.fft.irfft(np.fft.rfft(white) * gain, n)


class HomodyneSimulator:
    """
    Generates detector output streams for a DetectorModel.

    The shot and electronic components come from separate child streams of
    the model seed, so they are independent and each is reproducible.
    """

    def __init__(self, model: DetectorModel = None):
        """
        Initialize the simulator.

        Args:
            model: Detector model (default DetectorModel())
        """
        self.model = model or DetectorModel()
        self.model.validate()

    def _generators(self, channel: int) -> Tuple[np.random.Generator, np.random.Generator]:
        seq = np.random.SeedSequence([self.model.rng_seed, channel])
        shot_seq, elec_seq = seq.spawn(2)
        return np.random.default_rng(shot_seq), np.random.default_rng(elec_seq)

    def generate_components(self, lo_power: float, n_samples: int,
                            channel: int = 0) -> Tuple[np.ndarray, np.ndarray]:
        """
        Return the shot and electronic noise components separately.

        Raises:
            DomainError: If lo_power is negative or n_samples not positive
        """
        if lo_power < 0:
            raise DomainError("LO power must be non-negative")
        if n_samples <= 0:
            raise DomainError("n_samples must be positive")
        m = self.model
        if lo_power > m.saturation_power:
            logger.info("LO power %.3g W clamped to saturation power %.3g W", lo_power, m.saturation_power)

        shot_rng, elec_rng = self._generators(channel)
        shot = _shaped_noise(shot_rng, n_samples, m.sample_rate, lambda f: m.shot_psd(f, lo_power))
        elec = _shaped_noise(elec_rng, n_samples, m.sample_rate, m.elec_psd)
        return shot, elec

    def generate_vacuum_stream(self, lo_power: float, n_samples: int, channel: int = 0) -> SampleStream:
        shot, elec = self.generate_components(lo_power, n_samples, channel)
        return SampleStream(shot + elec, self.model.sample_rate, lo_power)

    def generate_cm_tone_streams(
        self,
        lo_power: float,
        tone_freq: float,
        tone_depth: float,
        n_samples: int
    ) -> Tuple[SampleStream, SampleStream]:
        """
        Streams for a common-mode rejection measurement.

        The single-PD stream sees half the LO and the full tone amplitude; the
        balanced stream keeps the tone residual A * |1 - pd_gain_ratio|.

        Returns:
            (single_pd, balanced) streams
        """
        m = self.model
        if not 0 < tone_freq < m.sample_rate / 2:
            raise DomainError("tone frequency must lie in (0, sample_rate/2) to avoid aliasing")
        if not 0 < tone_depth < 1:
            raise DomainError("tone depth must lie in (0, 1)")

        t = np.arange(n_samples) / m.sample_rate
        amplitude = tone_depth * m.tone_volts_per_mw * m.effective_power(lo_power) * 1e3
        tone = np.sin(2 * np.pi * tone_freq * t)

        shot_1, elec_1 = self.generate_components(lo_power / 2, n_samples, channel=1)
        single = SampleStream(amplitude * tone + shot_1 + elec_1, m.sample_rate, lo_power / 2)

        shot_b, elec_b = self.generate_components(lo_power, n_samples, channel=2)
        residual = amplitude * abs(1 - m.pd_gain_ratio)
        balanced = SampleStream(residual * tone + shot_b + elec_b, m.sample_rate, lo_power)
        return single, balanced


def generate_vacuum_stream(m: DetectorModel, lo_power: float, n_samples: int) -> SampleStream:
    return HomodyneSimulator(m).generate_vacuum_stream(lo_power, n_samples)


def generate_cm_tone_streams(m: DetectorModel, lo_power: float, tone_freq: float,
                             tone_depth: float, n_samples: int) -> Tuple[SampleStream, SampleStream]:
    return HomodyneSimulator(m).generate_cm_tone_streams(lo_power, tone_freq, tone_depth, n_samples)


def gain_ratio_for_cmrr(cmrr_db: float) -> float:
    """PD responsivity ratio whose residual tone sits cmrr_db below the single-PD tone."""
    return 1.0 - 10 ** (-cmrr_db / 20)
