import logging
import math
from dataclasses import dataclass, asdict
from enum import Enum
from typing import Dict, List, Optional

from scipy import constants

from config.settings import settings
from core.errors import DomainError


logger = logging.getLogger(__name__)

ELEMENTARY_CHARGE = constants.e  # C
BOLTZMANN = constants.k  # J/K


class CalcMode(str, Enum):
    """How a formula is evaluated: as printed, or the conventional way."""
    PAPER_LITERAL = "paper_literal"
    STANDARD = "standard"


@dataclass(frozen=True)
class PhotodiodeSpec:
    responsivity: float  # A/W
    dark_current: float  # A
    shunt_resistance: Optional[float]  # ohm, None when the datasheet omits it
    junction_capacitance: float  # F
    bandwidth: float  # Hz
    label: str = ""

    def validate(self) -> bool:
        if not self.responsivity > 0:
            raise DomainError(f"{self.label}: responsivity must be positive")
        if self.dark_current < 0:
            raise DomainError(f"{self.label}: dark current must be non-negative")
        if self.shunt_resistance is None or not self.shunt_resistance > 0:
            raise DomainError(f"{self.label}: shunt resistance must be positive")
        if not self.bandwidth > 0:
            raise DomainError(f"{self.label}: bandwidth must be positive")
        return True


@dataclass(frozen=True)
class AmplifierStageSpec:
    gain_db: float
    noise_figure_db: float
    bandwidth: float  # Hz
    label: str = ""

    def validate(self) -> bool:
        # +inf is accepted as the ideal-first-stage limit
        if math.isnan(self.gain_db) or self.gain_db == -math.inf:
            raise DomainError(f"{self.label}: gain must be finite")
        if not self.bandwidth > 0:
            raise DomainError(f"{self.label}: bandwidth must be positive")
        return True


@dataclass(frozen=True)
class Environment:
    temperature: float = settings.TEMPERATURE_K  # K
    optical_power: float = settings.OPTICAL_POWER_W  # W

    def validate(self) -> bool:
        if not self.temperature > 0:
            raise DomainError("temperature must be positive")
        if self.optical_power < 0:
            raise DomainError("optical power must be non-negative")
        return True


@dataclass(frozen=True)
class SnrReport:
    value_db: float
    mode: CalcMode
    inputs_echo: str

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["mode"] = self.mode.value
        data["value_db_rounded"] = present_db(self.value_db)
        return data


# Component tables
PHOTODIODE_CATALOG: Dict[str, PhotodiodeSpec] = {
    "LSIPD-A75": PhotodiodeSpec(0.90, 18e-12, 50e9, 1.0e-12, 2.5e9, "LSIPD-A75"),
    "LSIPD-A40": PhotodiodeSpec(0.85, 20e-12, 30e9, 0.4e-12, 6.0e9, "LSIPD-A40"),
    "LSIPD-LD50": PhotodiodeSpec(0.90, 5e-12, 100e9, 0.8e-12, 3.0e9, "LSIPD-LD50"),
    "G8195": PhotodiodeSpec(0.95, 20e-12, None, 1.0e-12, 2.0e9, "G8195"),
}

AMPLIFIER_CATALOG: Dict[str, AmplifierStageSpec] = {
    "BGM1013": AmplifierStageSpec(35.5, 4.6, 3.0e9, "BGM1013"),
    "BGA2817": AmplifierStageSpec(24.3, 3.9, 2.15e9, "BGA2817"),
    "ABA-52563": AmplifierStageSpec(21.5, 3.3, 3.5e9, "ABA-52563"),
}


def present_db(value: float) -> float:
    """Round a dB value for presentation (half-even, 2 decimals)."""
    return round(value, 2)


def _coerce_mode(mode) -> CalcMode:
    try:
        return CalcMode(mode)
    except ValueError:
        raise DomainError(f"unknown calculation mode: {mode!r}") from None


def shot_noise_limited_snr(pd: PhotodiodeSpec, env: Environment) -> float:
    """
    Shot-noise-limited SNR of a photodiode against its thermal and dark noise.

    Args:
        pd: Photodiode parameters
        env: Temperature and incident optical power

    Returns:
        SNR in dB

    Raises:
        DomainError: If the optical power or shunt resistance is not positive
    """
    if not env.optical_power > 0:
        raise DomainError("optical power must be positive")
    pd.validate()
    env.validate()

    signal = 2 * ELEMENTARY_CHARGE * env.optical_power * pd.responsivity
    noise = (4 * BOLTZMANN * env.temperature / pd.shunt_resistance
             + 2 * ELEMENTARY_CHARGE * pd.dark_current)
    return 10 * math.log10(signal / noise)


def cascade_noise_figure(
    stage1: AmplifierStageSpec,
    stage2: AmplifierStageSpec,
    mode=CalcMode.STANDARD
) -> float:
    """
    Total noise figure of two cascaded amplifier stages.

    Args:
        stage1: First (input) stage
        stage2: Second stage
        mode: standard applies Friis in the linear domain; paper_literal
            substitutes the dB values into the same formula

    Returns:
        Noise figure in dB

    Raises:
        DomainError: If the first-stage gain is zero in the selected scale
    """
    mode = _coerce_mode(mode)
    stage1.validate()
    stage2.validate()

    if mode is CalcMode.PAPER_LITERAL:
        if stage1.gain_db == 0:
            raise DomainError("first-stage gain of 0 dB makes the literal formula singular")
        return stage1.noise_figure_db + (stage2.noise_figure_db - 1) / stage1.gain_db

    if stage1.gain_db == math.inf:
        return stage1.noise_figure_db
    g1 = 10 ** (stage1.gain_db / 10)
    if g1 == 0:
        raise DomainError("first-stage linear gain is zero")
    f1 = 10 ** (stage1.noise_figure_db / 10)
    f2 = 10 ** (stage2.noise_figure_db / 10)
    return 10 * math.log10(f1 + (f2 - 1) / g1)


def detector_output_snr(input_snr_db: float, nf_db: float, mode=CalcMode.STANDARD) -> float:
    """
    Detector output SNR after the amplifier chain.

    paper_literal divides the dB input SNR by the linear noise factor;
    standard subtracts the noise figure in dB.
    """
    mode = _coerce_mode(mode)
    if mode is CalcMode.PAPER_LITERAL:
        return input_snr_db / 10 ** (nf_db / 10)
    return input_snr_db - nf_db


def snr_from_powers(p_signal: float, p_elec: float) -> float:
    """SNR in dB from signal and electronic noise powers (W)."""
    if not (p_signal > 0 and p_elec > 0):
        raise DomainError("signal and electronic powers must be strictly positive")
    return 10 * math.log10(p_signal / p_elec)


class DetectorDesigner:
    """
    Runs the photodiode -> two-stage amplifier -> output SNR chain.

    In paper_literal mode each intermediate is rounded to two decimals before
    it feeds the next step.
    """

    def __init__(self, env: Environment = None, mode=CalcMode.STANDARD):
        """
        Initialize the designer.

        Args:
            env: Environment (default 300 K, 1 mW)
            mode: Calculation mode for cascade and output SNR
        """
        self.env = env or Environment()
        self.mode = _coerce_mode(mode)

    def photodiode_snr(self, pd: PhotodiodeSpec) -> SnrReport:
        value = shot_noise_limited_snr(pd, self.env)
        echo = (f"pd={pd.label} S={pd.responsivity} A/W i_dark={pd.dark_current} A "
                f"R_sh={pd.shunt_resistance} ohm P={self.env.optical_power} W T={self.env.temperature} K")
        return SnrReport(value, self.mode, echo)

    def cascade(self, stage: AmplifierStageSpec, stage2: AmplifierStageSpec = None) -> SnrReport:
        stage2 = stage2 or stage
        value = cascade_noise_figure(stage, stage2, self.mode)
        echo = f"stage1={stage.label} stage2={stage2.label}"
        return SnrReport(value, self.mode, echo)

    def design_chain(self, pd: PhotodiodeSpec, stage: AmplifierStageSpec) -> Dict[str, SnrReport]:
        """
        Evaluate the full chain for identical amplifier stages.

        Args:
            pd: Photodiode
            stage: Amplifier used for both stages

        Returns:
            Dictionary with 'photodiode_snr', 'noise_figure' and 'output_snr'
        """
        pd_report = self.photodiode_snr(pd)
        nf_report = self.cascade(stage)

        snr_in, nf = pd_report.value_db, nf_report.value_db
        if self.mode is CalcMode.PAPER_LITERAL:
            snr_in, nf = present_db(snr_in), present_db(nf)

        out = detector_output_snr(snr_in, nf, self.mode)
        out_report = SnrReport(out, self.mode, f"input_snr_db={snr_in} nf_db={nf}")
        logger.debug("chain %s/%s -> %.4f dB (%s)", pd.label, stage.label, out, self.mode.value)
        return {"photodiode_snr": pd_report, "noise_figure": nf_report, "output_snr": out_report}

    def compare_amplifiers(self, pd: PhotodiodeSpec, stages: List[AmplifierStageSpec]) -> List[Dict]:
        rows = []
        for stage in stages:
            chain = self.design_chain(pd, stage)
            rows.append({"amplifier": stage.label,
                         **{key: report.to_dict() for key, report in chain.items()}})
        return rows
