"""
Experiment configuration documents.

A RunConfig is read from TOML. Each table maps onto a section dataclass;
unknown keys and invalid values anywhere in the document are collected and
reported together in one ConfigValidationError.
"""
import logging
import tomllib
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from config.settings import settings
from core.errors import ConfigValidationError, DomainError
from core.detector_design import (
    AMPLIFIER_CATALOG,
    PHOTODIODE_CATALOG,
    AmplifierStageSpec,
    CalcMode,
    PhotodiodeSpec,
)


logger = logging.getLogger(__name__)


PHOTODIODE_KEYS = {"label", "responsivity", "dark_current", "shunt_resistance", "junction_capacitance", "bandwidth"}
AMPLIFIER_KEYS = {"label", "gain_db", "noise_figure_db", "bandwidth"}


def _check_record(path: str, record: Any, keys: set, optional: set, problems: List[str]) -> bool:
    if not isinstance(record, dict):
        problems.append(f"{path}: expected a table")
        return False
    for key in sorted(set(record) - keys):
        problems.append(f"{path}.{key}: unknown key")
    for key in sorted(keys - optional - set(record)):
        problems.append(f"{path}.{key}: missing")
    for key in sorted((keys - {"label"}) & set(record)):
        value = record[key]
        if value is None and key in optional:
            continue
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            problems.append(f"{path}.{key}: expected a number, got {value!r}")
    if "label" in record and not isinstance(record["label"], str):
        problems.append(f"{path}.label: expected a string")
    return set(record) <= keys and keys - optional <= set(record)


@dataclass(frozen=True)
class DesignSection:
    photodiode: str = "LSIPD-LD50"
    # empty: every amplifier in the merged catalog
    amplifiers: List[str] = field(default_factory=list)
    temperature: float = settings.TEMPERATURE_K
    optical_power: float = settings.OPTICAL_POWER_W
    # inline component records, merged over the built-in catalogs by label
    photodiodes: List[Dict[str, Any]] = field(default_factory=list)
    amplifier_specs: List[Dict[str, Any]] = field(default_factory=list)

    def photodiode_catalog(self) -> Dict[str, PhotodiodeSpec]:
        catalog = dict(PHOTODIODE_CATALOG)
        for record in self.photodiodes:
            catalog[record["label"]] = PhotodiodeSpec(
                responsivity=float(record["responsivity"]),
                dark_current=float(record["dark_current"]),
                shunt_resistance=(None if record.get("shunt_resistance") is None
                                  else float(record["shunt_resistance"])),
                junction_capacitance=float(record["junction_capacitance"]),
                bandwidth=float(record["bandwidth"]),
                label=record["label"],
            )
        return catalog

    def amplifier_catalog(self) -> Dict[str, AmplifierStageSpec]:
        catalog = dict(AMPLIFIER_CATALOG)
        for record in self.amplifier_specs:
            catalog[record["label"]] = AmplifierStageSpec(
                float(record["gain_db"]), float(record["noise_figure_db"]),
                float(record["bandwidth"]), record["label"])
        return catalog

    def validate(self) -> List[str]:
        problems = []
        records_ok = True
        for i, record in enumerate(self.photodiodes):
            records_ok &= _check_record(f"design.photodiodes[{i}]", record, PHOTODIODE_KEYS,
                                        {"shunt_resistance"}, problems)
        for i, record in enumerate(self.amplifier_specs):
            records_ok &= _check_record(f"design.amplifier_specs[{i}]", record, AMPLIFIER_KEYS,
                                        set(), problems)
        if not records_ok or problems:
            return problems

        photodiodes, amplifiers = self.photodiode_catalog(), self.amplifier_catalog()
        if self.photodiode not in photodiodes:
            problems.append(f"design.photodiode: unknown photodiode {self.photodiode!r}")
        for name in self.amplifiers:
            if name not in amplifiers:
                problems.append(f"design.amplifiers: unknown amplifier {name!r}")
        for i, record in enumerate(self.amplifier_specs):
            try:
                amplifiers[record["label"]].validate()
            except DomainError as exc:
                problems.append(f"design.amplifier_specs[{i}]: {exc}")
        if not self.temperature > 0:
            problems.append("design.temperature: must be positive")
        if self.optical_power < 0:
            problems.append("design.optical_power: must be non-negative")
        return problems


@dataclass(frozen=True)
class NetworkSection:
    touchstone: Optional[str] = None
    z_ref: float = settings.Z_REF_OHM
    f_start: float = 0.9e9
    f_stop: float = 1.1e9
    n_points: int = 21
    goal_param: str = "S11"
    rel_step: float = settings.SENSITIVITY_REL_STEP
    # cascade order, source to load; bounds default to a fixed value
    elements: List[Dict[str, Any]] = field(default_factory=lambda: [
        {"kind": "series_inductor", "value": 2.0e-8, "bounds": [1.0e-9, 1.0e-7], "label": "L1"},
        {"kind": "shunt_capacitor", "value": 5.0e-13, "bounds": [1.0e-13, 1.0e-11], "label": "C1"},
        {"kind": "series_resistor", "value": 50.0, "label": "R_load"},
    ])

    def validate(self) -> List[str]:
        problems = []
        if not self.z_ref > 0:
            problems.append("network.z_ref: must be positive")
        if not 0 < self.f_start < self.f_stop:
            problems.append("network.f_start/f_stop: need 0 < f_start < f_stop")
        if self.n_points < 2:
            problems.append("network.n_points: need at least 2 points")
        if self.goal_param not in ("S11", "S12", "S21", "S22"):
            problems.append(f"network.goal_param: unknown parameter {self.goal_param!r}")
        if not 0 < self.rel_step <= 0.5:
            problems.append("network.rel_step: must lie in (0, 0.5]")
        if not self.elements:
            problems.append("network.elements: topology must not be empty")
        for i, element in enumerate(self.elements):
            unknown = set(element) - {"kind", "value", "bounds", "label"}
            for key in sorted(unknown):
                problems.append(f"network.elements[{i}].{key}: unknown key")
            if "kind" not in element or "value" not in element:
                problems.append(f"network.elements[{i}]: 'kind' and 'value' are required")
        return problems


@dataclass(frozen=True)
class GaSection:
    population: int = settings.GA_POPULATION
    generations: int = settings.GA_GENERATIONS
    mutation_rate: float = settings.GA_MUTATION_RATE
    crossover_rate: float = settings.GA_CROSSOVER_RATE
    tournament_size: int = settings.GA_TOURNAMENT_SIZE
    mutation_sigma_decades: float = settings.GA_MUTATION_SIGMA_DECADES
    elitism: int = 1

    def validate(self) -> List[str]:
        problems = []
        if self.population < 2:
            problems.append("ga.population: must be at least 2")
        if self.generations < 1:
            problems.append("ga.generations: must be at least 1")
        for name in ("mutation_rate", "crossover_rate"):
            if not 0 <= getattr(self, name) <= 1:
                problems.append(f"ga.{name}: must lie in [0, 1]")
        if not 1 <= self.elitism < max(self.population, 2):
            problems.append("ga.elitism: must lie in [1, population)")
        return problems


@dataclass(frozen=True)
class DetectorSection:
    sample_rate: float = 8.0e9
    shot_noise_psd_per_mw: float = 1.0e-12
    elec_noise_psd: float = 1.0e-16
    f3db: float = 1.9e9
    ripple_db: float = 0.0
    ripple_period: float = 4.0e8
    saturation_power: float = 2.0e-3
    pd_gain_ratio: float = 1.0
    flicker_corner: float = 0.0
    tone_volts_per_mw: float = 0.1
    lo_power: float = 1.0e-3
    n_samples: int = 1 << 20
    segment_len: int = 512
    tone_freq: float = 1.0e8
    tone_depth: float = 0.5

    def validate(self) -> List[str]:
        problems = []
        for name in ("sample_rate", "f3db", "saturation_power", "pd_gain_ratio", "ripple_period"):
            if not getattr(self, name) > 0:
                problems.append(f"detector.{name}: must be positive")
        if self.lo_power < 0:
            problems.append("detector.lo_power: must be non-negative")
        if self.n_samples < 1:
            problems.append("detector.n_samples: must be positive")
        if self.segment_len < 1 or self.segment_len & (self.segment_len - 1):
            problems.append("detector.segment_len: must be a power of two")
        if not 0 < self.tone_depth < 1:
            problems.append("detector.tone_depth: must lie in (0, 1)")
        return problems


@dataclass(frozen=True)
class AdcSection:
    bits: int = settings.ADC_BITS
    sample_rate: float = 0.8e9  # Hz, per channel
    half_range: Optional[float] = None  # None: range_sigmas total-noise std
    range_sigmas: float = 4.0

    def validate(self) -> List[str]:
        problems = []
        if not 1 <= self.bits <= 16:
            problems.append("adc.bits: must lie in [1, 16]")
        if self.half_range is not None and not self.half_range > 0:
            problems.append("adc.half_range: must be positive")
        if not self.range_sigmas > 0:
            problems.append("adc.range_sigmas: must be positive")
        if not self.sample_rate > 0:
            problems.append("adc.sample_rate: must be positive")
        return problems


@dataclass(frozen=True)
class NoiseSection:
    emax_sigmas: float = settings.EMAX_SIGMA_MULTIPLIER

    def validate(self) -> List[str]:
        return [] if self.emax_sigmas >= 0 else ["noise.emax_sigmas: must be non-negative"]


@dataclass(frozen=True)
class ExtractorSection:
    n_in: int = settings.EXTRACTOR_N_IN
    epsilon_hash: float = settings.EPSILON_HASH
    channels: int = 4
    h_min_per_bit: Optional[float] = None  # None: taken from the entropy estimate
    seed_file: Optional[str] = None

    def validate(self) -> List[str]:
        problems = []
        if self.n_in < 1:
            problems.append("extractor.n_in: must be positive")
        if not 0 < self.epsilon_hash <= 1:
            problems.append("extractor.epsilon_hash: must lie in (0, 1]")
        if self.channels < 1:
            problems.append("extractor.channels: must be at least 1")
        if self.h_min_per_bit is not None and not 0 < self.h_min_per_bit <= 1:
            problems.append("extractor.h_min_per_bit: must lie in (0, 1]")
        return problems


@dataclass(frozen=True)
class SuiteSection:
    alpha: float = settings.ALPHA
    sequence_len: int = settings.SEQUENCE_LEN
    batch_size: int = settings.BATCH_SIZE
    block_len: int = settings.BLOCK_FREQUENCY_LEN
    serial_m: int = settings.SERIAL_M
    apen_m: int = settings.APEN_M

    def validate(self) -> List[str]:
        problems = []
        if not 0 < self.alpha < 1:
            problems.append("suite.alpha: must lie in (0, 1)")
        if self.sequence_len < 100:
            problems.append("suite.sequence_len: must be at least 100")
        if self.batch_size < 10:
            problems.append("suite.batch_size: must be at least 10")
        return problems


@dataclass(frozen=True)
class TomographySection:
    slope_p: float = 1.0e3
    intercept_p: float = 1.0e-2
    slope_q: float = 1.0e3
    intercept_q: float = 1.0e-2
    n_pairs: int = 1_000_000
    at_power: float = 1.0e-3
    bins: int = settings.HUSIMI_BINS
    extent: float = settings.HUSIMI_EXTENT

    def validate(self) -> List[str]:
        problems = []
        if min(self.slope_p, self.slope_q, self.intercept_p, self.intercept_q) < 0:
            problems.append("tomography: slopes and intercepts must be non-negative")
        if self.n_pairs < 1:
            problems.append("tomography.n_pairs: must be positive")
        if not self.at_power > 0:
            problems.append("tomography.at_power: must be positive")
        if self.bins < 1 or not self.extent > 0:
            problems.append("tomography.bins/extent: must be positive")
        return problems


SECTIONS = {
    "design": DesignSection,
    "network": NetworkSection,
    "ga": GaSection,
    "detector": DetectorSection,
    "adc": AdcSection,
    "noise": NoiseSection,
    "extractor": ExtractorSection,
    "suite": SuiteSection,
    "tomography": TomographySection,
}
GOAL_KEYS = {"parameter", "comparison", "threshold_db", "band"}
TOP_LEVEL_KEYS = {"rng_seed", "mode", "output_dir", "workers", "goals"} | set(SECTIONS)


def normalize_mode(mode: str) -> str:
    value = str(mode).replace("-", "_")
    try:
        return CalcMode(value).value
    except ValueError:
        raise ConfigValidationError([f"mode: unknown mode {mode!r} (paper-literal or standard)"]) from None


def _coerce(section: str, name: str, expected: Any, value: Any, problems: List[str]) -> Any:
    """Light type check against the default's type."""
    if expected is None or value is None:
        return value
    if isinstance(expected, bool):
        if not isinstance(value, bool):
            problems.append(f"{section}.{name}: expected a boolean")
        return value
    if isinstance(expected, float) and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if isinstance(expected, (int, float)) and (not isinstance(value, (int, float)) or isinstance(value, bool)):
        problems.append(f"{section}.{name}: expected a number, got {value!r}")
        return expected
    if isinstance(expected, str) and not isinstance(value, str):
        problems.append(f"{section}.{name}: expected a string, got {value!r}")
        return expected
    if isinstance(expected, list) and not isinstance(value, list):
        problems.append(f"{section}.{name}: expected a list")
        return expected
    return value


def _build_section(name: str, table: Any, problems: List[str]):
    cls = SECTIONS[name]
    if not isinstance(table, dict):
        problems.append(f"{name}: expected a table")
        return cls()
    defaults = cls()
    known = {f.name for f in fields(cls)}
    values = {}
    for key, value in table.items():
        if key not in known:
            problems.append(f"{name}.{key}: unknown key")
            continue
        values[key] = _coerce(name, key, getattr(defaults, key), value, problems)
    return cls(**values)


@dataclass(frozen=True)
class RunConfig:
    rng_seed: int = 0
    mode: str = CalcMode.STANDARD.value
    output_dir: str = settings.OUTPUT_DIR
    workers: int = settings.WORKERS
    goals: List[Dict[str, Any]] = field(default_factory=list)
    design: DesignSection = field(default_factory=DesignSection)
    network: NetworkSection = field(default_factory=NetworkSection)
    ga: GaSection = field(default_factory=GaSection)
    detector: DetectorSection = field(default_factory=DetectorSection)
    adc: AdcSection = field(default_factory=AdcSection)
    noise: NoiseSection = field(default_factory=NoiseSection)
    extractor: ExtractorSection = field(default_factory=ExtractorSection)
    suite: SuiteSection = field(default_factory=SuiteSection)
    tomography: TomographySection = field(default_factory=TomographySection)

    @property
    def calc_mode(self) -> CalcMode:
        return CalcMode(self.mode)

    def validate(self) -> bool:
        """
        Re-check every section.

        Raises:
            ConfigValidationError: Listing every offending key
        """
        problems = []
        if not 0 <= self.rng_seed < 2 ** 64:
            problems.append("rng_seed: must be an unsigned 64-bit integer")
        if self.workers < 1:
            problems.append("workers: must be at least 1")
        if self.mode not in {m.value for m in CalcMode}:
            problems.append(f"mode: unknown mode {self.mode!r}")
        for i, goal in enumerate(self.goals):
            for key in sorted(set(goal) - GOAL_KEYS):
                problems.append(f"goals[{i}].{key}: unknown key")
            for key in sorted(GOAL_KEYS - set(goal)):
                problems.append(f"goals[{i}].{key}: missing")
        for name in SECTIONS:
            problems.extend(getattr(self, name).validate())
        if problems:
            raise ConfigValidationError(problems)
        return True

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def with_overrides(self, seed: int = None, mode: str = None, output_dir: str = None,
                       workers: int = None) -> "RunConfig":
        """Apply command-line flags on top of the document."""
        updates = {}
        if seed is not None:
            updates["rng_seed"] = seed
        if mode is not None:
            updates["mode"] = normalize_mode(mode)
        if output_dir is not None:
            updates["output_dir"] = output_dir
        if workers is not None:
            updates["workers"] = workers
        config = replace(self, **updates)
        config.validate()
        return config

    @classmethod
    def from_dict(cls, document: Dict[str, Any]) -> "RunConfig":
        problems: List[str] = []
        values: Dict[str, Any] = {}
        for key, value in document.items():
            if key not in TOP_LEVEL_KEYS:
                problems.append(f"{key}: unknown key")
            elif key in SECTIONS:
                values[key] = _build_section(key, value, problems)
            elif key == "goals":
                if isinstance(value, list) and all(isinstance(g, dict) for g in value):
                    values[key] = value
                else:
                    problems.append("goals: expected an array of tables")
            elif key == "mode":
                try:
                    values[key] = normalize_mode(value)
                except ConfigValidationError as exc:
                    problems.extend(exc.problems)
            elif key in ("rng_seed", "workers"):
                if isinstance(value, int) and not isinstance(value, bool):
                    values[key] = value
                else:
                    problems.append(f"{key}: expected an integer")
            else:
                values[key] = str(value)

        if problems:
            raise ConfigValidationError(problems)
        config = cls(**values)
        config.validate()
        return config

    @classmethod
    def from_toml(cls, text: str) -> "RunConfig":
        try:
            document = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigValidationError([f"malformed TOML: {exc}"]) from None
        return cls.from_dict(document)

    @classmethod
    def load(cls, path: Union[str, Path, None]) -> "RunConfig":
        """Load a TOML file, or defaults when path is None."""
        if path is None:
            config = cls()
            config.validate()
            return config
        path = Path(path)
        if not path.exists():
            raise ConfigValidationError([f"config file not found: {path}"])
        logger.info("loading configuration from %s", path)
        return cls.from_toml(path.read_text())
