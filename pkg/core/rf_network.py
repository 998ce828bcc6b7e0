"""
Two-port scattering-parameter algebra on top of scikit-rf.

Networks are stored as (N, 2, 2) complex arrays indexed [freq, row, col]
so that s[:, 1, 0] is S21, the same layout as `skrf.Network.s`. Cascading
goes through transfer (T) parameters defined by (b1, a1) = T (a2, b2).
"""
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import skrf as rf
from skrf.media import DefinedGammaZ0

from config.settings import settings
from core.errors import DomainError, SingularityError


logger = logging.getLogger(__name__)

S_INDEX: Dict[str, Tuple[int, int]] = {
    "S11": (0, 0),
    "S12": (0, 1),
    "S21": (1, 0),
    "S22": (1, 1),
}


@dataclass(frozen=True)
class FrequencySweep:
    points: np.ndarray  # Hz

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1)
        object.__setattr__(self, "points", pts)
        self.validate()

    def validate(self) -> bool:
        if self.points.size == 0:
            raise DomainError("frequency sweep is empty")
        if np.any(self.points <= 0):
            raise DomainError("sweep frequencies must be positive (DC is excluded)")
        if np.any(np.diff(self.points) <= 0):
            raise DomainError("sweep frequencies must be strictly increasing")
        return True

    @classmethod
    def linear(cls, start: float, stop: float, count: int) -> "FrequencySweep":
        return cls(np.linspace(start, stop, count))

    @property
    def span(self) -> Tuple[float, float]:
        return float(self.points[0]), float(self.points[-1])

    @property
    def frequency(self) -> rf.Frequency:
        return rf.Frequency.from_f(self.points, unit="hz")

    def __len__(self) -> int:
        return self.points.size

    def __eq__(self, other) -> bool:
        return isinstance(other, FrequencySweep) and np.array_equal(self.points, other.points)



@dataclass(frozen=True)
class TwoPortNetwork:
    sweep: FrequencySweep
    s: np.ndarray  # (N, 2, 2) complex
    z_ref: float = settings.Z_REF_OHM

    def __post_init__(self):
        s = np.asarray(self.s, dtype=complex)
        object.__setattr__(self, "s", s)
        if s.shape != (len(self.sweep), 2, 2):
            raise DomainError(
                f"expected {len(self.sweep)} 2x2 matrices, got array of shape {s.shape}")
        if not self.z_ref > 0:
            raise DomainError("reference impedance must be positive")

    @classmethod
    def from_skrf(cls, ntwk: rf.Network, sweep: FrequencySweep = None) -> "TwoPortNetwork":
        """
        Wrap a scikit-rf network.

        Raises:
            DomainError: If it is not a two-port or its port impedances are
                not one common real value
        """
        if ntwk.nports != 2:
            raise DomainError(f"expected a two-port network, got {ntwk.nports} ports")
        z0 = np.asarray(ntwk.z0)
        z_ref = float(z0.flat[0].real)
        if np.any(z0 != z_ref):
            raise DomainError("port impedances must share one real reference value")
        if sweep is None:
            sweep = FrequencySweep(ntwk.f)
        return cls(sweep, np.array(ntwk.s), z_ref)

    @cached_property
    def ntwk(self) -> rf.Network:
        """The same data as a `skrf.Network`, frequencies in Hz."""
        return rf.Network(s=self.s, f=self.frequencies, f_unit="Hz", z0=self.z_ref, name="network")

    @property
    def frequencies(self) -> np.ndarray:
        return self.sweep.points

    def param(self, name: str) -> np.ndarray:
        """Return one S-parameter across the sweep, e.g. param('S21')."""
        try:
            i, j = S_INDEX[name.upper()]
        except KeyError:
            raise DomainError(f"unknown S-parameter {name!r}") from None
        return self.s[:, i, j]

    def param_db(self, name: str) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 20 * np.log10(np.abs(self.param(name)))

    def __eq__(self, other) -> bool:
        return (isinstance(other, TwoPortNetwork) and self.sweep == other.sweep
                and self.z_ref == other.z_ref and np.array_equal(self.s, other.s))



class ElementKind(str, Enum):
    SERIES_INDUCTOR = "series_inductor"
    SERIES_CAPACITOR = "series_capacitor"
    SHUNT_INDUCTOR = "shunt_inductor"
    SHUNT_CAPACITOR = "shunt_capacitor"
    SERIES_RESISTOR = "series_resistor"
    SHUNT_RESISTOR = "shunt_resistor"
    SPARAM_BLOCK = "sparam_block"


@dataclass(frozen=True)
class LumpedElement:
    kind: ElementKind
    value: Union[float, TwoPortNetwork]  # H, F, ohm or a tabulated block
    bounds: Optional[Tuple[float, float]] = None
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "kind", ElementKind(self.kind))
        if self.kind is not ElementKind.SPARAM_BLOCK and self.bounds is None:
            object.__setattr__(self, "bounds", (float(self.value), float(self.value)))

    @property
    def is_passive(self) -> bool:
        return self.kind is not ElementKind.SPARAM_BLOCK

    @property
    def tunable(self) -> bool:
        """Passive element whose bounds allow more than one value."""
        return self.is_passive and self.bounds[1] > self.bounds[0]

    def validate(self) -> bool:
        if not self.is_passive:
            if not isinstance(self.value, TwoPortNetwork):
                raise DomainError(f"{self.label or self.kind.value}: sparam_block needs a network")
            return True
        lo, hi = self.bounds
        if not (self.value > 0 and lo > 0):
            raise DomainError(f"{self.label or self.kind.value}: element value must be positive")
        if not lo <= self.value <= hi:
            raise DomainError(
                f"{self.label or self.kind.value}: value {self.value:g} outside bounds [{lo:g}, {hi:g}]")
        return True

    def with_value(self, value: float) -> "LumpedElement":
        return replace(self, value=float(value))


@dataclass(frozen=True)
class NetworkTopology:
    elements: Tuple[LumpedElement, ...]

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        if not self.elements:
            raise DomainError("topology must contain at least one element")

    @property
    def tunable_indices(self) -> List[int]:
        return [i for i, e in enumerate(self.elements) if e.tunable]

    def tunable_values(self) -> np.ndarray:
        return np.array([self.elements[i].value for i in self.tunable_indices], dtype=float)

    def with_tunable_values(self, values: Sequence[float]) -> "NetworkTopology":
        """Return a copy with tunable element values replaced in order."""
        elements = list(self.elements)
        for idx, value in zip(self.tunable_indices, values):
            elements[idx] = elements[idx].with_value(value)
        return NetworkTopology(tuple(elements))


def thru_network(sweep: FrequencySweep, z_ref: float = None) -> TwoPortNetwork:
    s = np.zeros((len(sweep), 2, 2), dtype=complex)
    s[:, 0, 1] = s[:, 1, 0] = 1.0
    return TwoPortNetwork(sweep, s, z_ref or settings.Z_REF_OHM)


def attenuator_network(sweep: FrequencySweep, loss_db: float, z_ref: float = None) -> TwoPortNetwork:
    """Matched, reciprocal attenuator; S21 = S12 = 10^(-loss/20)."""
    s = np.zeros((len(sweep), 2, 2), dtype=complex)
    s[:, 0, 1] = s[:, 1, 0] = 10 ** (-loss_db / 20)
    return TwoPortNetwork(sweep, s, z_ref or settings.Z_REF_OHM)


def interpolate_network(n: TwoPortNetwork, sweep: FrequencySweep) -> TwoPortNetwork:
    """
    Resample a tabulated network onto a sweep.

    Interpolation is linear on real and imaginary parts; points outside the
    tabulated range are rejected.

    Raises:
        DomainError: If the sweep reaches outside the tabulated range
    """
    if sweep == n.sweep:
        return n
    f_lo, f_hi = n.sweep.span
    if sweep.points[0] < f_lo or sweep.points[-1] > f_hi:
        raise DomainError(
            f"sweep [{sweep.points[0]:g}, {sweep.points[-1]:g}] Hz is outside the "
            f"tabulated range [{f_lo:g}, {f_hi:g}] Hz")
    resampled = n.ntwk.interpolate(sweep.frequency, basis="s", coords="cart", kind="linear")
    return TwoPortNetwork(sweep, resampled.s, n.z_ref)


def _media(sweep: FrequencySweep, z0: float) -> DefinedGammaZ0:
    return DefinedGammaZ0(frequency=sweep.frequency, z0=z0)


def synthesize_element(e: LumpedElement, sweep: FrequencySweep, z_ref: float = None) -> TwoPortNetwork:
    """
    Realize a lumped element as a two-port over a sweep.

    Args:
        e: Element to realize
        sweep: Frequency sweep
        z_ref: Reference impedance (default from settings)

    Returns:
        TwoPortNetwork of the element

    Raises:
        DomainError: If a passive element value is not positive
    """
    z0 = z_ref or settings.Z_REF_OHM
    if e.kind is ElementKind.SPARAM_BLOCK:
        if not isinstance(e.value, TwoPortNetwork):
            raise DomainError("sparam_block needs a TwoPortNetwork value")
        block = interpolate_network(e.value, sweep)
        if block.z_ref != z0:
            raise DomainError(f"block reference {block.z_ref} ohm differs from {z0} ohm")
        return block

    if not float(e.value) > 0:
        raise DomainError(f"{e.label or e.kind.value}: element value must be positive")
    line = _media(sweep, z0)
    v = float(e.value)

    if e.kind is ElementKind.SERIES_INDUCTOR:
        ntwk = line.inductor(v)
    elif e.kind is ElementKind.SERIES_CAPACITOR:
        ntwk = line.capacitor(v)
    elif e.kind is ElementKind.SERIES_RESISTOR:
        ntwk = line.resistor(v)
    elif e.kind is ElementKind.SHUNT_INDUCTOR:
        ntwk = line.shunt_inductor(v)
    elif e.kind is ElementKind.SHUNT_CAPACITOR:
        ntwk = line.shunt_capacitor(v)
    else:
        ntwk = line.shunt(line.resistor(v) ** line.short())
    return TwoPortNetwork(sweep, ntwk.s, z0)


def _require_transmission(n: TwoPortNetwork) -> None:
    zero = np.flatnonzero(n.s[:, 1, 0] == 0)
    if zero.size:
        raise SingularityError("S21 = 0 makes the T-parameter conversion singular",
                               float(n.frequencies[zero[0]]))


def s_to_t(n: TwoPortNetwork) -> np.ndarray:
    """Convert S to T parameters; singular where S21 = 0."""
    _require_transmission(n)
    return rf.network.s2t(n.s)


def t_to_s(t: np.ndarray, sweep: FrequencySweep, z_ref: float) -> TwoPortNetwork:
    zero = np.flatnonzero(t[:, 1, 1] == 0)
    if zero.size:
        raise SingularityError("T22 = 0 has no S-parameter equivalent", float(sweep.points[zero[0]]))
    return TwoPortNetwork(sweep, rf.network.t2s(t), z_ref)


def cascade(a: TwoPortNetwork, b: TwoPortNetwork) -> TwoPortNetwork:
    """
    Connect port 2 of `a` to port 1 of `b`.

    Raises:
        DomainError: If sweeps or reference impedances differ
        SingularityError: If either network has S21 = 0 somewhere
    """
    if a.sweep != b.sweep:
        raise DomainError("cannot cascade networks with different sweeps")
    if a.z_ref != b.z_ref:
        raise DomainError("cannot cascade networks with different reference impedances")
    _require_transmission(a)
    _require_transmission(b)
    return TwoPortNetwork.from_skrf(rf.network.cascade(a.ntwk, b.ntwk), a.sweep)


def evaluate_chain(t: NetworkTopology, sweep: FrequencySweep, z_ref: float = None) -> TwoPortNetwork:
    """Left-fold of cascade over the synthesized elements, source to load."""
    z0 = z_ref or settings.Z_REF_OHM
    result = None
    for element in t.elements:
        net = synthesize_element(element, sweep, z0)
        result = net if result is None else cascade(result, net)
    return result


class StabilityStatus(str, Enum):
    STABLE = "stable"
    POTENTIALLY_UNSTABLE = "potentially_unstable"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class StabilityRecord:
    frequency: float
    k_factor: float
    mu_source: float
    mu_load: float
    status: StabilityStatus


@dataclass(frozen=True)
class StabilityReport:
    records: Tuple[StabilityRecord, ...]

    @property
    def stable_everywhere(self) -> bool:
        return all(r.status is StabilityStatus.STABLE for r in self.records)

    def to_dict(self) -> Dict:
        return {
            "stable_everywhere": self.stable_everywhere,
            "min_k": float(min(r.k_factor for r in self.records)),
            "min_mu_source": float(min(r.mu_source for r in self.records)),
            "min_mu_load": float(min(r.mu_load for r in self.records)),
            "indeterminate_frequencies": [r.frequency for r in self.records
                                          if r.status is StabilityStatus.INDETERMINATE],
        }


def _ratio(num: np.ndarray, den: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """num/den with x/0 -> +-inf and 0/0 flagged."""
    with np.errstate(divide="ignore", invalid="ignore"):
        out = num / den
    zero_den = den == 0
    indeterminate = zero_den & (num == 0)
    out = np.where(zero_den & (num > 0), np.inf, out)
    out = np.where(zero_den & (num < 0), -np.inf, out)
    out = np.where(indeterminate, np.nan, out)
    return out, indeterminate


def stability_factors(n: TwoPortNetwork) -> StabilityReport:
    """
    Rollett K and Edwards-Sinsky mu factors per frequency.

    K comes from `skrf.Network.stability`; it is +inf for unilateral
    networks with a positive numerator. A 0/0 form marks that frequency
    indeterminate.
    """
    s11, s12, s21, s22 = n.s[:, 0, 0], n.s[:, 0, 1], n.s[:, 1, 0], n.s[:, 1, 1]
    delta = s11 * s22 - s12 * s21
    loop = np.abs(s12 * s21)

    k_limit, k_ind = _ratio(1 - np.abs(s11) ** 2 - np.abs(s22) ** 2 + np.abs(delta) ** 2, 2 * loop)
    with np.errstate(divide="ignore", invalid="ignore"):
        rollett = np.real(np.asarray(n.ntwk.stability)).reshape(-1)
    k = np.where(loop > 0, rollett, k_limit)
    mu_load, ml_ind = _ratio(1 - np.abs(s11) ** 2, np.abs(s22 - delta * np.conj(s11)) + loop)
    mu_source, ms_ind = _ratio(1 - np.abs(s22) ** 2, np.abs(s11 - delta * np.conj(s22)) + loop)

    records = []
    for i, f in enumerate(n.frequencies):
        if k_ind[i] or ml_ind[i] or ms_ind[i]:
            status = StabilityStatus.INDETERMINATE
        elif k[i] > 1 and mu_load[i] > 1 and mu_source[i] > 1:
            status = StabilityStatus.STABLE
        else:
            status = StabilityStatus.POTENTIALLY_UNSTABLE
        records.append(StabilityRecord(float(f), float(k[i]), float(mu_source[i]),
                                       float(mu_load[i]), status))

    report = StabilityReport(tuple(records))
    if not report.stable_everywhere:
        logger.info("network is not unconditionally stable over the sweep")
    return report


class Comparison(str, Enum):
    BELOW = "below"
    ABOVE = "above"


@dataclass(frozen=True)
class Goal:
    parameter: str
    comparison: Comparison
    threshold_db: float
    band: Tuple[float, float]  # Hz

    def __post_init__(self):
        object.__setattr__(self, "comparison", Comparison(self.comparison))
        object.__setattr__(self, "parameter", self.parameter.upper())
        if self.parameter not in S_INDEX:
            raise DomainError(f"unknown goal parameter {self.parameter!r}")
        if self.band[0] > self.band[1]:
            raise DomainError(f"goal band {self.band} is reversed")


@dataclass(frozen=True)
class GoalSet:
    goals: Tuple[Goal, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "goals", tuple(self.goals))

    def validate(self, sweep: FrequencySweep) -> bool:
        lo, hi = sweep.span
        for goal in self.goals:
            if goal.band[0] < lo or goal.band[1] > hi:
                raise DomainError(
                    f"goal band {goal.band} for {goal.parameter} lies outside the sweep [{lo:g}, {hi:g}] Hz")
        return True


def amplifier_goal_set(span: Tuple[float, float]) -> GoalSet:
    """Amplifier goals: S11, S22 < -10 dB and S12 < -20 dB in band, S21 > 40 dB at the top."""
    lo, hi = span
    return GoalSet((
        Goal("S11", Comparison.BELOW, -10.0, (lo, hi)),
        Goal("S22", Comparison.BELOW, -10.0, (lo, hi)),
        Goal("S12", Comparison.BELOW, -20.0, (lo, hi)),
        Goal("S21", Comparison.ABOVE, 40.0, (hi, hi)),
    ))


def evaluate_goals(n: TwoPortNetwork, goals: GoalSet) -> float:
    """Sum of squared dB violations over goals and in-band frequencies."""
    cost = 0.0
    f = n.frequencies
    for goal in goals.goals:
        in_band = (f >= goal.band[0]) & (f <= goal.band[1])
        if not np.any(in_band):
            continue
        values = n.param_db(goal.parameter)[in_band]
        if goal.comparison is Comparison.BELOW:
            violation = values - goal.threshold_db
        else:
            violation = goal.threshold_db - values
        cost += float(np.sum(np.maximum(0.0, violation) ** 2))
    return cost


@dataclass(frozen=True)
class SensitivityEntry:
    index: int
    label: str
    kind: str
    sensitivity: float
    tunable: bool
    clamped: bool = False


def _band_mean_db(t: NetworkTopology, sweep: FrequencySweep, z0: float, goal_param: str,
                  band: Optional[Tuple[float, float]]) -> float:
    values = evaluate_chain(t, sweep, z0).param_db(goal_param)
    if band is not None:
        mask = (sweep.points >= band[0]) & (sweep.points <= band[1])
        values = values[mask]
    return float(np.mean(values))


def sensitivity_analysis(
    t: NetworkTopology,
    sweep: FrequencySweep,
    z_ref: float = None,
    goal_param: str = "S21",
    rel_step: float = None,
    band: Optional[Tuple[float, float]] = None
) -> List[SensitivityEntry]:
    """
    Log-derivative sensitivity of the band-mean |goal_param| (dB) to each element.

    Args:
        t: Topology
        sweep: Frequency sweep
        z_ref: Reference impedance
        goal_param: S-parameter name
        rel_step: Relative perturbation h in (0, 0.5]
        band: Optional sub-band for the mean (default whole sweep)

    Returns:
        Entries ranked by |sensitivity|, largest first. Non-tunable elements
        report 0.
    """
    z0 = z_ref or settings.Z_REF_OHM
    h = rel_step if rel_step is not None else settings.SENSITIVITY_REL_STEP
    if not 0 < h <= 0.5:
        raise DomainError("rel_step must lie in (0, 0.5]")
    if band is not None and not np.any((sweep.points >= band[0]) & (sweep.points <= band[1])):
        raise DomainError(f"no sweep point falls inside the band [{band[0]:g}, {band[1]:g}] Hz")

    entries = []
    for idx, element in enumerate(t.elements):
        label = element.label or f"{element.kind.value}[{idx}]"
        if not element.tunable:
            entries.append(SensitivityEntry(idx, label, element.kind.value, 0.0, False))
            continue

        x = float(element.value)
        lo, hi = element.bounds
        x_up, x_down = x * (1 + h), x * (1 - h)
        clamped = x_up > hi or x_down < lo
        if clamped:
            logger.warning("sensitivity step for %s clamped to bounds [%g, %g]", label, lo, hi)
            x_up, x_down = min(x_up, hi), max(x_down, lo)

        elements_up = list(t.elements)
        elements_up[idx] = element.with_value(x_up)
        elements_down = list(t.elements)
        elements_down[idx] = element.with_value(x_down)
        f_up = _band_mean_db(NetworkTopology(elements_up), sweep, z0, goal_param, band)
        f_down = _band_mean_db(NetworkTopology(elements_down), sweep, z0, goal_param, band)

        span = (x_up - x_down) / x  # equals 2h when not clamped
        value = (f_up - f_down) / span if span > 0 else 0.0
        entries.append(SensitivityEntry(idx, label, element.kind.value, value, True, clamped))

    return sorted(entries, key=lambda e: abs(e.sensitivity), reverse=True)
