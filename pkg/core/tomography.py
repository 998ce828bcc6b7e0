"""
Shot-noise calibration and Husimi-function reconstruction of the vacuum.

Phase-space convention: the vacuum Husimi function is Q(a) = exp(-|a|^2) / pi,
so normalized vacuum data has variance 1/2 per axis.
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Mapping, Sequence, Tuple, Union

import numpy as np
from scipy import stats

from config.settings import settings
from core.errors import CalibrationError, DomainError


logger = logging.getLogger(__name__)

COVERAGE_WARNING_FRACTION = 0.02
MIN_POINTS = 10_000
QUADRATURES = ("p", "q")


@dataclass(frozen=True)
class HeterodyneModel:
    """Ground truth of the simulated heterodyne channels (variance in V^2, power in W)."""
    slope_p: float = 1.0e3
    intercept_p: float = 1.0e-2
    slope_q: float = 1.0e3
    intercept_q: float = 1.0e-2
    sample_rate: float = 0.8e9
    rng_seed: int = 0

    def validate(self) -> bool:
        if min(self.slope_p, self.slope_q) < 0 or min(self.intercept_p, self.intercept_q) < 0:
            raise DomainError("heterodyne slopes and intercepts must be non-negative")
        if not self.sample_rate > 0:
            raise DomainError("sample_rate must be positive")
        return True

    def variance(self, quadrature: str, lo_power: float) -> float:
        if quadrature == "p":
            return self.slope_p * lo_power + self.intercept_p
        return self.slope_q * lo_power + self.intercept_q


@dataclass(frozen=True)
class QuadratureStream:
    p: np.ndarray  # V
    q: np.ndarray  # V
    lo_power: float  # W
    sample_rate: float  # Hz

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        q = np.asarray(self.q, dtype=float)
        if p.size == 0 or p.shape != q.shape:
            raise DomainError("quadrature stream needs equal, non-empty p and q sequences")
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(q))):
            raise DomainError("quadrature stream contains non-finite values")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    def __len__(self) -> int:
        return self.p.size

    def quadrature(self, name: str) -> np.ndarray:
        return self.p if name == "p" else self.q

    def scaled(self, factor: float) -> "QuadratureStream":
        return QuadratureStream(self.p * factor, self.q * factor, self.lo_power, self.sample_rate)


@dataclass(frozen=True)
class CalibrationFit:
    slope: float  # V^2 per W
    intercept: float  # V^2
    r_squared: float
    quadrature: str = ""

    def to_dict(self) -> Dict:
        return {"quadrature": self.quadrature, "slope": self.slope,
                "intercept": self.intercept, "r_squared": self.r_squared}


def generate_heterodyne_stream(lo_power: float, model: HeterodyneModel, n: int,
                               stream_index: int = 0) -> QuadratureStream:
    """
    Independent Gaussian p and q samples with the model's linear variances.

    Args:
        lo_power: LO power in W
        model: Ground-truth model
        n: Number of pairs
        stream_index: Selects an independent stream for the same seed

    Raises:
        DomainError: If lo_power is negative or n is not positive
    """
    if lo_power < 0:
        raise DomainError("LO power must be non-negative")
    if n <= 0:
        raise DomainError("n must be positive")
    model.validate()

    rng = np.random.default_rng(np.random.SeedSequence([model.rng_seed, stream_index]))
    p = rng.normal(0.0, math.sqrt(model.variance("p", lo_power)), n)
    q = rng.normal(0.0, math.sqrt(model.variance("q", lo_power)), n)
    return QuadratureStream(p, q, lo_power, model.sample_rate)


def calibration_powers(start: float = 0.2e-3, stop: float = 1.8e-3, step: float = 0.2e-3) -> List[float]:
    """LO power grid (W), inclusive of both ends."""
    count = int(round((stop - start) / step)) + 1
    return [start + k * step for k in range(count)]


def fit_variance_line(powers: Sequence[float], variances: Sequence[float],
                      quadrature: str = "") -> CalibrationFit:
    """Ordinary least-squares line of variance against LO power."""
    powers = np.asarray(powers, dtype=float)
    if np.unique(powers).size < 3:
        raise DomainError("calibration needs at least 3 distinct LO powers")
    fit = stats.linregress(powers, np.asarray(variances, dtype=float))
    r_squared = min(1.0, max(0.0, float(fit.rvalue) ** 2))
    return CalibrationFit(float(fit.slope), float(fit.intercept), r_squared, quadrature)


def calibrate_shot_noise(streams: Sequence[QuadratureStream]) -> Dict[str, CalibrationFit]:
    """
    Fit the shot-noise line for each quadrature.

    Args:
        streams: One stream per LO power (at least 3 distinct powers)

    Returns:
        {'p': CalibrationFit, 'q': CalibrationFit}
    """
    powers = [s.lo_power for s in streams]
    fits = {}
    for name in QUADRATURES:
        variances = [float(np.var(s.quadrature(name))) for s in streams]
        fits[name] = fit_variance_line(powers, variances, name)
        logger.info("calibration %s: slope %.6g V^2/W, intercept %.6g V^2, r^2 %.6f",
                    name, fits[name].slope, fits[name].intercept, fits[name].r_squared)
    return fits


@dataclass(frozen=True)
class PhaseSpacePoints:
    alpha: np.ndarray  # complex, re = p', im = q'
    degenerate: bool = False

    def __len__(self) -> int:
        return self.alpha.size

    def variances(self) -> Dict[str, float]:
        """Amplitude (real) and phase (imaginary) quadrature variances."""
        return {"amplitude": float(np.var(self.alpha.real)), "phase": float(np.var(self.alpha.imag))}


def normalize_quadratures(
    s: QuadratureStream,
    fit: Union[CalibrationFit, Mapping[str, CalibrationFit]],
    at_power: float = None
) -> PhaseSpacePoints:
    """
    Map a quadrature stream onto the alpha plane.

    Each axis is centred and divided by sqrt(2 * slope * at_power), so pure
    shot noise ends up with variance 1/2 per axis.

    Args:
        s: Quadrature stream
        fit: One fit for both axes, or a mapping with 'p' and 'q' fits
        at_power: LO power to normalize at (default: the stream's power)

    Raises:
        CalibrationError: If a slope is not positive
    """
    at_power = s.lo_power if at_power is None else at_power
    fits = fit if isinstance(fit, Mapping) else {name: fit for name in QUADRATURES}

    axes = []
    degenerate = False
    for name in QUADRATURES:
        slope = fits[name].slope
        if not slope > 0 or not at_power > 0:
            raise CalibrationError(f"cannot normalize {name}: slope {slope} at power {at_power}")
        x = s.quadrature(name)
        centred = x - x.mean()
        if not np.any(centred):
            degenerate = True
        axes.append(centred / math.sqrt(2 * slope * at_power))

    if degenerate:
        logger.warning("quadrature data has zero variance")
    return PhaseSpacePoints(axes[0] + 1j * axes[1], degenerate)


@dataclass(frozen=True)
class GridSpec:
    bins: int = settings.HUSIMI_BINS
    extent: float = settings.HUSIMI_EXTENT  # grid covers [-extent, extent] on both axes

    def validate(self) -> bool:
        if self.bins < 1 or not self.extent > 0:
            raise DomainError("grid needs at least one bin and a positive extent")
        return True

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(-self.extent, self.extent, self.bins + 1)

    @property
    def centers(self) -> np.ndarray:
        e = self.edges
        return (e[:-1] + e[1:]) / 2

    @property
    def cell_area(self) -> float:
        return (2 * self.extent / self.bins) ** 2


@dataclass(frozen=True)
class HusimiGrid:
    spec: GridSpec
    density: np.ndarray  # [re index, im index]
    in_grid_fraction: float = 1.0
    coverage_warning: bool = False

    @property
    def axis(self) -> np.ndarray:
        return self.spec.centers

    @property
    def cell_area(self) -> float:
        return self.spec.cell_area

    def mass(self) -> float:
        return float(self.density.sum() * self.cell_area)

    def peak_density(self) -> float:
        """Density at the origin: mean of the central cell(s)."""
        b = self.spec.bins
        lo, hi = (b - 1) // 2, b // 2 + 1
        return float(self.density[lo:hi, lo:hi].mean())

    def to_rows(self) -> List[Tuple[float, float, float]]:
        c = self.axis
        return [(float(c[i]), float(c[j]), float(self.density[i, j]))
                for i in range(c.size) for j in range(c.size)]


def vacuum_husimi(alpha: Union[complex, np.ndarray]) -> Union[float, np.ndarray]:
    return np.exp(-np.abs(alpha) ** 2) / np.pi


class HusimiAccumulator:
    """
    Histogram of alpha-plane points that can be built in shards.

    Accumulators over the same GridSpec merge by adding counts.
    """

    def __init__(self, spec: GridSpec = None):
        self.spec = spec or GridSpec()
        self.spec.validate()
        self.counts = np.zeros((self.spec.bins, self.spec.bins), dtype=np.int64)
        self.total = 0

    def add(self, points: Union[PhaseSpacePoints, np.ndarray]) -> "HusimiAccumulator":
        alpha = points.alpha if isinstance(points, PhaseSpacePoints) else np.asarray(points)
        edges = self.spec.edges
        counts, _, _ = np.histogram2d(alpha.real, alpha.imag, bins=[edges, edges])
        self.counts += counts.astype(np.int64)
        self.total += alpha.size
        return self

    def merge(self, other: "HusimiAccumulator") -> "HusimiAccumulator":
        if other.spec != self.spec:
            raise DomainError("cannot merge accumulators over different grids")
        self.counts += other.counts
        self.total += other.total
        return self

    def grid(self) -> HusimiGrid:
        if self.total == 0:
            raise DomainError("no points accumulated")
        inside = int(self.counts.sum())
        fraction = inside / self.total
        warn = 1 - fraction >= COVERAGE_WARNING_FRACTION
        if warn:
            logger.warning("%.1f%% of points fall outside the Husimi grid", 100 * (1 - fraction))
        density = self.counts / (self.total * self.spec.cell_area)
        return HusimiGrid(self.spec, density, fraction, warn)


def reconstruct_husimi(points: Union[PhaseSpacePoints, np.ndarray], spec: GridSpec = None) -> HusimiGrid:
    """
    Histogram estimate of the Husimi function.

    density = counts / (total points * cell area), so the grid mass equals the
    fraction of points that fall inside it.
    """
    n = len(points)
    if n < MIN_POINTS:
        logger.warning("only %d points for the Husimi histogram (%d recommended)", n, MIN_POINTS)
    return HusimiAccumulator(spec).add(points).grid()


def theoretical_vacuum_husimi(spec: GridSpec = None) -> HusimiGrid:
    spec = spec or GridSpec()
    spec.validate()
    c = spec.centers
    density = vacuum_husimi(c[:, None] + 1j * c[None, :])
    return HusimiGrid(spec, density)


def compare_husimi(a: HusimiGrid, b: HusimiGrid) -> float:
    """Bhattacharyya overlap sum(sqrt(a * b)) * cell_area."""
    if a.spec != b.spec:
        raise DomainError("Husimi grids differ")
    return float(np.sum(np.sqrt(a.density * b.density)) * a.cell_area)
