import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from config.settings import settings
from core.errors import DomainError
from core.rf_network import (
    FrequencySweep,
    GoalSet,
    NetworkTopology,
    evaluate_chain,
    evaluate_goals,
)


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GaConfig:
    population: int = settings.GA_POPULATION
    generations: int = settings.GA_GENERATIONS
    mutation_rate: float = settings.GA_MUTATION_RATE
    crossover_rate: float = settings.GA_CROSSOVER_RATE
    rng_seed: int = 0
    tournament_size: int = settings.GA_TOURNAMENT_SIZE
    mutation_sigma_decades: float = settings.GA_MUTATION_SIGMA_DECADES
    elitism: int = 1
    workers: int = 1

    def validate(self) -> bool:
        if self.population < 2:
            raise DomainError("GA population must be at least 2")
        if self.generations < 1:
            raise DomainError("GA needs at least one generation")
        for name in ("mutation_rate", "crossover_rate"):
            if not 0 <= getattr(self, name) <= 1:
                raise DomainError(f"{name} must lie in [0, 1]")
        if not 1 <= self.elitism < self.population:
            raise DomainError("elitism must keep at least one and fewer than population individuals")
        if self.tournament_size < 1:
            raise DomainError("tournament size must be positive")
        return True


@dataclass
class OptimizationResult:
    topology: NetworkTopology
    best_cost: float
    cost_trace: List[float] = field(default_factory=list)
    best_genes: Optional[np.ndarray] = None

    @property
    def generations_run(self) -> int:
        return len(self.cost_trace)

    def trace_rows(self) -> List[tuple]:
        return [(g, c) for g, c in enumerate(self.cost_trace)]


class GeneticOptimizer:
    """
    Goal-driven genetic search over tunable element values.

    Genes are log10 element values inside each element's bounds. Selection is
    a tournament, crossover is uniform, mutation is Gaussian in log space, and
    the best individuals are carried over unchanged (elitism), so the
    best-of-generation cost never increases.
    """

    def __init__(
        self,
        topology: NetworkTopology,
        goals: GoalSet,
        sweep: FrequencySweep,
        config: GaConfig = None,
        z_ref: float = None
    ):
        """
        Initialize the optimizer.

        Args:
            topology: Starting topology; its current values seed the population
            goals: Goal set the cost is measured against
            sweep: Frequency sweep used for every evaluation
            config: GA hyperparameters
            z_ref: Reference impedance (default from settings)

        Raises:
            DomainError: If no element is tunable
        """
        self.topology = topology
        self.goals = goals
        self.sweep = sweep
        self.config = config or GaConfig()
        self.z_ref = z_ref or settings.Z_REF_OHM
        self.config.validate()
        goals.validate(sweep)

        self._indices = topology.tunable_indices
        if not self._indices:
            raise DomainError("topology has no tunable elements")
        bounds = np.array([topology.elements[i].bounds for i in self._indices], dtype=float)
        self._lo = np.log10(bounds[:, 0])
        self._hi = np.log10(bounds[:, 1])

    def cost(self, genes: np.ndarray) -> float:
        topology = self.topology.with_tunable_values(10 ** genes)
        return evaluate_goals(evaluate_chain(topology, self.sweep, self.z_ref), self.goals)

    def _evaluate(self, population: np.ndarray) -> np.ndarray:
        if self.config.workers > 1:
            with ThreadPoolExecutor(max_workers=self.config.workers) as pool:
                return np.array(list(pool.map(self.cost, population)))
        return np.array([self.cost(genes) for genes in population])

    def _initial_population(self, initial: Sequence[Sequence[float]]) -> np.ndarray:
        rng = np.random.default_rng([self.config.rng_seed, 0xC0FFEE])
        n_genes = len(self._indices)
        population = rng.uniform(self._lo, self._hi, size=(self.config.population, n_genes))

        seeds = [self.topology.tunable_values()] + [np.asarray(v, dtype=float) for v in initial]
        for row, values in enumerate(seeds[: self.config.population]):
            population[row] = np.clip(np.log10(values), self._lo, self._hi)
        return population

    def _tournament(self, rng: np.random.Generator, costs: np.ndarray) -> int:
        contenders = rng.integers(0, costs.size, size=self.config.tournament_size)
        return int(contenders[np.argmin(costs[contenders])])

    def _offspring(self, generation: int, index: int, population: np.ndarray,
                   costs: np.ndarray) -> np.ndarray:
        # Each child gets its own stream so results do not depend on scheduling
        rng = np.random.default_rng([self.config.rng_seed, generation, index])
        parent_a = population[self._tournament(rng, costs)]
        parent_b = population[self._tournament(rng, costs)]

        if rng.random() < self.config.crossover_rate:
            mask = rng.random(parent_a.size) < 0.5
            child = np.where(mask, parent_a, parent_b)
        else:
            child = parent_a.copy()

        mutate = rng.random(child.size) < self.config.mutation_rate
        child = child + mutate * rng.normal(0.0, self.config.mutation_sigma_decades, child.size)
        return np.clip(child, self._lo, self._hi)

    def run(self, initial: Sequence[Sequence[float]] = ()) -> OptimizationResult:
        """
        Run the genetic search.

        Args:
            initial: Extra individuals (element values in SI units, tunable
                elements in topology order) placed in the first generation

        Returns:
            OptimizationResult with the best topology and per-generation best cost
        """
        cfg = self.config
        population = self._initial_population(initial)
        costs = self._evaluate(population)
        trace = []

        for generation in range(cfg.generations):
            order = np.argsort(costs, kind="stable")
            trace.append(float(costs[order[0]]))
            logger.debug("generation %d best cost %.6g", generation, trace[-1])
            if costs[order[0]] == 0.0:
                logger.info("all goals met after %d generation(s)", generation + 1)
                break
            if generation == cfg.generations - 1:
                break

            elite = population[order[: cfg.elitism]]
            children = np.array([
                self._offspring(generation + 1, i, population, costs)
                for i in range(cfg.population - cfg.elitism)
            ])
            child_costs = self._evaluate(children)
            population = np.vstack([elite, children])
            costs = np.concatenate([costs[order[: cfg.elitism]], child_costs])

        best = int(np.argmin(costs))
        best_genes = population[best]
        topology = self.topology.with_tunable_values(10 ** best_genes)
        return OptimizationResult(topology, float(costs[best]), trace, best_genes)


def optimize_ga(
    t: NetworkTopology,
    goals: GoalSet,
    cfg: GaConfig,
    sweep: FrequencySweep,
    z_ref: float = None,
    initial: Sequence[Sequence[float]] = ()
) -> OptimizationResult:
    return GeneticOptimizer(t, goals, sweep, cfg, z_ref).run(initial)
