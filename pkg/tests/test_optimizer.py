import math

import numpy as np
import pytest

from core.errors import DomainError
from core.optimizer import GaConfig, GeneticOptimizer, optimize_ga
from core.rf_network import (
    Comparison,
    FrequencySweep,
    Goal,
    GoalSet,
    LumpedElement,
    NetworkTopology,
    evaluate_chain,
    evaluate_goals,
)

L_MATCH = 50 / (2 * math.pi * 1e9)
C_MATCH = 1 / (2 * math.pi * 1e9 * 100)

SWEEP = FrequencySweep.linear(0.9e9, 1.1e9, 21)
GOALS = GoalSet((Goal("S11", Comparison.BELOW, -10.0, (0.98e9, 1.02e9)),))


def start_topology():
    return NetworkTopology((
        LumpedElement("series_inductor", 2e-8, (1e-9, 1e-7), "L1"),
        LumpedElement("shunt_capacitor", 5e-13, (1e-13, 1e-11), "C1"),
        LumpedElement("series_resistor", 50.0, label="R_load"),
    ))


def small_config(**overrides):
    values = dict(population=24, generations=30, rng_seed=11)
    values.update(overrides)
    return GaConfig(**values)


def test_best_cost_never_increases():
    result = optimize_ga(start_topology(), GOALS, small_config(), SWEEP)
    trace = result.cost_trace
    assert all(b <= a for a, b in zip(trace, trace[1:]))
    assert result.best_cost == trace[-1]


def test_search_improves_on_the_starting_point():
    topology = start_topology()
    initial = evaluate_goals(evaluate_chain(topology, SWEEP), GOALS)
    result = optimize_ga(topology, GOALS, small_config(), SWEEP)
    assert result.best_cost < initial


def test_known_solution_stops_the_search_immediately():
    result = GeneticOptimizer(start_topology(), GOALS, SWEEP, small_config()).run(initial=[(L_MATCH, C_MATCH)])
    assert result.best_cost == 0.0
    assert result.generations_run == 1
    values = [e.value for e in result.topology.elements[:2]]
    assert values == pytest.approx([L_MATCH, C_MATCH], rel=1e-9)


def test_fixed_elements_are_untouched():
    result = optimize_ga(start_topology(), GOALS, small_config(generations=5), SWEEP)
    assert result.topology.elements[2].value == 50.0


def test_values_stay_inside_bounds():
    result = optimize_ga(start_topology(), GOALS, small_config(mutation_rate=1.0), SWEEP)
    for element in result.topology.elements[:2]:
        lo, hi = element.bounds
        assert lo * (1 - 1e-12) <= element.value <= hi * (1 + 1e-12)


def test_result_does_not_depend_on_worker_count():
    serial = optimize_ga(start_topology(), GOALS, small_config(workers=1), SWEEP)
    threaded = optimize_ga(start_topology(), GOALS, small_config(workers=4), SWEEP)
    assert serial.cost_trace == threaded.cost_trace
    assert np.array_equal(serial.best_genes, threaded.best_genes)


def test_topology_without_tunable_elements_is_rejected():
    fixed = NetworkTopology((LumpedElement("series_resistor", 50.0),))
    with pytest.raises(DomainError):
        GeneticOptimizer(fixed, GOALS, SWEEP, small_config())


def test_invalid_config_is_rejected():
    with pytest.raises(DomainError):
        GeneticOptimizer(start_topology(), GOALS, SWEEP, small_config(population=1))
    with pytest.raises(DomainError):
        GeneticOptimizer(start_topology(), GOALS, SWEEP, small_config(mutation_rate=1.5))


def test_goal_outside_sweep_is_rejected():
    goals = GoalSet((Goal("S11", Comparison.BELOW, -10.0, (2e9, 3e9)),))
    with pytest.raises(DomainError):
        GeneticOptimizer(start_topology(), goals, SWEEP, small_config())


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(10))
def test_l_match_reaches_zero_cost_from_any_seed(seed):
    result = optimize_ga(start_topology(), GOALS, GaConfig(population=64, generations=200, rng_seed=seed), SWEEP)
    trace = result.cost_trace
    assert result.best_cost == 0.0
    assert result.generations_run <= 200
    assert all(b <= a for a, b in zip(trace, trace[1:]))
