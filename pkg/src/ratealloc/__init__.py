"""Goal-oriented rate allocation for rate-limited scalar LQR loops.

The controller sees the state only through a compressed channel whose noise
variance falls as 2^(-2R) with the rate R spent on each stage. Given a total
rate budget, :func:`closed_form_allocation` places the rates to minimize the
expected LQR cost increase; :mod:`ratealloc.simulate` checks the prediction
by paired Monte Carlo.
"""

__version__ = "0.1.0"

from .allocation import (
    CostCoefficients,
    EnumerationLimitError,
    RateAllocation,
    closed_form_allocation,
    cost_coefficients,
    exhaustive_allocation,
    expected_gap,
    unconstrained_rates,
    uniform_allocation,
)
from .lqr import GainSchedule, SystemSpec, stage_cost, step_perfect, synthesize_gains
from .noise import (
    DeviationGainTable,
    DeviationVariances,
    accumulated_variance,
    deviation_gains,
    sample_compression_noise,
)
from .simulate import CostReport, Estimate, TrajectoryPair, estimate_costs, simulate_pair

__all__ = [
    "CostCoefficients",
    "CostReport",
    "DeviationGainTable",
    "DeviationVariances",
    "EnumerationLimitError",
    "Estimate",
    "GainSchedule",
    "RateAllocation",
    "SystemSpec",
    "TrajectoryPair",
    "accumulated_variance",
    "closed_form_allocation",
    "cost_coefficients",
    "deviation_gains",
    "estimate_costs",
    "exhaustive_allocation",
    "expected_gap",
    "sample_compression_noise",
    "simulate_pair",
    "stage_cost",
    "step_perfect",
    "synthesize_gains",
    "unconstrained_rates",
    "uniform_allocation",
]
