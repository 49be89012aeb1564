"""Budgeted rate allocation over stages.

Under Gaussian compression noise of variance c^2 2^(-2 R_t), the expected
excess LQR cost of the rate-limited loop is sum_t a_t 2^(-2 R_t). Minimizing
it subject to sum_t R_t <= budget is reverse water-filling on the a_t.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .lqr import GainSchedule, SystemSpec
from .noise import DeviationGainTable

BUDGET_SLACK = 1e-9
DEFAULT_MAX_CANDIDATES = 10**8


class EnumerationLimitError(ValueError):
    """Exhaustive search would exceed the configured candidate cap."""


@dataclass(frozen=True, eq=False)
class CostCoefficients:
    """Weights a_0..a_T of the excess-cost objective; a_T = 0."""

    a: np.ndarray

    def __post_init__(self):
        a = np.array(self.a, dtype=float)
        if a.ndim != 1 or a.size < 2:
            raise ValueError("need at least two coefficients (a_0 and a_T)")
        if np.any(a < 0) or not np.all(np.isfinite(a)):
            raise ValueError("coefficients must be finite and nonnegative")
        if a[-1] != 0.0:
            raise ValueError("a_T must be 0")
        a.flags.writeable = False
        object.__setattr__(self, "a", a)

    @property
    def horizon(self) -> int:
        return self.a.size - 1

    @property
    def active(self) -> np.ndarray:
        return np.flatnonzero(self.a > 0)


@dataclass(frozen=True, eq=False)
class RateAllocation:
    """Rates R_0..R_T in bits per transmission, spending at most ``budget``."""

    r: np.ndarray
    budget: float

    def __post_init__(self):
        r = np.array(self.r, dtype=float)
        if self.budget < 0:
            raise ValueError(f"budget must be nonnegative, got {self.budget}")
        if r.ndim != 1 or not np.all(np.isfinite(r)):
            raise ValueError("rates must be a finite 1-D sequence")
        if np.any(r < 0):
            raise ValueError(f"negative rate in allocation: {r.min()}")
        if r.sum() > self.budget + BUDGET_SLACK:
            raise ValueError(f"rates sum to {r.sum()}, budget is {self.budget}")
        r.flags.writeable = False
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "budget", float(self.budget))

    @property
    def horizon(self) -> int:
        return self.r.size - 1


def cost_coefficients(
    spec: SystemSpec, gains: GainSchedule, table: DeviationGainTable
) -> CostCoefficients:
    """a_m = c^2 [F_m^2 D + sum_{k=m+1}^{T-1} (Q + F_k^2 D) G[k, m]^2], a_T = 0.

    Only stages 0..T-1 carry cost, so the future sum stops at T-1 whatever
    the terminal Riccati weight was.
    """
    gains.check_horizon(spec)
    if table.horizon != spec.horizon:
        raise ValueError("deviation table horizon does not match the system")
    T = spec.horizon
    f = gains.f_seq[:T]
    state_weight = spec.q + f**2 * spec.d  # cost per unit deviation variance at k
    future = (state_weight[:, None] * table.g[:T] ** 2).sum(axis=0)
    a = np.zeros(T + 1)
    a[:T] = spec.c2 * (f**2 * spec.d + future)
    return CostCoefficients(a)


def expected_gap(coeffs: CostCoefficients, alloc) -> float:
    """sum_t a_t 2^(-2 R_t): expected T * (J_c - J_p)."""
    r = np.asarray(getattr(alloc, "r", alloc), dtype=float)
    if r.shape != coeffs.a.shape:
        raise ValueError(f"{r.size} rates for {coeffs.a.size} coefficients")
    return math.fsum(coeffs.a * np.exp2(-2.0 * r))


def _log_mean_split(log_a: np.ndarray, budget: float) -> np.ndarray:
    return 0.5 * (log_a - log_a.mean()) + budget / log_a.size


def unconstrained_rates(coeffs: CostCoefficients, budget: float) -> np.ndarray:
    """Lagrangian closed form on the positive-coefficient stages, no R >= 0.

    R_k = 1/2 log2(a_k / geomean(a)) + budget / |active|. May be negative.
    """
    if budget < 0:
        raise ValueError(f"budget must be nonnegative, got {budget}")
    r = np.zeros_like(coeffs.a)
    act = coeffs.active
    if act.size:
        r[act] = _log_mean_split(np.log2(coeffs.a[act]), budget)
    return r


def closed_form_allocation(coeffs: CostCoefficients, budget: float) -> RateAllocation:
    """Reverse water-filling: closed form plus active-set removal of negative rates."""
    if budget < 0:
        raise ValueError(f"budget must be nonnegative, got {budget}")
    r = np.zeros_like(coeffs.a)
    act = coeffs.active
    while act.size:
        r_act = _log_mean_split(np.log2(coeffs.a[act]), budget)
        if np.all(r_act >= 0):
            r[act] = r_act
            break
        act = act[r_act > 0]
    return RateAllocation(r, budget)


def uniform_allocation(budget: float, horizon: int) -> RateAllocation:
    """Constant-rate baseline: budget / T on stages 0..T-1, nothing on T."""
    if budget < 0:
        raise ValueError(f"budget must be nonnegative, got {budget}")
    r = np.zeros(horizon + 1)
    r[:horizon] = budget / horizon
    return RateAllocation(r, budget)


def water_level(coeffs: CostCoefficients, alloc: RateAllocation) -> np.ndarray:
    """a_t 2^(-2 R_t) on the stages with positive rate."""
    on = alloc.r > 0
    return coeffs.a[on] * np.exp2(-2.0 * alloc.r[on])


def _compositions(units: int, parts: int, chunk: int):
    """All ways to write ``units`` as an ordered sum of ``parts`` nonneg ints."""
    if parts == 1:
        yield np.array([[units]], dtype=np.int64)
        return
    bars = itertools.combinations(range(units + parts - 1), parts - 1)
    while True:
        block = np.array(list(itertools.islice(bars, chunk)), dtype=np.int64)
        if block.size == 0:
            return
        block = block.reshape(-1, parts - 1)
        edges = np.hstack(
            [
                np.full((block.shape[0], 1), -1),
                block,
                np.full((block.shape[0], 1), units + parts - 1),
            ]
        )
        yield np.diff(edges, axis=1) - 1


def exhaustive_allocation(
    coeffs: CostCoefficients,
    budget: float,
    grid_step: float,
    max_candidates: int = DEFAULT_MAX_CANDIDATES,
    chunk: int = 200_000,
) -> RateAllocation:
    """Brute-force search over rates on a ``grid_step`` lattice.

    Every split of floor(budget / grid_step) grid units across the stages
    with a_t > 0 is scored; ties go to the lexicographically largest
    (earliest-heavy) allocation.
    """
    if not grid_step > 0:
        raise ValueError(f"grid_step must be positive, got {grid_step}")
    if budget < 0:
        raise ValueError(f"budget must be nonnegative, got {budget}")
    units = int(math.floor(budget / grid_step + 1e-9))
    act = coeffs.active
    r = np.zeros_like(coeffs.a)
    if act.size == 0:
        return RateAllocation(r, budget)
    n_candidates = math.comb(units + act.size - 1, act.size - 1)
    if n_candidates > max_candidates:
        raise EnumerationLimitError(
            f"{n_candidates} candidates exceeds the cap of {max_candidates}"
        )

    decay = np.exp2(-2.0 * grid_step * np.arange(units + 1))
    a_act = coeffs.a[act]
    winners = []  # (gap, composition) per chunk
    for block in _compositions(units, act.size, chunk):
        gaps = (a_act * decay[block]).sum(axis=1)
        low = gaps.min()
        tied = block[gaps <= low + _tie_tol(low)]
        # lexsort sorts by the last key first; reverse columns so stage 0 dominates
        winners.append((low, tied[np.lexsort(tied.T[::-1])[-1]]))
    best_gap = min(w[0] for w in winners)
    best = max(
        (tuple(c) for g, c in winners if g <= best_gap + _tie_tol(best_gap)),
    )
    r[act] = np.asarray(best) * grid_step
    return RateAllocation(r, budget)


def _tie_tol(gap: float) -> float:
    return 1e-12 * max(abs(gap), 1e-300)
