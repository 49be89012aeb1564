"""Paired Monte Carlo of the perfect and rate-limited closed loops.

Both loops see the same disturbance draws z_t (common random numbers); the
rate-limited loop additionally acts on x_t + n_t with n_t ~ N(0, c^2 2^(-2 R_t)).
Compression noises are generated as scaled standard normals, so two
allocations simulated from the same seed are coupled as well.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .allocation import RateAllocation, cost_coefficients, expected_gap
from .lqr import GainSchedule, SystemSpec
from .noise import deviation_gains, noise_variance
from .streams import draw_block, standard_draws


@dataclass(frozen=True, eq=False)
class TrajectoryPair:
    x_p: np.ndarray
    u_p: np.ndarray
    x_c: np.ndarray
    u_c: np.ndarray
    n_c: np.ndarray
    z: np.ndarray


@dataclass(frozen=True)
class Estimate:
    mean: float
    se: float


@dataclass(frozen=True)
class CostReport:
    """Average-stage costs (divided by T) with standard errors.

    ``excess`` is the paired estimate of J_c - J_p; ``analytic_gap`` is the
    prediction sum_t a_t 2^(-2 R_t) / T for the same quantity.
    """

    j_p: Estimate
    j_c: Estimate
    excess: Estimate
    j_rcost: Estimate
    analytic_gap: float
    replications: int
    master_seed: int


def _check(spec: SystemSpec, gains: GainSchedule, alloc: RateAllocation) -> None:
    gains.check_horizon(spec)
    if alloc.r.size < spec.horizon:
        raise ValueError(
            f"allocation covers {alloc.r.size} stages, system needs {spec.horizon}"
        )


def _run(spec, gains, alloc, draws, keep_paths):
    """Vectorized closed-loop rollout over the leading replication axis."""
    T = spec.horizon
    n_rep = draws.shape[0]
    f = gains.f_seq
    z = np.sqrt(spec.sigma_z2) * draws[:, 0, :]
    n = np.sqrt(noise_variance(alloc.r[:T], spec.c2)) * draws[:, 1, :]
    x_p = np.full(n_rep, float(spec.x0))
    x_c = x_p.copy()
    cost_p = np.zeros(n_rep)
    cost_c = np.zeros(n_rep)
    paths = None
    if keep_paths:
        paths = {
            "x_p": np.empty((n_rep, T + 1)),
            "x_c": np.empty((n_rep, T + 1)),
            "u_p": np.empty((n_rep, T)),
            "u_c": np.empty((n_rep, T)),
        }
        paths["x_p"][:, 0] = x_p
        paths["x_c"][:, 0] = x_c
    for t in range(T):
        u_p = f[t] * x_p
        u_c = f[t] * (x_c + n[:, t])
        cost_p += spec.q * x_p**2 + spec.d * u_p**2
        cost_c += spec.q * x_c**2 + spec.d * u_c**2
        x_p = spec.a_seq[t] * x_p + spec.b * u_p + z[:, t]
        x_c = spec.a_seq[t] * x_c + spec.b * u_c + z[:, t]
        if keep_paths:
            paths["u_p"][:, t] = u_p
            paths["u_c"][:, t] = u_c
            paths["x_p"][:, t + 1] = x_p
            paths["x_c"][:, t + 1] = x_c
    if keep_paths:
        paths["n_c"] = n
        paths["z"] = z
    return cost_p / T, cost_c / T, paths


def simulate_pair(
    spec: SystemSpec,
    gains: GainSchedule,
    alloc: RateAllocation,
    rng: np.random.Generator,
) -> TrajectoryPair:
    _check(spec, gains, alloc)
    draws = draw_block(rng, spec.horizon)[None]
    _, _, paths = _run(spec, gains, alloc, draws, keep_paths=True)
    return TrajectoryPair(**{k: v[0] for k, v in paths.items()})


def simulate_batch(
    spec: SystemSpec, gains: GainSchedule, alloc: RateAllocation, draws: np.ndarray
) -> dict:
    """Full paths for every replication in ``draws``; arrays lead with the replication axis."""
    _check(spec, gains, alloc)
    return _run(spec, gains, alloc, draws, keep_paths=True)[2]


def replication_costs(
    spec: SystemSpec, gains: GainSchedule, alloc: RateAllocation, draws: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Per-replication average-stage costs (J_p, J_c)."""
    _check(spec, gains, alloc)
    if draws.ndim != 3 or draws.shape[1:] != (2, spec.horizon):
        raise ValueError(f"draws must have shape (n, 2, {spec.horizon})")
    jp, jc, _ = _run(spec, gains, alloc, draws, keep_paths=False)
    return jp, jc


def mean_estimate(samples: np.ndarray) -> Estimate:
    n = samples.size
    se = float(samples.std(ddof=1) / np.sqrt(n)) if n > 1 else float("nan")
    return Estimate(float(samples.mean()), se)


def ratio_estimate(num: np.ndarray, den: np.ndarray) -> Estimate:
    """mean(num) / mean(den) with a delta-method standard error."""
    ratio = float(num.mean() / den.mean())
    n = num.size
    if n < 2:
        return Estimate(ratio, float("nan"))
    resid = num - ratio * den
    se = float(resid.std(ddof=1) / np.sqrt(n) / abs(den.mean()))
    return Estimate(ratio, se)


def summarize(
    jp: np.ndarray, jc: np.ndarray, analytic_gap: float, master_seed: int
) -> CostReport:
    diff = jc - jp
    return CostReport(
        j_p=mean_estimate(jp),
        j_c=mean_estimate(jc),
        excess=mean_estimate(diff),
        j_rcost=ratio_estimate(diff, jp),
        analytic_gap=float(analytic_gap),
        replications=int(jp.size),
        master_seed=int(master_seed),
    )


def estimate_costs(
    spec: SystemSpec,
    gains: GainSchedule,
    alloc: RateAllocation,
    replications: int,
    master_seed: int,
    threads: int = 1,
    draws: np.ndarray | None = None,
) -> CostReport:
    """Monte Carlo J_p, J_c and relative cost, next to the analytic gap.

    Pass ``draws`` (from :func:`ratealloc.streams.standard_draws`) to reuse
    one set of random numbers across several calls.
    """
    if replications < 1:
        raise ValueError(f"replications must be >= 1, got {replications}")
    if draws is None:
        draws = standard_draws(master_seed, replications, spec.horizon, threads)
    elif draws.shape[0] != replications:
        raise ValueError("draws do not match the replication count")
    jp, jc = replication_costs(spec, gains, alloc, draws)
    coeffs = cost_coefficients(spec, gains, deviation_gains(spec, gains))
    gap = expected_gap(coeffs, _pad(alloc.r, spec.horizon)) / spec.horizon
    return summarize(jp, jc, gap, master_seed)


def _pad(r: np.ndarray, horizon: int) -> np.ndarray:
    out = np.zeros(horizon + 1)
    m = min(r.size, horizon + 1)
    out[:m] = r[:m]
    return out
