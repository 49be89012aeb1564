"""Self-checks of the analytic results against brute force and simulation."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .allocation import (
    closed_form_allocation,
    exhaustive_allocation,
    expected_gap,
    uniform_allocation,
    water_level,
)
from .config import ExperimentConfig
from .experiments import Table, coefficients_for, grid_tolerance
from .lqr import GainSchedule, SystemSpec, synthesize_gains
from .noise import accumulated_variance, deviation_gains
from .simulate import replication_costs, simulate_batch, summarize
from .streams import standard_draws

VALIDATION_COLUMNS = ("check", "passed", "measured", "tolerance", "detail")
N_PATH_SEEDS = 20
N_SE = 5.0


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    measured: float
    tolerance: float
    detail: str = ""


@dataclass
class ValidationReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def table(self) -> Table:
        t = Table("validate", VALIDATION_COLUMNS)
        for c in self.checks:
            t.add({"check": c.name, "passed": c.passed, "measured": float(c.measured),
                   "tolerance": float(c.tolerance), "detail": c.detail})
        t.ok = self.passed
        return t


def _rel(a, b) -> float:
    a, b = np.asarray(a, float), np.asarray(b, float)
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - b) / np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))))


def _le(x: float, bound: float) -> bool:
    return bool(x <= bound)


def variance_law_zscore(dev: np.ndarray, sigma2: np.ndarray) -> float:
    """Worst standardized error of mean(e_t^2) against sigma_t^2 over stages.

    For zero-mean Gaussian e_t the estimator mean(e_t^2) has standard error
    sigma_t^2 sqrt(2 / n). Stages with sigma_t^2 = 0 must match exactly.
    """
    n = dev.shape[0]
    emp = np.mean(dev**2, axis=0)
    se = sigma2 * np.sqrt(2.0 / n)
    miss = np.abs(emp - sigma2)
    z = np.where(se > 0, miss / np.where(se > 0, se, 1.0), np.where(miss > 0, np.inf, 0.0))
    return float(np.max(z))


def run_validation(
    cfg: ExperimentConfig,
    threads: int = 1,
    f_override: Optional[Sequence[float]] = None,
) -> ValidationReport:
    """Run every invariant suite on the configured plant.

    ``f_override`` replaces the synthesized gains with a raw sequence, which
    is how malformed schedules get exercised.
    """
    report = ValidationReport()
    add = report.checks.append
    spec: SystemSpec = cfg.system.spec()
    T = spec.horizon

    raw_f = f_override
    if raw_f is None:
        fixed = cfg.system.fixed_gains()
        raw_f = (fixed if fixed is not None else synthesize_gains(spec)).f_seq
    try:
        gains = GainSchedule(np.asarray(raw_f, dtype=float))
        gains.check_horizon(spec)
    except ValueError as exc:
        add(Check("gain_schedule", False, float("nan"), 0.0, str(exc)))
        return report
    add(Check("gain_schedule", True, float(gains.f_seq[-1]), 0.0, "F_T == 0"))

    riccati = synthesize_gains(spec)
    worst = float(np.min(riccati.p_seq[:T] - spec.q))
    add(Check("riccati_p_at_least_q", _le(-worst, 0.0), worst, 0.0, "min_t P_t - Q"))

    table = deviation_gains(spec, gains)
    g, f = table.g, gains.f_seq
    err = 0.0
    for t in range(T):
        err = max(err, _rel(g[t + 1, t], spec.b * f[t]))
        if t + 1 < T:
            err = max(err, _rel(g[t + 2, : t + 1],
                                (spec.a_seq[t + 1] + spec.b * f[t + 1]) * g[t + 1, : t + 1]))
    add(Check("deviation_table_recursion", _le(err, 1e-12), err, 1e-12))

    coeffs = coefficients_for(spec, gains)
    opt = closed_form_allocation(coeffs, cfg.budget)
    unif = uniform_allocation(cfg.budget, T)

    # path-wise propagation identity on a handful of independent seeds
    path_err = 0.0
    for k in range(N_PATH_SEEDS):
        d = standard_draws(cfg.mc.master_seed + 1 + k, 1, T)
        p = simulate_batch(spec, gains, opt, d)
        pred = p["n_c"][0] @ g.T
        dev = p["x_c"][0] - p["x_p"][0]
        path_err = max(path_err, float(np.max(np.abs(dev - pred) / (1 + np.abs(p["x_c"][0])))))
    add(Check("pathwise_deviation_identity", _le(path_err, 1e-9), path_err, 1e-9))

    # KKT equalization and budget use
    levels = water_level(coeffs, opt)
    spread = float((levels.max() - levels.min()) / levels.max()) if levels.size else 0.0
    add(Check("kkt_equalization", _le(spread, 1e-9), spread, 1e-9,
              f"{levels.size} active stages"))
    if coeffs.active.size:
        slack = abs(float(opt.r.sum()) - cfg.budget)
        add(Check("budget_tight", _le(slack, 1e-9), slack, 1e-9))
    inactive = (opt.r == 0) & (coeffs.a > 0)
    viol = float(np.max(coeffs.a[inactive] - levels.min(), initial=0.0)) if levels.size else 0.0
    add(Check("kkt_inactive_below_level", _le(viol, 1e-9 * max(1.0, levels.max(initial=0.0))),
              viol, 1e-9))

    if T <= cfg.exhaustive_max_horizon:
        ex = exhaustive_allocation(coeffs, cfg.budget, cfg.grid_step, cfg.max_candidates)
        eps = grid_tolerance(coeffs, cfg.grid_step)
        margin = expected_gap(coeffs, opt) - expected_gap(coeffs, ex)
        add(Check("oracle_dominance", _le(margin, eps), margin, eps,
                  "gap(closed form) - gap(exhaustive)"))
        dist = float(np.max(np.abs(opt.r - ex.r)))
        add(Check("oracle_rates_close", _le(dist, cfg.grid_step + 1e-9), dist, cfg.grid_step))
    else:
        add(Check("oracle_dominance", True, 0.0, 0.0,
                  f"skipped: horizon {T} > {cfg.exhaustive_max_horizon}"))

    # Monte Carlo against analytic formulas
    n = cfg.mc.replications
    draws = standard_draws(cfg.mc.master_seed, n, T, threads)
    paths = simulate_batch(spec, gains, opt, draws)
    dev = paths["x_c"] - paths["x_p"]
    sigma2 = accumulated_variance(table, opt, spec.c2).sigma2
    worst_z = variance_law_zscore(dev, sigma2)
    add(Check("deviation_variance_law", _le(worst_z, N_SE), worst_z, N_SE,
              "max_t |mean(e_t^2) - sigma_t^2| / se"))

    for tag, alloc in (("optimal", opt), ("uniform", unif)):
        jp, jc = replication_costs(spec, gains, alloc, draws)
        rep = summarize(jp, jc, expected_gap(coeffs, alloc) / T, cfg.mc.master_seed)
        miss = abs(rep.excess.mean - rep.analytic_gap)
        add(Check(f"mc_gap_{tag}", _le(miss, N_SE * rep.excess.se), miss,
                  N_SE * rep.excess.se, "|MC (J_c - J_p) - analytic| vs 5 se"))
        add(Check(f"rcost_nonnegative_{tag}",
                  _le(-rep.j_rcost.mean, N_SE * rep.j_rcost.se),
                  rep.j_rcost.mean, -N_SE * rep.j_rcost.se))

    # common random numbers must beat independent disturbances
    jp, jc = replication_costs(spec, gains, opt, draws)
    other = draws.copy()
    other[:, 0, :] = standard_draws(cfg.mc.master_seed + 10**6, n, T, threads)[:, 0, :]
    _, jc_indep = replication_costs(spec, gains, opt, other)
    v_crn, v_ind = float(np.var(jc - jp)), float(np.var(jc_indep - jp))
    ok = v_crn < v_ind or (spec.sigma_z2 == 0 and v_crn <= v_ind)
    add(Check("crn_variance_reduction", ok, v_crn, v_ind,
              "var(paired diff) vs var(independent diff)"))
    return report


def write_report(report: ValidationReport, path: Path) -> None:
    Path(path).write_text(report.table().to_csv(), encoding="utf-8", newline="")
