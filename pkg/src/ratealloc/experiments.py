"""Experiment drivers producing CSV tables."""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional

import numpy as np

from .allocation import (
    CostCoefficients,
    closed_form_allocation,
    cost_coefficients,
    exhaustive_allocation,
    expected_gap,
    uniform_allocation,
)
from .config import ConfigError, ExperimentConfig
from .lqr import GainSchedule, SystemSpec, synthesize_gains
from .noise import deviation_gains
from .simulate import mean_estimate, ratio_estimate, replication_costs
from .streams import standard_draws

COST_SWEEP_COLUMNS = (
    "A", "R_sum",
    "J_p", "J_p_se",
    "J_c_opt", "J_c_opt_se",
    "J_c_unif", "J_c_unif_se",
    "J_RCost_opt", "J_RCost_opt_se",
    "J_RCost_unif", "J_RCost_unif_se",
    "J_RCost_diff", "J_RCost_diff_se",
    "excess_opt_analytic", "excess_opt_mc", "excess_opt_mc_se",
    "excess_unif_analytic", "excess_unif_mc", "excess_unif_mc_se",
)
RATE_PROFILE_COLUMNS = ("A", "B", "t", "mode", "rate", "coefficient")
TIME_VARIANT_COLUMNS = (
    "scenario", "t", "A_t", "coefficient",
    "rate_closed_form", "rate_exhaustive",
    "gap_closed_form", "gap_exhaustive", "eps_grid", "agree",
)


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


@dataclass
class Table:
    """Rows of one CSV result file, optionally streamed to disk as produced."""

    name: str
    columns: tuple
    rows: list = field(default_factory=list)
    ok: bool = True
    _stream: Optional[io.TextIOBase] = field(default=None, repr=False)
    _writer: Optional[object] = field(default=None, repr=False)

    def open(self, path: Path) -> None:
        self._stream = open(path, "w", newline="", encoding="utf-8")
        self._stream.write(f"# {self.name}: columns {','.join(self.columns)}\r\n")
        self._writer = csv.writer(self._stream)
        self._writer.writerow(self.columns)
        self._stream.flush()

    def add(self, row: dict) -> None:
        values = tuple(row[c] for c in self.columns)
        self.rows.append(values)
        if self._writer is not None:
            self._writer.writerow([format_value(v) for v in values])
            self._stream.flush()

    def close(self) -> None:
        if self._stream is not None:
            self._stream.close()
            self._stream = self._writer = None

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO(newline="")
        buf.write(f"# {self.name}: columns {','.join(self.columns)}\r\n")
        w = csv.writer(buf)
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([format_value(v) for v in r])
        return buf.getvalue()


def _gains_for(cfg: ExperimentConfig, spec: SystemSpec) -> GainSchedule:
    fixed = cfg.system.fixed_gains()
    return fixed if fixed is not None else synthesize_gains(spec)


def coefficients_for(spec: SystemSpec, gains: GainSchedule) -> CostCoefficients:
    return cost_coefficients(spec, gains, deviation_gains(spec, gains))


def early_share(r: np.ndarray, horizon: int) -> float:
    """Fraction of spent rate on stages t < T/2 (0 when nothing is spent)."""
    total = float(np.sum(r))
    if total <= 0:
        return 0.0
    return float(np.sum(r[: (horizon + 1) // 2])) / total


def _ordered_map(fn: Callable, items: Iterable, threads: int):
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        yield from map(fn, items)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        yield from pool.map(fn, items)


def _sweep_values(cfg: ExperimentConfig) -> list[float]:
    if cfg.sweep is not None:
        return cfg.sweep.values()
    if cfg.system.a is None:
        raise ConfigError("a sweep over A or a constant [system] a is required")
    return [cfg.system.a]


def run_invariant_cost_sweep(
    cfg: ExperimentConfig, threads: int = 1, out: Optional[Path] = None
) -> Table:
    """Relative LQR cost of optimal vs uniform allocation across a sweep of A."""
    table = Table("cost-sweep", COST_SWEEP_COLUMNS)
    horizon = cfg.system.horizon
    draws = standard_draws(cfg.mc.master_seed, cfg.mc.replications, horizon, threads)

    def point(a: float) -> dict:
        spec = cfg.system.spec(a=a)
        gains = _gains_for(cfg, spec)
        coeffs = coefficients_for(spec, gains)
        opt = closed_form_allocation(coeffs, cfg.budget)
        unif = uniform_allocation(cfg.budget, horizon)
        jp, jc_opt = replication_costs(spec, gains, opt, draws)
        _, jc_unif = replication_costs(spec, gains, unif, draws)
        jp_est = mean_estimate(jp)
        est = {
            "opt": (mean_estimate(jc_opt), ratio_estimate(jc_opt - jp, jp),
                    mean_estimate(jc_opt - jp), expected_gap(coeffs, opt)),
            "unif": (mean_estimate(jc_unif), ratio_estimate(jc_unif - jp, jp),
                     mean_estimate(jc_unif - jp), expected_gap(coeffs, unif)),
        }
        diff = ratio_estimate(jc_unif - jc_opt, jp)
        row = {"A": a, "R_sum": cfg.budget, "J_p": jp_est.mean, "J_p_se": jp_est.se,
               "J_RCost_diff": diff.mean, "J_RCost_diff_se": diff.se}
        for tag, (jc, rc, ex, gap) in est.items():
            row[f"J_c_{tag}"] = jc.mean
            row[f"J_c_{tag}_se"] = jc.se
            row[f"J_RCost_{tag}"] = rc.mean
            row[f"J_RCost_{tag}_se"] = rc.se
            row[f"excess_{tag}_analytic"] = gap / horizon
            row[f"excess_{tag}_mc"] = ex.mean
            row[f"excess_{tag}_mc_se"] = ex.se
        return row

    if out is not None:
        table.open(out)
    try:
        for row in _ordered_map(point, _sweep_values(cfg), threads):
            table.add(row)
    finally:
        table.close()
    return table


def _profile_pairs(cfg: ExperimentConfig) -> list[tuple[float, float]]:
    if cfg.profile_pairs:
        return list(cfg.profile_pairs)
    return [(a, cfg.system.b) for a in _sweep_values(cfg)]


def run_rate_profile(
    cfg: ExperimentConfig, threads: int = 1, out: Optional[Path] = None
) -> Table:
    """Per-stage rates for each configured constant (A, B) pair."""
    table = Table("rate-profile", RATE_PROFILE_COLUMNS)
    horizon = cfg.system.horizon

    def pair(ab):
        a, b = ab
        spec = cfg.system.spec(a=a, b=b)
        coeffs = coefficients_for(spec, _gains_for(cfg, spec))
        allocs = {}
        for mode in cfg.allocation_modes:
            if mode == "optimal":
                allocs[mode] = closed_form_allocation(coeffs, cfg.budget)
            elif mode == "uniform":
                allocs[mode] = uniform_allocation(cfg.budget, horizon)
            else:
                allocs[mode] = exhaustive_allocation(
                    coeffs, cfg.budget, cfg.grid_step, cfg.max_candidates
                )
        rows = []
        for mode, alloc in allocs.items():
            for t in range(horizon + 1):
                rows.append({"A": a, "B": b, "t": t, "mode": mode,
                             "rate": alloc.r[t], "coefficient": coeffs.a[t]})
        return rows

    if out is not None:
        table.open(out)
    try:
        for rows in _ordered_map(pair, _profile_pairs(cfg), threads):
            for row in rows:
                table.add(row)
    finally:
        table.close()
    return table


def run_time_variant(
    cfg: ExperimentConfig, threads: int = 1, out: Optional[Path] = None
) -> Table:
    """Closed form vs exhaustive search for a plant whose A jumps, plus a no-jump control.

    ``table.ok`` is False when the two disagree beyond grid resolution.
    """
    jump = cfg.system.jump
    if jump is None:
        raise ConfigError("time-variant needs [system.jump]")
    horizon = cfg.system.horizon
    if horizon > cfg.exhaustive_max_horizon:
        raise ConfigError(
            f"time-variant runs exhaustive search; horizon {horizon} exceeds "
            f"{cfg.exhaustive_max_horizon}"
        )
    table = Table("time-variant", TIME_VARIANT_COLUMNS)
    scenarios = [
        ("jump", cfg.system.spec()),
        ("no_jump", cfg.system.spec(a=jump.a1)),
    ]

    def scenario(item):
        name, spec = item
        coeffs = coefficients_for(spec, _gains_for(cfg, spec))
        cf = closed_form_allocation(coeffs, cfg.budget)
        ex = exhaustive_allocation(coeffs, cfg.budget, cfg.grid_step, cfg.max_candidates)
        gap_cf, gap_ex = expected_gap(coeffs, cf), expected_gap(coeffs, ex)
        eps = grid_tolerance(coeffs, cfg.grid_step)
        agree = bool(
            gap_cf <= gap_ex + eps
            and np.max(np.abs(cf.r - ex.r)) <= cfg.grid_step + 1e-9
        )
        rows = [
            {"scenario": name, "t": t, "A_t": spec.a_seq[t], "coefficient": coeffs.a[t],
             "rate_closed_form": cf.r[t], "rate_exhaustive": ex.r[t],
             "gap_closed_form": gap_cf, "gap_exhaustive": gap_ex,
             "eps_grid": eps, "agree": agree}
            for t in range(horizon)
        ]
        return rows, agree

    if out is not None:
        table.open(out)
    try:
        for rows, agree in _ordered_map(scenario, scenarios, threads):
            table.ok = table.ok and agree
            for row in rows:
                table.add(row)
    finally:
        table.close()
    return table


def grid_tolerance(coeffs: CostCoefficients, grid_step: float) -> float:
    """Largest gap change one grid step of rate can cause: max_t a_t (1 - 2^(-2 step))."""
    return float(coeffs.a.max() * (1.0 - 2.0 ** (-2.0 * grid_step)))
