"""How compression noise injected at one stage reaches later states.

The compressed loop differs from the perfect loop only through the noises
n_m. The deviation e_k = x_c[k] - x_p[k] obeys

    e_{t+1} = (A_t + B F_t) e_t + B F_t n_t,    e_0 = 0,

so e_k = sum_{m<k} G[k, m] n_m with G[t+1, t] = B F_t and
G[t+1, m] = (A_t + B F_t) G[t, m].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lqr import GainSchedule, SystemSpec


@dataclass(frozen=True, eq=False)
class DeviationGainTable:
    """``g[k, m]`` is the weight of noise n_m in the state deviation at stage k.

    Shape is (T+1, T). Entries with m >= k are structurally zero (noise sent
    at stage m cannot reach states at or before m).
    """

    g: np.ndarray

    @property
    def horizon(self) -> int:
        return self.g.shape[1]

    def entry(self, k: int, m: int) -> float:
        if not 0 <= m < k <= self.horizon:
            raise IndexError(f"G[{k}, {m}] is undefined; need 0 <= m < k <= T")
        return float(self.g[k, m])


@dataclass(frozen=True, eq=False)
class DeviationVariances:
    """sigma2[k] = Var(x_c[k] - x_p[k]) for k = 0..T; sigma2[0] = 0."""

    sigma2: np.ndarray


def deviation_gains(spec: SystemSpec, gains: GainSchedule) -> DeviationGainTable:
    gains.check_horizon(spec)
    T = spec.horizon
    f = gains.f_seq
    g = np.zeros((T + 1, T))
    for t in range(T):
        closed = spec.a_seq[t] + spec.b * f[t]
        g[t + 1, :t] = closed * g[t, :t]
        g[t + 1, t] = spec.b * f[t]
    g.flags.writeable = False
    return DeviationGainTable(g)


def noise_variance(rate, c2: float):
    """c^2 * 2^(-2R), elementwise over ``rate``."""
    return c2 * np.exp2(-2.0 * np.asarray(rate, dtype=float))


def accumulated_variance(
    table: DeviationGainTable, rates, c2: float
) -> DeviationVariances:
    if c2 < 0:
        raise ValueError(f"c2 must be nonnegative, got {c2}")
    r = np.asarray(getattr(rates, "r", rates), dtype=float)
    T = table.horizon
    if r.size < T:
        raise ValueError(f"need at least {T} rates, got {r.size}")
    per_noise = noise_variance(r[:T], c2)
    sq = table.g**2
    sigma2 = np.zeros(T + 1)
    for k in range(1, T + 1):
        sigma2[k] = math.fsum(sq[k, :k] * per_noise[:k])
    sigma2.flags.writeable = False
    return DeviationVariances(sigma2)


def sample_compression_noise(rate: float, c2: float, rng: np.random.Generator) -> float:
    """One draw of N(0, c^2 2^(-2R)). Always consumes exactly one normal."""
    return math.sqrt(c2 * 2.0 ** (-2.0 * rate)) * float(rng.standard_normal())
