"""Scalar finite-horizon LQR: plant description, gain synthesis, stage costs."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class SystemSpec:
    """Scalar plant x[t+1] = A_t x[t] + B u[t] + z[t] with cost weights Q, D.

    ``a_seq`` holds one coefficient per transition, t = 0..T-1. Stage costs
    are charged for t = 0..T-1; states exist for t = 0..T.
    ``terminal_weight`` only seeds the Riccati recursion (P_T).
    """

    a_seq: tuple
    b: float
    q: float
    d: float
    x0: float = 0.0
    sigma_z2: float = 0.0
    c2: float = 1.0
    terminal_weight: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "a_seq", tuple(float(a) for a in self.a_seq))
        if self.terminal_weight is None:
            object.__setattr__(self, "terminal_weight", float(self.q))
        if not self.q > 0:
            raise ValueError(f"q must be strictly positive, got {self.q}")
        if not self.d > 0:
            raise ValueError(f"d must be strictly positive, got {self.d}")
        if len(self.a_seq) < 1:
            raise ValueError("horizon must be at least 1")
        if self.sigma_z2 < 0:
            raise ValueError(f"sigma_z2 must be nonnegative, got {self.sigma_z2}")
        if self.c2 < 0:
            raise ValueError(f"c2 must be nonnegative, got {self.c2}")
        if self.terminal_weight < 0:
            raise ValueError(
                f"terminal_weight must be nonnegative, got {self.terminal_weight}"
            )

    @classmethod
    def constant(cls, a: float, horizon: int, **kwargs) -> "SystemSpec":
        if horizon < 1:
            raise ValueError("horizon must be at least 1")
        return cls(a_seq=(float(a),) * horizon, **kwargs)

    @classmethod
    def with_jump(
        cls, a1: float, a2: float, t_jump: int, horizon: int, **kwargs
    ) -> "SystemSpec":
        """A_t = a1 for t < t_jump and a2 from t_jump on."""
        if not 0 <= t_jump <= horizon:
            raise ValueError(f"t_jump={t_jump} outside 0..{horizon}")
        a_seq = tuple(a1 if t < t_jump else a2 for t in range(horizon))
        return cls(a_seq=a_seq, **kwargs)

    @property
    def horizon(self) -> int:
        return len(self.a_seq)

    @property
    def a(self) -> np.ndarray:
        return np.asarray(self.a_seq, dtype=float)


@dataclass(frozen=True, eq=False)
class GainSchedule:
    """Feedback gains F_0..F_T (u = F_t * x). F_T is pinned to zero.

    ``p_seq`` carries the Riccati cost-to-go P_0..P_T when the schedule came
    from :func:`synthesize_gains`; it is ``None`` for hand-built schedules.
    """

    f_seq: np.ndarray
    p_seq: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        f = _frozen(self.f_seq)
        if f.ndim != 1 or f.size < 2:
            raise ValueError("f_seq must be a 1-D sequence of length horizon + 1")
        if f[-1] != 0.0:
            raise ValueError(f"F_T must be exactly 0, got {f[-1]!r}")
        if not np.all(np.isfinite(f)):
            raise ValueError("gains must be finite")
        object.__setattr__(self, "f_seq", f)
        if self.p_seq is not None:
            p = _frozen(self.p_seq)
            if p.shape != f.shape:
                raise ValueError("p_seq and f_seq lengths differ")
            object.__setattr__(self, "p_seq", p)

    @classmethod
    def constant(cls, f: float, horizon: int) -> "GainSchedule":
        """Fixed gain F at every costed stage (F_T = 0)."""
        return cls(np.r_[np.full(horizon, float(f)), 0.0])

    @property
    def horizon(self) -> int:
        return self.f_seq.size - 1

    def check_horizon(self, spec: SystemSpec) -> None:
        if self.horizon != spec.horizon:
            raise ValueError(
                f"gain schedule has horizon {self.horizon}, system has {spec.horizon}"
            )


def synthesize_gains(spec: SystemSpec) -> GainSchedule:
    """Backward Riccati recursion seeded with P_T = ``spec.terminal_weight``."""
    T = spec.horizon
    b, q, d = spec.b, spec.q, spec.d
    p = np.zeros(T + 1)
    f = np.zeros(T + 1)
    p[T] = spec.terminal_weight
    for t in range(T - 1, -1, -1):
        a = spec.a_seq[t]
        denom = d + b * b * p[t + 1]
        if not denom > 0:
            raise ValueError(f"nonpositive Riccati denominator at stage {t}: {denom}")
        cross = a * b * p[t + 1]
        f[t] = -cross / denom
        # a^2 P - (a b P)^2 / denom, rearranged so P_t >= q survives rounding
        p[t] = q + a * a * p[t + 1] * d / denom
    return GainSchedule(f, p)


def stage_cost(x: float, u: float, spec: SystemSpec) -> float:
    return spec.q * x * x + spec.d * u * u


def step_perfect(
    x: float, t: int, z: float, spec: SystemSpec, gains: GainSchedule
) -> tuple[float, float]:
    """One closed-loop step with exact state feedback; returns (x_next, u)."""
    if not 0 <= t < spec.horizon:
        raise IndexError(f"stage {t} outside 0..{spec.horizon - 1}")
    u = float(gains.f_seq[t]) * x
    return spec.a_seq[t] * x + spec.b * u + z, u
