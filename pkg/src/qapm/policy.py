"""Three-stage power manager: period adaptation, voltage scaling, reclaiming.

The manager runs every time a control task releases a new job.  It first
stretches or shrinks the sampling period of the triggering loop according to
how large its control error currently is (small error -> long period -> less
work).  It then picks the lowest discrete CPU speed that still fits the total
workload, and finally shrinks *all* sampling periods by the resulting
workload/speed ratio so the CPU ends up exactly 100% utilized.

Everything in this module is a pure function over value types; no shared
mutable state, safe to call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

__all__ = [
    "AdaptationParams",
    "TaskSpec",
    "CpuLevels",
    "PolicyDecision",
    "ConfigurationError",
    "SchedulabilityError",
    "period_scale_factor",
    "adapt_period",
    "ideal_speed",
    "quantize_speed",
    "reclaim_periods",
    "policy_step",
    "check_feasible",
]

# |alpha_ideal - level| below this counts as an exact level match.
EXACT_LEVEL_TOL = 1e-12

# Feasible float sums may land a few ulps above 1; treat that as 1.
_ONE_SLACK = 1e-9


class ConfigurationError(ValueError):
    """A task, level set, or scenario violates a structural invariant."""


class SchedulabilityError(ValueError):
    """The requested workload cannot be scheduled at any available speed."""


@dataclass(frozen=True)
class AdaptationParams:
    """Error thresholds and exponent gain for period adaptation.

    Below ``e_min`` the period jumps to its maximum, above ``e_max`` it is
    pinned to its nominal minimum, and in between it interpolates
    exponentially with steepness ``beta``.
    """

    beta: float
    e_min: float
    e_max: float

    def __post_init__(self):
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise ConfigurationError(f"beta must be positive, got {self.beta}")
        if not (0 <= self.e_min < self.e_max):
            raise ConfigurationError(
                f"need 0 <= e_min < e_max, got e_min={self.e_min} e_max={self.e_max}"
            )


@dataclass(frozen=True)
class TaskSpec:
    """Static timing attributes of one control task.

    Time values are unit-agnostic; callers must just be consistent (the
    simulator uses seconds).  ``c_nom`` is the execution time at full CPU
    speed; at speed ``alpha`` the task takes ``c_nom / alpha``.
    """

    id: int
    c_nom: float
    h0: float
    h_max: float
    adaptation: AdaptationParams

    def __post_init__(self):
        if not (0 < self.c_nom <= self.h0 <= self.h_max):
            raise ConfigurationError(
                f"task {self.id}: need 0 < c_nom <= h0 <= h_max, "
                f"got c_nom={self.c_nom} h0={self.h0} h_max={self.h_max}"
            )

    @property
    def stretch_limit(self) -> float:
        """Largest allowed period scale factor, h_max / h0."""
        return self.h_max / self.h0


@dataclass(frozen=True)
class CpuLevels:
    """The discrete set of normalized CPU speeds, highest always 1.0.

    With ``ideal=True`` the processor scales continuously over (0, 1] and
    ``levels`` is ignored by quantization.
    """

    levels: tuple[float, ...]
    ideal: bool = False
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(self.levels))
        if self.ideal:
            return
        if not self.levels:
            raise ConfigurationError("level set is empty")
        if self.levels[0] <= 0:
            raise ConfigurationError(f"levels must be positive, got {self.levels[0]}")
        if any(a >= b for a, b in zip(self.levels, self.levels[1:])):
            raise ConfigurationError(f"levels not strictly ascending: {self.levels}")
        if self.levels[-1] != 1.0:
            raise ConfigurationError(f"highest level must be 1.0, got {self.levels[-1]}")

    @property
    def floor(self) -> float:
        """Lowest selectable speed."""
        return 0.0 if self.ideal else self.levels[0]


@dataclass(frozen=True)
class PolicyDecision:
    """Outputs of one power-manager invocation.

    ``base_periods`` are the error-adapted periods before reclaiming;
    ``effective_periods`` are the reclaimed periods actually applied.
    ``u_expected`` is the utilization the CPU would have without reclaiming
    (alpha_ideal / alpha).
    """

    alpha_ideal: float
    alpha: float
    u_expected: float
    base_periods: tuple[float, ...]
    effective_periods: tuple[float, ...]


def period_scale_factor(e: float, spec: TaskSpec) -> float:
    """Period scale factor (>= 1) for absolute control error ``e``.

    Returns ``h_max/h0`` when the loop is near steady state (e <= e_min),
    1 when the error is large (e >= e_max), and an exponential
    interpolation in between.  Continuous at both thresholds and
    non-increasing in ``e``.
    """
    if not math.isfinite(e) or e < 0:
        raise ValueError(f"control error must be finite and >= 0, got {e}")
    p = spec.adaptation
    ratio = spec.stretch_limit
    if e <= p.e_min:
        return ratio
    if e >= p.e_max:
        return 1.0
    lo = math.exp(-p.beta * p.e_max)
    hi = math.exp(-p.beta * p.e_min)
    w = (math.exp(-p.beta * e) - lo) / (hi - lo)
    return w * (ratio - 1.0) + 1.0


def adapt_period(e: float, spec: TaskSpec) -> float:
    """New sampling period for error ``e``: scale factor times h0.

    Result is clamped to [h0, h_max] (the scale factor already lands
    there up to rounding).
    """
    h = period_scale_factor(e, spec) * spec.h0
    return min(max(h, spec.h0), spec.h_max)


def ideal_speed(tasks: Iterable[tuple[float, float]]) -> float:
    """Workload of the task set: sum of c_nom / period.

    ``tasks`` yields (nominal execution time, current period) pairs.  This
    is the lowest continuous speed that keeps the set schedulable, so it is
    what an ideal continuously-scaling processor would run at.  No clamping
    is applied.
    """
    total = 0.0
    n = 0
    for c_nom, period in tasks:
        if period <= 0:
            raise ValueError(f"period must be positive, got {period}")
        total += c_nom / period
        n += 1
    if n == 0:
        raise ConfigurationError("empty task set")
    return total


def quantize_speed(alpha_ideal: float, levels: CpuLevels) -> float:
    """Map the ideal speed onto the available level set.

    Picks the smallest level that is >= alpha_ideal (within
    ``EXACT_LEVEL_TOL`` for equality), or the lowest level when even that
    exceeds the demand.  Ideal processors pass the value through.
    """
    if alpha_ideal <= 0:
        raise ValueError(f"ideal speed must be positive, got {alpha_ideal}")
    if alpha_ideal > 1.0 + _ONE_SLACK:
        raise SchedulabilityError(
            f"workload {alpha_ideal} exceeds full speed; task set not schedulable"
        )
    alpha_ideal = min(alpha_ideal, 1.0)
    if levels.ideal:
        return alpha_ideal
    for lvl in levels.levels:
        if lvl >= alpha_ideal - EXACT_LEVEL_TOL:
            return lvl
    # Unreachable: the top level is 1.0 and alpha_ideal <= 1.
    raise SchedulabilityError(f"no level fits workload {alpha_ideal}")


def reclaim_periods(
    base_periods: Sequence[float], alpha_ideal: float, alpha: float
) -> tuple[float, ...]:
    """Shrink all periods by alpha_ideal/alpha so utilization returns to 1.

    After quantization the CPU runs faster than the workload needs
    (alpha >= alpha_ideal), which would leave it partly idle.  Scaling
    every period by the ratio hands the spare capacity back to the loops
    as faster sampling.  Periods may drop below their nominal values.
    """
    if alpha <= 0:
        raise ValueError(f"speed must be positive, got {alpha}")
    scale = alpha_ideal / alpha
    return tuple(h * scale for h in base_periods)


def policy_step(
    specs: Sequence[TaskSpec],
    trigger: int,
    error: float,
    base_periods: Sequence[float],
    levels: CpuLevels,
    work: Sequence[float] | None = None,
) -> PolicyDecision:
    """One full power-manager invocation at a job release.

    ``trigger`` indexes the loop whose job was just released; only its base
    period is re-adapted from ``error``, the others keep their current base
    periods.  The speed and the reclaimed periods are then recomputed over
    the whole set.  ``work`` optionally overrides the nominal execution
    times (execution-time variation hook); defaults to each spec's c_nom.

    Deterministic: identical inputs produce identical decisions.
    """
    if not 0 <= trigger < len(specs):
        raise ValueError(f"trigger index {trigger} out of range")
    if len(base_periods) != len(specs):
        raise ValueError("base_periods and specs length mismatch")
    if work is None:
        work = [s.c_nom for s in specs]
    base = list(base_periods)
    base[trigger] = adapt_period(error, specs[trigger])
    alpha_ideal = ideal_speed(zip(work, base))
    alpha = quantize_speed(alpha_ideal, levels)
    return PolicyDecision(
        alpha_ideal=alpha_ideal,
        alpha=alpha,
        u_expected=alpha_ideal / alpha,
        base_periods=tuple(base),
        effective_periods=reclaim_periods(base, alpha_ideal, alpha),
    )


def check_feasible(specs: Sequence[TaskSpec]) -> float:
    """Validate the schedulability precondition sum(c_nom/h0) <= 1.

    Returns the nominal workload; raises ConfigurationError when the task
    set cannot fit even at full speed and nominal periods.
    """
    u = ideal_speed((s.c_nom, s.h0) for s in specs)
    if u > 1.0 + _ONE_SLACK:
        raise ConfigurationError(
            f"nominal workload {u:.6f} exceeds 1; task set infeasible"
        )
    return u
