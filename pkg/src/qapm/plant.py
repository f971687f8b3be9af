"""Continuous LTI plants: transfer functions, state-space form, integration.

Plants are strictly proper single-input single-output systems driven by a
zero-order-hold actuator: the input ``u`` stays constant between `actuate`
calls.  Integration is classical fixed-step RK4 delegated to the selected
kernel backend (see `kernels`), which also accumulates the integral of
absolute error against the current reference at micro-step resolution.
"""

from __future__ import annotations

import math
from array import array
from dataclasses import dataclass

from . import kernels
from .policy import ConfigurationError

__all__ = [
    "TransferFunction",
    "StateSpacePlant",
    "ReferenceSignal",
    "DivergenceError",
    "tf_to_state_space",
]

DEFAULT_MICRO_STEP_US = 100
MAX_MICRO_STEP_US = 1000


class DivergenceError(ArithmeticError):
    """Plant state became non-finite during integration."""


@dataclass(frozen=True)
class TransferFunction:
    """SISO transfer function, coefficients in ascending powers of s.

    Must be strictly proper: numerator degree below denominator degree.
    """

    num: tuple[float, ...]
    den: tuple[float, ...]

    def __post_init__(self):
        num = _strip(self.num)
        den = _strip(self.den)
        if not den or len(den) < 2:
            raise ConfigurationError(f"denominator degree must be >= 1: {self.den}")
        if not num:
            raise ConfigurationError("numerator is zero")
        if len(num) >= len(den):
            raise ConfigurationError(
                f"transfer function not strictly proper: num degree "
                f"{len(num) - 1} >= den degree {len(den) - 1}"
            )
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    @property
    def order(self) -> int:
        return len(self.den) - 1

    @property
    def dc_gain(self) -> float:
        """Steady-state gain, value at s = 0."""
        return self.num[0] / self.den[0]


def _strip(coeffs) -> tuple[float, ...]:
    """Drop trailing (highest-power) zero coefficients."""
    out = [float(v) for v in coeffs]
    while out and out[-1] == 0.0:
        out.pop()
    return tuple(out)


def tf_to_state_space(
    tf: TransferFunction,
    micro_step_us: int = DEFAULT_MICRO_STEP_US,
    label: str = "plant",
) -> "StateSpacePlant":
    """Controllable-canonical realization of a strictly proper tf.

    The denominator is normalized to monic; D is zero.  Any realization
    with the same input/output map would do, this one is fixed for
    deterministic state traces.
    """
    lead = tf.den[-1]
    a_coeffs = [v / lead for v in tf.den[:-1]]
    n = len(a_coeffs)
    a = [0.0] * (n * n)
    for i in range(n - 1):
        a[i * n + i + 1] = 1.0
    for j in range(n):
        a[(n - 1) * n + j] = -a_coeffs[j]
    b = [0.0] * n
    b[n - 1] = 1.0
    c = [0.0] * n
    for j, v in enumerate(tf.num):
        c[j] = v / lead
    return StateSpacePlant(a, b, c, micro_step_us=micro_step_us, label=label)


class StateSpacePlant:
    """x' = A x + B u, y = C x, with a held (zero-order-hold) input.

    ``a`` is A flattened row-major.  State starts at rest (x = 0, u = 0).
    """

    def __init__(self, a, b, c, micro_step_us: int = DEFAULT_MICRO_STEP_US,
                 label: str = "plant"):
        n = len(b)
        if len(c) != n or len(a) != n * n:
            raise ConfigurationError(f"{label}: inconsistent matrix dimensions")
        if n > kernels.MAX_STATE:
            raise ConfigurationError(
                f"{label}: order {n} exceeds supported maximum {kernels.MAX_STATE}"
            )
        if not 1 <= int(micro_step_us) <= MAX_MICRO_STEP_US:
            raise ConfigurationError(
                f"{label}: micro step must be in [1, {MAX_MICRO_STEP_US}] us, "
                f"got {micro_step_us}"
            )
        self.n = n
        self.a = array("d", [float(v) for v in a])
        self.b = array("d", [float(v) for v in b])
        self.c = array("d", [float(v) for v in c])
        self.x = array("d", [0.0] * n)
        self.u = 0.0
        self.micro_step_us = int(micro_step_us)
        self.label = label

    def reset(self) -> None:
        for i in range(self.n):
            self.x[i] = 0.0
        self.u = 0.0

    def sample(self) -> float:
        """Current output y = C x."""
        y = 0.0
        for i in range(self.n):
            y += self.c[i] * self.x[i]
        return y

    def actuate(self, u: float) -> None:
        """Replace the held actuator value."""
        self.u = u

    def integrate(self, span_us: int, r: float = 0.0) -> float:
        """Advance the plant by ``span_us`` microseconds.

        Returns the integral of |r - y(t)| over the span (trapezoid over
        the RK4 micro-step samples), in seconds.
        """
        iae, y = kernels.advance_held(
            self.a, self.b, self.c, self.x, self.u, r, span_us, self.micro_step_us
        )
        if not math.isfinite(y) or any(not math.isfinite(v) for v in self.x):
            raise DivergenceError(f"{self.label}: state diverged (non-finite)")
        return iae


@dataclass(frozen=True)
class ReferenceSignal:
    """Unit square wave stepping between 0 and amplitude every interval.

    First step is 0 -> amplitude at t = 0; all loops share the phase.
    """

    interval_s: float = 1.0
    amplitude: float = 1.0

    def __post_init__(self):
        if self.interval_s <= 0:
            raise ConfigurationError(f"interval must be positive: {self.interval_s}")

    def value(self, t_s: float) -> float:
        """Reference at time t (seconds); t < 0 is the pre-step rest value."""
        if t_s < 0:
            return 0.0
        return self.amplitude if math.floor(t_s / self.interval_s) % 2 == 0 else 0.0
