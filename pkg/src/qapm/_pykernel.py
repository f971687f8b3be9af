"""Pure-Python integrator kernel; fallback when the C extension is absent.

Keep this file and `_native.pyx` in lockstep: the compiled kernel performs
the exact same floating-point operations in the exact same order, so both
backends produce bit-identical trajectories (the extension is built with
FP contraction disabled).
"""

from __future__ import annotations

# Hard cap on plant order; keeps the compiled kernel's scratch on the stack.
MAX_STATE = 8


def advance_held(a, b, c, x, u, r, span_us, micro_step_us):
    """Integrate x' = A x + B u over ``span_us`` microseconds.

    Classical fixed-step RK4 with step ``micro_step_us``; a shorter final
    step covers the remainder exactly.  ``u`` (actuator) and ``r``
    (reference) are held constant over the span.  ``a`` is A flattened
    row-major; ``b``, ``c``, ``x`` have length n.  ``x`` is updated in
    place.

    Returns ``(iae_increment, y_end)`` where the increment is the
    trapezoid integral of |r - y(t)| over the span, in seconds.
    """
    n = len(x)
    if n > MAX_STATE:
        raise ValueError(f"plant order {n} exceeds kernel limit {MAX_STATE}")
    if span_us < 0:
        raise ValueError(f"negative span {span_us}")
    if micro_step_us <= 0:
        raise ValueError(f"micro step must be positive, got {micro_step_us}")

    y = 0.0
    for i in range(n):
        y += c[i] * x[i]
    if span_us == 0:
        return 0.0, y

    k1 = [0.0] * n
    k2 = [0.0] * n
    k3 = [0.0] * n
    k4 = [0.0] * n
    xt = [0.0] * n

    full = span_us // micro_step_us
    rem = span_us - full * micro_step_us
    iae = 0.0
    y_prev = y
    h = micro_step_us * 1e-6
    for _ in range(full):
        _rk4_step(a, b, n, x, u, h, k1, k2, k3, k4, xt)
        y = 0.0
        for i in range(n):
            y += c[i] * x[i]
        iae += (abs(r - y_prev) + abs(r - y)) * 0.5 * h
        y_prev = y
    if rem:
        h = rem * 1e-6
        _rk4_step(a, b, n, x, u, h, k1, k2, k3, k4, xt)
        y = 0.0
        for i in range(n):
            y += c[i] * x[i]
        iae += (abs(r - y_prev) + abs(r - y)) * 0.5 * h
    return iae, y


def _rk4_step(a, b, n, x, u, h, k1, k2, k3, k4, xt):
    hh = h * 0.5
    h6 = h / 6.0
    _deriv(a, b, n, x, u, k1)
    for i in range(n):
        xt[i] = x[i] + hh * k1[i]
    _deriv(a, b, n, xt, u, k2)
    for i in range(n):
        xt[i] = x[i] + hh * k2[i]
    _deriv(a, b, n, xt, u, k3)
    for i in range(n):
        xt[i] = x[i] + h * k3[i]
    _deriv(a, b, n, xt, u, k4)
    for i in range(n):
        x[i] = x[i] + h6 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])


def _deriv(a, b, n, x, u, out):
    for i in range(n):
        acc = b[i] * u
        row = i * n
        for j in range(n):
            acc += a[row + j] * x[j]
        out[i] = acc
