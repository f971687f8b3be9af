# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled integrator kernel; hot loop of the simulator.

Mirror of `_pykernel.py`: same operations in the same order, compiled with
FP contraction off, so results are bit-identical to the pure-Python
fallback.
"""

# Hard cap on plant order; scratch buffers live on the stack.
MAX_STATE = 8


cdef inline void _deriv(const double* a, const double* b, int n,
                        const double* x, double u, double* out) noexcept nogil:
    cdef int i, j, row
    cdef double acc
    for i in range(n):
        acc = b[i] * u
        row = i * n
        for j in range(n):
            acc += a[row + j] * x[j]
        out[i] = acc


cdef inline void _rk4_step(const double* a, const double* b, int n,
                           double* x, double u, double h) noexcept nogil:
    cdef double k1[8]
    cdef double k2[8]
    cdef double k3[8]
    cdef double k4[8]
    cdef double xt[8]
    cdef double hh = h * 0.5
    cdef double h6 = h / 6.0
    cdef int i
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


def advance_held(double[::1] a, double[::1] b, double[::1] c, double[::1] x,
                 double u, double r, long span_us, long micro_step_us):
    """Integrate x' = A x + B u over ``span_us`` microseconds.

    See `_pykernel.advance_held` for the full contract.
    """
    cdef int n = x.shape[0]
    cdef int i
    cdef long full, rem, step
    cdef double h, y, y_prev, iae

    if n > 8:
        raise ValueError(f"plant order {n} exceeds kernel limit 8")
    if span_us < 0:
        raise ValueError(f"negative span {span_us}")
    if micro_step_us <= 0:
        raise ValueError(f"micro step must be positive, got {micro_step_us}")

    y = 0.0
    for i in range(n):
        y += c[i] * x[i]
    if span_us == 0:
        return 0.0, y

    full = span_us // micro_step_us
    rem = span_us - full * micro_step_us
    iae = 0.0
    y_prev = y
    h = micro_step_us * 1e-6
    with nogil:
        for step in range(full):
            _rk4_step(&a[0], &b[0], n, &x[0], u, h)
            y = 0.0
            for i in range(n):
                y += c[i] * x[i]
            iae += (fabs_d(r - y_prev) + fabs_d(r - y)) * 0.5 * h
            y_prev = y
        if rem:
            h = rem * 1e-6
            _rk4_step(&a[0], &b[0], n, &x[0], u, h)
            y = 0.0
            for i in range(n):
                y += c[i] * x[i]
            iae += (fabs_d(r - y_prev) + fabs_d(r - y)) * 0.5 * h
            y_prev = y
    return iae, y_prev


cdef inline double fabs_d(double v) noexcept nogil:
    return -v if v < 0.0 else v
