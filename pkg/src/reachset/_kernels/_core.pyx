# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled propagation kernel.

Same contract as pykernel.propagate_batch: J trajectories, N stages of
zero-order-hold steering, linear mass depletion, RK4-fixed or adaptive
Dormand-Prince 5(4) stepping. Each sample integrates independently, so
results are bitwise reproducible for any thread count.
"""

import numpy as np

cimport cython
from cython.parallel cimport prange
from libc.math cimport NAN, fabs, isfinite, pow, sqrt

BACKEND = "compiled"

OK = 0
SINGULAR = 1
MASS_DEPLETED = 2
STEP_FAILURE = 3

TWO_BODY = 0
CR3BP = 1

RK4_FIXED = 0
DP54_ADAPTIVE = 1

# C-level mirrors usable inside nogil code
cdef int C_OK = 0
cdef int C_SINGULAR = 1
cdef int C_MASS_DEPLETED = 2
cdef int C_STEP_FAILURE = 3
cdef int C_TWO_BODY = 0
cdef int C_RK4_FIXED = 0

cdef double MIN_STEP_FRACTION = 1e-14

# Dormand-Prince 5(4) tableau; DP_A stored row-major (6 rows of 6)
cdef double DP_C[7]
cdef double DP_A[36]
cdef double DP_B5[7]
cdef double DP_E[7]

# float literals throughout: cdivision also applies to these module-level lists
_c = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0]
_a = [
    1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0,
    3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0,
    44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0,
    19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0,
    9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0,
    35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0,
]
_b5 = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0]
_b4 = [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0,
       187.0 / 2100.0, 1.0 / 40.0]
for _i in range(7):
    DP_C[_i] = _c[_i]
    DP_B5[_i] = _b5[_i]
    DP_E[_i] = _b5[_i] - _b4[_i]
for _i in range(36):
    DP_A[_i] = _a[_i]


cdef inline int _rates(int kind, double mu, const double* y, const double* alpha,
                       double acc, double r_floor, double* out) noexcept nogil:
    cdef double rn, c0, c1, c2, d1, d2, y2z2, r1, r2
    out[0] = y[3]
    out[1] = y[4]
    out[2] = y[5]
    if kind == C_TWO_BODY:
        rn = sqrt(y[0] * y[0] + y[1] * y[1] + y[2] * y[2])
        if rn < r_floor:
            return 1
        c0 = -mu / (rn * rn * rn)
        out[3] = c0 * y[0]
        out[4] = c0 * y[1]
        out[5] = c0 * y[2]
    else:
        d1 = y[0] + mu
        d2 = y[0] + mu - 1.0
        y2z2 = y[1] * y[1] + y[2] * y[2]
        r1 = sqrt(d1 * d1 + y2z2)
        r2 = sqrt(d2 * d2 + y2z2)
        if r1 < r_floor or r2 < r_floor:
            return 1
        c1 = (1.0 - mu) / (r1 * r1 * r1)
        c2 = mu / (r2 * r2 * r2)
        out[3] = y[0] + 2.0 * y[4] - c1 * d1 - c2 * d2
        out[4] = y[1] - 2.0 * y[3] - (c1 + c2) * y[1]
        out[5] = -(c1 + c2) * y[2]
    if alpha != NULL:
        out[3] += acc * alpha[0]
        out[4] += acc * alpha[1]
        out[5] += acc * alpha[2]
    return 0


cdef inline double _acc(double t, double t0, double m0, double t_eff, double mdot) noexcept nogil:
    if t_eff == 0.0:
        return 0.0
    return t_eff / (m0 - mdot * (t - t0))


cdef int _stage_rk4(int kind, double mu, double* x, const double* alpha,
                    double m0, double t_eff, double mdot, double t0,
                    double t_start, double dt, int substeps, double r_floor) noexcept nogil:
    cdef double k1[6]
    cdef double k2[6]
    cdef double k3[6]
    cdef double k4[6]
    cdef double xs[6]
    cdef double h = dt / substeps
    cdef double t, a
    cdef int i, d, bad
    for i in range(substeps):
        t = t_start + i * h
        bad = 0
        a = _acc(t, t0, m0, t_eff, mdot)
        bad |= _rates(kind, mu, x, alpha, a, r_floor, k1)
        for d in range(6):
            xs[d] = x[d] + 0.5 * h * k1[d]
        a = _acc(t + 0.5 * h, t0, m0, t_eff, mdot)
        bad |= _rates(kind, mu, xs, alpha, a, r_floor, k2)
        for d in range(6):
            xs[d] = x[d] + 0.5 * h * k2[d]
        bad |= _rates(kind, mu, xs, alpha, a, r_floor, k3)
        for d in range(6):
            xs[d] = x[d] + h * k3[d]
        a = _acc(t + h, t0, m0, t_eff, mdot)
        bad |= _rates(kind, mu, xs, alpha, a, r_floor, k4)
        if bad:
            return C_SINGULAR
        for d in range(6):
            x[d] += (h / 6.0) * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d])
    return C_OK


cdef int _stage_dp54(int kind, double mu, double* x, const double* alpha,
                     double m0, double t_eff, double mdot, double t0,
                     double t_start, double dt, double rtol, double atol,
                     int max_steps, double r_floor) noexcept nogil:
    cdef double k[7][6]
    cdef double xs[6]
    cdef double y5[6]
    cdef double t = t_start
    cdef double t_end = t_start + dt
    cdef double h = dt
    cdef double hc, rem, a, acc_err, e, sc, q, fac, tn
    cdef int s, d, i, bad, clip
    cdef int steps = 0

    while True:
        rem = t_end - t
        if rem == 0.0:
            return C_OK
        steps += 1
        if steps > max_steps:
            return C_STEP_FAILURE
        clip = fabs(h) >= fabs(rem)
        hc = rem if clip else h

        bad = 0
        a = _acc(t, t0, m0, t_eff, mdot)
        bad |= _rates(kind, mu, x, alpha, a, r_floor, k[0])
        for s in range(1, 7):
            for d in range(6):
                e = 0.0
                for i in range(s):
                    e += DP_A[(s - 1) * 6 + i] * k[i][d]
                xs[d] = x[d] + hc * e
            tn = t + DP_C[s] * hc
            a = _acc(tn, t0, m0, t_eff, mdot)
            bad |= _rates(kind, mu, xs, alpha, a, r_floor, k[s])

        q = 0.0
        for d in range(6):
            e = 0.0
            sc = 0.0
            for i in range(7):
                e += DP_B5[i] * k[i][d]
            y5[d] = x[d] + hc * e
            e = 0.0
            for i in range(7):
                e += DP_E[i] * k[i][d]
            e *= hc
            sc = fabs(x[d])
            if fabs(y5[d]) > sc:
                sc = fabs(y5[d])
            sc = atol + rtol * sc
            q += (e / sc) * (e / sc)
        q = sqrt(q / 6.0)
        if not isfinite(q):
            bad = 1

        if not bad and q <= 1.0:
            for d in range(6):
                x[d] = y5[d]
            if clip:
                return C_OK
            t += hc

        if bad:
            fac = 0.5
        elif q == 0.0:
            fac = 5.0
        else:
            fac = 0.9 * pow(q, -0.2)
            if fac < 0.2:
                fac = 0.2
            elif fac > 5.0:
                fac = 5.0
        h = hc * fac
        if fabs(h) < MIN_STEP_FRACTION * fabs(dt):
            return C_SINGULAR if bad else C_STEP_FAILURE


cdef int _run_sample(int kind, double mu, const double* x0, const double* ctrl,
                     double m0, double t_eff, double mdot, double t0, double dt,
                     int n_stages, int method, double rtol, double atol,
                     int substeps, double r_floor, int max_steps,
                     double* out_states) noexcept nogil:
    cdef double x[6]
    cdef const double* alpha
    cdef int i, d, code
    cdef int status = C_OK

    for d in range(6):
        x[d] = x0[d]
        out_states[d] = x0[d]

    if mdot > 0.0 and m0 - mdot * (n_stages * dt) <= 0.0:
        status = C_MASS_DEPLETED

    for i in range(n_stages):
        if status == C_OK:
            alpha = &ctrl[i * 3] if ctrl != NULL else NULL
            if method == C_RK4_FIXED:
                code = _stage_rk4(kind, mu, x, alpha, m0, t_eff, mdot, t0,
                                  t0 + i * dt, dt, substeps, r_floor)
            else:
                code = _stage_dp54(kind, mu, x, alpha, m0, t_eff, mdot, t0,
                                   t0 + i * dt, dt, rtol, atol, max_steps,
                                   r_floor)
            if code != C_OK:
                status = code
        if status == C_OK:
            for d in range(6):
                out_states[(i + 1) * 6 + d] = x[d]
        else:
            for d in range(6):
                out_states[(i + 1) * 6 + d] = NAN
    return status


def propagate_batch(int model_kind, double mu, x0, controls, m0, double t_eff,
                    double mdot, double t0, double dt, int n_stages, int method,
                    double rtol, double atol, int substeps, double r_floor,
                    int n_threads=1, int max_steps=100000):
    """Compiled counterpart of pykernel.propagate_batch."""
    cdef double[:, ::1] x0v = np.ascontiguousarray(x0, dtype=np.float64)
    cdef double[::1] m0v = np.ascontiguousarray(m0, dtype=np.float64)
    cdef Py_ssize_t J = x0v.shape[0]
    if t_eff > 0.0 and dt < 0.0:
        raise ValueError("backward propagation is only supported ballistically")

    cdef int has_ctrl = controls is not None
    cdef double[:, :, ::1] ctrlv
    if has_ctrl:
        ctrlv = np.ascontiguousarray(controls, dtype=np.float64)
    else:
        ctrlv = np.zeros((1, 1, 3))

    states = np.empty((J, n_stages + 1, 6), dtype=np.float64)
    status = np.zeros(J, dtype=np.int64)
    cdef double[:, :, ::1] sv = states
    cdef long long[::1] stv = status
    cdef Py_ssize_t j
    cdef int nt = n_threads if n_threads > 0 else 1
    cdef const double* cp

    with nogil:
        for j in prange(J, num_threads=nt, schedule='static'):
            cp = &ctrlv[j, 0, 0] if has_ctrl else NULL
            stv[j] = _run_sample(model_kind, mu, &x0v[j, 0], cp, m0v[j], t_eff,
                                 mdot, t0, dt, n_stages, method, rtol, atol,
                                 substeps, r_floor, max_steps, &sv[j, 0, 0])
    return states, status

