"""Pure-NumPy propagation kernel.

Batch-propagates J trajectories over N fixed-duration stages with
piecewise-constant steering and a linear mass profile. Adaptive stepping is
controlled per sample (masked vectorization), so every sample's arithmetic is
independent of the rest of the batch: results are identical whether a sample
is integrated alone, in a chunk, or in the full batch.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"

# status codes shared with the compiled kernel
OK = 0
SINGULAR = 1
MASS_DEPLETED = 2
STEP_FAILURE = 3

TWO_BODY = 0
CR3BP = 1

RK4_FIXED = 0
DP54_ADAPTIVE = 1

# Dormand-Prince 5(4) tableau (ode45 coefficients)
DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
DP_A = [
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
DP_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)
DP_E = DP_B5 - DP_B4

_MIN_STEP_FRACTION = 1e-14


def _rates(kind, mu, x, alpha, acc, r_floor, out, bad):
    """Batched state rates; flags samples below the distance floor in `bad`."""
    out[:, 0:3] = x[:, 3:6]
    if kind == TWO_BODY:
        r = x[:, 0:3]
        rn = np.sqrt(np.einsum("ij,ij->i", r, r))
        bad |= rn < r_floor
        out[:, 3:6] = (-mu / (rn * rn * rn))[:, None] * r
    else:
        mu1 = 1.0 - mu
        d1 = x[:, 0] + mu
        d2 = x[:, 0] + mu - 1.0
        y2z2 = x[:, 1] ** 2 + x[:, 2] ** 2
        r1 = np.sqrt(d1 * d1 + y2z2)
        r2 = np.sqrt(d2 * d2 + y2z2)
        bad |= (r1 < r_floor) | (r2 < r_floor)
        c1 = mu1 / (r1 * r1 * r1)
        c2 = mu / (r2 * r2 * r2)
        out[:, 3] = x[:, 0] + 2.0 * x[:, 4] - c1 * d1 - c2 * d2
        out[:, 4] = x[:, 1] - 2.0 * x[:, 3] - (c1 + c2) * x[:, 1]
        out[:, 5] = -(c1 + c2) * x[:, 2]
    if alpha is not None:
        out[:, 3:6] += acc[:, None] * alpha
    return out


def _acc_at(t_nodes, t0, m0, t_eff, mdot):
    """Thrust acceleration at the given node times (scalar or per-sample)."""
    if t_eff == 0.0:
        return None
    return t_eff / (m0 - mdot * (t_nodes - t0))


def _stage_rk4(kind, mu, x, alpha, m0, t_eff, mdot, t0, t_start, dt, substeps,
               r_floor, active):
    """Classic RK4 with fixed substeps over one stage; returns singular mask."""
    J = x.shape[0]
    bad = np.zeros(J, bool)
    h = dt / substeps
    k = np.empty((4, J, 6))
    with np.errstate(all="ignore"):
        for i in range(substeps):
            t = t_start + i * h
            for s, (coef, toff) in enumerate(((0.0, 0.0), (0.5, 0.5), (0.5, 0.5), (1.0, 1.0))):
                xs = x if s == 0 else x + (coef * h) * k[s - 1]
                acc = _acc_at(t + toff * h, t0, m0, t_eff, mdot)
                _rates(kind, mu, xs, alpha, acc, r_floor, k[s], bad)
            step = (h / 6.0) * (k[0] + 2.0 * k[1] + 2.0 * k[2] + k[3])
            x = np.where(active[:, None], x + step, x)
    return x, bad & active


def _stage_dp54(kind, mu, x, alpha, m0, t_eff, mdot, t0, t_start, dt, rtol, atol,
                max_steps, r_floor, active_in):
    """Dormand-Prince 5(4) over one stage with per-sample step control.

    Returns stage-end states plus singular / step-failure masks.
    """
    J = x.shape[0]
    t_end = t_start + dt
    t = np.full(J, t_start)
    h = np.full(J, dt)
    done = np.zeros(J, bool)
    sing = np.zeros(J, bool)
    stepfail = np.zeros(J, bool)
    k = np.empty((7, J, 6))

    with np.errstate(all="ignore"):
        for _ in range(max_steps):
            active = active_in & ~done & ~sing & ~stepfail
            if not active.any():
                break
            rem = t_end - t
            clip = np.abs(h) >= np.abs(rem)
            hc = np.where(clip, rem, h)

            bad = np.zeros(J, bool)
            acc = _acc_at(t, t0, m0, t_eff, mdot)
            _rates(kind, mu, x, alpha, acc, r_floor, k[0], bad)
            for s in range(1, 7):
                xs = x + hc[:, None] * np.einsum("s,sjk->jk", DP_A[s - 1], k[:s])
                tn = t + DP_C[s] * hc
                acc = _acc_at(tn, t0, m0, t_eff, mdot)
                _rates(kind, mu, xs, alpha, acc, r_floor, k[s], bad)

            y5 = x + hc[:, None] * np.einsum("s,sjk->jk", DP_B5, k)
            err = hc[:, None] * np.einsum("s,sjk->jk", DP_E, k)
            scale = atol + rtol * np.maximum(np.abs(x), np.abs(y5))
            q = np.sqrt(np.mean((err / scale) ** 2, axis=1))
            bad |= ~np.isfinite(q)

            ok = active & ~bad & (q <= 1.0)
            x = np.where(ok[:, None], y5, x)
            t = np.where(ok, np.where(clip, t_end, t + hc), t)
            done |= ok & clip

            fac = np.empty(J)
            nz = q > 0.0
            fac[nz] = 0.9 * q[nz] ** -0.2
            fac[~nz] = 5.0
            np.clip(fac, 0.2, 5.0, out=fac)
            fac = np.where(bad, 0.5, fac)
            h = np.where(active & ~done, hc * fac, h)

            under = active & ~done & (np.abs(h) < _MIN_STEP_FRACTION * abs(dt))
            sing |= under & bad
            stepfail |= under & ~bad

    stepfail |= active_in & ~done & ~sing & ~stepfail
    return x, sing, stepfail


def propagate_batch(model_kind, mu, x0, controls, m0, t_eff, mdot, t0, dt,
                    n_stages, method, rtol, atol, substeps, r_floor,
                    n_threads=1, max_steps=100000):
    """Propagate a batch of trajectories over contiguous stages.

    Parameters mirror the compiled kernel: x0 (J,6), controls (J,N,3) or None
    for ballistic arcs, m0 (J,) initial masses, t_eff/mdot the thrust and mass
    rate in model-consistent units, dt the signed stage duration. Returns
    (states (J,N+1,6), status (J,)); failed samples have NaN state rows from
    the failing stage onward. n_threads is accepted for interface parity; the
    vectorized kernel ignores it.
    """
    x0 = np.ascontiguousarray(x0, dtype=float)
    J = x0.shape[0]
    m0 = np.ascontiguousarray(m0, dtype=float)
    if t_eff > 0.0 and dt < 0.0:
        raise ValueError("backward propagation is only supported ballistically")

    states = np.full((J, n_stages + 1, 6), np.nan)
    states[:, 0, :] = x0
    status = np.zeros(J, dtype=np.int64)

    if mdot > 0.0:
        status[m0 - mdot * (n_stages * dt) <= 0.0] = MASS_DEPLETED

    x = x0.copy()
    for i in range(n_stages):
        active = status == OK
        if not active.any():
            break
        alpha = None
        if controls is not None:
            alpha = np.ascontiguousarray(controls[:, i, :], dtype=float)
        t_start = t0 + i * dt
        if method == RK4_FIXED:
            x, bad = _stage_rk4(model_kind, mu, x, alpha, m0, t_eff, mdot, t0,
                                t_start, dt, substeps, r_floor, active)
            status[bad] = SINGULAR
        else:
            x, sing, stepfail = _stage_dp54(model_kind, mu, x, alpha, m0, t_eff,
                                            mdot, t0, t_start, dt, rtol, atol,
                                            max_steps, r_floor, active)
            status[sing & active] = SINGULAR
            status[stepfail & active] = STEP_FAILURE
        okrow = status == OK
        states[okrow, i + 1, :] = x[okrow]
    return states, status
