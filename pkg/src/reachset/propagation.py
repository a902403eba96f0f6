"""Stage-wise numerical propagation of state, state-transition matrix, and
control-sensitivity matrix; construction of the ballistic reference.

Each stage integrates the flow map over a fixed duration with zero-order-hold
steering. The transition matrix F_x = Phi(t_{i+1}, t_i) and sensitivity
F_u = Omega(t_{i+1}, t_i) are propagated alongside the state in one augmented
60-dimensional system (6 state + 36 Phi + 18 Omega) so they share step
selection, with Phi(t_i, t_i) = I and Omega(t_i, t_i) = 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .dynamics import (
    Cr3bpModel,
    SpacecraftParams,
    StateVec,
    ThrustEnv,
    TwoBodyModel,
    _cr3bp_jacobian,
    _cr3bp_rates,
    _two_body_jacobian,
    _two_body_rates,
    check_mass_feasible,
)
from .errors import MassDepleted, SingularState, StepFailure
from ._kernels.pykernel import DP_A, DP_B5, DP_C, DP_E

_METHODS = ("rk4", "dp54")


@dataclass(frozen=True)
class IntegratorConfig:
    """Integration settings: adaptive DP54 by default, fixed RK4 optional."""

    method: str = "dp54"
    rel_tol: float = 1e-12
    abs_tol: float = 1e-12
    substeps: int = 10
    max_steps: int = 100000

    def __post_init__(self):
        if self.method not in _METHODS:
            raise ValueError(f"method must be one of {_METHODS}")
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")

    @property
    def method_code(self) -> int:
        return _kernels.RK4_FIXED if self.method == "rk4" else _kernels.DP54_ADAPTIVE


@dataclass(frozen=True)
class StageRecord:
    """Reference data for one stage: start state/mass plus the stage flow-map
    linearizations."""

    index: int
    t_start: float
    dt: float
    x_ref: StateVec
    m_ref: float
    f_x: np.ndarray
    f_u: np.ndarray


@dataclass(frozen=True)
class ReferenceTrajectory:
    """Ballistic reference with per-stage transition/sensitivity matrices."""

    model: object
    params: SpacecraftParams
    env: ThrustEnv
    stages: tuple
    x_terminal: StateVec
    cfg: IntegratorConfig
    _fx: np.ndarray = field(repr=False, default=None)
    _fu: np.ndarray = field(repr=False, default=None)

    @property
    def n_stages(self) -> int:
        return len(self.stages)

    @property
    def t0(self) -> float:
        return self.stages[0].t_start

    @property
    def dt(self) -> float:
        return self.stages[0].dt

    @property
    def horizon(self) -> float:
        return self.n_stages * self.dt

    def fx_stack(self) -> np.ndarray:
        return self._fx

    def fu_stack(self) -> np.ndarray:
        return self._fu

    def state_array(self) -> np.ndarray:
        """Stage-boundary reference states, shape (N+1, 6)."""
        out = np.empty((self.n_stages + 1, 6))
        for i, st in enumerate(self.stages):
            out[i] = st.x_ref.vector
        out[-1] = self.x_terminal.vector
        return out


def _model_kind(model) -> int:
    if isinstance(model, TwoBodyModel):
        return _kernels.TWO_BODY
    if isinstance(model, Cr3bpModel):
        return _kernels.CR3BP
    raise TypeError(f"unsupported model {type(model).__name__}")


_STATUS_ERRORS = {
    _kernels.SINGULAR: SingularState,
    _kernels.MASS_DEPLETED: MassDepleted,
    _kernels.STEP_FAILURE: StepFailure,
}


def raise_for_status(code: int):
    if code != _kernels.OK:
        raise _STATUS_ERRORS.get(code, StepFailure)(f"kernel status {code}")


def integrate_stage(model, x0: StateVec, alpha_const, env: ThrustEnv,
                    t0: float, dt: float, cfg: IntegratorConfig) -> StateVec:
    """Endpoint of the nonlinear flow over [t0, t0+dt] with constant steering.

    The mass profile depletes from the mission start time carried by `env`;
    t0 here is the stage clock (mass evaluated at t, not t - t0).
    """
    if dt == 0.0:
        return x0
    alpha = np.zeros(3) if np.isscalar(alpha_const) else np.asarray(alpha_const, float)
    controls = None
    if np.linalg.norm(alpha) > 0:
        controls = alpha.reshape(1, 1, 3)
    m_at_t0 = env.m0 - env.mdot * t0
    if env.mdot > 0 and m_at_t0 - env.mdot * dt <= 0:
        raise MassDepleted("stage ends past mass depletion")
    states, status = _kernels.propagate_batch(
        _model_kind(model), model.mu, x0.vector.reshape(1, 6), controls,
        np.array([m_at_t0]), env.t_eff if controls is not None else 0.0,
        env.mdot if controls is not None else 0.0,
        t0, dt, 1, cfg.method_code, cfg.rel_tol, cfg.abs_tol, cfg.substeps,
        model.r_floor, 1, cfg.max_steps)
    raise_for_status(int(status[0]))
    return StateVec.from_vector(states[0, 1], x0.frame)


def _variational_rhs(kind, mu, r_floor, env: ThrustEnv):
    """RHS of the augmented system [x, Phi(36), Omega(18)] on the ballistic
    reference; C(t) uses the depleting minimum-time mass."""

    def rhs(t, y):
        x = y[:6]
        if kind == _kernels.TWO_BODY:
            dx = _two_body_rates(mu, x, np.zeros(3), 0.0, r_floor)
            a = _two_body_jacobian(mu, x, r_floor)
        else:
            dx = _cr3bp_rates(mu, x, np.zeros(3), 0.0, r_floor)
            a = _cr3bp_jacobian(mu, x, r_floor)
        phi = y[6:42].reshape(6, 6)
        omega = y[42:60].reshape(6, 3)
        dphi = a @ phi
        domega = a @ omega
        m = env.m0 - env.mdot * t
        if m <= 0:
            raise MassDepleted(f"mass nonpositive at t = {t!r}")
        domega[3:6, :] += (env.t_eff / m) * np.eye(3)
        return np.concatenate([dx, dphi.ravel(), domega.ravel()])

    return rhs


def _dp54_scalar(rhs, t0, y0, dt, rtol, atol, max_steps):
    """Adaptive Dormand-Prince 5(4) for a single trajectory of any dimension."""
    t = t0
    t_end = t0 + dt
    y = np.asarray(y0, float).copy()
    h = dt
    k = np.empty((7, y.size))
    for _ in range(max_steps):
        rem = t_end - t
        if rem == 0.0:
            return y
        clip = abs(h) >= abs(rem)
        hc = rem if clip else h
        k[0] = rhs(t, y)
        for s in range(1, 7):
            ys = y + hc * (DP_A[s - 1] @ k[:s])
            k[s] = rhs(t + DP_C[s] * hc, ys)
        y5 = y + hc * (DP_B5 @ k)
        err = hc * (DP_E @ k)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y5))
        q = float(np.sqrt(np.mean((err / scale) ** 2)))
        if np.isfinite(q) and q <= 1.0:
            y = y5
            if clip:
                return y
            t += hc
            fac = 5.0 if q == 0.0 else min(5.0, max(0.2, 0.9 * q**-0.2))
        else:
            fac = 0.5 if not np.isfinite(q) else max(0.2, 0.9 * q**-0.2)
        h = hc * min(fac, 5.0)
        if abs(h) < 1e-14 * abs(dt):
            raise StepFailure("adaptive step underflow")
    raise StepFailure("step budget exhausted")


def _rk4_scalar(rhs, t0, y0, dt, substeps):
    y = np.asarray(y0, float).copy()
    h = dt / substeps
    for i in range(substeps):
        t = t0 + i * h
        k1 = rhs(t, y)
        k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = rhs(t + h, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


def integrate_stage_with_variations(model, x0: StateVec, env: ThrustEnv,
                                    t0: float, dt: float, cfg: IntegratorConfig):
    """Ballistic stage flow with Phi and Omega; returns (x1, F_x, F_u)."""
    if dt == 0.0:
        return x0, np.eye(6), np.zeros((6, 3))
    y0 = np.concatenate([x0.vector, np.eye(6).ravel(), np.zeros(18)])
    rhs = _variational_rhs(_model_kind(model), model.mu, model.r_floor, env)
    if cfg.method == "rk4":
        y = _rk4_scalar(rhs, t0, y0, dt, cfg.substeps)
    else:
        y = _dp54_scalar(rhs, t0, y0, dt, cfg.rel_tol, cfg.abs_tol, cfg.max_steps)
    x1 = StateVec.from_vector(y[:6], x0.frame)
    return x1, y[6:42].reshape(6, 6), y[42:60].reshape(6, 3)


def build_reference(model, x0: StateVec, params: SpacecraftParams,
                    n_stages: int, dt: float,
                    cfg: IntegratorConfig | None = None) -> ReferenceTrajectory:
    """Ballistic reference over N contiguous stages from t = 0.

    The reference state is mass-independent (zero thrust); the depleting
    minimum-time mass still enters the Omega equation through C(t).
    """
    if n_stages < 1:
        raise ValueError("n_stages must be >= 1")
    if dt <= 0:
        raise ValueError("dt must be positive")
    cfg = cfg or IntegratorConfig()
    env = ThrustEnv.for_model(model, params)
    check_mass_feasible(env, n_stages * dt)

    stages = []
    fx = np.empty((n_stages, 6, 6))
    fu = np.empty((n_stages, 6, 3))
    x = x0
    for i in range(n_stages):
        t_i = i * dt
        m_i = env.mass(t_i)
        x_next, f_x, f_u = integrate_stage_with_variations(model, x, env, t_i, dt, cfg)
        stages.append(StageRecord(i, t_i, dt, x, m_i, f_x, f_u))
        fx[i] = f_x
        fu[i] = f_u
        x = x_next
    return ReferenceTrajectory(model=model, params=params, env=env,
                               stages=tuple(stages), x_terminal=x, cfg=cfg,
                               _fx=fx, _fu=fu)
