"""Pseudo-zero-stage initial conditions.

Converts the reference initial state into a shifted one per sample:
ellipsoidal position/velocity uncertainty shifts solved in closed form from
the stage-0 costates, plus a bounded initial impulse whose active/inactive
branch is selected by the sign of the constraint multiplier. The initial mass
is updated by Tsiolkovsky depletion for the applied impulse.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .dynamics import ThrustEnv

log = logging.getLogger(__name__)

COSTATE_FLOOR = 1e-30


@dataclass(frozen=True)
class EllipsoidSpec:
    """Position/velocity uncertainty ellipsoids: 0.5 dx^T E dx = 0.5 ref^2."""

    e_r: np.ndarray
    e_v: np.ndarray
    r_ref: float
    v_ref: float

    def __post_init__(self):
        for name in ("e_r", "e_v"):
            m = np.asarray(getattr(self, name), float).reshape(3, 3)
            if not np.allclose(m, m.T, atol=1e-12):
                raise ValueError(f"{name} must be symmetric")
            if np.linalg.eigvalsh(m).min() <= 0:
                raise ValueError(f"{name} must be positive definite")
            object.__setattr__(self, name, m)
        if self.r_ref < 0 or self.v_ref < 0:
            raise ValueError("r_ref and v_ref must be nonnegative")


@dataclass(frozen=True)
class ImpulseSpec:
    """Initial impulse bounded by dv_max (state velocity units)."""

    dv_max: float

    def __post_init__(self):
        if self.dv_max < 0:
            raise ValueError("dv_max must be nonnegative")


@dataclass(frozen=True)
class BoundarySpecs:
    ellipsoid: EllipsoidSpec | None = None
    impulse: ImpulseSpec | None = None

    @property
    def active(self) -> bool:
        return self.ellipsoid is not None or self.impulse is not None


@dataclass(frozen=True)
class BoundaryResult:
    """Shifts applied to one sample's initial conditions."""

    delta_r: np.ndarray
    delta_v1: np.ndarray
    delta_v2: np.ndarray
    dv: float
    m_star: float


def _ellipsoid_shift(lam: np.ndarray, e_mat: np.ndarray, ref: float) -> np.ndarray:
    n = np.linalg.norm(lam)
    if n < COSTATE_FLOOR:
        log.debug("degenerate costate block; zero ellipsoid shift applied")
        return np.zeros(3)
    w = np.linalg.solve(e_mat, lam)
    quad = float(lam @ w)
    return -ref * w / np.sqrt(quad)


def ellipsoid_position_shift(lambda_r, spec: EllipsoidSpec) -> np.ndarray:
    """delta_r = -r_ref E_r^-1 lam_r / sqrt(lam_r^T E_r^-1 lam_r).

    Satisfies the equality constraint delta_r^T E_r delta_r = r_ref^2 exactly
    and is invariant under positive scaling of lam_r. A degenerate costate
    yields a zero shift (logged) rather than an error.
    """
    return _ellipsoid_shift(np.asarray(lambda_r, float).reshape(3), spec.e_r, spec.r_ref)


def ellipsoid_velocity_shift(lambda_v, spec: EllipsoidSpec) -> np.ndarray:
    """Velocity mirror of ellipsoid_position_shift with (E_v, v_ref)."""
    return _ellipsoid_shift(np.asarray(lambda_v, float).reshape(3), spec.e_v, spec.v_ref)


def impulse_shift(lambda_v, spec: ImpulseSpec, env: ThrustEnv):
    """Initial-impulse shift (delta_v2, dv) from the stage-0 velocity costate.

    Branch test: nu3 = |lam_v| m0 c e^(-dv_max/c) - (m0 e^(-dv_max/c))^2.
    nu3 > 0 binds the constraint (dv = dv_max); otherwise the interior
    solution dv = -c ln(|lam_v| c / m0), clamped to [0, dv_max]. The shift is
    always antiparallel to lam_v. Units follow env (km/s, kg in two-body
    mode; nondimensional in CR3BP mode).
    """
    lam = np.asarray(lambda_v, float).reshape(3)
    n = np.linalg.norm(lam)
    if n < COSTATE_FLOOR:
        return np.zeros(3), 0.0
    c, m0 = env.c, env.m0
    decay = m0 * np.exp(-spec.dv_max / c)
    nu3 = n * c * decay - decay * decay
    if nu3 > 0.0:
        dv = spec.dv_max
    else:
        dv = float(np.clip(-c * np.log(n * c / m0), 0.0, spec.dv_max))
    return -dv * lam / n, dv


def apply_initial_conditions(x_ref0, lambda_0, specs: BoundarySpecs, env: ThrustEnv):
    """Shifted initial state and mass for one sample.

    r* = r_ref + delta_r; v* = v_ref + delta_v1 + delta_v2;
    m* = m0 e^(-dv/c). Inactive spec blocks contribute zero shifts.
    """
    from .dynamics import StateVec

    lam = lambda_0.vector if hasattr(lambda_0, "vector") else np.asarray(lambda_0, float)
    lam_r, lam_v = lam[:3], lam[3:]
    delta_r = np.zeros(3)
    delta_v1 = np.zeros(3)
    delta_v2 = np.zeros(3)
    dv = 0.0
    if specs.ellipsoid is not None:
        delta_r = ellipsoid_position_shift(lam_r, specs.ellipsoid)
        delta_v1 = ellipsoid_velocity_shift(lam_v, specs.ellipsoid)
    if specs.impulse is not None:
        delta_v2, dv = impulse_shift(lam_v, specs.impulse, env)
    m_star = env.m0 * np.exp(-dv / env.c)
    shifted = StateVec(x_ref0.r + delta_r, x_ref0.v + delta_v1 + delta_v2, x_ref0.frame)
    return shifted, BoundaryResult(delta_r, delta_v1, delta_v2, dv, m_star)


@dataclass
class BoundaryBatch:
    """Per-sample boundary outputs in array form."""

    delta_r: np.ndarray
    delta_v1: np.ndarray
    delta_v2: np.ndarray
    dv: np.ndarray
    m_star: np.ndarray

    @classmethod
    def empty(cls, j: int) -> "BoundaryBatch":
        return cls(np.zeros((j, 3)), np.zeros((j, 3)), np.zeros((j, 3)),
                   np.zeros(j), np.zeros(j))

    def fill(self, lo: int, hi: int, chunk: "BoundaryBatch"):
        self.delta_r[lo:hi] = chunk.delta_r
        self.delta_v1[lo:hi] = chunk.delta_v1
        self.delta_v2[lo:hi] = chunk.delta_v2
        self.dv[lo:hi] = chunk.dv
        self.m_star[lo:hi] = chunk.m_star

    def result(self, j: int) -> BoundaryResult:
        return BoundaryResult(self.delta_r[j], self.delta_v1[j], self.delta_v2[j],
                              float(self.dv[j]), float(self.m_star[j]))


def _ellipsoid_shift_batch(lam: np.ndarray, e_mat: np.ndarray, ref: float):
    n = np.linalg.norm(lam, axis=1)
    deg = n < COSTATE_FLOOR
    w = np.linalg.solve(e_mat, np.where(deg[:, None], 1.0, lam).T).T
    quad = np.einsum("ij,ij->i", np.where(deg[:, None], 1.0, lam), w)
    shift = -ref * w / np.sqrt(quad)[:, None]
    shift[deg] = 0.0
    return shift, int(deg.sum())


def apply_batch(lam0: np.ndarray, specs: BoundarySpecs, env: ThrustEnv):
    """Vectorized apply_initial_conditions over a chunk of stage-0 costates.

    Returns (state shifts (J,6), m_star (J,), BoundaryBatch, clamp count).
    """
    j = lam0.shape[0]
    lam_r, lam_v = lam0[:, :3], lam0[:, 3:]
    batch = BoundaryBatch.empty(j)
    clamped = 0
    if specs.ellipsoid is not None:
        batch.delta_r, n_dr = _ellipsoid_shift_batch(lam_r, specs.ellipsoid.e_r,
                                                     specs.ellipsoid.r_ref)
        batch.delta_v1, n_dv = _ellipsoid_shift_batch(lam_v, specs.ellipsoid.e_v,
                                                      specs.ellipsoid.v_ref)
        if n_dr or n_dv:
            log.debug("degenerate costates in ellipsoid shifts: %d pos, %d vel", n_dr, n_dv)
    if specs.impulse is not None:
        c, m0 = env.c, env.m0
        dv_max = specs.impulse.dv_max
        n = np.linalg.norm(lam_v, axis=1)
        nondeg = n >= COSTATE_FLOOR
        decay = m0 * np.exp(-dv_max / c)
        nu3 = n * c * decay - decay * decay
        with np.errstate(divide="ignore", invalid="ignore"):
            interior = -c * np.log(n * c / m0)
        raw = np.where(nu3 > 0.0, dv_max, interior)
        dv = np.clip(raw, 0.0, dv_max)
        clamped = int((nondeg & (np.abs(dv - raw) > 0)).sum())
        dv = np.where(nondeg, dv, 0.0)
        batch.dv = dv
        batch.delta_v2 = -dv[:, None] * lam_v / np.where(nondeg, n, 1.0)[:, None]
    batch.m_star = env.m0 * np.exp(-batch.dv / env.c)
    shifts = np.concatenate([batch.delta_r, batch.delta_v1 + batch.delta_v2], axis=1)
    return shifts, batch.m_star, batch, clamped
