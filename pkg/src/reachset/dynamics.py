"""Dynamical models: heliocentric two-body and Earth-Moon CR3BP.

Provides the rate functions, Jacobians, control-influence matrices, the
minimum-time mass law, and unit normalization for the CR3BP. Two-body states
are in km and km/s in an inertial heliocentric frame; CR3BP states are
nondimensional in the rotating synodic frame (lengths over l*, velocities
over l*/t*).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import constants
from .errors import (
    FrameMismatch,
    MassDepleted,
    NonpositiveMass,
    NonUnitControl,
    SingularState,
)


class Frame(str, Enum):
    HELIO_INERTIAL = "helio_inertial"
    SYNODIC_ROTATING = "synodic_rotating"


@dataclass(frozen=True)
class StateVec:
    """6-D position/velocity state with a frame tag."""

    r: np.ndarray
    v: np.ndarray
    frame: Frame

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float).reshape(3)
        v = np.asarray(self.v, dtype=float).reshape(3)
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(v))):
            raise ValueError("state components must be finite")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "v", v)

    @classmethod
    def from_vector(cls, vec, frame: Frame) -> "StateVec":
        vec = np.asarray(vec, dtype=float).reshape(6)
        return cls(vec[:3], vec[3:], frame)

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.r, self.v])


@dataclass(frozen=True)
class SpacecraftParams:
    """Propulsion and mass parameters in SI units (N, s, kg)."""

    t_max: float
    isp: float
    m0: float
    g0: float = constants.G0_M_S2
    c: float = field(init=False)

    def __post_init__(self):
        if self.t_max <= 0 or self.isp <= 0 or self.m0 <= 0:
            raise ValueError("t_max, isp, m0 must all be positive")
        object.__setattr__(self, "c", self.isp * self.g0)


@dataclass(frozen=True)
class TwoBodyModel:
    """Point-mass central body, mu in km^3/s^2."""

    mu: float = constants.MU_SUN_KM3_S2

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError("mu must be positive")

    frame = Frame.HELIO_INERTIAL
    r_floor = constants.R_FLOOR_TWO_BODY_KM


@dataclass(frozen=True)
class Cr3bpModel:
    """Circular restricted three-body problem, synodic rotating frame."""

    mu: float = constants.EARTH_MOON_MASS_RATIO
    l_star: float = constants.EARTH_MOON_L_STAR_KM
    t_star: float = constants.EARTH_MOON_T_STAR_S
    m_star: float = constants.EARTH_MOON_M_STAR_KG

    def __post_init__(self):
        if not 0 < self.mu < 0.5:
            raise ValueError("mass ratio must lie in (0, 0.5)")
        if min(self.l_star, self.t_star, self.m_star) <= 0:
            raise ValueError("characteristic quantities must be positive")

    frame = Frame.SYNODIC_ROTATING
    r_floor = constants.R_FLOOR_CR3BP


@dataclass(frozen=True)
class NormalizedSpacecraft:
    """Spacecraft parameters in CR3BP units: thrust over m0*l*/t*^2, exhaust
    velocity over l*/t*, mass over m0 (so m0 is exactly 1)."""

    t_max: float
    c: float
    m0: float = 1.0

    def __post_init__(self):
        if self.t_max <= 0 or self.c <= 0 or self.m0 <= 0:
            raise ValueError("normalized parameters must be positive")


@dataclass(frozen=True)
class MassProfile:
    """Linear minimum-time mass depletion m(t) = m0 - mdot*(t - t0)."""

    m0: float
    mdot: float

    def __post_init__(self):
        if self.m0 <= 0:
            raise NonpositiveMass("initial mass must be positive")
        if self.mdot < 0:
            raise ValueError("mdot must be nonnegative")


def mass_profile(params: SpacecraftParams) -> MassProfile:
    """Mass profile in kg and kg/s from SI spacecraft parameters."""
    return MassProfile(m0=params.m0, mdot=params.t_max / params.c)


def mass_at(profile: MassProfile, t: float, t0: float) -> float:
    """Mass at time t under linear depletion; raises once depleted."""
    if t < t0:
        raise ValueError("mass_at requires t >= t0")
    m = profile.m0 - profile.mdot * (t - t0)
    if m <= 0.0:
        raise MassDepleted(f"mass nonpositive at t - t0 = {t - t0!r}")
    return m


def _check_frame(model, x: StateVec):
    if x.frame != model.frame:
        raise FrameMismatch(
            f"state frame {x.frame.value} incompatible with {type(model).__name__}"
        )


def _check_control(alpha) -> np.ndarray:
    alpha = np.zeros(3) if np.isscalar(alpha) and alpha == 0 else np.asarray(alpha, float)
    n = np.linalg.norm(alpha)
    if abs(n) > 1e-12 and abs(n - 1.0) > 1e-12:
        raise NonUnitControl(f"control norm {n!r} not in {{0, 1}}")
    return alpha


def _two_body_rates(mu, y, alpha, acc, r_floor):
    r = y[:3]
    rn = np.linalg.norm(r)
    if rn < r_floor:
        raise SingularState(f"radius {rn!r} below floor {r_floor!r}")
    a = -mu / rn**3 * r + acc * alpha
    return np.concatenate([y[3:], a])


def _cr3bp_rates(mu, y, alpha, acc, r_floor):
    x, yy, z, vx, vy, vz = y
    r1 = np.sqrt((x + mu) ** 2 + yy**2 + z**2)
    r2 = np.sqrt((x + mu - 1.0) ** 2 + yy**2 + z**2)
    if min(r1, r2) < r_floor:
        raise SingularState(f"primary distance below floor {r_floor!r}")
    ax = (
        x
        + 2.0 * vy
        - (1.0 - mu) * (x + mu) / r1**3
        - mu * (x + mu - 1.0) / r2**3
    )
    ay = yy - 2.0 * vx - (1.0 - mu) * yy / r1**3 - mu * yy / r2**3
    az = -(1.0 - mu) * z / r1**3 - mu * z / r2**3
    return np.array(
        [vx, vy, vz, ax + acc * alpha[0], ay + acc * alpha[1], az + acc * alpha[2]]
    )


def rates(model, x: StateVec, alpha, m: float, t_max: float = 0.0) -> np.ndarray:
    """State rates [dr; dv] under gravity plus thrust (t_max/m)*alpha.

    t_max is in newtons for the two-body model (converted to km/s^2) and
    nondimensional for the CR3BP. alpha must be a zero or unit 3-vector.
    """
    _check_frame(model, x)
    alpha = _check_control(alpha)
    if m <= 0:
        raise NonpositiveMass(f"mass {m!r} must be positive")
    if isinstance(model, TwoBodyModel):
        acc = t_max / m / 1000.0  # N/kg -> km/s^2
        return _two_body_rates(model.mu, x.vector, alpha, acc, model.r_floor)
    if isinstance(model, Cr3bpModel):
        return _cr3bp_rates(model.mu, x.vector, alpha, t_max / m, model.r_floor)
    raise TypeError(f"unsupported model {type(model).__name__}")


def _two_body_jacobian(mu, y, r_floor):
    r = y[:3]
    rn = np.linalg.norm(r)
    if rn < r_floor:
        raise SingularState(f"radius {rn!r} below floor {r_floor!r}")
    jac = np.zeros((6, 6))
    jac[0:3, 3:6] = np.eye(3)
    jac[3:6, 0:3] = 3.0 * mu * np.outer(r, r) / rn**5 - mu / rn**3 * np.eye(3)
    return jac


def _cr3bp_jacobian(mu, y, r_floor):
    x, yy, z = y[0], y[1], y[2]
    r1sq = (x + mu) ** 2 + yy**2 + z**2
    r2sq = (x + mu - 1.0) ** 2 + yy**2 + z**2
    if min(r1sq, r2sq) < r_floor**2:
        raise SingularState(f"primary distance below floor {r_floor!r}")
    r13, r15 = r1sq**1.5, r1sq**2.5
    r23, r25 = r2sq**1.5, r2sq**2.5
    om = 1.0 - mu
    d1, d2 = x + mu, x + mu - 1.0
    uxx = 1.0 - om / r13 - mu / r23 + 3.0 * om * d1**2 / r15 + 3.0 * mu * d2**2 / r25
    uyy = 1.0 - om / r13 - mu / r23 + 3.0 * om * yy**2 / r15 + 3.0 * mu * yy**2 / r25
    uzz = -om / r13 - mu / r23 + 3.0 * om * z**2 / r15 + 3.0 * mu * z**2 / r25
    uxy = 3.0 * yy * (om * d1 / r15 + mu * d2 / r25)
    uxz = 3.0 * z * (om * d1 / r15 + mu * d2 / r25)
    uyz = 3.0 * yy * z * (om / r15 + mu / r25)
    jac = np.zeros((6, 6))
    jac[0:3, 3:6] = np.eye(3)
    jac[3:6, 0:3] = [[uxx, uxy, uxz], [uxy, uyy, uyz], [uxz, uyz, uzz]]
    jac[3, 4] = 2.0
    jac[4, 3] = -2.0
    return jac


def state_jacobian(model, x: StateVec, m: float = 1.0) -> np.ndarray:
    """6x6 Jacobian of the rates with respect to the state.

    Thrust does not depend on the state, so the result is control- and
    mass-independent; m is accepted for signature symmetry with rates.
    """
    _check_frame(model, x)
    if isinstance(model, TwoBodyModel):
        return _two_body_jacobian(model.mu, x.vector, model.r_floor)
    if isinstance(model, Cr3bpModel):
        return _cr3bp_jacobian(model.mu, x.vector, model.r_floor)
    raise TypeError(f"unsupported model {type(model).__name__}")


def control_influence(params, m: float) -> np.ndarray:
    """6x3 sensitivity of the rates to the steering vector.

    Top block zero, bottom block (T_max/m)*I. SI params give km/s^2 per unit
    steering; normalized params pass through in CR3BP units.
    """
    if m <= 0:
        raise NonpositiveMass(f"mass {m!r} must be positive")
    if isinstance(params, SpacecraftParams):
        scale = params.t_max / m / 1000.0
    elif isinstance(params, NormalizedSpacecraft):
        scale = params.t_max / m
    else:
        raise TypeError(f"unsupported params {type(params).__name__}")
    out = np.zeros((6, 3))
    out[3:6, :] = scale * np.eye(3)
    return out


def nondimensionalize(model: Cr3bpModel, x: StateVec, params: SpacecraftParams):
    """Convert a dimensional synodic state (km, km/s) and SI spacecraft
    parameters to CR3BP units. Round-trips with dimensionalize."""
    v_star = model.l_star / model.t_star  # km/s
    x_nd = StateVec(x.r / model.l_star, x.v / v_star, Frame.SYNODIC_ROTATING)
    accel_star = model.l_star * 1000.0 / model.t_star**2  # m/s^2
    t_nd = params.t_max / (params.m0 * accel_star)
    c_nd = params.c / (v_star * 1000.0)
    return x_nd, NormalizedSpacecraft(t_max=t_nd, c=c_nd, m0=1.0)


def dimensionalize(model: Cr3bpModel, x_nd: StateVec) -> StateVec:
    """Inverse of the state part of nondimensionalize."""
    v_star = model.l_star / model.t_star
    return StateVec(x_nd.r * model.l_star, x_nd.v * v_star, Frame.SYNODIC_ROTATING)


def normalized_spacecraft(model: Cr3bpModel, params: SpacecraftParams) -> NormalizedSpacecraft:
    """Normalized propulsion parameters alone (state-independent part of
    nondimensionalize)."""
    dummy = StateVec(np.zeros(3) + model.l_star, np.zeros(3), Frame.SYNODIC_ROTATING)
    return nondimensionalize(model, dummy, params)[1]


def jacobi_constant(model: Cr3bpModel, x: StateVec) -> float:
    """CR3BP first integral C = x^2 + y^2 + 2(1-mu)/r1 + 2mu/r2 - v^2."""
    _check_frame(model, x)
    mu = model.mu
    xx, yy, z = x.r
    r1 = np.sqrt((xx + mu) ** 2 + yy**2 + z**2)
    r2 = np.sqrt((xx + mu - 1.0) ** 2 + yy**2 + z**2)
    if min(r1, r2) < model.r_floor:
        raise SingularState("primary distance below floor")
    return float(
        xx**2 + yy**2 + 2.0 * (1.0 - mu) / r1 + 2.0 * mu / r2 - np.dot(x.v, x.v)
    )


@dataclass(frozen=True)
class ThrustEnv:
    """Thrust and mass bookkeeping in model-consistent units.

    t_eff/m(t) is the thrust acceleration in state units; mdot = t_eff/c is
    the mass rate in the same mass/time units.
    """

    t_eff: float
    c: float
    m0: float

    @property
    def mdot(self) -> float:
        return self.t_eff / self.c if self.t_eff > 0 else 0.0

    @property
    def profile(self) -> MassProfile:
        return MassProfile(self.m0, self.mdot)

    def mass(self, elapsed: float) -> float:
        return self.m0 - self.mdot * elapsed

    @classmethod
    def for_model(cls, model, params: SpacecraftParams) -> "ThrustEnv":
        if isinstance(model, TwoBodyModel):
            # thrust in kg*km/s^2 so t_eff/m is km/s^2, c in km/s
            return cls(t_eff=params.t_max / 1000.0, c=params.c / 1000.0, m0=params.m0)
        if isinstance(model, Cr3bpModel):
            norm = normalized_spacecraft(model, params)
            return cls(t_eff=norm.t_max, c=norm.c, m0=norm.m0)
        raise TypeError(f"unsupported model {type(model).__name__}")

    @classmethod
    def ballistic(cls, m0: float = 1.0) -> "ThrustEnv":
        return cls(t_eff=0.0, c=1.0, m0=m0)


def check_mass_feasible(env: ThrustEnv, horizon: float):
    """Raise MassDepleted if the linear profile hits zero inside [0, horizon]."""
    if env.mdot > 0 and env.m0 - env.mdot * horizon <= 0.0:
        raise MassDepleted(
            f"mass profile depletes before horizon {horizon!r} "
            f"(m0={env.m0!r}, mdot={env.mdot!r})"
        )
