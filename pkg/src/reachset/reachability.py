"""Reachable-set determination.

Three passes: (1) ballistic reference with stage transition/sensitivity
matrices, (2) terminal costates sampled uniformly on the unit 5-sphere and
mapped backward through the transposed transition matrices, recovering the
primer-vector steering alpha_i = -F_u^T lam_{i+1} / ||.|| for every stage,
(3) one nonlinear forward integration per sample under full thrust. Samples
are independent, so the sampling and reconstruction passes chunk and thread
freely without changing results.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .boundary import BoundaryBatch, BoundaryResult, BoundarySpecs, apply_batch
from .dynamics import SpacecraftParams, StateVec, check_mass_feasible
from .errors import DegeneratePrimer, EmptySet, ReachsetError
from .propagation import IntegratorConfig, ReferenceTrajectory, build_reference

PRIMER_FLOOR = 1e-30

# status code for samples discarded before reconstruction; kernel codes are 0-3
DEGENERATE = 4

_STATUS_NAMES = {
    _kernels.OK: "ok",
    _kernels.SINGULAR: "singular",
    _kernels.MASS_DEPLETED: "mass_depleted",
    _kernels.STEP_FAILURE: "step_failure",
    DEGENERATE: "degenerate_primer",
}


class FailureThresholdExceeded(ReachsetError):
    """More samples failed than the configured tolerance."""


@dataclass(frozen=True)
class CostateVec:
    """Costate split into position and velocity blocks."""

    lambda_r: np.ndarray
    lambda_v: np.ndarray

    @classmethod
    def from_array(cls, arr) -> "CostateVec":
        arr = np.asarray(arr, float).reshape(6)
        return cls(arr[:3].copy(), arr[3:].copy())

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.lambda_r, self.lambda_v])


@dataclass(frozen=True)
class SampledTrajectory:
    """One reconstructed reachable trajectory."""

    sample_id: int
    lambda_terminal: np.ndarray
    controls: np.ndarray | None
    states: np.ndarray | None
    terminal: StateVec
    final_mass: float
    status: int
    boundary: BoundaryResult | None = None

    @property
    def ok(self) -> bool:
        return self.status == _kernels.OK


def sample_terminal_costates(j_samples: int, seed: int) -> np.ndarray:
    """J unit 6-vectors, uniform on the sphere, shape (J, 6).

    Normalized standard-Gaussian draws from a counter-based Philox stream:
    sample j is a fixed prefix of the stream, so results are independent of
    worker count and of how the batch is later chunked.
    """
    if j_samples < 1:
        raise ValueError("j_samples must be >= 1")
    rng = np.random.Generator(np.random.Philox(seed))
    draws = rng.standard_normal((j_samples, 6))
    norms = np.linalg.norm(draws, axis=1)
    norms[norms < 1e-300] = 1.0
    return draws / norms[:, None]


def backward_costates(lambda_n, reference: ReferenceTrajectory) -> np.ndarray:
    """Costates at every stage boundary, shape (N+1, 6); row N is the input.

    lam_i = F_x_i^T lam_{i+1}, descending; no intermediate normalization.
    """
    lam_n = lambda_n.vector if isinstance(lambda_n, CostateVec) else np.asarray(lambda_n, float)
    fx = reference.fx_stack()
    n = reference.n_stages
    lam = np.empty((n + 1, 6))
    lam[n] = lam_n
    for i in range(n - 1, -1, -1):
        lam[i] = fx[i].T @ lam[i + 1]
    return lam


def stage_control(f_u_i: np.ndarray, lambda_next) -> np.ndarray:
    """Primer-vector steering for one stage: -F_u^T lam / ||F_u^T lam||."""
    lam = lambda_next.vector if isinstance(lambda_next, CostateVec) else np.asarray(lambda_next, float)
    p = np.asarray(f_u_i, float).T @ lam
    n = np.linalg.norm(p)
    if n < PRIMER_FLOOR:
        raise DegeneratePrimer("costate orthogonal to controllable subspace")
    return -p / n


def _controls_batch(lam_n: np.ndarray, fx: np.ndarray, fu: np.ndarray):
    """Vectorized backward recursion over a chunk of samples.

    Returns (controls (J,N,3), lam0 (J,6), degenerate (J,)). Row-vector form:
    lam @ F_x == (F_x^T lam^T)^T, so each sample follows the scalar recursion
    exactly.
    """
    j, n = lam_n.shape[0], fx.shape[0]
    controls = np.empty((j, n, 3))
    degenerate = np.zeros(j, bool)
    lam = lam_n.copy()
    for i in range(n - 1, -1, -1):
        proj = lam @ fu[i]
        nrm = np.linalg.norm(proj, axis=1)
        bad = nrm < PRIMER_FLOOR
        degenerate |= bad
        controls[:, i, :] = -proj / np.where(bad, 1.0, nrm)[:, None]
        lam = lam @ fx[i]
    return controls, lam, degenerate


def reconstruct_trajectory(reference: ReferenceTrajectory, controls, x_init: StateVec,
                           m_init: float, cfg: IntegratorConfig | None = None,
                           sample_id: int = 0, lambda_terminal=None,
                           backend=None) -> SampledTrajectory:
    """Nonlinear forward propagation of one sample under full thrust with
    zero-order-hold steering and mass depleting from m_init."""
    cfg = cfg or reference.cfg
    kern = backend or _kernels.get_backend()
    env = reference.env
    controls = np.asarray(controls, float).reshape(1, reference.n_stages, 3)
    states, status = kern.propagate_batch(
        _model_kind_of(reference), reference.model.mu,
        x_init.vector.reshape(1, 6), controls, np.array([float(m_init)]),
        env.t_eff, env.mdot, reference.t0, reference.dt, reference.n_stages,
        cfg.method_code, cfg.rel_tol, cfg.abs_tol, cfg.substeps,
        reference.model.r_floor, 1, cfg.max_steps)
    code = int(status[0])
    final_mass = float(m_init) - env.mdot * reference.horizon
    terminal = (StateVec.from_vector(states[0, -1], x_init.frame)
                if code == _kernels.OK else x_init)
    return SampledTrajectory(
        sample_id=sample_id,
        lambda_terminal=None if lambda_terminal is None else np.asarray(lambda_terminal, float),
        controls=controls[0], states=states[0], terminal=terminal,
        final_mass=final_mass, status=code)


def _model_kind_of(reference: ReferenceTrajectory) -> int:
    from .propagation import _model_kind

    return _model_kind(reference.model)


@dataclass
class ReachableSet:
    """Structure-of-arrays result of one reachable-set run."""

    reference: ReferenceTrajectory
    seed: int
    lambdas: np.ndarray
    status: np.ndarray
    terminals: np.ndarray
    final_mass: np.ndarray
    wall_time: float
    phase_times: dict
    boundary: BoundaryBatch | None = None
    histories: np.ndarray | None = None
    controls: np.ndarray | None = None
    n_clamped: int = 0

    @property
    def n_attempted(self) -> int:
        return self.lambdas.shape[0]

    @property
    def ok_mask(self) -> np.ndarray:
        return self.status == _kernels.OK

    @property
    def n_succeeded(self) -> int:
        return int(self.ok_mask.sum())

    @property
    def n_discarded(self) -> int:
        return self.n_attempted - self.n_succeeded

    def discard_reasons(self) -> dict:
        reasons = {}
        for code, name in _STATUS_NAMES.items():
            if code == _kernels.OK:
                continue
            c = int((self.status == code).sum())
            if c:
                reasons[name] = c
        return reasons

    def terminal_positions(self) -> np.ndarray:
        return self.terminals[self.ok_mask, :3]

    def terminal_velocities(self) -> np.ndarray:
        return self.terminals[self.ok_mask, 3:]

    def sample(self, j: int) -> SampledTrajectory:
        bres = self.boundary.result(j) if self.boundary is not None else None
        frame = self.reference.model.frame
        return SampledTrajectory(
            sample_id=j,
            lambda_terminal=self.lambdas[j],
            controls=None if self.controls is None else self.controls[j],
            states=None if self.histories is None else self.histories[j],
            terminal=StateVec.from_vector(
                np.where(np.isfinite(self.terminals[j]), self.terminals[j], 0.0), frame),
            final_mass=float(self.final_mass[j]),
            status=int(self.status[j]),
            boundary=bres)

    @property
    def samples(self):
        return [self.sample(j) for j in range(self.n_attempted)]


def compute_reachable_set(model, x0: StateVec, params: SpacecraftParams,
                          n_stages: int, dt: float, j_samples: int, seed: int,
                          boundary_spec: BoundarySpecs | None = None,
                          cfg: IntegratorConfig | None = None,
                          keep_histories: bool = False,
                          n_threads: int = 1,
                          chunk_size: int = 8192,
                          failure_threshold: float = 0.01,
                          backend=None,
                          reference: ReferenceTrajectory | None = None) -> ReachableSet:
    """Run the full three-pass determination and return a ReachableSet.

    Sampling and reconstruction proceed in chunks; every sample's arithmetic
    is chunk- and thread-independent, so a fixed seed gives identical output
    for any worker count. Failed samples are discarded and counted; the batch
    aborts only if the failure fraction exceeds failure_threshold.
    """
    cfg = cfg or IntegratorConfig()
    kern = backend or _kernels.get_backend()
    t_begin = time.perf_counter()

    if reference is None:
        reference = build_reference(model, x0, params, n_stages, dt, cfg)
    env = reference.env
    check_mass_feasible(env, reference.horizon)
    t_ref = time.perf_counter()

    lambdas = sample_terminal_costates(j_samples, seed)
    fx = reference.fx_stack()
    fu = reference.fu_stack()
    x_ref0 = reference.stages[0].x_ref.vector

    status = np.zeros(j_samples, dtype=np.int64)
    terminals = np.full((j_samples, 6), np.nan)
    final_mass = np.full(j_samples, np.nan)
    histories = np.full((j_samples, n_stages + 1, 6), np.nan) if keep_histories else None
    controls_out = np.full((j_samples, n_stages, 3), np.nan) if keep_histories else None
    bound_batch = BoundaryBatch.empty(j_samples) if boundary_spec is not None else None
    n_clamped = 0

    t_sampling = 0.0
    t_recon = 0.0
    kind = _model_kind_of(reference)

    for lo in range(0, j_samples, chunk_size):
        hi = min(lo + chunk_size, j_samples)
        tc0 = time.perf_counter()
        ctrl, lam0, degenerate = _controls_batch(lambdas[lo:hi], fx, fu)
        x_start = np.tile(x_ref0, (hi - lo, 1))
        m_start = np.full(hi - lo, env.m0)
        if boundary_spec is not None:
            shifts, m_star, chunk_res, clamped = apply_batch(lam0, boundary_spec, env)
            x_start = x_start + shifts
            m_start = m_star
            bound_batch.fill(lo, hi, chunk_res)
            n_clamped += clamped
        tc1 = time.perf_counter()
        t_sampling += tc1 - tc0

        st, code = kern.propagate_batch(
            kind, reference.model.mu, x_start, ctrl, m_start, env.t_eff,
            env.mdot, reference.t0, dt, n_stages, cfg.method_code,
            cfg.rel_tol, cfg.abs_tol, cfg.substeps, reference.model.r_floor,
            n_threads, cfg.max_steps)
        code = code.copy()
        code[degenerate] = DEGENERATE
        status[lo:hi] = code
        ok = code == _kernels.OK
        terminals[lo:hi][ok] = st[ok, -1, :]
        final_mass[lo:hi] = m_start - env.mdot * reference.horizon
        if keep_histories:
            histories[lo:hi] = st
            controls_out[lo:hi] = ctrl
        t_recon += time.perf_counter() - tc1

    n_failed = int((status != _kernels.OK).sum())
    if j_samples > 0 and n_failed / j_samples > failure_threshold:
        raise FailureThresholdExceeded(
            f"{n_failed}/{j_samples} samples failed (threshold {failure_threshold:.2%})")

    wall = time.perf_counter() - t_begin
    return ReachableSet(
        reference=reference, seed=seed, lambdas=lambdas, status=status,
        terminals=terminals, final_mass=final_mass, wall_time=wall,
        phase_times={
            "reference": t_ref - t_begin,
            "sampling": t_sampling,
            "reconstruction": t_recon,
        },
        boundary=bound_batch, histories=histories, controls=controls_out,
        n_clamped=n_clamped)
