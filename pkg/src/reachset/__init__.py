"""Minimum-time reachable sets for low-thrust spacecraft.

Linearizes about a ballistic reference, samples terminal costates on the unit
sphere, recovers primer-vector steering by backward adjoint recursion, and
reconstructs each reachable trajectory with a single nonlinear forward
integration. Supports heliocentric two-body and Earth-Moon CR3BP dynamics,
initial-condition uncertainty and impulse constraints, and invariant-manifold
analysis of periodic orbits.
"""

__version__ = "0.1.0"

from .dynamics import (  # noqa: F401
    Cr3bpModel,
    Frame,
    MassProfile,
    NormalizedSpacecraft,
    SpacecraftParams,
    StateVec,
    ThrustEnv,
    TwoBodyModel,
    control_influence,
    jacobi_constant,
    mass_at,
    nondimensionalize,
    rates,
    state_jacobian,
)
