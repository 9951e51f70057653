"""Explicit leapfrog integration of ``u_tt = c^2 lap(u)`` with zero Neumann
boundaries, plus a closed-form reference evaluator used by the tests.

Time stepping is the standard central second difference.  The first level
is produced by a second-order Taylor start, which is exact for discrete
eigenmodes of the mirror-ghost Laplacian.  The scheme is stable under
``sqrt(c^2)*dt*sqrt(1/hx^2 + 1/hy^2) <= cfl_safety``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .backend import kernels
from .errors import ConfigurationError
from .grid import Grid2D, ScalarField, laplacian_neumann

DEFAULT_SUBSTEPS = 64
DEFAULT_CFL_SAFETY = 0.9


@dataclass(frozen=True)
class WaveParams:
    """Wave speed squared, inner step and total integration time."""

    c2: float
    solver_dt: float
    duration: float
    cfl_safety: float = DEFAULT_CFL_SAFETY

    def __post_init__(self):
        if self.c2 <= 0 or self.solver_dt <= 0 or self.duration < 0:
            raise ConfigurationError("wave parameters must be positive")

    @property
    def n_steps(self) -> int:
        """Number of inner steps; duration must be an integer multiple of dt."""
        ratio = self.duration / self.solver_dt
        n = round(ratio)
        if abs(ratio - n) > 1e-9 * max(1.0, n):
            raise ConfigurationError(
                f"duration {self.duration} is not an integer multiple of "
                f"solver_dt {self.solver_dt}")
        return n

    def max_stable_dt(self, grid: Grid2D) -> float:
        return self.cfl_safety / (
            math.sqrt(self.c2) * math.sqrt(1.0 / grid.hx**2 + 1.0 / grid.hy**2))

    def validate(self, grid: Grid2D) -> None:
        dt_max = self.max_stable_dt(grid)
        if self.solver_dt > dt_max:
            raise ConfigurationError(
                f"solver_dt {self.solver_dt:.6g} violates the CFL bound; "
                f"maximal admissible dt is {dt_max:.6g}")
        self.n_steps


def resolve_wave_params(threshold_dt: float, grid: Grid2D, c2: float,
                        substeps: int = DEFAULT_SUBSTEPS,
                        cfl_safety: float = DEFAULT_CFL_SAFETY) -> WaveParams:
    """Inner step = threshold_dt/substeps, with substeps raised just enough
    when that step would break the CFL bound (dt stays a divisor of the
    threshold step so the solver lands exactly on the threshold time)."""
    if threshold_dt <= 0:
        raise ConfigurationError("threshold step must be positive")
    if substeps < 1:
        raise ConfigurationError("substeps must be at least 1")
    dt_max = cfl_safety / (math.sqrt(c2) * math.sqrt(1 / grid.hx**2 + 1 / grid.hy**2))
    k = max(substeps, math.ceil(threshold_dt / dt_max))
    return WaveParams(c2=c2, solver_dt=threshold_dt / k, duration=threshold_dt,
                      cfl_safety=cfl_safety)


@dataclass(frozen=True)
class WaveState:
    """Two consecutive time levels; treated as immutable snapshots."""

    u_prev: ScalarField
    u_curr: ScalarField
    t: float

    def __post_init__(self):
        if self.u_prev.grid != self.u_curr.grid:
            raise ConfigurationError("wave state levels must share one grid")


def first_leap(u0: ScalarField, v0: ScalarField | None, params: WaveParams) -> WaveState:
    """Taylor start: ``u1 = u0 + dt*(-v0) + (c^2 dt^2/2) lap(u0)``.

    The rate field enters the initial condition as ``u_t(0) = -v0``.
    """
    params.validate(u0.grid)
    dt = params.solver_dt
    u1 = u0.values + 0.5 * params.c2 * dt * dt * laplacian_neumann(u0).values
    if v0 is not None:
        if v0.grid != u0.grid:
            raise ConfigurationError("u0 and v0 must share one grid")
        u1 = u1 - dt * v0.values
    return WaveState(u_prev=u0, u_curr=ScalarField(u0.grid, u1), t=dt)


def leapfrog_step(state: WaveState, params: WaveParams) -> WaveState:
    """One central-difference step: ``u_next = 2u - u_prev + c^2 dt^2 lap(u)``."""
    grid = state.u_curr.grid
    params.validate(grid)
    dt = params.solver_dt
    up, uc = kernels.leapfrog(state.u_prev.values, state.u_curr.values,
                              params.c2 * dt * dt, grid.hx, grid.hy, 1)
    return WaveState(u_prev=ScalarField(grid, up), u_curr=ScalarField(grid, uc),
                     t=state.t + dt)


def solve(u0: ScalarField, v0: ScalarField | None, params: WaveParams) -> ScalarField:
    """Integrate to ``params.duration`` and return the final level."""
    if params.duration == 0:
        return u0.copy()
    params.validate(u0.grid)
    n = params.n_steps
    state = first_leap(u0, v0, params)
    if n > 1:
        grid = u0.grid
        dt = params.solver_dt
        _, uc = kernels.leapfrog(state.u_prev.values, state.u_curr.values,
                                 params.c2 * dt * dt, grid.hx, grid.hy, n - 1)
        return ScalarField(grid, uc)
    return state.u_curr


def discrete_energy(state: WaveState, params: WaveParams) -> float:
    """Nodal energy sum ((u-u_prev)/dt)^2 + c^2 |grad u|^2, times hx*hy.

    The gradient uses mirror-ghost central differences, so no flux crosses
    the boundary and the leapfrog keeps this quantity nearly constant.
    """
    g = state.u_curr.grid
    rate = (state.u_curr.values - state.u_prev.values) / params.solver_dt
    p = np.pad(state.u_curr.values, 1, mode="reflect")
    gx = (p[1:-1, 2:] - p[1:-1, :-2]) / (2.0 * g.hx)
    gy = (p[2:, 1:-1] - p[:-2, 1:-1]) / (2.0 * g.hy)
    return float(np.sum(rate**2 + params.c2 * (gx**2 + gy**2)) * g.hx * g.hy)


def poisson_reference(kappa: float, kappa_x1: float, v0: float, dv0_dx1: float,
                      t: float, x1: float, x2: float, c2: float = 1.0) -> float:
    """Closed-form small-time expansion of the wave solution seeded with a
    signed distance function, in the local frame of an interface point
    (x1 tangent, x2 along the normal, curvature ``kappa`` at the origin):

        x2 + (kappa/2)(c^2 t^2 + x1^2) + (kappa_x1 x1/6)(3 c^2 t^2 + x1^2)
           - (kappa^2 x2/2)(c^2 t^2 + x1^2) - v0 t - dv0_dx1 t x1

    Valid while t and |x| are small enough that quartic terms are
    negligible.  This is a pure formula, used as an oracle for ``solve``.
    """
    c2t2 = c2 * t * t
    return (x2
            + 0.5 * kappa * (c2t2 + x1 * x1)
            + (kappa_x1 * x1 / 6.0) * (3.0 * c2t2 + x1 * x1)
            - 0.5 * kappa * kappa * x2 * (c2t2 + x1 * x1)
            - v0 * t
            - dv0_dx1 * t * x1)
