"""The two-history threshold-stepping loop driving the interface evolution.

One evolution step solves the wave equation over a threshold interval with
the initial level ``2 d_n - d_{n-1}`` built from the signed distances to
the current and previous interfaces (zero initial rate, wave speed squared
2), re-extracts the zero level set, and rebuilds an exact signed distance
to it.  The two-history initial condition is what carries the interface
velocity across the redistancing without ever computing velocities.

The very first step instead solves with the distance to the initial curve,
an initial rate encoding the prescribed normal velocity, and unit wave
speed.  Distances are positive inside the enclosed phase throughout, so a
negative prescribed velocity shrinks the phase; the rate field handed to
the solver is negated accordingly (the solver applies ``u_t(0) = -v``).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ExtinctInterfaceError
from .geometry import (Interface, average_radius, extract_interface,
                       min_wall_distance, nearest_segment_grid,
                       signed_distance_field, velocity_extension)
from .grid import Grid2D, ScalarField
from .wave import DEFAULT_SUBSTEPS, resolve_wave_params, solve
from .backend import kernels

logger = logging.getLogger(__name__)

RADII_SCHEMA = "hbmo-radii-v1"

FIRST_STEP_C2 = 1.0
STEP_C2 = 2.0


@dataclass(frozen=True)
class HbmoState:
    """Everything the algorithm remembers between threshold steps."""

    d_curr: ScalarField
    d_prev: ScalarField
    threshold_dt: float
    step_index: int
    interface: Interface

    def __post_init__(self):
        if self.threshold_dt <= 0:
            raise ConfigurationError("threshold step must be positive")
        if self.d_curr.grid != self.d_prev.grid:
            raise ConfigurationError("distance fields must share one grid")


@dataclass
class Trajectory:
    """Recorded frames (time, interface) plus optional radius samples."""

    frames: list[tuple[float, Interface]] = field(default_factory=list)
    radii: list[tuple[float, float]] | None = None
    extinct_at: float | None = None


def signed_distance_from_oriented(iface: Interface, grid: Grid2D) -> ScalarField:
    """Signed distance to an oriented polyline, positive on its left side."""
    dist, idx = nearest_segment_grid(grid, iface)
    flat = idx.ravel()
    seg = iface.q[flat] - iface.p[flat]
    rel = grid.nodes() - iface.p[flat]
    cross = seg[:, 0] * rel[:, 1] - seg[:, 1] * rel[:, 0]
    sign = np.where(cross >= 0.0, 1.0, -1.0).reshape(grid.shape)
    return ScalarField(grid, sign * dist)


def _warn_if_near_wall(iface: Interface, grid: Grid2D, c2: float, tau: float) -> None:
    margin = 2.0 * math.sqrt(c2) * tau
    d = min_wall_distance(iface, grid)
    if d < margin:
        logger.warning(
            "interface within %.3g of the domain wall (< %.3g); "
            "wall reflections will alter the motion", d, margin)


def first_step(gamma0: Interface, v0, threshold_dt: float, grid: Grid2D,
               substeps: int = DEFAULT_SUBSTEPS) -> HbmoState | None:
    """Evolve the initial curve with its prescribed normal velocity.

    ``v0`` is the outward normal velocity: a scalar applied to every
    segment, per-segment samples, or None for zero.  Returns the new state,
    or None when the zero level set vanished during the step (extinction).
    """
    if gamma0.is_empty:
        raise ExtinctInterfaceError("initial interface is empty")
    _warn_if_near_wall(gamma0, grid, FIRST_STEP_C2, threshold_dt)
    d0 = signed_distance_from_oriented(gamma0, grid)
    params = resolve_wave_params(threshold_dt, grid, c2=FIRST_STEP_C2,
                                 substeps=substeps)
    rate = None
    if v0 is not None:
        v = np.broadcast_to(np.asarray(v0, dtype=np.float64),
                            (gamma0.n_segments,))
        if np.any(v != 0.0):
            band = (2.0 * math.sqrt(FIRST_STEP_C2) * threshold_dt
                    + 4.0 * max(grid.hx, grid.hy))
            ext = velocity_extension(gamma0, v, grid, band)
            # inside-positive distances: u_t(0) = +v0, so negate for the solver
            rate = ScalarField(grid, -ext.values)
    u_tau = solve(d0, rate, params)
    gamma1 = extract_interface(u_tau)
    if gamma1.is_empty:
        return None
    d1 = signed_distance_field(gamma1, u_tau)
    return HbmoState(d_curr=d1, d_prev=d0, threshold_dt=threshold_dt,
                     step_index=1, interface=gamma1)


def step(state: HbmoState, substeps: int = DEFAULT_SUBSTEPS) -> HbmoState | None:
    """One two-history threshold step; None signals extinction."""
    grid = state.d_curr.grid
    tau = state.threshold_dt
    _warn_if_near_wall(state.interface, grid, STEP_C2, tau)
    u0 = ScalarField(grid, 2.0 * state.d_curr.values - state.d_prev.values)
    params = resolve_wave_params(tau, grid, c2=STEP_C2, substeps=substeps)
    u_tau = solve(u0, None, params)
    gamma = extract_interface(u_tau)
    if gamma.is_empty:
        return None
    d_next = signed_distance_field(gamma, u_tau)
    return HbmoState(d_curr=d_next, d_prev=state.d_curr, threshold_dt=tau,
                     step_index=state.step_index + 1, interface=gamma)


def smooth_initial(phase_mask: ScalarField, smoothing_time: float) -> Interface:
    """Round off a rough nodal mask by running the heat equation briefly.

    The +/-1 indicator of the mask diffuses for ``smoothing_time`` (forward
    Euler, dt capped at 0.25 h^2) and its zero level set is extracted.
    With zero time this is just the raw marching-triangles interface.
    """
    if smoothing_time < 0:
        raise ConfigurationError("smoothing time must be non-negative")
    g = phase_mask.grid
    indicator = np.where(phase_mask.values > 0.0, 1.0, -1.0)
    if smoothing_time == 0.0:
        return extract_interface(ScalarField(g, indicator))
    h2 = min(g.hx, g.hy) ** 2
    n = max(1, math.ceil(smoothing_time / (0.25 * h2)))
    dt = smoothing_time / n
    smoothed = kernels.heat(indicator, dt, g.hx, g.hy, n)
    return extract_interface(ScalarField(g, smoothed))


def run(gamma0: Interface, v0, threshold_dt: float, n_steps: int, grid: Grid2D,
        substeps: int = DEFAULT_SUBSTEPS,
        radii_center: tuple[float, float] | None = None) -> Trajectory:
    """Drive first_step + repeated step, recording a frame per threshold step.

    Extinction ends the evolution; recorded radii are zero-padded out to the
    requested horizon so error metrics can integrate over the full window.
    """
    if n_steps < 1:
        raise ConfigurationError("need at least one threshold step")
    traj = Trajectory(radii=[] if radii_center is not None else None)
    traj.frames.append((0.0, gamma0))
    if radii_center is not None:
        traj.radii.append((0.0, average_radius(gamma0, radii_center)))

    def record(k: int, iface: Interface) -> None:
        t = k * threshold_dt
        traj.frames.append((t, iface))
        if radii_center is not None:
            traj.radii.append((t, average_radius(iface, radii_center)))

    state = first_step(gamma0, v0, threshold_dt, grid, substeps)
    if state is None:
        traj.extinct_at = threshold_dt
    else:
        record(1, state.interface)
        for k in range(2, n_steps + 1):
            state = step(state, substeps)
            if state is None:
                traj.extinct_at = k * threshold_dt
                break
            record(k, state.interface)

    if traj.extinct_at is not None and radii_center is not None:
        recorded = len(traj.radii)
        for k in range(recorded, n_steps + 1):
            traj.radii.append((k * threshold_dt, 0.0))
    return traj


def save_radii_csv(path, traj: Trajectory) -> None:
    with open(path, "w") as fh:
        fh.write(f"# schema: {RADII_SCHEMA}\n")
        fh.write("time,radius\n")
        for t, r in (traj.radii or []):
            fh.write(f"{t!r},{r!r}\n")
