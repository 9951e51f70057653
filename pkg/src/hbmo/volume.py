"""Volume-constrained stepping and the penalized minimizing-movements oracle.

Production path: after the unconstrained channel solve, a scalar shift is
added to each phase's projection before thresholding; bisection per phase
inside an outer sweep drives every phase area to its target.  Shifting all
projections by a common constant never changes the argmax (the label
vectors sum to zero), so only the mean-zero part of the shift vector is
meaningful and that is what gets reported.

The quadratic-plus-penalty functional whose minimizer reproduces one
implicit wave update is also provided, together with a literal
gradient-descent minimizer.  Both serve as cross-checks of the shift
construction, not as the production path: the penalty term is piecewise
constant in the field on a grid, so its gradient only makes sense through
finite differences of the phase measures under channel shifts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .backend import kernels
from .errors import ConfigurationError, ConvergenceError
from .grid import Grid2D, VectorField, quadrature_weights
from .multiphase import (DEFAULT_SUBSTEPS, PhaseSet, SimplexBasis,
                         phase_set_from_projections, projections, solve_channels)

VOLUME_LOG_SCHEMA = "hbmo-volume-log-v1"


@dataclass(frozen=True)
class VolumeTargets:
    """Prescribed per-phase areas with penalty weight and matching tolerance."""

    areas: tuple[float, ...]
    penalty_eps: float = 1e-3
    tol: float = 1e-4
    max_sweeps: int = 50

    def __post_init__(self):
        if any(a <= 0 for a in self.areas):
            raise ConfigurationError("target areas must be positive")
        if self.penalty_eps <= 0 or self.tol <= 0:
            raise ConfigurationError("penalty_eps and tol must be positive")

    def validate_against(self, grid: Grid2D) -> None:
        lx, ly = grid.extent
        total = lx * ly
        if abs(sum(self.areas) - total) > self.tol * len(self.areas):
            raise ConfigurationError(
                f"target areas sum to {sum(self.areas):.6g}, "
                f"domain area is {total:.6g}")
        cell = grid.hx * grid.hy
        if self.tol < cell:
            raise ConfigurationError(
                f"tolerance {self.tol:.3g} below one cell area {cell:.3g}; "
                "counting nodes cannot resolve it")


def _measures_for_shifts(proj: NDArray, gram: NDArray, shifts: NDArray,
                         cell: float) -> NDArray:
    """Phase areas after adding the shift vector sum_i shifts_i p_i.

    In projection space that adds ``gram @ shifts`` to the per-phase
    projections (constant over the grid), so no field is rebuilt.
    """
    offs = gram @ shifts
    labels = np.argmax(proj + offs[:, None, None], axis=0)
    counts = np.bincount(labels.ravel(), minlength=len(shifts))
    return counts * cell


def _grad_quad(u: NDArray, w: NDArray, h: float, grid: Grid2D,
               wq: NDArray) -> NDArray:
    """Gradient of the kinetic+Dirichlet part; zero exactly at the implicit
    mirror-Laplacian update (u - w)/h^2 = lap(u)."""
    lap = np.empty_like(u[0])
    out = np.empty_like(u)
    for c in range(u.shape[0]):
        kernels.laplacian(u[c], grid.hx, grid.hy, lap)
        out[c] = grid.hx * grid.hy * wq * ((u[c] - w[c]) / (h * h) - lap)
    return out


def functional_value(u: VectorField, u_nm1: VectorField, u_nm2: VectorField,
                     h: float, targets: VolumeTargets | None = None,
                     basis: SimplexBasis | None = None) -> float:
    """Discrete value of

        int |u - 2 u_{n-1} + u_{n-2}|^2 / (2 h^2) + |grad u|^2 / 2 dx
        + (1/eps) sum_i |A_i - meas(P_i^u)|^2 .

    Nodal terms use trapezoid weights; the Dirichlet term is assembled over
    grid edges with transverse trapezoid weights, whose Euler-Lagrange
    equation is exactly the mirror-ghost five-point update.  Measures count
    thresholded nodes times the cell area.
    """
    g = u.grid
    if h <= 0:
        raise ConfigurationError("time increment h must be positive")
    if u_nm1.grid != g or u_nm2.grid != g:
        raise ConfigurationError("functional fields must share one grid")
    wq = quadrature_weights(g)
    cell = g.hx * g.hy
    ua, u1, u2 = u.as_array(), u_nm1.as_array(), u_nm2.as_array()
    resid = ua - 2.0 * u1 + u2
    kinetic = float(np.sum(wq * np.sum(resid**2, axis=0)) * cell / (2.0 * h * h))

    wx = np.ones(g.nx)
    wx[0] = wx[-1] = 0.5
    wy = np.ones(g.ny)
    wy[0] = wy[-1] = 0.5
    dx = (ua[:, :, 1:] - ua[:, :, :-1]) / g.hx
    dy = (ua[:, 1:, :] - ua[:, :-1, :]) / g.hy
    dirichlet = 0.5 * cell * (
        float(np.sum(np.sum(dx**2, axis=0) * wy[:, None]))
        + float(np.sum(np.sum(dy**2, axis=0) * wx[None, :])))

    penalty = 0.0
    if targets is not None:
        if basis is None:
            raise ConfigurationError("targets need the simplex basis")
        proj = np.tensordot(basis.vectors, ua, axes=([1], [0]))
        meas = _measures_for_shifts(proj, basis.gram,
                                    np.zeros(basis.n_phases), cell)
        penalty = float(np.sum((np.asarray(targets.areas) - meas) ** 2)
                        / targets.penalty_eps)
    return kinetic + dirichlet + penalty


def functional_descent(u_init: VectorField, u_nm1: VectorField,
                       u_nm2: VectorField, h: float,
                       targets: VolumeTargets | None = None,
                       basis: SimplexBasis | None = None,
                       steps: int = 400, rate: float | None = None,
                       penalty_rate: float = 0.0,
                       fd_shift: float | None = None) -> VectorField:
    """Plain gradient descent on the functional; a cross-check oracle.

    The smooth part descends with an explicitly stable rate (default 90% of
    the quadratic stability bound).  With targets, the penalty descends
    along the constant label directions p_i, its gradient taken by central
    finite differences of the measures under channel shifts of size
    ``fd_shift``.  Raises after five consecutive increases of the
    functional value (divergence guard).
    """
    g = u_init.grid
    wq = quadrature_weights(g)
    cell = g.hx * g.hy
    bound = cell * (1.0 / (h * h) + 4.0 / g.hx**2 + 4.0 / g.hy**2)
    if rate is None:
        rate = 0.9 * 2.0 / bound
    elif rate > 2.0 / bound:
        raise ConfigurationError(
            f"descent rate {rate:.3g} exceeds the stability bound {2.0 / bound:.3g}")
    if targets is not None and basis is None:
        raise ConfigurationError("targets need the simplex basis")

    u = u_init.as_array().copy()
    w = 2.0 * u_nm1.as_array() - u_nm2.as_array()
    prev_value = math.inf
    increases = 0
    for _ in range(steps):
        u -= rate * _grad_quad(u, w, h, g, wq)
        if targets is not None and penalty_rate > 0.0:
            eta = fd_shift if fd_shift is not None else 0.05 * math.sqrt(cell)
            proj = np.tensordot(basis.vectors, u, axes=([1], [0]))
            areas = np.asarray(targets.areas)
            grad_lam = np.zeros(basis.n_phases)
            for i in range(basis.n_phases):
                shift = np.zeros(basis.n_phases)
                shift[i] = eta
                m_plus = _measures_for_shifts(proj, basis.gram, shift, cell)
                m_minus = _measures_for_shifts(proj, basis.gram, -shift, cell)
                p_plus = np.sum((areas - m_plus) ** 2) / targets.penalty_eps
                p_minus = np.sum((areas - m_minus) ** 2) / targets.penalty_eps
                grad_lam[i] = (p_plus - p_minus) / (2.0 * eta)
            u -= penalty_rate * np.tensordot(grad_lam, basis.vectors,
                                             axes=([0], [0]))[:, None, None]
        value = functional_value(VectorField.from_array(g, u), u_nm1, u_nm2,
                                 h, targets, basis)
        increases = increases + 1 if value > prev_value else 0
        if increases >= 5:
            raise ConvergenceError(
                f"functional increased for 5 consecutive steps (now {value:.6g})")
        prev_value = value
    return VectorField.from_array(g, u)


@dataclass
class VolumeReport:
    """Outcome of one constrained step."""

    shifts: NDArray[np.float64]      # mean-zero lambda per phase
    residuals: NDArray[np.float64]   # |A_i - meas_i| after correction
    sweeps: int


def _bisect_phase(proj: NDArray, gram: NDArray, shifts: NDArray, i: int,
                  target: float, cell: float, bracket: float) -> float:
    """Monotone bisection of shift i so phase i's area meets the target.

    Measures are step functions of the shift, so the bisection narrows the
    bracket to round-off and keeps the endpoint with the smaller residual.
    """
    lo = shifts[i] - bracket
    hi = shifts[i] + bracket

    def measure(lam: float) -> float:
        trial = shifts.copy()
        trial[i] = lam
        return _measures_for_shifts(proj, gram, trial, cell)[i]

    m_lo, m_hi = measure(lo), measure(hi)
    widen = 0
    while not (m_lo <= target <= m_hi) and widen < 4:
        lo -= bracket
        hi += bracket
        bracket *= 2.0
        m_lo, m_hi = measure(lo), measure(hi)
        widen += 1
    if not (m_lo <= target <= m_hi):
        # target unreachable in any bracket (phase gone or domain-filling)
        return lo if abs(m_lo - target) <= abs(m_hi - target) else hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if measure(mid) < target:
            lo = mid
        else:
            hi = mid
    return lo if abs(measure(lo) - target) < abs(measure(hi) - target) else hi


def constrained_step(z_curr: VectorField, z_prev: VectorField,
                     basis: SimplexBasis, targets: VolumeTargets,
                     threshold_dt: float, bracket: float,
                     substeps: int = DEFAULT_SUBSTEPS) -> tuple[PhaseSet, VolumeReport]:
    """Unconstrained solve, then per-phase shift correction of the volumes.

    ``bracket`` is the initial bisection window (the z-band width is a
    natural choice); it widens twofold up to four times when the target is
    not bracketed.  Raises ConvergenceError when some phase still misses
    its target after ``targets.max_sweeps`` sweeps.
    """
    grid = z_curr.grid
    targets.validate_against(grid)
    n = basis.n_phases
    if len(targets.areas) != n:
        raise ConfigurationError(
            f"{len(targets.areas)} targets for {n} phases")
    u = solve_channels(z_curr, z_prev, threshold_dt, substeps)
    proj = projections(u, basis)
    cell = grid.hx * grid.hy
    areas = np.asarray(targets.areas)
    shifts = np.zeros(n)
    sweeps = 0
    for sweeps in range(1, targets.max_sweeps + 1):
        for i in range(n):
            meas_i = _measures_for_shifts(proj, basis.gram, shifts, cell)[i]
            if abs(meas_i - areas[i]) <= targets.tol:
                continue
            shifts[i] = _bisect_phase(proj, basis.gram, shifts, i, areas[i],
                                      cell, bracket)
        meas = _measures_for_shifts(proj, basis.gram, shifts, cell)
        residuals = np.abs(areas - meas)
        if np.all(residuals <= targets.tol):
            break
    else:
        worst = int(np.argmax(residuals))
        raise ConvergenceError(
            f"volume correction missed phase {worst} by {residuals[worst]:.3g} "
            f"after {targets.max_sweeps} sweeps (tol {targets.tol:.3g})")
    shifts -= shifts.mean()  # the constant component never changes the argmax
    offs = (basis.gram @ shifts)[:, None, None]
    ps = phase_set_from_projections(proj + offs, basis, grid)
    report = VolumeReport(shifts=shifts, residuals=residuals, sweeps=sweeps)
    return ps, report


@dataclass
class VolumeLog:
    """Per-step volume residual records, writable as CSV."""

    rows: list[tuple[int, int, float, float, float]] = field(default_factory=list)

    def add(self, step_index: int, measures: NDArray, targets: VolumeTargets) -> None:
        for i, (m, a) in enumerate(zip(measures, targets.areas)):
            self.rows.append((step_index, i, float(m), float(a),
                              float(abs(m - a))))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(f"# schema: {VOLUME_LOG_SCHEMA}\n")
            fh.write("step,phase,measure,target,residual\n")
            for row in self.rows:
                fh.write(",".join(repr(x) for x in row) + "\n")
