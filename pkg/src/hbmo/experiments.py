"""Reproduction pipelines for the shrinking-circle convergence studies.

A circle of radius 0.3 centred in the unit square starts at rest and the
evolution is stepped to its extinction time with a fixed threshold step
(extinction time / 2^9) and 2^6 inner solver substeps.  Two redistancing
modes are studied:

  * ``ideal``          after each step the distance field is replaced by
                       the perfect cone of the measured average radius;
  * ``reconstructed``  the exact signed distance to the extracted polyline
                       is rebuilt, idealising nothing.

Both start from two equal history levels (rest start), so the very first
threshold step is already the two-history solve.  The reported L2 error
integrates the squared gap between measured and closed-form radii over the
extinction window, with radii counted as zero after extinction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .circle import CircleParams, exact_radius, extinction_time
from .errors import ConfigurationError
from .geometry import (average_radius, circle_distance, extract_interface,
                       signed_distance_field)
from .grid import ScalarField, make_grid
from .wave import resolve_wave_params, solve

STEP_C2 = 2.0
CONVERGENCE_SCHEMA = "hbmo-convergence-v1"

MODES = ("ideal", "reconstructed")


@dataclass(frozen=True)
class ExperimentSpec:
    """The study setup; defaults are the reference configuration."""

    grid_n: int
    mode: str = "ideal"
    r0: float = 0.3
    center: tuple[float, float] = (0.5, 0.5)
    domain: float = 1.0
    steps_exponent: int = 9     # threshold_dt = t_e / 2**steps_exponent
    solver_substeps: int = 64
    radius_method: str = "endpoint"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.grid_n < 3:
            raise ConfigurationError("grid_n must be at least 3")

    @property
    def circle(self) -> CircleParams:
        return CircleParams(self.r0, 0.0)

    @property
    def threshold_dt(self) -> float:
        return extinction_time(self.circle) / 2 ** self.steps_exponent


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    times: np.ndarray          # (n-1) * threshold_dt
    radii: np.ndarray          # measured average radii, zero after extinction
    l2_error: float
    extinct_step: int | None


def l2_radius_error(series, params: CircleParams, dt: float) -> float:
    """sqrt( dt * sum_{n=1..N_e} (r((n-1) dt) - rbar_n)^2 ).

    ``series`` is a list of (time, radius) samples with uniform spacing
    ``dt`` starting at time 0; N_e = floor(t_e/dt) and missing entries
    (after extinction) count as radius zero.
    """
    if dt <= 0:
        raise ConfigurationError("dt must be positive")
    times = np.asarray([t for t, _ in series], dtype=float)
    radii = np.asarray([r for _, r in series], dtype=float)
    if len(times) > 1 and not np.allclose(np.diff(times), dt, rtol=1e-9, atol=0):
        raise ConfigurationError("series is not uniformly spaced by dt")
    t_e = extinction_time(params)
    n_e = int(math.floor(t_e / dt + 1e-9))
    rbar = np.zeros(n_e)
    take = min(n_e, len(radii))
    rbar[:take] = radii[:take]
    total = 0.0
    for n in range(1, n_e + 1):
        total += (exact_radius((n - 1) * dt, params) - rbar[n - 1]) ** 2
    return math.sqrt(dt * total)


def run_experiment(spec: ExperimentSpec) -> ExperimentResult:
    """Step the circle to extinction under ``spec`` and measure the error."""
    grid = make_grid(spec.grid_n, spec.domain)
    dt = spec.threshold_dt
    params = resolve_wave_params(dt, grid, c2=STEP_C2, substeps=spec.solver_substeps)
    t_e = extinction_time(spec.circle)
    n_e = int(math.floor(t_e / dt + 1e-9))

    cone = circle_distance(spec.center, spec.r0, grid)
    X, Y = grid.meshgrid()
    center_dist = np.hypot(X - spec.center[0], Y - spec.center[1])
    d_prev = cone
    d_curr = cone.copy()   # rest start: both histories equal

    radii = np.zeros(n_e)
    radii[0] = average_radius(extract_interface(d_curr), spec.center,
                              spec.radius_method)
    extinct_step = None
    for n in range(1, n_e):
        u0 = ScalarField(grid, 2.0 * d_curr.values - d_prev.values)
        u = solve(u0, None, params)
        iface = extract_interface(u)
        if iface.is_empty:
            extinct_step = n
            break
        rbar = average_radius(iface, spec.center, spec.radius_method)
        radii[n] = rbar
        if spec.mode == "ideal":
            d_next = ScalarField(grid, rbar - center_dist)
        else:
            d_next = signed_distance_field(iface, u)
        d_prev, d_curr = d_curr, d_next

    times = np.arange(n_e) * dt
    err = l2_radius_error(list(zip(times, radii)), spec.circle, dt)
    return ExperimentResult(spec=spec, times=times, radii=radii,
                            l2_error=err, extinct_step=extinct_step)


def run_ideal(spec: ExperimentSpec) -> ExperimentResult:
    if spec.mode != "ideal":
        raise ConfigurationError("spec.mode must be 'ideal'")
    return run_experiment(spec)


def run_reconstructed(spec: ExperimentSpec) -> ExperimentResult:
    if spec.mode != "reconstructed":
        raise ConfigurationError("spec.mode must be 'reconstructed'")
    return run_experiment(spec)


def _sweep_worker(args) -> tuple[int, float]:
    mode, n, kwargs = args
    res = run_experiment(ExperimentSpec(grid_n=n, mode=mode, **kwargs))
    return n, res.l2_error


def convergence_sweep(mode: str, resolutions, workers: int = 1,
                      **kwargs) -> list[tuple[int, float, float | None]]:
    """(N, l2_error, order) rows over ascending resolutions.

    Orders compare successive rows: log(err_prev/err)/log(N/N_prev).
    Independent resolutions may run in parallel processes (``workers``).
    """
    res = list(resolutions)
    if sorted(res) != res:
        raise ConfigurationError("resolutions must be ascending")
    jobs = [(mode, n, kwargs) for n in res]
    if workers > 1 and len(jobs) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            errors = dict(pool.map(_sweep_worker, jobs))
    else:
        errors = dict(map(_sweep_worker, jobs))
    rows: list[tuple[int, float, float | None]] = []
    prev = None
    for n in res:
        err = errors[n]
        order = None
        if prev is not None and err > 0:
            order = math.log(prev[1] / err) / math.log(n / prev[0])
        rows.append((n, err, order))
        prev = (n, err)
    return rows


def save_convergence_csv(path_or_handle, rows) -> None:
    """CSV with the study's column layout: N, l2_error, order."""
    def write(fh):
        fh.write(f"# schema: {CONVERGENCE_SCHEMA}\n")
        fh.write("N,l2_error,order\n")
        for n, err, order in rows:
            fh.write(f"{n},{err:.6f},{'' if order is None else f'{order:.6f}'}\n")

    if hasattr(path_or_handle, "write"):
        write(path_or_handle)
    else:
        with open(path_or_handle, "w") as fh:
            write(fh)
