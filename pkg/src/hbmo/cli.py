"""Command-line front end.

Subcommands::

    hbmo circle-table [--r0 1.0 --v0 0.0 --base-n 10 --levels 8 --refinement 4]
    hbmo converge --mode {ideal,reconstructed} [--grids 16,32,64,128,256]
    hbmo evolve <config-file>

Exit codes: 0 success, 1 numerical failure, 2 usage/config problems.
``HBMO_THREADS`` caps the process parallelism of the resolution sweep in
``converge``; everything else is single-process and deterministic.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import circle, experiments, stepping
from .config import RunConfig, load_run_config
from .errors import ConfigurationError, ConvergenceError, ExtinctInterfaceError
from .geometry import (Interface, circle_distance, extract_interface,
                       load_interface, save_interface)
from .grid import load_field, make_grid
from .multiphase import (build_z_field, load_labels_csv, multiphase_step,
                         phase_set_from_labels, simplex_vectors)
from .stepping import smooth_initial
from .volume import VolumeLog, VolumeTargets, constrained_step

CIRCLE_TABLE_SCHEMA = "hbmo-circle-table-v1"


def _open_out(path: str | None):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w"), True


def cmd_circle_table(args) -> int:
    rows = circle.convergence_table(args.r0, args.v0, args.base_n, args.levels,
                                    args.refinement)
    fh, close = _open_out(args.output)
    try:
        fh.write(f"# schema: {CIRCLE_TABLE_SCHEMA}\n")
        fh.write("N,error,order\n")
        for n, err, order in rows:
            fh.write(f"{n},{err:.6f},{'' if order is None else f'{order:.3f}'}\n")
    finally:
        if close:
            fh.close()
    # healthy first-order behaviour: orders from the third level on >= 0.9
    bad = [o for _, _, o in rows[2:] if o is not None and o < 0.9]
    return 1 if bad else 0


def cmd_converge(args) -> int:
    grids = [int(t) for t in args.grids.split(",")]
    workers = int(os.environ.get("HBMO_THREADS", "1"))
    rows = experiments.convergence_sweep(
        args.mode, grids, workers=workers, r0=args.r0,
        steps_exponent=args.steps_exp, solver_substeps=args.substeps,
        radius_method=args.radius_method)
    fh, close = _open_out(args.output)
    try:
        experiments.save_convergence_csv(fh, rows)
    finally:
        if close:
            fh.close()
    return 0


def _scalar_initial(cfg: RunConfig, grid) -> tuple[Interface, object]:
    if cfg.initial_shape == "circle":
        gamma0 = extract_interface(
            circle_distance(cfg.initial_center, cfg.initial_radius, grid))
    elif cfg.initial_shape == "polyline-file":
        gamma0 = load_interface(cfg.resolve_path(cfg.initial_polyline_file))
    elif cfg.initial_shape == "mask-file":
        mask = load_field(cfg.resolve_path(cfg.initial_mask_file))
        smoothing = cfg.initial_smoothing_time
        if smoothing is None:
            smoothing = min(grid.hx, grid.hy) ** 2
        gamma0 = smooth_initial(mask, smoothing)
    else:
        raise ConfigurationError(
            f"initial.shape {cfg.initial_shape!r} is not usable in scalar mode")
    if gamma0.is_empty:
        raise ConfigurationError("initial interface is empty")
    if cfg.initial_velocity_file is not None:
        v0 = np.loadtxt(cfg.resolve_path(cfg.initial_velocity_file), ndmin=1)
        if len(v0) != gamma0.n_segments:
            raise ConfigurationError(
                f"initial.velocity_file: {len(v0)} samples for "
                f"{gamma0.n_segments} segments")
    else:
        v0 = cfg.initial_velocity
    return gamma0, v0


def _initial_labels(cfg: RunConfig, grid) -> np.ndarray:
    if cfg.phases_mask_file is not None:
        labels = load_labels_csv(cfg.resolve_path(cfg.phases_mask_file))
        if labels.shape != grid.shape:
            raise ConfigurationError(
                f"phases.mask_file: label shape {labels.shape} does not "
                f"match grid {grid.shape}")
        return labels
    X, Y = grid.meshgrid()
    if cfg.initial_shape == "circle":
        inside = np.hypot(X - cfg.initial_center[0],
                          Y - cfg.initial_center[1]) < cfg.initial_radius
        return np.where(inside, 0, 1).astype(np.intp)
    if cfg.initial_shape == "bubbles":
        labels = np.zeros(grid.shape, dtype=np.intp)
        for i, (cx, cy, r) in enumerate(cfg.initial_bubbles, start=1):
            labels[np.hypot(X - cx, Y - cy) < r] = i
        return labels
    raise ConfigurationError(
        f"initial.shape {cfg.initial_shape!r} cannot seed a multiphase run")


def _resolve_schedule(cfg: RunConfig) -> tuple[float, int]:
    dt, steps = cfg.threshold_dt, cfg.steps
    if dt is None or steps is None:
        params = circle.CircleParams(cfg.initial_radius,
                                     min(cfg.initial_velocity, 0.0))
        t_e = circle.extinction_time(params)
        if dt is None:
            dt = t_e / steps
        else:
            steps = math.ceil(t_e / dt)
    return dt, steps


def cmd_evolve(args) -> int:
    cfg = load_run_config(args.config)
    grid = make_grid(cfg.grid_n, cfg.domain)
    dt, steps = _resolve_schedule(cfg)
    frames_dir = cfg.resolve_path(cfg.frames_dir)
    if frames_dir is not None:
        frames_dir.mkdir(parents=True, exist_ok=True)

    if cfg.mode == "scalar":
        gamma0, v0 = _scalar_initial(cfg, grid)
        center = cfg.initial_center if cfg.initial_shape == "circle" else None
        traj = stepping.run(gamma0, v0, dt, steps, grid,
                            substeps=cfg.solver_substeps, radii_center=center)
        if frames_dir is not None:
            for k, (t, iface) in enumerate(traj.frames):
                save_interface(frames_dir / f"frame_{k:04d}.csv", iface, t)
        if cfg.radii_csv is not None:
            if traj.radii is None:
                raise ConfigurationError(
                    "output.radii_csv needs a circle initial shape")
            stepping.save_radii_csv(cfg.resolve_path(cfg.radii_csv), traj)
        if traj.extinct_at is not None:
            print(f"extinct at t={traj.extinct_at:.6g}")
        return 0

    labels = _initial_labels(cfg, grid)
    n_phases = cfg.phases_count or int(labels.max()) + 1
    if labels.max() >= n_phases:
        raise ConfigurationError(
            f"labels use {int(labels.max()) + 1} phases, phases.count={n_phases}")
    basis = simplex_vectors(n_phases)
    ps = phase_set_from_labels(labels, basis, grid)
    eps = cfg.multiphase_eps or 6.0 * max(grid.hx, grid.hy)

    targets = None
    if cfg.mode == "volume":
        lx, ly = grid.extent
        if cfg.volume_targets == "from-initial":
            areas = tuple(ps.measures())
        else:
            areas = tuple(cfg.volume_targets)
        tol = cfg.volume_tol if cfg.volume_tol is not None else 1e-4 * lx * ly
        targets = VolumeTargets(areas=areas, penalty_eps=cfg.volume_penalty_eps,
                                tol=tol, max_sweeps=cfg.volume_max_sweeps)

    log = VolumeLog()
    z_curr = build_z_field(ps, eps)
    z_prev = z_curr

    def write_frames(k: int, phase_set) -> None:
        if frames_dir is None:
            return
        for i, iface in enumerate(phase_set.interfaces):
            save_interface(frames_dir / f"frame_{k:04d}_phase{i}.csv",
                           iface, k * dt)

    write_frames(0, ps)
    for k in range(1, steps + 1):
        if targets is None:
            ps = multiphase_step(z_curr, z_prev, basis, dt,
                                 substeps=cfg.solver_substeps)
        else:
            ps, _report = constrained_step(z_curr, z_prev, basis, targets, dt,
                                           bracket=eps,
                                           substeps=cfg.solver_substeps)
            log.add(k, ps.measures(), targets)
        write_frames(k, ps)
        z_prev, z_curr = z_curr, build_z_field(ps, eps)
    if frames_dir is not None:
        ps.save_labels_csv(frames_dir / "phases_final.csv")
    if targets is not None and cfg.volume_residual_csv is not None:
        log.save(cfg.resolve_path(cfg.volume_residual_csv))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hbmo",
        description="Threshold dynamics for curvature-accelerated interface motion")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("circle-table",
                       help="time-discretization convergence table for the circle")
    p.add_argument("--r0", type=float, default=1.0)
    p.add_argument("--v0", type=float, default=0.0)
    p.add_argument("--base-n", type=int, default=10)
    p.add_argument("--levels", type=int, default=8)
    p.add_argument("--refinement", type=int, default=4)
    p.add_argument("-o", "--output", default=None, help="CSV path (default stdout)")
    p.set_defaults(handler=cmd_circle_table)

    p = sub.add_parser("converge",
                       help="grid-refinement study of the shrinking circle")
    p.add_argument("--mode", choices=experiments.MODES, required=True)
    p.add_argument("--grids", default="16,32,64,128,256",
                   help="comma-separated ascending resolutions")
    p.add_argument("--r0", type=float, default=0.3)
    p.add_argument("--steps-exp", type=int, default=9)
    p.add_argument("--substeps", type=int, default=64)
    p.add_argument("--radius-method", default="endpoint",
                   choices=("endpoint", "midpoint-length", "midpoint-uniform"))
    p.add_argument("-o", "--output", default=None, help="CSV path (default stdout)")
    p.set_defaults(handler=cmd_converge)

    p = sub.add_parser("evolve", help="run a configured evolution")
    p.add_argument("config", help="run-configuration file")
    p.set_defaults(handler=cmd_evolve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ConvergenceError, ExtinctInterfaceError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
