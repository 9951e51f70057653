"""Run-configuration files: dotted key = value lines.

Example::

    # two-phase shrinking circle
    mode = scalar
    grid.n = 256
    domain = 1.0
    initial.shape = circle
    initial.center = 0.5,0.5
    initial.radius = 0.3
    initial.velocity = 0.0
    hbmo.steps = 512
    solver.inner_substeps = 64
    output.frames_dir = frames
    output.radii_csv = radii.csv

Validation never stops at the first problem: every offending key is
reported, with its key path, in one error.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigurationError

MODES = ("scalar", "multiphase", "volume")
SHAPES = ("circle", "polyline-file", "mask-file", "bubbles")

_KNOWN_KEYS = {
    "mode", "grid.n", "domain",
    "initial.shape", "initial.center", "initial.radius",
    "initial.polyline_file", "initial.mask_file", "initial.bubbles",
    "initial.velocity", "initial.velocity_file", "initial.smoothing_time",
    "hbmo.threshold_dt", "hbmo.steps",
    "solver.inner_substeps",
    "output.frames_dir", "output.radii_csv",
    "phases.count", "phases.mask_file",
    "multiphase.eps",
    "volume.targets", "volume.tol", "volume.max_sweeps",
    "volume.penalty_eps", "volume.residual_csv",
}


@dataclass
class RunConfig:
    mode: str = "scalar"
    grid_n: int = 0
    domain: float = 1.0
    initial_shape: str = "circle"
    initial_center: tuple[float, float] = (0.5, 0.5)
    initial_radius: float | None = None
    initial_polyline_file: str | None = None
    initial_mask_file: str | None = None
    initial_bubbles: tuple[tuple[float, float, float], ...] = ()
    initial_velocity: float = 0.0
    initial_velocity_file: str | None = None
    initial_smoothing_time: float | None = None
    threshold_dt: float | None = None
    steps: int | None = None
    solver_substeps: int = 64
    frames_dir: str | None = None
    radii_csv: str | None = None
    phases_count: int | None = None
    phases_mask_file: str | None = None
    multiphase_eps: float | None = None
    volume_targets: tuple[float, ...] | str | None = None
    volume_tol: float | None = None
    volume_max_sweeps: int = 50
    volume_penalty_eps: float = 1e-3
    volume_residual_csv: str | None = None
    base_dir: Path = field(default_factory=Path)

    def resolve_path(self, name: str | None) -> Path | None:
        if name is None:
            return None
        p = Path(name)
        return p if p.is_absolute() else self.base_dir / p


def parse_config_text(text: str) -> dict[str, str]:
    """key = value lines; blank lines and full-line # comments ignored."""
    values: dict[str, str] = {}
    errors: list[str] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value', got {line!r}")
            continue
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key in values:
            errors.append(f"line {lineno}: duplicate key {key!r}")
            continue
        values[key] = value
    if errors:
        raise ConfigurationError("config syntax problems:\n  " + "\n  ".join(errors))
    return values


def _parse_pair(value: str) -> tuple[float, float]:
    parts = [float(t) for t in value.split(",")]
    if len(parts) != 2:
        raise ValueError("expected 'x,y'")
    return (parts[0], parts[1])


def _parse_bubbles(value: str) -> tuple[tuple[float, float, float], ...]:
    out = []
    for chunk in value.split(";"):
        parts = [float(t) for t in chunk.split(",")]
        if len(parts) != 3:
            raise ValueError("expected 'cx,cy,r' triples separated by ';'")
        out.append((parts[0], parts[1], parts[2]))
    return tuple(out)


def load_run_config(path) -> RunConfig:
    """Parse and validate a run configuration file."""
    path = Path(path)
    values = parse_config_text(path.read_text())
    cfg = RunConfig(base_dir=path.parent)
    errors: list[str] = []

    def take(key: str, convert, attr: str) -> None:
        if key not in values:
            return
        raw = values.pop(key)
        try:
            setattr(cfg, attr, convert(raw))
        except (ValueError, TypeError) as exc:
            errors.append(f"{key}: cannot parse {raw!r} ({exc})")

    take("mode", str, "mode")
    take("grid.n", int, "grid_n")
    take("domain", float, "domain")
    take("initial.shape", str, "initial_shape")
    take("initial.center", _parse_pair, "initial_center")
    take("initial.radius", float, "initial_radius")
    take("initial.polyline_file", str, "initial_polyline_file")
    take("initial.mask_file", str, "initial_mask_file")
    take("initial.bubbles", _parse_bubbles, "initial_bubbles")
    take("initial.velocity", float, "initial_velocity")
    take("initial.velocity_file", str, "initial_velocity_file")
    take("initial.smoothing_time", float, "initial_smoothing_time")
    take("hbmo.threshold_dt", float, "threshold_dt")
    take("hbmo.steps", int, "steps")
    take("solver.inner_substeps", int, "solver_substeps")
    take("output.frames_dir", str, "frames_dir")
    take("output.radii_csv", str, "radii_csv")
    take("phases.count", int, "phases_count")
    take("phases.mask_file", str, "phases_mask_file")
    take("multiphase.eps", float, "multiphase_eps")

    def parse_targets(raw: str):
        if raw == "from-initial":
            return raw
        return tuple(float(t) for t in raw.split(","))

    take("volume.targets", parse_targets, "volume_targets")
    take("volume.tol", float, "volume_tol")
    take("volume.max_sweeps", int, "volume_max_sweeps")
    take("volume.penalty_eps", float, "volume_penalty_eps")
    take("volume.residual_csv", str, "volume_residual_csv")

    for key in values:
        errors.append(f"{key}: unknown key")
    errors.extend(_validate(cfg))
    if errors:
        raise ConfigurationError(
            f"{path}: invalid configuration:\n  " + "\n  ".join(sorted(errors)))
    return cfg


def _validate(cfg: RunConfig) -> list[str]:
    errors: list[str] = []
    if cfg.mode not in MODES:
        errors.append(f"mode: must be one of {MODES}, got {cfg.mode!r}")
    if cfg.grid_n < 3:
        errors.append(f"grid.n: need at least 3 nodes per axis, got {cfg.grid_n}")
    if cfg.domain <= 0:
        errors.append(f"domain: must be positive, got {cfg.domain}")
    if cfg.initial_shape not in SHAPES:
        errors.append(f"initial.shape: must be one of {SHAPES}, "
                      f"got {cfg.initial_shape!r}")
    if cfg.initial_shape == "circle":
        if cfg.initial_radius is None:
            errors.append("initial.radius: required for initial.shape = circle")
        elif cfg.initial_radius <= 0:
            errors.append(f"initial.radius: must be positive, got {cfg.initial_radius}")
    if cfg.initial_shape == "polyline-file" and cfg.initial_polyline_file is None:
        errors.append("initial.polyline_file: required for polyline-file shape")
    if cfg.initial_shape == "mask-file" and cfg.initial_mask_file is None:
        errors.append("initial.mask_file: required for mask-file shape")
    if cfg.initial_shape == "bubbles" and not cfg.initial_bubbles:
        errors.append("initial.bubbles: required for bubbles shape")
    if cfg.initial_smoothing_time is not None and cfg.initial_smoothing_time < 0:
        errors.append("initial.smoothing_time: must be non-negative")
    if cfg.solver_substeps < 1:
        errors.append("solver.inner_substeps: must be at least 1")

    circle_like = cfg.initial_shape == "circle" and cfg.initial_radius
    if cfg.threshold_dt is None and cfg.steps is None:
        errors.append("hbmo.threshold_dt or hbmo.steps: at least one is required")
    elif cfg.threshold_dt is None and not circle_like:
        errors.append("hbmo.threshold_dt: required unless the circle's "
                      "extinction time can derive it (initial.shape = circle)")
    elif cfg.steps is None and not circle_like:
        errors.append("hbmo.steps: required unless the circle's "
                      "extinction time can derive it (initial.shape = circle)")
    if cfg.threshold_dt is not None and cfg.threshold_dt <= 0:
        errors.append(f"hbmo.threshold_dt: must be positive, got {cfg.threshold_dt}")
    if cfg.steps is not None and cfg.steps < 1:
        errors.append(f"hbmo.steps: must be at least 1, got {cfg.steps}")

    if cfg.mode in ("multiphase", "volume"):
        shape_gives_phases = (cfg.initial_shape in ("circle", "bubbles")
                              or cfg.phases_mask_file is not None)
        if not shape_gives_phases:
            errors.append("phases.mask_file: multiphase runs need a label grid "
                          "(or a circle/bubbles initial shape)")
        if cfg.phases_count is not None and cfg.phases_count < 2:
            errors.append(f"phases.count: need at least 2, got {cfg.phases_count}")
    if cfg.mode == "volume":
        if cfg.volume_targets is None:
            errors.append("volume.targets: required for mode = volume "
                          "(list or 'from-initial')")
        elif (not isinstance(cfg.volume_targets, str)
              and any(a <= 0 for a in cfg.volume_targets)):
            errors.append("volume.targets: areas must be positive")
        if cfg.volume_tol is not None and cfg.volume_tol <= 0:
            errors.append("volume.tol: must be positive")
        if cfg.volume_max_sweeps < 1:
            errors.append("volume.max_sweeps: must be at least 1")
        if cfg.volume_penalty_eps <= 0:
            errors.append("volume.penalty_eps: must be positive")
    return errors
