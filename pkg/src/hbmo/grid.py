"""Uniform rectangular grid, nodal fields and the Neumann Laplacian.

Value layout
------------
A ``ScalarField`` stores its samples in a C-contiguous ``(ny, nx)`` array
``values`` where ``values[j, i]`` is the sample at node ``(i, j)``, i.e. the
x-index ``i`` runs fastest in memory.  Node ``(i, j)`` sits at
``origin + (i*hx, j*hy)``; positions are always computed as that product,
never accumulated, so they are bit-reproducible.

Boundary convention
-------------------
All differential operators use mirror ghost nodes (the ghost value equals
the first interior neighbour), which realises a zero normal derivative at
second order and keeps the discrete Laplacian compatible: its trapezoid-
weighted sum vanishes identically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .backend import kernels
from .errors import ConfigurationError

FIELD_SCHEMA = "hbmo-field-v1"


@dataclass(frozen=True)
class Grid2D:
    """Uniform lattice of ``nx`` by ``ny`` nodes."""

    nx: int
    ny: int
    hx: float
    hy: float
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise ConfigurationError(
                f"grid needs at least 3 nodes per axis, got {self.nx}x{self.ny}")
        if self.hx <= 0 or self.hy <= 0:
            raise ConfigurationError("grid spacing must be positive")

    @property
    def shape(self) -> tuple[int, int]:
        """Array shape of a nodal field: (ny, nx)."""
        return (self.ny, self.nx)

    @property
    def n_nodes(self) -> int:
        return self.nx * self.ny

    @property
    def extent(self) -> tuple[float, float]:
        """Side lengths (Lx, Ly)."""
        return ((self.nx - 1) * self.hx, (self.ny - 1) * self.hy)

    def node_xs(self) -> NDArray[np.float64]:
        return self.origin[0] + np.arange(self.nx) * self.hx

    def node_ys(self) -> NDArray[np.float64]:
        return self.origin[1] + np.arange(self.ny) * self.hy

    def meshgrid(self) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        """Node coordinates as (X, Y), each shaped (ny, nx)."""
        return np.meshgrid(self.node_xs(), self.node_ys(), indexing="xy")

    def nodes(self) -> NDArray[np.float64]:
        """All node positions as an (n_nodes, 2) array in value order."""
        X, Y = self.meshgrid()
        return np.column_stack([X.ravel(), Y.ravel()])


def make_grid(n: int, domain: float) -> Grid2D:
    """Square grid of ``n`` nodes per axis covering ``[0, domain]^2``."""
    if n < 3:
        raise ConfigurationError(f"grid needs n >= 3 nodes per axis, got {n}")
    if domain <= 0:
        raise ConfigurationError(f"domain side must be positive, got {domain}")
    h = domain / (n - 1)
    return Grid2D(nx=n, ny=n, hx=h, hy=h)


@dataclass
class ScalarField:
    """Nodal samples over a grid; see the module docstring for the layout."""

    grid: Grid2D
    values: NDArray[np.float64]

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.shape:
            raise ConfigurationError(
                f"field shape {self.values.shape} does not match grid {self.grid.shape}")

    def check_finite(self) -> "ScalarField":
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite values")
        return self

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())


@dataclass
class VectorField:
    """A stack of scalar channels over one shared grid (N phases -> N-1 channels)."""

    grid: Grid2D
    channels: list[ScalarField] = field(default_factory=list)

    def __post_init__(self):
        if not self.channels:
            raise ConfigurationError("vector field needs at least one channel")
        for ch in self.channels:
            if ch.grid != self.grid:
                raise ConfigurationError("all channels must share the grid")

    @property
    def n_channels(self) -> int:
        return len(self.channels)

    def as_array(self) -> NDArray[np.float64]:
        """Channels stacked into (n_channels, ny, nx)."""
        return np.stack([ch.values for ch in self.channels])

    @classmethod
    def from_array(cls, grid: Grid2D, arr: NDArray[np.float64]) -> "VectorField":
        return cls(grid, [ScalarField(grid, a) for a in arr])

    def copy(self) -> "VectorField":
        return VectorField(self.grid, [ch.copy() for ch in self.channels])


def laplacian_neumann(f: ScalarField) -> ScalarField:
    """Five-point Laplacian with mirror ghosts; exact on quadratics inside."""
    out = np.empty_like(f.values)
    kernels.laplacian(f.values, f.grid.hx, f.grid.hy, out)
    return ScalarField(f.grid, out)


def quadrature_weights(grid: Grid2D) -> NDArray[np.float64]:
    """Trapezoid weights (1/2 on edges, 1/4 at corners), shaped like a field."""
    wx = np.ones(grid.nx)
    wx[0] = wx[-1] = 0.5
    wy = np.ones(grid.ny)
    wy[0] = wy[-1] = 0.5
    return np.outer(wy, wx)


def integrate(f: ScalarField) -> float:
    """Trapezoid quadrature of the field over the domain."""
    w = quadrature_weights(f.grid)
    return float(np.sum(w * f.values) * f.grid.hx * f.grid.hy)


def save_field(path, f: ScalarField) -> None:
    """Plain-text snapshot: header line, then one value per line in layout order."""
    g = f.grid
    with open(path, "w") as fh:
        fh.write(f"# schema: {FIELD_SCHEMA}\n")
        fh.write(f"{g.nx} {g.ny} {g.hx!r} {g.hy!r} {g.origin[0]!r} {g.origin[1]!r}\n")
        for v in f.values.ravel():
            fh.write(f"{v!r}\n")


def load_field(path) -> ScalarField:
    with open(path) as fh:
        header = fh.readline().strip()
        if FIELD_SCHEMA not in header:
            raise ConfigurationError(f"{path}: not a {FIELD_SCHEMA} snapshot")
        parts = fh.readline().split()
        nx, ny = int(parts[0]), int(parts[1])
        hx, hy, ox, oy = map(float, parts[2:6])
        values = np.loadtxt(fh).reshape(ny, nx)
    return ScalarField(Grid2D(nx, ny, hx, hy, (ox, oy)), values)


def save_pgm(path, f: ScalarField) -> None:
    """8-bit PGM raster; [min, max] mapped linearly onto [0, 255]."""
    v = f.values
    lo, hi = float(v.min()), float(v.max())
    scale = 255.0 / (hi - lo) if hi > lo else 0.0
    pix = np.clip((v - lo) * scale, 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{f.grid.nx} {f.grid.ny}\n255\n".encode())
        fh.write(pix.tobytes())
