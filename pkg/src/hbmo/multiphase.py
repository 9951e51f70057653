"""N-phase evolution: one wave equation per simplex channel, thresholded.

Phases are labelled by the vertices of a regular simplex in R^(N-1); a
vector field built from clamped per-phase distance ramps encodes the whole
partition, the channels evolve independently under the wave equation, and
nodes are reassigned to the phase whose label vector has the largest
projection.  For N = 2 everything collapses to the scalar two-phase
algorithm acting on the single channel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .backend import kernels
from .errors import ConfigurationError
from .geometry import Interface, extract_interface, signed_distance_field
from .grid import Grid2D, ScalarField, VectorField
from .wave import DEFAULT_SUBSTEPS, resolve_wave_params, solve

PHASES_SCHEMA = "hbmo-phases-v1"

STEP_C2 = 2.0


@dataclass(frozen=True)
class SimplexBasis:
    """Unit label vectors p_1..p_N in R^(N-1) with pairwise dot -1/(N-1)."""

    vectors: NDArray[np.float64]  # (N, N-1)

    @property
    def n_phases(self) -> int:
        return self.vectors.shape[0]

    @property
    def gram(self) -> NDArray[np.float64]:
        return self.vectors @ self.vectors.T


def simplex_vectors(n_phases: int) -> SimplexBasis:
    """Closed-form regular simplex directions.

    Row k of the Helmert matrix, (1,...,1,-k,0,...)/sqrt(k(k+1)), spans the
    zero-sum hyperplane of R^N; projecting the standard basis onto it and
    normalising gives vectors that satisfy the simplex identities exactly
    up to round-off.
    """
    if n_phases < 2:
        raise ConfigurationError(f"need at least 2 phases, got {n_phases}")
    n = n_phases
    helmert = np.zeros((n - 1, n))
    for k in range(1, n):
        helmert[k - 1, :k] = 1.0
        helmert[k - 1, k] = -k
        helmert[k - 1] /= np.sqrt(k * (k + 1))
    # p_i = H e_i / sqrt(1 - 1/N)
    vectors = (helmert / np.sqrt(1.0 - 1.0 / n)).T
    return SimplexBasis(np.ascontiguousarray(vectors))


@dataclass
class PhaseSet:
    """Partition masks plus per-phase boundaries and signed distances.

    ``distances[i]`` is None exactly when phase i has no boundary on the
    grid (it covers everything or nothing); ``interfaces[i]`` is empty then.
    """

    basis: SimplexBasis
    grid: Grid2D
    masks: NDArray[np.bool_]            # (N, ny, nx)
    interfaces: list[Interface]
    distances: list[ScalarField | None]

    @property
    def labels(self) -> NDArray[np.intp]:
        return np.argmax(self.masks, axis=0)

    def measures(self) -> NDArray[np.float64]:
        """Phase areas: node count times the cell area."""
        cell = self.grid.hx * self.grid.hy
        return self.masks.sum(axis=(1, 2)) * cell

    def save_labels_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(f"# schema: {PHASES_SCHEMA}\n")
            fh.write(f"# nx={self.grid.nx} ny={self.grid.ny}\n")
            np.savetxt(fh, self.labels, fmt="%d", delimiter=",")


def load_labels_csv(path) -> NDArray[np.intp]:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            rows.append([int(x) for x in line.split(",")])
    return np.asarray(rows, dtype=np.intp)


def projections(u: VectorField, basis: SimplexBasis) -> NDArray[np.float64]:
    """Per-phase projections u . p_i, shaped (N, ny, nx)."""
    return np.tensordot(basis.vectors, u.as_array(), axes=([1], [0]))


def phase_set_from_projections(proj: NDArray[np.float64], basis: SimplexBasis,
                               grid: Grid2D) -> PhaseSet:
    """Assign each node to the largest projection (ties: lowest index) and
    rebuild boundaries and exact distances from the projection margins.

    The margin field of phase i, ``proj_i - max_{k != i} proj_k``, is
    positive exactly on phase i, so its zero level set is the phase
    boundary with sub-cell accuracy and its sign encodes membership.
    """
    n = basis.n_phases
    labels = np.argmax(proj, axis=0)
    masks = labels == np.arange(n)[:, None, None]
    top2 = np.partition(proj, -2, axis=0)
    largest, second = top2[-1], top2[-2]
    interfaces: list[Interface] = []
    distances: list[ScalarField | None] = []
    for i in range(n):
        margin = ScalarField(grid, np.where(masks[i], proj[i] - second,
                                            proj[i] - largest))
        iface = extract_interface(margin)
        interfaces.append(iface)
        if iface.is_empty:
            distances.append(None)
        else:
            distances.append(signed_distance_field(iface, margin))
    return PhaseSet(basis=basis, grid=grid, masks=masks,
                    interfaces=interfaces, distances=distances)


def threshold(u: VectorField, basis: SimplexBasis) -> PhaseSet:
    """Nodewise argmax of u . p_i over the phases."""
    if u.n_channels != basis.n_phases - 1:
        raise ConfigurationError(
            f"{u.n_channels} channels cannot encode {basis.n_phases} phases")
    return phase_set_from_projections(projections(u, basis), basis, u.grid)


def phase_set_from_labels(labels: NDArray, basis: SimplexBasis,
                          grid: Grid2D) -> PhaseSet:
    """Initial partition from a nodal label array (values 0..N-1).

    Boundaries come from the +/-1 indicator of each mask, which is all the
    information a raw label grid carries.
    """
    labels = np.asarray(labels, dtype=np.intp)
    if labels.shape != grid.shape:
        raise ConfigurationError(
            f"label array shape {labels.shape} does not match grid {grid.shape}")
    n = basis.n_phases
    if labels.min() < 0 or labels.max() >= n:
        raise ConfigurationError(f"labels must lie in 0..{n - 1}")
    masks = labels == np.arange(n)[:, None, None]
    interfaces: list[Interface] = []
    distances: list[ScalarField | None] = []
    for i in range(n):
        indicator = ScalarField(grid, np.where(masks[i], 1.0, -1.0))
        iface = extract_interface(indicator)
        interfaces.append(iface)
        distances.append(None if iface.is_empty
                         else signed_distance_field(iface, indicator))
    return PhaseSet(basis=basis, grid=grid, masks=masks,
                    interfaces=interfaces, distances=distances)


def build_z_field(phases: PhaseSet, eps: float) -> VectorField:
    """Simplex-label field with a linear distance ramp of width ``eps``.

    Each phase contributes ``p_i`` where its distance exceeds eps/2 and the
    ramp ``(eps/2 + d_i)/eps * p_i`` inside its band; the contributions of
    all phases are summed.  A phase without a boundary contributes its
    plain mask indicator.
    """
    g = phases.grid
    if eps <= 2.0 * max(g.hx, g.hy):
        raise ConfigurationError(
            f"interpolation width {eps:.4g} must exceed two cells "
            f"({2 * max(g.hx, g.hy):.4g}) to be resolved")
    n = phases.basis.n_phases
    weights = np.zeros((n,) + g.shape)
    for i in range(n):
        d = phases.distances[i]
        if d is None:
            weights[i] = phases.masks[i].astype(float)
            continue
        dv = d.values
        weights[i] = np.where(dv > eps / 2, 1.0, 0.0)
        band = np.abs(dv) <= eps / 2
        weights[i][band] = (eps / 2 + dv[band]) / eps
    z = np.tensordot(phases.basis.vectors, weights, axes=([0], [0]))
    return VectorField.from_array(g, z)


def solve_channels(z_curr: VectorField, z_prev: VectorField, threshold_dt: float,
                   substeps: int = DEFAULT_SUBSTEPS) -> VectorField:
    """Evolve ``u_tt = 2 lap(u)`` channelwise from ``2 z_curr - z_prev``.

    Channels are independent linear problems; solving them separately or
    jointly is bit-identical.
    """
    grid = z_curr.grid
    if z_prev.grid != grid or z_prev.n_channels != z_curr.n_channels:
        raise ConfigurationError("z-field pair must share grid and channels")
    params = resolve_wave_params(threshold_dt, grid, c2=STEP_C2, substeps=substeps)
    out = []
    for zc, zp in zip(z_curr.channels, z_prev.channels):
        u0 = ScalarField(grid, 2.0 * zc.values - zp.values)
        out.append(solve(u0, None, params))
    return VectorField(grid, out)


def multiphase_step(z_curr: VectorField, z_prev: VectorField, basis: SimplexBasis,
                    threshold_dt: float,
                    substeps: int = DEFAULT_SUBSTEPS) -> PhaseSet:
    """One wave solve plus thresholding; a vanished phase is recorded in the
    returned PhaseSet (empty mask), never raised."""
    u = solve_channels(z_curr, z_prev, threshold_dt, substeps)
    return threshold(u, basis)


@dataclass
class MultiphaseTrajectory:
    times: list[float]
    phase_interfaces: list[list[Interface]]
    measures: list[NDArray[np.float64]]


def run_multiphase(initial: PhaseSet, eps: float, threshold_dt: float,
                   n_steps: int, substeps: int = DEFAULT_SUBSTEPS,
                   stepper=None) -> MultiphaseTrajectory:
    """Drive the phase evolution; ``stepper`` may wrap/replace the plain step
    (the volume-constrained variant hooks in here)."""
    traj = MultiphaseTrajectory(times=[0.0],
                                phase_interfaces=[initial.interfaces],
                                measures=[initial.measures()])
    z_curr = build_z_field(initial, eps)
    z_prev = z_curr  # zero initial rate: no previous history yet
    for k in range(1, n_steps + 1):
        if stepper is None:
            ps = multiphase_step(z_curr, z_prev, initial.basis, threshold_dt,
                                 substeps)
        else:
            ps = stepper(z_curr, z_prev)
        z_prev, z_curr = z_curr, build_z_field(ps, eps)
        traj.times.append(k * threshold_dt)
        traj.phase_interfaces.append(ps.interfaces)
        traj.measures.append(ps.measures())
    return traj
