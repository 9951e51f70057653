"""Interface extraction and exact signed-distance reconstruction.

The zero level set of a nodal field is located by splitting every grid
cell into two triangles along the fixed lower-left to upper-right diagonal
and intersecting the linear interpolant of each triangle with zero.  The
fixed diagonal makes runs reproducible (the split of a square lattice into
triangles is otherwise ambiguous); note it is symmetric under transposing
the axes but not under mirroring a single axis.

Distances from grid nodes to the extracted polyline are computed exactly
(point-to-segment, not point-to-vertex): a k-nearest-midpoints query
proposes candidate segments, a conservative radius certificate detects the
rare nodes where the proposal could miss, and those are finished with a
ball query.  No fast-marching style approximation is involved anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.spatial import cKDTree

from .backend import kernels
from .errors import ConfigurationError, ExtinctInterfaceError
from .grid import Grid2D, ScalarField

FRAME_SCHEMA = "hbmo-frame-v1"

# sign classification of nodal values: exact zeros count as inside, realised
# by nudging them to +1e-14 * max|f| before comparing
ZERO_NUDGE = 1e-14
DEGENERATE_FRACTION = 1e-12


@dataclass
class Interface:
    """Oriented line segments (p -> q, positive side on the left)."""

    p: NDArray[np.float64]
    q: NDArray[np.float64]

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=np.float64).reshape(-1, 2)
        self.q = np.asarray(self.q, dtype=np.float64).reshape(-1, 2)
        if self.p.shape != self.q.shape:
            raise ConfigurationError("interface endpoint arrays differ in shape")

    @property
    def n_segments(self) -> int:
        return len(self.p)

    @property
    def is_empty(self) -> bool:
        return len(self.p) == 0

    @property
    def midpoints(self) -> NDArray[np.float64]:
        return 0.5 * (self.p + self.q)

    @property
    def lengths(self) -> NDArray[np.float64]:
        return np.linalg.norm(self.q - self.p, axis=1)

    @property
    def total_length(self) -> float:
        return float(self.lengths.sum())

    @classmethod
    def empty(cls) -> "Interface":
        return cls(np.zeros((0, 2)), np.zeros((0, 2)))


def save_interface(path, iface: Interface, time: float | None = None) -> None:
    """Frame file: comment header with the frame time, one segment per line."""
    with open(path, "w") as fh:
        fh.write(f"# schema: {FRAME_SCHEMA}\n")
        if time is not None:
            fh.write(f"# t={time!r}\n")
        fh.write("x1,y1,x2,y2\n")
        for (px, py), (qx, qy) in zip(iface.p, iface.q):
            fh.write(f"{px!r},{py!r},{qx!r},{qy!r}\n")


def load_interface(path) -> Interface:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or line.startswith("x1"):
                continue
            rows.append([float(t) for t in line.split(",")])
    if not rows:
        return Interface.empty()
    arr = np.asarray(rows)
    return Interface(arr[:, :2], arr[:, 2:])


def _triangle_zero_segments(P0, P1, P2, w0, w1, w2, out_p, out_q):
    """Zero-set chords of the linear interpolant on a batch of triangles.

    P* are (m, 2) vertex positions, w* the (already nudged) vertex values.
    Appends (p, q) endpoint blocks to the output lists, oriented so the
    positive side lies to the left of p -> q.
    """
    s0, s1, s2 = w0 > 0, w1 > 0, w2 > 0
    pos = (P0, P1, P2)
    val = (w0, w1, w2)
    cases = (
        ((s0 != s1) & (s1 == s2), (0, 1), (0, 2)),
        ((s1 != s0) & (s0 == s2), (0, 1), (1, 2)),
        ((s2 != s0) & (s0 == s1), (0, 2), (1, 2)),
    )
    for mask, e1, e2 in cases:
        if not mask.any():
            continue
        ends = []
        for ea, eb in (e1, e2):
            fa, fb = val[ea][mask], val[eb][mask]
            t = (fa / (fa - fb))[:, None]
            ends.append(pos[ea][mask] + t * (pos[eb][mask] - pos[ea][mask]))
        p, q = ends
        # orient: the interpolant gradient points into the positive region
        e01 = pos[1][mask] - pos[0][mask]
        e02 = pos[2][mask] - pos[0][mask]
        det = e01[:, 0] * e02[:, 1] - e01[:, 1] * e02[:, 0]
        dv1 = val[1][mask] - val[0][mask]
        dv2 = val[2][mask] - val[0][mask]
        gx = (e02[:, 1] * dv1 - e01[:, 1] * dv2) / det
        gy = (-e02[:, 0] * dv1 + e01[:, 0] * dv2) / det
        seg = q - p
        flip = seg[:, 0] * gy - seg[:, 1] * gx < 0
        p[flip], q[flip] = q[flip].copy(), p[flip].copy()
        out_p.append(p)
        out_q.append(q)


def extract_interface(f: ScalarField) -> Interface:
    """Marching-triangles zero level set of the field.

    An empty result is not an error; it signals that the phase is extinct.
    """
    g = f.grid
    v = f.values
    vmax = float(np.max(np.abs(v)))
    if vmax == 0.0:
        return Interface.empty()
    ve = np.where(v == 0.0, ZERO_NUDGE * vmax, v)
    if not (np.any(ve > 0) and np.any(ve < 0)):
        return Interface.empty()
    X, Y = g.meshgrid()
    # cell corners: a=(i,j) b=(i+1,j) c=(i+1,j+1) d=(i,j+1)
    va, vb = ve[:-1, :-1].ravel(), ve[:-1, 1:].ravel()
    vc, vd = ve[1:, 1:].ravel(), ve[1:, :-1].ravel()
    Pa = np.column_stack([X[:-1, :-1].ravel(), Y[:-1, :-1].ravel()])
    Pb = np.column_stack([X[:-1, 1:].ravel(), Y[:-1, 1:].ravel()])
    Pc = np.column_stack([X[1:, 1:].ravel(), Y[1:, 1:].ravel()])
    Pd = np.column_stack([X[1:, :-1].ravel(), Y[1:, :-1].ravel()])
    out_p: list[NDArray[np.float64]] = []
    out_q: list[NDArray[np.float64]] = []
    _triangle_zero_segments(Pa, Pb, Pc, va, vb, vc, out_p, out_q)
    _triangle_zero_segments(Pa, Pc, Pd, va, vc, vd, out_p, out_q)
    if not out_p:
        return Interface.empty()
    p = np.vstack(out_p)
    q = np.vstack(out_q)
    keep = np.linalg.norm(q - p, axis=1) > DEGENERATE_FRACTION * min(g.hx, g.hy)
    return Interface(p[keep], q[keep])


def _point_to_segments(points: NDArray, a: NDArray, b: NDArray) -> NDArray:
    """Exact distances from points (m, 2) to segments a,b (m, k, 2) -> (m, k)."""
    ab = b - a
    denom = np.einsum("...i,...i->...", ab, ab)
    ap = points[:, None, :] - a
    t = np.einsum("...i,...i->...", ap, ab) / np.maximum(denom, 1e-300)
    np.clip(t, 0.0, 1.0, out=t)
    closest = a + t[..., None] * ab
    diff = points[:, None, :] - closest
    return np.sqrt(np.einsum("...i,...i->...", diff, diff))


def nearest_segment(points: NDArray, iface: Interface) -> tuple[NDArray, NDArray]:
    """Exact distance and index of the nearest segment for each point.

    Candidates come from the k nearest segment midpoints, with k grown in
    stages for the points whose certificate fails: only segments with a
    midpoint within ``best + max_len/2`` can beat the best candidate, so
    once the k-th midpoint lies beyond that radius the answer is proven.
    Exact distance ties resolve to the lowest segment index, which makes
    cut-locus assignments reproducible.
    """
    if iface.is_empty:
        raise ExtinctInterfaceError("phase extinct: no interface segments")
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    n_pts = len(points)
    n_seg = iface.n_segments
    half_len = 0.5 * float(iface.lengths.max())
    tree = cKDTree(iface.midpoints)
    best = np.full(n_pts, np.inf)
    cand_idx = np.full(n_pts, n_seg, dtype=np.intp)
    todo = np.arange(n_pts)
    k = 8
    while len(todo):
        k_eff = min(k, n_seg)
        dmid, idx = tree.query(points[todo], k=k_eff)
        if k_eff == 1:
            dmid = dmid[:, None]
            idx = idx[:, None]
        d_cand = _point_to_segments(points[todo], iface.p[idx], iface.q[idx])
        b = d_cand.min(axis=1)
        best[todo] = b
        cand_idx[todo] = np.where(d_cand == b[:, None], idx, n_seg).min(axis=1)
        if k_eff == n_seg:
            break
        proven = dmid[:, -1] >= b + half_len
        todo = todo[~proven]
        k *= 8
    return best, cand_idx


def nearest_segment_grid(grid: Grid2D, iface: Interface) -> tuple[NDArray, NDArray]:
    """`nearest_segment` over all grid nodes, shaped (ny, nx).

    Dispatches to the compiled bucket-search kernel when it is available;
    both paths return the exact distance and the same tie rule.
    """
    if iface.is_empty:
        raise ExtinctInterfaceError("phase extinct: no interface segments")
    if hasattr(kernels, "segment_distance"):
        return kernels.segment_distance(iface.p, iface.q, grid.nx, grid.ny,
                                        grid.hx, grid.hy, grid.origin[0],
                                        grid.origin[1])
    dist, idx = nearest_segment(grid.nodes(), iface)
    return dist.reshape(grid.shape), idx.reshape(grid.shape)


def signed_distance_field(iface: Interface, sign_source: ScalarField) -> ScalarField:
    """Exact Euclidean distance to the interface, signed by ``sign_source``.

    Nodes where the sign source is exactly zero count as inside, matching
    the nudge rule used during extraction.
    """
    if iface.is_empty:
        raise ExtinctInterfaceError("phase extinct: no interface segments")
    g = sign_source.grid
    dist, _ = nearest_segment_grid(g, iface)
    sign = np.where(sign_source.values >= 0.0, 1.0, -1.0)
    return ScalarField(g, sign * dist)


def circle_distance(center: tuple[float, float], r: float, grid: Grid2D) -> ScalarField:
    """Ideal signed distance to a circle, positive inside: r - |x - center|."""
    if r <= 0:
        raise ConfigurationError(f"circle radius must be positive, got {r}")
    X, Y = grid.meshgrid()
    return ScalarField(grid, r - np.hypot(X - center[0], Y - center[1]))


def velocity_extension(iface: Interface, v_on_segments, grid: Grid2D,
                       band: float) -> ScalarField:
    """Extend per-segment speed samples to the grid by nearest segment.

    Every node, in or out of the band, receives the value carried by its
    nearest segment; beyond the band this is exactly the constant
    continuation along normal rays, so the wave solver never reads
    undefined data.  ``band`` must cover the propagation distance of the
    solve that follows.
    """
    if iface.is_empty:
        raise ExtinctInterfaceError("phase extinct: no interface segments")
    if band <= 0:
        raise ConfigurationError(f"extension band must be positive, got {band}")
    v = np.asarray(v_on_segments, dtype=np.float64).ravel()
    if len(v) != iface.n_segments:
        raise ConfigurationError(
            f"{len(v)} speed samples for {iface.n_segments} segments")
    _, idx = nearest_segment_grid(grid, iface)
    return ScalarField(grid, v[idx])


def average_radius(iface: Interface, center: tuple[float, float],
                   method: str = "endpoint") -> float:
    """Average distance of the interface polyline from ``center``.

    Methods:
      * ``endpoint``        length-weighted mean of the two endpoint
                            distances of each segment (default);
      * ``midpoint-length`` length-weighted mean of midpoint distances;
      * ``midpoint-uniform`` plain mean of midpoint distances.

    Chord midpoints of a circular arc sit inside the circle by l^2/(8r);
    fed back through repeated redistancing that bias compounds, so the
    endpoint form (whose points lie on the interpolated zero set itself) is
    the default.  Returns 0.0 for an empty (extinct) interface.
    """
    if iface.is_empty:
        return 0.0
    c = np.asarray(center, dtype=np.float64)
    lens = iface.lengths
    if method == "endpoint":
        d = 0.5 * (np.linalg.norm(iface.p - c, axis=1)
                   + np.linalg.norm(iface.q - c, axis=1))
        return float(np.sum(lens * d) / np.sum(lens))
    if method == "midpoint-length":
        d = np.linalg.norm(iface.midpoints - c, axis=1)
        return float(np.sum(lens * d) / np.sum(lens))
    if method == "midpoint-uniform":
        d = np.linalg.norm(iface.midpoints - c, axis=1)
        return float(np.mean(d))
    raise ConfigurationError(f"unknown average_radius method {method!r}")


def min_wall_distance(iface: Interface, grid: Grid2D) -> float:
    """Smallest distance from any segment endpoint to the domain boundary."""
    if iface.is_empty:
        return np.inf
    pts = np.vstack([iface.p, iface.q])
    ox, oy = grid.origin
    lx, ly = grid.extent
    dx = np.minimum(pts[:, 0] - ox, ox + lx - pts[:, 0])
    dy = np.minimum(pts[:, 1] - oy, oy + ly - pts[:, 1])
    return float(np.minimum(dx, dy).min())
