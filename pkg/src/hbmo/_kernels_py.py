"""NumPy implementations of the stencil kernels.

These mirror the compiled kernels in ``_kernels.pyx`` operation for
operation (same expression trees, same mirror-ghost boundary rule) so the
two backends agree to floating-point round-off.
"""

from __future__ import annotations

import numpy as np

NAME = "numpy"


def laplacian(f: np.ndarray, hx: float, hy: float, out: np.ndarray) -> None:
    """Five-point Laplacian with mirror ghosts, written into ``out``."""
    ihx2 = 1.0 / (hx * hx)
    ihy2 = 1.0 / (hy * hy)
    p = np.pad(f, 1, mode="reflect")
    np.copyto(out, (p[1:-1, 2:] + p[1:-1, :-2] - 2.0 * f) * ihx2
              + (p[2:, 1:-1] + p[:-2, 1:-1] - 2.0 * f) * ihy2)


def leapfrog(u_prev: np.ndarray, u_curr: np.ndarray, c2dt2: float,
             hx: float, hy: float, nsteps: int) -> tuple[np.ndarray, np.ndarray]:
    """Advance ``u_tt = c^2 lap(u)`` by ``nsteps`` central-difference steps.

    Returns the last two time levels; the inputs are not modified.
    """
    up = u_prev.copy()
    uc = u_curr.copy()
    lap = np.empty_like(uc)
    for _ in range(nsteps):
        laplacian(uc, hx, hy, lap)
        un = 2.0 * uc - up + c2dt2 * lap
        up, uc = uc, un
    return up, uc


def heat(u: np.ndarray, dt: float, hx: float, hy: float, nsteps: int) -> np.ndarray:
    """Forward-Euler heat steps ``u <- u + dt*lap(u)``; input left untouched."""
    v = u.copy()
    lap = np.empty_like(v)
    for _ in range(nsteps):
        laplacian(v, hx, hy, lap)
        v = v + dt * lap
    return v
