# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled stencil kernels: the hot loops of the wave and heat solvers.

Same contracts as ``_kernels_py``; the leapfrog fuses all inner substeps
into one C loop, which is what makes fine-grid runs cheap.
"""

import numpy as np

cimport numpy as cnp

NAME = "compiled"


cdef inline Py_ssize_t mirror(Py_ssize_t k, Py_ssize_t n) nogil:
    # mirror ghost: index -1 -> 1, index n -> n-2
    if k < 0:
        return 1
    if k >= n:
        return n - 2
    return k


cdef void _lap(double[:, ::1] f, double hx, double hy, double[:, ::1] out) nogil:
    cdef Py_ssize_t ny = f.shape[0], nx = f.shape[1]
    cdef Py_ssize_t i, j
    cdef double ihx2 = 1.0 / (hx * hx), ihy2 = 1.0 / (hy * hy)
    cdef Py_ssize_t jm, jp, im, ip
    for j in range(ny):
        jm = mirror(j - 1, ny)
        jp = mirror(j + 1, ny)
        for i in range(nx):
            im = mirror(i - 1, nx)
            ip = mirror(i + 1, nx)
            out[j, i] = (f[j, ip] + f[j, im] - 2.0 * f[j, i]) * ihx2 \
                      + (f[jp, i] + f[jm, i] - 2.0 * f[j, i]) * ihy2


def laplacian(double[:, ::1] f, double hx, double hy, double[:, ::1] out):
    """Five-point Laplacian with mirror ghosts, written into ``out``."""
    with nogil:
        _lap(f, hx, hy, out)


def leapfrog(double[:, ::1] u_prev, double[:, ::1] u_curr, double c2dt2,
             double hx, double hy, Py_ssize_t nsteps):
    """Advance ``u_tt = c^2 lap(u)`` by ``nsteps`` central-difference steps.

    Returns the last two time levels; the inputs are not modified.
    """
    cdef Py_ssize_t ny = u_curr.shape[0], nx = u_curr.shape[1]
    up_arr = np.array(u_prev, dtype=np.float64, copy=True)
    uc_arr = np.array(u_curr, dtype=np.float64, copy=True)
    un_arr = np.empty((ny, nx), dtype=np.float64)
    cdef double[:, ::1] up = up_arr, uc = uc_arr, un = un_arr
    cdef double[:, ::1] tmp
    cdef Py_ssize_t i, j, step
    cdef double ihx2 = 1.0 / (hx * hx), ihy2 = 1.0 / (hy * hy)
    cdef double lap
    cdef Py_ssize_t jm, jp, im, ip
    with nogil:
        for step in range(nsteps):
            for j in range(ny):
                jm = mirror(j - 1, ny)
                jp = mirror(j + 1, ny)
                for i in range(nx):
                    im = mirror(i - 1, nx)
                    ip = mirror(i + 1, nx)
                    lap = (uc[j, ip] + uc[j, im] - 2.0 * uc[j, i]) * ihx2 \
                        + (uc[jp, i] + uc[jm, i] - 2.0 * uc[j, i]) * ihy2
                    un[j, i] = 2.0 * uc[j, i] - up[j, i] + c2dt2 * lap
            tmp = up
            up = uc
            uc = un
            un = tmp
    return np.asarray(up).copy(), np.asarray(uc).copy()


def segment_distance(double[:, ::1] p, double[:, ::1] q,
                     Py_ssize_t nx, Py_ssize_t ny, double hx, double hy,
                     double ox, double oy):
    """Exact distance and nearest-segment index for every grid node.

    Segments are registered in a uniform bucket lattice over their bounding
    box; each node seeds an upper bound from its already-solved neighbour
    (distance fields are 1-Lipschitz) and only buckets whose rectangle can
    beat that bound are opened.  Exact distance ties resolve to the lowest
    segment index.
    """
    cdef Py_ssize_t n = p.shape[0]
    if n == 0:
        raise ValueError("segment_distance needs at least one segment")
    import numpy as _np
    dist_arr = _np.empty((ny, nx), dtype=_np.float64)
    idx_arr = _np.empty((ny, nx), dtype=_np.intp)
    cdef double[:, ::1] dist = dist_arr
    cdef Py_ssize_t[:, ::1] idx = idx_arr

    # segment bounding box
    cdef double xmin = p[0, 0], xmax = p[0, 0], ymin = p[0, 1], ymax = p[0, 1]
    cdef double lmax2 = 0.0, dx, dy, l2
    cdef Py_ssize_t s
    for s in range(n):
        xmin = min(xmin, min(p[s, 0], q[s, 0]))
        xmax = max(xmax, max(p[s, 0], q[s, 0]))
        ymin = min(ymin, min(p[s, 1], q[s, 1]))
        ymax = max(ymax, max(p[s, 1], q[s, 1]))
        dx = q[s, 0] - p[s, 0]
        dy = q[s, 1] - p[s, 1]
        l2 = dx * dx + dy * dy
        lmax2 = max(lmax2, l2)

    # bucket size: a few cells, at least one segment length; capped count
    cdef double cell = max(4.0 * max(hx, hy), 1.01 * lmax2 ** 0.5)
    cdef Py_ssize_t nbx = <Py_ssize_t>((xmax - xmin) / cell) + 1
    cdef Py_ssize_t nby = <Py_ssize_t>((ymax - ymin) / cell) + 1
    while nbx * nby > 8 * n + 64:
        cell *= 1.5
        nbx = <Py_ssize_t>((xmax - xmin) / cell) + 1
        nby = <Py_ssize_t>((ymax - ymin) / cell) + 1

    # CSR registration over the bucket lattice (ascending segment order)
    counts_arr = _np.zeros(nbx * nby + 1, dtype=_np.intp)
    cdef Py_ssize_t[::1] counts = counts_arr
    cdef Py_ssize_t bx0, bx1, by0, by1, bx, by, b
    for s in range(n):
        bx0 = _bucket(min(p[s, 0], q[s, 0]), xmin, cell, nbx)
        bx1 = _bucket(max(p[s, 0], q[s, 0]), xmin, cell, nbx)
        by0 = _bucket(min(p[s, 1], q[s, 1]), ymin, cell, nby)
        by1 = _bucket(max(p[s, 1], q[s, 1]), ymin, cell, nby)
        for by in range(by0, by1 + 1):
            for bx in range(bx0, bx1 + 1):
                counts[by * nbx + bx + 1] += 1
    cdef Py_ssize_t nb_total = nbx * nby
    for b in range(nb_total):
        counts[b + 1] += counts[b]
    entries_arr = _np.empty(counts[nb_total], dtype=_np.intp)
    cdef Py_ssize_t[::1] entries = entries_arr
    fill_arr = counts_arr.copy()
    cdef Py_ssize_t[::1] fill = fill_arr
    for s in range(n):
        bx0 = _bucket(min(p[s, 0], q[s, 0]), xmin, cell, nbx)
        bx1 = _bucket(max(p[s, 0], q[s, 0]), xmin, cell, nbx)
        by0 = _bucket(min(p[s, 1], q[s, 1]), ymin, cell, nby)
        by1 = _bucket(max(p[s, 1], q[s, 1]), ymin, cell, nby)
        for by in range(by0, by1 + 1):
            for bx in range(bx0, bx1 + 1):
                b = by * nbx + bx
                entries[fill[b]] = s
                fill[b] += 1

    # compact list of non-empty buckets with their rectangles
    nonempty_arr = _np.flatnonzero(_np.diff(counts_arr) > 0).astype(_np.intp)
    cdef Py_ssize_t[::1] nonempty = nonempty_arr
    cdef Py_ssize_t nb = nonempty.shape[0]
    rect_arr = _np.empty((nb, 4), dtype=_np.float64)
    cdef double[:, ::1] rect = rect_arr
    cdef Py_ssize_t m
    for m in range(nb):
        b = nonempty[m]
        by = b // nbx
        bx = b - by * nbx
        rect[m, 0] = xmin + bx * cell          # x low
        rect[m, 1] = xmin + (bx + 1) * cell    # x high
        rect[m, 2] = ymin + by * cell          # y low
        rect[m, 3] = ymin + (by + 1) * cell    # y high

    cdef double px, py, ub2, best2, d2, cx, cy, t, ax, ay
    cdef Py_ssize_t i, j, best_i, e
    with nogil:
        for j in range(ny):
            py = oy + j * hy
            for i in range(nx):
                px = ox + i * hx
                # Lipschitz seed from the solved neighbour
                if i > 0:
                    ub2 = dist[j, i - 1] + hx
                    ub2 = ub2 * ub2
                elif j > 0:
                    ub2 = dist[j - 1, i] + hy
                    ub2 = ub2 * ub2
                else:
                    ub2 = 1e300
                best2 = 1e300
                best_i = n
                for m in range(nb):
                    # nearest point of the bucket rectangle
                    cx = min(max(px, rect[m, 0]), rect[m, 1])
                    cy = min(max(py, rect[m, 2]), rect[m, 3])
                    dx = px - cx
                    dy = py - cy
                    d2 = dx * dx + dy * dy
                    if d2 > ub2 or d2 > best2:
                        continue
                    b = nonempty[m]
                    for e in range(counts[b], counts[b + 1]):
                        s = entries[e]
                        ax = p[s, 0]
                        ay = p[s, 1]
                        dx = q[s, 0] - ax
                        dy = q[s, 1] - ay
                        l2 = dx * dx + dy * dy
                        if l2 > 0.0:
                            t = ((px - ax) * dx + (py - ay) * dy) / l2
                            if t < 0.0:
                                t = 0.0
                            elif t > 1.0:
                                t = 1.0
                        else:
                            t = 0.0
                        dx = px - (ax + t * dx)
                        dy = py - (ay + t * dy)
                        d2 = dx * dx + dy * dy
                        if d2 < best2 or (d2 == best2 and s < best_i):
                            best2 = d2
                            best_i = s
                dist[j, i] = best2 ** 0.5
                idx[j, i] = best_i
    return dist_arr, idx_arr


cdef inline Py_ssize_t _bucket(double v, double lo, double cell, Py_ssize_t nb) nogil:
    cdef Py_ssize_t k = <Py_ssize_t>((v - lo) / cell)
    if k < 0:
        return 0
    if k >= nb:
        return nb - 1
    return k


def heat(double[:, ::1] u, double dt, double hx, double hy, Py_ssize_t nsteps):
    """Forward-Euler heat steps ``u <- u + dt*lap(u)``; input left untouched."""
    cdef Py_ssize_t ny = u.shape[0], nx = u.shape[1]
    v_arr = np.array(u, dtype=np.float64, copy=True)
    w_arr = np.empty((ny, nx), dtype=np.float64)
    cdef double[:, ::1] v = v_arr, w = w_arr
    cdef double[:, ::1] tmp
    cdef Py_ssize_t i, j, step, jm, jp, im, ip
    cdef double ihx2 = 1.0 / (hx * hx), ihy2 = 1.0 / (hy * hy)
    cdef double lap
    with nogil:
        for step in range(nsteps):
            for j in range(ny):
                jm = mirror(j - 1, ny)
                jp = mirror(j + 1, ny)
                for i in range(nx):
                    im = mirror(i - 1, nx)
                    ip = mirror(i + 1, nx)
                    lap = (v[j, ip] + v[j, im] - 2.0 * v[j, i]) * ihx2 \
                        + (v[jp, i] + v[jm, i] - 2.0 * v[j, i]) * ihy2
                    w[j, i] = v[j, i] + dt * lap
            tmp = v
            v = w
            w = tmp
    return np.asarray(v).copy()
