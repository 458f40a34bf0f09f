# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-step chain recursion for the built-in potentials.

Mirrors numpy_engine.run_batch row by row: drift-integrated state
z_n = x_n - sqrt(2) W(t_n), positions reconstructed from the shared
Brownian prefix, divergent rows frozen at their first bad value.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport isfinite, sqrt, tanh

cnp.import_array()

cdef double SQRT2 = sqrt(2.0)

cdef int KIND_LMC = 0
cdef int KIND_RLMC = 1
cdef int KIND_PRLMC = 2


cdef inline void grad_row(int kid, double p1, double p2, double acoord,
                          double* x, double* g, Py_ssize_t d) noexcept nogil:
    cdef Py_ssize_t j
    cdef double r2 = 0.0, u = 0.0, s
    if kid == 0:  # isotropic gaussian: grad = x
        for j in range(d):
            g[j] = x[j]
    elif kid == 1:  # double well: grad = (p1 |x|^2 - p2) x
        for j in range(d):
            r2 += x[j] * x[j]
        s = p1 * r2 - p2
        for j in range(d):
            g[j] = s * x[j]
    else:  # two-mode mixture, all-equal a: grad = x - a tanh(<x, a>)
        for j in range(d):
            u += x[j] * acoord
        s = tanh(u)
        for j in range(d):
            g[j] = x[j] - acoord * s


cdef inline double row_norm(double* x, Py_ssize_t d) noexcept nogil:
    cdef Py_ssize_t j
    cdef double s = 0.0
    for j in range(d):
        s += x[j] * x[j]
    return sqrt(s)


cdef inline bint clip_row(double* x, double* out, double radius, Py_ssize_t d) noexcept nogil:
    """out = x clipped onto the radius-ball; returns whether it shrank."""
    cdef Py_ssize_t j
    cdef double nrm = row_norm(x, d), scale
    if nrm > radius:
        scale = radius / nrm
        for j in range(d):
            out[j] = x[j] * scale
        return True
    for j in range(d):
        out[j] = x[j]
    return False


def run_batch_core(int kind, int kid, double p1, double p2, double acoord,
                   double[:, ::1] x0, double h,
                   double[:, :, :] w,
                   double[:, :, :] dw_tau,
                   double[:, :] tau,
                   double radius, double blowup,
                   long long[::1] record_steps):
    """Row-wise chain driver; see numpy_engine.run_batch for the contract.

    dw_tau/tau may be empty arrays for the plain kind; record_steps may be
    empty for final-only output.
    """
    cdef Py_ssize_t B = x0.shape[0]
    cdef Py_ssize_t d = x0.shape[1]
    cdef Py_ssize_t n_steps = w.shape[1] - 1
    cdef Py_ssize_t n_rec = record_steps.shape[0]

    final_arr = np.empty((B, d))
    diverged_arr = np.zeros(B, dtype=np.uint8)
    steps_arr = np.full(B, n_steps, dtype=np.int64)
    snaps_arr = np.empty((n_rec, B, d)) if n_rec > 0 else np.empty((0, B, d))
    work = np.empty((5, d))

    cdef double[:, ::1] final = final_arr
    cdef cnp.uint8_t[::1] diverged = diverged_arr
    cdef long long[::1] steps_done = steps_arr
    cdef double[:, :, ::1] snaps = snaps_arr
    cdef double[:, ::1] wk = work

    cdef double* z
    cdef double* xb
    cdef double* yb
    cdef double* tb
    cdef double* gb
    cdef Py_ssize_t b, n, j, rec_pos
    cdef double th, nrm, bl2 = blowup * blowup
    cdef bint shrunk, dead

    z = &wk[0, 0]
    xb = &wk[1, 0]
    yb = &wk[2, 0]
    tb = &wk[3, 0]
    gb = &wk[4, 0]

    with nogil:
        for b in range(B):
            rec_pos = 0
            dead = False
            for j in range(d):
                z[j] = x0[b, j] - SQRT2 * w[b, 0, j]
                xb[j] = z[j] + SQRT2 * w[b, 0, j]
            while rec_pos < n_rec and record_steps[rec_pos] == 0:
                for j in range(d):
                    snaps[rec_pos, b, j] = xb[j]
                rec_pos += 1
            for n in range(n_steps):
                for j in range(d):
                    xb[j] = z[j] + SQRT2 * w[b, n, j]
                if kind == KIND_LMC:
                    grad_row(kid, p1, p2, acoord, xb, gb, d)
                    for j in range(d):
                        z[j] -= gb[j] * h
                elif kind == KIND_RLMC:
                    grad_row(kid, p1, p2, acoord, xb, gb, d)
                    th = tau[b, n] * h
                    for j in range(d):
                        yb[j] = xb[j] - gb[j] * th + SQRT2 * dw_tau[b, n, j]
                    grad_row(kid, p1, p2, acoord, yb, gb, d)
                    for j in range(d):
                        z[j] -= gb[j] * h
                else:
                    shrunk = clip_row(xb, tb, radius, d)
                    grad_row(kid, p1, p2, acoord, tb, gb, d)
                    th = tau[b, n] * h
                    for j in range(d):
                        yb[j] = xb[j] - gb[j] * th + SQRT2 * dw_tau[b, n, j]
                    clip_row(yb, yb, radius, d)
                    grad_row(kid, p1, p2, acoord, yb, gb, d)
                    if shrunk:
                        for j in range(d):
                            z[j] = tb[j] - SQRT2 * w[b, n, j] - gb[j] * h
                    else:
                        for j in range(d):
                            z[j] -= gb[j] * h
                nrm = 0.0
                for j in range(d):
                    xb[j] = z[j] + SQRT2 * w[b, n + 1, j]
                    nrm += xb[j] * xb[j]
                if not isfinite(nrm) or nrm > bl2:
                    diverged[b] = 1
                    steps_done[b] = n + 1
                    dead = True
                    for j in range(d):
                        final[b, j] = xb[j]
                    while rec_pos < n_rec:
                        for j in range(d):
                            snaps[rec_pos, b, j] = xb[j]
                        rec_pos += 1
                    break
                while rec_pos < n_rec and record_steps[rec_pos] == n + 1:
                    for j in range(d):
                        snaps[rec_pos, b, j] = xb[j]
                    rec_pos += 1
            if not dead:
                for j in range(d):
                    final[b, j] = z[j] + SQRT2 * w[b, n_steps, j]

    return final_arr, diverged_arr.astype(bool), steps_arr, (snaps_arr if n_rec > 0 else None)
