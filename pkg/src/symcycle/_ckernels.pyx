# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled RK4 and fixed-point-map kernels.

Arithmetic is written in the same order as ``_pykernels`` so both
backends produce the same floating-point results.
"""
import numpy as np
from libc.math cimport isfinite, fabs, INFINITY



cdef inline void _field(int n, const double* k1, const double* k2, const double* k3,
                        const long* g, const long* s, const double* u,
                        const double* x, double* out) noexcept nogil:
    cdef int i
    for i in range(n):
        out[i] = k1[i] * x[g[i]] - k2[i] * x[i] - k3[i] * x[i] * x[s[i]] + u[i]


cdef inline void _inputs(int n, int m, const long* idx, const double* start,
                         const double* stop, const double* amp, double t,
                         double* u) noexcept nogil:
    cdef int i
    for i in range(n):
        u[i] = 0.0
    for i in range(m):
        if start[i] <= t and t < stop[i]:
            u[idx[i]] = u[idx[i]] + amp[i]


def integrate(const double[::1] k1, const double[::1] k2, const double[::1] k3,
              const long[::1] gidx, const long[::1] sidx, const double[::1] x0,
              double dt, double dt_last, long nsteps, long stride,
              const long[::1] inp_idx, const double[::1] inp_start,
              const double[::1] inp_stop, const double[::1] inp_amp, double guard):
    cdef int n = x0.shape[0]
    cdef int m = inp_idx.shape[0]
    cdef long nrec = nsteps // stride + 1 + (1 if nsteps % stride else 0)
    states_arr = np.empty((nrec, n), dtype=np.float64)
    steps_arr = np.empty(nrec, dtype=np.int64)
    cdef double[:, ::1] states = states_arr
    cdef long[::1] steps = steps_arr
    cdef double[::1] x = np.array(x0, dtype=np.float64)
    cdef double[::1] a = np.empty(n)
    cdef double[::1] b = np.empty(n)
    cdef double[::1] c = np.empty(n)
    cdef double[::1] d = np.empty(n)
    cdef double[::1] tmp = np.empty(n)
    cdef double[::1] u = np.empty(n)
    cdef double h = dt, half = 0.5 * dt
    cdef double sixth = dt / 6.0
    cdef double t
    cdef long step, rec = 0, fail_step = -1
    cdef int i, status = 0
    cdef double v

    for i in range(n):
        states[0, i] = x[i]
    steps[0] = 0
    rec = 1
    with nogil:
        for step in range(nsteps):
            t = step * dt
            if step == nsteps - 1:
                h = dt_last
                half = 0.5 * h
                sixth = h / 6.0
            _inputs(n, m, &inp_idx[0] if m else NULL, &inp_start[0] if m else NULL,
                    &inp_stop[0] if m else NULL, &inp_amp[0] if m else NULL, t, &u[0])
            _field(n, &k1[0], &k2[0], &k3[0], &gidx[0], &sidx[0], &u[0], &x[0], &a[0])
            for i in range(n):
                tmp[i] = x[i] + half * a[i]
            _inputs(n, m, &inp_idx[0] if m else NULL, &inp_start[0] if m else NULL,
                    &inp_stop[0] if m else NULL, &inp_amp[0] if m else NULL, t + half, &u[0])
            _field(n, &k1[0], &k2[0], &k3[0], &gidx[0], &sidx[0], &u[0], &tmp[0], &b[0])
            for i in range(n):
                tmp[i] = x[i] + half * b[i]
            _field(n, &k1[0], &k2[0], &k3[0], &gidx[0], &sidx[0], &u[0], &tmp[0], &c[0])
            for i in range(n):
                tmp[i] = x[i] + h * c[i]
            _inputs(n, m, &inp_idx[0] if m else NULL, &inp_start[0] if m else NULL,
                    &inp_stop[0] if m else NULL, &inp_amp[0] if m else NULL, t + h, &u[0])
            _field(n, &k1[0], &k2[0], &k3[0], &gidx[0], &sidx[0], &u[0], &tmp[0], &d[0])
            for i in range(n):
                v = x[i] + sixth * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i])
                if not isfinite(v):
                    if status == 0:
                        status = 2 if v != v else 1
                elif fabs(v) > guard:
                    if status == 0:
                        status = 1
                tmp[i] = v
            if status != 0:
                # a NaN anywhere outranks an overflow elsewhere
                for i in range(n):
                    if tmp[i] != tmp[i]:
                        status = 2
                fail_step = step + 1
                break
            for i in range(n):
                x[i] = tmp[i]
            if (step + 1) % stride == 0 or step + 1 == nsteps:
                for i in range(n):
                    states[rec, i] = x[i]
                steps[rec] = step + 1
                rec += 1
    return states_arr[:rec], steps_arr[:rec], status, fail_step


def fixed_point_map(const double[::1] k1, const double[::1] k2, const double[::1] k3,
                    const long[::1] gidx, const long[::1] sidx, const double[::1] u,
                    const double[::1] x0, double eps, double tol, long maxiter):
    cdef int n = x0.shape[0]
    cdef double[::1] x = np.array(x0, dtype=np.float64)
    cdef double[::1] f = np.empty(n)
    cdef long it = 0
    cdef int i, ok = 0
    cdef double norm = INFINITY, v
    with nogil:
        while True:
            _field(n, &k1[0], &k2[0], &k3[0], &gidx[0], &sidx[0], &u[0], &x[0], &f[0])
            norm = 0.0
            for i in range(n):
                v = fabs(eps * f[i])
                if not isfinite(v):
                    norm = INFINITY
                    break
                if v > norm:
                    norm = v
            if norm <= tol:
                ok = 1
                break
            if not isfinite(norm) or it >= maxiter:
                break
            for i in range(n):
                x[i] = x[i] + eps * f[i]
            it += 1
    return np.asarray(x), it, bool(ok), norm
