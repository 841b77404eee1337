"""Pure-Python (NumPy) versions of the compiled kernels in ``_ckernels.pyx``.

Same call signatures and the same arithmetic order, so either backend can
serve ``symcycle.kernels``.
"""
import numpy as np


def _field(k1, k2, k3, g, s, u, x):
    return k1 * x[g] - k2 * x - k3 * x * x[s] + u


def _inputs(n, idx, start, stop, amp, t):
    u = np.zeros(n)
    for j in range(len(idx)):
        if start[j] <= t < stop[j]:
            u[idx[j]] += amp[j]
    return u


def integrate(k1, k2, k3, gidx, sidx, x0, dt, dt_last, nsteps, stride,
              inp_idx, inp_start, inp_stop, inp_amp, guard):
    n = len(x0)
    nrec = nsteps // stride + 1 + (1 if nsteps % stride else 0)
    states = np.empty((nrec, n))
    steps = np.empty(nrec, dtype=np.int64)
    x = np.array(x0, dtype=np.float64)
    states[0] = x
    steps[0] = 0
    rec = 1
    half = 0.5 * dt
    sixth = dt / 6.0
    status, fail_step = 0, -1
    with np.errstate(over="ignore", invalid="ignore"):
        h = dt
        for step in range(nsteps):
            t = step * dt
            if step == nsteps - 1:
                h = dt_last
                half = 0.5 * h
                sixth = h / 6.0
            u = _inputs(n, inp_idx, inp_start, inp_stop, inp_amp, t)
            a = _field(k1, k2, k3, gidx, sidx, u, x)
            u = _inputs(n, inp_idx, inp_start, inp_stop, inp_amp, t + half)
            b = _field(k1, k2, k3, gidx, sidx, u, x + half * a)
            c = _field(k1, k2, k3, gidx, sidx, u, x + half * b)
            u = _inputs(n, inp_idx, inp_start, inp_stop, inp_amp, t + h)
            d = _field(k1, k2, k3, gidx, sidx, u, x + h * c)
            new = x + sixth * (a + 2.0 * b + 2.0 * c + d)
            if np.isnan(new).any():
                status = 2
            elif not np.isfinite(new).all() or (np.abs(new) > guard).any():
                status = 1
            if status:
                fail_step = step + 1
                break
            x = new
            if (step + 1) % stride == 0 or step + 1 == nsteps:
                states[rec] = x
                steps[rec] = step + 1
                rec += 1
    return states[:rec], steps[:rec], status, fail_step


def fixed_point_map(k1, k2, k3, gidx, sidx, u, x0, eps, tol, maxiter):
    x = np.array(x0, dtype=np.float64)
    it = 0
    with np.errstate(over="ignore", invalid="ignore"):
        while True:
            f = _field(k1, k2, k3, gidx, sidx, u, x)
            step = np.abs(eps * f)
            norm = float(step.max()) if np.isfinite(step).all() else np.inf
            if norm <= tol:
                return x, it, True, norm
            if not np.isfinite(norm) or it >= maxiter:
                return x, it, False, norm
            x = x + eps * f
            it += 1
