"""Hot inner loops: affine path scans, matrix-product norms, backward-series
sampling, linear-walk excursions and first-passage times.

Each kernel exists in two builds selected at import time:

* a ``numba.njit`` build (default when numba imports), and
* a pure-NumPy build, chosen when ``KESTEN_EVT_PURE_NUMPY=1`` or numba is
  missing.  Batch kernels vectorize across the replica axis; the strictly
  sequential single-path scans fall back to the identical Python loop.

Both builds consume the same pre-drawn coefficient arrays in the same
per-sample order, so results are bit-identical across builds (no fastmath).
``benchmarks/bench_kernels.py`` times one build against the other.
"""

from __future__ import annotations

import os

import numpy as np

_env = os.environ.get("KESTEN_EVT_PURE_NUMPY", "").strip().lower()
PURE_NUMPY = _env in {"1", "true", "yes", "on"}

HAVE_NUMBA = False
if not PURE_NUMPY:
    try:
        from numba import njit as _njit

        HAVE_NUMBA = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        pass

BACKEND = "numba" if HAVE_NUMBA else "numpy"

# Renormalization window for running matrix products (far from overflow).
_RENORM_HI = 2.0**512
_RENORM_LO = 2.0**-512


def _jit(fn):
    if HAVE_NUMBA:
        return _njit(cache=True, nogil=True)(fn)
    return fn


# ---------------------------------------------------------------------------
# single-path scans (inherently sequential; fallback runs the same loop)
# ---------------------------------------------------------------------------


def _affine_path_1d(a, b, x0):
    n = a.shape[0]
    x = np.empty(n)
    cur = x0
    for k in range(n):
        cur = a[k] * cur + b[k]
        x[k] = cur
    return x


def _affine_path_2d(A, B, x0):
    n = A.shape[0]
    x = np.empty((n, 2))
    c0 = x0[0]
    c1 = x0[1]
    for k in range(n):
        n0 = A[k, 0, 0] * c0 + A[k, 0, 1] * c1 + B[k, 0]
        n1 = A[k, 1, 0] * c0 + A[k, 1, 1] * c1 + B[k, 1]
        c0 = n0
        c1 = n1
        x[k, 0] = c0
        x[k, 1] = c1
    return x


def _opnorm2(m00, m01, m10, m11):
    # largest singular value of a 2x2 matrix, closed form
    f = m00 * m00 + m01 * m01 + m10 * m10 + m11 * m11
    det = m00 * m11 - m01 * m10
    disc = f * f - 4.0 * det * det
    if disc < 0.0:
        disc = 0.0
    return np.sqrt(0.5 * (f + np.sqrt(disc)))


def _product_lognorms_2d(A, m_in, logscale_in):
    """Running products M <- A_k M with renormalization; returns per-step
    log operator norms plus the final (matrix, logscale) state."""
    n = A.shape[0]
    out = np.empty(n)
    m00 = m_in[0, 0]
    m01 = m_in[0, 1]
    m10 = m_in[1, 0]
    m11 = m_in[1, 1]
    ls = logscale_in
    for k in range(n):
        a00 = A[k, 0, 0]
        a01 = A[k, 0, 1]
        a10 = A[k, 1, 0]
        a11 = A[k, 1, 1]
        t00 = a00 * m00 + a01 * m10
        t01 = a00 * m01 + a01 * m11
        t10 = a10 * m00 + a11 * m10
        t11 = a10 * m01 + a11 * m11
        m00, m01, m10, m11 = t00, t01, t10, t11
        nrm = _opnorm2(m00, m01, m10, m11)
        out[k] = np.log(nrm) + ls
        if nrm > _RENORM_HI or nrm < _RENORM_LO:
            m00 /= nrm
            m01 /= nrm
            m10 /= nrm
            m11 /= nrm
            ls += np.log(nrm)
    m_out = np.empty((2, 2))
    m_out[0, 0] = m00
    m_out[0, 1] = m01
    m_out[1, 0] = m10
    m_out[1, 1] = m11
    return out, m_out, ls


affine_path_1d = _jit(_affine_path_1d)
affine_path_2d = _jit(_affine_path_2d)
product_lognorms_2d = _jit(_product_lognorms_2d)


# ---------------------------------------------------------------------------
# batch kernels: one pass of m pre-drawn steps over R concurrent samples
# ---------------------------------------------------------------------------
#
# State arrays are updated in place; alive is uint8.  The numba build loops
# rows (samples), the numpy build loops the m step columns vectorized over
# rows; per sample the arithmetic sequence is identical.


def _backward_pass_1d_loop(a, b, x, p, alive, kcount, env_b, eps):
    R, m = a.shape
    for r in range(R):
        if alive[r] == 0:
            continue
        xr = x[r]
        pr = p[r]
        kr = kcount[r]
        for j in range(m):
            xr += pr * b[r, j]
            pr *= a[r, j]
            kr += 1
            if abs(pr) * env_b < eps:
                alive[r] = 0
                break
        x[r] = xr
        p[r] = pr
        kcount[r] = kr


def _backward_pass_1d_numpy(a, b, x, p, alive, kcount, env_b, eps):
    m = a.shape[1]
    for j in range(m):
        live = alive == 1
        if not live.any():
            break
        x[live] += p[live] * b[live, j]
        p[live] *= a[live, j]
        kcount[live] += 1
        done = live & (np.abs(p) * env_b < eps)
        alive[done] = 0


def _backward_pass_nd_loop(A, B, x, p, alive, kcount, env_b, eps):
    R, m, d, _ = A.shape
    tmp = np.empty(d)
    newp = np.empty((d, d))
    for r in range(R):
        if alive[r] == 0:
            continue
        kr = kcount[r]
        for j in range(m):
            for i in range(d):
                s = 0.0
                for l in range(d):
                    s += p[r, i, l] * B[r, j, l]
                tmp[i] = s
            for i in range(d):
                x[r, i] += tmp[i]
            for i in range(d):
                for l in range(d):
                    s = 0.0
                    for q in range(d):
                        s += p[r, i, q] * A[r, j, q, l]
                    newp[i, l] = s
            fro = 0.0
            for i in range(d):
                for l in range(d):
                    p[r, i, l] = newp[i, l]
                    fro += newp[i, l] * newp[i, l]
            kr += 1
            if np.sqrt(fro) * env_b < eps:
                alive[r] = 0
                break
        kcount[r] = kr


def _backward_pass_nd_numpy(A, B, x, p, alive, kcount, env_b, eps):
    m = A.shape[1]
    for j in range(m):
        live = alive == 1
        if not live.any():
            break
        x[live] += np.einsum("ril,rl->ri", p[live], B[live, j])
        p[live] = np.einsum("riq,rql->ril", p[live], A[live, j])
        kcount[live] += 1
        fro = np.sqrt(np.einsum("ril,ril->r", p, p))
        done = live & (fro * env_b < eps)
        alive[done] = 0


# Linear-walk excursion: v <- A v until |v| < eps_stop or the step cap.
# Counts steps i >= 1 whose image lies in the target set
#   {|v| > radius} intersected with an optional sign / cone constraint.
# norm_mode: 0 = Euclidean, 1 = sup, 2 = l1 (vector norms on V).


def _walk_pass_1d_loop(a, v, alive, steps, hits, sup1, eps_stop, horizon, radius, sign_mode):
    R, m = a.shape
    for r in range(R):
        if alive[r] == 0:
            continue
        vr = v[r]
        st = steps[r]
        h = hits[r]
        s1 = sup1[r]
        for j in range(m):
            vr = a[r, j] * vr
            st += 1
            av = abs(vr)
            if av > s1:
                s1 = av
            if av > radius and (sign_mode == 0 or (sign_mode == 1 and vr > 0.0) or (sign_mode == -1 and vr < 0.0)):
                h += 1
            if av < eps_stop or st >= horizon:
                alive[r] = 0
                break
        v[r] = vr
        steps[r] = st
        hits[r] = h
        sup1[r] = s1


def _walk_pass_1d_numpy(a, v, alive, steps, hits, sup1, eps_stop, horizon, radius, sign_mode):
    m = a.shape[1]
    for j in range(m):
        live = alive == 1
        if not live.any():
            break
        v[live] *= a[live, j]
        steps[live] += 1
        av = np.abs(v)
        np.maximum(sup1, np.where(live, av, sup1), out=sup1)
        inset = av > radius
        if sign_mode == 1:
            inset &= v > 0.0
        elif sign_mode == -1:
            inset &= v < 0.0
        hits[live & inset] += 1
        stop = live & ((av < eps_stop) | (steps >= horizon))
        alive[stop] = 0


def _vnorm2d(v0, v1, norm_mode):
    if norm_mode == 1:
        a0 = abs(v0)
        a1 = abs(v1)
        return a0 if a0 > a1 else a1
    if norm_mode == 2:
        return abs(v0) + abs(v1)
    return np.sqrt(v0 * v0 + v1 * v1)


def _walk_pass_2d_loop(A, v, alive, steps, hits, sup1, eps_stop, horizon, radius,
                       cone_on, ux, uy, cos_half, norm_mode):
    R, m = A.shape[0], A.shape[1]
    for r in range(R):
        if alive[r] == 0:
            continue
        v0 = v[r, 0]
        v1 = v[r, 1]
        st = steps[r]
        h = hits[r]
        s1 = sup1[r]
        for j in range(m):
            n0 = A[r, j, 0, 0] * v0 + A[r, j, 0, 1] * v1
            n1 = A[r, j, 1, 0] * v0 + A[r, j, 1, 1] * v1
            v0 = n0
            v1 = n1
            st += 1
            nv = _vnorm2d(v0, v1, norm_mode)
            if nv > s1:
                s1 = nv
            if nv > radius:
                if cone_on == 0:
                    h += 1
                else:
                    e2 = np.sqrt(v0 * v0 + v1 * v1)
                    if e2 > 0.0 and (v0 * ux + v1 * uy) / e2 >= cos_half:
                        h += 1
            if nv < eps_stop or st >= horizon:
                alive[r] = 0
                break
        v[r, 0] = v0
        v[r, 1] = v1
        steps[r] = st
        hits[r] = h
        sup1[r] = s1


def _walk_pass_2d_numpy(A, v, alive, steps, hits, sup1, eps_stop, horizon, radius,
                        cone_on, ux, uy, cos_half, norm_mode):
    m = A.shape[1]
    for j in range(m):
        live = alive == 1
        if not live.any():
            break
        v[live] = np.einsum("ril,rl->ri", A[live, j], v[live])
        steps[live] += 1
        if norm_mode == 1:
            nv = np.abs(v).max(axis=1)
        elif norm_mode == 2:
            nv = np.abs(v).sum(axis=1)
        else:
            nv = np.sqrt((v * v).sum(axis=1))
        np.maximum(sup1, np.where(live, nv, sup1), out=sup1)
        inset = nv > radius
        if cone_on:
            e2 = np.sqrt((v * v).sum(axis=1))
            proj = np.where(e2 > 0.0, (v[:, 0] * ux + v[:, 1] * uy) / np.where(e2 > 0.0, e2, 1.0), -2.0)
            inset &= proj >= cos_half
        hits[live & inset] += 1
        stop = live & ((nv < eps_stop) | (steps >= horizon))
        alive[stop] = 0


# First passage of the affine chain into the dilated target t*A.


def _hit_pass_1d_loop(a, b, x, alive, steps, tau, t_radius, sign_mode, horizon):
    R, m = a.shape
    for r in range(R):
        if alive[r] == 0:
            continue
        xr = x[r]
        st = steps[r]
        for j in range(m):
            xr = a[r, j] * xr + b[r, j]
            st += 1
            if abs(xr) > t_radius and (sign_mode == 0 or (sign_mode == 1 and xr > 0.0) or (sign_mode == -1 and xr < 0.0)):
                tau[r] = st
                alive[r] = 0
                break
            if st >= horizon:
                alive[r] = 0
                break
        x[r] = xr
        steps[r] = st


def _hit_pass_1d_numpy(a, b, x, alive, steps, tau, t_radius, sign_mode, horizon):
    m = a.shape[1]
    for j in range(m):
        live = alive == 1
        if not live.any():
            break
        x[live] = a[live, j] * x[live] + b[live, j]
        steps[live] += 1
        inset = np.abs(x) > t_radius
        if sign_mode == 1:
            inset &= x > 0.0
        elif sign_mode == -1:
            inset &= x < 0.0
        hit = live & inset
        tau[hit] = steps[hit]
        alive[hit] = 0
        timeout = (alive == 1) & (steps >= horizon)
        alive[timeout] = 0


def _hit_pass_2d_loop(A, B, x, alive, steps, tau, t_radius, cone_on, ux, uy, cos_half, horizon):
    R, m = A.shape[0], A.shape[1]
    for r in range(R):
        if alive[r] == 0:
            continue
        x0 = x[r, 0]
        x1 = x[r, 1]
        st = steps[r]
        for j in range(m):
            n0 = A[r, j, 0, 0] * x0 + A[r, j, 0, 1] * x1 + B[r, j, 0]
            n1 = A[r, j, 1, 0] * x0 + A[r, j, 1, 1] * x1 + B[r, j, 1]
            x0 = n0
            x1 = n1
            st += 1
            e2 = np.sqrt(x0 * x0 + x1 * x1)
            if e2 > t_radius:
                if cone_on == 0 or (x0 * ux + x1 * uy) / e2 >= cos_half:
                    tau[r] = st
                    alive[r] = 0
                    break
            if st >= horizon:
                alive[r] = 0
                break
        x[r, 0] = x0
        x[r, 1] = x1
        steps[r] = st


def _hit_pass_2d_numpy(A, B, x, alive, steps, tau, t_radius, cone_on, ux, uy, cos_half, horizon):
    m = A.shape[1]
    for j in range(m):
        live = alive == 1
        if not live.any():
            break
        x[live] = np.einsum("ril,rl->ri", A[live, j], x[live]) + B[live, j]
        steps[live] += 1
        e2 = np.sqrt((x * x).sum(axis=1))
        inset = e2 > t_radius
        if cone_on:
            proj = (x[:, 0] * ux + x[:, 1] * uy) / np.where(e2 > 0.0, e2, 1.0)
            inset &= proj >= cos_half
        hit = live & inset
        tau[hit] = steps[hit]
        alive[hit] = 0
        timeout = (alive == 1) & (steps >= horizon)
        alive[timeout] = 0


if HAVE_NUMBA:
    backward_pass_1d = _jit(_backward_pass_1d_loop)
    backward_pass_nd = _jit(_backward_pass_nd_loop)
    walk_pass_1d = _jit(_walk_pass_1d_loop)
    walk_pass_2d = _jit(_walk_pass_2d_loop)
    hit_pass_1d = _jit(_hit_pass_1d_loop)
    hit_pass_2d = _jit(_hit_pass_2d_loop)
else:
    backward_pass_1d = _backward_pass_1d_numpy
    backward_pass_nd = _backward_pass_nd_numpy
    walk_pass_1d = _walk_pass_1d_numpy
    walk_pass_2d = _walk_pass_2d_numpy
    hit_pass_1d = _hit_pass_1d_numpy
    hit_pass_2d = _hit_pass_2d_numpy
