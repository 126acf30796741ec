"""Compiled fixed-step integrators for the mean-field and linear oscillator models.

Both kernels share one RK4 skeleton. When ``E``/``E2`` hold the exact free
propagators exp(L h) and exp(L h / 2) of the per-class linear part, the update
is the integrating-factor (Lawson) RK4 scheme; with E = E2 = 1 and the linear
part moved into ``lin`` it is the classical RK4 scheme.
"""

import numpy as np
from numba import njit

# leaf size of the pairwise reduction; fixes the summation tree for a given N_k
_LEAF = 32

STATUS_OK = 0
STATUS_UNSTABLE = 1


@njit(cache=True, nogil=True)
def pairwise_sum(x, lo, hi):
    """Sum x[lo:hi] along a fixed binary tree (independent of thread count).

    Leaves of ``_LEAF`` consecutive elements are summed sequentially, then
    adjacent partial sums are combined level by level.
    """
    n = hi - lo
    nleaf = (n + _LEAF - 1) // _LEAF
    if nleaf <= 1:
        acc = 0j
        for i in range(lo, hi):
            acc += x[i]
        return acc
    buf = np.empty(nleaf, np.complex128)
    for b in range(nleaf):
        acc = 0j
        stop = min(lo + (b + 1) * _LEAF, hi)
        for i in range(lo + b * _LEAF, stop):
            acc += x[i]
        buf[b] = acc
    m = nleaf
    while m > 1:
        half = m // 2
        for i in range(half):
            buf[i] = buf[2 * i] + buf[2 * i + 1]
        if m % 2 == 1:
            buf[half] = buf[m - 1]
            m = half + 1
        else:
            m = half
    return buf[0]


@njit(cache=True, nogil=True)
def _meanfield_rhs_class(lin, g, gamma, a, s, z):
    ds = lin * s + 1j * g * a * z
    # 2i (a* s - a s*) = -4 Im(a* s)
    dz = -gamma * (1.0 + z) - 4.0 * g * (np.conj(a) * s).imag
    return ds, dz


@njit(cache=True, nogil=True)
def integrate_meanfield(
    lin, E, E2, g, wg, c_alpha, gamma, alpha0, s0, z0, h, nsteps, drive, stride,
    rec_idx, z_limit,
):
    """Integrate dα/dt, ds_k/dt, dz_k/dt for ``nsteps`` steps of size h.

    Returns (alpha_rec, s_rec, z_rec, status, fail_step, alpha, s, z). Records
    are taken every ``stride`` steps, including the initial state.
    """
    nk = s0.shape[0]
    nrec = nsteps // stride + 1
    nidx = rec_idx.shape[0]
    alpha_rec = np.empty(nrec, np.complex128)
    s_rec = np.empty((nrec, nidx), np.complex128)
    z_rec = np.empty((nrec, nidx), np.float64)

    a = alpha0
    s = s0.copy()
    z = z0.copy()
    st = np.empty(nk, np.complex128)
    zt = np.empty(nk, np.float64)
    acc_s = np.empty(nk, np.complex128)
    acc_z = np.empty(nk, np.float64)
    tmp = np.empty(nk, np.complex128)

    alpha_rec[0] = a
    for j in range(nidx):
        s_rec[0, j] = s[rec_idx[j]]
        z_rec[0, j] = z[rec_idx[j]]
    r = 1
    half = 0.5 * h
    sixth = h / 6.0

    for k in range(nk):
        tmp[k] = wg[k] * s[k]

    for n in range(nsteps):
        F = drive[n]
        # stage 1
        S = pairwise_sum(tmp, 0, nk)
        ka1 = c_alpha * a - 1j * S - 1j * F
        for k in range(nk):
            ds, dz = _meanfield_rhs_class(lin[k], g[k], gamma, a, s[k], z[k])
            acc_s[k] = E[k] * ds
            acc_z[k] = dz
            st[k] = E2[k] * (s[k] + half * ds)
            zt[k] = z[k] + half * dz
            tmp[k] = wg[k] * st[k]
        a2 = a + half * ka1
        # stage 2
        S = pairwise_sum(tmp, 0, nk)
        ka2 = c_alpha * a2 - 1j * S - 1j * F
        for k in range(nk):
            ds, dz = _meanfield_rhs_class(lin[k], g[k], gamma, a2, st[k], zt[k])
            acc_s[k] += 2.0 * E2[k] * ds
            acc_z[k] += 2.0 * dz
            st[k] = E2[k] * s[k] + half * ds
            zt[k] = z[k] + half * dz
            tmp[k] = wg[k] * st[k]
        a3 = a + half * ka2
        # stage 3
        S = pairwise_sum(tmp, 0, nk)
        ka3 = c_alpha * a3 - 1j * S - 1j * F
        for k in range(nk):
            ds, dz = _meanfield_rhs_class(lin[k], g[k], gamma, a3, st[k], zt[k])
            acc_s[k] += 2.0 * E2[k] * ds
            acc_z[k] += 2.0 * dz
            st[k] = E[k] * s[k] + h * E2[k] * ds
            zt[k] = z[k] + h * dz
            tmp[k] = wg[k] * st[k]
        a4 = a + h * ka3
        # stage 4 and update
        S = pairwise_sum(tmp, 0, nk)
        ka4 = c_alpha * a4 - 1j * S - 1j * F
        bad = False
        for k in range(nk):
            ds, dz = _meanfield_rhs_class(lin[k], g[k], gamma, a4, st[k], zt[k])
            s[k] = E[k] * s[k] + sixth * (acc_s[k] + ds)
            z[k] = z[k] + sixth * (acc_z[k] + dz)
            tmp[k] = wg[k] * s[k]
            if not (abs(z[k]) <= z_limit) or not np.isfinite(s[k].real) or not np.isfinite(s[k].imag):
                bad = True
        a = a + sixth * (ka1 + 2.0 * ka2 + 2.0 * ka3 + ka4)
        if bad or not (np.isfinite(a.real) and np.isfinite(a.imag)):
            return alpha_rec[:r], s_rec[:r], z_rec[:r], STATUS_UNSTABLE, n + 1, a, s, z
        if (n + 1) % stride == 0:
            alpha_rec[r] = a
            for j in range(nidx):
                s_rec[r, j] = s[rec_idx[j]]
                z_rec[r, j] = z[rec_idx[j]]
            r += 1
    return alpha_rec[:r], s_rec[:r], z_rec[:r], STATUS_OK, nsteps, a, s, z


@njit(cache=True, nogil=True)
def integrate_linear(lin, E, E2, g, wg, c_alpha, alpha0, s0, h, nsteps, stride, limit):
    """Linear oscillator model: dα/dt = c_α α - i Σ w g s, ds/dt = L s - i g α."""
    nk = s0.shape[0]
    nrec = nsteps // stride + 1
    alpha_rec = np.empty(nrec, np.complex128)
    a = alpha0
    s = s0.copy()
    st = np.empty(nk, np.complex128)
    acc = np.empty(nk, np.complex128)
    tmp = np.empty(nk, np.complex128)
    alpha_rec[0] = a
    r = 1
    half = 0.5 * h
    sixth = h / 6.0
    for k in range(nk):
        tmp[k] = wg[k] * s[k]
    for n in range(nsteps):
        ka1 = c_alpha * a - 1j * pairwise_sum(tmp, 0, nk)
        for k in range(nk):
            ds = lin[k] * s[k] - 1j * g[k] * a
            acc[k] = E[k] * ds
            st[k] = E2[k] * (s[k] + half * ds)
            tmp[k] = wg[k] * st[k]
        a2 = a + half * ka1
        ka2 = c_alpha * a2 - 1j * pairwise_sum(tmp, 0, nk)
        for k in range(nk):
            ds = lin[k] * st[k] - 1j * g[k] * a2
            acc[k] += 2.0 * E2[k] * ds
            st[k] = E2[k] * s[k] + half * ds
            tmp[k] = wg[k] * st[k]
        a3 = a + half * ka2
        ka3 = c_alpha * a3 - 1j * pairwise_sum(tmp, 0, nk)
        for k in range(nk):
            ds = lin[k] * st[k] - 1j * g[k] * a3
            acc[k] += 2.0 * E2[k] * ds
            st[k] = E[k] * s[k] + h * E2[k] * ds
            tmp[k] = wg[k] * st[k]
        a4 = a + h * ka3
        ka4 = c_alpha * a4 - 1j * pairwise_sum(tmp, 0, nk)
        for k in range(nk):
            ds = lin[k] * st[k] - 1j * g[k] * a4
            s[k] = E[k] * s[k] + sixth * (acc[k] + ds)
            tmp[k] = wg[k] * s[k]
        a = a + sixth * (ka1 + 2.0 * ka2 + 2.0 * ka3 + ka4)
        if not (abs(a) <= limit):
            return alpha_rec[:r], STATUS_UNSTABLE, n + 1, a, s
        if (n + 1) % stride == 0:
            alpha_rec[r] = a
            r += 1
    return alpha_rec[:r], STATUS_OK, nsteps, a, s
