"""Numba kernels: the tight loops behind shooting, evolution and the solver.

Everything here is single-threaded, allocation-light and compiled without
fastmath so that runs are bitwise deterministic for a fixed configuration.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

SLOPE_GUARD = 1e-9


@njit(cache=True)
def _forcing_eval_1d(y, a0, ks, ac, asn):
    val = a0
    for m in range(ks.shape[0]):
        phase = 2.0 * math.pi * ks[m, 0] * y
        val += ac[m] * math.cos(phase) + asn[m] * math.sin(phase)
    return val


@njit(cache=True)
def rk4_q(c, q0, a0, ks, ac, asn, steps):
    """Integrate q' = c*sqrt(1-q^2) - g(y) and s' = q/sqrt(1-q^2) over [0,1].

    Returns (ok, fail_index, q_path, s_path); ok=False means the slope guard
    |q| <= 1 - SLOPE_GUARD was violated at step fail_index (slope saturation).
    """
    qs = np.empty(steps + 1)
    ss = np.empty(steps + 1)
    qs[0] = q0
    ss[0] = 0.0
    dy = 1.0 / steps
    guard = 1.0 - SLOPE_GUARD
    q = q0
    s = 0.0
    for i in range(steps):
        y = i * dy
        ok = True
        # stage 1
        if abs(q) > guard:
            return False, i, qs, ss
        r = math.sqrt(1.0 - q * q)
        k1q = c * r - _forcing_eval_1d(y, a0, ks, ac, asn)
        k1s = q / r
        # stage 2
        q2 = q + 0.5 * dy * k1q
        if abs(q2) > guard:
            return False, i, qs, ss
        r = math.sqrt(1.0 - q2 * q2)
        k2q = c * r - _forcing_eval_1d(y + 0.5 * dy, a0, ks, ac, asn)
        k2s = q2 / r
        # stage 3
        q3 = q + 0.5 * dy * k2q
        if abs(q3) > guard:
            return False, i, qs, ss
        r = math.sqrt(1.0 - q3 * q3)
        k3q = c * r - _forcing_eval_1d(y + 0.5 * dy, a0, ks, ac, asn)
        k3s = q3 / r
        # stage 4
        q4 = q + dy * k3q
        if abs(q4) > guard:
            return False, i, qs, ss
        r = math.sqrt(1.0 - q4 * q4)
        k4q = c * r - _forcing_eval_1d(y + dy, a0, ks, ac, asn)
        k4s = q4 / r
        q = q + dy * (k1q + 2.0 * k2q + 2.0 * k3q + k4q) / 6.0
        s = s + dy * (k1s + 2.0 * k2s + 2.0 * k3s + k4s) / 6.0
        if abs(q) > guard:
            return False, i + 1, qs, ss
        qs[i + 1] = q
        ss[i + 1] = s
    return True, steps, qs, ss


@njit(cache=True)
def evolve_1d(w0, g, c, dt, h, n_steps, snap_steps, out_snaps, out_m, out_wt):
    """Forward Euler on w_t = w_yy/(1+w_y^2) + g*sqrt(1+w_y^2) - c, periodic.

    Snapshots (state, max, sup|w_t| estimate) are recorded at the step indices
    in snap_steps, which must start at 0 and end at n_steps.  Returns
    (status, step): status 0 on success, 1 on detected blow-up at `step`.
    """
    n = w0.shape[0]
    inv2h = 0.5 / h
    invh2 = 1.0 / (h * h)
    w = w0.copy()
    wn = np.empty(n)
    sidx = 0
    for step in range(n_steps + 1):
        is_snap = sidx < snap_steps.shape[0] and snap_steps[sidx] == step
        if is_snap:
            mx = w[0]
            bad = False
            for i in range(n):
                wi = w[i]
                if not (wi == wi) or abs(wi) > 1e15:
                    bad = True
                if wi > mx:
                    mx = wi
                out_snaps[sidx, i] = wi
            if bad:
                return 1, step
            out_m[sidx] = mx
        if step == n_steps:
            if is_snap:
                # final sup|w_t| from the instantaneous right-hand side
                rmax = 0.0
                for i in range(n):
                    im = i - 1 if i > 0 else n - 1
                    ip = i + 1 if i < n - 1 else 0
                    wy = (w[ip] - w[im]) * inv2h
                    wyy = (w[ip] - 2.0 * w[i] + w[im]) * invh2
                    s = 1.0 + wy * wy
                    rhs = wyy / s + g[i] * math.sqrt(s) - c
                    if abs(rhs) > rmax:
                        rmax = abs(rhs)
                out_wt[sidx] = rmax
                sidx += 1
            break
        rmax = 0.0
        for i in range(n):
            im = i - 1 if i > 0 else n - 1
            ip = i + 1 if i < n - 1 else 0
            wy = (w[ip] - w[im]) * inv2h
            wyy = (w[ip] - 2.0 * w[i] + w[im]) * invh2
            s = 1.0 + wy * wy
            rhs = wyy / s + g[i] * math.sqrt(s) - c
            if abs(rhs) > rmax:
                rmax = abs(rhs)
            wn[i] = w[i] + dt * rhs
        if is_snap:
            out_wt[sidx] = rmax
            sidx += 1
        tmp = w
        w = wn
        wn = tmp
    return 0, n_steps


@njit(cache=True)
def evolve_2d(w0, g, c, dt, h, n_steps, snap_steps, out_snaps, out_m, out_wt):
    """Forward Euler on the 2D nondivergence (trace) form, periodic."""
    n = w0.shape[0]
    inv2h = 0.5 / h
    invh2 = 1.0 / (h * h)
    inv4h2 = 0.25 / (h * h)
    w = w0.copy()
    wn = np.empty((n, n))
    sidx = 0
    for step in range(n_steps + 1):
        is_snap = sidx < snap_steps.shape[0] and snap_steps[sidx] == step
        if is_snap:
            mx = w[0, 0]
            bad = False
            for i in range(n):
                for j in range(n):
                    wij = w[i, j]
                    if not (wij == wij) or abs(wij) > 1e15:
                        bad = True
                    if wij > mx:
                        mx = wij
                    out_snaps[sidx, i, j] = wij
            if bad:
                return 1, step
            out_m[sidx] = mx
        if step == n_steps:
            if is_snap:
                rmax = 0.0
                for i in range(n):
                    im = i - 1 if i > 0 else n - 1
                    ip = i + 1 if i < n - 1 else 0
                    for j in range(n):
                        jm = j - 1 if j > 0 else n - 1
                        jp = j + 1 if j < n - 1 else 0
                        wx = (w[ip, j] - w[im, j]) * inv2h
                        wy = (w[i, jp] - w[i, jm]) * inv2h
                        wxx = (w[ip, j] - 2.0 * w[i, j] + w[im, j]) * invh2
                        wyy = (w[i, jp] - 2.0 * w[i, j] + w[i, jm]) * invh2
                        wxy = (w[ip, jp] + w[im, jm] - w[ip, jm] - w[im, jp]) * inv4h2
                        s = 1.0 + wx * wx + wy * wy
                        tr = (
                            (1.0 - wx * wx / s) * wxx
                            + (1.0 - wy * wy / s) * wyy
                            - 2.0 * (wx * wy / s) * wxy
                        )
                        rhs = tr + g[i, j] * math.sqrt(s) - c
                        if abs(rhs) > rmax:
                            rmax = abs(rhs)
                out_wt[sidx] = rmax
                sidx += 1
            break
        rmax = 0.0
        for i in range(n):
            im = i - 1 if i > 0 else n - 1
            ip = i + 1 if i < n - 1 else 0
            for j in range(n):
                jm = j - 1 if j > 0 else n - 1
                jp = j + 1 if j < n - 1 else 0
                wx = (w[ip, j] - w[im, j]) * inv2h
                wy = (w[i, jp] - w[i, jm]) * inv2h
                wxx = (w[ip, j] - 2.0 * w[i, j] + w[im, j]) * invh2
                wyy = (w[i, jp] - 2.0 * w[i, j] + w[i, jm]) * invh2
                wxy = (w[ip, jp] + w[im, jm] - w[ip, jm] - w[im, jp]) * inv4h2
                s = 1.0 + wx * wx + wy * wy
                tr = (
                    (1.0 - wx * wx / s) * wxx
                    + (1.0 - wy * wy / s) * wyy
                    - 2.0 * (wx * wy / s) * wxy
                )
                rhs = tr + g[i, j] * math.sqrt(s) - c
                if abs(rhs) > rmax:
                    rmax = abs(rhs)
                wn[i, j] = w[i, j] + dt * rhs
        if is_snap:
            out_wt[sidx] = rmax
            sidx += 1
        tmp = w
        w = wn
        wn = tmp
    return 0, n_steps


@njit(cache=True)
def _project_affine_nonneg(v, g, target, t0):
    """Project v onto {x >= 0, sum(g*x) = target}: x = max(0, v + t*g).

    phi(t) = sum(g*max(0, v + t*g)) is nondecreasing and piecewise linear;
    safeguarded Newton from the warm start t0.  Writes the projection into v
    and returns the multiplier t.
    """
    m = v.shape[0]
    atol = 1e-12 * (1.0 + abs(target))

    t = t0
    val = -target
    slope = 0.0
    for j in range(m):
        wj = v[j] + t * g[j]
        if wj > 0.0:
            val += g[j] * wj
            slope += g[j] * g[j]
    # bracket the root
    tl = t
    th = t
    if val > 0.0:
        step = 1.0 + abs(t)
        while True:
            tl = tl - step
            step *= 2.0
            vv = -target
            for j in range(m):
                wj = v[j] + tl * g[j]
                if wj > 0.0:
                    vv += g[j] * wj
            if vv <= 0.0:
                break
    else:
        step = 1.0 + abs(t)
        while True:
            th = th + step
            step *= 2.0
            vv = -target
            for j in range(m):
                wj = v[j] + th * g[j]
                if wj > 0.0:
                    vv += g[j] * wj
            if vv >= 0.0:
                break
    for _ in range(200):
        if abs(val) <= atol or th - tl <= 1e-16 * (1.0 + abs(th) + abs(tl)):
            break
        if val > 0.0:
            th = t
        else:
            tl = t
        if slope > 0.0:
            tn = t - val / slope
        else:
            tn = 0.5 * (tl + th)
        if not (tl < tn < th):
            tn = 0.5 * (tl + th)
        t = tn
        val = -target
        slope = 0.0
        for j in range(m):
            wj = v[j] + t * g[j]
            if wj > 0.0:
                val += g[j] * wj
                slope += g[j] * g[j]
    for j in range(m):
        wj = v[j] + t * g[j]
        v[j] = wj if wj > 0.0 else 0.0
    return t


@njit(cache=True)
def pdhg_1d(psi, phi0, phi1, g, c, n, target, tau, sigma, iters, t0):
    """A chunk of primal-dual iterations on the 1D constrained problem.

    Primal: min sum_i ||(c psi_i, (grad psi)_i)|| - sum g_i psi_i
            over psi >= 0, sum g_i psi_i = target,
    with the forward-difference gradient scaled by n = 1/h.  State arrays are
    updated in place; returns the projection multiplier for warm starting.
    """
    m = psi.shape[0]
    hinv = float(n)
    v = np.empty(m)
    pbar = np.empty(m)
    t = t0
    for _ in range(iters):
        for i in range(m):
            im = i - 1 if i > 0 else m - 1
            s = c * phi0[i] - (phi1[i] - phi1[im]) * hinv
            v[i] = psi[i] - tau * s
        t = _project_affine_nonneg(v, g, target, t)
        for i in range(m):
            pbar[i] = 2.0 * v[i] - psi[i]
            psi[i] = v[i]
        for i in range(m):
            ip = i + 1 if i < m - 1 else 0
            a0 = phi0[i] + sigma * c * pbar[i]
            a1 = phi1[i] + sigma * (pbar[ip] - pbar[i]) * hinv
            nrm = math.sqrt(a0 * a0 + a1 * a1)
            if nrm > 1.0:
                a0 /= nrm
                a1 /= nrm
            phi0[i] = a0
            phi1[i] = a1
    return t


@njit(cache=True)
def pdhg_2d(psi, phi0, phi1, phi2, g, c, n, target, tau, sigma, iters, t0):
    """2D counterpart of pdhg_1d; psi and the duals are (n, n) arrays."""
    hinv = float(n)
    v = np.empty((n, n))
    pbar = np.empty((n, n))
    flat_v = v.reshape(n * n)
    flat_g = g.reshape(n * n)
    t = t0
    for _ in range(iters):
        for i in range(n):
            im = i - 1 if i > 0 else n - 1
            for j in range(n):
                jm = j - 1 if j > 0 else n - 1
                s = (
                    c * phi0[i, j]
                    - (phi1[i, j] - phi1[im, j]) * hinv
                    - (phi2[i, j] - phi2[i, jm]) * hinv
                )
                v[i, j] = psi[i, j] - tau * s
        t = _project_affine_nonneg(flat_v, flat_g, target, t)
        for i in range(n):
            for j in range(n):
                pbar[i, j] = 2.0 * v[i, j] - psi[i, j]
                psi[i, j] = v[i, j]
        for i in range(n):
            ip = i + 1 if i < n - 1 else 0
            for j in range(n):
                jp = j + 1 if j < n - 1 else 0
                a0 = phi0[i, j] + sigma * c * pbar[i, j]
                a1 = phi1[i, j] + sigma * (pbar[ip, j] - pbar[i, j]) * hinv
                a2 = phi2[i, j] + sigma * (pbar[i, jp] - pbar[i, j]) * hinv
                nrm = math.sqrt(a0 * a0 + a1 * a1 + a2 * a2)
                if nrm > 1.0:
                    a0 /= nrm
                    a1 /= nrm
                    a2 /= nrm
                phi0[i, j] = a0
                phi1[i, j] = a1
                phi2[i, j] = a2
    return t
