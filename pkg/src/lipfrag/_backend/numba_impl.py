"""Numba-compiled compute kernels (default backend).

Same contracts as :mod:`numpy_impl`; hot per-element loops, the cone-envelope
sweeps, the Thomas solver and the interval interior-point solver are compiled
with ``@njit(cache=True)`` so repeated runs (and worker processes) reuse the
on-disk cache.
"""

import numpy as np
from numba import njit

from . import softmath as sm

NAME = "numba"

_JIT = dict(cache=True, fastmath=False)

degradation = njit(**_JIT)(sm.degradation)
h_lip = njit(**_JIT)(sm.h_lip)
big_h_lip = njit(**_JIT)(sm.big_h_lip)
big_h_lip_derivative = njit(**_JIT)(sm.big_h_lip_derivative)
h_czm = njit(**_JIT)(sm.h_czm)
big_h_czm = njit(**_JIT)(sm.big_h_czm)
big_h_czm_derivative = njit(**_JIT)(sm.big_h_czm_derivative)


# ---------------------------------------------------------------------------
# damage prediction
# ---------------------------------------------------------------------------

@njit(**_JIT)
def predict_czm(eps2, d_prev, e_mod, y_c, lam_c):
    n = eps2.size
    out = np.empty(n)
    for i in range(n):
        dp = d_prev[i]
        if eps2[i] <= 0.0:
            out[i] = dp
            continue
        s = np.sqrt(2.0 * y_c / (e_mod[i] * eps2[i]))
        t = (s - lam_c) / (1.0 - lam_c)
        if t < 0.0:
            t = 0.0
        root = 1.0 - np.sqrt(t)
        out[i] = dp if root < dp else root
    return out


@njit(**_JIT)
def predict_lip(eps2, d_prev, e_mod, y_c, lam):
    n = eps2.size
    out = np.empty(n)
    for i in range(n):
        dp = d_prev[i]
        w = e_mod[i] * eps2[i]
        if y_c * big_h_lip(dp, lam) - (1.0 - dp) * w >= 0.0:
            out[i] = dp
            continue
        lo = dp
        hi = 1.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if y_c * big_h_lip(mid, lam) - (1.0 - mid) * w < 0.0:
                lo = mid
            else:
                hi = mid
        out[i] = 0.5 * (lo + hi)
    return out


# ---------------------------------------------------------------------------
# Lipschitz cone envelopes
# ---------------------------------------------------------------------------

@njit(**_JIT)
def max_adjacent_jump(field):
    m = 0.0
    for i in range(field.size - 1):
        j = abs(field[i + 1] - field[i])
        if j > m:
            m = j
    return m


@njit(**_JIT)
def project_lower(field, c):
    # candidates are always evaluated as field[j*] + c*(i - j*): one product,
    # one sum, bit-identical to the O(N^2) definition at the attained index
    n = field.size
    out = np.empty(n)
    js = 0
    for i in range(n):
        cand = field[js] + c * (i - js)
        if field[i] <= cand:
            js = i
            cand = field[i]
        out[i] = cand
    js = n - 1
    for i in range(n - 1, -1, -1):
        cand = field[js] + c * (js - i)
        if field[i] <= cand:
            js = i
            cand = field[i]
        if cand < out[i]:
            out[i] = cand
    return out


@njit(**_JIT)
def project_upper(field, c):
    n = field.size
    out = np.empty(n)
    js = 0
    for i in range(n):
        cand = field[js] - c * (i - js)
        if field[i] >= cand:
            js = i
            cand = field[i]
        out[i] = cand
    js = n - 1
    for i in range(n - 1, -1, -1):
        cand = field[js] - c * (js - i)
        if field[i] >= cand:
            js = i
            cand = field[i]
        if cand > out[i]:
            out[i] = cand
    return out


# ---------------------------------------------------------------------------
# tridiagonal SPD solve (Thomas / LDL^T, no pivoting)
# ---------------------------------------------------------------------------

@njit(**_JIT)
def _thomas_spd(diag, off, rhs, x):
    """Returns 0 on success, 1 if a pivot is non-positive (not SPD)."""
    n = diag.size
    cp = np.empty(n)
    dp = np.empty(n)
    piv = diag[0]
    if piv <= 0.0:
        return 1
    cp[0] = off[0] / piv if n > 1 else 0.0
    dp[0] = rhs[0] / piv
    for i in range(1, n):
        piv = diag[i] - off[i - 1] * cp[i - 1]
        if piv <= 0.0:
            return 1
        cp[i] = off[i] / piv if i < n - 1 else 0.0
        dp[i] = (rhs[i] - off[i - 1] * dp[i - 1]) / piv
    x[n - 1] = dp[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return 0


@njit(**_JIT)
def solve_tridiag_spd_status(diag, off, rhs):
    x = np.empty(diag.size)
    status = _thomas_spd(diag, off, rhs, x)
    return x, status


def solve_tridiag_spd(diag, off, rhs):
    x, status = solve_tridiag_spd_status(diag, off, rhs)
    if status != 0:
        raise np.linalg.LinAlgError("tridiagonal system is not positive definite")
    return x


# ---------------------------------------------------------------------------
# constrained interval minimization (primal-dual interior point)
# ---------------------------------------------------------------------------

@njit(**_JIT)
def _ipm_newton(r_d, diag, off,
                s_lo, s_hi, s_p, s_m, z_lo, z_hi, z_p, z_m,
                r_lo, r_hi, r_p, r_m,
                rc_lo, rc_hi, rc_p, rc_m):
    m = r_d.size
    nc = m - 1
    rhs = np.empty(m)
    for i in range(m):
        v_lo = (rc_lo[i] - z_lo[i] * r_lo[i]) / s_lo[i]
        v_hi = (rc_hi[i] - z_hi[i] * r_hi[i]) / s_hi[i]
        rhs[i] = -r_d[i] - v_lo + v_hi
    for j in range(nc):
        v_p = (rc_p[j] - z_p[j] * r_p[j]) / s_p[j]
        v_m = (rc_m[j] - z_m[j] * r_m[j]) / s_m[j]
        rhs[j] += v_p - v_m
        rhs[j + 1] += v_m - v_p
    dx = np.empty(m)
    status = _thomas_spd(diag, off, rhs, dx)
    ds_lo = np.empty(m)
    ds_hi = np.empty(m)
    dz_lo = np.empty(m)
    dz_hi = np.empty(m)
    for i in range(m):
        ds_lo[i] = -r_lo[i] + dx[i]
        ds_hi[i] = -r_hi[i] - dx[i]
        dz_lo[i] = -(rc_lo[i] + z_lo[i] * ds_lo[i]) / s_lo[i]
        dz_hi[i] = -(rc_hi[i] + z_hi[i] * ds_hi[i]) / s_hi[i]
    ds_p = np.empty(nc)
    ds_m = np.empty(nc)
    dz_p = np.empty(nc)
    dz_m = np.empty(nc)
    for j in range(nc):
        dxx = dx[j] - dx[j + 1]
        ds_p[j] = -r_p[j] - dxx
        ds_m[j] = -r_m[j] + dxx
        dz_p[j] = -(rc_p[j] + z_p[j] * ds_p[j]) / s_p[j]
        dz_m[j] = -(rc_m[j] + z_m[j] * ds_m[j]) / s_m[j]
    return dx, ds_lo, ds_hi, ds_p, ds_m, dz_lo, dz_hi, dz_p, dz_m, status


@njit(**_JIT)
def _step_limit(v, dv, eta, alpha):
    for i in range(v.size):
        if dv[i] < 0.0:
            a = eta * (-v[i] / dv[i])
            if a < alpha:
                alpha = a
    return alpha


@njit(**_JIT)
def _ipm_merit(w1, lam, c, lo, hi, smu,
               d, s_lo, s_hi, s_p, s_m, z_lo, z_hi, z_p, z_m):
    """Infinity norm of the perturbed-KKT residual."""
    m = d.size
    nc = m - 1
    out = 0.0
    for i in range(m):
        g = w1[i] * (d[i] - 1.0) + big_h_lip(d[i], lam) + z_hi[i] - z_lo[i]
        if i < nc:
            g += z_p[i] - z_m[i]
        if i > 0:
            g -= z_p[i - 1] - z_m[i - 1]
        out = max(out, abs(g))
        out = max(out, abs(s_lo[i] - (d[i] - lo[i])))
        out = max(out, abs(s_hi[i] - (hi[i] - d[i])))
        out = max(out, abs(z_lo[i] * s_lo[i] - smu))
        out = max(out, abs(z_hi[i] * s_hi[i] - smu))
    for j in range(nc):
        dd = d[j] - d[j + 1]
        out = max(out, abs(s_p[j] - (c - dd)))
        out = max(out, abs(s_m[j] - (c + dd)))
        out = max(out, abs(z_p[j] * s_p[j] - smu))
        out = max(out, abs(z_m[j] * s_m[j] - smu))
    return out


@njit(**_JIT)
def solve_interval(w1, lam, c, lo, hi, tol, itmax, t0=0.5, safeguarded=False):
    """Interior-point minimizer; see numpy_impl.solve_interval for the contract."""
    m = w1.size
    nc = m - 1
    ncon = 2 * m + 2 * nc

    d = lo + t0 * (hi - lo)
    # generous slack floor: the start may violate folded-box/chain constraints
    # (infeasible-start handles r_p != 0) and a tiny floor would blow up the
    # matching multiplier z = mu0 / s
    floor = 1e-2 * max(c, 1e-6)
    s_lo = np.maximum(d - lo, floor)
    s_hi = np.maximum(hi - d, floor)
    s_p = np.empty(nc)
    s_m = np.empty(nc)
    for j in range(nc):
        dd = d[j] - d[j + 1]
        s_p[j] = max(c - dd, floor)
        s_m[j] = max(c + dd, floor)

    grad0 = 0.0
    for i in range(m):
        g = abs(w1[i] * (d[i] - 1.0) + big_h_lip(d[i], lam))
        if g > grad0:
            grad0 = g
    mu0 = 0.1 * max(1.0, grad0)
    z_lo = mu0 / s_lo
    z_hi = mu0 / s_hi
    z_p = mu0 / s_p
    z_m = mu0 / s_m

    kkt = np.inf
    for it in range(1, itmax + 1):
        r_d = np.empty(m)
        for i in range(m):
            r_d[i] = w1[i] * (d[i] - 1.0) + big_h_lip(d[i], lam) + z_hi[i] - z_lo[i]
        for j in range(nc):
            zc = z_p[j] - z_m[j]
            r_d[j] += zc
            r_d[j + 1] -= zc

        r_lo = s_lo - (d - lo)
        r_hi = s_hi - (hi - d)
        r_p = np.empty(nc)
        r_m = np.empty(nc)
        for j in range(nc):
            dd = d[j] - d[j + 1]
            r_p[j] = s_p[j] - (c - dd)
            r_m[j] = s_m[j] - (c + dd)

        gap = np.dot(s_lo, z_lo) + np.dot(s_hi, z_hi) + np.dot(s_p, z_p) + np.dot(s_m, z_m)
        mu = gap / ncon

        prim = 0.0
        for i in range(m):
            prim = max(prim, abs(r_lo[i]), abs(r_hi[i]))
        for j in range(nc):
            prim = max(prim, abs(r_p[j]), abs(r_m[j]))
        dual = 0.0
        for i in range(m):
            dual = max(dual, abs(r_d[i]))
        kkt = max(dual, prim)
        if kkt <= tol and mu <= tol:
            return d, kkt + mu, it, True
        if not (np.isfinite(kkt) and np.isfinite(gap)):
            return d, kkt, it, False

        # barrier ratios are capped and the diagonal gets a tiny relative
        # bump: strictly diagonally dominant in exact arithmetic, but at
        # sharply active constraints the margin falls below rounding
        diag = np.empty(m)
        for i in range(m):
            diag[i] = (w1[i] + big_h_lip_derivative(d[i], lam)
                       + min(z_lo[i] / s_lo[i], 1e18)
                       + min(z_hi[i] / s_hi[i], 1e18))
        off = np.empty(nc)
        for j in range(nc):
            w_pm = min(z_p[j] / s_p[j] + z_m[j] / s_m[j], 1e18)
            diag[j] += w_pm
            diag[j + 1] += w_pm
            off[j] = -w_pm
        if not np.isfinite(diag).all():
            return d, kkt, it, False
        diag = diag * (1.0 + 1e-13)

        mehrotra = not safeguarded

        # affine predictor sets the centering weight (escalate the diagonal
        # bump if a pivot fails)
        res = _ipm_newton(r_d, diag, off,
                          s_lo, s_hi, s_p, s_m, z_lo, z_hi, z_p, z_m,
                          r_lo, r_hi, r_p, r_m,
                          z_lo * s_lo, z_hi * s_hi, z_p * s_p, z_m * s_m)
        bump = 1e-10
        while res[9] != 0 and bump <= 1e-2:
            diag = diag * (1.0 + bump)
            res = _ipm_newton(r_d, diag, off,
                              s_lo, s_hi, s_p, s_m, z_lo, z_hi, z_p, z_m,
                              r_lo, r_hi, r_p, r_m,
                              z_lo * s_lo, z_hi * s_hi, z_p * s_p, z_m * s_m)
            bump *= 1e3
        if res[9] != 0:
            return d, kkt, it, False
        dx_a, dsl_a, dsh_a, dsp_a, dsm_a, dzl_a, dzh_a, dzp_a, dzm_a = res[:9]
        a_aff = 1.0
        a_aff = _step_limit(s_lo, dsl_a, 1.0, a_aff)
        a_aff = _step_limit(s_hi, dsh_a, 1.0, a_aff)
        a_aff = _step_limit(s_p, dsp_a, 1.0, a_aff)
        a_aff = _step_limit(s_m, dsm_a, 1.0, a_aff)
        a_aff = _step_limit(z_lo, dzl_a, 1.0, a_aff)
        a_aff = _step_limit(z_hi, dzh_a, 1.0, a_aff)
        a_aff = _step_limit(z_p, dzp_a, 1.0, a_aff)
        a_aff = _step_limit(z_m, dzm_a, 1.0, a_aff)
        gap_aff = (np.dot(s_lo + a_aff * dsl_a, z_lo + a_aff * dzl_a)
                   + np.dot(s_hi + a_aff * dsh_a, z_hi + a_aff * dzh_a)
                   + np.dot(s_p + a_aff * dsp_a, z_p + a_aff * dzp_a)
                   + np.dot(s_m + a_aff * dsm_a, z_m + a_aff * dzm_a))
        sigma = (gap_aff / max(gap, 1e-300)) ** 3
        sigma = min(max(sigma, 1e-6), 0.9)
        if gap * 10.0 < kkt:
            sigma = max(sigma, 0.5)  # keep centering while stationarity lags
        if not mehrotra:
            sigma = max(sigma, 0.5)
        smu = sigma * mu

        if mehrotra:
            res = _ipm_newton(r_d, diag, off,
                              s_lo, s_hi, s_p, s_m, z_lo, z_hi, z_p, z_m,
                              r_lo, r_hi, r_p, r_m,
                              z_lo * s_lo - smu + dsl_a * dzl_a,
                              z_hi * s_hi - smu + dsh_a * dzh_a,
                              z_p * s_p - smu + dsp_a * dzp_a,
                              z_m * s_m - smu + dsm_a * dzm_a)
        else:
            res = _ipm_newton(r_d, diag, off,
                              s_lo, s_hi, s_p, s_m, z_lo, z_hi, z_p, z_m,
                              r_lo, r_hi, r_p, r_m,
                              z_lo * s_lo - smu,
                              z_hi * s_hi - smu,
                              z_p * s_p - smu,
                              z_m * s_m - smu)
        if res[9] != 0:
            return d, kkt, it, False
        dx, dsl, dsh, dsp, dsm, dzl, dzh, dzp, dzm = res[:9]
        a_p = 1.0
        a_p = _step_limit(s_lo, dsl, 0.995, a_p)
        a_p = _step_limit(s_hi, dsh, 0.995, a_p)
        a_p = _step_limit(s_p, dsp, 0.995, a_p)
        a_p = _step_limit(s_m, dsm, 0.995, a_p)
        a_d = 1.0
        a_d = _step_limit(z_lo, dzl, 0.995, a_d)
        a_d = _step_limit(z_hi, dzh, 0.995, a_d)
        a_d = _step_limit(z_p, dzp, 0.995, a_d)
        a_d = _step_limit(z_m, dzm, 0.995, a_d)

        t = 1.0
        if not mehrotra:
            # safeguarded phase: the plain centering step aims exactly at the
            # sigma*mu point, so backtrack on that system's residual (the
            # softening derivative is strongly nonlinear near d = 1)
            merit0 = _ipm_merit(w1, lam, c, lo, hi, smu,
                                d, s_lo, s_hi, s_p, s_m, z_lo, z_hi, z_p, z_m)
            for _ in range(12):
                d_t = d + (t * a_p) * dx
                sl_t = s_lo + (t * a_p) * dsl
                sh_t = s_hi + (t * a_p) * dsh
                sp_t = s_p + (t * a_p) * dsp
                sm_t = s_m + (t * a_p) * dsm
                zl_t = z_lo + (t * a_d) * dzl
                zh_t = z_hi + (t * a_d) * dzh
                zp_t = z_p + (t * a_d) * dzp
                zm_t = z_m + (t * a_d) * dzm
                if _ipm_merit(w1, lam, c, lo, hi, smu, d_t, sl_t, sh_t, sp_t,
                              sm_t, zl_t, zh_t, zp_t, zm_t) < merit0:
                    break
                t *= 0.5

        d = d + (t * a_p) * dx
        s_lo = s_lo + (t * a_p) * dsl
        s_hi = s_hi + (t * a_p) * dsh
        s_p = s_p + (t * a_p) * dsp
        s_m = s_m + (t * a_p) * dsm
        z_lo = z_lo + (t * a_d) * dzl
        z_hi = z_hi + (t * a_d) * dzh
        z_p = z_p + (t * a_d) * dzp
        z_m = z_m + (t * a_d) * dzm

    return d, kkt, itmax, False


@njit(**_JIT)
def polish_interval(w1, lam, c, lo, hi, d_approx, link_tol, btol):
    """Active-set refinement of a near-optimal point; exact for rigid groups.

    Freezes chain links within ``link_tol`` of their bound, solves each rigid
    group's scalar by bisection, and certifies KKT via interval propagation of
    the chain multipliers.  Returns (d, kkt, certified).
    """
    m = w1.size
    offsets = np.zeros(m)
    linked = np.zeros(max(m - 1, 0), dtype=np.bool_)
    for j in range(m - 1):
        gap = d_approx[j] - d_approx[j + 1]
        if abs(gap - c) <= link_tol:
            linked[j] = True
            offsets[j + 1] = offsets[j] - c
        elif abs(gap + c) <= link_tol:
            linked[j] = True
            offsets[j + 1] = offsets[j] + c
        else:
            offsets[j + 1] = 0.0

    d = np.empty(m)
    a = 0
    while a < m:
        b = a
        while b + 1 < m and linked[b]:
            b += 1
        t_lo = -np.inf
        t_hi = np.inf
        for i in range(a, b + 1):
            t_lo = max(t_lo, lo[i] - offsets[i])
            t_hi = min(t_hi, hi[i] - offsets[i])
        if t_lo > t_hi + 1e-12:
            return d_approx, np.inf, False
        if t_hi < t_lo:
            t_hi = t_lo

        s_lo = 0.0
        s_hi = 0.0
        for i in range(a, b + 1):
            dv = t_lo + offsets[i]
            s_lo += w1[i] * (dv - 1.0) + big_h_lip(dv, lam)
            dv = t_hi + offsets[i]
            s_hi += w1[i] * (dv - 1.0) + big_h_lip(dv, lam)
        if s_lo >= 0.0:
            t = t_lo
        elif s_hi <= 0.0:
            t = t_hi
        else:
            ta = t_lo
            tb = t_hi
            for _ in range(100):
                tm = 0.5 * (ta + tb)
                s = 0.0
                for i in range(a, b + 1):
                    dv = tm + offsets[i]
                    s += w1[i] * (dv - 1.0) + big_h_lip(dv, lam)
                if s < 0.0:
                    ta = tm
                else:
                    tb = tm
            t = 0.5 * (ta + tb)
        for i in range(a, b + 1):
            d[i] = t + offsets[i]
        a = b + 1

    # chain constraints across unlinked boundaries must still hold
    for j in range(m - 1):
        if not linked[j] and abs(d[j] - d[j + 1]) > c + 1e-12:
            return d_approx, np.inf, False

    # certificate: sign-correct multipliers must exist (interval propagation)
    grad = np.empty(m)
    for i in range(m):
        grad[i] = w1[i] * (d[i] - 1.0) + big_h_lip(d[i], lam)
    nu_min = 0.0
    nu_max = 0.0
    for i in range(m):
        at_lo = d[i] - lo[i] <= btol
        at_hi = hi[i] - d[i] <= btol
        nmin = nu_min - grad[i]
        if at_hi:
            nmin = -np.inf
        nmax = nu_max - grad[i]
        if at_lo:
            nmax = np.inf
        if i == m - 1 or not linked[i]:
            allowed_lo = 0.0
            allowed_hi = 0.0
        elif d[i] - d[i + 1] > 0.0:
            allowed_lo = 0.0
            allowed_hi = np.inf
        else:
            allowed_lo = -np.inf
            allowed_hi = 0.0
        nu_min = max(nmin, allowed_lo)
        nu_max = min(nmax, allowed_hi)
        if nu_min > nu_max + 1e-7:
            return d_approx, np.inf, False
        if nu_min > nu_max:
            nu_min = nu_max

    kkt = 0.0
    a = 0
    while a < m:
        b = a
        while b + 1 < m and linked[b]:
            b += 1
        t = d[a] - offsets[a]
        t_lo = -np.inf
        t_hi = np.inf
        for i in range(a, b + 1):
            t_lo = max(t_lo, lo[i] - offsets[i])
            t_hi = min(t_hi, hi[i] - offsets[i])
        if t - t_lo > btol and t_hi - t > btol:
            s = 0.0
            for i in range(a, b + 1):
                s += grad[i]
            kkt = max(kkt, abs(s))
        a = b + 1
    return d, kkt, True
