"""Pure-numpy compute kernels (fallback backend).

Vectorized counterparts of the numba kernels in :mod:`numba_impl`.  The two
backends implement identical math; this one trades the compiled per-element
loops for array tricks (prefix scans for the cone envelopes, masked bisection
for the damage prediction) so it stays usable when numba is unavailable or
disabled via ``LIPFRAG_BACKEND=numpy``.
"""

import numpy as np
from scipy.linalg import solveh_banded

from . import softmath as sm

NAME = "numpy"

W_CAP = 1e18  # cap on barrier weights z/s; keeps the Newton matrix finite


# ---------------------------------------------------------------------------
# damage prediction (per-element unconstrained minimizer)
# ---------------------------------------------------------------------------

def predict_czm(eps2, d_prev, e_mod, y_c, lam_c):
    out = d_prev.copy()
    pos = eps2 > 0.0
    if not pos.any():
        return out
    out[pos] = sm.czm_prediction_root(eps2[pos], d_prev[pos], e_mod[pos], y_c, lam_c)
    return out


def predict_lip(eps2, d_prev, e_mod, y_c, lam):
    """Bisection (60 fixed iterations) on (1-d) E eps^2 = Y_c H(d), per element."""
    w = e_mod * eps2
    theta = y_c * sm.big_h_lip(d_prev, lam) - (1.0 - d_prev) * w
    grow = theta < 0.0
    out = d_prev.copy()
    if not grow.any():
        return out
    lo = d_prev[grow]
    hi = np.ones_like(lo)
    wg = w[grow]
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        neg = y_c * sm.big_h_lip(mid, lam) - (1.0 - mid) * wg < 0.0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
    out[grow] = 0.5 * (lo + hi)
    return out


# ---------------------------------------------------------------------------
# Lipschitz cone envelopes
# ---------------------------------------------------------------------------

def max_adjacent_jump(field):
    if field.size < 2:
        return 0.0
    return float(np.abs(np.diff(field)).max())


def _carry_argmin(values):
    """Index of the running minimum of ``values`` (latest index on exact ties)."""
    idx = np.arange(values.size)
    run = np.minimum.accumulate(values)
    return np.maximum.accumulate(np.where(values == run, idx, -1))


def _carry_argmax(values):
    idx = np.arange(values.size)
    run = np.maximum.accumulate(values)
    return np.maximum.accumulate(np.where(values == run, idx, -1))


def project_lower(field, c):
    """Lower cone envelope min_j (field_j + c |i - j|) in O(N).

    The scan locates the argmin per position; the returned value is recomputed
    as ``field[j*] + c*(i - j*)`` so it matches the brute-force definition to
    the last bit (no accumulated additions).
    """
    n = field.size
    idx = np.arange(n)
    jf = _carry_argmin(field - c * idx)
    fwd = field[jf] + c * (idx - jf)
    rev = field[::-1]
    jb = _carry_argmin(rev - c * idx)
    bwd = (rev[jb] + c * (idx - jb))[::-1]
    return np.minimum(fwd, bwd)


def project_upper(field, c):
    """Upper cone envelope max_j (field_j - c |i - j|) in O(N)."""
    n = field.size
    idx = np.arange(n)
    jf = _carry_argmax(field + c * idx)
    fwd = field[jf] - c * (idx - jf)
    rev = field[::-1]
    jb = _carry_argmax(rev + c * idx)
    bwd = (rev[jb] - c * (idx - jb))[::-1]
    return np.maximum(fwd, bwd)


# ---------------------------------------------------------------------------
# tridiagonal SPD solve
# ---------------------------------------------------------------------------

def solve_tridiag_spd(diag, off, rhs):
    """Solve the symmetric positive definite tridiagonal system.

    Raises ``np.linalg.LinAlgError`` (via scipy) if the matrix is not PD.
    """
    n = diag.size
    ab = np.zeros((2, n))
    ab[0, 1:] = off
    ab[1, :] = diag
    return solveh_banded(ab, rhs, lower=False)


# ---------------------------------------------------------------------------
# constrained interval minimization (primal-dual interior point)
# ---------------------------------------------------------------------------

def solve_interval(w1, lam, c, lo, hi, tol, itmax, t0=0.5, safeguarded=False):
    """Minimize sum_i [ w1_i (1-d_i)^2 / 2 + h(d_i; lam) ] over the box and chain.

    Objective is pre-normalized by Y_c (w1 = E_e eps_e^2 / Y_c).  Constraints:
    lo <= d <= hi and |d_i - d_{i+1}| <= c.  Primal-dual interior point on the
    tridiagonal reduced Newton system: fast Mehrotra predictor-corrector by
    default, or (``safeguarded=True``) a damped centering method with a merit
    line search that copes with the strongly nonlinear softening derivative
    near d = 1 and with degenerate active sets.  ``t0`` sets the starting
    point lo + t0 (hi - lo); stalled solves are retried with other modes and
    starts by the caller.

    Returns (d, kkt_residual, iterations, converged_flag).
    """
    m = w1.size
    nc = m - 1

    d = lo + t0 * (hi - lo)
    # generous slack floor: the start may violate folded-box/chain constraints
    # (infeasible-start handles r_p != 0) and a tiny floor would blow up the
    # matching multiplier z = mu0 / s
    floor = 1e-2 * max(c, 1e-6)
    s_lo = np.maximum(d - lo, floor)
    s_hi = np.maximum(hi - d, floor)
    if nc > 0:
        dd = d[:-1] - d[1:]
        s_p = np.maximum(c - dd, floor)
        s_m = np.maximum(c + dd, floor)
    else:
        s_p = np.empty(0)
        s_m = np.empty(0)

    grad0 = np.abs(w1 * (d - 1.0) + sm.big_h_lip(d, lam)).max()
    mu0 = 0.1 * max(1.0, grad0)
    z_lo = mu0 / s_lo
    z_hi = mu0 / s_hi
    z_p = mu0 / s_p if nc > 0 else np.empty(0)
    z_m = mu0 / s_m if nc > 0 else np.empty(0)

    ncon = 2 * m + 2 * nc
    kkt = np.inf

    def residuals(dv, slov, shiv, spv, smv, zlov, zhiv, zpv, zmv):
        gf = w1 * (dv - 1.0) + sm.big_h_lip(dv, lam)
        atz = zhiv - zlov
        if nc > 0:
            zc = zpv - zmv
            atz[:-1] = atz[:-1] + zc
            atz[1:] = atz[1:] - zc
        r_d = gf + atz
        r_lo = slov - (dv - lo)
        r_hi = shiv - (hi - dv)
        if nc > 0:
            dd = dv[:-1] - dv[1:]
            r_p = spv - (c - dd)
            r_m = smv - (c + dd)
        else:
            r_p = np.empty(0)
            r_m = np.empty(0)
        return r_d, r_lo, r_hi, r_p, r_m

    for it in range(1, itmax + 1):
        r_d, r_lo, r_hi, r_p, r_m = residuals(d, s_lo, s_hi, s_p, s_m,
                                              z_lo, z_hi, z_p, z_m)
        gap = s_lo @ z_lo + s_hi @ z_hi
        if nc > 0:
            gap += s_p @ z_p + s_m @ z_m
        mu = gap / ncon

        prim = max(np.abs(r_lo).max(), np.abs(r_hi).max())
        if nc > 0:
            prim = max(prim, np.abs(r_p).max(), np.abs(r_m).max())
        kkt = max(float(np.abs(r_d).max()), float(prim))
        if kkt <= tol and mu <= tol:
            return d, kkt + mu, it, True
        if not (np.isfinite(kkt) and np.isfinite(gap)):
            return d, kkt, it, False

        # barrier ratios are capped and the diagonal gets a tiny relative bump:
        # strictly diagonally dominant in exact arithmetic, but at sharply
        # active constraints the dominance margin falls below rounding
        hess = w1 + sm.big_h_lip_derivative(d, lam)
        w_lo = np.minimum(z_lo / s_lo, W_CAP)
        w_hi = np.minimum(z_hi / s_hi, W_CAP)
        diag = hess + w_lo + w_hi
        if nc > 0:
            w_pm = np.minimum(z_p / s_p + z_m / s_m, W_CAP)
            diag[:-1] += w_pm
            diag[1:] += w_pm
            off = -w_pm
        else:
            off = np.empty(0)
        if not np.isfinite(diag).all():
            return d, kkt, it, False

        def newton(rc_lo, rc_hi, rc_p, rc_m):
            v_lo = (rc_lo - z_lo * r_lo) / s_lo
            v_hi = (rc_hi - z_hi * r_hi) / s_hi
            rhs = -r_d - v_lo + v_hi
            if nc > 0:
                v_p = (rc_p - z_p * r_p) / s_p
                v_m = (rc_m - z_m * r_m) / s_m
                rhs[:-1] += v_p - v_m
                rhs[1:] += v_m - v_p
            bump = 1e-13
            while True:
                try:
                    dx = solve_tridiag_spd(diag * (1.0 + bump), off, rhs)
                    break
                except np.linalg.LinAlgError:
                    bump *= 1e3
                    if bump > 1e-2:
                        raise
            ds_lo = -r_lo + dx
            ds_hi = -r_hi - dx
            dz_lo = -(rc_lo + z_lo * ds_lo) / s_lo
            dz_hi = -(rc_hi + z_hi * ds_hi) / s_hi
            if nc > 0:
                dxx = dx[:-1] - dx[1:]
                ds_p = -r_p - dxx
                ds_m = -r_m + dxx
                dz_p = -(rc_p + z_p * ds_p) / s_p
                dz_m = -(rc_m + z_m * ds_m) / s_m
            else:
                ds_p = ds_m = dz_p = dz_m = np.empty(0)
            return dx, (ds_lo, ds_hi, ds_p, ds_m), (dz_lo, dz_hi, dz_p, dz_m)

        def max_step(vals, deltas, eta):
            alpha = 1.0
            for v, dv in zip(vals, deltas):
                neg = dv < 0.0
                if neg.any():
                    alpha = min(alpha, float((eta * (-v[neg] / dv[neg])).min()))
            return alpha

        s_all = (s_lo, s_hi, s_p, s_m)
        z_all = (z_lo, z_hi, z_p, z_m)
        mehrotra = not safeguarded

        try:
            # affine predictor sets the centering weight
            dx_a, ds_a, dz_a = newton(z_lo * s_lo, z_hi * s_hi, z_p * s_p, z_m * s_m)
            a_aff = min(max_step(s_all, ds_a, 1.0), max_step(z_all, dz_a, 1.0))
            gap_aff = 0.0
            for v, dv, zv, dzv in zip(s_all, ds_a, z_all, dz_a):
                gap_aff += (v + a_aff * dv) @ (zv + a_aff * dzv)
            sigma = min(max((gap_aff / max(gap, 1e-300)) ** 3, 1e-6), 0.9)
            if gap * 10.0 < kkt:
                sigma = max(sigma, 0.5)  # keep centering while stationarity lags
            if not mehrotra:
                sigma = max(sigma, 0.5)
            smu = sigma * mu
            if mehrotra:
                dx, ds, dz = newton(
                    z_lo * s_lo - smu + ds_a[0] * dz_a[0],
                    z_hi * s_hi - smu + ds_a[1] * dz_a[1],
                    (z_p * s_p - smu + ds_a[2] * dz_a[2]) if nc > 0 else np.empty(0),
                    (z_m * s_m - smu + ds_a[3] * dz_a[3]) if nc > 0 else np.empty(0),
                )
            else:
                dx, ds, dz = newton(
                    z_lo * s_lo - smu,
                    z_hi * s_hi - smu,
                    (z_p * s_p - smu) if nc > 0 else np.empty(0),
                    (z_m * s_m - smu) if nc > 0 else np.empty(0),
                )
        except np.linalg.LinAlgError:
            return d, kkt, it, False
        a_p = min(max_step(s_all, ds, 0.995), 1.0)
        a_d = min(max_step(z_all, dz, 0.995), 1.0)

        if mehrotra:
            t = 1.0
        else:
            # safeguarded phase: the plain centering step aims exactly at the
            # sigma*mu point, so backtrack on that system's residual (the
            # softening derivative is strongly nonlinear near d = 1)
            def merit(dv, sv, zv):
                rr = residuals(dv, sv[0], sv[1], sv[2], sv[3],
                               zv[0], zv[1], zv[2], zv[3])
                out = 0.0
                for r in rr:
                    if r.size:
                        out = max(out, float(np.abs(r).max()))
                for s_a, z_a in zip(sv, zv):
                    if s_a.size:
                        out = max(out, float(np.abs(z_a * s_a - smu).max()))
                return out

            merit0 = merit(d, s_all, z_all)
            t = 1.0
            for _ in range(12):
                s_t = tuple(s + (t * a_p) * dsv for s, dsv in zip(s_all, ds))
                z_t = tuple(z + (t * a_d) * dzv for z, dzv in zip(z_all, dz))
                if merit(d + (t * a_p) * dx, s_t, z_t) < merit0:
                    break
                t *= 0.5

        d = d + (t * a_p) * dx
        s_lo = s_lo + (t * a_p) * ds[0]
        s_hi = s_hi + (t * a_p) * ds[1]
        z_lo = z_lo + (t * a_d) * dz[0]
        z_hi = z_hi + (t * a_d) * dz[1]
        if nc > 0:
            s_p = s_p + (t * a_p) * ds[2]
            s_m = s_m + (t * a_p) * ds[3]
            z_p = z_p + (t * a_d) * dz[2]
            z_m = z_m + (t * a_d) * dz[3]

    return d, kkt, itmax, False


def polish_interval(w1, lam, c, lo, hi, d_approx, link_tol, btol):
    """Active-set refinement; see numba_impl.polish_interval for the contract."""
    m = w1.size
    offsets = np.zeros(m)
    linked = np.zeros(max(m - 1, 0), dtype=bool)
    for j in range(m - 1):
        gap = d_approx[j] - d_approx[j + 1]
        if abs(gap - c) <= link_tol:
            linked[j] = True
            offsets[j + 1] = offsets[j] - c
        elif abs(gap + c) <= link_tol:
            linked[j] = True
            offsets[j + 1] = offsets[j] + c

    starts = [0] + [j + 1 for j in range(m - 1) if not linked[j]] + [m]
    d = np.empty(m)
    for g in range(len(starts) - 1):
        a, b = starts[g], starts[g + 1]
        o = offsets[a:b]
        t_lo = float(np.max(lo[a:b] - o))
        t_hi = float(np.min(hi[a:b] - o))
        if t_lo > t_hi + 1e-12:
            return d_approx, np.inf, False
        t_hi = max(t_hi, t_lo)
        wg = w1[a:b]

        def slope(t):
            dv = t + o
            return float(np.sum(wg * (dv - 1.0) + sm.big_h_lip(dv, lam)))

        if slope(t_lo) >= 0.0:
            t = t_lo
        elif slope(t_hi) <= 0.0:
            t = t_hi
        else:
            ta, tb = t_lo, t_hi
            for _ in range(100):
                tm = 0.5 * (ta + tb)
                if slope(tm) < 0.0:
                    ta = tm
                else:
                    tb = tm
            t = 0.5 * (ta + tb)
        d[a:b] = t + o

    for j in range(m - 1):
        if not linked[j] and abs(d[j] - d[j + 1]) > c + 1e-12:
            return d_approx, np.inf, False

    grad = w1 * (d - 1.0) + sm.big_h_lip(d, lam)
    nu_min = nu_max = 0.0
    for i in range(m):
        nmin = -np.inf if hi[i] - d[i] <= btol else nu_min - grad[i]
        nmax = np.inf if d[i] - lo[i] <= btol else nu_max - grad[i]
        if i == m - 1 or not linked[i]:
            allowed_lo = allowed_hi = 0.0
        elif d[i] - d[i + 1] > 0.0:
            allowed_lo, allowed_hi = 0.0, np.inf
        else:
            allowed_lo, allowed_hi = -np.inf, 0.0
        nu_min = max(nmin, allowed_lo)
        nu_max = min(nmax, allowed_hi)
        if nu_min > nu_max + 1e-7:
            return d_approx, np.inf, False
        nu_min = min(nu_min, nu_max)

    kkt = 0.0
    for g in range(len(starts) - 1):
        a, b = starts[g], starts[g + 1]
        o = offsets[a:b]
        t = d[a] - offsets[a]
        t_lo = float(np.max(lo[a:b] - o))
        t_hi = float(np.min(hi[a:b] - o))
        if t - t_lo > btol and t_hi - t > btol:
            kkt = max(kkt, abs(float(np.sum(grad[a:b]))))
    return d, kkt, True
