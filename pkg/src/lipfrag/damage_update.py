"""Damage half-step of the staggered scheme.

The unconstrained per-element prediction minimizes
phi(eps, d) + Y_c h(d) over [d_prev, 1] (the inertia term does not involve d).
For the crack-band variant that is the whole update.  For the regularized
variant the prediction is projected: wherever the cone envelopes differ, the
bound-and-chain-constrained convex minimization runs on that interval, with
the field frozen at the prediction just outside.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._backend import kernels, softmath as sm
from .errors import NonConvergenceError
from .lip_projection import EQ_TOL, ProjectionBounds, active_intervals, is_lipschitz, \
    project_lower, project_upper
from .material import CZM, MaterialModel, ModulusField
from .mesh import Mesh1D, strain_field

# Bound gap below which an element counts as fixed at the (coinciding) bounds.
# Kept well above the projection equality tolerance so the interior-point
# kernel never sees a box too thin to hold a strictly feasible point.
_PIN_TOL = 1e-7
_IPM_MAX_ITER = 150   # per attempt; stalled attempts fall through to the polish
_LINK_TOL = 1e-6      # chain slack below which the polish freezes a link
_BOUND_TOL = 1e-9     # box slack below which a bound counts as active


@dataclass
class DamageSubproblem:
    """Constrained minimization restricted to elements [start, stop] inclusive."""
    start: int
    stop: int
    strain: np.ndarray        # per element in the interval
    e_mod: np.ndarray
    lower: np.ndarray         # max(d_n, pi^l)
    upper: np.ndarray         # min(1, pi^u)
    slope: float              # h_e / ell
    material: MaterialModel
    left_value: Optional[float] = None   # fixed damage just outside the interval
    right_value: Optional[float] = None

    def __post_init__(self):
        if np.any(self.lower > self.upper + _PIN_TOL):
            raise ValueError(
                "subproblem has lower bound above upper bound; projection bug upstream"
            )

    def objective(self, d: np.ndarray) -> float:
        """Interval objective (per unit cross-section, h_e factored out)."""
        m = self.material
        elastic = 0.5 * self.e_mod * self.strain ** 2 * (1.0 - d) ** 2
        return float(np.sum(elastic + m.y_c * m.softening(d)))


def predict_local(eps, d_prev, material: MaterialModel, e_mod=None):
    """Minimizer of phi(eps, d) + Y_c h(d) over [d_prev, 1], elementwise.

    Solved to |delta d| <= 1e-10: closed form for the crack-band variant,
    60-step bisection on the stationarity equation for the regularized one.
    """
    scalar = np.ndim(eps) == 0 and np.ndim(d_prev) == 0
    eps = np.atleast_1d(np.asarray(eps, dtype=float))
    d_prev_arr = np.ascontiguousarray(
        np.broadcast_to(np.asarray(d_prev, dtype=float), eps.shape))
    if e_mod is None:
        e_arr = np.full(eps.shape, material.e_mod)
    else:
        e_arr = np.ascontiguousarray(np.broadcast_to(np.asarray(e_mod, dtype=float), eps.shape))
    eps2 = eps * eps
    if material.variant == CZM:
        out = kernels.predict_czm(eps2, d_prev_arr, e_arr, material.y_c, material.lam_c)
    else:
        out = kernels.predict_lip(eps2, d_prev_arr, e_arr, material.y_c, material.lam)
    if scalar:
        return float(out[0])
    return out


def _scipy_rescue(w1, lam, c, lo, hi, d_start, tol):
    """Solve a stalled interval with scipy's trust-constr (rare path)."""
    from scipy.optimize import Bounds, LinearConstraint, minimize

    m = w1.size

    def fun(d):
        return float(np.sum(0.5 * w1 * (1.0 - d) ** 2 + sm.h_lip(d, lam)))

    def jac(d):
        return w1 * (d - 1.0) + sm.big_h_lip(d, lam)

    def hess(d):
        return np.diag(w1 + sm.big_h_lip_derivative(d, lam))

    constraints = []
    if m > 1:
        a_mat = np.zeros((m - 1, m))
        idx = np.arange(m - 1)
        a_mat[idx, idx] = 1.0
        a_mat[idx, idx + 1] = -1.0
        constraints.append(LinearConstraint(a_mat, -c, c))
    res = minimize(fun, np.clip(d_start, lo, hi), jac=jac, hess=hess,
                   method="trust-constr", bounds=Bounds(lo, hi),
                   constraints=constraints,
                   options=dict(gtol=min(tol, 1e-9), xtol=1e-14, maxiter=1000))
    # interior-point leaves ~1e-10 constraint slosh; box parts are clipped by
    # the caller and chain parts are far below the feasibility tolerance
    ok = bool(res.optimality <= tol and res.constr_violation <= 1e-8)
    return np.asarray(res.x), float(res.optimality), ok


def solve_constrained(sub: DamageSubproblem, tol: Optional[float] = None) -> np.ndarray:
    """Constrained minimizer on the interval, KKT residual <= tol.

    ``tol`` defaults to 1e-8 * Y_c (for the objective with the uniform element
    length factored out).  Elements whose bound gap is below the equality
    tolerance are pinned at their (coinciding) bounds and act as fixed chain
    anchors; the remaining free runs are solved by the interior-point kernel.
    """
    m = sub.material
    y_c = m.y_c
    if tol is None:
        tol = 1e-8
    else:
        tol = tol / y_c
    n = sub.upper.size

    lo = sub.lower.copy()
    hi = sub.upper.copy()
    # fold the exterior fixed values into the end boxes through the cone
    if sub.left_value is not None:
        lo[0] = max(lo[0], sub.left_value - sub.slope)
        hi[0] = min(hi[0], sub.left_value + sub.slope)
    if sub.right_value is not None:
        lo[-1] = max(lo[-1], sub.right_value - sub.slope)
        hi[-1] = min(hi[-1], sub.right_value + sub.slope)
    np.minimum(lo, hi, out=lo)

    d_out = 0.5 * (lo + hi)
    pinned = (hi - lo) <= _PIN_TOL
    w1 = sub.e_mod * sub.strain ** 2 / y_c
    i = 0
    while i < n:
        if pinned[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and not pinned[j + 1]:
            j += 1
        flo = lo[i:j + 1].copy()
        fhi = hi[i:j + 1].copy()
        if i > 0:
            flo[0] = max(flo[0], d_out[i - 1] - sub.slope)
            fhi[0] = min(fhi[0], d_out[i - 1] + sub.slope)
        if j < n - 1:
            flo[-1] = max(flo[-1], d_out[j + 1] - sub.slope)
            fhi[-1] = min(fhi[-1], d_out[j + 1] + sub.slope)
        np.minimum(flo, fhi, out=flo)
        w1run = np.ascontiguousarray(w1[i:j + 1])
        # elastic weights can reach ~1e8 x Y_c in a nearly broken element;
        # below the float64 noise floor of the gradient the stated tolerance
        # is unattainable, so it gets a scale-aware floor
        tol_run = max(tol, 1e-15 * max(1.0, float(w1run.max())))
        kkt = np.inf
        best_kkt = np.inf
        mid = 0.5 * (flo + fhi)
        # the active-set polish first: it certifies exactly and in O(m) on
        # the rigid saturated-cone configurations that dominate once
        # localization zones mature (and stall interior-point endgames)
        d_run, kkt_pol, ok = kernels.polish_interval(
            w1run, m.lam, sub.slope, flo, fhi, mid, _LINK_TOL, _BOUND_TOL)
        ok = bool(ok) and kkt_pol <= tol_run
        if ok:
            kkt = kkt_pol
        # generic configurations: interior point, each stalled iterate
        # re-polished; a general-purpose constrained minimizer is the
        # last resort
        candidates = []
        if not ok:
            for t0, safeguarded in ((0.5, False), (0.5, True), (0.75, False)):
                d_run, kkt, iters, ipm_ok = kernels.solve_interval(
                    w1run, m.lam, sub.slope, flo, fhi, tol_run, _IPM_MAX_ITER,
                    t0, safeguarded)
                best_kkt = min(best_kkt, float(kkt)) if np.isfinite(kkt) else best_kkt
                if ipm_ok:
                    ok = True
                    break
                if np.isfinite(d_run).all():
                    candidates.append(d_run)
                    d_run, kkt_pol, cert = kernels.polish_interval(
                        w1run, m.lam, sub.slope, flo, fhi, candidates[-1],
                        _LINK_TOL, _BOUND_TOL)
                    if cert and kkt_pol <= tol_run:
                        ok = True
                        kkt = kkt_pol
                        break
        if not ok:
            for cand in candidates + [mid]:
                d_run, kkt_sp, ok = _scipy_rescue(w1run, m.lam, sub.slope,
                                                  flo, fhi, cand, tol_run)
                if ok:
                    kkt = kkt_sp
                    break
        if not ok:
            err = NonConvergenceError(
                f"constrained damage solve on elements [{sub.start + i}, {sub.start + j}] "
                f"did not reach tolerance {tol_run:.1e} in {_IPM_MAX_ITER} iterations",
                float(min(kkt, best_kkt)))
            err.subproblem = (w1run.copy(), m.lam, sub.slope, flo.copy(), fhi.copy())
            raise err
        # interior-point output can sit within kkt-tolerance outside a bound;
        # clip so irreversibility and the sandwich hold exactly
        d_out[i:j + 1] = np.clip(d_run, flo, fhi)
        i = j + 1
    return d_out


def damage_step(u: np.ndarray, d_prev: np.ndarray, mesh: Mesh1D,
                material: MaterialModel, field: ModulusField):
    """Full damage update for a displacement field; returns (d_new, active_mask)."""
    eps = strain_field(u, mesh)
    return damage_step_strains(eps, d_prev, mesh, material, field)


def damage_step_strains(eps: np.ndarray, d_prev: np.ndarray, mesh: Mesh1D,
                        material: MaterialModel, field: ModulusField):
    """Same as :func:`damage_step` but from precomputed element strains."""
    eps2 = eps * eps
    if material.variant == CZM:
        d_bar = kernels.predict_czm(eps2, d_prev, field.values, material.y_c,
                                    material.lam_c)
        return d_bar, np.zeros(mesh.n_elements, dtype=bool)

    d_bar = kernels.predict_lip(eps2, d_prev, field.values, material.y_c,
                                material.lam)
    mask = np.zeros(mesh.n_elements, dtype=bool)
    slope = mesh.h_e / material.ell
    if is_lipschitz(d_bar, mesh.h_e, material.ell):
        return d_bar, mask

    lower = project_lower(d_bar, mesh.h_e, material.ell)
    upper = project_upper(d_bar, mesh.h_e, material.ell)
    intervals = active_intervals(ProjectionBounds(lower, upper))
    d_new = d_bar.copy()
    for a, b in intervals:
        sub = DamageSubproblem(
            start=a, stop=b,
            strain=eps[a:b + 1],
            e_mod=field.values[a:b + 1],
            lower=np.maximum(d_prev[a:b + 1], lower[a:b + 1]),
            upper=np.minimum(1.0, upper[a:b + 1]),
            slope=slope,
            material=material,
            left_value=float(d_bar[a - 1]) if a > 0 else None,
            right_value=float(d_bar[b + 1]) if b < mesh.n_elements - 1 else None,
        )
        d_new[a:b + 1] = solve_constrained(sub)
        mask[a:b + 1] = True
    return d_new, mask
