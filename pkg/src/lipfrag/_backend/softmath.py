"""Closed-form constitutive functions shared by both compute backends.

Everything here is plain ufunc arithmetic: each function works elementwise on
scalars or numpy arrays, and compiles as-is under numba's nopython mode (the
numba backend re-wraps these with ``njit``).

Conventions: ``d`` is the damage variable in [0, 1], ``lam`` the softening
parameter of the regularized model (convex for lam <= 1/2), ``lam_c`` the
element-size-dependent parameter of the crack-band model (valid in (0, 1)).
"""

import numpy as np


def degradation(d):
    """Stiffness multiplier g(d) = (1 - d)^2."""
    return (1.0 - d) * (1.0 - d)


def degradation_derivative(d):
    """g'(d) = -2 (1 - d)."""
    return -2.0 * (1.0 - d)


def h_lip(d, lam):
    """Softening primitive of the regularized model: (2d - d^2) / (1 - d + lam d^2)^2."""
    q = 1.0 - d + lam * d * d
    return (2.0 * d - d * d) / (q * q)


def big_h_lip(d, lam):
    """H(d) = h'(d) for the regularized model, in closed form.

    With q = 1 - d + lam d^2 and N = 1 - lam d^2 (3 - d):
    H = 2 N / q^3.  H(0) = 2, H(1) = 2 (1 - 2 lam) / lam^3.
    """
    q = 1.0 - d + lam * d * d
    n = 1.0 - lam * d * d * (3.0 - d)
    return 2.0 * n / (q * q * q)


def big_h_lip_derivative(d, lam):
    """H'(d) = h''(d) for the regularized model.

    H' = 6 [ -lam d (2 - d) q + N (1 - 2 lam d) ] / q^4, nonnegative on [0, 1]
    for lam <= 1/2 (convexity of h).
    """
    q = 1.0 - d + lam * d * d
    n = 1.0 - lam * d * d * (3.0 - d)
    q2 = q * q
    return 6.0 * (-lam * d * (2.0 - d) * q + n * (1.0 - 2.0 * lam * d)) / (q2 * q2)


def h_czm(d, lam_c):
    """Crack-band softening primitive: (1/(1-lam_c)) (1/((1-lam_c) g(d) + lam_c) - 1)."""
    p = (1.0 - lam_c) * degradation(d) + lam_c
    return (1.0 / p - 1.0) / (1.0 - lam_c)


def big_h_czm(d, lam_c):
    """H_CZM(d) = -g'(d) / ((1-lam_c) g(d) + lam_c)^2."""
    p = (1.0 - lam_c) * degradation(d) + lam_c
    return 2.0 * (1.0 - d) / (p * p)


def big_h_czm_derivative(d, lam_c):
    """H_CZM'(d) = (-2 p + 8 (1-lam_c)(1-d)^2) / p^3."""
    omd = 1.0 - d
    p = (1.0 - lam_c) * omd * omd + lam_c
    return (-2.0 * p + 8.0 * (1.0 - lam_c) * omd * omd) / (p * p * p)


def czm_prediction_root(eps2, d_prev, e_mod, y_c, lam_c):
    """Unconstrained damage minimizer of the crack-band model, elementwise.

    The stationarity condition (1-d) E eps^2 = Y_c H_CZM(d) reduces, for d < 1,
    to (1-lam_c)(1-d)^2 + lam_c = sqrt(2 Y_c / (E eps^2)), which has the closed
    form below.  Values land exactly at 1 once the element opening reaches the
    critical opening; the caller clips against the previous damage.
    """
    s = np.sqrt(2.0 * y_c / (e_mod * eps2))
    t = (s - lam_c) / (1.0 - lam_c)
    t = np.maximum(t, 0.0)
    root = 1.0 - np.sqrt(t)
    return np.maximum(d_prev, root)
