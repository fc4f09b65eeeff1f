"""Constitutive laws and the stochastic Young's-modulus field.

Two softening variants share the quadratic degradation g(d) = (1-d)^2:

* ``lipfield`` -- softening primitive h(d) = (2d - d^2)/(1 - d + lam d^2)^2
  with lam = 2 Y_c ell / G_c; convex for lam <= 1/2.  Damage fields are
  regularized downstream by the Lipschitz constraint with slope 1/ell.
* ``czm``      -- local crack-band softening h_CZM(d) calibrated so that one
  element of size h_e breaking completely dissipates exactly G_c per unit
  cross-section (equivalent to a linear traction-separation law with critical
  stress sigma_c and critical opening w_c = 2 G_c / sigma_c).

The critical energy release rate is Y_c = sigma_c^2 / (2 E), which places
damage initiation exactly at sigma = sigma_c (H(0) = 2 for both variants).
"""

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from ._backend import softmath as sm
from .errors import ConfigurationError, DomainError
from .mesh import Mesh1D

LIPFIELD = "lipfield"
CZM = "czm"
VARIANTS = (LIPFIELD, CZM)

_DOMAIN_SLACK = 1e-12

# Weibull shape m = 2 calibration constants: mean E and coefficient of
# variation CV are exact for m = 2 (Rayleigh); other shapes are accepted but
# shift the realized mean/CV.
EMIN_FACTOR = 1.9130584
E0_FACTOR = 2.1586552


class DerivedParameters(NamedTuple):
    y_c: float
    lam: float
    lam_c: Optional[float]
    w_c: float


def derive_parameters(e_mod: float, sigma_c: float, g_c: float, ell: float,
                      h_e: Optional[float] = None) -> DerivedParameters:
    """Derived constants: Y_c = sigma_c^2/(2E), lam = 2 Y_c ell / G_c,
    w_c = 2 G_c / sigma_c and, when h_e is given, lam_c = sigma_c h_e/(E w_c)."""
    for name, val in (("E", e_mod), ("sigma_c", sigma_c), ("G_c", g_c), ("ell", ell)):
        if not val > 0.0:
            raise ConfigurationError(f"{name} must be positive, got {val}")
    y_c = sigma_c * sigma_c / (2.0 * e_mod)
    lam = 2.0 * y_c * ell / g_c
    w_c = 2.0 * g_c / sigma_c
    if lam > 0.5:
        raise ConfigurationError(
            f"lam = 2*Y_c*ell/G_c = {lam:.4g} > 1/2: softening is non-convex; "
            "reduce the regularization length"
        )
    lam_c = None
    if h_e is not None:
        if not h_e > 0.0:
            raise ConfigurationError(f"h_e must be positive, got {h_e}")
        lam_c = sigma_c * h_e / (e_mod * w_c)
        if not 0.0 < lam_c < 1.0:
            raise ConfigurationError(
                f"lam_c = sigma_c*h_e/(E*w_c) = {lam_c:.4g} outside (0, 1): "
                "element size incompatible with the crack-band equivalence"
            )
    return DerivedParameters(y_c, lam, lam_c, w_c)


@dataclass(frozen=True)
class MaterialModel:
    rho: float
    e_mod: float          # mean Young's modulus (Pa)
    g_c: float            # toughness (N/m)
    sigma_c: float        # critical stress (Pa)
    ell: float            # regularization length (m)
    variant: str
    y_c: float
    lam: float
    w_c: float
    lam_c: Optional[float] = None  # set when h_e known (required for czm)
    h_e: Optional[float] = None

    @classmethod
    def create(cls, *, rho: float, e_mod: float, g_c: float, sigma_c: float,
               ell: float, variant: str = LIPFIELD,
               h_e: Optional[float] = None) -> "MaterialModel":
        if variant not in VARIANTS:
            raise ConfigurationError(f"unknown softening variant {variant!r}")
        if not rho > 0.0:
            raise ConfigurationError(f"density must be positive, got {rho}")
        if variant == CZM and h_e is None:
            raise ConfigurationError("the crack-band variant needs the element size h_e")
        p = derive_parameters(e_mod, sigma_c, g_c, ell, h_e)
        return cls(rho=float(rho), e_mod=float(e_mod), g_c=float(g_c),
                   sigma_c=float(sigma_c), ell=float(ell), variant=variant,
                   y_c=p.y_c, lam=p.lam, w_c=p.w_c, lam_c=p.lam_c,
                   h_e=None if h_e is None else float(h_e))

    @property
    def wave_speed(self) -> float:
        return float(np.sqrt(self.e_mod / self.rho))

    def softening(self, d):
        """h(d) of the active variant."""
        if self.variant == CZM:
            return softening_czm(d, self.lam_c)
        return softening_lip(d, self.lam)

    def softening_derivative(self, d):
        """H(d) = h'(d) of the active variant."""
        if self.variant == CZM:
            return softening_czm_derivative(d, self.lam_c)
        return softening_lip_derivative(d, self.lam)


# ---------------------------------------------------------------------------
# pointwise laws
# ---------------------------------------------------------------------------

def _check_damage(d):
    dmin = np.min(d)
    dmax = np.max(d)
    if dmin < -_DOMAIN_SLACK or dmax > 1.0 + _DOMAIN_SLACK:
        raise DomainError(f"damage outside [0, 1]: range [{dmin}, {dmax}]")


def degradation(d):
    """g(d) = (1 - d)^2."""
    _check_damage(d)
    return sm.degradation(np.asarray(d, dtype=float) if np.ndim(d) else float(d))


def degradation_derivative(d):
    """g'(d) = -2 (1 - d)."""
    _check_damage(d)
    return sm.degradation_derivative(np.asarray(d, dtype=float) if np.ndim(d) else float(d))


def _check_lam(lam):
    if not 0.0 < lam <= 0.5:
        raise ConfigurationError(f"lam must lie in (0, 1/2], got {lam} (h would be non-convex)")


def _check_lam_c(lam_c):
    if not 0.0 < lam_c < 1.0:
        raise ConfigurationError(f"lam_c must lie in (0, 1), got {lam_c}")


def softening_lip(d, lam):
    _check_damage(d)
    _check_lam(lam)
    return sm.h_lip(d, lam)


def softening_lip_derivative(d, lam):
    _check_damage(d)
    _check_lam(lam)
    return sm.big_h_lip(d, lam)


def softening_czm(d, lam_c):
    _check_damage(d)
    _check_lam_c(lam_c)
    return sm.h_czm(d, lam_c)


def softening_czm_derivative(d, lam_c):
    _check_damage(d)
    _check_lam_c(lam_c)
    return sm.big_h_czm(d, lam_c)


def stress(eps, d, e_mod):
    """sigma = E g(d) eps (symmetric in the strain sign)."""
    return e_mod * sm.degradation(d) * eps


def energy_density(eps, d, e_mod):
    """phi = 1/2 g(d) E eps^2."""
    return 0.5 * sm.degradation(d) * e_mod * eps * eps


# ---------------------------------------------------------------------------
# stochastic modulus field
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModulusField:
    values: np.ndarray    # per-element Young's modulus (Pa)
    seed: Optional[int]
    weibull_m: float
    cv: float
    e_min: float
    e_0: float
    mean_e: float

    def __post_init__(self):
        self.values.flags.writeable = False


def weibull_modulus(r, e_mod: float, cv: float, m: float = 2.0):
    """Transform uniform draws r in (0, 1) to modulus values
    E(r) = E_0 (-ln r)^(1/m) + E_min."""
    e_min = e_mod * (1.0 - EMIN_FACTOR * cv)
    e_0 = E0_FACTOR * e_mod * cv
    return e_0 * (-np.log(r)) ** (1.0 / m) + e_min


def sample_modulus_field(seed: int, mesh: Mesh1D, e_mod: float, cv: float,
                         m: float = 2.0) -> ModulusField:
    """One independent Weibull draw per element, seeded with PCG64.

    Identical (seed, mesh, parameters) give a bit-identical field.  cv = 0
    produces the deterministic uniform field.  Draws of exactly 0 (which would
    give an infinite modulus) are rejected and redrawn.
    """
    if not 0.0 <= cv < 0.5:
        raise ConfigurationError(f"coefficient of variation must lie in [0, 0.5), got {cv}")
    if not m > 0.0:
        raise ConfigurationError(f"Weibull shape must be positive, got {m}")
    e_min = e_mod * (1.0 - EMIN_FACTOR * cv)
    e_0 = E0_FACTOR * e_mod * cv
    if cv == 0.0:
        values = np.full(mesh.n_elements, float(e_mod))
        return ModulusField(values, int(seed), float(m), 0.0, e_min, e_0, float(e_mod))
    rng = np.random.Generator(np.random.PCG64(seed))
    r = rng.random(mesh.n_elements)
    while True:
        zero = r == 0.0
        if not zero.any():
            break
        r[zero] = rng.random(int(zero.sum()))
    values = weibull_modulus(r, e_mod, cv, m)
    return ModulusField(values, int(seed), float(m), float(cv), e_min, e_0, float(e_mod))


def uniform_modulus_field(mesh: Mesh1D, e_mod: float) -> ModulusField:
    """Deterministic field, every element at the mean modulus."""
    return sample_modulus_field(0, mesh, e_mod, 0.0)


def perturbed_modulus_field(mesh: Mesh1D, e_mod: float, element: int,
                            factor: float) -> ModulusField:
    """Uniform field with one element's modulus scaled by ``factor``.

    A factor > 1 lowers that element's initiation strain sqrt(2 Y_c / E_e),
    seeding a single well-defined failure site.
    """
    if not 0 <= element < mesh.n_elements:
        raise IndexError(f"element {element} out of range")
    values = np.full(mesh.n_elements, float(e_mod))
    values[element] *= factor
    e_min = values.min()
    return ModulusField(values, None, 2.0, 0.0, float(e_min), 0.0, float(e_mod))
