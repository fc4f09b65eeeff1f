import numpy as np
import pytest

from lipfrag.errors import ConfigurationError, DomainError
from lipfrag.material import CZM, LIPFIELD, MaterialModel, degradation, \
    degradation_derivative, derive_parameters, energy_density, perturbed_modulus_field, \
    sample_modulus_field, softening_czm, softening_czm_derivative, softening_lip, \
    softening_lip_derivative, stress, uniform_modulus_field, weibull_modulus
from lipfrag.mesh import build_uniform_mesh

from conftest import E_MOD, ELL, G_C, RHO, SIGMA_C


def make_material(variant=LIPFIELD, h_e=None):
    return MaterialModel.create(rho=RHO, e_mod=E_MOD, g_c=G_C, sigma_c=SIGMA_C,
                                ell=ELL, variant=variant, h_e=h_e)


# ---------------------------------------------------------------------------
# degradation
# ---------------------------------------------------------------------------

def test_degradation_endpoints():
    assert degradation(0.0) == 1.0   # undamaged
    assert degradation(1.0) == 0.0   # fully damaged
    assert degradation(0.5) == pytest.approx(0.25)
    assert degradation_derivative(0.5) == pytest.approx(-1.0)


def test_degradation_domain_error():
    with pytest.raises(DomainError):
        degradation(1.0 + 1e-9)
    with pytest.raises(DomainError):
        degradation(-1e-9)
    # within the 1e-12 slack is fine
    degradation(1.0 + 1e-13)


# ---------------------------------------------------------------------------
# softening functions
# ---------------------------------------------------------------------------

def test_softening_lip_at_zero_and_one():
    lam = derive_parameters(E_MOD, SIGMA_C, G_C, ELL).lam
    assert softening_lip(0.0, lam) == 0.0
    # h(1) = 1/lam^2 (evaluate the quotient directly at d = 1)
    assert softening_lip(1.0, lam) == pytest.approx(1.0 / lam ** 2, rel=1e-12)
    assert 1.0 / lam ** 2 == pytest.approx(526.6, rel=1e-3)


def test_softening_lip_rejects_nonconvex_lam():
    with pytest.raises(ConfigurationError):
        softening_lip(0.5, 0.6)


def test_softening_lip_convexity_scan():
    # second finite difference on a 1e4-point grid must be >= -1e-6 max|h|
    d = np.linspace(0.0, 1.0, 10_000)
    for lam in (0.5, 0.043581749304368235):
        h = softening_lip(d, lam)
        second = h[:-2] - 2.0 * h[1:-1] + h[2:]
        assert second.min() >= -1e-6 * np.abs(h).max()


def test_softening_czm_values():
    lam_c = 0.3
    assert softening_czm(0.0, lam_c) == 0.0
    assert softening_czm(1.0, lam_c) == pytest.approx(1.0 / lam_c, rel=1e-12)
    # H_CZM(0) = -g'(0) = 2: damage growth starts exactly at sigma = sigma_c
    assert softening_czm_derivative(0.0, lam_c) == pytest.approx(2.0, rel=1e-14)


def test_softening_czm_convexity_up_to_algebraic_limit():
    # h_CZM is convex only up to d* = 1 - sqrt(lam_c / (3 (1 - lam_c)));
    # beyond it H' = (-2p + 8(1-lam_c)(1-d)^2)/p^3 < 0 (H'(1) = -2/lam_c^2).
    # The concave tail is harmless: the prediction objective derivative
    # factors as (1-d) (2 Y_c / p^2 - E eps^2) with p strictly decreasing,
    # so the per-element minimizer stays unique.
    d = np.linspace(0.0, 1.0, 10_000)
    for lam_c in (0.01, 0.5, 0.9):
        # lam_c = 0.9 has d* < 0: concave throughout (weakly so numerically)
        d_star = 1.0 - np.sqrt(lam_c / (3.0 * (1.0 - lam_c)))
        convex = d[1:-1] <= d_star - 1e-3
        h = softening_czm(d, lam_c)
        second = (h[:-2] - 2.0 * h[1:-1] + h[2:])[convex]
        if second.size:
            assert second.min() >= -1e-6 * np.abs(h).max()
        assert softening_czm_derivative(1.0, lam_c) == 0.0


def test_czm_prediction_objective_unique_minimizer_structure():
    # 2 Y_c / p(d)^2 is strictly increasing: one sign change of the
    # stationarity factor, hence a single minimizer despite the concave tail
    d = np.linspace(0.0, 1.0, 5000)
    for lam_c in (0.01, 0.5, 0.9):
        p = (1.0 - lam_c) * (1.0 - d) ** 2 + lam_c
        assert np.all(np.diff(2.0 / p ** 2) > 0.0)


def test_softening_czm_rejects_bad_lam_c():
    for bad in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(ConfigurationError):
            softening_czm(0.5, bad)


@pytest.mark.parametrize("variant,lam_values", [
    ("lip", (0.043581749304368235, 0.4999, 0.2)),
    ("czm", (0.01, 0.5, 0.9)),
])
def test_derivative_matches_finite_difference(variant, lam_values):
    d = np.linspace(0.001, 0.999, 400)
    delta = 1e-6
    for lam in lam_values:
        if variant == "lip":
            big_h = softening_lip_derivative(d, lam)
            fd = (softening_lip(d + delta, lam) - softening_lip(d - delta, lam)) / (2 * delta)
        else:
            big_h = softening_czm_derivative(d, lam)
            fd = (softening_czm(d + delta, lam) - softening_czm(d - delta, lam)) / (2 * delta)
        assert np.abs(big_h - fd).max() <= 1e-6 * np.abs(big_h).max()


def test_softening_nondecreasing():
    d = np.linspace(0.0, 1.0, 5000)
    lam = 0.5
    assert np.all(np.diff(softening_lip(d, lam)) >= 0.0)
    for lam_c in (0.01, 0.5, 0.9):
        assert np.all(np.diff(softening_czm(d, lam_c)) >= 0.0)


# ---------------------------------------------------------------------------
# derived parameters
# ---------------------------------------------------------------------------

def test_derived_parameters_table_values():
    p = derive_parameters(E_MOD, SIGMA_C, G_C, ELL, h_e=ELL / 10)
    assert p.y_c == pytest.approx(SIGMA_C ** 2 / (2 * E_MOD))
    # tabulated 820e3 Pa within 0.1%
    assert abs(p.y_c - 820e3) / 820e3 < 1e-3
    assert p.lam == pytest.approx(2 * p.y_c * ELL / G_C)
    assert p.lam == pytest.approx(0.0436, abs=2e-4)
    assert p.w_c == pytest.approx(2 * G_C / SIGMA_C)
    assert p.w_c == pytest.approx(1.6626e-7, rel=1e-4)
    assert p.lam_c == pytest.approx(SIGMA_C * (ELL / 10) / (E_MOD * p.w_c))


def test_derived_parameters_diagnostics():
    with pytest.raises(ConfigurationError):
        derive_parameters(E_MOD, SIGMA_C, G_C, ell=1e-3)  # lam > 1/2
    with pytest.raises(ConfigurationError):
        derive_parameters(E_MOD, SIGMA_C, G_C, ELL, h_e=1.0)  # lam_c >= 1
    with pytest.raises(ConfigurationError):
        derive_parameters(-E_MOD, SIGMA_C, G_C, ELL)


def test_full_break_dissipation_identity():
    # Y_c * h_CZM(1) * h_e = G_c, the crack-band calibration
    for ratio in (5, 10, 20, 50):
        h_e = ELL / ratio
        p = derive_parameters(E_MOD, SIGMA_C, G_C, ELL, h_e=h_e)
        assert p.y_c * softening_czm(1.0, p.lam_c) * h_e == pytest.approx(G_C, rel=1e-12)


def test_material_model_variants():
    mat = make_material()
    assert mat.variant == LIPFIELD
    assert mat.lam_c is None
    czm = make_material(variant=CZM, h_e=ELL / 10)
    assert czm.lam_c is not None
    with pytest.raises(ConfigurationError):
        make_material(variant=CZM)  # needs h_e


# ---------------------------------------------------------------------------
# stress / energy density
# ---------------------------------------------------------------------------

def test_stress_at_critical_strain():
    eps_c = SIGMA_C / E_MOD
    assert stress(eps_c, 0.0, E_MOD) == pytest.approx(SIGMA_C)


def test_fully_damaged_carries_nothing():
    assert stress(0.01, 1.0, E_MOD) == 0.0
    assert energy_density(0.01, 1.0, E_MOD) == 0.0


def test_energy_symmetric_in_strain_sign():
    eps = 3.4e-4
    assert energy_density(-eps, 0.2, E_MOD) == energy_density(eps, 0.2, E_MOD)


# ---------------------------------------------------------------------------
# stochastic modulus field
# ---------------------------------------------------------------------------

def test_weibull_transform_unit_cases():
    # r = e^-1 with m = 2: (-ln r)^(1/2) = 1 -> E = E_0 + E_min
    cv = 0.01
    e_min = E_MOD * (1 - 1.9130584 * cv)
    e_0 = 2.1586552 * E_MOD * cv
    assert weibull_modulus(np.exp(-1.0), E_MOD, cv) == pytest.approx(e_0 + e_min)
    # r -> 1-: E -> E_min
    assert weibull_modulus(1.0 - 1e-15, E_MOD, cv) == pytest.approx(e_min, rel=1e-7)


def test_modulus_field_monte_carlo_statistics():
    mesh = build_uniform_mesh(1.0, 1_000_000)
    field = sample_modulus_field(12345, mesh, E_MOD, 0.01)
    mean = field.values.mean()
    cv_est = field.values.std() / mean
    assert abs(mean - E_MOD) <= 3.0 * E_MOD * 0.01 / 1000.0
    assert 0.009 <= cv_est <= 0.011
    assert field.values.min() >= field.e_min > 0.0


def test_modulus_field_reproducibility():
    mesh = build_uniform_mesh(2e-3, 500)
    a = sample_modulus_field(7, mesh, E_MOD, 0.01)
    b = sample_modulus_field(7, mesh, E_MOD, 0.01)
    c = sample_modulus_field(8, mesh, E_MOD, 0.01)
    assert np.array_equal(a.values, b.values)
    assert (a.values != c.values).any()


def test_deterministic_field_with_zero_cv():
    mesh = build_uniform_mesh(2e-3, 100)
    field = sample_modulus_field(0, mesh, E_MOD, 0.0)
    assert np.all(field.values == E_MOD)
    uni = uniform_modulus_field(mesh, E_MOD)
    assert np.array_equal(uni.values, field.values)


def test_perturbed_field_single_element():
    mesh = build_uniform_mesh(2e-3, 100)
    field = perturbed_modulus_field(mesh, E_MOD, 50, 1.01)
    assert field.values[50] == pytest.approx(1.01 * E_MOD)
    assert np.all(np.delete(field.values, 50) == E_MOD)


def test_cv_out_of_range():
    mesh = build_uniform_mesh(1.0, 10)
    with pytest.raises(ConfigurationError):
        sample_modulus_field(0, mesh, E_MOD, 0.5)
