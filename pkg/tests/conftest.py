"""Shared fixtures: the dense-alumina parameter set used across the suite."""

import pytest

# dense alumina bar
RHO = 3.9e3           # kg/m^3
E_MOD = 610.0e9       # Pa
G_C = 83.13           # N/m
SIGMA_C = 1.0e9       # Pa
ELL = 2.21e-6         # m
LENGTH = 2.0e-3       # m
AREA = 2.0e-7         # m^2


@pytest.fixture
def alumina():
    return dict(rho=RHO, e_mod=E_MOD, g_c=G_C, sigma_c=SIGMA_C, ell=ELL)
