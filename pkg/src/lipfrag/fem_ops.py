"""Finite-element operators for the 1D bar: mass, damage-degraded stiffness,
and the direct tridiagonal solve with Dirichlet elimination.

All operators are stored as (diagonal, off-diagonal) arrays; nothing dense is
ever formed, so assembly and solves stay O(N) up to the ~10^6-element meshes
of the convergence studies.
"""

from dataclasses import dataclass

import numpy as np

from ._backend import kernels, softmath as sm
from .errors import ConfigurationError, NumericalError
from .material import ModulusField
from .mesh import Mesh1D

LUMPED = "lumped"
CONSISTENT = "consistent"


@dataclass(frozen=True)
class MassOperator:
    kind: str
    diag: np.ndarray
    off: np.ndarray  # empty for the lumped variant

    @property
    def size(self) -> int:
        return self.diag.size

    def total_mass(self) -> float:
        return float(self.diag.sum() + 2.0 * self.off.sum())

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = self.diag * x
        if self.off.size:
            y[:-1] += self.off * x[1:]
            y[1:] += self.off * x[:-1]
        return y


@dataclass(frozen=True)
class StiffnessOperator:
    diag: np.ndarray
    off: np.ndarray
    k_e: np.ndarray  # per-element coefficient E_e g(d_e) / h_e

    @property
    def size(self) -> int:
        return self.diag.size

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = self.diag * x
        y[:-1] += self.off * x[1:]
        y[1:] += self.off * x[:-1]
        return y


def assemble_mass(mesh: Mesh1D, rho: float, kind: str = LUMPED) -> MassOperator:
    """Row-sum lumped (diagonal) or consistent (tridiagonal) mass per unit area."""
    if not rho > 0.0:
        raise ConfigurationError(f"density must be positive, got {rho}")
    n = mesh.n_nodes
    mh = rho * mesh.h_e
    if kind == LUMPED:
        diag = np.full(n, mh)
        diag[0] = diag[-1] = 0.5 * mh
        return MassOperator(LUMPED, diag, np.empty(0))
    if kind == CONSISTENT:
        diag = np.full(n, 2.0 * mh / 3.0)
        diag[0] = diag[-1] = mh / 3.0
        off = np.full(n - 1, mh / 6.0)
        return MassOperator(CONSISTENT, diag, off)
    raise ConfigurationError(f"unknown mass variant {kind!r}")


def assemble_stiffness(mesh: Mesh1D, field: ModulusField,
                       damage: np.ndarray) -> StiffnessOperator:
    """Tridiagonal stiffness with per-element coefficient E_e g(d_e) / h_e."""
    k_e = field.values * sm.degradation(damage) / mesh.h_e
    n = mesh.n_nodes
    diag = np.zeros(n)
    diag[:-1] += k_e
    diag[1:] += k_e
    return StiffnessOperator(diag, -k_e, k_e)


def internal_force(u: np.ndarray, mesh: Mesh1D, field: ModulusField,
                   damage: np.ndarray) -> np.ndarray:
    """K(d) u computed from element stresses, without assembling K."""
    eps = (u[1:] - u[:-1]) / mesh.h_e
    sigma = field.values * sm.degradation(damage) * eps
    f = np.empty(mesh.n_nodes)
    f[0] = -sigma[0]
    f[-1] = sigma[-1]
    f[1:-1] = sigma[:-1] - sigma[1:]
    return f


def solve_dynamic_system(diag: np.ndarray, off: np.ndarray, rhs: np.ndarray,
                         dirichlet: list[tuple[int, float]]) -> np.ndarray:
    """Direct solve of the SPD tridiagonal system with prescribed DOFs.

    Dirichlet DOFs are eliminated by row/column substitution (unit diagonal,
    prescribed value moved to the neighbours' right-hand sides), which keeps
    the reduced system symmetric positive definite.  A non-SPD pivot signals
    assembly corruption and raises ``NumericalError``.
    """
    n = diag.size
    diag = diag.copy()
    off = off.copy()
    rhs = rhs.copy()
    fixed = set()
    for idx, value in dirichlet:
        if not 0 <= idx < n:
            raise IndexError(f"Dirichlet DOF {idx} out of range")
        fixed.add(idx)
    for idx, value in dirichlet:
        if idx > 0 and (idx - 1) not in fixed:
            rhs[idx - 1] -= off[idx - 1] * value
        if idx < n - 1 and (idx + 1) not in fixed:
            rhs[idx + 1] -= off[idx] * value
        if idx > 0:
            off[idx - 1] = 0.0
        if idx < n - 1:
            off[idx] = 0.0
        diag[idx] = 1.0
        rhs[idx] = value
    try:
        x = kernels.solve_tridiag_spd(diag, off, rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"dynamic system solve failed: {exc}") from exc
    return x
