"""Time integration: Newmark predictor/corrector, explicit and implicit
drivers, initial/boundary conditions, and the simulation loop.

The bar is loaded by a uniform initial strain rate: u(x,0) = 0,
v(x,0) = rate * x, with ends pinned to u(0,t) = 0 and u(L,t) = rate * L * t.
Explicit integration is central difference (beta = 0, gamma = 1/2, lumped
mass); implicit is the undamped trapezoidal rule (beta = 1/4, gamma = 1/2,
consistent mass) with a staggered displacement/damage loop per step.
"""

from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from ._backend import softmath as sm
from .damage_update import damage_step_strains
from .errors import ConfigurationError, NumericalError
from .fem_ops import CONSISTENT, LUMPED, assemble_mass, assemble_stiffness, \
    solve_dynamic_system
from .material import MaterialModel, ModulusField
from .mesh import Mesh1D
from . import observables

EXPLICIT = "explicit"
IMPLICIT = "implicit"

U_FLOOR_FACTOR = 1e-14  # scaled by L for the displacement error denominator
D_FLOOR = 1e-14


@dataclass(frozen=True)
class NewmarkScheme:
    kind: str
    beta: float
    gamma: float
    dt: float
    mass_kind: str

    @classmethod
    def explicit(cls, dt: float) -> "NewmarkScheme":
        return cls(EXPLICIT, 0.0, 0.5, float(dt), LUMPED)

    @classmethod
    def implicit(cls, dt: float) -> "NewmarkScheme":
        return cls(IMPLICIT, 0.25, 0.5, float(dt), CONSISTENT)


def stable_time_step(mesh: Mesh1D, material: MaterialModel, cfl: float = 0.99) -> float:
    """dt = cfl * h_e / c with c = sqrt(E / rho) from the mean modulus."""
    if not 0.0 < cfl <= 1.0:
        raise ConfigurationError(f"CFL factor must lie in (0, 1], got {cfl}")
    return cfl * mesh.h_e / material.wave_speed


@dataclass
class DynamicState:
    t: float
    n: int
    u: np.ndarray
    v: np.ndarray
    a: np.ndarray
    d: np.ndarray


@dataclass
class StepInfo:
    mask: np.ndarray                 # elements inside active Lipschitz intervals
    damage_growth: float             # max elementwise damage increment
    iterations: int = 1              # staggered iterations (implicit)
    err_u: float = 0.0
    err_d: float = 0.0
    converged: bool = True


def initialize(mesh: Mesh1D, rate: float) -> DynamicState:
    """State at t = 0: u = 0, v = rate * x, a = 0, d = 0."""
    if not rate > 0.0:
        raise ConfigurationError(f"strain rate must be positive, got {rate}")
    u = np.zeros(mesh.n_nodes)
    v = rate * mesh.nodes.copy()
    a = np.zeros(mesh.n_nodes)
    d = np.zeros(mesh.n_elements)
    return DynamicState(0.0, 0, u, v, a, d)


def predict(state: DynamicState, scheme: NewmarkScheme):
    """Newmark predictor: u_p = u + dt v + dt^2/2 (1 - 2 beta) a,
    v_p = v + (1 - gamma) dt a."""
    dt = scheme.dt
    u_p = state.u + dt * state.v + 0.5 * dt * dt * (1.0 - 2.0 * scheme.beta) * state.a
    v_p = state.v + (1.0 - scheme.gamma) * dt * state.a
    return u_p, v_p


def _check_finite(state: DynamicState):
    if not (np.isfinite(state.u).all() and np.isfinite(state.v).all()
            and np.isfinite(state.a).all() and np.isfinite(state.d).all()):
        raise NumericalError(f"non-finite value in state vectors at step {state.n}")


def step_explicit(state: DynamicState, scheme: NewmarkScheme, mesh: Mesh1D,
                  material: MaterialModel, field: ModulusField, rate: float,
                  lumped_diag: Optional[np.ndarray] = None):
    """One central-difference step; returns (new_state, StepInfo)."""
    if scheme.beta != 0.0:
        raise ConfigurationError("explicit step requires beta = 0")
    dt = scheme.dt
    t1 = state.t + dt
    u = state.u + dt * state.v + 0.5 * dt * dt * state.a
    v_p = state.v + 0.5 * dt * state.a
    u[0] = 0.0
    u[-1] = rate * mesh.length * t1

    eps = (u[1:] - u[:-1]) / mesh.h_e
    d_new, mask = damage_step_strains(eps, state.d, mesh, material, field)

    if lumped_diag is None:
        lumped_diag = assemble_mass(mesh, material.rho, LUMPED).diag
    sigma = field.values * sm.degradation(d_new) * eps
    a = np.zeros(mesh.n_nodes)
    a[1:-1] = (sigma[1:] - sigma[:-1]) / lumped_diag[1:-1]
    v = v_p + 0.5 * dt * a

    new = DynamicState(t1, state.n + 1, u, v, a, d_new)
    _check_finite(new)
    growth = float((d_new - state.d).max()) if d_new.size else 0.0
    return new, StepInfo(mask=mask, damage_growth=growth)


def staggered_errors(u_next, u_curr, u_n, d_next, d_curr, d_n,
                     floor_u: float, floor_d: float):
    """Relative staggered increments, infinity norms with absolute floors."""
    den_u = max(float(np.abs(u_next - u_n).max()), floor_u)
    den_d = max(float(np.abs(d_next - d_n).max()), floor_d)
    err_u = float(np.abs(u_next - u_curr).max()) / den_u
    err_d = float(np.abs(d_next - d_curr).max()) / den_d
    return err_u, err_d


def step_implicit(state: DynamicState, scheme: NewmarkScheme, mesh: Mesh1D,
                  material: MaterialModel, field: ModulusField, rate: float,
                  tol_u: float = 1e-6, tol_d: float = 1e-6, k_max: int = 100,
                  mass=None):
    """One implicit Newmark step with the staggered displacement/damage loop.

    The loop stops when BOTH relative increments drop below tolerance.  If
    k_max is reached the step is accepted and flagged (StepInfo.converged is
    False); the campaign records these as warnings.
    """
    beta, gamma, dt = scheme.beta, scheme.gamma, scheme.dt
    if beta <= 0.0:
        raise ConfigurationError("implicit step requires beta > 0")
    t1 = state.t + dt
    u_end = rate * mesh.length * t1
    if mass is None:
        mass = assemble_mass(mesh, material.rho, CONSISTENT)

    u_p = state.u + dt * state.v + 0.5 * dt * dt * (1.0 - 2.0 * beta) * state.a
    v_p = state.v + (1.0 - gamma) * dt * state.a
    u_p[0] = 0.0
    u_p[-1] = u_end
    rhs = mass.matvec(u_p)

    floor_u = U_FLOOR_FACTOR * mesh.length
    u_k = state.u
    d_k = state.d
    err_u = err_d = np.inf
    mask = np.zeros(mesh.n_elements, dtype=bool)
    iters = 0
    converged = False
    bdt2 = beta * dt * dt
    for _ in range(k_max):
        iters += 1
        stiff = assemble_stiffness(mesh, field, d_k)
        lhs_diag = bdt2 * stiff.diag + mass.diag
        lhs_off = bdt2 * stiff.off + mass.off
        u_k1 = solve_dynamic_system(lhs_diag, lhs_off, rhs,
                                    [(0, 0.0), (mesh.n_nodes - 1, u_end)])
        eps = (u_k1[1:] - u_k1[:-1]) / mesh.h_e
        d_k1, mask = damage_step_strains(eps, state.d, mesh, material, field)
        err_u, err_d = staggered_errors(u_k1, u_k, state.u, d_k1, d_k, state.d,
                                        floor_u, D_FLOOR)
        u_k, d_k = u_k1, d_k1
        if err_u <= tol_u and err_d <= tol_d:
            converged = True
            break

    a = (u_k - state.u) / bdt2 - state.v / (beta * dt) \
        - (0.5 / beta - 1.0) * state.a
    a[0] = 0.0
    a[-1] = 0.0
    v = v_p + gamma * dt * a

    new = DynamicState(t1, state.n + 1, u_k, v, a, d_k)
    _check_finite(new)
    growth = float((d_k - state.d).max()) if d_k.size else 0.0
    return new, StepInfo(mask=mask, damage_growth=growth, iterations=iters,
                         err_u=err_u, err_d=err_d, converged=converged)


# ---------------------------------------------------------------------------
# simulation driver
# ---------------------------------------------------------------------------

@dataclass
class StoppingRule:
    t_max: float
    max_steps: int = 5_000_000
    plateau_steps: int = 500         # stop after this many steps without growth
    plateau_tol: float = 1e-10       # growth below this counts as "no growth"


@dataclass
class SimulationResult:
    state: DynamicState
    energy: "observables.EnergySeries"
    snapshots: list
    warnings: list
    steps: int
    stop_reason: str


def default_t_max(material: MaterialModel, rate: float) -> float:
    """Simulated-time cap: a few initiation times plus a wave-interaction
    allowance, sized so dissipation has plateaued well before the cap."""
    t_init = material.sigma_c / (material.e_mod * rate)
    return 4.0 * t_init + 300.0 * material.ell / material.wave_speed


def simulate(mesh: Mesh1D, material: MaterialModel, field: ModulusField,
             scheme: NewmarkScheme, rate: float, stopping: StoppingRule,
             area: float, *, tol_u: float = 1e-6, tol_d: float = 1e-6,
             k_max: int = 100, energy_stride: int = 1,
             snapshot_times: tuple = (), snapshot_stride: int = 0) -> SimulationResult:
    """Run the transient problem to the stopping rule, recording energies and
    snapshots along the way."""
    state = initialize(mesh, rate)
    explicit = scheme.kind == EXPLICIT
    lumped_diag = assemble_mass(mesh, material.rho, LUMPED).diag if explicit else None
    mass_cons = assemble_mass(mesh, material.rho, CONSISTENT)

    recorder = observables.EnergyRecorder(mesh, material, field, mass_cons, area)
    mask = np.zeros(mesh.n_elements, dtype=bool)
    recorder.record(state, mask)
    snapshots = []
    pending = sorted(float(t) for t in snapshot_times)
    warnings = []

    ever_grew = False
    quiet_steps = 0
    stop_reason = "t_max"
    while True:
        if state.t >= stopping.t_max:
            stop_reason = "t_max"
            break
        if state.n >= stopping.max_steps:
            stop_reason = "max_steps"
            break
        if explicit:
            state, info = step_explicit(state, scheme, mesh, material, field,
                                        rate, lumped_diag)
        else:
            state, info = step_implicit(state, scheme, mesh, material, field,
                                        rate, tol_u, tol_d, k_max, mass_cons)
            if not info.converged:
                warnings.append({
                    "step": state.n, "kind": "staggered_not_converged",
                    "iterations": info.iterations,
                    "err_u": info.err_u, "err_d": info.err_d,
                })
        mask = info.mask
        recorder.step_work(state)
        if state.n % max(1, energy_stride) == 0:
            recorder.record(state, mask)
        while pending and state.t >= pending[0]:
            snapshots.append(observables.snapshot(state, mask, mesh))
            pending.pop(0)
        if snapshot_stride > 0 and state.n % snapshot_stride == 0:
            snapshots.append(observables.snapshot(state, mask, mesh))

        if info.damage_growth > stopping.plateau_tol:
            ever_grew = True
            quiet_steps = 0
        else:
            quiet_steps += 1
        if ever_grew and quiet_steps >= stopping.plateau_steps:
            stop_reason = "plateau"
            break

    recorder.record(state, mask)
    snapshots.append(observables.snapshot(state, mask, mesh))
    return SimulationResult(state=state, energy=recorder.series(),
                            snapshots=snapshots, warnings=warnings,
                            steps=state.n, stop_reason=stop_reason)
