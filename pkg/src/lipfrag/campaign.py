"""Experiment orchestration: configuration, single runs, seed ensembles,
parameter sweeps, and the on-disk output contract.

Output layout (one directory per run):

* ``energy.csv``    -- time_s, dissipated_J, strain_J, kinetic_J, work_J,
  active_elements
* ``snapshots.csv`` -- time_s, centroid_m, damage, lip_active
* ``result.json``   -- config hash, seed, final energies, fragment stats,
  warnings, provenance

Sweeps add a ``table.csv`` keyed by axis value with ensemble aggregates.
Every file carries the config hash; all numeric output uses full round-trip
precision, so identical (config, seed) reruns are byte-identical.
"""

import csv
import dataclasses
import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from . import __version__
from ._backend import backend_name
from .dynamics import EXPLICIT, IMPLICIT, NewmarkScheme, SimulationResult, \
    StoppingRule, default_t_max, simulate, stable_time_step
from .errors import ConfigurationError, LipfragError
from .material import CZM, LIPFIELD, MaterialModel, ModulusField, sample_modulus_field
from .mesh import Mesh1D, build_uniform_mesh, elements_for_size_ratio
from .observables import EnergyRecord, FragmentStats, fragment_stats

ENERGY_COLUMNS = ["time_s", "dissipated_J", "strain_J", "kinetic_J", "work_J",
                  "active_elements"]
SNAPSHOT_COLUMNS = ["time_s", "centroid_m", "damage", "lip_active"]
TABLE_COLUMNS = ["axis", "value", "dissipated_mean_J", "dissipated_std_J",
                 "fragment_mean_m", "fragment_std_m", "runs", "failures", "source"]

WORKERS_ENV = "LIPFRAG_WORKERS"


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class RunConfig:
    # geometry
    length_m: float = 2.0e-3
    area_m2: float = 2.0e-7
    # material (dense alumina defaults)
    density_kgm3: float = 3.9e3
    youngs_modulus_pa: float = 610.0e9
    toughness_npm: float = 83.13
    critical_stress_pa: float = 1.0e9
    regularization_length_m: float = 2.21e-6
    # model / scheme
    variant: str = LIPFIELD            # lipfield | czm
    scheme: str = EXPLICIT             # explicit | implicit
    cfl: float = 0.99
    tol_u: float = 1.0e-6
    tol_d: float = 1.0e-6
    k_max: int = 100
    # loading
    strain_rate_per_s: float = 1.0e5
    # mesh: either an explicit element count or h_e = ell / ratio
    n_elements: Optional[int] = None
    element_size_ratio: Optional[float] = 10.0
    # stochastic modulus field
    cv: float = 0.01
    weibull_m: float = 2.0
    seeds: list = dc_field(default_factory=lambda: list(range(20)))
    # stopping
    t_max_s: Optional[float] = None
    max_steps: int = 5_000_000
    plateau_steps: int = 500
    plateau_tol: float = 1.0e-10
    # output
    output_dir: str = "runs"
    energy_stride: int = 20
    snapshot_stride: int = 0
    snapshot_times_s: list = dc_field(default_factory=list)

    # -- construction -------------------------------------------------------

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_yaml(cls, path) -> "RunConfig":
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
        if not isinstance(data, dict):
            raise ConfigurationError(f"config file {path} must hold a mapping")
        return cls.from_dict(data)

    def apply_overrides(self, overrides: list[str]) -> "RunConfig":
        """Apply ``key=value`` strings (CLI precedence over file values)."""
        data = dataclasses.asdict(self)
        for item in overrides:
            if "=" not in item:
                raise ConfigurationError(f"override {item!r} is not key=value")
            key, raw = item.split("=", 1)
            key = key.strip()
            if key not in data:
                raise ConfigurationError(f"unknown config key {key!r}")
            data[key] = yaml.safe_load(raw)
        return RunConfig.from_dict(data)

    # -- validation and derived objects -------------------------------------

    def validate(self) -> None:
        positive = [
            ("length_m", self.length_m), ("area_m2", self.area_m2),
            ("density_kgm3", self.density_kgm3),
            ("youngs_modulus_pa", self.youngs_modulus_pa),
            ("toughness_npm", self.toughness_npm),
            ("critical_stress_pa", self.critical_stress_pa),
            ("regularization_length_m", self.regularization_length_m),
            ("strain_rate_per_s", self.strain_rate_per_s),
        ]
        for name, val in positive:
            if not (isinstance(val, (int, float)) and val > 0):
                raise ConfigurationError(f"{name} must be positive, got {val!r}")
        if self.variant not in (LIPFIELD, CZM):
            raise ConfigurationError(f"variant must be lipfield or czm, got {self.variant!r}")
        if self.scheme not in (EXPLICIT, IMPLICIT):
            raise ConfigurationError(f"scheme must be explicit or implicit, got {self.scheme!r}")
        if not 0.0 < self.cfl <= 1.0:
            raise ConfigurationError(f"cfl must lie in (0, 1], got {self.cfl}")
        if self.n_elements is None and self.element_size_ratio is None:
            raise ConfigurationError("set n_elements or element_size_ratio")
        if not 0.0 <= self.cv < 0.5:
            raise ConfigurationError(f"cv must lie in [0, 0.5), got {self.cv}")
        if not self.seeds:
            raise ConfigurationError("at least one seed is required")
        # materializing mesh + material runs the lam / lam_c checks
        mesh = self.build_mesh()
        self.build_material(mesh)

    def build_mesh(self) -> Mesh1D:
        if self.n_elements is not None:
            n = int(self.n_elements)
        else:
            n = elements_for_size_ratio(self.length_m, self.regularization_length_m,
                                        self.element_size_ratio)
        return build_uniform_mesh(self.length_m, n)

    def build_material(self, mesh: Mesh1D) -> MaterialModel:
        return MaterialModel.create(
            rho=self.density_kgm3, e_mod=self.youngs_modulus_pa,
            g_c=self.toughness_npm, sigma_c=self.critical_stress_pa,
            ell=self.regularization_length_m, variant=self.variant, h_e=mesh.h_e)

    def build_field(self, mesh: Mesh1D, seed: int) -> ModulusField:
        return sample_modulus_field(seed, mesh, self.youngs_modulus_pa,
                                    self.cv, self.weibull_m)

    def build_scheme(self, mesh: Mesh1D, material: MaterialModel) -> NewmarkScheme:
        dt = stable_time_step(mesh, material, self.cfl)
        if self.scheme == EXPLICIT:
            return NewmarkScheme.explicit(dt)
        return NewmarkScheme.implicit(dt)

    def build_stopping(self, material: MaterialModel) -> StoppingRule:
        t_max = self.t_max_s
        if t_max is None:
            t_max = default_t_max(material, self.strain_rate_per_s)
        return StoppingRule(t_max=t_max, max_steps=self.max_steps,
                            plateau_steps=self.plateau_steps,
                            plateau_tol=self.plateau_tol)

    def config_hash(self) -> str:
        payload = json.dumps(dataclasses.asdict(self), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()


# ---------------------------------------------------------------------------
# single run
# ---------------------------------------------------------------------------

@dataclass
class RunResult:
    config_hash: str
    seed: int
    final_energy: EnergyRecord
    fragments: FragmentStats
    warnings: list
    stop_reason: str
    steps: int
    out_dir: Optional[str] = None


def run_single(config: RunConfig, seed: int,
               out_dir: Optional[str] = None) -> RunResult:
    """Execute one realization; deterministic for a given (config, seed)."""
    config.validate()
    mesh = config.build_mesh()
    material = config.build_material(mesh)
    field = config.build_field(mesh, seed)
    scheme = config.build_scheme(mesh, material)
    stopping = config.build_stopping(material)
    sim = simulate(mesh, material, field, scheme, config.strain_rate_per_s,
                   stopping, config.area_m2,
                   tol_u=config.tol_u, tol_d=config.tol_d, k_max=config.k_max,
                   energy_stride=config.energy_stride,
                   snapshot_times=tuple(config.snapshot_times_s),
                   snapshot_stride=config.snapshot_stride)
    frags = fragment_stats(sim.state.d, mesh)
    result = RunResult(
        config_hash=config.config_hash(), seed=int(seed),
        final_energy=sim.energy.final_record(), fragments=frags,
        warnings=sim.warnings, stop_reason=sim.stop_reason, steps=sim.steps)
    if out_dir is not None:
        result.out_dir = str(out_dir)
        _persist_run(Path(out_dir), config, seed, sim, result)
    return result


def _fmt(x) -> str:
    return repr(float(x))


def _persist_run(out: Path, config: RunConfig, seed: int,
                 sim: SimulationResult, result: RunResult) -> None:
    out.mkdir(parents=True, exist_ok=True)
    chash = result.config_hash
    header = f"# config_hash={chash} seed={seed}\n"

    with open(out / "energy.csv", "w", newline="") as fh:
        fh.write(header)
        w = csv.writer(fh)
        w.writerow(ENERGY_COLUMNS)
        e = sim.energy
        for i in range(e.time_s.size):
            w.writerow([_fmt(e.time_s[i]), _fmt(e.dissipated_J[i]),
                        _fmt(e.strain_J[i]), _fmt(e.kinetic_J[i]),
                        _fmt(e.work_J[i]), int(e.active_elements[i])])

    with open(out / "snapshots.csv", "w", newline="") as fh:
        fh.write(header)
        w = csv.writer(fh)
        w.writerow(SNAPSHOT_COLUMNS)
        for snap in sim.snapshots:
            for c, d, m in zip(snap.centroids_m, snap.damage, snap.lip_active):
                w.writerow([_fmt(snap.time_s), _fmt(c), _fmt(d), int(m)])

    summary = {
        "config_hash": chash,
        "seed": int(seed),
        "backend": backend_name,
        "package_version": __version__,
        "numpy_version": np.__version__,
        "config": dataclasses.asdict(config),
        "final": dataclasses.asdict(result.final_energy),
        "fragments": {
            "crack_count": result.fragments.crack_count,
            "crack_positions_m": [float(x) for x in result.fragments.crack_positions_m],
            "mean_fragment_size_m": result.fragments.mean_fragment_size_m,
            "unbroken": result.fragments.unbroken,
            "end_segments_excluded": True,
        },
        "warnings": result.warnings,
        "stop_reason": result.stop_reason,
        "steps": result.steps,
    }
    with open(out / "result.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# ensembles
# ---------------------------------------------------------------------------

@dataclass
class EnsembleResult:
    config_hash: str
    seeds: list
    results: list             # RunResult, seed order; None for failed runs
    failures: int
    dissipated_mean_J: float
    dissipated_std_J: float
    fragment_mean_m: float
    fragment_std_m: float

    @property
    def partial(self) -> bool:
        return self.failures > 0


def _worker_count(workers: Optional[int]) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return 1


def _ensemble_task(args):
    config_dict, seed, out_dir = args
    config = RunConfig.from_dict(config_dict)
    return run_single(config, seed, out_dir)


def run_ensemble(config: RunConfig, seeds: Optional[list] = None,
                 out_dir: Optional[str] = None,
                 workers: Optional[int] = None) -> EnsembleResult:
    """Independent runs over the seed list, aggregated in seed order.

    Failed runs are recorded and excluded from the aggregates (the ensemble is
    marked partial); execution may be parallel but aggregation is a
    deterministic seed-ordered reduction.
    """
    config.validate()
    if seeds is None:
        seeds = list(config.seeds)
    if not seeds:
        raise ConfigurationError("ensemble needs at least one seed")
    base = Path(out_dir) if out_dir is not None else None
    tasks = []
    for seed in seeds:
        run_dir = str(base / f"seed_{seed}") if base is not None else None
        tasks.append((dataclasses.asdict(config), int(seed), run_dir))

    nworkers = _worker_count(workers)
    results: list[Optional[RunResult]] = [None] * len(seeds)
    if nworkers == 1 or len(seeds) == 1:
        for i, task in enumerate(tasks):
            results[i] = _run_guarded(task)
    else:
        with ProcessPoolExecutor(max_workers=min(nworkers, len(seeds))) as pool:
            for i, res in enumerate(pool.map(_run_guarded, tasks)):
                results[i] = res

    ok = [r for r in results if r is not None]
    failures = len(results) - len(ok)
    if ok:
        dvals = np.array([r.final_energy.dissipated_J for r in ok])
        fvals = np.array([r.fragments.mean_fragment_size_m for r in ok])
        agg = (float(dvals.mean()), float(dvals.std()),
               float(fvals.mean()), float(fvals.std()))
    else:
        agg = (float("nan"),) * 4
    ens = EnsembleResult(config.config_hash(), [int(s) for s in seeds], results,
                         failures, *agg)
    if base is not None:
        _persist_ensemble(base, ens)
    return ens


def _run_guarded(task):
    try:
        return _ensemble_task(task)
    except LipfragError:
        return None


def _persist_ensemble(base: Path, ens: EnsembleResult) -> None:
    base.mkdir(parents=True, exist_ok=True)
    payload = {
        "config_hash": ens.config_hash,
        "seeds": ens.seeds,
        "failures": ens.failures,
        "dissipated_mean_J": ens.dissipated_mean_J,
        "dissipated_std_J": ens.dissipated_std_J,
        "fragment_mean_m": ens.fragment_mean_m,
        "fragment_std_m": ens.fragment_std_m,
        "per_seed": [
            None if r is None else {
                "seed": r.seed,
                "dissipated_J": r.final_energy.dissipated_J,
                "mean_fragment_size_m": r.fragments.mean_fragment_size_m,
                "crack_count": r.fragments.crack_count,
                "stop_reason": r.stop_reason,
                "warnings": len(r.warnings),
            } for r in ens.results],
    }
    with open(base / "ensemble.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

SWEEP_AXES = ("mesh", "rate", "model")


def _config_for_axis(config: RunConfig, axis: str, value):
    data = dataclasses.asdict(config)
    if axis == "mesh":
        data["element_size_ratio"] = float(value)
        data["n_elements"] = None
    elif axis == "rate":
        data["strain_rate_per_s"] = float(value)
    elif axis == "model":
        variant, _, scheme = str(value).partition(":")
        data["variant"] = variant
        if scheme:
            data["scheme"] = scheme
    else:
        raise ConfigurationError(f"unknown sweep axis {axis!r} (use one of {SWEEP_AXES})")
    return RunConfig.from_dict(data)


@dataclass
class SweepResult:
    axis: str
    rows: list  # dicts in TABLE_COLUMNS order


def run_sweep(config: RunConfig, axis: str, values: list,
              out_dir: Optional[str] = None, workers: Optional[int] = None,
              overlay: Optional[str] = None) -> SweepResult:
    """One ensemble per axis value; failures are recorded per cell and the
    sweep continues.  Optional overlay rows from a reference CSV (columns
    rate, dissipated_J, fragment_m, source) are appended verbatim."""
    if axis not in SWEEP_AXES:
        raise ConfigurationError(f"unknown sweep axis {axis!r} (use one of {SWEEP_AXES})")
    if not values:
        raise ConfigurationError("sweep needs at least one axis value")
    base = Path(out_dir) if out_dir is not None else None
    rows = []
    for value in values:
        cell_cfg = _config_for_axis(config, axis, value)
        cell_dir = None
        if base is not None:
            cell_dir = str(base / f"{axis}_{value}")
        try:
            ens = run_ensemble(cell_cfg, out_dir=cell_dir, workers=workers)
            rows.append({
                "axis": axis, "value": value,
                "dissipated_mean_J": ens.dissipated_mean_J,
                "dissipated_std_J": ens.dissipated_std_J,
                "fragment_mean_m": ens.fragment_mean_m,
                "fragment_std_m": ens.fragment_std_m,
                "runs": len(ens.seeds) - ens.failures,
                "failures": ens.failures,
                "source": "simulation",
            })
        except LipfragError as exc:
            rows.append({
                "axis": axis, "value": value,
                "dissipated_mean_J": float("nan"), "dissipated_std_J": float("nan"),
                "fragment_mean_m": float("nan"), "fragment_std_m": float("nan"),
                "runs": 0, "failures": len(config.seeds),
                "source": f"failed: {exc}",
            })
    if overlay is not None:
        rows.extend(_load_overlay(overlay))
    result = SweepResult(axis=axis, rows=rows)
    if base is not None:
        _persist_sweep(base, config, result)
    return result


def _load_overlay(path) -> list[dict]:
    rows = []
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    required = {"rate", "dissipated_J", "fragment_m", "source"}
    if reader.fieldnames is None or not required.issubset(reader.fieldnames):
        raise ConfigurationError(
            f"overlay file {path} must have columns {sorted(required)}")
    for rec in reader:
        rows.append({
            "axis": "rate", "value": float(rec["rate"]),
            "dissipated_mean_J": float(rec["dissipated_J"]) if rec["dissipated_J"] else float("nan"),
            "dissipated_std_J": 0.0,
            "fragment_mean_m": float(rec["fragment_m"]) if rec["fragment_m"] else float("nan"),
            "fragment_std_m": 0.0,
            "runs": 0, "failures": 0,
            "source": rec["source"],
        })
    return rows


def _persist_sweep(base: Path, config: RunConfig, result: SweepResult) -> None:
    base.mkdir(parents=True, exist_ok=True)
    with open(base / "table.csv", "w", newline="") as fh:
        fh.write(f"# config_hash={config.config_hash()} axis={result.axis}\n")
        w = csv.DictWriter(fh, fieldnames=TABLE_COLUMNS)
        w.writeheader()
        for row in result.rows:
            out = dict(row)
            for key in ("dissipated_mean_J", "dissipated_std_J",
                        "fragment_mean_m", "fragment_std_m"):
                out[key] = _fmt(out[key])
            w.writerow(out)
