"""Command-line interface.

Subcommands: ``run`` (single realization), ``ensemble`` (seed ensemble),
``sweep`` (mesh / rate / model axis), ``validate-config``, ``version``.
Exit codes: 0 success, 1 configuration/validation error, 2 numerical failure.
"""

import argparse
import sys

from . import __version__
from ._backend import backend_name
from .campaign import RunConfig, SWEEP_AXES, run_ensemble, run_single, run_sweep
from .errors import ConfigurationError, NumericalError


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="YAML configuration file")
    p.add_argument("--out", default=None, help="output directory (overrides config)")
    p.add_argument("--set", dest="overrides", action="append", default=[],
                   metavar="KEY=VALUE", help="override a config key (repeatable)")


def _load_config(args) -> RunConfig:
    config = RunConfig.from_yaml(args.config)
    if args.overrides:
        config = config.apply_overrides(args.overrides)
    config.validate()
    return config


def _parse_seeds(spec: str) -> list[int]:
    """Seed list: 'a:b' is the half-open range, otherwise comma-separated."""
    if ":" in spec:
        a, b = spec.split(":", 1)
        return list(range(int(a), int(b)))
    return [int(s) for s in spec.split(",") if s.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lipfrag",
        description="1D dynamic fragmentation with regularized and crack-band damage")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a single realization")
    _add_common(p_run)
    p_run.add_argument("--seed", type=int, default=None,
                       help="seed (default: first seed in the config)")

    p_ens = sub.add_parser("ensemble", help="run a seed ensemble")
    _add_common(p_ens)
    p_ens.add_argument("--seeds", default=None,
                       help="seeds as 'a:b' range or comma list (default: config seeds)")
    p_ens.add_argument("--workers", type=int, default=None,
                       help=f"parallel workers (default: ${{{'LIPFRAG_WORKERS'}}} or 1)")

    p_sw = sub.add_parser("sweep", help="run an axis sweep of ensembles")
    _add_common(p_sw)
    p_sw.add_argument("--axis", required=True, choices=SWEEP_AXES)
    p_sw.add_argument("--values", required=True,
                      help="comma-separated axis values (mesh ratios, rates, or "
                           "variant:scheme pairs)")
    p_sw.add_argument("--workers", type=int, default=None)
    p_sw.add_argument("--overlay", default=None,
                      help="reference CSV (rate, dissipated_J, fragment_m, source) "
                           "appended to table.csv")

    p_val = sub.add_parser("validate-config", help="validate a configuration file")
    p_val.add_argument("--config", required=True)
    p_val.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE")

    sub.add_parser("version", help="print version and backend")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "version":
            print(f"lipfrag {__version__} (backend: {backend_name})")
            return 0
        if args.command == "validate-config":
            config = RunConfig.from_yaml(args.config)
            if args.overrides:
                config = config.apply_overrides(args.overrides)
            config.validate()
            print(f"config OK (hash {config.config_hash()})")
            return 0

        config = _load_config(args)
        out = args.out if args.out is not None else config.output_dir

        if args.command == "run":
            seed = args.seed if args.seed is not None else config.seeds[0]
            result = run_single(config, seed, out_dir=f"{out}/seed_{seed}")
            f = result.final_energy
            print(f"seed {seed}: D = {f.dissipated_J:.6e} J, "
                  f"cracks = {result.fragments.crack_count}, "
                  f"mean fragment = {result.fragments.mean_fragment_size_m:.6e} m, "
                  f"steps = {result.steps} ({result.stop_reason})")
            if result.warnings:
                print(f"  {len(result.warnings)} warning(s) recorded in result.json")
            return 0

        if args.command == "ensemble":
            seeds = _parse_seeds(args.seeds) if args.seeds else None
            ens = run_ensemble(config, seeds, out_dir=out, workers=args.workers)
            print(f"ensemble of {len(ens.seeds)} seeds: "
                  f"D = {ens.dissipated_mean_J:.6e} +/- {ens.dissipated_std_J:.2e} J, "
                  f"fragment = {ens.fragment_mean_m:.6e} +/- {ens.fragment_std_m:.2e} m"
                  + (f" [{ens.failures} failed]" if ens.failures else ""))
            return 0

        if args.command == "sweep":
            values = [v.strip() for v in args.values.split(",") if v.strip()]
            if args.axis in ("mesh", "rate"):
                values = [float(v) for v in values]
            sweep = run_sweep(config, args.axis, values, out_dir=out,
                              workers=args.workers, overlay=args.overlay)
            for row in sweep.rows:
                print(f"{row['axis']}={row['value']}: "
                      f"D = {row['dissipated_mean_J']:.6e} J, "
                      f"fragment = {row['fragment_mean_m']:.6e} m "
                      f"({row['runs']} runs, {row['failures']} failures, {row['source']})")
            return 0
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    parser.error(f"unhandled command {args.command}")
    return 1


if __name__ == "__main__":
    sys.exit(main())
