#!/usr/bin/env python
"""Command Line Interface for heisenberg-morrey."""

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .core.experiments import EXPERIMENTS, RUNNERS, ExperimentConfig
from .exceptions import HeisenbergMorreyError
from .io.config_manager import ConfigManager
from .io.data_handler import DataHandler
from .utils.logger import ExperimentLogger
from .utils.timer import Timer


def print_header():
    """Print ASCII art header."""
    print("\n" + "=" * 70)
    print(" " * 12 + "heisenberg-morrey - FRACTIONAL INTEGRALS ON H^n")
    print(" " * 16 + "Schrödinger Operators and Morrey Spaces")
    print(" " * 25 + f"Version {__version__}")
    print("=" * 70)
    print("\n  Authors: Sandy H. S. Herho and Gandhi Napitupulu")
    print("\n  License: MIT License")
    print("=" * 70 + "\n")


def normalize_scenario_name(scenario_name: str) -> str:
    """Convert run name to clean filename format."""
    clean = scenario_name.lower()
    clean = clean.replace(' - ', '_')
    clean = clean.replace('-', '_')
    clean = clean.replace(' ', '_')

    while '__' in clean:
        clean = clean.replace('__', '_')

    clean = clean.rstrip('_')
    return clean


def _summary(experiment: str, result) -> dict:
    """Headline numbers of a run, for the log and the console."""
    if experiment in ("hls", "thm-morrey", "thm-weak", "thm-hoelder"):
        return result.summary()
    if experiment == "free-case":
        out = {}
        for name, report in result.items():
            out[f"{name}_max_ratio"] = report.max_ratio
            out[f"{name}_stability"] = np.nan if report.stability is None else report.stability
        return out
    if experiment == "inequalities":
        return {c.name: f"{c.violations}/{c.checked} violations" for c in result.checks}
    if experiment == "heat-kernel":
        return {
            "origin_error": result.origin_error,
            "axis_error": np.nan if result.axis_error is None else result.axis_error,
            "kernel_mass": result.mass,
            **{f"volume_{k}": v for k, v in result.volumes.items()},
        }
    if experiment == "rho":
        values = np.array([r.rho for r in result])
        return {"rho_identity": float(values[0]), "rho_min": float(values.min()), "rho_max": float(values.max())}
    values = np.array([r.value for _, r in result])
    return {
        "functions": len(result),
        "max_norm": float(values.max()),
        "stabilized": sum(r.stabilized for _, r in result),
    }


def save_result(experiment: str, result, csv_path: Path, metadata: dict) -> list:
    """Write the CSV (and for heat-kernel the NetCDF table); returns the paths."""
    if experiment in ("hls", "thm-morrey", "thm-weak", "thm-hoelder", "free-case"):
        return [DataHandler.save_ratio_csv(csv_path, result, metadata)]
    if experiment == "inequalities":
        return [DataHandler.save_inequality_csv(csv_path, result, metadata)]
    if experiment == "rho":
        return [DataHandler.save_rho_csv(csv_path, result, metadata)]
    if experiment == "norm":
        return [DataHandler.save_norm_csv(csv_path, result, metadata)]
    volumes = {
        **result.volumes,
        "origin_error": result.origin_error,
        "axis_error": np.nan if result.axis_error is None else result.axis_error,
        "kernel_mass": result.mass,
    }
    return [
        DataHandler.save_volume_csv(csv_path, volumes, metadata),
        DataHandler.save_netcdf(csv_path.with_suffix(".nc"), result, metadata),
    ]


def run_experiment(config: ExperimentConfig, output: str = None, output_dir: str = "outputs",
                   verbose: bool = True, log_dir: str = "logs"):
    """Run one configured experiment and persist its results."""
    run_name = config.run_name
    clean_name = normalize_scenario_name(run_name)
    csv_path = Path(output or config.output or Path(output_dir) / f"{clean_name}.csv")

    if verbose:
        print(f"\n{'=' * 60}")
        print(f"EXPERIMENT: {run_name} ({config.experiment})")
        print(f"{'=' * 60}")

    logger = ExperimentLogger(clean_name, log_dir, verbose)
    timer = Timer()
    timer.start("total")

    try:
        metadata = config.to_dict()
        logger.log_parameters(metadata)

        with timer.time_section("experiment"):
            if verbose:
                print(f"\n[1/2] Running {config.experiment}...")

            result = RUNNERS[config.experiment](config, progress=verbose, logger=logger)
            summary = _summary(config.experiment, result)
            logger.log_results(summary)

            if verbose:
                for key, value in summary.items():
                    shown = f"{value:.6g}" if isinstance(value, float) else value
                    print(f"       {key}: {shown}")

        with timer.time_section("save_output"):
            if verbose:
                print("\n[2/2] Saving results...")

            for path in save_result(config.experiment, result, csv_path, metadata):
                if verbose:
                    print(f"       ✓ Saved: {path}")

        timer.stop("total")
        logger.log_timing(timer.get_times())

        if verbose:
            times = timer.get_times()
            print(f"\n{'=' * 60}")
            print("TIMING SUMMARY")
            print('=' * 60)
            for key, value in sorted(times.items()):
                display_name = key.replace('_', ' ').title()
                print(f"  {display_name:.<45} {value:>8.2f} s")
            print('=' * 60)

            print(f"\n{'=' * 60}")
            print("✓ EXPERIMENT COMPLETED SUCCESSFULLY")
            print(f"{'=' * 60}\n")

        return result

    except Exception as e:
        logger.error(f"Experiment failed: {str(e)}")
        if verbose:
            print(f"\n{'=' * 60}")
            print(f"✗ EXPERIMENT FAILED: {str(e)}")
            print(f"{'=' * 60}\n")
        raise

    finally:
        logger.finalize()


def load_config(experiment: str = None, config_path: str = None, seed: int = None) -> ExperimentConfig:
    """Typed config from an optional file, the subcommand and the --seed override."""
    data = ConfigManager.load(config_path) if config_path else {}
    overrides = {"seed": seed}
    if experiment:
        overrides["experiment"] = experiment
    return ExperimentConfig.from_dict(data, **overrides)


def main(argv=None):
    """Main entry point for CLI."""
    parser = argparse.ArgumentParser(
        description='heisenberg-morrey - Schrödinger fractional integrals and Morrey norms on H^n',
        epilog='Example: heisenberg-morrey thm-morrey --config configs/thm_morrey.txt --seed 7'
    )

    parser.add_argument(
        'experiment',
        nargs='?',
        choices=EXPERIMENTS,
        help='Experiment to run (overrides the config key)'
    )

    parser.add_argument(
        '--config', '-c',
        type=str,
        help='Path to configuration file (key = value text or JSON)'
    )

    parser.add_argument(
        '--all', '-a',
        action='store_true',
        help='Run every configuration in configs/ sequentially'
    )

    parser.add_argument(
        '--seed',
        type=int,
        default=None,
        help='Master seed (overrides config)'
    )

    parser.add_argument(
        '--out', '-o',
        type=str,
        default=None,
        help='CSV output path (default: outputs/<run>.csv)'
    )

    parser.add_argument(
        '--threads',
        type=int,
        default=None,
        help='Number of numba threads (default: all available)'
    )

    parser.add_argument(
        '--log-dir',
        type=str,
        default='logs',
        help='Log directory (default: logs)'
    )

    parser.add_argument(
        '--quiet', '-q',
        action='store_true',
        help='Quiet mode'
    )

    args = parser.parse_args(argv)
    verbose = not args.quiet

    if args.threads is not None:
        if args.threads < 1:
            print("ERROR: --threads must be positive")
            sys.exit(1)
        import numba
        numba.set_num_threads(min(args.threads, numba.config.NUMBA_NUM_THREADS))

    if verbose:
        print_header()

    if args.all:
        configs_dir = Path(__file__).parent.parent.parent / 'configs'
        config_files = sorted(configs_dir.glob('*.txt'))

        if not config_files:
            print("ERROR: No configuration files found in configs/")
            sys.exit(1)

        for i, cfg_file in enumerate(config_files, 1):
            if verbose:
                print(f"\n{'#' * 70}")
                print(f"# RUNNING CONFIG {i}/{len(config_files)}: {cfg_file.stem}")
                print(f"{'#' * 70}")
            try:
                config = load_config(None, str(cfg_file), args.seed)
            except (HeisenbergMorreyError, ValueError) as e:
                print(f"ERROR: {cfg_file.name}: {e}")
                sys.exit(1)
            run_experiment(config, None, 'outputs', verbose, args.log_dir)
        return

    if not args.experiment and not args.config:
        parser.print_help()
        sys.exit(0)

    try:
        config = load_config(args.experiment, args.config, args.seed)
    except FileNotFoundError as e:
        print(f"ERROR: {e}")
        sys.exit(1)
    except (HeisenbergMorreyError, ValueError) as e:
        print(f"ERROR: invalid configuration: {e}")
        sys.exit(1)

    run_experiment(config, args.out, 'outputs', verbose, args.log_dir)


if __name__ == '__main__':
    main()
