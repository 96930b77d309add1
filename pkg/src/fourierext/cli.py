"""Command-line entry point: ``fourierext <experiment> [flags]``."""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from .harness import EXPERIMENTS, ConfigError, ExperimentConfig, load_config_file, run_experiment
from .solver import SolverError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3

logger = logging.getLogger("fourierext")


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fourierext",
        description="Norm-minimizing Fourier extensions for surface PDEs.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="experiment", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config or a previous run manifest; flags win")
        p.add_argument("--out", help="CSV output path")
        p.add_argument("--manifest", help="manifest path (default: <out>.manifest.json)")
        p.add_argument("--seed", type=int)
        p.add_argument("--K", type=int, help="lattice half-width, N_b = (2K+1)^3")
        p.add_argument("--side", type=float, help="box side length")
        p.add_argument("--q", type=float, help="weight growth exponent")
        p.add_argument("--T", type=float, help="weight width parameter")
        p.add_argument("--tol", type=float, help="relative rank tolerance")
        p.add_argument("--threads", type=int, help="worker threads for independent runs")

    p = sub.add_parser("poisson-convergence", help="catenoid Poisson convergence table")
    common(p)
    p.add_argument("--ns", help="comma-separated even grid sizes, e.g. 20,40")

    p = sub.add_parser("eigen-sweep", help="native norm over a grid of shifts")
    common(p)
    p.add_argument("--n", type=int, help="number of random sphere points")
    p.add_argument("--lambda", dest="lambda_", metavar="LO:STEP:HI")
    p.add_argument("--anchor", help="x,y,z of the normalization point")

    p = sub.add_parser("eigen-find", help="locate one eigenvalue inside a bracket")
    common(p)
    p.add_argument("--n", type=int)
    p.add_argument("--bracket", help="lo,hi")
    p.add_argument("--anchor")
    p.add_argument("--resolution", type=float)

    p = sub.add_parser("interp-demo", help="Hermite-Birkhoff interpolation on the sphere")
    common(p)
    p.add_argument("--n", type=int)
    p.add_argument("--probe", type=int)
    return parser


_SKIP = {"config", "manifest", "verbose", "experiment"}


def main(argv=None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        overrides = {}
        if args.config:
            overrides.update(load_config_file(args.config))
            file_experiment = overrides.pop("experiment", args.experiment)
            if file_experiment != args.experiment:
                raise ConfigError(
                    f"config is for {file_experiment!r}, command is {args.experiment!r}"
                )
        flags = {
            ("lambda" if k == "lambda_" else k): v
            for k, v in vars(args).items()
            if k not in _SKIP and v is not None
        }
        overrides.update(flags)
        cfg = ExperimentConfig.build(args.experiment, overrides)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"fourierext: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        run_experiment(cfg, args.manifest)
    except (SolverError, np.linalg.LinAlgError) as exc:
        print(f"fourierext: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    print(cfg.out)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())


__all__ = ["main", "EXPERIMENTS", "EXIT_OK", "EXIT_CONFIG", "EXIT_SOLVER"]
