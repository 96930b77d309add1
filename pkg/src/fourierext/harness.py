"""Experiment configuration, orchestration and reproducibility manifests."""

from __future__ import annotations

import dataclasses
import json
import math
import os
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .basis import build_lattice, weights as make_weights
from .geometry import BoxDomain, PointCloud, sphere_cloud
from .hb_system import NORMAL_GRADIENT, SURFACE_LAPLACIAN, VALUE, assemble
from .problems import (
    EigenConfig,
    PoissonConfig,
    eigen_search,
    eigen_sweep,
    run_poisson,
    sphere_eigenvalues,
    write_poisson_csv,
    write_search_csv,
    write_sweep_csv,
)
from .solver import DEFAULT_TOL, evaluate, solve_min_norm

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "EXPERIMENTS",
    "THREADS_ENV",
    "table_rates",
    "parse_lambda_grid",
    "parse_list",
    "load_config_file",
    "run_experiment",
    "INTERP_CSV_HEADER",
]

THREADS_ENV = "FOURIEREXT_THREADS"
EXPERIMENTS = ("poisson-convergence", "eigen-sweep", "eigen-find", "interp-demo")
INTERP_CSV_HEADER = [
    "n_points", "n_rows", "nb", "rank", "max_value_error", "max_surflap_error", "dnorm",
]

_COMMON_KEYS = {"experiment", "out", "seed", "K", "side", "q", "T", "tol", "threads"}
_KEYS = {
    "poisson-convergence": _COMMON_KEYS | {"ns"},
    "eigen-sweep": _COMMON_KEYS | {"n", "anchor", "lambda"},
    "eigen-find": _COMMON_KEYS | {"n", "anchor", "bracket", "resolution"},
    "interp-demo": _COMMON_KEYS | {"n", "probe"},
}
_DEFAULTS = {
    "poisson-convergence": {"ns": [20, 40], "K": 13, "side": 4.0, "q": 4.0, "T": 2.0},
    "eigen-sweep": {
        "n": 400, "K": 12, "side": 4.0, "q": 4.0, "T": 4.0,
        "anchor": [0.0, 0.0, 1.0], "lambda": "0:0.1:14",
    },
    "eigen-find": {
        "n": 100, "K": 12, "side": 4.0, "q": 4.0, "T": 4.0,
        "anchor": [0.0, 0.0, 1.0], "bracket": [1.0, 4.0], "resolution": 1e-8,
    },
    "interp-demo": {"n": 200, "K": 8, "side": 4.0, "q": 4.0, "T": 4.0, "probe": 2000},
}


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit status 2)."""


def table_rates(errors, ns):
    """Pairwise rates ``log(e_i / e_{i+1}) / log(ns_{i+1} / ns_i)``."""
    errors = [float(e) for e in errors]
    ns = [float(n) for n in ns]
    if len(errors) != len(ns):
        raise ValueError("errors and ns must have the same length")
    if len(errors) < 2:
        raise ValueError("need at least two entries to estimate a rate")
    if any(e <= 0 for e in errors):
        raise ValueError("errors must be positive")
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("resolutions must be strictly increasing")
    return [
        math.log(e0 / e1) / math.log(n1 / n0)
        for e0, e1, n0, n1 in zip(errors, errors[1:], ns, ns[1:])
    ]


def parse_lambda_grid(spec) -> np.ndarray:
    """``"lo:step:hi"`` (inclusive) or an explicit list of shifts."""
    if isinstance(spec, (list, tuple)):
        return np.array([float(v) for v in spec])
    parts = str(spec).split(":")
    if len(parts) != 3:
        raise ConfigError(f"lambda grid must look like lo:step:hi, got {spec!r}")
    lo, step, hi = (float(p) for p in parts)
    if step <= 0 or hi < lo:
        raise ConfigError(f"bad lambda grid {spec!r}")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    # round away accumulated representation error so 0.1-steps print cleanly
    return np.round(lo + step * np.arange(count), 12)


def parse_list(text, cast=float) -> list:
    if isinstance(text, (list, tuple)):
        return [cast(v) for v in text]
    try:
        return [cast(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse list {text!r}: {exc}") from None


@dataclasses.dataclass
class ExperimentConfig:
    experiment: str
    params: dict
    out: Path
    seed: int = 0
    threads: int = 1

    @classmethod
    def build(cls, experiment: str, overrides: dict) -> "ExperimentConfig":
        if experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {experiment!r}; choose from {EXPERIMENTS}")
        unknown = set(overrides) - _KEYS[experiment]
        if unknown:
            raise ConfigError(f"unknown keys for {experiment}: {sorted(unknown)}")
        params = dict(_DEFAULTS[experiment])
        params.setdefault("tol", DEFAULT_TOL)
        params.update({k: v for k, v in overrides.items() if v is not None})
        out = Path(params.pop("out", None) or f"{experiment}.csv")
        seed = int(params.pop("seed", 0))
        threads = int(params.pop("threads", None) or os.environ.get(THREADS_ENV, 1))
        params.pop("experiment", None)
        cfg = cls(experiment, params, out, seed, max(threads, 1))
        cfg.validate()
        return cfg

    def validate(self) -> None:
        p = self.params
        try:
            for key in ("K", "n", "probe"):
                if key in p:
                    p[key] = int(p[key])
                    if p[key] < (0 if key == "K" else 1):
                        raise ConfigError(f"{key} out of range: {p[key]}")
            for key in ("side", "q", "T", "tol", "resolution"):
                if key in p:
                    p[key] = float(p[key])
                    if p[key] <= 0:
                        raise ConfigError(f"{key} must be positive")
            if not p["tol"] < 1:
                raise ConfigError("tol must lie in (0, 1)")
            if "ns" in p:
                p["ns"] = parse_list(p["ns"], int)
                if not p["ns"] or any(n < 4 or n % 2 for n in p["ns"]):
                    raise ConfigError(f"ns values must be even and >= 4: {p['ns']}")
                if any(b <= a for a, b in zip(p["ns"], p["ns"][1:])):
                    raise ConfigError("ns values must be strictly increasing")
            if "bracket" in p:
                p["bracket"] = parse_list(p["bracket"])
                if len(p["bracket"]) != 2 or not p["bracket"][0] < p["bracket"][1]:
                    raise ConfigError(f"bracket must be lo,hi with lo < hi: {p['bracket']}")
            if "anchor" in p:
                p["anchor"] = parse_list(p["anchor"])
                if len(p["anchor"]) != 3:
                    raise ConfigError("anchor must have three coordinates")
                if abs(math.hypot(*p["anchor"]) - 1.0) > 1e-12:
                    raise ConfigError(f"anchor {p['anchor']} is not on the unit sphere")
            if "lambda" in p:
                grid = parse_lambda_grid(p["lambda"])
                if grid.size == 0:
                    raise ConfigError("empty lambda grid")
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from None

    def to_dict(self) -> dict:
        d = {"experiment": self.experiment, "out": str(self.out), "seed": self.seed}
        d.update(self.params)
        return d

    def eigen_config(self) -> EigenConfig:
        p = self.params
        return EigenConfig(
            n=p["n"], seed=self.seed, K=p["K"], side=p["side"], q=p["q"], T=p["T"],
            anchor=tuple(p["anchor"]), tol=p["tol"],
        )


def load_config_file(path) -> dict:
    """Read a JSON config, or the ``config`` block of a run manifest."""
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    if "config" in data and "versions" in data:
        data = data["config"]
    return data


def _environment() -> dict:
    env = {
        "python": sys.version.split()[0],
        "platform": platform.platform(),
        "machine": platform.machine(),
        "cpu_count": os.cpu_count(),
        THREADS_ENV: os.environ.get(THREADS_ENV),
    }
    try:
        from threadpoolctl import threadpool_info

        env["blas"] = [
            {k: info.get(k) for k in ("internal_api", "version", "num_threads")}
            for info in threadpool_info()
        ]
    except ImportError:  # pragma: no cover
        pass
    return env


def _versions() -> dict:
    import scipy

    return {"fourierext": __version__, "numpy": np.__version__, "scipy": scipy.__version__}


def _run_poisson(cfg: ExperimentConfig, stages: dict):
    p = cfg.params
    configs = [
        PoissonConfig(ns=ns, K=p["K"], side=p["side"], q=p["q"], T=p["T"], tol=p["tol"])
        for ns in p["ns"]
    ]

    def one(pc):
        return run_poisson(pc, keep_solution=False)

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            runs = list(pool.map(one, configs))
    else:
        runs = [one(pc) for pc in configs]
    for run in runs:
        stages[f"poisson_ns{run.ns}"] = run.seconds
    if len(runs) > 1:
        rates = table_rates([r.max_error for r in runs], [r.ns for r in runs])
        for run, rate in zip(runs[1:], rates):
            run.rate = rate
    write_poisson_csv(runs, cfg.out)
    return runs


def _run_sweep(cfg: ExperimentConfig, stages: dict):
    ec = cfg.eigen_config()
    grid = parse_lambda_grid(cfg.params["lambda"])
    start = time.perf_counter()
    dnorms = eigen_sweep(ec, grid, threads=cfg.threads)
    stages["sweep"] = time.perf_counter() - start
    write_sweep_csv(grid, dnorms, cfg.out)
    return grid, dnorms


def _nearest_eigenvalue(lam: float) -> float:
    n = max(int(round((-1.0 + math.sqrt(1.0 + 4.0 * max(lam, 0.0))) / 2.0)), 0)
    candidates = sphere_eigenvalues(n + 2)
    return float(min(candidates, key=lambda v: abs(v - lam)))


def _run_find(cfg: ExperimentConfig, stages: dict):
    ec = cfg.eigen_config()
    lo, hi = cfg.params["bracket"]
    start = time.perf_counter()
    lam = eigen_search(ec, (lo, hi), resolution=cfg.params["resolution"])
    stages["search"] = time.perf_counter() - start
    err = abs(lam - _nearest_eigenvalue(lam))
    write_search_csv([(lo, hi, lam, err)], cfg.out)
    return lam, err


def _interp_target(points):
    x, y, z = points.T
    return z + x * y


def _interp_target_surflap(points):
    x, y, z = points.T
    # degree-1 and degree-2 spherical harmonics: eigenvalues -2 and -6
    return -2.0 * z - 6.0 * x * y


def interp_demo(n: int, seed: int, K: int, side: float, q: float, T: float, tol: float,
                probe: int = 2000):
    """Closest-point-like interpolation of ``z + xy`` on the sphere.

    Imposes values and vanishing normal derivatives at ``n`` random points,
    then measures value and Laplace-Beltrami errors on an independent probe.
    """
    cloud = sphere_cloud(n, seed)
    lattice = build_lattice(BoxDomain.cube(side), K)
    w = make_weights(lattice, q, T)
    system = assemble(
        [cloud, cloud], [VALUE, NORMAL_GRADIENT], [_interp_target(cloud.points), 0.0], lattice, w
    )
    solution, report = solve_min_norm(system, tol)
    probe_cloud = sphere_cloud(probe, seed + 1)
    value, _, lap, nhess = evaluate(solution, probe_cloud.points, probe_cloud.normals)
    value_err = float(np.max(np.abs(value - _interp_target(probe_cloud.points))))
    lap_err = float(np.max(np.abs(lap - nhess - _interp_target_surflap(probe_cloud.points))))
    return {
        "n_points": n,
        "n_rows": report.rows,
        "nb": report.cols,
        "rank": report.rank,
        "max_value_error": value_err,
        "max_surflap_error": lap_err,
        "dnorm": solution.d_norm,
    }


def _run_interp(cfg: ExperimentConfig, stages: dict):
    import csv

    p = cfg.params
    start = time.perf_counter()
    row = interp_demo(p["n"], cfg.seed, p["K"], p["side"], p["q"], p["T"], p["tol"], p["probe"])
    stages["interp"] = time.perf_counter() - start
    with open(cfg.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(INTERP_CSV_HEADER)
        writer.writerow([
            row[k] if isinstance(row[k], int) else repr(float(row[k]))
            for k in INTERP_CSV_HEADER
        ])
    return row


_RUNNERS = {
    "poisson-convergence": _run_poisson,
    "eigen-sweep": _run_sweep,
    "eigen-find": _run_find,
    "interp-demo": _run_interp,
}


def run_experiment(cfg: ExperimentConfig, manifest_path: Optional[Path] = None):
    """Run one experiment, write its CSV and a JSON manifest next to it."""
    cfg.out.parent.mkdir(parents=True, exist_ok=True)
    stages: dict = {}
    start = time.perf_counter()
    result = _RUNNERS[cfg.experiment](cfg, stages)
    stages["total"] = time.perf_counter() - start
    manifest = {
        "config": cfg.to_dict(),
        "versions": _versions(),
        "stages_seconds": stages,
        "environment": _environment(),
        "outputs": [str(cfg.out)],
    }
    manifest_path = manifest_path or cfg.out.with_suffix(cfg.out.suffix + ".manifest.json")
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, default=str)
    return result, manifest
