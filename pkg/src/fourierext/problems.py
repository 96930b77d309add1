"""The two surface experiments: wavy-catenoid Poisson and sphere eigenvalues.

Poisson: ``-lap_S u = 16 cos(4s) / cosh(t)^2`` on the catenoid with
``u = cos(4s)`` on both wavy edges (exact solution ``cos(4s)``).  The
extension is constrained by

* ``lap u - n^T (D^2 u) n = -f`` and ``n . grad u = 0`` at interior points,
* ``u = cos(4s)`` at edge points,

so the sign flip on the Laplacian rows yields ``-lap_S u = f``.

Eigenvalues: on the unit sphere the extension satisfies
``-(lap u - n^T (D^2 u) n) - lambda u = 0`` and ``n . grad u = 0`` at random
points plus ``u(anchor) = 1``.  The minimum native norm stays bounded only
when ``lambda`` is an eigenvalue of ``-lap_S``, so minima of the norm over
``lambda`` locate the spectrum ``n (n + 1)``.
"""

from __future__ import annotations

import csv
import functools
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .basis import build_lattice, weights as make_weights
from .geometry import (
    BoxDomain,
    PointCloud,
    catenoid_boundary_cloud,
    catenoid_cloud,
    sphere_cloud,
)
from .hb_system import (
    NORMAL_GRADIENT,
    SURFACE_LAPLACIAN,
    VALUE,
    ConstraintFunctional,
    assemble,
    functional_rows,
)
from .solver import (
    DEFAULT_TOL,
    ExtensionSolution,
    RowSpaceReduction,
    SolveReport,
    SolverError,
    evaluate,
    solve_min_norm,
)

__all__ = [
    "PoissonConfig",
    "PoissonRun",
    "EigenConfig",
    "EigenProblem",
    "NonUnimodalError",
    "poisson_rhs",
    "poisson_exact",
    "build_poisson_system",
    "run_poisson",
    "solve_poisson",
    "eigen_problem",
    "eigen_dnorm",
    "eigen_sweep",
    "eigen_search",
    "golden_section_min",
    "local_minima",
    "sphere_eigenvalues",
    "surface_residual",
    "POISSON_CSV_HEADER",
    "SWEEP_CSV_HEADER",
    "SEARCH_CSV_HEADER",
    "write_poisson_csv",
    "read_poisson_csv",
    "write_sweep_csv",
    "read_sweep_csv",
    "write_search_csv",
    "read_search_csv",
]

logger = logging.getLogger(__name__)

POISSON_CSV_HEADER = ["ns", "n_points", "n_rows", "nb", "max_error", "rate", "dnorm", "seconds"]
SWEEP_CSV_HEADER = ["lambda", "dnorm"]
SEARCH_CSV_HEADER = ["bracket_lo", "bracket_hi", "lambda_est", "abs_error"]


class NonUnimodalError(SolverError):
    """The norm curve inside a search bracket has more than one dip."""


def _g(x) -> str:
    return repr(float(x))


# --------------------------------------------------------------------------
# Poisson on the wavy catenoid


def poisson_rhs(s, t):
    return 16.0 * np.cos(4.0 * s) / np.cosh(t) ** 2


def poisson_exact(s, t=None):
    return np.cos(4.0 * np.asarray(s))


@dataclass(frozen=True)
class PoissonConfig:
    ns: int = 20
    K: int = 13
    side: float = 4.0
    q: float = 4.0
    T: float = 2.0
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        if self.K < 0 or self.side <= 0 or self.q <= 0 or self.T <= 0:
            raise ValueError(f"invalid Poisson configuration {self}")
        if not 0 < self.tol < 1:
            raise ValueError("tol must lie in (0, 1)")


@dataclass
class PoissonRun:
    ns: int
    n_points: int
    n_rows: int
    nb: int
    max_error: float
    dnorm: float
    seconds: float
    report: SolveReport
    solution: Optional[ExtensionSolution] = field(default=None, repr=False)
    rate: float = float("nan")


def build_poisson_system(cfg: PoissonConfig):
    """Return ``(system, interior_cloud, boundary_cloud)``."""
    interior = catenoid_cloud(cfg.ns)
    edge = catenoid_boundary_cloud(cfg.ns)
    box = BoxDomain.cube(cfg.side)
    lattice = build_lattice(box, cfg.K)
    w = make_weights(lattice, cfg.q, cfg.T)
    s_in, t_in = interior.intrinsic.T
    s_bd, t_bd = edge.intrinsic.T
    system = assemble(
        [interior, interior, edge],
        [SURFACE_LAPLACIAN, NORMAL_GRADIENT, VALUE],
        [-poisson_rhs(s_in, t_in), 0.0, poisson_exact(s_bd, t_bd)],
        lattice,
        w,
    )
    return system, interior, edge


def run_poisson(cfg: PoissonConfig, keep_solution: bool = True) -> PoissonRun:
    start = time.perf_counter()
    system, interior, _ = build_poisson_system(cfg)
    solution, report = solve_min_norm(system, cfg.tol)
    n_rows, nb = system.rows.shape
    del system
    value = evaluate(solution, interior.points)[0]
    max_error = float(np.max(np.abs(value - poisson_exact(interior.intrinsic[:, 0]))))
    seconds = time.perf_counter() - start
    logger.info(
        "poisson ns=%d rows=%d rank=%d max_error=%.4e (%.1fs)",
        cfg.ns, n_rows, report.rank, max_error, seconds,
    )
    return PoissonRun(
        ns=cfg.ns,
        n_points=len(interior),
        n_rows=n_rows,
        nb=nb,
        max_error=max_error,
        dnorm=solution.d_norm,
        seconds=seconds,
        report=report,
        solution=solution if keep_solution else None,
    )


def solve_poisson(cfg: PoissonConfig):
    """Solve the catenoid problem; returns ``(solution, max_error)`` on the interior cloud."""
    run = run_poisson(cfg)
    return run.solution, run.max_error


# --------------------------------------------------------------------------
# Sphere eigenvalues


def sphere_eigenvalues(count: int):
    """Eigenvalues ``n (n + 1)`` of ``-lap_S`` on the unit sphere."""
    return [n * (n + 1) for n in range(count)]


@dataclass(frozen=True)
class EigenConfig:
    n: int = 100
    seed: int = 0
    K: int = 12
    side: float = 4.0
    q: float = 4.0
    T: float = 4.0
    anchor: tuple = (0.0, 0.0, 1.0)
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        object.__setattr__(self, "anchor", tuple(float(v) for v in self.anchor))
        if self.n < 1 or self.K < 0 or self.side <= 0 or self.q <= 0 or self.T <= 0:
            raise ValueError(f"invalid eigen configuration {self}")
        if not 0 < self.tol < 1:
            raise ValueError("tol must lie in (0, 1)")


class EigenProblem:
    """Shift-dependent minimum-norm problem on a sphere cloud.

    The rows for every shift are combinations of four fixed row blocks
    (value, surface Laplacian, normal gradient at the cloud; value at the
    anchor), so the default ``"reduced"`` method factors those blocks once
    and solves a small system per shift.  ``"direct"`` assembles and solves
    the full system for each shift.
    """

    def __init__(self, cfg: EigenConfig, cloud: Optional[PointCloud] = None):
        anchor = np.asarray(cfg.anchor, dtype=float)
        if abs(np.linalg.norm(anchor) - 1.0) > 1e-12:
            raise ValueError(f"anchor {cfg.anchor} does not lie on the unit sphere")
        self.cfg = cfg
        self.cloud = cloud if cloud is not None else sphere_cloud(cfg.n, cfg.seed)
        self.anchor_cloud = PointCloud(anchor[None, :], anchor[None, :])
        self.lattice = build_lattice(BoxDomain.cube(cfg.side), cfg.K)
        self.weights = make_weights(self.lattice, cfg.q, cfg.T)
        self._reduction = None

    @property
    def n_points(self) -> int:
        return len(self.cloud)

    def system(self, lam: float):
        return assemble(
            [self.cloud, self.cloud, self.anchor_cloud],
            [ConstraintFunctional.shifted_laplacian(lam), NORMAL_GRADIENT, VALUE],
            [0.0, 0.0, 1.0],
            self.lattice,
            self.weights,
        )

    def _reduced(self) -> RowSpaceReduction:
        if self._reduction is None:
            n = self.n_points
            nb = len(self.lattice)
            W = np.empty((3 * n + 1, nb), dtype=complex)
            args = (self.lattice, self.weights)
            functional_rows(VALUE, self.cloud, *args, out=W[:n])
            functional_rows(SURFACE_LAPLACIAN, self.cloud, *args, out=W[n:2 * n])
            functional_rows(NORMAL_GRADIENT, self.cloud, *args, out=W[2 * n:3 * n])
            functional_rows(VALUE, self.anchor_cloud, *args, out=W[3 * n:])
            self._reduction = RowSpaceReduction(W)
        return self._reduction

    def _combination(self, lam: float):
        n = self.n_points
        C = np.zeros((2 * n + 1, 3 * n + 1))
        idx = np.arange(n)
        C[idx, idx] = -lam
        C[idx, n + idx] = -1.0
        C[n + idx, 2 * n + idx] = 1.0
        C[2 * n, 3 * n] = 1.0
        f = np.zeros(2 * n + 1)
        f[-1] = 1.0
        return C, f

    def solve(self, lam: float, method: str = "reduced"):
        """Return ``(ExtensionSolution, SolveReport)`` for one shift."""
        if method == "direct":
            return solve_min_norm(self.system(lam), self.cfg.tol)
        if method != "reduced":
            raise ValueError(f"unknown method {method!r}")
        red = self._reduced()
        C, f = self._combination(lam)
        y, rank, cond, residual = red.solve(C, f, self.cfg.tol)
        solution = ExtensionSolution(red.lift(y), self.lattice, self.weights, residual)
        report = SolveReport(C.shape[0], len(self.lattice), rank, self.cfg.tol,
                             "orthogonal-decomposition", cond, residual, solution.d_norm)
        return solution, report

    def dnorm(self, lam: float, method: str = "reduced") -> float:
        if method == "direct":
            return self.solve(lam, "direct")[0].d_norm
        red = self._reduced()
        C, f = self._combination(lam)
        y = red.solve(C, f, self.cfg.tol)[0]
        return float(np.linalg.norm(y))


@functools.lru_cache(maxsize=4)
def eigen_problem(cfg: EigenConfig) -> EigenProblem:
    """Cached :class:`EigenProblem` so repeated shifts reuse one factorization."""
    return EigenProblem(cfg)


def eigen_dnorm(cfg: EigenConfig, lam: float, method: str = "reduced") -> float:
    """Native norm of the minimum-norm extension for shift ``lam``."""
    return eigen_problem(cfg).dnorm(lam, method)


def eigen_sweep(cfg: EigenConfig, lambdas: Sequence[float], threads: int = 1) -> np.ndarray:
    problem = eigen_problem(cfg)
    problem._reduced()
    lambdas = [float(v) for v in lambdas]
    if threads <= 1:
        return np.array([problem.dnorm(v) for v in lambdas])
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return np.array(list(pool.map(problem.dnorm, lambdas)))


def local_minima(values: np.ndarray) -> np.ndarray:
    """Indices of grid local minima (endpoints compared with their one neighbour)."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return np.arange(v.size)
    left = np.concatenate([[np.inf], v[:-1]])
    right = np.concatenate([v[1:], [np.inf]])
    return np.flatnonzero((v < left) & (v <= right))


_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section_min(
    func: Callable[[float], float],
    lo: float,
    hi: float,
    xtol: float = 1e-8,
    rtol_unimodal: float = 1e-6,
    max_iter: int = 200,
):
    """Golden-section minimization of a unimodal function on ``[lo, hi]``.

    Raises :class:`NonUnimodalError` if an interior probe exceeds both
    bracket ends by more than ``rtol_unimodal`` (relative).
    """
    a, b = float(lo), float(hi)
    fa, fb = func(a), func(b)
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = func(c), func(d)

    def check(x, fx, fa, fb):
        if fx > max(fa, fb) * (1.0 + rtol_unimodal):
            raise NonUnimodalError(
                f"norm at {x:.10g} ({fx:.6e}) exceeds both bracket ends "
                f"{a:.10g} ({fa:.6e}) and {b:.10g} ({fb:.6e})"
            )

    check(c, fc, fa, fb)
    check(d, fd, fa, fb)
    for _ in range(max_iter):
        if b - a <= xtol:
            break
        if fc <= fd:
            b, fb = d, fd
            d, fd = c, fc
            c = b - _INV_PHI * (b - a)
            fc = func(c)
            check(c, fc, fa, fb)
        else:
            a, fa = c, fc
            c, fc = d, fd
            d = a + _INV_PHI * (b - a)
            fd = func(d)
            check(d, fd, fa, fb)
    candidates = [(fa, a), (fc, c), (fd, d), (fb, b)]
    return min(candidates)[1]


def eigen_search(
    cfg: EigenConfig,
    bracket,
    resolution: float = 1e-8,
    coarse_points: int = 17,
    method: str = "reduced",
) -> float:
    """Locate the norm minimum in ``bracket``: coarse grid scan, then golden section.

    The bracket must contain exactly one eigenvalue; a coarse scan with more
    than one interior dip raises :class:`NonUnimodalError`.
    """
    lo, hi = (float(v) for v in bracket)
    if not lo < hi:
        raise ValueError(f"bracket must satisfy lo < hi, got {bracket}")
    problem = eigen_problem(cfg)

    def func(lam):
        return problem.dnorm(lam, method)

    grid = np.linspace(lo, hi, coarse_points)
    values = np.array([func(v) for v in grid])
    interior = [i for i in local_minima(values) if 0 < i < len(grid) - 1]
    if len(interior) > 1:
        raise NonUnimodalError(
            f"{len(interior)} local minima of the norm in [{lo}, {hi}] at "
            f"{[round(float(grid[i]), 6) for i in interior]}"
        )
    i = int(np.argmin(values))
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, len(grid) - 1)]
    lam = golden_section_min(func, a, b, xtol=resolution)
    logger.info("eigen search [%g, %g] n=%d -> %.12f", lo, hi, problem.n_points, lam)
    return lam


def surface_residual(
    solution: ExtensionSolution,
    probe: PointCloud,
    functional: ConstraintFunctional,
    rhs,
) -> float:
    """``max |F u - rhs|`` over the probe points.

    ``rhs`` is a scalar, an array with one value per probe point, or a
    callable taking the probe cloud.
    """
    derivs = evaluate(solution, probe.points, probe.normals)
    applied = functional.apply(*derivs)
    target = rhs(probe) if callable(rhs) else rhs
    target = np.broadcast_to(np.asarray(target, dtype=complex), applied.shape)
    return float(np.max(np.abs(applied - target)))


# --------------------------------------------------------------------------
# CSV artifacts


def write_poisson_csv(runs: Sequence[PoissonRun], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(POISSON_CSV_HEADER)
        for run in runs:
            writer.writerow([
                run.ns, run.n_points, run.n_rows, run.nb, _g(run.max_error),
                "" if math.isnan(run.rate) else _g(run.rate), _g(run.dnorm), _g(run.seconds),
            ])


def read_poisson_csv(path) -> list:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != POISSON_CSV_HEADER:
            raise ValueError(f"unexpected header {reader.fieldnames}")
        out = []
        for row in reader:
            out.append({
                "ns": int(row["ns"]),
                "n_points": int(row["n_points"]),
                "n_rows": int(row["n_rows"]),
                "nb": int(row["nb"]),
                "max_error": float(row["max_error"]),
                "rate": float(row["rate"]) if row["rate"] else float("nan"),
                "dnorm": float(row["dnorm"]),
                "seconds": float(row["seconds"]),
            })
        return out


def write_sweep_csv(lambdas, dnorms, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_CSV_HEADER)
        for lam, dn in zip(lambdas, dnorms):
            writer.writerow([_g(lam), _g(dn)])


def read_sweep_csv(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != SWEEP_CSV_HEADER:
            raise ValueError(f"unexpected header {reader.fieldnames}")
        rows = [(float(r["lambda"]), float(r["dnorm"])) for r in reader]
    lam = np.array([r[0] for r in rows])
    dn = np.array([r[1] for r in rows])
    return lam, dn


def write_search_csv(results, path) -> None:
    """``results`` is an iterable of ``(lo, hi, lambda_est, abs_error)``."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SEARCH_CSV_HEADER)
        for lo, hi, lam, err in results:
            writer.writerow([_g(lo), _g(hi), _g(lam), _g(err)])


def read_search_csv(path) -> list:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != SEARCH_CSV_HEADER:
            raise ValueError(f"unexpected header {reader.fieldnames}")
        return [tuple(float(r[k]) for k in SEARCH_CSV_HEADER) for r in reader]
