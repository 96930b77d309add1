"""Minimum-norm solutions of underdetermined collocation systems.

The primary path is a complete orthogonal decomposition: a column-pivoted
QR of the adjoint ``V^H`` (cost ~ rows^2 * cols), rank truncation on the
diagonal of ``R``, and a second QR of the retained triangular block.  The
kernel path forms ``Phi = V V^H`` and Cholesky-factors it; it squares the
condition number and is kept for comparison only.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from .basis import FrequencyLattice, WeightSequence
from .hb_system import CollocationSystem

__all__ = [
    "SolverError",
    "ExtensionSolution",
    "SolveReport",
    "DEFAULT_TOL",
    "min_norm_lstsq",
    "solve_min_norm",
    "solve_kernel",
    "d_norm_of",
    "evaluate",
    "RowSpaceReduction",
    "REPORT_CSV_HEADER",
]

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-12
REPORT_CSV_HEADER = ["rows", "cols", "rank", "tol", "path", "cond_estimate", "residual", "dnorm"]


class SolverError(RuntimeError):
    """A factorization failed or the system cannot be solved as posed."""


@dataclass(frozen=True)
class ExtensionSolution:
    """Weighted coefficients ``b`` of ``u(x) = sum_n d_n^{-1/2} b_n exp(i w_n . x)``.

    ``d_norm`` is the native norm of ``u``, which equals ``|b|_2``.
    """

    coefficients: np.ndarray
    lattice: FrequencyLattice
    weights: WeightSequence
    residual_norm: float = 0.0
    d_norm: float = field(init=False)

    def __post_init__(self):
        b = np.asarray(self.coefficients, dtype=complex).reshape(-1)
        if b.size != len(self.lattice):
            raise ValueError(f"{b.size} coefficients for a lattice of {len(self.lattice)}")
        b.setflags(write=False)
        object.__setattr__(self, "coefficients", b)
        object.__setattr__(self, "d_norm", float(np.linalg.norm(b)))

    @property
    def fourier_coefficients(self) -> np.ndarray:
        """Plain Fourier coefficients ``d_n^{-1/2} b_n``."""
        return self.weights.inv_sqrt * self.coefficients

    def __add__(self, other: "ExtensionSolution") -> "ExtensionSolution":
        return ExtensionSolution(self.coefficients + other.coefficients, self.lattice, self.weights)

    def scaled(self, alpha: complex) -> "ExtensionSolution":
        return ExtensionSolution(alpha * self.coefficients, self.lattice, self.weights)


@dataclass(frozen=True)
class SolveReport:
    rows: int
    cols: int
    rank: int
    truncation_tol: float
    path: str
    condition_estimate: float
    residual: float = float("nan")
    dnorm: float = float("nan")

    def csv_row(self) -> list:
        g = lambda v: repr(float(v))  # noqa: E731
        return [
            self.rows,
            self.cols,
            self.rank,
            g(self.truncation_tol),
            self.path,
            g(self.condition_estimate),
            g(self.residual),
            g(self.dnorm),
        ]


def _numerical_rank(diag: np.ndarray, tol: float) -> int:
    if diag.size == 0 or diag[0] == 0:
        return 0
    return int(np.count_nonzero(diag > tol * diag[0]))


def _apply_householder(qr_raw, tau, y: np.ndarray, n_rows: int) -> np.ndarray:
    """Return ``Q @ [y; 0]`` for ``Q`` stored as LAPACK reflectors."""
    c = np.zeros((n_rows, 1), dtype=complex, order="F")
    c[: y.size, 0] = y
    work_query = lapack.zunmqr("L", "N", qr_raw, tau, c, -1)
    lwork = int(np.real(work_query[1][0]))
    out, _, info = lapack.zunmqr("L", "N", qr_raw, tau, c, max(lwork, 1), overwrite_c=1)
    if info != 0:
        raise SolverError(f"zunmqr failed with info={info}")
    return out[:, 0]


def _triangular_min_norm(R1: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Least-squares solution of ``R1^H y = rhs`` with ``R1`` of full row rank."""
    Z, T = sla.qr(R1.conj().T, mode="economic", check_finite=False)
    return sla.solve_triangular(T, Z.conj().T @ rhs, lower=False, check_finite=False)


def min_norm_lstsq(A: np.ndarray, f: np.ndarray, tol: float = DEFAULT_TOL):
    """Minimum-norm least-squares solution of ``A x = f``.

    Returns ``(x, rank, condition_estimate)``.  The rank is the number of
    pivoted-QR diagonal entries above ``tol`` times the largest one, and the
    condition estimate is the ratio of the first to the last retained entry.
    """
    A = np.asarray(A)
    f = np.asarray(f, dtype=complex)
    n_rows, n_cols = A.shape
    if not np.any(A):
        raise SolverError("all-zero system")

    if n_rows <= n_cols:
        # A^H P = Q R, so A[piv] = R^H Q^H and the solution lies in range(Q)
        work = np.asfortranarray(A.conj().T, dtype=complex)
        (qr_raw, tau), R, piv = sla.qr(
            work, mode="raw", pivoting=True, overwrite_a=True, check_finite=False
        )
        diag = np.abs(np.diag(R))
        k = _numerical_rank(diag, tol)
        y = _triangular_min_norm(R[:k, :], f[piv])
        x = _apply_householder(qr_raw, tau, y, n_cols)
    else:
        Q, R, piv = sla.qr(A, mode="economic", pivoting=True, check_finite=False)
        diag = np.abs(np.diag(R))
        k = _numerical_rank(diag, tol)
        rhs = Q[:, :k].conj().T @ f
        # R1 c = rhs with R1 = T^H Z^H  =>  c = Z T^{-H} rhs
        Z, T = sla.qr(R[:k, :].conj().T, mode="economic", check_finite=False)
        c = Z @ sla.solve_triangular(T, rhs, trans="C", lower=False, check_finite=False)
        x = np.empty(n_cols, dtype=complex)
        x[piv] = c
    cond = float(diag[0] / diag[k - 1]) if k else float("inf")
    return x, k, cond


def _finish(system, b, path, rank, tol, cond):
    residual = float(np.linalg.norm(system.rows @ b - system.rhs))
    solution = ExtensionSolution(b, system.lattice, system.weights, residual)
    report = SolveReport(
        rows=system.rows.shape[0],
        cols=system.rows.shape[1],
        rank=rank,
        truncation_tol=tol,
        path=path,
        condition_estimate=cond,
        residual=residual,
        dnorm=solution.d_norm,
    )
    logger.debug("%s solve: %s", path, report)
    return solution, report


def solve_min_norm(system: CollocationSystem, tol: float = DEFAULT_TOL):
    """Minimum ``|b|_2`` solution of ``V b = proj_{R(V)} f``.

    Parameters
    ----------
    system
        Assembled collocation system.
    tol
        Relative rank-truncation threshold in ``(0, 1)``.

    Returns
    -------
    (ExtensionSolution, SolveReport)
    """
    if not 0.0 < tol < 1.0:
        raise ValueError(f"tol must lie in (0, 1), got {tol}")
    if system.rows.size == 0:
        raise ValueError("empty system")
    b, rank, cond = min_norm_lstsq(system.rows, system.rhs, tol)
    return _finish(system, b, "orthogonal-decomposition", rank, tol, cond)


def solve_kernel(system: CollocationSystem):
    """Solve through the kernel matrix ``Phi = V V^H``: ``Phi beta = f``, ``b = V^H beta``."""
    V = system.rows
    if not np.any(V):
        raise SolverError("all-zero system")
    phi = V @ V.conj().T
    chol, info = lapack.zpotrf(phi, lower=1, clean=1)
    if info != 0:
        smallest = float(np.linalg.eigvalsh(phi)[0])
        if info > 0:
            raise SolverError(
                f"kernel matrix is not positive definite: Cholesky pivot {info} failed "
                f"(smallest eigenvalue {smallest:.3e})"
            )
        raise SolverError(f"zpotrf argument error (info={info})")
    pivots = np.real(np.diag(chol))
    beta = sla.cho_solve((chol, True), system.rhs, check_finite=False)
    b = V.conj().T @ beta
    cond = float((pivots.max() / pivots.min()) ** 2)
    return _finish(system, b, "kernel", V.shape[0], 0.0, cond)


def d_norm_of(solution: ExtensionSolution) -> float:
    return float(np.linalg.norm(solution.coefficients))


def evaluate(solution: ExtensionSolution, x, n=None, chunk: int = 512):
    """Value, normal derivative, Laplacian and ``n^T H n`` of the extension.

    ``x`` is one point or an array of points (``n`` likewise).  Without
    normals the two normal-dependent entries are None.
    """
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    box = solution.lattice.box
    if not np.all(box.contains(pts, strict=False)):
        raise ValueError("evaluation point outside the box")
    nrm = None
    if n is not None:
        nrm = np.atleast_2d(np.asarray(n, dtype=float))
        if nrm.shape != pts.shape:
            raise ValueError("normals must match the evaluation points")
    freqs = solution.lattice.frequencies
    coef = solution.fourier_coefficients
    omega_sq = np.einsum("ij,ij->i", freqs, freqs)
    value = np.empty(len(pts), dtype=complex)
    lap = np.empty(len(pts), dtype=complex)
    ngrad = np.empty(len(pts), dtype=complex) if nrm is not None else None
    nhess = np.empty(len(pts), dtype=complex) if nrm is not None else None
    for start in range(0, len(pts), chunk):
        sl = slice(start, start + chunk)
        phase = np.exp(1j * (pts[sl] @ freqs.T)) * coef[None, :]
        value[sl] = phase.sum(axis=1)
        lap[sl] = -(phase @ omega_sq)
        if nrm is not None:
            n_dot = nrm[sl] @ freqs.T
            ngrad[sl] = 1j * np.einsum("ij,ij->i", phase, n_dot)
            nhess[sl] = -np.einsum("ij,ij->i", phase, n_dot ** 2)
    out = (value, ngrad, lap, nhess)
    if single:
        return tuple(None if v is None else complex(v[0]) for v in out)
    return out


class RowSpaceReduction:
    """Solve many systems whose rows are combinations of one fixed row set.

    If every system has the form ``(C @ W) b = f`` for a fixed ``W``, the
    minimum-norm ``b`` lies in the row space of ``W``.  With ``W^H = Q R``
    computed once, ``b = Q y`` and ``(C @ W) Q = C @ R^H``, so each solve
    reduces to a minimum-norm problem of size ``rows(C) x rows(W)`` and
    ``|b|_2 = |y|_2``.  Used for spectral-shift sweeps where only ``C``
    depends on the shift.
    """

    def __init__(self, W: np.ndarray):
        W = np.asarray(W)
        n_atoms, n_basis = W.shape
        if n_atoms > n_basis:
            raise ValueError("row-space reduction needs rows(W) <= cols(W)")
        work = np.asfortranarray(W.conj().T, dtype=complex)
        (self._qr, self._tau), R = sla.qr(work, mode="raw", overwrite_a=True, check_finite=False)
        self.reduced_rows = np.ascontiguousarray(R.conj().T)  # W Q = R^H
        self.n_basis = n_basis

    def solve(self, C: np.ndarray, f: np.ndarray, tol: float = DEFAULT_TOL):
        """Return ``(y, rank, cond, residual)`` for the system ``(C @ W) b = f``."""
        G = np.asarray(C) @ self.reduced_rows
        y, rank, cond = min_norm_lstsq(G, f, tol)
        residual = float(np.linalg.norm(G @ y - f))
        return y, rank, cond, residual

    def lift(self, y: np.ndarray) -> np.ndarray:
        """Full coefficient vector ``Q y``."""
        return _apply_householder(self._qr, self._tau, np.asarray(y, dtype=complex), self.n_basis)
