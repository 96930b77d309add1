"""Box Fourier frequencies, analytic derivatives and native-norm weights."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .geometry import BoxDomain

__all__ = [
    "FrequencyLattice",
    "WeightSequence",
    "build_lattice",
    "lattice_size",
    "half_width_for",
    "weights",
    "exp_sqrt_weights",
    "eval_phi",
    "eval_derivatives",
    "derivative_tables",
]

_NORMAL_TOL = 1e-12


@dataclass(frozen=True)
class FrequencyLattice:
    """Frequencies ``2 pi k / side`` for all ``k`` in ``[-K, K]^m``.

    Ordering is shell-major: by ``max|k|`` first, then by ``|omega|``, then
    lexicographically on ``k``.  The zero frequency comes first and the
    lattice for ``K`` is exactly the leading ``(2K+1)^m`` entries of the
    lattice for ``K + 1``.
    """

    box: BoxDomain
    K: int
    multi_indices: np.ndarray
    frequencies: np.ndarray

    def __len__(self) -> int:
        return self.frequencies.shape[0]

    @property
    def dim(self) -> int:
        return self.box.dim

    @property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.frequencies, axis=1)

    def conjugate_index(self) -> np.ndarray:
        """Permutation taking frequency ``omega_n`` to ``-omega_n``."""
        lookup = {tuple(k): i for i, k in enumerate(self.multi_indices)}
        return np.array([lookup[tuple(-k)] for k in self.multi_indices])


@dataclass(frozen=True)
class WeightSequence:
    values: np.ndarray
    q: float
    T: float

    def __len__(self) -> int:
        return self.values.size

    @property
    def inv_sqrt(self) -> np.ndarray:
        """``d_n^{-1/2}``, the column scaling of every collocation row."""
        return 1.0 / np.sqrt(self.values)


def lattice_size(K: int, dim: int = 3) -> int:
    return (2 * K + 1) ** dim


def half_width_for(n_basis: int, dim: int = 3) -> int:
    """Invert ``n_basis = (2K + 1)^dim``; only full symmetric lattices exist."""
    side = round(n_basis ** (1.0 / dim))
    if side ** dim != n_basis or side % 2 == 0:
        raise ValueError(f"{n_basis} is not (2K+1)^{dim} for an integer K")
    return (side - 1) // 2


def build_lattice(box: BoxDomain, K: int) -> FrequencyLattice:
    if K != int(K) or K < 0:
        raise ValueError(f"K must be a non-negative integer, got {K!r}")
    K = int(K)
    dim = box.dim
    ks = np.array(list(itertools.product(range(-K, K + 1), repeat=dim)), dtype=np.int64)
    ks = ks.reshape(-1, dim)
    omegas = 2.0 * np.pi * ks / box.side_lengths
    shell = np.abs(ks).max(axis=1)
    if np.all(box.side_lengths == box.side_lengths[0]):
        # integer squared norm keeps ties exact on cubic boxes
        sqnorm = np.einsum("ij,ij->i", ks, ks)
    else:
        scaled = ks / box.side_lengths
        sqnorm = np.einsum("ij,ij->i", scaled, scaled)
    keys = [ks[:, j] for j in reversed(range(dim))] + [sqnorm, shell]
    order = np.lexsort(keys)
    ks = ks[order]
    omegas = omegas[order]
    ks.setflags(write=False)
    omegas.setflags(write=False)
    return FrequencyLattice(box, K, ks, omegas)


def exp_sqrt_weights(norms, q: float, T: float) -> np.ndarray:
    """``(exp(q sqrt(2 pi / T)) + exp(q sqrt(|omega|)))^2``."""
    if q <= 0 or T <= 0:
        raise ValueError("q and T must be positive")
    norms = np.asarray(norms, dtype=float)
    return (np.exp(q * np.sqrt(2.0 * np.pi / T)) + np.exp(q * np.sqrt(norms))) ** 2


def weights(lattice: FrequencyLattice, q: float = 4.0, T: float = 2.0) -> WeightSequence:
    values = exp_sqrt_weights(lattice.norms, q, T)
    values.setflags(write=False)
    return WeightSequence(values, float(q), float(T))


def eval_phi(omega, x) -> complex:
    """``exp(i omega . x)``."""
    return complex(np.exp(1j * np.dot(np.asarray(omega, float), np.asarray(x, float))))


def eval_derivatives(omega, x, n):
    """Value, normal derivative, Laplacian and ``n^T H n`` of ``exp(i omega . x)``."""
    omega = np.asarray(omega, dtype=float)
    n = np.asarray(n, dtype=float)
    if abs(np.linalg.norm(n) - 1.0) > _NORMAL_TOL:
        raise ValueError("normal must be a unit vector")
    phi = eval_phi(omega, x)
    n_dot = float(np.dot(n, omega))
    return (
        phi,
        1j * n_dot * phi,
        -float(np.dot(omega, omega)) * phi,
        -(n_dot ** 2) * phi,
    )


def derivative_tables(frequencies: np.ndarray, points: np.ndarray, normals=None):
    """Vectorized :func:`eval_derivatives` over points x frequencies.

    Returns ``(phase, n_dot_omega, omega_sq)`` where ``phase[k, n] =
    exp(i omega_n . x_k)``; the four derivative atoms are then
    ``phase``, ``1j * n_dot * phase``, ``-omega_sq * phase`` and
    ``-n_dot**2 * phase``.  ``n_dot`` is None when no normals are given.
    """
    # per-axis accumulation (not matmul) so each entry is independent of the
    # array shapes; nested lattices then give bit-identical columns
    phase = np.exp(1j * _outer_dot(points, frequencies))
    omega_sq = np.einsum("ij,ij->i", frequencies, frequencies)
    n_dot = None if normals is None else _outer_dot(normals, frequencies)
    return phase, n_dot, omega_sq


def _outer_dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.multiply.outer(a[:, 0], b[:, 0])
    for j in range(1, a.shape[1]):
        out += np.multiply.outer(a[:, j], b[:, j])
    return out
