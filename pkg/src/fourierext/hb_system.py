"""Hermite-Birkhoff collocation rows over a box Fourier lattice.

Every constraint is a complex affine combination of three atoms evaluated
at a surface point ``x`` with unit normal ``n``::

    F u = a * u + b * (n . grad u) + c * (lap u - n^T (D^2 u) n)

On a first-order closest-point-like extension (``n . grad u = 0`` on the
surface) the last atom is the Laplace-Beltrami operator, so surface PDEs
need no curvature information.  A spectral shift ``lambda`` enters as
``a = -lambda``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from .basis import FrequencyLattice, WeightSequence, derivative_tables
from .geometry import PointCloud

__all__ = [
    "ConstraintFunctional",
    "VALUE",
    "NORMAL_GRADIENT",
    "SURFACE_LAPLACIAN",
    "CollocationSystem",
    "assemble",
    "functional_rows",
    "interp_basis_bound",
    "write_row_meta_csv",
]


@dataclass(frozen=True)
class ConstraintFunctional:
    """``a * value + b * normal_gradient + c * surface_laplacian``."""

    a: complex = 0.0
    b: complex = 0.0
    c: complex = 0.0
    name: str = ""

    def __post_init__(self):
        if self.a == 0 and self.b == 0 and self.c == 0:
            raise ValueError("a constraint functional needs a non-zero coefficient")
        if not self.name:
            object.__setattr__(self, "name", self._default_name())

    def _default_name(self) -> str:
        parts = []
        for coef, atom in ((self.a, "value"), (self.b, "ngrad"), (self.c, "surflap")):
            if coef != 0:
                parts.append(atom if coef == 1 else f"{_fmt_coef(coef)}*{atom}")
        return "+".join(parts)

    @property
    def order(self) -> int:
        if self.c != 0:
            return 2
        if self.b != 0:
            return 1
        return 0

    @property
    def is_real(self) -> bool:
        return all(complex(v).imag == 0 for v in (self.a, self.b, self.c))

    def key(self):
        return (complex(self.a), complex(self.b), complex(self.c))

    def apply(self, value, normal_gradient, laplacian, normal_hessian):
        """Combine derivative 4-tuples (scalars or arrays) into ``F u``."""
        out = 0
        if self.a != 0:
            out = out + self.a * value
        if self.b != 0:
            out = out + self.b * normal_gradient
        if self.c != 0:
            out = out + self.c * (laplacian - normal_hessian)
        return out

    @classmethod
    def shifted_laplacian(cls, lam: float, sign: float = -1.0) -> "ConstraintFunctional":
        """``sign * surface_laplacian - lam * value`` (``-lap_S - lam`` by default)."""
        return cls(a=-lam, c=sign, name=f"eig(lambda={float(lam)!r})")


def _fmt_coef(z) -> str:
    z = complex(z)
    return format(z.real, "g") if z.imag == 0 else format(z, "g")


VALUE = ConstraintFunctional(a=1.0, name="value")
NORMAL_GRADIENT = ConstraintFunctional(b=1.0, name="ngrad")
SURFACE_LAPLACIAN = ConstraintFunctional(c=1.0, name="surflap")


@dataclass(frozen=True)
class CollocationSystem:
    """``rows[k, n] = d_n^{-1/2} (F_k phi_n)(x_k)`` with data ``rhs``.

    ``row_meta`` holds ``(cloud, point, functional name, order)`` per row.
    """

    rows: np.ndarray
    rhs: np.ndarray
    lattice: FrequencyLattice
    weights: WeightSequence
    row_meta: tuple

    @property
    def shape(self):
        return self.rows.shape

    def max_order(self) -> int:
        return max((m[3] for m in self.row_meta), default=0)


def functional_rows(
    functional: ConstraintFunctional,
    cloud: PointCloud,
    lattice: FrequencyLattice,
    weights: WeightSequence,
    out=None,
    chunk: int = 256,
) -> np.ndarray:
    """Collocation rows of one functional at every point of ``cloud``."""
    freqs = lattice.frequencies
    if out is None:
        out = np.empty((len(cloud), len(lattice)), dtype=complex)
    needs_normals = functional.b != 0 or functional.c != 0
    inv_sqrt = weights.inv_sqrt[None, :]
    for start in range(0, len(cloud), chunk):
        stop = min(start + chunk, len(cloud))
        phase, n_dot, omega_sq = derivative_tables(
            freqs,
            cloud.points[start:stop],
            cloud.normals[start:stop] if needs_normals else None,
        )
        factor = np.zeros(phase.shape, dtype=complex)
        if functional.a != 0:
            factor += functional.a
        if functional.b != 0:
            factor += functional.b * 1j * n_dot
        if functional.c != 0:
            # lap - n^T H n = -|w|^2 + (n.w)^2
            factor += functional.c * (n_dot ** 2 - omega_sq[None, :])
        np.multiply(phase, factor, out=out[start:stop])
        out[start:stop] *= inv_sqrt
    return out


def _as_values(rhs, cloud: PointCloud, j: int) -> np.ndarray:
    if callable(rhs):
        vals = rhs(cloud)
    else:
        vals = rhs
    vals = np.asarray(vals, dtype=complex)
    if vals.ndim == 0:
        vals = np.full(len(cloud), vals)
    if vals.shape != (len(cloud),):
        raise ValueError(
            f"cloud {j}: {vals.size} right-hand side values for {len(cloud)} points"
        )
    return vals


RhsLike = Union[complex, Sequence[complex], np.ndarray, Callable[[PointCloud], np.ndarray]]


def assemble(
    clouds: Sequence[PointCloud],
    functionals: Sequence[ConstraintFunctional],
    rhs: Sequence[RhsLike],
    lattice: FrequencyLattice,
    weights: WeightSequence,
) -> CollocationSystem:
    """Stack one block of rows per ``(cloud, functional, rhs)`` triple.

    The same cloud may appear in several triples; repeating a
    ``(point, functional)`` pair is rejected because it silently makes the
    system rank deficient.  ``rhs`` entries may be scalars, arrays or
    callables taking the cloud.
    """
    if isinstance(clouds, PointCloud):
        clouds, functionals, rhs = [clouds], [functionals], [rhs]
    if not (len(clouds) == len(functionals) == len(rhs)):
        raise ValueError(
            f"got {len(clouds)} clouds, {len(functionals)} functionals, {len(rhs)} rhs blocks"
        )
    if len(clouds) == 0:
        raise ValueError("nothing to assemble")
    if len(weights) != len(lattice):
        raise ValueError("weights are not aligned with the lattice")

    seen = set()
    data, meta = [], []
    for j, (cloud, functional, values) in enumerate(zip(clouds, functionals, rhs)):
        cloud.check_inside(lattice.box)
        data.append(_as_values(values, cloud, j))
        for i, x in enumerate(cloud.points):
            key = (x.tobytes(), cloud.normals[i].tobytes(), functional.key())
            if key in seen:
                raise ValueError(
                    f"duplicate constraint {functional.name!r} at point {x} (cloud {j}, index {i})"
                )
            seen.add(key)
        meta.extend((j, i, functional.name, functional.order) for i in range(len(cloud)))

    rows = np.empty((len(meta), len(lattice)), dtype=complex)
    start = 0
    for cloud, functional in zip(clouds, functionals):
        functional_rows(functional, cloud, lattice, weights, out=rows[start:start + len(cloud)])
        start += len(cloud)
    rows.setflags(write=False)
    f = np.concatenate(data)
    f.setflags(write=False)
    return CollocationSystem(rows, f, lattice, weights, tuple(meta))


def interp_basis_bound(p: int, n_distinct: int, m: int) -> int:
    """Upper bound ``((p + 1) n_distinct + 1)^m`` on the basis size needed to interpolate."""
    if p < 0 or n_distinct < 1 or m < 1:
        raise ValueError("need p >= 0, n_distinct >= 1 and m >= 1")
    return ((p + 1) * n_distinct + 1) ** m


def write_row_meta_csv(system: CollocationSystem, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row", "cloud", "point", "functional"])
        for r, (j, i, name, _order) in enumerate(system.row_meta):
            writer.writerow([r, j, i, name])
