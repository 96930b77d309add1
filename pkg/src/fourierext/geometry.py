"""Test surfaces, point clouds and fill-distance estimates.

Two surfaces are built in: a catenoid whose edges are modulated by
``0.1 sin(3s)``, and the unit sphere.  Any other surface can be used
downstream by constructing a :class:`PointCloud` directly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "BoxDomain",
    "PointCloud",
    "catenoid_point",
    "catenoid_normal",
    "catenoid_cloud",
    "catenoid_boundary_cloud",
    "sphere_cloud",
    "fill_distance",
    "estimate_fill_distance",
    "write_cloud_csv",
    "read_cloud_csv",
]

CLOUD_CSV_HEADER = ["x", "y", "z", "nx", "ny", "nz", "boundary", "s", "t"]

_NORMAL_TOL = 1e-12
_WAVE_AMPLITUDE = 0.1
_WAVE_FREQUENCY = 3


@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned periodic box ``center +- side_lengths / 2``."""

    center: np.ndarray
    side_lengths: np.ndarray

    def __post_init__(self):
        center = np.array(self.center, dtype=float).reshape(-1)
        sides = np.array(self.side_lengths, dtype=float).reshape(-1)
        if sides.shape == (1,) and center.size > 1:
            sides = np.full(center.size, sides[0])
        if center.shape != sides.shape:
            raise ValueError("center and side_lengths must have the same length")
        if np.any(sides <= 0):
            raise ValueError("side lengths must be strictly positive")
        center.setflags(write=False)
        sides.setflags(write=False)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "side_lengths", sides)

    @classmethod
    def cube(cls, side: float, dim: int = 3, center=None) -> "BoxDomain":
        if center is None:
            center = np.zeros(dim)
        return cls(np.asarray(center, dtype=float), np.full(dim, float(side)))

    @property
    def dim(self) -> int:
        return self.center.size

    def contains(self, points, strict: bool = True) -> np.ndarray:
        """Boolean mask of points lying inside the box."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        half = 0.5 * self.side_lengths
        offset = np.abs(pts - self.center)
        if strict:
            return np.all(offset < half, axis=1)
        return np.all(offset <= half, axis=1)


@dataclass(frozen=True)
class PointCloud:
    """Surface samples with unit normals.

    ``intrinsic`` holds optional per-point chart coordinates ``(s, t)``;
    rows may be NaN where a point has no chart coordinates.
    """

    points: np.ndarray
    normals: np.ndarray
    is_boundary: np.ndarray = None
    intrinsic: Optional[np.ndarray] = None
    _validated: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        nrm = np.array(self.normals, dtype=float)
        if pts.ndim != 2:
            raise ValueError("points must be a 2D array (n_points, dim)")
        if nrm.shape != pts.shape:
            raise ValueError(
                f"normals shape {nrm.shape} does not match points shape {pts.shape}"
            )
        norms = np.linalg.norm(nrm, axis=1)
        if np.any(np.abs(norms - 1.0) > _NORMAL_TOL):
            worst = np.max(np.abs(norms - 1.0))
            raise ValueError(f"normals must be unit vectors (worst deviation {worst:.3e})")
        if self.is_boundary is None:
            flags = np.zeros(len(pts), dtype=bool)
        else:
            flags = np.array(self.is_boundary, dtype=bool).reshape(-1)
            if flags.size == 1 and len(pts) != 1:
                flags = np.full(len(pts), bool(flags[0]))
        if flags.shape != (len(pts),):
            raise ValueError("is_boundary must have one flag per point")
        intrinsic = None
        if self.intrinsic is not None:
            intrinsic = np.array(self.intrinsic, dtype=float)
            if intrinsic.shape != (len(pts), 2):
                raise ValueError("intrinsic coordinates must have shape (n_points, 2)")
            intrinsic.setflags(write=False)
        if len(pts) > 1 and len(np.unique(pts, axis=0)) != len(pts):
            raise ValueError("points must be pairwise distinct")
        for arr in (pts, nrm, flags):
            arr.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "normals", nrm)
        object.__setattr__(self, "is_boundary", flags)
        object.__setattr__(self, "intrinsic", intrinsic)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def subset(self, index) -> "PointCloud":
        index = np.asarray(index)
        intrinsic = None if self.intrinsic is None else self.intrinsic[index]
        return PointCloud(
            self.points[index], self.normals[index], self.is_boundary[index], intrinsic
        )

    def check_inside(self, box: BoxDomain) -> None:
        if box.dim != self.dim:
            raise ValueError(f"cloud dimension {self.dim} does not match box dimension {box.dim}")
        inside = box.contains(self.points, strict=True)
        if not np.all(inside):
            bad = int(np.flatnonzero(~inside)[0])
            raise ValueError(f"point {bad} at {self.points[bad]} lies outside the box")


def catenoid_point(s, t) -> np.ndarray:
    """Map chart coordinates to ``(cosh t cos s, cosh t sin s, t)``."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    return np.stack([np.cosh(t) * np.cos(s), np.cosh(t) * np.sin(s), t], axis=-1)


def catenoid_normal(s, t) -> np.ndarray:
    """Unit normal along the cross product of the s- and t-tangents."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    # (d/ds x d/dt) = cosh t * (cos s, sin s, -sinh t), with norm cosh^2 t
    return np.stack(
        [np.cos(s) / np.cosh(t), np.sin(s) / np.cosh(t), -np.tanh(t)], axis=-1
    )


def _edge_shift(s):
    return _WAVE_AMPLITUDE * np.sin(_WAVE_FREQUENCY * s)


def catenoid_cloud(ns: int) -> PointCloud:
    """Tensor-grid cloud of ``ns**2 / 2`` points on the wavy catenoid.

    ``s`` takes ``ns`` uniform values on ``[0, 2 pi)`` and ``t`` takes ``ns / 2``
    uniform values on ``[-1, 1]`` (endpoints included) before being shifted
    up by ``0.1 sin(3 s)``.
    """
    if ns != int(ns) or ns < 4 or ns % 2:
        raise ValueError(f"ns must be an even integer >= 4, got {ns!r}")
    ns = int(ns)
    s_vals = np.linspace(0.0, 2.0 * np.pi, ns, endpoint=False)
    t_vals = np.linspace(-1.0, 1.0, ns // 2)
    s, t = np.meshgrid(s_vals, t_vals, indexing="ij")
    s = s.ravel()
    t = t.ravel() + _edge_shift(s)
    return PointCloud(
        catenoid_point(s, t),
        catenoid_normal(s, t),
        np.zeros(s.size, dtype=bool),
        np.column_stack([s, t]),
    )


def catenoid_boundary_cloud(ns: int) -> PointCloud:
    """``ns`` uniform samples in ``s`` on each edge ``t = +-1 + 0.1 sin(3 s)``."""
    if ns != int(ns) or ns < 4:
        raise ValueError(f"ns must be an integer >= 4, got {ns!r}")
    ns = int(ns)
    s_edge = np.linspace(0.0, 2.0 * np.pi, ns, endpoint=False)
    s = np.concatenate([s_edge, s_edge])
    t = np.concatenate([np.full(ns, -1.0), np.full(ns, 1.0)]) + _edge_shift(s)
    return PointCloud(
        catenoid_point(s, t),
        catenoid_normal(s, t),
        np.ones(s.size, dtype=bool),
        np.column_stack([s, t]),
    )


def sphere_cloud(n: int, seed: int = 0) -> PointCloud:
    """``n`` i.i.d. uniform points on the unit sphere.

    Points are normalized standard-normal triples drawn from a Philox
    (counter-based) generator, so a cloud for ``n`` is a prefix of the cloud
    for any larger ``n`` with the same seed.
    """
    if n != int(n) or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    rng = np.random.Generator(np.random.Philox(int(seed)))
    pts = rng.standard_normal((int(n), 3))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    return PointCloud(pts, pts.copy(), np.zeros(int(n), dtype=bool))


def _nearest_distances(cloud_pts: np.ndarray, probe_pts: np.ndarray, chunk: int = 2048):
    out = np.empty(len(probe_pts))
    sq_cloud = np.einsum("ij,ij->i", cloud_pts, cloud_pts)
    for start in range(0, len(probe_pts), chunk):
        block = probe_pts[start:start + chunk]
        sq = (
            np.einsum("ij,ij->i", block, block)[:, None]
            - 2.0 * block @ cloud_pts.T
            + sq_cloud[None, :]
        )
        out[start:start + chunk] = np.sqrt(np.maximum(sq.min(axis=1), 0.0))
    return out


def fill_distance(cloud, probe) -> float:
    """Largest distance from a probe point to its nearest cloud point.

    With a dense probe of the same surface this estimates the fill distance
    from below; brute force, so meant for clouds of up to ~1e4 points.
    """
    cloud_pts = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, float)
    probe_pts = probe.points if isinstance(probe, PointCloud) else np.asarray(probe, float)
    cloud_pts = np.atleast_2d(cloud_pts)
    probe_pts = np.atleast_2d(probe_pts)
    if cloud_pts.size == 0:
        raise ValueError("cannot compute the fill distance of an empty cloud")
    if probe_pts.size == 0:
        return 0.0
    return float(_nearest_distances(cloud_pts, probe_pts).max())


def estimate_fill_distance(cloud: PointCloud, surface: str, factor: int = 32, seed: int = 1):
    """Fill distance against a probe ``factor`` times denser than ``cloud``.

    ``surface`` is ``"sphere"`` or ``"catenoid"``; the probe is built with the
    same constructor as the built-in clouds.
    """
    if surface == "sphere":
        probe = sphere_cloud(factor * len(cloud), seed=seed)
        return fill_distance(cloud, probe)
    if surface == "catenoid":
        ns = int(np.ceil(np.sqrt(2.0 * factor * len(cloud))))
        ns += ns % 2
        probe = np.vstack([catenoid_cloud(ns).points, catenoid_boundary_cloud(ns).points])
        return fill_distance(cloud, probe)
    raise ValueError(f"unknown surface {surface!r}")


def _fmt(value: float) -> str:
    return "" if not np.isfinite(value) else repr(float(value))


def write_cloud_csv(cloud: PointCloud, path) -> None:
    """Write ``x,y,z,nx,ny,nz,boundary,s,t``; missing chart coordinates stay empty."""
    if cloud.dim != 3:
        raise ValueError("CSV export supports 3D clouds only")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CLOUD_CSV_HEADER)
        for i in range(len(cloud)):
            st = ("", "") if cloud.intrinsic is None else tuple(_fmt(v) for v in cloud.intrinsic[i])
            writer.writerow(
                [_fmt(v) for v in cloud.points[i]]
                + [_fmt(v) for v in cloud.normals[i]]
                + [int(cloud.is_boundary[i])]
                + list(st)
            )


def read_cloud_csv(path) -> PointCloud:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CLOUD_CSV_HEADER:
            raise ValueError(f"unexpected header {reader.fieldnames}")
        rows = list(reader)
    pts = np.array([[float(r[k]) for k in ("x", "y", "z")] for r in rows]).reshape(-1, 3)
    nrm = np.array([[float(r[k]) for k in ("nx", "ny", "nz")] for r in rows]).reshape(-1, 3)
    flags = np.array([r["boundary"] not in ("0", "", "False") for r in rows], dtype=bool)
    st = np.array(
        [[float(r[k]) if r[k] != "" else np.nan for k in ("s", "t")] for r in rows]
    ).reshape(-1, 2)
    intrinsic = None if np.all(np.isnan(st)) else st
    return PointCloud(pts, nrm, flags, intrinsic)
