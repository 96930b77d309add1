import csv

import numpy as np
import pytest

from fourierext.basis import build_lattice, weights
from fourierext.geometry import BoxDomain, PointCloud, sphere_cloud
from fourierext.hb_system import (
    NORMAL_GRADIENT,
    SURFACE_LAPLACIAN,
    VALUE,
    ConstraintFunctional,
    assemble,
    interp_basis_bound,
    write_row_meta_csv,
)

BOX = BoxDomain.cube(4.0)


def _origin(normal=(0.0, 0.0, 1.0)):
    return PointCloud([[0.0, 0.0, 0.0]], [normal])


def _setup(K=2, T=2.0, box=BOX):
    lat = build_lattice(box, K)
    return lat, weights(lat, 4, T)


def _random_cloud(rng, n, dim=3, half=1.8):
    pts = rng.uniform(-half, half, (n, dim))
    nrm = rng.normal(size=(n, dim))
    return PointCloud(pts, nrm / np.linalg.norm(nrm, axis=1, keepdims=True))


def _slow_rows(functional, cloud, lat, w):
    """Termwise reference: build every entry from scratch with python scalars."""
    out = np.empty((len(cloud), len(lat)), dtype=complex)
    for k, (x, n) in enumerate(zip(cloud.points, cloud.normals)):
        for j, omega in enumerate(lat.frequencies):
            phi = complex(np.cos(sum(omega * x)), np.sin(sum(omega * x)))
            nw = sum(n * omega)
            ww = sum(omega * omega)
            entry = functional.a * phi + functional.b * 1j * nw * phi
            entry += functional.c * (-ww + nw * nw) * phi
            out[k, j] = entry / np.sqrt(w.values[j])
    return out


class TestExamples:
    def test_value_at_origin(self):
        lat, w = _setup()
        sys = assemble([_origin()], [VALUE], [1.0], lat, w)
        np.testing.assert_allclose(sys.rows[0], w.inv_sqrt, rtol=1e-15)

    def test_surface_laplacian_at_origin(self):
        lat, w = _setup(K=1)
        sys = assemble([_origin()], [SURFACE_LAPLACIAN], [0.0], lat, w)
        j = int(np.flatnonzero(np.all(lat.multi_indices == [1, 0, 0], axis=1))[0])
        assert sys.rows[0, j] == pytest.approx(-np.pi ** 2 / 4 * w.inv_sqrt[j], rel=1e-14)

    def test_normal_gradient_orthogonal_frequencies(self):
        lat, w = _setup()
        sys = assemble([_origin()], [NORMAL_GRADIENT], [0.0], lat, w)
        perp = lat.frequencies[:, 2] == 0
        assert np.all(sys.rows[0, perp] == 0)
        assert np.all(sys.rows[0, ~perp] != 0)


def test_functional_basics():
    with pytest.raises(ValueError):
        ConstraintFunctional()
    eig = ConstraintFunctional.shifted_laplacian(2.0)
    assert (eig.a, eig.c, eig.order) == (-2.0, -1.0, 2)
    assert VALUE.order == 0 and NORMAL_GRADIENT.order == 1
    assert ConstraintFunctional(a=1j).is_real is False
    assert eig.apply(1.0, 0.0, 3.0, 1.0) == pytest.approx(-2.0 - 2.0)


def test_rows_match_slow_reference(rng):
    worst = 0.0
    for trial in range(10):
        lat, w = _setup(K=int(rng.integers(1, 4)), T=float(rng.uniform(1, 8)))
        cloud = _random_cloud(rng, int(rng.integers(2, 7)))
        a, b, c = rng.normal(size=3) + 1j * rng.normal(size=3)
        functional = ConstraintFunctional(a, b, c)
        fast = assemble([cloud], [functional], [0.0], lat, w).rows
        slow = _slow_rows(functional, cloud, lat, w)
        worst = max(worst, np.abs(fast - slow).max() / np.abs(slow).max())
    assert worst <= 1e-14


@pytest.mark.parametrize("K", [1, 2, 4])
def test_truncation_nesting_exact(K, rng):
    cloud = _random_cloud(rng, 9)
    blocks = ([cloud] * 3, [VALUE, NORMAL_GRADIENT, SURFACE_LAPLACIAN], [0.0] * 3)
    small = assemble(*blocks, *_setup(K))
    big = assemble(*blocks, *_setup(K + 1))
    np.testing.assert_array_equal(big.rows[:, : small.shape[1]], small.rows)


def test_multiple_blocks_and_metadata(rng):
    cloud = sphere_cloud(5, seed=1)
    lat, w = _setup()
    sys = assemble(
        [cloud, cloud], [VALUE, NORMAL_GRADIENT], [lambda c: c.points[:, 2], 0.0], lat, w
    )
    assert sys.shape == (10, len(lat))
    np.testing.assert_allclose(sys.rhs[:5], cloud.points[:, 2])
    assert sys.row_meta[7] == (1, 2, "ngrad", 1)
    assert sys.max_order() == 1
    assert not sys.rows.flags.writeable


class TestErrors:
    def test_duplicate_pair(self):
        lat, w = _setup()
        with pytest.raises(ValueError, match="duplicate"):
            assemble([_origin(), _origin()], [VALUE, VALUE], [1.0, 2.0], lat, w)

    def test_same_point_other_functional_ok(self):
        lat, w = _setup()
        sys = assemble([_origin(), _origin()], [VALUE, NORMAL_GRADIENT], [1.0, 0.0], lat, w)
        assert sys.shape[0] == 2

    def test_rhs_length(self):
        lat, w = _setup()
        with pytest.raises(ValueError, match="right-hand side"):
            assemble([sphere_cloud(3)], [VALUE], [[1.0, 2.0]], lat, w)

    def test_block_count(self):
        lat, w = _setup()
        with pytest.raises(ValueError):
            assemble([_origin()], [VALUE, VALUE], [1.0], lat, w)

    def test_outside_box(self):
        lat, w = _setup()
        cloud = PointCloud([[2.5, 0, 0]], [[1.0, 0, 0]])
        with pytest.raises(ValueError, match="outside"):
            assemble([cloud], [VALUE], [0.0], lat, w)

    def test_misaligned_weights(self):
        lat, _ = _setup(K=2)
        _, w = _setup(K=1)
        with pytest.raises(ValueError, match="aligned"):
            assemble([_origin()], [VALUE], [0.0], lat, w)


class TestInterpBound:
    def test_examples(self):
        assert interp_basis_bound(2, 3, 3) == 1000
        assert interp_basis_bound(0, 1, 1) == 2

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            interp_basis_bound(-1, 3, 2)

    def test_surjectivity_threshold_below_bound(self):
        # two random points in 2-D with value + normal derivative rows: rank
        # must reach 4 no later than N_b = interp_basis_bound(1, 2, 2) = 25
        rng = np.random.default_rng(3)
        box = BoxDomain.cube(4.0, dim=2)
        bound = interp_basis_bound(1, 2, 2)
        for _ in range(20):
            cloud = _random_cloud(rng, 2, dim=2)
            threshold = None
            for K in range(0, 4):
                lat = build_lattice(box, K)
                sys = assemble([cloud, cloud], [VALUE, NORMAL_GRADIENT], [0.0, 0.0],
                               lat, weights(lat, 4, 2))
                scaled = sys.rows * np.sqrt(weights(lat, 4, 2).values)
                if np.linalg.matrix_rank(scaled, tol=1e-10) == 4:
                    threshold = len(lat)
                    break
            assert threshold is not None and threshold <= bound


def test_row_meta_csv(tmp_path):
    lat, w = _setup()
    cloud = sphere_cloud(3, seed=0)
    sys = assemble([cloud, cloud], [VALUE, SURFACE_LAPLACIAN], [0.0, 0.0], lat, w)
    path = tmp_path / "rows.csv"
    write_row_meta_csv(sys, path)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["row", "cloud", "point", "functional"]
    assert rows[5] == ["4", "1", "1", "surflap"]
    assert len(rows) == 7
