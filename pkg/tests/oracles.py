"""Independent reference computations shared by several test modules."""

import mpmath
import numpy as np

from fourierext.basis import eval_derivatives


def fd_derivatives(func, x, n, h=1e-5, dps=30):
    """Central differences of ``func`` (a callable on mpmath 3-vectors) at ``x``.

    Returns ``(value, normal_gradient, laplacian, normal_hessian_form)``
    evaluated in ``dps``-digit arithmetic, so only truncation error remains.
    """
    with mpmath.workdps(dps):
        x = [mpmath.mpf(float(v)) for v in x]
        nv = [mpmath.mpf(float(v)) for v in n]
        h = mpmath.mpf(h)

        def at(d, s):
            return func([xi + s * di for xi, di in zip(x, d)])

        value = func(x)
        ngrad = (at(nv, h) - at(nv, -h)) / (2 * h)
        nhess = (at(nv, h) - 2 * value + at(nv, -h)) / h ** 2
        lap = 0
        for axis in np.eye(3):
            lap += (at(axis, h) - 2 * value + at(axis, -h)) / h ** 2
        return tuple(complex(v) for v in (value, ngrad, lap, nhess))


def plane_wave(omega):
    w = [mpmath.mpf(float(v)) for v in omega]
    return lambda y: mpmath.exp(1j * sum(wi * yi for wi, yi in zip(w, y)))


def worst_fd_error(count=100, seed=7, h=1e-5):
    """Largest scaled mismatch between analytic and finite-difference plane-wave derivatives.

    Each derivative of order ``p`` is compared relative to
    ``max(|analytic|, max(1, |omega|)^p)``.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        omega = rng.uniform(-10, 10, 3)
        x = rng.uniform(-2, 2, 3)
        n = rng.normal(size=3)
        n /= np.linalg.norm(n)
        analytic = eval_derivatives(omega, x, n)
        fd = fd_derivatives(plane_wave(omega), x, n, h)
        scale = max(1.0, float(np.linalg.norm(omega)))
        for order, a, b in zip((0, 1, 2, 2), analytic, fd):
            worst = max(worst, abs(a - b) / max(abs(a), scale ** order))
    return worst
