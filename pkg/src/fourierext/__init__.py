"""Meshfree surface PDE solver built on norm-minimizing Fourier extensions.

A surface problem is posed as Hermite-Birkhoff constraints on a point
cloud, and the solution is the Fourier series on an enclosing periodic box
with the smallest weighted coefficient norm that satisfies them.
"""

__version__ = "0.1.0"

from .basis import (  # noqa: E402
    FrequencyLattice,
    WeightSequence,
    build_lattice,
    eval_derivatives,
    eval_phi,
    weights,
)
from .geometry import (  # noqa: E402
    BoxDomain,
    PointCloud,
    catenoid_boundary_cloud,
    catenoid_cloud,
    fill_distance,
    sphere_cloud,
)
from .hb_system import (  # noqa: E402
    NORMAL_GRADIENT,
    SURFACE_LAPLACIAN,
    VALUE,
    CollocationSystem,
    ConstraintFunctional,
    assemble,
    interp_basis_bound,
)
from .problems import (  # noqa: E402
    EigenConfig,
    PoissonConfig,
    eigen_dnorm,
    eigen_search,
    eigen_sweep,
    solve_poisson,
    surface_residual,
)
from .solver import (  # noqa: E402
    ExtensionSolution,
    SolveReport,
    SolverError,
    d_norm_of,
    evaluate,
    solve_kernel,
    solve_min_norm,
)
