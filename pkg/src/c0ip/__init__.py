"""C0 interior penalty method for the biharmonic equation with quadratic elements.

The penalty parameter is chosen edge by edge from local geometry so that the
discrete bilinear form is coercive with the explicit constant
``1 - 1/sqrt(a)`` for any prefactor ``a > 1``.
"""

__version__ = "0.1.0"

from .mesh import Mesh, build_topology, compute_geometry, refine_nvb, refine_uniform  # noqa: E402
from .penalty import PenaltyConfig, guaranteed_kappa, sigma_triangle  # noqa: E402
from .assembly import assemble, restrict_and_solve  # noqa: E402
from .analysis import condition_estimate_1norm, principal_eigenvalue  # noqa: E402
from .estimator import dorfler_mark, estimate  # noqa: E402
from .benchmarks import get_benchmark  # noqa: E402
from .afem import RunConfig, run  # noqa: E402

__all__ = [
    "Mesh",
    "build_topology",
    "compute_geometry",
    "refine_nvb",
    "refine_uniform",
    "PenaltyConfig",
    "guaranteed_kappa",
    "sigma_triangle",
    "assemble",
    "restrict_and_solve",
    "principal_eigenvalue",
    "condition_estimate_1norm",
    "dorfler_mark",
    "estimate",
    "get_benchmark",
    "RunConfig",
    "run",
]
