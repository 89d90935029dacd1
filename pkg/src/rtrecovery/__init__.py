"""Mixed finite elements with superconvergent patch recovery on triangles.

The package provides order-0 to order-3 triangular flux elements for
second-order elliptic problems in mixed form, a least-squares patch-recovery
postprocessor mapping the flux into a continuous vector Lagrange space of one
degree higher, a recovery-driven adaptive refinement loop, and a numerical
verifier for the local error-expansion identities underpinning the
supercloseness analysis.
"""

from .analysis import (ErrorReport, adaptive_study, dorfler_mark, estimator,
                       fit_order, fitted_orders, uniform_study,
                       write_orders, write_table_csv)
from .mesh import (Mesh, MeshError, build_mesh, read_mesh_text,
                   refine_adaptive, refine_bisection, refine_regular,
                   slit_square_mesh,uniform_bisect, unit_square_mesh,
                   validate_mesh, vertex_patch, write_mesh_text)
from .problems import get_problem, initial_mesh, slit_square_problem, smooth_square_problem
from .quadrature import QuadratureRule, edge_gauss, triangle_rule
from .recovery import check_uniqueness, fit_vertex, recover
from .solver import (MixedSolution, MixedSystem, ProblemSpec, SolverError,
                     assemble_mixed, solve_mixed, solve_system)
from .spaces import (FluxField, FluxSpace, LagrangeVecField, LagrangeVecSpace,
                     PiecewiseScalar, flux_divergence, project_scalar)
from .verify import (SuiteReport, check_curl_representation,
                     check_edge_expansion, check_hierarchical_identities,
                     edge_coefficients, fit_edge_operator, run_suite)

__version__ = "0.1.0"
