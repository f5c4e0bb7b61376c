"""Principal eigenvalue of the weighted Dirichlet p-Laplacian with a potential.

P1 finite elements on structured equal-measure meshes, a constrained Newton
solver with epsilon-continuation, rearrangement-class optimization of the
weight and potential, and eigenvalue derivatives along deformation flows.
"""

__version__ = "0.1.0"

from .mesh import Mesh, MeshError, build_mesh, dirichlet, integrate, p1_gradient
from .rearrangement import (
    RearrangementClass,
    RearrangementError,
    class_of,
    comonotonicity_defect,
    extremal_rearrangement,
    is_rearrangement_of,
    swap_count,
)
from .eigensolver import (
    EigenResult,
    HypothesisReport,
    ProblemData,
    ProblemError,
    SolverConfig,
    SolverError,
    check_hypotheses,
    default_q,
    estimate_sobolev_constant,
    pde_residual,
    rayleigh_quotient,
    solve_principal,
)
from .flow import (
    DeformationField,
    DilationField,
    FlowConfig,
    FlowError,
    RotationField,
    StreamBumpField,
    TranslationField,
    ZeroField,
    flow_jacobian,
    flow_map,
    inverse_flow_map,
    jacobian_defect,
    make_field,
    random_stream_probes,
    transport_field,
)
from .derivative import (
    DerivativeReport,
    derivative_divfree,
    derivative_general,
    derivative_hadamard,
    derivative_report,
    fd_derivative_oracle,
)
from .optimizer import (
    OptConfig,
    OptResult,
    alternate_minimize,
    brute_force_minimum,
    verify_optimality,
)

__all__ = [name for name in dir() if not name.startswith("_")]
