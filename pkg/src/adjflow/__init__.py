"""adjflow: adjoint-based shape optimization of viscous dissipation in
steady incompressible flow, on unstructured triangle meshes with a
P1-bubble/P1 mixed discretization."""

from .adjoint import AdjointState, adjoint_residual, solve_adjoint
from .config import ConfigError, RunConfig, build_mesh, load_config, parse_config
from .fem import SingularSystemError
from .flow import (
    BoundaryPolynomial,
    FlowConfig,
    FlowState,
    NewtonDivergedError,
    dissipated_energy,
    residual_norm,
    solve_flow,
    solve_navier_stokes,
    solve_stokes,
)
from .mesh import (
    BoundaryTag,
    InvertedElementError,
    Mesh2D,
    MeshValidationError,
    boundary_normals,
    deform,
    gen_bent_channel,
    gen_channel,
    gen_rect_with_hole,
    load_mesh,
    save_mesh,
    volume,
)
from .shape_opt import (
    BoundaryGradient,
    GradientCheckReport,
    IterationRecord,
    OptimConfig,
    balance_multiplier,
    eulerian_derivative,
    gradient_check,
    optimize,
    shape_gradient,
    smooth_descent,
    update_multiplier,
)

__version__ = "0.1.0"
