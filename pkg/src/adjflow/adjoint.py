"""Adjoint problem of the dissipated-energy functional.

The adjoint pair (v, q) satisfies, for all test functions vanishing on the
Dirichlet parts: the viscous form plus the two linearized-convection terms
equals twice the viscous form applied to the state.  The velocity-velocity
operator is exactly the transpose of the state Newton Jacobian's
velocity-velocity block at the converged state; the Outflow condition is
natural and nothing is assembled there.  Homogeneous Dirichlet values are
imposed on Inflow, Wall and Free.
"""

from dataclasses import dataclass

import numpy as np

from . import fem
from .flow import FlowConfig, FlowState, dirichlet_layout
from .mesh import Mesh2D


@dataclass(frozen=True)
class AdjointState:
    """Discrete adjoint solution on the state's mesh."""

    mesh: Mesh2D
    velocity: np.ndarray  # (n_nodes, 2)
    bubble: np.ndarray  # (n_triangles, 2)
    pressure: np.ndarray  # (n_nodes,)

    def velocity_dofs(self) -> np.ndarray:
        return np.concatenate([self.velocity.ravel(), self.bubble.ravel()])


def _adjoint_operator(mesh: Mesh2D, state: FlowState, config: FlowConfig, ed) -> tuple:
    a = fem.assemble_viscous(mesh, config.viscosity, ed)
    if config.model == "navier_stokes":
        n_mat, np_mat = fem.assemble_convection(mesh, state.velocity, state.bubble, ed)
        a_adj = (a + (n_mat + np_mat).T).tocsr()
    else:
        a_adj = a
    b = fem.assemble_divergence(mesh, ed)
    rhs = np.zeros(2 * mesh.n_nodes + 2 * mesh.n_triangles + mesh.n_nodes)
    rhs[: 2 * mesh.n_nodes + 2 * mesh.n_triangles] = 2.0 * (a @ state.velocity_dofs())
    return a_adj, b, rhs


def _homogeneous_layout(mesh: Mesh2D, config: FlowConfig) -> fem.DofLayout:
    layout = dirichlet_layout(mesh, config)
    return fem.DofLayout(layout.n_nodes, layout.n_elements, layout.constrained,
                         np.zeros_like(layout.values))


def solve_adjoint(mesh: Mesh2D, state: FlowState, config: FlowConfig) -> AdjointState:
    """Solve the adjoint problem at the converged ``state``."""
    ed = fem.element_data(mesh)
    a_adj, b, rhs = _adjoint_operator(mesh, state, config, ed)
    layout = _homogeneous_layout(mesh, config)
    system = fem.SparseSystem(a_adj, b, rhs, config.solver_tol)
    nodal, bub, pressure = fem.solve_condensed(system, layout)
    return AdjointState(mesh, nodal, bub, pressure)


def adjoint_residual(mesh: Mesh2D, state: FlowState, adj: AdjointState, config: FlowConfig) -> float:
    """Residual norm of the adjoint system at (state, adj), free rows only."""
    ed = fem.element_data(mesh)
    a_adj, b, rhs = _adjoint_operator(mesh, state, config, ed)
    layout = _homogeneous_layout(mesh, config)
    v = adj.velocity_dofs()
    r_v = a_adj @ v - b.T @ adj.pressure - rhs[: layout.n_velocity]
    r_p = b @ v
    r_v[layout.constrained] = 0.0
    return float(np.linalg.norm(np.concatenate([r_v, r_p])))
