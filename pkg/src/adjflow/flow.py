"""Steady incompressible flow solves and the dissipated-energy functional.

The state problem is posed with a velocity profile on Inflow, no-slip on
Wall and Free, and a prescribed traction on Outflow (natural condition, so
the pressure level is fixed whenever Outflow is non-empty).  The nonlinear
problem is solved by Newton's method started from the Stokes solution, with
optional viscosity continuation for convection-dominated cases.
"""

from dataclasses import dataclass, field

import numpy as np

from . import fem
from .mesh import BoundaryTag, Mesh2D


class NewtonDivergedError(RuntimeError):
    """Newton failed to converge; carries the residual trace."""

    def __init__(self, message: str, trace: list):
        self.trace = list(trace)
        super().__init__(f"{message} (residual trace: {', '.join(f'{r:.3e}' for r in trace)})")


@dataclass(frozen=True)
class BoundaryPolynomial:
    """Vector-valued polynomial in the coordinate running along a boundary."""

    coeffs_x: tuple = (0.0,)
    coeffs_y: tuple = (0.0,)

    def __call__(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.empty(t.shape + (2,))
        out[..., 0] = np.polynomial.polynomial.polyval(t, np.asarray(self.coeffs_x, float))
        out[..., 1] = np.polynomial.polynomial.polyval(t, np.asarray(self.coeffs_y, float))
        return out

    def is_zero(self) -> bool:
        return not (np.any(np.asarray(self.coeffs_x)) or np.any(np.asarray(self.coeffs_y)))


@dataclass
class FlowConfig:
    viscosity: float
    inflow: BoundaryPolynomial = field(default_factory=BoundaryPolynomial)
    traction: BoundaryPolynomial = field(default_factory=BoundaryPolynomial)
    model: str = "navier_stokes"
    newton_tol: float = 1e-10
    newton_max_iters: int = 25
    continuation_steps: int = 4
    solver_tol: float = 1e-10

    def __post_init__(self):
        if self.viscosity <= 0:
            raise ValueError("viscosity must be positive")
        if self.model not in ("stokes", "navier_stokes"):
            raise ValueError(f"unknown flow model '{self.model}'")
        if self.newton_tol <= 0 or self.solver_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.newton_max_iters < 1:
            raise ValueError("newton_max_iters must be >= 1")
        if self.continuation_steps < 0:
            raise ValueError("continuation_steps must be >= 0")


@dataclass(frozen=True)
class FlowState:
    """Discrete flow solution attached to the mesh it was computed on.

    ``residual_trace`` holds the nonlinear residual norms of the last
    Newton leg (empty for a plain Stokes solve).
    """

    mesh: Mesh2D
    velocity: np.ndarray  # (n_nodes, 2)
    bubble: np.ndarray  # (n_triangles, 2)
    pressure: np.ndarray  # (n_nodes,)
    newton_iters: int = 0
    residual_trace: tuple = ()

    def velocity_dofs(self) -> np.ndarray:
        """Full velocity coefficient vector (nodal then bubble)."""
        return np.concatenate([self.velocity.ravel(), self.bubble.ravel()])


def boundary_coordinate(mesh: Mesh2D, nodes: np.ndarray) -> np.ndarray:
    """Coordinate along a boundary piece: the axis with the larger spread."""
    pts = mesh.nodes[nodes]
    spread = pts.max(axis=0) - pts.min(axis=0)
    axis = 0 if spread[0] >= spread[1] else 1
    return pts[:, axis]


def dirichlet_layout(mesh: Mesh2D, config: FlowConfig) -> fem.DofLayout:
    """Velocity Dirichlet data: profile on Inflow, zero on Wall and Free.

    A node shared between Inflow and a no-slip part takes the zero value.
    """
    inflow = mesh.nodes_with_tag(BoundaryTag.INFLOW)
    noslip = np.unique(np.concatenate([
        mesh.nodes_with_tag(BoundaryTag.WALL),
        mesh.nodes_with_tag(BoundaryTag.FREE),
    ]))
    nodes = np.unique(np.concatenate([inflow, noslip]))
    values = np.zeros((nodes.size, 2))
    pure = np.setdiff1d(inflow, noslip)
    if pure.size:
        # evaluate the profile in the coordinate running along the inflow
        spread = mesh.nodes[inflow].max(axis=0) - mesh.nodes[inflow].min(axis=0)
        axis = 0 if spread[0] >= spread[1] else 1
        idx = np.searchsorted(nodes, pure)
        values[idx] = config.inflow(mesh.nodes[pure][:, axis])
    return fem.build_layout(mesh, nodes, values)


def _traction_load(mesh: Mesh2D, config: FlowConfig) -> np.ndarray:
    edges = mesh.edges_with_tag(BoundaryTag.OUTFLOW)
    if config.traction.is_zero() or edges.size == 0:
        return np.zeros(2 * mesh.n_nodes + 2 * mesh.n_triangles)
    onodes = mesh.nodes_with_tag(BoundaryTag.OUTFLOW)
    spread = mesh.nodes[onodes].max(axis=0) - mesh.nodes[onodes].min(axis=0)
    axis = 0 if spread[0] >= spread[1] else 1
    return fem.assemble_boundary_traction(mesh, edges, lambda pts: config.traction(pts[:, axis]))


def _require_outflow(mesh: Mesh2D) -> None:
    if mesh.edges_with_tag(BoundaryTag.OUTFLOW).size == 0:
        raise ValueError(
            "mesh has no Outflow edges: the pressure level is only fixed by the "
            "natural traction condition, so a non-empty Outflow is required"
        )


def solve_stokes(mesh: Mesh2D, config: FlowConfig) -> FlowState:
    """Linear Stokes solve (convection dropped)."""
    _require_outflow(mesh)
    ed = fem.element_data(mesh)
    a = fem.assemble_viscous(mesh, config.viscosity, ed)
    b = fem.assemble_divergence(mesh, ed)
    layout = dirichlet_layout(mesh, config)
    rhs = np.zeros(layout.n_total)
    rhs[: layout.n_velocity] = _traction_load(mesh, config)
    system = fem.SparseSystem(a, b, rhs, config.solver_tol)
    nodal, bub, pressure = fem.solve_condensed(system, layout)
    return FlowState(mesh, nodal, bub, pressure, newton_iters=0)


def _residual(
    mesh: Mesh2D,
    layout: fem.DofLayout,
    a, b, load,
    nodal: np.ndarray,
    bubble: np.ndarray,
    pressure: np.ndarray,
    include_convection: bool,
    data=None,
) -> np.ndarray:
    """Nonlinear residual with constrained velocity rows masked to zero."""
    u = np.concatenate([nodal.ravel(), bubble.ravel()])
    r_u = a @ u - b.T @ pressure - load
    if include_convection:
        r_u = r_u + fem.convection_vector(mesh, nodal, bubble, data)
    r_p = b @ u
    r_u[layout.constrained] = 0.0
    return np.concatenate([r_u, r_p])


def solve_navier_stokes(mesh: Mesh2D, config: FlowConfig, initial: FlowState | None = None) -> FlowState:
    """Newton solve of the steady Navier-Stokes state problem.

    Starts from the Stokes solution (or ``initial`` when given, e.g. the
    previous optimization iterate).  If plain Newton fails and
    ``continuation_steps`` > 0, the viscosity walks down from
    ``2**steps * nu`` halving each leg, re-using each converged state.
    """
    _require_outflow(mesh)
    ed = fem.element_data(mesh)
    b = fem.assemble_divergence(mesh, ed)
    layout = dirichlet_layout(mesh, config)
    load = _traction_load(mesh, config)

    def newton(nu: float, state: tuple, iters_used: int) -> tuple:
        a = fem.assemble_viscous(mesh, nu, ed)
        nodal, bub, pres = state
        trace = []
        for it in range(config.newton_max_iters):
            r = _residual(mesh, layout, a, b, load, nodal, bub, pres, True, ed)
            rn = float(np.linalg.norm(r))
            trace.append(rn)
            if not np.isfinite(rn):
                raise NewtonDivergedError(f"non-finite residual at nu={nu:g}", trace)
            if rn <= config.newton_tol:
                return (nodal, bub, pres), iters_used + it, trace
            n_mat, np_mat = fem.assemble_convection(mesh, nodal, bub, ed)
            system = fem.SparseSystem(a + n_mat + np_mat, b, -r, config.solver_tol)
            hom = fem.DofLayout(layout.n_nodes, layout.n_elements, layout.constrained,
                                np.zeros_like(layout.values))
            d_nodal, d_bub, d_pres = fem.solve_condensed(system, hom)
            nodal = nodal + d_nodal
            bub = bub + d_bub
            pres = pres + d_pres
        r = _residual(mesh, layout, a, b, load, nodal, bub, pres, True, ed)
        trace.append(float(np.linalg.norm(r)))
        if trace[-1] <= config.newton_tol:
            return (nodal, bub, pres), iters_used + config.newton_max_iters, trace
        raise NewtonDivergedError(f"no convergence in {config.newton_max_iters} iterations at nu={nu:g}", trace)

    if initial is not None:
        start = (initial.velocity.copy(), initial.bubble.copy(), initial.pressure.copy())
    else:
        st = solve_stokes(mesh, config)
        start = (st.velocity, st.bubble, st.pressure)

    try:
        state, iters, trace = newton(config.viscosity, start, 0)
        return FlowState(mesh, state[0], state[1], state[2],
                         newton_iters=iters, residual_trace=tuple(trace))
    except NewtonDivergedError as direct_err:
        if config.continuation_steps < 1:
            raise
        last_trace = direct_err.trace

    # viscosity continuation: halve from 2**steps * nu down to nu
    state = start
    iters = 0
    for k in range(config.continuation_steps, -1, -1):
        nu_k = config.viscosity * (2.0**k)
        cfg_k = FlowConfig(
            viscosity=nu_k, inflow=config.inflow, traction=config.traction,
            model=config.model, newton_tol=config.newton_tol,
            newton_max_iters=config.newton_max_iters, continuation_steps=0,
            solver_tol=config.solver_tol,
        )
        if k == config.continuation_steps:
            st = solve_stokes(mesh, cfg_k)
            state = (st.velocity, st.bubble, st.pressure)
        try:
            state, iters, last_trace = newton(nu_k, state, iters)
        except NewtonDivergedError as exc:
            raise NewtonDivergedError(
                f"continuation failed at nu={nu_k:g} (target {config.viscosity:g})", exc.trace
            ) from exc
    return FlowState(mesh, state[0], state[1], state[2],
                     newton_iters=iters, residual_trace=tuple(last_trace))


def solve_flow(mesh: Mesh2D, config: FlowConfig, initial: FlowState | None = None) -> FlowState:
    """Solve with the configured model (stokes or navier_stokes)."""
    if config.model == "stokes":
        return solve_stokes(mesh, config)
    return solve_navier_stokes(mesh, config, initial)


def residual_norm(mesh: Mesh2D, state: FlowState, config: FlowConfig) -> float:
    """Norm of the discrete state residual at ``state`` (free rows only)."""
    ed = fem.element_data(mesh)
    a = fem.assemble_viscous(mesh, config.viscosity, ed)
    b = fem.assemble_divergence(mesh, ed)
    layout = dirichlet_layout(mesh, config)
    load = _traction_load(mesh, config)
    r = _residual(mesh, layout, a, b, load, state.velocity, state.bubble, state.pressure,
                  config.model == "navier_stokes", ed)
    return float(np.linalg.norm(r))


def strain_rate_at_qp(mesh: Mesh2D, state: FlowState, data=None) -> tuple:
    """Symmetric velocity gradient at quadrature points.

    Returns (eps, w2a): eps has shape (ne, 2, 2, nq), w2a the quadrature
    weights times twice the element areas, shape (ne, nq).
    """
    ed = data if data is not None else fem.element_data(mesh)
    _, dy = fem._field_at_qp(mesh, ed, state.velocity, state.bubble)
    eps = 0.5 * (dy + dy.transpose(0, 2, 1, 3))
    w2a = ed.weights[None, :] * (2.0 * ed.areas)[:, None]
    return eps, w2a


def dissipated_energy(mesh: Mesh2D, state: FlowState, nu: float) -> float:
    """Total viscous dissipation  2 nu int |eps(y)|^2 dx  (bubbles included)."""
    eps, w2a = strain_rate_at_qp(mesh, state)
    dens = np.einsum("emiq,emiq->eq", eps, eps, optimize=True)
    return float(2.0 * nu * np.sum(w2a * dens))
