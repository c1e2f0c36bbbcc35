"""Boundary shape gradient, descent smoothing and the optimization loop.

The movable boundary is the Free part.  The gradient of the dissipated
energy concentrates there with density  2 nu (eps(y):eps(v) - |eps(y)|^2)
along the outward normal; the volume constraint enters through a scalar
multiplier added to the density.  The descent direction is the harmonic-type
extension of the negated gradient data (screened Laplace problem), which
makes the directional derivative exactly minus its H1 norm squared, so every
smoothed direction is a descent direction by construction.
"""

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import fem
from .adjoint import AdjointState, solve_adjoint
from .flow import FlowConfig, FlowState, dissipated_energy, solve_flow
from .mesh import (
    BoundaryTag,
    InvertedElementError,
    Mesh2D,
    boundary_node_weights,
    boundary_normals,
    deform,
    fixed_nodes,
    volume,
)
from .flow import NewtonDivergedError


@dataclass(frozen=True)
class BoundaryGradient:
    """Nodal gradient data on the Free boundary.

    Attributes
    ----------
    nodes : ndarray (k,)
        Free node indices, ascending.
    density : ndarray (k,)
        Scalar gradient density g_i (along the outward normal).
    normals : ndarray (k, 2)
        Outward unit normals.
    weights : ndarray (k,)
        Boundary measure per node (half the incident Free edge lengths).
    """

    nodes: np.ndarray
    density: np.ndarray
    normals: np.ndarray
    weights: np.ndarray


@dataclass
class OptimConfig:
    step0: float
    multiplier0: float = 0.0
    epsilon: float = 0.0
    target_volume: float | None = None
    max_iters: int = 0
    step_min: float = 1e-6
    step_max: float = 1.0
    decrease_factor: float = 0.5
    increase_factor: float = 1.2
    alignment_threshold: float = 0.9
    retry_cap: int = 8

    def __post_init__(self):
        if self.step0 <= 0:
            raise ValueError("step0 must be positive")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.target_volume is not None and self.target_volume <= 0:
            raise ValueError("target_volume must be positive")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        if not (0 < self.step_min <= self.step0 <= self.step_max):
            raise ValueError("require 0 < step_min <= step0 <= step_max")
        if not (0 < self.decrease_factor < 1):
            raise ValueError("decrease_factor must be in (0, 1)")
        if self.increase_factor < 1:
            raise ValueError("increase_factor must be >= 1")
        if self.retry_cap < 1:
            raise ValueError("retry_cap must be >= 1")


@dataclass(frozen=True)
class IterationRecord:
    """One attempted optimization iteration.

    ``energy`` and ``vol`` describe the mesh the iteration produced: the
    deformed candidate when accepted, the unchanged current mesh when
    rejected.
    """

    iteration: int
    energy: float
    vol: float
    multiplier: float
    step: float
    grad_norm: float
    newton_iters: int
    accepted: bool


def shape_gradient(mesh: Mesh2D, state: FlowState, adj: AdjointState, nu: float) -> BoundaryGradient:
    """Nodal gradient density on the Free boundary.

    Per element the density  2 nu (eps(y):eps(v) - |eps(y)|^2)  is averaged
    over the element (bubble strains contribute through the quadratic
    terms), then scattered to Free nodes with element-area weights.
    """
    ed = fem.element_data(mesh)
    _, dy = fem._field_at_qp(mesh, ed, state.velocity, state.bubble)
    _, dv = fem._field_at_qp(mesh, ed, adj.velocity, adj.bubble)
    eps_y = 0.5 * (dy + dy.transpose(0, 2, 1, 3))
    eps_v = 0.5 * (dv + dv.transpose(0, 2, 1, 3))
    w2a = ed.weights[None, :] * (2.0 * ed.areas)[:, None]
    cross = np.einsum("eq,emiq,emiq->e", w2a, eps_y, eps_v, optimize=True)
    own = np.einsum("eq,emiq,emiq->e", w2a, eps_y, eps_y, optimize=True)
    elem_mean = 2.0 * nu * (cross - own) / ed.areas

    nodes, normals = boundary_normals(mesh, BoundaryTag.FREE)
    if nodes.size == 0:
        raise ValueError("mesh has no Free boundary to move")
    wnodes, weights = boundary_node_weights(mesh, BoundaryTag.FREE)
    assert np.array_equal(nodes, wnodes)
    acc = np.zeros(mesh.n_nodes)
    wacc = np.zeros(mesh.n_nodes)
    for a in range(3):
        np.add.at(acc, mesh.triangles[:, a], elem_mean * ed.areas)
        np.add.at(wacc, mesh.triangles[:, a], ed.areas)
    density = acc[nodes] / wacc[nodes]
    return BoundaryGradient(nodes, density, normals, weights)


def with_multiplier(grad: BoundaryGradient, multiplier: float) -> BoundaryGradient:
    """Total gradient density including the volume multiplier."""
    return replace(grad, density=grad.density + multiplier)


def eulerian_derivative(grad: BoundaryGradient, displacement: np.ndarray) -> float:
    """Directional derivative  sum_i w_i g_i (V_i . n_i)  of the functional."""
    v = np.asarray(displacement, dtype=float)[grad.nodes]
    return float(np.sum(grad.weights * grad.density * np.einsum("ij,ij->i", v, grad.normals)))


def balance_multiplier(grad: BoundaryGradient) -> float:
    """Multiplier making the weighted mean of (g + l) vanish on Free."""
    total = float(np.sum(grad.weights))
    if total <= 0:
        raise ValueError("empty Free boundary")
    return -float(np.sum(grad.weights * grad.density)) / total


def update_multiplier(l_current: float, l_balance: float, vol: float, target: float, epsilon: float) -> float:
    """Averaged multiplier plus the signed volume-feedback term.

    The feedback must carry the sign of (vol - target): a positive excess
    raises the multiplier (contracts the domain), a deficit lowers it.  A
    one-sided magnitude term cannot restore volume lost to the quadratic
    shrinkage that accumulates at curved boundaries; it drifts monotonically
    and, for epsilon large enough, runs away.
    """
    if target <= 0:
        raise ValueError("target volume must be positive")
    return 0.5 * (l_current + l_balance) + epsilon * (vol - target) / target


def smooth_field(mesh: Mesh2D, dirichlet: np.ndarray, load: np.ndarray) -> np.ndarray:
    """Screened-Laplace extension: (grad d, grad w) + (d, w) = load . w.

    ``dirichlet`` nodes are pinned to zero, ``load`` is a nodal vector load
    (the weak Neumann data).  Solved componentwise with the same factorized
    P1 operator.
    """
    k = fem.assemble_p1_stiffness_mass(mesh)
    n = mesh.n_nodes
    mask = np.zeros(n, dtype=bool)
    mask[dirichlet] = True
    keep = sp.diags((~mask).astype(float), format="csr")
    kc = (keep @ k @ keep + sp.diags(mask.astype(float))).tocsr()
    out = np.empty((n, 2))
    try:
        lu = spla.splu(kc.tocsc())
    except RuntimeError as exc:
        raise fem.SingularSystemError(str(exc)) from exc
    for c in range(2):
        rhs = np.where(mask, 0.0, load[:, c])
        x = lu.solve(rhs)
        res = rhs - kc @ x
        if np.linalg.norm(res) > 1e-10 * max(1.0, np.linalg.norm(rhs)):
            x = x + lu.solve(res)
        out[:, c] = x
    return out


def smooth_descent(mesh: Mesh2D, total_grad: BoundaryGradient) -> np.ndarray:
    """Descent displacement: extension of -(g + l) n into the domain.

    Returns a full nodal field vanishing exactly on Inflow/Outflow/Wall.
    """
    load = np.zeros((mesh.n_nodes, 2))
    load[total_grad.nodes] = (
        -(total_grad.weights * total_grad.density)[:, None] * total_grad.normals
    )
    d = smooth_field(mesh, fixed_nodes(mesh), load)
    d[fixed_nodes(mesh)] = 0.0
    return d


def h1_inner(mesh: Mesh2D, d1: np.ndarray, d2: np.ndarray) -> float:
    """H1 inner product of two nodal vector fields (componentwise P1)."""
    k = fem.assemble_p1_stiffness_mass(mesh)
    d1 = np.asarray(d1, float)
    d2 = np.asarray(d2, float)
    return float(d1[:, 0] @ (k @ d2[:, 0]) + d1[:, 1] @ (k @ d2[:, 1]))


def step_control(
    step: float,
    d_current: np.ndarray,
    d_previous: np.ndarray | None,
    inverted: bool,
    mesh: Mesh2D,
    config: OptimConfig,
) -> float:
    """Step refresh: halve after inversions or direction reversals, grow
    modestly when consecutive directions align, clamp to the bounds."""
    if inverted:
        step = config.decrease_factor * step
    elif d_previous is not None:
        inner = h1_inner(mesh, d_current, d_previous)
        if inner < 0.0:
            step = config.decrease_factor * step
        else:
            n1 = h1_inner(mesh, d_current, d_current)
            n2 = h1_inner(mesh, d_previous, d_previous)
            denom = np.sqrt(n1 * n2)
            if denom > 0 and inner / denom > config.alignment_threshold:
                step = config.increase_factor * step
    return float(min(max(step, config.step_min), config.step_max))


def _grad_norm(grad: BoundaryGradient) -> float:
    return float(np.sqrt(np.sum(grad.weights * grad.density**2)))


def optimize(mesh: Mesh2D, flow_config: FlowConfig, config: OptimConfig) -> tuple:
    """Run the gradient loop for the configured iteration budget.

    Per iteration: state and adjoint solve, boundary gradient, multiplier
    balance, descent smoothing, mesh deformation with the current step, and
    a record.  A deformation that inverts an element or a candidate whose
    state solve diverges rejects the iteration (mesh unchanged, step halved
    via the inversion flag); ``retry_cap`` consecutive rejections end the
    run early.  The multiplier is refreshed only on accepted iterations,
    using the pre-deformation volume.

    Returns (final mesh, [IterationRecord...]).
    """
    if config.max_iters == 0:
        return mesh, []
    state = solve_flow(mesh, flow_config)
    adj = solve_adjoint(mesh, state, flow_config)
    target = config.target_volume if config.target_volume is not None else volume(mesh)
    step = config.step0
    lam = config.multiplier0
    d_prev = None
    pending_inverted = False
    consecutive_failures = 0
    records = []

    for k in range(config.max_iters):
        grad = shape_gradient(mesh, state, adj, flow_config.viscosity)
        l_bal = balance_multiplier(grad)
        total = with_multiplier(grad, lam)
        d = smooth_descent(mesh, total)
        if d_prev is not None or pending_inverted:
            step = step_control(step, d, d_prev, pending_inverted, mesh, config)
        pending_inverted = False
        gnorm = _grad_norm(total)

        slope = eulerian_derivative(total, d)
        dn2 = h1_inner(mesh, d, d)
        if slope > 1e-8 * max(dn2, 1e-30):
            raise RuntimeError(f"smoothed direction is not a descent direction (slope {slope:.3e})")

        try:
            candidate = deform(mesh, d, step)
            cand_state = solve_flow(candidate, flow_config, state)
            cand_adj = solve_adjoint(candidate, cand_state, flow_config)
        except (InvertedElementError, NewtonDivergedError, fem.SingularSystemError):
            records.append(IterationRecord(
                k, dissipated_energy(mesh, state, flow_config.viscosity), volume(mesh),
                lam, step, gnorm, 0, False,
            ))
            pending_inverted = True
            d_prev = d
            consecutive_failures += 1
            if consecutive_failures >= config.retry_cap:
                break
            continue

        records.append(IterationRecord(
            k, dissipated_energy(candidate, cand_state, flow_config.viscosity), volume(candidate),
            lam, step, gnorm, cand_state.newton_iters, True,
        ))
        lam = update_multiplier(lam, l_bal, volume(mesh), target, config.epsilon)
        mesh, state, adj = candidate, cand_state, cand_adj
        d_prev = d
        consecutive_failures = 0

    return mesh, records


@dataclass(frozen=True)
class GradientCheckReport:
    analytic: float
    t_values: tuple
    fd_values: tuple
    rel_errors: tuple
    orders: tuple  # observed convergence orders between consecutive t values

    def worst(self) -> float:
        return max(self.rel_errors)


def gradient_check(mesh: Mesh2D, flow_config: FlowConfig, displacement: np.ndarray,
                   t_values=(1e-2, 5e-3, 2.5e-3)) -> GradientCheckReport:
    """Central-difference check of the boundary gradient formula.

    For each step t the energy is recomputed with full solves on the meshes
    deformed by +-t along ``displacement`` and compared with the analytic
    directional derivative from the adjoint-based boundary density.
    """
    state = solve_flow(mesh, flow_config)
    adj = solve_adjoint(mesh, state, flow_config)
    grad = shape_gradient(mesh, state, adj, flow_config.viscosity)
    analytic = eulerian_derivative(grad, displacement)

    fds = []
    rels = []
    for t in t_values:
        plus = deform(mesh, displacement, +t)
        minus = deform(mesh, displacement, -t)
        e_plus = dissipated_energy(plus, solve_flow(plus, flow_config), flow_config.viscosity)
        e_minus = dissipated_energy(minus, solve_flow(minus, flow_config), flow_config.viscosity)
        fd = (e_plus - e_minus) / (2.0 * t)
        fds.append(fd)
        rels.append(abs(fd - analytic) / max(abs(fd), 1e-300))
    orders = []
    for i in range(len(rels) - 1):
        ratio_t = t_values[i] / t_values[i + 1]
        if rels[i + 1] > 0 and ratio_t > 1:
            orders.append(float(np.log(rels[i] / rels[i + 1]) / np.log(ratio_t)))
        else:
            orders.append(float("nan"))
    return GradientCheckReport(analytic, tuple(t_values), tuple(fds), tuple(rels), tuple(orders))
