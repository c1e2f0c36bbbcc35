"""Mixed finite element core: P1+bubble velocity, P1 pressure.

Velocity lives in the space of continuous piecewise-linear functions
enriched with one cubic bubble per triangle and per component (the bubble
vanishes on the triangle boundary and equals 1 at the centroid); pressure
is continuous piecewise-linear.  Bubble unknowns are eliminated element by
element before the global solve and recovered afterwards.

Global degree-of-freedom layout:
  velocity nodal   2*node + comp            in [0, 2*n_nodes)
  velocity bubble  2*n_nodes + 2*elem + comp
  pressure         node                      (separate block)
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import Mesh2D
from .quadrature import DEFAULT_DEGREE, triangle_rule


class SingularSystemError(RuntimeError):
    """The linear system could not be solved to the requested residual."""


# ---------------------------------------------------------------------------
# layout

@dataclass(frozen=True)
class DofLayout:
    """Index bookkeeping plus the constrained velocity DOFs.

    ``constrained``/``values`` cover the velocity block only (pressure and
    bubble DOFs are never constrained).
    """

    n_nodes: int
    n_elements: int
    constrained: np.ndarray  # bool, (n_velocity,)
    values: np.ndarray  # float, (n_velocity,), zero at unconstrained DOFs

    @property
    def n_velocity(self) -> int:
        return 2 * self.n_nodes + 2 * self.n_elements

    @property
    def n_pressure(self) -> int:
        return self.n_nodes

    @property
    def n_total(self) -> int:
        return self.n_velocity + self.n_pressure

    @property
    def bubble_start(self) -> int:
        return 2 * self.n_nodes


def build_layout(mesh: Mesh2D, bc_nodes: np.ndarray, bc_values: np.ndarray) -> DofLayout:
    """Layout with velocity Dirichlet data at ``bc_nodes``.

    Raises ValueError if a constrained node is not a boundary node.
    """
    bc_nodes = np.asarray(bc_nodes, dtype=np.int64)
    bc_values = np.asarray(bc_values, dtype=float).reshape(-1, 2)
    if bc_nodes.shape[0] != bc_values.shape[0]:
        raise ValueError("bc_nodes and bc_values length mismatch")
    boundary_nodes = set(int(n) for n in np.unique(mesh.boundary_edges))
    for n in bc_nodes:
        if int(n) not in boundary_nodes:
            raise ValueError(f"velocity value specified for non-boundary node {int(n)}")
    nv = 2 * mesh.n_nodes + 2 * mesh.n_triangles
    constrained = np.zeros(nv, dtype=bool)
    values = np.zeros(nv)
    constrained[2 * bc_nodes] = True
    constrained[2 * bc_nodes + 1] = True
    values[2 * bc_nodes] = bc_values[:, 0]
    values[2 * bc_nodes + 1] = bc_values[:, 1]
    return DofLayout(mesh.n_nodes, mesh.n_triangles, constrained, values)


# ---------------------------------------------------------------------------
# element precomputation

@dataclass(frozen=True)
class ElementData:
    """Per-element geometry and basis tables at the quadrature points.

    ``phi`` holds the four scalar basis values (3 vertex functions + bubble),
    identical on every element; ``dphi`` the per-element gradients.
    """

    areas: np.ndarray  # (ne,)
    grads: np.ndarray  # (ne, 3, 2) constant P1 gradients
    lambdas: np.ndarray  # (nq, 3) barycentric quadrature points
    weights: np.ndarray  # (nq,) summing to 1/2
    phi: np.ndarray  # (4, nq)
    dphi: np.ndarray  # (ne, 4, 2, nq)


def element_data(mesh: Mesh2D, degree: int = DEFAULT_DEGREE) -> ElementData:
    rule = triangle_rule(degree)
    p = mesh.nodes[mesh.triangles]  # (ne, 3, 2)
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    areas = 0.5 * det
    # inverse-transpose Jacobian rows give the P1 gradients
    grads = np.empty((mesh.n_triangles, 3, 2))
    grads[:, 1, 0] = d2[:, 1] / det
    grads[:, 1, 1] = -d2[:, 0] / det
    grads[:, 2, 0] = -d1[:, 1] / det
    grads[:, 2, 1] = d1[:, 0] / det
    grads[:, 0] = -grads[:, 1] - grads[:, 2]

    lam = rule.points  # (nq, 3)
    nq = lam.shape[0]
    phi = np.empty((4, nq))
    phi[:3] = lam.T
    phi[3] = 27.0 * lam[:, 0] * lam[:, 1] * lam[:, 2]
    dphi = np.empty((mesh.n_triangles, 4, 2, nq))
    dphi[:, :3, :, :] = grads[:, :, :, None]
    # bubble gradient: 27 * sum_a grad(lam_a) * prod of the other two lambdas
    prods = np.stack(
        [lam[:, 1] * lam[:, 2], lam[:, 0] * lam[:, 2], lam[:, 0] * lam[:, 1]], axis=0
    )  # (3, nq)
    dphi[:, 3, :, :] = 27.0 * np.einsum("eai,aq->eiq", grads, prods)
    return ElementData(areas, grads, lam, rule.weights, phi, dphi)


def _local_velocity_dofs(mesh: Mesh2D) -> np.ndarray:
    """Global velocity DOF ids per element, local order (2a+c), shape (ne, 8)."""
    ne = mesh.n_triangles
    out = np.empty((ne, 8), dtype=np.int64)
    out[:, 0:6:2] = 2 * mesh.triangles
    out[:, 1:6:2] = 2 * mesh.triangles + 1
    base = 2 * mesh.n_nodes + 2 * np.arange(ne, dtype=np.int64)
    out[:, 6] = base
    out[:, 7] = base + 1
    return out


def _scatter(local: np.ndarray, rows: np.ndarray, cols: np.ndarray, shape: tuple) -> sp.csr_matrix:
    ne, nr, nc = local.shape
    r = np.repeat(rows, nc, axis=1).ravel()
    c = np.tile(cols, (1, nr)).ravel()
    mat = sp.coo_matrix((local.ravel(), (r, c)), shape=shape)
    return mat.tocsr()


# ---------------------------------------------------------------------------
# operators

def assemble_viscous(mesh: Mesh2D, nu: float, data: ElementData | None = None) -> sp.csr_matrix:
    """Velocity-velocity operator 2*nu*int eps(u):eps(w), bubbles included."""
    ed = data if data is not None else element_data(mesh)
    # Gint[e,a,i,b,j] = int_T d_i(phi_a) d_j(phi_b)
    gint = np.einsum("q,eaiq,ebjq->eaibj", ed.weights, ed.dphi, ed.dphi, optimize=True)
    gint *= (2.0 * ed.areas)[:, None, None, None, None]
    ne = mesh.n_triangles
    local = np.zeros((ne, 4, 2, 4, 2))
    trace = np.einsum("eaibi->eab", gint)
    for c in range(2):
        local[:, :, c, :, c] += trace
        for d in range(2):
            local[:, :, c, :, d] += gint[:, :, d, :, c]
    local *= nu
    dofs = _local_velocity_dofs(mesh)
    nvel = 2 * mesh.n_nodes + 2 * ne
    return _scatter(local.reshape(ne, 8, 8), dofs, dofs, (nvel, nvel))


def assemble_divergence(mesh: Mesh2D, data: ElementData | None = None) -> sp.csr_matrix:
    """Pressure-velocity coupling B[p, (b,d)] = int psi_p d_d(phi_b)."""
    ed = data if data is not None else element_data(mesh)
    local = np.einsum("q,qp,ebdq->epbd", ed.weights, ed.lambdas, ed.dphi, optimize=True)
    local *= (2.0 * ed.areas)[:, None, None, None]
    ne = mesh.n_triangles
    dofs = _local_velocity_dofs(mesh)
    nvel = 2 * mesh.n_nodes + 2 * ne
    return _scatter(local.reshape(ne, 3, 8), mesh.triangles, dofs, (mesh.n_nodes, nvel))


def _field_at_qp(mesh: Mesh2D, ed: ElementData, nodal: np.ndarray, bubble: np.ndarray) -> tuple:
    """Velocity value and gradient at quadrature points.

    Returns (y, dy) with y shape (ne, 2, nq) and dy shape (ne, 2, 2, nq),
    dy[e, m, i, q] = d_i y_m.
    """
    coef = np.concatenate(
        [nodal[mesh.triangles], bubble[:, None, :]], axis=1
    )  # (ne, 4, 2) -> coef[e, a, m]
    y = np.einsum("eam,aq->emq", coef, ed.phi, optimize=True)
    dy = np.einsum("eam,eaiq->emiq", coef, ed.dphi, optimize=True)
    return y, dy


def assemble_convection(
    mesh: Mesh2D, nodal: np.ndarray, bubble: np.ndarray, data: ElementData | None = None
) -> tuple:
    """Convection matrices at the state ``y`` given by (nodal, bubble).

    Returns (N, Nprime):
      N[(a,c),(b,d)]      = delta_cd int phi_a (y . grad phi_b)   (transport of
                            the trial increment by y)
      Nprime[(a,c),(b,d)] = int phi_a phi_b d_d(y_c)              (increment
                            entering through the state gradient)
    Their sum is the velocity-velocity Jacobian of the nonlinear term.
    """
    ed = data if data is not None else element_data(mesh)
    y, dy = _field_at_qp(mesh, ed, np.asarray(nodal, float), np.asarray(bubble, float))
    w2a = ed.weights[None, :] * (2.0 * ed.areas)[:, None]  # (ne, nq)
    ne = mesh.n_triangles

    ydg = np.einsum("emq,ebmq->ebq", y, ed.dphi, optimize=True)  # y . grad(phi_b)
    conv = np.einsum("eq,aq,ebq->eab", w2a, ed.phi, ydg, optimize=True)
    n_local = np.zeros((ne, 4, 2, 4, 2))
    n_local[:, :, 0, :, 0] = conv
    n_local[:, :, 1, :, 1] = conv

    np_local = np.einsum("eq,aq,bq,ecdq->eacbd", w2a, ed.phi, ed.phi, dy, optimize=True)

    dofs = _local_velocity_dofs(mesh)
    nvel = 2 * mesh.n_nodes + 2 * ne
    n_mat = _scatter(n_local.reshape(ne, 8, 8), dofs, dofs, (nvel, nvel))
    np_mat = _scatter(np_local.reshape(ne, 8, 8), dofs, dofs, (nvel, nvel))
    return n_mat, np_mat


def convection_vector(
    mesh: Mesh2D, nodal: np.ndarray, bubble: np.ndarray, data: ElementData | None = None
) -> np.ndarray:
    """Nonlinear convection term c(y): entries int (Dy . y) . phi_(a,c)."""
    ed = data if data is not None else element_data(mesh)
    y, dy = _field_at_qp(mesh, ed, np.asarray(nodal, float), np.asarray(bubble, float))
    w2a = ed.weights[None, :] * (2.0 * ed.areas)[:, None]
    dyy = np.einsum("eciq,eiq->ecq", dy, y, optimize=True)
    local = np.einsum("eq,aq,ecq->eac", w2a, ed.phi, dyy, optimize=True)
    ne = mesh.n_triangles
    dofs = _local_velocity_dofs(mesh)
    nvel = 2 * mesh.n_nodes + 2 * ne
    out = np.zeros(nvel)
    np.add.at(out, dofs.ravel(), local.reshape(ne, 8).ravel())
    return out


def assemble_p1_stiffness_mass(mesh: Mesh2D) -> sp.csr_matrix:
    """Scalar P1 operator int (grad u . grad v + u v), used for smoothing."""
    ed = element_data(mesh, degree=2)
    stiff = np.einsum("eai,ebi->eab", ed.grads, ed.grads) * ed.areas[:, None, None]
    mass = (np.full((3, 3), 1.0) + np.eye(3)) / 12.0
    local = stiff + mass[None, :, :] * ed.areas[:, None, None]
    return _scatter(local, mesh.triangles, mesh.triangles, (mesh.n_nodes, mesh.n_nodes))


_GAUSS2 = (0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0))


def assemble_boundary_traction(mesh: Mesh2D, edges: np.ndarray, h_eval) -> np.ndarray:
    """Velocity load int_edge h . v ds over the given boundary edges.

    ``h_eval`` maps an array of points (k, 2) to traction vectors (k, 2).
    Only vertex functions receive load: the bubble vanishes on element
    boundaries.  Two-point Gauss per edge (exact through cubic data).
    """
    nvel = 2 * mesh.n_nodes + 2 * mesh.n_triangles
    load = np.zeros(nvel)
    if edges.size == 0:
        return load
    pi = mesh.nodes[edges[:, 0]]
    pj = mesh.nodes[edges[:, 1]]
    lengths = np.linalg.norm(pj - pi, axis=1)
    for s in _GAUSS2:
        pts = (1.0 - s) * pi + s * pj
        h = np.asarray(h_eval(pts), dtype=float).reshape(-1, 2)
        wi = 0.5 * lengths * (1.0 - s)
        wj = 0.5 * lengths * s
        for c in range(2):
            np.add.at(load, 2 * edges[:, 0] + c, wi * h[:, c])
            np.add.at(load, 2 * edges[:, 1] + c, wj * h[:, c])
    return load


# ---------------------------------------------------------------------------
# systems, boundary conditions, condensation, solve

@dataclass
class SparseSystem:
    """Saddle-point system blocks prior to or after Dirichlet elimination.

    The full operator is [[A, -B^T], [B, 0]] acting on (velocity, pressure),
    with right-hand side ``rhs`` of length n_velocity + n_pressure.
    """

    a_vv: sp.csr_matrix
    b_pv: sp.csr_matrix
    rhs: np.ndarray
    tol: float = 1e-10


@dataclass
class LinearSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    tol: float = 1e-10


def saddle_matrix(system: SparseSystem) -> sp.csr_matrix:
    return sp.bmat(
        [[system.a_vv, -system.b_pv.T], [system.b_pv, None]], format="csr"
    )


def full_system(system: SparseSystem) -> LinearSystem:
    """The uncondensed saddle system as a plain linear system."""
    return LinearSystem(saddle_matrix(system), system.rhs.copy(), system.tol)


def apply_dirichlet(system: SparseSystem, layout: DofLayout) -> SparseSystem:
    """Eliminate constrained velocity DOFs: identity rows, lifted RHS."""
    m = layout.constrained
    if m.shape[0] != system.a_vv.shape[0]:
        raise ValueError("layout does not match system size")
    nvel = layout.n_velocity
    gm = np.where(m, layout.values, 0.0)
    rhs = system.rhs.copy()
    rhs[:nvel] -= system.a_vv @ gm
    rhs[nvel:] -= system.b_pv @ gm
    keep = sp.diags((~m).astype(float), format="csr")
    a = keep @ system.a_vv @ keep + sp.diags(m.astype(float), format="csr")
    b = system.b_pv @ keep
    rhs[:nvel] = np.where(m, layout.values, rhs[:nvel])
    return SparseSystem(a.tocsr(), b.tocsr(), rhs, system.tol)


@dataclass
class BubbleRecovery:
    """Reconstructs bubble coefficients from the condensed solution."""

    kbb_inv: sp.csr_matrix  # (2 ne, 2 ne) block diagonal
    k_bn: sp.csr_matrix  # (2 ne, n_condensed)
    rhs_b: np.ndarray  # (2 ne,)

    def recover(self, x_condensed: np.ndarray) -> np.ndarray:
        ub = self.kbb_inv @ (self.rhs_b - self.k_bn @ x_condensed)
        return ub.reshape(-1, 2)


def condense_bubbles(system: SparseSystem, layout: DofLayout) -> tuple:
    """Eliminate the two bubble DOFs of every element exactly.

    Returns (LinearSystem over [nodal velocity, pressure], BubbleRecovery).
    The bubble block of the saddle matrix is block-diagonal 2x2 because
    bubbles of different elements never share support, so the Schur
    complement is assembled from per-element inverses.
    """
    k = saddle_matrix(system)
    nn2 = layout.bubble_start
    nvel = layout.n_velocity
    ne = layout.n_elements
    b_idx = np.arange(nn2, nvel)
    n_idx = np.concatenate([np.arange(nn2), np.arange(nvel, nvel + layout.n_pressure)])

    kbb = k[b_idx][:, b_idx].tocoo()
    blocks = np.zeros((ne, 2, 2))
    er = kbb.row // 2
    if np.any(kbb.col // 2 != er):
        raise AssertionError("bubble-bubble block is not element-local")
    np.add.at(blocks, (er, kbb.row % 2, kbb.col % 2), kbb.data)
    try:
        inv = np.linalg.inv(blocks)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"singular bubble block: {exc}") from exc
    rows = np.repeat(np.arange(2 * ne), 2)
    cols = 2 * (rows // 2) + np.tile([0, 1], 2 * ne)
    kbb_inv = sp.csr_matrix((inv.reshape(ne, 4).ravel(), (rows, cols)), shape=(2 * ne, 2 * ne))

    k_nb = k[n_idx][:, b_idx].tocsr()
    k_bn = k[b_idx][:, n_idx].tocsr()
    k_nn = k[n_idx][:, n_idx].tocsr()
    rhs_b = system.rhs[b_idx]
    rhs_n = system.rhs[n_idx]
    k_c = (k_nn - k_nb @ kbb_inv @ k_bn).tocsr()
    rhs_c = rhs_n - k_nb @ (kbb_inv @ rhs_b)
    return LinearSystem(k_c, rhs_c, system.tol), BubbleRecovery(kbb_inv, k_bn, rhs_b)


def solve_linear(system: LinearSystem) -> np.ndarray:
    """Sparse direct solve with a relative residual check.

    Up to three refinement passes; the residual is measured against the
    right-hand side norm so small-viscosity scaling does not tighten the
    check by accident.
    """
    mat = system.matrix.tocsr()
    # Symmetric row-norm equilibration keeps pivot growth in check on
    # strongly anisotropic meshes; the residual is still checked unscaled.
    rmax = np.asarray(abs(mat).max(axis=1).todense()).ravel()
    rmax[rmax == 0.0] = 1.0
    s = 1.0 / np.sqrt(rmax)
    d = sp.diags(s)
    try:
        lu = spla.splu((d @ mat @ d).tocsc())
        x = s * lu.solve(s * system.rhs)
    except RuntimeError as exc:
        raise SingularSystemError(str(exc)) from exc
    if not np.all(np.isfinite(x)):
        raise SingularSystemError("solver returned non-finite values")
    scale = float(np.linalg.norm(system.rhs))
    if scale == 0.0:
        scale = 1.0
    res = system.rhs - mat @ x
    for _ in range(3):
        if np.linalg.norm(res) / scale <= system.tol:
            return x
        x = x + s * lu.solve(s * res)
        res = system.rhs - mat @ x
    if np.linalg.norm(res) / scale > system.tol:
        raise SingularSystemError(
            f"residual {np.linalg.norm(res) / scale:.3e} above tolerance {system.tol:.1e}"
        )
    return x


def solve_condensed(system: SparseSystem, layout: DofLayout) -> tuple:
    """Dirichlet-eliminated, bubble-condensed solve of a saddle system.

    Returns (nodal velocity (n, 2), bubble velocity (ne, 2), pressure (n,)).
    """
    constrained = apply_dirichlet(system, layout)
    condensed, recovery = condense_bubbles(constrained, layout)
    x = solve_linear(condensed)
    nn2 = layout.bubble_start
    nodal = x[:nn2].reshape(-1, 2)
    pressure = x[nn2:]
    bubble = recovery.recover(x)
    return nodal, bubble, pressure
