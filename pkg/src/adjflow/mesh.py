"""Triangle meshes with tagged boundaries, deformation and generators.

A mesh is a flat triangulation of a plane domain: node coordinates,
counter-clockwise triangles and a list of tagged boundary edges.  The four
tags split the boundary by role: Inflow carries a velocity profile, Outflow
carries the natural traction condition, Wall is no-slip and fixed, Free is
no-slip and movable by the shape optimizer.

Meshes are immutable; every operation returns a new mesh.
"""

import enum
import json
from dataclasses import dataclass

import numpy as np


class BoundaryTag(enum.Enum):
    INFLOW = "inflow"
    OUTFLOW = "outflow"
    WALL = "wall"
    FREE = "free"


_TAG_ORDER = (BoundaryTag.INFLOW, BoundaryTag.OUTFLOW, BoundaryTag.WALL, BoundaryTag.FREE)
_TAG_TO_CODE = {tag: i for i, tag in enumerate(_TAG_ORDER)}
_CODE_TO_TAG = {i: tag for i, tag in enumerate(_TAG_ORDER)}

# Relative per-triangle area floor below which a deformation counts as an
# inversion.  Kept well above round-off so near-degenerate slivers are
# rejected early.
AREA_FLOOR_REL = 1e-12


class MeshValidationError(ValueError):
    """A mesh violates a structural invariant."""


class InvertedElementError(RuntimeError):
    """A deformation inverted (or degenerated) a triangle."""

    def __init__(self, triangle: int, area: float):
        self.triangle = triangle
        self.area = area
        super().__init__(f"triangle {triangle} inverted (signed area {area:.3e})")


@dataclass(frozen=True)
class Mesh2D:
    """Immutable 2D triangle mesh with tagged boundary edges.

    Attributes
    ----------
    nodes : ndarray, shape (n_nodes, 2)
    triangles : ndarray, shape (n_triangles, 3)
        Node indices, counter-clockwise.
    boundary_edges : ndarray, shape (n_edges, 2)
        Node index pairs as stored in the input (orientation preserved).
    boundary_tags : ndarray, shape (n_edges,)
        Integer tag codes, one per boundary edge.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "nodes", np.ascontiguousarray(self.nodes, dtype=float))
        object.__setattr__(self, "triangles", np.ascontiguousarray(self.triangles, dtype=np.int64))
        object.__setattr__(self, "boundary_edges", np.ascontiguousarray(self.boundary_edges, dtype=np.int64))
        object.__setattr__(self, "boundary_tags", np.ascontiguousarray(self.boundary_tags, dtype=np.uint8))
        for arr in (self.nodes, self.triangles, self.boundary_edges, self.boundary_tags):
            arr.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    def edges_with_tag(self, tag: BoundaryTag) -> np.ndarray:
        """Boundary edges carrying ``tag``, shape (k, 2)."""
        return self.boundary_edges[self.boundary_tags == _TAG_TO_CODE[tag]]

    def nodes_with_tag(self, tag: BoundaryTag) -> np.ndarray:
        """Sorted node indices incident to at least one ``tag`` edge."""
        return np.unique(self.edges_with_tag(tag))


def signed_areas(mesh: Mesh2D) -> np.ndarray:
    """Signed area of every triangle (positive for CCW)."""
    p = mesh.nodes[mesh.triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def volume(mesh: Mesh2D) -> float:
    """Total mesh area (the 2D volume of the flow domain)."""
    return float(np.sum(signed_areas(mesh)))


def _edge_key(a: int, b: int) -> tuple:
    return (a, b) if a < b else (b, a)


def validate(mesh: Mesh2D) -> None:
    """Raise MeshValidationError naming the first violated invariant."""
    nn = mesh.n_nodes
    if nn < 3:
        raise MeshValidationError(f"mesh has only {nn} nodes")
    if not np.all(np.isfinite(mesh.nodes)):
        raise MeshValidationError("node coordinates contain non-finite values")
    tris = mesh.triangles
    if tris.size == 0:
        raise MeshValidationError("mesh has no triangles")
    if tris.min() < 0 or tris.max() >= nn:
        bad = int(np.argmax((tris < 0).any(axis=1) | (tris >= nn).any(axis=1)))
        raise MeshValidationError(f"triangle {bad} references a node out of range")
    for t in range(tris.shape[0]):
        if len(set(tris[t])) != 3:
            raise MeshValidationError(f"triangle {t} has repeated nodes")
        break  # vectorized check below covers the rest
    rep = (tris[:, 0] == tris[:, 1]) | (tris[:, 1] == tris[:, 2]) | (tris[:, 0] == tris[:, 2])
    if rep.any():
        raise MeshValidationError(f"triangle {int(np.argmax(rep))} has repeated nodes")
    areas = signed_areas(mesh)
    nonpos = areas <= 0.0
    if nonpos.any():
        raise MeshValidationError(f"triangle {int(np.argmax(nonpos))} has non-positive area")

    # Edge incidence: interior edges are shared by exactly two triangles,
    # boundary edges by exactly one, and the tagged list must equal the
    # topological boundary with one tag per edge.
    counts: dict = {}
    for t in range(tris.shape[0]):
        a, b, c = tris[t]
        for u, v in ((a, b), (b, c), (c, a)):
            key = _edge_key(int(u), int(v))
            counts[key] = counts.get(key, 0) + 1
    for key, cnt in counts.items():
        if cnt > 2:
            raise MeshValidationError(f"edge {key} is shared by {cnt} triangles")

    tagged: dict = {}
    for e in range(mesh.boundary_edges.shape[0]):
        i, j = int(mesh.boundary_edges[e, 0]), int(mesh.boundary_edges[e, 1])
        if i == j:
            raise MeshValidationError(f"boundary edge {e} is degenerate ({i}, {j})")
        if not (0 <= i < nn and 0 <= j < nn):
            raise MeshValidationError(f"boundary edge {e} references a node out of range")
        key = _edge_key(i, j)
        if key in tagged:
            raise MeshValidationError(f"boundary edge ({i}, {j}) is tagged twice")
        if counts.get(key, 0) != 1:
            raise MeshValidationError(f"edge ({i}, {j}) is not a boundary edge of the triangulation")
        tagged[key] = e
    for key, cnt in counts.items():
        if cnt == 1 and key not in tagged:
            raise MeshValidationError(f"boundary edge {key} is missing a tag")


def boundary_triangle_of_edge(mesh: Mesh2D) -> np.ndarray:
    """For each boundary edge, the index of its unique owning triangle."""
    owner = {}
    tris = mesh.triangles
    for t in range(tris.shape[0]):
        a, b, c = (int(x) for x in tris[t])
        for u, v in ((a, b), (b, c), (c, a)):
            owner.setdefault(_edge_key(u, v), []).append(t)
    out = np.empty(mesh.boundary_edges.shape[0], dtype=np.int64)
    for e in range(mesh.boundary_edges.shape[0]):
        key = _edge_key(int(mesh.boundary_edges[e, 0]), int(mesh.boundary_edges[e, 1]))
        owners = owner.get(key, [])
        if len(owners) != 1:
            raise MeshValidationError(f"edge {key} is not a boundary edge of the triangulation")
        out[e] = owners[0]
    return out


def oriented_boundary_edges(mesh: Mesh2D, tag: BoundaryTag | None = None) -> np.ndarray:
    """Boundary edges oriented CCW with respect to their owning triangle.

    With this orientation the outward normal of edge (i, j) is the edge
    vector rotated by -90 degrees.
    """
    if tag is None:
        sel = np.arange(mesh.boundary_edges.shape[0])
    else:
        sel = np.flatnonzero(mesh.boundary_tags == _TAG_TO_CODE[tag])
    owners = boundary_triangle_of_edge(mesh)
    out = np.empty((sel.size, 2), dtype=np.int64)
    for row, e in enumerate(sel):
        i, j = int(mesh.boundary_edges[e, 0]), int(mesh.boundary_edges[e, 1])
        tri = mesh.triangles[owners[e]]
        a, b, c = (int(x) for x in tri)
        if (i, j) in ((a, b), (b, c), (c, a)):
            out[row] = (i, j)
        else:
            out[row] = (j, i)
    return out


def _edge_normals(mesh: Mesh2D, oriented: np.ndarray) -> np.ndarray:
    vec = mesh.nodes[oriented[:, 1]] - mesh.nodes[oriented[:, 0]]
    normals = np.stack([vec[:, 1], -vec[:, 0]], axis=1)
    lengths = np.linalg.norm(normals, axis=1)
    return normals / lengths[:, None]


def boundary_normals(mesh: Mesh2D, tag: BoundaryTag) -> tuple:
    """Outward unit normals at the nodes of a tagged boundary part.

    The nodal normal averages the unit normals of the node's incident
    ``tag`` edges and is renormalized to unit length.

    Returns
    -------
    (nodes, normals) : (ndarray (k,), ndarray (k, 2))
        Sorted node indices and matching unit normals.
    """
    oriented = oriented_boundary_edges(mesh, tag)
    if oriented.shape[0] == 0:
        return np.empty(0, dtype=np.int64), np.empty((0, 2))
    en = _edge_normals(mesh, oriented)
    nodes = np.unique(oriented)
    acc = np.zeros((mesh.n_nodes, 2))
    np.add.at(acc, oriented[:, 0], en)
    np.add.at(acc, oriented[:, 1], en)
    normals = acc[nodes]
    norms = np.linalg.norm(normals, axis=1)
    if np.any(norms < 1e-14):
        bad = int(nodes[int(np.argmin(norms))])
        raise MeshValidationError(f"degenerate normal at boundary node {bad}")
    return nodes, normals / norms[:, None]


def boundary_node_weights(mesh: Mesh2D, tag: BoundaryTag) -> tuple:
    """Per-node boundary measure: half the length of the incident tag edges.

    Summing the weights over the nodes reproduces the total length of the
    tagged boundary part exactly.
    """
    edges = mesh.edges_with_tag(tag)
    nodes = np.unique(edges)
    lengths = np.linalg.norm(mesh.nodes[edges[:, 1]] - mesh.nodes[edges[:, 0]], axis=1)
    acc = np.zeros(mesh.n_nodes)
    np.add.at(acc, edges[:, 0], 0.5 * lengths)
    np.add.at(acc, edges[:, 1], 0.5 * lengths)
    return nodes, acc[nodes]


def fixed_nodes(mesh: Mesh2D) -> np.ndarray:
    """Nodes lying on any Inflow, Outflow or Wall edge (never displaced)."""
    parts = [
        mesh.nodes_with_tag(BoundaryTag.INFLOW),
        mesh.nodes_with_tag(BoundaryTag.OUTFLOW),
        mesh.nodes_with_tag(BoundaryTag.WALL),
    ]
    return np.unique(np.concatenate(parts))


def check_displacement(mesh: Mesh2D, d: np.ndarray) -> None:
    """Raise if ``d`` is not a valid displacement field for ``mesh``."""
    d = np.asarray(d, dtype=float)
    if d.shape != (mesh.n_nodes, 2):
        raise ValueError(f"displacement shape {d.shape} != {(mesh.n_nodes, 2)}")
    if not np.all(np.isfinite(d)):
        raise ValueError("displacement contains non-finite values")
    fixed = fixed_nodes(mesh)
    if fixed.size and np.any(d[fixed] != 0.0):
        bad = int(fixed[int(np.argmax(np.any(d[fixed] != 0.0, axis=1)))])
        raise ValueError(f"displacement is nonzero at fixed boundary node {bad}")


def deform(mesh: Mesh2D, displacement: np.ndarray, step: float) -> Mesh2D:
    """Move every node by ``step * displacement`` and revalidate.

    Raises InvertedElementError (smallest offending triangle index) if any
    triangle's signed area falls to ``AREA_FLOOR_REL`` times its original
    area or below.
    """
    check_displacement(mesh, displacement)
    moved = Mesh2D(
        mesh.nodes + step * np.asarray(displacement, dtype=float),
        mesh.triangles,
        mesh.boundary_edges,
        mesh.boundary_tags,
    )
    old = signed_areas(mesh)
    new = signed_areas(moved)
    bad = new <= AREA_FLOOR_REL * old
    if bad.any():
        t = int(np.argmax(bad))
        raise InvertedElementError(t, float(new[t]))
    validate(moved)
    return moved


# ---------------------------------------------------------------------------
# serialization

def save_mesh(mesh: Mesh2D) -> bytes:
    """Serialize to the JSON interchange format (exact float round-trip)."""
    doc = {
        "nodes": [[float(x), float(y)] for x, y in mesh.nodes],
        "triangles": [[int(a), int(b), int(c)] for a, b, c in mesh.triangles],
        "boundary": [
            [int(i), int(j), _CODE_TO_TAG[int(code)].value]
            for (i, j), code in zip(mesh.boundary_edges, mesh.boundary_tags)
        ],
    }
    return json.dumps(doc, indent=1).encode()


def load_mesh(data: bytes) -> Mesh2D:
    """Parse and validate a mesh from the JSON interchange format."""
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise MeshValidationError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise MeshValidationError("top level is not an object")
    for key in ("nodes", "triangles", "boundary"):
        if key not in doc:
            raise MeshValidationError(f"missing key '{key}'")
    try:
        nodes = np.array(doc["nodes"], dtype=float)
        triangles = np.array(doc["triangles"], dtype=np.int64)
    except (TypeError, ValueError) as exc:
        raise MeshValidationError(f"malformed nodes or triangles: {exc}") from exc
    if nodes.ndim != 2 or nodes.shape[1] != 2:
        raise MeshValidationError("nodes must be a list of [x, y] pairs")
    if triangles.ndim != 2 or triangles.shape[1] != 3:
        raise MeshValidationError("triangles must be a list of [i, j, k] index triples")
    edges = []
    tags = []
    known = {tag.value: code for tag, code in _TAG_TO_CODE.items()}
    for e, entry in enumerate(doc["boundary"]):
        if not (isinstance(entry, list) and len(entry) == 3):
            raise MeshValidationError(f"boundary entry {e} must be [i, j, tag]")
        i, j, tag = entry
        if not (isinstance(i, int) and isinstance(j, int)):
            raise MeshValidationError(f"boundary entry {e} has non-integer node indices")
        if tag not in known:
            raise MeshValidationError(f"boundary entry {e} has unknown tag '{tag}'")
        edges.append((i, j))
        tags.append(known[tag])
    mesh = Mesh2D(
        nodes,
        triangles,
        np.array(edges, dtype=np.int64).reshape(-1, 2),
        np.array(tags, dtype=np.uint8),
    )
    validate(mesh)
    return mesh


# ---------------------------------------------------------------------------
# generators

def gen_channel(length: float, height: float, nx: int, ny: int) -> Mesh2D:
    """Structured rectangle mesh with alternating (criss-cross) diagonals.

    Left edge Inflow, right edge Outflow, bottom and top Wall.
    """
    if nx < 1 or ny < 1:
        raise ValueError("nx and ny must be >= 1")
    if length <= 0 or height <= 0:
        raise ValueError("length and height must be positive")
    xs = np.linspace(0.0, length, nx + 1)
    ys = np.linspace(0.0, height, ny + 1)
    nid = lambda i, j: i * (ny + 1) + j
    nodes = np.array([[xs[i], ys[j]] for i in range(nx + 1) for j in range(ny + 1)])
    tris = []
    for i in range(nx):
        for j in range(ny):
            a, b = nid(i, j), nid(i + 1, j)
            c, d = nid(i + 1, j + 1), nid(i, j + 1)
            if (i + j) % 2 == 0:
                tris.append((a, b, c))
                tris.append((a, c, d))
            else:
                tris.append((a, b, d))
                tris.append((b, c, d))
    edges = []
    tags = []
    for j in range(ny):  # left, top to bottom ordering not required; keep natural
        edges.append((nid(0, j), nid(0, j + 1)))
        tags.append(_TAG_TO_CODE[BoundaryTag.INFLOW])
        edges.append((nid(nx, j), nid(nx, j + 1)))
        tags.append(_TAG_TO_CODE[BoundaryTag.OUTFLOW])
    for i in range(nx):
        edges.append((nid(i, 0), nid(i + 1, 0)))
        tags.append(_TAG_TO_CODE[BoundaryTag.WALL])
        edges.append((nid(i, ny), nid(i + 1, ny)))
        tags.append(_TAG_TO_CODE[BoundaryTag.WALL])
    mesh = Mesh2D(nodes, np.array(tris), np.array(edges), np.array(tags, dtype=np.uint8))
    validate(mesh)
    return mesh


def _ray_to_rect(c: np.ndarray, theta: float, rect: tuple) -> float:
    """Distance from c along direction theta to the rectangle boundary."""
    x0, y0, x1, y1 = rect
    dx, dy = np.cos(theta), np.sin(theta)
    best = np.inf
    if dx > 1e-15:
        best = min(best, (x1 - c[0]) / dx)
    if dx < -1e-15:
        best = min(best, (x0 - c[0]) / dx)
    if dy > 1e-15:
        best = min(best, (y1 - c[1]) / dy)
    if dy < -1e-15:
        best = min(best, (y0 - c[1]) / dy)
    return float(best)


def gen_rect_with_hole(
    rect: tuple, center: tuple, radius: float, resolution: int,
    first_layer: float | None = None,
) -> tuple:
    """Rectangle with a polygonized circular hole, meshed as a radial O-grid.

    The circle is approximated by an inscribed polygon with exactly
    ``resolution`` vertices; its vertices are connected by rays to the
    rectangle boundary (the four corners are always ray targets so the
    rectangle is covered exactly).  Left edge Inflow, right Outflow, top and
    bottom Wall, hole Free.

    Returns
    -------
    (mesh, defect) : (Mesh2D, float)
        ``defect`` is the polygonization area deficit
        pi r^2 - area(inscribed polygon), which is exactly the difference
        between the ideal domain area and the meshed one.
    """
    x0, y0, x1, y1 = (float(v) for v in rect)
    c = np.array(center, dtype=float)
    if not (x0 < c[0] < x1 and y0 < c[1] < y1):
        raise ValueError("hole center must lie inside the rectangle")
    if radius <= 0:
        raise ValueError("radius must be positive")
    if min(c[0] - x0, x1 - c[0], c[1] - y0, y1 - c[1]) <= radius:
        raise ValueError("hole must not touch the rectangle boundary")
    m = int(resolution)
    if m < 8:
        raise ValueError("resolution must be >= 8")

    # Angular samples: the union of per-arc uniform subdivisions between the
    # corner directions, so every corner lies on a ray.
    corner_pts = np.array([[x1, y1], [x0, y1], [x0, y0], [x1, y0]])
    corner_angles = np.sort(np.arctan2(corner_pts[:, 1] - c[1], corner_pts[:, 0] - c[0]))
    arcs = np.diff(np.append(corner_angles, corner_angles[0] + 2.0 * np.pi))
    ideal = m * arcs / (2.0 * np.pi)
    alloc = np.maximum(1, np.floor(ideal).astype(int))
    while alloc.sum() < m:
        frac = ideal - alloc
        alloc[int(np.argmax(frac))] += 1
    while alloc.sum() > m:  # only possible if floor+max(1,..) overshot
        frac = ideal - alloc
        cand = np.where(alloc > 1, frac, np.inf)
        alloc[int(np.argmin(cand))] -= 1
    thetas = np.concatenate(
        [
            corner_angles[a] + arcs[a] * np.arange(alloc[a]) / alloc[a]
            for a in range(4)
        ]
    )

    ray_len = np.array([_ray_to_rect(c, t, (x0, y0, x1, y1)) for t in thetas])
    nrings = max(3, int(round(resolution / 2)))
    # Per-ray power-law grading: the first layer thickness matches the
    # circumferential spacing at the hole (or the explicit first_layer for a
    # wall-resolved anisotropic mesh), longer rays grade coarser outward.
    h0 = 2.0 * np.pi * radius / m if first_layer is None else float(first_layer)
    if h0 <= 0:
        raise ValueError("first_layer must be positive")
    span = ray_len - radius
    gamma = np.clip(np.log(span / h0) / np.log(nrings), 0.5, 6.0)
    s = np.arange(nrings + 1) / nrings
    t_frac = s[None, :] ** gamma[:, None]  # (m, nrings+1)

    dirs = np.stack([np.cos(thetas), np.sin(thetas)], axis=1)
    nodes = np.empty((m * (nrings + 1), 2))
    for i in range(nrings + 1):
        rr = radius + span * t_frac[:, i]
        nodes[i * m : (i + 1) * m] = c + rr[:, None] * dirs

    nid = lambda i, j: i * m + (j % m)
    tris = []
    for i in range(nrings):
        for j in range(m):
            a, b = nid(i, j), nid(i, j + 1)
            cc, d = nid(i + 1, j + 1), nid(i + 1, j)
            # CCW quad is (a, d, cc, b): radially out, along the outer ring,
            # back in (the domain lies outside the hole).
            if (i + j) % 2 == 0:
                tris.append((a, d, cc))
                tris.append((a, cc, b))
            else:
                tris.append((a, d, b))
                tris.append((d, cc, b))

    edges = []
    tags = []
    for j in range(m):
        edges.append((nid(0, j), nid(0, j + 1)))
        tags.append(_TAG_TO_CODE[BoundaryTag.FREE])
    tol = 1e-9 * max(x1 - x0, y1 - y0)
    for j in range(m):
        a, b = nid(nrings, j), nid(nrings, j + 1)
        mid = 0.5 * (nodes[a] + nodes[b])
        if abs(mid[0] - x0) < tol:
            tag = BoundaryTag.INFLOW
        elif abs(mid[0] - x1) < tol:
            tag = BoundaryTag.OUTFLOW
        elif abs(mid[1] - y0) < tol or abs(mid[1] - y1) < tol:
            tag = BoundaryTag.WALL
        else:
            raise MeshValidationError("outer ring edge not on the rectangle boundary")
        edges.append((a, b))
        tags.append(_TAG_TO_CODE[tag])

    mesh = Mesh2D(nodes, np.array(tris), np.array(edges), np.array(tags, dtype=np.uint8))
    validate(mesh)
    poly_area = 0.5 * radius**2 * float(np.sum(np.sin(np.diff(np.append(thetas, thetas[0] + 2 * np.pi)))))
    defect = np.pi * radius**2 - poly_area
    return mesh, float(defect)


def _graded_cross_positions(width: float, nt: int, wall_layer: float) -> np.ndarray:
    """Symmetric cross-channel coordinates in [-w/2, w/2], geometric growth
    from ``wall_layer`` at each wall toward the centerline."""
    m = nt // 2
    half = 0.5 * width
    # growth ratio q with wall_layer * (q^m - 1)/(q - 1) = half
    lo, hi = 1.0 + 1e-12, 1e3
    for _ in range(200):
        q = 0.5 * (lo + hi)
        s = wall_layer * (q**m - 1.0) / (q - 1.0)
        if s < half:
            lo = q
        else:
            hi = q
    q = 0.5 * (lo + hi)
    widths = wall_layer * q ** np.arange(m)
    widths *= half / widths.sum()
    pos = np.concatenate([[0.0], np.cumsum(widths)])
    return np.concatenate([-half + pos[:-1], half - pos[::-1]])


def gen_bent_channel(
    inlet_x: float = 0.0,
    inlet_y0: float = 2.0,
    inlet_y1: float = 2.35,
    leg1: float = 1.0,
    bend_radius: float = 0.22,
    leg2: float = 1.2,
    ns: int = 56,
    nt: int = 4,
    wall_layer: float | None = None,
) -> Mesh2D:
    """Tube of constant width with a sharp 90-degree downward bend.

    The centerline runs from the inlet midpoint horizontally for ``leg1``,
    turns clockwise through a quarter circle of radius ``bend_radius`` and
    continues straight down for ``leg2``.  Inlet edge Inflow, end edge
    Outflow, both lateral walls Free (they are the optimized boundary; the
    tube ends stay fixed because their nodes lie on Inflow/Outflow edges).

    ``wall_layer`` switches the uniform cross-channel spacing to a
    symmetric geometric grading with that first-cell thickness at each
    wall (requires even nt).
    """
    width = inlet_y1 - inlet_y0
    if width <= 0:
        raise ValueError("inlet_y1 must exceed inlet_y0")
    if bend_radius <= 0.5 * width:
        raise ValueError("bend radius must exceed half the tube width")
    if ns < 3 or nt < 1:
        raise ValueError("ns >= 3 and nt >= 1 required")
    if wall_layer is not None:
        if nt % 2 or nt < 4:
            raise ValueError("wall_layer grading requires even nt >= 4")
        if not 0 < wall_layer < width / nt:
            raise ValueError("wall_layer must be below the uniform spacing")
    arc = 0.5 * np.pi * bend_radius
    total = leg1 + arc + leg2
    start = np.array([inlet_x, 0.5 * (inlet_y0 + inlet_y1)])
    bend_center = start + np.array([leg1, -bend_radius])

    def frame(s: float) -> tuple:
        if s <= leg1:
            pos = start + np.array([s, 0.0])
            tan = np.array([1.0, 0.0])
        elif s <= leg1 + arc:
            alpha = (s - leg1) / bend_radius
            pos = bend_center + bend_radius * np.array([np.sin(alpha), np.cos(alpha)])
            tan = np.array([np.cos(alpha), -np.sin(alpha)])
        else:
            pos = bend_center + np.array([bend_radius, -(s - leg1 - arc)])
            tan = np.array([0.0, -1.0])
        normal = np.array([-tan[1], tan[0]])
        return pos, normal

    if wall_layer is None:
        taus = np.linspace(-0.5 * width, 0.5 * width, nt + 1)
    else:
        taus = _graded_cross_positions(width, nt, wall_layer)
    svals = np.linspace(0.0, total, ns + 1)
    nodes = np.empty(((ns + 1) * (nt + 1), 2))
    for i, s in enumerate(svals):
        pos, nor = frame(float(s))
        for j, tau in enumerate(taus):
            nodes[i * (nt + 1) + j] = pos + tau * nor
    nid = lambda i, j: i * (nt + 1) + j
    tris = []
    for i in range(ns):
        for j in range(nt):
            a, b = nid(i, j), nid(i + 1, j)
            c, d = nid(i + 1, j + 1), nid(i, j + 1)
            if (i + j) % 2 == 0:
                tris.append((a, b, c))
                tris.append((a, c, d))
            else:
                tris.append((a, b, d))
                tris.append((b, c, d))
    edges = []
    tags = []
    for j in range(nt):
        edges.append((nid(0, j), nid(0, j + 1)))
        tags.append(_TAG_TO_CODE[BoundaryTag.INFLOW])
        edges.append((nid(ns, j), nid(ns, j + 1)))
        tags.append(_TAG_TO_CODE[BoundaryTag.OUTFLOW])
    for i in range(ns):
        edges.append((nid(i, 0), nid(i + 1, 0)))
        tags.append(_TAG_TO_CODE[BoundaryTag.FREE])
        edges.append((nid(i, nt), nid(i + 1, nt)))
        tags.append(_TAG_TO_CODE[BoundaryTag.FREE])
    mesh = Mesh2D(nodes, np.array(tris), np.array(edges), np.array(tags, dtype=np.uint8))
    validate(mesh)
    return mesh
