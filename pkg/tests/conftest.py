"""Shared fixtures: small meshes and flow setups reused across the suite."""

import numpy as np
import pytest

import adjflow
from adjflow.mesh import BoundaryTag, Mesh2D


@pytest.fixture(scope="session")
def square8():
    """Unit square split into 8 triangles (criss-cross 2x2)."""
    return adjflow.gen_channel(1.0, 1.0, 2, 2)


@pytest.fixture(scope="session")
def channel_coarse():
    return adjflow.gen_channel(3.0, 1.0, 12, 4)


@pytest.fixture(scope="session")
def body_coarse():
    """Small flow-past-a-body mesh for loop-level tests."""
    mesh, _ = adjflow.gen_rect_with_hole((-0.5, -0.5, 1.5, 1.5), (0.0, 0.0), 0.2, 16)
    return mesh


@pytest.fixture(scope="session")
def bent_coarse():
    return adjflow.gen_bent_channel(ns=16, nt=2)


def reference_triangle() -> Mesh2D:
    """Single triangle (0,0)-(1,0)-(0,1), all edges tagged Wall."""
    nodes = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    tris = np.array([[0, 1, 2]])
    edges = np.array([[0, 1], [1, 2], [2, 0]])
    tags = np.full(3, 2, dtype=np.uint8)  # wall
    return Mesh2D(nodes, tris, edges, tags)


def poiseuille_config(nu: float = 0.7) -> adjflow.FlowConfig:
    """Channel flow with the exact parabolic profile and the traction that
    makes the analytic solution y=(y(1-y),0), p=2 nu (3-x) hold on [0,3]x[0,1]."""
    return adjflow.FlowConfig(
        viscosity=nu,
        inflow=adjflow.BoundaryPolynomial((0.0, 1.0, -1.0), (0.0,)),
        traction=adjflow.BoundaryPolynomial((0.0,), (nu, -2.0 * nu)),
    )


def body_config(nu: float = 0.004) -> adjflow.FlowConfig:
    """External-flow setup: quadratic inflow profile 0.2 y^2 - 0.05."""
    return adjflow.FlowConfig(
        viscosity=nu,
        inflow=adjflow.BoundaryPolynomial((-0.05, 0.0, 0.2), (0.0,)),
    )


def cannula_config(nu: float = 0.1071875, model: str = "navier_stokes") -> adjflow.FlowConfig:
    """Bent-tube setup: inflow (y-2)(2.35-y) across the inlet."""
    return adjflow.FlowConfig(
        viscosity=nu,
        model=model,
        inflow=adjflow.BoundaryPolynomial((-4.7, 4.35, -1.0), (0.0,)),
    )


def free_constant_probe(mesh: Mesh2D) -> np.ndarray:
    """Unit-inward-normal data on Free, extended by the descent smoother."""
    from adjflow.shape_opt import BoundaryGradient, smooth_descent
    from adjflow.mesh import boundary_node_weights, boundary_normals

    nodes, normals = boundary_normals(mesh, BoundaryTag.FREE)
    _, weights = boundary_node_weights(mesh, BoundaryTag.FREE)
    return smooth_descent(mesh, BoundaryGradient(nodes, np.ones(nodes.size), normals, weights))
