"""Command-line front end.

Subcommands: solve, adjoint, energy, gradcheck, optimize, mesh.  Every run
is driven by a JSON scenario file (except ``mesh``, which is flag-driven);
outputs land in the directory given with ``-o`` and are written atomically.

Exit codes: 0 success, 2 configuration error, 3 solver failure, 4 I/O
failure.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from .adjoint import adjoint_residual, solve_adjoint
from .config import ConfigError, RunConfig, build_mesh, load_config
from .export import export_history_csv, export_report, export_vtk, write_bytes_atomic
from .fem import SingularSystemError
from .flow import NewtonDivergedError, dissipated_energy, residual_norm, solve_flow
from .mesh import (
    BoundaryTag,
    InvertedElementError,
    MeshValidationError,
    boundary_normals,
    boundary_node_weights,
    gen_bent_channel,
    gen_channel,
    gen_rect_with_hole,
    save_mesh,
    volume,
)
from .shape_opt import BoundaryGradient, gradient_check, optimize, smooth_descent


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adjflow",
        description="Dissipated-energy shape optimization for steady incompressible flow.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_run(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("-c", "--config", required=True, help="scenario JSON file")
        p.add_argument("-o", "--outdir", default=".", help="output directory (default: .)")
        return p

    add_run("solve", "solve the flow problem, export state fields and a report")
    add_run("adjoint", "solve flow + adjoint, export adjoint fields and a report")
    add_run("energy", "solve the flow problem and report the dissipated energy")
    p = add_run("gradcheck", "finite-difference check of the boundary shape gradient")
    p.add_argument("--t", nargs="+", type=float, default=[1e-2, 5e-3, 2.5e-3],
                   help="finite-difference step sizes")
    add_run("optimize", "run the shape optimization loop, export history and final mesh")

    m = sub.add_parser("mesh", help="generate a mesh file")
    m.add_argument("--gen", required=True, choices=["channel", "rect_with_hole", "bent_channel"])
    m.add_argument("-o", "--out", required=True, help="output mesh JSON file")
    m.add_argument("--length", type=float)
    m.add_argument("--height", type=float)
    m.add_argument("--nx", type=int)
    m.add_argument("--ny", type=int)
    m.add_argument("--rect", nargs=4, type=float, metavar=("X0", "Y0", "X1", "Y1"))
    m.add_argument("--center", nargs=2, type=float, metavar=("CX", "CY"))
    m.add_argument("--radius", type=float)
    m.add_argument("--resolution", type=int)
    m.add_argument("--inlet-x", type=float)
    m.add_argument("--inlet-y0", type=float)
    m.add_argument("--inlet-y1", type=float)
    m.add_argument("--leg1", type=float)
    m.add_argument("--leg2", type=float)
    m.add_argument("--bend-radius", type=float)
    m.add_argument("--ns", type=int)
    m.add_argument("--nt", type=int)
    return parser


def _load(args) -> tuple:
    config = load_config(args.config)
    mesh = build_mesh(config, base_dir=Path(args.config).parent)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    return config, mesh, outdir


def _state_report(mesh, state, config: RunConfig) -> dict:
    return {
        "J": float(dissipated_energy(mesh, state, config.flow.viscosity)),
        "residual": float(residual_norm(mesh, state, config.flow)),
        "newton_iters": int(state.newton_iters),
        "n_nodes": int(mesh.n_nodes),
        "n_triangles": int(mesh.n_triangles),
        "volume": float(volume(mesh)),
    }


def _cmd_solve(args) -> int:
    config, mesh, outdir = _load(args)
    state = solve_flow(mesh, config.flow)
    if config.exports["vtk"]:
        export_vtk(mesh, {"velocity": state.velocity, "pressure": state.pressure},
                   outdir / "state.vtk")
    report = _state_report(mesh, state, config)
    if config.exports["report"]:
        export_report(report, outdir / "report.json")
    print(f"J = {report['J']:.12e}  (newton iterations: {report['newton_iters']})")
    return 0


def _cmd_adjoint(args) -> int:
    config, mesh, outdir = _load(args)
    state = solve_flow(mesh, config.flow)
    adj = solve_adjoint(mesh, state, config.flow)
    if config.exports["vtk"]:
        export_vtk(mesh, {"velocity": state.velocity, "pressure": state.pressure,
                          "adjoint_velocity": adj.velocity, "adjoint_pressure": adj.pressure},
                   outdir / "adjoint.vtk")
    report = _state_report(mesh, state, config)
    report["adjoint_residual"] = float(adjoint_residual(mesh, state, adj, config.flow))
    if config.exports["report"]:
        export_report(report, outdir / "report.json")
    print(f"J = {report['J']:.12e}  adjoint residual = {report['adjoint_residual']:.3e}")
    return 0


def _cmd_energy(args) -> int:
    config, mesh, outdir = _load(args)
    state = solve_flow(mesh, config.flow)
    report = _state_report(mesh, state, config)
    if config.exports["report"]:
        export_report(report, outdir / "report.json")
    print(f"J = {report['J']:.12e}")
    return 0


def default_probe_field(mesh) -> np.ndarray:
    """Canonical smooth test displacement: inward unit-normal data on the
    Free boundary, extended by the same smoother the descent update uses."""
    nodes, normals = boundary_normals(mesh, BoundaryTag.FREE)
    _, weights = boundary_node_weights(mesh, BoundaryTag.FREE)
    probe = BoundaryGradient(nodes, np.ones(nodes.size), normals, weights)
    return smooth_descent(mesh, probe)


def _cmd_gradcheck(args) -> int:
    config, mesh, outdir = _load(args)
    field = default_probe_field(mesh)
    report = gradient_check(mesh, config.flow, field, tuple(args.t))
    doc = {
        "analytic": float(report.analytic),
        "t": [float(t) for t in report.t_values],
        "fd": [float(v) for v in report.fd_values],
        "rel_errors": [float(e) for e in report.rel_errors],
        "orders": [float(o) for o in report.orders],
    }
    if config.exports["report"]:
        export_report(doc, outdir / "gradcheck.json")
    print(f"analytic derivative = {report.analytic:.12e}")
    for t, fd, err in zip(report.t_values, report.fd_values, report.rel_errors):
        print(f"t = {t:g}: finite difference = {fd:.12e}, relative error = {err:.3e}")
    return 0


def _cmd_optimize(args) -> int:
    config, mesh, outdir = _load(args)
    if config.optim is None:
        raise ConfigError("optimize: missing required section")
    initial_state = solve_flow(mesh, config.flow)
    initial_j = dissipated_energy(mesh, initial_state, config.flow.viscosity)
    final_mesh, history = optimize(mesh, config.flow, config.optim)
    if config.exports["history"]:
        export_history_csv(history, outdir / "history.csv")
    write_bytes_atomic(outdir / "mesh_final.json", save_mesh(final_mesh))
    final_state = solve_flow(final_mesh, config.flow)
    final_j = dissipated_energy(final_mesh, final_state, config.flow.viscosity)
    if config.exports["vtk"]:
        export_vtk(final_mesh,
                   {"velocity": final_state.velocity, "pressure": final_state.pressure},
                   outdir / "state_final.vtk")
    accepted = sum(1 for r in history if r.accepted)
    report = {
        "initial_J": float(initial_j),
        "final_J": float(final_j),
        "reduction_percent": float(100.0 * (initial_j - final_j) / initial_j) if initial_j else 0.0,
        "iterations": len(history),
        "accepted": accepted,
        "initial_volume": float(volume(mesh)),
        "final_volume": float(volume(final_mesh)),
    }
    if config.exports["report"]:
        export_report(report, outdir / "optimize.json")
    print(f"J: {initial_j:.12e} -> {final_j:.12e}  "
          f"({report['reduction_percent']:.2f}% reduction, "
          f"{accepted}/{len(history)} iterations accepted)")
    return 0


def _require(args, names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        raise ConfigError(f"mesh --gen {args.gen}: missing required "
                          f"flag(s) {', '.join('--' + m for m in missing)}")


def _cmd_mesh(args) -> int:
    if args.gen == "channel":
        _require(args, ["length", "height", "nx", "ny"])
        mesh = gen_channel(args.length, args.height, args.nx, args.ny)
    elif args.gen == "rect_with_hole":
        _require(args, ["rect", "center", "radius", "resolution"])
        mesh, defect = gen_rect_with_hole(tuple(args.rect), tuple(args.center),
                                          args.radius, args.resolution)
        print(f"hole polygonization area defect: {defect:.6e}")
    else:
        kwargs = {}
        for flag, name in (("inlet_x", "inlet_x"), ("inlet_y0", "inlet_y0"),
                           ("inlet_y1", "inlet_y1"), ("leg1", "leg1"),
                           ("bend_radius", "bend_radius"), ("leg2", "leg2"),
                           ("ns", "ns"), ("nt", "nt")):
            v = getattr(args, flag)
            if v is not None:
                kwargs[name] = v
        mesh = gen_bent_channel(**kwargs)
    out = Path(args.out)
    if out.parent and not out.parent.exists():
        out.parent.mkdir(parents=True, exist_ok=True)
    write_bytes_atomic(out, save_mesh(mesh))
    print(f"wrote {out} ({mesh.n_nodes} nodes, {mesh.n_triangles} triangles)")
    return 0


_COMMANDS = {
    "solve": _cmd_solve,
    "adjoint": _cmd_adjoint,
    "energy": _cmd_energy,
    "gradcheck": _cmd_gradcheck,
    "optimize": _cmd_optimize,
    "mesh": _cmd_mesh,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, MeshValidationError, ValueError) as exc:
        print(f"error (config): {exc}", file=sys.stderr)
        return 2
    except (NewtonDivergedError, SingularSystemError, InvertedElementError) as exc:
        print(f"error (solver): {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error (io): {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
