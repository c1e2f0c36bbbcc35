"""Command-line front end, exercised in process through main()."""

import json

import pytest

import adjflow
from adjflow.cli import main
from adjflow.export import HISTORY_HEADER


def channel_doc():
    return {
        "mesh": {"generator": {"kind": "channel", "length": 3.0, "height": 1.0,
                               "nx": 12, "ny": 4}},
        "flow": {"viscosity": 0.7,
                 "inflow": {"coeffs_x": [0.0, 1.0, -1.0]},
                 "traction": {"coeffs_y": [0.7, -1.4]}},
    }


def body_doc():
    return {
        "mesh": {"generator": {"kind": "rect_with_hole",
                               "rect": [-0.5, -0.5, 1.5, 1.5],
                               "center": [0.0, 0.0], "radius": 0.2,
                               "resolution": 16}},
        "flow": {"viscosity": 0.004,
                 "inflow": {"coeffs_x": [-0.05, 0.0, 0.2]}},
    }


def write(tmp_path, doc, name="run.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def test_solve_writes_state_and_report(tmp_path, capsys):
    cfg = write(tmp_path, channel_doc())
    out = tmp_path / "out"
    assert main(["solve", "-c", str(cfg), "-o", str(out)]) == 0
    assert (out / "state.vtk").exists()
    report = json.loads((out / "report.json").read_text())
    assert 0.6 <= report["J"] <= 0.7
    assert report["residual"] <= 1e-9
    assert report["newton_iters"] == 1
    assert report["n_triangles"] == 96
    assert report["volume"] == pytest.approx(3.0, rel=1e-12)
    assert "J = " in capsys.readouterr().out


def test_energy_reports_without_vtk(tmp_path, capsys):
    cfg = write(tmp_path, channel_doc())
    out = tmp_path / "out"
    assert main(["energy", "-c", str(cfg), "-o", str(out)]) == 0
    assert (out / "report.json").exists()
    assert not (out / "state.vtk").exists()
    assert capsys.readouterr().out.startswith("J = ")


def test_adjoint_writes_fields_and_residual(tmp_path):
    cfg = write(tmp_path, channel_doc())
    out = tmp_path / "out"
    assert main(["adjoint", "-c", str(cfg), "-o", str(out)]) == 0
    doc = (out / "adjoint.vtk").read_text()
    assert "VECTORS adjoint_velocity double" in doc
    report = json.loads((out / "report.json").read_text())
    assert report["adjoint_residual"] <= 1e-10


def test_output_flags_suppress_files(tmp_path):
    doc = channel_doc()
    doc["output"] = {"vtk": False, "report": False}
    cfg = write(tmp_path, doc)
    out = tmp_path / "out"
    assert main(["solve", "-c", str(cfg), "-o", str(out)]) == 0
    assert list(out.iterdir()) == []


def test_gradcheck_writes_structured_report(tmp_path, capsys):
    cfg = write(tmp_path, body_doc())
    out = tmp_path / "out"
    assert main(["gradcheck", "-c", str(cfg), "-o", str(out), "--t", "0.05"]) == 0
    doc = json.loads((out / "gradcheck.json").read_text())
    assert set(doc) == {"analytic", "t", "fd", "rel_errors", "orders"}
    assert doc["t"] == [0.05]
    assert len(doc["fd"]) == 1 and doc["orders"] == []
    assert "finite difference" in capsys.readouterr().out


def test_optimize_writes_history_mesh_and_report(tmp_path, capsys):
    doc = body_doc()
    doc["optimize"] = {"step0": 100.0, "max_iters": 3, "step_bounds": [1e-3, 1e4]}
    cfg = write(tmp_path, doc)
    out = tmp_path / "out"
    assert main(["optimize", "-c", str(cfg), "-o", str(out)]) == 0

    lines = (out / "history.csv").read_text().splitlines()
    assert lines[0] == HISTORY_HEADER
    assert len(lines) == 4

    final = adjflow.load_mesh((out / "mesh_final.json").read_bytes())
    assert final.n_triangles == 256

    assert (out / "state_final.vtk").exists()
    report = json.loads((out / "optimize.json").read_text())
    assert set(report) == {"initial_J", "final_J", "reduction_percent",
                           "iterations", "accepted", "initial_volume",
                           "final_volume"}
    assert report["iterations"] == 3
    assert 1 <= report["accepted"] <= 3
    assert report["final_J"] < report["initial_J"]
    assert "% reduction" in capsys.readouterr().out


def test_optimize_history_is_bit_identical_across_runs(tmp_path):
    doc = body_doc()
    doc["optimize"] = {"step0": 100.0, "max_iters": 3, "step_bounds": [1e-3, 1e4]}
    cfg = write(tmp_path, doc)
    for d in ("a", "b"):
        assert main(["optimize", "-c", str(cfg), "-o", str(tmp_path / d)]) == 0
    assert (tmp_path / "a/history.csv").read_bytes() == (tmp_path / "b/history.csv").read_bytes()


def test_optimize_requires_optimize_section(tmp_path, capsys):
    cfg = write(tmp_path, body_doc())
    assert main(["optimize", "-c", str(cfg), "-o", str(tmp_path / "out")]) == 2
    assert "error (config): optimize: missing required section" in capsys.readouterr().err


def test_bad_scenario_exits_2(tmp_path, capsys):
    doc = channel_doc()
    doc["flow"]["viscosity"] = -1.0
    cfg = write(tmp_path, doc)
    assert main(["solve", "-c", str(cfg), "-o", str(tmp_path / "out")]) == 2
    assert capsys.readouterr().err.startswith("error (config): flow.viscosity")


def test_missing_mesh_file_exits_4(tmp_path, capsys):
    doc = {"mesh": {"path": "missing.json"}, "flow": {"viscosity": 1.0}}
    cfg = write(tmp_path, doc)
    assert main(["solve", "-c", str(cfg), "-o", str(tmp_path / "out")]) == 4
    assert capsys.readouterr().err.startswith("error (io):")


def test_corrupt_mesh_file_exits_2(tmp_path, capsys):
    (tmp_path / "m.json").write_text("{}")
    doc = {"mesh": {"path": "m.json"}, "flow": {"viscosity": 1.0}}
    cfg = write(tmp_path, doc)
    assert main(["solve", "-c", str(cfg), "-o", str(tmp_path / "out")]) == 2
    assert "missing key 'nodes'" in capsys.readouterr().err


def test_newton_divergence_exits_3(tmp_path, capsys):
    doc = body_doc()
    doc["flow"]["newton"] = {"max_iters": 1, "continuation_steps": 0}
    cfg = write(tmp_path, doc)
    assert main(["solve", "-c", str(cfg), "-o", str(tmp_path / "out")]) == 3
    assert capsys.readouterr().err.startswith("error (solver): no convergence")


def test_mesh_subcommand_channel(tmp_path, capsys):
    out = tmp_path / "nested" / "c.json"
    rc = main(["mesh", "--gen", "channel", "--length", "3", "--height", "1",
               "--nx", "6", "--ny", "2", "-o", str(out)])
    assert rc == 0
    mesh = adjflow.load_mesh(out.read_bytes())
    assert mesh.n_nodes == 21 and mesh.n_triangles == 24
    assert "wrote" in capsys.readouterr().out


def test_mesh_subcommand_reports_hole_defect(tmp_path, capsys):
    out = tmp_path / "b.json"
    rc = main(["mesh", "--gen", "rect_with_hole", "--rect", "-0.5", "-0.5",
               "1.5", "1.5", "--center", "0", "0", "--radius", "0.2",
               "--resolution", "16", "-o", str(out)])
    assert rc == 0
    assert "area defect" in capsys.readouterr().out


def test_mesh_subcommand_bent_defaults(tmp_path, capsys):
    out = tmp_path / "bent.json"
    assert main(["mesh", "--gen", "bent_channel", "-o", str(out)]) == 0
    mesh = adjflow.load_mesh(out.read_bytes())
    assert mesh.n_triangles == 448
    assert "(285 nodes, 448 triangles)" in capsys.readouterr().out


def test_mesh_subcommand_missing_flags_exit_2(tmp_path, capsys):
    rc = main(["mesh", "--gen", "channel", "--length", "3",
               "-o", str(tmp_path / "c.json")])
    assert rc == 2
    err = capsys.readouterr().err
    assert "missing required flag(s)" in err
    assert "--height" in err and "--nx" in err and "--ny" in err
