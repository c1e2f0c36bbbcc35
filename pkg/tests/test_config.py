"""Scenario file parsing: strict schema, path-qualified error messages."""

import json

import pytest

import adjflow
from adjflow.config import ConfigError, build_mesh, load_config, parse_config


def minimal_doc():
    return {
        "mesh": {"generator": {"kind": "channel", "length": 3.0, "height": 1.0,
                               "nx": 6, "ny": 2}},
        "flow": {"viscosity": 0.7},
    }


def parse(doc):
    return parse_config(json.dumps(doc))


# -- happy path -------------------------------------------------------------


def test_minimal_document_fills_defaults():
    cfg = parse(minimal_doc())
    assert cfg.flow.viscosity == 0.7
    assert cfg.flow.model == "navier_stokes"
    assert cfg.flow.newton_tol == 1e-10
    assert cfg.flow.newton_max_iters == 25
    assert cfg.flow.continuation_steps == 4
    assert cfg.flow.inflow.coeffs_x == (0.0,)
    assert cfg.mesh_path is None
    assert cfg.mesh_generator == {"kind": "channel", "length": 3.0,
                                  "height": 1.0, "nx": 6, "ny": 2}
    assert cfg.optim is None
    assert cfg.exports == {"vtk": True, "history": True, "report": True}


def test_accepts_bytes_and_str():
    doc = json.dumps(minimal_doc())
    a = parse_config(doc)
    b = parse_config(doc.encode("utf-8"))
    assert a.flow == b.flow


def test_full_document_round_trip():
    doc = minimal_doc()
    doc["flow"].update({
        "inflow": {"coeffs_x": [-0.05, 0.0, 0.2]},
        "traction": {"coeffs_y": [0.7, -1.4]},
        "newton": {"tol": 1e-9, "max_iters": 12, "continuation_steps": 2},
    })
    doc["optimize"] = {
        "step0": 20.0, "multiplier0": 7e-4, "epsilon": 1e-4,
        "target_volume": 1.9, "max_iters": 60, "step_bounds": [1e-3, 150.0],
    }
    doc["output"] = {"vtk": False, "history": True}
    cfg = parse(doc)
    assert cfg.flow.inflow.coeffs_x == (-0.05, 0.0, 0.2)
    assert cfg.flow.traction.coeffs_y == (0.7, -1.4)
    assert cfg.flow.newton_tol == 1e-9
    assert cfg.flow.newton_max_iters == 12
    assert cfg.flow.continuation_steps == 2
    assert cfg.optim.step0 == 20.0
    assert cfg.optim.multiplier0 == 7e-4
    assert cfg.optim.epsilon == 1e-4
    assert cfg.optim.target_volume == 1.9
    assert cfg.optim.max_iters == 60
    assert cfg.optim.step_min == 1e-3
    assert cfg.optim.step_max == 150.0
    assert cfg.exports == {"vtk": False, "history": True, "report": True}


def test_target_volume_null_means_preserve_initial():
    doc = minimal_doc()
    doc["optimize"] = {"step0": 1.0, "max_iters": 5, "target_volume": None}
    assert parse(doc).optim.target_volume is None


def test_config_error_is_a_value_error():
    assert issubclass(ConfigError, ValueError)


# -- malformed documents ----------------------------------------------------


def test_rejects_invalid_json():
    with pytest.raises(ConfigError, match="not valid JSON"):
        parse_config("{nope")


def test_rejects_non_object_top_level():
    with pytest.raises(ConfigError, match=r"\(top level\): expected an object"):
        parse_config("[1, 2]")


def test_rejects_unknown_top_level_key():
    doc = minimal_doc()
    doc["solver"] = {}
    with pytest.raises(ConfigError, match="solver: unknown key"):
        parse(doc)


@pytest.mark.parametrize("section", ["mesh", "flow"])
def test_rejects_missing_required_section(section):
    doc = minimal_doc()
    del doc[section]
    with pytest.raises(ConfigError, match=f"{section}: missing required section"):
        parse(doc)


def test_rejects_mesh_with_both_sources():
    doc = minimal_doc()
    doc["mesh"]["path"] = "m.json"
    with pytest.raises(ConfigError, match="exactly one of 'path' or 'generator'"):
        parse(doc)


def test_rejects_mesh_with_neither_source():
    doc = minimal_doc()
    doc["mesh"] = {}
    with pytest.raises(ConfigError, match="exactly one of"):
        parse(doc)


def test_rejects_empty_mesh_path():
    doc = minimal_doc()
    doc["mesh"] = {"path": ""}
    with pytest.raises(ConfigError, match="mesh.path: expected a non-empty string"):
        parse(doc)


def test_rejects_unknown_generator_kind():
    doc = minimal_doc()
    doc["mesh"]["generator"] = {"kind": "torus"}
    with pytest.raises(ConfigError, match="unknown generator 'torus'"):
        parse(doc)


def test_rejects_missing_generator_kind():
    doc = minimal_doc()
    doc["mesh"]["generator"] = {"length": 1.0}
    with pytest.raises(ConfigError, match="mesh.generator.kind: missing required value"):
        parse(doc)


def test_rejects_generator_key_from_wrong_kind():
    doc = minimal_doc()
    doc["mesh"]["generator"]["radius"] = 0.2
    with pytest.raises(ConfigError, match="mesh.generator.radius: unknown key"):
        parse(doc)


def test_rejects_channel_missing_dimension():
    doc = minimal_doc()
    del doc["mesh"]["generator"]["nx"]
    with pytest.raises(ConfigError, match="mesh.generator.nx: missing required value"):
        parse(doc)


def test_rejects_bad_rect_array():
    doc = minimal_doc()
    doc["mesh"]["generator"] = {"kind": "rect_with_hole", "rect": [0, 0, 1],
                                "center": [0.5, 0.5], "radius": 0.1,
                                "resolution": 16}
    with pytest.raises(ConfigError, match="expected an array of 4 numbers"):
        parse(doc)


def test_rejects_too_coarse_hole_resolution():
    doc = minimal_doc()
    doc["mesh"]["generator"] = {"kind": "rect_with_hole",
                                "rect": [-0.5, -0.5, 1.5, 1.5],
                                "center": [0.0, 0.0], "radius": 0.2,
                                "resolution": 4}
    with pytest.raises(ConfigError, match="mesh.generator.resolution: must be >= 8"):
        parse(doc)


def test_rejects_missing_viscosity():
    doc = minimal_doc()
    doc["flow"] = {}
    with pytest.raises(ConfigError, match="flow.viscosity: missing required value"):
        parse(doc)


@pytest.mark.parametrize("bad, message", [
    (0.0, "must be positive"),
    (-1.0, "must be positive"),
    (True, "expected a number"),
    ("thick", "expected a number"),
])
def test_rejects_bad_viscosity(bad, message):
    doc = minimal_doc()
    doc["flow"]["viscosity"] = bad
    with pytest.raises(ConfigError, match=f"flow.viscosity: {message}"):
        parse(doc)


def test_rejects_empty_coefficient_array():
    doc = minimal_doc()
    doc["flow"]["inflow"] = {"coeffs_x": []}
    with pytest.raises(ConfigError,
                       match="flow.inflow.coeffs_x: expected a non-empty array"):
        parse(doc)


def test_rejects_non_numeric_coefficient():
    doc = minimal_doc()
    doc["flow"]["inflow"] = {"coeffs_x": [0.0, "fast"]}
    with pytest.raises(ConfigError, match=r"flow.inflow.coeffs_x\[1\]: expected a number"):
        parse(doc)


def test_rejects_unknown_newton_key():
    doc = minimal_doc()
    doc["flow"]["newton"] = {"damping": 0.5}
    with pytest.raises(ConfigError, match="flow.newton.damping: unknown key"):
        parse(doc)


def test_rejects_negative_continuation():
    doc = minimal_doc()
    doc["flow"]["newton"] = {"continuation_steps": -1}
    with pytest.raises(ConfigError, match="flow.newton.continuation_steps: must be >= 0"):
        parse(doc)


def test_rejects_optimize_without_step0():
    doc = minimal_doc()
    doc["optimize"] = {"max_iters": 5}
    with pytest.raises(ConfigError, match="optimize.step0: missing required value"):
        parse(doc)


def test_rejects_short_step_bounds():
    doc = minimal_doc()
    doc["optimize"] = {"step0": 1.0, "max_iters": 5, "step_bounds": [0.1]}
    with pytest.raises(ConfigError,
                       match="optimize.step_bounds: expected an array of 2 numbers"):
        parse(doc)


def test_rejects_inverted_step_bounds():
    doc = minimal_doc()
    doc["optimize"] = {"step0": 1.0, "max_iters": 5, "step_bounds": [2.0, 0.5]}
    with pytest.raises(ConfigError, match="optimize.*step_min <= step0 <= step_max"):
        parse(doc)


def test_rejects_negative_target_volume():
    doc = minimal_doc()
    doc["optimize"] = {"step0": 1.0, "max_iters": 5, "target_volume": -1.9}
    with pytest.raises(ConfigError, match="optimize.target_volume: must be positive"):
        parse(doc)


def test_rejects_non_boolean_output_flag():
    doc = minimal_doc()
    doc["output"] = {"vtk": 1}
    with pytest.raises(ConfigError, match="output.vtk: expected true or false"):
        parse(doc)


def test_rejects_unknown_output_key():
    doc = minimal_doc()
    doc["output"] = {"plots": True}
    with pytest.raises(ConfigError, match="output.plots: unknown key"):
        parse(doc)


# -- file loading and mesh materialization ----------------------------------


def test_load_config_reads_file(tmp_path):
    p = tmp_path / "run.json"
    p.write_text(json.dumps(minimal_doc()))
    cfg = load_config(p)
    assert cfg.flow.viscosity == 0.7


def test_build_mesh_from_generator():
    cfg = parse(minimal_doc())
    mesh = build_mesh(cfg)
    ref = adjflow.gen_channel(3.0, 1.0, 6, 2)
    assert mesh.nodes.shape == ref.nodes.shape
    assert (mesh.triangles == ref.triangles).all()


def test_build_mesh_from_hole_generator_drops_defect():
    doc = minimal_doc()
    doc["mesh"]["generator"] = {"kind": "rect_with_hole",
                                "rect": [-0.5, -0.5, 1.5, 1.5],
                                "center": [0.0, 0.0], "radius": 0.2,
                                "resolution": 16}
    mesh = build_mesh(parse(doc))
    assert isinstance(mesh, adjflow.Mesh2D)


def test_build_mesh_resolves_relative_path(tmp_path):
    mesh = adjflow.gen_channel(1.0, 1.0, 2, 2)
    (tmp_path / "square.json").write_bytes(adjflow.save_mesh(mesh))
    doc = {"mesh": {"path": "square.json"}, "flow": {"viscosity": 1.0}}
    cfg = parse(doc)
    loaded = build_mesh(cfg, base_dir=tmp_path)
    assert (loaded.nodes == mesh.nodes).all()


def test_build_mesh_bent_channel_defaults():
    doc = minimal_doc()
    doc["mesh"]["generator"] = {"kind": "bent_channel", "ns": 16, "nt": 2}
    mesh = build_mesh(parse(doc))
    ref = adjflow.gen_bent_channel(ns=16, nt=2)
    assert (mesh.nodes == ref.nodes).all()
