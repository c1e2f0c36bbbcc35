"""Run configuration: strict JSON schema for the command-line front end.

Every key is checked; unknown keys and wrong types fail with the JSON path
of the offending field, so a typo in a scenario file cannot silently fall
back to a default.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

from .flow import BoundaryPolynomial, FlowConfig
from .mesh import Mesh2D, gen_bent_channel, gen_channel, gen_rect_with_hole, load_mesh
from .shape_opt import OptimConfig


class ConfigError(ValueError):
    """Invalid run configuration; the message names the JSON path."""


def _fail(path: str, msg: str):
    raise ConfigError(f"{path}: {msg}")


def _object(value, path: str) -> dict:
    if not isinstance(value, dict):
        _fail(path, "expected an object")
    return value


def _check_keys(obj: dict, path: str, allowed):
    for key in obj:
        if key not in allowed:
            _fail(f"{path}.{key}" if path else str(key), "unknown key")


def _number(obj: dict, path: str, key: str, default=None, *, required=False,
            positive=False, nonnegative=False, nullable=False):
    if key not in obj:
        if required:
            _fail(f"{path}.{key}", "missing required value")
        return default
    v = obj[key]
    if v is None and nullable:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        _fail(f"{path}.{key}", "expected a number")
    v = float(v)
    if positive and v <= 0:
        _fail(f"{path}.{key}", "must be positive")
    if nonnegative and v < 0:
        _fail(f"{path}.{key}", "must be >= 0")
    return v


def _integer(obj: dict, path: str, key: str, default=None, *, required=False, minimum=None):
    if key not in obj:
        if required:
            _fail(f"{path}.{key}", "missing required value")
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, int):
        _fail(f"{path}.{key}", "expected an integer")
    if minimum is not None and v < minimum:
        _fail(f"{path}.{key}", f"must be >= {minimum}")
    return int(v)


def _boolean(obj: dict, path: str, key: str, default: bool) -> bool:
    if key not in obj:
        return default
    v = obj[key]
    if not isinstance(v, bool):
        _fail(f"{path}.{key}", "expected true or false")
    return v


def _coeffs(obj: dict, path: str, key: str) -> tuple:
    if key not in obj:
        return (0.0,)
    v = obj[key]
    if not isinstance(v, list) or not v:
        _fail(f"{path}.{key}", "expected a non-empty array of numbers")
    out = []
    for i, c in enumerate(v):
        if isinstance(c, bool) or not isinstance(c, (int, float)):
            _fail(f"{path}.{key}[{i}]", "expected a number")
        out.append(float(c))
    return tuple(out)


def _polynomial(obj: dict, path: str, key: str) -> BoundaryPolynomial:
    if key not in obj:
        return BoundaryPolynomial()
    sub = _object(obj[key], f"{path}.{key}")
    _check_keys(sub, f"{path}.{key}", ("coeffs_x", "coeffs_y"))
    return BoundaryPolynomial(
        coeffs_x=_coeffs(sub, f"{path}.{key}", "coeffs_x"),
        coeffs_y=_coeffs(sub, f"{path}.{key}", "coeffs_y"),
    )


_GENERATOR_KEYS = {
    "channel": ("kind", "length", "height", "nx", "ny"),
    "rect_with_hole": ("kind", "rect", "center", "radius", "resolution"),
    "bent_channel": ("kind", "inlet_x", "inlet_y0", "inlet_y1", "leg1",
                     "bend_radius", "leg2", "ns", "nt"),
}


def _generator(obj: dict, path: str) -> dict:
    if "kind" not in obj:
        _fail(f"{path}.kind", "missing required value")
    kind = obj["kind"]
    if kind not in _GENERATOR_KEYS:
        _fail(f"{path}.kind", f"unknown generator '{kind}' "
              f"(expected one of {', '.join(sorted(_GENERATOR_KEYS))})")
    _check_keys(obj, path, _GENERATOR_KEYS[kind])
    spec = {"kind": kind}
    if kind == "channel":
        spec["length"] = _number(obj, path, "length", required=True, positive=True)
        spec["height"] = _number(obj, path, "height", required=True, positive=True)
        spec["nx"] = _integer(obj, path, "nx", required=True, minimum=1)
        spec["ny"] = _integer(obj, path, "ny", required=True, minimum=1)
    elif kind == "rect_with_hole":
        for key, size in (("rect", 4), ("center", 2)):
            if key not in obj:
                _fail(f"{path}.{key}", "missing required value")
            v = obj[key]
            if (not isinstance(v, list) or len(v) != size
                    or any(isinstance(c, bool) or not isinstance(c, (int, float)) for c in v)):
                _fail(f"{path}.{key}", f"expected an array of {size} numbers")
            spec[key] = tuple(float(c) for c in v)
        spec["radius"] = _number(obj, path, "radius", required=True, positive=True)
        spec["resolution"] = _integer(obj, path, "resolution", required=True, minimum=8)
    else:
        for key in ("inlet_x", "inlet_y0", "inlet_y1", "leg1", "bend_radius", "leg2"):
            v = _number(obj, path, key)
            if v is not None:
                spec[key] = v
        for key in ("ns", "nt"):
            v = _integer(obj, path, key, minimum=1)
            if v is not None:
                spec[key] = v
    return spec


@dataclass
class RunConfig:
    """Validated contents of a scenario file."""

    flow: FlowConfig
    mesh_path: str | None = None
    mesh_generator: dict | None = None
    optim: OptimConfig | None = None
    exports: dict = field(default_factory=lambda: {"vtk": True, "history": True, "report": True})


def parse_config(data) -> RunConfig:
    """Parse and validate a scenario document (bytes or str of JSON)."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"not valid JSON: {exc}") from exc
    doc = _object(doc, "(top level)")
    _check_keys(doc, "", ("mesh", "flow", "optimize", "output"))

    if "mesh" not in doc:
        _fail("mesh", "missing required section")
    mesh_obj = _object(doc["mesh"], "mesh")
    _check_keys(mesh_obj, "mesh", ("path", "generator"))
    has_path = "path" in mesh_obj
    has_gen = "generator" in mesh_obj
    if has_path == has_gen:
        _fail("mesh", "exactly one of 'path' or 'generator' is required")
    mesh_path = None
    mesh_generator = None
    if has_path:
        if not isinstance(mesh_obj["path"], str) or not mesh_obj["path"]:
            _fail("mesh.path", "expected a non-empty string")
        mesh_path = mesh_obj["path"]
    else:
        mesh_generator = _generator(_object(mesh_obj["generator"], "mesh.generator"),
                                    "mesh.generator")

    if "flow" not in doc:
        _fail("flow", "missing required section")
    flow_obj = _object(doc["flow"], "flow")
    _check_keys(flow_obj, "flow", ("viscosity", "inflow", "traction", "newton"))
    viscosity = _number(flow_obj, "flow", "viscosity", required=True, positive=True)
    newton = {}
    if "newton" in flow_obj:
        nobj = _object(flow_obj["newton"], "flow.newton")
        _check_keys(nobj, "flow.newton", ("tol", "max_iters", "continuation_steps"))
        newton["newton_tol"] = _number(nobj, "flow.newton", "tol", 1e-10, positive=True)
        newton["newton_max_iters"] = _integer(nobj, "flow.newton", "max_iters", 25, minimum=1)
        newton["continuation_steps"] = _integer(nobj, "flow.newton", "continuation_steps", 4, minimum=0)
    flow = FlowConfig(
        viscosity=viscosity,
        inflow=_polynomial(flow_obj, "flow", "inflow"),
        traction=_polynomial(flow_obj, "flow", "traction"),
        **newton,
    )

    optim = None
    if "optimize" in doc:
        oobj = _object(doc["optimize"], "optimize")
        _check_keys(oobj, "optimize", (
            "step0", "multiplier0", "epsilon", "target_volume", "max_iters",
            "step_bounds",
        ))
        bounds = (1e-6, 1.0)
        if "step_bounds" in oobj:
            v = oobj["step_bounds"]
            if (not isinstance(v, list) or len(v) != 2
                    or any(isinstance(c, bool) or not isinstance(c, (int, float)) for c in v)):
                _fail("optimize.step_bounds", "expected an array of 2 numbers")
            bounds = (float(v[0]), float(v[1]))
        try:
            optim = OptimConfig(
                step0=_number(oobj, "optimize", "step0", required=True, positive=True),
                multiplier0=_number(oobj, "optimize", "multiplier0", 0.0),
                epsilon=_number(oobj, "optimize", "epsilon", 0.0, nonnegative=True),
                target_volume=_number(oobj, "optimize", "target_volume", None,
                                      positive=True, nullable=True),
                max_iters=_integer(oobj, "optimize", "max_iters", required=True, minimum=0),
                step_min=bounds[0],
                step_max=bounds[1],
            )
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            _fail("optimize", str(exc))

    exports = {"vtk": True, "history": True, "report": True}
    if "output" in doc:
        out_obj = _object(doc["output"], "output")
        _check_keys(out_obj, "output", ("vtk", "history", "report"))
        for key in exports:
            exports[key] = _boolean(out_obj, "output", key, True)

    return RunConfig(flow=flow, mesh_path=mesh_path, mesh_generator=mesh_generator,
                     optim=optim, exports=exports)


def load_config(path) -> RunConfig:
    """Read and validate a scenario file."""
    return parse_config(Path(path).read_bytes())


def build_mesh(config: RunConfig, base_dir=None) -> Mesh2D:
    """Materialize the mesh named by the config.

    Relative mesh paths resolve against ``base_dir`` (the scenario file's
    directory) when given.
    """
    if config.mesh_path is not None:
        p = Path(config.mesh_path)
        if base_dir is not None and not p.is_absolute():
            p = Path(base_dir) / p
        return load_mesh(p.read_bytes())
    spec = dict(config.mesh_generator)
    kind = spec.pop("kind")
    if kind == "channel":
        return gen_channel(**spec)
    if kind == "rect_with_hole":
        mesh, _ = gen_rect_with_hole(**spec)
        return mesh
    return gen_bent_channel(**spec)
