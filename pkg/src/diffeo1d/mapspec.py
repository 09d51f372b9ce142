"""JSON map specifications.

    {"type": "pl", "breakpoints": ["0", "1/4", "3/4", "1"], "slopes": ["2", "3/4", "1/2"]}
    {"type": "mobius", "lambda": 1.0}
    {"type": "flow", "coeffs": [0, 1, -1], "time": 1.0}
    {"type": "sternberg", "lambda": -1.0}
    {"type": "power", "alpha": 0.5, "eps": 0.125}
    {"type": "compose", "maps": [A, B]}        # A o B
    {"type": "inverse", "map": A}
    {"type": "circle", "base": A, "rotation": 0.3}
    {"type": "identity"} | {"type": "sine", "amp": 0.1}
    {"type": "grid", "x": [...], "y": [...], "dy": [...]}
    {"type": "gallery", "name": "mobius"}
"""

from __future__ import annotations

import json
from pathlib import Path

from ._base import DiffeoError
from .analytic import Composition, FlowMap, MobiusFlow, PowerGerm, SineMap
from .circle import CircleLift
from .grid import GridMap
from .pl import PLMap


class SpecError(DiffeoError):
    pass


def _need(spec: dict, key: str):
    if key not in spec:
        raise SpecError(f"map spec of type {spec.get('type')!r} needs {key!r}")
    return spec[key]


def parse_map(spec):
    """Build a map from a spec dict (or JSON string)."""
    if isinstance(spec, str):
        spec = json.loads(spec)
    if not isinstance(spec, dict) or "type" not in spec:
        raise SpecError("map spec must be an object with a 'type' field")
    kind = spec["type"]
    try:
        if kind == "pl":
            bps = _need(spec, "breakpoints")
            sls = _need(spec, "slopes")
            if all(isinstance(v, (str, int)) for v in list(bps) + list(sls)):
                return PLMap(bps, sls)
            return PLMap([float(b) for b in bps], [float(s) for s in sls])
        if kind == "mobius":
            return MobiusFlow(float(_need(spec, "lambda")))
        if kind == "flow":
            return FlowMap(_need(spec, "coeffs"), float(spec.get("time", 1.0)))
        if kind == "sternberg":
            from .gallery import SternbergMap
            return SternbergMap(float(_need(spec, "lambda")))
        if kind == "power":
            return PowerGerm(float(_need(spec, "alpha")), float(_need(spec, "eps")))
        if kind == "compose":
            maps = [parse_map(m) for m in _need(spec, "maps")]
            if any(isinstance(m, CircleLift) for m in maps):
                from .circle import LiftComposition
                return LiftComposition(maps)
            return Composition(maps)
        if kind == "inverse":
            return parse_map(_need(spec, "map")).inverse()
        if kind == "circle":
            return CircleLift(parse_map(_need(spec, "base")),
                              float(spec.get("rotation", 0.0)),
                              float(spec.get("pre", 0.0)))
        if kind == "identity":
            return PLMap.identity()
        if kind == "sine":
            return SineMap(float(_need(spec, "amp")))
        if kind == "grid":
            return GridMap(_need(spec, "x"), _need(spec, "y"), spec.get("dy"))
        if kind == "gallery":
            from .gallery import gallery
            return gallery(str(_need(spec, "name")))
    except SpecError:
        raise
    except (TypeError, ValueError, KeyError, ZeroDivisionError) as exc:
        raise SpecError(f"invalid {kind!r} map spec: {exc}") from exc
    raise SpecError(f"unknown map type {kind!r}")


def to_spec(f) -> dict:
    return f.to_spec()


def load_map(path) -> object:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SpecError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}: invalid JSON ({exc})") from exc
    return parse_map(data)


def load_action(path) -> tuple[str, list]:
    """Read {"domain": ..., "generators": [spec, ...]} (a bare list of specs is
    also accepted)."""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SpecError(f"cannot read action {path}: {exc}") from exc
    if isinstance(data, list):
        gens = data
        domain = None
    elif isinstance(data, dict):
        gens = data.get("generators")
        domain = data.get("domain")
        if gens is None:
            raise SpecError("action spec needs 'generators'")
    else:
        raise SpecError("action spec must be an object or a list")
    maps = [parse_map(g) for g in gens]
    kinds = {getattr(m, "domain", "interval") for m in maps}
    if len(kinds) > 1:
        raise SpecError("generators mix interval and circle maps")
    actual = kinds.pop() if kinds else "interval"
    if domain is not None and domain != actual:
        raise SpecError(f"declared domain {domain!r} does not match generators ({actual})")
    return actual, maps
