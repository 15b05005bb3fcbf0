"""Versioned JSON schemas and deterministic serialization.

All formats carry ``"format": "branchflow/1"``; unknown versions are
rejected.  Floating-point values are emitted with 17 significant digits,
which round-trips IEEE doubles exactly.
"""

from __future__ import annotations

import json
import math
from typing import Any

import numpy as np

from .certificates import StarInstance
from .configurations import StarConfiguration
from .costs import PowerCost
from .errors import InputError
from .flows import (KIND_BRANCHING, KIND_TERMINAL, AtomicMeasure, Edge, Flow,
                    TransportInstance, Vertex)

FORMAT = "branchflow/1"


def _emit(obj: Any) -> str:
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            raise InputError(f"cannot serialize non-finite float {x}")
        return f"{x:.17g}"
    if isinstance(obj, dict):
        inner = ",".join(f"{json.dumps(str(k))}:{_emit(v)}" for k, v in obj.items())
        return "{" + inner + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_emit(v) for v in obj) + "]"
    if isinstance(obj, np.ndarray):
        return _emit(obj.tolist())
    raise InputError(f"cannot serialize object of type {type(obj).__name__}")


def dumps(obj: Any) -> str:
    """Serialize to JSON with 17-significant-digit floats."""
    return _emit(obj)


def loads(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON at line {exc.lineno} column {exc.colno}: "
                         f"{exc.msg}") from exc


def _check_format(doc: dict, what: str) -> None:
    if not isinstance(doc, dict):
        raise InputError(f"{what} document must be a JSON object")
    version = doc.get("format")
    if version != FORMAT:
        raise InputError(f"{what} document has format {version!r}, expected {FORMAT!r}")


def _require(doc: dict, key: str, what: str):
    if key not in doc:
        raise InputError(f"{what} document is missing the {key!r} field")
    return doc[key]


# -- transport instances -----------------------------------------------------

def instance_to_dict(instance: TransportInstance) -> dict:
    if not isinstance(instance.cost, PowerCost):
        raise InputError("only power cost models are serialized in instance JSON")
    return {
        "format": FORMAT,
        "dimension": instance.dimension,
        "p": instance.cost.p,
        "sources": [{"point": list(pt), "mass": m}
                    for pt, m in zip(instance.mu_plus.points, instance.mu_plus.masses)],
        "sinks": [{"point": list(pt), "mass": m}
                  for pt, m in zip(instance.mu_minus.points, instance.mu_minus.masses)],
    }


def _atoms(entries, what: str) -> AtomicMeasure:
    if not isinstance(entries, list) or not entries:
        raise InputError(f"{what} must be a nonempty list of atoms")
    points = []
    masses = []
    for a in entries:
        points.append(tuple(float(x) for x in _require(a, "point", what)))
        masses.append(float(_require(a, "mass", what)))
    return AtomicMeasure(tuple(points), tuple(masses))


def instance_from_dict(doc: dict) -> TransportInstance:
    _check_format(doc, "instance")
    d = int(_require(doc, "dimension", "instance"))
    p = float(_require(doc, "p", "instance"))
    return TransportInstance(
        dimension=d,
        mu_plus=_atoms(_require(doc, "sources", "instance"), "sources"),
        mu_minus=_atoms(_require(doc, "sinks", "instance"), "sinks"),
        cost=PowerCost(p),
    )


# -- flows -------------------------------------------------------------------

def flow_to_dict(flow: Flow) -> dict:
    return {
        "format": FORMAT,
        "vertices": [{"id": v.id, "point": list(v.point), "kind": v.kind}
                     for v in flow.vertices],
        "edges": [{"from": e.u, "to": e.v, "mass": e.mass} for e in flow.edges],
    }


def flow_from_dict(doc: dict, allow_coincident: bool = False) -> Flow:
    _check_format(doc, "flow")
    vertices = []
    for v in _require(doc, "vertices", "flow"):
        kind = _require(v, "kind", "flow vertex")
        if kind not in (KIND_TERMINAL, KIND_BRANCHING):
            raise InputError(f"unknown vertex kind {kind!r}")
        vertices.append(Vertex(str(_require(v, "id", "flow vertex")),
                               tuple(float(x) for x in _require(v, "point", "flow vertex")),
                               kind))
    edges = []
    for e in _require(doc, "edges", "flow"):
        edges.append(Edge(str(_require(e, "from", "flow edge")),
                          str(_require(e, "to", "flow edge")),
                          float(_require(e, "mass", "flow edge"))))
    return Flow(tuple(vertices), tuple(edges), allow_coincident=allow_coincident)


# -- star instances (certification) ------------------------------------------

def star_instance_to_dict(instance: StarInstance, p: float) -> dict:
    doc = {
        "format": FORMAT,
        "p": p,
        "origin": list(instance.origin),
        "sinks": [{"point": list(pt), "mass": float(m)}
                  for pt, m in zip(instance.sinks, instance.demands)],
    }
    if instance.source is not None:
        doc["source"] = list(instance.source)
    return doc


def star_instance_from_dict(doc: dict) -> tuple[StarInstance, PowerCost]:
    _check_format(doc, "star instance")
    p = float(_require(doc, "p", "star instance"))
    origin = [float(x) for x in _require(doc, "origin", "star instance")]
    sinks = []
    demands = []
    for s in _require(doc, "sinks", "star instance"):
        sinks.append([float(x) for x in _require(s, "point", "star sink")])
        demands.append(float(_require(s, "mass", "star sink")))
    source = doc.get("source")
    inst = StarInstance(origin=np.asarray(origin), sinks=np.asarray(sinks),
                        demands=np.asarray(demands),
                        source=None if source is None else np.asarray([float(x) for x in source]))
    return inst, PowerCost(p)


# -- star configurations -----------------------------------------------------

def configuration_to_dict(config: StarConfiguration) -> dict:
    return {
        "format": FORMAT,
        "directions": [list(row) for row in config.directions],
        "masses": list(config.masses),
    }


def configuration_from_dict(doc: dict) -> StarConfiguration:
    _check_format(doc, "configuration")
    dirs = [[float(x) for x in row] for row in _require(doc, "directions", "configuration")]
    masses = [float(m) for m in _require(doc, "masses", "configuration")]
    return StarConfiguration(np.asarray(dirs), np.asarray(masses))


# -- weighted points (fermat) ------------------------------------------------

def weighted_points_from_dict(doc: dict) -> tuple[np.ndarray, np.ndarray]:
    _check_format(doc, "weighted points")
    pts = np.asarray([[float(x) for x in row]
                      for row in _require(doc, "points", "weighted points")])
    ws = np.asarray([float(w) for w in _require(doc, "weights", "weighted points")])
    return pts, ws
