"""Constructors for the explicit high-degree and self-similar flows.

Four families: the orthonormal star at p = 1/2 (degree d + 1 branching),
its equiangular extension to p >= 1/2, the 2d-degree source star of unit
demands at +-e_i, and the four-armed self-similar irrigation tree.  Edge
lengths in the star families are normalized to 1: the optimality conditions
constrain directions only, so unit lengths keep costs reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .costs import PowerCost
from .errors import InputError
from .flows import (KIND_BRANCHING, KIND_TERMINAL, AtomicMeasure, Edge, Flow,
                    TransportInstance, Vertex)


def _tuple(p) -> tuple[float, ...]:
    return tuple(float(x) for x in np.asarray(p, dtype=float).ravel())


def _star_flow(origin: np.ndarray, sink_points: np.ndarray, masses: np.ndarray,
               source_point: np.ndarray) -> Flow:
    """Star flow q -> o -> sinks; the center is a branching vertex."""
    vertices = [Vertex("o", _tuple(origin), KIND_BRANCHING),
                Vertex("q", _tuple(source_point), KIND_TERMINAL)]
    edges = [Edge("o", "q", float(masses.sum()))]
    for i, (pt, m) in enumerate(zip(sink_points, masses), start=1):
        vid = f"p{i}"
        vertices.append(Vertex(vid, _tuple(pt), KIND_TERMINAL))
        edges.append(Edge(vid, "o", float(m)))
    return Flow(tuple(vertices), tuple(edges))


def example_orthant(d: int, masses=None) -> tuple[TransportInstance, Flow]:
    """Degree-(d+1) branching at p = 1/2: sinks on the orthonormal basis.

    Sinks sit at the standard basis points with the given positive masses;
    the source direction balances the square-root-weighted basis vectors,
    placed at unit distance from the origin.
    """
    if d < 2:
        raise InputError("dimension must be >= 2")
    m = np.ones(d) if masses is None else np.asarray(masses, dtype=float).ravel()
    if m.shape[0] != d or np.any(m <= 0):
        raise InputError("need d strictly positive sink masses")
    basis = np.eye(d)
    e = -(np.sqrt(m)[:, None] * basis).sum(axis=0) / math.sqrt(float(m.sum()))
    source_point = e  # unit distance from the origin
    instance = TransportInstance(
        dimension=d,
        mu_plus=AtomicMeasure.from_arrays(source_point[None, :], [float(m.sum())]),
        mu_minus=AtomicMeasure.from_arrays(basis, m),
        cost=PowerCost(0.5),
    )
    return instance, _star_flow(np.zeros(d), basis, m, source_point)


@dataclass(frozen=True)
class EquiangularFrame:
    """Unit sink directions with one common pairwise inner product."""

    d: int
    a: float
    vectors: np.ndarray  # (d, d) rows e_1..e_d
    apex: np.ndarray  # unit vector balancing sum(e_i) + d**p * apex = 0

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=float).copy()
        ap = np.asarray(self.apex, dtype=float).copy()
        v.setflags(write=False)
        ap.setflags(write=False)
        object.__setattr__(self, "vectors", v)
        object.__setattr__(self, "apex", ap)


def equiangular_frame(d: int, p: float) -> EquiangularFrame:
    """Frame with <e_i, e_j> = (d^(2p-1) - 1)/(d - 1) via the Gram square root."""
    if d < 2:
        raise InputError("dimension must be >= 2")
    if not (0.5 <= p < 1.0):
        raise InputError(f"equiangular construction needs 1/2 <= p < 1, got {p}")
    a = (d ** (2.0 * p - 1.0) - 1.0) / (d - 1.0)
    gram = (1.0 - a) * np.eye(d) + a * np.ones((d, d))
    evals, evecs = np.linalg.eigh(gram)
    if np.any(evals < -1e-12):
        raise InputError("equiangular Gram matrix is not positive semidefinite")
    root = evecs @ np.diag(np.sqrt(np.clip(evals, 0.0, None))) @ evecs.T
    vectors = root  # symmetric square root: rows realize the Gram matrix
    apex = -vectors.sum(axis=0) / d ** p
    return EquiangularFrame(d=d, a=float(a), vectors=vectors, apex=apex)


def example_equiangular(d: int, p: float) -> tuple[TransportInstance, Flow, EquiangularFrame]:
    """Degree-(d+1) branching for p >= 1/2: unit masses on an equiangular frame."""
    frame = equiangular_frame(d, p)
    m = np.ones(d)
    instance = TransportInstance(
        dimension=d,
        mu_plus=AtomicMeasure.from_arrays(frame.apex[None, :], [float(d)]),
        mu_minus=AtomicMeasure.from_arrays(frame.vectors, m),
        cost=PowerCost(p),
    )
    flow = _star_flow(np.zeros(d), frame.vectors, m, frame.apex)
    return instance, flow, frame


def example_double_star(d: int) -> tuple[TransportInstance, Flow]:
    """Source of degree 2d at p = 1/2: unit demands at +-e_i, source at the origin."""
    if d < 2:
        raise InputError("dimension must be >= 2")
    basis = np.eye(d)
    sinks = np.vstack([np.vstack([basis[i], -basis[i]]) for i in range(d)])
    m = np.ones(2 * d)
    instance = TransportInstance(
        dimension=d,
        mu_plus=AtomicMeasure.from_arrays(np.zeros((1, d)), [float(2 * d)]),
        mu_minus=AtomicMeasure.from_arrays(sinks, m),
        cost=PowerCost(0.5),
    )
    vertices = [Vertex("o", _tuple(np.zeros(d)), KIND_TERMINAL)]
    edges = []
    for i, pt in enumerate(sinks, start=1):
        vid = f"p{i}"
        vertices.append(Vertex(vid, _tuple(pt), KIND_TERMINAL))
        edges.append(Edge(vid, "o", 1.0))
    return instance, Flow(tuple(vertices), tuple(edges))


@dataclass(frozen=True)
class UniversalTreeSpec:
    """Four self-similar binary arms around a central source (p = 1/2)."""

    depth: int
    length_ratio: float = 0.7
    branch_angle: float = math.pi / 4
    arms: int = 4

    def __post_init__(self):
        if not (1 <= self.depth <= 12):
            raise InputError("depth must lie in 1..12")
        if self.length_ratio <= 0:
            raise InputError("length ratio must be positive")
        if self.arms != 4:
            raise InputError("the self-similar construction uses exactly 4 arms")


def universal_tree(spec: UniversalTreeSpec) -> tuple[TransportInstance, Flow]:
    """Self-similar irrigation tree: each edge splits into two children
    rotated +-branch_angle and scaled by length_ratio per level.

    Leaves carry unit mass; a level-L edge carries 2^(depth-L).  The p = 1/2
    angle law makes every internal branching locally optimal when
    branch_angle is the default 45 degrees.
    """
    depth = spec.depth
    vertices = [Vertex("o", (0.0, 0.0), KIND_TERMINAL)]
    edges: list[Edge] = []

    def grow(vid: str, tip: np.ndarray, angle: float, level: int) -> float:
        """Extend one edge from its parent tip; returns the subtree mass."""
        length = spec.length_ratio ** (level - 1)
        end = tip + length * np.array([math.cos(angle), math.sin(angle)])
        if level == depth:
            vertices.append(Vertex(vid, _tuple(end), KIND_TERMINAL))
            return 1.0
        vertices.append(Vertex(vid, _tuple(end), KIND_BRANCHING))
        left = grow(vid + "L", end, angle + spec.branch_angle, level + 1)
        right = grow(vid + "R", end, angle - spec.branch_angle, level + 1)
        for child, mass in ((vid + "L", left), (vid + "R", right)):
            edges.append(Edge(child, vid, mass))
        return left + right

    total = 0.0
    for arm in range(spec.arms):
        vid = f"a{arm}"
        mass = grow(vid, np.zeros(2), arm * 2.0 * math.pi / spec.arms, 1)
        edges.append(Edge(vid, "o", mass))
        total += mass

    leaves = [v for v in vertices if v.kind == KIND_TERMINAL and v.id != "o"]
    instance = TransportInstance(
        dimension=2,
        mu_plus=AtomicMeasure.from_arrays(np.zeros((1, 2)), [total]),
        mu_minus=AtomicMeasure.from_arrays(
            np.array([v.point for v in leaves]), np.ones(len(leaves))),
        cost=PowerCost(0.5),
    )
    return instance, Flow(tuple(vertices), tuple(edges))
