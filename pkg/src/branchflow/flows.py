"""Atomic measures, transport instances, and discrete mass flows.

A flow is an undirected graph with antisymmetric edge mass labels m(x, y);
the stored ``Edge(u, v, mass)`` means ``m(u, v) = mass``.  The divergence of
a vertex v is ``sum over incident edges of m(other, v)`` and must equal the
net mass of the instance at v (positive at sources, negative at sinks, zero
at branching points).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import DEFAULT_TOL
from .costs import CostModel
from .errors import FlowValidationError, InputError, Violation

KIND_TERMINAL = "terminal"
KIND_BRANCHING = "branching"


@dataclass(frozen=True)
class AtomicMeasure:
    """A finite nonnegative measure: distinct points with positive masses."""

    points: tuple[tuple[float, ...], ...]
    masses: tuple[float, ...]

    def __post_init__(self):
        if len(self.points) == 0 or len(self.points) != len(self.masses):
            raise InputError("measure needs matching nonempty points/masses")
        dims = {len(p) for p in self.points}
        if len(dims) != 1 or next(iter(dims)) < 1:
            raise InputError("measure points must share one dimension >= 1")
        if len(set(self.points)) != len(self.points):
            raise InputError("measure points must be pairwise distinct")
        for m in self.masses:
            if not (m > 0 and np.isfinite(m)):
                raise InputError(f"measure masses must be positive and finite, got {m}")
        object.__setattr__(self, "points", tuple(tuple(float(x) for x in p) for p in self.points))
        object.__setattr__(self, "masses", tuple(float(m) for m in self.masses))

    @classmethod
    def from_arrays(cls, points, masses) -> "AtomicMeasure":
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return cls(tuple(map(tuple, pts.tolist())), tuple(np.asarray(masses, dtype=float).tolist()))

    @property
    def dimension(self) -> int:
        return len(self.points[0])

    @property
    def total_mass(self) -> float:
        return float(sum(self.masses))

    def points_array(self) -> np.ndarray:
        return np.asarray(self.points, dtype=float)


@dataclass(frozen=True)
class TransportInstance:
    """Balanced source/sink measures in R^d together with a cost model."""

    dimension: int
    mu_plus: AtomicMeasure
    mu_minus: AtomicMeasure
    cost: CostModel

    def __post_init__(self):
        if self.mu_plus.dimension != self.dimension or self.mu_minus.dimension != self.dimension:
            raise InputError("measure dimensions disagree with the instance dimension")
        tp, tm = self.mu_plus.total_mass, self.mu_minus.total_mass
        if abs(tp - tm) > DEFAULT_TOL.mass_balance * max(tp, tm):
            raise InputError(f"total masses are unbalanced: {tp} vs {tm}")

    def terminals(self) -> tuple[np.ndarray, np.ndarray]:
        """All terminal points and their net masses (sources first, then sinks).

        Coinciding source/sink points are not merged; nets are per atom.
        """
        pts = np.vstack([self.mu_plus.points_array(), self.mu_minus.points_array()])
        nets = np.concatenate([np.asarray(self.mu_plus.masses),
                               -np.asarray(self.mu_minus.masses)])
        return pts, nets

    def diameter(self) -> float:
        pts, _ = self.terminals()
        diff = pts[:, None, :] - pts[None, :, :]
        return float(np.sqrt((diff ** 2).sum(-1)).max())


@dataclass(frozen=True)
class Vertex:
    id: str
    point: tuple[float, ...]
    kind: str


@dataclass(frozen=True)
class Edge:
    u: str
    v: str
    mass: float  # m(u, v); m(v, u) = -mass


@dataclass(frozen=True)
class FlowCost:
    total: float
    per_edge: tuple[tuple[tuple[str, str], float], ...]


@dataclass(frozen=True)
class Flow:
    """Vertices with coordinates plus undirected mass-labelled edges.

    Structural invariants (unique ids, existing distinct endpoints, unique
    unordered pairs, nonzero finite masses, one consistent dimension) are
    enforced at construction.  Instance-relative invariants (divergence,
    support coverage) are checked by :func:`validate_flow`.
    """

    vertices: tuple[Vertex, ...]
    edges: tuple[Edge, ...]
    allow_coincident: bool = False

    def __post_init__(self):
        violations: list[Violation] = []
        ids = [v.id for v in self.vertices]
        if len(ids) == 0:
            violations.append(Violation("empty", "-", "flow has no vertices"))
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            violations.append(Violation("duplicate_id", ",".join(dup), "vertex ids must be unique"))
        dims = {len(v.point) for v in self.vertices}
        if len(dims) > 1:
            violations.append(Violation("dimension", "-", f"mixed coordinate dimensions {sorted(dims)}"))
        for v in self.vertices:
            if v.kind not in (KIND_TERMINAL, KIND_BRANCHING):
                violations.append(Violation("bad_kind", v.id, f"unknown vertex kind {v.kind!r}"))
            if not all(np.isfinite(x) for x in v.point):
                violations.append(Violation("bad_coordinate", v.id, "non-finite coordinate"))
        if not self.allow_coincident:
            seen: dict[tuple[float, ...], str] = {}
            for v in self.vertices:
                if v.point in seen:
                    violations.append(Violation(
                        "coincident_vertices", f"{seen[v.point]},{v.id}",
                        "coincident coordinates (pass allow_coincident=True to permit)"))
                else:
                    seen[v.point] = v.id
        known = set(ids)
        pairs = set()
        for e in self.edges:
            tag = f"{e.u}-{e.v}"
            if e.u not in known or e.v not in known:
                violations.append(Violation("unknown_endpoint", tag, "edge endpoint is not a vertex"))
                continue
            if e.u == e.v:
                violations.append(Violation("self_loop", tag, "edges must connect distinct vertices"))
            key = (e.u, e.v) if e.u <= e.v else (e.v, e.u)
            if key in pairs:
                violations.append(Violation("duplicate_edge", tag, "duplicate unordered vertex pair"))
            pairs.add(key)
            if not (np.isfinite(e.mass) and e.mass != 0.0):
                violations.append(Violation("zero_mass", tag, f"edge mass must be nonzero, got {e.mass}"))
        if violations:
            raise FlowValidationError(violations)

    @property
    def dimension(self) -> int:
        return len(self.vertices[0].point)

    def vertex(self, vid: str) -> Vertex:
        for v in self.vertices:
            if v.id == vid:
                return v
        raise KeyError(vid)

    def points(self) -> dict[str, np.ndarray]:
        return {v.id: np.asarray(v.point, dtype=float) for v in self.vertices}

    def incident(self, vid: str) -> list[Edge]:
        return [e for e in self.edges if vid in (e.u, e.v)]

    def degree(self, vid: str) -> int:
        return len(self.incident(vid))

    def divergence(self, vid: str) -> float:
        """Sum of m(other, v) over incident edges."""
        acc = 0.0
        for e in self.edges:
            if e.v == vid:
                acc += e.mass
            elif e.u == vid:
                acc -= e.mass
        return acc

    def mass_scale(self) -> float:
        return max(1.0, max((abs(e.mass) for e in self.edges), default=1.0))


def incoming_mass(edge: Edge, vid: str) -> float:
    """m(other, vid) for one incident edge."""
    if edge.v == vid:
        return edge.mass
    if edge.u == vid:
        return -edge.mass
    raise KeyError(f"vertex {vid} is not an endpoint of {edge.u}-{edge.v}")


def gilbert_functional(flow: Flow, cost: CostModel, tol: float | None = None) -> FlowCost:
    """Total transport cost sum of c(|m|) * length with a per-edge breakdown.

    Raises FlowValidationError when a branching vertex has nonzero
    divergence (the one instance-independent divergence constraint).
    """
    tol = DEFAULT_TOL.rel if tol is None else tol
    bad = []
    scale = flow.mass_scale()
    for v in flow.vertices:
        if v.kind == KIND_BRANCHING:
            div = flow.divergence(v.id)
            if abs(div) > tol * scale:
                bad.append(Violation("divergence", v.id,
                                     f"branching vertex has nonzero divergence {div}"))
    if bad:
        raise FlowValidationError(bad)
    pos = flow.points()
    per_edge = []
    total = 0.0
    for e in flow.edges:
        length = float(np.linalg.norm(pos[e.u] - pos[e.v]))
        contribution = float(cost.evaluate(abs(e.mass))) * length
        per_edge.append(((e.u, e.v), contribution))
        total += contribution
    return FlowCost(total=total, per_edge=tuple(per_edge))


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {"ok": self.ok, "violations": [v.to_dict() for v in self.violations]}


def validate_flow(instance: TransportInstance, flow: Flow,
                  tol: float | None = None) -> ValidationReport:
    """Report every violated flow invariant relative to the instance.

    An empty report means the flow is a valid (mu+, mu-)-flow: its vertex
    set covers the support of mu+ - mu-, the divergence identity holds at
    every vertex, and vertex kinds match the support.
    """
    tol = DEFAULT_TOL.rel if tol is None else tol
    violations: list[Violation] = []
    if flow.dimension != instance.dimension:
        violations.append(Violation("dimension", "-",
                                    f"flow dimension {flow.dimension} != instance {instance.dimension}"))
        return ValidationReport(tuple(violations))

    pos = flow.points()
    coord_scale = max(1.0, max(float(np.abs(p).max()) for p in pos.values()))
    snap = 1e-9 * coord_scale

    nets: dict[str, float] = {v.id: 0.0 for v in flow.vertices}
    pts, atom_nets = instance.terminals()
    for point, net in zip(pts, atom_nets):
        matches = [vid for vid, q in pos.items() if np.linalg.norm(q - point) <= snap]
        if len(matches) == 0:
            violations.append(Violation("support_not_covered", str(tuple(point)),
                                        "no flow vertex at this support point"))
            continue
        if len(matches) > 1:
            violations.append(Violation("ambiguous_support", ",".join(sorted(matches)),
                                        "several vertices match one support point"))
        nets[matches[0]] += float(net)

    mass_scale = max(flow.mass_scale(),
                     max((abs(n) for n in nets.values()), default=1.0))
    for v in flow.vertices:
        net = nets[v.id]
        div = flow.divergence(v.id)
        if abs(div - net) > tol * mass_scale:
            violations.append(Violation("divergence", v.id,
                                        f"divergence {div} != net mass {net}"))
        in_support = abs(net) > tol * mass_scale
        if v.kind == KIND_TERMINAL and not in_support:
            violations.append(Violation("kind_mismatch", v.id,
                                        "terminal vertex carries no net mass"))
        if v.kind == KIND_BRANCHING and in_support:
            violations.append(Violation("kind_mismatch", v.id,
                                        "branching vertex sits in the support"))
    return ValidationReport(tuple(violations))


def is_forest(flow: Flow) -> bool:
    """True iff the edge set is acyclic as an undirected graph."""
    parent = {v.id: v.id for v in flow.vertices}

    def find(a: str) -> str:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for e in flow.edges:
        ra, rb = find(e.u), find(e.v)
        if ra == rb:
            return False
        parent[ra] = rb
    return True


def normalize_flow(flow: Flow, tol: float | None = None) -> Flow:
    """Merge the two edges of every degree-2 branching point.

    A degree-2 branching point with agreeing through-masses (zero
    divergence) is removed and its edges replaced by one direct edge.  The
    replacement changes geometry (hence cost) unless the point was collinear
    with its neighbours; callers that care apply it only to points produced
    by collapse, where the cost effect is zero.
    """
    tol = DEFAULT_TOL.rel if tol is None else tol
    vertices = {v.id: v for v in flow.vertices}
    edges = list(flow.edges)
    changed = True
    while changed:
        changed = False
        for vid, v in list(vertices.items()):
            if v.kind != KIND_BRANCHING:
                continue
            inc = [e for e in edges if vid in (e.u, e.v)]
            if len(inc) != 2:
                continue
            e1, e2 = inc
            through = incoming_mass(e1, vid)
            if abs(through + incoming_mass(e2, vid)) > tol * flow.mass_scale():
                continue  # masses disagree; leave the vertex alone
            a = e1.u if e1.v == vid else e1.v
            b = e2.u if e2.v == vid else e2.v
            if a == b:
                continue
            key = (a, b) if a <= b else (b, a)
            if any(((e.u, e.v) if e.u <= e.v else (e.v, e.u)) == key for e in edges
                   if e not in (e1, e2)):
                continue  # merged edge would duplicate an existing pair
            # orient the merged edge so divergences at a and b are preserved:
            # m(a, b) = m(a, vid), which equals m(vid, b) by zero divergence
            m_ab = e1.mass if e1.u == a else -e1.mass
            edges = [e for e in edges if e not in (e1, e2)]
            edges.append(Edge(a, b, m_ab))
            del vertices[vid]
            changed = True
            break
    return Flow(tuple(vertices.values()), tuple(edges), allow_coincident=flow.allow_coincident)
