"""Desk-scale exact solver by topology enumeration and geometric relaxation.

Every combinatorial tree over the terminals (with unlabeled branching nodes
of degree 3..max_degree, terminals allowed internally) is enumerated up to
isomorphism, its branching coordinates are relaxed by block-coordinate
weighted-Fermat descent, and the cheapest relaxed flow wins.  The relaxation
runs a smoothing schedule first (plain block descent stalls on the nonsmooth
corner where two branching points coincide), then exact Weiszfeld sweeps,
then a collapse-and-recheck loop that contracts near-coincident branching
pairs when doing so does not increase the cost.
"""

from __future__ import annotations

import concurrent.futures
import itertools
import warnings
from dataclasses import dataclass

import networkx as nx
import numpy as np

from .config import DEFAULT_TOL
from .costs import TabulatedCost
from .errors import InputError
from .fermat import WeightedPoints, weighted_fermat
from .flows import (KIND_BRANCHING, KIND_TERMINAL, Edge, Flow,
                    TransportInstance, Vertex, gilbert_functional, normalize_flow)

MAX_TERMINALS = 7


@dataclass(frozen=True)
class Topology:
    """Combinatorial tree: terminals 0..n-1 (labeled), branchings n..n+s-1."""

    n_terminals: int
    n_branch: int
    edges: tuple[tuple[int, int], ...]
    encoding: str

    @property
    def n_nodes(self) -> int:
        return self.n_terminals + self.n_branch


def _find_centers(adj: dict[int, set[int]]) -> list[int]:
    nodes = set(adj)
    if len(nodes) <= 2:
        return sorted(nodes)
    deg = {v: len(adj[v]) for v in nodes}
    removed: set[int] = set()
    leaves = [v for v in nodes if deg[v] == 1]
    remaining = len(nodes)
    while remaining > 2:
        remaining -= len(leaves)
        nxt = []
        for v in leaves:
            removed.add(v)
            for u in adj[v]:
                if u not in removed:
                    deg[u] -= 1
                    if deg[u] == 1:
                        nxt.append(u)
        leaves = nxt
    return sorted(nodes - removed)


def _canonical_encoding(n_terminals: int, edges) -> str:
    """Rooted canonical form: terminal labels fixed, branchings unlabeled.

    The tree is rooted at its center (one or two vertices); subtree
    encodings are sorted at every node, and with two centers the smaller of
    the two rootings wins.
    """
    adj: dict[int, set[int]] = {}
    for u, v in edges:
        adj.setdefault(u, set()).add(v)
        adj.setdefault(v, set()).add(u)
    if not adj:
        raise InputError("topology has no edges")

    def label(v: int) -> str:
        return f"T{v}" if v < n_terminals else "B"

    def encode(v: int, parent: int | None) -> str:
        kids = sorted(encode(u, v) for u in adj[v] if u != parent)
        return label(v) + "(" + ",".join(kids) + ")"

    return min(encode(c, None) for c in _find_centers(adj))


def star_topology(n_terminals: int) -> Topology:
    """All terminals attached to a single branching point."""
    edges = tuple((i, n_terminals) for i in range(n_terminals))
    return Topology(n_terminals=n_terminals, n_branch=1, edges=edges,
                    encoding=_canonical_encoding(n_terminals, edges))


def enumerate_topologies(n_terminals: int, max_degree: int) -> list[Topology]:
    """Isomorphism classes of candidate trees over the labeled terminals.

    Internal branching nodes have degree in [3, max_degree]; terminals may
    appear internally with any degree.  Classes are deduplicated through the
    canonical encoding with branching nodes unlabeled.
    """
    if not (3 <= n_terminals <= MAX_TERMINALS):
        raise InputError(f"terminal count must lie in 3..{MAX_TERMINALS}")
    if not (3 <= max_degree <= n_terminals):
        raise InputError(f"max_degree must lie in 3..{n_terminals}")
    n = n_terminals
    out: list[Topology] = []
    seen: set[str] = set()
    for s in range(0, n - 1):
        for shape in nx.nonisomorphic_trees(n + s):
            deg = dict(shape.degree())
            eligible = [v for v in shape.nodes if 3 <= deg[v] <= max_degree]
            for branch_set in itertools.combinations(eligible, s):
                bset = set(branch_set)
                slots = [v for v in shape.nodes if v not in bset]
                branch_ids = {v: n + i for i, v in enumerate(branch_set)}
                for perm in itertools.permutations(range(n)):
                    relabel = dict(branch_ids)
                    for slot, t in zip(slots, perm):
                        relabel[slot] = t
                    edges = tuple(sorted(tuple(sorted((relabel[u], relabel[v])))
                                         for u, v in shape.edges))
                    enc = _canonical_encoding(n, edges)
                    if enc not in seen:
                        seen.add(enc)
                        out.append(Topology(n_terminals=n, n_branch=s,
                                            edges=edges, encoding=enc))
    return out


def _implied_masses(n_terminals: int, edges, nets: np.ndarray) -> dict[tuple[int, int], float]:
    """Edge masses forced by the divergence identity on a tree.

    Keys are (parent, child) of a rooting at the smallest node; the value is
    m(parent, child) = net mass of the child-side component.
    """
    adj: dict[int, list[int]] = {}
    for u, v in edges:
        adj.setdefault(u, []).append(v)
        adj.setdefault(v, []).append(u)
    masses: dict[tuple[int, int], float] = {}
    subtree: dict[int, float] = {}
    root = min(adj)
    stack: list[tuple[int, int | None, bool]] = [(root, None, False)]
    while stack:
        v, parent, done = stack.pop()
        if not done:
            stack.append((v, parent, True))
            for u in adj[v]:
                if u != parent:
                    stack.append((u, v, False))
        else:
            net = float(nets[v]) if v < n_terminals else 0.0
            for u in adj[v]:
                if u != parent:
                    net += subtree[u]
            subtree[v] = net
            if parent is not None:
                masses[(parent, v)] = net
    return masses


@dataclass(frozen=True)
class RelaxResult:
    flow: Flow
    cost: float
    sweeps: int
    converged: bool
    collapse_rounds: int
    cost_trace: tuple[float, ...]


class _Geometry:
    """Mutable relaxation state for one topology on one instance."""

    def __init__(self, instance: TransportInstance, topology: Topology | None):
        pts, nets = instance.terminals()
        self.instance = instance
        self.cost_model = instance.cost
        self.terminal_pts = pts
        self.nets = nets
        self.n_terminals = pts.shape[0]
        self.diameter = instance.diameter()
        self.edges: dict[tuple[int, int], float] = {}
        self.branches: list[int] = []
        self.positions: dict[int, np.ndarray] = {}
        if topology is None:
            return
        if topology.n_terminals != self.n_terminals:
            raise InputError("topology terminal count disagrees with the instance")
        if np.any(nets == 0.0):
            raise InputError("terminal net masses must be nonzero")
        masses = _implied_masses(self.n_terminals, topology.edges, nets)
        # zero-mass edges are dropped: no mass crosses, both sides balance,
        # and the components relax independently as a forest
        self.edges = {key: m for key, m in masses.items() if m != 0.0}
        used = {w for key in self.edges for w in key}
        self.branches = sorted(w for w in used if w >= self.n_terminals)
        self.positions = {i: self.terminal_pts[i].copy() for i in range(self.n_terminals)}
        for b in self.branches:
            self.positions[b] = self._initial_position(b)

    def clone(self) -> "_Geometry":
        g = _Geometry(self.instance, None)
        g.edges = dict(self.edges)
        g.branches = list(self.branches)
        g.positions = {k: p.copy() for k, p in self.positions.items()}
        return g

    def _initial_position(self, b: int) -> np.ndarray:
        acc = np.zeros(self.terminal_pts.shape[1])
        w_acc = 0.0
        for (u, v), m in self.edges.items():
            if b not in (u, v):
                continue
            other = u if v == b else v
            if other < self.n_terminals:
                w = float(self.cost_model.evaluate(abs(m)))
                acc += w * self.terminal_pts[other]
                w_acc += w
        if w_acc > 0:
            return acc / w_acc
        return self.terminal_pts.mean(axis=0)

    def neighbors(self, b: int) -> tuple[np.ndarray, np.ndarray]:
        pts, ws = [], []
        for (u, v), m in self.edges.items():
            if b not in (u, v):
                continue
            other = u if v == b else v
            pts.append(self.positions[other])
            ws.append(float(self.cost_model.evaluate(abs(m))))
        return np.asarray(pts), np.asarray(ws)

    def cost(self) -> float:
        total = 0.0
        for (u, v), m in self.edges.items():
            length = float(np.linalg.norm(self.positions[u] - self.positions[v]))
            total += float(self.cost_model.evaluate(abs(m))) * length
        return total

    def branch_edge_lengths(self) -> list[tuple[float, tuple[int, int]]]:
        out = []
        for (u, v) in self.edges:
            if u >= self.n_terminals or v >= self.n_terminals:
                length = float(np.linalg.norm(self.positions[u] - self.positions[v]))
                out.append((length, (u, v)))
        return sorted(out)

    def shortest_branch_pair(self) -> tuple[float, tuple[int, int] | None]:
        best = (np.inf, None)
        for length, (u, v) in self.branch_edge_lengths():
            if u >= self.n_terminals and v >= self.n_terminals and length < best[0]:
                best = (length, (u, v))
        return best

    def contract(self, key: tuple[int, int]) -> None:
        """Merge the branching endpoint of ``key`` into the other endpoint."""
        u, v = key
        if u >= self.n_terminals and v >= self.n_terminals:
            keep, gone = min(u, v), max(u, v)
        elif v >= self.n_terminals:
            keep, gone = u, v
        elif u >= self.n_terminals:
            keep, gone = v, u
        else:
            raise InputError("cannot contract a terminal-terminal edge")
        del self.edges[key]
        replaced: dict[tuple[int, int], float] = {}
        for (a, b), m in self.edges.items():
            na, nb = (keep if a == gone else a), (keep if b == gone else b)
            if (na, nb) in replaced or (nb, na) in replaced:
                raise InputError("contraction produced a parallel edge")
            replaced[(na, nb)] = m
        self.edges = replaced
        self.branches = [b for b in self.branches if b != gone]
        del self.positions[gone]


def _smoothed_block_update(pts: np.ndarray, ws: np.ndarray, x: np.ndarray,
                           eps: float, max_inner: int = 100) -> np.ndarray:
    for _ in range(max_inner):
        lengths = np.sqrt(((pts - x) ** 2).sum(axis=1) + eps * eps)
        inv = ws / lengths
        xn = (inv[:, None] * pts).sum(axis=0) / inv.sum()
        if np.linalg.norm(xn - x) < 1e-2 * eps:
            return xn
        x = xn
    return x


def _relax_in_place(g: _Geometry, tol: float, exact_budget: int,
                    skip_schedule: bool = False) -> tuple[float, bool, int, list[float]]:
    """Smoothing schedule, block sweeps, and Newton polish for one geometry.

    Returns (best cost, converged, sweeps, incumbent trace).  The trace is
    the best-so-far objective per sweep (nonincreasing by construction);
    the geometry is left at its best iterate.
    """
    diam = max(g.diameter, 1e-300)
    best_cost = g.cost()
    best_pos = {b: g.positions[b].copy() for b in g.branches}
    trace: list[float] = []
    sweeps = 0
    converged = not g.branches
    if g.branches:

        def record() -> None:
            nonlocal best_cost, best_pos
            c = g.cost()
            if c < best_cost:
                best_cost = c
                best_pos = {b: g.positions[b].copy() for b in g.branches}
            trace.append(best_cost)

        if len(g.branches) >= 2 and not skip_schedule:
            # the schedule's only job is landing in the right basin: plain
            # block descent stalls on the corner where two branching points
            # coincide, the smoothed objective walks through it; stop
            # descending eps once a pair tracks the smoothing scale
            for eps in (diam * 10.0 ** (-k) for k in range(2, 9)):
                for _ in range(30):
                    disp = 0.0
                    for b in g.branches:
                        pts, ws = g.neighbors(b)
                        xn = _smoothed_block_update(pts, ws, g.positions[b].copy(),
                                                    eps, max_inner=50)
                        disp = max(disp, float(np.linalg.norm(xn - g.positions[b])))
                        g.positions[b] = xn
                    sweeps += 1
                    record()
                    if disp < max(tol * diam, 1e-2 * eps):
                        break
                if g.shortest_branch_pair()[0] < 5.0 * eps:
                    break

        def exact_sweeps(budget: int) -> bool:
            """Block Weiszfeld sweeps; True when displacement reached tol."""
            nonlocal sweeps
            window: list[float] = []
            for _ in range(budget):
                disp = 0.0
                for b in g.branches:
                    pts, ws = g.neighbors(b)
                    res = weighted_fermat(WeightedPoints(pts, ws), max_iter=120,
                                          x0=g.positions[b])
                    disp = max(disp, float(np.linalg.norm(res.point - g.positions[b])))
                    g.positions[b] = res.point
                sweeps += 1
                record()
                if disp <= tol * diam:
                    return True
                window.append(disp)
                if len(window) > 12:
                    window.pop(0)
                    ratio = (window[-1] / max(window[0], 1e-300)) ** (1.0 / (len(window) - 1))
                    if ratio > 0.95 and g.shortest_branch_pair()[0] < 1e-3 * diam:
                        return False  # coincident pair: the collapse loop decides
            return False

        # short exact phase, then the joint Newton polish (block sweeps
        # settle displacement long before strongly coupled positions do),
        # then a few sweeps to confirm stationarity
        budget = exact_budget
        converged = exact_sweeps(min(25, budget))
        budget -= min(25, budget)
        for _ in range(3):
            if converged or budget <= 0:
                break
            if g.shortest_branch_pair()[0] < 1e-3 * diam:
                break
            _joint_polish(g, g.cost())
            record()
            converged = exact_sweeps(min(5, budget))
            budget -= min(5, budget)
        if not converged and budget > 0 and g.shortest_branch_pair()[0] >= 1e-3 * diam:
            converged = exact_sweeps(min(60, budget))
        # on cost ties keep the current (freshly polished) iterate: it is
        # the more stationary of the two
        if g.cost() > best_cost + 1e-14 * max(1.0, best_cost):
            for b in g.branches:
                g.positions[b] = best_pos[b]
    return best_cost, converged, sweeps, trace


def _joint_polish(g: _Geometry, current_cost: float) -> float:
    """Damped Newton refinement of all branch coordinates at once.

    Block sweeps converge in displacement long before strongly coupled
    positions settle, and the objective is too flat near the optimum for
    value-driven methods (changes fall below float resolution while the
    gradient is still ~1e-8).  Newton on the gradient with the analytic
    Hessian -- a sum of (w/L)(I - u u^T) projection blocks -- reaches
    machine-precision stationarity in a few steps.  Skipped when an edge is
    short enough for the collapse logic to own the decision; any step that
    worsens the cost beyond float noise is rejected.
    """
    if not g.branches:
        return current_cost
    diam = max(g.diameter, 1e-300)
    if any(length < 1e-7 * diam for length, _ in g.branch_edge_lengths()):
        return current_cost
    order = list(g.branches)
    dim = g.terminal_pts.shape[1]
    offsets = {b: i * dim for i, b in enumerate(order)}
    weights = {key: float(g.cost_model.evaluate(abs(m))) for key, m in g.edges.items()}
    size = len(order) * dim
    wsum = sum(weights.values())

    def point(z, node):
        if node in offsets:
            o = offsets[node]
            return z[o:o + dim]
        return g.terminal_pts[node]

    def grad_hess(z):
        grad = np.zeros(size)
        hess = np.zeros((size, size))
        for (u, v), w in weights.items():
            d = point(z, u) - point(z, v)
            length = float(np.linalg.norm(d))
            if length < 1e-300:
                return None, None
            unit = d / length
            pull = w * unit
            block = (w / length) * (np.eye(dim) - np.outer(unit, unit))
            if u in offsets:
                o = offsets[u]
                grad[o:o + dim] += pull
                hess[o:o + dim, o:o + dim] += block
            if v in offsets:
                o = offsets[v]
                grad[o:o + dim] -= pull
                hess[o:o + dim, o:o + dim] += block
            if u in offsets and v in offsets:
                ou, ov = offsets[u], offsets[v]
                hess[ou:ou + dim, ov:ov + dim] -= block
                hess[ov:ov + dim, ou:ou + dim] -= block
        return grad, hess

    def value(z):
        total = 0.0
        for (u, v), w in weights.items():
            total += w * float(np.linalg.norm(point(z, u) - point(z, v)))
        return total

    z = np.concatenate([g.positions[b] for b in order])
    best_val = value(z)
    for _ in range(20):
        grad, hess = grad_hess(z)
        if grad is None or np.linalg.norm(grad, np.inf) <= 1e-13 * wsum:
            break
        try:
            step = np.linalg.solve(hess + 1e-14 * wsum / diam * np.eye(size), -grad)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(step)):
            break
        damp = 1.0
        moved = False
        for _ in range(20):
            cand = z + damp * step
            val = value(cand)
            if val <= best_val + 1e-14 * max(1.0, best_val):
                z, best_val, moved = cand, min(val, best_val), True
                break
            damp *= 0.5
        if not moved:
            break
    if best_val > current_cost + 1e-12 * max(1.0, current_cost):
        return current_cost
    for b in order:
        g.positions[b] = z[offsets[b]:offsets[b] + dim].copy()
    return float(best_val)


def relax_geometry(instance: TransportInstance, topology: Topology,
                   tol: float | None = None, max_sweeps: int = 100000) -> RelaxResult:
    """Relax branching coordinates for one fixed topology.

    Block-coordinate descent moves each branching point to the weighted
    Fermat point of its neighbours (weights c(|edge mass|)), preceded by a
    smoothing schedule and followed by a collapse-and-recheck loop (at most
    3 rounds): branching points within ``collapse * diameter`` of an
    adjacent vertex are merged outright, and a short branching-branching
    edge is contracted when re-relaxing the contracted topology does not
    increase the cost.  The best iterate is returned even without
    convergence, flagged in the result.
    """
    tol = DEFAULT_TOL.relaxation if tol is None else tol
    exact_budget = min(400, max_sweeps)
    geo = _Geometry(instance, topology)
    trace: list[float] = []

    def extend_trace(segment: list[float]) -> None:
        floor = trace[-1] if trace else np.inf
        for c in segment:
            floor = min(floor, c)
            trace.append(floor)

    cost, converged, sweeps_used, seg = _relax_in_place(geo, tol, exact_budget)
    extend_trace(seg)
    diam = max(geo.diameter, 1e-300)
    rounds = 0
    for _ in range(3):
        hard = [key for length, key in geo.branch_edge_lengths()
                if length <= DEFAULT_TOL.collapse * diam]
        if hard:
            geo.contract(hard[0])
            rounds += 1
            cost, converged, sw, seg = _relax_in_place(geo, tol, exact_budget,
                                                       skip_schedule=True)
            sweeps_used += sw
            extend_trace(seg)
            continue
        merged = False
        for length, key in geo.branch_edge_lengths():
            u, v = key
            if u < geo.n_terminals or v < geo.n_terminals:
                continue
            if length > 1e-2 * diam:
                break
            candidate = geo.clone()
            candidate.contract(key)
            cand_cost, cand_conv, sw, seg = _relax_in_place(candidate, tol, exact_budget,
                                                            skip_schedule=True)
            sweeps_used += sw
            if cand_cost <= cost + 1e-12 * max(1.0, cost):
                geo, cost, converged = candidate, cand_cost, cand_conv
                extend_trace(seg)
                rounds += 1
                merged = True
                break
        if not merged:
            break

    polished = _joint_polish(geo, cost)
    if polished < cost:
        cost = polished
        extend_trace([polished])
    flow = normalize_flow(_build_flow(geo))
    fc = gilbert_functional(flow, instance.cost)
    return RelaxResult(flow=flow, cost=fc.total, sweeps=sweeps_used,
                       converged=converged, collapse_rounds=rounds,
                       cost_trace=tuple(trace))


def _build_flow(geo: _Geometry) -> Flow:
    names: dict[int, str] = {}
    vertices: list[Vertex] = []
    for i in range(geo.n_terminals):
        names[i] = f"t{i}"
        vertices.append(Vertex(names[i], tuple(float(x) for x in geo.terminal_pts[i]),
                               KIND_TERMINAL))
    for j, b in enumerate(geo.branches):
        names[b] = f"b{j}"
        vertices.append(Vertex(names[b], tuple(float(x) for x in geo.positions[b]),
                               KIND_BRANCHING))
    edges = [Edge(names[u], names[v], m) for (u, v), m in sorted(geo.edges.items())]
    return Flow(tuple(vertices), tuple(edges))


@dataclass(frozen=True)
class SolveReport:
    best_flow: Flow
    best_cost: float
    best_encoding: str
    per_topology: tuple[tuple[str, float, bool], ...]
    degree_histogram: dict[int, int]
    total_sweeps: int
    all_converged: bool

    def to_dict(self) -> dict:
        return {
            "best_cost": self.best_cost,
            "best_encoding": self.best_encoding,
            "degree_histogram": {str(k): v for k, v in sorted(self.degree_histogram.items())},
            "total_sweeps": self.total_sweeps,
            "all_converged": self.all_converged,
            "per_topology": [{"encoding": e, "cost": c, "converged": cv}
                             for e, c, cv in self.per_topology],
        }


def _relax_task(payload) -> tuple[str, float, bool, int, Flow]:
    instance, topology, tol = payload
    res = relax_geometry(instance, topology, tol=tol)
    return topology.encoding, res.cost, res.converged, res.sweeps, res.flow


def cost_of(flow: Flow, instance: TransportInstance) -> FlowCost:
    return gilbert_functional(flow, instance.cost)


def solve(instance: TransportInstance, max_degree: int, tol: float | None = None,
          threads: int = 1) -> SolveReport:
    """Relax every enumerated topology and report the cheapest flow.

    The merge is a deterministic min-reduction keyed by (cost, canonical
    encoding), so results are identical for any thread count.
    """
    if isinstance(instance.cost, TabulatedCost):
        warnings.warn("solving with a tabulated cost model; optimality is only as good "
                      "as the table resolution", stacklevel=2)
    pts, nets = instance.terminals()
    n = pts.shape[0]
    if not (3 <= n <= MAX_TERMINALS):
        raise InputError(f"solver accepts 3..{MAX_TERMINALS} terminals, got {n}")
    if len({tuple(p) for p in pts.tolist()}) != n:
        raise InputError("terminal points must be pairwise distinct")
    topologies = enumerate_topologies(n, max_degree)
    payloads = [(instance, t, tol) for t in topologies]
    if threads > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=threads) as pool:
            raw = list(pool.map(_relax_task, payloads, chunksize=4))
    else:
        raw = [_relax_task(p) for p in payloads]
    per = []
    best: tuple[tuple[float, str], Flow] | None = None
    total_sweeps = 0
    all_conv = True
    for enc, cost, conv, sweeps, flow in raw:
        per.append((enc, cost, conv))
        total_sweeps += sweeps
        all_conv = all_conv and conv
        key = (cost, enc)
        if best is None or key < best[0]:
            best = (key, flow)
    hist: dict[int, int] = {}
    for v in best[1].vertices:
        if v.kind == KIND_BRANCHING:
            d = best[1].degree(v.id)
            hist[d] = hist.get(d, 0) + 1
    return SolveReport(best_flow=best[1], best_cost=best[0][0],
                       best_encoding=best[0][1], per_topology=tuple(per),
                       degree_histogram=hist, total_sweeps=total_sweeps,
                       all_converged=all_conv)
