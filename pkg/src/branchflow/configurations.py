"""Local configurations at branching points and the degree-bound predicates.

A star configuration is the local picture at a branching point: unit edge
directions e_1..e_k with signed masses summing to zero.  It is satisfactory
when every pair obeys

    <e_i, e_j>  <=  (c^2(m_i + m_j) - c^2(m_i) - c^2(m_j)) / (2 c(m_i) c(m_j)),

the necessary condition for local optimality (violating pairs admit a
cheaper tripod).  ``search_satisfactory`` probes feasibility numerically by
maximizing the minimum pair slack over direction tuples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .config import DEFAULT_TOL
from .costs import CostModel, PowerCost
from .errors import InputError
from .flows import Flow, incoming_mass

VERDICT_ONLY_TRIPLE = "only_triple"
VERDICT_AT_MOST_D_PLUS_1 = "at_most_d_plus_1"
VERDICT_LOWER_D_PLUS_1_UPPER_OPEN = "lower_bound_d_plus_1_upper_open"


@dataclass(frozen=True)
class StarConfiguration:
    """Unit directions with signed masses around one point.

    ``require_balance=False`` admits partial configurations (used when
    analysing the pair slack of a subset of edges); full configurations at a
    branching point always balance.
    """

    directions: np.ndarray
    masses: np.ndarray
    require_balance: bool = True

    def __post_init__(self):
        dirs = np.atleast_2d(np.asarray(self.directions, dtype=float))
        m = np.asarray(self.masses, dtype=float).ravel()
        if dirs.shape[0] != m.shape[0] or dirs.shape[0] < 2:
            raise InputError("need k >= 2 directions with matching masses")
        norms = np.linalg.norm(dirs, axis=1)
        if np.any(np.abs(norms - 1.0) > DEFAULT_TOL.unit_vector):
            worst = int(np.argmax(np.abs(norms - 1.0)))
            raise InputError(f"direction {worst} is not unit (norm {norms[worst]})")
        if np.any(m == 0.0) or not np.all(np.isfinite(m)):
            raise InputError("masses must be nonzero and finite")
        if self.require_balance:
            scale = max(1.0, float(np.abs(m).sum()))
            if abs(float(m.sum())) > DEFAULT_TOL.mass_balance * scale:
                raise InputError(f"masses must sum to zero, got {float(m.sum())}")
        dirs = dirs.copy()
        m = m.copy()
        dirs.setflags(write=False)
        m.setflags(write=False)
        object.__setattr__(self, "directions", dirs)
        object.__setattr__(self, "masses", m)

    @property
    def k(self) -> int:
        return self.directions.shape[0]

    @property
    def dimension(self) -> int:
        return self.directions.shape[1]


def pair_rhs(cost: CostModel, mi: float, mj: float) -> float:
    """Right-hand side of the pairwise inner-product bound."""
    ci = float(cost.evaluate(abs(mi)))
    cj = float(cost.evaluate(abs(mj)))
    cij = float(cost.evaluate(abs(mi + mj)))
    return (cij * cij - ci * ci - cj * cj) / (2.0 * ci * cj)


@dataclass(frozen=True)
class SlackMatrix:
    """Pairwise slack rhs(i, j) - <e_i, e_j>; diagonal entries are unused."""

    matrix: np.ndarray
    min_slack: float
    is_satisfactory: bool
    tol: float

    def worst_pair(self) -> tuple[int, int]:
        k = self.matrix.shape[0]
        mask = np.eye(k, dtype=bool)
        masked = np.where(mask, np.inf, self.matrix)
        i, j = np.unravel_index(int(np.argmin(masked)), masked.shape)
        return (int(min(i, j)), int(max(i, j)))


def satisfactory_slack(cost: CostModel, config: StarConfiguration,
                       tol: float | None = None) -> SlackMatrix:
    """Slack matrix of the pairwise bounds; satisfactory iff min >= -tol."""
    tol = DEFAULT_TOL.satisfactory if tol is None else tol
    k = config.k
    gram = config.directions @ config.directions.T
    rhs = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            rhs[i, j] = rhs[j, i] = pair_rhs(cost, config.masses[i], config.masses[j])
    slack = rhs - gram
    np.fill_diagonal(slack, 0.0)
    off = slack[~np.eye(k, dtype=bool)]
    min_slack = float(off.min())
    slack.setflags(write=False)
    return SlackMatrix(matrix=slack, min_slack=min_slack,
                       is_satisfactory=min_slack >= -tol, tol=tol)


def induced_configuration(flow: Flow, vertex_id: str) -> StarConfiguration:
    """Local star configuration at a flow vertex (directions and incoming masses)."""
    pos = flow.points()
    x = pos[vertex_id]
    incident = flow.incident(vertex_id)
    if len(incident) < 2:
        raise InputError(f"vertex {vertex_id} has degree < 2")
    dirs = []
    masses = []
    for e in incident:
        other = e.u if e.v == vertex_id else e.v
        d = pos[other] - x
        n = float(np.linalg.norm(d))
        if n == 0:
            raise InputError(f"zero-length edge at {vertex_id}")
        dirs.append(d / n)
        masses.append(incoming_mass(e, vertex_id))
    return StarConfiguration(np.asarray(dirs), np.asarray(masses))


@dataclass(frozen=True)
class DegreeBound:
    """Maximal branching degree classification for the power cost."""

    p: float
    d: int
    verdict: str
    max_degree: int | None  # proven upper bound, when known
    lower_bound: int  # largest degree known constructible

    def to_dict(self) -> dict:
        return {"p": self.p, "d": self.d, "verdict": self.verdict,
                "max_degree": self.max_degree, "lower_bound": self.lower_bound}


def degree_bound(p: float, d: int) -> DegreeBound:
    """Classify the attainable branching degree for exponent p in R^d.

    Degree exactly three when d = 2 or p < 1/2; at most d + 1 at p = 1/2
    with d >= 3 (and d + 1 is attained); for p > 1/2, d + 1 is attained and
    no dimension-only upper bound is known.  Exponents within 1e-15 of 1/2
    are treated as exactly 1/2 (the phase boundary is explicit).
    """
    if not (0.0 < p < 1.0):
        raise InputError(f"exponent must lie in (0, 1), got {p}")
    if d < 2:
        raise InputError(f"dimension must be >= 2, got {d}")
    if abs(p - 0.5) <= 1e-15:
        p = 0.5
    if d == 2 or p < 0.5:
        return DegreeBound(p=p, d=d, verdict=VERDICT_ONLY_TRIPLE, max_degree=3, lower_bound=3)
    if p == 0.5:
        return DegreeBound(p=p, d=d, verdict=VERDICT_AT_MOST_D_PLUS_1,
                           max_degree=d + 1, lower_bound=d + 1)
    return DegreeBound(p=p, d=d, verdict=VERDICT_LOWER_D_PLUS_1_UPPER_OPEN,
                       max_degree=None, lower_bound=d + 1)


def verify_half_p_bound(config: StarConfiguration, p: float = 0.5,
                        tol: float | None = None) -> bool:
    """Angular characterization at the p = 1/2 phase boundary.

    For a satisfactory configuration at p = 1/2, same-sign mass pairs meet
    at angles >= pi/2 and opposite-sign pairs at angles > pi/2; a family of
    pairwise non-acute directions with every opposite-sign pair strictly
    obtuse has at most d + 1 members.  Returns True iff both the angle
    pattern and the k <= d + 1 count hold.
    """
    if abs(p - 0.5) > 1e-15:
        raise InputError(f"the angular bound applies only at p = 1/2, got p = {p}")
    tol = DEFAULT_TOL.satisfactory if tol is None else tol
    cost = PowerCost(0.5)
    sm = satisfactory_slack(cost, config, tol=tol)
    if not sm.is_satisfactory:
        raise InputError("configuration is not satisfactory; the bound does not apply")
    gram = config.directions @ config.directions.T
    m = config.masses
    for i in range(config.k):
        for j in range(i + 1, config.k):
            same_sign = m[i] * m[j] > 0
            if same_sign and gram[i, j] > tol:
                return False
            if not same_sign and gram[i, j] >= tol:
                return False
    return config.k <= config.dimension + 1


@dataclass(frozen=True)
class SearchResult:
    config: StarConfiguration
    min_slack: float
    restart_index: int
    restarts: int


def _pair_list(k: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(k) for j in range(i + 1, k)]


def _pair_slacks(E: np.ndarray, rhs: np.ndarray, pairs: list[tuple[int, int]]) -> np.ndarray:
    return np.array([rhs[a] - float(E[i] @ E[j]) for a, (i, j) in enumerate(pairs)])


def _softmin_ascent(E: np.ndarray, rhs: np.ndarray, pairs, betas, iters: int,
                    step: float) -> np.ndarray:
    """Projected gradient ascent on the log-sum-exp soft minimum of slacks."""
    k, d = E.shape
    for beta in betas:
        eta = step
        for _ in range(iters):
            s = _pair_slacks(E, rhs, pairs)
            w = np.exp(-beta * (s - s.min()))
            lam = w / w.sum()
            G = np.zeros_like(E)
            for a, (i, j) in enumerate(pairs):
                G[i] -= lam[a] * E[j]
                G[j] -= lam[a] * E[i]
            G -= (G * E).sum(axis=1, keepdims=True) * E  # tangent projection
            E = E + eta * G
            E /= np.linalg.norm(E, axis=1, keepdims=True)
    return E


def _maxmin_polish(E: np.ndarray, rhs: np.ndarray, pairs) -> np.ndarray:
    """Exact max-min refinement: maximize t s.t. slack >= t on unit spheres."""
    k, d = E.shape
    npair = len(pairs)

    def unpack(z):
        return z[:-1].reshape(k, d), z[-1]

    def neg_t(z):
        return -z[-1]

    def neg_t_jac(z):
        j = np.zeros_like(z)
        j[-1] = -1.0
        return j

    def ineq(z):
        M, t = unpack(z)
        return _pair_slacks(M, rhs, pairs) - t

    def ineq_jac(z):
        M, _ = unpack(z)
        J = np.zeros((npair, z.size))
        for a, (i, j) in enumerate(pairs):
            J[a, i * d:(i + 1) * d] = -M[j]
            J[a, j * d:(j + 1) * d] = -M[i]
            J[a, -1] = -1.0
        return J

    def eqs(z):
        M, _ = unpack(z)
        return (M * M).sum(axis=1) - 1.0

    def eqs_jac(z):
        M, _ = unpack(z)
        J = np.zeros((k, z.size))
        for i in range(k):
            J[i, i * d:(i + 1) * d] = 2.0 * M[i]
        return J

    z0 = np.concatenate([E.ravel(), [float(_pair_slacks(E, rhs, pairs).min())]])
    res = minimize(neg_t, z0, jac=neg_t_jac, method="SLSQP",
                   constraints=[{"type": "ineq", "fun": ineq, "jac": ineq_jac},
                                {"type": "eq", "fun": eqs, "jac": eqs_jac}],
                   options={"maxiter": 300, "ftol": 1e-14})
    M, _ = unpack(res.x)
    norms = np.linalg.norm(M, axis=1, keepdims=True)
    if np.any(norms == 0) or not np.all(np.isfinite(M)):
        return E
    return M / norms


def search_satisfactory(cost: CostModel, d: int, masses, restarts: int = 100,
                        seed: int = 0, pga_iters: int = 60,
                        betas: tuple[float, ...] = (1e1, 1e2, 1e3, 1e4),
                        polish: bool = True) -> SearchResult:
    """Best-found configuration maximizing the minimum pair slack.

    Multi-start projected gradient ascent on the soft minimum (temperature
    schedule ``betas``), each restart polished by an exact max-min solve.
    A result with min_slack >= -tol certifies that a satisfactory
    configuration exists; a negative result is evidence (not proof) of
    infeasibility.  Restarts are seeded and merged deterministically by
    (min_slack, restart index).
    """
    m = np.asarray(masses, dtype=float).ravel()
    if m.size < 2:
        raise InputError("need at least two masses")
    if np.any(m == 0.0):
        raise InputError("masses must be nonzero")
    scale = max(1.0, float(np.abs(m).sum()))
    if abs(float(m.sum())) > DEFAULT_TOL.mass_balance * scale:
        raise InputError(f"masses must sum to zero, got {float(m.sum())}")
    if d < 1:
        raise InputError("dimension must be >= 1")
    k = m.size
    pairs = _pair_list(k)
    rhs = np.array([pair_rhs(cost, m[i], m[j]) for (i, j) in pairs])
    best_slack = -np.inf
    best_E = None
    best_restart = -1
    root = np.random.default_rng(seed)
    seeds = root.integers(0, 2 ** 63 - 1, size=restarts)
    for r in range(restarts):
        rng = np.random.default_rng(seeds[r])
        E = rng.standard_normal((k, d))
        E /= np.linalg.norm(E, axis=1, keepdims=True)
        E = _softmin_ascent(E, rhs, pairs, betas, pga_iters, step=0.2)
        if polish:
            E = _maxmin_polish(E, rhs, pairs)
        slack = float(_pair_slacks(E, rhs, pairs).min())
        if slack > best_slack:
            best_slack = slack
            best_E = E
            best_restart = r
    config = StarConfiguration(best_E, m)
    return SearchResult(config=config, min_slack=best_slack,
                        restart_index=best_restart, restarts=restarts)
