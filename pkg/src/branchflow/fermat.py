"""Weighted Fermat-Torricelli points and the local branching geometry.

The minimizer of L(X) = sum_i w_i ||p_i - X|| is the basic primitive for
placing branching points.  The solver is a damped Weiszfeld fixed-point
iteration with the standard vertex handling: anchor points are tested with
the subgradient criterion ||sum_{j != i} w_j u_j|| <= w_i, and an iterate
that lands on a non-optimal anchor is pushed along the steepest descent
direction instead of stalling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import DEFAULT_TOL
from .costs import CostModel
from .errors import InputError


@dataclass(frozen=True)
class WeightedPoints:
    """Anchor points with nonnegative weights, at least two of them positive."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        w = np.asarray(self.weights, dtype=float).ravel()
        if pts.ndim != 2 or pts.shape[0] != w.shape[0] or pts.shape[0] < 2:
            raise InputError("need n >= 2 points with matching weights")
        if not np.all(np.isfinite(pts)) or not np.all(np.isfinite(w)):
            raise InputError("points and weights must be finite")
        if np.any(w < 0):
            raise InputError("weights must be nonnegative")
        if int((w > 0).sum()) < 2:
            raise InputError("at least two weights must be strictly positive")
        pts = pts.copy()
        w = w.copy()
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dimension(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class FermatResult:
    point: np.ndarray
    value: float
    at_vertex: int | None
    iterations: int
    converged: bool


def _objective(points: np.ndarray, weights: np.ndarray, x: np.ndarray) -> float:
    return float(weights @ np.linalg.norm(points - x, axis=1))


def _merge_coincident(points: np.ndarray, weights: np.ndarray, snap: float):
    """Add up weights of coincident anchors; keep a map to original indices."""
    reps: list[int] = []
    groups: list[list[int]] = []
    for i in range(points.shape[0]):
        for gi, r in enumerate(reps):
            if np.linalg.norm(points[i] - points[r]) <= snap:
                groups[gi].append(i)
                break
        else:
            reps.append(i)
            groups.append([i])
    merged_pts = points[reps]
    merged_w = np.array([weights[g].sum() for g in groups])
    return merged_pts, merged_w, groups


def _vertex_residual(points: np.ndarray, weights: np.ndarray, index: int) -> float:
    """Norm of the pulled-sum of unit vectors toward the other anchors."""
    diff = np.delete(points, index, axis=0) - points[index]
    w = np.delete(weights, index)
    dn = np.linalg.norm(diff, axis=1)
    keep = dn > 0
    units = diff[keep] / dn[keep, None]
    return float(np.linalg.norm((w[keep, None] * units).sum(axis=0)))


def vertex_optimality_test(wp: WeightedPoints, index: int, tol: float | None = None) -> bool:
    """Whether the minimizer of L sits at the given anchor.

    Coincident anchors are merged (weights added) before applying the
    subgradient criterion.
    """
    if not (0 <= index < wp.n):
        raise InputError(f"vertex index {index} out of range")
    scale = float(np.abs(wp.points).max()) + 1.0
    pts, w, groups = _merge_coincident(wp.points, wp.weights, DEFAULT_TOL.vertex_snap * scale)
    gi = next(k for k, g in enumerate(groups) if index in g)
    tol = DEFAULT_TOL.rel if tol is None else tol
    slack = w[gi] - _vertex_residual(pts, w, gi)
    return slack >= -tol * float(wp.weights.sum())


def _collinear_frame(points: np.ndarray, tol: float) -> np.ndarray | None:
    """Unit direction if the anchors are collinear (affine rank <= 1)."""
    centered = points - points.mean(axis=0)
    if points.shape[0] == 1:
        return None
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    if s.size == 0 or s[0] <= tol:
        return vt[0] if vt.shape[0] else None  # all points coincide
    if s.size > 1 and s[1] > tol * s[0]:
        return None
    return vt[0]


def _weighted_median_on_line(points: np.ndarray, weights: np.ndarray,
                             direction: np.ndarray) -> int:
    """Index of an anchor minimizing L along the common line."""
    t = points @ direction
    order = np.argsort(t, kind="stable")
    half = weights.sum() / 2.0
    acc = 0.0
    for idx in order:
        acc += weights[idx]
        if acc >= half - 1e-15 * weights.sum():
            return int(idx)
    return int(order[-1])


def weighted_fermat(wp: WeightedPoints, grad_tol: float | None = None,
                    max_iter: int = 10000,
                    x0: np.ndarray | None = None) -> FermatResult:
    """Global minimizer of L(X) = sum w_i ||p_i - X||.

    Returns the minimizer, the minimum, and the anchor index when the
    minimizer coincides with an input point.  Deterministic: initialization
    at the weighted centroid (or the caller-supplied warm start ``x0``), no
    randomness.  Collinear anchor sets fall back to the analytic weighted
    median on the line (the minimizer is not unique there; an anchor
    attaining the minimum is returned).
    """
    grad_tol = DEFAULT_TOL.weiszfeld_gradient if grad_tol is None else grad_tol
    pts_orig, w_orig = wp.points, wp.weights
    scale = float(np.abs(pts_orig).max()) + 1.0
    snap = DEFAULT_TOL.vertex_snap * scale
    pts, w, groups = _merge_coincident(pts_orig, w_orig, snap)
    wsum = float(w.sum())

    def result_at_vertex(gi: int, iterations: int) -> FermatResult:
        x = pts[gi].copy()
        return FermatResult(point=x, value=_objective(pts_orig, w_orig, x),
                            at_vertex=groups[gi][0], iterations=iterations, converged=True)

    if pts.shape[0] == 1:  # all anchors coincide
        return result_at_vertex(0, 0)

    # anchor optimality first: cheap, exact, and it terminates the boundary
    # cases (w_i >= sum of the rest) without any iteration
    for gi in range(pts.shape[0]):
        if _vertex_residual(pts, w, gi) <= w[gi] * (1.0 + 1e-12) + 1e-15 * wsum:
            return result_at_vertex(gi, 0)

    line = _collinear_frame(pts, 1e-12)
    if line is not None:
        return result_at_vertex(_weighted_median_on_line(pts, w, line), 0)

    if x0 is not None and np.all(np.isfinite(x0)):
        x = np.asarray(x0, dtype=float).copy()
    else:
        x = (w[:, None] * pts).sum(axis=0) / wsum
    value = _objective(pts, w, x)
    damping = 1.0
    for it in range(1, max_iter + 1):
        dist = np.linalg.norm(pts - x, axis=1)
        near = int(np.argmin(dist))
        if dist[near] <= snap:
            # iterate landed on an anchor that already failed its vertex
            # test: step along the steepest descent direction away from it
            diff = np.delete(pts, near, axis=0) - pts[near]
            dn = np.linalg.norm(diff, axis=1)
            pull = ((np.delete(w, near) / dn)[:, None] * diff).sum(axis=0)
            slope = np.linalg.norm(pull) - w[near]
            if slope <= 0:
                return result_at_vertex(near, it)
            step_dir = pull / np.linalg.norm(pull)
            step = dn.min() / 2.0
            cand = pts[near] + step * step_dir
            while _objective(pts, w, cand) > value and step > snap:
                step /= 2.0
                cand = pts[near] + step * step_dir
            x = cand
            value = _objective(pts, w, x)
            continue
        inv = w / dist
        grad = (inv[:, None] * (x - pts)).sum(axis=0)
        if np.linalg.norm(grad) <= grad_tol * wsum:
            return FermatResult(point=x, value=_objective(pts_orig, w_orig, x),
                                at_vertex=None, iterations=it, converged=True)
        target = (inv[:, None] * pts).sum(axis=0) / inv.sum()
        cand = x + damping * (target - x)
        cand_value = _objective(pts, w, cand)
        if cand_value > value + 1e-15 * wsum * scale:
            damping = max(0.25, damping / 2.0)  # rare safeguard
            cand = x + damping * (target - x)
            cand_value = _objective(pts, w, cand)
        else:
            damping = min(1.0, damping * 1.5)
        x, value = cand, cand_value
    return FermatResult(point=x, value=_objective(pts_orig, w_orig, x),
                        at_vertex=None, iterations=max_iter, converged=False)


@dataclass(frozen=True)
class TripleAngles:
    """Pairwise angles (radians) around a triple branching point."""

    masses: tuple[float, float, float]
    theta12: float
    theta13: float
    theta23: float
    flat: bool  # some angle degenerate (equality in subadditivity)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.theta12, self.theta13, self.theta23)


def triple_angles(cost: CostModel, m1: float, m2: float, m3: float,
                  tol: float | None = None) -> TripleAngles:
    """Angles between the three edge directions at a branching point.

    They equal the exterior angles of the triangle with sides c(|m1|),
    c(|m2|), c(|m3|):  cos(theta_ij) = (c^2(|m_i + m_j|) - c^2(m_i)
    - c^2(m_j)) / (2 c(m_i) c(m_j)).
    """
    tol = DEFAULT_TOL.mass_balance if tol is None else tol
    masses = (float(m1), float(m2), float(m3))
    scale = max(abs(m) for m in masses)
    if scale == 0 or abs(sum(masses)) > tol * max(1.0, scale):
        raise InputError(f"triple masses must sum to zero, got {masses}")
    if any(m == 0 for m in masses):
        raise InputError("triple masses must be nonzero")
    c = [float(cost.evaluate(abs(m))) for m in masses]
    flat = False
    angles = {}
    for (i, j) in ((0, 1), (0, 2), (1, 2)):
        k = 3 - i - j
        num = c[k] ** 2 - c[i] ** 2 - c[j] ** 2
        den = 2.0 * c[i] * c[j]
        cosv = num / den
        if abs(abs(cosv) - 1.0) <= 1e-12:
            flat = True
        angles[(i, j)] = math.acos(min(1.0, max(-1.0, cosv)))
    return TripleAngles(masses=masses, theta12=angles[(0, 1)],
                        theta13=angles[(0, 2)], theta23=angles[(1, 2)], flat=flat)


@dataclass(frozen=True)
class TripodReport:
    """Outcome of replacing two adjacent edges by a tripod."""

    delta: float  # tripod cost minus two-edge cost; <= 0 always
    branch_point: np.ndarray
    improved: bool
    original_cost: float
    tripod_cost: float
    at_apex: bool


def tripod_test(cost: CostModel, apex, q1, m1: float, q2, m2: float,
                tol: float | None = None) -> TripodReport:
    """Compare edges apex-q1 (mass m1) and apex-q2 (mass m2) with a tripod.

    The competing tripod routes both masses through a new branching point,
    its legs weighted c(|m1|), c(|m2|) and c(|m1 + m2|).  Since the original
    configuration is the tripod with the branching point at the apex, the
    cost delta is never positive; delta < -tol flags a strict improvement.
    """
    tol = DEFAULT_TOL.certificate if tol is None else tol
    apex = np.asarray(apex, dtype=float)
    q1 = np.asarray(q1, dtype=float)
    q2 = np.asarray(q2, dtype=float)
    if m1 == 0 or m2 == 0:
        raise InputError("tripod masses must be nonzero")
    if np.array_equal(apex, q1) or np.array_equal(apex, q2) or np.array_equal(q1, q2):
        raise InputError("apex and endpoints must be pairwise distinct")
    w_apex = float(cost.evaluate(abs(m1 + m2)))  # c(0) = 0 drops the apex leg
    w1 = float(cost.evaluate(abs(m1)))
    w2 = float(cost.evaluate(abs(m2)))
    original = w1 * float(np.linalg.norm(apex - q1)) + w2 * float(np.linalg.norm(apex - q2))
    wp = WeightedPoints(np.vstack([apex, q1, q2]), np.array([w_apex, w1, w2]))
    res = weighted_fermat(wp)
    delta = res.value - original
    return TripodReport(delta=float(delta), branch_point=res.point,
                        improved=delta < -tol, original_cost=original,
                        tripod_cost=res.value, at_apex=res.at_vertex == 0)
