"""Concave edge-cost models and their analytic predicates.

The cost of moving mass ``m`` along a unit length is ``c(|m|)`` where ``c`` is
concave, nondecreasing and ``c(0) = 0``.  Two concrete models are provided:
the power law ``c(x) = x**p`` with ``0 < p < 1`` and a tabulated concave
function interpolated piecewise-linearly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.integrate import quad

from .errors import InputError


@dataclass(frozen=True)
class PowerCost:
    """c(x) = |x| ** p for 0 < p < 1."""

    p: float

    def __post_init__(self):
        if not (0.0 < float(self.p) < 1.0):
            raise InputError(f"power cost exponent must lie in (0, 1), got {self.p}")

    def evaluate(self, m):
        """Cost of a (possibly signed) mass; even in m, exact 0 at 0."""
        return np.abs(m) ** self.p

    def squared(self, m):
        """c(|m|)**2, computed without the intermediate square root."""
        return np.abs(m) ** (2.0 * self.p)

    def __call__(self, m):
        return self.evaluate(m)


@dataclass(frozen=True)
class TabulatedCost:
    """Concave nondecreasing samples, interpolated piecewise-linearly.

    The table must start at (0, 0).  Concavity and monotonicity are checked
    on the sample grid at construction; queries outside the tabulated range
    raise (extrapolating a concave table is not well defined).
    """

    xs: tuple[float, ...]
    ys: tuple[float, ...]

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        ys = np.asarray(self.ys, dtype=float)
        if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2:
            raise InputError("tabulated cost needs matching 1-d xs/ys with >= 2 samples")
        if xs[0] != 0.0 or ys[0] != 0.0:
            raise InputError("tabulated cost must start at (0, 0)")
        if np.any(np.diff(xs) <= 0):
            raise InputError("tabulated cost abscissae must be strictly increasing")
        if np.any(ys < 0) or np.any(np.diff(ys) < 0):
            raise InputError("tabulated cost must be nonnegative and nondecreasing")
        slopes = np.diff(ys) / np.diff(xs)
        if np.any(np.diff(slopes) > 1e-12 * max(1.0, float(np.abs(slopes).max()))):
            raise InputError("tabulated cost is not concave (secant slopes increase)")
        object.__setattr__(self, "xs", tuple(float(x) for x in xs))
        object.__setattr__(self, "ys", tuple(float(y) for y in ys))

    def evaluate(self, m):
        x = np.abs(np.asarray(m, dtype=float))
        hi = self.xs[-1]
        if np.any(x > hi * (1.0 + 1e-15)):
            raise InputError(f"tabulated cost queried at |m|={float(np.max(x))} "
                             f"outside range [0, {hi}]")
        out = np.interp(x, self.xs, self.ys)
        return out if out.ndim else float(out)

    def squared(self, m):
        return np.asarray(self.evaluate(m)) ** 2

    def __call__(self, m):
        return self.evaluate(m)


CostModel = Union[PowerCost, TabulatedCost]


def subadditivity_check(cost: CostModel, m1: float, m2: float) -> float:
    """Slack c(m1) + c(m2) - c(m1 + m2); nonnegative for any valid model."""
    if m1 <= 0 or m2 <= 0:
        raise InputError("subadditivity check needs strictly positive masses")
    return float(cost.evaluate(m1) + cost.evaluate(m2) - cost.evaluate(m1 + m2))


def squared_cost_derivative_is_strictly_convex(
    cost: CostModel, grid: np.ndarray | None = None
) -> tuple[bool, float | None]:
    """Whether (c^2)' is strictly convex on (0, inf).

    For the power law (c^2)' = 2p * x**(2p-1), which is strictly convex
    exactly when 2p - 1 < 0.  For tabulated models the derivative of c^2 is
    estimated by central differences on the sample grid and its second
    differences must all be positive.

    Returns (verdict, witness) where witness locates a convexity failure
    (None when the verdict is True).
    """
    if isinstance(cost, PowerCost):
        if cost.p < 0.5:
            return True, None
        # failure is global for p >= 1/2; report a representative abscissa
        return False, 1.0
    xs = np.asarray(cost.xs, dtype=float) if grid is None else np.asarray(grid, dtype=float)
    xs = xs[xs > 0]
    if xs.size < 4:
        raise InputError("need at least 4 positive grid points to test (c^2)'")
    c2 = np.asarray(cost.squared(xs), dtype=float)
    mid = 0.5 * (xs[:-1] + xs[1:])
    g = np.diff(c2) / np.diff(xs)
    # second difference of g on the (possibly nonuniform) midpoint grid
    d1 = np.diff(g) / np.diff(mid)
    curls = np.diff(d1)
    scale = max(1.0, float(np.abs(g).max()))
    bad = np.nonzero(curls <= -1e-12 * scale)[0]
    if bad.size:
        return False, float(mid[bad[0] + 1])
    if np.all(curls > 1e-12 * scale):
        return True, None
    # flat second derivative: convex but not strictly
    flat = np.nonzero(np.abs(curls) <= 1e-12 * scale)[0]
    return False, float(mid[flat[0] + 1])


def sin_squared_power_integral(p: float, t: float, epsabs: float = 1e-11) -> float:
    """I(t) = integral_0^inf sin^2(t x) x^(-2p-1) dx for 0 < p < 1.

    Split at x = 1/t.  On [0, 1/t] the integrand is summed by the alternating
    series sin^2(y) = sum_k (-1)^(k+1) 2^(2k-1) y^(2k) / (2k)!, which after
    term-wise integration gives t^(2p) * sum_k (-1)^(k+1) 2^(2k-1) /
    ((2k)! (2k-2p)) and converges factorially.  On [1/t, inf) sin^2 is
    replaced by its mean 1/2 (analytic tail) plus the oscillatory remainder
    -cos(2tx)/2, a Fourier integral evaluated by adaptive quadrature with
    extrapolated tail handling.
    """
    if not (0.0 < p < 1.0):
        raise InputError(f"decomposition integral needs 0 < p < 1, got {p}")
    if t <= 0:
        raise InputError(f"decomposition integral needs t > 0, got {t}")
    head_sum = 0.0
    for k in range(1, 80):
        term = (-1.0) ** (k + 1) * 2.0 ** (2 * k - 1) / (math.factorial(2 * k) * (2 * k - 2 * p))
        head_sum += term
        if abs(term) < 1e-18 * max(1.0, abs(head_sum)):
            break
    head = t ** (2.0 * p) * head_sum
    a = 1.0 / t
    mean_tail = 0.5 * a ** (-2.0 * p) / (2.0 * p)
    osc, err = quad(lambda x: x ** (-2.0 * p - 1.0), a, np.inf,
                    weight="cos", wvar=2.0 * t, epsabs=epsabs, limit=500)
    if not math.isfinite(osc) or err > 1e-6 * max(1.0, abs(head + mean_tail)):
        raise InputError(f"oscillatory tail quadrature did not converge (t={t}, p={p})")
    return head + mean_tail - 0.5 * osc


def decomposition_exponent(p: float, t_grid, epsabs: float = 1e-11) -> float:
    """Least-squares slope of log I(t) against log t.

    I is the sin^2 power-law integral above; the slope recovers twice the
    cost exponent, which is the scaling contract this routine exists to
    check numerically.
    """
    ts = np.asarray(t_grid, dtype=float)
    if ts.ndim != 1 or ts.size < 3:
        raise InputError("t grid needs at least 3 points")
    if np.any(ts <= 0):
        raise InputError("t grid must be positive")
    if float(ts.max() / ts.min()) < 8.0 * (1.0 - 1e-12):
        raise InputError("t grid must span roughly a decade (max/min >= 8)")
    vals = np.array([sin_squared_power_integral(p, float(t), epsabs=epsabs) for t in ts])
    slope = np.polyfit(np.log(ts), np.log(vals), 1)[0]
    return float(slope)


def majorizes(x, y, tol: float = 1e-12) -> bool:
    """Prefix-sum dominance of sorted nonincreasing tuples with equal totals."""
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    if xa.ndim != 1 or xa.shape != ya.shape or xa.size == 0:
        raise InputError("majorization needs two equal-length nonempty tuples")
    if np.any(np.diff(xa) > 0) or np.any(np.diff(ya) > 0):
        raise InputError("majorization inputs must be sorted nonincreasing")
    cx = np.cumsum(xa)
    cy = np.cumsum(ya)
    scale = max(1.0, float(np.abs(cx).max()), float(np.abs(cy).max()))
    if abs(cx[-1] - cy[-1]) > tol * scale:
        return False
    return bool(np.all(cx[:-1] >= cy[:-1] - tol * scale))


@dataclass(frozen=True)
class MajorizationPair:
    """A pair of tuples declared to satisfy the majorization order."""

    x: tuple[float, ...]
    y: tuple[float, ...]

    def __post_init__(self):
        if not majorizes(self.x, self.y):
            raise InputError("declared pair fails the majorization inequalities")
