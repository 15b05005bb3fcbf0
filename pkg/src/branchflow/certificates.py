"""Global optimality certificates for star flows.

A star flow sends every sink its demand through one central point.  With an
external source the flow is optimal iff the weighted directions balance,

    sum_i c(m_i) e_i + c(sum_i m_i) e = 0,

and every sink subset I obeys  ||sum_{i in I} c(m_i) e_i||^2 <= c^2(sum_{i
in I} m_i).  With the source at the center only the subset inequalities
remain.  Both are checked exhaustively via a Gray-code scan that updates the
running subset vector with one signed addition per subset (vectorized as a
cumulative sum over the flip sequence).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import DEFAULT_TOL
from .costs import CostModel, PowerCost
from .errors import InputError

VERDICT_OPTIMAL = "optimal"
VERDICT_NOT_OPTIMAL = "not_optimal"
VERDICT_INCONCLUSIVE = "inconclusive_sampled"

EXHAUSTIVE_LIMIT = 24


@dataclass(frozen=True)
class StarInstance:
    """One central point, sinks with demands, and an optional external source."""

    origin: np.ndarray
    sinks: np.ndarray
    demands: np.ndarray
    source: np.ndarray | None = None

    def __post_init__(self):
        o = np.asarray(self.origin, dtype=float).ravel()
        pts = np.atleast_2d(np.asarray(self.sinks, dtype=float))
        dem = np.asarray(self.demands, dtype=float).ravel()
        if pts.shape[0] != dem.shape[0] or pts.shape[0] < 1:
            raise InputError("need n >= 1 sinks with matching demands")
        if pts.shape[1] != o.shape[0]:
            raise InputError("sink dimension disagrees with the origin")
        if np.any(dem <= 0):
            raise InputError("demands must be strictly positive")
        if np.any(np.linalg.norm(pts - o, axis=1) == 0.0):
            raise InputError("sinks must be distinct from the origin (zero-length direction)")
        src = self.source
        if src is not None:
            src = np.asarray(src, dtype=float).ravel()
            if src.shape != o.shape:
                raise InputError("source dimension disagrees with the origin")
            if float(np.linalg.norm(src - o)) == 0.0:
                raise InputError("source must be distinct from the origin")
            src = src.copy()
            src.setflags(write=False)
        o, pts, dem = o.copy(), pts.copy(), dem.copy()
        for a in (o, pts, dem):
            a.setflags(write=False)
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "sinks", pts)
        object.__setattr__(self, "demands", dem)
        object.__setattr__(self, "source", src)

    @property
    def n(self) -> int:
        return self.sinks.shape[0]

    def sink_directions(self) -> np.ndarray:
        diff = self.sinks - self.origin
        return diff / np.linalg.norm(diff, axis=1, keepdims=True)

    def source_direction(self) -> np.ndarray | None:
        if self.source is None:
            return None
        d = self.source - self.origin
        return d / float(np.linalg.norm(d))


@dataclass(frozen=True)
class StarCertificate:
    balance_residual: float | None  # None for the source-at-center form
    worst_subset: tuple[int, ...]
    worst_slack: float
    subsets_checked: int
    verdict: str
    boundary: bool  # optimal with some subset slack on the boundary
    improving_direction: tuple[float, ...] | None
    tol: float

    def to_dict(self) -> dict:
        return {
            "balance_residual": self.balance_residual,
            "worst_subset": list(self.worst_subset),
            "worst_slack": self.worst_slack,
            "subsets_checked": self.subsets_checked,
            "verdict": self.verdict,
            "boundary": self.boundary,
            "improving_direction": (None if self.improving_direction is None
                                    else list(self.improving_direction)),
            "tol": self.tol,
        }


def _gray_flip_arrays(start: int, stop: int) -> tuple[np.ndarray, np.ndarray]:
    """Flip indices and signs for Gray-code steps start..stop-1 (1-based)."""
    ts = np.arange(start, stop, dtype=np.int64)
    flips = np.log2(ts & -ts).astype(np.int64)  # exact: ts & -ts is a power of two
    gray = ts ^ (ts >> 1)
    signs = np.where((gray >> flips) & 1 != 0, 1.0, -1.0)
    return flips, signs


def _subset_scan(weighted: np.ndarray, masses: np.ndarray, cost: CostModel,
                 chunk: int = 1 << 20):
    """Iterate all nonempty subsets in Gray-code order, in vectorized chunks.

    Yields (slacks, sizes, gray_codes) per chunk, where slack =
    c^2(subset mass) - ||subset weighted-direction sum||^2.  The running
    vector and mass advance by one signed update per subset.
    """
    n, d = weighted.shape
    total = 1 << n
    vec = np.zeros(d)
    mass = 0.0
    size = 0.0
    for start in range(1, total, chunk):
        stop = min(start + chunk, total)
        flips, signs = _gray_flip_arrays(start, stop)
        deltas = signs[:, None] * weighted[flips]
        vecs = vec + np.cumsum(deltas, axis=0)
        msums = mass + np.cumsum(signs * masses[flips])
        sizes = size + np.cumsum(signs)
        slacks = np.asarray(cost.squared(msums), dtype=float) - (vecs ** 2).sum(axis=1)
        gray = (np.arange(start, stop, dtype=np.int64) ^
                (np.arange(start, stop, dtype=np.int64) >> 1))
        yield slacks, sizes, gray
        vec = vecs[-1]
        mass = float(msums[-1])
        size = float(sizes[-1])


def _mask_to_indices(mask: int, n: int) -> tuple[int, ...]:
    return tuple(i for i in range(n) if (mask >> i) & 1)


def _subset_slack_exact(instance: StarInstance, cost: CostModel,
                        indices: tuple[int, ...]) -> tuple[float, np.ndarray]:
    e = instance.sink_directions()
    w = np.asarray(cost.evaluate(instance.demands), dtype=float)[:, None] * e
    sel = list(indices)
    vec = w[sel].sum(axis=0)
    msum = float(instance.demands[sel].sum())
    return float(cost.squared(msum) - vec @ vec), vec


def certify_star(instance: StarInstance, cost: CostModel, mode: str = "exhaustive",
                 sample_count: int = 10000, seed: int | None = None,
                 tol: float | None = None) -> StarCertificate:
    """Certificate of global optimality for a star flow.

    Exhaustive mode checks the balance identity (when a source is present)
    and every nonempty sink subset; it requires n <= 24.  Sampled mode draws
    subsets uniformly and can only return ``not_optimal`` or
    ``inconclusive_sampled``.  A negative worst slack comes with the
    violating subset's combined direction vector, which is a concrete
    improving perturbation.
    """
    tol = DEFAULT_TOL.certificate if tol is None else tol
    n = instance.n
    e = instance.sink_directions()
    cw = np.asarray(cost.evaluate(instance.demands), dtype=float)
    weighted = cw[:, None] * e

    balance = None
    balance_ok = True
    if instance.source is not None:
        total = float(instance.demands.sum())
        resid = weighted.sum(axis=0) + float(cost.evaluate(total)) * instance.source_direction()
        balance = float(np.linalg.norm(resid))
        balance_ok = balance <= tol

    if mode == "exhaustive":
        if n > EXHAUSTIVE_LIMIT:
            raise InputError(f"exhaustive certification is limited to n <= {EXHAUSTIVE_LIMIT}")
        worst_slack = np.inf
        worst_mask = 0
        checked = 0
        for slacks, _, gray in _subset_scan(weighted, instance.demands, cost):
            idx = int(np.argmin(slacks))
            if slacks[idx] < worst_slack:
                worst_slack = float(slacks[idx])
                worst_mask = int(gray[idx])
            checked += slacks.size
        worst = _mask_to_indices(worst_mask, n)
        # recompute the worst slack directly (clears cumulative-sum drift)
        worst_slack, worst_vec = _subset_slack_exact(instance, cost, worst)
        ok = balance_ok and worst_slack >= -tol
        verdict = VERDICT_OPTIMAL if ok else VERDICT_NOT_OPTIMAL
        improving = None if ok else tuple(float(x) for x in worst_vec)
        return StarCertificate(balance_residual=balance, worst_subset=worst,
                               worst_slack=worst_slack, subsets_checked=checked,
                               verdict=verdict, boundary=ok and worst_slack <= tol,
                               improving_direction=improving, tol=tol)

    if mode != "sampled":
        raise InputError(f"unknown certification mode {mode!r}")
    rng = np.random.default_rng(seed)
    worst_slack = np.inf
    worst_subset: tuple[int, ...] = ()
    checked = 0
    batch = 4096
    remaining = int(sample_count)
    while remaining > 0:
        take = min(batch, remaining)
        picks = rng.integers(0, 2, size=(take, n)).astype(bool)
        picks[~picks.any(axis=1), rng.integers(0, n)] = True  # no empty subsets
        vecs = picks @ weighted
        msums = picks @ instance.demands
        slacks = np.asarray(cost.squared(msums), dtype=float) - (vecs ** 2).sum(axis=1)
        idx = int(np.argmin(slacks))
        if slacks[idx] < worst_slack:
            worst_slack = float(slacks[idx])
            worst_subset = tuple(int(i) for i in np.nonzero(picks[idx])[0])
        checked += take
        remaining -= take
    worst_slack, worst_vec = _subset_slack_exact(instance, cost, worst_subset)
    failed = (not balance_ok) or worst_slack < -tol
    verdict = VERDICT_NOT_OPTIMAL if failed else VERDICT_INCONCLUSIVE
    improving = tuple(float(x) for x in worst_vec) if failed else None
    return StarCertificate(balance_residual=balance, worst_subset=worst_subset,
                           worst_slack=worst_slack, subsets_checked=checked,
                           verdict=verdict, boundary=False,
                           improving_direction=improving, tol=tol)


def subset_slack_profile(instance: StarInstance, cost: CostModel) -> dict[int, float]:
    """Minimum subset slack per subset size, by exhaustive enumeration."""
    n = instance.n
    if n > EXHAUSTIVE_LIMIT:
        raise InputError(f"profile enumeration is limited to n <= {EXHAUSTIVE_LIMIT}")
    e = instance.sink_directions()
    weighted = np.asarray(cost.evaluate(instance.demands), dtype=float)[:, None] * e
    best = np.full(n + 1, np.inf)
    for slacks, sizes, _ in _subset_scan(weighted, instance.demands, cost):
        np.minimum.at(best, np.rint(sizes).astype(int), slacks)
    return {s: float(best[s]) for s in range(1, n + 1)}


def monotone_ratio_check(p: float, grid) -> bool:
    """Whether x -> (x^(2p-1) - 1) / (x - 1) is nonincreasing on the grid.

    This monotonicity is what makes equality at the full sink set propagate
    to every subset in the equiangular construction; it holds for
    1/2 <= p < 1 (the ratio is identically zero at p = 1/2).
    """
    if not (0.5 <= p < 1.0):
        raise InputError(f"ratio monotonicity applies for 1/2 <= p < 1, got {p}")
    xs = np.asarray(grid, dtype=float)
    if xs.ndim != 1 or xs.size < 2:
        raise InputError("grid needs at least 2 points")
    if np.any(xs <= 1.0):
        raise InputError("grid must lie strictly above 1")
    xs = np.sort(xs)
    vals = (xs ** (2.0 * p - 1.0) - 1.0) / (xs - 1.0)
    return bool(np.all(np.diff(vals) <= 1e-12 * max(1.0, float(np.abs(vals).max()))))
