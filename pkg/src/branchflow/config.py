"""Centralized numeric tolerances.

Every module reads its defaults from :data:`DEFAULT_TOL` so a reproducibility
study can swap a single record instead of hunting for magic numbers.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    #: general relative tolerance for floating-point comparisons
    rel: float = 1e-9
    #: absolute tolerance on certificate slacks and balance residuals
    certificate: float = 1e-10
    #: tolerance on mass sums (instance balance, configuration zero-sum)
    mass_balance: float = 1e-12
    #: tolerance on unit-vector norms
    unit_vector: float = 1e-12
    #: tolerance on the 2*pi angle-sum identity of a triple branching
    angle_sum: float = 1e-10
    #: satisfactory-configuration slack threshold (slack >= -satisfactory)
    satisfactory: float = 1e-10
    #: Weiszfeld convergence: gradient norm <= weiszfeld_gradient * sum(weights)
    weiszfeld_gradient: float = 1e-10
    #: snap distance (relative to scale) for iterates landing on an anchor
    vertex_snap: float = 1e-13
    #: hard merge distance for near-coincident branching points, x diameter
    collapse: float = 1e-9
    #: relative displacement threshold ending a relaxation sweep loop
    relaxation: float = 1e-10


DEFAULT_TOL = Tolerances()
