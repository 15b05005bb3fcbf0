"""branchflow: branched optimal transport with concave power costs.

Evaluate and validate discrete mass flows, certify global optimality of
star flows, analyse the local configurations allowed at branching points,
build the explicit high-degree example families, and solve small instances
exactly by topology enumeration.
"""

from .certificates import (StarCertificate, StarInstance, certify_star,
                           monotone_ratio_check, subset_slack_profile)
from .config import DEFAULT_TOL, Tolerances
from .configurations import (DegreeBound, SearchResult, SlackMatrix,
                             StarConfiguration, degree_bound,
                             induced_configuration, pair_rhs,
                             satisfactory_slack, search_satisfactory,
                             verify_half_p_bound)
from .costs import (CostModel, MajorizationPair, PowerCost, TabulatedCost,
                    decomposition_exponent, majorizes,
                    sin_squared_power_integral, subadditivity_check,
                    squared_cost_derivative_is_strictly_convex)
from .errors import FlowValidationError, InputError, Violation
from .fermat import (FermatResult, TripleAngles, TripodReport, WeightedPoints,
                     triple_angles, tripod_test, vertex_optimality_test,
                     weighted_fermat)
from .flows import (AtomicMeasure, Edge, Flow, FlowCost, TransportInstance,
                    ValidationReport, Vertex, gilbert_functional, is_forest,
                    normalize_flow, validate_flow)
from .gallery import (EquiangularFrame, UniversalTreeSpec, equiangular_frame,
                      example_double_star, example_equiangular, example_orthant,
                      universal_tree)
from .solver import (RelaxResult, SolveReport, Topology, enumerate_topologies,
                     relax_geometry, solve, star_topology)
from .svg import render_svg

__version__ = "0.1.0"

__all__ = [
    "AtomicMeasure", "CostModel", "DEFAULT_TOL", "DegreeBound", "Edge",
    "EquiangularFrame", "FermatResult", "Flow", "FlowCost",
    "FlowValidationError", "InputError", "MajorizationPair", "PowerCost",
    "RelaxResult", "SearchResult", "SlackMatrix", "SolveReport",
    "StarCertificate", "StarConfiguration", "StarInstance", "TabulatedCost",
    "Tolerances", "Topology", "TransportInstance", "TripleAngles",
    "TripodReport", "ValidationReport", "Vertex", "Violation",
    "WeightedPoints", "certify_star", "decomposition_exponent",
    "degree_bound", "enumerate_topologies", "equiangular_frame",
    "example_double_star", "example_equiangular", "example_orthant",
    "gilbert_functional", "induced_configuration", "is_forest", "majorizes",
    "monotone_ratio_check", "normalize_flow", "pair_rhs", "relax_geometry",
    "render_svg", "satisfactory_slack", "search_satisfactory",
    "sin_squared_power_integral", "solve", "star_topology",
    "subadditivity_check", "subset_slack_profile",
    "squared_cost_derivative_is_strictly_convex", "triple_angles",
    "tripod_test", "universal_tree", "validate_flow",
    "vertex_optimality_test", "weighted_fermat",
]
