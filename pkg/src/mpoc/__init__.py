"""Explicit solutions of constrained linear-quadratic optimal control.

Continuous time: arc structures, parametric switching times, and critical
regions from the first-order optimality conditions, solved by indirect
shooting on matrix-exponential arc flows.  Discrete time: the condensed
multiparametric QP counterpart, for complexity comparison.
"""

from .errors import (Budget, Degenerate, Infeasible, NoConvergence,
                     NonAffineBoundary, NonFinite, NoStructure, SameStructure,
                     SingularKkt, SolverError, TimeEscaped, TimesCollapsed,
                     TooFewSamples)
from .fitting import FittedPolynomial, fit_polynomial
from .model import (ActiveSet, ArcDynamics, LtiOcProblem, assemble_arc_system,
                    matrix_exponential)
from .mpqp import (ComparisonReport, DtCriticalRegion, DtPartition, DtProblem,
                   compare_ct_dt, discretize_zoh, enumerate_partition,
                   feasible_bounds, solve_qp)
from .probfile import load as load_problem
from .probfile import save as save_problem
from .regions import (CriticalRegionCT, HalfPlane, Interval, boundary_values,
                      explore_regions, fit_switching_times,
                      refine_boundary_1d, regions_from_dict, regions_to_dict)
from .shooting import (ArcStructure, SolvedTrajectory, SwitchEvent,
                       solve_fixed_structure, unconstrained_structure,
                       validate_solution)
from .structure import detect_structure
from .systems import coupled_two_state_problem, integrator_problem

__version__ = "0.1.0"

__all__ = [
    "ActiveSet", "ArcDynamics", "ArcStructure", "Budget", "ComparisonReport",
    "CriticalRegionCT", "Degenerate", "DtCriticalRegion", "DtPartition",
    "DtProblem", "FittedPolynomial", "HalfPlane", "Infeasible", "Interval",
    "LtiOcProblem", "NoConvergence", "NonAffineBoundary", "NonFinite",
    "NoStructure", "SameStructure", "SingularKkt", "SolvedTrajectory",
    "SolverError", "SwitchEvent", "TimeEscaped", "TimesCollapsed",
    "TooFewSamples", "assemble_arc_system", "boundary_values",
    "compare_ct_dt", "coupled_two_state_problem", "detect_structure",
    "discretize_zoh", "enumerate_partition", "explore_regions",
    "feasible_bounds", "fit_polynomial", "fit_switching_times",
    "integrator_problem", "load_problem", "matrix_exponential",
    "refine_boundary_1d", "regions_from_dict", "regions_to_dict",
    "save_problem", "solve_fixed_structure", "solve_qp",
    "unconstrained_structure", "validate_solution",
]
