"""Principal eigenvalues of strongly advected elliptic operators and their large-alpha expansions."""

__version__ = "0.1.0"

from .kernels import BACKEND
from .model import (DomainSpec, GSpec, HomogeneousV, MultiIndex, Scenario, SmoothV, canonical_homogeneous,
                    canonical_smooth, eval_coefficients, validate_scenario)
from .grid import Grid, GridField, GridMismatchError, build_grid, inner_product, interpolate, laplacian_apply, norm
from .operators import (OperatorForm, OperatorHandle, assemble, gauge_residual, potential_value,
                        rayleigh_quotient, trial_upper_bound)
from .eigensolver import ConvergenceError, EigenPair, EigenSolverError, principal_eigenpair
from .limiting import LimitSolution, moment, solve_limit, truncation_radius
from .corrections import (CorrectionSet, ExpansionCoeffs, FredholmError, build_rhs, expansion_coefficients,
                          solve_constrained, solve_corrections)
from .asymptotics import (GridParams, RateReport, SweepTable, alpha_ladder, compute_lambda,
                          eigenfunction_residual, fit_rate, max_point_drift, predicted_lambda, sweep)
