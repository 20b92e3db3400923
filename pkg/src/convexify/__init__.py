"""Convexification solver for a coefficient inverse problem of a parabolic equation.

Synthetic lateral Cauchy data are generated from exact solutions, the
Carleman-weighted Tikhonov functional is minimized by projected gradient
descent, and the zeroth-order coefficient is read off the minimizer.
"""
from .estimator import ConvexificationInverter
from .exceptions import (ConfigurationError, ConvexifyError, EllipticityError, GridMismatchError,
                         InfeasibleDataError, PositivityError, SymmetryError,
                         UnsupportedGeneratorError, WeightOverflowError)
from .forward import CauchyTraces, EllipticOperator, add_noise, evolve_two_sided, extract_traces
from .functional import (BregmanGap, FunctionalContext, H4Norm, bregman_gap, bregman_identity,
                         evaluate_J, gradient_J, h4_inner)
from .geometry import (CarlemanParams, DomainGrid, GridSpec, build_domain, carleman_weight_sq,
                       psi_value)
from .model import (CoefficientSet, OracleSolution, TikhonovParams, oracle_eigenmode,
                    oracle_separable, validate_coefficients)
from .optimize import (OptimizationResult, OptimizerConfig, build_boundary_lift,
                       minimize_gradient_descent, project_to_ball)
from .recover import error_metrics, reconstruct_state, recover_coefficient
from .transform import (TransformedTraces, apply_Ltilde, apply_Q_quadratic, apply_S_linear,
                        derive_transformed_traces, volterra_integrate)

__version__ = "0.1.0"
