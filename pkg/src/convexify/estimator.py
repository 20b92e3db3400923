"""scikit-learn style wrapper: ``fit`` on a trace table, ``predict`` c at points."""
import numpy as np
from scipy.interpolate import RegularGridInterpolator
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import ConfigurationError, GridMismatchError
from .forward import CauchyTraces
from .functional import FunctionalContext
from .geometry import CarlemanParams, GridSpec, build_domain
from .model import CoefficientSet, TikhonovParams
from .optimize import OptimizerConfig, build_boundary_lift, minimize_gradient_descent
from .recover import recover_coefficient
from .transform import derive_transformed_traces


class ConvexificationInverter(BaseEstimator, RegressorMixin):
    """Recover ``c(x)`` from lateral Cauchy data by convexification.

    Parameters
    ----------
    f : callable or ndarray
        Initial condition ``u(x, 0)``, either a function of the spatial
        coordinates or its values on the spatial grid.
    a, b : optional
        Principal and drift coefficients (identity and zero by default).
    n_space, a_level, d_level, T, epsilon, n_x1, n_xbar, n_t
        Domain and grid; see :class:`~convexify.geometry.GridSpec`.
    lam, nu, normalization
        Carleman weight parameters.
    alpha, R
        Tikhonov weight and ball radius.
    smooth, degree, window
        Regularized time differentiation of the traces.
    max_iter, grad_tol, preconditioner
        Optimizer settings.

    Attributes
    ----------
    c_ : ndarray
        Recovered coefficient on the spatial grid.
    w_ : ndarray
        Minimizer on the space-time grid.
    grid_ : DomainGrid
    result_ : OptimizationResult
    n_features_in_ : int
        Columns of the trace table, ``n_space + 2``.
    """

    def __init__(self, f=None, a=None, b=None, n_space=1, a_level=0.2, d_level=0.5, T=1.0,
                 epsilon=None, n_x1=41, n_xbar=11, n_t=41, lam=1.0, nu=2.0,
                 normalization="max", alpha=1e-4, R=1e8, smooth=False, degree=4, window=9,
                 max_iter=500, grad_tol=1e-10, preconditioner="riesz"):
        self.f = f
        self.a = a
        self.b = b
        self.n_space = n_space
        self.a_level = a_level
        self.d_level = d_level
        self.T = T
        self.epsilon = epsilon
        self.n_x1 = n_x1
        self.n_xbar = n_xbar
        self.n_t = n_t
        self.lam = lam
        self.nu = nu
        self.normalization = normalization
        self.alpha = alpha
        self.R = R
        self.smooth = smooth
        self.degree = degree
        self.window = window
        self.max_iter = max_iter
        self.grad_tol = grad_tol
        self.preconditioner = preconditioner

    def _spec(self):
        return GridSpec(n_space=self.n_space, a=self.a_level, d=self.d_level, T=self.T,
                        epsilon=self.epsilon, n_x1=self.n_x1, n_xbar=self.n_xbar, n_t=self.n_t)

    def fit(self, X, y=None):
        """Fit on rows ``(x2, ..., t, g1, g2)`` covering the ``x1 = 0`` face grid."""
        if self.f is None:
            raise ConfigurationError("f (the initial condition) is required")
        X = check_array(X, ensure_min_samples=5)
        if X.shape[1] != self.n_space + 2:
            raise ConfigurationError(
                f"trace table needs {self.n_space + 2} columns, got {X.shape[1]}")
        grid = build_domain(self._spec())
        traces = CauchyTraces.from_table(X, self.n_space)
        face = tuple(grid.space_axes[1:]) + (grid.t,)
        got = tuple(traces.xbar_axes) + (traces.t,)
        if len(face) != len(got) or not all(
                len(p) == len(q) and np.allclose(p, q, rtol=0, atol=1e-9) for p, q in zip(face, got)):
            raise GridMismatchError("trace coordinates do not match the measurement face grid")
        coeffs = CoefficientSet.from_functions(grid.space_axes, self.f, self.a, self.b)
        ctx = FunctionalContext(grid, coeffs, CarlemanParams(self.lam, self.nu, self.normalization),
                                TikhonovParams(self.alpha, self.R))
        tt = derive_transformed_traces(traces, self.smooth, self.degree, self.window)
        W_bc = build_boundary_lift(tt, grid)
        config = OptimizerConfig(max_iter=self.max_iter, grad_tol=self.grad_tol,
                                 preconditioner=self.preconditioner)
        self.result_ = minimize_gradient_descent(ctx, W_bc, None, config)
        self.w_ = self.result_.w
        self.c_ = recover_coefficient(self.w_, coeffs, grid)
        self.grid_ = grid
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        """Linear interpolation of the recovered ``c`` at spatial points ``X``."""
        check_is_fitted(self, "c_")
        X = check_array(X)
        if X.shape[1] != self.n_space:
            raise ConfigurationError(f"points need {self.n_space} coordinates, got {X.shape[1]}")
        interp = RegularGridInterpolator(self.grid_.space_axes, self.c_, bounds_error=False,
                                         fill_value=np.nan)
        return interp(X)
