"""Log-substitution, transformed traces and the nonlinear operator on ``w = (ln u)_t``.

With ``p_i = dw/dx_i``, ``P_i = int_0^t p_i`` and ``G_i = (ln f)_{x_i}`` the
operator reads::

    Lt(w) = -w_t + L_c w + sum_ij a_ij [p_i (G_j + P_j) + p_j (G_i + P_i)]

and splits exactly as ``Lt(w1 + h) = Lt(w1) + S(h, w1) + Q(h)``.
"""
from dataclasses import dataclass

import numpy as np
from scipy.signal import savgol_filter

from .exceptions import ConfigurationError, GridMismatchError, PositivityError
from .forward import EllipticOperator
from .stencils import apply_along, first_derivative_matrix, volterra_matrix


@dataclass(frozen=True, eq=False)
class TransformedTraces:
    xbar_axes: tuple
    t: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    method: str = "central"
    degree: int = None
    window: int = None


def _time_derivative(values, h, smooth, degree, window):
    if not smooth:
        return apply_along(first_derivative_matrix(values.shape[-1], h), values, values.ndim - 1)
    return savgol_filter(values, window, degree, deriv=1, delta=h, axis=-1, mode="interp")


def derive_transformed_traces(traces, smooth=False, degree=4, window=9):
    """``g1~ = (ln g1)_t`` and ``g2~ = g2_t / g1 - g1_t g2 / g1**2``.

    Time derivatives are central differences, or with ``smooth`` the
    derivative of a sliding least-squares polynomial fit.
    """
    g1, g2 = traces.g1, traces.g2
    if np.min(g1) <= 0:
        raise PositivityError("g1 must be positive to take its logarithm")
    h = float(traces.t[1] - traces.t[0])
    if smooth:
        if window > len(traces.t) or window % 2 == 0 or degree >= window:
            raise ConfigurationError(
                f"smoothing window {window} (degree {degree}) does not fit "
                f"{len(traces.t)} time nodes; need an odd window > degree")
        g1s = savgol_filter(g1, window, degree, axis=-1, mode="interp")
        g2s = savgol_filter(g2, window, degree, axis=-1, mode="interp")
        if np.min(g1s) <= 0:
            raise PositivityError("smoothed g1 is not positive")
        g1_tilde = _time_derivative(np.log(g1), h, True, degree, window)
    else:
        g1s, g2s = g1, g2
        g1_tilde = _time_derivative(np.log(g1), h, False, degree, window)
    g1t = _time_derivative(g1, h, smooth, degree, window)
    g2t = _time_derivative(g2, h, smooth, degree, window)
    g2_tilde = g2t / g1s - g1t * g2s / g1s**2
    return TransformedTraces(xbar_axes=traces.xbar_axes, t=traces.t, g1=g1_tilde, g2=g2_tilde,
                             method="savgol" if smooth else "central",
                             degree=degree if smooth else None,
                             window=window if smooth else None)


def volterra_integrate(field, grid):
    """Trapezoidal ``int_0^t field(x, tau) dtau`` along the last axis."""
    if field.shape != grid.shape:
        raise GridMismatchError(f"field shape {field.shape} != grid shape {grid.shape}")
    V = volterra_matrix(len(grid.t), grid.h_t, grid.t0_index)
    return apply_along(V, field, field.ndim - 1)


class TransformedOperator:
    """Stencil kernel shared by ``Lt``, ``S``, ``Q`` and the adjoint of ``S``."""

    def __init__(self, grid, coeffs):
        if coeffs.space_shape != grid.space_shape:
            raise GridMismatchError("coefficients do not live on the grid's spatial nodes")
        if np.min(coeffs.f) <= 0:
            raise PositivityError("f must be positive to take its logarithm")
        self.grid = grid
        self.coeffs = coeffs
        self.n = coeffs.n_space
        self.elliptic = EllipticOperator(coeffs)
        self.Dt = first_derivative_matrix(len(grid.t), grid.h_t)
        self.V = volterra_matrix(len(grid.t), grid.h_t, grid.t0_index)
        self.a = coeffs.a[..., None]
        logf = np.log(coeffs.f)
        self.G = [self.elliptic.d(logf, j)[..., None] for j in range(self.n)]

    def _check(self, *fields):
        for fld in fields:
            if fld.shape != self.grid.shape:
                raise GridMismatchError(
                    f"field shape {fld.shape} != grid shape {self.grid.shape}")

    def dt(self, w):
        return apply_along(self.Dt, w, w.ndim - 1)

    def dt_T(self, y):
        return apply_along(self.Dt.T, y, y.ndim - 1)

    def vol(self, w):
        return apply_along(self.V, w, w.ndim - 1)

    def vol_T(self, y):
        return apply_along(self.V.T, y, y.ndim - 1)

    def grad(self, w):
        return [self.elliptic.d(w, i) for i in range(self.n)]

    def Ltilde(self, w):
        self._check(w)
        a, G = self.a, self.G
        p = self.grad(w)
        P = [self.vol(pi) for pi in p]
        out = -self.dt(w) + self.elliptic.Lc(w)
        for i in range(self.n):
            for j in range(self.n):
                out = out + a[i, j] * p[i] * (G[j] + P[j]) + a[i, j] * p[j] * (G[i] + P[i])
        return out

    def S(self, h, w1):
        self._check(h, w1)
        a, G = self.a, self.G
        hp = self.grad(h)
        hP = [self.vol(x) for x in hp]
        wp = self.grad(w1)
        wP = [self.vol(x) for x in wp]
        out = self.elliptic.Lc(h) - self.dt(h)
        for i in range(self.n):
            for j in range(self.n):
                out = out + a[i, j] * hp[i] * (G[j] + wP[j])
                out = out + a[i, j] * hp[j] * (G[i] + wP[i])
                out = out + a[i, j] * (wp[i] * hP[j] + wp[j] * hP[i])
        return out

    def Q(self, h):
        self._check(h)
        a = self.a
        hp = self.grad(h)
        hP = [self.vol(x) for x in hp]
        out = np.zeros(self.grid.shape)
        for i in range(self.n):
            for j in range(self.n):
                out = out + a[i, j] * (hp[i] * hP[j] + hp[j] * hP[i])
        return out

    def S_adjoint(self, y, w1):
        """Transpose of ``h -> S(h, w1)`` applied to ``y``."""
        self._check(y, w1)
        a, G = self.a, self.G
        wp = self.grad(w1)
        wP = [self.vol(x) for x in wp]
        out = self.elliptic.Lc_T(y) - self.dt_T(y)
        d_T = self.elliptic.d_T
        for k in range(self.n):
            direct = sum(a[k, j] * (G[j] + wP[j]) + a[j, k] * (G[j] + wP[j])
                         for j in range(self.n))
            through = sum(a[k, j] * wp[j] + a[j, k] * wp[j] for j in range(self.n))
            out = out + d_T(direct * y, k) + d_T(self.vol_T(through * y), k)
        return out


def apply_Ltilde(w, coeffs, grid):
    return TransformedOperator(grid, coeffs).Ltilde(w)


def apply_S_linear(h, w1, coeffs, grid):
    return TransformedOperator(grid, coeffs).S(h, w1)


def apply_Q_quadratic(h, coeffs, grid):
    return TransformedOperator(grid, coeffs).Q(h)
