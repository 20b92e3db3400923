"""Coefficient recovery from the minimizer and error scoring."""
from typing import NamedTuple

import numpy as np

from .exceptions import PositivityError
from .forward import EllipticOperator
from .transform import volterra_integrate


def recover_coefficient(w_star, coeffs, grid):
    """``c = w(x, 0) - L_c ln f - sum_ij a_ij (ln f)_i (ln f)_j`` on the spatial grid.

    Only the ``t = 0`` slice of ``w_star`` is read.
    """
    if np.min(coeffs.f) <= 0:
        raise PositivityError("f must be positive to take its logarithm")
    op = EllipticOperator(coeffs)
    logf = np.log(coeffs.f)
    grad = [op.d(logf, i) for i in range(coeffs.n_space)]
    quad = sum(coeffs.a[i, j] * grad[i] * grad[j]
               for i in range(coeffs.n_space) for j in range(coeffs.n_space))
    return w_star[..., grid.t0_index] - op.Lc(logf) - quad


def reconstruct_state(w_star, f, grid):
    """``v = ln f + int_0^t w`` and ``u = exp(v)``."""
    if np.min(f) <= 0:
        raise PositivityError("f must be positive to take its logarithm")
    v = np.log(f)[..., None] + volterra_integrate(w_star, grid)
    top = float(np.max(v))
    if top > 700:
        raise OverflowError(f"exp overflow reconstructing u: max exponent {top:.1f}")
    return v, np.exp(v)


class ErrorMetrics(NamedTuple):
    rel_L2: float
    rel_Linf: float
    absolute: bool


def error_metrics(c_rec, c_true, grid, eps_shrunk=True):
    """Relative L2 / Linf errors on the ``t = 0`` slice of G (shrunk by epsilon).

    When ``c_true`` vanishes on the region, absolute errors are returned and
    flagged.
    """
    w = grid.slice_weights(eps_shrunk)
    mask = w > 0
    diff = c_rec - c_true
    err2 = float(np.sqrt(np.sum(w * diff**2)))
    errinf = float(np.max(np.abs(diff[mask])))
    ref2 = float(np.sqrt(np.sum(w * c_true**2)))
    refinf = float(np.max(np.abs(c_true[mask])))
    if ref2 == 0 or refinf == 0:
        return ErrorMetrics(err2, errinf, True)
    return ErrorMetrics(err2 / ref2, errinf / refinf, False)
