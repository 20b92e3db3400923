"""Sparse 1D difference matrices and their tensor-product lifts.

Fields are stored as C-ordered arrays of shape ``(n_x1, n_x2, ..., n_t)``;
every operator here acts on the flattened array.
"""
from functools import reduce

import numpy as np
import scipy.sparse as sp


def first_derivative_matrix(n, h):
    """Central differences, second-order one-sided rows at both ends."""
    if n < 3:
        raise ValueError("need at least 3 nodes for a first derivative")
    D = sp.lil_matrix((n, n))
    for i in range(1, n - 1):
        D[i, i - 1] = -0.5
        D[i, i + 1] = 0.5
    D[0, 0:3] = [-1.5, 2.0, -0.5]
    D[n - 1, n - 3:n] = [0.5, -2.0, 1.5]
    return (D / h).tocsr()


def second_derivative_matrix(n, h):
    """3-point interior stencil, 4-point second-order one-sided rows at ends."""
    if n < 4:
        raise ValueError("need at least 4 nodes for a second derivative")
    D = sp.lil_matrix((n, n))
    for i in range(1, n - 1):
        D[i, i - 1:i + 2] = [1.0, -2.0, 1.0]
    D[0, 0:4] = [2.0, -5.0, 4.0, -1.0]
    D[n - 1, n - 4:n] = [-1.0, 4.0, -5.0, 2.0]
    return (D / h**2).tocsr()


def volterra_matrix(n, h, i0):
    """Trapezoidal ``int_0^t`` with the origin at node ``i0``.

    Row ``k`` integrates from ``t[i0]`` to ``t[k]``; rows below ``i0`` carry
    the sign of the reversed interval.
    """
    V = np.zeros((n, n))
    for k in range(i0 + 1, n):
        V[k, i0:k + 1] = h
        V[k, i0] = V[k, k] = 0.5 * h
    for k in range(0, i0):
        V[k, k:i0 + 1] = -h
        V[k, k] = V[k, i0] = -0.5 * h
    return sp.csr_matrix(V)


def trapezoid_weights(n, h):
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


def lift(mat, axis, shape):
    """Kronecker-lift a 1D operator acting along ``axis`` of ``shape``."""
    factors = [sp.identity(m, format="csr") for m in shape]
    factors[axis] = sp.csr_matrix(mat)
    return reduce(lambda A, B: sp.kron(A, B, format="csr"), factors)


def apply_along(mat, arr, axis):
    """Apply a 1D (sparse) matrix along one axis of an ndarray."""
    moved = np.moveaxis(arr, axis, 0)
    out = mat @ moved.reshape(moved.shape[0], -1)
    return np.moveaxis(out.reshape((mat.shape[0],) + moved.shape[1:]), 0, axis)
