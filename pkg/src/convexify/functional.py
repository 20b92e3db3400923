"""Carleman-weighted Tikhonov functional, its exact gradient and Bregman gap."""
from functools import cached_property, reduce
from itertools import product
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import ConfigurationError, GridMismatchError
from .stencils import apply_along, first_derivative_matrix


def clamped_mask(grid, layers=2):
    """Nodes on the first ``layers`` x1-layers, where the lift fixes ``w``."""
    mask = np.zeros(grid.shape, dtype=bool)
    mask[:layers] = True
    return mask


def multi_indices(dim, order=4):
    return [beta for beta in product(range(order + 1), repeat=dim) if sum(beta) <= order]


class H4Norm:
    """Discrete ``H^4`` inner product over the full space-time box.

    Derivatives are powers of the first-difference matrix along each axis;
    integrals use the box trapezoidal weights.
    """

    def __init__(self, grid, order=4):
        self.grid = grid
        self.order = order
        self.dim = len(grid.axes)
        self.betas = multi_indices(self.dim, order)
        self.powers = []
        for ax, h in zip(grid.axes, grid.spacings):
            D = first_derivative_matrix(len(ax), h)
            pw = [sp.identity(len(ax), format="csr")]
            for _ in range(order):
                pw.append((D @ pw[-1]).tocsr())
            self.powers.append(pw)
        self.weights = grid.box_weights

    def derivative(self, u, beta):
        out = u
        for k, m in enumerate(beta):
            if m:
                out = apply_along(self.powers[k][m], out, k)
        return out

    def derivative_T(self, y, beta):
        out = y
        for k, m in enumerate(beta):
            if m:
                out = apply_along(self.powers[k][m].T, out, k)
        return out

    def inner(self, u, v):
        if u.shape != self.grid.shape or v.shape != self.grid.shape:
            raise GridMismatchError("h4_inner needs fields on the same box")
        total = 0.0
        for beta in self.betas:
            total += float(np.sum(self.weights * self.derivative(u, beta) * self.derivative(v, beta)))
        return total

    def norm(self, u):
        return float(np.sqrt(max(self.inner(u, u), 0.0)))

    def gram_apply(self, u):
        out = np.zeros(self.grid.shape)
        for beta in self.betas:
            out += self.derivative_T(self.weights * self.derivative(u, beta), beta)
        return out

    def gram_matrix(self):
        W = sp.diags(self.weights.ravel())
        G = None
        for beta in self.betas:
            B = reduce(lambda A, C: sp.kron(A, C, format="csr"),
                       [self.powers[k][m] for k, m in enumerate(beta)])
            term = (B.T @ W @ B).tocsr()
            G = term if G is None else G + term
        return G.tocsc()


def h4_inner(u, v, grid):
    return H4Norm(grid).inner(u, v)


class FunctionalContext:
    """Everything ``J`` needs that does not depend on ``w``.

    The normalization shift of the Carleman weight is folded into
    ``data_weight`` together with the quadrature.
    """

    def __init__(self, grid, coeffs, carleman, tikhonov, h4=None):
        from .transform import TransformedOperator

        self.grid = grid
        self.coeffs = coeffs
        self.carleman = carleman
        self.tikhonov = tikhonov
        self.op = TransformedOperator(grid, coeffs)
        self.weight = grid.weight_sq(carleman)
        self.data_weight = grid.quad_weights * self.weight
        self.h4 = h4 if h4 is not None else H4Norm(grid)
        self._solvers = {}

    @property
    def alpha(self):
        return self.tikhonov.alpha

    def with_params(self, carleman=None, tikhonov=None):
        """New context sharing the grid operators and the H4 machinery."""
        return FunctionalContext(self.grid, self.coeffs, carleman or self.carleman,
                                 tikhonov or self.tikhonov, h4=self.h4)

    def parts(self, w):
        r = self.op.Ltilde(w)
        data = float(np.sum(self.data_weight * r * r))
        reg = self.alpha * self.h4.inner(w, w) if self.alpha else 0.0
        return data, reg

    @cached_property
    def gram(self):
        return self.h4.gram_matrix()

    def riesz_solve(self, g, free):
        """Solve ``G_ff d = g_f`` on the free nodes (Riesz representer)."""
        key = free.tobytes()
        if key not in self._solvers:
            idx = np.flatnonzero(free.ravel())
            self._solvers[key] = (idx, spla.splu(self.gram[idx][:, idx].tocsc()))
        idx, lu = self._solvers[key]
        out = np.zeros(self.grid.size)
        out[idx] = lu.solve(g.ravel()[idx])
        return out.reshape(self.grid.shape)


def evaluate_J(w, ctx):
    data, reg = ctx.parts(w)
    return data + reg


def gradient_J(w, ctx, free=None):
    """Exact gradient of the discrete ``J`` with respect to nodal values.

    Entries outside ``free`` (boolean mask) are zeroed.
    """
    r = ctx.op.Ltilde(w)
    g = 2.0 * ctx.op.S_adjoint(ctx.data_weight * r, w)
    if ctx.alpha:
        g = g + 2.0 * ctx.alpha * ctx.h4.gram_apply(w)
    if free is not None:
        g = np.where(free, g, 0.0)
    return g


class BregmanGap(NamedTuple):
    gap: float
    alpha_term: float
    interior_term: float


def interior_energy(h, grid, op):
    """Quadrature of ``|grad h|^2 + h^2`` over the epsilon-shrunk region."""
    w = np.where(grid.inside_G_eps, grid.box_weights, 0.0)
    dens = h * h + sum(p * p for p in op.grad(h))
    return float(np.sum(w * dens))


def bregman_gap(w1, w2, ctx, clamp_tol=0.0):
    """``J(w2) - J(w1) - <grad J(w1), w2 - w1>`` with the two bound terms."""
    h = w2 - w1
    if np.max(np.abs(h[clamped_mask(ctx.grid)]), initial=0.0) > clamp_tol:
        raise ConfigurationError("w2 - w1 must vanish on the clamped x1-layers")
    g = gradient_J(w1, ctx)
    gap = evaluate_J(w2, ctx) - evaluate_J(w1, ctx) - float(np.sum(g * h))
    alpha_term = 0.5 * ctx.alpha * ctx.h4.inner(h, h) if ctx.alpha else 0.0
    return BregmanGap(gap, alpha_term, interior_energy(h, ctx.grid, ctx.op))


def bregman_identity(w1, h, ctx):
    """Closed form of the gap from the exact expansion of the operator.

    ``sum dw [2 Lt(w1) Q(h) + (S(h, w1) + Q(h))**2] + alpha ||h||^2``.
    """
    r1 = ctx.op.Ltilde(w1)
    S = ctx.op.S(h, w1)
    Q = ctx.op.Q(h)
    data = float(np.sum(ctx.data_weight * (2.0 * r1 * Q + (S + Q) ** 2)))
    reg = ctx.alpha * ctx.h4.inner(h, h) if ctx.alpha else 0.0
    return data + reg


def s_only_remainder(w1, h, ctx):
    """``sum dw S(h, w1)**2 + alpha ||h||^2``: the gap with the ``Q`` terms dropped."""
    S = ctx.op.S(h, w1)
    reg = ctx.alpha * ctx.h4.inner(h, h) if ctx.alpha else 0.0
    return float(np.sum(ctx.data_weight * S * S)) + reg
