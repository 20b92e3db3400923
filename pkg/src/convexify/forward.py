"""Synthetic lateral Cauchy data from an oracle solution."""
from dataclasses import dataclass, replace

import numpy as np

from .exceptions import ConfigurationError, GridMismatchError, PositivityError
from .model import restriction_indices
from .stencils import apply_along, first_derivative_matrix, second_derivative_matrix


class EllipticOperator:
    """Finite-difference ``L``, ``L_c`` and ``L_0`` for given coefficients.

    Works on spatial fields (shape ``space_shape``) and on space-time fields
    with a trailing time axis; coefficients broadcast over time.
    """

    def __init__(self, coeffs):
        self.coeffs = coeffs
        self.n = coeffs.n_space
        for ax in coeffs.space_axes:
            if len(ax) < 5:
                raise ConfigurationError("grid too coarse for the stencil: < 5 nodes on an axis")
        self.D1 = [first_derivative_matrix(len(ax), h)
                   for ax, h in zip(coeffs.space_axes, coeffs.spacings)]
        self.D2 = [second_derivative_matrix(len(ax), h)
                   for ax, h in zip(coeffs.space_axes, coeffs.spacings)]

    def _bc(self, coef, w):
        extra = w.ndim - coef.ndim
        return coef.reshape(coef.shape + (1,) * extra)

    def d(self, w, k):
        return apply_along(self.D1[k], w, k)

    def d_T(self, y, k):
        return apply_along(self.D1[k].T, y, k)

    def dd(self, w, k, l):
        if k == l:
            return apply_along(self.D2[k], w, k)
        return self.d(self.d(w, l), k)

    def dd_T(self, y, k, l):
        if k == l:
            return apply_along(self.D2[k].T, y, k)
        return self.d_T(self.d_T(y, k), l)

    def L0(self, w):
        a = self.coeffs.a
        return sum(self._bc(a[i, j], w) * self.dd(w, i, j)
                   for i in range(self.n) for j in range(self.n))

    def Lc(self, w):
        b = self.coeffs.b
        out = self.L0(w)
        if self.coeffs.has_drift:
            out = out + sum(self._bc(b[j], w) * self.d(w, j) for j in range(self.n))
        return out

    def L(self, w, c):
        return self.Lc(w) + self._bc(np.asarray(c), w) * w

    def Lc_T(self, y):
        a, b = self.coeffs.a, self.coeffs.b
        out = sum(self.dd_T(self._bc(a[i, j], y) * y, i, j)
                  for i in range(self.n) for j in range(self.n))
        if self.coeffs.has_drift:
            out = out + sum(self.d_T(self._bc(b[j], y) * y, j) for j in range(self.n))
        return out


def assemble_elliptic(coeffs):
    return EllipticOperator(coeffs)


@dataclass(frozen=True, eq=False)
class FineSolution:
    space_axes: tuple
    t: np.ndarray
    u: np.ndarray


def evolve_two_sided(oracle, spec):
    """Sample the oracle on the generator's space grid and refined time grid."""
    t = spec.axes(refine=int(spec.fine_factor))[-1]
    u = oracle.u(t)
    mesh = np.meshgrid(*oracle.space_axes, t, indexing="ij")
    psi = mesh[0] + (mesh[-1] / spec.T) ** 2 + spec.a
    for xk in mesh[1:-1]:
        psi = psi + xk**2
    closed = (mesh[0] >= 0) & (psi <= spec.d)
    if not np.all(np.isfinite(u[closed])) or np.min(u[closed]) <= 0:
        raise PositivityError(
            "u must stay positive on the closed domain (needed for v = ln u); "
            f"min u = {np.min(u[closed]):g}")
    return FineSolution(space_axes=oracle.space_axes, t=t, u=u)


@dataclass(frozen=True, eq=False)
class CauchyTraces:
    """Dirichlet and Neumann traces on the ``x1 = 0`` face of the box.

    Arrays have shape ``(n_xbar, ..., n_t)``; in one space dimension just
    ``(n_t,)``.
    """

    xbar_axes: tuple
    t: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    noise_level: float = 0.0
    seed: int = None

    def __post_init__(self):
        if not (np.all(np.isfinite(self.g1)) and np.all(np.isfinite(self.g2))):
            raise PositivityError("traces must be finite")
        if np.min(self.g1) <= 0:
            raise PositivityError("g1 must be positive on the measurement face")

    @property
    def shape(self):
        return self.g1.shape

    def to_table(self):
        """Rows ``(x2, ..., t, g1, g2)`` in C order of the face grid."""
        mesh = np.meshgrid(*self.xbar_axes, self.t, indexing="ij")
        cols = [m.ravel() for m in mesh] + [self.g1.ravel(), self.g2.ravel()]
        return np.column_stack(cols)

    @classmethod
    def from_table(cls, table, n_space, noise_level=0.0, seed=None):
        table = np.asarray(table, dtype=float)
        if table.ndim != 2 or table.shape[1] != n_space + 2:
            raise ConfigurationError(
                f"trace table needs {n_space + 2} columns (xbar..., t, g1, g2)")
        coords = [np.unique(table[:, k]) for k in range(n_space)]
        shape = tuple(len(c) for c in coords)
        if np.prod(shape) != len(table):
            raise GridMismatchError("trace table is not a full tensor grid")
        order = np.lexsort(tuple(table[:, k] for k in reversed(range(n_space))))
        table = table[order]
        return cls(xbar_axes=tuple(coords[:-1]), t=coords[-1],
                   g1=table[:, -2].reshape(shape), g2=table[:, -1].reshape(shape),
                   noise_level=noise_level, seed=seed)


def extract_traces(solution, grid):
    """Traces of ``u`` and ``du/dx1`` at ``x1 = 0``, restricted to the inversion face.

    The normal derivative is centered when the generator grid extends below
    ``x1 = 0`` and second-order one-sided otherwise.
    """
    x1 = solution.space_axes[0]
    hits = np.flatnonzero(np.isclose(x1, 0.0, atol=1e-12))
    if hits.size != 1 or x1.size < 3:
        raise GridMismatchError("generator grid has no x1 = 0 layer")
    i0 = int(hits[0])
    h = x1[1] - x1[0]
    u = solution.u
    if i0 >= 1 and i0 + 1 < x1.size:
        g2 = (u[i0 + 1] - u[i0 - 1]) / (2.0 * h)
    elif i0 + 2 < x1.size:
        g2 = (-3.0 * u[i0] + 4.0 * u[i0 + 1] - u[i0 + 2]) / (2.0 * h)
    else:
        raise GridMismatchError("missing layer nodes for the normal derivative")
    g1 = u[i0]
    fine_face = tuple(solution.space_axes[1:]) + (solution.t,)
    coarse_face = tuple(grid.space_axes[1:]) + (grid.t,)
    idx = restriction_indices(fine_face, coarse_face)
    sel = np.ix_(*idx)
    return CauchyTraces(xbar_axes=tuple(grid.space_axes[1:]), t=grid.t.copy(),
                        g1=g1[sel], g2=g2[sel])


def add_noise(traces, delta, seed=0):
    """Multiplicative uniform noise ``g <- g (1 + delta * eta)``, eta ~ U[-1, 1].

    Draws for ``g1`` come first, then ``g2``, each in C order of the face grid.
    """
    if delta < 0:
        raise ConfigurationError(f"noise level must be >= 0, got {delta}")
    if delta == 0:
        return replace(traces, noise_level=0.0, seed=seed)
    rng = np.random.default_rng(seed)
    eta1 = rng.uniform(-1.0, 1.0, traces.g1.shape)
    eta2 = rng.uniform(-1.0, 1.0, traces.g2.shape)
    g1 = traces.g1 * (1.0 + delta * eta1)
    if np.min(g1) <= 0:
        raise PositivityError(f"noise level {delta} makes g1 non-positive")
    return replace(traces, g1=g1, g2=traces.g2 * (1.0 + delta * eta2),
                   noise_level=float(delta), seed=seed)
