"""Problem coefficients, structural checks and exact-solution oracles."""
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import (ConfigurationError, EllipticityError, GridMismatchError,
                         PositivityError, SymmetryError, UnsupportedGeneratorError)
from .stencils import trapezoid_weights


def _evaluate(value, mesh, shape):
    """Evaluate a constant, array or callable of the spatial coordinates."""
    if callable(value):
        out = np.asarray(value(*mesh), dtype=float)
    else:
        out = np.asarray(value, dtype=float)
    return np.broadcast_to(out, shape).copy()


def _matrix_field(a, n, mesh, shape):
    if a is None:
        a = np.eye(n)
    if callable(a):
        out = np.asarray(a(*mesh), dtype=float)
    else:
        a = np.asarray(a, dtype=float)
        if a.ndim == 0:
            a = a * np.eye(n)
        out = a.reshape((n, n) + (1,) * len(shape))
    return np.broadcast_to(out, (n, n) + shape).copy()


def _vector_field(b, n, mesh, shape):
    if b is None:
        b = np.zeros(n)
    if callable(b):
        out = np.asarray(b(*mesh), dtype=float)
    else:
        out = np.asarray(b, dtype=float).reshape((n,) + (1,) * len(shape))
    return np.broadcast_to(out, (n,) + shape).copy()


@dataclass(frozen=True, eq=False)
class CoefficientSet:
    """Coefficient fields sampled on a spatial tensor grid.

    ``a`` has shape ``(n, n, *space_shape)``, ``b`` has ``(n, *space_shape)``;
    ``c_true`` is ground truth for scoring only and is never read by the
    inverter.
    """

    space_axes: tuple
    a: np.ndarray
    b: np.ndarray
    f: np.ndarray
    c_true: np.ndarray = None
    b_lower: float = None

    def __post_init__(self):
        if self.b_lower is None:
            object.__setattr__(self, "b_lower", 0.25 * float(np.min(self.f)))

    @classmethod
    def from_functions(cls, space_axes, f, a=None, b=None, c=None, b_lower=None):
        space_axes = tuple(np.asarray(ax, dtype=float) for ax in space_axes)
        n = len(space_axes)
        shape = tuple(len(ax) for ax in space_axes)
        mesh = np.meshgrid(*space_axes, indexing="ij")
        return cls(space_axes=space_axes,
                   a=_matrix_field(a, n, mesh, shape),
                   b=_vector_field(b, n, mesh, shape),
                   f=_evaluate(f, mesh, shape),
                   c_true=None if c is None else _evaluate(c, mesh, shape),
                   b_lower=b_lower)

    @property
    def n_space(self):
        return len(self.space_axes)

    @property
    def space_shape(self):
        return self.f.shape

    @property
    def spacings(self):
        return tuple(float(ax[1] - ax[0]) for ax in self.space_axes)

    @property
    def has_drift(self):
        return bool(np.any(self.b != 0))


class EllipticityReport(NamedTuple):
    mu1: float
    mu2: float
    ok: bool


def validate_coefficients(coeffs, strict=True):
    """Empirical ellipticity bounds and the positivity check ``f >= 2 b``.

    The bounds are the extreme eigenvalues of ``a(x)`` over the grid, which
    are exactly the extreme Rayleigh quotients.
    """
    a = coeffs.a
    if not np.allclose(a, np.swapaxes(a, 0, 1), rtol=0, atol=1e-13):
        raise SymmetryError("a_ij is not symmetric")
    n = coeffs.n_space
    mats = np.moveaxis(a.reshape(n, n, -1), -1, 0)
    eig = np.linalg.eigvalsh(mats)
    mu1, mu2 = float(eig[:, 0].min()), float(eig[:, -1].max())
    problems = []
    if mu1 <= 0:
        problems.append(EllipticityError(f"ellipticity fails: mu1 = {mu1:g} <= 0"))
    fmin = float(np.min(coeffs.f))
    if coeffs.b_lower <= 0 or fmin < 2.0 * coeffs.b_lower:
        problems.append(PositivityError(
            f"positivity fails: min f = {fmin:g} < 2 b = {2.0 * coeffs.b_lower:g}"))
    if problems and strict:
        raise problems[0]
    return EllipticityReport(mu1, mu2, not problems)


@dataclass(frozen=True)
class TikhonovParams:
    alpha: float = 1e-4
    R: float = 1.0

    def __post_init__(self):
        if self.alpha < 0:
            raise ConfigurationError(f"alpha must be >= 0, got {self.alpha}")
        if self.R <= 0:
            raise ConfigurationError(f"R must be positive, got {self.R}")

    def check_window(self, carleman, spec):
        """Warn when alpha lies outside the strict-convexity window."""
        lo = float(np.exp(-carleman.lam / (2.0 * spec.d**carleman.nu)))
        if not lo < self.alpha < 1.0:
            warnings.warn(
                f"alpha={self.alpha:g} outside the convexity window ({lo:.3g}, 1)",
                stacklevel=2)
            return False
        return True


@dataclass(frozen=True, eq=False)
class OracleSolution:
    """Exact solution ``u(x, t) = sum_k modes[k](x) * exp(rates[k] * t)``.

    Fields live on the generator's spatial grid, which may extend beyond the
    inversion box (eigenmode generator) or refine it (separable generator).
    """

    kind: str
    space_axes: tuple
    modes: np.ndarray
    rates: np.ndarray
    c_true: np.ndarray
    a: np.ndarray
    b: np.ndarray
    operator: object = None

    @property
    def f(self):
        return self.modes.sum(axis=0)

    def u(self, t):
        t = np.asarray(t, dtype=float)
        growth = np.exp(np.multiply.outer(self.rates, t))
        return np.tensordot(self.modes, growth, axes=([0], [0]))

    def u_t(self, t):
        t = np.asarray(t, dtype=float)
        growth = self.rates[:, None] * np.exp(np.multiply.outer(self.rates, t))
        return np.tensordot(self.modes, growth, axes=([0], [0]))

    def w(self, t):
        """``d/dt ln u``, analytic in time."""
        return self.u_t(t) / self.u(t)

    def generator_residual(self, t):
        """``u_t - L_h u`` of the semi-discrete generator (eigenmode only)."""
        if self.operator is None:
            raise UnsupportedGeneratorError("separable oracle has no discrete generator")
        u = self.u(t)
        flat = u.reshape(-1, u.shape[-1])
        Lu = (self.operator @ flat).reshape(u.shape)
        return self.u_t(t) - Lu


def restriction_indices(fine_axes, coarse_axes):
    """Per-axis indices of the coarse nodes inside the fine axes."""
    out = []
    for fine, coarse in zip(fine_axes, coarse_axes):
        idx = np.searchsorted(fine, coarse - 1e-9 * max(1.0, np.ptp(fine)))
        idx = np.clip(idx, 0, len(fine) - 1)
        tol = 1e-7 * (fine[1] - fine[0])
        if not np.allclose(fine[idx], coarse, rtol=0, atol=tol):
            raise GridMismatchError("coarse grid nodes are not nodes of the fine grid")
        out.append(idx)
    return out


def restrict(field, fine_axes, coarse_axes):
    idx = restriction_indices(fine_axes, coarse_axes)
    return field[np.ix_(*idx)] if len(idx) > 1 else field[idx[0]]


def _fd_derivatives(func, mesh, eta):
    """First and second partials of a callable by 4th-order central differences."""
    n = len(mesh)
    c1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
    c2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
    offsets = np.arange(-2, 3)

    def shifted(k, s):
        pts = list(mesh)
        pts[k] = pts[k] + s
        return np.asarray(func(*pts), dtype=float)

    def d1_of(g, k):
        return sum(c * g(k, o * eta) for c, o in zip(c1, offsets) if c) / eta

    grad = [d1_of(shifted, k) for k in range(n)]
    hess = [[None] * n for _ in range(n)]
    for k in range(n):
        hess[k][k] = sum(c * shifted(k, o * eta) for c, o in zip(c2, offsets)) / eta**2
        for l in range(k + 1, n):
            def shifted_kl(_, s, k=k, l=l):
                def inner(m, r):
                    pts = list(mesh)
                    pts[k] = pts[k] + s
                    pts[m] = pts[m] + r
                    return np.asarray(func(*pts), dtype=float)
                return d1_of(inner, l)
            hess[k][l] = hess[l][k] = d1_of(shifted_kl, k)
    return grad, hess


def oracle_separable(spec, f, mu=0.0, a=None, b=None, b_lower=None, eta=1e-3):
    """Separable exact solution ``u = f(x) exp(mu t)``.

    ``c_true = mu - (L0 f + b . grad f) / f`` is evaluated on the refined
    generator grid; derivatives of ``f`` come from 4th-order differences of
    the callable with step ``eta`` (independent of the grid).
    """
    axes = tuple(spec.axes(refine=int(spec.fine_factor))[:-1])
    n = len(axes)
    shape = tuple(len(ax) for ax in axes)
    mesh = np.meshgrid(*axes, indexing="ij")
    func = f if callable(f) else (lambda *x: np.full(np.shape(x[0]), float(f)))
    fv = _evaluate(func, mesh, shape)
    A = _matrix_field(a, n, mesh, shape)
    B = _vector_field(b, n, mesh, shape)
    if np.min(fv) <= 0:
        raise PositivityError(f"f must be positive, min f = {np.min(fv):g}")
    grad, hess = _fd_derivatives(func, mesh, eta)
    num = sum(A[i, j] * hess[i][j] for i in range(n) for j in range(n))
    num = num + sum(B[j] * grad[j] for j in range(n))
    c_true = mu - num / fv
    coeffs = CoefficientSet(space_axes=axes, a=A, b=B, f=fv, c_true=c_true,
                            b_lower=b_lower)
    validate_coefficients(coeffs)
    return OracleSolution(kind="separable", space_axes=axes, modes=fv[None],
                          rates=np.array([float(mu)]), c_true=c_true, a=A, b=B)


def neumann_generator(axes, a_diag, c):
    """Symmetric pencil ``(K, m)`` with ``L_h = diag(m)^-1 K`` (reflecting ends)."""
    n = len(axes)
    masses = [trapezoid_weights(len(ax), ax[1] - ax[0]) for ax in axes]
    m = masses[0]
    for mk in masses[1:]:
        m = np.multiply.outer(m, mk)
    m = m.ravel()
    K = sp.diags(m * np.ravel(c))
    for k, ax in enumerate(axes):
        nk, h = len(ax), ax[1] - ax[0]
        main = np.full(nk, 2.0)
        main[0] = main[-1] = 1.0
        stiff = sp.diags([-np.ones(nk - 1), main, -np.ones(nk - 1)], [-1, 0, 1]) / h
        factors = [sp.diags(mk) for mk in masses]
        factors[k] = stiff
        term = factors[0]
        for fac in factors[1:]:
            term = sp.kron(term, fac)
        K = K - a_diag[k] * term
    return sp.csr_matrix(K), m


def oracle_eigenmode(spec, c, num_modes=2, gamma=None, exponent_cap=20.0, a=None, b=None,
                     pad=0.5, b_lower=None):
    """Spectral-truncation solution of the semi-discrete Neumann problem.

    The generator box extends every spatial axis by ``pad * (d - a)`` on both
    sides so the measurement face ``x1 = 0`` is interior. Only constant
    diagonal ``a`` and ``b = 0`` give a symmetric discrete operator.
    """
    n = spec.n_space
    if b is not None and np.any(np.asarray(b) != 0):
        raise UnsupportedGeneratorError("eigenmode generator requires b = 0")
    if callable(a):
        raise UnsupportedGeneratorError("eigenmode generator requires constant a")
    A = np.eye(n) if a is None else np.asarray(a, dtype=float)
    if A.ndim == 0:
        A = A * np.eye(n)
    if np.any(A != np.diag(np.diag(A))):
        raise UnsupportedGeneratorError("eigenmode generator requires diagonal a")
    ff = int(spec.fine_factor)
    base = spec.axes(refine=ff)[:-1]
    axes = []
    for ax in base:
        h = ax[1] - ax[0]
        extra = int(np.ceil(pad * (spec.d - spec.a) / h))
        axes.append(np.concatenate([ax[0] - h * np.arange(extra, 0, -1), ax,
                                    ax[-1] + h * np.arange(1, extra + 1)]))
    axes = tuple(axes)
    shape = tuple(len(ax) for ax in axes)
    mesh = np.meshgrid(*axes, indexing="ij")
    cv = _evaluate(c, mesh, shape)
    K, m = neumann_generator(axes, np.diag(A), cv)
    scale = 1.0 / np.sqrt(m)
    sym = sp.diags(scale) @ K @ sp.diags(scale)
    if sym.shape[0] <= 3000:
        vals, vecs = scipy.linalg.eigh(sym.toarray())
        order = np.argsort(vals)[::-1][:num_modes]
        vals, vecs = vals[order], vecs[:, order]
    else:
        vals, vecs = spla.eigsh(sym, k=num_modes, which="LA")
        order = np.argsort(vals)[::-1]
        vals, vecs = vals[order], vecs[:, order]
    vecs = scale[:, None] * vecs
    modes = []
    for k in range(num_modes):
        v = vecs[:, k].reshape(shape)
        v = v / np.max(np.abs(v))
        if v.sum() < 0:
            v = -v
        modes.append(v)
    modes = np.array(modes)
    if gamma is None:
        gamma = [1.0] + [0.1] * (num_modes - 1)
    gamma = np.asarray(gamma, dtype=float)
    if gamma.shape != (num_modes,):
        raise ConfigurationError("gamma must have one weight per mode")
    over = np.abs(vals) * spec.t_max
    if np.any(over > exponent_cap):
        k = int(np.argmax(over))
        raise ConfigurationError(
            f"mode {k} has |rate| * t_max = {over[k]:.2f} > exponent_cap = {exponent_cap}")
    modes = gamma.reshape((-1,) + (1,) * n) * modes
    f = modes.sum(axis=0)
    Afield = _matrix_field(A, n, mesh, shape)
    Bfield = _vector_field(None, n, mesh, shape)
    coeffs = CoefficientSet(space_axes=axes, a=Afield, b=Bfield, f=f, c_true=cv,
                            b_lower=b_lower)
    validate_coefficients(coeffs)
    operator = sp.diags(1.0 / m) @ K
    return OracleSolution(kind="eigenmode", space_axes=axes, modes=modes, rates=vals,
                          c_true=cv, a=Afield, b=Bfield, operator=sp.csr_matrix(operator))
