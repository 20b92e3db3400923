"""Space-time domain, Carleman weight, masks and quadrature.

The paraboloid region ``G = {x1 > 0, x1 + |xbar|^2 + t^2/T^2 + a < d}`` is
represented by masking a tensor grid over its bounding box.
"""
from dataclasses import dataclass, field
from functools import cached_property
from itertools import product

import numpy as np

from .exceptions import ConfigurationError, WeightOverflowError
from .stencils import trapezoid_weights

MAX_EXPONENT = 700.0
NORMALIZATIONS = ("outer", "max")


@dataclass(frozen=True)
class GridSpec:
    """Domain parameters and node counts.

    ``epsilon`` defaults to ``0.1 * (d - a)``. The time axis should have an
    odd node count so that ``t = 0`` is a node.
    """

    n_space: int = 1
    a: float = 0.2
    d: float = 0.5
    T: float = 1.0
    epsilon: float = None
    n_x1: int = 41
    n_xbar: int = 11
    n_t: int = 41
    fine_factor: int = 2

    def __post_init__(self):
        if self.epsilon is None:
            object.__setattr__(self, "epsilon", 0.1 * (self.d - self.a))
        self.validate()

    def validate(self):
        if self.n_space not in (1, 2, 3):
            raise ConfigurationError(f"n_space must be 1, 2 or 3, got {self.n_space}")
        if not 0.0 < self.d < 1.0:
            raise ConfigurationError(f"d must lie in (0, 1), got {self.d}")
        if not 0.0 < self.a < self.d:
            raise ConfigurationError(
                f"empty domain: need 0 < a < d, got a={self.a}, d={self.d}")
        if self.T <= 0:
            raise ConfigurationError(f"T must be positive, got {self.T}")
        if not 0.0 < self.epsilon < self.d - self.a:
            raise ConfigurationError(
                f"epsilon must lie in (0, d - a) = (0, {self.d - self.a}), got {self.epsilon}")
        counts = {"n_x1": self.n_x1, "n_t": self.n_t}
        if self.n_space > 1:
            counts["n_xbar"] = self.n_xbar
        for key, n in counts.items():
            if n < 5:
                raise ConfigurationError(f"degenerate box: {key}={n} < 5 nodes")
        if int(self.fine_factor) < 1:
            raise ConfigurationError(f"fine_factor must be >= 1, got {self.fine_factor}")

    @property
    def half_width(self):
        return float(np.sqrt(self.d - self.a))

    @property
    def t_max(self):
        return self.T * self.half_width

    def axes(self, refine=1):
        """Node coordinates per axis (x1, x2, ..., t)."""
        def grid(lo, hi, n):
            return np.linspace(lo, hi, (n - 1) * refine + 1)

        out = [grid(0.0, self.d - self.a, self.n_x1)]
        for _ in range(self.n_space - 1):
            out.append(grid(-self.half_width, self.half_width, self.n_xbar))
        out.append(grid(-self.t_max, self.t_max, self.n_t))
        return out

    def refined(self, factor):
        """Same box with every axis refined by ``factor``."""
        return GridSpec(
            n_space=self.n_space, a=self.a, d=self.d, T=self.T, epsilon=self.epsilon,
            n_x1=(self.n_x1 - 1) * factor + 1, n_xbar=(self.n_xbar - 1) * factor + 1,
            n_t=(self.n_t - 1) * factor + 1, fine_factor=self.fine_factor)


@dataclass(frozen=True)
class CarlemanParams:
    """Carleman weight parameters: ``phi = exp(lam * psi**-nu)``.

    ``normalization='outer'`` multiplies ``phi**2`` by ``exp(-3 lam d**-nu)``;
    ``'max'`` by ``exp(-2 lam a**-nu)`` so the weight is at most 1 on the
    closed domain.
    """

    lam: float = 1.0
    nu: float = 2.0
    normalization: str = "max"

    def __post_init__(self):
        if self.lam < 0:
            raise ConfigurationError(f"lambda must be >= 0, got {self.lam}")
        if self.nu < 1:
            raise ConfigurationError(f"nu must be >= 1, got {self.nu}")
        if self.normalization not in NORMALIZATIONS:
            raise ConfigurationError(
                f"normalization must be one of {NORMALIZATIONS}, got {self.normalization!r}")

    def shift(self, spec):
        if self.normalization == "outer":
            return -3.0 * self.lam * spec.d ** (-self.nu)
        return -2.0 * self.lam * spec.a ** (-self.nu)


def psi_value(point, spec):
    """``x1 + |xbar|^2 + t^2/T^2 + a`` at ``point = (x1, x2, ..., t)``.

    Components may be arrays; they are broadcast against each other.
    """
    point = [np.asarray(p, dtype=float) for p in point]
    if len(point) != spec.n_space + 1:
        raise ConfigurationError(
            f"point needs {spec.n_space + 1} coordinates, got {len(point)}")
    x1, xbar, t = point[0], point[1:-1], point[-1]
    psi = x1 + (t / spec.T) ** 2 + spec.a
    for xk in xbar:
        psi = psi + xk**2
    return psi


def weight_from_psi(psi, params, spec):
    psi = np.asarray(psi, dtype=float)
    exponent = 2.0 * params.lam * psi ** (-params.nu) + params.shift(spec)
    peak = float(np.max(exponent)) if exponent.size else 0.0
    if peak > MAX_EXPONENT:
        raise WeightOverflowError(
            f"Carleman exponent {peak:.1f} exceeds {MAX_EXPONENT:.0f} for "
            f"lambda={params.lam}, nu={params.nu}, a={spec.a}; use normalization='max' "
            "or smaller lambda")
    return np.exp(exponent)


def carleman_weight_sq(point, params, spec):
    """Normalized ``phi_lambda**2`` as one exponential of the combined exponent."""
    return weight_from_psi(psi_value(point, spec), params, spec)


@dataclass(frozen=True, eq=False)
class DomainGrid:
    spec: GridSpec
    axes: tuple
    spacings: tuple
    psi: np.ndarray
    inside_G: np.ndarray
    inside_G_eps: np.ndarray
    on_gamma: np.ndarray
    near_xi: np.ndarray
    quad_weights: np.ndarray
    box_weights: np.ndarray = field(repr=False)

    @property
    def shape(self):
        return self.psi.shape

    @property
    def size(self):
        return self.psi.size

    @property
    def n_space(self):
        return self.spec.n_space

    @property
    def space_shape(self):
        return self.shape[:-1]

    @property
    def space_axes(self):
        return self.axes[:-1]

    @property
    def t(self):
        return self.axes[-1]

    @property
    def h_t(self):
        return self.spacings[-1]

    @cached_property
    def t0_index(self):
        hits = np.flatnonzero(np.isclose(self.t, 0.0, atol=1e-12 * max(1.0, self.spec.T)))
        if hits.size != 1:
            raise ConfigurationError(
                "time axis has no t = 0 node; use an odd n_t")
        return int(hits[0])

    def mesh(self):
        return np.meshgrid(*self.axes, indexing="ij")

    def space_mesh(self):
        return np.meshgrid(*self.space_axes, indexing="ij")

    def weight_sq(self, params):
        """Normalized Carleman weight at every node of the box."""
        return weight_from_psi(self.psi, params, self.spec)

    def slice_weights(self, eps_shrunk=True):
        """Spatial quadrature weights on the ``t = 0`` slice.

        With ``eps_shrunk`` the slice is restricted to ``psi < d - epsilon``.
        """
        k = self.t0_index
        mask = (self.inside_G_eps if eps_shrunk else self.inside_G)[..., k]
        w = np.ones(self.space_shape)
        for ax, h in enumerate(self.spacings[:-1]):
            shp = [1] * len(self.space_shape)
            shp[ax] = -1
            w = w * trapezoid_weights(self.space_shape[ax], h).reshape(shp)
        return np.where(mask, w, 0.0)

    def same_as(self, other):
        return self.shape == other.shape and all(
            np.array_equal(p, q) for p, q in zip(self.axes, other.axes))


def _closed_region_cell_fraction(indicator):
    """Mean of the corner indicator over every cell of the box."""
    frac = indicator.astype(float)
    for ax in range(indicator.ndim):
        lo = [slice(None)] * indicator.ndim
        hi = [slice(None)] * indicator.ndim
        lo[ax] = slice(None, -1)
        hi[ax] = slice(1, None)
        frac = 0.5 * (frac[tuple(lo)] + frac[tuple(hi)])
    return frac


def build_domain(spec, refine=1):
    """Build node masks and quadrature for the bounding box of ``G``."""
    spec.validate()
    axes = tuple(spec.axes(refine))
    spacings = tuple(float(ax[1] - ax[0]) for ax in axes)
    mesh = np.meshgrid(*axes, indexing="ij")
    psi = psi_value(mesh, spec)
    x1 = mesh[0]

    inside_G = (x1 > 0) & (psi < spec.d)
    inside_G_eps = (x1 > 0) & (psi < spec.d - spec.epsilon)
    on_gamma = (x1 == 0) & (psi < spec.d)
    closed = inside_G | on_gamma

    frac = _closed_region_cell_fraction(closed)
    cut = (frac > 0) & (frac < 1)
    near_xi = np.zeros_like(closed)
    cut_idx = np.argwhere(cut)
    for corner in product((0, 1), repeat=closed.ndim):
        idx = tuple((cut_idx + np.array(corner)).T)
        near_xi[idx] = True

    box = np.ones(psi.shape)
    for ax, (n, h) in enumerate(zip(psi.shape, spacings)):
        shp = [1] * psi.ndim
        shp[ax] = -1
        box = box * trapezoid_weights(n, h).reshape(shp)
    # trapezoid weight per node == cell volume times corner fraction, summed
    quad = np.where(closed, box, 0.0)

    if not inside_G.any():
        raise ConfigurationError("grid has no nodes inside G; refine the grid")
    if not on_gamma.any():
        raise ConfigurationError("grid has no nodes on the measurement face")
    return DomainGrid(spec=spec, axes=axes, spacings=spacings, psi=psi,
                      inside_G=inside_G, inside_G_eps=inside_G_eps, on_gamma=on_gamma,
                      near_xi=near_xi, quad_weights=quad, box_weights=box)


def q_constants(spec, nu):
    """Exponent rate of the interior bound.

    Returns ``(derived, alternate)``. ``derived`` follows from combining
    ``exp(-3 lam d**-nu)`` with ``exp(2 lam (d - eps)**-nu)``; ``alternate``
    groups the powers as ``1 - 3 (d - eps)**nu / (2 d)**nu``, which differs.
    """
    de = spec.d - spec.epsilon
    derived = de ** (-nu) * (1.0 - 1.5 * (de / spec.d) ** nu)
    alternate = de ** (-nu) * (1.0 - 3.0 * de**nu / (2.0 * spec.d) ** nu)
    return derived, alternate


def alpha_window(params, spec):
    """Lower end of the admissible regularization window ``(exp(-lam/(2 d**nu)), 1)``."""
    return float(np.exp(-params.lam / (2.0 * spec.d**params.nu)))
