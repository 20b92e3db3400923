import numpy as np
import pytest

from convexify.exceptions import PositivityError
from convexify.geometry import GridSpec, build_domain
from convexify.model import CoefficientSet
from convexify.recover import error_metrics, reconstruct_state, recover_coefficient


def test_constant_f(grid1d):
    co = CoefficientSet.from_functions(grid1d.space_axes, f=3.0)
    w = np.full(grid1d.shape, 2.5)
    assert np.allclose(recover_coefficient(w, co, grid1d), 2.5)


def test_exponential_f(grid1d):
    co = CoefficientSet.from_functions(grid1d.space_axes, f=lambda x: np.exp(x))
    c = recover_coefficient(np.zeros(grid1d.shape), co, grid1d)
    # ln f = x, so c = -0 - 1 = -1 (second derivative vanishes, gradient squared is 1)
    assert np.allclose(c, -1.0)


def test_only_t0_slice_is_read(grid1d, coeffs1d):
    rng = np.random.default_rng(0)
    w = rng.normal(size=grid1d.shape)
    c = recover_coefficient(w, coeffs1d, grid1d)
    w2 = w.copy()
    w2[:, grid1d.t != 0] += 100.0
    assert np.array_equal(c, recover_coefficient(w2, coeffs1d, grid1d))


def test_reconstruct_state(grid1d):
    f = 2 + np.sin(grid1d.axes[0])
    v, u = reconstruct_state(np.full(grid1d.shape, 0.7), f, grid1d)
    assert np.allclose(u, f[:, None] * np.exp(0.7 * grid1d.t)[None])
    with pytest.raises(PositivityError):
        reconstruct_state(np.zeros(grid1d.shape), -f, grid1d)
    with pytest.raises(OverflowError):
        reconstruct_state(np.full(grid1d.shape, 5000.0), f, grid1d)


def test_metrics(grid1d):
    c = 1 + grid1d.axes[0]
    m = error_metrics(c, c, grid1d)
    assert m.rel_L2 == 0 and m.rel_Linf == 0 and not m.absolute
    m = error_metrics(1.1 * c, c, grid1d)
    assert m.rel_L2 == pytest.approx(0.1) and m.rel_Linf == pytest.approx(0.1)
    m = error_metrics(c, np.zeros_like(c), grid1d)
    assert m.absolute


def test_metrics_ignore_outside_region():
    grid = build_domain(GridSpec(n_space=2, n_x1=11, n_xbar=9, n_t=11))
    c = np.ones(grid.shape[:-1])
    bad = c.copy()
    outside = grid.slice_weights(True) == 0
    bad[outside] = 50.0
    assert error_metrics(bad, c, grid).rel_L2 == 0
