import numpy as np
import pytest

from convexify.exceptions import ConfigurationError, InfeasibleDataError
from convexify.functional import H4Norm, clamped_mask
from convexify.optimize import (OptimizerConfig, build_boundary_lift, minimize_gradient_descent,
                                project_to_ball, random_start, smooth_cutoff)
from convexify.pipeline import monotone
from convexify.transform import TransformedTraces
from convexify.verify import default_context


def tt_for(grid, g1, g2):
    return TransformedTraces(xbar_axes=(), t=grid.t, g1=g1, g2=g2)


def test_cutoff():
    x = np.linspace(0, 0.3, 31)
    chi = smooth_cutoff(x, 0.15)
    assert np.all(chi[x <= 0.075] == 1) and np.all(chi[x >= 0.15] == 0)
    assert np.all(np.diff(chi) <= 0)


def test_lift_examples(grid1d):
    n_t = len(grid1d.t)
    W = build_boundary_lift(tt_for(grid1d, np.ones(n_t), np.zeros(n_t)), grid1d)
    assert np.allclose(W[0], 1.0)
    W = build_boundary_lift(tt_for(grid1d, np.zeros(n_t), np.ones(n_t)), grid1d)
    h = grid1d.spacings[0]
    assert np.allclose(W[0], 0.0) and np.allclose(W[1], h)
    assert np.allclose(W[grid1d.axes[0] >= 0.15], 0.0)
    with pytest.raises(ConfigurationError):
        build_boundary_lift(tt_for(grid1d, np.ones(5), np.ones(5)), grid1d)


def test_projection(grid1d):
    h4 = H4Norm(grid1d)
    zero = np.zeros(grid1d.shape)
    z = np.ones(grid1d.shape)
    R = h4.norm(z)
    zp, theta = project_to_ball(2 * z, zero, R, h4)
    assert theta == pytest.approx(0.5, rel=1e-12)
    zp, theta = project_to_ball(0.5 * z, zero, R, h4)
    assert theta == 1.0
    rng = np.random.default_rng(0)
    W = 0.1 * rng.normal(size=grid1d.shape)
    z = rng.normal(size=grid1d.shape)
    R = 2 * h4.norm(W)
    zp, theta = project_to_ball(100 * z, W, R, h4)
    assert h4.norm(W + zp) == pytest.approx(R, rel=1e-10)
    with pytest.raises(InfeasibleDataError):
        project_to_ball(z, W, 0.5 * h4.norm(W), h4)


def test_random_start(grid1d):
    h4 = H4Norm(grid1d)
    W = np.zeros(grid1d.shape)
    W[:] = 0.2
    z = random_start(W, 1e3, h4, np.random.default_rng(1))
    assert h4.norm(W + z) == pytest.approx(900, rel=1e-10)
    assert np.all(z[clamped_mask(grid1d)] == 0)


def test_config_validation():
    with pytest.raises(ConfigurationError):
        OptimizerConfig(step0=0)
    with pytest.raises(ConfigurationError):
        OptimizerConfig(backtrack=1.0)
    with pytest.raises(ConfigurationError):
        OptimizerConfig(preconditioner="lbfgs")


def test_trivial_data_stops_immediately():
    ctx = default_context(R=10.0)
    res = minimize_gradient_descent(ctx, np.zeros(ctx.grid.shape))
    assert res.converged and res.iterations == 0 and res.final_J == 0


def test_descent_is_monotone_and_keeps_clamped_layers():
    ctx = default_context(R=1e8)
    grid = ctx.grid
    W = np.zeros(grid.shape)
    W[:] = 0.5 * np.cos(grid.t)[None]
    W *= smooth_cutoff(grid.axes[0], 0.15)[:, None]
    for pre in ("riesz", "none"):
        res = minimize_gradient_descent(ctx, W, None, OptimizerConfig(max_iter=40,
                                                                      preconditioner=pre))
        assert monotone(res.history)
        assert res.final_J < res.history[0]["J"]
        assert np.array_equal(res.w[:2], W[:2])
    with pytest.raises(ConfigurationError):
        minimize_gradient_descent(ctx, W, np.ones(grid.shape))
