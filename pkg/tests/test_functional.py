import numpy as np
import pytest

from convexify.functional import (FunctionalContext, H4Norm, bregman_gap, bregman_identity,
                                  evaluate_J, gradient_J)
from convexify.geometry import CarlemanParams
from convexify.model import TikhonovParams
from convexify.transform import apply_Ltilde
from convexify.verify import default_context, default_problem, quartic_line_fit, random_smooth_field


@pytest.fixture(scope="module")
def ctx():
    return default_context(lam=1.0, alpha=1e-4, R=1e9)


def test_h4_polynomials(grid1d):
    h4 = H4Norm(grid1d)
    one = np.ones(grid1d.shape)
    assert h4.inner(one, one) == pytest.approx(float(np.sum(grid1d.box_weights)), rel=1e-13)
    x1, t = grid1d.mesh()
    assert h4.norm(x1) > np.sqrt(np.sum(grid1d.box_weights * x1 * x1))


def test_h4_symmetric_and_gram(grid1d):
    h4 = H4Norm(grid1d)
    rng = np.random.default_rng(0)
    u, v = rng.normal(size=(2,) + grid1d.shape)
    assert h4.inner(u, v) == pytest.approx(h4.inner(v, u), rel=1e-12)
    assert np.sum(h4.gram_apply(u) * v) == pytest.approx(h4.inner(u, v), rel=1e-10)
    G = h4.gram_matrix()
    assert np.allclose(G @ u.ravel(), h4.gram_apply(u).ravel())
    assert h4.norm(2 * u) == pytest.approx(2 * h4.norm(u), rel=1e-13)


def test_zero_is_trivial(ctx):
    z = np.zeros(ctx.grid.shape)
    assert evaluate_J(z, ctx) == 0.0
    assert np.all(gradient_J(z, ctx) == 0.0)


def test_quartic_along_lines(ctx):
    rng = np.random.default_rng(2)
    w = random_smooth_field(ctx.grid, rng)
    h = random_smooth_field(ctx.grid, rng)
    s = np.linspace(-1, 1, 7)
    vals = [evaluate_J(w + si * h, ctx) for si in s]
    coef = np.polyfit(s, vals, 4)
    assert np.max(np.abs(np.polyval(coef, s) - vals)) <= 1e-9 * max(np.abs(vals))


def test_bregman_gap_matches_identity(ctx):
    rng = np.random.default_rng(3)
    w1 = random_smooth_field(ctx.grid, rng)
    h = random_smooth_field(ctx.grid, rng, clamped=True)
    gap = bregman_gap(w1, w1 + h, ctx).gap
    assert gap == pytest.approx(bregman_identity(w1, h, ctx), rel=1e-9)


def test_bregman_needs_clamped_difference(ctx):
    rng = np.random.default_rng(4)
    w1 = random_smooth_field(ctx.grid, rng)
    with pytest.raises(Exception, match="clamped"):
        bregman_gap(w1, w1 + 1.0, ctx)


def test_normalization_leaves_minimizer_with_rescaled_alpha():
    """The two weight normalizations differ by a constant factor, so they give
    the same minimizer once alpha is rescaled by that factor."""
    grid, coeffs = default_problem()
    p_max = CarlemanParams(1.0, 2.0, "max")
    p_out = CarlemanParams(1.0, 2.0, "outer")
    k = np.exp(p_out.shift(grid.spec) - p_max.shift(grid.spec))
    ctx_a = FunctionalContext(grid, coeffs, p_max, TikhonovParams(1e-4, 1e8))
    ctx_b = FunctionalContext(grid, coeffs, p_out, TikhonovParams(1e-4 * k, 1e8), h4=ctx_a.h4)
    rng = np.random.default_rng(5)
    w = random_smooth_field(grid, rng)
    assert evaluate_J(w, ctx_b) == pytest.approx(k * evaluate_J(w, ctx_a), rel=1e-10)
    assert np.allclose(gradient_J(w, ctx_b), k * gradient_J(w, ctx_a), rtol=1e-10,
                       atol=1e-12 * k * np.max(np.abs(gradient_J(w, ctx_a))))


def test_plain_least_squares_at_zero_lambda():
    grid, coeffs = default_problem()
    ctx = FunctionalContext(grid, coeffs, CarlemanParams(0.0, 2.0, "max"), TikhonovParams(0.0, 1e8))
    w = random_smooth_field(grid, np.random.default_rng(6))
    r = apply_Ltilde(w, coeffs, grid)
    assert evaluate_J(w, ctx) == pytest.approx(float(np.sum(grid.quad_weights * r * r)), rel=1e-13)


def test_tikhonov_term_alone_is_quadratic(ctx):
    only_reg = ctx.with_params()
    only_reg.data_weight = np.zeros(ctx.grid.shape)
    rng = np.random.default_rng(7)
    w = random_smooth_field(ctx.grid, rng)
    h = random_smooth_field(ctx.grid, rng)
    coef, resid = quartic_line_fit(lambda s: evaluate_J(w + s * h, only_reg), np.linspace(-1, 1, 6))
    assert resid < 1e-12
    assert max(abs(coef[3]), abs(coef[4])) <= 1e-10 * np.max(np.abs(coef))
