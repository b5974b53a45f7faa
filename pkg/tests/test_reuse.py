import warnings
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial import Delaunay

from rbtune.clifford import clifford_group, n_bar
from rbtune.rb import DeviceModel, true_rb_params
from rbtune.reuse import (
    LipschitzBudget,
    corner_set,
    diffuse,
    variance_inflation_bound,
    verify_lipschitz_F,
)
from rbtune.smc import ParticleEnsemble


def cloud(rng, n=500, centre=(0.9, 0.4, 0.5), spread=0.02):
    x = np.asarray(centre) + spread * rng.standard_normal((n, 3))
    return ParticleEnsemble(x, rng.dirichlet(np.ones(n)))


def test_budget_modes():
    b = LipschitzBudget.channel_derived(1.0, Fraction(7, 3))
    assert b.L_F == pytest.approx(10 / 3)
    assert b.L_p == pytest.approx(20 / 3)
    assert b.L_AB == pytest.approx(10 / 3)
    direct = LipschitzBudget.objective_direct(1.48)
    assert direct.L_p == pytest.approx(2.96)
    assert direct.L_AB == pytest.approx(1.48)
    with pytest.raises(ValueError):
        LipschitzBudget(-1.0)
    with pytest.raises(ValueError):
        LipschitzBudget(1.0, mode="guess")


def test_corner_examples():
    b = LipschitzBudget.channel_derived(1.0, n_bar(clifford_group()))
    cs = corner_set(b, 0.1)
    assert cs.corners.shape == (8, 3)
    assert np.allclose(cs.half_widths, [2 / 3, 1 / 3, 1 / 3])
    assert len({tuple(np.sign(c)) for c in cs.corners}) == 8
    assert not np.any(corner_set(b, 0.0).corners)
    assert corner_set(b, [0.03, 0.04]).delta == pytest.approx(0.05)


@given(st.floats(0, 10), st.fractions(0, 5), st.floats(-1, 1))
def test_corner_mean_is_zero(L, nb, dt):
    cs = corner_set(LipschitzBudget.channel_derived(L, nb), dt)
    c = cs.corners
    # corner i is the negation of corner 7 - i, so the paired sum is exact
    assert np.array_equal(c[::-1], -c)
    assert np.all((c[:4] + c[::-1][:4]).sum(axis=0) == 0)


def test_zero_corners_leave_ensemble_unchanged():
    e = cloud(np.random.default_rng(0))
    cs = corner_set(LipschitzBudget.objective_direct(), 0.0)
    for mode in ("replicate", "sample", "box"):
        assert diffuse(e, cs, mode, np.random.default_rng(1)).ensemble is e


def test_unknown_mode():
    e = cloud(np.random.default_rng(0))
    with pytest.raises(ValueError):
        diffuse(e, corner_set(LipschitzBudget.objective_direct(), 0.01), "gauss")


def test_single_particle_replicate():
    e = ParticleEnsemble(np.array([[0.9, 0.5, 0.5], [0.9, 0.5, 0.5]]), np.array([0.5, 0.5]))
    cs = corner_set(LipschitzBudget.objective_direct(1.0), 0.01)
    out = diffuse(e, cs, "replicate", downsample=False).ensemble
    assert len(out) == 16
    assert np.allclose(out.weights, 1 / 16)
    assert np.allclose(out.mean(), [0.9, 0.5, 0.5], atol=1e-15)
    offsets = {tuple(np.round(r - [0.9, 0.5, 0.5], 12)) for r in out.particles}
    assert offsets == {tuple(np.round(c, 12)) for c in cs.corners}


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 0.05))
def test_replicate_preserves_mean(seed, dt):
    rng = np.random.default_rng(seed)
    e = cloud(rng, n=200)
    cs = corner_set(LipschitzBudget.objective_direct(), dt)
    out = diffuse(e, cs, "replicate", downsample=False, clamp=False).ensemble
    assert np.allclose(out.mean(), e.mean(), rtol=0, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 0.05), st.sampled_from(["replicate", "sample",
                                                                           "box"]))
def test_support_expands_by_at_most_corner(seed, dt, mode):
    rng = np.random.default_rng(seed)
    e = cloud(rng, n=200)
    cs = corner_set(LipschitzBudget.objective_direct(), dt)
    out = diffuse(e, cs, mode, rng, clamp=False).ensemble
    lo, hi = e.particles.min(axis=0), e.particles.max(axis=0)
    assert np.all(out.particles.min(axis=0) >= lo - cs.half_widths - 1e-12)
    assert np.all(out.particles.max(axis=0) <= hi + cs.half_widths + 1e-12)


def test_sample_mode_is_unbiased():
    rng = np.random.default_rng(2)
    e = cloud(rng, n=100_000)
    cs = corner_set(LipschitzBudget.objective_direct(), 0.01)
    out = diffuse(e, cs, "sample", rng).ensemble
    # each coordinate gets a +-h shift: standard error h / sqrt(ESS)
    ess = 1 / np.sum(e.weights**2)
    assert np.all(np.abs(out.mean() - e.mean()) <= 4 * cs.half_widths / np.sqrt(ess))
    assert len(out) == len(e)


def test_clamping_is_counted_and_warned():
    x = np.column_stack([np.full(100, 0.999), np.full(100, 0.4), np.full(100, 0.5)])
    e = ParticleEnsemble.uniform(x)
    cs = corner_set(LipschitzBudget.objective_direct(), 0.01)
    with pytest.warns(RuntimeWarning, match="clamped"):
        res = diffuse(e, cs, "sample", np.random.default_rng(3))
    assert 0.3 < res.clamped_fraction < 0.7
    assert res.ensemble.in_bounds()
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        quiet = diffuse(cloud(np.random.default_rng(4)), cs, "sample", np.random.default_rng(5))
    assert quiet.clamped_fraction == 0.0


@pytest.mark.parametrize("theta,step", [(0.35, -0.05), (0.2, 0.03), (0.05, -0.05), (-0.1, 0.02)])
def test_truth_stays_inside_diffused_support(theta, step):
    table = clifford_group()
    rng = np.random.default_rng(6)
    here = true_rb_params(DeviceModel.overrotated(theta), table)
    there = true_rb_params(DeviceModel.overrotated(theta + step), table)
    e = cloud(rng, n=300, centre=(here.p, here.A, here.B), spread=0.005)
    assert Delaunay(e.particles).find_simplex([here.p, here.A, here.B]) >= 0
    out = diffuse(e, corner_set(LipschitzBudget.objective_direct(), step), "replicate",
                  downsample=False, clamp=False).ensemble
    assert Delaunay(out.particles).find_simplex([there.p, there.A, there.B]) >= 0


def test_variance_bound_examples():
    assert variance_inflation_bound(0.01, 1.0, 0.0) == 0.01
    assert variance_inflation_bound(0.01, 1.0, 0.01) == pytest.approx(0.012)
    vals = [variance_inflation_bound(0.01, 1.0, d) for d in np.linspace(0, 0.099, 50)]
    assert np.all(np.diff(vals) > 0)
    with pytest.raises(ValueError, match="shrink the step"):
        variance_inflation_bound(0.01, 1.0, 0.1)
    with pytest.raises(ValueError):
        variance_inflation_bound(0.0, 1.0, 0.0)


def random_lipschitz_family(rng, k, L):
    """k piecewise-linear functions of theta on [-1, 1], every slope in [-L, L]."""
    knots = np.linspace(-1, 1, 9)
    vals = np.empty((k, knots.size))
    vals[:, 0] = rng.normal(0, 1, k)
    vals[:, 1:] = vals[:, :1] + np.cumsum(rng.uniform(-L, L, (k, 8)) * np.diff(knots), axis=1)
    return lambda th: np.array([np.interp(th, knots, v) for v in vals])


def weighted_var(w, x):
    return float(np.sum(w * (x - np.sum(w * x)) ** 2))


def test_variance_bound_on_random_lipschitz_functions():
    for seed in range(100):
        rng = np.random.default_rng(seed)
        k, L = int(rng.integers(2, 50)), rng.uniform(0.1, 3.0)
        f = random_lipschitz_family(rng, k, L)
        w = rng.dirichlet(np.ones(k))
        theta = rng.uniform(-0.8, 0.8)
        v0 = weighted_var(w, f(theta))
        delta = rng.uniform(0, 0.999) * np.sqrt(v0) / L
        theta2 = np.clip(theta + delta * rng.choice([-1, 1]), -1, 1)
        delta = abs(theta2 - theta)
        assert weighted_var(w, f(theta2)) <= variance_inflation_bound(v0, L, delta)


def test_variance_bound_misses_fully_correlated_shift():
    # two equally likely y; the shift pushes both values outward by L*delta,
    # so the variance grows by the square term the bound leaves out
    L, delta, s = 1.0, 0.05, 0.1
    v0 = s**2
    v1 = (s + L * delta) ** 2
    assert v1 > variance_inflation_bound(v0, L, delta)
    assert v1 <= v0 + 2 * L * delta * s + (L * delta) ** 2 + 1e-15


def test_verify_lipschitz_examples():
    grid = np.arange(-0.5, 0.5001, 0.01)
    assert verify_lipschitz_F(grid, objective=lambda t: 0.7) == 0.0
    assert 1.3 <= verify_lipschitz_F(grid) <= 1.6
    fine = np.linspace(-np.pi / 2, np.pi / 2, 3001)
    over = verify_lipschitz_F(fine, objective=lambda t: 2 / 3 + np.cos(2 * t) / 3)
    assert over == pytest.approx(2 / 3, abs=1e-4)
    with pytest.raises(ValueError):
        verify_lipschitz_F([0.0])
