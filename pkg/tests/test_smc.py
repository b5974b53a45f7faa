import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rbtune.smc import (
    InferenceFailure,
    ParticleEnsemble,
    ParticleFilter,
    PriorSpec,
    RBParams,
    bayes_update,
    credible_interval_F,
    effective_sample_size,
    fidelity_from_p,
    likelihood,
    liu_west_resample,
    p_from_fidelity,
    posterior_F,
    read_ensemble_csv,
)


def ens(rows, weights=None):
    rows = np.asarray(rows, dtype=float)
    if weights is None:
        return ParticleEnsemble.uniform(rows)
    return ParticleEnsemble(rows, np.asarray(weights, dtype=float))


def test_rbparams_ranges():
    RBParams(0.5, -1.0, 0.0)
    for bad in [(1.1, 0.5, 0.5), (0.5, -1.5, 0.5), (0.5, 0.5, 1.2)]:
        with pytest.raises(ValueError):
            RBParams(*bad)


def test_likelihood_examples():
    assert likelihood(RBParams(1.0, 0.5, 0.5), 7, 1) == 1.0
    assert likelihood(RBParams(0.0, 0.5, 0.5), 1, 1) == 0.5
    assert likelihood(RBParams(0.9, 0.5, 0.5), 2, 0) == pytest.approx(0.095)
    with pytest.raises(ValueError):
        likelihood(RBParams(0.9, 0.5, 0.5), 0, 1)


def test_likelihood_clamps_model_probability():
    assert likelihood(RBParams(1.0, 0.8, 0.9), 3, 1) == 1.0
    assert likelihood(RBParams(1.0, -0.8, 0.1), 3, 1) == 0.0


def test_ensemble_validation():
    with pytest.raises(ValueError):
        ParticleEnsemble(np.zeros((1, 3)), np.ones(1))
    with pytest.raises(ValueError):
        ParticleEnsemble(np.zeros((2, 3)), np.array([0.5, 0.6]))
    with pytest.raises(ValueError):
        ParticleEnsemble(np.zeros((2, 2)), np.array([0.5, 0.5]))


def test_bayes_update_examples():
    same = ens([[0.9, 0.5, 0.5]] * 4)
    assert np.allclose(bayes_update(same, 3, 1).weights, 0.25)
    # q = 0.8 and 0.2 at m = 1
    two = ens([[0.6, 0.5, 0.5], [0.0, 0.5, 0.2]])
    assert np.allclose(bayes_update(two, 1, 1).weights, [0.8, 0.2])
    ideal = ens([[1.0, 0.5, 0.5], [1.0, 0.3, 0.7]], [0.3, 0.7])
    out = bayes_update(ideal, 5, 1)
    assert np.allclose(out.weights, [0.3, 0.7])
    assert out.particles is ideal.particles or np.array_equal(out.particles, ideal.particles)


def test_bayes_update_zero_weight_raises():
    e = ens([[1.0, 0.5, 0.5], [1.0, 0.6, 0.4]])
    with pytest.raises(InferenceFailure):
        bayes_update(e, 1, 0)


def test_ess_examples():
    assert effective_sample_size(ens(np.zeros((256, 3)))) == pytest.approx(256)
    w = np.zeros(10)
    w[3] = 1
    assert effective_sample_size(ens(np.zeros((10, 3)), w)) == pytest.approx(1)
    assert effective_sample_size(ens(np.zeros((3, 3)), [0.5, 0.25, 0.25])) == pytest.approx(
        8 / 3)


@given(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=50))
def test_ess_bounds(raw):
    w = np.array(raw) / np.sum(raw)
    e = ens(np.zeros((len(w), 3)), w)
    assert 1 - 1e-9 <= effective_sample_size(e) <= len(w) + 1e-9


def test_posterior_F_examples():
    assert posterior_F(ens([[1.0, 0.5, 0.5]] * 3)) == (1.0, 0.0)
    mean, var = posterior_F(ens([[0.8, 0.5, 0.5], [1.0, 0.5, 0.5]]))
    assert mean == pytest.approx(0.95)
    assert var == pytest.approx(0.0025)
    w = np.zeros(5)
    w[0] = 1
    assert posterior_F(ens(np.full((5, 3), 0.5), w))[1] == 0.0


def test_fidelity_conventions():
    assert fidelity_from_p(0.9) == pytest.approx(0.95)
    assert fidelity_from_p(0.9, convention="alt") == pytest.approx(2.8 / 3)
    assert p_from_fidelity(fidelity_from_p(0.37)) == pytest.approx(0.37)
    with pytest.raises(ValueError):
        fidelity_from_p(0.5, convention="other")


def test_liu_west_delta_ensemble():
    e = ens([[0.9, 0.4, 0.5]] * 100)
    out = liu_west_resample(e, 0.98, np.random.default_rng(0))
    assert np.allclose(out.particles, [0.9, 0.4, 0.5])
    assert np.allclose(out.weights, 0.01)


def test_liu_west_a_one_is_multinomial():
    rng = np.random.default_rng(1)
    x = np.column_stack([rng.uniform(0, 1, 50), rng.uniform(0, 1, 50), rng.uniform(0, 1, 50)])
    e = ens(x, rng.dirichlet(np.ones(50)))
    out = liu_west_resample(e, 1.0, rng)
    rows = {tuple(r) for r in x}
    assert all(tuple(r) in rows for r in out.particles)


def test_liu_west_rejects_bad_a():
    e = ens(np.full((4, 3), 0.5))
    for a in (0.0, 1.5):
        with pytest.raises(ValueError):
            liu_west_resample(e, a, np.random.default_rng(0))


def test_liu_west_preserves_moments():
    rng = np.random.default_rng(2)
    n = 100_000
    mu = np.array([0.6, 0.3, 0.5])
    cov = np.array([[0.004, 0.001, 0.0], [0.001, 0.003, 0.0005], [0.0, 0.0005, 0.002]])
    x = rng.multivariate_normal(mu, cov, n)
    e = ens(x)
    out = liu_west_resample(e, 0.98, rng)
    se_mean = np.sqrt(np.diag(e.cov()) / n)
    assert np.all(np.abs(out.mean() - e.mean()) <= 3 * se_mean)
    # standard error of a sample covariance entry ~ sqrt((s_ii s_jj + s_ij^2) / n)
    s = e.cov()
    se_cov = np.sqrt((np.outer(np.diag(s), np.diag(s)) + s**2) / n)
    assert np.all(np.abs(out.cov() - s) <= 3 * se_cov)


def test_liu_west_stays_in_box():
    rng = np.random.default_rng(3)
    x = np.column_stack([rng.uniform(0.95, 1.0, 500), rng.uniform(-1, 1, 500),
                         rng.uniform(0, 1, 500)])
    out = liu_west_resample(ens(x), 0.5, rng)
    assert out.in_bounds()


def test_beta_conjugate_oracle():
    # A = 0 freezes the decay: every shot is Bernoulli(B) with B ~ U[0, 1]
    rng = np.random.default_rng(4)
    n = 20_000
    x = np.column_stack([rng.uniform(0, 1, n), np.zeros(n), rng.uniform(0, 1, n)])
    e = ens(x)
    truth = 0.3
    k = 0
    shots = 60
    for i in range(shots):
        y = int(rng.random() < truth)
        k += y
        e = bayes_update(e, 1 + i % 7, y)
    a, b = 1 + k, 1 + shots - k
    beta_mean = a / (a + b)
    beta_sd = np.sqrt(a * b / ((a + b) ** 2 * (a + b + 1)))
    se = beta_sd / np.sqrt(effective_sample_size(e))
    assert abs(e.mean()[2] - beta_mean) <= 2 * se + 1e-12


def test_prior_samples_are_valid():
    e = PriorSpec().sample(5000, np.random.default_rng(5))
    assert e.in_bounds()
    x = e.particles
    assert abs(x[:, 0].mean() - 0.5) < 0.02 and abs(x[:, 1].mean() - 0.5) < 0.02
    assert abs(x[:, 2].mean() - 0.5) < 0.005 and abs(x[:, 2].std() - 0.05) < 0.005


def test_filter_normalisation_over_many_updates():
    rng = np.random.default_rng(6)
    pf = ParticleFilter(PriorSpec().sample(2000, rng), rng)
    truth = RBParams(0.95, 0.45, 0.5)
    for i in range(10_000):
        m = (1, 2, 4, 8, 16, 32, 64)[i % 7]
        y = int(rng.random() < float(truth.survival(m)))
        resampled = pf.n_resamples
        pf.update(m, y)
        assert abs(pf.ensemble.weights.sum() - 1) < 1e-9
        if pf.n_resamples > resampled:
            # resampled iff the post-update ESS fell below threshold
            assert np.allclose(pf.ensemble.weights, 1 / 2000)
    assert pf.n_resamples > 0
    assert abs(pf.ensemble.mean()[0] - 0.95) < 0.01


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 0.2))
def test_resampling_triggered_only_below_threshold(seed, thr):
    rng = np.random.default_rng(seed)
    pf = ParticleFilter(PriorSpec().sample(200, rng), rng, resample_threshold=thr)
    for i in range(40):
        prev = pf.n_resamples
        pf.update(1 + i % 5, int(rng.random() < 0.8))
        if pf.n_resamples > prev:
            assert np.allclose(pf.ensemble.weights, 1 / 200)
        else:
            assert effective_sample_size(pf.ensemble) >= thr * 200


def test_credible_interval_and_csv(tmp_path):
    rng = np.random.default_rng(7)
    p = rng.uniform(0.8, 1.0, 4000)
    e = ens(np.column_stack([p, np.full(4000, 0.5), np.full(4000, 0.5)]))
    lo, hi = credible_interval_F(e, 0.7)
    assert lo == pytest.approx(0.9 + 0.015, abs=0.003)
    assert hi == pytest.approx(1.0 - 0.015, abs=0.003)
    path = tmp_path / "ens.csv"
    e.to_csv(path)
    back = read_ensemble_csv(path)
    assert np.array_equal(back.particles, e.particles)
    assert np.allclose(back.weights, e.weights)
