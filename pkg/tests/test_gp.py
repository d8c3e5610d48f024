import numpy as np
import pytest
from scipy import stats

from conftest import random_spd
from gprate.errors import DataError, NumericalError
from gprate.gp import (
    GpConfig,
    PosteriorDraws,
    gibbs_fit,
    posterior_mean_f,
    sample_scaled_inv_chi2,
    tau2_conditional_params,
    write_draws,
)
from gprate.kernel import KernelSpec, build_covariance
from gprate.simdata import SimConfig, simulate_genotypes, simulate_phenotype


def analytic_conditional(K, y, tau2):
    A = np.linalg.solve(K + tau2 * np.eye(len(y)), K)
    return A.T @ y, K - K @ A


def test_default_sampler_settings():
    cfg = GpConfig()
    assert (cfg.n_iter, cfg.a, cfg.b) == (10_000, 5.0, 0.4)
    assert cfg.n_retained == 9_000


def test_zero_response_gives_zero_mean(rng):
    K = random_spd(rng, 6)
    draws = gibbs_fit(np.zeros(6), K, GpConfig(n_iter=4000, burn_in=100, seed=1))
    f = draws.f_draws
    se = f.std(axis=0, ddof=1) / np.sqrt(f.shape[0])
    assert np.all(np.abs(posterior_mean_f(draws)) < 4 * se)


@pytest.mark.parametrize("method", ["eigen", "cholesky"])
def test_fixed_tau2_long_run_mean_matches_conditional(method):
    rng = np.random.default_rng(99)
    K = random_spd(rng, 5)
    y = rng.standard_normal(5)
    n_iter = 200_000 if method == "eigen" else 20_000
    draws = gibbs_fit(y, K, GpConfig(n_iter=n_iter, burn_in=1, seed=3, method=method), fixed_tau2=1.0)
    mean, cov = analytic_conditional(K, y, 1.0)
    # draws are independent when tau2 is held fixed
    se = np.sqrt(np.diag(cov) / draws.n_draws)
    assert np.all(np.abs(posterior_mean_f(draws) - mean) < 3 * se)
    np.testing.assert_allclose(np.cov(draws.f_draws.T), cov, atol=0.05 * np.abs(cov).max())


def test_methods_agree_in_distribution():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((8, 3))
    K = build_covariance(X, KernelSpec())
    y = X @ np.array([1.0, -0.5, 0.2]) + 0.3 * rng.standard_normal(8)
    a = gibbs_fit(y, K, GpConfig(n_iter=20_000, burn_in=500, seed=1, method="eigen"))
    b = gibbs_fit(y, K, GpConfig(n_iter=20_000, burn_in=500, seed=2, method="cholesky"))
    np.testing.assert_allclose(a.f_draws.mean(axis=0), b.f_draws.mean(axis=0), atol=0.03)
    assert stats.ks_2samp(a.tau2_draws[::10], b.tau2_draws[::10]).pvalue > 0.001


def test_tau2_conditional_with_exact_fit():
    y = np.array([0.5, -1.0, 2.0, 0.1])
    dof, scale = tau2_conditional_params(y, y, a=5.0, b=0.4)
    assert dof == 9.0
    assert scale == pytest.approx(5.0 * 0.4 / 9.0, abs=1e-15)


def test_tau2_conditional_adds_residual():
    dof, scale = tau2_conditional_params([1.0, 1.0], [0.0, 0.0], a=2.0, b=1.0)
    assert (dof, scale) == (4.0, 1.0)


def test_scaled_inverse_chi2_mean():
    rng = np.random.default_rng(0)
    draws = sample_scaled_inv_chi2(rng, 5.0, 0.4, size=400_000)
    assert draws.mean() == pytest.approx(0.4 * 5.0 / 3.0, rel=0.01)
    assert np.all(draws > 0)


def test_determinism(rng):
    K = random_spd(rng, 7)
    y = rng.standard_normal(7)
    cfg = GpConfig(n_iter=600, burn_in=50, seed=8)
    a, b = gibbs_fit(y, K, cfg), gibbs_fit(y, K, cfg)
    np.testing.assert_array_equal(a.f_draws, b.f_draws)
    np.testing.assert_array_equal(a.tau2_draws, b.tau2_draws)


def test_positive_noise_and_retained_count(rng):
    K = random_spd(rng, 4)
    cfg = GpConfig(n_iter=1003, burn_in=100, thin=3, seed=0)
    draws = gibbs_fit(rng.standard_normal(4), K, cfg)
    assert draws.n_draws == (1003 - 100) // 3 == cfg.n_retained
    assert np.all(draws.tau2_draws > 0)
    assert np.all(np.isfinite(draws.f_draws))


def test_thinning_picks_every_kth_iteration(rng):
    K = random_spd(rng, 4)
    y = rng.standard_normal(4)
    full = gibbs_fit(y, K, GpConfig(n_iter=100, burn_in=10, thin=1, seed=4))
    thinned = gibbs_fit(y, K, GpConfig(n_iter=100, burn_in=10, thin=3, seed=4))
    np.testing.assert_array_equal(thinned.f_draws, full.f_draws[2::3][: thinned.n_draws])


def test_exchangeability_of_samples(rng):
    X = rng.standard_normal((10, 2))
    y = X[:, 0] + 0.2 * rng.standard_normal(10)
    perm = rng.permutation(10)
    cfg = GpConfig(n_iter=30_000, burn_in=500, seed=6)
    base = gibbs_fit(y, build_covariance(X), cfg)
    shuffled = gibbs_fit(y[perm], build_covariance(X[perm]), GpConfig(n_iter=30_000, burn_in=500, seed=7))
    np.testing.assert_allclose(posterior_mean_f(shuffled), posterior_mean_f(base)[perm], atol=0.02)


def test_posterior_mean_examples():
    cfg = GpConfig(n_iter=2, burn_in=0)
    single = PosteriorDraws(np.array([[1.5, -2.0]]), np.array([1.0]), cfg)
    np.testing.assert_array_equal(posterior_mean_f(single), [1.5, -2.0])
    pair = PosteriorDraws(np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([1.0, 1.0]), cfg)
    np.testing.assert_array_equal(posterior_mean_f(pair), [2.0, 3.0])


def test_linear_kernel_recovers_additive_signal():
    X = simulate_genotypes(500, 25, seed=10)
    truth = simulate_phenotype(X, SimConfig(500, 25, (22, 23, 24), h2=0.6, seed=11))
    K = build_covariance(X, KernelSpec(kind="linear"))
    draws = gibbs_fit(truth.y, K, GpConfig(n_iter=2000, burn_in=200, seed=1))
    signal = X.values @ truth.beta
    r = np.corrcoef(posterior_mean_f(draws), signal)[0, 1]
    assert r**2 > 0.5


def test_factorization_failure_reports_tau2():
    K = -np.eye(3)
    with pytest.raises(NumericalError, match="tau2="):
        gibbs_fit(np.ones(3), K, GpConfig(n_iter=3, burn_in=0, method="cholesky"), fixed_tau2=0.5)


@pytest.mark.parametrize(
    "kwargs",
    [{"n_iter": 0}, {"burn_in": 10, "n_iter": 10}, {"thin": 0}, {"a": 0.0}, {"b": -1.0},
     {"method": "lanczos"}, {"n_iter": 10, "burn_in": 5, "thin": 6}],
)
def test_config_validation(kwargs):
    with pytest.raises(DataError):
        GpConfig(**kwargs)


def test_input_validation(rng):
    K = random_spd(rng, 3)
    with pytest.raises(DataError):
        gibbs_fit(np.ones(4), K)
    with pytest.raises(DataError):
        gibbs_fit(np.array([1.0, np.nan, 0.0]), K)
    with pytest.raises(DataError):
        gibbs_fit(np.ones(3), K, fixed_tau2=0.0)


def test_write_draws(tmp_path, rng):
    K = random_spd(rng, 3)
    draws = gibbs_fit(rng.standard_normal(3), K, GpConfig(n_iter=5, burn_in=1))
    path = tmp_path / "draws.tsv"
    write_draws(path, draws)
    lines = path.read_text().splitlines()
    assert lines[0].split("\t") == ["iteration", "tau2", "f_1", "f_2", "f_3"]
    assert len(lines) == 5
    first = [float(v) for v in lines[1].split("\t")]
    assert first[1] == draws.tau2_draws[0]
    np.testing.assert_array_equal(first[2:], draws.f_draws[0])
