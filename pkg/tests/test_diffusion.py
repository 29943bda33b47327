import numpy as np
import pytest
from scipy import integrate, stats

from subspace_psld.diffusion import (DiffusionSchedule, analytic_score, closed_form_theta,
                                     forward_step, posterior_mean_latent, posterior_mean_x0,
                                     posterior_mean_z0, regression_fit_theta)
from subspace_psld.errors import RankDeficiencyError
from subspace_psld.linmodel import AnalyticVae, make_subspace_model


def test_schedule_recurrences():
    s = DiffusionSchedule.linear(50)
    ab = s.alpha_bar
    np.testing.assert_allclose(ab[1:], ab[:-1] * s.alpha[1:], rtol=1e-14)
    assert s.sigma_tilde[0] == 0.0
    assert np.all(np.diff(ab) < 0) and np.all((ab > 0) & (ab < 1))
    i = 10  # 1-based step 11
    expected = np.sqrt(s.beta[i] * (1 - ab[i - 1]) / (1 - ab[i]))
    assert s.sigma_tilde[i] == pytest.approx(expected)


def test_two_step_schedule():
    s = DiffusionSchedule.two_step(0.3)
    assert s.T == 1
    assert s.alpha_bar[0] == pytest.approx(0.7)
    assert s.alpha_bar_prev[0] == 1.0


@pytest.mark.parametrize("beta", [[0.0], [1.0], [0.2, 0.1], []])
def test_schedule_validation(beta):
    with pytest.raises(ValueError):
        DiffusionSchedule(np.array(beta))


def test_forward_step_no_noise_limit(rng):
    x = rng.standard_normal(16)
    np.testing.assert_allclose(forward_step(x, 1e-12, rng), x, atol=1e-5)


def test_forward_step_variance():
    out = forward_step(np.zeros(100_000), 0.3, np.random.default_rng(0))
    assert abs(out.var() / 0.3 - 1) < 0.02


def test_forward_step_reproducible():
    x = np.ones(5)
    a = forward_step(x, 0.1, np.random.default_rng(4))
    b = forward_step(x, 0.1, np.random.default_rng(4))
    np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("beta", [0.0, 1.0, -0.5])
def test_forward_step_rejects_beta(beta):
    with pytest.raises(ValueError):
        forward_step(np.zeros(2), beta, np.random.default_rng(0))


def test_closed_form_square_model():
    m = make_subspace_model(6, 6, seed=1)
    theta = closed_form_theta(m, 0.5, "pixel")
    np.testing.assert_allclose(theta.theta, np.sqrt(0.5) * np.eye(6), atol=1e-12)


def test_closed_form_latent():
    m = make_subspace_model(64, 8, seed=2)
    theta = closed_form_theta(m, 0.1, "latent")
    np.testing.assert_allclose(theta.theta, np.sqrt(0.9) * np.eye(8), atol=1e-15)
    np.testing.assert_allclose(theta.normalized, np.eye(8), atol=1e-10)


def test_normalized_pixel_theta_is_projector(model):
    P = closed_form_theta(model, 0.2, "pixel").normalized
    assert np.max(np.abs(P @ P - P)) < 1e-10
    assert np.linalg.matrix_rank(P, tol=1e-8) == 8


@pytest.mark.parametrize("d, l, beta, space", [
    (16, 4, 0.3, "pixel"), (64, 8, 0.1, "latent"), (8, 8, 0.5, "pixel"), (16, 4, 0.3, "latent"),
])
def test_regression_oracle_agrees(d, l, beta, space):
    m = make_subspace_model(d, l, seed=d + l)
    fitted = regression_fit_theta(m, beta, space, 100_000, np.random.default_rng(5))
    assert np.max(np.abs(fitted - closed_form_theta(m, beta, space).theta)) < 0.02


def test_regression_rank_deficient():
    m = make_subspace_model(16, 4, seed=0)
    with pytest.raises(RankDeficiencyError):
        regression_fit_theta(m, 0.3, "pixel", 4, np.random.default_rng(0))


def test_posterior_mean_latent_limits():
    z = np.array([1.5, -2.0])
    np.testing.assert_allclose(posterior_mean_latent(z, 1.0), z)
    np.testing.assert_allclose(posterior_mean_latent(z, 1e-14), 0, atol=1e-6)


def _quadrature_conditional_mean(z_t, alpha_bar):
    """E[z0 | z_t] in 1-D for z0 ~ N(0,1), z_t | z0 ~ N(sqrt(ab) z0, 1 - ab)."""
    def joint(z0):
        return stats.norm.pdf(z0) * stats.norm.pdf(z_t, np.sqrt(alpha_bar) * z0, np.sqrt(1 - alpha_bar))
    num = integrate.quad(lambda z0: z0 * joint(z0), -12, 12)[0]
    den = integrate.quad(joint, -12, 12)[0]
    return num / den


def test_posterior_mean_z0_quadrature():
    # ab = 0.25, z_t = (2, 0, ..., 0): sqrt(0.25) * 2 = 1
    assert _quadrature_conditional_mean(2.0, 0.25) == pytest.approx(1.0, abs=1e-9)
    beta = 1 - 0.25
    s = DiffusionSchedule.two_step(beta)
    z_t = np.zeros(8)
    z_t[0] = 2.0
    expected = np.zeros(8)
    expected[0] = 1.0
    np.testing.assert_allclose(posterior_mean_z0(s, z_t, 1), expected, atol=1e-12)


@pytest.mark.parametrize("z_t, ab", [(0.7, 0.9), (-1.3, 0.4), (3.0, 0.05)])
def test_posterior_mean_matches_quadrature(z_t, ab):
    assert posterior_mean_latent(np.array([z_t]), ab)[0] == pytest.approx(
        _quadrature_conditional_mean(z_t, ab), abs=1e-8)


def test_posterior_mean_z0_step_range():
    s = DiffusionSchedule.linear(5)
    with pytest.raises(IndexError):
        posterior_mean_z0(s, np.zeros(3), 0)
    with pytest.raises(IndexError):
        posterior_mean_z0(s, np.zeros(3), 6)


def test_posterior_mean_x0_orthogonal_input(model, rng):
    s = DiffusionSchedule.linear(10)
    x = rng.standard_normal(64)
    x_perp = x - model.project(x)
    assert np.max(np.abs(posterior_mean_x0(model, s, x_perp, 3))) < 1e-12


def test_posterior_mean_x0_noiseless_limit(model, rng):
    s = DiffusionSchedule(np.array([1e-15]))
    x = model.S @ rng.standard_normal(8)
    np.testing.assert_allclose(posterior_mean_x0(model, s, x, 1), x, atol=1e-10)


def test_pixel_latent_consistency(rng):
    m = make_subspace_model(16, 4, seed=3)
    vae = AnalyticVae.from_model(m)
    s = DiffusionSchedule.two_step(0.51)  # alpha_bar = 0.49
    x_t = rng.standard_normal(16)
    via_latent = vae.decode(posterior_mean_z0(s, vae.encode(x_t), 1))
    np.testing.assert_allclose(posterior_mean_x0(m, s, x_t, 1), via_latent, atol=1e-10)


def test_pixel_posterior_mean_matches_gaussian_conditioning(rng):
    m = make_subspace_model(16, 4, seed=9)
    ab = 0.49
    x_t = rng.standard_normal(16)
    # E[x0|x_t] = Cov(x0, x_t) Cov(x_t)^{-1} x_t with Cov(x_t) = ab P + (1 - ab) I
    P = m.projector()
    direct = np.sqrt(ab) * P @ np.linalg.solve(ab * P + (1 - ab) * np.eye(16), x_t)
    s = DiffusionSchedule.two_step(1 - ab)
    np.testing.assert_allclose(posterior_mean_x0(m, s, x_t, 1), direct, atol=1e-10)


def test_analytic_score_is_gaussian_score(rng):
    z = rng.standard_normal(5)
    ab = 0.3
    # latent marginal is N(0, I): score = -z
    np.testing.assert_allclose(analytic_score(z, posterior_mean_latent(z, ab), ab), -z, atol=1e-12)
