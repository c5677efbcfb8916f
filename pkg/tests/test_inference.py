"""Functionals of g and the sandwich variance."""

import numpy as np
import pytest

from pdsseries.dictionary import DictionarySpec, hermite_design
from pdsseries.inference import (
    Z_CRITICAL,
    FunctionalSpec,
    SingularOmegaError,
    average_derivative,
    empirical_quantile,
    functional_estimate,
    point_eval,
    quantile_contrast,
    rejection_test,
    residualize_p,
    sandwich_variance,
)
from pdsseries.selection import pds_fit


def small_fit(seed=0, n=120, k=3, n_q=2, y_shift=0.0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    P = hermite_design(x, k)
    Q = rng.standard_normal((n, n_q))
    y = x - 0.2 * (x**2 - 1) + Q @ np.arange(1.0, n_q + 1) \
        + rng.standard_normal(n) + y_shift
    fit = pds_fit(P, Q, y, np.arange(n_q),
                  spec_p=DictionarySpec("hermite_univariate", degree=k))
    return fit, x


# ---------------------------------------------------------------- quantile

def test_empirical_quantile_order_statistics():
    x = np.array([30.0, 10.0, 40.0, 20.0])
    assert empirical_quantile(x, 0.25) == 10.0    # ceil(1) -> x_(1)
    assert empirical_quantile(x, 0.26) == 20.0    # ceil(1.04) -> x_(2)
    assert empirical_quantile(x, 0.5) == 20.0     # no interpolation
    assert empirical_quantile(x, 0.75) == 30.0
    assert empirical_quantile(x, 1.0) == 40.0
    assert empirical_quantile(np.array([5.0]), 0.01) == 5.0


def test_empirical_quantile_validation():
    with pytest.raises(ValueError, match="empty"):
        empirical_quantile(np.array([]), 0.5)
    for q in (0.0, -0.5, 1.5):
        with pytest.raises(ValueError, match="lie in"):
            empirical_quantile(np.arange(4.0), q)


# ---------------------------------------------------------------- loadings

def test_average_derivative_loadings(rng):
    x = rng.standard_normal(200)
    spec = DictionarySpec("hermite_univariate", degree=4)
    f = average_derivative(spec, x)
    assert f.kind == "avg_deriv"
    # A_k = mean He_k'(x) = k * mean He_{k-1}(x)
    want = [np.mean(1.0 + 0 * x),
            np.mean(2.0 * x),
            np.mean(3.0 * (x**2 - 1)),
            np.mean(4.0 * (x**3 - 3 * x))]
    np.testing.assert_allclose(f.A, want, rtol=1e-12)
    with pytest.raises(ValueError, match="univariate"):
        average_derivative(DictionarySpec("raw_coordinates", input_dim=2), x)


def test_quantile_contrast_loadings(rng):
    x = rng.standard_normal(101)
    spec = DictionarySpec("hermite_univariate", degree=3)
    f = quantile_contrast(spec, x)
    lo = empirical_quantile(x, 0.25)
    hi = empirical_quantile(x, 0.75)
    want = hermite_design(np.array([hi]), 3)[0] - hermite_design(np.array([lo]), 3)[0]
    np.testing.assert_allclose(f.A, want, rtol=1e-12)
    assert f.kind == "quantile_contrast"


def test_point_eval_loadings():
    spec = DictionarySpec("hermite_univariate", degree=3)
    f = point_eval(spec, 2.0)
    np.testing.assert_allclose(f.A, [2.0, 3.0, 2.0], rtol=1e-12)


def test_avg_deriv_matches_finite_difference_of_g_hat():
    fit, x = small_fit(seed=3)
    f = average_derivative(fit.spec_p, x)
    theta = float(f.A @ fit.beta_hat)
    h = 1e-6
    fd = (fit.predict_g(x + h) - fit.predict_g(x - h)) / (2 * h)
    assert theta == pytest.approx(float(fd.mean()), abs=1e-6)


# ---------------------------------------------------------------- residualize

def test_residualize_p_orthogonality(rng):
    n = 80
    P = rng.standard_normal((n, 3))
    Q = rng.standard_normal((n, 2))
    U = residualize_p(P, Q)
    assert U.shape == P.shape
    np.testing.assert_allclose(U.sum(axis=0), 0.0, atol=1e-9)
    np.testing.assert_allclose(Q.T @ U, 0.0, atol=1e-8)


def test_residualize_p_empty_controls_demeans(rng):
    P = rng.standard_normal((50, 2)) + 5.0
    U = residualize_p(P, np.empty((50, 0)))
    np.testing.assert_allclose(U, P - P.mean(axis=0), atol=1e-10)


# ---------------------------------------------------------------- sandwich

def test_sandwich_symmetry_psd_and_nonnegative(rng):
    for _ in range(10):
        n, k = 60, 4
        U = rng.standard_normal((n, k))
        r = rng.standard_normal(n)
        A = rng.standard_normal(k)
        v, omega, sigma = sandwich_variance(U, r, A)
        np.testing.assert_array_equal(omega, omega.T)
        np.testing.assert_array_equal(sigma, sigma.T)
        assert np.linalg.eigvalsh(sigma).min() >= -1e-10
        assert v >= 0.0


def test_sandwich_closed_form_one_column():
    # k = 1: V = mean(u^2 r^2) / mean(u^2)^2
    u = np.array([[1.0], [2.0], [-1.0], [0.5]])
    r = np.array([1.0, -1.0, 2.0, 0.0])
    v, omega, sigma = sandwich_variance(u, r, np.array([1.0]))
    m2 = np.mean(u[:, 0] ** 2)
    want = np.mean(u[:, 0] ** 2 * r**2) / m2**2
    assert v == pytest.approx(want, rel=1e-12)
    assert omega[0, 0] == pytest.approx(m2, rel=1e-12)


def test_sandwich_singular_omega(rng):
    n = 40
    base = rng.standard_normal((n, 1))
    U = np.concatenate([base, base], axis=1)
    with pytest.raises(SingularOmegaError):
        sandwich_variance(U, rng.standard_normal(n), np.ones(2))


def test_duplication_shrinks_se_by_root_two():
    fit, x = small_fit(seed=8)
    f = average_derivative(fit.spec_p, x)
    res1 = functional_estimate(fit, f)
    fit2 = pds_fit(np.vstack([fit.P, fit.P]),
                   np.vstack([fit.Q_sel, fit.Q_sel]),
                   np.concatenate([fit.P @ fit.beta_hat + fit.Q_sel @ fit.eta_hat[1:]
                                   + fit.eta_hat[0] + fit.residuals] * 2),
                   np.arange(fit.Q_sel.shape[1]), spec_p=fit.spec_p)
    res2 = functional_estimate(fit2, f)
    assert res2.theta_hat == pytest.approx(res1.theta_hat, rel=1e-10)
    assert res2.se == pytest.approx(res1.se / np.sqrt(2.0), rel=1e-8)


# ---------------------------------------------------------------- estimates

def test_functional_estimate_fields():
    fit, x = small_fit(seed=5)
    f = average_derivative(fit.spec_p, x)
    res = functional_estimate(fit, f)
    assert res.n == fit.n
    assert res.theta_hat == pytest.approx(float(f.A @ fit.beta_hat), rel=1e-12)
    assert res.se > 0
    assert res.t_stat == pytest.approx(res.theta_hat / res.se, rel=1e-12)
    assert res.ci_lower == pytest.approx(res.theta_hat - Z_CRITICAL * res.se)
    assert res.ci_upper == pytest.approx(res.theta_hat + Z_CRITICAL * res.se)
    assert res.Omega_hat.shape == (3, 3) and res.Sigma_hat.shape == (3, 3)


def test_functional_estimate_length_mismatch():
    fit, _ = small_fit(seed=5)
    with pytest.raises(ValueError, match="loadings"):
        functional_estimate(fit, FunctionalSpec(kind="avg_deriv", A=np.ones(7)))


def test_theta_invariant_to_outcome_shift():
    fit0, x = small_fit(seed=11, y_shift=0.0)
    fit1, _ = small_fit(seed=11, y_shift=10.0)
    f = average_derivative(fit0.spec_p, x)
    r0 = functional_estimate(fit0, f)
    r1 = functional_estimate(fit1, f)
    assert r1.theta_hat == pytest.approx(r0.theta_hat, rel=1e-9)
    assert r1.se == pytest.approx(r0.se, rel=1e-9)
    assert fit1.eta_hat[0] == pytest.approx(fit0.eta_hat[0] + 10.0, rel=1e-9)


# ---------------------------------------------------------------- testing

def test_z_critical_pinned():
    assert Z_CRITICAL == 1.959964


def test_rejection_rule_strict_inequality():
    from pdsseries.inference import InferenceResult

    def res_at(theta):
        return InferenceResult(theta_hat=theta, se=1.0, t_stat=theta,
                               ci_lower=theta - Z_CRITICAL,
                               ci_upper=theta + Z_CRITICAL,
                               V_hat=1.0, Omega_hat=np.eye(1),
                               Sigma_hat=np.eye(1), n=50)

    assert not rejection_test(res_at(0.0), 0.0)
    # exactly at the critical value: not rejected (strict inequality)
    assert not rejection_test(res_at(Z_CRITICAL), 0.0)
    assert rejection_test(res_at(np.nextafter(Z_CRITICAL, 2.0)), 0.0)
    assert rejection_test(res_at(-2.0), 0.0)


def test_rejection_undefined_when_se_zero():
    from pdsseries.inference import InferenceResult
    res = InferenceResult(theta_hat=1.0, se=0.0, t_stat=np.inf,
                          ci_lower=1.0, ci_upper=1.0,
                          V_hat=0.0, Omega_hat=np.eye(1), Sigma_hat=np.zeros((1, 1)),
                          n=10)
    with pytest.raises(ValueError, match="zero"):
        rejection_test(res, 0.0)
