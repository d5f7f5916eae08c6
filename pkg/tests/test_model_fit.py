import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import zeta

from paoneshot.estimators import AttachmentEstimate
from paoneshot.model_fit import (FitResult, asymptotic_mu, asymptotic_pi, fit_alpha,
                                 fit_beta, fit_gamma)
from paoneshot.net_core import DegreeHistogram, NumericError
from paoneshot.sg_sim import Linear, LogDamped, PowerLaw


def exact_estimate(A, k_max=40, sd=None):
    k = np.arange(k_max + 1)
    n = len(k)
    return AttachmentEstimate("test", k, A.values(n), np.ones(n), np.ones(n), sd=sd)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 2.0), st.floats(0.1, 10.0))
def test_alpha_exact(alpha, scale):
    est = exact_estimate(PowerLaw(alpha))
    est.A_hat *= scale
    for weighted in (True, False):
        res = fit_alpha(est, weighted=weighted)
        assert res.parameter == pytest.approx(alpha, abs=1e-10)
        assert res.intercept == pytest.approx(np.log(scale), abs=1e-9)


def test_alpha_ignores_degree_zero_and_flags():
    est = exact_estimate(PowerLaw(0.8), k_max=10)
    est.A_hat[0] = 123.0
    est.A_hat[5] = 0.0
    est.flags[7] = "no_edges"
    res = fit_alpha(est)
    assert res.parameter == pytest.approx(0.8, abs=1e-12)
    assert res.points == 8


def test_alpha_weighted_uses_sd():
    est = exact_estimate(PowerLaw(1.0), k_max=10, sd=np.full(11, 0.1))
    # one corrupted point with a huge spread barely moves the weighted fit
    est.A_hat[10] *= 3.0
    est.sd[10] = 1e3
    assert fit_alpha(est, weighted=True).parameter == pytest.approx(1.0, abs=1e-5)
    assert abs(fit_alpha(est, weighted=False).parameter - 1.0) > 0.05
    assert fit_alpha(est).weighted


def test_alpha_needs_two_points():
    est = AttachmentEstimate("t", [0, 1], [1.0, 1.0], [1, 1], [1, 1])
    with pytest.raises(NumericError, match="got 1"):
        fit_alpha(est)


def test_two_points_give_infinite_interval():
    est = AttachmentEstimate("t", [1, 2], [1.0, 2.0], [1, 1], [1, 1])
    res = fit_alpha(est)
    assert res.parameter == pytest.approx(1.0)
    assert np.isinf(res.two_sigma)
    assert res.to_dict()["two_sigma"] is None


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 3.0), st.floats(0.1, 10.0))
def test_beta_exact(beta, scale):
    est = exact_estimate(LogDamped(beta))
    est.A_hat *= scale
    res = fit_beta(est)
    assert res.parameter == pytest.approx(beta, abs=1e-8)
    assert res.two_sigma == pytest.approx(0.0, abs=1e-6)


def test_report_format():
    r = FitResult("PowerLaw", 0.9312, 0.0791, 0.0, 10)
    assert r.report() == "alpha = 0.93 ± 0.08"
    assert FitResult("LogDamped", 1.0, 0.5, 0.0, 3).report() == "beta = 1.00 ± 0.50"
    with pytest.raises(NumericError):
        FitResult("PowerLaw", 1.0, 0.1, 0.0, 1)


# --- degree exponent ----------------------------------------------------------------

def sample_discrete_power_law(gamma, k_min, n, rng, k_cap=2_000_000):
    """Inverse-CDF draws from P(k) = k^-gamma / zeta(gamma, k_min), k >= k_min."""
    k = np.arange(k_min, k_cap, dtype=np.float64)
    cdf = np.cumsum(k ** -gamma) / zeta(gamma, k_min)
    return k_min + np.searchsorted(cdf, rng.random(n) * cdf[-1])


@pytest.mark.parametrize("gamma", [2.2, 2.5, 3.0])
def test_gamma_recovers_exponent(gamma):
    rng = np.random.default_rng(int(gamma * 10))
    k_min = 10
    ks = sample_discrete_power_law(gamma, k_min, 50_000, rng)
    # nodes below k_min must not influence the fit
    h = DegreeHistogram.from_degrees(np.concatenate([ks, np.zeros(500, int)]))
    res = fit_gamma(h, k_min)
    assert res.points == 50_000
    assert abs(res.parameter - gamma) < res.two_sigma + 0.02
    assert res.two_sigma == pytest.approx(2 * (res.parameter - 1) / np.sqrt(50_000))


def test_gamma_errors():
    with pytest.raises(NumericError, match="got 3"):
        fit_gamma(DegreeHistogram({5: 3}, 3), 2)
    with pytest.raises(NumericError):
        fit_gamma(DegreeHistogram({5: 30}, 30), 5)
    with pytest.raises(NumericError):
        fit_gamma(DegreeHistogram({5: 30}, 30), 0)


# --- asymptotic degree law ------------------------------------------------------------

def test_pi_closed_form_values():
    d = asymptotic_pi(1.0, 0.5, 5)
    assert d.lam == pytest.approx(2.0)
    np.testing.assert_allclose(d.values[:3], [2 / 3, 1 / 6, 1 / 15], rtol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.2, 5.0), st.floats(0.05, 0.95))
def test_pi_recursion_and_mass(c, p):
    d = asymptotic_pi(c, p, 20_000)
    pi, lam = d.values, d.lam
    k = np.arange(1, 50)
    # balance: lam * pi_k = (k-1+c) pi_{k-1} - (k+c) pi_k for k >= 1
    np.testing.assert_allclose(lam * pi[k], (k - 1 + c) * pi[k - 1] - (k + c) * pi[k],
                               rtol=1e-9)
    assert lam * pi[0] == pytest.approx(lam - c * pi[0], rel=1e-12)
    # the masses sum to one (tail decays as k^-(1+lam))
    tail = pi[-1] * 20_000 / lam
    assert pi.sum() + tail == pytest.approx(1.0, rel=2e-3)


def test_mu_matches_pi_for_linear_kernel():
    lam, mu = asymptotic_mu(Linear(1.0), 0.5, 200_000)
    assert lam == pytest.approx(2.0, rel=1e-3)
    np.testing.assert_allclose(mu[:6], asymptotic_pi(1.0, 0.5, 5).values, rtol=1e-3)


def test_mu_with_given_lambda():
    A = np.arange(11) + 2.0
    lam, mu = asymptotic_mu(A, 0.3, 10, lam=1.5)
    assert lam == 1.5
    assert mu[0] == pytest.approx(1.5 / 3.5)
    np.testing.assert_allclose(mu[1:], mu[:-1] * A[:-1] / (1.5 + A[1:]), rtol=1e-12)
