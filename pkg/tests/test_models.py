import itertools
import math

import numpy as np
import pytest
from scipy.integrate import quad

from twostage.models import (GaussianAR, GaussianIID, HiddenMarkov,
                             InvalidParameterError, log_density, mixing_bound,
                             sample_path)
from twostage.rand import rng_for


@pytest.fixture
def gauss():
    return GaussianIID()


@pytest.fixture
def hmm2():
    return HiddenMarkov(M=2, a0=0.05, emission_means=[-1.0, 2.0],
                        emission_stds=[0.7, 1.1])


def brute_force_hmm_logdensity(hmm, theta, x):
    A = hmm.transition_matrix(theta)
    pi = hmm.stationary_dist(theta)
    xs = np.asarray(x, dtype=float).reshape(-1, hmm.letter_dim)
    emis = np.exp(hmm._emission_logpdf(xs))
    total = 0.0
    for states in itertools.product(range(hmm.M), repeat=xs.shape[0]):
        p = pi[states[0]] * emis[0, states[0]]
        for t in range(1, xs.shape[0]):
            p *= A[states[t - 1], states[t]] * emis[t, states[t]]
        total += p
    return math.log(total)


class TestGaussianIID:
    def test_sampling_deterministic(self, gauss):
        a = sample_path(gauss, (0.0, 1.0), 3, 1234)
        b = sample_path(gauss, (0.0, 1.0), 3, 1234)
        assert np.array_equal(a.values, b.values)
        c = sample_path(gauss, (0.0, 1.0), 3, 1235)
        assert not np.array_equal(a.values, c.values)

    def test_log_density_closed_form(self, gauss):
        got = log_density(gauss, (0.0, 1.0), np.array([0.0]))
        assert got == pytest.approx(-0.5 * math.log(2 * math.pi), abs=1e-12)

    def test_density_normalizes(self, gauss):
        mass, _ = quad(lambda x: math.exp(log_density(gauss, (0.7, 2.3),
                                                      np.array([x]))),
                       -np.inf, np.inf)
        assert mass == pytest.approx(1.0, abs=1e-6)

    def test_invalid_sigma(self, gauss):
        with pytest.raises(InvalidParameterError, match="sigma"):
            gauss.validate((0.0, -1.0))

    def test_mixing_zero(self, gauss):
        for k in (1, 5, 100):
            assert mixing_bound(gauss, (0.0, 1.0), k) == 0.0


class TestGaussianAR:
    def test_yule_walker_variance(self):
        # X_t = 0.5 X_{t-1} + Y_t has stationary variance 1/(1-0.25) = 4/3
        ar = GaussianAR(p=1)
        X = ar.sample_paths([-0.5], 1000, 1000, rng_for(77, 0))
        assert X.var() == pytest.approx(4.0 / 3.0, rel=0.01)

    def test_degenerate_ar_is_iid(self):
        ar = GaussianAR(p=1)
        gauss = GaussianIID()
        rng_a = rng_for(5, 0)
        rng_b = rng_for(5, 0)
        Xa = ar.sample_paths([0.0], 6, 4, rng_a)
        ld_ar = ar.log_density_batch([0.0], Xa)
        ld_iid = gauss.log_density_batch((0.0, 1.0), Xa)
        assert np.allclose(ld_ar, ld_iid, atol=1e-10)
        # and the sampled law matches standard normal moments
        Xb = ar.sample_paths([0.0], 50, 2000, rng_b)
        assert Xb.mean() == pytest.approx(0.0, abs=0.01)
        assert Xb.var() == pytest.approx(1.0, abs=0.02)

    def test_stationary_start(self):
        ar = GaussianAR(p=2)
        theta = np.array([-0.4, 0.2])
        X = ar.sample_paths(theta, 40, 6000, rng_for(9, 0))
        v_first, v_last = X[:, 0].var(), X[:, -1].var()
        se = v_first * math.sqrt(2.0 / 6000)
        assert abs(v_first - v_last) < 6 * se

    def test_unstable_rejected(self):
        ar = GaussianAR(p=1)
        with pytest.raises(InvalidParameterError, match="unit circle"):
            ar.validate([-1.2])

    def test_log_density_matches_mvn(self):
        # full covariance route as an independent oracle at small n
        from scipy.stats import multivariate_normal
        ar = GaussianAR(p=1)
        a = -0.6
        n = 5
        # autocovariance gamma_k = phi^k / (1 - phi^2), phi = -a
        phi = -a
        gam = np.array([phi ** k for k in range(n)]) / (1 - phi ** 2)
        cov = np.array([[gam[abs(i - j)] for j in range(n)] for i in range(n)])
        x = rng_for(3, 0).normal(size=(2, n))
        want = multivariate_normal(mean=np.zeros(n), cov=cov).logpdf(x)
        got = ar.log_density_batch([a], x)
        assert np.allclose(got, want, atol=1e-10)

    def test_mixing_exponential(self):
        ar = GaussianAR(p=1, mixing_C=1.0, mixing_gamma=0.5)
        assert mixing_bound(ar, [-0.5], 3) == pytest.approx(0.125)
        bounds = [mixing_bound(ar, [-0.5], k) for k in range(1, 101)]
        assert all(b1 >= b2 for b1, b2 in zip(bounds, bounds[1:]))


class TestHiddenMarkov:
    def test_single_state_is_sum_of_emissions(self):
        hmm = HiddenMarkov(M=1, a0=0.0, emission_means=[0.5],
                           emission_stds=[1.2])
        x = rng_for(8, 0).normal(size=4)
        want = np.sum(hmm._emission_logpdf(x.reshape(-1, 1)))
        assert log_density(hmm, [1.0], x) == pytest.approx(want, abs=1e-12)

    def test_forward_equals_brute_force_grid(self):
        rng = rng_for(21, 0)
        for M in (1, 2, 3):
            hmm = HiddenMarkov(M=M, a0=0.02,
                               emission_means=np.linspace(-2, 2, M),
                               emission_stds=np.linspace(0.5, 1.5, M))
            theta = hmm.prior_draw(rng)
            for n in range(1, 6):
                x = rng.normal(size=n)
                fwd = log_density(hmm, theta, x)
                brute = brute_force_hmm_logdensity(hmm, theta, x)
                assert abs(fwd - brute) < 1e-10

    def test_invalid_rows(self, hmm2):
        with pytest.raises(InvalidParameterError, match="sum to 1"):
            hmm2.validate([0.8, 0.3, 0.3, 0.7])
        with pytest.raises(InvalidParameterError, match="a0"):
            hmm2.validate([0.99, 0.01, 0.3, 0.7])

    def test_stationary_start(self, hmm2):
        theta = [0.8, 0.2, 0.3, 0.7]
        X = hmm2.sample_paths(theta, 20, 8000, rng_for(13, 0))
        # state occupation proxy: means of first and last letter agree
        assert abs(X[:, 0].mean() - X[:, -1].mean()) < 0.08

    def test_vector_emissions(self):
        hmm = HiddenMarkov(M=2, a0=0.05,
                           emission_means=[[-1.0, 0.0], [1.0, 2.0]],
                           emission_stds=[[1.0, 1.0], [0.5, 0.5]])
        theta = [0.9, 0.1, 0.2, 0.8]
        X = hmm.sample_paths(theta, 4, 3, rng_for(2, 0))
        assert X.shape == (3, 4, 2)
        ld = hmm.log_density_batch(theta, X)
        assert ld.shape == (3,) and np.all(np.isfinite(ld))


def test_sample_path_validates_length(gauss=GaussianIID()):
    with pytest.raises(ValueError):
        sample_path(gauss, (0.0, 1.0), 0, 1)


def test_log_density_rejects_nonfinite(gauss=GaussianIID()):
    with pytest.raises(ValueError):
        log_density(gauss, (0.0, 1.0), np.array([np.nan]))
