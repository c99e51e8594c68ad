import numpy as np
import pytest
from scipy import integrate, stats

from eigenclosure.bayes import PriorSpec, sample_prior
from eigenclosure.diagnostics import (correlation_matrix, eigenvalue_summary, kl_divergence_gaussian,
                                      kl_gaussian_approx, kl_report, posterior_predictive, posterior_summary,
                                      thin_indices)
from eigenclosure.operator import head_eigenvalues, params_from_spectrum
from eigenclosure.sampler import Chain
from eigenclosure.spectral import ModalState, ObservationOperator


def quad_moments(pdf):
    m = integrate.quad(lambda r: r * pdf(r), -40, 10, limit=200)[0]
    v = integrate.quad(lambda r: (r - m) ** 2 * pdf(r), -40, 10, limit=200)[0]
    return m, np.sqrt(v)


def make_chain(samples, burn_in=0):
    samples = np.asarray(samples, dtype=float)
    K = samples.shape[1] // 2
    names = [f"r_{k}" for k in range(1, K + 1)] + [f"u_{k}" for k in range(1, K + 1)]
    return Chain(samples, np.zeros(len(samples)), burn_in, names)


class TestKl:
    def test_shifted_gaussian(self, rng):
        samples = rng.normal(0.0, 1.0, size=100_000)
        kl = kl_gaussian_approx(samples, stats.norm(1.0, 1.0).logpdf)
        assert kl == pytest.approx(0.5, abs=0.02)
        assert kl == pytest.approx(0.5, rel=0.05)

    def test_scaled_gaussian(self, rng):
        s = 0.3
        samples = rng.normal(0.0, s, size=100_000)
        exact = np.log(1 / s) + s**2 / 2 - 0.5
        assert kl_gaussian_approx(samples, stats.norm.logpdf) == pytest.approx(exact, rel=0.05)

    def test_identical_distribution(self, rng):
        samples = rng.normal(size=100_000)
        assert abs(kl_gaussian_approx(samples, stats.norm.logpdf)) < 0.01

    def test_prior_samples_give_small_kl(self, grid):
        # With posterior == prior the estimate is -KL(prior || its Gaussian fit): near zero
        # and slightly negative, since the log-exponential marginal is skewed.
        spec = PriorSpec(grid, 2)
        chain = make_chain(sample_prior(spec, 0, size=100_000))
        report = kl_report(chain, spec)
        assert report.n_samples == 100_000
        for j in range(4):
            def p(r):
                return np.exp(spec.marginal_logpdf(r, j))
            m, s = quad_moments(p)
            exact, _ = integrate.quad(lambda r: p(r) * (stats.norm.logpdf(r, m, s) - spec.marginal_logpdf(r, j)),
                                      -40, 10, points=[np.log(spec.scales[j])], limit=200)
            assert exact < 0
            assert report.kl[j] == pytest.approx(exact, abs=0.01)

    def test_degenerate(self):
        with pytest.raises(ValueError, match="degenerate"):
            kl_gaussian_approx(np.ones(10), stats.norm.logpdf)

    def test_single_index_matches_report(self, grid, rng):
        spec = PriorSpec(grid, 2)
        chain = make_chain(rng.normal(size=(5000, 4)), burn_in=1000)
        report = kl_report(chain, spec, n_samples=2000)
        assert kl_divergence_gaussian(chain, spec, 3, n_samples=2000) == report.kl[3]
        rows = list(report.rows())
        assert rows[2][:2] == (1, "u_1")

    def test_thin(self):
        np.testing.assert_array_equal(thin_indices(11, 3), [0, 5, 10])
        with pytest.raises(ValueError):
            thin_indices(3, 4)


class TestSummary:
    def test_constant_chain(self):
        summary = posterior_summary(make_chain(np.tile([0.5, -1.0], (2000, 1))))
        np.testing.assert_array_equal(summary.std, 0.0)
        np.testing.assert_array_equal(summary.ci95[:, 0], summary.ci95[:, 1])

    def test_short_chain(self):
        with pytest.raises(ValueError):
            posterior_summary(make_chain(np.zeros((500, 2))))

    def test_intervals(self, rng):
        summary = posterior_summary(make_chain(rng.normal(size=(200_000, 2))))
        np.testing.assert_allclose(summary.ci95, [[-1.96, 1.96]] * 2, atol=0.03)
        np.testing.assert_allclose(summary.ci99, [[-2.576, 2.576]] * 2, atol=0.05)

    def test_mapped_per_sample_and_jensen_gap(self, grid, rng, frade_mu):
        theta0 = params_from_spectrum(frade_mu, 2, grid)
        samples = theta0 + rng.normal(scale=0.3, size=(5000, 4))
        summary = eigenvalue_summary(make_chain(samples), grid, 1.0)
        mapped = head_eigenvalues(samples, grid, 1.0)
        np.testing.assert_allclose(summary.real.mean, mapped.real.mean(axis=0))
        # E[-e^r] < -e^{E r} by convexity, so the real-part gap is strictly negative
        assert np.all(summary.jensen_gap.real < 0)
        r_in, i_in = summary.contains(frade_mu[1:3])
        assert r_in.all() and i_in.all()


class TestCorrelation:
    def test_independent(self, rng):
        corr = correlation_matrix(rng.normal(size=(10_000, 6)))
        off = corr.matrix[~np.eye(6, dtype=bool)]
        assert np.all(np.abs(off) < 0.05)

    def test_duplicate_column(self, rng):
        x = rng.normal(size=(1000, 1))
        corr = correlation_matrix(np.hstack([x, x, rng.normal(size=(1000, 2))]))
        assert corr.matrix[0, 1] == pytest.approx(1.0)

    def test_properties(self, rng):
        A = rng.normal(size=(6, 6))
        samples = rng.normal(size=(5000, 6)) @ A
        m = correlation_matrix(make_chain(samples)).matrix
        np.testing.assert_array_equal(m, m.T)
        np.testing.assert_array_equal(np.diag(m), 1.0)
        assert np.all(np.abs(m) <= 1.0)
        assert np.linalg.eigvalsh(m).min() > -1e-10

    def test_zero_variance_column(self, rng):
        samples = np.column_stack([rng.normal(size=100), np.ones(100)])
        corr = correlation_matrix(samples, names=["a", "b"])
        assert corr.undefined == ["b"]
        assert np.isnan(corr.matrix[0, 1]) and np.isnan(corr.matrix[1, 1])
        assert corr.matrix[0, 0] == 1.0

    def test_names_from_chain(self, rng):
        corr = correlation_matrix(make_chain(rng.normal(size=(50, 4))))
        assert corr.names == ["r_1", "r_2", "u_1", "u_2"]


class TestPredictive:
    def test_single_draw(self, grid, initial, frade_mu, rng):
        theta0 = params_from_spectrum(frade_mu, 3, grid)
        chain = make_chain(theta0 + rng.normal(scale=0.1, size=(100, 6)))
        pred = posterior_predictive(chain, frade_mu, initial, 1.0, [1.0, 2.0], grid.x[::8], n_draws=1)
        np.testing.assert_array_equal(pred.std, 0.0)
        np.testing.assert_array_equal(pred.lower, pred.upper)

    def test_constant_chain_reproduces_forward(self, grid, initial, frade_mu):
        theta0 = params_from_spectrum(frade_mu, 3, grid)
        chain = make_chain(np.tile(theta0, (50, 1)))
        x = grid.x[::4]
        pred = posterior_predictive(chain, frade_mu, initial, 1.0, [2.0], x, n_draws=20)
        expected = ObservationOperator(initial, x, np.full(x.size, 2.0), 1.0)(frade_mu)
        np.testing.assert_allclose(pred.mean[0], expected, atol=1e-13)
        np.testing.assert_allclose(pred.std, 0.0, atol=1e-13)

    def test_envelope_contains_mean(self, grid, initial, frade_mu, rng):
        theta0 = params_from_spectrum(frade_mu, 3, grid)
        chain = make_chain(theta0 + rng.normal(scale=0.2, size=(600, 6)))
        pred = posterior_predictive(chain, frade_mu, initial, 1.0, [0.5, 1.0], grid.x[::16], n_draws=200)
        assert pred.mean.shape == (2, 32)
        assert np.all(pred.lower <= pred.mean + 1e-15) and np.all(pred.mean <= pred.upper + 1e-15)

    def test_too_many_draws(self, grid, initial, frade_mu):
        chain = make_chain(np.tile(params_from_spectrum(frade_mu, 1, grid), (10, 1)))
        with pytest.raises(ValueError):
            posterior_predictive(chain, frade_mu, initial, 1.0, [1.0], grid.x[:4], n_draws=11)
