"""Diagonal-GMM EM behavior and the improved Fisher Vector encoding."""

import numpy as np
import pytest

from fidgetkit.errors import DataError
from fidgetkit.fisher import fisher_vector, signed_sqrt
from fidgetkit.gmm import GmmModel, fit_gmm


class TestGmm:
    def test_k1_matches_sample_statistics(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((500, 3)) * 2.0 + 1.5
        model = fit_gmm(x, n_components=1, seed=0)
        assert np.allclose(model.means[0], x.mean(axis=0), atol=1e-8)
        assert np.allclose(model.variances[0], x.var(axis=0), atol=1e-8)
        assert model.weights[0] == pytest.approx(1.0)

    def test_recovers_separated_gaussians(self):
        rng = np.random.default_rng(1)
        a = rng.normal(0.0, 0.3, (300, 2))
        b = rng.normal(5.0, 0.3, (300, 2))
        model = fit_gmm(np.vstack([a, b]), n_components=2, seed=0)
        means = model.means[np.argsort(model.means[:, 0])]
        assert np.abs(means[0] - 0.0).max() < 0.1
        assert np.abs(means[1] - 5.0).max() < 0.1

    def test_log_likelihood_monotone(self):
        rng = np.random.default_rng(2)
        x = np.vstack([rng.normal(i, 0.5, (100, 4)) for i in range(4)])
        model = fit_gmm(x, n_components=4, seed=0)
        ll = np.array(model.log_likelihoods)
        assert len(ll) >= 2
        assert (np.diff(ll) >= -1e-8).all()

    def test_variance_floor(self):
        x = np.zeros((50, 2))
        x[::2, 0] = 1e-12
        model = fit_gmm(x, n_components=1, seed=0)
        assert (model.variances > 0).all()

    def test_too_few_rows_rejected(self):
        with pytest.raises(DataError, match="components"):
            fit_gmm(np.zeros((3, 2)), n_components=5)

    def test_weights_sum_to_one(self):
        rng = np.random.default_rng(3)
        model = fit_gmm(rng.standard_normal((200, 3)), n_components=8, seed=1)
        assert model.weights.sum() == pytest.approx(1.0)


def random_gmm(k, d, seed=0):
    rng = np.random.default_rng(seed)
    w = rng.uniform(0.2, 1.0, k)
    return GmmModel(weights=w / w.sum(), means=rng.standard_normal((k, d)),
                    variances=rng.uniform(0.5, 2.0, (k, d)))


def brute_force_fv(x, gmm):
    """Textbook improved-FV oracle with explicit per-sample loops."""
    n, d = x.shape
    k = gmm.n_components
    gamma = gmm.responsibilities(x)
    g_mu = np.zeros((k, d))
    g_sigma = np.zeros((k, d))
    for t in range(n):
        for j in range(k):
            u = (x[t] - gmm.means[j]) / np.sqrt(gmm.variances[j])
            g_mu[j] += gamma[t, j] * u
            g_sigma[j] += gamma[t, j] * (u**2 - 1.0)
    for j in range(k):
        g_mu[j] /= n * np.sqrt(gmm.weights[j])
        g_sigma[j] /= n * np.sqrt(2.0 * gmm.weights[j])
    fv = np.concatenate([g_mu.ravel(), g_sigma.ravel()])
    fv = np.sign(fv) * np.sqrt(np.abs(fv))
    norm = np.linalg.norm(fv)
    return fv / norm if norm > 0 else fv


class TestFisherVector:
    @pytest.mark.parametrize("k,d", [(1, 2), (16, 8), (32, 16)])
    def test_embedding_length_is_2kd(self, k, d):
        rng = np.random.default_rng(4)
        gmm = random_gmm(k, d)
        fv = fisher_vector(rng.standard_normal((max(3 * k, 40), d)), gmm)
        assert fv.shape == (2 * k * d,)

    def test_unit_norm_after_improvement(self):
        rng = np.random.default_rng(5)
        gmm = random_gmm(4, 3)
        fv = fisher_vector(rng.standard_normal((60, 3)), gmm)
        assert np.linalg.norm(fv) == pytest.approx(1.0, abs=1e-12)

    def test_k1_latents_at_mean_zero_mean_block(self):
        gmm = GmmModel(weights=np.array([1.0]), means=np.array([[2.0, -1.0]]),
                       variances=np.array([[1.0, 1.0]]))
        x = np.tile([2.0, -1.0], (30, 1))
        fv = fisher_vector(x, gmm)
        assert np.allclose(fv[:2], 0.0)
        assert not np.allclose(fv[2:], 0.0)

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(6)
        x = rng.standard_normal((50, 4))
        gmm = fit_gmm(x, n_components=2, seed=0)
        assert np.allclose(fisher_vector(x, gmm), brute_force_fv(x, gmm), atol=1e-6)

    def test_signed_sqrt_not_idempotent(self):
        # applying the improvement twice must change the vector: guards
        # against double-normalization bugs
        rng = np.random.default_rng(7)
        gmm = random_gmm(3, 4)
        fv = fisher_vector(rng.standard_normal((80, 4)), gmm)
        again = signed_sqrt(fv)
        again = again / np.linalg.norm(again)
        assert not np.allclose(fv, again)

    def test_dim_mismatch_rejected(self):
        gmm = random_gmm(2, 3)
        with pytest.raises(DataError, match="dim"):
            fisher_vector(np.zeros((10, 4)), gmm)
