"""Improved Fisher Vector encoding of a frame set under a GMM.

The embedding stacks the normalized log-likelihood gradients with respect to
the component means and (diagonal) standard deviations:

    G_mu_k    = 1/(N sqrt(w_k))   * sum_t gamma_t(k) (x_t - mu_k) / sigma_k
    G_sigma_k = 1/(N sqrt(2 w_k)) * sum_t gamma_t(k) [((x_t - mu_k)/sigma_k)^2 - 1]

giving 2*K*d values, then applies the "improved" steps: signed square root
followed by L2 normalization.
"""

from __future__ import annotations

import numpy as np

from fidgetkit.errors import DataError
from fidgetkit.gmm import GmmModel


def signed_sqrt(v: np.ndarray) -> np.ndarray:
    return np.sign(v) * np.sqrt(np.abs(v))


def fisher_vector(latents: np.ndarray, gmm: GmmModel) -> np.ndarray:
    """Encode (n, d) latent rows as a unit-norm vector of length 2*K*d."""
    x = np.atleast_2d(np.asarray(latents, dtype=float))
    if x.shape[1] != gmm.dim:
        raise DataError(f"latent dim {x.shape[1]} != GMM dim {gmm.dim}")
    n = x.shape[0]
    gamma = gmm.responsibilities(x)  # (n, K)
    sigma = np.sqrt(gmm.variances)  # (K, d)

    diff = (x[:, None, :] - gmm.means[None, :, :]) / sigma[None, :, :]  # (n, K, d)
    g_mu = (gamma[:, :, None] * diff).sum(axis=0) / (n * np.sqrt(gmm.weights)[:, None])
    g_sigma = (gamma[:, :, None] * (diff**2 - 1.0)).sum(axis=0) / (
        n * np.sqrt(2.0 * gmm.weights)[:, None]
    )

    fv = np.concatenate([g_mu.ravel(), g_sigma.ravel()])
    fv = signed_sqrt(fv)
    norm = np.linalg.norm(fv)
    if norm > 0:
        fv = fv / norm
    return fv
