"""Diagonal-covariance Gaussian mixture fitted by EM.

Kept in-house so the per-iteration log-likelihood trace is available (EM
monotonicity is asserted in tests) and fitting is fully deterministic for a
given seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from fidgetkit.errors import DataError

VARIANCE_FLOOR = 1e-6


@dataclass
class GmmModel:
    """K diagonal Gaussians: weights on the simplex, means and variances (K, d)."""

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    log_likelihoods: list[float] = field(default_factory=list)

    def __post_init__(self):
        if not np.isclose(self.weights.sum(), 1.0):
            raise DataError("mixture weights must sum to 1")
        if (self.variances <= 0).any():
            raise DataError("variances must be positive")

    @property
    def n_components(self) -> int:
        return self.means.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def log_prob(self, x: np.ndarray) -> np.ndarray:
        """Per-component log densities plus log weight, shape (n, K).

        The quadratic form expands into three matmuls to avoid an (n, K, d)
        temporary on large frame sets.
        """
        x = np.atleast_2d(x)
        inv_var = 1.0 / self.variances  # (K, d)
        quad = (
            (x**2) @ inv_var.T
            - 2.0 * x @ (self.means * inv_var).T
            + (self.means**2 * inv_var).sum(axis=1)[None, :]
        )
        log_det = np.log(self.variances).sum(axis=1)
        log_norm = -0.5 * (self.dim * np.log(2 * np.pi) + log_det)
        return np.log(self.weights)[None, :] + log_norm[None, :] - 0.5 * quad

    def responsibilities(self, x: np.ndarray) -> np.ndarray:
        lp = self.log_prob(x)
        return np.exp(lp - logsumexp(lp, axis=1, keepdims=True))

    def mean_log_likelihood(self, x: np.ndarray) -> float:
        return float(logsumexp(self.log_prob(x), axis=1).mean())


def fit_gmm(
    x: np.ndarray,
    n_components: int = 32,
    seed: int = 0,
    max_iter: int = 200,
    tol: float = 1e-5,
) -> GmmModel:
    """EM fit on rows of x (n, d). Distinct data points seed the means."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise DataError(f"latents must be 2-D, got shape {x.shape}")
    n, d = x.shape
    if n < n_components:
        raise DataError(f"{n} rows cannot support {n_components} components")
    if not np.isfinite(x).all():
        raise DataError("latents contain non-finite values")

    rng = np.random.default_rng(seed)
    means = x[rng.choice(n, size=n_components, replace=False)].copy()
    global_var = np.maximum(x.var(axis=0), VARIANCE_FLOOR)
    variances = np.tile(global_var, (n_components, 1))
    weights = np.full(n_components, 1.0 / n_components)
    model = GmmModel(weights=weights, means=means, variances=variances)

    history: list[float] = []
    for _ in range(max_iter):
        lp = model.log_prob(x)
        ll = float(logsumexp(lp, axis=1).mean())
        history.append(ll)
        resp = np.exp(lp - logsumexp(lp, axis=1, keepdims=True))

        nk = resp.sum(axis=0)
        nk = np.maximum(nk, 1e-12)
        weights = nk / n
        means = (resp.T @ x) / nk[:, None]
        sq = (resp.T @ (x**2)) / nk[:, None]
        variances = np.maximum(sq - means**2, VARIANCE_FLOOR)
        model = GmmModel(weights=weights / weights.sum(), means=means, variances=variances)

        if len(history) >= 2 and abs(history[-1] - history[-2]) < tol:
            break

    history.append(model.mean_log_likelihood(x))
    model.log_likelihoods = history
    return model
