"""Multi-input denoising auto-encoder with a shared bottleneck.

Each feature group passes through its own encoder layer (d -> ceil(0.5 d)),
the encoded groups are concatenated and compressed to a shared bottleneck of
round(0.25 D) units (D = total input width), then decoded back through
per-group output layers. Training minimizes a weighted sum of per-group
reconstruction MSEs on Gaussian-corrupted inputs. Written in plain numpy with
hand-derived gradients so they can be checked against finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from fidgetkit.errors import DataError, ModelError

DEFAULT_SIGMA = 0.1
DEFAULT_FIDGET_WEIGHT = 0.35
DEFAULT_OTHER_WEIGHT = 0.1

_VAR_FLOOR = 1e-8


def encoder_width(d: int) -> int:
    return max(1, math.ceil(0.5 * d))


def bottleneck_width(total_dim: int) -> int:
    return max(1, int(round(0.25 * total_dim)))


def default_loss_weights(group_names: tuple[str, ...]) -> dict[str, float]:
    return {g: (DEFAULT_FIDGET_WEIGHT if g == "fidget" else DEFAULT_OTHER_WEIGHT) for g in group_names}


@dataclass
class DdaeModel:
    """Parameters and input scaler of a trained multi-group DDAE."""

    group_names: tuple[str, ...]
    group_dims: dict[str, int]
    params: dict[str, np.ndarray]
    scaler_mean: np.ndarray
    scaler_scale: np.ndarray
    noise_sigma: float
    loss_weights: dict[str, float]

    @property
    def latent_dim(self) -> int:
        return self.params["bs"].shape[0]

    def group_slices(self) -> dict[str, slice]:
        out = {}
        start = 0
        for g in self.group_names:
            out[g] = slice(start, start + self.group_dims[g])
            start += self.group_dims[g]
        return out

    def check_schema(self, groups: dict[str, np.ndarray]) -> None:
        if tuple(sorted(groups)) != tuple(sorted(self.group_names)):
            raise ModelError(f"group names {sorted(groups)} != trained {sorted(self.group_names)}")
        for g in self.group_names:
            if groups[g].shape[1] != self.group_dims[g]:
                raise ModelError(
                    f"group {g!r}: dim {groups[g].shape[1]} != trained {self.group_dims[g]}"
                )


def init_params(group_dims: dict[str, int], group_names: tuple[str, ...], rng: np.random.Generator) -> dict[str, np.ndarray]:
    def glorot(n_out, n_in):
        bound = np.sqrt(6.0 / (n_in + n_out))
        return rng.uniform(-bound, bound, size=(n_out, n_in))

    total = sum(group_dims[g] for g in group_names)
    hidden = sum(encoder_width(group_dims[g]) for g in group_names)
    bott = bottleneck_width(total)
    params: dict[str, np.ndarray] = {}
    for g in group_names:
        d, h = group_dims[g], encoder_width(group_dims[g])
        params[f"We_{g}"] = glorot(h, d)
        params[f"be_{g}"] = np.zeros(h)
        params[f"Wo_{g}"] = glorot(d, h)
        params[f"bo_{g}"] = np.zeros(d)
    params["Ws"] = glorot(bott, hidden)
    params["bs"] = np.zeros(bott)
    params["Wd"] = glorot(hidden, bott)
    params["bd"] = np.zeros(hidden)
    return params


def _concat(groups: dict[str, np.ndarray], names: tuple[str, ...]) -> np.ndarray:
    return np.concatenate([groups[g] for g in names], axis=1)


def _forward(params, x, group_names, group_dims):
    """Full forward pass on standardized input x (n, D); returns cache for backprop."""
    acts = []
    start = 0
    xs = {}
    for g in group_names:
        d = group_dims[g]
        xs[g] = x[:, start : start + d]
        start += d
        acts.append(np.tanh(xs[g] @ params[f"We_{g}"].T + params[f"be_{g}"]))
    a = np.concatenate(acts, axis=1)
    z = np.tanh(a @ params["Ws"].T + params["bs"])
    h = np.tanh(z @ params["Wd"].T + params["bd"])
    recon = {}
    start = 0
    for g in group_names:
        w = encoder_width(group_dims[g])
        hg = h[:, start : start + w]
        start += w
        recon[g] = hg @ params[f"Wo_{g}"].T + params[f"bo_{g}"]
    return {"xs": xs, "acts": acts, "a": a, "z": z, "h": h, "recon": recon}


def weighted_mse(recon: dict[str, np.ndarray], targets: dict[str, np.ndarray], weights: dict[str, float]) -> float:
    return float(sum(weights[g] * np.mean((recon[g] - targets[g]) ** 2) for g in recon))


def loss_and_grads(params, x_noisy, x_clean, group_names, group_dims, weights):
    """Weighted reconstruction loss and its analytic parameter gradients.

    The target is the clean input; the forward pass runs on the noisy one.
    """
    cache = _forward(params, x_noisy, group_names, group_dims)
    n = x_noisy.shape[0]
    start = 0
    clean = {}
    for g in group_names:
        d = group_dims[g]
        clean[g] = x_clean[:, start : start + d]
        start += d

    loss = weighted_mse(cache["recon"], clean, weights)
    grads = {k: np.zeros_like(v) for k, v in params.items()}

    d_h = np.zeros_like(cache["h"])
    start = 0
    for g in group_names:
        d, w = group_dims[g], encoder_width(group_dims[g])
        err = cache["recon"][g] - clean[g]
        d_recon = 2.0 * weights[g] * err / (n * d)
        hg = cache["h"][:, start : start + w]
        grads[f"Wo_{g}"] = d_recon.T @ hg
        grads[f"bo_{g}"] = d_recon.sum(axis=0)
        d_h[:, start : start + w] = d_recon @ params[f"Wo_{g}"]
        start += w

    d_h_pre = d_h * (1.0 - cache["h"] ** 2)
    grads["Wd"] = d_h_pre.T @ cache["z"]
    grads["bd"] = d_h_pre.sum(axis=0)
    d_z = d_h_pre @ params["Wd"]
    d_z_pre = d_z * (1.0 - cache["z"] ** 2)
    grads["Ws"] = d_z_pre.T @ cache["a"]
    grads["bs"] = d_z_pre.sum(axis=0)
    d_a = d_z_pre @ params["Ws"]

    start = 0
    for g, act in zip(group_names, cache["acts"]):
        w = encoder_width(group_dims[g])
        d_act_pre = d_a[:, start : start + w] * (1.0 - act**2)
        grads[f"We_{g}"] = d_act_pre.T @ cache["xs"][g]
        grads[f"be_{g}"] = d_act_pre.sum(axis=0)
        start += w
    return loss, grads


@dataclass
class _Adam:
    lr: float = 3e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def step(self, params, grads):
        self.t += 1
        for k, g in grads.items():
            self.m[k] = self.beta1 * self.m.get(k, 0.0) + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v.get(k, 0.0) + (1 - self.beta2) * g * g
            m_hat = self.m[k] / (1 - self.beta1**self.t)
            v_hat = self.v[k] / (1 - self.beta2**self.t)
            params[k] -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def _standardize_fit(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    scale = np.where(scale < np.sqrt(_VAR_FLOOR), 1.0, scale)
    return mean, scale


def train_ddae(
    groups: dict[str, np.ndarray],
    sigma: float = DEFAULT_SIGMA,
    loss_weights: dict[str, float] | None = None,
    seed: int = 0,
    max_epochs: int = 150,
    batch_size: int = 128,
    lr: float = 3e-3,
    patience: int = 10,
    holdout_fraction: float = 0.1,
) -> DdaeModel:
    """Train the DDAE on per-frame feature groups, each shaped (n_frames, d).

    Deterministic for a fixed seed. Stops early when the held-out noise-free
    reconstruction loss has not improved for ``patience`` epochs.
    """
    group_names = tuple(groups.keys())
    n = {g: v.shape[0] for g, v in groups.items()}
    if len(set(n.values())) != 1:
        raise DataError(f"groups must share the frame count, got {n}")
    n_frames = next(iter(n.values()))
    if n_frames < 2:
        raise DataError("need at least 2 frames to train")
    for g, v in groups.items():
        if not np.isfinite(v).all():
            raise DataError(f"group {g!r} contains non-finite values")

    group_dims = {g: int(v.shape[1]) for g, v in groups.items()}
    weights = dict(loss_weights) if loss_weights else default_loss_weights(group_names)
    missing = set(group_names) - set(weights)
    if missing:
        raise DataError(f"loss_weights missing groups: {sorted(missing)}")

    rng = np.random.default_rng(seed)
    x = _concat(groups, group_names).astype(float)
    mean, scale = _standardize_fit(x)
    x = (x - mean) / scale

    n_hold = max(1, int(round(holdout_fraction * n_frames))) if n_frames >= 10 else 0
    perm = rng.permutation(n_frames)
    hold, train = perm[:n_hold], perm[n_hold:]
    if len(train) == 0:
        train, hold = perm, perm[:0]
    x_train, x_hold = x[train], x[hold]

    params = init_params(group_dims, group_names, rng)
    opt = _Adam(lr=lr)

    def eval_loss(data):
        cache = _forward(params, data, group_names, group_dims)
        targets = {}
        start = 0
        for g in group_names:
            targets[g] = data[:, start : start + group_dims[g]]
            start += group_dims[g]
        return weighted_mse(cache["recon"], targets, weights)

    monitor = x_hold if len(x_hold) else x_train
    best = eval_loss(monitor)
    best_params = {k: v.copy() for k, v in params.items()}
    stale = 0

    for _ in range(max_epochs):
        order = rng.permutation(len(x_train))
        for lo in range(0, len(order), batch_size):
            idx = order[lo : lo + batch_size]
            xb = x_train[idx]
            noisy = xb + sigma * rng.standard_normal(xb.shape) if sigma > 0 else xb
            _, grads = loss_and_grads(params, noisy, xb, group_names, group_dims, weights)
            opt.step(params, grads)
        current = eval_loss(monitor)
        if current < best - 1e-9:
            best = current
            best_params = {k: v.copy() for k, v in params.items()}
            stale = 0
        else:
            stale += 1
            if stale >= patience:
                break

    return DdaeModel(
        group_names=group_names,
        group_dims=group_dims,
        params=best_params,
        scaler_mean=mean,
        scaler_scale=scale,
        noise_sigma=sigma,
        loss_weights=weights,
    )


def encode_frames(model: DdaeModel, groups: dict[str, np.ndarray]) -> np.ndarray:
    """Deterministic bottleneck activations, shape (n_frames, latent_dim)."""
    model.check_schema(groups)
    x = (_concat(groups, model.group_names) - model.scaler_mean) / model.scaler_scale
    acts = []
    start = 0
    for g in model.group_names:
        d = model.group_dims[g]
        xg = x[:, start : start + d]
        start += d
        acts.append(np.tanh(xg @ model.params[f"We_{g}"].T + model.params[f"be_{g}"]))
    a = np.concatenate(acts, axis=1)
    return np.tanh(a @ model.params["Ws"].T + model.params["bs"])


def reconstruction_loss(model: DdaeModel, groups: dict[str, np.ndarray]) -> float:
    """Noise-free weighted reconstruction MSE of the model on the given frames."""
    model.check_schema(groups)
    x = (_concat(groups, model.group_names) - model.scaler_mean) / model.scaler_scale
    cache = _forward(model.params, x, model.group_names, model.group_dims)
    targets = {}
    start = 0
    for g in model.group_names:
        targets[g] = x[:, start : start + model.group_dims[g]]
        start += model.group_dims[g]
    return weighted_mse(cache["recon"], targets, model.loss_weights)
