"""Multi-modal fusion and distress classification.

Per-frame feature groups are compressed by the DDAE, clustered by a GMM, and
encoded per session as an improved Fisher Vector; a random forest picks the
most informative embedding dimensions and an LR or MLP classifier predicts
the binary distress label. Every fitted stage trains strictly on training-
fold participants; a leak guard asserts this with provenance tags and keeps
an audit trail.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.ensemble import RandomForestClassifier
from sklearn.linear_model import LogisticRegression

from fidgetkit.ddae import DdaeModel, encode_frames, train_ddae
from fidgetkit.errors import DataError
from fidgetkit.fisher import fisher_vector
from fidgetkit.gmm import GmmModel, fit_gmm

DEPRESSION_THRESHOLD = 6.63  # PHQ-8 published norm
ANXIETY_THRESHOLD = 5.57  # GAD-7 published norm

GROUP_DIMS = {"fidget": 9, "fidget_pure": 8, "gaze": 8, "aus": 35, "mfccs": 13}


@dataclass(frozen=True)
class ParticipantRecord:
    """Questionnaire scores for one participant; binary labels are derived."""

    session: str
    phq8: float
    gad7: float

    def __post_init__(self):
        if not 0 <= self.phq8 <= 24:
            raise DataError(f"PHQ-8 score {self.phq8} outside 0..24")
        if not 0 <= self.gad7 <= 21:
            raise DataError(f"GAD-7 score {self.gad7} outside 0..21")

    @property
    def depression(self) -> int:
        return int(self.phq8 > DEPRESSION_THRESHOLD)

    @property
    def anxiety(self) -> int:
        return int(self.gad7 > ANXIETY_THRESHOLD)


@dataclass(frozen=True)
class FrameBundle:
    """Named per-frame feature groups for one session, each shaped (dim, N)."""

    session: str
    groups: dict[str, np.ndarray]

    def __post_init__(self):
        lengths = {g: v.shape[1] for g, v in self.groups.items()}
        if len(set(lengths.values())) > 1:
            raise DataError(f"groups disagree on frame count: {lengths}")
        for g, v in self.groups.items():
            expected = GROUP_DIMS.get(g)
            if expected is not None and v.shape[0] != expected:
                raise DataError(f"group {g!r} has dim {v.shape[0]}, expected {expected}")

    @property
    def n_frames(self) -> int:
        return next(iter(self.groups.values())).shape[1]

    def as_rows(self) -> dict[str, np.ndarray]:
        """Transpose to (N, dim) matrices for the encoder stack."""
        return {g: v.T.astype(float) for g, v in self.groups.items()}


class LeakGuard:
    """Asserts that fitted stages only ever consume training-fold rows."""

    def __init__(self):
        self.audit: list[dict] = []

    def check(self, stage: str, fold: int, row_participants, test_participants) -> None:
        leaked = sorted(set(row_participants) & set(test_participants))
        self.audit.append(
            {"stage": stage, "fold": fold, "n_rows": len(row_participants), "leaked": leaked}
        )
        if leaked:
            raise DataError(f"leak: stage {stage!r} fold {fold} consumed test rows from {leaked}")


def smooth_labels(onehot: np.ndarray, smoothing: float) -> np.ndarray:
    """L_new = L * (1 - s) + s / n_classes applied to one-hot targets."""
    if not 0 <= smoothing < 1:
        raise DataError(f"smoothing must be in [0, 1), got {smoothing}")
    n_classes = onehot.shape[1]
    return onehot * (1.0 - smoothing) + smoothing / n_classes


def _one_hot(y: np.ndarray, n_classes: int = 2) -> np.ndarray:
    out = np.zeros((len(y), n_classes))
    out[np.arange(len(y)), y] = 1.0
    return out


def select_features(
    train_embeddings: np.ndarray, train_labels: np.ndarray, rf_num: int, seed: int = 0
) -> np.ndarray:
    """Indices of the rf_num most important embedding dimensions (train folds only)."""
    if rf_num <= 0:
        raise DataError(f"rf_num must be positive, got {rf_num}")
    n_dims = train_embeddings.shape[1]
    if rf_num > n_dims:
        raise DataError(f"rf_num {rf_num} exceeds embedding length {n_dims}")
    forest = RandomForestClassifier(n_estimators=200, random_state=seed, n_jobs=1)
    forest.fit(train_embeddings, train_labels)
    order = np.lexsort((np.arange(n_dims), -forest.feature_importances_))
    return np.sort(order[:rf_num])


@dataclass
class MlpClassifier:
    """One-hidden-layer softmax MLP trained on (possibly smoothed) soft targets."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def _probs(self, x: np.ndarray) -> np.ndarray:
        h = np.maximum(x @ self.w1.T + self.b1, 0.0)
        logits = h @ self.w2.T + self.b2
        logits -= logits.max(axis=1, keepdims=True)
        e = np.exp(logits)
        return e / e.sum(axis=1, keepdims=True)

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return self._probs(np.atleast_2d(x))

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.predict_proba(x).argmax(axis=1)


def _train_mlp(
    x: np.ndarray,
    targets: np.ndarray,
    hidden: int = 64,
    epochs: int = 300,
    lr: float = 1e-3,
    weight_decay: float = 1e-4,
    seed: int = 0,
) -> MlpClassifier:
    rng = np.random.default_rng(seed)
    n, d = x.shape
    k = targets.shape[1]
    w1 = rng.uniform(-1, 1, (hidden, d)) * np.sqrt(6.0 / (d + hidden))
    b1 = np.zeros(hidden)
    w2 = rng.uniform(-1, 1, (k, hidden)) * np.sqrt(6.0 / (hidden + k))
    b2 = np.zeros(k)
    m = {p: 0.0 for p in ("w1", "b1", "w2", "b2")}
    v = {p: 0.0 for p in ("w1", "b1", "w2", "b2")}

    for t in range(1, epochs + 1):
        h_pre = x @ w1.T + b1
        h = np.maximum(h_pre, 0.0)
        logits = h @ w2.T + b2
        logits -= logits.max(axis=1, keepdims=True)
        e = np.exp(logits)
        probs = e / e.sum(axis=1, keepdims=True)

        d_logits = (probs - targets) / n
        g = {
            "w2": d_logits.T @ h + weight_decay * w2,
            "b2": d_logits.sum(axis=0),
        }
        d_h = d_logits @ w2
        d_h_pre = d_h * (h_pre > 0)
        g["w1"] = d_h_pre.T @ x + weight_decay * w1
        g["b1"] = d_h_pre.sum(axis=0)

        params = {"w1": w1, "b1": b1, "w2": w2, "b2": b2}
        for p in params:
            m[p] = 0.9 * m[p] + 0.1 * g[p]
            v[p] = 0.999 * v[p] + 0.001 * g[p] ** 2
            m_hat = m[p] / (1 - 0.9**t)
            v_hat = v[p] / (1 - 0.999**t)
            params[p] -= lr * m_hat / (np.sqrt(v_hat) + 1e-8)
        w1, b1, w2, b2 = params["w1"], params["b1"], params["w2"], params["b2"]

    return MlpClassifier(w1=w1, b1=b1, w2=w2, b2=b2)


@dataclass
class DistressClassifier:
    """LR or MLP over selected embedding features; binary threshold 0.5."""

    kind: str
    model: object

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        if self.kind == "lr":
            return (self.model.predict_proba(x)[:, 1] > 0.5).astype(int)
        return self.model.predict(x)


def train_distress_classifier(
    x: np.ndarray, y: np.ndarray, kind: str = "lr", smoothing: float = 0.0, seed: int = 0
) -> DistressClassifier:
    """Fit the final classifier. Label smoothing only affects the MLP targets."""
    y = np.asarray(y, dtype=int)
    if len(set(y.tolist())) < 2:
        raise DataError("training labels are single-class")
    if kind == "lr":
        model = LogisticRegression(max_iter=2000, random_state=seed)
        model.fit(x, y)
        return DistressClassifier(kind="lr", model=model)
    if kind == "mlp":
        targets = smooth_labels(_one_hot(y), smoothing)
        return DistressClassifier(kind="mlp", model=_train_mlp(x, targets, seed=seed))
    raise DataError(f"unknown classifier kind {kind!r} (expected 'lr' or 'mlp')")


@dataclass(frozen=True)
class FusionConfig:
    """Hyper-parameters of the fusion pipeline."""

    n_kernels: int = 32
    rf_num: int = 200
    smoothing: float = 0.4
    classifier: str = "lr"
    folds: int = 3
    seed: int = 0
    ddae_sigma: float = 0.1
    ddae_max_epochs: int = 60
    max_gmm_frames: int = 50_000


@dataclass
class FoldResult:
    fold: int
    test_participants: list[str]
    f1: float
    predictions: dict[str, int]


@dataclass
class CvResult:
    f1_mean: float
    f1_std: float
    folds: list[FoldResult]
    leak_audit: list[dict]

    def to_dict(self) -> dict:
        return {
            "f1_mean": self.f1_mean,
            "f1_std": self.f1_std,
            "folds": [
                {
                    "fold": f.fold,
                    "test_participants": f.test_participants,
                    "f1": f.f1,
                    "predictions": f.predictions,
                }
                for f in self.folds
            ],
            "leak_audit": self.leak_audit,
        }


def _binary_f1(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    tp = np.sum((y_pred == 1) & (y_true == 1))
    fp = np.sum((y_pred == 1) & (y_true == 0))
    fn = np.sum((y_pred == 0) & (y_true == 1))
    denom = 2 * tp + fp + fn
    return float(2 * tp / denom) if denom else 0.0


def stratified_participant_folds(
    labels: dict[str, int], folds: int, seed: int
) -> list[list[str]]:
    """Deal participants into folds, label-stratified, participant-disjoint."""
    if folds > len(labels):
        raise DataError(f"{folds} folds exceed {len(labels)} participants")
    rng = np.random.default_rng(seed)
    out: list[list[str]] = [[] for _ in range(folds)]
    slot = 0
    for label in sorted(set(labels.values())):
        members = sorted(p for p, y in labels.items() if y == label)
        for p in rng.permutation(members):
            out[slot % folds].append(str(p))
            slot += 1
    return [sorted(f) for f in out]


def _stack_frames(
    bundles: dict[str, FrameBundle], ids: list[str]
) -> tuple[dict[str, np.ndarray], list[str]]:
    """Concatenate sessions' frame rows; returns per-row participant provenance."""
    group_names = list(bundles[ids[0]].groups.keys())
    stacked = {
        g: np.concatenate([bundles[p].as_rows()[g] for p in ids], axis=0) for g in group_names
    }
    provenance = [p for p in ids for _ in range(bundles[p].n_frames)]
    return stacked, provenance


def fit_fold_models(
    bundles: dict[str, FrameBundle],
    labels: dict[str, int],
    train_ids: list[str],
    test_ids: list[str],
    config: FusionConfig,
    guard: LeakGuard,
    fold: int,
) -> tuple[DdaeModel, GmmModel, np.ndarray, DistressClassifier, dict[str, np.ndarray]]:
    """Fit DDAE, GMM, selection, and classifier on the training fold only.

    Returns the fitted stages plus embeddings for every session (train and
    test alike, computed with train-fitted models).
    """
    train_frames, provenance = _stack_frames(bundles, train_ids)
    guard.check("ddae", fold, provenance, test_ids)
    ddae = train_ddae(
        train_frames,
        sigma=config.ddae_sigma,
        seed=config.seed + fold,
        max_epochs=config.ddae_max_epochs,
    )

    latents = {p: encode_frames(ddae, bundles[p].as_rows()) for p in bundles}
    train_latents = np.concatenate([latents[p] for p in train_ids], axis=0)
    latent_prov = [p for p in train_ids for _ in range(len(latents[p]))]
    if len(train_latents) > config.max_gmm_frames:
        rng = np.random.default_rng(config.seed + fold)
        keep = rng.choice(len(train_latents), size=config.max_gmm_frames, replace=False)
        train_latents = train_latents[keep]
        latent_prov = [latent_prov[i] for i in keep]
    guard.check("gmm", fold, latent_prov, test_ids)
    gmm = fit_gmm(train_latents, n_components=config.n_kernels, seed=config.seed + fold)

    embeddings = {p: fisher_vector(latents[p], gmm) for p in bundles}
    x_train = np.stack([embeddings[p] for p in train_ids])
    y_train = np.array([labels[p] for p in train_ids])

    guard.check("rf_selection", fold, train_ids, test_ids)
    rf_num = min(config.rf_num, x_train.shape[1])
    selected = select_features(x_train, y_train, rf_num, seed=config.seed + fold)

    guard.check("classifier", fold, train_ids, test_ids)
    clf = train_distress_classifier(
        x_train[:, selected],
        y_train,
        kind=config.classifier,
        smoothing=config.smoothing,
        seed=config.seed + fold,
    )
    return ddae, gmm, selected, clf, embeddings


def save_model_bundle(
    out_dir,
    ddae: DdaeModel,
    gmm: GmmModel,
    selected: np.ndarray,
    classifier: DistressClassifier,
    meta: dict,
) -> None:
    """Persist all fitted stages plus a JSON description to a directory."""
    import json
    import pickle
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    np.savez(
        out / "ddae.npz",
        scaler_mean=ddae.scaler_mean,
        scaler_scale=ddae.scaler_scale,
        **ddae.params,
    )
    np.savez(out / "gmm.npz", weights=gmm.weights, means=gmm.means, variances=gmm.variances)
    with open(out / "selected.json", "w") as f:
        json.dump([int(i) for i in selected], f)
    with open(out / "classifier.pkl", "wb") as f:
        pickle.dump({"kind": classifier.kind, "model": classifier.model}, f)
    with open(out / "bundle.json", "w") as f:
        json.dump(
            {
                "group_names": list(ddae.group_names),
                "group_dims": ddae.group_dims,
                "noise_sigma": ddae.noise_sigma,
                "loss_weights": ddae.loss_weights,
                **meta,
            },
            f,
            sort_keys=True,
        )


def load_model_bundle(bundle_dir):
    """Load the stages saved by save_model_bundle."""
    import json
    import pickle
    from pathlib import Path

    d = Path(bundle_dir)
    if not (d / "bundle.json").exists():
        from fidgetkit.errors import ModelError

        raise ModelError(f"{d}: not a model bundle (missing bundle.json)")
    with open(d / "bundle.json") as f:
        meta = json.load(f)
    raw = dict(np.load(d / "ddae.npz"))
    scaler_mean = raw.pop("scaler_mean")
    scaler_scale = raw.pop("scaler_scale")
    ddae = DdaeModel(
        group_names=tuple(meta["group_names"]),
        group_dims={k: int(v) for k, v in meta["group_dims"].items()},
        params=raw,
        scaler_mean=scaler_mean,
        scaler_scale=scaler_scale,
        noise_sigma=float(meta["noise_sigma"]),
        loss_weights={k: float(v) for k, v in meta["loss_weights"].items()},
    )
    g = np.load(d / "gmm.npz")
    gmm = GmmModel(weights=g["weights"], means=g["means"], variances=g["variances"])
    with open(d / "selected.json") as f:
        selected = np.array(json.load(f), dtype=int)
    with open(d / "classifier.pkl", "rb") as f:
        payload = pickle.load(f)
    clf = DistressClassifier(kind=payload["kind"], model=payload["model"])
    return ddae, gmm, selected, clf, meta


def cross_validate(
    bundles: dict[str, FrameBundle],
    labels: dict[str, int],
    config: FusionConfig = FusionConfig(),
) -> CvResult:
    """Participant-independent k-fold evaluation of the full fusion pipeline."""
    if set(bundles) != set(labels):
        raise DataError("bundles and labels must cover the same sessions")
    guard = LeakGuard()
    fold_members = stratified_participant_folds(labels, config.folds, config.seed)

    results = []
    for fold, test_ids in enumerate(fold_members):
        train_ids = sorted(set(labels) - set(test_ids))
        _, _, selected, clf, embeddings = fit_fold_models(
            bundles, labels, train_ids, test_ids, config, guard, fold
        )
        x_test = np.stack([embeddings[p] for p in test_ids])
        y_test = np.array([labels[p] for p in test_ids])
        pred = clf.predict(x_test[:, selected])
        results.append(
            FoldResult(
                fold=fold,
                test_participants=list(test_ids),
                f1=_binary_f1(y_test, pred),
                predictions={p: int(v) for p, v in zip(test_ids, pred)},
            )
        )

    f1s = [r.f1 for r in results]
    return CvResult(
        f1_mean=float(np.mean(f1s)),
        f1_std=float(np.std(f1s)),
        folds=results,
        leak_audit=guard.audit,
    )
