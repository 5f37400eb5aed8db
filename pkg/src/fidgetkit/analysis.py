"""Statistical analysis: linear threshold classification, coefficient polarity,
feature-subset search, and the Krippendorff agreement utility."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from fidgetkit.errors import DataError
from fidgetkit.fidgets import FidgetMatrix
from fidgetkit.fusion import stratified_participant_folds

NEAR_ZERO_TOL = 1e-3
RIDGE_LAMBDA = 1e-6

POSITIVE = "+"
NEGATIVE = "¬"
NEAR_ZERO = "/"
INCONSISTENT = "?"


def average_fidget(matrix: FidgetMatrix) -> dict[str, float]:
    """Per-row mean over frames: the fraction of the session each fidget is active."""
    if matrix.n_frames == 0:
        raise DataError("cannot average an empty fidget matrix")
    means = matrix.rows.mean(axis=1)
    return {name: float(m) for name, m in zip(matrix.row_names, means)}


@dataclass
class LinearCvResult:
    f1_mean: float
    f1_per_fold: list[float]
    coefficients: list[np.ndarray]  # per fold, excluding the intercept
    used_ridge: bool


def _fit_linear(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, bool]:
    """Least squares on [1 | x]; ridge fallback when the design is rank-deficient."""
    design = np.column_stack([np.ones(len(x)), x])
    beta, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank == design.shape[1]:
        return beta, False
    penalty = RIDGE_LAMBDA * np.eye(design.shape[1])
    penalty[0, 0] = 0.0  # intercept unpenalized
    beta = np.linalg.solve(design.T @ design + penalty, design.T @ y)
    return beta, True


def _f1_binary(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    tp = np.sum((y_pred == 1) & (y_true == 1))
    fp = np.sum((y_pred == 1) & (y_true == 0))
    fn = np.sum((y_pred == 0) & (y_true == 1))
    denom = 2 * tp + fp + fn
    return float(2 * tp / denom) if denom else 0.0


def linear_classify(
    features: np.ndarray,
    labels: np.ndarray,
    folds: int = 3,
    seed: int = 0,
    participants: list[str] | None = None,
) -> LinearCvResult:
    """Least-squares fit on {0,1} targets; predict label 1 when output > 0.5.

    Folds partition participants (row i belongs to participants[i]; rows are
    participants themselves when omitted).
    """
    features = np.atleast_2d(np.asarray(features, dtype=float))
    labels = np.asarray(labels, dtype=int)
    if participants is None:
        participants = [str(i) for i in range(len(labels))]
    label_of = {}
    for p, y in zip(participants, labels):
        label_of[p] = int(y)
    fold_members = stratified_participant_folds(label_of, folds, seed)

    parts = np.array(participants)
    f1s, coefs = [], []
    used_ridge = False
    for members in fold_members:
        test = np.isin(parts, members)
        beta, ridge = _fit_linear(features[~test], labels[~test])
        used_ridge = used_ridge or ridge
        pred = (np.column_stack([np.ones(test.sum()), features[test]]) @ beta > 0.5).astype(int)
        f1s.append(_f1_binary(labels[test], pred))
        coefs.append(beta[1:])
    return LinearCvResult(
        f1_mean=float(np.mean(f1s)), f1_per_fold=f1s, coefficients=coefs, used_ridge=used_ridge
    )


def polarity(coefficients: list[np.ndarray], tol: float = NEAR_ZERO_TOL) -> list[str]:
    """Per-feature polarity token across folds.

    '+' all folds positive beyond tol; '¬' all folds negative beyond tol;
    '/' all folds within tol of zero; '?' otherwise.
    """
    if len(coefficients) < 2:
        raise DataError("polarity needs coefficients from at least 2 folds")
    stack = np.stack(coefficients)  # (folds, features)
    tokens = []
    for col in stack.T:
        if np.all(col > tol):
            tokens.append(POSITIVE)
        elif np.all(col < -tol):
            tokens.append(NEGATIVE)
        elif np.all(np.abs(col) < tol):
            tokens.append(NEAR_ZERO)
        else:
            tokens.append(INCONSISTENT)
    return tokens


@dataclass
class PolarityReport:
    """Feature names with their polarity tokens, e.g. He-GL+ or Hn-GS¬."""

    tokens: dict[str, str]

    def formatted(self) -> list[str]:
        return [f"{name}{tok}" for name, tok in self.tokens.items()]


def polarity_report(
    feature_names: list[str], coefficients: list[np.ndarray], tol: float = NEAR_ZERO_TOL
) -> PolarityReport:
    tokens = polarity(coefficients, tol)
    return PolarityReport(tokens=dict(zip(feature_names, tokens)))


@dataclass
class SearchResult:
    best_subset: tuple[str, ...]
    f1_mean: float
    f1_per_fold: list[float]
    exhaustive: bool
    n_evaluated: int
    log: list[tuple[tuple[str, ...], float]]


EXHAUSTIVE_LIMIT = 20
BEAM_WIDTH = 50


def feature_search(
    features: np.ndarray,
    labels: np.ndarray,
    feature_names: list[str],
    budget: int = 1 << 20,
    folds: int = 3,
    seed: int = 0,
    participants: list[str] | None = None,
) -> SearchResult:
    """Search feature subsets for the best linear-classification mean F1.

    Exact exhaustive enumeration when the candidate count is at most 20 and
    the full power set fits the budget; otherwise a width-50 beam search,
    flagged as approximate. Ties break lexicographically on the subset.
    """
    features = np.atleast_2d(np.asarray(features, dtype=float))
    n_candidates = features.shape[1]
    if n_candidates < 1:
        raise DataError("feature search needs at least one candidate")
    if len(feature_names) != n_candidates:
        raise DataError("feature_names must match the feature columns")

    def evaluate(subset: tuple[int, ...]) -> tuple[float, list[float]]:
        res = linear_classify(features[:, list(subset)], labels, folds, seed, participants)
        return res.f1_mean, res.f1_per_fold

    log: list[tuple[tuple[str, ...], float]] = []
    best: tuple[float, tuple[int, ...], list[float]] | None = None

    def consider(subset: tuple[int, ...]):
        nonlocal best
        f1, per_fold = evaluate(subset)
        names = tuple(feature_names[i] for i in subset)
        log.append((names, f1))
        if best is None or f1 > best[0] or (f1 == best[0] and names < tuple(feature_names[i] for i in best[1])):
            best = (f1, subset, per_fold)

    total_subsets = (1 << n_candidates) - 1
    exhaustive = n_candidates <= EXHAUSTIVE_LIMIT and total_subsets <= budget
    if exhaustive:
        for size in range(1, n_candidates + 1):
            for subset in combinations(range(n_candidates), size):
                consider(subset)
    else:
        beam: list[tuple[int, ...]] = [(i,) for i in range(n_candidates)]
        for s in beam:
            consider(s)
        scored = sorted(
            ((f1, names) for names, f1 in log), key=lambda t: (-t[0], t[1])
        )
        name_to_idx = {n: i for i, n in enumerate(feature_names)}
        frontier = [tuple(name_to_idx[n] for n in names) for _, names in scored[:BEAM_WIDTH]]
        improved = True
        while improved and len(log) < budget:
            improved = False
            seen = {tuple(sorted(name_to_idx[n] for n in names)) for names, _ in log}
            expansions = []
            for subset in frontier:
                for j in range(n_candidates):
                    if j in subset:
                        continue
                    cand = tuple(sorted(subset + (j,)))
                    if cand in seen:
                        continue
                    seen.add(cand)
                    expansions.append(cand)
            prev_best = best[0]
            for cand in expansions:
                if len(log) >= budget:
                    break
                consider(cand)
            if best[0] > prev_best:
                improved = True
            recent = sorted(
                ((f1, names) for names, f1 in log),
                key=lambda t: (-t[0], len(t[1]), t[1]),
            )
            frontier = [
                tuple(name_to_idx[n] for n in names) for _, names in recent[:BEAM_WIDTH]
            ]

    f1, subset, per_fold = best
    return SearchResult(
        best_subset=tuple(feature_names[i] for i in subset),
        f1_mean=f1,
        f1_per_fold=per_fold,
        exhaustive=exhaustive,
        n_evaluated=len(log),
        log=log,
    )


def krippendorff_alpha(labels_a, labels_b, categories=None) -> float:
    """Nominal-data Krippendorff alpha for two raters.

    alpha = 1 - observed/expected disagreement over the coincidence matrix.
    Returns NaN (the explicit degenerate result) when expected disagreement
    is zero, i.e. effectively one category in use.
    """
    a = list(labels_a)
    b = list(labels_b)
    if len(a) != len(b):
        raise DataError(f"label arrays differ in length: {len(a)} vs {len(b)}")
    if not a:
        raise DataError("empty label arrays")
    cats = sorted(set(a) | set(b)) if categories is None else list(categories)
    index = {c: i for i, c in enumerate(cats)}
    k = len(cats)

    coincidence = np.zeros((k, k))
    for va, vb in zip(a, b):
        try:
            i, j = index[va], index[vb]
        except KeyError as e:
            raise DataError(f"label {e.args[0]!r} not in categories {cats}") from None
        coincidence[i, j] += 1
        coincidence[j, i] += 1

    n_total = coincidence.sum()
    marginals = coincidence.sum(axis=1)
    observed = n_total - np.trace(coincidence)
    expected = (n_total**2 - (marginals**2).sum()) / (n_total - 1)
    if expected == 0:
        return math.nan
    return float(1.0 - observed / expected)
