"""Borda-count rank aggregation of pairwise predictions and top-k recall.

A predictor assigns every ordered model pair (i, j) a probability that i
outperforms j after finetuning. Each model's Borda score is its number of
strict pairwise wins (probability > 0.5) against all other candidates;
ranking is by descending score with ascending-id tie-break.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import PROXY_FIELDS, ModelSet, Normalization, normalize_proxies
from .evaluation import Backbone, Combo, ProtocolResult, combo_scores, fit_backbone
from .pairing import Task, build_pair_dataset, feature_matrix


@dataclass(frozen=True)
class BordaRanking:
    scores: dict[int, int]
    ranking: tuple[int, ...]

    @classmethod
    def from_scores(cls, scores: dict[int, int]) -> "BordaRanking":
        ordered = tuple(sorted(scores, key=lambda i: (-scores[i], i)))
        return cls(scores=dict(scores), ranking=ordered)


class ScorePredictor:
    """Orders pairs by a fixed per-model score (a proxy or a combo)."""

    def __init__(self, mset: ModelSet, scores: np.ndarray, name: str):
        self._scores = {model_id: float(s) for model_id, s in zip(mset.ids, scores)}
        self.name = name

    @classmethod
    def for_proxy(cls, mset: ModelSet, proxy: str) -> "ScorePredictor":
        if proxy not in PROXY_FIELDS:
            raise ValueError(f"unknown proxy {proxy!r}")
        return cls(mset, mset.proxy_matrix[:, PROXY_FIELDS.index(proxy)], proxy)

    @classmethod
    def for_combo(cls, mset: ModelSet, combo: Combo) -> "ScorePredictor":
        return cls(mset, combo_scores(mset, combo), combo.value)

    def prob_matrix(self, mset: ModelSet, ids) -> np.ndarray:
        s = np.array([self._scores[i] for i in ids])
        diff = s[:, None] - s[None, :]
        return np.where(diff > 0, 1.0, np.where(diff < 0, 0.0, 0.5))


class ModelPredictor:
    """Orders pairs with a fitted comparator over pairwise features."""

    def __init__(self, model, name: str):
        self.model = model
        self.name = name

    def prob_matrix(self, mset: ModelSet, ids) -> np.ndarray:
        ids = list(ids)
        ordered_pairs = [(a, b) for a in ids for b in ids if a != b]
        probs = self.model.predict_proba_many(feature_matrix(mset, ordered_pairs))
        out = np.full((len(ids), len(ids)), 0.5)
        pos = {model_id: k for k, model_id in enumerate(ids)}
        for (a, b), p in zip(ordered_pairs, probs):
            out[pos[a], pos[b]] = p
        return out


def borda_scores(predictor, mset: ModelSet, ids=None) -> BordaRanking:
    """Count strict pairwise wins over all ordered pairs among `ids`."""
    ids = sorted(mset.ids) if ids is None else sorted(ids)
    probs = predictor.prob_matrix(mset, ids)
    wins = (probs > 0.5).astype(int)
    np.fill_diagonal(wins, 0)
    totals = wins.sum(axis=1)
    return BordaRanking.from_scores({model_id: int(w) for model_id, w in zip(ids, totals)})


def true_top_k(mset: ModelSet, task: Task, k: int, ids=None) -> tuple[int, ...]:
    """Best k models by true task score; ties broken by ascending id."""
    ids = sorted(mset.ids) if ids is None else sorted(ids)
    sft = mset.sft_matrix[:, task.column]
    ordered = sorted(ids, key=lambda i: (-sft[mset.position(i)], i))
    return tuple(ordered[:k])


def top_k_recall(predicted: BordaRanking, mset: ModelSet, task: Task, k: int, cutoff: int) -> float:
    """Fraction of the true top-k found within the predicted top-cutoff."""
    n = len(predicted.ranking)
    if not (1 <= k <= cutoff <= n):
        raise ValueError(f"need 1 <= k <= cutoff <= {n}, got k={k}, cutoff={cutoff}")
    truth = set(true_top_k(mset, task, k, ids=predicted.ranking))
    found = truth.intersection(predicted.ranking[:cutoff])
    return len(found) / k


def recall_curve(predicted: BordaRanking, mset: ModelSet, task: Task, k: int, cutoffs=None):
    """(cutoff, recall) points; cutoffs default to k..n."""
    n = len(predicted.ranking)
    if cutoffs is None:
        cutoffs = range(k, n + 1)
    return [(int(c), top_k_recall(predicted, mset, task, k, int(c))) for c in cutoffs]


def rank_all_models(
    mset: ModelSet,
    backbone: Backbone,
    task: Task,
    seed: int = 0,
    feature_normalization: Normalization = Normalization.MINMAX,
):
    """Full-corpus mode: train on every non-tied pair, rank all models.

    Returns (ranking, fitted model)."""
    feature_set = normalize_proxies(mset, feature_normalization)
    ds = build_pair_dataset(feature_set, task)
    model = fit_backbone(backbone, ds.X, ds.y, seed)
    predictor = ModelPredictor(model, backbone.value)
    return borda_scores(predictor, feature_set), model


def held_out_recall_curves(result: ProtocolResult, mset: ModelSet, task: Task, k: int):
    """Held-out mode: rank each run's test models with that run's model and
    average the recall curves over runs. Cutoffs span k..(test size)."""
    feature_set = normalize_proxies(mset, result.feature_normalization)
    n_test = len(result.runs[0].split.test_ids)
    cutoffs = list(range(k, n_test + 1))
    curves = []
    for run in result.runs:
        predictor = ModelPredictor(run.model, result.backbone.value)
        ranking = borda_scores(predictor, feature_set, ids=run.split.test_ids)
        curves.append([r for _, r in recall_curve(ranking, feature_set, task, k, cutoffs)])
    mean_curve = np.mean(np.array(curves), axis=0)
    return [(c, float(r)) for c, r in zip(cutoffs, mean_curve)]
