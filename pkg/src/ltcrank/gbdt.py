"""Gradient-boosted decision trees on binary log-loss, grown leaf-wise.

Each boosting round fits one regression tree to the second-order statistics
of the log-loss: per-sample gradient g = p - y and hessian h = p (1 - p).
Trees grow leaf-wise: the leaf whose best split reduces the loss surrogate
the most is split first, until the leaf budget is reached or no admissible
split improves the loss. Split candidates are enumerated exactly at the
midpoints between consecutive distinct sorted feature values (no histogram
binning), with gain

    0.5 * [G_L^2 / (H_L + l2) + G_R^2 / (H_R + l2) - G^2 / (H + l2)]

and leaf values -G / (H + l2), scaled by the learning rate. Every split
node records its gain, which is what the gain-based feature importance
aggregates.

Determinism: equal-gain split candidates resolve to the lowest feature
index, then the lowest threshold; equal-gain leaves split in creation
order. Row/feature subsampling (off by default) draws from the config seed.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import PROXY_FIELDS
from .exceptions import DegenerateFitError
from .learners import _bce_from_logits, sigmoid
from .pairing import BLOCK_SIZE, N_FEATURES, FeatureVector

MIN_HESSIAN_IN_LEAF = 1e-3  # hessian floor per child, LightGBM-style

SERIAL_VERSION = 1


@dataclass(frozen=True)
class GbdtConfig:
    num_leaves: int = 31
    learning_rate: float = 0.1
    n_estimators: int = 100
    min_data_in_leaf: int = 20
    min_gain_to_split: float = 0.0
    lambda_l1: float = 0.0
    lambda_l2: float = 0.0
    feature_fraction: float = 1.0
    bagging_fraction: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.num_leaves < 2:
            raise ValueError("num_leaves must be >= 2")
        if not (0 < self.learning_rate <= 1):
            raise ValueError("learning_rate must be in (0, 1]")
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        if self.min_data_in_leaf < 1:
            raise ValueError("min_data_in_leaf must be >= 1")
        if self.min_gain_to_split < 0 or self.lambda_l1 < 0 or self.lambda_l2 < 0:
            raise ValueError("penalties and gain threshold must be >= 0")
        for name in ("feature_fraction", "bagging_fraction"):
            if not (0 < getattr(self, name) <= 1):
                raise ValueError(f"{name} must be in (0, 1]")


@dataclass
class LeafNode:
    value: float


@dataclass
class SplitNode:
    feature: int
    threshold: float
    gain: float
    left: "SplitNode | LeafNode"
    right: "SplitNode | LeafNode"


@dataclass(frozen=True)
class GbdtModel:
    base_score: float
    trees: tuple["SplitNode | LeafNode", ...]
    config: GbdtConfig
    n_features: int
    loss_curve: tuple[float, ...] = field(default=(), compare=False)

    def predict_margin(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.full(X.shape[0], self.base_score)
        for root in self.trees:
            _route_add(root, X, np.arange(X.shape[0]), out)
        return out

    def predict_proba_many(self, X) -> np.ndarray:
        return sigmoid(self.predict_margin(X))

    def to_json(self) -> str:
        return json.dumps(
            {
                "format": "ltcrank-gbdt",
                "version": SERIAL_VERSION,
                "base_score": self.base_score,
                "n_features": self.n_features,
                "config": {
                    "num_leaves": self.config.num_leaves,
                    "learning_rate": self.config.learning_rate,
                    "n_estimators": self.config.n_estimators,
                    "min_data_in_leaf": self.config.min_data_in_leaf,
                    "min_gain_to_split": self.config.min_gain_to_split,
                    "lambda_l1": self.config.lambda_l1,
                    "lambda_l2": self.config.lambda_l2,
                    "feature_fraction": self.config.feature_fraction,
                    "bagging_fraction": self.config.bagging_fraction,
                    "seed": self.config.seed,
                },
                "trees": [_node_to_dict(t) for t in self.trees],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "GbdtModel":
        doc = json.loads(text)
        if doc.get("format") != "ltcrank-gbdt":
            raise ValueError("not a serialized gbdt model")
        return cls(
            base_score=float(doc["base_score"]),
            trees=tuple(_node_from_dict(t) for t in doc["trees"]),
            config=GbdtConfig(**doc["config"]),
            n_features=int(doc["n_features"]),
        )


def _node_to_dict(node):
    if isinstance(node, LeafNode):
        return {"value": node.value}
    return {
        "feature": node.feature,
        "threshold": node.threshold,
        "gain": node.gain,
        "left": _node_to_dict(node.left),
        "right": _node_to_dict(node.right),
    }


def _node_from_dict(doc):
    if "value" in doc:
        return LeafNode(value=float(doc["value"]))
    return SplitNode(
        feature=int(doc["feature"]),
        threshold=float(doc["threshold"]),
        gain=float(doc["gain"]),
        left=_node_from_dict(doc["left"]),
        right=_node_from_dict(doc["right"]),
    )


def _route_add(node, X, idx, out):
    if isinstance(node, LeafNode):
        out[idx] += node.value
        return
    go_left = X[idx, node.feature] <= node.threshold
    _route_add(node.left, X, idx[go_left], out)
    _route_add(node.right, X, idx[~go_left], out)


def _leaf_weight(grad_sum: float, hess_sum: float, cfg: GbdtConfig) -> float:
    g = grad_sum
    if cfg.lambda_l1 > 0:  # soft-threshold slot; inert at the default 0
        g = np.sign(g) * max(abs(g) - cfg.lambda_l1, 0.0)
    return -g / (hess_sum + cfg.lambda_l2)


@dataclass
class _Candidate:
    gain: float
    feature: int
    threshold: float


@dataclass
class _LeafState:
    serial: int
    samples: np.ndarray
    grad_sum: float
    hess_sum: float
    best: _Candidate | None = None


class _TreeGrower:
    """Grows one tree leaf-wise over presorted features."""

    def __init__(self, X, grad, hess, sort_idx, features, cfg: GbdtConfig):
        self.X = X
        self.grad = grad
        self.hess = hess
        self.sort_idx = sort_idx  # (n_rows_total, n_feat_subset), presorted sample ids
        self.features = features  # actual feature indices of sort_idx columns
        self.cfg = cfg
        self.n = X.shape[0]

    def find_best(self, leaf: _LeafState) -> None:
        cfg = self.cfg
        k = leaf.samples.size
        if k < 2 * cfg.min_data_in_leaf:
            leaf.best = None
            return
        in_leaf = np.zeros(self.n, dtype=bool)
        in_leaf[leaf.samples] = True
        mask = in_leaf[self.sort_idx]  # (n, n_feat)
        sorted_samples = self.sort_idx.T[mask.T].reshape(len(self.features), k)
        gs = np.cumsum(self.grad[sorted_samples], axis=1)[:, :-1]
        hs = np.cumsum(self.hess[sorted_samples], axis=1)[:, :-1]
        values = self.X[sorted_samples, np.asarray(self.features)[:, None]]
        left_v = values[:, :-1]
        right_v = values[:, 1:]
        thresholds = 0.5 * (left_v + right_v)
        counts = np.arange(1, k)
        g_total, h_total = leaf.grad_sum, leaf.hess_sum
        gr = g_total - gs
        hr = h_total - hs
        l2 = cfg.lambda_l2
        parent_term = g_total * g_total / (h_total + l2)
        gain = 0.5 * (gs * gs / (hs + l2) + gr * gr / (hr + l2) - parent_term)
        valid = (
            (right_v > left_v)
            & (thresholds < right_v)  # guard midpoint rounding onto the right value
            & (counts >= cfg.min_data_in_leaf)
            & (counts <= k - cfg.min_data_in_leaf)
            & (hs >= MIN_HESSIAN_IN_LEAF)
            & (hr >= MIN_HESSIAN_IN_LEAF)
        )
        gain = np.where(valid, gain, -np.inf)
        per_feature_pos = np.argmax(gain, axis=1)  # first max: lowest threshold
        per_feature_gain = gain[np.arange(gain.shape[0]), per_feature_pos]
        best_col = int(np.argmax(per_feature_gain))  # first max: lowest feature index
        best_gain = float(per_feature_gain[best_col])
        if not np.isfinite(best_gain) or best_gain <= cfg.min_gain_to_split:
            leaf.best = None
            return
        leaf.best = _Candidate(
            gain=best_gain,
            feature=int(self.features[best_col]),
            threshold=float(thresholds[best_col, per_feature_pos[best_col]]),
        )

    def grow(self, samples: np.ndarray):
        """Returns (root node, {sample: leaf value}) or None when the root
        admits no split."""
        root = _LeafState(
            serial=0,
            samples=samples,
            grad_sum=float(self.grad[samples].sum()),
            hess_sum=float(self.hess[samples].sum()),
        )
        self.find_best(root)
        if root.best is None:
            return None
        serial = 0
        heap = [(-root.best.gain, root.serial)]
        states = {0: root}
        splits: dict[int, tuple[_Candidate, int, int]] = {}
        n_leaves = 1
        while heap and n_leaves < self.cfg.num_leaves:
            _, leaf_serial = heapq.heappop(heap)
            leaf = states[leaf_serial]
            cand = leaf.best
            go_left = self.X[leaf.samples, cand.feature] <= cand.threshold
            left_samples = leaf.samples[go_left]
            right_samples = leaf.samples[~go_left]
            children = []
            for child_samples in (left_samples, right_samples):
                serial += 1
                child = _LeafState(
                    serial=serial,
                    samples=child_samples,
                    grad_sum=float(self.grad[child_samples].sum()),
                    hess_sum=float(self.hess[child_samples].sum()),
                )
                states[serial] = child
                children.append(child)
            splits[leaf_serial] = (cand, children[0].serial, children[1].serial)
            n_leaves += 1
            for child in children:
                self.find_best(child)
                if child.best is not None:
                    heapq.heappush(heap, (-child.best.gain, child.serial))

        contributions = np.zeros(self.n)
        lr = self.cfg.learning_rate

        def build(serial: int):
            if serial in splits:
                cand, left_serial, right_serial = splits[serial]
                return SplitNode(
                    feature=cand.feature,
                    threshold=cand.threshold,
                    gain=cand.gain,
                    left=build(left_serial),
                    right=build(right_serial),
                )
            state = states[serial]
            value = lr * _leaf_weight(state.grad_sum, state.hess_sum, self.cfg)
            contributions[state.samples] = value
            return LeafNode(value=value)

        return build(0), contributions


def fit_gbdt(X, y, cfg: GbdtConfig | None = None) -> GbdtModel:
    """Boost log-loss trees from the class-prior log-odds.

    Stops early (before n_estimators) once a round produces no admissible
    split, since the gradients can no longer change. `loss_curve` holds the
    training BCE at the prior and after each appended tree.
    """
    cfg = cfg or GbdtConfig()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError(f"bad training shapes: X {X.shape}, y {y.shape}")
    classes = np.unique(y)
    if not np.all(np.isin(classes, (0.0, 1.0))):
        raise ValueError("labels must be 0 or 1")
    if classes.size < 2:
        raise DegenerateFitError("training labels contain a single class")
    n, n_features = X.shape
    rng = np.random.default_rng(cfg.seed)
    prior = float(y.mean())
    base_score = float(np.log(prior / (1.0 - prior)))
    margin = np.full(n, base_score)
    sort_idx_full = np.argsort(X, axis=0, kind="stable")
    curve = [_bce_from_logits(margin, y)]
    trees: list[SplitNode | LeafNode] = []
    all_features = np.arange(n_features)
    all_rows = np.arange(n)
    for _ in range(cfg.n_estimators):
        p = sigmoid(margin)
        grad = p - y
        hess = p * (1.0 - p)
        if cfg.feature_fraction < 1.0:
            n_sub = max(1, int(round(cfg.feature_fraction * n_features)))
            features = np.sort(rng.choice(n_features, size=n_sub, replace=False))
            sort_idx = sort_idx_full[:, features]
        else:
            features = all_features
            sort_idx = sort_idx_full
        if cfg.bagging_fraction < 1.0:
            n_rows = max(2 * cfg.min_data_in_leaf, int(round(cfg.bagging_fraction * n)))
            rows = np.sort(rng.choice(n, size=min(n_rows, n), replace=False))
        else:
            rows = all_rows
        grower = _TreeGrower(X, grad, hess, sort_idx, features, cfg)
        grown = grower.grow(rows)
        if grown is None:
            if cfg.bagging_fraction == 1.0 and cfg.feature_fraction == 1.0:
                break  # nothing will change in later rounds either
            continue
        root, contributions = grown
        if cfg.bagging_fraction < 1.0:
            # out-of-bag rows still receive the tree's prediction
            margin += _tree_margin(root, X)
        else:
            margin += contributions
        trees.append(root)
        curve.append(_bce_from_logits(margin, y))
    return GbdtModel(
        base_score=base_score,
        trees=tuple(trees),
        config=cfg,
        n_features=n_features,
        loss_curve=tuple(curve),
    )


def _tree_margin(root, X) -> np.ndarray:
    out = np.zeros(X.shape[0])
    _route_add(root, X, np.arange(X.shape[0]), out)
    return out


def predict_proba_gbdt(model: GbdtModel, x) -> float:
    """Win probability for a single feature vector."""
    values = x.values if isinstance(x, FeatureVector) else np.asarray(x, dtype=float)
    return float(model.predict_proba_many(values.reshape(1, -1))[0])


@dataclass(frozen=True)
class ImportanceReport:
    """Gain totals per feature column, grouped per proxy and normalized.

    `normalized` sums to 1; an all-zero ensemble reports the uniform
    distribution by convention.
    """

    per_feature_gain: np.ndarray  # (20,)
    per_proxy_gain: np.ndarray  # (5,)
    normalized: np.ndarray  # (5,), sums to 1

    def __post_init__(self):
        for name in ("per_feature_gain", "per_proxy_gain", "normalized"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_feature_gains(cls, per_feature_gain) -> "ImportanceReport":
        per_feature = np.zeros(N_FEATURES)
        gains = np.asarray(per_feature_gain, dtype=float)
        per_feature[: gains.size] = gains
        per_proxy = per_feature.reshape(len(PROXY_FIELDS), BLOCK_SIZE).sum(axis=1)
        total = per_proxy.sum()
        if total > 0:
            normalized = per_proxy / total
        else:
            normalized = np.full(len(PROXY_FIELDS), 1.0 / len(PROXY_FIELDS))
        return cls(
            per_feature_gain=per_feature,
            per_proxy_gain=per_proxy,
            normalized=normalized,
        )

    def as_dict(self) -> dict:
        return {
            "per_feature_gain": dict(
                zip(
                    (f"{p}_{t}" for p in PROXY_FIELDS for t in ("diff", "prod", "left", "right")),
                    self.per_feature_gain.tolist(),
                )
            ),
            "per_proxy_gain": dict(zip(PROXY_FIELDS, self.per_proxy_gain.tolist())),
            "normalized": dict(zip(PROXY_FIELDS, self.normalized.tolist())),
        }


def _accumulate_gains(node, out: np.ndarray) -> None:
    if isinstance(node, LeafNode):
        return
    out[node.feature] += node.gain
    _accumulate_gains(node.left, out)
    _accumulate_gains(node.right, out)


def gain_importance(model: GbdtModel) -> ImportanceReport:
    """Sum recorded split gains per feature across all trees."""
    if model.n_features > N_FEATURES:
        raise ValueError(
            f"importance layout supports up to {N_FEATURES} features, "
            f"model has {model.n_features}"
        )
    gains = np.zeros(model.n_features)
    for root in model.trees:
        _accumulate_gains(root, gains)
    return ImportanceReport.from_feature_gains(gains)


def aggregate_importance(models) -> ImportanceReport:
    """Pool gain importance over several fitted ensembles (gains add)."""
    models = list(models)
    if not models:
        raise ValueError("need at least one model")
    total = np.zeros(N_FEATURES)
    for model in models:
        total += gain_importance(model).per_feature_gain
    return ImportanceReport.from_feature_gains(total)


def save_model(model: GbdtModel, path) -> None:
    Path(path).write_text(model.to_json(), encoding="utf-8")


def load_model(path) -> GbdtModel:
    return GbdtModel.from_json(Path(path).read_text(encoding="utf-8"))
