"""Pair enumeration, win/loss labels, and pairwise comparison features.

Each unordered model pair is oriented (lower id, higher id). For a pair
(left, right) and each proxy k, the comparison feature block is

    [p_left - p_right, p_left * p_right, p_left, p_right]

and the five blocks are concatenated in PROXY_FIELDS order into a
20-dimensional vector: proxy k occupies columns 4k..4k+3.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .dataset import PROXY_FIELDS, ModelSet

BLOCK_TERMS = ("diff", "prod", "left", "right")
BLOCK_SIZE = len(BLOCK_TERMS)
N_FEATURES = len(PROXY_FIELDS) * BLOCK_SIZE

FEATURE_NAMES: tuple[str, ...] = tuple(
    f"{proxy}_{term}" for proxy in PROXY_FIELDS for term in BLOCK_TERMS
)


def feature_block(proxy: str) -> slice:
    """Column slice of the four features derived from `proxy`."""
    k = PROXY_FIELDS.index(proxy)
    return slice(BLOCK_SIZE * k, BLOCK_SIZE * (k + 1))


def proxy_of_feature(column: int) -> str:
    """Proxy that feature column `column` belongs to."""
    if not 0 <= column < N_FEATURES:
        raise IndexError(f"feature column {column} outside 0..{N_FEATURES - 1}")
    return PROXY_FIELDS[column // BLOCK_SIZE]


class Task(enum.Enum):
    SFT_CMS = "sft_cms"
    SFT_RAG = "sft_rag"
    SFT_CBQA = "sft_cbqa"

    @property
    def column(self) -> int:
        return list(Task).index(self)


class Outcome(enum.Enum):
    LEFT_WINS = "left_wins"
    RIGHT_WINS = "right_wins"
    TIE = "tie"


@dataclass(frozen=True)
class PairLabel:
    left_id: int
    right_id: int
    task: Task
    outcome: Outcome

    @property
    def y(self) -> float | None:
        """Binary target: 1 if left wins, 0 if right wins, None on a tie."""
        if self.outcome == Outcome.LEFT_WINS:
            return 1.0
        if self.outcome == Outcome.RIGHT_WINS:
            return 0.0
        return None


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.shape != (N_FEATURES,):
            raise ValueError(f"expected {N_FEATURES} features, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("feature values must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)


def enumerate_pairs(mset: ModelSet) -> list[tuple[int, int]]:
    """All n(n-1)/2 unordered pairs, oriented left_id < right_id, in
    lexicographic id order."""
    ids = sorted(mset.ids)
    return [(ids[a], ids[b]) for a in range(len(ids)) for b in range(a + 1, len(ids))]


def make_label(mset: ModelSet, left_id: int, right_id: int, task: Task) -> PairLabel:
    if left_id == right_id:
        raise ValueError(f"cannot compare model {left_id} with itself")
    left = getattr(mset.record(left_id).sft, task.value)
    right = getattr(mset.record(right_id).sft, task.value)
    if left > right:
        outcome = Outcome.LEFT_WINS
    elif left < right:
        outcome = Outcome.RIGHT_WINS
    else:
        outcome = Outcome.TIE
    return PairLabel(left_id=left_id, right_id=right_id, task=task, outcome=outcome)


def make_features(mset: ModelSet, left_id: int, right_id: int) -> FeatureVector:
    if left_id == right_id:
        raise ValueError(f"cannot compare model {left_id} with itself")
    return FeatureVector(values=feature_matrix(mset, [(left_id, right_id)])[0])


def feature_matrix(mset: ModelSet, pairs) -> np.ndarray:
    """(m, 20) feature matrix for a sequence of (left_id, right_id) pairs."""
    proxies = mset.proxy_matrix
    li = np.array([mset.position(left) for left, _ in pairs], dtype=int)
    ri = np.array([mset.position(right) for _, right in pairs], dtype=int)
    left = proxies[li]
    right = proxies[ri]
    blocks = np.empty((len(li), len(PROXY_FIELDS), BLOCK_SIZE))
    blocks[:, :, 0] = left - right
    blocks[:, :, 1] = left * right
    blocks[:, :, 2] = left
    blocks[:, :, 3] = right
    return blocks.reshape(len(li), N_FEATURES)


@dataclass(frozen=True)
class PairDataset:
    """Labelled, tie-free training/evaluation pairs for one task."""

    pairs: tuple[tuple[int, int], ...]
    X: np.ndarray  # (m, 20)
    y: np.ndarray  # (m,) in {0, 1}
    gaps: np.ndarray  # (m,) absolute task-score difference


def build_pair_dataset(
    mset: ModelSet,
    task: Task,
    pairs=None,
    augment_flip: bool = False,
) -> PairDataset:
    """Features, binary labels, and score gaps for all non-tied pairs.

    Tied pairs (identical task scores) are dropped. With `augment_flip`,
    each pair also appears in reversed orientation with the label flipped.
    """
    if pairs is None:
        pairs = enumerate_pairs(mset)
    sft = mset.sft_matrix[:, task.column]
    kept: list[tuple[int, int]] = []
    ys: list[float] = []
    for left, right in pairs:
        diff = sft[mset.position(left)] - sft[mset.position(right)]
        if diff == 0:
            continue
        kept.append((left, right))
        ys.append(1.0 if diff > 0 else 0.0)
        if augment_flip:
            kept.append((right, left))
            ys.append(0.0 if diff > 0 else 1.0)
    if not kept:
        return PairDataset(
            pairs=(), X=np.empty((0, N_FEATURES)), y=np.empty(0), gaps=np.empty(0)
        )
    X = feature_matrix(mset, kept)
    y = np.array(ys)
    li = [mset.position(left) for left, _ in kept]
    ri = [mset.position(right) for _, right in kept]
    gaps = np.abs(sft[li] - sft[ri])
    return PairDataset(pairs=tuple(kept), X=X, y=y, gaps=gaps)
