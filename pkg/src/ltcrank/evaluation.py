"""Accuracy protocols: proxy baselines, repeated-split supervised runs,
cross-task transfer, quantile reliability, and factor-grouped accuracy.

Pairwise accuracy always follows the same convention: pairs whose true task
scores are exactly equal are excluded from the denominator, and a predictor
that cannot order a pair (equal proxy scores, or predicted probability
exactly 0.5) earns half credit.

The repeated-split protocol draws, for each seed s, a random 60%/40% model
split from numpy's default_rng(s); seeds 0..n_runs-1 replay exactly.

Supervised comparators consume features built from min-max normalized
proxies by default (normalization fitted once over the whole corpus).
Raw-proxy features are available via `feature_normalization`, but they
reproduce the reference accuracies noticeably worse for the scale-sensitive
backbones (logistic, MLP).
"""

from __future__ import annotations

import enum
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dataset import PROXY_FIELDS, ModelSet, Normalization, normalize_proxies
from .exceptions import DegenerateFitError, ProtocolError, UndefinedAccuracyError
from .gbdt import GbdtConfig, fit_gbdt
from .learners import TrainConfig, fit_logistic, fit_mlp
from .pairing import Task, build_pair_dataset, enumerate_pairs

TRAIN_FRACTION = 0.6


class Backbone(enum.Enum):
    LOGISTIC = "logistic"
    MLP = "mlp"
    GBDT = "gbdt"


class Combo(enum.Enum):
    MEAN_OF_FIVE = "combine_five"
    SC_PLUS_RAG = "sc_plus_rag"
    SC_PLUS_RAG_MINUS_CLM = "sc_plus_rag_minus_clm"


@dataclass(frozen=True)
class SplitPlan:
    seed: int
    train_ids: tuple[int, ...]
    test_ids: tuple[int, ...]


def make_split(mset: ModelSet, seed: int, train_fraction: float = TRAIN_FRACTION) -> SplitPlan:
    """Deterministic random split: floor(train_fraction * n) train models."""
    ids = np.array(sorted(mset.ids))
    rng = np.random.default_rng(seed)
    perm = rng.permutation(ids)
    n_train = int(np.floor(train_fraction * len(ids)))
    return SplitPlan(
        seed=seed,
        train_ids=tuple(sorted(int(i) for i in perm[:n_train])),
        test_ids=tuple(sorted(int(i) for i in perm[n_train:])),
    )


@dataclass(frozen=True)
class PairRecord:
    left_id: int
    right_id: int
    gap: float  # |true task-score difference|
    correct: float  # 1, 0, or 0.5


def _score_records(mset: ModelSet, scores: np.ndarray, task: Task, pairs) -> list[PairRecord]:
    """Sign-match outcome of a per-model score against true task ordering."""
    sft = mset.sft_matrix[:, task.column]
    records = []
    for left, right in pairs:
        li, ri = mset.position(left), mset.position(right)
        ds = sft[li] - sft[ri]
        if ds == 0:
            continue
        dp = scores[li] - scores[ri]
        if dp == 0:
            correct = 0.5
        else:
            correct = float((dp > 0) == (ds > 0))
        records.append(PairRecord(left, right, abs(float(ds)), correct))
    return records


def _records_accuracy(records) -> float:
    if not records:
        raise UndefinedAccuracyError("no non-tied pairs to score")
    return float(np.mean([r.correct for r in records]))


def proxy_accuracy(mset: ModelSet, proxy: str, task: Task, pairs=None) -> float:
    """All-pairs accuracy of a single proxy's ordering."""
    if proxy not in PROXY_FIELDS:
        raise ValueError(f"unknown proxy {proxy!r}")
    if pairs is None:
        pairs = enumerate_pairs(mset)
    scores = mset.proxy_matrix[:, PROXY_FIELDS.index(proxy)]
    return _records_accuracy(_score_records(mset, scores, task, pairs))


def combo_scores(mset: ModelSet, combo: Combo) -> np.ndarray:
    """Per-model aggregated score; requires a normalized ModelSet."""
    if mset.normalization == Normalization.RAW:
        raise ValueError("combo scores need a normalized ModelSet (minmax or zscore)")
    proxies = mset.proxy_matrix
    clm = proxies[:, PROXY_FIELDS.index("ppl_clm")]
    sc = proxies[:, PROXY_FIELDS.index("ppl_sc")]
    rag = proxies[:, PROXY_FIELDS.index("kshot_rag")]
    if combo == Combo.MEAN_OF_FIVE:
        return proxies.mean(axis=1)
    if combo == Combo.SC_PLUS_RAG:
        return sc + rag
    if combo == Combo.SC_PLUS_RAG_MINUS_CLM:
        return sc + rag - clm
    raise ValueError(f"unknown combo {combo!r}")


def combo_accuracy(mset: ModelSet, combo: Combo, task: Task, pairs=None) -> float:
    if pairs is None:
        pairs = enumerate_pairs(mset)
    scores = combo_scores(mset, combo)
    return _records_accuracy(_score_records(mset, scores, task, pairs))


@dataclass(frozen=True)
class AccuracyReport:
    task: Task
    predictor: str
    per_run: tuple[float, ...]
    mean: float
    std: float  # population sd over runs
    n_pairs: tuple[int, ...]

    @classmethod
    def from_runs(cls, task, predictor, per_run, n_pairs) -> "AccuracyReport":
        per_run = tuple(float(a) for a in per_run)
        if not per_run:
            raise ProtocolError(f"{predictor}: no successful runs")
        arr = np.array(per_run)
        return cls(
            task=task,
            predictor=predictor,
            per_run=per_run,
            mean=float(arr.mean()),
            std=float(arr.std()),
            n_pairs=tuple(int(n) for n in n_pairs),
        )


@dataclass(frozen=True)
class RunOutcome:
    seed: int
    split: SplitPlan
    model: object
    evaluations: dict[Task, tuple[float, list[PairRecord]]]


@dataclass(frozen=True)
class RunFailure:
    seed: int
    reason: str


@dataclass(frozen=True)
class ProtocolResult:
    """Everything produced by one repeated-split experiment: one fitted
    model per successful run plus its held-out pair outcomes per task.

    `feature_normalization` records the proxy transform the models were
    trained on, so rankings and dumps can rebuild the same feature space.
    """

    backbone: Backbone
    train_task: Task
    seeds: tuple[int, ...]
    runs: tuple[RunOutcome, ...]
    failures: tuple[RunFailure, ...]
    feature_normalization: Normalization = Normalization.MINMAX

    def report(self, eval_task: Task) -> AccuracyReport:
        return AccuracyReport.from_runs(
            task=eval_task,
            predictor=self.backbone.value,
            per_run=[r.evaluations[eval_task][0] for r in self.runs],
            n_pairs=[len(r.evaluations[eval_task][1]) for r in self.runs],
        )

    def pooled_records(self, eval_task: Task) -> list[PairRecord]:
        pooled: list[PairRecord] = []
        for run in self.runs:
            pooled.extend(run.evaluations[eval_task][1])
        return pooled

    def models(self) -> list:
        return [r.model for r in self.runs]


def fit_backbone(backbone: Backbone, X, y, seed: int):
    if backbone == Backbone.LOGISTIC:
        return fit_logistic(X, y, TrainConfig(seed=seed))
    if backbone == Backbone.MLP:
        return fit_mlp(X, y, TrainConfig(seed=seed))
    if backbone == Backbone.GBDT:
        return fit_gbdt(X, y, GbdtConfig(seed=seed))
    raise ValueError(f"unknown backbone {backbone!r}")


def _pairs_within(ids) -> list[tuple[int, int]]:
    ids = sorted(ids)
    return [(ids[a], ids[b]) for a in range(len(ids)) for b in range(a + 1, len(ids))]


def _evaluate_model(mset, model, pairs, eval_task):
    ds = build_pair_dataset(mset, eval_task, pairs=pairs)
    if len(ds.pairs) == 0:
        raise UndefinedAccuracyError("all evaluation pairs are tied")
    p = model.predict_proba_many(ds.X)
    predicted_left = (p > 0.5).astype(float)
    correct = np.where(p == 0.5, 0.5, (predicted_left == ds.y).astype(float))
    records = [
        PairRecord(left, right, float(gap), float(c))
        for (left, right), gap, c in zip(ds.pairs, ds.gaps, correct)
    ]
    return float(correct.mean()), records


def _run_single(args):
    mset, backbone, train_task, eval_tasks, seed, augment_flip = args
    split = make_split(mset, seed)
    train_ds = build_pair_dataset(
        mset, train_task, pairs=_pairs_within(split.train_ids), augment_flip=augment_flip
    )
    try:
        model = fit_backbone(backbone, train_ds.X, train_ds.y, seed)
    except DegenerateFitError as exc:
        return RunFailure(seed=seed, reason=str(exc))
    evaluations = {}
    test_pairs = _pairs_within(split.test_ids)
    for eval_task in eval_tasks:
        evaluations[eval_task] = _evaluate_model(mset, model, test_pairs, eval_task)
    return RunOutcome(seed=seed, split=split, model=model, evaluations=evaluations)


def run_matrix(
    mset: ModelSet,
    backbone: Backbone,
    train_task: Task,
    eval_tasks=None,
    seeds=range(20),
    augment_flip: bool = False,
    feature_normalization: Normalization = Normalization.MINMAX,
    jobs: int = 1,
) -> ProtocolResult:
    """Fit one comparator per seed on train-split pairs of `train_task` and
    evaluate it on the test-split pairs of every task in `eval_tasks`."""
    if len(mset) < 10:
        raise ValueError("protocol needs at least 10 models")
    eval_tasks = tuple(eval_tasks) if eval_tasks is not None else tuple(Task)
    seeds = tuple(int(s) for s in seeds)
    feature_set = normalize_proxies(mset, feature_normalization)
    arg_list = [(feature_set, backbone, train_task, eval_tasks, s, augment_flip) for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run_single, arg_list))
    else:
        outcomes = [_run_single(a) for a in arg_list]
    runs = tuple(o for o in outcomes if isinstance(o, RunOutcome))
    failures = tuple(o for o in outcomes if isinstance(o, RunFailure))
    if not runs:
        raise ProtocolError(
            f"all {len(seeds)} runs failed; first: {failures[0].reason}"
        )
    return ProtocolResult(
        backbone=backbone,
        train_task=train_task,
        seeds=seeds,
        runs=runs,
        failures=failures,
        feature_normalization=feature_normalization,
    )


def run_protocol(
    mset: ModelSet,
    backbone: Backbone,
    train_task: Task,
    eval_task: Task,
    n_runs: int = 20,
    seeds=None,
    feature_normalization: Normalization = Normalization.MINMAX,
    jobs: int = 1,
) -> AccuracyReport:
    """The repeated-split accuracy protocol for one (train, eval) task pair."""
    if seeds is None:
        seeds = range(n_runs)
    result = run_matrix(
        mset,
        backbone,
        train_task,
        eval_tasks=(eval_task,),
        seeds=seeds,
        feature_normalization=feature_normalization,
        jobs=jobs,
    )
    return result.report(eval_task)


def baseline_protocol(
    mset: ModelSet,
    predictor: "str | Combo",
    task: Task,
    seeds=range(20),
    normalization: Normalization = Normalization.MINMAX,
) -> AccuracyReport:
    """Unsupervised baseline scored on each split's held-out test pairs,
    giving a mean and spread comparable to the supervised protocol."""
    if isinstance(predictor, Combo):
        scored_set = (
            mset
            if mset.normalization != Normalization.RAW
            else normalize_proxies(mset, normalization)
        )
        scores = combo_scores(scored_set, predictor)
        name = predictor.value
    else:
        if predictor not in PROXY_FIELDS:
            raise ValueError(f"unknown proxy {predictor!r}")
        scores = mset.proxy_matrix[:, PROXY_FIELDS.index(predictor)]
        name = predictor
    per_run, n_pairs = [], []
    for seed in seeds:
        split = make_split(mset, seed)
        records = _score_records(mset, scores, task, _pairs_within(split.test_ids))
        per_run.append(_records_accuracy(records))
        n_pairs.append(len(records))
    return AccuracyReport.from_runs(task, name, per_run, n_pairs)


@dataclass(frozen=True)
class QuantileBucket:
    count: int
    accuracy: float
    gap_min: float
    gap_max: float


@dataclass(frozen=True)
class QuantileReport:
    task: Task
    predictor: str
    buckets: tuple[QuantileBucket, ...]


def _bucketize(records, n_buckets: int, task: Task, predictor: str) -> QuantileReport:
    if len(records) < n_buckets:
        raise ValueError(f"need at least {n_buckets} records, got {len(records)}")
    ordered = sorted(records, key=lambda r: r.gap)  # stable: input order breaks ties
    chunks = np.array_split(np.arange(len(ordered)), n_buckets)
    buckets = []
    for chunk in chunks:
        part = [ordered[i] for i in chunk]
        buckets.append(
            QuantileBucket(
                count=len(part),
                accuracy=float(np.mean([r.correct for r in part])),
                gap_min=float(part[0].gap),
                gap_max=float(part[-1].gap),
            )
        )
    return QuantileReport(task=task, predictor=predictor, buckets=tuple(buckets))


def quantile_buckets(mset: ModelSet, predictor, task: Task, n_buckets: int = 5) -> QuantileReport:
    """Equal-frequency reliability buckets by absolute true score gap.

    `predictor` is a proxy name, a Combo, or a ProtocolResult; supervised
    results pool the held-out test pairs of every run before bucketing.
    """
    if isinstance(predictor, ProtocolResult):
        records = predictor.pooled_records(task)
        name = predictor.backbone.value
    elif isinstance(predictor, Combo):
        records = _score_records(mset, combo_scores(mset, predictor), task, enumerate_pairs(mset))
        name = predictor.value
    else:
        if predictor not in PROXY_FIELDS:
            raise ValueError(f"unknown proxy {predictor!r}")
        scores = mset.proxy_matrix[:, PROXY_FIELDS.index(predictor)]
        records = _score_records(mset, scores, task, enumerate_pairs(mset))
        name = predictor
    return _bucketize(records, n_buckets, task, name)


class Factor(enum.Enum):
    OBJECTIVE = "objective"
    DATA_CONFIG = "data_config"
    TAGGING_AND_LENGTH = "tag_length"


def _factor_key(record, factor: Factor):
    cfg = record.config
    if factor == Factor.OBJECTIVE:
        return cfg.objective.value
    if factor == Factor.DATA_CONFIG:
        return cfg.data_config.value
    tagging = "Tag" if cfg.domain_tagging else "NoTag"
    return f"{tagging}-{cfg.length_filter.value.capitalize()}"


def _other_key(record, factor: Factor):
    cfg = record.config
    fields = {
        "objective": cfg.objective,
        "data_config": cfg.data_config,
        "learning_rate": cfg.learning_rate,
        "domain_tagging": cfg.domain_tagging,
        "length_filter": cfg.length_filter,
    }
    if factor == Factor.OBJECTIVE:
        del fields["objective"]
    elif factor == Factor.DATA_CONFIG:
        del fields["data_config"]
    else:
        del fields["domain_tagging"]
        del fields["length_filter"]
    return tuple(fields.values())


@dataclass(frozen=True)
class GroupedAccuracy:
    factor: Factor
    proxy: str
    task: Task
    labels: tuple[str, ...]
    accuracy: np.ndarray  # (g, g), NaN where no qualifying pair
    counts: np.ndarray  # (g, g) int

    def __post_init__(self):
        for name in ("accuracy", "counts"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def grouped_accuracy(mset: ModelSet, proxy: str, task: Task, factor: Factor) -> GroupedAccuracy:
    """Accuracy between config groups, over pairs that differ only in the
    grouping factor. Same-group cells are excluded (left NaN)."""
    if proxy not in PROXY_FIELDS:
        raise ValueError(f"unknown proxy {proxy!r}")
    labels = []
    for record in mset.records:
        key = _factor_key(record, factor)
        if key not in labels:
            labels.append(key)
    index = {label: i for i, label in enumerate(labels)}
    g = len(labels)
    scores = mset.proxy_matrix[:, PROXY_FIELDS.index(proxy)]
    cell_records: dict[tuple[int, int], list[PairRecord]] = {}
    ids = sorted(mset.ids)
    for a in range(len(ids)):
        for b in range(a + 1, len(ids)):
            ra, rb = mset.record(ids[a]), mset.record(ids[b])
            ka, kb = _factor_key(ra, factor), _factor_key(rb, factor)
            if ka == kb:
                continue
            if _other_key(ra, factor) != _other_key(rb, factor):
                continue
            recs = _score_records(mset, scores, task, [(ids[a], ids[b])])
            if not recs:
                continue  # tied true scores
            # symmetric cell: fold both orientations into one key
            key = (min(index[ka], index[kb]), max(index[ka], index[kb]))
            cell_records.setdefault(key, []).extend(recs)
    accuracy = np.full((g, g), np.nan)
    counts = np.zeros((g, g), dtype=int)
    for (i, j), recs in cell_records.items():
        value = float(np.mean([r.correct for r in recs]))
        accuracy[i, j] = accuracy[j, i] = value
        counts[i, j] = counts[j, i] = len(recs)
    return GroupedAccuracy(
        factor=factor, proxy=proxy, task=task,
        labels=tuple(labels), accuracy=accuracy, counts=counts,
    )
