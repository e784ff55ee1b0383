"""Command-line front door: dataset ingestion, experiment execution, and
machine-readable reports (CSV + JSON) with static SVG renderings.

Subcommands: ingest, baselines, ltc, figures, rank, grouped. Every report
embeds a run manifest (command, resolved options, dataset checksum, seeds,
version). CSV and SVG outputs exclude the manifest timestamp so reruns with
identical inputs are byte-identical; JSON reports carry the full manifest.

Exit codes: 0 success, 1 runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .dataset import (
    PROXY_FIELDS,
    ModelSet,
    Normalization,
    canonical_checksum,
    load_canonical,
    normalize_proxies,
    parse_csv,
    write_csv,
)
from .evaluation import (
    Backbone,
    Combo,
    Factor,
    baseline_protocol,
    combo_accuracy,
    grouped_accuracy,
    proxy_accuracy,
    quantile_buckets,
    run_matrix,
)
from .gbdt import GbdtConfig, aggregate_importance, fit_gbdt, gain_importance
from .pairing import Task, build_pair_dataset
from .ranking import (
    ScorePredictor,
    borda_scores,
    held_out_recall_curves,
    rank_all_models,
    recall_curve,
)
from .svg import bar_chart, line_chart

DATASET_ENV_VAR = "LTCRANK_DATA"

TASK_TOKENS = {"cms": Task.SFT_CMS, "rag": Task.SFT_RAG, "cbqa": Task.SFT_CBQA}
TASK_NAMES = {v: k for k, v in TASK_TOKENS.items()}

BASELINE_ORDER = [
    "ppl_clm",
    "ppl_sc",
    "kshot_cms",
    "kshot_rag",
    "kshot_cbqa",
    Combo.MEAN_OF_FIVE,
    Combo.SC_PLUS_RAG,
    Combo.SC_PLUS_RAG_MINUS_CLM,
]


@dataclass(frozen=True)
class RunManifest:
    command: str
    config: dict
    dataset_checksum: str
    seeds: tuple[int, ...]
    version: str
    timestamp: str

    @classmethod
    def create(cls, command: str, config: dict, checksum: str, seeds=()) -> "RunManifest":
        return cls(
            command=command,
            config=dict(config),
            dataset_checksum=checksum,
            seeds=tuple(int(s) for s in seeds),
            version=__version__,
            timestamp=datetime.datetime.now(datetime.timezone.utc).isoformat(),
        )

    def full_dict(self) -> dict:
        return {
            "command": self.command,
            "config": self.config,
            "dataset_checksum": self.dataset_checksum,
            "seeds": list(self.seeds),
            "version": self.version,
            "timestamp": self.timestamp,
        }

    def stable_dict(self) -> dict:
        d = self.full_dict()
        del d["timestamp"]
        return d


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def write_csv_report(path: Path, header, rows, manifest: RunManifest) -> Path:
    lines = ["# manifest: " + json.dumps(manifest.stable_dict(), sort_keys=True)]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_json_report(path: Path, payload: dict, manifest: RunManifest) -> Path:
    doc = {"manifest": manifest.full_dict(), **payload}
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def write_svg(path: Path, content: str) -> Path:
    path.write_text(content, encoding="utf-8")
    return path


def _load_dataset(args) -> tuple[ModelSet, str, str]:
    """Returns (model set, sha-256 checksum, source description)."""
    path = args.dataset or os.environ.get(DATASET_ENV_VAR)
    if path:
        mset = parse_csv(path)
        checksum = hashlib.sha256(Path(path).read_bytes()).hexdigest()
        return mset, checksum, str(path)
    return load_canonical(), canonical_checksum(), "canonical"


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _norm(args) -> Normalization:
    return Normalization(args.normalization)


def _parse_task_list(text: str) -> list[Task]:
    tokens = [t for t in text.split(",") if t.strip()]
    if not tokens:
        raise argparse.ArgumentTypeError("task list is empty")
    tasks = []
    for token in tokens:
        token = token.strip().lower()
        if token not in TASK_TOKENS:
            raise argparse.ArgumentTypeError(
                f"unknown task {token!r}; choose from {sorted(TASK_TOKENS)}"
            )
        tasks.append(TASK_TOKENS[token])
    return tasks


def _parse_predictor_list(text: str) -> list[str]:
    tokens = [t.strip().lower() for t in text.split(",") if t.strip()]
    if not tokens:
        raise argparse.ArgumentTypeError("predictor list is empty")
    allowed = set(PROXY_FIELDS) | {"gbdt", "logistic", "mlp"}
    for token in tokens:
        if token not in allowed:
            raise argparse.ArgumentTypeError(
                f"unknown predictor {token!r}; choose from {sorted(allowed)}"
            )
    return tokens


def _baseline_cell(mset_raw, mset_norm, predictor, task: Task) -> float:
    if isinstance(predictor, Combo):
        return combo_accuracy(mset_norm, predictor, task)
    return proxy_accuracy(mset_raw, predictor, task)


def cmd_ingest(args) -> int:
    mset, checksum, source = _load_dataset(args)
    out = _out_dir(args)
    manifest = RunManifest.create(
        "ingest", {"dataset": source, "emit": args.emit or ""}, checksum
    )
    payload = {
        "source": source,
        "records": len(mset),
        "ids": list(mset.ids),
        "normalization": mset.normalization.value,
    }
    write_json_report(out / "ingest_report.json", payload, manifest)
    if args.emit:
        write_csv(mset, args.emit)
    print(f"ingested {len(mset)} records from {source} (sha256 {checksum[:12]}...)")
    return 0


def cmd_baselines(args) -> int:
    mset, checksum, source = _load_dataset(args)
    out = _out_dir(args)
    tasks = args.task or list(Task)
    norm = _norm(args)
    mset_norm = normalize_proxies(mset, norm)
    manifest = RunManifest.create(
        "baselines",
        {
            "dataset": source,
            "tasks": [TASK_NAMES[t] for t in tasks],
            "normalization": norm.value,
            "per_run": args.per_run,
        },
        checksum,
        seeds=range(args.seed_base, args.seed_base + args.runs) if args.per_run else (),
    )
    if args.per_run:
        # split-level mode: each baseline scored on the protocol's test pairs
        seeds = range(args.seed_base, args.seed_base + args.runs)
        header = ["predictor"] + [f"{t.value}_{stat}" for t in tasks for stat in ("mean", "std")]
        rows = []
        table = {}
        for predictor in BASELINE_ORDER:
            name = predictor.value if isinstance(predictor, Combo) else predictor
            cells = []
            stats = {}
            for task in tasks:
                report = baseline_protocol(mset, predictor, task, seeds=seeds, normalization=norm)
                cells.extend([report.mean, report.std])
                stats[task.value] = {"mean": report.mean, "std": report.std}
            rows.append([name, *cells])
            table[name] = stats
        write_csv_report(out / "baselines_per_run.csv", header, rows, manifest)
        write_json_report(out / "baselines_per_run.json", {"accuracy": table}, manifest)
        print(f"wrote {out / 'baselines_per_run.csv'}")
        return 0
    header = ["predictor"] + [t.value for t in tasks]
    rows = []
    table = {}
    for predictor in BASELINE_ORDER:
        name = predictor.value if isinstance(predictor, Combo) else predictor
        cells = [_baseline_cell(mset, mset_norm, predictor, t) for t in tasks]
        rows.append([name, *cells])
        table[name] = dict(zip((t.value for t in tasks), cells))
    write_csv_report(out / "table1.csv", header, rows, manifest)
    write_json_report(out / "table1.json", {"accuracy": table}, manifest)
    print(f"wrote {out / 'table1.csv'} and table1.json")
    return 0


def cmd_ltc(args) -> int:
    mset, checksum, source = _load_dataset(args)
    out = _out_dir(args)
    backbone = Backbone(args.backbone)
    train_task = TASK_TOKENS[args.train]
    eval_task = TASK_TOKENS[args.eval]
    seeds = range(args.seed_base, args.seed_base + args.runs)
    norm = _norm(args)
    result = run_matrix(
        mset,
        backbone,
        train_task,
        eval_tasks=(eval_task,),
        seeds=seeds,
        augment_flip=args.augment_flip,
        feature_normalization=norm,
        jobs=args.jobs,
    )
    report = result.report(eval_task)
    manifest = RunManifest.create(
        "ltc",
        {
            "dataset": source,
            "backbone": backbone.value,
            "train": args.train,
            "eval": args.eval,
            "runs": args.runs,
            "augment_flip": args.augment_flip,
            "normalization": norm.value,
        },
        checksum,
        seeds=seeds,
    )
    stem = f"ltc_{backbone.value}_{args.train}_{args.eval}"
    rows = [
        [run.seed, len(run.evaluations[eval_task][1]), run.evaluations[eval_task][0]]
        for run in result.runs
    ]
    write_csv_report(out / f"{stem}.csv", ["seed", "n_pairs", "accuracy"], rows, manifest)
    payload = {
        "mean": report.mean,
        "std": report.std,
        "per_run": list(report.per_run),
        "n_pairs": list(report.n_pairs),
        "failures": [{"seed": f.seed, "reason": f.reason} for f in result.failures],
    }
    write_json_report(out / f"{stem}.json", payload, manifest)
    models_dir = out / "models"
    models_dir.mkdir(exist_ok=True)
    for run in result.runs:
        dump = models_dir / f"{backbone.value}_{args.train}_seed{run.seed}.json"
        dump.write_text(run.model.to_json(), encoding="utf-8")
    if backbone == Backbone.GBDT:
        importance = aggregate_importance(result.models())
        imp_rows = [
            [proxy, importance.per_proxy_gain[i], importance.normalized[i]]
            for i, proxy in enumerate(PROXY_FIELDS)
        ]
        write_csv_report(
            out / f"importance_{backbone.value}_{args.train}.csv",
            ["proxy", "gain", "normalized"],
            imp_rows,
            manifest,
        )
        write_json_report(
            out / f"importance_{backbone.value}_{args.train}.json",
            {"importance": importance.as_dict()},
            manifest,
        )
    print(f"{stem}: mean={report.mean:.4f} std={report.std:.4f} over {len(report.per_run)} runs")
    return 0


def _bucket_series(mset, protocol_results, predictors, task):
    series = []
    for predictor in predictors:
        if predictor in ("gbdt", "logistic", "mlp"):
            source = protocol_results[(task, predictor)]
            label = f"{predictor}-ltc"
        else:
            source = predictor
            label = predictor
        report = quantile_buckets(mset, source, task)
        series.append((label, report))
    return series


def cmd_figures(args) -> int:
    mset, checksum, source = _load_dataset(args)
    out = _out_dir(args)
    tasks = args.task or list(Task)
    norm = _norm(args)
    manifest = RunManifest.create(
        "figures",
        {
            "dataset": source,
            "which": args.which,
            "tasks": [TASK_NAMES[t] for t in tasks],
            "predictors": args.predictor or [],
            "normalization": norm.value,
        },
        checksum,
        seeds=range(args.seed_base, args.seed_base + args.runs),
    )
    written = []
    if args.which == "buckets":
        predictors = args.predictor or ["ppl_clm", "kshot_rag", "gbdt"]
        needs_protocol = [p for p in predictors if p in ("gbdt", "logistic", "mlp")]
        protocol_results = {}
        for task in tasks:
            for name in needs_protocol:
                protocol_results[(task, name)] = run_matrix(
                    mset,
                    Backbone(name),
                    task,
                    eval_tasks=(task,),
                    seeds=range(args.seed_base, args.seed_base + args.runs),
                    feature_normalization=norm,
                    jobs=args.jobs,
                )
        for task in tasks:
            rows = []
            chart_series = []
            for label, report in _bucket_series(mset, protocol_results, predictors, task):
                accs = [b.accuracy for b in report.buckets]
                for i, b in enumerate(report.buckets, start=1):
                    rows.append([label, i, b.gap_min, b.gap_max, b.count, b.accuracy])
                chart_series.append((label, list(range(1, len(accs) + 1)), accs))
            name = TASK_NAMES[task]
            written.append(
                write_csv_report(
                    out / f"figure_buckets_{name}.csv",
                    ["predictor", "bucket", "gap_min", "gap_max", "n_pairs", "accuracy"],
                    rows,
                    manifest,
                )
            )
            written.append(
                write_svg(
                    out / f"figure_buckets_{name}.svg",
                    line_chart(
                        chart_series,
                        f"Reliability by true-gap quantile ({task.value})",
                        "gap quantile bucket",
                        "pairwise accuracy",
                        description=json.dumps(manifest.stable_dict(), sort_keys=True),
                    ),
                )
            )
    elif args.which == "recall":
        for task in tasks:
            name = TASK_NAMES[task]
            ranking_gbdt, _ = rank_all_models(
                mset, Backbone.GBDT, task, seed=args.seed_base, feature_normalization=norm
            )
            ranking_rag = borda_scores(ScorePredictor.for_proxy(mset, "kshot_rag"), mset)
            combo_pred = ScorePredictor.for_combo(
                normalize_proxies(mset, norm), Combo.MEAN_OF_FIVE
            )
            ranking_combo = borda_scores(combo_pred, mset)
            for k in (1, 5):
                rows = []
                chart_series = []
                for label, ranking in (
                    ("gbdt-ltc", ranking_gbdt),
                    ("kshot_rag", ranking_rag),
                    ("combine_five", ranking_combo),
                ):
                    curve = recall_curve(ranking, mset, task, k)
                    rows.extend([label, c, r] for c, r in curve)
                    chart_series.append((label, [c for c, _ in curve], [r for _, r in curve]))
                written.append(
                    write_csv_report(
                        out / f"figure_recall_top{k}_{name}.csv",
                        ["predictor", "cutoff", "recall"],
                        rows,
                        manifest,
                    )
                )
                written.append(
                    write_svg(
                        out / f"figure_recall_top{k}_{name}.svg",
                        line_chart(
                            chart_series,
                            f"Top-{k} recall vs cutoff ({task.value})",
                            "cutoff",
                            f"top-{k} recall",
                            description=json.dumps(manifest.stable_dict(), sort_keys=True),
                        ),
                    )
                )
    elif args.which == "grouped":
        factor = Factor(args.factor)
        proxies = [p for p in (args.predictor or ["ppl_clm", "ppl_sc", "kshot_rag"]) if p in PROXY_FIELDS]
        if not proxies:
            raise ValueError("grouped figures need at least one proxy predictor")
        for task in tasks:
            name = TASK_NAMES[task]
            rows = []
            cell_labels: list[str] = []
            per_proxy_values: dict[str, list[float]] = {p: [] for p in proxies}
            for proxy in proxies:
                grid = grouped_accuracy(mset, proxy, task, factor)
                for i in range(len(grid.labels)):
                    for j in range(i + 1, len(grid.labels)):
                        if grid.counts[i, j] == 0:
                            continue
                        label = f"{grid.labels[i]}|{grid.labels[j]}"
                        rows.append(
                            [proxy, grid.labels[i], grid.labels[j], grid.counts[i, j], grid.accuracy[i, j]]
                        )
                        if label not in cell_labels:
                            cell_labels.append(label)
                        per_proxy_values[proxy].append(float(grid.accuracy[i, j]))
            written.append(
                write_csv_report(
                    out / f"figure_grouped_{factor.value}_{name}.csv",
                    ["proxy", "group_a", "group_b", "n_pairs", "accuracy"],
                    rows,
                    manifest,
                )
            )
            if cell_labels:
                series = [(p, per_proxy_values[p]) for p in proxies]
                written.append(
                    write_svg(
                        out / f"figure_grouped_{factor.value}_{name}.svg",
                        bar_chart(
                            cell_labels,
                            series,
                            f"Accuracy by {factor.value} group pair ({task.value})",
                            "pairwise accuracy",
                            description=json.dumps(manifest.stable_dict(), sort_keys=True),
                        ),
                    )
                )
    elif args.which == "importance":
        rows = []
        series = []
        feature_set = normalize_proxies(mset, norm)
        for task in tasks:
            ds = build_pair_dataset(feature_set, task)
            model = fit_gbdt(ds.X, ds.y, GbdtConfig(seed=args.seed_base))
            importance = gain_importance(model)
            for i, proxy in enumerate(PROXY_FIELDS):
                rows.append([task.value, proxy, importance.normalized[i]])
            series.append((task.value, importance.normalized.tolist()))
        written.append(
            write_csv_report(
                out / "figure_importance.csv",
                ["task", "proxy", "normalized_gain"],
                rows,
                manifest,
            )
        )
        written.append(
            write_svg(
                out / "figure_importance.svg",
                bar_chart(
                    list(PROXY_FIELDS),
                    series,
                    "Normalized gain importance per proxy",
                    "normalized gain",
                    description=json.dumps(manifest.stable_dict(), sort_keys=True),
                ),
            )
        )
    for path in written:
        print(f"wrote {path}")
    return 0


def cmd_rank(args) -> int:
    mset, checksum, source = _load_dataset(args)
    out = _out_dir(args)
    backbone = Backbone(args.backbone)
    tasks = args.task or list(Task)
    norm = _norm(args)
    seeds = range(args.seed_base, args.seed_base + args.runs)
    manifest = RunManifest.create(
        "rank",
        {
            "dataset": source,
            "backbone": backbone.value,
            "tasks": [TASK_NAMES[t] for t in tasks],
            "k": args.k,
            "mode": args.mode,
            "normalization": norm.value,
        },
        checksum,
        seeds=seeds,
    )
    for task in tasks:
        name = TASK_NAMES[task]
        stem = f"rank_{backbone.value}_{name}_top{args.k}_{args.mode}"
        if args.mode == "all":
            ranking, _ = rank_all_models(
                mset, backbone, task, seed=args.seed_base, feature_normalization=norm
            )
            curve = recall_curve(ranking, mset, task, args.k)
            write_json_report(
                out / f"rank_{backbone.value}_{name}_borda.json",
                {
                    "scores": {str(i): s for i, s in ranking.scores.items()},
                    "ranking": list(ranking.ranking),
                },
                manifest,
            )
        else:
            result = run_matrix(
                mset,
                backbone,
                task,
                eval_tasks=(task,),
                seeds=seeds,
                feature_normalization=norm,
                jobs=args.jobs,
            )
            curve = held_out_recall_curves(result, mset, task, args.k)
        write_csv_report(out / f"{stem}.csv", ["cutoff", "recall"], curve, manifest)
        print(f"wrote {out / (stem + '.csv')}")
    return 0


def cmd_grouped(args) -> int:
    mset, checksum, source = _load_dataset(args)
    out = _out_dir(args)
    factor = Factor(args.factor)
    tasks = args.task or list(Task)
    proxies = args.proxy or ["ppl_clm", "ppl_sc", "kshot_rag"]
    manifest = RunManifest.create(
        "grouped",
        {
            "dataset": source,
            "factor": factor.value,
            "tasks": [TASK_NAMES[t] for t in tasks],
            "proxies": proxies,
        },
        checksum,
    )
    rows = []
    for task in tasks:
        for proxy in proxies:
            grid = grouped_accuracy(mset, proxy, task, factor)
            for i in range(len(grid.labels)):
                for j in range(i + 1, len(grid.labels)):
                    if grid.counts[i, j] == 0:
                        continue
                    rows.append(
                        [
                            task.value,
                            proxy,
                            grid.labels[i],
                            grid.labels[j],
                            grid.counts[i, j],
                            grid.accuracy[i, j],
                        ]
                    )
    path = write_csv_report(
        out / f"grouped_{factor.value}.csv",
        ["task", "proxy", "group_a", "group_b", "n_pairs", "accuracy"],
        rows,
        manifest,
    )
    print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ltcrank",
        description="Predict relative post-finetuning performance from pretraining proxies.",
    )
    parser.add_argument("--dataset", help=f"corpus CSV (default: ${DATASET_ENV_VAR} or bundled)")
    parser.add_argument("--out", default="reports", help="output directory (default: reports)")
    parser.add_argument("--seed-base", type=int, default=0, dest="seed_base")
    parser.add_argument("--jobs", type=int, default=1, help="parallel protocol runs")
    parser.add_argument(
        "--normalization",
        choices=[n.value for n in Normalization if n != Normalization.RAW],
        default=Normalization.MINMAX.value,
        help="proxy normalization for combos and supervised features",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a corpus CSV and report its checksum")
    p.add_argument("--emit", help="re-serialize the validated corpus to this path")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("baselines", help="individual and aggregated proxy accuracy table")
    p.add_argument("--task", type=_parse_task_list, help="comma-separated: cms,rag,cbqa")
    p.add_argument(
        "--per-run",
        action="store_true",
        dest="per_run",
        help="score baselines on each split's test pairs (mean and std) instead of all pairs",
    )
    p.add_argument("--runs", type=int, default=20)
    p.set_defaults(func=cmd_baselines)

    p = sub.add_parser("ltc", help="repeated-split supervised comparator protocol")
    p.add_argument("--backbone", required=True, choices=[b.value for b in Backbone])
    p.add_argument("--train", required=True, choices=sorted(TASK_TOKENS))
    p.add_argument("--eval", required=True, choices=sorted(TASK_TOKENS))
    p.add_argument("--runs", type=int, default=20)
    p.add_argument("--augment-flip", action="store_true", dest="augment_flip")
    p.set_defaults(func=cmd_ltc)

    p = sub.add_parser("figures", help="emit figure data as CSV plus an SVG rendering")
    p.add_argument("which", choices=["buckets", "recall", "grouped", "importance"])
    p.add_argument("--task", type=_parse_task_list, help="comma-separated: cms,rag,cbqa")
    p.add_argument("--predictor", type=_parse_predictor_list, help="comma-separated predictors")
    p.add_argument("--factor", choices=[f.value for f in Factor], default=Factor.OBJECTIVE.value)
    p.add_argument("--runs", type=int, default=20)
    p.set_defaults(func=cmd_figures)

    p = sub.add_parser("rank", help="Borda ranking and top-k recall curves")
    p.add_argument("--backbone", required=True, choices=[b.value for b in Backbone])
    p.add_argument("--task", type=_parse_task_list, help="comma-separated: cms,rag,cbqa")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--mode", choices=["all", "heldout"], default="all")
    p.add_argument("--runs", type=int, default=20)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("grouped", help="factor-grouped proxy accuracy matrices")
    p.add_argument("--factor", choices=[f.value for f in Factor], default=Factor.OBJECTIVE.value)
    p.add_argument("--task", type=_parse_task_list, help="comma-separated: cms,rag,cbqa")
    p.add_argument(
        "--proxy",
        type=lambda s: [t.strip() for t in s.split(",") if t.strip()],
        help="comma-separated proxy names",
    )
    p.set_defaults(func=cmd_grouped)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        return 1
    except Exception as exc:  # runtime errors map to exit code 1
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
