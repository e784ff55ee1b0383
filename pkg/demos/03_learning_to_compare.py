"""Supervised comparators: train a classifier to pick the pair winner.

Every model pair becomes a training example: 20 features (difference,
product, and both raw values for each of the five proxies) with a binary
label saying whether the left model finetunes better. The protocol runs 20
random 60/40 model splits; training pairs come only from train models and
evaluation pairs only from held-out models, so no model is seen twice.

Also demonstrates cross-task transfer: a comparator trained on one task's
labels evaluated against another task's outcomes.
"""

from ltcrank import Backbone, Task, run_matrix
from ltcrank.dataset import load_canonical


def main():
    corpus = load_canonical()
    task = Task.SFT_CBQA

    print(f"target task: {task.value}, 20 runs, seeds 0..19\n")
    for backbone in (Backbone.LOGISTIC, Backbone.MLP, Backbone.GBDT):
        result = run_matrix(corpus, backbone, task, eval_tasks=(task,), seeds=range(20))
        report = result.report(task)
        print(f"{backbone.value:9s} accuracy {report.mean:.3f} +- {report.std:.3f} "
              f"({report.n_pairs[0]} test pairs per run)")

    print("\ncross-task transfer with the boosted-tree comparator:")
    gbdt = {t: run_matrix(corpus, Backbone.GBDT, t, seeds=range(20)) for t in Task}
    corner = "train / eval"
    print(f"{corner:14s}" + "".join(f"{t.value:>10s}" for t in Task))
    for src in Task:
        cells = [gbdt[src].report(tgt).mean for tgt in Task]
        print(f"{src.value:14s}" + "".join(f"{c:10.3f}" for c in cells))
    print("\na comparator trained on one task transfers to the others with")
    print("only a small accuracy drop (compare each column to its diagonal).")


if __name__ == "__main__":
    main()
