"""Unsupervised baselines: how well does each proxy order model pairs?

For every pair of models we ask whether the proxy puts them in the same
order as their true post-finetuning scores. Pairs with exactly equal true
scores are excluded; a proxy that cannot separate a pair earns half credit.
Aggregated baselines combine min-max normalized proxies with simple
arithmetic before comparing.
"""

from ltcrank import (
    Combo,
    Normalization,
    Task,
    combo_accuracy,
    load_canonical,
    normalize_proxies,
    proxy_accuracy,
)
from ltcrank.dataset import PROXY_FIELDS


def main():
    corpus = load_canonical()
    normed = normalize_proxies(corpus, Normalization.MINMAX)

    header = f"{'predictor':26s}" + "".join(f"{t.value:>10s}" for t in Task)
    print(header)
    print("-" * len(header))
    for proxy in PROXY_FIELDS:
        cells = [proxy_accuracy(corpus, proxy, t) for t in Task]
        print(f"{proxy:26s}" + "".join(f"{c:10.3f}" for c in cells))
    for combo in Combo:
        cells = [combo_accuracy(normed, combo, t) for t in Task]
        print(f"{combo.value:26s}" + "".join(f"{c:10.3f}" for c in cells))

    print("\nnotes:")
    print("- conventional perplexity (ppl_clm) orders pairs WORSE than chance")
    print("- kshot_rag is the strongest single proxy on every task")
    print("- simple combinations help on the commonsense task but are capped")


if __name__ == "__main__":
    main()
