"""Tour of the bundled 50-model corpus.

Each record describes one pretrained model variant: its pretraining
configuration (objective, data mixture, learning rate, tagging, length
filter), five proxy scores measured at the end of pretraining, and three
task scores measured after finetuning. Perplexity proxies are stored
inverted (1/PPL) so that higher is always better.
"""

from ltcrank import Normalization, load_canonical, normalize_proxies
from ltcrank.dataset import PROXY_FIELDS, SFT_FIELDS, invert_perplexity


def main():
    corpus = load_canonical()
    print(f"loaded {len(corpus)} model records, ids {corpus.ids[0]}..{corpus.ids[-1]}\n")

    record = corpus.record(25)
    print("record 25 (the strongest finetuned model on two of three tasks):")
    print(f"  objective={record.config.objective.value}, "
          f"data={record.config.data_config.value}, lr={record.config.learning_rate}")
    for field in PROXY_FIELDS:
        print(f"  proxy {field:10s} = {getattr(record.proxies, field)}")
    for field in SFT_FIELDS:
        print(f"  score {field:10s} = {getattr(record.sft, field)}")

    raw_ppl = 2.5316
    print(f"\ninverting a raw perplexity: {raw_ppl} -> {invert_perplexity(raw_ppl):.4f}")
    print("(the corpus stores exactly these inverted values)")

    normed = normalize_proxies(corpus, Normalization.MINMAX)
    col = normed.proxy_matrix[:, PROXY_FIELDS.index("kshot_rag")]
    print("\nafter min-max normalization the kshot_rag column spans "
          f"[{col.min():.1f}, {col.max():.1f}]")
    print("normalization never reorders a proxy column, so every pairwise")
    print("comparison keeps its sign; scores after finetuning are untouched.")


if __name__ == "__main__":
    main()
