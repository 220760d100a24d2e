"""Write the synthetic topic-XOR-order corpus as a text,label CSV for the CLI.

    python3 scripts/make_toy_dataset.py configs/toy.csv --docs 200
"""
import argparse

from ldavae.synthetic import write_text_csv, xor_corpus


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("path")
    ap.add_argument("--docs", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    corpus, _, _ = xor_corpus(n_docs=args.docs, seed=args.seed)
    write_text_csv(corpus, args.path)
    print(f"wrote {corpus.n_docs} documents ({corpus.vocab.size} word types) to {args.path}")


if __name__ == "__main__":
    main()
