"""Planted-topic recovery and topic-count selection on corpora drawn from the LDA generative model.

    python3 scripts/planted_topics.py --seeds 10
"""
import argparse
import time

import numpy as np

from ldavae.topic import bow_corpus, fit_svi, match_topics, sample_corpus, score_num_topics, pick_best_k


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--K", type=int, default=3)
    ap.add_argument("--V", type=int, default=30)
    ap.add_argument("--docs", type=int, default=500)
    ap.add_argument("--length", type=int, default=50)
    ap.add_argument("--alpha", type=float, default=0.1)
    ap.add_argument("--eta", type=float, default=0.05)
    ap.add_argument("--candidates", type=int, nargs="+", default=[3, 30])
    ap.add_argument("--seeds", type=int, default=5)
    args = ap.parse_args()

    hits, cosines = 0, []
    for seed in range(args.seeds):
        t = time.perf_counter()
        truth = sample_corpus(args.alpha, args.eta, args.K, args.V, args.docs, args.length, seed=seed)
        bows = bow_corpus(truth.docs)
        model = fit_svi(bows, args.K, vocab_size=args.V, seed=seed)
        _, sims = match_topics(model.beta(), truth.beta)
        scores = score_num_topics(bows, args.candidates, vocab_size=args.V, seed=seed)
        best = pick_best_k(scores)
        hits += best == args.K
        cosines.append(sims.mean())
        shown = " ".join(f"K={k}:{v:.2f}" for k, v in scores.items())
        print(f"seed {seed}: mean cosine {sims.mean():.4f}  coherence {shown}  -> K={best}  "
              f"({time.perf_counter() - t:.1f}s)")
    print(f"mean cosine {np.mean(cosines):.4f}; true K selected in {hits}/{args.seeds} seeds")


if __name__ == "__main__":
    main()
