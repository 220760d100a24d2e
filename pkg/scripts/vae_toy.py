"""Train the sequence VAE on the template toy corpus and print the loss curve.

    python3 scripts/vae_toy.py --epochs 500
"""
import argparse
import time

from ldavae.embedding import train_skipgram
from ldavae.synthetic import template_corpus
from ldavae.vae import TrainConfig, init_vae, train_vae


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--epochs", type=int, default=500)
    ap.add_argument("--lr", type=float, default=1e-3)
    ap.add_argument("--n-f", type=int, default=32)
    ap.add_argument("--hidden", type=int, default=32)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--every", type=int, default=50, help="print every N epochs")
    args = ap.parse_args()

    corpus = template_corpus(seed=args.seed)
    E = train_skipgram(corpus, w=32, epochs=20, seed=args.seed)
    model = init_vae(corpus.vocab.size, 32, corpus.max_len, args.hidden, args.n_f, seed=args.seed)
    t = time.perf_counter()
    model = train_vae(corpus, E, model, TrainConfig(epochs=args.epochs, lr=args.lr, seed=args.seed))
    for rec in model.history:
        if rec["epoch"] == 1 or rec["epoch"] % args.every == 0:
            print(f"epoch {rec['epoch']:4d}  loss {rec['loss']:.4f}  ce {rec['ce']:.4f}  kl {rec['kl']:.4f}  "
                  f"bce {rec['bc']:.4f}  acc {rec['accuracy']:.3f}")
    h = model.history
    perfect = next((r["epoch"] for r in h if r["accuracy"] == 1.0), None)
    print(f"final/first loss {h[-1]['loss'] / h[0]['loss']:.3f}; accuracy 1.0 first at epoch {perfect}; "
          f"{time.perf_counter() - t:.1f}s")


if __name__ == "__main__":
    main()
