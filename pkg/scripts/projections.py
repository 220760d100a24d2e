"""PCA and t-SNE projections of a feature CSV (as written by `ldavae featurize`) or of two Gaussian blobs.

    python3 scripts/projections.py --features runs/toy/features.csv --out-prefix toy
"""
import argparse

from ldavae.dimred import pca_project, tsne_project
from ldavae.features import load_features_csv
from ldavae.synthetic import gaussian_blobs


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--features", help="features.csv; defaults to synthetic blobs")
    ap.add_argument("--span", choices=["VAE", "LDA", "LDAVAE"], default="LDAVAE")
    ap.add_argument("--perplexity", type=float, default=30.0)
    ap.add_argument("--iterations", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out-prefix", default="projection")
    args = ap.parse_args()

    if args.features:
        fm, labels = load_features_csv(args.features)
        X = fm.span(args.span)
    else:
        X, labels = gaussian_blobs(seed=args.seed)
    for name, proj in (("pca", pca_project(X)),
                       ("tsne", tsne_project(X, args.perplexity, args.iterations, seed=args.seed))):
        path = f"{args.out_prefix}_{name}.csv"
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(proj.to_csv(labels))
        extra = (f"explained variance ratio {proj.meta['explained_variance_ratio'].round(4).tolist()}"
                 if name == "pca" else f"final KL {proj.meta['kl']:.4f}")
        print(f"{name}: {len(X)} points -> {path}; {extra}")


if __name__ == "__main__":
    main()
