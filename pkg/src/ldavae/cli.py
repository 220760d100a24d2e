"""Command-line driver for the pipeline: every stage reads and writes files in one run directory."""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .config import ConfigError, PipelineConfig
from .corpus import Corpus, TokenizerConfig, Vocabulary, build_vocabulary, load_csv, smoten_oversample, tokenize
from .dimred import pca_project, tsne_project
from .embedding import load_word2vec_text, save_word2vec_text, train_skipgram
from .evaluation import ablate, evaluate, split_indices
from .features import concat_features, fit_classifier, load_classifier, load_features_csv, save_classifier, save_features_csv
from .interpret import explain
from .topic import bow_corpus, fit_svi, load_lda, local_step, save_lda, score_num_topics, pick_best_k
from .vae import TrainConfig, extract_latent_features, init_vae, load_vae, save_vae, train_vae

log = logging.getLogger("ldavae")

# artifact file -> command that produces it
PRODUCERS = {
    "corpus.json": "preprocess", "embeddings.txt": "train-embeddings", "vae.json": "train-vae",
    "lda.json": "train-lda", "select_k.json": "select-k", "features.csv": "featurize",
    "classifier.json": "classify", "predictions.csv": "classify", "metrics.json": "evaluate",
    "ablation.csv": "ablate", "ablation.json": "ablate", "explanation.json": "explain",
    "projection.csv": "project", "projection.json": "project",
}


class StageError(RuntimeError):
    pass


class MissingArtifactError(StageError):
    pass


class Run:
    """A run directory bound to a config."""

    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.out = Path(cfg.out_dir)
        self.out.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        return self.out / name

    def need(self, name: str) -> Path:
        p = self.path(name)
        if not p.is_file():
            raise MissingArtifactError(f"missing artifact {name} (produced by `{PRODUCERS[name]}`)")
        return p

    def record(self, stage: str, names) -> None:
        mpath = self.path("manifest.json")
        manifest = json.loads(mpath.read_text()) if mpath.is_file() else {}
        h = self.cfg.digest()
        if manifest.get("config_hash") != h:
            manifest = {"artifacts": {}}
        manifest.update({"config_hash": h, "seed": self.cfg.seed, "config": self.cfg.to_dict()})
        for n in names:
            manifest["artifacts"][n] = {"sha256": _sha256(self.path(n)), "stage": stage}
        mpath.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_json(path: Path, blob) -> None:
    path.write_text(json.dumps(blob, indent=1, sort_keys=True) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# corpus artifact: full corpus (originals then synthetic minority docs) + split

def _save_corpus(path: Path, corpus: Corpus, train, test, n_original: int) -> None:
    _write_json(path, {"vocab": corpus.vocab.tokens(), "docs": [list(d) for d in corpus.docs],
                       "labels": corpus.labels.tolist(), "max_len": corpus.max_len,
                       "n_original": n_original, "train": [int(i) for i in train],
                       "test": [int(i) for i in test]})


def _load_corpus(path: Path):
    blob = json.loads(path.read_text(encoding="utf-8"))
    corpus = Corpus([tuple(d) for d in blob["docs"]], np.array(blob["labels"]),
                    Vocabulary.from_tokens(blob["vocab"]), blob["max_len"])
    return corpus, np.array(blob["train"], dtype=np.int64), np.array(blob["test"], dtype=np.int64)


def _check_digest(kind: str, digest: str, corpus: Corpus) -> None:
    if digest and digest != corpus.vocab.digest():
        raise StageError(f"{kind} artifact was trained on a different vocabulary; rerun upstream stages")


# ---------------------------------------------------------------------------
# stages

def cmd_preprocess(run: Run) -> list[str]:
    c = run.cfg
    raw = load_csv(c.data.path, c.data.text_column, c.data.label_column)
    if not raw:
        raise StageError(f"{c.data.path} holds no documents")
    tok_cfg = TokenizerConfig.from_file(c.data.stopwords) if c.data.stopwords else TokenizerConfig()
    token_docs = [tokenize(d.text, tok_cfg) for d in raw]
    vocab = build_vocabulary(token_docs, c.data.min_count)
    labels = np.array([d.label for d in raw])
    corpus = Corpus([vocab.encode(t) for t in token_docs], labels, vocab, c.data.max_len)
    train, test = split_indices(labels, c.split.train_fraction, c.split.stratified, c.seed)
    n = corpus.n_docs
    if c.data.oversample:
        balanced = smoten_oversample(corpus.subset(train), c.data.smote_k, c.seed)
        extra = balanced.docs[len(train):]
        corpus = Corpus(corpus.docs + extra, np.concatenate([labels, balanced.labels[len(train):]]),
                        vocab, corpus.max_len)
        train = np.concatenate([train, np.arange(n, n + len(extra))])
        log.info("oversampling added %d synthetic training documents", len(extra))
    _save_corpus(run.path("corpus.json"), corpus, train, test, n)
    return ["corpus.json"]


def cmd_train_embeddings(run: Run) -> list[str]:
    c = run.cfg.embedding
    corpus, train, _ = _load_corpus(run.need("corpus.json"))
    if c.source == "load":
        E = load_word2vec_text(c.path, corpus.vocab, run.cfg.seed)
    else:
        E = train_skipgram(corpus.subset(train), c.w, c.window, c.negatives, c.epochs, c.lr, run.cfg.seed)
    save_word2vec_text(run.path("embeddings.txt"), E, corpus.vocab)
    return ["embeddings.txt"]


def _load_embeddings(run: Run, corpus: Corpus):
    return load_word2vec_text(run.need("embeddings.txt"), corpus.vocab)


def cmd_train_vae(run: Run) -> list[str]:
    c = run.cfg.vae
    corpus, train, _ = _load_corpus(run.need("corpus.json"))
    E = _load_embeddings(run, corpus)
    model = init_vae(corpus.vocab.size, E.dim, corpus.max_len, c.hidden, c.n_f, run.cfg.seed, corpus.vocab.digest())
    model = train_vae(corpus.subset(train), E, model,
                      TrainConfig(c.epochs, c.batch_size, c.lr, run.cfg.seed, c.clip))
    save_vae(model, run.path("vae.json"))
    return ["vae.json"]


def _lda_kwargs(run: Run) -> dict:
    c = run.cfg.lda
    return dict(alpha=c.alpha, eta=c.eta, batch_size=c.batch_size, tau0=c.tau0, kappa=c.kappa,
                passes=c.passes, restarts=c.restarts)


def cmd_select_k(run: Run) -> list[str]:
    c = run.cfg.lda
    corpus, train, _ = _load_corpus(run.need("corpus.json"))
    scores = score_num_topics(bow_corpus(corpus.subset(train)), c.candidates, c.validation_fraction,
                              run.cfg.seed, corpus.vocab.size, c.top_n, **_lda_kwargs(run))
    _write_json(run.path("select_k.json"), {"scores": {str(k): v for k, v in scores.items()},
                                            "best": pick_best_k(scores)})
    return ["select_k.json"]


def cmd_train_lda(run: Run) -> list[str]:
    c = run.cfg.lda
    corpus, train, _ = _load_corpus(run.need("corpus.json"))
    K = c.K
    if K is None:
        K = json.loads(run.need("select_k.json").read_text())["best"]
    model = fit_svi(bow_corpus(corpus.subset(train)), K, corpus.vocab.size, seed=run.cfg.seed,
                    vocab_digest=corpus.vocab.digest(), **_lda_kwargs(run))
    save_lda(model, run.path("lda.json"))
    return ["lda.json"]


def cmd_featurize(run: Run) -> list[str]:
    corpus, _, _ = _load_corpus(run.need("corpus.json"))
    vae = load_vae(run.need("vae.json"))
    lda = load_lda(run.need("lda.json"))
    _check_digest("VAE", vae.vocab_digest, corpus)
    _check_digest("LDA", lda.vocab_digest, corpus)
    E = _load_embeddings(run, corpus)
    mu = extract_latent_features(vae, corpus, E)
    gamma = local_step(lda, bow_corpus(corpus))
    fm = concat_features(mu, gamma / gamma.sum(axis=1, keepdims=True))
    save_features_csv(run.path("features.csv"), fm, corpus.labels)
    return ["features.csv"]


def _features(run: Run):
    fm, labels = load_features_csv(run.need("features.csv"))
    _, train, test = _load_corpus(run.need("corpus.json"))
    if labels is None or len(labels) < max(train.max(), test.max()) + 1:
        raise StageError("features.csv does not match corpus.json; rerun `featurize`")
    return fm, labels, train, test


def cmd_classify(run: Run) -> list[str]:
    c = run.cfg.classifier
    fm, labels, train, test = _features(run)
    X = fm.span(c.features)
    model = fit_classifier(c.kind, X[train], labels[train], c.hyper or None, run.cfg.seed)
    save_classifier(model, run.path("classifier.json"))
    pred, score = model.predict(X[test])
    lines = ["index,label,prediction,score"]
    lines += [f"{i},{labels[i]},{p},{float(s)!r}" for i, p, s in zip(test, pred, score)]
    run.path("predictions.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return ["classifier.json", "predictions.csv"]


def cmd_evaluate(run: Run) -> list[str]:
    c = run.cfg.classifier
    fm, labels, _, test = _features(run)
    model = load_classifier(run.need("classifier.json"))
    pred, _ = model.predict(fm.span(c.features)[test])
    report = evaluate(labels[test], pred)
    _write_json(run.path("metrics.json"), {"classifier": model.kind, "features": c.features, **report.as_dict()})
    return ["metrics.json"]


def cmd_ablate(run: Run) -> list[str]:
    fm, labels, train, test = _features(run)
    hyper = {run.cfg.classifier.kind.upper(): run.cfg.classifier.hyper} if run.cfg.classifier.hyper else None
    table = ablate(labels, fm.lda, fm.vae, seed=run.cfg.seed, split=(train, test), hyper=hyper,
                   dataset=run.cfg.data.name)
    run.path("ablation.csv").write_text(table.to_csv(), encoding="utf-8")
    run.path("ablation.json").write_text(table.to_json() + "\n", encoding="utf-8")
    return ["ablation.csv", "ablation.json"]


def cmd_explain(run: Run) -> list[str]:
    c = run.cfg.explain
    lda = load_lda(run.need("lda.json"))
    corpus, train, test = _load_corpus(run.need("corpus.json"))
    _check_digest("LDA", lda.vocab_digest, corpus)
    gamma = local_step(lda, bow_corpus(corpus.subset(train)))
    docs = [corpus.docs[i] for i in test[:c.documents]]
    report = explain(lda, gamma / gamma.sum(axis=1, keepdims=True), corpus.labels[train], corpus.vocab,
                     c.top_m, c.n_words, docs)
    run.path("explanation.json").write_text(report.to_json() + "\n", encoding="utf-8")
    return ["explanation.json"]


def cmd_project(run: Run) -> list[str]:
    c = run.cfg.project
    fm, labels, _, _ = _features(run)
    X = fm.span(c.features)
    if c.method == "pca":
        proj = pca_project(X)
    else:
        proj = tsne_project(X, c.perplexity, c.iterations, c.lr, run.cfg.seed)
    run.path("projection.csv").write_text(proj.to_csv(labels), encoding="utf-8")
    run.path("projection.json").write_text(proj.to_json() + "\n", encoding="utf-8")
    return ["projection.csv", "projection.json"]


COMMANDS = {
    "preprocess": cmd_preprocess, "train-embeddings": cmd_train_embeddings, "train-vae": cmd_train_vae,
    "select-k": cmd_select_k, "train-lda": cmd_train_lda, "featurize": cmd_featurize,
    "classify": cmd_classify, "evaluate": cmd_evaluate, "ablate": cmd_ablate,
    "explain": cmd_explain, "project": cmd_project,
}


def pipeline_order(cfg: PipelineConfig) -> list[str]:
    order = list(COMMANDS)
    if cfg.lda.K is not None:
        order.remove("select-k")
    return order


# ---------------------------------------------------------------------------
# entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ldavae", description="Topic + sequence-VAE fake news pipeline.")
    parser.add_argument("command", choices=list(COMMANDS) + ["all"])
    parser.add_argument("--config", help="JSON config file (defaults apply when omitted)")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--out", help="override the output directory")
    return parser


def _setup_logging() -> None:
    level = os.environ.get("LDAVAE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def _fail(stage: str, exc: BaseException, code: int) -> int:
    err = {"error": {"stage": stage, "type": type(exc).__name__, "cause": str(exc)}}
    print(json.dumps(err, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging()
    try:
        cfg = cfgmod.load_config(args.config) if args.config else PipelineConfig()
        if args.seed is not None:
            cfg.seed = args.seed
        if args.out is not None:
            cfg.out_dir = args.out
        cfgmod.validate(cfg, need_data=args.command in ("preprocess", "all"))
    except (ConfigError, TypeError) as exc:
        return _fail("config", exc, 2)

    run = Run(cfg)
    stages = pipeline_order(cfg) if args.command == "all" else [args.command]
    for stage in stages:
        try:
            log.info("running %s", stage)
            written = COMMANDS[stage](run)
            run.record(stage, written)
        except Exception as exc:  # every failure becomes a structured exit
            log.debug("stage %s failed", stage, exc_info=True)
            return _fail(stage, exc, 1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
