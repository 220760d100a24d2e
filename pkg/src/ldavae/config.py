"""Pipeline configuration: nested dataclasses loaded from and dumped to JSON."""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .features import KINDS

FEATURE_SPANS = ("VAE", "LDA", "LDAVAE")


class ConfigError(ValueError):
    pass


@dataclass
class DataConfig:
    path: str = ""
    text_column: str = "text"
    label_column: str = "label"
    stopwords: str | None = None
    min_count: int = 1
    max_len: int = 0  # 0: longest document
    oversample: bool = False
    smote_k: int = 5
    name: str = "dataset"


@dataclass
class EmbeddingConfig:
    source: str = "train"  # "train" or "load"
    path: str | None = None
    w: int = 32
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    lr: float = 0.025


@dataclass
class VaeConfig:
    n_f: int = 32
    hidden: int = 32
    epochs: int = 20
    batch_size: int = 32
    lr: float = 1e-3
    clip: float = 5.0


@dataclass
class LdaConfig:
    K: int | None = 10  # None: choose from candidates by coherence
    candidates: list = field(default_factory=lambda: [8, 10, 16, 32, 64])
    alpha: float | None = None
    eta: float = 0.01
    batch_size: int = 64
    tau0: float = 1.0
    kappa: float = 0.7
    passes: int = 5
    restarts: int = 3
    top_n: int = 20
    validation_fraction: float = 0.2


@dataclass
class ClassifierConfig:
    kind: str = "RF"
    features: str = "LDAVAE"
    hyper: dict = field(default_factory=dict)


@dataclass
class SplitConfig:
    train_fraction: float = 0.9
    stratified: bool = True


@dataclass
class ExplainConfig:
    top_m: int = 5
    n_words: int = 20
    documents: int = 3


@dataclass
class ProjectConfig:
    method: str = "pca"  # "pca" or "tsne"
    features: str = "LDAVAE"
    perplexity: float = 30.0
    iterations: int = 1000
    lr: float = 200.0


@dataclass
class PipelineConfig:
    data: DataConfig = field(default_factory=DataConfig)
    embedding: EmbeddingConfig = field(default_factory=EmbeddingConfig)
    vae: VaeConfig = field(default_factory=VaeConfig)
    lda: LdaConfig = field(default_factory=LdaConfig)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    split: SplitConfig = field(default_factory=SplitConfig)
    explain: ExplainConfig = field(default_factory=ExplainConfig)
    project: ProjectConfig = field(default_factory=ProjectConfig)
    seed: int = 0
    out_dir: str = "runs"

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        """Hash of everything except the output directory."""
        d = self.to_dict()
        d.pop("out_dir")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


def _build(cls, blob, where: str):
    if not isinstance(blob, dict):
        raise ConfigError(f"{where}: expected an object")
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(blob) - set(names))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {unknown}")
    kwargs = {}
    for k, v in blob.items():
        sub = names[k].default_factory if names[k].default_factory is not dataclasses.MISSING else None
        if sub is not None and dataclasses.is_dataclass(sub):
            kwargs[k] = _build(sub, v, f"{where}.{k}")
        else:
            kwargs[k] = v
    return cls(**kwargs)


def config_from_dict(blob: dict) -> PipelineConfig:
    return _build(PipelineConfig, blob, "config")


def load_config(path, base_dir=None) -> PipelineConfig:
    """Read a JSON config; relative data paths resolve against the config's directory."""
    path = Path(path)
    try:
        blob = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    cfg = config_from_dict(blob)
    base = Path(base_dir) if base_dir is not None else path.parent
    for holder, attr in ((cfg.data, "path"), (cfg.data, "stopwords"), (cfg.embedding, "path")):
        v = getattr(holder, attr)
        if v and not Path(v).is_absolute():
            setattr(holder, attr, str(base / v))
    return cfg


def validate(cfg: PipelineConfig, need_data: bool = True) -> None:
    problems = []

    def check(ok, msg):
        if not ok:
            problems.append(msg)

    if need_data:
        check(bool(cfg.data.path) and Path(cfg.data.path).is_file(), f"data.path {cfg.data.path!r} does not exist")
    check(cfg.data.stopwords is None or Path(cfg.data.stopwords).is_file(),
          f"data.stopwords {cfg.data.stopwords!r} does not exist")
    check(cfg.data.min_count >= 1, "data.min_count must be >= 1")
    check(cfg.data.max_len >= 0, "data.max_len must be >= 0")
    check(cfg.data.smote_k >= 1, "data.smote_k must be >= 1")
    check(cfg.embedding.source in ("train", "load"), "embedding.source must be 'train' or 'load'")
    if cfg.embedding.source == "load":
        check(bool(cfg.embedding.path) and Path(cfg.embedding.path).is_file(),
              f"embedding.path {cfg.embedding.path!r} does not exist")
    check(cfg.embedding.w >= 1, "embedding.w must be >= 1")
    check(min(cfg.vae.n_f, cfg.vae.hidden, cfg.vae.epochs, cfg.vae.batch_size) >= 1,
          "vae sizes and epochs must be >= 1")
    check(cfg.vae.lr > 0 and cfg.vae.clip > 0, "vae.lr and vae.clip must be positive")
    check(cfg.lda.K is None or cfg.lda.K >= 1, "lda.K must be >= 1 or null")
    check(cfg.lda.K is not None or len(cfg.lda.candidates) > 0, "lda.candidates must be non-empty when K is null")
    check(cfg.lda.eta > 0 and (cfg.lda.alpha is None or cfg.lda.alpha > 0), "lda.alpha and lda.eta must be positive")
    check(0.5 < cfg.lda.kappa <= 1.0, "lda.kappa must lie in (0.5, 1]")
    check(cfg.classifier.kind.upper() in KINDS, f"classifier.kind must be one of {KINDS}")
    check(cfg.classifier.features in FEATURE_SPANS, f"classifier.features must be one of {FEATURE_SPANS}")
    check(cfg.project.features in FEATURE_SPANS, f"project.features must be one of {FEATURE_SPANS}")
    check(0.0 < cfg.split.train_fraction < 1.0, "split.train_fraction must lie in (0, 1)")
    check(cfg.project.method in ("pca", "tsne"), "project.method must be 'pca' or 'tsne'")
    check(isinstance(cfg.seed, int) and not isinstance(cfg.seed, bool), "seed must be an integer")
    if problems:
        raise ConfigError("; ".join(problems))
