"""Run configuration and resource-directory loading for the command line."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .embeddings import load_clusters, load_vectors
from .features import Resources, load_pos_lexicon, load_stopwords, parse_groups
from .learn import TrainParams
from .lexicons import SentimentResources, expand_lexicon, load_lexicon
from .textproc import load_stem_rules

RESOURCE_ENV = "TROLLDETECT_RESOURCES"
DEMO_DIR = Path(__file__).parent / "resources"


def resource_dir() -> Path:
    return Path(os.environ.get(RESOURCE_ENV) or DEMO_DIR)


@dataclass
class RunConfig:
    """Flat run settings. Resource paths left empty resolve inside ``resources``."""

    corpus: str = ""
    resources: str = ""
    stopwords: str = ""
    stem_rules: str = ""
    emoticons: str = ""
    triggers: str = ""
    bad_words: list[str] = field(default_factory=list)
    mentions: list[str] = field(default_factory=list)
    gazetteers: list[str] = field(default_factory=list)
    sentiment_polarity: str = ""
    sentiment_opinion: str = ""
    sentiment_emotions: str = ""
    pos_lexicon: str = ""
    vectors: str = ""
    clusters: str = ""
    expand_bad_words: int = 3
    mask: str = "all"
    C: float = 1.0
    tol: float = 1e-6
    max_iter: int = 100
    folds: int = 10
    seed: int = 0
    output_dir: str = "."

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls.from_dict(data)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown config key(s): {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def params(self) -> TrainParams:
        return TrainParams(self.C, self.tol, self.max_iter, self.seed)

    @property
    def groups(self):
        return parse_groups(self.mask)

    def root(self) -> Path:
        return Path(self.resources) if self.resources else resource_dir()

    def _path(self, value: str, default: str) -> Path | None:
        if value:
            return Path(value)
        p = self.root() / default
        return p if p.exists() else None

    def _paths(self, values: list[str], subdir: str) -> list[Path]:
        if values:
            return [Path(v) for v in values]
        d = self.root() / subdir
        return sorted(d.glob("*.txt")) if d.is_dir() else []

    def resolved(self) -> dict[str, object]:
        return {
            "stopwords": self._path(self.stopwords, "stopwords.txt"),
            "stem_rules": self._path(self.stem_rules, "stem_rules.tsv"),
            "emoticons": self._path(self.emoticons, "emoticons.txt"),
            "triggers": self._path(self.triggers, "triggers.txt"),
            "bad_words": self._paths(self.bad_words, "bad_words"),
            "mentions": self._paths(self.mentions, "mentions"),
            "gazetteers": self._paths(self.gazetteers, "gazetteers"),
            "sentiment_polarity": self._path(self.sentiment_polarity, "sentiment/polarity.tsv"),
            "sentiment_opinion": self._path(self.sentiment_opinion, "sentiment/opinion.tsv"),
            "sentiment_emotions": self._path(self.sentiment_emotions, "sentiment/emotions.tsv"),
            "pos_lexicon": self._path(self.pos_lexicon, "pos_lexicon.tsv"),
            "vectors": Path(self.vectors) if self.vectors else None,
            "clusters": Path(self.clusters) if self.clusters else None,
        }

    def validate(self) -> None:
        missing = []
        if self.corpus and not Path(self.corpus).exists():
            missing.append(self.corpus)
        for key, value in self.resolved().items():
            for p in value if isinstance(value, list) else [value]:
                if p is not None and not Path(p).exists():
                    missing.append(f"{key}: {p}")
        if missing:
            raise FileNotFoundError("missing input(s): " + ", ".join(map(str, missing)))

    def load_resources(self) -> Resources:
        self.validate()
        r = self.resolved()
        sentiment = None
        if r["sentiment_polarity"] and r["sentiment_opinion"] and r["sentiment_emotions"]:
            sentiment = SentimentResources(
                load_lexicon(r["sentiment_polarity"], "polarity", "polarity"),
                load_lexicon(r["sentiment_emotions"], "emotion", "emotions"),
                load_lexicon(r["sentiment_opinion"], "polarity", "opinion"),
            )
        bad = [load_lexicon(p) for p in r["bad_words"]]
        vectors = load_vectors(r["vectors"]) if r["vectors"] else None
        if vectors is not None and self.expand_bad_words > 0:
            bad += [expand_lexicon(lex, vectors, self.expand_bad_words) for lex in list(bad)]
        return Resources(
            stopwords=load_stopwords(r["stopwords"]) if r["stopwords"] else None,
            stem_rules=load_stem_rules(r["stem_rules"]) if r["stem_rules"] else None,
            emoticons=load_lexicon(r["emoticons"], "patterns") if r["emoticons"] else None,
            clusters=load_clusters(r["clusters"]).assignment if r["clusters"] else None,
            sentiment=sentiment,
            bad_words=bad,
            mentions=[load_lexicon(p) for p in r["mentions"]],
            gazetteers=[load_lexicon(p) for p in r["gazetteers"]],
            pos_lexicon=load_pos_lexicon(r["pos_lexicon"]) if r["pos_lexicon"] else None,
        )


def demo_resources(**overrides) -> Resources:
    """Resources from the bundled demo directory (no clusters)."""
    return RunConfig(resources=str(DEMO_DIR), **overrides).load_resources()
