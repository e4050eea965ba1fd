"""Feature groups, the train-time registry, and the scale-then-normalize transform."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .embeddings import ClusterModel
from .lexicons import Lexicon, SentimentResources, count_matches, gazetteer_entities, sentiment_scores
from .textproc import StemRules, affix, char_ngrams, extract_emoticons, punct_stats, stem, tokenize, word_ngrams


class FeatureGroup(str, Enum):
    BOW_NO_STOP = "bow_no_stop"
    BOW_WITH_STOP = "bow_with_stop"
    BOW_STEMS = "bow_stems"
    WORD_2GRAMS = "word_2grams"
    WORD_3GRAMS = "word_3grams"
    CHAR_NGRAMS = "char_ngrams"
    WORD_PREFIX = "word_prefix"
    WORD_SUFFIX = "word_suffix"
    EMOTICONS = "emoticons"
    PUNCT = "punct"
    METADATA = "metadata"
    W2V_CLUSTERS = "w2v_clusters"
    SENTIMENT = "sentiment"
    BAD_WORDS = "bad_words"
    MENTIONS = "mentions"
    POS = "pos"
    NE = "ne"


ALL_GROUPS: tuple[FeatureGroup, ...] = tuple(FeatureGroup)
BOW_GROUPS = frozenset({FeatureGroup.BOW_NO_STOP, FeatureGroup.BOW_WITH_STOP, FeatureGroup.BOW_STEMS})
_GROUP_ORDER = {g.value: i for i, g in enumerate(ALL_GROUPS)}

# (group value, feature name) -> raw value
RawFeatures = dict[tuple[str, str], float]


def parse_groups(names_or_csv: str | Iterable[str] | None) -> frozenset[FeatureGroup]:
    """Parse a comma-separated (or iterable) group list; ``None``/"all" means every group."""
    if names_or_csv is None:
        return frozenset(ALL_GROUPS)
    names = names_or_csv.split(",") if isinstance(names_or_csv, str) else list(names_or_csv)
    names = [n.strip().replace("-", "_") for n in names if str(n).strip()]
    if names == ["all"]:
        return frozenset(ALL_GROUPS)
    out = set()
    for n in names:
        try:
            out.add(FeatureGroup(n))
        except ValueError:
            raise ValueError(f"unknown feature group {n!r}") from None
    return frozenset(out)


def metadata_features(comment) -> dict[str, float]:
    """Posting-time flags and thread position.

    Worktime is 09:00-19:00 and night 21:00-06:00, each inclusive at the start
    and exclusive at the end, in the comment's own timezone. The evening and
    morning gaps set neither flag.
    """
    if comment.metadata is not None:
        return dict(comment.metadata)
    t = comment.timestamp
    hour = t.hour + t.minute / 60 + t.second / 3600
    return {
        "worktime": float(9 <= hour < 19),
        "night": float(hour >= 21 or hour < 6),
        "weekend": float(t.weekday() >= 5),
        "rank_ratio": comment.rank / comment.thread_size,
    }


def pos_distribution(tags: Sequence[str]) -> dict[str, float]:
    """Relative frequency of every tag and its one- and two-character prefixes."""
    if not tags:
        return {}
    counts: Counter = Counter()
    for tag in tags:
        for t in {tag, tag[:1], tag[:2]}:
            counts[t] += 1
    n = len(tags)
    return {t: c / n for t, c in counts.items()}


@dataclass
class Resources:
    stopwords: frozenset[str] | None = None
    stem_rules: StemRules | None = None
    emoticons: Lexicon | None = None
    clusters: Mapping[str, int] | None = None
    sentiment: SentimentResources | None = None
    bad_words: list[Lexicon] = field(default_factory=list)
    mentions: list[Lexicon] = field(default_factory=list)
    gazetteers: list[Lexicon] = field(default_factory=list)
    pos_lexicon: Mapping[str, str] | None = None

    def __post_init__(self):
        if isinstance(self.clusters, ClusterModel):
            self.clusters = self.clusters.assignment

    def check(self, mask: Iterable[FeatureGroup]) -> None:
        need = {
            FeatureGroup.BOW_NO_STOP: self.stopwords is not None,
            FeatureGroup.BOW_STEMS: self.stopwords is not None and self.stem_rules is not None,
            FeatureGroup.EMOTICONS: self.emoticons is not None,
            FeatureGroup.W2V_CLUSTERS: self.clusters is not None,
            FeatureGroup.SENTIMENT: self.sentiment is not None,
            FeatureGroup.BAD_WORDS: bool(self.bad_words),
            FeatureGroup.MENTIONS: bool(self.mentions),
            FeatureGroup.NE: bool(self.gazetteers),
        }
        missing = sorted(g.value for g in mask if not need.get(g, True))
        if missing:
            raise ValueError(f"missing resources for feature group(s): {', '.join(missing)}")


def load_stopwords(path: str | Path) -> frozenset[str]:
    with open(path, encoding="utf-8") as fh:
        return frozenset(w.strip().lower() for w in fh if w.strip() and not w.lstrip().startswith("#"))


def load_pos_lexicon(path: str | Path) -> dict[str, str]:
    """``word<TAB>tag`` lines."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            try:
                word, tag = line.split("\t")
            except ValueError:
                raise ValueError(f"{path}:{lineno}: expected word<TAB>tag") from None
            out[word.strip().lower()] = tag.strip()
    return out


def _put(raw: RawFeatures, group: FeatureGroup, values: Mapping[str, float]) -> None:
    g = group.value
    for name, v in values.items():
        raw[(g, name)] = float(v)


def extract_raw(comment, mask: Iterable[FeatureGroup], resources: Resources) -> RawFeatures:
    """Raw, group-tagged features of one comment for the groups in ``mask``."""
    mask = frozenset(mask)
    resources.check(mask)
    G = FeatureGroup
    raw: RawFeatures = {}
    tl = tokenize(comment.text)
    toks = tl.tokens
    lower = [t.lower() for t in toks]

    if G.BOW_WITH_STOP in mask:
        _put(raw, G.BOW_WITH_STOP, Counter(lower))
    content = [t for t in lower if t not in resources.stopwords] if resources.stopwords is not None else lower
    if G.BOW_NO_STOP in mask:
        _put(raw, G.BOW_NO_STOP, Counter(content))
    if G.BOW_STEMS in mask:
        _put(raw, G.BOW_STEMS, Counter(stem(t, resources.stem_rules) for t in content))
    if G.WORD_2GRAMS in mask:
        _put(raw, G.WORD_2GRAMS, word_ngrams(lower, 2))
    if G.WORD_3GRAMS in mask:
        _put(raw, G.WORD_3GRAMS, word_ngrams(lower, 3))
    if G.CHAR_NGRAMS in mask:
        grams: Counter = Counter()
        for t in lower:
            grams.update(char_ngrams(t, 3))
            grams.update(char_ngrams(t, 4))
        _put(raw, G.CHAR_NGRAMS, grams)
    for group, side in ((G.WORD_PREFIX, "prefix"), (G.WORD_SUFFIX, "suffix")):
        if group in mask:
            # the length tag keeps short tokens' k=3 and k=4 affixes apart
            _put(raw, group, Counter(f"{k}:{affix(t, k, side)}" for t in lower for k in (3, 4)))
    if G.EMOTICONS in mask:
        _put(raw, G.EMOTICONS, extract_emoticons(comment.text, resources.emoticons))
    if G.PUNCT in mask:
        _put(raw, G.PUNCT, punct_stats(comment.text).as_dict())
    if G.METADATA in mask:
        _put(raw, G.METADATA, metadata_features(comment))
    if G.W2V_CLUSTERS in mask:
        clusters = resources.clusters
        _put(raw, G.W2V_CLUSTERS, Counter(f"c{clusters[t]}" for t in lower if t in clusters))
    if G.SENTIMENT in mask:
        _put(raw, G.SENTIMENT, sentiment_scores(toks, resources.sentiment))
    if G.BAD_WORDS in mask:
        _put(raw, G.BAD_WORDS, {lex.name: sum(count_matches(toks, lex).values()) for lex in resources.bad_words})
    if G.MENTIONS in mask:
        _put(raw, G.MENTIONS, {lex.name: sum(count_matches(toks, lex).values()) for lex in resources.mentions})
    if G.POS in mask:
        if comment.pos_tags is not None:
            tags = list(comment.pos_tags)
        elif resources.pos_lexicon is not None:
            tags = [resources.pos_lexicon.get(t, "X") for t in lower]
        else:
            raise ValueError(f"comment {comment.id} has no POS tags and no POS lexicon is loaded")
        _put(raw, G.POS, pos_distribution(tags))
    if G.NE in mask:
        _put(raw, G.NE, gazetteer_entities(toks, resources.gazetteers))
    return raw


def restrict(raw: RawFeatures, mask: Iterable[FeatureGroup]) -> RawFeatures:
    keep = {g.value for g in mask}
    return {k: v for k, v in raw.items() if k[0] in keep}


@dataclass
class FeatureRegistry:
    keys: list[tuple[str, str]]
    index: dict[tuple[str, str], int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.index = {k: i for i, k in enumerate(self.keys)}
        if len(self.index) != len(self.keys):
            raise ValueError("registry keys must be unique")

    @property
    def n_columns(self) -> int:
        return len(self.keys)

    def groups(self) -> np.ndarray:
        return np.array([k[0] for k in self.keys], dtype=object)


@dataclass
class ScalerStats:
    min: np.ndarray
    max: np.ndarray

    def __post_init__(self):
        self.min = np.asarray(self.min, dtype=np.float64)
        self.max = np.asarray(self.max, dtype=np.float64)
        if np.any(self.min > self.max):
            raise ValueError("scaler min exceeds max")
        span = self.max - self.min
        self._span = np.where(span > 0, span, 1.0)
        self._const = span <= 0
        zero = np.clip((0.0 - self.min) / self._span, 0.0, 1.0)
        zero[self._const] = 0.0
        # columns whose absent (raw 0) value does not scale to 0
        self._zero_cols = np.flatnonzero(zero > 0)

    def scale(self, cols: np.ndarray, values: np.ndarray) -> np.ndarray:
        out = np.clip((values - self.min[cols]) / self._span[cols], 0.0, 1.0)
        out[self._const[cols]] = 0.0
        return out


def fit_registry(train_examples: Sequence[RawFeatures]) -> tuple[FeatureRegistry, ScalerStats]:
    """Columns for every training feature, ordered by group then name, plus min/max stats."""
    if not train_examples:
        raise ValueError("cannot fit a registry on an empty training set")
    seen: dict[tuple[str, str], list] = {}
    for raw in train_examples:
        for k, v in raw.items():
            s = seen.get(k)
            if s is None:
                seen[k] = [v, v, 1]
            else:
                if v < s[0]:
                    s[0] = v
                if v > s[1]:
                    s[1] = v
                s[2] += 1
    keys = sorted(seen, key=lambda k: (_GROUP_ORDER.get(k[0], len(_GROUP_ORDER)), k[0], k[1]))
    n = len(train_examples)
    lo = np.empty(len(keys))
    hi = np.empty(len(keys))
    for i, k in enumerate(keys):
        vmin, vmax, count = seen[k]
        if count < n:
            vmin, vmax = min(vmin, 0.0), max(vmax, 0.0)
        lo[i], hi[i] = vmin, vmax
    return FeatureRegistry(keys), ScalerStats(lo, hi)


@dataclass(frozen=True)
class FeatureVector:
    indices: np.ndarray
    values: np.ndarray

    def dense(self, n: int) -> np.ndarray:
        out = np.zeros(n)
        out[self.indices] = self.values
        return out


def transform(raw: RawFeatures, registry: FeatureRegistry, scaler: ScalerStats) -> FeatureVector:
    """Min-max scale with training statistics, clip to [0, 1], then L2-normalize.

    Features missing from the registry are dropped.
    """
    vals: dict[int, float] = {}
    for k, v in raw.items():
        col = registry.index.get(k)
        if col is not None:
            vals[col] = v
    for col in scaler._zero_cols:
        vals.setdefault(int(col), 0.0)
    if not vals:
        return FeatureVector(np.zeros(0, dtype=np.int64), np.zeros(0))
    cols = np.array(sorted(vals), dtype=np.int64)
    raw_vals = np.array([vals[c] for c in cols], dtype=np.float64)
    if not np.all(np.isfinite(raw_vals)):
        raise ValueError("non-finite raw feature value")
    scaled = scaler.scale(cols, raw_vals)
    nz = scaled != 0.0
    cols, scaled = cols[nz], scaled[nz]
    if len(scaled):
        # divide by the peak first so tiny values do not underflow when squared
        scaled = scaled / scaled.max()
        scaled = scaled / np.sqrt(np.dot(scaled, scaled))
    return FeatureVector(cols, scaled)


def to_matrix(vectors: Sequence[FeatureVector], n_columns: int) -> sp.csr_matrix:
    indptr = np.zeros(len(vectors) + 1, dtype=np.int64)
    for i, v in enumerate(vectors):
        indptr[i + 1] = indptr[i] + len(v.indices)
    indices = np.concatenate([v.indices for v in vectors]) if vectors else np.zeros(0, dtype=np.int64)
    data = np.concatenate([v.values for v in vectors]) if vectors else np.zeros(0)
    return sp.csr_matrix((data, indices, indptr), shape=(len(vectors), n_columns))


def transform_all(raws: Sequence[RawFeatures], registry: FeatureRegistry, scaler: ScalerStats) -> sp.csr_matrix:
    return to_matrix([transform(r, registry, scaler) for r in raws], registry.n_columns)


def dump_features(ids: Sequence[str], raws: Sequence[RawFeatures], path: str | Path) -> None:
    """Debug dump: one JSON line per (comment id, group, name, value)."""
    with open(path, "w", encoding="utf-8") as fh:
        for cid, raw in zip(ids, raws):
            for (g, name), v in sorted(raw.items()):
                fh.write(json.dumps({"comment_id": cid, "group": g, "name": name, "value": v}, ensure_ascii=False) + "\n")
