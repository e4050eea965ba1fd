"""Term lexicons: loading, embedding-based expansion, and token-sequence matching."""

from __future__ import annotations

import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .textproc import StemRules, TokenList, _pattern_regex, as_tokens, stem, tokenize

log = logging.getLogger(__name__)

KINDS = ("terms", "polarity", "emotion", "patterns")
POLARITY = ("positive", "negative")
REQUIRED_GAZETTEERS = frozenset({"location", "country", "person_name", "date_unit"})


@dataclass(frozen=True)
class Entry:
    categories: tuple[str, ...] = ()
    weight: float | None = None


@dataclass
class Lexicon:
    """Normalized term -> entry map.

    ``patterns`` lexicons (emoticons) keep the original case; every other kind
    lowercases terms and collapses inner whitespace.
    """

    name: str
    entries: dict[str, Entry]
    kind: str = "terms"
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, term: str) -> bool:
        return normalize_term(term, self.kind) in self.entries

    def categories(self) -> list[str]:
        cats = {c for e in self.entries.values() for c in e.categories}
        return sorted(cats)

    def pattern_regex(self):
        if "regex" not in self._cache:
            self._cache["regex"] = _pattern_regex(self.entries)
        return self._cache["regex"]

    def sequences(self, rules: StemRules | None = None) -> tuple[dict[tuple[str, ...], str], int]:
        """Token-sequence index of the entries, optionally stemmed."""
        key = ("seq", id(rules))
        hit = self._cache.get(key)
        if hit is None or hit[0] is not rules:
            index: dict[tuple[str, ...], str] = {}
            for term in self.entries:
                toks = tuple(t.lower() for t in tokenize(term).tokens)
                if rules is not None:
                    toks = tuple(stem(t, rules) for t in toks)
                if toks:
                    index.setdefault(toks, term)
            longest = max((len(k) for k in index), default=0)
            hit = self._cache[key] = (rules, index, longest)
        return hit[1], hit[2]


_WS = re.compile(r"\s+")


def normalize_term(term: str, kind: str = "terms") -> str:
    term = term.strip()
    if kind == "patterns":
        return term
    return _WS.sub(" ", term.lower())


def load_lexicon(path: str | Path, kind: str = "terms", name: str | None = None) -> Lexicon:
    """Load a ``term[<TAB>category[<TAB>weight]]`` file.

    Exact duplicate terms collapse with a warning. For ``emotion`` lexicons a
    term listed under several categories keeps all of them.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown lexicon kind {kind!r}; expected one of {KINDS}")
    path = Path(path)
    entries: dict[str, Entry] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\r\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) > 3:
                raise ValueError(f"{path}:{lineno}: too many columns")
            term = normalize_term(parts[0], kind)
            if not term:
                raise ValueError(f"{path}:{lineno}: empty term")
            category = parts[1].strip().lower() if len(parts) > 1 else ""
            weight = None
            if len(parts) == 3:
                try:
                    weight = float(parts[2])
                except ValueError:
                    raise ValueError(f"{path}:{lineno}: weight {parts[2]!r} is not a number") from None
            if kind == "polarity" and category not in POLARITY:
                raise ValueError(f"{path}:{lineno}: polarity category must be positive or negative, got {category!r}")
            if kind == "emotion" and not category:
                raise ValueError(f"{path}:{lineno}: emotion lexicon lines need a category column")
            cats = (category,) if category else ()
            if term in entries:
                old = entries[term]
                if kind == "emotion" and category not in old.categories:
                    entries[term] = Entry(old.categories + cats, old.weight)
                    continue
                log.warning("%s:%d: duplicate term %r collapsed", path, lineno, term)
                continue
            entries[term] = Entry(cats, weight)
    if not entries:
        raise ValueError(f"{path}: lexicon is empty")
    return Lexicon(name or path.stem, entries, kind)


def expand_lexicon(base: Lexicon, embeddings, k: int, name: str | None = None) -> Lexicon:
    """Add the k nearest embedding neighbours of every in-vocabulary base term."""
    from .embeddings import nearest

    if k < 1:
        raise ValueError("k must be >= 1")
    if embeddings.vocab_size == 0:
        raise ValueError("embedding table is empty")
    entries = dict(base.entries)
    for term in sorted(base.entries):
        if term not in embeddings:
            continue
        for word, _ in nearest(embeddings, term, k):
            word = normalize_term(word, base.kind)
            if word not in entries:
                entries[word] = Entry(base.entries[term].categories, None)
    return Lexicon(name or f"{base.name}_{k}", entries, base.kind)


def count_matches(
    tokens: TokenList | Sequence[str],
    lexicon: Lexicon,
    match_stems: bool = False,
    rules: StemRules | None = None,
) -> Counter:
    """Per-category match counts.

    Scans left to right taking the longest entry that matches as a run of
    consecutive tokens; matches do not overlap. Entries without a category
    count under the lexicon's name.
    """
    if match_stems and rules is None:
        raise ValueError("match_stems requires stem rules")
    toks = [t.lower() for t in as_tokens(tokens)]
    if match_stems:
        toks = [stem(t, rules) for t in toks]
    index, longest = lexicon.sequences(rules if match_stems else None)
    counts: Counter = Counter()
    i, n = 0, len(toks)
    while i < n:
        for length in range(min(longest, n - i), 0, -1):
            term = index.get(tuple(toks[i : i + length]))
            if term is not None:
                for cat in lexicon.entries[term].categories or (lexicon.name,):
                    counts[cat] += 1
                i += length
                break
        else:
            i += 1
    return counts


@dataclass
class SentimentResources:
    polarity: Lexicon
    emotions: Lexicon
    opinion: Lexicon

    def __post_init__(self):
        for lex in (self.polarity, self.opinion):
            bad = set(lex.categories()) - set(POLARITY)
            if bad:
                raise ValueError(f"lexicon {lex.name!r} has non-polarity categories {sorted(bad)}")


def sentiment_scores(tokens: TokenList | Sequence[str], res: SentimentResources) -> dict[str, float]:
    toks = as_tokens(tokens)
    n = len(toks)

    def norm(v: int) -> float:
        return v / n if n else 0.0

    out: dict[str, float] = {}
    for prefix, lex in (("polarity", res.polarity), ("opinion", res.opinion)):
        c = count_matches(toks, lex)
        pos, neg = c["positive"], c["negative"]
        out[f"{prefix}_pos"] = pos
        out[f"{prefix}_neg"] = neg
        out[f"{prefix}_net"] = pos - neg
        out[f"{prefix}_pos_norm"] = norm(pos)
        out[f"{prefix}_neg_norm"] = norm(neg)
    emo = count_matches(toks, res.emotions)
    for cat in res.emotions.categories():
        out[f"emotion_{cat}"] = emo[cat]
        out[f"emotion_{cat}_norm"] = norm(emo[cat])
    return out


def gazetteer_entities(tokens: TokenList | Sequence[str], gazetteers: Sequence[Lexicon]) -> dict[str, int]:
    """Match counts per gazetteer; a term in two gazetteers counts in both."""
    missing = REQUIRED_GAZETTEERS - {g.name for g in gazetteers}
    if missing:
        raise ValueError(f"missing gazetteer types: {sorted(missing)}")
    toks = as_tokens(tokens)
    return {g.name: sum(count_matches(toks, g).values()) for g in gazetteers}
