"""Surface-form primitives: tokens, stems, n-grams, affixes, punctuation, emoticons."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

_TOKEN_RE = re.compile(r"[^\W_]+")
_PUNCT_RE = re.compile(r"(?:[^\w\s]|_)+")
_MARK_RUN_RE = re.compile(r"!+|\?+|\.+")


@dataclass(frozen=True)
class TokenList:
    tokens: list[str]
    offsets: list[tuple[int, int]]
    punct: list[str] = field(default_factory=list)
    punct_offsets: list[tuple[int, int]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)

    def __getitem__(self, i):
        return self.tokens[i]

    def lower(self) -> list[str]:
        return [t.lower() for t in self.tokens]


def tokenize(text: str) -> TokenList:
    """Split text into maximal letter/digit runs.

    Runs of other non-space characters are kept apart in ``punct``. Case is
    preserved; callers lowercase where a feature needs it.
    """
    tokens, offsets = [], []
    for m in _TOKEN_RE.finditer(text):
        tokens.append(m.group())
        offsets.append(m.span())
    punct, punct_offsets = [], []
    for m in _PUNCT_RE.finditer(text):
        punct.append(m.group())
        punct_offsets.append(m.span())
    return TokenList(tokens, offsets, punct, punct_offsets)


def as_tokens(tokens: TokenList | Sequence[str]) -> list[str]:
    if isinstance(tokens, TokenList):
        return tokens.tokens
    return list(tokens)


@dataclass(frozen=True)
class StemRules:
    rules: Mapping[str, str]
    min_stem_length: int = 3

    def __post_init__(self):
        if self.min_stem_length < 1:
            raise ValueError("min_stem_length must be >= 1")
        # longest suffix first; ties by suffix text keep the order stable
        order = sorted(self.rules, key=lambda s: (-len(s), s))
        object.__setattr__(self, "_order", tuple(order))


def load_stem_rules(path: str | Path, min_stem_length: int = 3) -> StemRules:
    """Read ``suffix<TAB>replacement`` lines; a missing replacement means delete."""
    rules: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) > 2:
                raise ValueError(f"{path}:{lineno}: expected suffix<TAB>replacement")
            suffix = parts[0].strip().lower()
            if not suffix:
                raise ValueError(f"{path}:{lineno}: empty suffix")
            rules[suffix] = parts[1].strip().lower() if len(parts) == 2 else ""
    return StemRules(rules, min_stem_length)


def stem(token: str, rules: StemRules) -> str:
    for suffix in rules._order:
        if token.endswith(suffix):
            out = token[: len(token) - len(suffix)] + rules.rules[suffix]
            if len(out) >= rules.min_stem_length:
                return out
    return token


def word_ngrams(tokens: TokenList | Sequence[str], n: int) -> Counter:
    if n < 2:
        raise ValueError("word n-grams need n >= 2")
    toks = [t.lower() for t in as_tokens(tokens)]
    return Counter(" ".join(toks[i : i + n]) for i in range(len(toks) - n + 1))


def char_ngrams(token: str, n: int) -> Counter:
    if n not in (3, 4):
        raise ValueError("char n-grams are defined for n in {3, 4}")
    tok = token.lower()
    return Counter(tok[i : i + n] for i in range(len(tok) - n + 1))


def affix(token: str, k: int, side: str) -> str:
    if k not in (3, 4):
        raise ValueError("affix length must be 3 or 4")
    tok = token.lower()
    if side == "prefix":
        return tok[:k]
    if side == "suffix":
        return tok[-k:]
    raise ValueError(f"unknown affix side {side!r}")


@dataclass(frozen=True)
class PunctStats:
    excl_single: int = 0
    excl_elong: int = 0
    quest_single: int = 0
    quest_elong: int = 0
    dots_single: int = 0
    dots_elong: int = 0
    word_count: int = 0
    allcaps_count: int = 0

    def as_dict(self) -> dict[str, int]:
        return dict(self.__dict__)

    def __add__(self, other: "PunctStats") -> "PunctStats":
        return PunctStats(**{k: v + getattr(other, k) for k, v in self.__dict__.items()})


_MARK_NAMES = {"!": "excl", "?": "quest", ".": "dots"}


def is_allcaps(token: str) -> bool:
    letters = [c for c in token if c.isalpha()]
    return len(token) >= 2 and bool(letters) and all(c.isupper() for c in letters)


def punct_stats(text: str) -> PunctStats:
    text = text.replace("…", "...")
    counts = dict.fromkeys(PunctStats.__dataclass_fields__, 0)
    for m in _MARK_RUN_RE.finditer(text):
        run = m.group()
        kind = "single" if len(run) == 1 else "elong"
        counts[f"{_MARK_NAMES[run[0]]}_{kind}"] += 1
    toks = tokenize(text).tokens
    counts["word_count"] = len(toks)
    counts["allcaps_count"] = sum(is_allcaps(t) for t in toks)
    return PunctStats(**counts)


def _pattern_regex(patterns: Iterable[str]) -> re.Pattern | None:
    pats = sorted(set(patterns), key=lambda p: (-len(p), p))
    if not pats:
        return None
    return re.compile("|".join(re.escape(p) for p in pats))


def extract_emoticons(text: str, emoticon_lexicon) -> Counter:
    """Count lexicon patterns in raw text, longest match first, no overlaps."""
    if hasattr(emoticon_lexicon, "pattern_regex"):
        regex = emoticon_lexicon.pattern_regex()
    else:
        regex = _pattern_regex(emoticon_lexicon)
    if regex is None:
        return Counter()
    return Counter(m.group() for m in regex.finditer(text))
