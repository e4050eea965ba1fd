"""Synthetic forum data with planted troll signals, for demos and end-to-end checks.

The planted vocabulary is built so that only whole-word features can see it.
Every planted word ``A+a+A+o+A`` has a decoy ``A+o+A+a+A`` used by non-trolls
at the same rate: the two share every character 3- and 4-gram, both 3/4-char
prefixes and suffixes, and an embedding vector (hence a cluster).

Filler text is short and Zipfian so that the few informative columns are
not drowned out when each vector is L2-normalized.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from .config import DEMO_DIR
from .corpus import Comment, Label, UserStats
from .embeddings import EmbeddingTable, kmeans
from .features import Resources

SOFIA = timezone(timedelta(hours=2))
_CONS = "бвгдзклмнпрстфхчш"
_VOW = "аеиоуъ"
_ENDINGS = (".", ".", ".", "!", "?", "!!!", "...", "?!", "")
_NIGHT_HOURS = (21, 22, 23, 0, 1, 2, 3, 4, 5)
_DAY_HOURS = tuple(range(6, 21))
_ACCUSATION_WORDS = (
    "платен", "платени", "пишеш", "пари", "заплата", "червен", "партиен", "купен",
    "наемник", "поръчка", "кампания", "лев", "профил", "фалшив", "щаб",
)


def _stopwords() -> list[str]:
    text = (DEMO_DIR / "stopwords.txt").read_text(encoding="utf-8")
    return [w for w in text.split() if not w.startswith("#")]


def _syllables(rng: np.random.Generator, k: int) -> str:
    c = rng.integers(len(_CONS), size=k)
    v = rng.integers(len(_VOW), size=k)
    return "".join(_CONS[i] + _VOW[j] for i, j in zip(c, v))


def _pseudo_words(rng: np.random.Generator, n: int, exclude: set[str], max_syllables: int = 3) -> list[str]:
    out: list[str] = []
    seen = set(exclude)
    while len(out) < n:
        w = _syllables(rng, int(rng.integers(1, max_syllables + 1)))
        if rng.random() < 0.5:
            w += _CONS[int(rng.integers(len(_CONS)))]
        if len(w) >= 2 and w not in seen:
            seen.add(w)
            out.append(w)
    return out


def planted_pairs(rng: np.random.Generator, n: int, exclude: set[str]) -> list[tuple[str, str]]:
    """(planted, decoy) pairs sharing all char 3/4-grams and 3/4-char affixes."""
    pairs = []
    seen = set(exclude)
    while len(pairs) < n:
        a = _syllables(rng, 2)
        p, d = a + "а" + a + "о" + a, a + "о" + a + "а" + a
        if a in seen or p in seen:
            continue
        seen.update({a, p, d})
        pairs.append((p, d))
    return pairs


def _timestamp(rng: np.random.Generator, night: bool) -> datetime:
    day = datetime(2014, 1, 6, tzinfo=SOFIA) + timedelta(days=int(rng.integers(0, 91)))
    hour = int(rng.choice(_NIGHT_HOURS if night else _DAY_HOURS))
    return day + timedelta(hours=hour, minutes=int(rng.integers(0, 60)))


def _sentence(
    rng: np.random.Generator,
    vocab: list[str],
    stop: list[str],
    extra: str | Sequence[str] | None,
    weights: np.ndarray | None = None,
    length: tuple[int, int] = (6, 14),
) -> str:
    n = int(rng.integers(length[0], length[1] + 1))
    is_stop = rng.random(n) < 0.25
    si = rng.integers(len(stop), size=n)
    vi = rng.choice(len(vocab), size=n, p=weights)
    toks = [stop[a] if s else vocab[b] for s, a, b in zip(is_stop, si, vi)]
    for word in [extra] if isinstance(extra, str) else extra or ():
        toks.insert(int(rng.integers(0, len(toks) + 1)), word)
    toks[0] = toks[0].capitalize()
    return " ".join(toks) + rng.choice(_ENDINGS)


@dataclass
class SyntheticCorpus:
    comments: list[Comment]
    trolls: list[tuple[Comment, Label]]
    stats: list[UserStats]
    accused_users: set[str]
    vocab: list[str]
    pairs: list[tuple[str, str]]
    seed: int = 0
    _resources: Resources | None = field(default=None, repr=False)

    def resources(self, with_clusters: bool = True) -> Resources:
        """Bundled demo lexicons plus a k-means cluster map of synthetic vectors.

        Planted words and their decoys get identical vectors, so they always
        land in the same cluster.
        """
        if self._resources is not None:
            return self._resources
        from .config import demo_resources

        res = demo_resources()
        if with_clusters:
            rng = np.random.default_rng(self.seed + 7)
            words = list(self.vocab) + [p for p, _ in self.pairs]
            vecs = rng.normal(size=(len(words), 16))
            table = EmbeddingTable(words + [d for _, d in self.pairs], np.vstack([vecs, vecs[len(self.vocab) :]]))
            model = kmeans(table, k=max(2, table.vocab_size // 50), seed=self.seed, max_iter=50)
            res.clusters = model.assignment
        self._resources = res
        return res


def make_planted_corpus(
    n_trolls: int = 500,
    seed: int = 0,
    n_threads: int = 50,
    night_troll: float = 0.8,
    night_nontroll: float = 0.0,
    planted_rate: float = 0.5,
    vocab_size: int = 150,
    n_planted: int = 20,
    zipf: float = 1.2,
    length: tuple[int, int] = (2, 6),
    planted_per_comment: int = 3,
    max_syllables: int = 2,
) -> SyntheticCorpus:
    """Threads mixing troll and non-troll comments.

    Trolls post at night with probability ``night_troll``. With probability
    ``planted_rate`` a comment draws ``planted_per_comment`` words from the
    planted vocabulary; non-troll comments use the matching decoys instead.
    Each thread also holds comments by low-activity users, who must never be
    picked as non-troll partners. ``zipf`` > 0 draws filler words with
    rank-frequency weights ``1/r**zipf`` instead of uniformly.
    """
    rng = np.random.default_rng(seed)
    stop = _stopwords()
    pairs = planted_pairs(rng, n_planted, set(stop))
    vocab = _pseudo_words(rng, vocab_size, set(stop) | {w for p in pairs for w in p}, max_syllables)
    weights = None
    if zipf > 0:
        weights = 1.0 / np.arange(1, vocab_size + 1) ** zipf
        weights /= weights.sum()
    troll_users = [f"t{i:02d}" for i in range(25)]
    regulars = [f"u{i:03d}" for i in range(60)]
    casuals = [f"l{i:02d}" for i in range(15)]
    per_thread = -(-n_trolls // n_threads)

    comments: list[Comment] = []
    trolls: list[tuple[Comment, Label]] = []
    made = 0
    for t in range(n_threads):
        drafts = []
        k_troll = min(per_thread, n_trolls - made)
        made += k_troll
        for kind, count in (("troll", k_troll), ("regular", 2 * per_thread), ("casual", 3)):
            for _ in range(count):
                troll = kind == "troll"
                night = rng.random() < (night_troll if troll else night_nontroll)
                words = []
                if rng.random() < planted_rate:
                    for j in rng.integers(len(pairs), size=planted_per_comment):
                        words.append(pairs[j][0] if troll else pairs[j][1])
                user = rng.choice(troll_users if troll else regulars if kind == "regular" else casuals)
                drafts.append((_timestamp(rng, night), str(user), _sentence(rng, vocab, stop, words, weights, length), troll))
        drafts.sort(key=lambda d: d[0])
        size = len(drafts)
        for rank, (ts, user, text, troll) in enumerate(drafts, 1):
            c = Comment(f"p{t:03d}-c{rank:03d}", user, f"p{t:03d}", ts, rank, size, text)
            comments.append(c)
            if troll:
                trolls.append((c, Label.PAID_TROLL))

    counts = {u: int(rng.integers(120, 400)) for u in regulars}
    counts.update({u: int(rng.integers(10, 90)) for u in casuals})
    counts.update({u: int(rng.integers(50, 300)) for u in troll_users})
    stats = [UserStats(u, n) for u, n in sorted(counts.items())]
    return SyntheticCorpus(comments, trolls, stats, set(troll_users), vocab, pairs, seed)


def make_accusation_data(n: int = 400, seed: int = 0, signal_rate: float = 0.95) -> list[tuple[Comment, bool]]:
    """Trigger-bearing replies; real accusations also use a planted accusation vocabulary."""
    rng = np.random.default_rng(seed)
    stop = _stopwords()
    vocab = _pseudo_words(rng, 1500, set(stop) | set(_ACCUSATION_WORDS))
    triggers = ("трол", "тролче", "тролове", "тролската", "мурзилка", "мурзилки")
    out = []
    for i in range(n):
        accusation = i % 2 == 0
        text = _sentence(rng, vocab, stop, str(rng.choice(triggers)))
        rate = signal_rate if accusation else 1.0 - signal_rate
        for _ in range(2):
            if rng.random() < rate:
                text += " " + str(rng.choice(_ACCUSATION_WORDS))
        ts = _timestamp(rng, rng.random() < 0.3)
        c = Comment(f"r{i:04d}", f"a{int(rng.integers(80)):02d}", f"p{i // 10:03d}", ts, 2, 10, text, parent_id=f"r{i:04d}-parent")
        out.append((c, accusation))
    return out


def make_user_corpus(seed: int = 0, n_accused: int = 60, n_regular: int = 80, comments_per_user: int = 12):
    """Users with 1-30 accusation mentions and never-accused regulars.

    The more often a user is accused, the more of their posts fall at night.
    Returns ``(comments, stats)``; stats carry full-history comment counts.
    """
    rng = np.random.default_rng(seed)
    stop = _stopwords()
    vocab = _pseudo_words(rng, 1500, set(stop))
    comments: list[Comment] = []
    stats: list[UserStats] = []
    users = [(f"m{i:03d}", int(rng.integers(1, 31))) for i in range(n_accused)]
    users += [(f"r{i:03d}", 0) for i in range(n_regular)]
    users += [(f"c{i:03d}", 0) for i in range(10)]
    for user, mentions in users:
        night_p = min(0.9, 0.1 + 0.03 * mentions) if mentions else 0.1
        for j in range(comments_per_user):
            ts = _timestamp(rng, rng.random() < night_p)
            comments.append(Comment(f"{user}-{j:02d}", user, f"p{int(rng.integers(40)):03d}", ts, 1 + j % 5, 5, _sentence(rng, vocab, stop, None)))
        history = int(rng.integers(20, 99)) if user.startswith("c") else int(rng.integers(100, 500))
        stats.append(UserStats(user, history, mentions, min(mentions, 1 + mentions // 2)))
    return comments, stats


def write_corpus_files(sc: SyntheticCorpus, directory: str | Path) -> dict[str, Path]:
    """Stage a synthetic corpus as CLI inputs: comments, troll ids, user counts."""
    from .corpus import write_comments

    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = {"comments": d / "comments.jsonl", "trolls": d / "trolls.tsv", "user_counts": d / "user_counts.tsv"}
    write_comments(sc.comments, paths["comments"])
    paths["trolls"].write_text("".join(f"{c.id}\t{lab.value}\n" for c, lab in sc.trolls), encoding="utf-8")
    paths["user_counts"].write_text("".join(f"{s.user_id}\t{s.comment_count}\n" for s in sc.stats), encoding="utf-8")
    return paths
