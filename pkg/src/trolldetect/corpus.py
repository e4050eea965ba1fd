"""Forum comments: ingestion, accusation mining, annotator agreement, dataset assembly."""

from __future__ import annotations

import csv
import json
import logging
import random
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Hashable, Iterable, Sequence

from .lexicons import Lexicon
from .textproc import tokenize

log = logging.getLogger(__name__)

MIN_NONTROLL_COMMENTS = 100


class Label(str, Enum):
    PAID_TROLL = "PaidTroll"
    MENTIONED_TROLL = "MentionedTroll"
    NON_TROLL = "NonTroll"

    @property
    def is_troll(self) -> bool:
        return self is not Label.NON_TROLL


@dataclass(frozen=True)
class Comment:
    id: str
    user_id: str
    publication_id: str
    timestamp: datetime
    rank: int
    thread_size: int
    text: str
    parent_id: str | None = None
    pos_tags: tuple[str, ...] | None = None
    # precomputed metadata features; set on user-level documents
    metadata: dict[str, float] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.timestamp.tzinfo is None or self.timestamp.utcoffset() is None:
            raise ValueError(f"comment {self.id}: timestamp has no timezone")
        if self.rank < 1 or self.thread_size < 1:
            raise ValueError(f"comment {self.id}: rank and thread_size must be >= 1")
        if self.rank > self.thread_size:
            raise ValueError(f"comment {self.id}: rank {self.rank} exceeds thread_size {self.thread_size}")
        if self.parent_id is not None and self.parent_id == self.id:
            raise ValueError(f"comment {self.id}: parent_id equals id")

    def to_record(self) -> dict:
        rec = {
            "id": self.id,
            "user_id": self.user_id,
            "publication_id": self.publication_id,
            "parent_id": self.parent_id,
            "timestamp": self.timestamp.isoformat(),
            "rank": self.rank,
            "thread_size": self.thread_size,
            "text": self.text,
        }
        if self.pos_tags is not None:
            rec["pos_tags"] = list(self.pos_tags)
        if self.metadata is not None:
            rec["metadata"] = dict(self.metadata)
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "Comment":
        missing = [k for k in ("id", "user_id", "publication_id", "timestamp", "rank", "thread_size", "text") if rec.get(k) in (None, "")]
        # empty text is a legal comment
        missing = [k for k in missing if not (k == "text" and rec.get("text") == "")]
        if missing:
            raise ValueError(f"missing field(s): {', '.join(missing)}")
        tags = rec.get("pos_tags")
        if isinstance(tags, str):
            tags = tags.split() if tags.strip() else None
        parent = rec.get("parent_id")
        return cls(
            id=str(rec["id"]),
            user_id=str(rec["user_id"]),
            publication_id=str(rec["publication_id"]),
            parent_id=str(parent) if parent not in (None, "") else None,
            timestamp=datetime.fromisoformat(str(rec["timestamp"]).replace("Z", "+00:00")),
            rank=int(rec["rank"]),
            thread_size=int(rec["thread_size"]),
            text=str(rec["text"]),
            pos_tags=tuple(tags) if tags is not None else None,
            metadata=rec.get("metadata"),
        )


class IngestError(ValueError):
    def __init__(self, problems: list[tuple[int, str]]):
        self.problems = problems
        lines = "; ".join(f"record {n}: {msg}" for n, msg in problems[:10])
        more = f" (+{len(problems) - 10} more)" if len(problems) > 10 else ""
        super().__init__(f"{len(problems)} malformed record(s): {lines}{more}")


def _records(path: Path, fmt: str):
    with open(path, encoding="utf-8", newline="") as fh:
        if fmt == "jsonl":
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as e:
                    yield lineno, None, f"invalid JSON: {e.msg}"
                    continue
                if not isinstance(rec, dict):
                    yield lineno, None, "record is not an object"
                    continue
                yield lineno, rec, None
        elif fmt == "csv":
            reader = csv.DictReader(fh)
            for rec in reader:
                yield reader.line_num, rec, None
        else:
            raise ValueError(f"unsupported format {fmt!r}; use jsonl or csv")


def guess_format(path: str | Path) -> str:
    return "csv" if str(path).lower().endswith(".csv") else "jsonl"


def load_comments(
    path: str | Path,
    fmt: str | None = None,
    strict: bool = False,
    problems: list | None = None,
) -> list[Comment]:
    """Read comments in file order.

    Malformed records are logged with their line number and skipped; with
    ``strict`` any malformed record aborts the load with :class:`IngestError`.
    Pass a list as ``problems`` to collect ``(line, message)`` pairs.
    """
    path = Path(path)
    fmt = fmt or guess_format(path)
    comments: list[Comment] = []
    bad: list[tuple[int, str]] = []
    for lineno, rec, err in _records(path, fmt):
        if err is None:
            try:
                comments.append(Comment.from_record(rec))
                continue
            except (ValueError, TypeError) as e:
                err = str(e)
        bad.append((lineno, err))
    if problems is not None:
        problems.extend(bad)
    if bad and strict:
        raise IngestError(bad)
    for lineno, msg in bad:
        log.warning("%s: skipping record %d: %s", path, lineno, msg)
    return comments


def write_comments(comments: Iterable[Comment], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for c in comments:
            fh.write(json.dumps(c.to_record(), ensure_ascii=False, sort_keys=True) + "\n")


def load_triggers(path: str | Path) -> Lexicon:
    from .lexicons import load_lexicon

    return load_lexicon(path, kind="terms", name="triggers")


@dataclass
class AccusationCandidate:
    accusation_comment_id: str
    accused_comment_id: str
    matched_trigger: str
    annotator_decisions: list[bool] = field(default_factory=list)

    @property
    def accepted(self) -> bool:
        """Majority of annotators said yes; ties and unannotated count as no."""
        yes = sum(self.annotator_decisions)
        return yes * 2 > len(self.annotator_decisions)


def _match_trigger(text: str, stems: Sequence[str]) -> str | None:
    for tok in tokenize(text).tokens:
        tok = tok.lower()
        for s in stems:
            if tok.startswith(s):
                return s
    return None


def mine_accusations(comments: Sequence[Comment], triggers: Lexicon | Iterable[str]) -> list[AccusationCandidate]:
    """Replies whose text has a token starting with a trigger stem.

    The first matching token wins and, within it, the longest stem. Replies to
    a comment missing from the corpus are skipped with a warning.
    """
    terms = triggers.entries if isinstance(triggers, Lexicon) else triggers
    stems = sorted({t.lower() for t in terms}, key=lambda s: (-len(s), s))
    if not stems:
        raise ValueError("trigger lexicon is empty")
    ids = {c.id for c in comments}
    out = []
    for c in comments:
        if c.parent_id is None:
            continue
        if c.parent_id not in ids:
            log.warning("comment %s replies to unknown comment %s; skipped", c.id, c.parent_id)
            continue
        hit = _match_trigger(c.text, stems)
        if hit is not None:
            out.append(AccusationCandidate(c.id, c.parent_id, hit))
    return out


def write_candidates(cands: Iterable[AccusationCandidate], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for c in cands:
            fh.write(json.dumps(c.__dict__, ensure_ascii=False, sort_keys=True) + "\n")


def load_candidates(path: str | Path) -> list[AccusationCandidate]:
    with open(path, encoding="utf-8") as fh:
        return [AccusationCandidate(**json.loads(line)) for line in fh if line.strip()]


def cohen_kappa(labels_a: Sequence[Hashable], labels_b: Sequence[Hashable]) -> float:
    """Chance-corrected agreement between two annotators.

    When chance agreement is 1 (both annotators used one and the same label
    throughout) the value is defined as 1.0.
    """
    if len(labels_a) != len(labels_b):
        raise ValueError(f"length mismatch: {len(labels_a)} vs {len(labels_b)}")
    n = len(labels_a)
    if n == 0:
        raise ValueError("kappa needs at least one item")
    p_o = sum(a == b for a, b in zip(labels_a, labels_b)) / n
    ca, cb = Counter(labels_a), Counter(labels_b)
    p_e = sum(ca[k] * cb[k] for k in ca) / (n * n)
    if p_e == 1.0:
        return 1.0
    return (p_o - p_e) / (1.0 - p_e)


def kappa_from_confusion(matrix: Sequence[Sequence[int]]) -> float:
    """Kappa from a square table; rows are annotator A's labels, columns B's."""
    a, b = [], []
    for i, row in enumerate(matrix):
        for j, count in enumerate(row):
            a += [i] * count
            b += [j] * count
    return cohen_kappa(a, b)


@dataclass(frozen=True)
class UserStats:
    user_id: str
    comment_count: int
    accusation_mentions: int = 0
    # distinct accusing users; kept alongside the comment-level count
    distinct_accusers: int = 0

    def __post_init__(self):
        if min(self.comment_count, self.accusation_mentions, self.distinct_accusers) < 0:
            raise ValueError("user stats must be non-negative")


def compute_user_stats(comments: Sequence[Comment], accusations: Iterable[AccusationCandidate] = ()) -> list[UserStats]:
    by_id = {c.id: c for c in comments}
    counts = Counter(c.user_id for c in comments)
    accusing: dict[str, set[str]] = defaultdict(set)
    accusers: dict[str, set[str]] = defaultdict(set)
    for a in accusations:
        accused = by_id.get(a.accused_comment_id)
        if accused is None:
            continue
        accusing[accused.user_id].add(a.accusation_comment_id)
        src = by_id.get(a.accusation_comment_id)
        if src is not None:
            accusers[accused.user_id].add(src.user_id)
    users = sorted(set(counts) | set(accusing))
    return [UserStats(u, counts[u], len(accusing[u]), len(accusers[u])) for u in users]


def write_user_stats(stats: Iterable[UserStats], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("#user_id\tcomment_count\taccusation_mentions\tdistinct_accusers\n")
        for s in stats:
            fh.write(f"{s.user_id}\t{s.comment_count}\t{s.accusation_mentions}\t{s.distinct_accusers}\n")


def load_user_stats(path: str | Path) -> list[UserStats]:
    """TSV rows ``user_id, comment_count[, accusation_mentions[, distinct_accusers]]``."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.rstrip("\n").split("\t")
            if not 2 <= len(parts) <= 4:
                raise ValueError(f"{path}:{lineno}: expected 2-4 tab-separated fields")
            try:
                out.append(UserStats(parts[0], *(int(x) for x in parts[1:])))
            except ValueError as e:
                raise ValueError(f"{path}:{lineno}: {e}") from None
    return out


@dataclass
class LabeledDataset:
    examples: list[tuple[Comment, Label]]
    pairing_seed: int
    dropped_troll_ids: list[str] = field(default_factory=list)
    info: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.examples)

    @property
    def comments(self) -> list[Comment]:
        return [c for c, _ in self.examples]

    @property
    def labels(self) -> list[Label]:
        return [lab for _, lab in self.examples]

    def targets(self) -> list[int]:
        """1 for trolls, 0 for non-trolls."""
        return [int(lab.is_troll) for _, lab in self.examples]

    def class_counts(self) -> tuple[int, int]:
        t = self.targets()
        return sum(t), len(t) - sum(t)


def write_dataset(ds: LabeledDataset, path: str | Path) -> Path:
    """Write examples as JSON lines plus a ``.meta.json`` sidecar."""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for c, lab in ds.examples:
            rec = c.to_record()
            rec["label"] = lab.value
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")
    meta = path.with_name(path.name + ".meta.json")
    meta.write_text(
        json.dumps({"pairing_seed": ds.pairing_seed, "dropped_troll_ids": ds.dropped_troll_ids, "info": ds.info}, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    return meta


def load_dataset(path: str | Path) -> LabeledDataset:
    path = Path(path)
    examples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            rec = json.loads(line)
            try:
                label = Label(rec.pop("label"))
            except (KeyError, ValueError):
                raise ValueError(f"{path}:{lineno}: missing or unknown label") from None
            examples.append((Comment.from_record(rec), label))
    meta = path.with_name(path.name + ".meta.json")
    info = json.loads(meta.read_text(encoding="utf-8")) if meta.exists() else {}
    return LabeledDataset(examples, info.get("pairing_seed", 0), info.get("dropped_troll_ids", []), info.get("info", {}))


def build_pairs(
    troll_comments: Sequence[tuple[Comment, Label]],
    all_comments: Sequence[Comment],
    stats: Sequence[UserStats],
    accused_users: set[str],
    seed: int,
    min_comments: int = MIN_NONTROLL_COMMENTS,
) -> LabeledDataset:
    """Pair every troll comment with a random non-troll comment from its thread.

    Eligible partners are written by users with at least ``min_comments``
    comments who are neither accused nor authors of any troll comment given
    here. Partners are drawn without replacement; a troll comment left with no
    eligible partner is dropped and its id recorded.
    """
    counts = {s.user_id: s.comment_count for s in stats}
    troll_ids = {c.id for c, _ in troll_comments}
    excluded = set(accused_users) | {c.user_id for c, _ in troll_comments}
    pools: dict[str, list[Comment]] = defaultdict(list)
    for c in all_comments:
        if c.id in troll_ids or c.user_id in excluded:
            continue
        if counts.get(c.user_id, 0) >= min_comments:
            pools[c.publication_id].append(c)
    rng = random.Random(seed)
    used: set[str] = set()
    examples: list[tuple[Comment, Label]] = []
    dropped: list[str] = []
    for troll, label in troll_comments:
        if not label.is_troll:
            raise ValueError(f"comment {troll.id} is labelled {label.value}, expected a troll label")
        pool = [c for c in pools.get(troll.publication_id, ()) if c.id not in used]
        if not pool:
            dropped.append(troll.id)
            continue
        partner = pool[rng.randrange(len(pool))]
        used.add(partner.id)
        examples.append((troll, label))
        examples.append((partner, Label.NON_TROLL))
    if dropped:
        log.warning("%d troll comment(s) had no eligible same-thread partner and were dropped", len(dropped))
    return LabeledDataset(examples, seed, dropped)


def user_document(user_id: str, comments: Sequence[Comment]) -> Comment:
    """All of a user's comments as one document with averaged metadata."""
    from .features import metadata_features

    ordered = sorted(comments, key=lambda c: (c.timestamp, c.id))
    metas = [metadata_features(c) for c in ordered]
    avg = {k: sum(m[k] for m in metas) / len(metas) for k in metas[0]}
    tags = None
    if all(c.pos_tags is not None for c in ordered):
        tags = tuple(t for c in ordered for t in c.pos_tags)
    return Comment(
        id=user_id,
        user_id=user_id,
        publication_id="*",
        timestamp=ordered[0].timestamp,
        rank=1,
        thread_size=1,
        text="\n".join(c.text for c in ordered),
        pos_tags=tags,
        metadata=avg,
    )


def build_user_dataset(
    comments: Sequence[Comment],
    stats: Sequence[UserStats],
    min_mentions: int,
    seed: int,
    min_comments: int = MIN_NONTROLL_COMMENTS,
) -> LabeledDataset:
    """Users accused at least ``min_mentions`` times vs. never-accused active users.

    The larger class is subsampled (seeded) to the size of the smaller one.
    ``info`` records the pool sizes before balancing so callers can compute
    the majority-class baseline of the unbalanced population.
    """
    if min_mentions < 1:
        raise ValueError("min_mentions must be >= 1")
    positives = sorted(s.user_id for s in stats if s.accusation_mentions >= min_mentions)
    negatives = sorted(s.user_id for s in stats if s.accusation_mentions == 0 and s.comment_count >= min_comments)
    info = {"min_mentions": min_mentions, "positive_pool": len(positives), "negative_pool": len(negatives)}
    if not positives:
        log.warning("no user has >= %d accusation mentions; user dataset is empty", min_mentions)
        return LabeledDataset([], seed, info=info)
    rng = random.Random(seed)
    n = min(len(positives), len(negatives))
    if len(positives) > n:
        positives = sorted(rng.sample(positives, n))
    if len(negatives) > n:
        negatives = sorted(rng.sample(negatives, n))
    by_user: dict[str, list[Comment]] = defaultdict(list)
    for c in comments:
        by_user[c.user_id].append(c)
    examples = []
    for users, label in ((positives, Label.MENTIONED_TROLL), (negatives, Label.NON_TROLL)):
        for u in users:
            if not by_user.get(u):
                raise ValueError(f"user {u} has no comments in the corpus")
            examples.append((user_document(u, by_user[u]), label))
    return LabeledDataset(examples, seed, info=info)
