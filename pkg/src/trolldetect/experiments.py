"""Ablation, user-level, and accusation-detector experiments and their report tables."""

from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import Comment, LabeledDataset, UserStats, build_user_dataset
from .features import ALL_GROUPS, BOW_GROUPS, FeatureGroup, RawFeatures, Resources, extract_raw, parse_groups
from .learn import CVResult, TrainParams, cross_validate

log = logging.getLogger(__name__)

MODES = ("all", "leave_one_out", "single_group", "group_combo", "user_level", "accusation_detector")
DEFAULT_THRESHOLDS = (5, 10, 15, 20)

G = FeatureGroup
GROUP_LABELS = {
    G.BOW_NO_STOP: "bow, no stop",
    G.BOW_WITH_STOP: "bow with stop",
    G.BOW_STEMS: "bow stems",
    G.WORD_2GRAMS: "word 2-grams",
    G.WORD_3GRAMS: "word 3-grams",
    G.CHAR_NGRAMS: "char n-grams",
    G.WORD_PREFIX: "word preff",
    G.WORD_SUFFIX: "word suff",
    G.EMOTICONS: "emoticons",
    G.PUNCT: "punct",
    G.METADATA: "metadata",
    G.W2V_CLUSTERS: "w2v clusters",
    G.SENTIMENT: "sentiment",
    G.BAD_WORDS: "bad words",
    G.MENTIONS: "mentions",
    G.POS: "POS",
    G.NE: "NE",
}
_SHORT = {
    G.SENTIMENT: "Sent",
    G.BAD_WORDS: "bad",
    G.POS: "pos",
    G.NE: "NE",
    G.METADATA: "meta",
    G.PUNCT: "punct",
    G.MENTIONS: "ment",
}

REFERENCE_COMBOS: tuple[tuple[str, frozenset[FeatureGroup]], ...] = (
    ("Sent,bad,pos,NE,meta,punct", frozenset({G.SENTIMENT, G.BAD_WORDS, G.POS, G.NE, G.METADATA, G.PUNCT})),
    ("Sent,bad,pos,NE", frozenset({G.SENTIMENT, G.BAD_WORDS, G.POS, G.NE})),
    ("Only sent,bad", frozenset({G.SENTIMENT, G.BAD_WORDS})),
    ("Sent,bad,ment,NE", frozenset({G.SENTIMENT, G.BAD_WORDS, G.MENTIONS, G.NE})),
)


def combo_label(groups: Iterable[FeatureGroup]) -> str:
    groups = frozenset(groups)
    for label, combo in REFERENCE_COMBOS:
        if combo == groups:
            return label
    ordered = sorted(groups, key=ALL_GROUPS.index)
    return ",".join(_SHORT.get(g, GROUP_LABELS[g]) for g in ordered)


def without_label(group: FeatureGroup) -> str:
    name = GROUP_LABELS[group]
    return f"All - ({name})" if "," in name else f"All - {name}"


@dataclass
class ExperimentConfig:
    dataset: str = "dataset"
    mode: str = "leave_one_out"
    groups: tuple[FeatureGroup, ...] = ALL_GROUPS
    combos: tuple[frozenset[FeatureGroup], ...] = tuple(c for _, c in REFERENCE_COMBOS)
    thresholds: tuple[int, ...] = ()
    folds: int = 10
    seed: int = 0
    params: TrainParams = field(default_factory=TrainParams)
    workers: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        self.groups = tuple(sorted(parse_groups([getattr(g, "value", g) for g in self.groups]), key=ALL_GROUPS.index))
        self.combos = tuple(parse_groups([getattr(g, "value", g) for g in c]) for c in self.combos)
        self.thresholds = tuple(int(t) for t in self.thresholds)
        if self.thresholds and self.mode != "user_level":
            raise ValueError("thresholds are only valid in user_level mode")
        if self.mode == "user_level":
            if not self.thresholds:
                self.thresholds = DEFAULT_THRESHOLDS
            if list(self.thresholds) != sorted(self.thresholds) or min(self.thresholds) < 1:
                raise ValueError("thresholds must be positive and ascending")
        if self.mode == "group_combo" and not self.combos:
            raise ValueError("group_combo mode needs at least one combination")
        if any(not c for c in self.combos):
            raise ValueError("empty group combination")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        """Build from flat keys: dataset, mode, groups, combos, thresholds, folds, seed, C, tol, max_iter, workers."""
        known = {"dataset", "mode", "groups", "combos", "thresholds", "folds", "seed", "C", "tol", "max_iter", "workers"}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config key(s): {sorted(extra)}")
        kw = {k: d[k] for k in ("dataset", "mode", "folds", "seed", "workers") if k in d}
        if "mode" in kw:
            kw["mode"] = kw["mode"].replace("-", "_")
        if "groups" in d:
            kw["groups"] = tuple(parse_groups(d["groups"]))
        if "combos" in d:
            kw["combos"] = tuple(parse_groups(c) for c in d["combos"])
        if "thresholds" in d:
            kw["thresholds"] = tuple(d["thresholds"])
        seed = int(d.get("seed", 0))
        kw["params"] = TrainParams(
            C=float(d.get("C", 1.0)), tol=float(d.get("tol", 1e-6)), max_iter=int(d.get("max_iter", 100)), seed=seed
        )
        return cls(**kw)


@dataclass
class ReportRow:
    label: str
    f: float | None
    acc: float | None
    fold_hash: str = ""
    groups: tuple[str, ...] = ()
    diff: float | None = None
    diff_balanced: float | None = None
    baseline: float | None = None
    positives: int = 0
    negatives: int = 0
    empty: bool = False


@dataclass
class ReportTable:
    """Rows hold percentages. ``ablation`` tables sort rows by F, best first;
    ``thresholds`` tables keep one row per threshold in ascending order."""

    title: str
    rows: list[ReportRow]
    baseline: float = 50.0
    kind: str = "ablation"

    def to_dict(self) -> dict:
        return {"title": self.title, "kind": self.kind, "baseline": self.baseline, "rows": [asdict(r) for r in self.rows]}

    @classmethod
    def from_dict(cls, d: dict) -> "ReportTable":
        rows = [ReportRow(**{**r, "groups": tuple(r.get("groups", ()))}) for r in d["rows"]]
        return cls(d["title"], rows, d.get("baseline", 50.0), d.get("kind", "ablation"))


def save_tables(tables: Sequence[ReportTable], path: str | Path) -> None:
    Path(path).write_text(json.dumps([t.to_dict() for t in tables], indent=1, ensure_ascii=False) + "\n", encoding="utf-8")


def load_tables(path: str | Path) -> list[ReportTable]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(data, dict):
        data = [data]
    return [ReportTable.from_dict(d) for d in data]


def majority_baseline(labels: Sequence[int]) -> float:
    y = np.asarray(labels)
    if len(y) == 0:
        return 0.0
    pos = int(y.sum())
    return 100.0 * max(pos, len(y) - pos) / len(y)


def extract_dataset(dataset: LabeledDataset, mask: Iterable[FeatureGroup], resources: Resources) -> tuple[list[RawFeatures], list[int]]:
    mask = frozenset(mask)
    return [extract_raw(c, mask, resources) for c in dataset.comments], dataset.targets()


def _row(label: str, cv: CVResult, groups: Iterable[FeatureGroup]) -> ReportRow:
    return ReportRow(
        label,
        100.0 * cv.pooled.f1,
        100.0 * cv.pooled.accuracy,
        cv.fold_hash,
        tuple(g.value for g in sorted(groups, key=ALL_GROUPS.index)),
    )


def ablation_masks(config: ExperimentConfig) -> list[tuple[str, frozenset[FeatureGroup]]]:
    full = frozenset(config.groups)
    if config.mode == "all":
        return [("All", full)]
    if config.mode == "leave_one_out":
        return [("All", full)] + [(without_label(g), full - {g}) for g in config.groups]
    if config.mode == "single_group":
        return [(f"Only {GROUP_LABELS[g]}", frozenset({g})) for g in config.groups]
    if config.mode == "group_combo":
        return [(combo_label(c), frozenset(c)) for c in config.combos]
    raise ValueError(f"mode {config.mode!r} is not an ablation mode")


def _cv_job(job) -> CVResult:
    raws, labels, folds, params, mask, seed = job
    return cross_validate(raws, labels, folds, params, mask, seed)


def run_ablation_raw(
    raws: Sequence[RawFeatures],
    labels: Sequence[int],
    config: ExperimentConfig,
    title: str | None = None,
) -> ReportTable:
    """Ablation table over pre-extracted features.

    Every row uses the same seed and therefore the same fold assignment, so
    differences between rows come from the feature change alone.
    """
    masks = ablation_masks(config)
    jobs = [(raws, labels, config.folds, config.params, m, config.seed) for _, m in masks]
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_cv_job, jobs))
    else:
        results = [_cv_job(j) for j in jobs]
    rows = [_row(label, cv, mask) for (label, mask), cv in zip(masks, results)]
    rows.sort(key=lambda r: -r.f)
    return ReportTable(title or f"{config.dataset}: {config.mode.replace('_', ' ')}", rows, majority_baseline(labels))


def run_ablation(dataset: LabeledDataset, config: ExperimentConfig, resources: Resources, title: str | None = None) -> ReportTable:
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    pos, neg = dataset.class_counts()
    if pos != neg:
        raise ValueError(f"ablation expects a balanced dataset, got {pos} trolls vs {neg} non-trolls")
    needed = frozenset().union(*(m for _, m in ablation_masks(config)))
    raws, labels = extract_dataset(dataset, needed, resources)
    return run_ablation_raw(raws, labels, config, title)


def run_user_experiment(
    comments: Sequence[Comment],
    stats: Sequence[UserStats],
    thresholds: Sequence[int],
    config: ExperimentConfig,
    resources: Resources,
    title: str | None = None,
) -> ReportTable:
    """One row per minimum-mention threshold.

    ``diff`` is accuracy minus the majority-class rate of the user population
    before balancing; ``diff_balanced`` is accuracy minus 50.
    """
    thresholds = list(thresholds)
    if not thresholds:
        raise ValueError("no thresholds given")
    if thresholds != sorted(thresholds):
        raise ValueError("thresholds must be ascending")
    mask = frozenset(config.groups)
    rows = []
    for t in thresholds:
        ds = build_user_dataset(comments, stats, t, config.seed)
        pos_pool, neg_pool = ds.info["positive_pool"], ds.info["negative_pool"]
        pool = pos_pool + neg_pool
        base = 100.0 * max(pos_pool, neg_pool) / pool if pool else 0.0
        n_pos, n_neg = ds.class_counts()
        if min(n_pos, n_neg) < 2:
            log.warning("threshold %d: not enough users (%d positive, %d negative); row left empty", t, n_pos, n_neg)
            rows.append(ReportRow(str(t), None, None, baseline=base, positives=n_pos, negatives=n_neg, empty=True))
            continue
        folds = min(config.folds, n_pos, n_neg)
        if folds < config.folds:
            log.warning("threshold %d: only %d users per class, using %d folds", t, min(n_pos, n_neg), folds)
        raws, labels = extract_dataset(ds, mask, resources)
        cv = cross_validate(raws, labels, folds, config.params, mask, config.seed)
        acc = 100.0 * cv.pooled.accuracy
        rows.append(
            ReportRow(
                str(t),
                100.0 * cv.pooled.f1,
                acc,
                cv.fold_hash,
                diff=acc - base,
                diff_balanced=acc - 50.0,
                baseline=base,
                positives=n_pos,
                negatives=n_neg,
            )
        )
    return ReportTable(title or f"{config.dataset}: users by minimum mentions", rows, 50.0, kind="thresholds")


def run_accusation_detector(
    candidates: Sequence[tuple[Comment, bool]],
    config: ExperimentConfig,
    resources: Resources,
) -> CVResult:
    """Cross-validated bag-of-words classifier separating real accusations from other trigger replies."""
    labels = [int(bool(lab)) for _, lab in candidates]
    if len(set(labels)) < 2:
        raise ValueError("accusation detector needs both accusation and non-accusation examples")
    mask = BOW_GROUPS
    raws = [extract_raw(c, mask, resources) for c, _ in candidates]
    return cross_validate(raws, labels, config.folds, config.params, mask, config.seed)


def fmt2(value: float) -> str:
    """Two decimals, halves rounded away from zero (78.056 -> 78.06)."""
    # trim binary noise such as 78.05499999999 before rounding
    d = Decimal(repr(round(value, 9)))
    return str(d.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def _signed2(value: float) -> str:
    s = fmt2(value)
    return s if s.startswith("-") else "+" + s


def _cell(value: float | None, fmt=fmt2, missing: str = "n/a") -> str:
    return missing if value is None else fmt(value)


def render_markdown(tables: Sequence[ReportTable]) -> str:
    if not tables:
        raise ValueError("no tables to render")
    out = []
    for t in tables:
        out.append(f"### {t.title}\n")
        if t.kind == "thresholds":
            out.append("| | " + " | ".join(r.label for r in t.rows) + " |")
            out.append("|---|" + "---:|" * len(t.rows))
            out.append("| Acc | " + " | ".join(_cell(r.acc) for r in t.rows) + " |")
            out.append("| Diff | " + " | ".join(_cell(r.diff, _signed2) for r in t.rows) + " |")
            out.append("| Diff vs 50 | " + " | ".join(_cell(r.diff_balanced, _signed2) for r in t.rows) + " |")
            out.append("| Users | " + " | ".join(f"{r.positives}+{r.negatives}" for r in t.rows) + " |")
        else:
            out.append("| Features | F | Acc |")
            out.append("|---|---:|---:|")
            for r in t.rows:
                out.append(f"| {r.label} | {fmt2(r.f)} | {fmt2(r.acc)} |")
            out.append(f"| Baseline | {fmt2(t.baseline)} | {fmt2(t.baseline)} |")
        out.append("")
    return "\n".join(out)


def render_csv(tables: Sequence[ReportTable]) -> str:
    """CSV with a ``label,f,acc`` header; several tables become blank-line separated blocks."""
    if not tables:
        raise ValueError("no tables to render")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for i, t in enumerate(tables):
        if i:
            buf.write("\n")
        if len(tables) > 1:
            buf.write(f"# {t.title}\n")
        if t.kind == "thresholds":
            w.writerow(["threshold", "acc", "diff", "diff_balanced", "majority_baseline", "positives", "negatives"])
            for r in t.rows:
                vals = [_cell(v, missing="") for v in (r.acc, r.diff, r.diff_balanced, r.baseline)]
                w.writerow([r.label, *vals, r.positives, r.negatives])
        else:
            w.writerow(["label", "f", "acc"])
            for r in t.rows:
                w.writerow([r.label, fmt2(r.f), fmt2(r.acc)])
            w.writerow(["Baseline", fmt2(t.baseline), fmt2(t.baseline)])
    return buf.getvalue()


def emit_report(tables: Sequence[ReportTable], fmt: str, path: str | Path | None = None) -> str:
    if fmt == "markdown":
        text = render_markdown(tables)
    elif fmt == "csv":
        text = render_csv(tables)
    else:
        raise ValueError(f"unknown report format {fmt!r}; use csv or markdown")
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text
