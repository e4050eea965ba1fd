"""Command-line front end.

Every subcommand reads its inputs from files and writes its artifacts next to
a ``<artifact>.manifest.json`` that records input hashes, the effective
configuration and the seed. Nothing time-dependent goes into an artifact, so
re-running with the same inputs reproduces the same bytes.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import corpus, embeddings, experiments, learn
from .config import RESOURCE_ENV, RunConfig
from .corpus import Label
from .features import ALL_GROUPS, extract_raw, parse_groups, transform

log = logging.getLogger("trolldetect")


class CommandError(Exception):
    pass


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(
    primary: str | Path,
    command: str,
    inputs: Sequence[str | Path],
    config: dict,
    seed: int,
    outputs: Sequence[str | Path] = (),
) -> Path:
    primary = Path(primary)
    outs = [primary, *map(Path, outputs)]
    body = {
        "command": command,
        "seed": seed,
        "config": config,
        "inputs": {str(p): sha256_file(p) for p in inputs},
        "outputs": {str(p): sha256_file(p) for p in outs},
    }
    path = primary.with_name(primary.name + ".manifest.json")
    path.write_text(json.dumps(body, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
    return path


def _run_config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    for key in ("seed", "folds", "mask", "resources", "clusters", "vectors", "C"):
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, key, value)
    return cfg


def _config_inputs(cfg: RunConfig, args) -> list[Path]:
    files = [Path(args.config)] if args.config else []
    for value in cfg.resolved().values():
        for p in value if isinstance(value, list) else [value]:
            if p is not None and Path(p).is_file():
                files.append(Path(p))
    return files


def _experiment_config(cfg: RunConfig, mode: str, dataset: str, **extra) -> experiments.ExperimentConfig:
    return experiments.ExperimentConfig(
        dataset=dataset,
        mode=mode,
        groups=tuple(sorted(cfg.groups, key=ALL_GROUPS.index)),
        folds=cfg.folds,
        seed=cfg.seed,
        params=cfg.params,
        **extra,
    )


def _out(path: str) -> Path:
    p = Path(path)
    if p.parent and not p.parent.exists():
        raise CommandError(f"output directory {p.parent} does not exist")
    return p


def _stats(comments, candidates, counts_path: str | None) -> list[corpus.UserStats]:
    accepted = [c for c in candidates if c.accepted]
    stats = corpus.compute_user_stats(comments, accepted)
    override = {s.user_id: s.comment_count for s in corpus.load_user_stats(counts_path)} if counts_path else {}
    if not override:
        return stats
    by_user = {s.user_id: s for s in stats}
    for u in set(override) - set(by_user):
        by_user[u] = corpus.UserStats(u, 0)
    return [
        corpus.UserStats(u, override.get(u, s.comment_count), s.accusation_mentions, s.distinct_accusers)
        for u, s in sorted(by_user.items())
    ]


def _read_labels(path: str) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip() and not line.startswith("#")]


# subcommands ---------------------------------------------------------------


def cmd_ingest(args, cfg: RunConfig) -> int:
    problems: list = []
    comments = corpus.load_comments(args.input, args.format, strict=args.strict, problems=problems)
    out = _out(args.out)
    corpus.write_comments(comments, out)
    write_manifest(out, "ingest", [args.input], {"format": args.format, "strict": args.strict}, cfg.seed)
    print(f"{len(comments)} comment(s) written, {len(problems)} skipped")
    return 0


def cmd_mine(args, cfg: RunConfig) -> int:
    comments = corpus.load_comments(args.comments, strict=args.strict)
    trig_path = args.triggers or cfg.resolved()["triggers"]
    if trig_path is None:
        raise CommandError("no trigger lexicon: pass --triggers or put triggers.txt in the resource directory")
    cands = corpus.mine_accusations(comments, corpus.load_triggers(trig_path))
    out = _out(args.out)
    corpus.write_candidates(cands, out)
    write_manifest(out, "mine-accusations", [args.comments, trig_path], {}, cfg.seed)
    print(f"{len(cands)} accusation candidate(s)")
    return 0


def cmd_kappa(args, cfg: RunConfig) -> int:
    print(repr(corpus.cohen_kappa(_read_labels(args.a), _read_labels(args.b))))
    return 0


def _troll_list(args, comments, candidates) -> list[tuple[corpus.Comment, Label]]:
    by_id = {c.id: c for c in comments}
    trolls: dict[str, Label] = {}
    if args.trolls:
        with open(args.trolls, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip() or line.startswith("#"):
                    continue
                cid, _, lab = line.rstrip("\n").partition("\t")
                try:
                    label = Label(lab) if lab else Label.PAID_TROLL
                except ValueError:
                    raise CommandError(f"{args.trolls}:{lineno}: unknown label {lab!r}") from None
                trolls[cid] = label
    else:
        for cand in candidates:
            if cand.accepted:
                trolls.setdefault(cand.accused_comment_id, Label.MENTIONED_TROLL)
    missing = sorted(set(trolls) - set(by_id))
    if missing:
        raise CommandError(f"{len(missing)} troll comment id(s) not in the corpus, e.g. {missing[0]}")
    return [(by_id[cid], lab) for cid, lab in sorted(trolls.items())]


def cmd_pair(args, cfg: RunConfig) -> int:
    comments = corpus.load_comments(args.comments, strict=args.strict)
    cands = corpus.load_candidates(args.candidates) if args.candidates else []
    if not args.trolls and not cands:
        raise CommandError("pass --trolls (leaked troll ids) or --candidates (annotated accusations)")
    trolls = _troll_list(args, comments, cands)
    by_id = {c.id: c for c in comments}
    accused = {by_id[c.accused_comment_id].user_id for c in cands if c.accepted and c.accused_comment_id in by_id}
    stats = _stats(comments, cands, args.user_counts)
    ds = corpus.build_pairs(trolls, comments, stats, accused, cfg.seed)
    out = _out(args.out)
    meta = corpus.write_dataset(ds, out)
    inputs = [p for p in (args.comments, args.candidates, args.trolls, args.user_counts) if p]
    write_manifest(out, "pair", inputs, {"seed": cfg.seed}, cfg.seed, [meta])
    print(f"{len(ds)} example(s), {len(ds.dropped_troll_ids)} troll comment(s) dropped")
    return 0


def cmd_train_embeddings(args, cfg: RunConfig) -> int:
    from .textproc import tokenize

    comments = corpus.load_comments(args.comments, strict=args.strict)
    sentences = [[t.lower() for t in tokenize(c.text).tokens] for c in comments]
    table = embeddings.train_skipgram(
        sentences,
        dim=args.dim,
        window=args.window,
        negatives=args.negatives,
        min_count=args.min_count,
        epochs=args.epochs,
        seed=cfg.seed,
    )
    out = _out(args.out)
    embeddings.save_vectors(table, out)
    params = {k: getattr(args, k) for k in ("dim", "window", "negatives", "min_count", "epochs")}
    write_manifest(out, "train-embeddings", [args.comments], params, cfg.seed)
    print(f"{table.vocab_size} word vector(s) of dimension {table.dim}")
    return 0


def cmd_cluster(args, cfg: RunConfig) -> int:
    table = embeddings.load_vectors(args.input)
    model = embeddings.kmeans(table, k=args.k, seed=cfg.seed, max_iter=args.max_iter)
    out = _out(args.out)
    sidecar = embeddings.save_clusters(model, out)
    write_manifest(out, "cluster", [args.input], {"k": args.k, "max_iter": args.max_iter}, cfg.seed, [sidecar])
    print(f"{model.k} cluster(s), objective {model.inertia:.6g}, {model.n_iter} iteration(s)")
    return 0


def _dataset_features(path: str, cfg: RunConfig, mask):
    ds = corpus.load_dataset(path)
    if len(ds) == 0:
        raise CommandError(f"dataset {path} is empty")
    resources = cfg.load_resources()
    raws, labels = experiments.extract_dataset(ds, mask, resources)
    return ds, raws, labels


def cmd_train(args, cfg: RunConfig) -> int:
    mask = cfg.groups
    _, raws, labels = _dataset_features(args.dataset, cfg, mask)
    model = learn.fit_model(raws, labels, cfg.params, mask)
    out = _out(args.out)
    learn.save_model(model, out)
    write_manifest(out, "train", [args.dataset, *_config_inputs(cfg, args)], cfg.to_dict(), cfg.seed)
    print(f"model with {model.registry.n_columns} column(s), converged={model.converged}")
    return 0


def _metrics_dict(m: learn.Metrics) -> dict:
    return {k: getattr(m, k) for k in ("accuracy", "precision", "recall", "f1", "tp", "fp", "fn", "tn")}


def cmd_evaluate(args, cfg: RunConfig) -> int:
    if args.model:
        model = learn.load_model(args.model)
        mask = parse_groups(model.mask)
        _, raws, labels = _dataset_features(args.dataset, cfg, mask)
        preds = [learn.predict(model, transform(r, model.registry, model.scaler))[0] for r in raws]
        body = {"mode": "held-out", "metrics": _metrics_dict(learn.compute_metrics(preds, labels))}
        inputs = [args.dataset, args.model]
    else:
        mask = cfg.groups
        _, raws, labels = _dataset_features(args.dataset, cfg, mask)
        cv = learn.cross_validate(raws, labels, cfg.folds, cfg.params, mask, cfg.seed)
        body = {
            "mode": "cross-validation",
            "folds": cfg.folds,
            "fold_hash": cv.fold_hash,
            "metrics": _metrics_dict(cv.pooled),
            "per_fold": [_metrics_dict(m) for m in cv.per_fold],
        }
        inputs = [args.dataset]
    text = json.dumps(body, indent=2, sort_keys=True) + "\n"
    if args.out:
        out = _out(args.out)
        out.write_text(text, encoding="utf-8")
        write_manifest(out, "evaluate", [*inputs, *_config_inputs(cfg, args)], cfg.to_dict(), cfg.seed)
    m = body["metrics"]
    print(f"accuracy {100 * m['accuracy']:.2f}  F1 {100 * m['f1']:.2f}")
    return 0


def _emit_tables(tables, args, cfg: RunConfig, command: str, inputs) -> None:
    text = experiments.emit_report(tables, args.format)
    if args.out:
        out = _out(args.out)
        experiments.save_tables(tables, out)
        extra = []
        if args.report:
            experiments.emit_report(tables, args.format, _out(args.report))
            extra.append(args.report)
        write_manifest(out, command, [*inputs, *_config_inputs(cfg, args)], cfg.to_dict(), cfg.seed, extra)
    sys.stdout.write(text)


def cmd_ablate(args, cfg: RunConfig) -> int:
    mode = args.mode.replace("-", "_")
    combos = tuple(parse_groups(c) for c in args.combo) if args.combo else None
    extra = {"workers": args.workers}
    if combos:
        extra["combos"] = combos
    econf = _experiment_config(cfg, mode, Path(args.dataset).stem, **extra)
    ds = corpus.load_dataset(args.dataset)
    table = experiments.run_ablation(ds, econf, cfg.load_resources())
    _emit_tables([table], args, cfg, "ablate", [args.dataset])
    return 0


def cmd_user_experiment(args, cfg: RunConfig) -> int:
    comments = corpus.load_comments(args.comments, strict=args.strict)
    if args.user_stats:
        stats = corpus.load_user_stats(args.user_stats)
    elif args.candidates:
        stats = _stats(comments, corpus.load_candidates(args.candidates), args.user_counts)
    else:
        raise CommandError("pass --candidates (annotated accusations) or --user-stats")
    thresholds = tuple(int(t) for t in args.thresholds.split(","))
    econf = _experiment_config(cfg, "user_level", Path(args.comments).stem, thresholds=thresholds)
    table = experiments.run_user_experiment(comments, stats, thresholds, econf, cfg.load_resources())
    inputs = [p for p in (args.comments, args.candidates, args.user_counts, args.user_stats) if p]
    _emit_tables([table], args, cfg, "user-experiment", inputs)
    return 0


def cmd_accusation_detector(args, cfg: RunConfig) -> int:
    comments = {c.id: c for c in corpus.load_comments(args.comments, strict=args.strict)}
    cands = corpus.load_candidates(args.candidates)
    data = []
    for cand in cands:
        if not cand.annotator_decisions:
            continue
        c = comments.get(cand.accusation_comment_id)
        if c is None:
            raise CommandError(f"accusation comment {cand.accusation_comment_id} not in the corpus")
        data.append((c, cand.accepted))
    econf = _experiment_config(cfg, "accusation_detector", Path(args.candidates).stem)
    cv = experiments.run_accusation_detector(data, econf, cfg.load_resources())
    body = {"examples": len(data), "folds": cfg.folds, "fold_hash": cv.fold_hash, "metrics": _metrics_dict(cv.pooled)}
    if args.out:
        out = _out(args.out)
        out.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        write_manifest(out, "accusation-detector", [args.comments, args.candidates, *_config_inputs(cfg, args)], cfg.to_dict(), cfg.seed)
    print(f"precision {cv.pooled.precision:.4f}  recall {cv.pooled.recall:.4f}  F1 {cv.pooled.f1:.4f}")
    return 0


def cmd_report(args, cfg: RunConfig) -> int:
    tables = [t for p in args.tables for t in experiments.load_tables(p)]
    if not tables:
        raise CommandError("no tables to report")
    text = experiments.emit_report(tables, args.format)
    if args.out:
        out = _out(args.out)
        out.write_text(text, encoding="utf-8")
        write_manifest(out, "report", args.tables, {"format": args.format}, cfg.seed)
    else:
        sys.stdout.write(text)
    return 0


def cmd_score(args, cfg: RunConfig) -> int:
    model = learn.load_model(args.model)
    mask = parse_groups(model.mask)
    resources = cfg.load_resources()
    fmt = corpus.guess_format(args.input)
    comments = corpus.load_comments(args.input, fmt, strict=True)
    probs = []
    for c in comments:
        x = transform(extract_raw(c, mask, resources), model.registry, model.scaler)
        probs.append(learn.predict(model, x)[1])
    out = _out(args.out)
    if fmt == "csv":
        with open(args.input, encoding="utf-8", newline="") as src, open(out, "w", encoding="utf-8", newline="") as dst:
            reader = csv.DictReader(src)
            writer = csv.DictWriter(dst, fieldnames=[*reader.fieldnames, "probability"], lineterminator="\n")
            writer.writeheader()
            for row, p in zip(reader, probs):
                writer.writerow({**row, "probability": repr(p)})
    else:
        with open(out, "w", encoding="utf-8") as dst:
            for c, p in zip(comments, probs):
                rec = c.to_record()
                rec["probability"] = p
                dst.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")
    write_manifest(out, "score", [args.input, args.model, *_config_inputs(cfg, args)], cfg.to_dict(), cfg.seed)
    print(f"{len(probs)} comment(s) scored")
    return 0


# parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration (flat keys)")
    common.add_argument("--seed", type=int, help="single source of randomness (default 0)")
    common.add_argument("--folds", type=int, help="cross-validation folds (default 10)")
    common.add_argument("--mask", help="comma-separated feature groups, or 'all'")
    common.add_argument("--C", type=float, help="inverse regularization strength (default 1.0)")
    common.add_argument("--resources", help=f"resource directory (default ${RESOURCE_ENV} or the bundled demo set)")
    common.add_argument("--clusters", help="word-cluster file for the w2v_clusters group")
    common.add_argument("--vectors", help="word vectors; enables bad-word lexicon expansion")
    common.add_argument("--strict", action="store_true", help="abort on malformed input records")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="trolldetect", description="Troll-comment detection pipeline.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, parents=[common], help=help_, description=help_)
        p.set_defaults(func=func)
        return p

    p = add("ingest", cmd_ingest, "validate raw comments and write normalized JSON lines")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--format", choices=["jsonl", "csv"])
    p.add_argument("--out", required=True)

    p = add("mine-accusations", cmd_mine, "find replies that accuse their parent of trolling")
    p.add_argument("--comments", required=True)
    p.add_argument("--triggers")
    p.add_argument("--out", required=True)

    p = add("kappa", cmd_kappa, "Cohen's kappa between two label files (one label per line)")
    p.add_argument("a")
    p.add_argument("b")

    p = add("pair", cmd_pair, "pair troll comments with same-thread non-troll comments")
    p.add_argument("--comments", required=True)
    p.add_argument("--trolls", help="comment ids (optionally TAB label) of leaked troll comments")
    p.add_argument("--candidates", help="annotated accusation candidates")
    p.add_argument("--user-counts", help="TSV of full-history comment counts per user")
    p.add_argument("--out", required=True)

    p = add("train-embeddings", cmd_train_embeddings, "train skip-gram word vectors on comment text")
    p.add_argument("--comments", required=True)
    p.add_argument("--dim", type=int, default=100)
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--negatives", type=int, default=5)
    p.add_argument("--min-count", type=int, default=5)
    p.add_argument("--epochs", type=int, default=1)
    p.add_argument("--out", required=True)

    p = add("cluster", cmd_cluster, "k-means over word vectors")
    p.add_argument("--in", dest="input", required=True, help="word-vector file")
    p.add_argument("--k", type=int, default=5372)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--out", required=True)

    p = add("train", cmd_train, "fit a logistic-regression model on a labeled dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)

    p = add("evaluate", cmd_evaluate, "cross-validate on a dataset, or test a saved model on it")
    p.add_argument("--dataset", required=True)
    p.add_argument("--model")
    p.add_argument("--out")

    def table_outputs(p):
        p.add_argument("--format", choices=["markdown", "csv"], default="markdown")
        p.add_argument("--out", help="tables as JSON (input to 'report')")
        p.add_argument("--report", help="rendered report file (needs --out)")

    p = add("ablate", cmd_ablate, "feature-group ablation table")
    p.add_argument("--dataset", required=True)
    p.add_argument("--mode", default="leave-one-out", choices=["all", "leave-one-out", "single-group", "group-combo"])
    p.add_argument("--combo", action="append", help="comma-separated groups (group-combo mode; repeatable)")
    p.add_argument("--workers", type=int, default=1, help="parallel CV runs")
    table_outputs(p)

    p = add("user-experiment", cmd_user_experiment, "user-level accuracy by minimum accusation mentions")
    p.add_argument("--comments", required=True)
    p.add_argument("--candidates", help="annotated accusations (mention counts are derived from accepted ones)")
    p.add_argument("--user-counts", help="TSV of full-history comment counts per user")
    p.add_argument("--user-stats", help="TSV of user_id, comment_count, accusation_mentions[, distinct_accusers]")
    p.add_argument("--thresholds", default="5,10,15,20")
    table_outputs(p)

    p = add("accusation-detector", cmd_accusation_detector, "bag-of-words CV over annotated accusation candidates")
    p.add_argument("--comments", required=True)
    p.add_argument("--candidates", required=True)
    p.add_argument("--out")

    p = add("report", cmd_report, "render saved tables as markdown or CSV")
    p.add_argument("tables", nargs="+")
    p.add_argument("--format", choices=["markdown", "csv"], default="markdown")
    p.add_argument("--out")

    p = add("score", cmd_score, "append a troll probability to each comment")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        cfg = _run_config(args)
        return args.func(args, cfg)
    except (CommandError, ValueError, FileNotFoundError, OSError, KeyError) as e:
        msg = e.args[0] if isinstance(e, KeyError) and e.args else e
        print(f"trolldetect {args.command}: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
