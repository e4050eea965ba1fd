"""Word vectors: skip-gram training, text-format I/O, k-means clustering, neighbours."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.special import expit

log = logging.getLogger(__name__)

DEFAULT_CLUSTERS = 5372


@dataclass
class EmbeddingTable:
    words: list[str]
    matrix: np.ndarray
    _index: dict[str, int] = field(default_factory=dict, repr=False, compare=False)
    _unit: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != len(self.words):
            raise ValueError("matrix must have one row per word")
        self._index = {w: i for i, w in enumerate(self.words)}
        if len(self._index) != len(self.words):
            raise ValueError("duplicate words in embedding table")

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    @property
    def vocab_size(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self._index

    def __getitem__(self, word: str) -> np.ndarray:
        return self.matrix[self._index[word]]

    def index(self, word: str) -> int:
        return self._index[word]

    def unit(self) -> np.ndarray:
        if self._unit is None:
            norms = np.linalg.norm(self.matrix, axis=1, keepdims=True)
            self._unit = np.divide(self.matrix, norms, out=np.zeros_like(self.matrix), where=norms > 0)
        return self._unit


def train_skipgram(
    corpus: Iterable[Sequence[str]],
    dim: int = 100,
    window: int = 5,
    negatives: int = 5,
    min_count: int = 5,
    epochs: int = 1,
    learning_rate: float = 0.025,
    seed: int = 0,
) -> EmbeddingTable:
    """Skip-gram with negative sampling, single worker, seeded.

    Each centre word uses a window shrunk uniformly at random to 1..window, as
    word2vec does; negatives come from the unigram distribution raised to 3/4
    and the learning rate decays linearly to 1e-4 of its start value.
    """
    if min(dim, window, negatives, min_count, epochs) < 1 or learning_rate <= 0:
        raise ValueError("training parameters must be positive")
    sentences = [list(s) for s in corpus]
    counts = Counter(w for s in sentences for w in s)
    vocab = sorted((w for w, c in counts.items() if c >= min_count), key=lambda w: (-counts[w], w))
    index = {w: i for i, w in enumerate(vocab)}
    encoded = [np.array([index[w] for w in s if w in index], dtype=np.int64) for s in sentences]
    encoded = [s for s in encoded if len(s) > 1]
    total = sum(len(s) for s in encoded)
    if total <= window:
        raise ValueError(f"corpus has {total} usable tokens, fewer than one window ({window + 1})")

    rng = np.random.default_rng(seed)
    V = len(vocab)
    w_in = (rng.random((V, dim)) - 0.5) / dim
    w_out = np.zeros((V, dim))
    freq = np.array([counts[w] for w in vocab], dtype=np.float64) ** 0.75
    cdf = np.cumsum(freq / freq.sum())
    cdf[-1] = 1.0

    planned = epochs * total
    seen = 0
    labels = np.zeros(negatives + 1)
    labels[0] = 1.0
    for _ in range(epochs):
        for sent in encoded:
            n = len(sent)
            shrink = rng.integers(0, window, size=n)
            for i in range(n):
                lr = learning_rate * max(1e-4, 1.0 - seen / planned)
                seen += 1
                w = window - shrink[i]
                lo, hi = max(0, i - w), min(n, i + w + 1)
                center = sent[i]
                for j in range(lo, hi):
                    if j == i:
                        continue
                    ctx = sent[j]
                    neg = np.searchsorted(cdf, rng.random(negatives), side="right")
                    targets = np.concatenate(([ctx], neg))
                    keep = np.ones(len(targets), dtype=bool)
                    keep[1:] = neg != ctx
                    targets, lab = targets[keep], labels[keep]
                    v = w_in[center]
                    u = w_out[targets]
                    g = (lab - expit(u @ v)) * lr
                    w_in[center] = v + g @ u
                    np.add.at(w_out, targets, np.outer(g, v))
    return EmbeddingTable(vocab, w_in)


def load_vectors(path: str | Path) -> EmbeddingTable:
    """Read ``word v1 .. vd`` lines with an optional ``vocab dim`` header."""
    rows: dict[str, np.ndarray] = {}
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip("\n").split(" ")
            parts = [p for p in parts if p]
            if not parts:
                continue
            if lineno == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
                continue
            word, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
                if dim == 0:
                    raise ValueError(f"{path}:{lineno}: row for {word!r} has no values")
            elif len(values) != dim:
                raise ValueError(f"{path}:{lineno}: row for {word!r} has {len(values)} values, expected {dim}")
            if word in rows:
                log.warning("%s:%d: duplicate word %r, keeping the later row", path, lineno, word)
                del rows[word]
            rows[word] = np.array(values, dtype=np.float64)
    if not rows:
        raise ValueError(f"{path}: no vectors")
    words = list(rows)
    return EmbeddingTable(words, np.vstack([rows[w] for w in words]))


def save_vectors(table: EmbeddingTable, path: str | Path, header: bool = True) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(f"{table.vocab_size} {table.dim}\n")
        for word, row in zip(table.words, table.matrix):
            fh.write(word + " " + " ".join(repr(float(x)) for x in row) + "\n")


@dataclass
class ClusterModel:
    k: int
    centroids: np.ndarray
    words: list[str]
    labels: np.ndarray
    history: list[float] = field(default_factory=list)
    n_iter: int = 0
    converged: bool = False

    @property
    def assignment(self) -> dict[str, int]:
        return {w: int(c) for w, c in zip(self.words, self.labels)}

    @property
    def inertia(self) -> float:
        return self.history[-1] if self.history else float("nan")


def _sq_dists(X: np.ndarray, C: np.ndarray, chunk: int = 4096) -> np.ndarray:
    out = np.empty((X.shape[0], C.shape[0]))
    cc = (C * C).sum(axis=1)
    for s in range(0, X.shape[0], chunk):
        x = X[s : s + chunk]
        d = (x * x).sum(axis=1)[:, None] - 2.0 * x @ C.T + cc[None, :]
        out[s : s + chunk] = np.maximum(d, 0.0)
    return out


def _kmeanspp(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = [int(rng.integers(n))]
    closest = _sq_dists(X, X[centers])[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        if total <= 0:
            # every point already coincides with a centre; take unused ones in order
            unused = np.setdiff1d(np.arange(n), centers)
            nxt = int(unused[0])
        else:
            nxt = int(np.searchsorted(np.cumsum(closest), rng.random() * total, side="right"))
            nxt = min(nxt, n - 1)
        centers.append(nxt)
        closest = np.minimum(closest, _sq_dists(X, X[[nxt]])[:, 0])
    return X[centers].copy()


def kmeans(
    table: EmbeddingTable,
    k: int = DEFAULT_CLUSTERS,
    seed: int = 0,
    max_iter: int = 100,
    tol: float = 1e-6,
) -> ClusterModel:
    """Lloyd's algorithm on raw vectors (squared Euclidean), k-means++ start.

    ``history`` holds the within-cluster sum of squares after every assignment
    step. A cluster that empties is moved onto the point farthest from its
    current centroid, which can only lower the objective.
    """
    X = table.matrix
    n = X.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must lie in [1, vocab_size={n}]")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    rng = np.random.default_rng(seed)
    C = _kmeanspp(X, k, rng)
    history: list[float] = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        D = _sq_dists(X, C)
        labels = D.argmin(axis=1)
        point_cost = ((X - C[labels]) ** 2).sum(axis=1)
        history.append(float(point_cost.sum()))
        new_C = C.copy()
        counts = np.bincount(labels, minlength=k)
        sums = np.zeros_like(C)
        np.add.at(sums, labels, X)
        filled = counts > 0
        new_C[filled] = sums[filled] / counts[filled, None]
        empty = np.flatnonzero(~filled)
        if len(empty):
            far = np.argsort(-point_cost, kind="stable")
            taken = set()
            for c, p in zip(empty, (p for p in far if p not in taken)):
                new_C[c] = X[p]
                taken.add(p)
        shift = float(np.sqrt(((new_C - C) ** 2).sum(axis=1)).max())
        C = new_C
        if shift < tol:
            converged = True
            break
    if not converged:
        log.warning("k-means stopped at max_iter=%d before converging", max_iter)
    D = _sq_dists(X, C)
    labels = D.argmin(axis=1)
    final = float(((X - C[labels]) ** 2).sum())
    history.append(final)
    return ClusterModel(k, C, list(table.words), labels, history, it, converged)


def save_clusters(model: ClusterModel, path: str | Path) -> Path:
    """Write ``word<TAB>cluster_id`` lines and a ``.centroids`` vector sidecar."""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for w, c in zip(model.words, model.labels):
            fh.write(f"{w}\t{int(c)}\n")
    sidecar = path.with_name(path.name + ".centroids")
    save_vectors(EmbeddingTable([str(i) for i in range(model.k)], model.centroids), sidecar)
    return sidecar


def load_clusters(path: str | Path) -> ClusterModel:
    path = Path(path)
    words, labels = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                w, c = line.split("\t")
                labels.append(int(c))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: expected word<TAB>cluster_id") from None
            words.append(w)
    sidecar = path.with_name(path.name + ".centroids")
    if sidecar.exists():
        cent = load_vectors(sidecar)
        centroids = cent.matrix
    else:
        centroids = np.zeros((max(labels, default=-1) + 1, 0))
    return ClusterModel(len(centroids), centroids, words, np.array(labels, dtype=np.int64), converged=True)


def nearest(table: EmbeddingTable, word: str, k: int) -> list[tuple[str, float]]:
    """Top-k cosine neighbours of ``word``, excluding itself; ties go lexicographic."""
    if word not in table:
        raise KeyError(f"{word!r} is not in the vocabulary")
    if k < 1:
        raise ValueError("k must be >= 1")
    U = table.unit()
    qi = table.index(word)
    sims = np.clip(U @ U[qi], -1.0, 1.0)
    order = np.lexsort((np.array(table.words), -sims))
    order = order[order != qi][:k]
    return [(table.words[i], float(sims[i])) for i in order]
