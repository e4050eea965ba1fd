"""L2-regularized logistic regression, metrics, and stratified cross-validation."""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .features import (
    ALL_GROUPS,
    FeatureGroup,
    FeatureRegistry,
    FeatureVector,
    RawFeatures,
    ScalerStats,
    fit_registry,
    restrict,
    transform_all,
)

log = logging.getLogger(__name__)

MODEL_FORMAT = "trolldetect-lr"
MODEL_VERSION = 1


@dataclass(frozen=True)
class TrainParams:
    C: float = 1.0
    tol: float = 1e-6
    max_iter: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.C <= 0 or self.tol <= 0 or self.max_iter < 1 or self.seed < 0:
            raise ValueError(f"invalid training parameters: {self}")


def _signed(y) -> np.ndarray:
    y = np.asarray(y)
    vals = set(np.unique(y).tolist())
    if vals <= {-1, 1}:
        return y.astype(np.float64)
    if vals <= {0, 1}:
        return np.where(y.astype(bool), 1.0, -1.0)
    raise ValueError(f"labels must be in {{0,1}} or {{-1,+1}}, got {sorted(vals)}")


def _margins(theta: np.ndarray, X, y: np.ndarray) -> np.ndarray:
    return y * (X @ theta[:-1] + theta[-1])


def objective_and_gradient(theta: np.ndarray, X, y, C: float) -> tuple[float, np.ndarray]:
    """Value and gradient of 0.5*||w||^2 + C * sum log(1 + exp(-y (w.x + b))).

    ``theta`` is the weight vector with the intercept appended; the intercept
    is not regularized.
    """
    theta = np.asarray(theta, dtype=np.float64)
    y = _signed(y)
    w = theta[:-1]
    m = _margins(theta, X, y)
    value = 0.5 * float(w @ w) + C * float(np.logaddexp(0.0, -m).sum())
    r = -C * y * expit(-m)
    grad = np.empty_like(theta)
    grad[:-1] = w + X.T @ r
    grad[-1] = r.sum()
    return value, grad


def _hess_vec(X, d: np.ndarray, C: float, v: np.ndarray) -> np.ndarray:
    z = C * d * (X @ v[:-1] + v[-1])
    out = np.empty_like(v)
    out[:-1] = v[:-1] + X.T @ z
    out[-1] = z.sum()
    return out


def _cg(hv, g: np.ndarray, rtol: float, max_iter: int) -> np.ndarray:
    """Approximately solve H p = -g by conjugate gradients."""
    p = np.zeros_like(g)
    r = -g.copy()
    d = r.copy()
    rr = float(r @ r)
    stop = rtol * np.sqrt(rr)
    for _ in range(max_iter):
        if np.sqrt(rr) <= stop:
            break
        Hd = hv(d)
        dHd = float(d @ Hd)
        if dHd <= 0:
            break
        alpha = rr / dHd
        p += alpha * d
        r -= alpha * Hd
        rr_new = float(r @ r)
        d = r + (rr_new / rr) * d
        rr = rr_new
    if not p.any():
        p = -g
    return p


@dataclass
class Model:
    weights: np.ndarray
    intercept: float
    registry: FeatureRegistry
    scaler: ScalerStats
    params: TrainParams
    mask: tuple[str, ...] = tuple(g.value for g in ALL_GROUPS)
    converged: bool = True
    n_iter: int = 0

    def margins(self, X) -> np.ndarray:
        return X @ self.weights + self.intercept

    def predict_proba(self, X) -> np.ndarray:
        return expit(self.margins(X))

    def predict(self, X) -> np.ndarray:
        # from the rounded probability, so label and probability never disagree
        return (self.predict_proba(X) >= 0.5).astype(int)


def minimize_lr(X, y, params: TrainParams) -> tuple[np.ndarray, bool, int]:
    """Newton-CG with Armijo backtracking; deterministic and full-batch."""
    y = _signed(y)
    n, dim = X.shape
    theta = np.zeros(dim + 1)
    C = params.C
    f, g = objective_and_gradient(theta, X, y, C)
    for it in range(params.max_iter + 1):
        gnorm = float(np.linalg.norm(g))
        if gnorm <= params.tol:
            return theta, True, it
        if it == params.max_iter:
            break
        s = expit(_margins(theta, X, y))
        d = s * (1.0 - s)
        p = _cg(lambda v: _hess_vec(X, d, C, v), g, min(0.5, np.sqrt(gnorm)), min(dim + 1, 500))
        slope = float(g @ p)
        if slope >= 0:
            p, slope = -g, -gnorm * gnorm
        t = 1.0
        accepted = False
        for _ in range(40):
            f_new, g_new = objective_and_gradient(theta + t * p, X, y, C)
            if f_new <= f + 1e-4 * t * slope:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            # near the optimum rounding hides the decrease; fall back on the gradient
            f_new, g_new = objective_and_gradient(theta + p, X, y, C)
            if np.linalg.norm(g_new) >= gnorm:
                log.warning("line search failed at gradient norm %.3g", gnorm)
                return theta, False, it
            t = 1.0
        theta = theta + t * p
        f, g = f_new, g_new
    log.warning("logistic regression hit max_iter=%d (gradient norm %.3g > tol %.3g)", params.max_iter, np.linalg.norm(g), params.tol)
    return theta, False, params.max_iter


def train_lr(
    X,
    y,
    params: TrainParams = TrainParams(),
    registry: FeatureRegistry | None = None,
    scaler: ScalerStats | None = None,
    mask: Iterable[FeatureGroup | str] | None = None,
) -> Model:
    X = sp.csr_matrix(X) if not sp.issparse(X) else X.tocsr()
    y = np.asarray(y)
    if X.shape[0] < 2:
        raise ValueError("need at least two training examples")
    if len(np.unique(y)) < 2:
        raise ValueError("training data must contain both classes")
    if not np.all(np.isfinite(X.data)):
        raise ValueError("training features contain non-finite values")
    theta, converged, n_iter = minimize_lr(X, y, params)
    if registry is None:
        registry = FeatureRegistry([("", str(i)) for i in range(X.shape[1])])
    if scaler is None:
        scaler = ScalerStats(np.zeros(X.shape[1]), np.ones(X.shape[1]))
    groups = tuple(g.value if isinstance(g, FeatureGroup) else g for g in (mask or ALL_GROUPS))
    return Model(theta[:-1].copy(), float(theta[-1]), registry, scaler, params, groups, converged, n_iter)


def predict(model: Model, x: FeatureVector) -> tuple[int, float]:
    """Label (1 = troll) and probability; ties at 0.5 go to the positive class."""
    margin = float(model.weights[x.indices] @ x.values) + model.intercept
    p = float(expit(margin))
    return int(p >= 0.5), p


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0


def compute_metrics(predictions: Sequence[int], gold: Sequence[int]) -> Metrics:
    """Binary metrics with the troll class (1) as positive; 0/0 ratios are 0."""
    if len(predictions) != len(gold):
        raise ValueError(f"length mismatch: {len(predictions)} predictions, {len(gold)} gold labels")
    p = np.asarray(predictions).astype(bool)
    g = np.asarray(gold).astype(bool)
    tp = int((p & g).sum())
    fp = int((p & ~g).sum())
    fn = int((~p & g).sum())
    tn = int((~p & ~g).sum())
    n = len(p)
    acc = (tp + tn) / n if n else 0.0
    prec = tp / (tp + fp) if tp + fp else 0.0
    rec = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
    return Metrics(acc, prec, rec, f1, tp, fp, fn, tn)


def stratified_folds(y: Sequence[int], folds: int, seed: int) -> np.ndarray:
    """Fold id per example; each class is shuffled (seeded) and dealt round-robin."""
    y = np.asarray(y)
    if folds < 2:
        raise ValueError("need at least 2 folds")
    classes, counts = np.unique(y, return_counts=True)
    if len(classes) < 2:
        raise ValueError("cross-validation needs both classes")
    if folds > counts.min():
        raise ValueError(f"{folds} folds exceed the smallest class size ({counts.min()})")
    rng = np.random.default_rng(seed)
    out = np.empty(len(y), dtype=np.int64)
    for c in classes:
        idx = np.flatnonzero(y == c)
        out[rng.permutation(idx)] = np.arange(len(idx)) % folds
    return out


def fold_hash(assignment: np.ndarray) -> str:
    return hashlib.sha256(np.asarray(assignment, dtype=np.int64).tobytes()).hexdigest()[:16]


@dataclass
class CVResult:
    pooled: Metrics
    per_fold: list[Metrics]
    folds: np.ndarray
    predictions: np.ndarray
    probabilities: np.ndarray
    fold_hash: str
    fit_stats: list[tuple[FeatureRegistry, ScalerStats]] = field(default_factory=list, repr=False)


def cross_validate(
    examples: Sequence[RawFeatures],
    labels: Sequence[int],
    folds: int = 10,
    params: TrainParams = TrainParams(),
    mask: Iterable[FeatureGroup] | None = None,
    seed: int = 0,
    keep_fit_stats: bool = False,
) -> CVResult:
    """Stratified k-fold CV; registry and scaler are fit on each training fold only.

    Pooled metrics are computed over the concatenated held-out predictions.
    """
    y = np.asarray(labels).astype(int)
    if len(examples) != len(y):
        raise ValueError("examples and labels differ in length")
    mask = frozenset(mask) if mask is not None else frozenset(ALL_GROUPS)
    raws = [restrict(r, mask) for r in examples]
    assign = stratified_folds(y, folds, seed)
    preds = np.zeros(len(y), dtype=int)
    probs = np.zeros(len(y))
    per_fold = []
    stats = []
    for k in range(folds):
        test = np.flatnonzero(assign == k)
        train = np.flatnonzero(assign != k)
        registry, scaler = fit_registry([raws[i] for i in train])
        Xtr = transform_all([raws[i] for i in train], registry, scaler)
        Xte = transform_all([raws[i] for i in test], registry, scaler)
        model = train_lr(Xtr, y[train], params, registry, scaler, mask)
        preds[test] = model.predict(Xte)
        probs[test] = model.predict_proba(Xte)
        per_fold.append(compute_metrics(preds[test], y[test]))
        if keep_fit_stats:
            stats.append((registry, scaler))
    return CVResult(compute_metrics(preds, y), per_fold, assign, preds, probs, fold_hash(assign), stats)


def fit_model(
    examples: Sequence[RawFeatures],
    labels: Sequence[int],
    params: TrainParams = TrainParams(),
    mask: Iterable[FeatureGroup] | None = None,
) -> Model:
    mask = frozenset(mask) if mask is not None else frozenset(ALL_GROUPS)
    raws = [restrict(r, mask) for r in examples]
    registry, scaler = fit_registry(raws)
    X = transform_all(raws, registry, scaler)
    ordered = sorted(mask, key=ALL_GROUPS.index)
    return train_lr(X, labels, params, registry, scaler, ordered)


def _model_body(model: Model) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "params": asdict(model.params),
        "mask": list(model.mask),
        "registry": [list(k) for k in model.registry.keys],
        "scaler": {"min": model.scaler.min.tolist(), "max": model.scaler.max.tolist()},
        "weights": model.weights.tolist(),
        "intercept": model.intercept,
        "converged": model.converged,
        "n_iter": model.n_iter,
    }


def _digest(body: dict) -> str:
    blob = json.dumps(body, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def save_model(model: Model, path: str | Path) -> str:
    body = _model_body(model)
    body["content_hash"] = _digest(body)
    Path(path).write_text(json.dumps(body, sort_keys=True, ensure_ascii=False, indent=1) + "\n", encoding="utf-8")
    return body["content_hash"]


def load_model(path: str | Path) -> Model:
    body = json.loads(Path(path).read_text(encoding="utf-8"))
    if body.get("format") != MODEL_FORMAT:
        raise ValueError(f"{path}: not a model file")
    if body.get("version") != MODEL_VERSION:
        raise ValueError(f"{path}: unsupported model version {body.get('version')}")
    stored = body.pop("content_hash", None)
    if stored != _digest(body):
        raise ValueError(f"{path}: content hash mismatch")
    registry = FeatureRegistry([tuple(k) for k in body["registry"]])
    scaler = ScalerStats(np.array(body["scaler"]["min"]), np.array(body["scaler"]["max"]))
    weights = np.array(body["weights"], dtype=np.float64)
    if len(weights) != registry.n_columns:
        raise ValueError(f"{path}: weight length does not match registry")
    return Model(
        weights,
        float(body["intercept"]),
        registry,
        scaler,
        TrainParams(**body["params"]),
        tuple(body["mask"]),
        body["converged"],
        body["n_iter"],
    )
