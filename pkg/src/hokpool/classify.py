"""One-vs-rest logistic classification, ranking metrics, and stratified cross-validation."""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import RunConfig
from .errors import (
    DimensionError,
    InvalidInputError,
    InvalidParameterError,
    NumericError,
    StratificationError,
    UndefinedMetricError,
)
from .pivots import build_pivot_set
from .pooling import (
    average_pool,
    concat,
    hok_descriptor,
    pool_batch,
    second_order_descriptor,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray
    biases: np.ndarray
    lam: float
    epochs: int
    objective_trace: tuple = ()

    @property
    def n_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def final_objective(self) -> float:
        return self.objective_trace[-1] if self.objective_trace else float("nan")


def _targets(ys, n_classes):
    y = -np.ones((len(ys), n_classes))
    y[np.arange(len(ys)), ys] = 1.0
    return y


def objective_and_gradient(weights, biases, xs, targets, lam):
    """L2-regularised one-vs-rest logistic loss and its gradient.

    ``J = mean_i sum_m log(1 + exp(-y_im (w_m . x_i + b_m))) + lam/2 |W|^2``
    with ``targets`` in {-1, +1}. Returns ``(J, dJ/dW, dJ/db)``.
    """
    n = xs.shape[0]
    margins = targets * (xs @ weights.T + biases)
    loss = np.logaddexp(0.0, -margins).sum() / n + 0.5 * lam * np.sum(weights**2)
    # d/dz log(1 + e^{-yz}) = -y * sigmoid(-yz)
    g = -targets * np.exp(-np.logaddexp(0.0, margins)) / n
    return float(loss), g.T @ xs + lam * weights, g.sum(axis=0)


def train_linear(
    xs,
    ys,
    lam: float = 1e-2,
    epochs: int = 300,
    seed: int = 0,
    n_classes: int | None = None,
) -> LinearModel:
    """Full-batch gradient descent with the fixed step ``1/L``.

    ``L`` bounds the curvature of the objective, so every step is a descent
    step and the recorded objective never increases.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=int)
    if xs.ndim != 2 or xs.shape[0] != ys.shape[0] or xs.shape[0] == 0:
        raise DimensionError(f"got {xs.shape} descriptors for {ys.shape} labels")
    if lam < 0 or epochs < 1:
        raise InvalidParameterError("need lam >= 0 and epochs >= 1")
    if not np.all(np.isfinite(xs)):
        raise InvalidInputError("descriptors contain non-finite values")
    if len(np.unique(ys)) < 2:
        raise InvalidInputError("training needs at least two classes")
    m = int(n_classes if n_classes is not None else ys.max() + 1)
    if ys.min() < 0 or ys.max() >= m:
        raise InvalidInputError(f"labels must lie in [0, {m})")

    n, dim = xs.shape
    targets = _targets(ys, m)
    aug_norm = np.linalg.norm(np.hstack([xs, np.ones((n, 1))]), ord=2)
    step = 1.0 / (aug_norm**2 / (4.0 * n) + lam)

    rng = np.random.default_rng(seed)
    w = 0.01 * rng.standard_normal((m, dim))
    b = np.zeros(m)
    trace = []
    for epoch in range(epochs):
        loss, gw, gb = objective_and_gradient(w, b, xs, targets, lam)
        if not np.isfinite(loss):
            raise NumericError(
                f"objective is {loss} at epoch {epoch} (step {step:.3e}, |W| {np.linalg.norm(w):.3e})"
            )
        trace.append(loss)
        w -= step * gw
        b -= step * gb
    trace.append(objective_and_gradient(w, b, xs, targets, lam)[0])
    return LinearModel(w, b, float(lam), int(epochs), tuple(trace))


def predict_scores(model: LinearModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model.weights.shape[1]:
        raise DimensionError(f"descriptor length {x.shape[-1]} != model input {model.weights.shape[1]}")
    return x @ model.weights.T + model.biases


def average_precision(scores, positives) -> float:
    """Mean over positives of the precision at each positive's rank (no interpolation).

    Ranking is by descending score with ties kept in input order.
    """
    scores = np.asarray(scores, dtype=float)
    positives = np.asarray(positives, dtype=bool)
    if scores.shape != positives.shape:
        raise DimensionError("scores and positives differ in length")
    n_pos = int(positives.sum())
    if n_pos == 0:
        raise UndefinedMetricError("average precision is undefined without positives")
    order = np.argsort(-scores, kind="stable")
    hits = positives[order]
    ranks = np.flatnonzero(hits) + 1
    return float(np.mean(np.arange(1, n_pos + 1) / ranks))


def stratified_folds(labels, k: int, seed: int = 0, class_names=None) -> list:
    """Seeded stratified split; returns the test indices of each fold.

    Each class is shuffled and dealt round-robin, continuing where the
    previous class stopped, so per-class fold sizes differ by at most one.
    """
    labels = np.asarray(labels)
    if k < 2:
        raise InvalidParameterError(f"need at least 2 folds, got {k}")
    rng = np.random.default_rng(seed)
    buckets = [[] for _ in range(k)]
    offset = 0
    for c in np.unique(labels):
        members = np.flatnonzero(labels == c)
        if len(members) < k:
            name = class_names[c] if class_names is not None else c
            raise StratificationError(f"class {name!r} has {len(members)} members, fewer than {k} folds")
        for j, idx in enumerate(rng.permutation(members)):
            buckets[(offset + j) % k].append(int(idx))
        offset += len(members)
    return [np.sort(np.array(b, dtype=int)) for b in buckets]


def ids_hash(ids) -> str:
    return hashlib.sha256("\n".join(sorted(ids)).encode()).hexdigest()[:16]


@dataclass
class EvalReport:
    per_class_ap: list
    map: float
    per_class_acc: list
    mean_class_acc: float
    confusion: list
    folds: list = field(default_factory=list)
    accuracy: float = float("nan")
    classes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "per_class_ap": self.per_class_ap,
            "map": self.map,
            "per_class_acc": self.per_class_acc,
            "mean_class_acc": self.mean_class_acc,
            "confusion": self.confusion,
            "folds": self.folds,
            "accuracy": self.accuracy,
            "classes": self.classes,
        }


def _class_metrics(scores, ys, n_classes):
    pred = np.argmax(scores, axis=1)
    confusion = np.zeros((n_classes, n_classes), dtype=int)
    np.add.at(confusion, (ys, pred), 1)
    ap = [np.nan] * n_classes
    acc = [np.nan] * n_classes
    for c in range(n_classes):
        mask = ys == c
        if mask.any():
            ap[c] = average_precision(scores[:, c], mask)
            acc[c] = float(np.mean(pred[mask] == c))
    return np.array(ap), np.array(acc), confusion


def describe(seqs, cfg: RunConfig, pivots=None) -> np.ndarray:
    """Descriptor matrix for ``seqs`` under the configured descriptor kind."""
    kind = cfg.descriptor
    so = cfg.second_order

    def one(seq):
        if kind == "average":
            return average_pool(seq)
        if kind == "second_order":
            return second_order_descriptor(seq, so.sigma, so.epsilon)
        h = hok_descriptor(seq, pivots, cfg.hok)
        if kind == "hok":
            return h
        return concat([h, second_order_descriptor(seq, so.sigma, so.epsilon)])

    return np.vstack([d.values for d in pool_batch(seqs, one, cfg.threads)])


def _prepare(train, test):
    # unit rows, then centred on the training mean
    def unit(a):
        norms = np.linalg.norm(a, axis=1, keepdims=True)
        return a / np.where(norms > 0, norms, 1.0)

    train, test = unit(train), unit(test)
    mu = train.mean(axis=0)
    return train - mu, test - mu


def run_fold(sequences, train_idx, test_idx, cfg: RunConfig, n_classes: int, fold: int = 0) -> dict:
    """Pivots, descriptors and classifier fitted on ``train_idx`` only; scored on ``test_idx``."""
    train = [sequences[i] for i in train_idx]
    test = [sequences[i] for i in test_idx]
    train_hash = ids_hash(s.id for s in train)
    pivots = None
    if cfg.descriptor.startswith("hok"):
        frames = np.vstack([s.scores for s in train])
        pc = cfg.pivots
        pivots = build_pivot_set(
            frames, pc.k_f, pc.k_t, pc.sigma_t, pc.gmm_max_iters, seed=cfg.seed, source=train_hash
        )
    x_train, x_test = _prepare(describe(train, cfg, pivots), describe(test, cfg, pivots))
    y_train = np.array([s.label for s in train])
    y_test = np.array([s.label for s in test])
    model = train_linear(
        x_train, y_train, cfg.classifier.lam, cfg.classifier.epochs, seed=cfg.seed, n_classes=n_classes
    )
    scores = predict_scores(model, x_test)
    ap, acc, confusion = _class_metrics(scores, y_test, n_classes)
    record = {
        "fold": fold,
        "n_train": len(train),
        "n_test": len(test),
        "train_ids_hash": train_hash,
        "pivot_source": pivots.source if pivots is not None else None,
        "pivot_fingerprint": pivots.fingerprint() if pivots is not None else None,
        "test_ids": [s.id for s in test],
        "per_class_ap": [None if np.isnan(v) else float(v) for v in ap],
        "map": float(np.nanmean(ap)),
        "per_class_acc": [None if np.isnan(v) else float(v) for v in acc],
        "mean_class_acc": float(np.nanmean(acc)),
        "accuracy": float(np.trace(confusion) / confusion.sum()),
        "confusion": confusion.tolist(),
        "final_objective": model.final_objective,
        "descriptor_length": int(x_train.shape[1]),
    }
    logger.info("fold %d: mean class acc %.3f, mAP %.3f", fold, record["mean_class_acc"], record["map"])
    return record


def cross_validate(
    sequences: Sequence,
    cfg: RunConfig,
    folds: int | None = None,
    seed: int | None = None,
    class_names=None,
) -> EvalReport:
    """Stratified k-fold evaluation; fold metrics are averaged, confusions summed."""
    k = cfg.folds if folds is None else folds
    seed = cfg.seed if seed is None else seed
    if len(sequences) == 0:
        raise InvalidInputError("dataset is empty")
    labels = np.array([s.label for s in sequences])
    n_classes = len(class_names) if class_names is not None else int(labels.max()) + 1
    splits = stratified_folds(labels, k, seed, class_names)
    everything = np.arange(len(sequences))
    records = []
    for i, test_idx in enumerate(splits):
        train_idx = np.setdiff1d(everything, test_idx)
        records.append(run_fold(sequences, train_idx, test_idx, cfg, n_classes, fold=i))

    def mean_of(key):
        vals = np.array([[np.nan if v is None else v for v in r[key]] for r in records], dtype=float)
        with np.errstate(all="ignore"):
            out = np.nanmean(vals, axis=0) if np.any(~np.isnan(vals)) else vals[0]
        return [None if np.isnan(v) else float(v) for v in out]

    confusion = np.sum([np.array(r["confusion"]) for r in records], axis=0)
    return EvalReport(
        per_class_ap=mean_of("per_class_ap"),
        map=float(np.mean([r["map"] for r in records])),
        per_class_acc=mean_of("per_class_acc"),
        mean_class_acc=float(np.mean([r["mean_class_acc"] for r in records])),
        confusion=confusion.tolist(),
        folds=records,
        accuracy=float(np.trace(confusion) / confusion.sum()),
        classes=list(class_names) if class_names is not None else list(range(n_classes)),
    )


SWEEP_AXES = {
    "alpha": "hok__alpha",
    "k_f": "pivots__k_f",
    "k_t": "pivots__k_t",
    "sigma_t": "pivots__sigma_t",
    "zeta2": None,
}


def sweep(sequences, cfg: RunConfig, axis: str, values, class_names=None) -> list:
    """Cross-validated scores along one hyper-parameter axis, one row per value."""
    if axis not in SWEEP_AXES:
        raise InvalidParameterError(f"unknown sweep axis {axis!r}; choose from {sorted(SWEEP_AXES)}")
    rows = []
    for value in values:
        if axis == "zeta2":
            point = cfg.with_overrides(hok__zeta1=1.0 - value, hok__zeta2=value)
        else:
            point = cfg.with_overrides(**{SWEEP_AXES[axis]: value})
        report = cross_validate(sequences, point, class_names=class_names)
        rows.append({"axis": axis, "value": value, "mean_class_acc": report.mean_class_acc, "map": report.map})
    return rows
