"""Pivot learning: diagonal-covariance GMM for score pivots, a fixed grid for time."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DegenerateFitError, InvalidInputError, InvalidParameterError
from .kernel_maps import PivotSet

logger = logging.getLogger(__name__)

VAR_FLOOR = 1e-4
KMEANS_STEPS = 10
_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class GmmModel:
    means: np.ndarray
    variances: np.ndarray
    weights: np.ndarray
    log_likelihood_trace: tuple
    converged: bool

    @property
    def k(self) -> int:
        return self.means.shape[0]

    def log_joint(self, x) -> np.ndarray:
        """Per-point, per-component ``log w_k + log N(x | mu_k, diag var_k)``, shape (n, K)."""
        return _log_joint(np.asarray(x, dtype=float), self.means, self.variances, self.weights)

    def mean_log_likelihood(self, x) -> float:
        return float(np.mean(_logsumexp(self.log_joint(x))))


class ScorePivots(NamedTuple):
    centers: np.ndarray
    sigmas: np.ndarray
    model: GmmModel


class TemporalPivots(NamedTuple):
    centers: np.ndarray
    sigma: float


def _logsumexp(a):
    m = np.max(a, axis=1, keepdims=True)
    return (m + np.log(np.sum(np.exp(a - m), axis=1, keepdims=True)))[:, 0]


def _log_joint(x, means, variances, weights):
    diff2 = (x[:, None, :] - means[None, :, :]) ** 2
    log_det = np.sum(np.log(variances), axis=1)
    maha = np.sum(diff2 / variances[None, :, :], axis=2)
    p = x.shape[1]
    return np.log(weights)[None, :] - 0.5 * (p * _LOG_2PI + log_det[None, :] + maha)


def _kmeans_pp(x, k, rng):
    n = len(x)
    centers = [x[rng.integers(n)]]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        probs = d2 / d2.sum()
        centers.append(x[rng.choice(n, p=probs)])
        d2 = np.minimum(d2, np.sum((x - centers[-1]) ** 2, axis=1))
    return np.array(centers)


def _lloyd(x, centers, steps):
    for _ in range(steps):
        labels = np.argmin(((x[:, None, :] - centers[None]) ** 2).sum(axis=2), axis=1)
        for j in range(len(centers)):
            members = x[labels == j]
            if len(members):
                centers[j] = members.mean(axis=0)
    labels = np.argmin(((x[:, None, :] - centers[None]) ** 2).sum(axis=2), axis=1)
    return centers, labels


def _m_step(x, resp, var_floor):
    nk = resp.sum(axis=0) + 10 * np.finfo(float).eps
    weights = nk / nk.sum()
    means = (resp.T @ x) / nk[:, None]
    diff2 = (x[:, None, :] - means[None, :, :]) ** 2
    variances = np.einsum("nk,nkp->kp", resp, diff2) / nk[:, None]
    # clamping is the exact constrained maximiser, so EM stays monotone
    return means, np.maximum(variances, var_floor), weights


def fit_gmm(
    x,
    k: int,
    max_iters: int = 100,
    seed: int = 0,
    tol: float = 1e-6,
    var_floor: float = VAR_FLOOR,
) -> GmmModel:
    """Fit a diagonal-covariance Gaussian mixture by EM.

    Initialisation is k-means++ seeding followed by ten Lloyd iterations. EM
    stops once the mean per-point log-likelihood improves by less than ``tol``
    or after ``max_iters`` M-steps.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] == 0:
        raise InvalidInputError("need a non-empty (n, p) array of points")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("GMM data has non-finite entries")
    if int(k) != k or k < 1:
        raise InvalidParameterError(f"component count must be a positive integer, got {k}")
    if max_iters < 1:
        raise InvalidParameterError("max_iters must be at least 1")
    n_distinct = len(np.unique(x, axis=0))
    if k > n_distinct:
        raise DegenerateFitError(f"{k} components requested but only {n_distinct} distinct points")

    rng = np.random.default_rng(seed)
    means, labels = _lloyd(x, _kmeans_pp(x, k, rng), KMEANS_STEPS)
    counts = np.bincount(labels, minlength=k)
    variances = np.full((k, x.shape[1]), var_floor)
    for j in np.flatnonzero(counts):
        variances[j] = np.maximum(x[labels == j].var(axis=0), var_floor)
    weights = np.maximum(counts, 1) / np.maximum(counts, 1).sum()

    trace = []
    converged = False
    for it in range(max_iters + 1):
        log_joint = _log_joint(x, means, variances, weights)
        log_norm = _logsumexp(log_joint)
        trace.append(float(np.mean(log_norm)))
        if not np.isfinite(trace[-1]):
            raise DegenerateFitError(f"log-likelihood became non-finite at iteration {it}")
        if it > 0 and trace[-1] - trace[-2] < tol:
            converged = True
            break
        if it == max_iters:
            break
        resp = np.exp(log_joint - log_norm[:, None])
        means, variances, weights = _m_step(x, resp, var_floor)

    logger.debug("GMM k=%d: %d log-likelihood evaluations, converged=%s", k, len(trace), converged)
    for arr in (means, variances, weights):
        arr.setflags(write=False)
    return GmmModel(means, variances, weights, tuple(trace), converged)


def learn_score_pivots(frames, k: int, max_iters: int = 100, seed: int = 0) -> ScorePivots:
    """GMM means become the pivots; each bandwidth is the root mean diagonal variance."""
    model = fit_gmm(frames, k, max_iters=max_iters, seed=seed)
    sigmas = np.sqrt(model.variances.mean(axis=1))
    return ScorePivots(np.array(model.means), sigmas, model)


def equispaced_temporal_pivots(k: int, sigma_t: float = 0.1) -> TemporalPivots:
    if int(k) != k or k < 1:
        raise InvalidParameterError(f"temporal pivot count must be >= 1, got {k}")
    if not sigma_t > 0:
        raise InvalidParameterError(f"sigma_t must be positive, got {sigma_t}")
    centers = np.array([0.5]) if k == 1 else np.linspace(0.0, 1.0, int(k))
    return TemporalPivots(centers, float(sigma_t))


def build_pivot_set(
    frames,
    k_f: int,
    k_t: int,
    sigma_t: float = 0.1,
    max_iters: int = 100,
    seed: int = 0,
    source: str = "",
) -> PivotSet:
    """Learn score pivots from ``frames`` (training frames only) and add temporal ones.

    ``source`` is a provenance tag, typically a hash of the training sequence ids.
    """
    score = learn_score_pivots(frames, k_f, max_iters=max_iters, seed=seed)
    temporal = equispaced_temporal_pivots(k_t, sigma_t)
    return PivotSet(score.centers, score.sigmas, temporal.centers, temporal.sigma, source=source)


def save_pivots(pivots: PivotSet, path) -> None:
    from .datasets import atomic_write_text

    atomic_write_text(path, json.dumps(pivots.to_dict(), indent=1) + "\n")


def load_pivots(path) -> PivotSet:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"{path}: not valid JSON ({exc})") from None
    return PivotSet.from_dict(doc, source=str(path))
