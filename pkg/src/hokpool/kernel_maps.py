"""Gaussian kernels, their pivot feature maps, and the sequence kernel.

Two bandwidth conventions coexist and must not be confused:

* the kernel ``gaussian_kernel`` uses ``exp(-|x - y|^2 / (2 sigma^2))``;
* the feature map ``feature_map`` uses ``exp(-|x - z|^2 / sigma^2)``.

With pivots on a grid of spacing ``h`` in ``p`` dimensions,
``gaussian_kernel(x, y, s) ~= quadrature_scale(s, h, p) * <phi(x), phi(y)>``.
The pooling code folds that constant into the global normalization.

Sequence arguments may be :class:`~hokpool.pooling.ScoreSequence` objects or
raw ``(n, d)`` arrays; 1-D arrays are read as ``n`` scalar frames.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DimensionError, InvalidInputError, InvalidParameterError

SIMPLEX_ATOL = 1e-6


def _frames(seq) -> np.ndarray:
    x = np.asarray(getattr(seq, "scores", seq), dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] == 0:
        raise InvalidInputError("sequence must hold at least one frame")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("sequence has non-finite scores")
    return x


def normalized_times(n: int) -> np.ndarray:
    """Frame times mapped to [0, 1]; a single frame sits at 0."""
    if n < 1:
        raise InvalidInputError("sequence length must be positive")
    if n == 1:
        return np.zeros(1)
    return np.arange(n) / (n - 1)


def gaussian_kernel(x, y, sigma: float) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != y.shape:
        raise DimensionError(f"length mismatch: {x.shape} vs {y.shape}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise InvalidInputError("gaussian_kernel got non-finite input")
    if not sigma > 0:
        raise InvalidParameterError(f"sigma must be positive, got {sigma}")
    return float(np.exp(-np.sum((x - y) ** 2) / (2.0 * sigma**2)))


def feature_map(x, centers, sigmas) -> np.ndarray:
    """Responses ``exp(-|x - z_k|^2 / sigma_k^2)`` of ``x`` against each pivot.

    Parameters
    ----------
    x : array_like
        One point of shape ``(p,)`` or a batch of shape ``(n, p)``. With 1-D
        pivots a scalar is one point and a 1-D array is a batch of scalars.
    centers : array_like
        Pivot locations, shape ``(K, p)`` or ``(K,)`` for 1-D pivots.
    sigmas : array_like or float
        Per-pivot bandwidths, broadcast to ``(K,)``.

    Returns
    -------
    numpy.ndarray
        Shape ``(K,)`` for one point, ``(n, K)`` for a batch.
    """
    centers = np.asarray(centers, dtype=float)
    if centers.ndim == 1:
        centers = centers[:, None]
    if centers.shape[0] == 0:
        raise InvalidParameterError("pivot set is empty")
    sigmas = np.broadcast_to(np.asarray(sigmas, dtype=float), (centers.shape[0],))
    if np.any(sigmas <= 0):
        raise InvalidParameterError("pivot bandwidths must be positive")

    x = np.asarray(x, dtype=float)
    p = centers.shape[1]
    # with 1-D pivots a 1-D array is a batch of scalars, otherwise a single point
    single = x.ndim == 0 or (x.ndim == 1 and p > 1)
    if single:
        pts = x.reshape(1, -1)
    else:
        pts = x[:, None] if x.ndim == 1 else x
    if pts.shape[1] != p:
        raise DimensionError(f"point dimension {pts.shape[1]} != pivot dimension {p}")
    if not np.all(np.isfinite(pts)):
        raise InvalidInputError("feature_map got non-finite input")
    sq = ((pts[:, None, :] - centers[None, :, :]) ** 2).sum(axis=-1)
    out = np.exp(-sq / sigmas**2)
    return out[0] if single else out


def quadrature_scale(sigma: float, spacing: float, dim: int = 1) -> float:
    """Riemann-sum weight turning grid feature-map products into the Gaussian kernel."""
    return (2.0 / (np.pi * sigma**2)) ** (dim / 2.0) * spacing**dim


@dataclass(frozen=True, eq=False)
class PivotSet:
    """Score pivots with per-pivot bandwidths plus temporal pivots with a shared one."""

    score_pivots: np.ndarray
    sigma_f: np.ndarray
    temporal_pivots: np.ndarray
    sigma_t: float
    source: str = field(default="", compare=False)

    def __post_init__(self):
        zf = np.atleast_2d(np.asarray(self.score_pivots, dtype=float))
        sf = np.atleast_1d(np.asarray(self.sigma_f, dtype=float))
        zt = np.atleast_1d(np.asarray(self.temporal_pivots, dtype=float))
        if zf.shape[0] < 1 or zt.shape[0] < 1:
            raise InvalidParameterError("need at least one score and one temporal pivot")
        if sf.shape != (zf.shape[0],):
            raise DimensionError(f"{zf.shape[0]} score pivots but {sf.size} bandwidths")
        if not (np.all(np.isfinite(zf)) and np.all(np.isfinite(zt))):
            raise InvalidInputError("pivots must be finite")
        if np.any(sf <= 0) or not self.sigma_t > 0:
            raise InvalidParameterError("bandwidths must be strictly positive")
        if np.any(np.diff(zt) <= 0):
            raise InvalidParameterError("temporal pivots must be strictly increasing")
        for name, val in (("score_pivots", zf), ("sigma_f", sf), ("temporal_pivots", zt)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)
        object.__setattr__(self, "sigma_t", float(self.sigma_t))

    def __eq__(self, other):
        if not isinstance(other, PivotSet):
            return NotImplemented
        return (
            np.array_equal(self.score_pivots, other.score_pivots)
            and np.array_equal(self.sigma_f, other.sigma_f)
            and np.array_equal(self.temporal_pivots, other.temporal_pivots)
            and self.sigma_t == other.sigma_t
        )

    def __hash__(self):
        return hash(self.fingerprint())

    @property
    def k_f(self) -> int:
        return self.score_pivots.shape[0]

    @property
    def k_t(self) -> int:
        return self.temporal_pivots.shape[0]

    @property
    def dim(self) -> int:
        return self.score_pivots.shape[1]

    def check_simplex(self, atol: float = SIMPLEX_ATOL) -> None:
        zf = self.score_pivots
        if np.any(zf < -atol) or np.any(np.abs(zf.sum(axis=1) - 1.0) > atol):
            raise InvalidInputError("score pivots must lie on the probability simplex")

    def to_dict(self) -> dict:
        return {
            "score_pivots": self.score_pivots.tolist(),
            "sigma_f": self.sigma_f.tolist(),
            "temporal_pivots": self.temporal_pivots.tolist(),
            "sigma_t": self.sigma_t,
        }

    @classmethod
    def from_dict(cls, doc: dict, source: str = "") -> "PivotSet":
        try:
            pivots = cls(
                np.asarray(doc["score_pivots"], dtype=float),
                np.asarray(doc["sigma_f"], dtype=float),
                np.asarray(doc["temporal_pivots"], dtype=float),
                float(doc["sigma_t"]),
                source=source,
            )
        except KeyError as exc:
            raise InvalidInputError(f"pivot document lacks field {exc.args[0]!r}") from None
        pivots.check_simplex()
        return pivots

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class SequenceKernelParams:
    """Parameters of the sequence compatibility kernel.

    ``lam=None`` normalizes a pair of sequences by ``n_i * n_j``, which is the
    usual ``n^2`` when lengths agree. ``scale_f`` and ``scale_t`` multiply the
    pivot-expanded constituent kernels (see :func:`quadrature_scale`); at 1
    they are folded into the normalization.
    """

    zeta1: float = 0.5
    zeta2: float = 0.5
    sigma_f: float = 0.1
    sigma_t: float = 0.1
    r: int = 3
    lam: float | None = None
    scale_f: float = 1.0
    scale_t: float = 1.0

    def __post_init__(self):
        if self.zeta1 < 0 or self.zeta2 < 0 or abs(self.zeta1 + self.zeta2 - 1.0) > 1e-12:
            raise InvalidParameterError("zeta1, zeta2 must be non-negative and sum to 1")
        if int(self.r) != self.r or self.r < 1:
            raise InvalidParameterError(f"order must be a positive integer, got {self.r}")
        if self.sigma_f <= 0 or self.sigma_t <= 0:
            raise InvalidParameterError("bandwidths must be positive")
        if self.lam is not None and self.lam <= 0:
            raise InvalidParameterError("lam must be positive")

    def normalizer(self, n_i: int, n_j: int) -> float:
        return float(n_i * n_j) if self.lam is None else float(self.lam)


def _pairwise_gaussian(a, b, sigma):
    sq = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=-1)
    return np.exp(-sq / (2.0 * sigma**2))


def sequence_kernel_exact(
    si,
    sj,
    p: SequenceKernelParams,
    psi_f: Callable | None = None,
    psi_t: Callable | None = None,
) -> float:
    """Double sum over frame pairs of ``[z1 psi_f + z2 psi_t]^r``, divided by the normalizer.

    ``psi_f(x_t, x_u)`` and ``psi_t(t, u)`` default to Gaussians with bandwidths
    ``p.sigma_f`` and ``p.sigma_t``; times are normalized to [0, 1]. Passing
    other callables evaluates the same double sum pair by pair, which is how
    the pivot-expanded form is checked against its closed-form counterpart.
    Sequences of unequal length are allowed.
    """
    xi, xj = _frames(si), _frames(sj)
    if xi.shape[1] != xj.shape[1]:
        raise DimensionError("sequences have different score dimensions")
    ti, tj = normalized_times(len(xi)), normalized_times(len(xj))
    if psi_f is None and psi_t is None:
        kf = _pairwise_gaussian(xi, xj, p.sigma_f)
        kt = _pairwise_gaussian(ti[:, None], tj[:, None], p.sigma_t)
    else:
        psi_f = psi_f or (lambda a, b: gaussian_kernel(a, b, p.sigma_f))
        psi_t = psi_t or (lambda a, b: gaussian_kernel(a, b, p.sigma_t))
        kf = np.array([[psi_f(a, b) for b in xj] for a in xi])
        kt = np.array([[psi_t(a, b) for b in tj] for a in ti])
    total = np.sum((p.zeta1 * kf + p.zeta2 * kt) ** p.r)
    return float(total / p.normalizer(len(xi), len(xj)))


def linearized_sequence_kernel(si, sj, pivots: PivotSet, p: SequenceKernelParams) -> float:
    """Sequence kernel with both constituent kernels replaced by pivot expansions.

    Evaluated as the frame-pair double sum of ``[z1 s_f <phi_F, phi_F'> +
    z2 s_t <phi_T, phi_T'>]^r`` over Gram matrices, never through tensors.
    """
    xi, xj = _frames(si), _frames(sj)
    if xi.shape[1] != pivots.dim or xj.shape[1] != pivots.dim:
        raise DimensionError(
            f"score dimension {xi.shape[1]}/{xj.shape[1]} != pivot dimension {pivots.dim}"
        )
    fi = feature_map(xi, pivots.score_pivots, pivots.sigma_f)
    fj = feature_map(xj, pivots.score_pivots, pivots.sigma_f)
    ti = feature_map(normalized_times(len(xi)), pivots.temporal_pivots, pivots.sigma_t)
    tj = feature_map(normalized_times(len(xj)), pivots.temporal_pivots, pivots.sigma_t)
    gram = p.zeta1 * p.scale_f * (fi @ fj.T) + p.zeta2 * p.scale_t * (ti @ tj.T)
    return float(np.sum(gram ** p.r) / p.normalizer(len(xi), len(xj)))
