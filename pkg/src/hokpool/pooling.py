"""Per-sequence descriptors: HOK, second-order log-Euclidean, average, and stacks of them."""
from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionError, InvalidInputError, InvalidParameterError, NumericError
from .kernel_maps import PivotSet, feature_map, normalized_times
from .tensor_core import power_normalize, sum_outer_powers, sym_vector_length, sym_vectorize

SIMPLEX_TOL = 1e-4
LAMBDA_MODES = ("n_squared", "ni_nj")
KINDS = ("hok", "second_order", "average", "concat")


@dataclass(frozen=True)
class ScoreSequence:
    """Per-frame class-probability vectors of one sequence; ``label`` is a 0-based class index."""

    id: str
    label: int
    scores: np.ndarray

    def __post_init__(self):
        s = np.array(self.scores, dtype=float)
        if s.ndim != 2 or s.shape[0] < 1:
            raise InvalidInputError(f"sequence {self.id!r}: scores must be a non-empty (n, d) array")
        if s.shape[1] < 2:
            raise InvalidInputError(f"sequence {self.id!r}: need d >= 2 classifier scores")
        if not np.all(np.isfinite(s)):
            raise InvalidInputError(f"sequence {self.id!r}: non-finite scores")
        if np.any(s < -SIMPLEX_TOL) or np.any(s > 1 + SIMPLEX_TOL):
            raise InvalidInputError(f"sequence {self.id!r}: scores outside [0, 1]")
        bad = np.flatnonzero(np.abs(s.sum(axis=1) - 1.0) > SIMPLEX_TOL)
        if bad.size:
            raise InvalidInputError(
                f"sequence {self.id!r}: row {int(bad[0])} sums to {s[bad[0]].sum():.6f}, not 1"
            )
        s.setflags(write=False)
        object.__setattr__(self, "scores", s)

    @property
    def n(self) -> int:
        return self.scores.shape[0]

    @property
    def d(self) -> int:
        return self.scores.shape[1]


@dataclass(frozen=True)
class Descriptor:
    kind: str
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidParameterError(f"unknown descriptor kind {self.kind!r}")
        v = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(v)):
            raise NumericError(f"{self.kind} descriptor has non-finite entries")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.shape[0]


@dataclass(frozen=True)
class HokConfig:
    """HOK pooling hyper-parameters.

    ``lambda_mode`` names the sequence-kernel normalization; both modes give a
    per-descriptor scale of ``1/n``. ``rank`` truncates the HOSVD used by power
    normalization (``None`` keeps every component).
    """

    r: int = 3
    zeta1: float = 0.5
    zeta2: float = 0.5
    alpha: float = 0.1
    lambda_mode: str = "n_squared"
    rank: int | None = None

    def __post_init__(self):
        if int(self.r) != self.r or not 1 <= self.r <= 4:
            raise InvalidParameterError(f"r must be an integer in [1, 4], got {self.r}")
        if not (0 <= self.zeta1 <= 1 and 0 <= self.zeta2 <= 1):
            raise InvalidParameterError("zeta weights must lie in [0, 1]")
        if abs(self.zeta1 + self.zeta2 - 1.0) > 1e-9:
            raise InvalidParameterError("zeta1 + zeta2 must equal 1")
        if not 0 < self.alpha <= 1:
            raise InvalidParameterError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.lambda_mode not in LAMBDA_MODES:
            raise InvalidParameterError(f"lambda_mode must be one of {LAMBDA_MODES}")
        if self.rank is not None and self.rank < 1:
            raise InvalidParameterError("rank must be positive")

    def config_hash(self) -> str:
        return hashlib.sha256(json.dumps(asdict(self), sort_keys=True).encode()).hexdigest()[:16]


def hok_length(k_f: int, k_t: int, r: int = 3) -> int:
    return sym_vector_length(k_f + k_t, r)


def frame_maps(seq, pivots: PivotSet, cfg: HokConfig) -> np.ndarray:
    """Rows ``[sqrt(z1) phi_F(x_u); sqrt(z2) phi_T(u)]``, shape (n, K_F + K_T)."""
    x = np.asarray(getattr(seq, "scores", seq), dtype=float)
    if x.ndim != 2 or x.shape[0] == 0:
        raise InvalidInputError("sequence must hold at least one frame")
    if x.shape[1] != pivots.dim:
        raise DimensionError(f"score dimension {x.shape[1]} != pivot dimension {pivots.dim}")
    phi_f = feature_map(x, pivots.score_pivots, pivots.sigma_f)
    phi_t = feature_map(normalized_times(len(x)), pivots.temporal_pivots, pivots.sigma_t)
    return np.hstack([math.sqrt(cfg.zeta1) * phi_f, math.sqrt(cfg.zeta2) * phi_t])


def hok_tensor(seq, pivots: PivotSet, cfg: HokConfig) -> np.ndarray:
    """Pooled HOK tensor before power normalization (scale ``1/sqrt(n^2)``)."""
    rows = frame_maps(seq, pivots, cfg)
    return sum_outer_powers(rows, cfg.r) / rows.shape[0]


def hok_descriptor(seq, pivots: PivotSet, cfg: HokConfig) -> Descriptor:
    tensor = hok_tensor(seq, pivots, cfg)
    if cfg.alpha != 1.0 or cfg.rank is not None:
        tensor = power_normalize(tensor, cfg.alpha, rank=cfg.rank)
    meta = {
        "sequence_id": getattr(seq, "id", None),
        "config_hash": cfg.config_hash(),
        "pivots": pivots.fingerprint(),
    }
    return Descriptor("hok", sym_vectorize(tensor), meta)


def _trajectory_sq_distances(x):
    diff2 = (x[:, :, None] - x[:, None, :]) ** 2
    # sorted over time so the sum does not depend on frame order
    return np.sort(diff2, axis=0).sum(axis=0)


def second_order_kernel(seq, sigma: float = 0.1, epsilon: float = 1e-6) -> np.ndarray:
    """``exp(-sigma |x_:^i - x_:^j|^2) + epsilon I`` over classifier trajectories."""
    if not sigma > 0:
        raise InvalidParameterError(f"sigma must be positive, got {sigma}")
    if epsilon < 0:
        raise InvalidParameterError("epsilon must be non-negative")
    x = np.asarray(getattr(seq, "scores", seq), dtype=float)
    if x.ndim != 2 or x.shape[0] == 0:
        raise InvalidInputError("sequence must hold at least one frame")
    k = np.exp(-sigma * _trajectory_sq_distances(x)) + epsilon * np.eye(x.shape[1])
    if not np.all(np.isfinite(k)):
        raise NumericError("second-order kernel has non-finite entries")
    return k


def spd_log(mat) -> np.ndarray:
    w, v = np.linalg.eigh(mat)
    if w[0] <= 0:
        raise NumericError(f"matrix is not positive definite (min eigenvalue {w[0]:.3e})")
    out = (v * np.log(w)) @ v.T
    return 0.5 * (out + out.T)


def half_vectorize(sym) -> np.ndarray:
    """Upper triangle, off-diagonal entries scaled by sqrt(2) to keep Frobenius products."""
    sym = np.asarray(sym, dtype=float)
    iu = np.triu_indices(sym.shape[0])
    scale = np.where(iu[0] == iu[1], 1.0, math.sqrt(2.0))
    return sym[iu] * scale


def second_order_descriptor(seq, sigma: float = 0.1, epsilon: float = 1e-6) -> Descriptor:
    log_k = spd_log(second_order_kernel(seq, sigma, epsilon))
    meta = {"sequence_id": getattr(seq, "id", None), "sigma": sigma, "epsilon": epsilon}
    return Descriptor("second_order", half_vectorize(log_k), meta)


def average_pool(seq) -> Descriptor:
    x = np.asarray(getattr(seq, "scores", seq), dtype=float)
    if x.ndim != 2 or x.shape[0] == 0:
        raise InvalidInputError("sequence must hold at least one frame")
    # sorting makes the mean exactly invariant to frame order
    values = np.sort(x, axis=0).mean(axis=0)
    return Descriptor("average", values, {"sequence_id": getattr(seq, "id", None)})


def concat(descs: Sequence[Descriptor]) -> Descriptor:
    """Stack descriptors of one sequence, each block scaled to unit L2 norm first."""
    if not descs:
        raise InvalidInputError("concat needs at least one descriptor")
    ids = {d.meta.get("sequence_id") for d in descs}
    if len(ids) > 1:
        raise InvalidInputError(f"cannot concatenate descriptors of different sequences: {sorted(map(str, ids))}")
    blocks = []
    for d in descs:
        norm = np.linalg.norm(d.values)
        blocks.append(d.values / norm if norm > 0 else d.values)
    meta = {
        "sequence_id": ids.pop(),
        "blocks": [{"kind": d.kind, "length": len(d)} for d in descs],
    }
    return Descriptor("concat", np.concatenate(blocks), meta)


def pool_batch(seqs, fn: Callable, threads: int = 1) -> list:
    """Apply ``fn`` to every sequence, optionally on a thread pool; output order follows input."""
    if threads <= 1:
        return [fn(s) for s in seqs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, seqs))
