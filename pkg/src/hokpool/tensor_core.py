"""Dense super-symmetric tensor algebra.

Tensors are plain ``numpy.ndarray`` objects of shape ``(d,) * r``. Symmetric
compression happens only in :func:`sym_vectorize`.
"""
from __future__ import annotations

import itertools
import math
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DimensionError, InvalidInputError, InvalidParameterError, InvariantError

MAX_ORDER = 4
SYMMETRY_ATOL = 1e-12


class TuckerFactors(NamedTuple):
    """HOSVD of a super-symmetric tensor: ``tensor == core x_k factor`` for every mode k."""

    core: np.ndarray
    factor: np.ndarray


def _check_order(r):
    if int(r) != r or r < 1:
        raise InvalidParameterError(f"order must be a positive integer, got {r!r}")
    if r > MAX_ORDER:
        raise InvalidParameterError(f"orders above {MAX_ORDER} are not supported, got {r}")
    return int(r)


def _check_cubical(t):
    t = np.asarray(t, dtype=float)
    if t.ndim < 1 or len(set(t.shape)) != 1:
        raise DimensionError(f"expected a cubical tensor, got shape {t.shape}")
    return t


@lru_cache(maxsize=32)
def _sorted_index_grid(d: int, r: int) -> np.ndarray:
    grid = np.sort(np.indices((d,) * r).reshape(r, -1), axis=0)
    grid.setflags(write=False)
    return grid


def outer_power(v, r: int) -> np.ndarray:
    """r-th outer power of ``v``; entry ``(i1, ..., ir)`` is ``prod_j v[i_j]``."""
    r = _check_order(r)
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise InvalidInputError("outer_power needs a non-empty 1-D vector")
    if not np.all(np.isfinite(v)):
        raise InvalidInputError("outer_power input has non-finite entries")
    grid = _sorted_index_grid(v.size, r)
    # factors multiplied in sorted-index order, so permuted entries are bit-identical
    out = v[grid[0]].copy()
    for row in grid[1:]:
        out *= v[row]
    return out.reshape((v.size,) * r)


def sum_outer_powers(rows, r: int) -> np.ndarray:
    """Sum over rows of ``rows[t]^{(x) r}``, without materialising each term.

    Cost is O(n d^r) via one matrix product against the (n, d^(r-1)) row-wise
    Kronecker powers.
    """
    r = _check_order(r)
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2 or rows.shape[0] == 0:
        raise InvalidInputError("need a non-empty (n, d) array of rows")
    n, d = rows.shape
    if r == 1:
        return rows.sum(axis=0)
    kron = rows
    for _ in range(r - 2):
        kron = (kron[:, :, None] * rows[:, None, :]).reshape(n, -1)
    return (rows.T @ kron).reshape((d,) * r)


def inner(a, b) -> float:
    """Element-wise product-and-sum of two tensors of identical shape."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.vdot(a, b))


def symmetry_defect(t) -> float:
    """Largest absolute change of ``t`` under a swap of two adjacent modes."""
    t = _check_cubical(t)
    worst = 0.0
    for k in range(t.ndim - 1):
        axes = list(range(t.ndim))
        axes[k], axes[k + 1] = axes[k + 1], axes[k]
        worst = max(worst, float(np.max(np.abs(t - t.transpose(axes)))))
    return worst


def is_supersymmetric(t, atol: float = SYMMETRY_ATOL) -> bool:
    # adjacent transpositions generate the full symmetric group
    t = _check_cubical(t)
    scale = max(1.0, float(np.max(np.abs(t)))) if t.size else 1.0
    return symmetry_defect(t) <= atol * scale


def symmetrize(t) -> np.ndarray:
    """Average of ``t`` over all permutations of its modes."""
    t = _check_cubical(t)
    perms = list(itertools.permutations(range(t.ndim)))
    acc = np.zeros_like(t)
    for p in perms:
        acc += t.transpose(p)
    return acc / len(perms)


@lru_cache(maxsize=64)
def _sym_layout(d: int, r: int):
    combos = np.array(list(itertools.combinations_with_replacement(range(d), r)), dtype=np.intp)
    flat = np.ravel_multi_index(combos.T, (d,) * r)
    fact_r = math.factorial(r)
    weights = np.empty(len(combos))
    for i, c in enumerate(combos):
        _, counts = np.unique(c, return_counts=True)
        weights[i] = fact_r / math.prod(math.factorial(int(k)) for k in counts)
    flat.setflags(write=False)
    root_w = np.sqrt(weights)
    root_w.setflags(write=False)
    return flat, root_w


def sym_vector_length(d: int, r: int) -> int:
    return math.comb(d + r - 1, r)


def sym_vectorize(t, check: bool = True) -> np.ndarray:
    """Compress a super-symmetric tensor to its ``C(d+r-1, r)`` distinct entries.

    Entries are ordered by non-decreasing multi-index (lexicographic) and each
    is scaled by the square root of its multinomial multiplicity, so dot
    products of vectorizations equal tensor inner products.
    """
    t = _check_cubical(t)
    if check and not is_supersymmetric(t):
        raise InvariantError(
            f"tensor is not super-symmetric (defect {symmetry_defect(t):.3e})"
        )
    flat, root_w = _sym_layout(t.shape[0], t.ndim)
    return t.reshape(-1)[flat] * root_w


def mode_multiply(t, mats: Sequence[np.ndarray]) -> np.ndarray:
    """Multilinear product ``t x_1 P_1 x_2 P_2 ... x_r P_r``.

    ``out[i1..ir] = sum_{j1..jr} t[j1..jr] P_1[i1, j1] ... P_r[ir, jr]``.
    """
    t = np.asarray(t, dtype=float)
    if len(mats) != t.ndim:
        raise DimensionError(f"need {t.ndim} matrices, got {len(mats)}")
    out = t
    for k, m in enumerate(mats):
        m = np.asarray(m, dtype=float)
        if m.ndim != 2 or m.shape[1] != out.shape[k]:
            raise DimensionError(
                f"matrix {k} has shape {m.shape}, mode {k} has size {out.shape[k]}"
            )
        out = np.moveaxis(np.tensordot(m, out, axes=(1, k)), 0, k)
    return out


def _fix_signs(u):
    # largest-magnitude entry of each column made non-negative
    idx = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[idx, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    return u * signs


def hosvd(t, rank: int | None = None) -> TuckerFactors:
    """Higher-order SVD of a super-symmetric tensor.

    All mode factors coincide, so only the mode-1 unfolding is decomposed.
    ``rank`` truncates the factor to its leading ``rank`` columns; the default
    keeps the full basis and the decomposition is exact. A zero tensor gives a
    zero core and the identity factor.
    """
    t = _check_cubical(t)
    d, r = t.shape[0], t.ndim
    if rank is not None and not (1 <= rank <= d):
        raise InvalidParameterError(f"rank must lie in [1, {d}], got {rank}")
    if not np.any(t):
        k = d if rank is None else rank
        return TuckerFactors(np.zeros((k,) * r), np.eye(d)[:, :k])
    # U is d x d for r >= 2 without the full right factor; r == 1 needs the completion
    u, _, _ = np.linalg.svd(t.reshape(d, -1), full_matrices=(r == 1))
    u = _fix_signs(u)
    if rank is not None:
        u = u[:, :rank]
    core = mode_multiply(t, [u.T] * r)
    return TuckerFactors(core, u)


def reconstruct(factors: TuckerFactors) -> np.ndarray:
    core, u = factors
    return mode_multiply(core, [u] * core.ndim)


def power_normalize(t, alpha: float, rank: int | None = None) -> np.ndarray:
    """Eigenvalue power normalization.

    Applies ``sign(s) |s|**alpha`` to every HOSVD core entry, rebuilds the
    tensor and re-symmetrizes it to remove round-off asymmetry.
    """
    if not (0.0 < alpha <= 1.0):
        raise InvalidParameterError(f"alpha must lie in (0, 1], got {alpha}")
    core, u = hosvd(t, rank=rank)
    core = np.sign(core) * np.abs(core) ** alpha
    return symmetrize(reconstruct(TuckerFactors(core, u)))
