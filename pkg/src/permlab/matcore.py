"""Exact permanents and elementary permanent identities.

Two evaluators are provided: a brute-force permutation sum (the independent
oracle) and Ryser's inclusion-exclusion formula iterated in Gray-code order.
The Ryser evaluator switches to int64 arithmetic for integer-valued inputs whose
partial sums provably fit, so permanents of {0, +-1} matrices are exact.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

NAIVE_MAX_N = 10
RYSER_MAX_N = 24

# Gray-code steps evaluated per vectorized block
_BLOCK = 1 << 14
# working-set cap for batched evaluation, in array elements
_MAX_ELEMS = 1 << 23


class DimensionError(ValueError):
    """Matrix too large for the requested evaluator."""


class EntryBoundError(ValueError):
    """Matrix entries violate a required bound or domain."""


@dataclass(frozen=True)
class PermanentValue:
    value: float
    squared: float

    @classmethod
    def of(cls, value: float) -> "PermanentValue":
        return cls(float(value), float(value) * float(value))


def as_matrix(A, *, name: str = "matrix") -> np.ndarray:
    """Validate and return ``A`` as a finite, square float64 array."""
    M = np.asarray(A, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] == 0:
        raise ValueError(f"{name} must be a non-empty square 2-D array, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")
    return M


def permanent_naive(A) -> float:
    """Sum over all n! permutations. Only for n <= 10; used as a test oracle."""
    M = as_matrix(A)
    n = M.shape[0]
    if n > NAIVE_MAX_N:
        raise DimensionError(f"permanent_naive supports n <= {NAIVE_MAX_N}, got n={n}")
    if _is_integral(M):
        rows = [[int(v) for v in row] for row in M]
        total = sum(math.prod(rows[i][p[i]] for i in range(n)) for p in itertools.permutations(range(n)))
        return float(total)
    rows = M.tolist()
    return math.fsum(math.prod(rows[i][p[i]] for i in range(n)) for p in itertools.permutations(range(n)))


def permanent_ryser(A) -> float:
    """Ryser's formula with Gray-code subset iteration, O(2^n n) work.

    Summation order is fixed (blocks of consecutive Gray codes), so results are
    reproducible. Integer matrices use exact int64 arithmetic whenever
    ``2^n * prod_i sum_j |a_ij| < 2^62``.
    """
    M = as_matrix(A)
    n = M.shape[0]
    if n > RYSER_MAX_N:
        raise DimensionError(f"permanent_ryser supports n <= {RYSER_MAX_N}, got n={n}")
    return float(_ryser(M[None])[0])


def permanent_batch(As) -> np.ndarray:
    """Ryser permanents of a stack of matrices with shape ``(N, n, n)``."""
    S = np.asarray(As, dtype=float)
    if S.ndim != 3 or S.shape[1] != S.shape[2]:
        raise ValueError(f"expected shape (N, n, n), got {S.shape}")
    if S.shape[1] > RYSER_MAX_N:
        raise DimensionError(f"permanent_batch supports n <= {RYSER_MAX_N}, got n={S.shape[1]}")
    if S.shape[0] == 0:
        return np.zeros(0)
    if not np.all(np.isfinite(S)):
        raise ValueError("matrix stack has non-finite entries")
    return _ryser(S)


def permanent_value(A) -> PermanentValue:
    return PermanentValue.of(permanent_ryser(A))


def permanent_block_diag(blocks: Sequence) -> float:
    """Permanent of a direct sum, as the product of the block permanents."""
    if len(blocks) == 0:
        raise ValueError("need at least one block")
    out = 1.0
    for b in blocks:
        out *= permanent_ryser(b)
    return out


def assemble_block_diag(blocks: Sequence) -> np.ndarray:
    return scipy.linalg.block_diag(*[as_matrix(b) for b in blocks])


def perturbation_threshold(n: int) -> float:
    """Largest admissible perturbation size 1 / (100 n n!) for the gap bound."""
    return 1.0 / (100.0 * n * math.factorial(n))


def perturbation_gap(A, B, delta: float) -> float:
    """Return ``|Per(A) - Per(A + delta*B)|`` evaluated exactly.

    Entries of both matrices must be bounded by 1 in absolute value. When
    ``delta < perturbation_threshold(n)`` the result is at most 1.
    """
    MA = as_matrix(A, name="A")
    MB = as_matrix(B, name="B")
    if MA.shape != MB.shape:
        raise ValueError(f"shape mismatch {MA.shape} vs {MB.shape}")
    if np.max(np.abs(MA)) > 1 or np.max(np.abs(MB)) > 1:
        raise EntryBoundError("entries of A and B must satisfy |x| <= 1")
    if delta < 0:
        raise ValueError("delta must be non-negative")
    return abs(permanent_ryser(MA) - permanent_ryser(MA + delta * MB))


def _is_integral(M: np.ndarray) -> bool:
    return bool(np.all(M == np.round(M)))


def _int64_safe(S: np.ndarray) -> bool:
    if not _is_integral(S):
        return False
    n = S.shape[-1]
    row_abs = np.abs(S).sum(axis=-1)
    with np.errstate(divide="ignore"):
        log_bound = n + np.log2(np.maximum(row_abs, 1)).sum(axis=-1)
    return bool(np.all(log_bound < 62))


def _ryser(S: np.ndarray) -> np.ndarray:
    N, n, _ = S.shape
    exact = _int64_safe(S)
    work = S.astype(np.int64) if exact else S
    steps = (1 << n) - 1
    block = min(_BLOCK, steps)
    chunk = max(1, _MAX_ELEMS // (n * block))
    out = np.empty(N, dtype=object if exact else float)
    for lo in range(0, N, chunk):
        part = _ryser_chunk(work[lo:lo + chunk], n, steps, block)
        out[lo:lo + chunk] = part
    if exact:
        return np.array([float(v) for v in out])
    return out


def _ryser_chunk(S: np.ndarray, n: int, steps: int, block: int) -> np.ndarray:
    # Per(A) = (-1)^n sum_{g != 0} (-1)^{|g|} prod_i sum_{j in g} a_ij, over Gray codes g_i = i ^ (i >> 1).
    # |g_i| has the parity of i, and step i toggles bit ctz(i).
    total = np.zeros(S.shape[0], dtype=S.dtype)
    for start in range(1, steps + 1, block):
        i = np.arange(start, min(start + block, steps + 1), dtype=np.int64)
        low = i & -i
        j = np.log2(low.astype(float)).astype(np.int64)
        g = i ^ (i >> 1)
        direction = np.where((g >> j) & 1, 1, -1).astype(S.dtype)

        prev = (start - 1) ^ ((start - 1) >> 1)
        bits = np.array([(prev >> c) & 1 for c in range(n)], dtype=S.dtype)
        base = S @ bits  # row sums of the subset before this block, shape (N, n)

        deltas = S[:, :, j] * direction  # (N, n, B)
        rowsums = base[:, :, None] + np.cumsum(deltas, axis=2)
        prods = np.prod(rowsums, axis=1)  # (N, B)
        sign = np.where(i & 1, -1, 1).astype(S.dtype)
        total = total + prods @ sign
    if n % 2:
        total = -total
    if S.dtype == np.int64:
        return np.array([int(v) for v in total], dtype=object)
    return total
