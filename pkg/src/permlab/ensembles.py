"""Random-matrix ensembles, worst-case constructions and Gaussian divergences."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .matcore import EntryBoundError, as_matrix
from .rng import substream


@dataclass(frozen=True)
class EnsembleSpec:
    n: int
    m: int | None = None
    variance: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be positive, got {self.n}")
        if not self.variance > 0:
            raise ValueError(f"variance must be positive, got {self.variance}")
        if self.m is not None and self.m < 1:
            raise ValueError(f"m must be positive, got {self.m}")


@dataclass(frozen=True)
class InterpolantFamily:
    R: np.ndarray
    W: np.ndarray
    mode: Literal["shift", "shift_scale"] = "shift"

    def __post_init__(self):
        R = as_matrix(self.R, name="R")
        W = as_matrix(self.W, name="W")
        if R.shape != W.shape:
            raise ValueError(f"R and W must have the same shape, got {R.shape} and {W.shape}")
        if self.mode not in ("shift", "shift_scale"):
            raise ValueError(f"unknown interpolant mode {self.mode!r}")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "W", W)


@dataclass(frozen=True)
class SpectralStats:
    lambda_max: float
    trace_stat: float


def sample_gaussian(spec: EnsembleSpec, *path) -> np.ndarray:
    """n x n i.i.d. N(0, variance) matrix drawn from substream ``(seed, *path)``."""
    rng = substream(spec.seed, "gaussian", *path)
    return rng.standard_normal((spec.n, spec.n)) * math.sqrt(spec.variance)


def sample_haar_orthogonal(m: int, seed: int, *path) -> np.ndarray:
    """Haar-distributed m x m orthogonal matrix.

    QR of a Gaussian matrix, with column j of Q multiplied by sign(R[j, j]) so
    the factorization is unique and the law is exactly Haar.
    """
    if m < 1:
        raise ValueError(f"m must be positive, got {m}")
    rng = substream(seed, "haar", *path)
    return _haar_columns(rng.standard_normal((m, m)))


def _haar_columns(G: np.ndarray) -> np.ndarray:
    Q, R = np.linalg.qr(G)
    d = np.sign(np.diagonal(R, axis1=-2, axis2=-1)).copy()
    d[d == 0] = 1.0
    return Q * d[..., None, :]


def haar_submatrix_scaled(spec: EnsembleSpec, *path) -> np.ndarray:
    """Top-left n x n block of an m x m Haar orthogonal, scaled by sqrt(m/n).

    The first n columns of Q in a QR factorization depend only on the first n
    columns of the Gaussian input, so a thin m x n QR yields exactly the same
    block as the full m x m construction at a fraction of the cost.
    """
    n, m = spec.n, spec.m
    if m is None or m < 2 * n:
        raise ValueError(f"haar submatrix requires m >= 2n, got n={n}, m={m}")
    rng = substream(spec.seed, "haar", *path)
    G = rng.standard_normal((m, n))
    return _haar_columns(G)[:n, :] * math.sqrt(m / n)


def haar_submatrix_batch(n: int, m: int, count: int, seed: int, *path) -> np.ndarray:
    """``count`` independent scaled Haar blocks, shape ``(count, n, n)``."""
    if m < 2 * n:
        raise ValueError(f"haar submatrix requires m >= 2n, got n={n}, m={m}")
    rng = substream(seed, "haar-batch", *path)
    G = rng.standard_normal((count, m, n))
    return _haar_columns(G)[:, :n, :] * math.sqrt(m / n)


def gaussian_batch(n: int, count: int, variance: float, seed: int, *path) -> np.ndarray:
    if not variance > 0:
        raise ValueError(f"variance must be positive, got {variance}")
    rng = substream(seed, "gaussian-batch", *path)
    return rng.standard_normal((count, n, n)) * math.sqrt(variance)


def _check_sign_matrix(Wp: np.ndarray) -> None:
    if not np.all(np.isin(Wp, (-1.0, 0.0, 1.0))):
        raise EntryBoundError("worst-case block must have entries in {0, +1, -1}")


def make_w_dilute(Wp, n: int) -> np.ndarray:
    """Embed ``Wp`` in the upper-left corner of an n x n zero matrix."""
    B = as_matrix(Wp, name="Wp")
    _check_sign_matrix(B)
    k = B.shape[0]
    if k > n:
        raise ValueError(f"block size {k} exceeds n={n}")
    W = np.zeros((n, n))
    W[:k, :k] = B
    return W


def make_w_magnified(Wp, n: int) -> np.ndarray:
    """Direct sum of ``Wp`` and an (n-k) x (n-k) all-ones block.

    Its permanent is Per(Wp) * (n-k)!.
    """
    B = as_matrix(Wp, name="Wp")
    _check_sign_matrix(B)
    k = B.shape[0]
    if k >= n:
        raise ValueError(f"magnification needs k < n, got k={k}, n={n}")
    W = np.zeros((n, n))
    W[:k, :k] = B
    W[k:, k:] = 1.0
    return W


def interpolant(fam: InterpolantFamily, t: float) -> np.ndarray:
    """A(t) = R + tW (shift) or (1-t)R + tW (shift_scale), for t in [0, 1]."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    if fam.mode == "shift":
        return fam.R + t * fam.W
    return (1.0 - t) * fam.R + t * fam.W


def spectral_stats(X) -> SpectralStats:
    """Largest eigenvalue of X^T X and trace[(X^T X)^2 - 2 X^T X]."""
    M = np.asarray(X, dtype=float)
    if not np.all(np.isfinite(M)):
        raise ValueError("spectral_stats: non-finite entries")
    lam = np.linalg.eigvalsh(M.T @ M)
    return SpectralStats(float(max(lam[-1], 0.0)), float(np.sum(lam * lam - 2.0 * lam)))


def spectral_stats_batch(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`spectral_stats` over a stack; returns (lambda_max, trace_stat)."""
    lam = np.linalg.eigvalsh(np.swapaxes(X, -1, -2) @ X)
    return np.maximum(lam[..., -1], 0.0), np.sum(lam * lam - 2.0 * lam, axis=-1)


def gaussian_kl(mu0: float, sigma0: float, mu1: float, sigma1: float) -> float:
    """KL( N(mu0, sigma0^2) || N(mu1, sigma1^2) )."""
    return ((mu0 - mu1) ** 2 + sigma0**2) / (2.0 * sigma1**2) + math.log(sigma1 / sigma0) - 0.5


def kl_shift_scale(t: float, w: float) -> float:
    """Per-entry divergence KL( N(t w, (1-t)^2) || N(0, 1) ) of the shift-scale ensemble."""
    if not 0.0 <= t < 1.0:
        raise ValueError(f"t must lie in [0, 1), got {t}")
    return gaussian_kl(t * w, 1.0 - t, 0.0, 1.0)


def tvd_bound_shift_scale(t: float, n: int, w_max: float) -> float:
    """Pinsker bound sqrt(KL_total / 2) on the TVD between (1-t)R + tW and R.

    KL_total = n^2 * kl_shift_scale(t, w_max): every entry is charged the
    divergence of the worst entry.
    """
    kl = kl_shift_scale(t, w_max)
    return math.sqrt(n * n * kl / 2.0)
