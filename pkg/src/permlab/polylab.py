"""Polynomial recovery from noisy samples.

Covers evaluation and interpolation, the discrete Remez and top-coefficient
bounds, robust Berlekamp-Welch recovery and the square method (fitting q from
samples of q^2 with per-point sign recovery).

The search that a nondeterministic oracle would perform is made explicit by
three modes:

``planted``
    verify a caller-supplied candidate against the acceptance predicate.
``exhaustive``
    enumerate every (d+1)-point interpolation basis, in colexicographic order,
    and return the first predicate-satisfying fit. Complete for M <= 24.
``ransac``
    random bases under a fixed iteration budget; may fail.

All fits work in a monomial basis on x rescaled to [-1, 1] over the grid's
interval, and coefficients are mapped back to the caller's variable.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterator, Literal, Sequence

import numpy as np
from numpy.polynomial import Polynomial

from .rng import substream

OracleMode = Literal["planted", "exhaustive", "ransac"]

EXHAUSTIVE_MAX_POINTS = 24
# relative floor added to every square-fit tolerance: floating-point noise in
# |Per|^2 evaluations is ~1e-12 relative, far below this
FLOOR_RTOL = 1e-9
# candidates from an interpolation basis survive screening if they match this
# fraction of the data to this relative accuracy
SCREEN_RTOL = 1e-3
# a point violates the anticoncentration floor when y < K^2 (1 - FLOOR_SLACK)
FLOOR_SLACK = 0.01
_REFINE_STEPS = 8


class NoFeasiblePolynomial(RuntimeError):
    """Search finished without finding a predicate-satisfying polynomial."""


class RansacBudgetExhausted(NoFeasiblePolynomial):
    """Randomized search ran out of iterations."""


class KFloorError(RuntimeError):
    """Some agreeing sample lies below the anticoncentration floor K^2."""


@dataclass(frozen=True)
class Poly:
    """Real polynomial; ``coeffs[j]`` multiplies x**j.

    Fits also carry ``scaled = (a, b, c)``, the same polynomial written in
    u = a x + b. High-degree fits on short intervals have huge cancelling
    monomial coefficients, so evaluation goes through the scaled form when
    present.
    """

    coeffs: np.ndarray
    scaled: tuple | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=float))
        if c.ndim != 1 or c.size == 0:
            raise ValueError("coeffs must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(c)):
            raise ValueError("coeffs must be finite")
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        nz = np.flatnonzero(self.coeffs)
        return int(nz[-1]) if nz.size else 0

    def coef(self, j: int) -> float:
        return float(self.coeffs[j]) if j < self.coeffs.size else 0.0

    def __call__(self, x):
        return poly_eval(self, x)

    def __neg__(self) -> "Poly":
        scaled = None if self.scaled is None else (self.scaled[0], self.scaled[1], -self.scaled[2])
        return Poly(-self.coeffs, scaled)


def poly_eval(p: Poly, x):
    """Horner evaluation; ``x`` may be a scalar or an array."""
    xs = np.asarray(x, dtype=float)
    coeffs = p.coeffs
    if p.scaled is not None:
        a, b, coeffs = p.scaled
        xs = a * xs + b
    acc = np.zeros_like(xs)
    for c in coeffs[::-1]:
        acc = acc * xs + c
    return float(acc) if acc.ndim == 0 else acc


@dataclass(frozen=True)
class SampleGrid:
    """Sorted, delta-separated points inside the interval [lo, hi]."""

    points: np.ndarray
    separation: float
    lo: float
    hi: float

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size == 0:
            raise ValueError("grid needs at least one point")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("grid points must be strictly increasing")
        if not self.separation > 0:
            raise ValueError("separation must be positive")
        if pts.size > 1 and np.min(np.diff(pts)) < self.separation - 1e-12:
            raise ValueError(f"points closer than declared separation {self.separation}")
        if not self.lo < self.hi or pts[0] < self.lo - 1e-12 or pts[-1] > self.hi + 1e-12:
            raise ValueError(f"points must lie inside [{self.lo}, {self.hi}]")
        object.__setattr__(self, "points", pts)

    @classmethod
    def box(cls, width: float, count: int) -> "SampleGrid":
        """``count`` points i*width/count, i = 1..count, in [0, width] (t = 0 excluded)."""
        pts = width * np.arange(1, count + 1) / count
        return cls(pts, width / count, 0.0, width)

    @classmethod
    def symmetric(cls, half_width: float, count: int) -> "SampleGrid":
        """``count`` equally spaced points covering [-half_width, half_width]."""
        pts = np.linspace(-half_width, half_width, count)
        sep = 2 * half_width / (count - 1) if count > 1 else half_width
        return cls(pts, sep, -half_width, half_width)

    @classmethod
    def from_points(cls, points: Sequence[float], lo: float, hi: float) -> "SampleGrid":
        pts = np.sort(np.asarray(points, dtype=float))
        sep = float(np.min(np.diff(pts))) if pts.size > 1 else hi - lo
        return cls(pts, sep, lo, hi)

    def __len__(self) -> int:
        return self.points.size


@dataclass(frozen=True)
class NoisyData:
    grid: SampleGrid
    values: np.ndarray
    gamma: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.points.shape:
            raise ValueError(f"{v.size} values for {len(self.grid)} grid points")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class SquareFitResult:
    q: Poly
    signs: np.ndarray
    residual: float
    agree: np.ndarray = field(repr=False)
    floor_ok: bool = True

    @property
    def n_agree(self) -> int:
        return int(np.count_nonzero(self.agree))


# ----------------------------------------------------------------------------
# interpolation in a rescaled variable


class _Scale:
    """Affine map x -> u = a x + b sending [lo, hi] onto [-1, 1]."""

    def __init__(self, lo: float, hi: float):
        self.a = 2.0 / (hi - lo)
        self.b = -(hi + lo) / (hi - lo)

    def __call__(self, x):
        return self.a * np.asarray(x, dtype=float) + self.b

    def to_poly(self, c_scaled: np.ndarray) -> Poly:
        composed = Polynomial(c_scaled)(Polynomial([self.b, self.a]))
        out = np.zeros(c_scaled.size)
        out[: composed.coef.size] = composed.coef
        return Poly(out, (self.a, self.b, np.array(c_scaled, dtype=float)))


def _vander(u: np.ndarray, deg: int) -> np.ndarray:
    return np.vander(u, deg + 1, increasing=True)


def lagrange_fit(points: Sequence[tuple[float, float]]) -> Poly:
    """Unique polynomial of degree <= len(points) - 1 through ``points``."""
    xy = np.asarray(points, dtype=float).reshape(-1, 2)
    x, y = xy[:, 0], xy[:, 1]
    count = x.size
    if count == 0:
        raise ValueError("need at least one point")
    if count > 65:
        raise ValueError(f"degree {count - 1} exceeds the supported maximum of 64")
    if np.unique(x).size != count:
        raise ValueError("duplicate x-values")
    lo, hi = float(x.min()), float(x.max())
    if count > 30 and lo >= 0.0 and hi <= 1.0:
        warnings.warn(f"interpolating through {count} nodes on [0, 1] is ill-conditioned", RuntimeWarning, stacklevel=2)
    if count == 1:
        return Poly([y[0]])
    sc = _Scale(lo, hi)
    c = np.linalg.solve(_vander(sc(x), count - 1), y)
    return sc.to_poly(c)


# ----------------------------------------------------------------------------
# bounds


def remez_bound(d: int, delta: float, L_or_ell: float, variant: str = "extrapolation") -> float:
    """Discrete Remez factor for d+1 delta-separated points.

    ``extrapolation``: |p(L)| <= (e^2 L / (delta d))^d max_j |p(x_j)|, points in [0, 1], L >= 1.
    ``sup_interval``: sup over [-l, l] <= (2 e^2 l / (delta d))^d max_j |p(x_j)|.
    """
    if d < 1 or not delta > 0:
        raise ValueError("remez_bound needs d >= 1 and delta > 0")
    if variant == "extrapolation":
        base = math.e**2 * L_or_ell / (delta * d)
    elif variant == "sup_interval":
        base = 2 * math.e**2 * L_or_ell / (delta * d)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return base**d


def top_coeff_bound(d: int, ell: float, alpha: float) -> float:
    """|p_d| <= 2^(d+1) ell^(-d) alpha when |p| <= alpha on [-ell, ell]."""
    if d < 0 or not ell > 0 or alpha < 0:
        raise ValueError("top_coeff_bound needs d >= 0, ell > 0, alpha >= 0")
    return 2.0 ** (d + 1) * ell ** (-d) * alpha


def square_coex_error_bound(d: int, delta: float, K: float, gamma: float) -> float:
    """Coefficient error 2^(2d+1) e^(2d) (d delta)^(-d) gamma / K of the square method."""
    return 2.0 ** (2 * d + 1) * math.e ** (2 * d) * (d * delta) ** (-d) * gamma / K


def square_extrap_error_bound(d: int, delta: float, p_at_1: float, E_inputs: float) -> float:
    """|p^2(1) - q^2(1)| <= E |p(1)| + E^2 with E = (e^2 / (d delta))^d * E_inputs."""
    E = (math.e**2 / (d * delta)) ** d * E_inputs
    return E * abs(p_at_1) + E * E


def recover_sign(p_ref, q):
    """Sign sigma in {+1, -1} making sigma*q closest to ``p_ref``.

    With |p^2 - q^2| < delta this gives |p - sigma q| = ||p| - |q|| < delta / |p|.
    """
    s = np.sign(p_ref) * np.sign(q)
    return np.where(s == 0, 1.0, s)


# ----------------------------------------------------------------------------
# subset enumeration


def colex_subsets(M: int, r: int) -> Iterator[tuple[int, ...]]:
    """All r-subsets of range(M) in colexicographic order.

    Every subset of range(j) precedes any subset containing j, so bases made of
    early points are tried first and a handful of corrupted points is skipped
    after few candidates.
    """
    if r == 0:
        yield ()
        return
    for top in range(r - 1, M):
        for head in colex_subsets(top, r - 1):
            yield head + (top,)


def _check_rbw_size(M: int, d: int, mode: str) -> None:
    if not (2 * (d + 1) < M < 100 * max(d, 1)):
        raise ValueError(f"need 2(d+1) < M < 100d, got M={M}, d={d}")
    if mode == "exhaustive" and M > EXHAUSTIVE_MAX_POINTS:
        raise ValueError(f"exhaustive mode supports M <= {EXHAUSTIVE_MAX_POINTS}, got {M}")


def rbw_predicate(P: Poly, data: NoisyData, tol: float) -> bool:
    """Fewer than M/4 points with |P(x_j) - y_j| >= tol."""
    misses = np.count_nonzero(np.abs(P(data.grid.points) - data.values) >= tol)
    return misses < len(data.grid) / 4


def robust_fit_rbw(
    data: NoisyData,
    d: int,
    tol: float,
    oracle_mode: OracleMode = "exhaustive",
    *,
    candidate: Poly | None = None,
    seed: int = 0,
    max_iter: int = 2000,
) -> Poly:
    """Find a degree <= d polynomial missing fewer than M/4 samples by ``tol`` or more."""
    M = len(data.grid)
    _check_rbw_size(M, d, oracle_mode)
    if oracle_mode == "planted":
        if candidate is None:
            raise ValueError("planted mode needs a candidate polynomial")
        if rbw_predicate(candidate, data, tol):
            return candidate
        raise NoFeasiblePolynomial("planted candidate fails the agreement predicate")

    g = data.grid
    sc = _Scale(g.lo, g.hi)
    u = sc(g.points)
    V = _vander(u, d)
    y = data.values

    def attempt(subset) -> Poly | None:
        idx = list(subset)
        c = np.linalg.solve(V[idx], y[idx])
        misses = np.count_nonzero(np.abs(V @ c - y) >= tol)
        if misses < M / 4:
            return sc.to_poly(c)
        return None

    if oracle_mode == "exhaustive":
        for subset in colex_subsets(M, d + 1):
            P = attempt(subset)
            if P is not None:
                return P
        raise NoFeasiblePolynomial(f"no degree-{d} fit misses fewer than {M / 4:g} of {M} points")
    if oracle_mode == "ransac":
        rng = substream(seed, "rbw-ransac")
        for _ in range(max_iter):
            P = attempt(np.sort(rng.choice(M, d + 1, replace=False)))
            if P is not None:
                return P
        raise RansacBudgetExhausted(f"no feasible fit after {max_iter} random bases")
    raise ValueError(f"unknown oracle mode {oracle_mode!r}")


# ----------------------------------------------------------------------------
# square method


def required_agreement(M: int, d: int) -> int:
    """Agreeing points the square method needs: at least half, and at least 2d+1."""
    return max(2 * d + 1, math.ceil(M / 2))


def _sign_patterns(r: int) -> np.ndarray:
    # (r, 2^(r-1)) matrix of +-1; first row fixed to +1 (global sign is free),
    # column 0 is all +1
    cols = np.arange(1 << max(r - 1, 0))
    bits = (cols[None, :] >> np.arange(max(r - 1, 0))[:, None]) & 1
    return np.vstack([np.ones((1, cols.size)), 1.0 - 2.0 * bits])


def _canonical(q: Poly, signs: np.ndarray, d: int) -> tuple[Poly, np.ndarray]:
    top = q.coef(d)
    if top == 0.0:
        nz = np.flatnonzero(q.coeffs)
        top = q.coeffs[nz[0]] if nz.size else 1.0
    if top < 0:
        return -q, -signs
    return q, signs


def _finish(q: Poly, q_at: np.ndarray, y: np.ndarray, tol: float, need: int, d: int, K: float, strict: bool) -> SquareFitResult | None:
    r = np.abs(q_at * q_at - y)
    agree = r <= tol
    if np.count_nonzero(agree) < need:
        return None
    signs = recover_sign(q_at, 1.0)
    q, signs = _canonical(q, signs, d)
    floor_ok = bool(np.all(y[agree] >= K * K * (1.0 - FLOOR_SLACK)))
    if strict and not floor_ok:
        bad = float(np.min(y[agree]))
        raise KFloorError(f"agreeing sample {bad:.3g} below floor K^2 = {K * K:.3g}")
    return SquareFitResult(q, signs, float(np.max(r[agree])), agree, floor_ok)


def square_fit(
    data: NoisyData,
    d: int,
    K: float,
    oracle_mode: OracleMode = "exhaustive",
    *,
    candidate: Poly | None = None,
    strict: bool = True,
    seed: int = 0,
    max_iter: int = 500,
    max_subsets: int | None = None,
) -> SquareFitResult:
    """Recover q of degree <= d with q(x)^2 matching the observed squares.

    Success means ``|q(x)^2 - y| <= gamma + FLOOR_RTOL * max|y|`` on at least
    :func:`required_agreement` points. The global sign is fixed by making the
    x^d coefficient non-negative (lowest nonzero coefficient if that is zero).
    With ``strict`` a sample on the agreeing set below ``K^2`` raises
    :class:`KFloorError`; otherwise the result carries ``floor_ok=False``.
    """
    g = data.grid
    M = len(g)
    if M < 2 * d + 1:
        raise ValueError(f"square_fit needs at least 2d+1 = {2 * d + 1} points, got {M}")
    if not K > 0:
        raise ValueError("anticoncentration floor K must be positive")
    x, y = g.points, data.values
    ymax = float(np.max(np.abs(y))) if y.size else 0.0
    tol = data.gamma + FLOOR_RTOL * ymax
    need = required_agreement(M, d)

    if oracle_mode == "planted":
        if candidate is None:
            raise ValueError("planted mode needs a candidate polynomial")
        res = _finish(candidate, np.asarray(candidate(x)), y, tol, need, d, K, strict)
        if res is None:
            raise NoFeasiblePolynomial("planted polynomial fails the agreement predicate")
        return res

    if oracle_mode == "exhaustive":
        if M > EXHAUSTIVE_MAX_POINTS:
            raise ValueError(f"exhaustive mode supports M <= {EXHAUSTIVE_MAX_POINTS}, got {M}")
        # Any agreeing set of size `need` has its d+1 lowest-index points among the
        # first d+1+(M-need) samples, so bases outside that window are redundant.
        bases: Iterator = colex_subsets(min(M, d + 1 + M - need), d + 1)
    elif oracle_mode == "ransac":
        rng = substream(seed, "square-ransac")
        bases = (tuple(np.sort(rng.choice(M, d + 1, replace=False))) for _ in range(max_iter))
    else:
        raise ValueError(f"unknown oracle mode {oracle_mode!r}")

    sc = _Scale(g.lo, g.hi)
    u = sc(x)
    V = _vander(u, d)
    root = np.sqrt(np.maximum(y, 0.0))
    patterns = _sign_patterns(d + 1)
    screen = max(tol, SCREEN_RTOL * ymax)
    need_screen = need

    for count, subset in enumerate(bases):
        if max_subsets is not None and count >= max_subsets:
            break
        idx = list(subset)
        try:
            basis = V @ np.linalg.inv(V[idx])  # Lagrange basis at every point, (M, d+1)
        except np.linalg.LinAlgError:
            continue
        Q = basis @ (root[idx, None] * patterns)
        hits = np.count_nonzero(np.abs(Q * Q - y[:, None]) <= screen, axis=0)
        for col in np.flatnonzero(hits >= need_screen):
            res = _refine(Q[:, col], V, root, y, tol, screen, need, d, K, strict, sc)
            if res is not None:
                return res
    if oracle_mode == "ransac":
        raise RansacBudgetExhausted(f"no feasible square fit after {max_iter} random bases")
    raise NoFeasiblePolynomial(f"no degree-{d} q with q^2 matching {need} of {M} samples")


def _gauss_newton(c: np.ndarray, V: np.ndarray, y: np.ndarray, steps: int = 3) -> np.ndarray:
    # Root-domain least squares overweights samples near a zero of q, where a tiny
    # error in y is a large error in sqrt(y); polish on q^2 - y directly.
    q = V @ c
    err = np.sum((q * q - y) ** 2)
    for _ in range(steps):
        step, *_ = np.linalg.lstsq(2.0 * q[:, None] * V, y - q * q, rcond=None)
        trial = c + step
        q_new = V @ trial
        err_new = np.sum((q_new * q_new - y) ** 2)
        if not err_new < err:
            break
        c, q, err = trial, q_new, err_new
    return c


def _refine(qvals, V, root, y, tol, screen, need, d, K, strict, sc) -> SquareFitResult | None:
    # Fix per-point signs from the candidate, then least-squares refit on the best
    # `need` points (trimmed least squares) until the agreeing set stabilizes.
    signs = np.where(qvals < 0, -1.0, 1.0)
    z = signs * root
    inl = np.abs(qvals * qvals - y) <= screen
    for _ in range(_REFINE_STEPS):
        c, *_ = np.linalg.lstsq(V[inl], z[inl], rcond=None)
        c = _gauss_newton(c, V[inl], y[inl])
        q_at = V @ c
        r = np.abs(q_at * q_at - y)
        if np.count_nonzero(r <= tol) >= need:
            break
        nxt = np.zeros_like(inl)
        nxt[np.argsort(r, kind="stable")[:need]] = True
        if np.array_equal(nxt, inl):
            break
        inl = nxt
    return _finish(sc.to_poly(c), q_at, y, tol, need, d, K, strict)
