"""Executable worst-to-average-case reductions for Gaussian permanents.

A simulated average-case algorithm (:func:`noisy_oracle`) answers |Per A|^2
queries with additive noise and occasional failures. Two pipelines use it to
recover a worst-case permanent Per(W') of a small {0, +-1} block:

dilution
    W' sits alone in the corner of an n x n zero matrix. Per(R + tW) has degree
    k and leading coefficient Per(W') Per(R_D), with R_D the complementary
    minor; the estimate is |q_k| / |Per R_D|.
magnification
    W' sits in direct sum with an all-ones block. Per(R + tW) has degree n and
    leading coefficient Per(W') (n-k)!, so rounding p_n / (n-k)! returns the
    integer |Per W'| once the coefficient error is below (n-k)!/3.

Oracles return |Per|^2 directly, without the 1/n^(2n) output-probability
normalization, to avoid underflow.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from typing import Iterable, Literal

import numpy as np
from numpy.polynomial import chebyshev

from . import matcore
from .ensembles import EnsembleSpec, make_w_dilute, make_w_magnified, sample_gaussian
from .polylab import NoFeasiblePolynomial, NoisyData, Poly, SampleGrid, square_fit
from .rng import substream

FailureMode = Literal["uniform_garbage", "adversarial_sign_flip", "zero"]
Pipeline = Literal["dilution", "magnification"]
FAILURE_MODES = ("uniform_garbage", "adversarial_sign_flip", "zero")
FIT_MODES = ("planted", "exhaustive", "ransac")


class ConfigError(ValueError):
    """Invalid reduction configuration; message starts with the field name."""


class FitFailure(RuntimeError):
    """The polynomial search found no feasible fit."""


@dataclass(frozen=True)
class NoisyOracleSpec:
    gamma: float = 0.0
    gamma_is_relative: bool = False
    eta: float = 0.0
    failure_mode: FailureMode = "uniform_garbage"
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.eta < 1.0:
            raise ConfigError(f"eta: must satisfy 0 <= eta < 1, got {self.eta}")
        if self.gamma < 0:
            raise ConfigError(f"gamma: must be non-negative, got {self.gamma}")
        if self.failure_mode not in FAILURE_MODES:
            raise ConfigError(f"failure_mode: must be one of {FAILURE_MODES}, got {self.failure_mode!r}")


@dataclass(frozen=True)
class ReductionConfig:
    n: int
    k: int
    box: float
    num_points: int
    oracle: NoisyOracleSpec = field(default_factory=NoisyOracleSpec)
    fit_mode: str = "planted"
    pipeline: Pipeline = "dilution"
    K: float | None = None
    epsilon: float | None = None
    delta: float | None = None
    rd_from_oracle: bool = False
    success_rtol: float = 0.1

    def __post_init__(self):
        if self.pipeline not in ("dilution", "magnification"):
            raise ConfigError(f"pipeline: must be 'dilution' or 'magnification', got {self.pipeline!r}")
        if not 1 <= self.k < self.n:
            raise ConfigError(f"k: need 1 <= k < n, got k={self.k}, n={self.n}")
        if not 0 < self.box <= 1:
            raise ConfigError(f"box: need 0 < box <= 1, got {self.box}")
        need = 2 * self.degree + 1
        if self.num_points < need:
            raise ConfigError(f"num_points: need at least {need} for a degree-{self.degree} fit, got {self.num_points}")
        if self.fit_mode not in FIT_MODES:
            raise ConfigError(f"fit_mode: must be one of {FIT_MODES}, got {self.fit_mode!r}")
        if self.K is not None and not self.K > 0:
            raise ConfigError(f"K: must be positive, got {self.K}")

    @property
    def degree(self) -> int:
        return self.k if self.pipeline == "dilution" else self.n

    @property
    def floor(self) -> float:
        return self.K if self.K is not None else default_floor(self.n)

    @classmethod
    def from_dict(cls, doc: dict) -> "ReductionConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config: expected a JSON object")
        known = {f for f in cls.__dataclass_fields__}
        extra = set(doc) - known
        if extra:
            raise ConfigError(f"{sorted(extra)[0]}: unknown field")
        for name in ("n", "k", "box", "num_points"):
            if name not in doc:
                raise ConfigError(f"{name}: required")
        kw = dict(doc)
        oracle = kw.pop("oracle", {}) or {}
        if not isinstance(oracle, dict):
            raise ConfigError("oracle: expected an object")
        bad = set(oracle) - set(NoisyOracleSpec.__dataclass_fields__)
        if bad:
            raise ConfigError(f"oracle.{sorted(bad)[0]}: unknown field")
        try:
            return cls(oracle=NoisyOracleSpec(**oracle), **kw)
        except TypeError as exc:
            raise ConfigError(f"config: {exc}") from None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ReductionOutcome:
    pipeline: str
    seed: int
    estimate: float
    true_value: float
    relative_error: float
    anticoncentration_floor_ok: bool
    queries: int
    fit_degree: int
    top_coefficient: float
    n_agree: int
    margin_ok: bool | None = None
    success: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def default_box(pipeline: str, n: int, k: int) -> float:
    return 0.1 / k if pipeline == "dilution" else 0.5 / math.sqrt(n)


def default_floor(n: int) -> float:
    """Anticoncentration floor sqrt(n!) / n^2."""
    return math.sqrt(math.factorial(n)) / n**2


def asymptotic_t_star(n: int, k: int) -> float:
    """Query radius 4 e^2.5 n^(1/k) / sqrt(n) used in the asymptotic argument."""
    return 4 * math.e**2.5 * n ** (1.0 / k) / math.sqrt(n)


def relative_error(estimate: float, true_value: float) -> float:
    # true values are integers, so the floor of 1 makes zero permanents use absolute error
    return abs(estimate - true_value) / max(abs(true_value), 1.0)


# ----------------------------------------------------------------------------
# oracle


def _corrupt(value: float, spec: NoisyOracleSpec, query_index: int) -> float:
    rng = substream(spec.seed, "oracle", query_index)
    fail, noise, garbage = rng.random(), rng.uniform(-1.0, 1.0), rng.random()
    if fail < spec.eta:
        if spec.failure_mode == "zero":
            return 0.0
        if spec.failure_mode == "adversarial_sign_flip":
            return value + 3.0 * _gamma_abs(spec, value)
        return garbage * (2.0 * value + 1.0)
    return value + noise * _gamma_abs(spec, value)


def _gamma_abs(spec: NoisyOracleSpec, value: float) -> float:
    return spec.gamma * value if spec.gamma_is_relative else spec.gamma


def noisy_oracle(A, spec: NoisyOracleSpec, query_index: int) -> float:
    """Simulated average-case algorithm: |Per A|^2 up to +-gamma, failing w.p. eta.

    Failures return 0 (``zero``), |Per A|^2 + 3 gamma (``adversarial_sign_flip``)
    or a uniform draw from [0, 2|Per A|^2 + 1] (``uniform_garbage``). Each query
    index has its own substream of ``spec.seed``.
    """
    p = matcore.permanent_ryser(A)
    return _corrupt(p * p, spec, query_index)


def declared_gamma(spec: NoisyOracleSpec, values: np.ndarray) -> float:
    """Absolute agreement tolerance the fit is told to use."""
    if not spec.gamma_is_relative:
        return spec.gamma
    g = min(spec.gamma, 0.5)
    return g * float(np.max(np.abs(values))) / (1.0 - g) if values.size else 0.0


# ----------------------------------------------------------------------------
# ground truth


def permanent_polynomial(R, W, degree: int, interval: tuple[float, float] | None = None) -> Poly:
    """Coefficients of t -> Per(R + tW), from exact values at Chebyshev nodes in [-1, 1].

    The top coefficient needs the wide interval, but monomial evaluation near
    t = 0 then inherits errors of size eps * max |Per(R + tW)| over [-1, 1].
    With ``interval`` a second fit on that interval is attached as the
    scaled form used for evaluation.
    """
    R = np.asarray(R, dtype=float)
    W = np.asarray(W, dtype=float)
    nodes = np.cos(np.pi * (np.arange(degree + 1) + 0.5) / (degree + 1))

    def fit(ts):
        values = matcore.permanent_batch(R[None] + ts[:, None, None] * W[None])
        coeffs = chebyshev.cheb2poly(chebyshev.chebfit(nodes, values, degree))
        out = np.zeros(degree + 1)
        out[: coeffs.size] = coeffs
        return out

    wide = fit(nodes)
    if interval is None:
        return Poly(wide)
    lo, hi = interval
    a, b = 2.0 / (hi - lo), -(hi + lo) / (hi - lo)
    return Poly(wide, (a, b, fit((nodes - b) / a)))


def _query(R: np.ndarray, W: np.ndarray, grid: SampleGrid, spec: NoisyOracleSpec) -> np.ndarray:
    mats = R[None] + grid.points[:, None, None] * W[None]
    per = matcore.permanent_batch(mats)
    return np.array([_corrupt(v * v, spec, i) for i, v in enumerate(per)])


def _fit(values: np.ndarray, grid: SampleGrid, cfg: ReductionConfig, spec: NoisyOracleSpec, truth: Poly | None, seed: int):
    data = NoisyData(grid, values, declared_gamma(spec, values))
    try:
        return square_fit(
            data,
            cfg.degree,
            cfg.floor,
            cfg.fit_mode,
            candidate=truth,
            strict=False,
            seed=seed,
        )
    except NoFeasiblePolynomial as exc:
        raise FitFailure(str(exc)) from exc


def _setup(Wp, cfg: ReductionConfig, seed: int | None):
    B = matcore.as_matrix(Wp, name="Wp")
    if B.shape[0] != cfg.k:
        raise ConfigError(f"k: worst-case block is {B.shape[0]}x{B.shape[0]} but k={cfg.k}")
    seed = cfg.oracle.seed if seed is None else seed
    spec = replace(cfg.oracle, seed=seed)
    R = sample_gaussian(EnsembleSpec(cfg.n, seed=seed), "R")
    grid = SampleGrid.box(cfg.box, cfg.num_points)
    return B, seed, spec, R, grid


def run_dilution_reduction(Wp, cfg: ReductionConfig, seed: int | None = None) -> ReductionOutcome:
    """Estimate |Per Wp| from noisy |Per(R + t W_dilute)|^2 queries."""
    if cfg.pipeline != "dilution":
        cfg = replace(cfg, pipeline="dilution")
    B, seed, spec, R, grid = _setup(Wp, cfg, seed)
    n, k = cfg.n, cfg.k
    W = make_w_dilute(B, n)
    y = _query(R, W, grid, spec)
    truth = permanent_polynomial(R, W, k, (0.0, cfg.box)) if cfg.fit_mode == "planted" else None
    fit = _fit(y, grid, cfg, spec, truth, seed)

    queries = grid.points.size
    if cfg.rd_from_oracle:
        rd2 = _corrupt(matcore.permanent_ryser(R[k:, k:]) ** 2, spec, queries)
        per_rd = math.sqrt(max(rd2, 0.0))
        queries += 1
    else:
        per_rd = abs(matcore.permanent_ryser(R[k:, k:]))
    top = fit.q.coef(k)
    estimate = abs(top) / per_rd if per_rd > 0 else math.inf
    true_value = abs(matcore.permanent_ryser(B))
    rel = relative_error(estimate, true_value)
    return ReductionOutcome(
        pipeline="dilution",
        seed=seed,
        estimate=estimate,
        true_value=true_value,
        relative_error=rel,
        anticoncentration_floor_ok=fit.floor_ok,
        queries=queries,
        fit_degree=k,
        top_coefficient=top,
        n_agree=fit.n_agree,
        success=rel <= cfg.success_rtol,
    )


def run_magnification_reduction(Wp, cfg: ReductionConfig, seed: int | None = None) -> ReductionOutcome:
    """Recover the integer |Per Wp| by rounding the magnified top coefficient."""
    if cfg.pipeline != "magnification":
        cfg = replace(cfg, pipeline="magnification")
    B, seed, spec, R, grid = _setup(Wp, cfg, seed)
    n, k = cfg.n, cfg.k
    W = make_w_magnified(B, n)
    y = _query(R, W, grid, spec)
    truth = permanent_polynomial(R, W, n, (0.0, cfg.box)) if cfg.fit_mode == "planted" else None
    fit = _fit(y, grid, cfg, spec, truth, seed)

    top = fit.q.coef(n)
    scale = math.factorial(n - k)
    estimate = round(top / scale)
    margin_ok = abs(top - estimate * scale) < scale / 3.0
    true_value = abs(matcore.permanent_ryser(B))
    return ReductionOutcome(
        pipeline="magnification",
        seed=seed,
        estimate=float(estimate),
        true_value=true_value,
        relative_error=relative_error(estimate, true_value),
        anticoncentration_floor_ok=fit.floor_ok,
        queries=grid.points.size,
        fit_degree=n,
        top_coefficient=top,
        n_agree=fit.n_agree,
        margin_ok=margin_ok,
        success=estimate == true_value,
    )


def run_reduction(Wp, cfg: ReductionConfig, seed: int | None = None) -> ReductionOutcome:
    if cfg.pipeline == "dilution":
        return run_dilution_reduction(Wp, cfg, seed)
    return run_magnification_reduction(Wp, cfg, seed)


def failed_outcome(cfg: ReductionConfig, seed: int, Wp) -> ReductionOutcome:
    return ReductionOutcome(
        pipeline=cfg.pipeline,
        seed=seed,
        estimate=math.nan,
        true_value=abs(matcore.permanent_ryser(Wp)),
        relative_error=math.inf,
        anticoncentration_floor_ok=False,
        queries=cfg.num_points,
        fit_degree=cfg.degree,
        top_coefficient=math.nan,
        n_agree=0,
        margin_ok=False if cfg.pipeline == "magnification" else None,
        success=False,
    )


def run_seeds(Wp, cfg: ReductionConfig, seeds: Iterable[int], threads: int = 1) -> list[ReductionOutcome]:
    """Run one reduction per seed; fit failures become unsuccessful outcomes.

    Output order follows ``seeds`` whatever the thread count.
    """

    def one(s: int) -> ReductionOutcome:
        try:
            return run_reduction(Wp, cfg, s)
        except FitFailure:
            return failed_outcome(cfg, s, Wp)

    seeds = list(seeds)
    if threads <= 1:
        return [one(s) for s in seeds]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, seeds))


# ----------------------------------------------------------------------------
# error budgets


def gamma_budget_magnification(n: int, k: int, Delta: float, K: float, constant_c: float) -> float:
    """Additive gamma below which the square method's coefficient error is < (n-k)!/3.

    (1/3) (n-k)! K (c Delta)^n (2e)^(-2n) / 2; with M equally spaced points in
    [0, Delta], c = n / M reproduces the coefficient-error bound exactly.
    """
    if min(n, Delta, K, constant_c) <= 0 or k < 0 or k > n:
        raise ValueError("gamma_budget_magnification needs positive n, Delta, K, c and 0 <= k <= n")
    return math.factorial(n - k) / 3.0 * K * (constant_c * Delta) ** n * (2 * math.e) ** (-2 * n) / 2.0


def gamma_budget_dilution(n: int, k: int, Delta: float, K: float, num_points: int, rel_target: float = 0.1) -> float:
    """Additive gamma keeping the estimate of |Per W'| within ``rel_target``.

    Same coefficient-error bound at degree k with separation Delta/M, measured
    against a typical complementary minor sqrt((n-k)!).
    """
    sep = Delta / num_points
    per_rd = math.sqrt(math.factorial(n - k))
    amplification = 2.0 ** (2 * k + 1) * math.e ** (2 * k) * (k * sep) ** (-k)
    return rel_target * per_rd * K / amplification


def rare_event_query_bound(t: float, B, delta: float) -> float:
    """Failure-probability bound sqrt(exp(||tB||_HS^2) delta) for shifted queries."""
    M = np.asarray(B, dtype=float)
    if not 0.0 <= delta <= 1.0:
        raise ValueError("delta must lie in [0, 1]")
    if np.max(np.abs(M)) > 1:
        raise ValueError("entries of B must satisfy |b| <= 1")
    if delta == 0:
        return 0.0
    hs2 = float(np.sum((t * M) ** 2))
    return math.sqrt(delta) * math.exp(hs2 / 2.0)


# ----------------------------------------------------------------------------
# calibration


def calibration_table() -> dict:
    """Frozen calibrated gamma levels (see ``scripts/calibrate.py``)."""
    text = resources.files("permlab").joinpath("data/calibration.json").read_text()
    return json.loads(text)


def calibrated_gamma(pipeline: str, n: int) -> float:
    entry = calibration_table()[pipeline][str(n)]
    return float(entry["gamma_calibrated"])


def empirical_gamma_threshold(Wp, cfg: ReductionConfig, gammas: Iterable[float], seeds: Iterable[int], threads: int = 1) -> float:
    """Largest gamma in ``gammas`` for which every seed succeeds (0 if none)."""
    seeds = list(seeds)
    best = 0.0
    for g in sorted(gammas):
        c = replace(cfg, oracle=replace(cfg.oracle, gamma=g, gamma_is_relative=False))
        if all(o.success for o in run_seeds(Wp, c, seeds, threads)):
            best = g
        else:
            break
    return best
