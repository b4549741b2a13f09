"""Monte Carlo harnesses comparing empirical rates against theoretical bounds.

Each experiment returns an :class:`ExperimentReport` holding one :class:`Check`
per bound. A check passes when ``empirical <= bound + slack``; the slack is an
explicit 3-sigma binomial allowance ``3 sqrt(p (1 - p) / N)`` with
``p = max(rate, 1/N)`` unless stated otherwise. Trials are drawn in fixed
chunks from per-chunk substreams, so reports are identical whatever the thread
count.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Literal, Sequence

import numpy as np
from scipy import integrate, stats
from scipy.special import multigammaln

from . import matcore
from .ensembles import gaussian_batch, haar_submatrix_batch, kl_shift_scale, spectral_stats_batch, tvd_bound_shift_scale
from .rng import substream

CHUNK = 1000
DEFAULT_C = 8.0


class ExperimentConfigError(ValueError):
    """Experiment parameters outside the supported regime."""


class QuadratureError(RuntimeError):
    """Numerical integration did not converge."""


@dataclass(frozen=True)
class Check:
    label: str
    empirical: float
    bound: float
    slack: float = 0.0

    @property
    def passed(self) -> bool:
        return bool(self.empirical <= self.bound + self.slack)

    @property
    def margin(self) -> float:
        return self.bound + self.slack - self.empirical


@dataclass
class ExperimentReport:
    name: str
    config: dict
    trials: int
    seed: int
    per_trial: list[dict] = field(default_factory=list)
    checks: list[Check] = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.per_trial) != self.trials:
            raise ValueError(f"per_trial has {len(self.per_trial)} entries for {self.trials} trials")

    def _worst(self) -> Check | None:
        return min(self.checks, key=lambda c: c.margin) if self.checks else None

    @property
    def empirical_stat(self) -> float:
        w = self._worst()
        return w.empirical if w else 0.0

    @property
    def theoretical_bound(self) -> float:
        w = self._worst()
        return w.bound if w else 0.0

    @property
    def slack(self) -> float:
        w = self._worst()
        return w.slack if w else 0.0

    @property
    def passed(self) -> bool:
        return self.empirical_stat <= self.theoretical_bound + self.slack

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "config": self.config,
            "trials": self.trials,
            "seed": self.seed,
            "empirical_stat": self.empirical_stat,
            "theoretical_bound": self.theoretical_bound,
            "slack": self.slack,
            "pass": self.passed,
            "checks": [dict(asdict(c), passed=c.passed) for c in self.checks],
            "summary": self.summary,
            "per_trial": self.per_trial,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_json_default) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        cols = sorted({k for row in self.per_trial for k in row})
        w = csv.DictWriter(buf, fieldnames=["trial", *[c for c in cols if c != "trial"]], lineterminator="\n")
        w.writeheader()
        for i, row in enumerate(self.per_trial):
            w.writerow({"trial": i, **row})
        return buf.getvalue()

    def table(self) -> str:
        lines = [f"{self.name}: {'PASS' if self.passed else 'FAIL'}"]
        for c in self.checks:
            lines.append(
                f"  {c.label:40s} empirical={c.empirical:.4g} bound={c.bound:.4g} slack={c.slack:.3g} "
                f"{'ok' if c.passed else 'VIOLATED'}"
            )
        return "\n".join(lines)


@dataclass
class DensityReport:
    log_ratio_samples: list[float]
    z_ratio_estimate: float
    z_ratio_exact: float
    trials: int
    good_count: int
    excluded_lambda: int
    excluded_trace: int
    residual_violations: int
    residual_form: str
    config: dict = field(default_factory=dict)

    @property
    def within_ten(self) -> bool:
        return 0.1 <= self.z_ratio_estimate <= 10.0

    @property
    def passed(self) -> bool:
        return self.within_ten and self.residual_violations == 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["within_ten"] = self.within_ten
        d["pass"] = self.passed
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_json_default) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("trial,log_ratio\n")
        for i, v in enumerate(self.log_ratio_samples):
            buf.write(f"{i},{v!r}\n")
        return buf.getvalue()

    def table(self) -> str:
        return (
            f"density: {'PASS' if self.passed else 'FAIL'}\n"
            f"  Z_G/Z_S estimate={self.z_ratio_estimate:.5g} exact={self.z_ratio_exact:.5g} within [1/10, 10]: {self.within_ten}\n"
            f"  good samples {self.good_count}/{self.trials}, residual bound ({self.residual_form}) violated on {self.residual_violations}"
        )


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def binomial_slack(rate: float, trials: int) -> float:
    """3 sqrt(p (1-p) / N) with p floored at 1/N so that a zero count still gets slack."""
    if trials <= 0:
        return 0.0
    p = min(max(rate, 1.0 / trials), 0.5)
    return 3.0 * math.sqrt(p * (1.0 - p) / trials)


def _chunked(fn: Callable[[int, int], np.ndarray], trials: int, threads: int = 1) -> np.ndarray:
    # fn(chunk_index, size) draws from its own substream; results are concatenated in index order
    sizes = [min(CHUNK, trials - lo) for lo in range(0, trials, CHUNK)]
    if not sizes:
        return np.zeros(0)
    if threads <= 1:
        parts = [fn(i, s) for i, s in enumerate(sizes)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(fn, range(len(sizes)), sizes))
    return np.concatenate(parts, axis=0)


# ----------------------------------------------------------------------------
# anticoncentration


def anticoncentration_experiment(
    n: int,
    k: int,
    t_grid: Sequence[float],
    trials: int,
    seed: int,
    *,
    floor_divisor: float = 100.0,
    max_fraction: float = 0.2,
) -> ExperimentReport:
    """Distribution of |Per(R + tW)| / sqrt(n!) with W magnified from a random {0, +-1} block.

    The same ``trials`` pairs (R, W) are evaluated at every t. Each t gets a
    check that the fraction below 1/floor_divisor is at most ``max_fraction``;
    this is evidence about a conjecture, not a theorem.
    """
    from .ensembles import make_w_magnified

    if n > 14:
        raise ExperimentConfigError(f"n: anticoncentration runs need n <= 14, got {n}")
    if not 1 <= k < n:
        raise ExperimentConfigError(f"k: need 1 <= k < n, got {k}")
    ts = [float(t) for t in t_grid]
    if any(not 0.0 <= t <= 1.0 / math.sqrt(n) + 1e-12 for t in ts):
        raise ExperimentConfigError(f"t_grid: values must lie in [0, 1/sqrt(n)], got {ts}")

    scale = math.sqrt(math.factorial(n))
    Rs = np.empty((trials, n, n))
    Ws = np.empty((trials, n, n))
    for i in range(trials):
        Rs[i] = substream(seed, "anticonc-R", i).standard_normal((n, n))
        Wp = substream(seed, "anticonc-W", i).integers(-1, 2, size=(k, k)).astype(float)
        Ws[i] = make_w_magnified(Wp, n)

    per_trial: list[dict] = []
    checks: list[Check] = []
    boxes = []
    for j, t in enumerate(ts):
        vals = np.abs(matcore.permanent_batch(Rs + t * Ws)) / scale if trials else np.zeros(0)
        per_trial.extend({"t_index": j, "t": t, "sample": i, "value": float(v)} for i, v in enumerate(vals))
        frac = float(np.mean(vals < 1.0 / floor_divisor)) if trials else 0.0
        q = np.quantile(vals, [0.0, 0.25, 0.5, 0.75, 1.0]).tolist() if trials else []
        boxes.append({"t": t, "quartiles": q, "fraction_below_floor": frac})
        if trials:
            checks.append(Check(f"t={t:.4f} fraction below 1/{floor_divisor:g}", frac, max_fraction))
    return ExperimentReport(
        name="anticoncentration",
        config=dict(n=n, k=k, t_grid=ts, samples_per_t=trials, floor_divisor=floor_divisor, max_fraction=max_fraction),
        trials=len(per_trial),
        seed=seed,
        per_trial=per_trial,
        checks=checks,
        summary={"boxes": boxes},
    )


# ----------------------------------------------------------------------------
# rare events


def rare_events_1_experiment(
    n: int,
    t: float,
    B,
    event_threshold: float | None,
    trials: int,
    seed: int,
    *,
    target_delta: float = 0.01,
    event: Literal["misrounded", "exact"] = "misrounded",
) -> ExperimentReport:
    """Measure transfer of a rare event under the mean shift A -> A + tB.

    The estimator g returns |Per A|^2 exactly, except in ``misrounded`` mode it
    corrupts the value whenever |Per A|^2 exceeds ``event_threshold``; the
    failure set S = {A : g(A) != |Per A|^2} is then a tail event of tunable
    probability. With ``event_threshold=None`` the threshold is the
    (1 - target_delta) quantile of an independent calibration sample.
    """
    Bm = matcore.as_matrix(B, name="B")
    if Bm.shape[0] != n:
        raise ExperimentConfigError(f"B: expected {n}x{n}, got {Bm.shape}")
    if np.max(np.abs(Bm)) > 1:
        raise ExperimentConfigError("B: entries must satisfy |b| <= 1")

    def per2(tag: str, shift: float):
        def draw(ci: int, size: int) -> np.ndarray:
            R = substream(seed, tag, ci).standard_normal((size, n, n))
            return matcore.permanent_batch(R + shift * Bm) ** 2

        return draw

    if event_threshold is None:
        calib = _chunked(per2("rare1-calibrate", 0.0), max(trials, 1000))
        event_threshold = float(np.quantile(calib, 1.0 - target_delta))
    base = _chunked(per2("rare1-base", 0.0), trials)
    shifted = _chunked(per2("rare1-shifted", t), trials)

    def in_event(v: np.ndarray) -> np.ndarray:
        if event == "exact":
            return np.zeros(v.shape, dtype=bool)
        return v > event_threshold

    delta = float(np.mean(in_event(base))) if trials else 0.0
    rate = float(np.mean(in_event(shifted))) if trials else 0.0
    hs2 = float(np.sum((t * Bm) ** 2))
    bound = min(math.sqrt(math.exp(hs2) * delta), 1.0) if hs2 < 700 else 1.0
    checks = [Check("shifted failure rate", rate, bound, binomial_slack(rate, trials))] if trials else []
    return ExperimentReport(
        name="rare1",
        config=dict(n=n, t=t, B=Bm.tolist(), event_threshold=event_threshold, trials=trials, event=event),
        trials=trials,
        seed=seed,
        per_trial=[{"base": float(a), "shifted": float(b)} for a, b in zip(base, shifted)],
        checks=checks,
        summary={"delta_hat": delta, "shifted_rate": rate, "hs_norm_sq": hs2, "vacuous": bound >= 1.0},
    )


def rare_events_2_experiment(
    n: int,
    m: int,
    alpha: float,
    lambda_threshold: float,
    trials: int,
    seed: int,
    *,
    C: float = DEFAULT_C,
    threads: int = 1,
) -> ExperimentReport:
    """Transfer of the event lambda_max(X^T X) > threshold from Haar blocks to Gaussians.

    Checks P_G(E) <= 3 exp(-n^alpha) + 10 exp(n^(alpha/2)) P_S(E), with the
    Haar rate replaced by its estimate and slack on the Gaussian rate.
    """
    if m < C * n * n:
        raise ExperimentConfigError(f"m: need m >= C n^2 = {C * n * n:g}, got {m}")

    def haar(ci: int, size: int) -> np.ndarray:
        return spectral_stats_batch(haar_submatrix_batch(n, m, size, seed, "rare2", ci))[0]

    def gauss(ci: int, size: int) -> np.ndarray:
        return spectral_stats_batch(gaussian_batch(n, size, 1.0 / n, seed, "rare2", ci))[0]

    lam_s = _chunked(haar, trials, threads)
    lam_g = _chunked(gauss, trials, threads)
    delta = float(np.mean(lam_s > lambda_threshold)) if trials else 0.0
    rate = float(np.mean(lam_g > lambda_threshold)) if trials else 0.0
    bound = 3.0 * math.exp(-(n**alpha)) + 10.0 * math.exp(n ** (alpha / 2.0)) * delta
    return ExperimentReport(
        name="rare2",
        config=dict(n=n, m=m, alpha=alpha, lambda_threshold=lambda_threshold, trials=trials, C=C),
        trials=trials,
        seed=seed,
        per_trial=[{"lambda_max_haar": float(a), "lambda_max_gauss": float(b)} for a, b in zip(lam_s, lam_g)],
        checks=[Check("gaussian rate of lambda_max event", rate, bound, binomial_slack(rate, trials))] if trials else [],
        summary={"haar_rate": delta, "gaussian_rate": rate, "vacuous": bound >= 1.0},
    )


# ----------------------------------------------------------------------------
# spectral statistics


def spectral_concentration_experiment(
    n: int,
    trials: int,
    seed: int,
    *,
    t_values: Sequence[float] = (0.3, 0.5, 1.0),
    s_values: Sequence[float] = (1.0, 4.0),
    form: Literal["eigenvalue", "singular_value"] = "eigenvalue",
    threads: int = 1,
) -> ExperimentReport:
    """Tail bounds for variance-1/n Gaussian matrices.

    ``eigenvalue`` checks P(lambda_max(X^T X) > 3 + t) <= exp(-n t^2 / 2);
    ``singular_value`` checks the Lipschitz-concentration form
    P(sqrt(lambda_max) >= 3 + t) <= exp(-n t^2 / 2). Both also check
    P(|trace[(X^T X)^2 - 2 X^T X]| > 100 sqrt(s)) <= exp(-s) + exp(-n).
    """
    if n < 10:
        raise ExperimentConfigError(f"n: spectral concentration needs n >= 10, got {n}")

    def draw(ci: int, size: int) -> np.ndarray:
        lam, tr = spectral_stats_batch(gaussian_batch(n, size, 1.0 / n, seed, "spectral", ci))
        return np.stack([lam, tr], axis=1)

    data = _chunked(draw, trials, threads).reshape(-1, 2)
    lam, tr = data[:, 0], data[:, 1]
    stat = lam if form == "eigenvalue" else np.sqrt(lam)
    checks = []
    for t in t_values:
        hit = stat > 3 + t if form == "eigenvalue" else stat >= 3 + t
        rate = float(np.mean(hit)) if trials else 0.0
        name = "lambda_max" if form == "eigenvalue" else "sqrt(lambda_max)"
        checks.append(Check(f"P({name} > 3+{t:g})", rate, min(math.exp(-n * t * t / 2), 1.0), binomial_slack(rate, trials)))
    for s in s_values:
        rate = float(np.mean(np.abs(tr) > 100 * math.sqrt(s))) if trials else 0.0
        bound = min(math.exp(-s) + math.exp(-n), 1.0)
        checks.append(Check(f"P(|trace stat| > 100 sqrt({s:g}))", rate, bound, binomial_slack(rate, trials)))
    return ExperimentReport(
        name="spectral",
        config=dict(n=n, trials=trials, t_values=list(t_values), s_values=list(s_values), form=form),
        trials=trials,
        seed=seed,
        per_trial=[{"lambda_max": float(a), "trace_stat": float(b)} for a, b in zip(lam, tr)],
        checks=checks if trials else [],
        summary={"mean_lambda_max": float(lam.mean()) if trials else 0.0, "mean_trace_stat": float(tr.mean()) if trials else 0.0},
    )


def haar_second_moment(n: int, m: int) -> float:
    """E tr[(X^T X)^2] = (m / (m+2)) [2n + 1 - (n-1)^2 / (m-1)] for scaled Haar blocks."""
    return m / (m + 2.0) * (2 * n + 1 - (n - 1) ** 2 / (m - 1.0))


def haar_moment_experiment(
    n: int,
    m: int,
    trials: int,
    seed: int,
    *,
    rtol_first: float = 0.01,
    rtol_second: float = 0.02,
    threads: int = 1,
) -> ExperimentReport:
    """Monte Carlo means of tr[X^T X] and tr[(X^T X)^2] against their closed forms."""
    if m < 2 * n:
        raise ExperimentConfigError(f"m: need m >= 2n, got n={n}, m={m}")

    def draw(ci: int, size: int) -> np.ndarray:
        X = haar_submatrix_batch(n, m, size, seed, "moments", ci)
        G = np.swapaxes(X, -1, -2) @ X
        return np.stack([np.trace(G, axis1=-2, axis2=-1), np.sum(G * G, axis=(-2, -1))], axis=1)

    data = _chunked(draw, trials, threads).reshape(-1, 2)
    first, second = float(n), haar_second_moment(n, m)
    checks = []
    if trials:
        m1, m2 = data.mean(axis=0)
        checks = [
            Check("E tr[X^T X] relative deviation", abs(m1 / first - 1.0), rtol_first),
            Check("E tr[(X^T X)^2] relative deviation", abs(m2 / second - 1.0), rtol_second),
        ]
    return ExperimentReport(
        name="moments",
        config=dict(n=n, m=m, trials=trials, rtol_first=rtol_first, rtol_second=rtol_second),
        trials=trials,
        seed=seed,
        per_trial=[{"tr1": float(a), "tr2": float(b)} for a, b in data],
        checks=checks,
        summary={
            "closed_form_first": first,
            "closed_form_second": second,
            "mean_first": float(data[:, 0].mean()) if trials else None,
            "mean_second": float(data[:, 1].mean()) if trials else None,
        },
    )


# ----------------------------------------------------------------------------
# density ratio between Gaussian and Haar-block ensembles


def haar_density_exponent(n: int, m: int, exponent: Literal["literal", "haar"] = "literal") -> float:
    """Power of det(I - (n/m) X^T X) in the Haar-block density.

    ``literal`` is (m - 2n)/2; ``haar`` is the exact (m - 2n - 1)/2.
    """
    return (m - 2 * n) / 2.0 if exponent == "literal" else (m - 2 * n - 1) / 2.0


def log_z_gaussian(n: int) -> float:
    return n * n / 2.0 * math.log(2 * math.pi / n)


def log_z_haar(n: int, m: int, exponent: Literal["literal", "haar"] = "literal") -> float:
    """log of the integral of det(I - (n/m) X^T X)^a over ||X|| < sqrt(m/n)."""
    a = haar_density_exponent(n, m, exponent)
    return (
        n * n / 2.0 * math.log(math.pi)
        + multigammaln(a + (n + 1) / 2.0, n)
        - multigammaln(a + n + 0.5, n)
        + n * n / 2.0 * math.log(m / n)
    )


def log_density_ratio(lam: np.ndarray, n: int, m: int, exponent: Literal["literal", "haar"] = "literal") -> np.ndarray:
    """Unnormalized log p_G - log p_S from eigenvalues of X^T X (last axis); +inf off the Haar support."""
    lam = np.asarray(lam, dtype=float)
    x = n * lam / m
    a = haar_density_exponent(n, m, exponent)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = -n * lam / 2.0 - a * np.log1p(-x)
    out = terms.sum(axis=-1)
    return np.where(np.all(x < 1, axis=-1), out, np.inf)


def residual_bound(lam: np.ndarray, n: int, m: int, K: float, form: Literal["literal", "corrected"] = "literal"):
    """Allowed |log ratio - centre| per sample; returns (centre, bound).

    ``literal``: centre 0 and bound K^2 n^3/m^2 + K^3 n^4/m^3 + (n^2/m)|sum(lam^2 - 2 lam)|.
    ``corrected``: centre (n^2 / 4m) sum(lam^2 - 4 lam), the second-order
    expansion of the exact log ratio, with its rigorous Taylor remainder
    (n^3 / 2m^2) sum(lam^2) + a sum(x^3 / (3 (1 - x))), x = n lam / m.
    """
    lam = np.asarray(lam, dtype=float)
    if form == "literal":
        trace = np.sum(lam * lam - 2 * lam, axis=-1)
        bound = K**2 * n**3 / m**2 + K**3 * n**4 / m**3 + n * n / m * np.abs(trace)
        return np.zeros(lam.shape[:-1]), bound
    x = n * lam / m
    a = haar_density_exponent(n, m, "literal")
    centre = n * n / (4.0 * m) * np.sum(lam * lam - 4 * lam, axis=-1)
    bound = n**3 / (2.0 * m * m) * np.sum(lam * lam, axis=-1) + a * np.sum(x**3 / (3.0 * (1.0 - x)), axis=-1)
    return centre, bound


def density_ratio_experiment(
    n: int,
    m: int,
    trials: int,
    seed: int,
    *,
    C: float = DEFAULT_C,
    K: float = 4.0,
    trace_cap: float = 100.0,
    residual_form: Literal["literal", "corrected"] = "literal",
    threads: int = 1,
) -> DensityReport:
    """Gaussian vs Haar-block density ratio on the good set and the Z_G / Z_S ratio.

    Z_G/Z_S = 1 / E_G[p~_S / p~_G] is estimated by importance weighting over all
    Gaussian samples and compared with the closed form. Per-sample residuals are
    checked on samples with lambda_max <= K and |trace stat| <= trace_cap.
    """
    if m < C * n * n:
        raise ExperimentConfigError(f"m: need m >= C n^2 = {C * n * n:g}, got {m}")
    if K > m / (10.0 * n):
        raise ExperimentConfigError(f"K: need K <= m/(10 n) = {m / (10.0 * n):g}")

    def draw(ci: int, size: int) -> np.ndarray:
        X = gaussian_batch(n, size, 1.0 / n, seed, "density", ci)
        return np.linalg.eigvalsh(np.swapaxes(X, -1, -2) @ X)

    lam = np.maximum(_chunked(draw, trials, threads).reshape(-1, n), 0.0)
    h = log_density_ratio(lam, n, m)
    lam_max = lam[:, -1]
    trace = np.sum(lam * lam - 2 * lam, axis=-1)
    bad_lam = lam_max > K
    bad_trace = ~bad_lam & (np.abs(trace) > trace_cap)
    good = ~bad_lam & ~bad_trace
    if trials and good.sum() < 0.5 * trials:
        raise ExperimentConfigError(f"only {int(good.sum())} of {trials} samples in the good set")

    centre, bound = residual_bound(lam[good], n, m, K, residual_form)
    violations = int(np.count_nonzero(np.abs(h[good] - centre) > bound))
    weights = np.exp(-h)  # p~_S / p~_G, zero off the Haar support
    z_est = float(1.0 / weights.mean()) if trials else math.nan
    z_exact = math.exp(log_z_gaussian(n) - log_z_haar(n, m))
    return DensityReport(
        log_ratio_samples=[float(v) for v in h[good]],
        z_ratio_estimate=z_est,
        z_ratio_exact=z_exact,
        trials=trials,
        good_count=int(good.sum()),
        excluded_lambda=int(bad_lam.sum()),
        excluded_trace=int(bad_trace.sum()),
        residual_violations=violations,
        residual_form=residual_form,
        config=dict(n=n, m=m, trials=trials, seed=seed, C=C, K=K, trace_cap=trace_cap, residual_form=residual_form),
    )


# ----------------------------------------------------------------------------
# KL / Pinsker


def _quad(f, a, b, limit: int) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, _ = integrate.quad(f, a, b, limit=limit, epsabs=1e-13, epsrel=1e-11)
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(str(exc)) from None
    return val


def kl_quadrature(t: float, w: float, quad_points: int = 200) -> float:
    """KL( N(t w, (1-t)^2) || N(0, 1) ) by numerical integration."""
    p = stats.norm(t * w, 1.0 - t)
    lo, hi = p.ppf(1e-16), p.isf(1e-16)
    return _quad(lambda x: p.pdf(x) * (p.logpdf(x) - stats.norm.logpdf(x)), lo, hi, quad_points)


def tvd_quadrature(t: float, w: float, quad_points: int = 200) -> float:
    """TVD between N(t w, (1-t)^2) and N(0, 1) by numerical integration."""
    p = stats.norm(t * w, 1.0 - t)
    lo, hi = min(p.ppf(1e-16), -9.0), max(p.isf(1e-16), 9.0)
    return 0.5 * _quad(lambda x: abs(p.pdf(x) - stats.norm.pdf(x)), lo, hi, quad_points)


def product_tvd(t: float, w: float, count: int, quad_points: int = 200) -> float:
    """TVD between N(t w, (1-t)^2)^count and N(0, 1)^count.

    The likelihood ratio depends on S = sum x and Q = sum x^2 - S^2/count, which
    are independent under both laws: S is normal and Q is a scaled chi-square
    with count-1 degrees of freedom. For each S the set where the shifted law
    dominates is {Q < q*(S)}, so the TVD is a one-dimensional integral.
    """
    mu, sigma = t * w, 1.0 - t
    if t == 0:
        return 0.0
    N = count
    # log L = -N log sigma - (Q + S^2/N - 2 mu S + N mu^2)/(2 sigma^2) + (Q + S^2/N)/2, decreasing in Q
    a = 0.5 - 0.5 / sigma**2

    def qstar(s):
        rest = -N * math.log(sigma) - (s * s / N - 2 * mu * s + N * mu * mu) / (2 * sigma**2) + s * s / (2 * N)
        return max(-rest / a, 0.0)

    sp = stats.norm(N * mu, math.sqrt(N) * sigma)
    sq = stats.norm(0.0, math.sqrt(N))

    def integrand(s):
        q = qstar(s)
        if N == 1:
            fp = 1.0 if q > 0 else 0.0
            fq = fp
        else:
            fp = stats.chi2.cdf(q / sigma**2, N - 1)
            fq = stats.chi2.cdf(q, N - 1)
        return sp.pdf(s) * fp - sq.pdf(s) * fq

    lo = min(sp.ppf(1e-15), sq.ppf(1e-15))
    hi = max(sp.isf(1e-15), sq.isf(1e-15))
    return max(_quad(integrand, lo, hi, quad_points), 0.0)


def pinsker_check(n: int, t: float, w_max: float, quad_points: int = 200) -> ExperimentReport:
    """Closed-form vs quadrature KL, 1-D Pinsker, and the n^2-entry TVD bound."""
    if not 0.0 <= t < 1.0:
        raise ExperimentConfigError(f"t: need 0 <= t < 1, got {t}")
    kl_closed = kl_shift_scale(t, w_max)
    kl_num = kl_quadrature(t, w_max, quad_points)
    tvd1 = tvd_quadrature(t, w_max, quad_points)
    tvdn = product_tvd(t, w_max, n * n, quad_points)
    bound_n = tvd_bound_shift_scale(t, n, w_max)
    row = dict(kl_closed=kl_closed, kl_quadrature=kl_num, tvd_1d=tvd1, tvd_product=tvdn, tvd_bound=bound_n)
    return ExperimentReport(
        name="pinsker",
        config=dict(n=n, t=t, w_max=w_max, quad_points=quad_points),
        trials=1,
        seed=0,
        per_trial=[row],
        checks=[
            Check("|KL closed form - quadrature|", abs(kl_closed - kl_num), 1e-6),
            Check("1-D TVD vs sqrt(KL/2)", tvd1, math.sqrt(kl_closed / 2.0)),
            Check("n^2-entry TVD vs Pinsker bound", tvdn, bound_n),
        ],
        summary=row,
    )


EXPERIMENTS = {
    "anticoncentration": anticoncentration_experiment,
    "rare1": rare_events_1_experiment,
    "rare2": rare_events_2_experiment,
    "spectral": spectral_concentration_experiment,
    "moments": haar_moment_experiment,
    "density": density_ratio_experiment,
    "pinsker": pinsker_check,
}
