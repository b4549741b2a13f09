"""Acceptance suite: one check per criterion, each at its stated tolerance and time limit.

Run under pytest for a PASS/FAIL summary at the end of the session, or
directly with ``python3 tests/test_acceptance.py [N ...]``.
"""

import itertools
import math
import sys
import time

import numpy as np
import pytest
from numpy.polynomial import polynomial as P

from permlab import matcore
from permlab.ensembles import make_w_magnified
from permlab.mclab import (
    anticoncentration_experiment,
    density_ratio_experiment,
    haar_moment_experiment,
    pinsker_check,
    rare_events_1_experiment,
    rare_events_2_experiment,
    spectral_concentration_experiment,
)
from permlab.polylab import NoisyData, Poly, SampleGrid, remez_bound, square_coex_error_bound, square_fit, top_coeff_bound
from permlab.reduction import NoisyOracleSpec, ReductionConfig, calibrated_gamma, default_box, run_seeds

CRITERIA = {}
ALL_WP = [np.array(v, dtype=float).reshape(2, 2) for v in itertools.product((-1, 0, 1), repeat=4)]


def criterion(num, title, limit):
    def register(fn):
        CRITERIA[num] = (title, limit, fn)
        return fn

    return register


def run_criterion(num):
    """Return (passed, summary line)."""
    title, limit, fn = CRITERIA[num]
    start = time.perf_counter()
    ok, detail = fn()
    elapsed = time.perf_counter() - start
    in_time = elapsed < limit
    if not in_time:
        detail += f"; over the {limit:g} s limit"
    passed = ok and in_time
    return passed, f"criterion {num}: {'PASS' if passed else 'FAIL'}  {title}: {detail} [{elapsed:.1f} s]"


@criterion(1, "Ryser vs naive permanent", 10)
def c1():
    rng = np.random.default_rng(1)
    worst = 0.0
    for i in range(1000):
        n = 2 + i % 6
        A = rng.standard_normal((n, n))
        naive, ryser = matcore.permanent_naive(A), matcore.permanent_ryser(A)
        worst = max(worst, abs(naive - ryser) / max(abs(naive), 1e-300))
    return worst <= 1e-9, f"max relative gap {worst:.2e} over 1000 matrices, n = 2..7"


@criterion(2, "integer exactness", 5)
def c2():
    bad = [n for n in range(1, 13) if matcore.permanent_ryser(np.ones((n, n))) != math.factorial(n)]
    count = 0
    for n in range(3, 13):
        for Wp in ALL_WP:
            expected = matcore.permanent_naive(Wp) * math.factorial(n - 2)
            count += 1
            if matcore.permanent_ryser(make_w_magnified(Wp, n)) != expected:
                bad.append((n, Wp.tolist()))
    return not bad, f"{len(bad)} mismatches (all-ones n <= 12 and {count} magnified matrices)"


def _sup_on_interval(c, lo, hi):
    crit = P.polyroots(P.polyder(c)) if len(c) > 2 else np.array([])
    crit = crit[np.abs(crit.imag) < 1e-12].real if crit.size else crit
    x = np.concatenate([[lo, hi], crit[(crit >= lo) & (crit <= hi)]])
    return np.max(np.abs(P.polyval(x, c)))


@criterion(3, "discrete Remez and top-coefficient bounds", 10)
def c3():
    rng = np.random.default_rng(3)
    violations = 0
    for i in range(1000):
        d = 1 + i % 10
        c = rng.standard_normal(d + 1) * rng.uniform(0.1, 10)
        # extrapolation from d+1 separated points in [0, 1] to L >= 1
        x = np.sort(rng.uniform(0, 1, d + 1))
        delta = np.min(np.diff(x))
        ref = np.max(np.abs(P.polyval(x, c)))
        for L in (1.0, 1.5, 2.0):
            violations += abs(P.polyval(L, c)) > remez_bound(d, delta, L) * ref * (1 + 1e-9)
        # sup over [-ell, ell] from d+1 separated points inside it
        ell = rng.uniform(0.2, 3.0)
        xs = np.sort(rng.uniform(-ell, ell, d + 1))
        sup = _sup_on_interval(c, -ell, ell)
        violations += sup > remez_bound(d, np.min(np.diff(xs)), ell, "sup_interval") * np.max(np.abs(P.polyval(xs, c))) * (1 + 1e-9)
        # leading coefficient from the sup norm
        violations += abs(c[-1]) > top_coeff_bound(d, ell, sup) * (1 + 1e-9)
    return violations == 0, f"{violations} violations over 1000 polynomials, d = 1..10"


@criterion(4, "square-method coefficient bound", 30)
def c4():
    rng = np.random.default_rng(4)
    violations = floor_fail = 0
    K_floor = 1e-3
    for i in range(500):
        d = 1 + i % 5
        M = 2 * d + 3
        g = SampleGrid.box(rng.uniform(0.05, 1.0), M)
        p = Poly(np.concatenate([[rng.choice([-1, 1]) * rng.uniform(1, 2)], rng.uniform(-1, 1, d)]))
        gamma = 10.0 ** rng.uniform(-10, -4)
        y = p(g.points) ** 2 + rng.uniform(-gamma, gamma, M)
        res = square_fit(NoisyData(g, y, gamma), d, K_floor, strict=False)
        qS = res.q(g.points[res.agree])
        K = np.min(np.abs(qS))
        if K < K_floor:
            floor_fail += 1
            continue
        gam = np.max(np.abs(p(g.points[res.agree]) ** 2 - qS**2))
        sep = np.min(np.diff(g.points[res.agree]))
        gap = abs(abs(p.coef(d)) - abs(res.q.coef(d)))
        violations += gap > square_coex_error_bound(d, sep, K, gam) + 1e-12 * abs(p.coef(d))
    ok = violations == 0 and floor_fail == 0
    return ok, f"{violations} violations over 500 fits, {floor_fail} below the K-floor"


def _reduction_sweep(pipeline, n, k, Wps, fit_mode, num_points, seeds):
    cfg = ReductionConfig(
        n=n, k=k, box=default_box(pipeline, n, k), num_points=num_points,
        pipeline=pipeline, fit_mode=fit_mode, success_rtol=1e-6,
    )
    fails = 0
    for Wp in Wps:
        fails += sum(not o.success for o in run_seeds(Wp, cfg, seeds))
    return fails, len(Wps) * len(seeds)


@criterion(5, "exact-oracle reductions", 120)
def c5():
    rng = np.random.default_rng(5)
    wp3 = [rng.integers(-1, 2, (3, 3)).astype(float) for _ in range(10)]
    runs = fails = 0
    for n in range(4, 13):
        for pipeline in ("dilution", "magnification"):
            f, r = _reduction_sweep(pipeline, n, 2, ALL_WP, "planted", 2 * n + 2, [0, 1])
            fails, runs = fails + f, runs + r
        for pipeline in ("dilution", "magnification"):
            f, r = _reduction_sweep(pipeline, n, 3, wp3, "planted", 2 * n + 2, [0])
            fails, runs = fails + f, runs + r
    # data-driven fits where float64 conditioning allows it
    for n in (6, 8, 10, 12):
        f, r = _reduction_sweep("dilution", n, 2, ALL_WP, "exhaustive", 7, [0])
        fails, runs = fails + f, runs + r
    for n in (6, 8, 10):
        f, r = _reduction_sweep("magnification", n, 2, ALL_WP, "exhaustive" if 2 * n + 3 <= 24 else "ransac", min(2 * n + 3, 24), [0])
        fails, runs = fails + f, runs + r
    return fails == 0, f"{runs - fails}/{runs} runs recover the ground truth (n = 4..12, k = 2, 3)"


@criterion(6, "noisy magnification at the calibrated budget", 600)
def c6():
    n, k = 10, 2
    gamma = calibrated_gamma("magnification", n)
    rates = []
    for eta in (0.0, 0.05):
        cfg = ReductionConfig(
            n=n, k=k, box=default_box("magnification", n, k), num_points=24, pipeline="magnification",
            fit_mode="exhaustive", oracle=NoisyOracleSpec(gamma=gamma, eta=eta, seed=6),
        )
        rates.append(sum(o.success for o in run_seeds([[1, 1], [1, 1]], cfg, range(100), threads=4)))
    return min(rates) >= 90, f"gamma = {gamma:.0e}; eta = 0: {rates[0]}/100, eta = 0.05: {rates[1]}/100 exact"


@criterion(7, "Haar block moments", 120)
def c7():
    r = haar_moment_experiment(8, 256, 10_000, seed=7, threads=4)
    s = r.summary
    return r.passed, f"E tr = {s['mean_first']:.4f} (exact 8), E tr^2 = {s['mean_second']:.3f} (exact {s['closed_form_second']:.3f})"


@criterion(8, "spectral concentration", 120)
def c8():
    r = spectral_concentration_experiment(50, 10_000, seed=8, threads=4)
    worst = min(r.checks, key=lambda c: c.margin)
    alt = spectral_concentration_experiment(50, 10_000, seed=8, form="singular_value", threads=4)
    return r.passed, (
        f"worst check '{worst.label}': {worst.empirical:.4g} vs bound {worst.bound:.3g} + {worst.slack:.2g}"
        f" (singular-value form {'passes' if alt.passed else 'fails'})"
    )


@criterion(9, "rare events I", 300)
def c9():
    parts, ok = [], True
    for t in (0.0, 0.1, 0.2):
        r = rare_events_1_experiment(6, t, np.ones((6, 6)), None, 10_000, seed=9)
        ok &= r.passed
        parts.append(f"t={t}: {r.empirical_stat:.4f} <= {r.theoretical_bound:.4f}+{r.slack:.4f}")
    return ok, "; ".join(parts)


@criterion(10, "rare events II slice", 300)
def c10():
    parts, ok = [], True
    for threshold in (4.0, 4.5, 5.5):
        r = rare_events_2_experiment(16, 1024, 1.0, threshold, 10_000, seed=10, C=4.0, threads=4)
        ok &= r.passed
        parts.append(f"lambda > {threshold}: {r.empirical_stat:.4f} <= {r.theoretical_bound:.4g}+{r.slack:.4f}")
    return ok, "; ".join(parts)


@criterion(11, "density ratio", 300)
def c11():
    r = density_ratio_experiment(12, 2048, 10_000, seed=11, threads=4)
    return r.passed, (
        f"Z_G/Z_S estimate {r.z_ratio_estimate:.4f} (exact {r.z_ratio_exact:.4f}, within [1/10, 10]: {r.within_ten}); "
        f"residual bound violated on {r.residual_violations}/{r.good_count} good samples"
    )


@criterion(12, "anticoncentration box plots", 120)
def c12():
    grid = list(np.linspace(0, 1 / math.sqrt(10), 5))
    worst, ok = 0.0, True
    for seed in range(10):
        r = anticoncentration_experiment(10, 5, grid, 30, seed=seed)
        ok &= r.passed and len(r.per_trial) == 150
        worst = max(worst, max(c.empirical for c in r.checks))
    return ok, f"largest fraction below 1/100 over 10 seeds x 5 t-values: {worst:.3f} (limit 0.2)"


@criterion(13, "KL closed form and Pinsker", 10)
def c13():
    ts = np.linspace(0.0, 0.6, 5)
    ws = (-1.0, -0.3, 0.5, 1.0)
    worst_kl, ok = 0.0, True
    for t, w in itertools.product(ts, ws):
        row = pinsker_check(4, float(t), w).per_trial[0]
        gap = abs(row["kl_closed"] - row["kl_quadrature"])
        worst_kl = max(worst_kl, gap)
        ok &= gap <= 1e-6 and row["tvd_1d"] <= math.sqrt(row["kl_closed"] / 2) + 1e-12
    return ok, f"max |KL closed - quadrature| = {worst_kl:.1e} over 20 (t, w) pairs; 1-D Pinsker holds: {ok}"


@criterion(14, "perturbation gap", 10)
def c14():
    rng = np.random.default_rng(14)
    worst, bad = 0.0, 0
    for i in range(200):
        n = 2 + i % 5
        if i % 4 == 0:
            A, B = np.ones((n, n)), np.ones((n, n))
        else:
            A, B = rng.uniform(-1, 1, (n, n)), rng.choice([-1.0, 1.0], (n, n))
        gap = matcore.perturbation_gap(A, B, matcore.perturbation_threshold(n))
        worst = max(worst, gap)
        bad += gap > 1.0
    return bad == 0, f"{bad} gaps above 1 over 200 trials, n = 2..6 (largest {worst:.2e})"


@pytest.mark.parametrize("num", sorted(CRITERIA))
def test_criterion(num, acceptance_log):
    passed, line = run_criterion(num)
    acceptance_log[num] = line
    print(line)
    assert passed, line


if __name__ == "__main__":
    wanted = [int(a) for a in sys.argv[1:]] or sorted(CRITERIA)
    results = [run_criterion(num) for num in wanted]
    for _, line in results:
        print(line)
    sys.exit(0 if all(p for p, _ in results) else 1)
