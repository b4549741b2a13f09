"""Empirical gamma calibration for both reduction pipelines.

For each n, sweeps absolute oracle noise gamma over a log grid (eta = 0,
exact worst-case block [[1, 1], [1, 1]]), records the largest gamma at which
every seed succeeds, and freezes one tenth of it as the calibrated level.

    python3 scripts/calibrate.py --seeds 100 --out src/permlab/data/calibration.json
"""

from __future__ import annotations

import argparse
import json
import time

import numpy as np

from permlab.reduction import (
    NoisyOracleSpec,
    ReductionConfig,
    default_box,
    default_floor,
    empirical_gamma_threshold,
    gamma_budget_dilution,
    gamma_budget_magnification,
)

WP = [[1, 1], [1, 1]]
K_BLOCK = 2
GAMMAS = [float(g) for g in 10.0 ** np.arange(-14, -1.75, 0.5)]


def magnification_config(n: int) -> ReductionConfig:
    # exhaustive search is capped at 24 points; beyond that use random bases
    M = min(24, 2 * n + 4) if 2 * n + 1 <= 24 else 2 * n + 2
    mode = "exhaustive" if M <= 24 else "ransac"
    return ReductionConfig(
        n=n, k=K_BLOCK, box=default_box("magnification", n, K_BLOCK), num_points=M,
        pipeline="magnification", fit_mode=mode, oracle=NoisyOracleSpec(),
    )


def dilution_config(n: int) -> ReductionConfig:
    return ReductionConfig(
        n=n, k=K_BLOCK, box=default_box("dilution", n, K_BLOCK), num_points=4 * (K_BLOCK + 1),
        pipeline="dilution", fit_mode="exhaustive", oracle=NoisyOracleSpec(),
    )


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seeds", type=int, default=100)
    ap.add_argument("--threads", type=int, default=4)
    ap.add_argument("--n", type=int, nargs="+", default=[8, 10, 12])
    ap.add_argument("--out", default="src/permlab/data/calibration.json")
    args = ap.parse_args()

    table: dict = {"gamma_grid": GAMMAS, "seeds": args.seeds, "Wp": WP, "magnification": {}, "dilution": {}}
    for pipeline, make in (("magnification", magnification_config), ("dilution", dilution_config)):
        for n in args.n:
            cfg = make(n)
            start = time.time()
            thr = empirical_gamma_threshold(WP, cfg, GAMMAS, range(args.seeds), args.threads)
            K = default_floor(n)
            if pipeline == "magnification":
                budget = gamma_budget_magnification(n, K_BLOCK, cfg.box, K, n / cfg.num_points)
            else:
                budget = gamma_budget_dilution(n, K_BLOCK, cfg.box, K, cfg.num_points)
            table[pipeline][str(n)] = {
                "k": K_BLOCK,
                "box": cfg.box,
                "num_points": cfg.num_points,
                "fit_mode": cfg.fit_mode,
                "K": K,
                "gamma_threshold": thr,
                "gamma_calibrated": thr / 10.0,
                "formula_budget": budget,
            }
            print(f"{pipeline:13s} n={n:2d} threshold={thr:.3g} budget={budget:.3g} ({time.time() - start:.0f}s)", flush=True)
    with open(args.out, "w") as fh:
        json.dump(table, fh, indent=2)
        fh.write("\n")


if __name__ == "__main__":
    main()
