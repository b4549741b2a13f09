"""Command-line front end.

    permlab permanent MATRIX_FILE
    permlab reduce --config job.json --seeds 0:100 --out runs/
    permlab experiment moments --config moments.json --seed 0 --out runs/

Outputs are named ``<command>-<seed>.<ext>`` and are byte-identical across
reruns; wall-clock data goes to a ``.manifest.json`` sidecar. The exit code is
0 only when every configured assertion passes.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import inspect
import json
import os
import statistics
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__, matcore, mclab, reduction

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_EXISTS = 0, 1, 2, 3


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_USAGE):
        super().__init__(message)
        self.code = code


@dataclass
class RunManifest:
    command: str
    config_path: str
    seed: int
    output_dir: str
    format: str


# ----------------------------------------------------------------------------
# input parsing


def read_matrix(path: str | Path) -> np.ndarray:
    """Parse a matrix file: JSON ``{"matrix": [[...]]}`` or text (n, then n rows)."""
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise CliError(f"{path}: line {exc.lineno}: invalid JSON ({exc.msg})") from None
        if "matrix" not in doc:
            raise CliError(f"{path}: matrix: required")
        try:
            return matcore.as_matrix(doc["matrix"])
        except ValueError as exc:
            raise CliError(f"{path}: matrix: {exc}") from None

    lines = [(i + 1, ln.split()) for i, ln in enumerate(text.splitlines()) if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise CliError(f"{path}: line 1: empty matrix file")
    lineno, head = lines[0]
    if len(head) != 1 or not head[0].isdigit() or int(head[0]) < 1:
        raise CliError(f"{path}: line {lineno}: expected a positive dimension n, got {' '.join(head)!r}")
    n = int(head[0])
    rows = lines[1:]
    if len(rows) != n:
        where = rows[-1][0] + 1 if rows else lineno + 1
        raise CliError(f"{path}: line {where}: expected {n} rows, found {len(rows)}")
    M = np.empty((n, n))
    for r, (lineno, parts) in enumerate(rows):
        if len(parts) != n:
            raise CliError(f"{path}: line {lineno}: expected {n} values, got {len(parts)}")
        try:
            M[r] = [float(p) for p in parts]
        except ValueError:
            raise CliError(f"{path}: line {lineno}: non-numeric entry") from None
    if not np.all(np.isfinite(M)):
        raise CliError(f"{path}: non-finite entries")
    return M


def read_json(path: str | Path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise CliError(f"{path}: no such file") from None
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: line {exc.lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(doc, dict):
        raise CliError(f"{path}: expected a JSON object")
    return doc


def parse_seeds(spec: str) -> list[int]:
    """``"7"`` -> [7]; ``"0:10"`` -> [0, ..., 9]."""
    try:
        if ":" in spec:
            lo, hi = spec.split(":", 1)
            seeds = list(range(int(lo), int(hi)))
        else:
            seeds = [int(spec)]
    except ValueError:
        raise CliError(f"--seeds: expected N or A:B, got {spec!r}") from None
    if not seeds or min(seeds) < 0:
        raise CliError(f"--seeds: need a non-empty range of non-negative seeds, got {spec!r}")
    return seeds


def resolve_threads(flag: int) -> int:
    env = os.environ.get("PERMLAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise CliError(f"PERMLAB_THREADS: expected an integer, got {env!r}") from None
    return max(1, flag)


# ----------------------------------------------------------------------------
# output


class Writer:
    def __init__(self, out: str, fmt: str, force: bool):
        self.dir = Path(out)
        self.fmt = fmt
        self.force = force

    def targets(self, stem: str) -> list[Path]:
        exts = {"json": ["json"], "csv": ["csv"], "both": ["json", "csv"]}[self.fmt]
        return [self.dir / f"{stem}.{e}" for e in exts]

    def check(self, stems: list[str]) -> None:
        if self.force:
            return
        for stem in stems:
            for p in self.targets(stem):
                if p.exists():
                    raise CliError(f"{p} exists; pass --force to overwrite", EXIT_EXISTS)

    def write(self, stem: str, json_text: str, csv_text: str) -> None:
        self.dir.mkdir(parents=True, exist_ok=True)
        for p in self.targets(stem):
            p.write_text(json_text if p.suffix == ".json" else csv_text)

    def sidecar(self, stem: str, manifest: RunManifest, **extra) -> None:
        self.dir.mkdir(parents=True, exist_ok=True)
        doc = dict(asdict(manifest), version=__version__, **extra)
        doc["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
        (self.dir / f"{stem}.manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _dumps(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, default=_default) + "\n"


def _default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def _csv(rows: list[dict]) -> str:
    import csv
    import io

    buf = io.StringIO()
    cols = list(rows[0]) if rows else []
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


# ----------------------------------------------------------------------------
# commands


def cmd_permanent(args) -> int:
    M = read_matrix(args.matrix_file)
    n = M.shape[0]
    algo = args.algorithm
    if algo == "auto":
        algo = "ryser"
    fn = matcore.permanent_naive if algo == "naive" else matcore.permanent_ryser
    start = time.perf_counter()
    try:
        value = fn(M)
    except matcore.DimensionError as exc:
        raise CliError(str(exc)) from None
    elapsed = time.perf_counter() - start
    print(repr(float(value)))
    print(f"per^2: {value * value!r}")
    print(f"algorithm: {algo} (n={n})")
    print(f"time: {elapsed * 1e3:.3f} ms")
    return EXIT_OK


def load_reduction_job(doc: dict):
    """Split a job document into (Wp, ReductionConfig, min_success_rate)."""
    doc = dict(doc)
    if "Wp" not in doc:
        raise CliError("Wp: required")
    Wp = doc.pop("Wp")
    min_rate = doc.pop("min_success_rate", None)
    try:
        cfg = reduction.ReductionConfig.from_dict(doc)
        W = matcore.as_matrix(Wp, name="Wp")
    except ValueError as exc:
        raise CliError(str(exc)) from None
    return W, cfg, min_rate


def cmd_reduce(args) -> int:
    W, cfg, min_rate = load_reduction_job(read_json(args.config))
    seeds = parse_seeds(args.seeds) if args.seeds else [args.seed]
    threads = resolve_threads(args.threads)
    writer = Writer(args.out, args.format, args.force)
    stems = [f"reduce-{s}" for s in seeds]
    writer.check(stems + ["reduce-summary"])

    start = time.time()
    try:
        outcomes = reduction.run_seeds(W, cfg, seeds, threads)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    for stem, o in zip(stems, outcomes):
        d = o.to_dict()
        writer.write(stem, _dumps(d), _csv([d]))

    rate = sum(o.success for o in outcomes) / len(outcomes)
    errs = [o.relative_error for o in outcomes]
    summary = {
        "pipeline": cfg.pipeline,
        "seeds": [seeds[0], seeds[-1] + 1],
        "runs": len(outcomes),
        "success_rate": rate,
        "median_relative_error": statistics.median(errs),
        "min_success_rate": min_rate,
        "pass": min_rate is None or rate >= min_rate,
    }
    writer.write("reduce-summary", _dumps(summary), _csv([summary]))
    manifest = RunManifest("reduce", str(args.config), seeds[0], str(args.out), args.format)
    writer.sidecar("reduce-summary", manifest, seeds=[seeds[0], seeds[-1] + 1], threads=threads, wall_seconds=time.time() - start)
    print(f"{cfg.pipeline}: {len(outcomes)} seeds, success rate {rate:.3f}, median relative error {summary['median_relative_error']:.3g}")
    if min_rate is not None:
        print(f"success rate {rate:.3f} vs required {min_rate:.3f}: {'PASS' if summary['pass'] else 'FAIL'}")
    return EXIT_OK if summary["pass"] else EXIT_FAIL


def _experiment_kwargs(name: str, doc: dict, seed: int, threads: int) -> dict:
    fn = mclab.EXPERIMENTS[name]
    params = inspect.signature(fn).parameters
    kw = dict(doc)
    for key in kw:
        if key not in params:
            raise CliError(f"{key}: unknown field for experiment {name!r}")
    if "seed" in params:
        kw.setdefault("seed", seed)
    if "threads" in params:
        kw["threads"] = threads
    if name == "rare1":
        B = kw.get("B", "ones")
        if isinstance(B, str):
            if B != "ones" or "n" not in kw:
                raise CliError("B: expected a matrix or \"ones\"")
            kw["B"] = np.ones((kw["n"], kw["n"]))
        kw.setdefault("event_threshold", None)
    missing = [p.name for p in params.values() if p.default is inspect.Parameter.empty and p.name not in kw]
    if missing:
        raise CliError(f"{missing[0]}: required")
    return kw


def cmd_experiment(args) -> int:
    if args.name not in mclab.EXPERIMENTS:
        raise CliError(f"unknown experiment {args.name!r}; choose from {', '.join(mclab.EXPERIMENTS)}")
    doc = read_json(args.config) if args.config else {}
    threads = resolve_threads(args.threads)
    kw = _experiment_kwargs(args.name, doc, args.seed, threads)
    seed = int(kw.get("seed", args.seed))
    writer = Writer(args.out, args.format, args.force)
    stem = f"{args.name}-{seed}"
    writer.check([stem])

    start = time.time()
    try:
        report = mclab.EXPERIMENTS[args.name](**kw)
    except (ValueError, mclab.QuadratureError) as exc:
        raise CliError(str(exc)) from None
    writer.write(stem, report.to_json(), report.to_csv())
    manifest = RunManifest(args.name, str(args.config), seed, str(args.out), args.format)
    writer.sidecar(stem, manifest, threads=threads, wall_seconds=time.time() - start)
    print(report.table())
    return EXIT_OK if report.passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="permlab", description="Gaussian permanent reductions and Monte Carlo checks.")
    ap.add_argument("--version", action="version", version=f"permlab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("permanent", help="print the permanent of a matrix file")
    p.add_argument("matrix_file")
    p.add_argument("--algorithm", choices=["auto", "naive", "ryser"], default="auto")
    p.set_defaults(func=cmd_permanent)

    def common(q):
        q.add_argument("--config", help="JSON configuration file")
        q.add_argument("--seed", type=int, default=0)
        q.add_argument("--out", default=".", help="output directory")
        q.add_argument("--format", choices=["json", "csv", "both"], default="both")
        q.add_argument("--force", action="store_true", help="overwrite existing outputs")
        q.add_argument("--threads", type=int, default=1, help="worker threads (PERMLAB_THREADS overrides)")

    r = sub.add_parser("reduce", help="run a reduction pipeline over a seed range")
    common(r)
    r.add_argument("--seeds", help="seed range A:B (half-open) or a single seed")
    r.set_defaults(func=cmd_reduce)

    e = sub.add_parser("experiment", help="run a Monte Carlo experiment")
    e.add_argument("name", help=f"one of: {', '.join(mclab.EXPERIMENTS)}")
    common(e)
    e.set_defaults(func=cmd_experiment)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "reduce" and not args.config:
        print("permlab: error: --config is required", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except CliError as exc:
        print(f"permlab: error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
