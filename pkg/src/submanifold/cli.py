"""Command-line harness: load an embedding, sample chart points, verify.

    submanifold verify catalog:unit-sphere --points 100 --seed 0 --tol 1e-7
    submanifold verify my.emb --corrupt b:scale:1.001 --format json
    submanifold catalog list
    submanifold catalog show schwarzschild-6d

Exit status: 0 pass, 1 fail (or too many degenerate points), 2 bad input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .catalog import catalog_entries, catalog_names, get_entry
from .dsl import EmbeddingMap, parse_embedding
from .errors import (
    ConfigError, DegenerateMetric, DslError, EvalError, InputError, NullNormalDirection,
)
from .geometry import Corruption, analyze_point

__all__ = ["RunConfig", "ResidualReport", "run_verification", "emit_report", "main",
           "resolve_input", "sample_points", "DEGENERATE_FRACTION"]

RESIDUALS = ("gauss", "codazzi", "ricci", "reconstruction")
DEGENERATE_FRACTION = 0.2
JOBS_ENV = "SUBMANIFOLD_JOBS"
EXIT_PASS, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


@dataclass(frozen=True)
class RunConfig:
    input: str
    points: int = 100
    seed: int = 0
    tol: float = 1e-7
    corruption: Corruption = None
    format: str = "text"
    jobs: int = 1

    def __post_init__(self):
        if not isinstance(self.points, int) or self.points < 1:
            raise ConfigError(f"point count must be >= 1, got {self.points!r}")
        if not (self.tol > 0 and math.isfinite(self.tol)):
            raise ConfigError(f"tolerance must be a positive finite number, got {self.tol!r}")
        if self.format not in ("text", "json", "csv"):
            raise ConfigError(f"unknown format {self.format!r}")
        if not isinstance(self.jobs, int) or self.jobs < 0:
            raise ConfigError(f"jobs must be >= 0, got {self.jobs!r}")

    def echo(self) -> dict:
        # jobs and format do not affect results, so they are left out and the
        # report body stays identical across them
        return {
            "input": self.input,
            "points": self.points,
            "seed": self.seed,
            "tol": self.tol,
            "corrupt": None if self.corruption is None else str(self.corruption),
        }


@dataclass
class ResidualReport:
    embedding: str
    variables: tuple
    n: int
    D: int
    signature: tuple
    points: list                # dicts: x, gauss, codazzi, ricci, reconstruction, scale, degenerate
    aggregate: dict
    verdict: str
    skipped: int
    config: dict
    version: str = __version__
    warnings: list = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return EXIT_PASS if self.verdict == "pass" else EXIT_FAIL

    def as_json(self) -> dict:
        return {
            "embedding": self.embedding,
            "n": self.n,
            "D": self.D,
            "signature": list(self.signature),
            "points": self.points,
            "aggregate": self.aggregate,
            "verdict": self.verdict,
            "skipped": self.skipped,
            "config": self.config,
            "version": self.version,
        }


def resolve_input(target: str) -> EmbeddingMap:
    """``catalog:NAME`` or a path to a ``.emb`` file."""
    if target.startswith("catalog:"):
        name = target[len("catalog:"):]
        try:
            return get_entry(name).embedding
        except KeyError:
            raise InputError(f"no catalog entry named {name!r} "
                             f"(available: {', '.join(catalog_names())})") from None
    try:
        with open(target, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {target}: {exc.strerror or exc}") from None
    try:
        return parse_embedding(data)
    except DslError as exc:
        raise InputError(f"{target}:{exc}") from None


def sample_points(emb: EmbeddingMap, count: int, seed: int) -> np.ndarray:
    """``count`` points uniform in the chart box, reproducible from ``seed``."""
    rng = np.random.default_rng(seed)
    lo = np.array([a for a, _ in emb.domain])
    hi = np.array([b for _, b in emb.domain])
    return rng.uniform(lo, hi, size=(count, emb.n))


def _evaluate(task):
    emb, x, corruption = task
    record = {"x": [float(v) for v in x]}
    try:
        res = analyze_point(emb, x, corruption=corruption).residuals
        values = dict(res.as_dict(), scale=res.scale)
        if not all(math.isfinite(v) for v in values.values()):
            raise EvalError("non-finite tensor values")
    except (DegenerateMetric, NullNormalDirection, EvalError):
        record.update({k: None for k in RESIDUALS + ("scale",)}, degenerate=True)
        return record
    record.update(values, degenerate=False)
    return record


def _resolve_jobs(jobs: int) -> int:
    return (os.cpu_count() or 1) if jobs == 0 else jobs


def run_verification(config: RunConfig, emb: EmbeddingMap = None) -> ResidualReport:
    if emb is None:
        emb = resolve_input(config.input)
    xs = sample_points(emb, config.points, config.seed)
    tasks = [(emb, x, config.corruption) for x in xs]
    jobs = min(_resolve_jobs(config.jobs), len(tasks))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_evaluate, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        records = [_evaluate(t) for t in tasks]

    good = [r for r in records if not r["degenerate"]]
    skipped = len(records) - len(good)
    aggregate = {"max": {}, "mean": {}}
    for key in RESIDUALS:
        vals = [r[key] for r in good]
        aggregate["max"][key] = max(vals) if vals else None
        aggregate["mean"][key] = math.fsum(vals) / len(vals) if vals else None

    failed = any(r[key] > config.tol * max(r["scale"], 1.0) for r in good for key in RESIDUALS)
    if failed:
        verdict = "fail"
    elif skipped > DEGENERATE_FRACTION * len(records) or not good:
        verdict = "degenerate"
    else:
        verdict = "pass"
    warnings = []
    if skipped:
        warnings.append(f"{skipped} of {len(records)} points skipped as degenerate")
    return ResidualReport(emb.name, emb.variables, emb.n, emb.D, emb.signature.signs, records,
                          aggregate, verdict, skipped, config.echo(), warnings=warnings)


def _g17(v) -> str:
    return "" if v is None else "%.17g" % v


def emit_report(report: ResidualReport, fmt: str = "text") -> str:
    if fmt == "json":
        return json.dumps(report.as_json(), indent=2) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([f"x_{v}" for v in report.variables]
                        + list(RESIDUALS) + ["scale", "degenerate"])
        for r in report.points:
            writer.writerow([_g17(v) for v in r["x"]]
                            + [_g17(r[k]) for k in RESIDUALS + ("scale",)]
                            + ["true" if r["degenerate"] else "false"])
        return buf.getvalue()
    if fmt != "text":
        raise ConfigError(f"unknown format {fmt!r}")

    sig = ",".join("+" if s > 0 else "-" for s in report.signature)
    cfg = report.config
    lines = [
        f"embedding   {report.embedding}  (n={report.n}, D={report.D}, signature ({sig}))",
        f"points      {len(report.points)} sampled, {report.skipped} skipped, "
        f"seed {cfg['seed']}, tol {cfg['tol']!r}",
    ]
    if cfg.get("corrupt"):
        lines.append(f"corruption  {cfg['corrupt']}")
    lines.append("")
    lines.append(f"{'residual':<16}{'max':>24}{'mean':>24}")
    for key in RESIDUALS:
        mx, mean = report.aggregate["max"][key], report.aggregate["mean"][key]
        lines.append(f"{key:<16}{_g17(mx) or '-':>24}{_g17(mean) or '-':>24}")
    lines.append("")
    lines.append(report.verdict.upper())
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# argument parsing

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="submanifold",
        description="Check Gauss, Codazzi and Ricci equations for explicit embeddings "
                    "into flat pseudo-Euclidean space.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="sample points and evaluate all residuals")
    v.add_argument("input", help="path to a .emb file, or catalog:NAME")
    v.add_argument("--points", type=int, default=100, help="number of sample points (default 100)")
    v.add_argument("--seed", type=int, default=0, help="PRNG seed (default 0)")
    v.add_argument("--tol", type=float, default=1e-7,
                   help="relative tolerance: residual <= tol*max(scale,1) (default 1e-7)")
    v.add_argument("--corrupt", metavar="TENSOR:MODE:MAG",
                   help="damage b or A before checking, e.g. b:scale:1.001 or A:add:1e-3")
    v.add_argument("--format", choices=("text", "json", "csv"), default="text")
    v.add_argument("--jobs", type=int, default=None,
                   help=f"worker processes, 0 = one per CPU (default ${JOBS_ENV} or 1)")

    c = sub.add_parser("catalog", help="list or print the built-in embeddings")
    csub = c.add_subparsers(dest="action", required=True)
    csub.add_parser("list", help="list catalog entries")
    show = csub.add_parser("show", help="print the DSL source of an entry")
    show.add_argument("name")
    return parser


def _jobs_from(args_jobs) -> int:
    if args_jobs is not None:
        return args_jobs
    env = os.environ.get(JOBS_ENV, "").strip()
    if not env:
        return 1
    try:
        return int(env)
    except ValueError:
        raise ConfigError(f"{JOBS_ENV} must be an integer, got {env!r}") from None


def _cmd_verify(args, out) -> int:
    corruption = None
    if args.corrupt:
        try:
            corruption = Corruption.parse(args.corrupt)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    config = RunConfig(args.input, args.points, args.seed, args.tol, corruption,
                       args.format, _jobs_from(args.jobs))
    report = run_verification(config)
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    out.write(emit_report(report, config.format))
    return report.exit_code


def _cmd_catalog(args, out) -> int:
    if args.action == "list":
        for e in catalog_entries():
            sig = ",".join("+" if s > 0 else "-" for s in e.signature)
            out.write(f"{e.name:<18} n={e.n} D={e.D} ({sig})  {e.description}\n")
        return EXIT_PASS
    try:
        entry = get_entry(args.name)
    except KeyError:
        raise InputError(f"no catalog entry named {args.name!r}") from None
    out.write(entry.source)
    return EXIT_PASS


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    out = sys.stdout
    try:
        if args.command == "verify":
            return _cmd_verify(args, out)
        return _cmd_catalog(args, out)
    except (InputError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
