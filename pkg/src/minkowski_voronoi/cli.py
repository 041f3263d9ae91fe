"""Command-line front end.

    mvt digitize --shape disk.json --a 0.05 --out sample.json [--pbm img.pbm]
    mvt estimate --shape disk.json --a 0.025 --radii 0.15,0.25,0.4 --out report.json
    mvt converge --shape disk.json --a 0.1,0.05,0.025,0.0125 --radii ... --out conv.csv
    mvt cell-dump --sample sample.json --site 0 --R 0.3 --out cell.json

Exit codes: 0 ok, 2 usage or parse error, 3 precondition, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
import warnings
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .cells import VoronoiCells, moments_exact_2d
from .errors import NumericalError, PreconditionError
from .estimators import EstimatorConfig, auto_radii, estimate_sample
from .measures import DEFAULT_MC_N, RegionOfInterest
from .shapes import (
    Lattice,
    PointSample,
    digitize,
    ground_truth,
    hausdorff_to_sample,
    shape_from_json,
    write_pbm,
)
from .symtensor import max_abs_coeff, tensor_norm

SCHEMA_VERSION = 1

EXIT_OK, EXIT_USAGE, EXIT_PRECONDITION, EXIT_NUMERICAL = 0, 2, 3, 4


class UsageError(Exception):
    """Bad arguments or unparsable input files."""


def _floats(text: str) -> list[float]:
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _load_json(text_or_path: str, what: str):
    p = Path(text_or_path)
    try:
        text = p.read_text(encoding="utf-8") if not text_or_path.lstrip().startswith("{") and p.exists() else text_or_path
    except OSError as exc:
        raise UsageError(f"cannot read {what} {text_or_path}: {exc}")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{what} is not valid JSON ({exc.msg} at line {exc.lineno}, column {exc.colno})")


def _load_shape(path: str):
    if not Path(path).exists():
        raise UsageError(f"shape file {path} not found")
    obj = _load_json(path, "shape file")
    try:
        return shape_from_json(obj)
    except (PreconditionError, TypeError, ValueError) as exc:
        raise UsageError(f"malformed shape in {path}: {exc}")


def _load_sample(path: str) -> PointSample:
    if not Path(path).exists():
        raise UsageError(f"sample file {path} not found")
    obj = _load_json(path, "sample file")
    try:
        return PointSample.from_json(obj)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"malformed sample in {path}: {exc}")


def _dump(obj, path: Optional[str]) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _single_a(args) -> float:
    if args.a is None:
        raise UsageError("--a is required with --shape")
    if len(args.a) != 1:
        raise UsageError("this command takes a single --a value")
    return args.a[0]


def _sample_from_args(args):
    """Returns (sample, shape or None)."""
    if args.sample is not None:
        return _load_sample(args.sample), None
    shape = _load_shape(args.shape)
    a = _single_a(args)
    return digitize(shape, Lattice(a, (0.0,) * shape.dim, shape.dim)), shape


def _mode(args) -> str:
    picked = [m for m in ("refined", "shell", "reduced") if getattr(args, m)]
    if len(picked) > 1:
        raise UsageError("--refined, --shell and --reduced are mutually exclusive")
    return picked[0] if picked else "standard"


def _radii(args, d: int, mode: str, shape) -> list[float]:
    if args.radii is not None and args.auto_radii:
        raise UsageError("give either --radii or --auto-radii")
    if args.radii is not None:
        return list(args.radii)
    if not args.auto_radii:
        raise UsageError("one of --radii or --auto-radii is required")
    beta = args.reach if args.reach is not None else math.inf
    if shape is not None:
        beta = min(beta, shape.reach)
    if not math.isfinite(beta):
        raise PreconditionError("--auto-radii needs a finite reach bound; pass --reach")
    n = d + 1 if mode in ("standard", "refined") else d
    return auto_radii(beta, d, n)


def _config(args, d: int, shape) -> EstimatorConfig:
    mode = _mode(args)
    region = RegionOfInterest.from_json(_load_json(args.region, "region")) if args.region else RegionOfInterest()
    return EstimatorConfig(
        r=args.r,
        s=args.s,
        radii=tuple(_radii(args, d, mode, shape)),
        reach=args.reach if args.reach is not None else math.inf,
        region=region,
        method=args.method,
        mode=mode,
        mc_n=args.mc_n,
        seed=args.seed,
    )


def _echo(args) -> dict:
    # thread count and output paths do not change results; they go to the runtime sidecar
    skip = {"func", "threads", "out", "pbm"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _write_runtime(out: Optional[str], seconds: float, threads: int) -> None:
    if out is None:
        return
    info = {"schema_version": SCHEMA_VERSION, "runtime_s": seconds, "threads": threads}
    Path(str(out) + ".runtime.json").write_text(json.dumps(info, indent=2) + "\n", encoding="utf-8")


# ----------------------------------------------------------------------
# subcommands


def cmd_digitize(args) -> int:
    if args.shape is None:
        raise UsageError("digitize needs --shape")
    shape = _load_shape(args.shape)
    a = _single_a(args)
    sample = digitize(shape, Lattice(a, (0.0,) * shape.dim, shape.dim))
    obj = {"schema_version": SCHEMA_VERSION, "shape": shape.to_json(), **sample.to_json()}
    _dump(obj, args.out)
    if args.pbm:
        write_pbm(sample, args.pbm)
    return EXIT_OK


def _estimate_report(args, sample: PointSample, shape, config: EstimatorConfig) -> dict:
    est, measures, stats = estimate_sample(sample, config, threads=args.threads)
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "estimate",
        "config": _echo(args),
        "sample": {
            "n_points": len(sample),
            "d": sample.dim,
            "a": sample.lattice.spacing if sample.lattice else None,
        },
        "estimate": est.to_json(),
        "measures": [m.to_json() for m in measures],
        "cell_stats": stats.to_json(),
    }
    if shape is not None:
        report["shape"] = shape.to_json()
    return report


def cmd_estimate(args) -> int:
    if (args.shape is None) == (args.sample is None):
        raise UsageError("estimate needs exactly one of --shape or --sample")
    t0 = time.perf_counter()
    sample, shape = _sample_from_args(args)
    config = _config(args, sample.dim, shape)
    report = _estimate_report(args, sample, shape, config)
    _dump(report, args.out)
    _write_runtime(args.out, time.perf_counter() - t0, args.threads)
    return EXIT_OK


def _slope(a: Sequence[float], err: Sequence[float]) -> Optional[float]:
    if any(e is None or not e > 0 for e in err):
        return None
    return float(np.polyfit(np.log(a), np.log(err), 1)[0])


def cmd_converge(args) -> int:
    if args.shape is None:
        raise UsageError("converge needs --shape")
    if args.a is None or len(args.a) < 3:
        raise PreconditionError("a convergence sweep needs at least 3 resolutions for a slope")
    shape = _load_shape(args.shape)
    d = shape.dim
    config = _config(args, d, shape)
    ks = list(range(d)) if config.mode in ("shell",) else list(range(d + 1))
    truth = {}
    for k in ks:
        try:
            truth[k] = ground_truth(shape, k, config.r, config.s)
        except PreconditionError:
            truth = {}
            break
    rows = []
    for a in args.a:
        t0 = time.perf_counter()
        sample = digitize(shape, Lattice(a, (0.0,) * d, d))
        est, _, _ = estimate_sample(sample, config, threads=args.threads)
        dh = hausdorff_to_sample(shape, sample, a / 4)
        row = {"a": a, "n_points": len(sample), "hausdorff": dh, "hausdorff_over_a": dh / a}
        for k in ks:
            if truth:
                diff = est[k] - truth[k]
                row[f"err_norm_k{k}"] = tensor_norm(diff).value
                row[f"err_max_k{k}"] = max_abs_coeff(diff)
            else:
                row[f"err_norm_k{k}"] = None
                row[f"err_max_k{k}"] = None
        row["runtime_s"] = time.perf_counter() - t0
        rows.append(row)

    fields = list(rows[0])
    buf = io.StringIO()
    buf.write(f"# schema_version={SCHEMA_VERSION}\n")
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: ("" if v is None else repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    norm_kind = tensor_norm(truth[ks[0]]).method if truth else None
    summary = {
        "schema_version": SCHEMA_VERSION,
        "command": "converge",
        "config": _echo(args),
        "norm": norm_kind,
        "slopes": {
            str(k): _slope(args.a, [row[f"err_norm_k{k}"] for row in rows]) for k in ks
        } if truth else None,
        "hausdorff_over_a": [row["hausdorff_over_a"] for row in rows],
    }
    if args.out is None:
        sys.stdout.write(buf.getvalue())
        _dump(summary, None)
    else:
        Path(args.out).write_text(buf.getvalue(), encoding="utf-8")
        _dump(summary, str(args.out) + ".summary.json")
    return EXIT_OK


def cmd_cell_dump(args) -> int:
    if (args.shape is None) == (args.sample is None):
        raise UsageError("cell-dump needs exactly one of --shape or --sample")
    sample, _ = _sample_from_args(args)
    if not 0 <= args.site < len(sample):
        raise PreconditionError(f"site index {args.site} out of range (sample has {len(sample)} points)")
    if not args.R > 0:
        raise PreconditionError("--R must be positive")
    hint = sample.lattice.spacing if sample.lattice else None
    cells = VoronoiCells(sample.points, hint)
    cell = cells.cell(args.site, args.R)
    obj = {"schema_version": SCHEMA_VERSION, "command": "cell-dump", "cell": cell.to_json()}
    if sample.dim == 2:
        table = moments_exact_2d(cell, args.max_degree, args.max_degree)
        obj["moments"] = {str(s): table.tensor(s).to_json() for s in range(args.max_degree + 1)}
    _dump(obj, args.out)
    return EXIT_OK


# ----------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mvt", description="Minkowski tensors from Voronoi tensor measures.")
    sub = p.add_subparsers(dest="command", required=True)

    def inputs(sp):
        sp.add_argument("--shape", metavar="FILE", help="shape JSON")
        sp.add_argument("--sample", metavar="FILE", help="point sample JSON")
        sp.add_argument("--a", type=_floats, metavar="LIST", help="lattice spacing(s), comma separated")
        sp.add_argument("--out", metavar="PATH", help="output file (stdout if omitted)")

    def estimation(sp):
        sp.add_argument("--r", type=int, default=0)
        sp.add_argument("--s", type=int, default=0)
        sp.add_argument("--radii", type=_floats, metavar="LIST")
        sp.add_argument("--auto-radii", action="store_true", help="geometric radii in [0.3, 0.8] * reach")
        sp.add_argument("--reach", type=float, help="reach bound of the shape")
        sp.add_argument("--region", metavar="JSON", help="region of interest, inline JSON or file")
        sp.add_argument("--method", choices=("exact", "mc"), default="exact")
        sp.add_argument("--mc-n", type=int, default=DEFAULT_MC_N)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--refined", action="store_true", help="boundary-filtered measures")
        sp.add_argument("--shell", action="store_true", help="local estimator from shell measures")
        sp.add_argument("--reduced", action="store_true", help="volume-reduced system with one radius fewer")

    sp = sub.add_parser("digitize", help="digitize a shape on a cubic lattice")
    inputs(sp)
    sp.add_argument("--pbm", metavar="PATH", help="also write a P1 bitmap (planar only)")
    sp.set_defaults(func=cmd_digitize)

    sp = sub.add_parser("estimate", help="estimate Minkowski tensors")
    inputs(sp)
    estimation(sp)
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("converge", help="resolution sweep against the ground truth")
    inputs(sp)
    estimation(sp)
    sp.set_defaults(func=cmd_converge)

    sp = sub.add_parser("cell-dump", help="dump one restricted Voronoi cell")
    inputs(sp)
    sp.add_argument("--site", type=int, default=0, help="site index in the sorted sample")
    sp.add_argument("--R", type=float, required=True)
    sp.add_argument("--max-degree", type=int, default=2)
    sp.set_defaults(func=cmd_cell_dump)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            try:
                return args.func(args)
            finally:
                for w in caught:
                    print(f"warning: {w.message}", file=sys.stderr)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except PreconditionError as exc:
        print(f"precondition failed: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
