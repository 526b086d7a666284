"""Command-line front end.

::

    glaaseg synth   --phantom phantom1 --looks 2 --seed 7 --out data/
    glaaseg segment data/phantom1.pgm --solver model3 --gt data/phantom1_gt.pgm --out run/
    glaaseg bench   data/ --solver model1 --solver model3 --repeats 5 --out bench.csv

Exit codes: 0 success, 2 usage or input error, 3 numerical abort.
"""

import argparse
import csv
import logging
import platform
import statistics
import sys
from dataclasses import fields
from pathlib import Path

import numba
import numpy as np
import scipy

from . import __version__
from .grid import ParameterError, ShapeMismatchError
from .imageio import (
    ImageFormatError,
    mask_to_uint8,
    overlay,
    read_gray,
    read_mask,
    to_uint8,
    write_pgm,
)
from .metrics import PP_NORMALIZATION, evaluate
from .solvers import (
    DEFAULT_PRESET,
    PRESETS,
    SOLVERS,
    SolverError,
    preset_config,
    segment,
)
from .speckle import (
    PHANTOMS,
    SpeckleSpec,
    apply_speckle,
    format_phantom_spec,
    load_phantom_spec,
    make_phantom,
    sample_speckle,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3

IMAGE_SUFFIXES = (".pgm", ".png")
# Corpus files with these stem suffixes are companions, not inputs.
GT_SUFFIX = "_gt"
CLEAN_SUFFIX = "_clean"

# (flag, SolverConfig field, type)
CONFIG_FLAGS = (
    ("--mu", "mu", float),
    ("--lambda", "lam", float),
    ("--alpha", "alpha", float),
    ("--t", "t", float),
    ("--gamma", "gamma", float),
    ("--eps", "epsilon", float),
    ("--sigma", "sigma", float),
    ("--omega", "omega", float),
    ("--dt", "dt", float),
    ("--iters", "max_iters", int),
    ("--tol", "tol", float),
)

log = logging.getLogger("glaaseg")


class UsageError(Exception):
    pass


class _StderrHandler(logging.Handler):
    # Resolves sys.stderr at emit time so redirected streams are honoured.
    def emit(self, record):
        print(self.format(record), file=sys.stderr)


# --- helpers ---------------------------------------------------------------


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_manifest(path, command, entries):
    """``key = value`` manifest with the software versions needed to rerun."""
    lines = [
        f"command = {command}",
        f"glaaseg_version = {__version__}",
        f"python_version = {platform.python_version()}",
        f"numpy_version = {np.__version__}",
        f"scipy_version = {scipy.__version__}",
        f"numba_version = {numba.__version__}",
    ]
    lines += [f"{k} = {_fmt(v)}" for k, v in entries]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def config_entries(config):
    return [(f"config.{f.name}", getattr(config, f.name)) for f in fields(config)]


def resolve_solver(args):
    if args.solver:
        return args.solver
    if args.preset and PRESETS[args.preset][0]:
        return PRESETS[args.preset][0]
    return "model3"


def build_config(args, solver):
    """Preset (explicit or the solver's default) overlaid with any config flags."""
    preset = args.preset or DEFAULT_PRESET[solver]
    overrides = {}
    for _, dest, _ in CONFIG_FLAGS:
        value = getattr(args, dest)
        if value is not None:
            overrides[dest] = value
    if args.edge_shrink:
        overrides["edge_shrink"] = True
    return preset, preset_config(preset, **overrides)


def write_trace(path, result):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "objective", "c1", "c2"])
        for k, (obj, st) in enumerate(zip(result.objective_trace, result.stats_trace)):
            c1 = "" if st is None else f"{st.c1:.17g}"
            c2 = "" if st is None else f"{st.c2:.17g}"
            w.writerow([k, f"{obj:.17g}", c1, c2])


def write_report(path, image, result, report):
    lines = [
        "# glaaseg evaluation report",
        f"# pp normalization: {PP_NORMALIZATION}",
        f"image = {image}",
        f"solver = {result.solver}",
        f"iterations = {report.iterations}",
        f"converged = {_fmt(result.converged)}",
        f"wall_time_s = {report.wall_time:.6f}",
        f"pp = {report.pp:.6f}",
    ]
    if report.dsc is not None:
        lines.append(f"dsc = {report.dsc:.6f}")
    lines.append(f"degenerate = {_fmt(result.degenerate)}")
    lines += [f"warning = {w}" for w in result.warnings]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _load_gt(path, shape):
    gt = read_mask(path)
    if gt.shape != shape:
        raise ShapeMismatchError(f"ground truth {gt.shape} does not match image {shape}")
    return gt


# --- commands --------------------------------------------------------------


def cmd_synth(args):
    if args.spec:
        spec = load_phantom_spec(args.spec)
    else:
        spec = PHANTOMS[args.phantom]
    speckle = SpeckleSpec(args.looks, args.seed)
    clean, gt = make_phantom(spec)
    if clean.max() > 255:
        raise ParameterError("phantom intensities must fit 8-bit gray levels (<= 255)")
    noisy = apply_speckle(clean, sample_speckle(spec.width, spec.height, speckle))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "clean": out / f"{spec.name}{CLEAN_SUFFIX}.pgm",
        "noisy": out / f"{spec.name}.pgm",
        "gt": out / f"{spec.name}{GT_SUFFIX}.pgm",
    }
    write_pgm(paths["clean"], to_uint8(clean))
    write_pgm(paths["noisy"], to_uint8(noisy))
    write_pgm(paths["gt"], mask_to_uint8(gt))
    saturated = float(np.mean(noisy > 255.5))
    entries = [("phantom.name", spec.name), ("looks", args.looks), ("seed", args.seed),
               ("saturated_fraction", round(saturated, 6))]
    entries += [(f"phantom.{line.split(' = ')[0]}", line.split(" = ", 1)[1])
                for line in format_phantom_spec(spec).splitlines() if line.split(" = ")[0] != "name"]
    entries += [(f"output.{k}", p.name) for k, p in paths.items()]
    write_manifest(out / f"{spec.name}_manifest.txt", "synth", entries)
    print(f"wrote {', '.join(str(p) for p in paths.values())}")
    if saturated > 0:
        print(f"note: {saturated:.1%} of noisy pixels saturated at 255")
    return EXIT_OK


def cmd_segment(args):
    solver = resolve_solver(args)
    preset, config = build_config(args, solver)
    f = read_gray(args.image)
    gt = _load_gt(args.gt, f.shape) if args.gt else None
    result = segment(f, solver, config)
    report = evaluate(result, f, gt)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "mask": out / "mask.pgm",
        "overlay": out / "overlay.pgm",
        "trace": out / "trace.csv",
        "report": out / "report.txt",
    }
    write_pgm(paths["mask"], mask_to_uint8(result.mask))
    write_pgm(paths["overlay"], overlay(f, result.mask))
    write_trace(paths["trace"], result)
    write_report(paths["report"], args.image, result, report)
    entries = [("input.image", args.image), ("input.gt", args.gt or ""), ("solver", solver),
               ("preset", preset), ("seed", args.seed if args.seed is not None else "")]
    entries += config_entries(config)
    entries += [(f"output.{k}", p.name) for k, p in paths.items()]
    write_manifest(out / "manifest.txt", "segment", entries)
    summary = f"{solver}: {report.iterations} iterations, {report.wall_time:.4f} s, pp={report.pp:.4f}"
    if report.dsc is not None:
        summary += f", dsc={report.dsc:.4f}"
    print(summary)
    return EXIT_OK


def corpus_pairs(corpus):
    """Sorted ``(image, gt or None)`` pairs; ``X_gt.*`` is the ground truth for ``X.*``."""
    corpus = Path(corpus)
    if not corpus.is_dir():
        raise UsageError(f"corpus directory not found: {corpus}")
    files = sorted(p for p in corpus.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    pairs = []
    for p in files:
        if p.stem.endswith((GT_SUFFIX, CLEAN_SUFFIX)):
            continue
        gts = [corpus / f"{p.stem}{GT_SUFFIX}{s}" for s in IMAGE_SUFFIXES]
        gt = next((g for g in gts if g.exists()), None)
        pairs.append((p, gt))
    if not pairs:
        raise UsageError(f"no images in corpus {corpus}")
    return pairs


def cmd_bench(args):
    if args.repeats < 1:
        raise UsageError("--repeats must be >= 1")
    solvers = sorted(set(args.solver or SOLVERS))
    pairs = corpus_pairs(args.corpus)
    rows = []
    for image, gt_path in pairs:
        f = read_gray(image)
        gt = _load_gt(gt_path, f.shape) if gt_path else None
        for solver in solvers:
            _, config = build_config(args, solver)
            times = []
            for _ in range(args.repeats):
                result = segment(f, solver, config)
                times.append(result.wall_time)
            report = evaluate(result, f, gt)
            rows.append([
                image.name, solver, result.iterations, f"{statistics.median(times):.6f}",
                "" if report.dsc is None else f"{report.dsc:.6f}", f"{report.pp:.6f}",
            ])
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    header = ["image", "solver", "iterations", "wall_time_median_s", "dsc", "pp"]
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    entries = [("input.corpus", args.corpus), ("solvers", ",".join(solvers)),
               ("repeats", args.repeats), ("preset", args.preset or "per-solver default"),
               ("output.csv", out.name)]
    write_manifest(out.with_name(f"{out.stem}_manifest.txt"), "bench", entries)
    for row in [header] + rows:
        print("  ".join(f"{str(c):>18}" for c in row))
    return EXIT_OK


# --- parser ----------------------------------------------------------------


def _config_args(p):
    p.add_argument("--preset", choices=sorted(PRESETS),
                   help="named parameter set (default: the solver's default set)")
    for flag, dest, typ in CONFIG_FLAGS:
        p.add_argument(flag, dest=dest, type=typ, default=None)
    p.add_argument("--edge-shrink", action="store_true",
                   help="model4: per-pixel dual threshold g/lambda")


def build_parser():
    parser = argparse.ArgumentParser(prog="glaaseg", description="Speckle-robust two-phase segmentation.")
    parser.add_argument("--version", action="version", version=f"glaaseg {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a speckled phantom, its clean image and ground truth")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--spec", help="phantom spec file (key = value)")
    src.add_argument("--phantom", choices=sorted(PHANTOMS), default="phantom1")
    p.add_argument("--looks", "-L", type=int, default=2, help="equivalent number of looks")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("segment", help="segment one image")
    p.add_argument("image")
    p.add_argument("--solver", choices=SOLVERS)
    p.add_argument("--gt", help="ground-truth mask (nonzero = foreground)")
    p.add_argument("--seed", type=int, default=None, help="recorded in the manifest only")
    p.add_argument("--out", required=True, help="output directory")
    _config_args(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("bench", help="time solvers over a corpus directory")
    p.add_argument("corpus", help="directory of images; X_gt.pgm is the ground truth for X.pgm")
    p.add_argument("--solver", choices=SOLVERS, action="append",
                   help="repeatable; default all four")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--seed", type=int, default=None, help="recorded in the manifest only")
    p.add_argument("--out", required=True, help="output CSV path")
    _config_args(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    handler = _StderrHandler()
    handler.setFormatter(logging.Formatter("warning: %(message)s"))
    handler.setLevel(logging.WARNING)
    log.addHandler(handler)
    try:
        return args.func(args)
    except SolverError as exc:
        print(f"error: numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ParameterError, ShapeMismatchError, ImageFormatError, UsageError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    finally:
        log.removeHandler(handler)


if __name__ == "__main__":
    sys.exit(main())
