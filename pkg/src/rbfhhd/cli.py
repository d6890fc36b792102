"""Command-line front end.

Exit codes: 0 success, 1 numerical failure, 2 input or usage error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from . import io
from .analysis import add_noise, compute_metrics, gradient_stability_bound, rotor_stability_bound
from .centres import CentreSelection, select_centres
from .critical import find_critical_points
from .errors import IllConditionedError, RBFHHDError, SampleError, UndefinedDerivativeError
from .fields import REGISTRY, make_analytic_field
from .fit import FitConfig, fit_mixed, residual_report
from .grid import GridSpec, evaluate_on_grid, footprint
from .hhd import HHDConfig, decompose
from .kernels import FAMILIES, Kernel
from .model import SampleSet, ScalarPotentialModel, VectorPotentialModel
from .streamlines import StreamlineSpec, model_field, trace_streamlines

logger = logging.getLogger("rbfhhd")

EXIT_OK, EXIT_NUMERIC, EXIT_INPUT = 0, 1, 2

GLOBAL_DEFAULTS = {
    "kernel": "gaussian",
    "sigma": 1.0,
    "support": None,
    "epsilon": 1e-10,
    "seed": 0,
    "delta": 1.0,
    "dedupe": False,
    "normalize": False,
    "verbose": False,
}


class UsageError(RBFHHDError):
    pass


def _global_parser():
    # unset flags leave no attribute, so a subcommand's copy of a flag
    # cannot erase the value given before the subcommand
    p = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    g = p.add_argument_group("global options")
    g.add_argument("--kernel", help=f"kernel family ({', '.join(FAMILIES)})")
    g.add_argument("--sigma", type=float, help="shape parameter")
    g.add_argument("--support", type=float, help="support radius of the compact kernels")
    g.add_argument("--epsilon", type=float, help="ridge regularization (default 1e-10)")
    g.add_argument("--seed", type=int, help="seed for every random choice")
    g.add_argument("--delta", type=float, help="weight of the vector constraints")
    g.add_argument("--config", help="JSON file with option values; flags override it")
    g.add_argument("--dedupe", action="store_true", help="drop coincident points, keep the first")
    g.add_argument("--normalize", action="store_true",
                   help="rescale delta so scalar and vector terms have comparable size")
    g.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _global_parser()
    parser = argparse.ArgumentParser(prog="rbfhhd", description="Meshless RBF potentials and Helmholtz-Hodge decomposition.",
                                     parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_):
        return sub.add_parser(name, help=help_, parents=[common])

    s = add("fit", "fit a scalar potential to mixed samples")
    s.add_argument("input", help="sample CSV")
    s.add_argument("-o", "--output", required=True, help="model JSON")
    s.add_argument("--residuals", help="residual CSV")
    _centre_args(s)

    s = add("hhd", "Helmholtz-Hodge decomposition of vector samples")
    s.add_argument("input")
    s.add_argument("-o", "--outdir", required=True)
    s.add_argument("--strategy", choices=["direct", "weighted", "laplace"], default="direct")
    s.add_argument("--fit-mode", choices=["independent", "sequential"], default="independent")
    s.add_argument("--quadrature", type=int, default=32)
    s.add_argument("--padding", type=float, default=0.0)
    _centre_args(s)

    s = add("centres", "select RBF centres")
    s.add_argument("input")
    s.add_argument("-o", "--output", required=True, help="centre CSV")
    s.add_argument("--strategy", default="kernel_importance",
                   choices=["kernel_importance", "uniform", "random", "adaptive_residual", "kmeans"])
    s.add_argument("--count", type=int, required=True)
    s.add_argument("--source", choices=["field_magnitude", "potential_value"], default="field_magnitude")
    s.add_argument("--threshold", type=float, default=0.05)
    s.add_argument("--max-count", type=int, default=5000)

    s = add("eval-grid", "evaluate models on a regular grid")
    s.add_argument("--model", action="append", default=[], help="model JSON (scalar and/or vector); repeatable")
    s.add_argument("--lo", type=float, nargs="+", required=True)
    s.add_argument("--hi", type=float, nargs="+", required=True)
    s.add_argument("--resolution", type=int, nargs="+", required=True)
    s.add_argument("-o", "--output", help="grid CSV")
    s.add_argument("--vtk", help="legacy VTK output")
    s.add_argument("--reference", help="samples CSV or analytic field name to compute linf against")

    s = add("streamlines", "trace streamlines")
    s.add_argument("--model", action="append", default=[])
    s.add_argument("--field", help="analytic field name instead of models")
    s.add_argument("--seeds", help="CSV of seed points (x,y[,z])")
    s.add_argument("--seed-grid", type=int, help="seeds on a regular grid with this many nodes per axis")
    s.add_argument("--lo", type=float, nargs="+")
    s.add_argument("--hi", type=float, nargs="+")
    s.add_argument("--step", type=float, default=1e-2)
    s.add_argument("--max-steps", type=int, default=1000)
    s.add_argument("--direction", choices=["forward", "backward", "both"], default="forward")
    s.add_argument("-o", "--output", required=True)

    s = add("critical-points", "critical points of a scalar model")
    s.add_argument("--model", required=True)
    s.add_argument("--guesses", help="CSV of starting points")
    s.add_argument("--tol", type=float, default=1e-12)
    s.add_argument("--max-iter", type=int, default=100)
    s.add_argument("--lo", type=float, nargs="+")
    s.add_argument("--hi", type=float, nargs="+")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--traces", help="CSV of per-guess convergence traces")

    s = add("metrics", "compare two sample files")
    s.add_argument("reference")
    s.add_argument("candidate")
    s.add_argument("--thresholds", type=float, nargs="+", default=[0.05, 0.10])
    s.add_argument("--align-constant", action="store_true")

    s = add("noise", "add Gaussian noise to samples")
    s.add_argument("input")
    s.add_argument("--level", type=float, required=True, help="relative to the per-component RMS")
    s.add_argument("-o", "--output", required=True)

    s = add("bound", "noise stability bound of a fitted model")
    s.add_argument("--model", required=True)
    s.add_argument("input", help="sample CSV whose points the model was fitted at")
    s.add_argument("--noise-norm", type=float, required=True)

    s = add("sample", "write samples of a built-in analytic field")
    s.add_argument("field", choices=sorted(REGISTRY))
    s.add_argument("--n", type=int, default=20, help="grid nodes per axis")
    s.add_argument("--random", type=int, help="draw this many uniform random points instead of a grid")
    s.add_argument("--scalar", action="store_true", help="include potential values")
    s.add_argument("--no-vector", action="store_true", help="omit the vector values")
    s.add_argument("-o", "--output", required=True)
    return parser


def _centre_args(s):
    s.add_argument("--centres", help="CSV of centres (x,y[,z]); default: the constrained points")
    s.add_argument("--centre-strategy",
                   choices=["kernel_importance", "uniform", "random", "adaptive_residual", "kmeans"])
    s.add_argument("--centre-count", type=int)


def resolve_options(args) -> argparse.Namespace:
    """Fill unset options from ``--config`` and then from the defaults."""
    config = {}
    if getattr(args, "config", None):
        try:
            config = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(config, dict):
            raise UsageError("config file must hold a JSON object")
    for key, value in config.items():
        attr = key.replace("-", "_")
        if getattr(args, attr, None) is None:
            setattr(args, attr, value)
    for key, value in GLOBAL_DEFAULTS.items():
        if getattr(args, key, None) is None:
            setattr(args, key, value)
    return args


def _kernel(args) -> Kernel:
    return Kernel(args.kernel, args.sigma, args.support)


def _read_points(path):
    rows = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#") or line[0].isalpha():
            continue
        rows.append([float(x) for x in line.split(",")])
    if not rows:
        raise SampleError(f"no points in {path}")
    return np.array(rows, float)


def _header(args):
    return [f"seed={args.seed}", f"kernel={_kernel(args).to_record()}", f"epsilon={args.epsilon!r}"]


def _choose_centres(args, samples, config):
    if getattr(args, "centres", None):
        return _read_points(args.centres)
    if getattr(args, "centre_strategy", None):
        count = args.centre_count or min(100, len(samples.constrained_index))
        sel = CentreSelection(args.centre_strategy, count, max_count=max(count, 5000), seed=args.seed)
        return select_centres(samples, sel, fit_config=config)
    return None


def cmd_fit(args):
    samples = io.read_samples(args.input, dedupe=args.dedupe)
    config = FitConfig(_kernel(args), delta=args.delta, epsilon=args.epsilon, normalize=args.normalize)
    centres = _choose_centres(args, samples, config)
    if centres is not None:
        config = FitConfig(config.kernel, centres, config.delta, config.epsilon, config.normalize)
    model = fit_mixed(samples, config)
    io.write_model(args.output, model)
    rep = residual_report(model, samples, model.metadata["delta"])
    if args.residuals:
        io.write_residuals(args.residuals, rep)
    print(f"centres: {model.n_centres}")
    print(f"energy: {rep.energy:.6g}")
    print(f"solver: {model.metadata['solver']['method']}")
    return EXIT_OK


def cmd_hhd(args):
    samples = io.read_samples(args.input, dedupe=args.dedupe)
    fc = FitConfig(_kernel(args), epsilon=args.epsilon)
    centres = _choose_centres(args, samples, fc)
    config = HHDConfig(_kernel(args), centres, args.strategy, args.epsilon, args.quadrature, args.fit_mode, args.padding)
    result = decompose(samples, config)
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    io.write_model(out / "u.json", result.conservative)
    io.write_model(out / "w.json", result.solenoidal)
    d = samples.dimension
    header = ["x", "y", "z"][:d] + ["hx", "hy", "hz"][:d]
    io.write_table(out / "h.csv", header, np.hstack([result.points, result.harmonic]).tolist(), _header(args))
    lines = [f"# {c}" for c in _header(args)]
    for key, value in result.diagnostics.items():
        if isinstance(value, dict):
            value = json.dumps(value, default=float)
        lines.append(f"{key}: {value}")
    text = "\n".join(lines) + "\n"
    (out / "diagnostics.txt").write_text(text, encoding="utf-8")
    print(text, end="")
    return EXIT_OK


def cmd_centres(args):
    samples = io.read_samples(args.input, dedupe=args.dedupe)
    sel = CentreSelection(args.strategy, args.count, args.source, args.threshold, args.max_count, args.seed)
    fc = FitConfig(_kernel(args), delta=args.delta, epsilon=args.epsilon, normalize=args.normalize)
    centres = select_centres(samples, sel, fit_config=fc)
    header = ["x", "y", "z"][: samples.dimension]
    io.write_table(args.output, header, centres.tolist(), _header(args) + [f"strategy={sel.strategy.value}"])
    print(f"selected {len(centres)} centres")
    return EXIT_OK


def _load_models(paths):
    scalar = vector = None
    for path in paths:
        m = io.read_model(path)
        if isinstance(m, VectorPotentialModel):
            vector = m
        else:
            scalar = m
    return scalar, vector


def _match_rows(points, values, targets):
    """Reorder ``values`` (one row per point) to follow ``targets``; both
    point sets must coincide up to order."""
    if len(points) == len(targets) and np.array_equal(points, targets):
        return values
    mismatch = SampleError("the two files do not hold values at the same set of points")
    if len(points) != len(targets) or len(points) == 0:
        raise mismatch
    tol = 1e-9 * max(1.0, float(np.abs(targets).max()))
    dist, j = cKDTree(points).query(targets)
    if np.any(dist > tol) or len(np.unique(j)) != len(j):
        raise mismatch
    return values[j]


def _reference_values(ref, nodes, d):
    if ref in REGISTRY:
        return make_analytic_field(ref)(nodes)
    samples = io.read_samples(ref)
    return _match_rows(samples.vector_points, samples.vector_values, nodes)


def cmd_eval_grid(args):
    if not args.model:
        raise UsageError("eval-grid needs at least one --model")
    scalar, vector = _load_models(args.model)
    spec = GridSpec(args.lo, args.hi, args.resolution)
    values = evaluate_on_grid(spec, scalar, vector)
    nodes = spec.nodes()
    d = spec.dimension
    if args.output:
        header = ["x", "y", "z"][:d]
        cols = [nodes]
        if "u" in values:
            header.append("u")
            cols.append(values["u"][:, None])
        header += [f"v{c}" for c in "xyz"[:d]]
        cols.append(values["field"])
        io.write_table(args.output, header, np.hstack(cols).tolist(), _header(args))
    if args.vtk:
        io.write_vtk(args.vtk, spec.axes(), {k: v for k, v in values.items()})
    reference = candidate = None
    if args.reference:
        reference = _reference_values(args.reference, nodes, d)
        candidate = values["field"]
    rep = footprint([scalar, vector], spec, reference, candidate)
    for line in rep.lines():
        print(line)
    return EXIT_OK


def cmd_streamlines(args):
    if args.field:
        field = make_analytic_field(args.field)
        fn = lambda p: field(np.atleast_2d(p))[0]  # noqa: E731
        box = field.box
    else:
        if not args.model:
            raise UsageError("streamlines needs --model or --field")
        scalar, vector = _load_models(args.model)
        fn = model_field(scalar, vector)
        ref = scalar or vector
        box = (ref.centres.min(axis=0), ref.centres.max(axis=0))
    if args.lo and args.hi:
        box = (args.lo, args.hi)
    lo, hi = (np.asarray(b, float) for b in box)
    if args.seeds:
        seeds = _read_points(args.seeds)
    else:
        n = args.seed_grid or 5
        h = (hi - lo) / n
        from .fields import regular_grid

        seeds = regular_grid(lo + h / 2, hi - h / 2, n)
    spec = StreamlineSpec(seeds, args.step, args.max_steps, args.direction)
    lines = trace_streamlines(fn, spec, (lo, hi))
    d = len(lo)
    rows = []
    for i, line in enumerate(lines):
        for j, p in enumerate(line):
            rows.append([i, j] + p.tolist())
    io.write_table(args.output, ["line", "vertex"] + ["x", "y", "z"][:d], rows, _header(args))
    print(f"{len(lines)} streamlines, {len(rows)} vertices")
    return EXIT_OK


def cmd_critical(args):
    model = io.read_model(args.model)
    if not isinstance(model, ScalarPotentialModel):
        raise UsageError("critical-points needs a scalar model")
    guesses = _read_points(args.guesses) if args.guesses else None
    box = (np.array(args.lo), np.array(args.hi)) if args.lo and args.hi else None
    points = find_critical_points(model, guesses, args.tol, args.max_iter, box)
    d = model.dimension
    rows = [list(cp.location) + [cp.classification, cp.gradient_norm, cp.iterations, cp.converged] for cp in points]
    io.write_table(args.output, ["x", "y", "z"][:d] + ["type", "grad_norm", "iterations", "converged"], rows,
                   _header(args))
    if args.traces:
        trows = [[i, it, ev, gn] for i, cp in enumerate(points) for it, ev, gn in cp.trace]
        io.write_table(args.traces, ["run", "iteration", "evaluations", "grad_norm"], trows, _header(args))
    conv = sum(cp.converged for cp in points)
    print(f"{conv} converged critical points, {len(points) - conv} unconverged runs")
    return EXIT_OK


def cmd_metrics(args):
    ref = io.read_samples(args.reference)
    cand = io.read_samples(args.candidate)
    if len(ref.vector_index) and len(cand.vector_index):
        a = ref.vector_values
        b = _match_rows(cand.vector_points, cand.vector_values, ref.vector_points)
    else:
        a = ref.scalar_values
        b = _match_rows(cand.scalar_points, cand.scalar_values, ref.scalar_points)
    rep = compute_metrics(a, b, args.thresholds, align_constant=args.align_constant)
    print(rep.table())
    return EXIT_OK


def cmd_noise(args):
    samples = io.read_samples(args.input, dedupe=args.dedupe)
    noisy = add_noise(samples, args.level, args.seed)
    io.write_samples(args.output, noisy, _header(args) + [f"noise level={args.level!r}"])
    return EXIT_OK


def cmd_bound(args):
    model = io.read_model(args.model)
    samples = io.read_samples(args.input, dedupe=args.dedupe)
    pts = samples.vector_points if len(samples.vector_index) else samples.points
    if isinstance(model, VectorPotentialModel):
        b = rotor_stability_bound(model, pts, args.noise_norm, args.epsilon)
        print(f"rotor bound: {b:.6g}")
    else:
        b = gradient_stability_bound(model, pts, args.noise_norm, args.epsilon)
        print(f"gradient bound: {b:.6g}")
    return EXIT_OK


def cmd_sample(args):
    field = make_analytic_field(args.field)
    if args.random:
        rng = np.random.default_rng(args.seed)
        lo, hi = (np.asarray(b, float) for b in field.box)
        pts = lo + (hi - lo) * rng.random((args.random, field.dimension))
    else:
        pts = field.grid(args.n)
    idx = np.arange(len(pts))
    scalar = args.scalar and field.potential_u is not None
    samples = SampleSet(
        pts,
        idx if scalar else None,
        field.potential_u(pts) if scalar else None,
        None if args.no_vector else idx,
        None if args.no_vector else field(pts),
    )
    io.write_samples(args.output, samples, [f"field={args.field}", f"seed={args.seed}"])
    return EXIT_OK


COMMANDS = {
    "fit": cmd_fit,
    "hhd": cmd_hhd,
    "centres": cmd_centres,
    "eval-grid": cmd_eval_grid,
    "streamlines": cmd_streamlines,
    "critical-points": cmd_critical,
    "metrics": cmd_metrics,
    "noise": cmd_noise,
    "bound": cmd_bound,
    "sample": cmd_sample,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = resolve_options(args)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s: %(message)s")
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return COMMANDS[args.command](args)
    except (IllConditionedError, UndefinedDerivativeError, np.linalg.LinAlgError) as exc:
        print(f"rbfhhd: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (RBFHHDError, OSError, KeyError, ValueError) as exc:
        print(f"rbfhhd: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
