"""Command-line frontend: curvature dumps, certificates, gauge checks,
coordinate solves, smoothing experiments, and the acceptance suites.

Exit codes: 0 success, 1 check failure, 2 input error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import curvature as cv
from . import smoothing as sm
from . import solver as sv
from . import suites
from . import symbols as sy
from .errors import ComputationError, InputError
from .metric import MetricSpec, bundled_spec, bundled_spec_names, load_spec, metric_jet

EXIT_OK, EXIT_CHECK_FAILED, EXIT_INPUT, EXIT_RUNTIME = 0, 1, 2, 3


def _manifest(args, command, outputs):
    overrides = {k: v for k, v in sorted(vars(args).items())
                 if k not in ("func", "out") and v is not None}
    overrides.pop("command", None)
    return {
        "command": command,
        "spec": getattr(args, "spec", None),
        "overrides": {k: (list(v) if isinstance(v, tuple) else v)
                      for k, v in overrides.items()},
        "version": __version__,
        "seed": getattr(args, "seed", 0),
        "wall_clock": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "outputs": [str(p) for p in outputs],
    }


def _write_report(args, command, payload, outputs):
    payload = {"manifest": _manifest(args, command, outputs), **payload}
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{command.replace('-', '_')}.json"
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    if args.json:
        json.dump(payload, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
    return path


def _load_metric(args) -> MetricSpec:
    if args.spec is None:
        raise InputError("no metric given; pass --spec PATH or --bundled NAME")
    try:
        if args.spec.startswith("bundled:"):
            return bundled_spec(args.spec.split(":", 1)[1])
        return load_spec(args.spec)
    except ComputationError as exc:
        # failures while validating the spec file are input errors
        raise InputError(f"invalid metric spec: {exc}") from exc


def _parse_points(text, n):
    points = []
    for chunk in text.split(";"):
        coords = [float(v) for v in chunk.split(",") if v.strip()]
        if len(coords) != n:
            raise InputError(f"point '{chunk}' does not have {n} coordinates")
        points.append(coords)
    return np.asarray(points)


def _sample_points(spec, count, seed):
    rng = np.random.default_rng(seed)
    lo, hi = spec.box[:, 0], spec.box[:, 1]
    mid, half = (lo + hi) / 2.0, (hi - lo) / 2.0
    return mid + 0.8 * half * rng.uniform(-1.0, 1.0, size=(count, spec.n))


TENSOR_CHOICES = ("christoffel", "riemann", "ricci", "scalar", "schouten",
                  "weyl", "cotton", "bach", "obstruction", "gauge")


def cmd_curvature(args):
    spec = _load_metric(args)
    if args.which == "all":
        # "all" means all tensors defined in this dimension; an explicit
        # request for the obstruction in n != 4 is still an input error
        which = tuple(t for t in TENSOR_CHOICES
                      if t != "obstruction" or spec.n == 4)
    else:
        which = tuple(args.which.split(","))
    for name in which:
        if name not in TENSOR_CHOICES:
            raise InputError(f"unknown tensor '{name}' (choose from {TENSOR_CHOICES})")
    if args.points:
        points = _parse_points(args.points, spec.n)
    else:
        points = _sample_points(spec, args.random, args.seed)
    if "obstruction" in which and spec.n != 4:
        from .errors import UnsupportedDimension
        raise UnsupportedDimension(
            f"the obstruction tensor is implemented only in dimension 4, "
            f"got n={spec.n}")

    records = []
    csv_rows = []
    for p_idx, x in enumerate(points):
        mj = metric_jet(spec, x, 4)
        bundle = cv.curvature_bundle(mj)
        entry = {"point": [float(v) for v in x]}
        tensors = {}
        if "christoffel" in which:
            tensors["christoffel"] = bundle.christoffel.components.tolist()
        if "riemann" in which:
            tensors["riemann"] = bundle.riemann.components.tolist()
        if "ricci" in which:
            tensors["ricci"] = bundle.ricci.components.tolist()
        if "scalar" in which:
            tensors["scalar"] = bundle.scalar
        if "schouten" in which:
            tensors["schouten"] = bundle.schouten.components.tolist()
        if "weyl" in which:
            tensors["weyl"] = cv.weyl(bundle, mj).components.tolist()
        if "cotton" in which:
            tensors["cotton"] = cv.cotton(spec, x).components.tolist()
        if "bach" in which:
            tensors["bach"] = cv.bach(spec, x).tensor.components.tolist()
        if "obstruction" in which:
            tensors["obstruction"] = cv.obstruction4(spec, x).conformal_invariant.components.tolist()
        if "gauge" in which:
            tensors["gauge_residual"] = cv.gauge_residual(mj).tolist()
        entry["tensors"] = tensors
        records.append(entry)
        for name, value in tensors.items():
            arr = np.atleast_1d(np.asarray(value, dtype=np.float64))
            for comp_idx, comp_val in enumerate(arr.ravel()):
                idx = np.unravel_index(comp_idx, arr.shape)
                csv_rows.append([p_idx, name,
                                 "-".join(str(i) for i in idx), repr(float(comp_val))])

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "curvature.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["point_index", "tensor", "component", "value"])
        writer.writerows(csv_rows)
    _write_report(args, "curvature", {"points": records}, [csv_path])
    return EXIT_OK


def cmd_certify(args):
    if args.samples < 1:
        raise InputError(f"--samples must be positive, got {args.samples}")
    spec = _load_metric(args)
    x = _parse_points(args.point, spec.n)[0]
    mj = metric_jet(spec, x, 1)
    fp = sy.FrozenPoint.from_jet(mj)
    report, rows = sy.ellipticity_certificate(
        fp, samples=args.samples, background=f"{spec.name} at {x.tolist()}",
        keep_rows=True)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "certificate.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"xi_{i + 1}" for i in range(spec.n)] + ["sigma_min"])
        for xi, s in rows:
            writer.writerow([repr(v) for v in xi] + [repr(s)])
    _write_report(args, "certify", {"certificate": report.to_dict()}, [csv_path])
    return EXIT_OK if report.pass_ else EXIT_CHECK_FAILED


def cmd_gauge_check(args):
    spec = _load_metric(args)
    if args.points:
        points = _parse_points(args.points, spec.n)
    else:
        points = _sample_points(spec, args.random, args.seed)
    entries = []
    worst = 0.0
    for x in points:
        res = cv.gauge_residual(metric_jet(spec, x, 2))
        worst = max(worst, float(np.abs(res).max()))
        entries.append({"point": [float(v) for v in x],
                        "residual": res.tolist()})
    tol = args.tol if args.tol is not None else 1e-10
    payload = {"points": entries,
               "max_residual": {"value": worst, "tolerance": tol,
                                "pass": bool(worst <= tol)}}
    _write_report(args, "gauge-check", payload, [])
    return EXIT_OK


def cmd_solve(args):
    spec = _load_metric(args)
    shape = tuple(int(v) for v in args.grid.split(","))
    box = spec.box
    if args.box:
        box = np.asarray([[float(v) for v in part.split(",")]
                          for part in args.box.split(";")])
    grid = sv.Grid(box=box, shape=shape)
    config = sv.SolverConfig(max_iter=args.max_iter,
                             tol=args.tol if args.tol is not None else 1e-8,
                             eps_reg=args.eps_reg)
    u, report = sv.solve_dirichlet(spec, grid, config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "solution.csv"
    coords = grid.node_coordinates()
    flat = u.flat()
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["node"]
                        + [f"x{i + 1}" for i in range(grid.n)]
                        + [f"u{i + 1}" for i in range(grid.n)])
        for node in range(coords.shape[0]):
            writer.writerow([node] + [repr(v) for v in coords[node]]
                            + [repr(flat[j, node]) for j in range(grid.n)])
    payload = {"solve": {
        "energy": report.energy,
        "gradient_sup": report.gradient_sup,
        "iterations": report.iterations,
        "converged": report.converged,
        "min_jacobian": report.min_jacobian,
        "diffeomorphic": report.diffeomorphic,
        "gauge_max": report.gauge_max,
        "gauge_mean": report.gauge_mean,
        "energy_trace": report.energies,
    }}
    _write_report(args, "solve", payload, [csv_path])
    return EXIT_OK


def cmd_smooth(args):
    shape = tuple(int(v) for v in args.shape.split(","))
    p = sm.synth_zygmund_symbol(args.d, shape, m=args.m, r=args.r,
                                seed=args.seed, grid=args.grid)
    levels = int(np.ceil(np.log2(max(p.xi_norms.max(), 2.0))))
    lp = sm.LPBundle(levels=levels, delta=args.delta)
    split = sm.smooth_split(p, lp)
    c_const = sm.measure_ellipticity(p, min_radius=1.0)
    pres = sm.ellipticity_preservation(split, c_const)

    probe = sm.synth_zygmund_symbol(1, (2, 2), m=0.0, r=args.r, seed=args.seed,
                                    grid=8192, n_scales=12, xi_points=[[3]])
    fit = sm.regularity_rate(probe, 0)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rate_path = out_dir / "lowpass_rate.csv"
    with open(rate_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["eps", "sup_deviation"])
        for e, dvn in zip(fit.eps, fit.deviations):
            writer.writerow([repr(e), repr(dvn)])

    outputs = [rate_path]
    payload = {
        "symbol": {"d": args.d, "shape": list(shape), "order": args.m,
                   "regularity": args.r, "grid": args.grid, "delta": args.delta,
                   "growth_constant": p.growth_constant()},
        "partition_defect": lp.partition_defect(p.xi_norms),
        "reconstruction_defect": split.reconstruction_defect,
        "flat_shell_exponent": split.flat_decay_exponent,
        "flat_shell_bound": args.m - args.r * args.delta + 0.2,
        "lowpass_rate": {"slope": fit.slope, "target": args.r, "band": 0.15},
        "ellipticity": {"constant": c_const, "band_radius": pres.band_radius,
                        "worst_ratio": pres.worst_ratio},
    }
    if args.d == 1:
        freqs = [args.grid // 64, args.grid // 32, args.grid // 16,
                 args.grid // 8, args.grid // 4]
        table = sm.parametrix_residual(split, freqs, band_radius=pres.band_radius)
        res_path = out_dir / "parametrix_residual.csv"
        with open(res_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["frequency", "relative_residual", "below_band"])
            for f, rres, b in zip(table.frequencies, table.residuals, table.below_band):
                writer.writerow([f, repr(rres), int(b)])
        outputs.append(res_path)
        payload["parametrix"] = {"frequencies": table.frequencies,
                                 "residuals": table.residuals,
                                 "strictly_decreasing": table.strictly_decreasing()}
    _write_report(args, "smooth", payload, outputs)
    return EXIT_OK


def cmd_suite(args):
    result = suites.run_suite(args.name, seed=args.seed)
    _write_report(args, f"suite-{args.name}", result, [])
    for check in result["checks"]:
        verdict = "PASS" if check["pass"] else "FAIL"
        print(f"[{verdict}] {check['name']}: value={check['value']:.6e} "
              f"tolerance={check['tolerance']:.3e} ({check['mode']})")
    return EXIT_OK if result["pass"] else EXIT_CHECK_FAILED


def build_parser():
    parser = argparse.ArgumentParser(
        prog="confcurv",
        description="conformal curvature tensors, gauge certificates, "
                    "n-harmonic coordinate solver, symbol smoothing")
    parser.add_argument("--spec", help="metric spec JSON path, or bundled:NAME "
                        f"(available: {', '.join(bundled_spec_names())})")
    parser.add_argument("--out", default="confcurv-out", help="report directory")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--tol", type=float, default=None,
                        help="override the default tolerance where applicable")
    parser.add_argument("--json", action="store_true",
                        help="echo the JSON report to stdout")
    sub = parser.add_subparsers(dest="command", required=True)

    c = sub.add_parser("curvature", help="evaluate curvature tensors at points")
    c.add_argument("--points", help="semicolon-separated points 'x1,..,xn;...'")
    c.add_argument("--random", type=int, default=5, help="sample count if no points")
    c.add_argument("--which", default="all")
    c.set_defaults(func=cmd_curvature)

    c = sub.add_parser("certify", help="ellipticity certificate at a point")
    c.add_argument("--point", required=True)
    c.add_argument("--samples", type=int, default=500)
    c.set_defaults(func=cmd_certify)

    c = sub.add_parser("gauge-check", help="n-harmonic gauge residual at points")
    c.add_argument("--points")
    c.add_argument("--random", type=int, default=5)
    c.set_defaults(func=cmd_gauge_check)

    c = sub.add_parser("solve", help="solve for n-harmonic coordinates")
    c.add_argument("--grid", required=True, help="nodes per axis, e.g. 17,17,17")
    c.add_argument("--box", help="override box 'lo,hi;lo,hi;...'")
    c.add_argument("--max-iter", type=int, default=500)
    c.add_argument("--eps-reg", type=float, default=1e-8)
    c.set_defaults(func=cmd_solve)

    c = sub.add_parser("smooth", help="symbol smoothing experiment")
    c.add_argument("--d", type=int, default=1, choices=(1, 2))
    c.add_argument("--shape", default="3,2")
    c.add_argument("--m", type=float, default=2.0)
    c.add_argument("--r", type=float, default=1.5)
    c.add_argument("--delta", type=float, default=0.5)
    c.add_argument("--grid", type=int, default=1024)
    c.set_defaults(func=cmd_smooth)

    c = sub.add_parser("suite", help="run a named check battery")
    c.add_argument("name", choices=sorted(suites.SUITES))
    c.set_defaults(func=cmd_suite)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ComputationError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
