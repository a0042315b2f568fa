"""Command-line front end: synth, reconstruct, autofocus, compare, bench.

Exit codes: 0 success, 2 bad configuration, 3 unreadable input, 4 solver
produced non-finite values, 5 autofocus did not converge (its output is still
written). Option values come from the command line first, then from a JSON
``--config`` file whose keys are the option names (dashes or underscores),
then from the built-in defaults.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .data_model import DispersionModel
from .defr import defr_image, defr_isam, defr_solve
from .dispersion import autofocus
from .io import (
    ArrayFileError,
    read_array,
    read_json,
    write_array,
    write_csv,
    write_json,
    write_png16,
)
from .isam import ifft_reconstruct, isam_reconstruct, plan_nufft
from .mbir import MbirConfig, depth_weights, mbir_solve
from .metrics import evaluate, log_scale_16bit
from .synthesis import Scenario, build_scenario

logger = logging.getLogger("fullrange_isam")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INPUT = 3
EXIT_NONFINITE = 4
EXIT_UNCONVERGED = 5

METHODS = ("ifft", "isam", "defr", "defr-isam", "mbir", "mbir+")
BENCH_LABELS = {
    "ifft": "direct",
    "isam": "ISAM",
    "defr": "DEFR",
    "defr-isam": "DEFR+ISAM",
    "mbir": "MBIR",
    "mbir+": "MBIR+",
}
TRACE_HEADER = ("iteration", "objective", "fidelity", "l1", "rel_residual", "seconds")


class ConfigError(ValueError):
    pass


class InputError(OSError):
    pass


# ---------------------------------------------------------------- arguments


def _float_pair(text):
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO,HI, got {text!r}") from None
    return lo, hi


def _add_common(p):
    p.add_argument("--config", type=Path, help="JSON file of option defaults")
    p.add_argument("-v", "--verbose", action="count", default=0)


def _add_dispersion(p):
    g = p.add_argument_group("dispersion")
    g.add_argument("--a2", type=float, help="a_2 in rad um^2 (overrides the header)")
    g.add_argument("--a3", type=float, help="a_3 in rad um^3")
    g.add_argument("--k0", type=float, help="expansion wavenumber in rad/um")
    g.add_argument("--autofocus", action="store_true", help="estimate a_2/a_3 first")
    _add_search(g)


def _add_search(g):
    g.add_argument("--a2-range", type=_float_pair, default=(0.0, 200.0), metavar="LO,HI")
    g.add_argument("--a3-range", type=_float_pair, default=(0.0, 0.0), metavar="LO,HI")
    g.add_argument("--grid-points", type=int, default=21)
    g.add_argument("--refine-iters", type=int, default=200)


def _add_solver(p):
    g = p.add_argument_group("operator")
    g.add_argument("--nufft-width", type=int, default=6)
    g.add_argument("--nufft-oversample", type=float, default=2.0)
    g = p.add_argument_group("DEFR")
    g.add_argument("--defr-iters", type=int, default=500)
    g.add_argument("--defr-floor", type=float, default=1e-4)
    g.add_argument("--no-residual", action="store_true",
                   help="DEFR image without the compensated residual")
    g = p.add_argument_group("MBIR")
    g.add_argument("--lambda", dest="lam", type=float, default=0.5)
    g.add_argument("--tol", type=float, default=1e-3)
    g.add_argument("--max-iters", type=int, default=500)
    g.add_argument("--no-add-residual", action="store_true")
    g.add_argument("--w-min", type=float, default=0.5)
    g.add_argument("--w-max", type=float, default=1.0)
    g.add_argument("--step-scale", type=float, default=1.0)
    g.add_argument("--normalize", choices=("operator", "unit", "none"), default="operator")
    g.add_argument("--mbir-output", choices=("backprojected", "iterate"), default="backprojected")


def _add_png(p):
    p.add_argument("--floor-db", type=float, default=-60.0)
    p.add_argument("--ceil-db", type=float, default=0.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fullrange-isam",
        description="Full-range dispersion-encoded ISAM reconstruction toolkit.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a seeded pseudo-full-range dataset")
    _add_common(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--scenario", type=Path, help="JSON scenario description")
    p.add_argument("--n-x", type=int)
    p.add_argument("--n-z", type=int)
    p.add_argument("--count", type=int)
    p.add_argument("--pitch", type=float, help="lateral pitch in um")
    p.add_argument("--a2", type=float, help="encoding a_2")
    p.add_argument("--a3", type=float, help="encoding a_3")
    p.add_argument("--noise", type=float, help="noise sigma relative to the peak")
    p.add_argument("--delay-shift", type=int)

    p = sub.add_parser("reconstruct", help="reconstruct an image from spectra")
    _add_common(p)
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--output", type=Path, required=True)
    p.add_argument("--method", choices=METHODS, required=True)
    p.add_argument("--trace", type=Path, help="MBIR trace CSV")
    p.add_argument("--png", type=Path, help="16-bit log-scaled PNG of the image")
    _add_png(p)
    _add_dispersion(p)
    _add_solver(p)

    p = sub.add_parser("autofocus", help="estimate dispersion coefficients")
    _add_common(p)
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--output", type=Path, required=True, help="JSON result")
    p.add_argument("--k0", type=float)
    _add_search(p)

    p = sub.add_parser("compare", help="score an image against a reference")
    _add_common(p)
    p.add_argument("--image", type=Path, required=True)
    p.add_argument("--truth", type=Path, required=True)
    p.add_argument("--reference", type=Path,
                   help="image whose peak sets the log scaling (default: truth)")
    p.add_argument("--label", default="")
    p.add_argument("--csv", type=Path, required=True)
    p.add_argument("--png-dir", type=Path)
    _add_png(p)

    p = sub.add_parser("bench", help="run all six methods and tabulate RMSE/PSNR/SSIM")
    _add_common(p)
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--seed", type=int, help="synthesize a scenario with this seed")
    p.add_argument("--scenario", type=Path, help="JSON scenario description")
    p.add_argument("--input", type=Path, help="existing spectra instead of synthesizing")
    p.add_argument("--truth", type=Path, help="ground truth for --input")
    p.add_argument("--no-images", action="store_true")
    p.add_argument("--traces", action="store_true",
                   help="also write MBIR trace CSVs (their wall-time column varies run to run)")
    _add_png(p)
    _add_dispersion(p)
    _add_solver(p)
    parser.subcommands = sub.choices
    return parser


def parse_args(argv=None):
    """Parse with precedence command line > ``--config`` file > defaults."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    command = next((a for a in argv if a in parser.subcommands), None)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", type=Path)
    known, _ = pre.parse_known_args(argv)
    if command is not None and known.config is not None:
        _apply_config(parser.subcommands[command], known.config)
    return parser.parse_args(argv)


def _apply_config(sub, path):
    try:
        overrides = read_json(path)
    except ArrayFileError as exc:
        raise InputError(str(exc)) from exc
    if not isinstance(overrides, dict):
        raise ConfigError("config file must hold a JSON object")
    known = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, value in overrides.items():
        dest = key.replace("-", "_")
        dest = "lam" if dest == "lambda" else dest
        if dest not in known or dest in ("config", "help"):
            raise ConfigError(f"unknown option {key!r} in {path}")
        if isinstance(value, list):
            value = tuple(value)
        elif known[dest].type is Path and value is not None:
            value = Path(value)
        defaults[dest] = value
    sub.set_defaults(**defaults)
    # required options may now come from the file
    for dest in defaults:
        known[dest].required = False


# ---------------------------------------------------------------- helpers


def _read(path):
    try:
        return read_array(path)
    except (ArrayFileError, FileNotFoundError) as exc:
        raise InputError(str(exc)) from exc


def _require_distinct(inputs, outputs):
    ins = {Path(p).resolve() for p in inputs if p is not None}
    for out in outputs:
        if out is not None and Path(out).resolve() in ins:
            raise ConfigError(f"output {out} would overwrite an input")


def _resolve_dispersion(args, s_d, header_disp):
    """Dispersion model from flags, else header, else autofocus; returns (model, converged)."""
    grid = s_d.grid
    k_0 = args.k0 if args.k0 is not None else (
        header_disp.k_0 if header_disp is not None else grid.k_center)
    if args.autofocus:
        result = autofocus(s_d, k_0, args.a2_range, args.a3_range, args.grid_points,
                           args.refine_iters)
        logger.info("autofocus: a2=%.6g a3=%.6g cost=%.6g converged=%s",
                    result.dispersion.a2, result.dispersion.a3, result.cost, result.converged)
        return result.dispersion, result.converged
    if args.a2 is not None or args.a3 is not None:
        coeffs = (args.a2 or 0.0,) + ((args.a3,) if args.a3 is not None else ())
        return DispersionModel.from_grid(grid, k_0, coeffs), True
    if header_disp is not None:
        return DispersionModel.from_grid(grid, k_0, header_disp.coeffs), True
    return DispersionModel.zero(grid, k_0), True


def _mbir_config(args, grid, weighted):
    weights = depth_weights(grid, args.w_min, args.w_max) if weighted else None
    return MbirConfig(
        lam=args.lam, weights=weights, tol=args.tol, max_iters=args.max_iters,
        add_residual=not args.no_add_residual, step_scale=args.step_scale,
        normalize=args.normalize, output=args.mbir_output,
    )


def _run_method(method, args, s_d, d, plan, cache):
    """Reconstruct with one method; ``cache`` shares the DEFR pass between methods."""
    if method == "ifft":
        return ifft_reconstruct(s_d, d), None
    if method == "isam":
        return isam_reconstruct(s_d, plan, d), None
    if method in ("defr", "defr-isam"):
        if "defr" not in cache:
            cache["defr"] = defr_solve(s_d, d, args.defr_iters, args.defr_floor)
        result = cache["defr"]
        if method == "defr":
            return defr_image(result, d, include_residual=not args.no_residual), None
        return defr_isam(s_d, d, plan, result=result), None
    cfg = _mbir_config(args, s_d.grid, weighted=method == "mbir+")
    image, trace = mbir_solve(s_d, plan, d, cfg)
    logger.info("%s: %d iterations, converged=%s", method, trace.iterations, trace.converged)
    return image, trace


def _check_finite(image, method):
    if not np.all(np.isfinite(image.data)):
        raise FloatingPointError(f"{method} produced non-finite values")


def _write_trace(path, trace):
    write_csv(path, TRACE_HEADER, trace.rows())


# ---------------------------------------------------------------- commands


def cmd_synth(args):
    scenario = Scenario()
    if args.scenario is not None:
        try:
            scenario = Scenario.from_dict(read_json(args.scenario))
        except ArrayFileError as exc:
            raise InputError(str(exc)) from exc
    changes = {
        "n_x": args.n_x, "n_z": args.n_z, "count": args.count, "lateral_pitch": args.pitch,
        "noise_sigma": args.noise, "delay_shift": args.delay_shift,
    }
    if args.a2 is not None or args.a3 is not None:
        changes["a_encode"] = (args.a2 or 0.0,) + ((args.a3,) if args.a3 is not None else ())
    scenario = Scenario.from_dict({**scenario.to_dict(),
                                   **{k: v for k, v in changes.items() if v is not None}})
    data = build_scenario(scenario, args.seed)
    out = args.out_dir
    write_array(out / "spectra.bin", data.spectra, dispersion=data.dispersion)
    write_array(out / "truth.bin", data.ground_truth)
    write_json(out / "scenario.json", {"seed": args.seed, **scenario.to_dict()})
    logger.info("wrote %s", out)
    return EXIT_OK


def cmd_reconstruct(args):
    _require_distinct([args.input, args.config], [args.output, args.trace, args.png])
    if args.trace is not None and args.method not in ("mbir", "mbir+"):
        raise ConfigError("--trace is only available for mbir and mbir+")
    s_d, header_disp = _read(args.input)
    if np.iscomplexobj(s_d.data):
        raise InputError(f"{args.input} holds complex data, expected real spectra")
    d, converged = _resolve_dispersion(args, s_d, header_disp)
    plan = None
    if args.method not in ("ifft", "defr"):
        plan = plan_nufft(s_d.grid, args.nufft_width, args.nufft_oversample)
        logger.info("operator norm estimate %.6g", plan.opnorm)
    image, trace = _run_method(args.method, args, s_d, d, plan, {})
    _check_finite(image, args.method)
    write_array(args.output, image, dispersion=d, extra={"method": args.method})
    if trace is not None and args.trace is not None:
        _write_trace(args.trace, trace)
    if args.png is not None:
        if np.any(image.data):
            write_png16(args.png, log_scale_16bit(image, args.floor_db, args.ceil_db))
        else:
            write_png16(args.png, np.zeros(image.grid.shape, dtype=np.uint16))
    return EXIT_OK if converged else EXIT_UNCONVERGED


def cmd_autofocus(args):
    _require_distinct([args.input, args.config], [args.output])
    s_d, header_disp = _read(args.input)
    k_0 = args.k0 if args.k0 is not None else (
        header_disp.k_0 if header_disp is not None else s_d.grid.k_center)
    result = autofocus(s_d, k_0, args.a2_range, args.a3_range, args.grid_points,
                       args.refine_iters)
    write_json(args.output, {
        **result.dispersion.to_dict(),
        "cost": result.cost,
        "converged": result.converged,
        "at_boundary": result.at_boundary,
        "iterations": result.iterations,
    })
    if not result.converged:
        logger.warning("autofocus did not converge; result written to %s", args.output)
        return EXIT_UNCONVERGED
    return EXIT_OK


def cmd_compare(args):
    _require_distinct([args.image, args.truth, args.reference, args.config], [args.csv])
    image, _ = _read(args.image)
    truth, _ = _read(args.truth)
    if image.grid.shape != truth.grid.shape:
        raise ConfigError("image and truth shapes differ")
    ref = truth if args.reference is None else _read(args.reference)[0]
    report = evaluate(image, truth, args.label, args.floor_db, args.ceil_db,
                      reference=ref)
    row = report.as_row()
    write_csv(args.csv, list(row), [list(row.values())])
    if args.png_dir is not None:
        scale = report.reference_max
        write_png16(args.png_dir / "image.png",
                    log_scale_16bit(image, args.floor_db, args.ceil_db, reference=scale))
        write_png16(args.png_dir / "truth.png",
                    log_scale_16bit(truth, args.floor_db, args.ceil_db, reference=scale))
    return EXIT_OK


def cmd_bench(args):
    if args.input is not None:
        if args.truth is None:
            raise ConfigError("--input needs --truth")
        _require_distinct([args.input, args.truth, args.config], [args.out_dir / "bench.csv"])
        s_d, header_disp = _read(args.input)
        truth, _ = _read(args.truth)
    else:
        if args.seed is None:
            raise ConfigError("bench needs --seed (or --input and --truth)")
        scenario = Scenario()
        if args.scenario is not None:
            try:
                scenario = Scenario.from_dict(read_json(args.scenario))
            except ArrayFileError as exc:
                raise InputError(str(exc)) from exc
        data = build_scenario(scenario, args.seed)
        s_d, header_disp, truth = data.spectra, data.dispersion, data.ground_truth
    if truth.grid.shape != s_d.grid.shape:
        raise ConfigError("truth and spectra shapes differ")
    d, converged = _resolve_dispersion(args, s_d, header_disp)
    plan = plan_nufft(s_d.grid, args.nufft_width, args.nufft_oversample)
    out = args.out_dir
    cache = {}
    rows = []
    for method in METHODS:
        image, trace = _run_method(method, args, s_d, d, plan, cache)
        _check_finite(image, method)
        report = evaluate(image, truth, BENCH_LABELS[method], args.floor_db, args.ceil_db)
        rows.append([report.method, report.rmse, report.psnr, report.ssim])
        logger.info("%-10s rmse=%.6g psnr=%.3f ssim=%.4f", report.method, report.rmse,
                    report.psnr, report.ssim)
        if not args.no_images:
            stem = method.replace("+", "_plus")
            write_array(out / f"{stem}.bin", image, dispersion=d, extra={"method": method})
            write_png16(out / f"{stem}.png", log_scale_16bit(
                image, args.floor_db, args.ceil_db, reference=report.reference_max))
            if trace is not None and args.traces:
                _write_trace(out / f"{stem}_trace.csv", trace)
    if not args.no_images:
        write_array(out / "truth.bin", truth)
        write_png16(out / "truth.png", log_scale_16bit(truth, args.floor_db, args.ceil_db))
    write_csv(out / "bench.csv", ["method", "rmse", "psnr", "ssim"], rows)
    return EXIT_OK if converged else EXIT_UNCONVERGED


COMMANDS = {
    "synth": cmd_synth,
    "reconstruct": cmd_reconstruct,
    "autofocus": cmd_autofocus,
    "compare": cmd_compare,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FloatingPointError as exc:  # includes NonFiniteIterateError
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONFINITE
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
