"""Command-line front end.

Subcommands: compute (single geometry, JSON result), sweep (PFA
correction over an R x L grid, CSV), bench (backend timing comparison,
CSV), dump-matrix (round-trip block entries, CSV).  A flat key = value
config file can preset any flag of the chosen subcommand; explicit
flags win.  Exit codes: 0 success, 2 configuration error, 3 numerical
failure.  Result data goes to stdout or --output; messages go to
stderr.
"""

import argparse
import json
import math
import os
import sys

import numpy as np

from .casimir import (
    ConvergenceError,
    JobSpec,
    force,
    nearest_level_rows,
    pfa_correction_sweep,
    write_sweep_csv,
)
from .constants import c
from .lindet import (
    NotPositiveDefiniteError,
    benchmark_backends,
    fit_time_exponent,
    write_benchmark_csv,
)
from .materials import (
    EV_OVER_HBAR,
    Drude,
    MaterialError,
    PerfectReflector,
    Plasma,
    Vacuum,
    gold_drude,
    load_tabulated,
)
from .quadrature import QuadratureError
from .roundtrip import (
    RoundTripParams,
    assemble_block,
    assemble_block_unsymmetrized,
    dump_block_csv,
    dump_block_log10_csv,
)
from .specfun import DomainError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

_NUMERICAL_ERRORS = (
    ConvergenceError,
    NotPositiveDefiniteError,
    QuadratureError,
    FloatingPointError,
)


class ConfigError(ValueError):
    pass


def parse_material(text):
    """Material flag: perfect | vacuum | drude[:wp_eV,gamma_eV] |
    plasma[:wp_eV] | file:PATH."""
    if text == "perfect":
        return PerfectReflector()
    if text == "vacuum":
        return Vacuum()
    if text == "drude":
        return gold_drude()
    if text.startswith("drude:"):
        parts = text[len("drude:"):].split(",")
        if len(parts) != 2:
            raise ConfigError(f"drude material needs wp_eV,gamma_eV, got {text!r}")
        try:
            wp, gamma = float(parts[0]), float(parts[1])
        except ValueError as exc:
            raise ConfigError(f"bad drude parameters in {text!r}: {exc}") from exc
        return Drude(omega_p=wp * EV_OVER_HBAR, gamma=gamma * EV_OVER_HBAR)
    if text == "plasma":
        return Plasma(omega_p=9.0 * EV_OVER_HBAR)
    if text.startswith("plasma:"):
        try:
            wp = float(text[len("plasma:"):])
        except ValueError as exc:
            raise ConfigError(f"bad plasma frequency in {text!r}: {exc}") from exc
        return Plasma(omega_p=wp * EV_OVER_HBAR)
    if text.startswith("file:"):
        path = text[len("file:"):]
        try:
            with open(path) as handle:
                return load_tabulated(handle, extrapolate=True)
        except OSError as exc:
            raise ConfigError(f"cannot read material file {path!r}: {exc}") from exc
        except MaterialError as exc:
            raise ConfigError(f"bad material file {path!r}: {exc}") from exc
    raise ConfigError(f"unknown material {text!r}")


def _parse_ldim(text):
    if text == "auto":
        return None
    try:
        value = int(text)
    except ValueError as exc:
        raise ConfigError(f"--ldim must be 'auto' or an integer, got {text!r}") from exc
    if value < 1:
        raise ConfigError("--ldim must be >= 1")
    return value


def _float_list(text):
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad number list {text!r}: {exc}") from exc


def _int_list(text):
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad integer list {text!r}: {exc}") from exc


def _default_jobs():
    env = os.environ.get("CASPHERE_JOBS", "")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        return 1


def _add_common_spec_flags(parser, need_geometry=True):
    parser.add_argument("--radius", type=float, required=False,
                        help="sphere radius R in meters")
    parser.add_argument("--gap", type=float, required=False,
                        help="sphere-plane gap L in meters")
    parser.add_argument("--temperature", type=float, default=300.0,
                        help="temperature in kelvin; 0 selects the T=0 integral")
    parser.add_argument("--material", default="perfect",
                        help="both bodies: perfect | vacuum | drude[:wp,gamma] | "
                             "plasma[:wp] | file:PATH (wp, gamma in eV)")
    parser.add_argument("--plane-material", default=None,
                        help="override the plane material")
    parser.add_argument("--sphere-material", default=None,
                        help="override the sphere material")
    parser.add_argument("--backend", choices=["cholesky", "hodlr"], default="cholesky")
    parser.add_argument("--ldim", default="auto",
                        help="multipole cutoff: auto (5R/L, floor 20) or integer")
    parser.add_argument("--matsubara-rel-tol", type=float, default=1e-8)
    parser.add_argument("--m-sum-rel-tol", type=float, default=1e-8)
    parser.add_argument("--quad-rel-tol", type=float, default=1e-10)
    parser.add_argument("--zero-freq-policy", choices=["drude", "plasma", "perfect"],
                        default=None, help="default follows the plane material")
    parser.add_argument("--jobs", type=int, default=_default_jobs(),
                        help="worker processes (env CASPHERE_JOBS)")
    parser.add_argument("--output", default=None, help="output path (default stdout)")
    parser.add_argument("--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="casphere",
        description="Casimir sphere-plane free energy, force, and PFA corrections",
    )
    parser.add_argument("--config", default=None,
                        help="flat key = value file presetting flags of the subcommand")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p_compute = sub.add_parser("compute", help="free energy, force and PFA correction")
    _add_common_spec_flags(p_compute)
    p_compute.add_argument("--skip-force", action="store_true",
                           help="report only the free energy (no finite differences)")

    p_sweep = sub.add_parser("sweep", help="PFA correction over an R x L grid")
    _add_common_spec_flags(p_sweep)
    p_sweep.add_argument("--radii", required=False,
                         help="comma-separated sphere radii in meters")
    p_sweep.add_argument("--gaps", required=False,
                         help="comma-separated gaps in meters")
    p_sweep.add_argument("--levels", action="store_true",
                         help="also report rows nearest corrections 0.25%%, 0.5%%, 1%%")

    p_bench = sub.add_parser("bench", help="time both log-determinant backends")
    _add_common_spec_flags(p_bench)
    p_bench.add_argument("--dims", default="250,500,1000,2000",
                         help="comma-separated matrix dimensions")
    p_bench.add_argument("--repeats", type=int, default=3)

    p_dump = sub.add_parser("dump-matrix", help="round-trip block entries as CSV")
    _add_common_spec_flags(p_dump)
    p_dump.add_argument("--m-index", type=int, default=1)
    p_dump.add_argument("--xi-dimensionless", type=float, default=1.0,
                        help="xi (L+R)/c")
    p_dump.add_argument("--unsymmetrized", action="store_true",
                        help="dump log10 magnitudes of the unsymmetrized block")
    return parser


def _load_config(path, parser_dests):
    values = {}
    try:
        with open(path) as handle:
            for lineno, raw in enumerate(handle, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected key = value")
                key, _, value = line.partition("=")
                key = key.strip().replace("-", "_")
                if key not in parser_dests:
                    raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
                values[key] = value.strip()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    return values


def _build_spec(args):
    if args.radius is None or args.gap is None:
        raise ConfigError("--radius and --gap are required")
    base = parse_material(args.material)
    plane = parse_material(args.plane_material) if args.plane_material else base
    sphere = parse_material(args.sphere_material) if args.sphere_material else base
    try:
        return JobSpec(
            R=args.radius,
            L=args.gap,
            T=args.temperature,
            plane_model=plane,
            sphere_model=sphere,
            ell_dim=_parse_ldim(args.ldim),
            backend=args.backend,
            matsubara_rel_tol=args.matsubara_rel_tol,
            m_sum_rel_tol=args.m_sum_rel_tol,
            quad_rel_tol=args.quad_rel_tol,
            zero_freq_policy=args.zero_freq_policy,
            jobs=args.jobs,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _open_output(args):
    if args.output:
        return open(args.output, "w")
    return sys.stdout


def _cmd_compute(args):
    spec = _build_spec(args)
    if args.skip_force:
        from .casimir import _energy_function

        result = _energy_function(spec)(spec)
    else:
        result = force(spec)
    payload = result.to_json_dict(spec)
    stream = _open_output(args)
    try:
        json.dump(payload, stream, indent=2)
        stream.write("\n")
    finally:
        if stream is not sys.stdout:
            stream.close()
    if args.verbose:
        print(f"free energy {result.free_energy:.6e} J", file=sys.stderr)
    return EXIT_OK


def _cmd_sweep(args):
    if not args.radii or not args.gaps:
        raise ConfigError("--radii and --gaps are required")
    radii = _float_list(args.radii)
    gaps = _float_list(args.gaps)
    base = _build_spec(
        argparse.Namespace(**{**vars(args), "radius": radii[0], "gap": gaps[0]})
    )
    specs = []
    for radius in radii:
        for gap in gaps:
            specs.append(
                JobSpec(
                    R=radius,
                    L=gap,
                    T=base.T,
                    plane_model=base.plane_model,
                    sphere_model=base.sphere_model,
                    ell_dim=base.ell_dim,
                    backend=base.backend,
                    matsubara_rel_tol=base.matsubara_rel_tol,
                    m_sum_rel_tol=base.m_sum_rel_tol,
                    quad_rel_tol=base.quad_rel_tol,
                    zero_freq_policy=base.zero_freq_policy,
                    jobs=base.jobs,
                )
            )
    rows = pfa_correction_sweep(specs)
    stream = _open_output(args)
    try:
        write_sweep_csv(rows, stream)
    finally:
        if stream is not sys.stdout:
            stream.close()
    failures = [row for row in rows if row.get("error")]
    for row in failures:
        print(f"cell R={row['R_m']:g} L={row['L_m']:g} failed: {row['error']}",
              file=sys.stderr)
    if args.levels:
        for target, row in sorted(nearest_level_rows(rows).items()):
            print(
                f"level {100 * target:g}%: R={row['R_m']:g} L={row['L_m']:g} "
                f"correction={row['correction']:.4%}",
                file=sys.stderr,
            )
    return EXIT_OK


def _bench_generator(args):
    plane = parse_material(args.plane_material or args.material)
    sphere = parse_material(args.sphere_material or args.material)
    gap = args.gap if args.gap is not None else 1e-6

    def generate(dim):
        # dimension 2 d with d = ell_dim for m = 1; geometry chosen so
        # the default cutoff 5 R/L matches the requested dimension
        ell_dim = max(1, dim // 2)
        radius = ell_dim * gap / 5.0
        xi = c / (gap + radius)
        params = RoundTripParams(
            R=radius,
            L=gap,
            xi=xi,
            m_index=1,
            ell_dim=ell_dim,
            plane_model=plane,
            sphere_model=sphere,
            quad_rel_tol=args.quad_rel_tol,
        )
        block = assemble_block(params)
        full = block.full()
        return np.eye(full.shape[0]) - full

    return generate


def _cmd_bench(args):
    dims = _int_list(args.dims)
    if not dims:
        raise ConfigError("--dims must list at least one dimension")
    rows = benchmark_backends(dims, _bench_generator(args), repeats=args.repeats)
    stream = _open_output(args)
    try:
        write_benchmark_csv(rows, stream)
    finally:
        if stream is not sys.stdout:
            stream.close()
    if len(rows) >= 2:
        chol = fit_time_exponent(rows, "t_cholesky_s")
        hodlr = fit_time_exponent(rows, "t_hodlr_s")
        print(f"scaling exponents: cholesky {chol:.2f}, hodlr {hodlr:.2f}",
              file=sys.stderr)
    else:
        print("fit skipped: need at least two dimensions", file=sys.stderr)
    return EXIT_OK


def _cmd_dump_matrix(args):
    if args.radius is None or args.gap is None:
        raise ConfigError("--radius and --gap are required")
    plane = parse_material(args.plane_material or args.material)
    sphere = parse_material(args.sphere_material or args.material)
    xi = args.xi_dimensionless * c / (args.gap + args.radius)
    ell_dim = _parse_ldim(args.ldim)
    if ell_dim is None:
        from .casimir import ell_dim_auto

        ell_dim = ell_dim_auto(args.radius, args.gap)
    params = RoundTripParams(
        R=args.radius,
        L=args.gap,
        xi=xi,
        m_index=args.m_index,
        ell_dim=ell_dim,
        plane_model=plane,
        sphere_model=sphere,
        quad_rel_tol=args.quad_rel_tol,
    )
    stream = _open_output(args)
    try:
        if args.unsymmetrized:
            dump_block_log10_csv(assemble_block_unsymmetrized(params), stream)
        else:
            dump_block_csv(assemble_block(params), stream)
    finally:
        if stream is not sys.stdout:
            stream.close()
    return EXIT_OK


_COMMANDS = {
    "compute": _cmd_compute,
    "sweep": _cmd_sweep,
    "bench": _cmd_bench,
    "dump-matrix": _cmd_dump_matrix,
}


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.config:
            # config values become defaults, explicit flags keep priority:
            # re-parse with defaults overridden by the file
            dests = {
                action.dest
                for action in parser._subparsers._group_actions[0]
                .choices[args.subcommand]
                ._actions
            }
            values = _load_config(args.config, dests)
            sub = parser._subparsers._group_actions[0].choices[args.subcommand]
            for key, value in values.items():
                action = next(a for a in sub._actions if a.dest == key)
                if isinstance(action, argparse._StoreTrueAction):
                    parsed = value.lower() in ("1", "true", "yes", "on")
                elif action.type is not None:
                    parsed = action.type(value)
                else:
                    parsed = value
                sub.set_defaults(**{key: parsed})
            args = parser.parse_args(argv)
        handler = _COMMANDS[args.subcommand]
        return handler(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MaterialError, DomainError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
