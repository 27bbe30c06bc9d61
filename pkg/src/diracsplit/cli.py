"""Command-line front end: experiments to CSV, coefficient and algebra reports.

Data goes to the output stream (stdout or --output), diagnostics to the
error stream, never mixed.  Exit codes: 0 success, 1 configuration or
validation error, 2 numerical failure (non-convergence or a saturated
study when an order was demanded).
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path
from typing import Optional, Sequence, TextIO

from . import __version__
from .config import ConfigError, RunConfig, default_config, parse_config
from .harness import (
    ErrorRecord,
    SpatialStudy,
    SuperresResult,
    TemporalStudy,
    spatial_convergence,
    superres_sweep,
    temporal_convergence,
)
from .lie import (
    bracket_collapse_identity,
    compare_with_transcription,
    constants_file_text,
    default_seed,
    derivation_report,
    frozen_coefficients,
    newton_solve,
    order_conditions,
    quadruple_identity_check,
    vanishing_commutators,
)
from .model import mass
from .schemes import catalog, op_count

CSV_COLUMNS = ("scheme", "h", "tau", "epsilon", "t_final",
               "e_phi", "e_rho", "e_J", "mass_drift", "wall_time", "rate")


class NumericalFailure(RuntimeError):
    """A run that completed its plumbing but failed numerically."""


# ---------------------------------------------------------------------------
# output helpers


def _fmt(x: float) -> str:
    return "%.17g" % x


def _open_output(path: str) -> tuple[TextIO, bool]:
    if path == "-" or path == "":
        return sys.stdout, False
    return open(path, "w", encoding="utf-8"), True


def _metadata_lines(cfg: RunConfig, command: str) -> list[str]:
    lines = [
        f"# diracsplit {__version__}",
        f"# command: {command}",
        f"# config-sha256: {cfg.content_hash()}",
        "# resolved config:",
    ]
    for line in cfg.to_text().splitlines():
        lines.append(f"#   {line}")
    return lines


def _record_row(r: ErrorRecord, rate: Optional[float]) -> str:
    cells = [
        r.scheme, _fmt(r.h), _fmt(r.tau), _fmt(r.epsilon), _fmt(r.t_final),
        _fmt(r.e_phi), _fmt(r.e_rho), _fmt(r.e_J), _fmt(r.mass_drift),
        _fmt(r.wall_time), "" if rate is None else _fmt(rate),
    ]
    return ",".join(cells)


def _emit(out: TextIO, lines: Sequence[str]) -> None:
    for line in lines:
        print(line, file=out)


def _diag(message: str) -> None:
    print(message, file=sys.stderr)


# ---------------------------------------------------------------------------
# gnuplot emission


def _gnuplot_script(csv_path: str, xlabel: str, xcol: int,
                    anchor: tuple[float, float]) -> str:
    """Log-log plot of the three error columns with slope guides 2/4/6.

    Guides are anchored to pass through the first data point (x0, e0).
    Requires gnuplot >= 5 (datafile commentschars, csv separator).
    """
    x0, e0 = anchor
    lines = [
        "# gnuplot >= 5",
        "set datafile separator ','",
        "set datafile commentschars '#'",
        "set logscale xy",
        f"set xlabel '{xlabel}'",
        "set ylabel 'discrete l2 error'",
        "set key left top",
        f"g2(x) = {_fmt(e0)} * (x/{_fmt(x0)})**2",
        f"g4(x) = {_fmt(e0)} * (x/{_fmt(x0)})**4",
        f"g6(x) = {_fmt(e0)} * (x/{_fmt(x0)})**6",
        f"plot '{csv_path}' using {xcol}:6 with linespoints title 'e_phi', \\",
        f"     '{csv_path}' using {xcol}:7 with linespoints title 'e_rho', \\",
        f"     '{csv_path}' using {xcol}:8 with linespoints title 'e_J', \\",
        "     g2(x) with lines dashtype 2 title 'order 2', \\",
        "     g4(x) with lines dashtype 2 title 'order 4', \\",
        "     g6(x) with lines dashtype 2 title 'order 6'",
    ]
    return "\n".join(lines) + "\n"


def _gnuplot_target(args, cfg: RunConfig) -> Optional[tuple[str, str]]:
    """Resolve (script path, csv path); validates up front so a bad
    combination fails before any computation is spent."""
    path = args.gnuplot if args.gnuplot is not None else cfg.gnuplot_path
    if not path:
        return None
    csv_path = args.output if args.output is not None else cfg.csv_path
    if csv_path in ("", "-"):
        raise ConfigError("--gnuplot requires --output FILE (the script references the CSV)")
    return path, csv_path


def _maybe_gnuplot(target: Optional[tuple[str, str]], xlabel: str, xcol: int,
                   anchor: tuple[float, float]) -> None:
    if target is None:
        return
    path, csv_path = target
    Path(path).write_text(_gnuplot_script(csv_path, xlabel, xcol, anchor),
                          encoding="utf-8")
    _diag(f"wrote gnuplot script to {path}")


# ---------------------------------------------------------------------------
# subcommands


def _load_config(args) -> RunConfig:
    if args.config is None:
        cfg = default_config()
    else:
        cfg = parse_config(Path(args.config).read_text(encoding="utf-8"))
    overrides = {}
    if getattr(args, "workers", None) is not None:
        overrides["workers"] = args.workers
    if getattr(args, "cache_dir", None) is not None:
        overrides["cache_dir"] = args.cache_dir
    if overrides:
        from dataclasses import replace

        cfg = replace(cfg, **overrides)
    return cfg


def _out_stream(args, cfg: RunConfig) -> tuple[TextIO, bool]:
    path = args.output if args.output is not None else cfg.csv_path
    return _open_output(path)


def _cmd_solve(args) -> int:
    cfg = _load_config(args)
    problem = cfg.problem()
    n = round(cfg.t_final / cfg.tau)
    if n < 1 or abs(n * cfg.tau - cfg.t_final) > 1e-9 * max(1.0, cfg.t_final):
        raise ConfigError(f"tau = {cfg.tau!r} does not divide t_final = {cfg.t_final!r}")
    from .schemes import evolve
    from .spectral import build_cache

    spec = catalog(cfg.scheme)
    field = problem.initial.copy()
    m0 = mass(field)
    cache = build_cache(problem.params, problem.grid)
    start = time.perf_counter()
    evolve(field, cfg.tau, 0.0, n, spec, problem.potential, cache)
    wall = time.perf_counter() - start
    field.check_finite()
    m1 = mass(field)
    drift = abs(m1 - m0) / m0 if m0 else 0.0
    if args.state_out:
        from .harness import ReferenceProtocol, _reference_header, _write_reference

        header = _reference_header(problem, cfg.t_final,
                                   ReferenceProtocol(scheme=cfg.scheme, tau=cfg.tau))
        _write_reference(Path(args.state_out), header, field.values)
        _diag(f"wrote final state to {args.state_out}")
    out, close = _out_stream(args, cfg)
    try:
        _emit(out, _metadata_lines(cfg, "solve"))
        _emit(out, [
            f"scheme={cfg.scheme} steps={n} tau={_fmt(cfg.tau)} t_final={_fmt(cfg.t_final)} "
            f"mass={_fmt(m1)} mass_drift={_fmt(drift)} wall_time={_fmt(wall)}"
        ])
    finally:
        if close:
            out.close()
    return 0


def _cmd_converge_time(args) -> int:
    cfg = _load_config(args)
    gnuplot = _gnuplot_target(args, cfg)
    problem = cfg.problem()
    study: TemporalStudy = temporal_convergence(
        cfg.scheme, cfg.taus, problem, cfg.t_final, cfg.reference_protocol(),
        floor_factor=cfg.floor_factor, cache_dir=cfg.resolved_cache_dir(),
        workers=cfg.workers,
    )
    out, close = _out_stream(args, cfg)
    try:
        _emit(out, _metadata_lines(cfg, "converge-time"))
        _emit(out, [",".join(CSV_COLUMNS)])
        for r, rate in zip(study.records, study.rates_phi):
            _emit(out, [_record_row(r, rate)])
        for name, fit in (("e_phi", study.fit_phi), ("e_rho", study.fit_rho),
                          ("e_J", study.fit_J)):
            order = "saturated" if fit.saturated else _fmt(fit.order)
            _emit(out, [f"# fitted-order {name}: {order} (floor {_fmt(fit.floor)}, "
                        f"points {list(fit.points_used)})"])
    finally:
        if close:
            out.close()
    first = study.records[0]
    _maybe_gnuplot(gnuplot, "tau", 3, (first.tau, max(first.e_phi, 1e-300)))
    if study.saturated:
        _diag("saturated: every error is within the floor; no order can be claimed")
        return 2
    return 0


def _cmd_converge_space(args) -> int:
    cfg = _load_config(args)
    gnuplot = _gnuplot_target(args, cfg)

    def factory(h: float):
        from dataclasses import replace

        m = round((cfg.b - cfg.a) / h)
        return replace(cfg, M=m).problem()

    study: SpatialStudy = spatial_convergence(
        cfg.scheme, cfg.h_list, factory, cfg.space_tau, cfg.t_final, cfg.reference_h,
        cache_dir=cfg.resolved_cache_dir(), workers=cfg.workers,
    )
    out, close = _out_stream(args, cfg)
    try:
        _emit(out, _metadata_lines(cfg, "converge-space"))
        _emit(out, [",".join(CSV_COLUMNS)])
        # the rate column carries the successive error drop e_{k-1}/e_k:
        # spectral accuracy has no algebraic order to fit
        for r, ratio in zip(study.records, study.ratios):
            _emit(out, [_record_row(r, ratio)])
    finally:
        if close:
            out.close()
    first = study.records[0]
    _maybe_gnuplot(gnuplot, "h", 2, (first.h, max(first.e_phi, 1e-300)))
    return 0


def _cmd_superres(args) -> int:
    cfg = _load_config(args)
    gnuplot = _gnuplot_target(args, cfg)
    spec = cfg.sweep_spec()

    def factory(eps):
        return cfg.problem(epsilon=float(eps))

    result: SuperresResult = superres_sweep(
        spec, cfg.sweep_t, scheme=cfg.scheme, problem_factory=factory,
        cache_dir=cfg.resolved_cache_dir(), workers=cfg.workers,
    )
    out, close = _out_stream(args, cfg)
    try:
        _emit(out, _metadata_lines(cfg, "superres"))
        _emit(out, [",".join(CSV_COLUMNS)])
        for i, j, r in result.cells:
            _emit(out, [_record_row(r, None)])
        # paper-shaped matrix block: rows epsilon (descending), columns tau
        taus = "  ".join(_fmt(t) for t in result.taus)
        _emit(out, [f"# matrix e_phi: columns tau = {taus}"])
        cell_map = result.cell_map()
        for i, eps in enumerate(result.epsilons):
            row = [
                _fmt(cell_map[(i, j)].e_phi) if (i, j) in cell_map else "."
                for j in range(len(result.taus))
            ]
            _emit(out, [f"# eps={_fmt(eps)}: " + "  ".join(row)])
        _emit(out, ["# max-over-eps: " + "  ".join(_fmt(v) for v in result.column_max)])
        _emit(out, ["# rates: " + "  ".join(
            "-" if r is None else _fmt(r) for r in result.rates
        )])
    finally:
        if close:
            out.close()
    _maybe_gnuplot(gnuplot, "tau", 3, (result.taus[0], max(result.column_max[0], 1e-300)))
    return 0


def _cmd_coeffs(args) -> int:
    tol = 1e-13
    if args.verify:
        names = ("c0", "c1", "c2", "c3", "c4")
        frozen = frozen_coefficients()
        exact = [abs(float(p.evaluate_exact(frozen))) for p in order_conditions()]
        lines = ["frozen splitting coefficients (17 significant digits):"]
        lines += [f"  {n} = {_fmt(v)}" for n, v in zip(names, frozen)]
        lines.append("residuals of the five order conditions at the frozen values:")
        lines += [f"  a{i + 1}: {r:.3e}" for i, r in enumerate(exact)]
        worst = max(exact)
        ok = worst <= tol
        lines.append(f"max |residual| = {worst:.3e} {'<=' if ok else '>'} {tol:g}: "
                     f"{'PASS' if ok else 'FAIL'}")
        print("\n".join(lines))
        return 0 if ok else 2
    result = newton_solve(default_seed())
    print(derivation_report(result))
    frozen = frozen_coefficients()
    dev = max(abs(a - b) for a, b in zip(result.root, frozen))
    print(f"max deviation from the frozen double-precision values: {dev:.3e}")
    constants_text = constants_file_text(result.root)
    print(constants_text, end="")
    if args.constants_out:
        Path(args.constants_out).write_text(constants_text, encoding="utf-8")
        _diag(f"wrote constants to {args.constants_out}")
    if not result.converged or result.max_residual() > tol or dev > tol:
        _diag("derivation failed to reproduce the frozen constants within tolerance")
        return 2
    return 0


def _cmd_opcount(args) -> int:
    spec = catalog(args.scheme)
    n_t, n_w = op_count(spec)
    print(f"T={n_t} W={n_w}")
    if spec.note:
        _diag(spec.note)
    return 0


def _cmd_verify_lie(args) -> int:
    checks: list[tuple[str, bool, str]] = []
    in_quotient = bracket_collapse_identity(in_quotient=True)
    in_free = bracket_collapse_identity(in_quotient=False)
    checks.append(("bracket collapse holds in the quotient", in_quotient, ""))
    checks.append(("bracket collapse fails in the free algebra", not in_free, ""))
    for label, vanished in vanishing_commutators().items():
        checks.append((f"commutator {label} reduces to zero", vanished, ""))
    quad = quadruple_identity_check(args.trials, seed=args.seed)
    checks.append((f"quadruple identity on {args.trials} random integer matrix sets",
                   quad, ""))
    comparisons = compare_with_transcription()
    for comp in comparisons:
        if comp.match:
            checks.append((f"table cell {comp.stage}/{comp.cell} matches exactly",
                           True, ""))
        else:
            note = f"exact discrepancy {comp.discrepancy.canonical()}"
            expected = comp.cell == "[W,T,T,T,W]"
            checks.append((f"table cell {comp.stage}/{comp.cell} differs", expected, note))
    all_ok = all(ok for _, ok, _ in checks)
    for name, ok, note in checks:
        suffix = f" ({note})" if note else ""
        print(f"{'PASS' if ok else 'FAIL'} {name}{suffix}")
    print(f"{'PASS' if all_ok else 'FAIL'} lie-engine invariant suite")
    return 0 if all_ok else 2


# ---------------------------------------------------------------------------
# argument parsing and dispatch


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diracsplit",
        description="Time-splitting spectral solvers for the Dirac equation: "
                    "benchmarks, coefficient derivation and algebra checks.",
    )
    parser.add_argument("--version", action="version", version=f"diracsplit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_run_args(p, output=True):
        p.add_argument("-c", "--config", help="path to a run configuration file")
        p.add_argument("--workers", type=int, help="override the worker count")
        p.add_argument("--cache-dir", help="override the reference cache directory")
        if output:
            p.add_argument("-o", "--output",
                           help="data output path ('-' for stdout, the default)")
            p.add_argument("--gnuplot", nargs="?", const="plot.gp",
                           help="also write a gnuplot (>= 5) script to this path")

    p = sub.add_parser("solve", help="propagate once and print a summary line")
    add_run_args(p)
    p.add_argument("--state-out", help="dump the final spinor field to this path")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("converge-time", help="temporal convergence study (CSV)")
    add_run_args(p)
    p.set_defaults(func=_cmd_converge_time)

    p = sub.add_parser("converge-space", help="spatial convergence study (CSV)")
    add_run_args(p)
    p.set_defaults(func=_cmd_converge_space)

    p = sub.add_parser("superres", help="(epsilon, tau) error sweep (CSV + matrix)")
    add_run_args(p)
    p.set_defaults(func=_cmd_superres)

    p = sub.add_parser("coeffs", help="derive or verify the compact sixth-order constants")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--derive", action="store_true",
                       help="re-derive the constants from the order conditions")
    group.add_argument("--verify", action="store_true",
                       help="check the frozen constants against the order conditions")
    p.add_argument("--constants-out", help="also write the constants file here")
    p.set_defaults(func=_cmd_coeffs)

    p = sub.add_parser("opcount", help="print a scheme's fused exponential counts")
    p.add_argument("scheme", help="catalog scheme name, e.g. S6c")
    p.set_defaults(func=_cmd_opcount)

    p = sub.add_parser("verify-lie", help="run the algebra invariant suite")
    p.add_argument("--trials", type=int, default=100,
                   help="random trials for the quadruple identity (default 100)")
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.set_defaults(func=_cmd_verify_lie)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, KeyError) as exc:
        _diag(f"error: {exc.args[0] if exc.args else exc}")
        return 1
    except ValueError as exc:
        _diag(f"error: {exc}")
        return 1
    except OSError as exc:
        _diag(f"error: {exc}")
        return 1
    except FloatingPointError as exc:
        _diag(f"numerical failure: {exc}")
        return 2
    except NumericalFailure as exc:
        _diag(f"numerical failure: {exc}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
