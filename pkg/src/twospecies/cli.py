"""Command-line front end: simulate, hyperbolic, compare, oracle, energy-report."""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .config import build_initial, load_config, read_state_csv
from .dynamics import velocity_min_norm, velocity_signsum
from .energy import dissipation, energy_from_cdfs, total_energy
from .errors import (CFLError, ConfigError, ConvergenceError, ConeViolationError, DimensionError,
                     DomainError, InvalidMeasureError, TwoSpeciesError)
from .hyperbolic import CdfPair, run_hyperbolic
from .oracles import KINDS as ORACLE_KINDS
from .oracles import OracleSpec, exact_energy_two_deltas, exact_state
from .quantile import StatePair, lm_norm, midpoints, moment2, reconstruct_density, wasserstein2
from .scheme import RunAborted, RunResult, run

log = logging.getLogger("twospecies")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_CONVERGENCE = 4
EXIT_NUMERICAL = 5

SUMMARY_HEADER = ["t", "energy_total", "energy_self_x", "energy_self_y", "energy_cross",
                  "dissipation", "w2_xy", "m2_x", "m2_y", "linf_x", "linf_y",
                  "projection_active", "inner_iters"]
SNAPSHOT_HEADER = ["t", "z", "X", "Y"]

EPILOG = f"""exit codes:
  {EXIT_OK}  success
  {EXIT_CONFIG}  invalid configuration, arguments or input data
  {EXIT_IO}  file could not be read or written
  {EXIT_CONVERGENCE}  inner solver did not converge (partial output is written)
  {EXIT_NUMERICAL}  numerical or domain failure during a run (partial output is written)

On failure a single JSON object {{"error", "message", "exit_code"}} is printed to stderr.
"""


def fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def write_csv(path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    text = buf.getvalue()
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def summary_rows(result: RunResult):
    for r in result.records:
        e = r.energy
        yield (r.t, e.total, e.self_x, e.self_y, e.cross, e.dissipation, r.w2_between_species,
               r.m2_x, r.m2_y, r.linf_x, r.linf_y, r.projection_active, r.inner_iters)


def snapshot_rows(snapshots):
    for t, s in snapshots:
        z = midpoints(s.n)
        for j in range(s.n):
            yield (t, z[j], s.x.values[j], s.y.values[j])


def _out(args, name) -> Path:
    return Path(args.out_dir) / name


def _write_run(args, sc, result: RunResult):
    write_csv(_out(args, sc.outputs.summary_path), SUMMARY_HEADER, summary_rows(result))
    write_csv(_out(args, sc.outputs.snapshots_path), SNAPSHOT_HEADER, snapshot_rows(result.snapshots))


def _config_dir(args) -> Path:
    return Path(args.config).resolve().parent


def command_simulate(args) -> int:
    sc = load_config(args.config, strict=args.strict, seed=args.seed)
    s0 = build_initial(sc, _config_dir(args))
    try:
        result = run(s0, sc.scheme, sc.step, sc.t_end, sc.record_every, prox=sc.prox,
                     snapshot_stride=sc.outputs.snapshot_stride, probe_h=sc.probe_h)
    except RunAborted as exc:
        _write_run(args, sc, exc.partial)
        raise exc.cause
    _write_run(args, sc, result)
    return EXIT_OK


def command_hyperbolic(args) -> int:
    sc = load_config(args.config, strict=args.strict, seed=args.seed)
    h = sc.hyperbolic
    if sc.initial.kind == "density":
        c0 = CdfPair.from_densities(sc.initial.rho, sc.initial.eta, h.x_min, h.x_max, h.nx)
    else:
        c0 = CdfPair.from_state(build_initial(sc, _config_dir(args)), h.x_min, h.x_max, h.nx)
    res = run_hyperbolic(c0, sc.t_end, h.cfl, h.record_stride, h.snapshot_stride)

    def cdf_rows():
        for t, c in res.snapshots:
            xs = c.x
            for i in range(c.nx + 1):
                yield (t, xs[i], c.f[i], c.g[i])

    write_csv(_out(args, sc.outputs.cdf_path), ["t", "x", "F", "G"], cdf_rows())
    write_csv(_out(args, sc.outputs.cdf_records_path), ["t", "l2_FG"], zip(res.times, res.energy))
    return EXIT_OK


def compare_states(a: StatePair, b: StatePair) -> list[tuple[str, float]]:
    """Node-wise and transport gaps between two states on the same grid.

    ``mean_abs_*`` is the mean node gap, which for sorted nodes equals the
    1-Wasserstein distance (the L1 gap between the CDFs).
    """
    if a.n != b.n:
        raise DimensionError(f"states have different sizes: {a.n} != {b.n}")
    dx = np.abs(a.x.values - b.x.values)
    dy = np.abs(a.y.values - b.y.values)
    wx, wy = wasserstein2(a.x, b.x), wasserstein2(a.y, b.y)
    return [("max_abs_X", float(dx.max())), ("max_abs_Y", float(dy.max())),
            ("mean_abs_X", float(dx.mean())), ("mean_abs_Y", float(dy.mean())),
            ("w2_X", wx), ("w2_Y", wy), ("w2_product", math.hypot(wx, wy))]


def command_compare(args) -> int:
    t, a = read_state_csv(args.run, args.time)
    if args.against:
        _, b = read_state_csv(args.against, t)
    else:
        b = exact_state(OracleSpec(args.oracle, t=t, n=a.n, m=args.m))
    rows = [("t", t)] + compare_states(a, b)
    write_csv(args.out, ["metric", "value"], rows)
    return EXIT_OK


def command_oracle(args) -> int:
    spec = OracleSpec(args.kind, t=args.t, n=args.n, m=args.m)
    s = exact_state(spec)
    write_csv(args.out, SNAPSHOT_HEADER, snapshot_rows([(spec.t, s)]))
    if args.energy_out:
        rep = total_energy(s)
        rows = [("t", spec.t), ("m", spec.m), ("energy_total", rep.total),
                ("energy_self_x", rep.self_x), ("energy_self_y", rep.self_y),
                ("energy_cross", rep.cross)]
        if spec.kind == "two_deltas_gf":
            e, d = exact_energy_two_deltas(spec.t)
            rows += [("energy_closed_form", e), ("dissipation_closed_form", d)]
        elif spec.kind == "overlap_gf":
            rows += [("dissipation_closed_form", 8.0 / 3.0 * (1.0 - spec.m) ** 3)]
        write_csv(args.energy_out, ["metric", "value"], rows)
    return EXIT_OK


def command_energy_report(args) -> int:
    if args.state:
        _, s = read_state_csv(args.state, args.time)
    elif args.config:
        sc = load_config(args.config, strict=args.strict, seed=args.seed)
        s = build_initial(sc, _config_dir(args))
    else:
        raise ConfigError("energy-report needs --state or --config")
    rep = total_energy(s)
    rx, ry = reconstruct_density(s.x), reconstruct_density(s.y)
    rows = [("energy_total", rep.total), ("energy_self_x", rep.self_x),
            ("energy_self_y", rep.self_y), ("energy_cross", rep.cross),
            ("energy_cdf", energy_from_cdfs(s)),
            ("dissipation_min_norm", dissipation(s, velocity_min_norm(s, args.probe_h))),
            ("dissipation_signsum", dissipation(s, velocity_signsum(s))),
            ("w2_xy", wasserstein2(s.x, s.y)), ("m2_x", moment2(s.x)), ("m2_y", moment2(s.y)),
            ("linf_x", lm_norm(rx, math.inf)), ("linf_y", lm_norm(ry, math.inf)),
            ("l2_x", lm_norm(rx, 2)), ("l2_y", lm_norm(ry, 2))]
    write_csv(args.out, ["metric", "value"], rows)
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _emit_error("UsageError", message, EXIT_CONFIG)
        raise SystemExit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out-dir", default=".", help="directory for output files (default: .)")
    common.add_argument("--seed", type=int, default=None,
                        help="seed for random_blocks initial data (overrides the config)")
    common.add_argument("--strict", action=argparse.BooleanOptionalAction, default=True,
                        help="reject unknown configuration keys (default: on)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="twospecies", description=__doc__, epilog=EPILOG,
                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("simulate", parents=[common], help="run a scenario, write summary and snapshots")
    sp.add_argument("--config", required=True)
    sp.set_defaults(func=command_simulate)

    sp = sub.add_parser("hyperbolic", parents=[common], help="run the upwind CDF solver on a scenario")
    sp.add_argument("--config", required=True)
    sp.set_defaults(func=command_hyperbolic)

    sp = sub.add_parser("compare", parents=[common], help="gaps between a run and another run or an oracle")
    sp.add_argument("--run", required=True, help="snapshot CSV (t,z,X,Y)")
    grp = sp.add_mutually_exclusive_group(required=True)
    grp.add_argument("--against", help="second snapshot CSV")
    grp.add_argument("--oracle", choices=ORACLE_KINDS)
    sp.add_argument("--m", type=float, default=0.0, help="shared atom mass for overlap oracles")
    sp.add_argument("--time", type=float, default=None, help="snapshot time (default: last)")
    sp.add_argument("--out", default="-", help="output CSV (default: stdout)")
    sp.set_defaults(func=command_compare)

    sp = sub.add_parser("oracle", parents=[common], help="write a closed-form state")
    sp.add_argument("--kind", required=True, choices=ORACLE_KINDS)
    sp.add_argument("--t", type=float, default=0.0)
    sp.add_argument("--n", type=int, default=200)
    sp.add_argument("--m", type=float, default=0.0)
    sp.add_argument("--out", default="-", help="snapshot CSV (default: stdout)")
    sp.add_argument("--energy-out", default=None, help="optional metric,value CSV with energies")
    sp.set_defaults(func=command_oracle)

    sp = sub.add_parser("energy-report", parents=[common], help="diagnostics of a single state")
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--state", help="CSV with X and Y columns")
    src.add_argument("--config", help="scenario whose initial state is reported")
    sp.add_argument("--time", type=float, default=None)
    sp.add_argument("--probe-h", type=float, default=1e-6)
    sp.add_argument("--out", default="-")
    sp.set_defaults(func=command_energy_report)
    return p


def _emit_error(kind: str, message: str, code: int) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": message, "exit_code": code}) + "\n")


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, ConvergenceError):
        return EXIT_CONVERGENCE
    if isinstance(exc, (ConfigError, InvalidMeasureError, ConeViolationError, DimensionError)):
        return EXIT_CONFIG
    if isinstance(exc, OSError):
        return EXIT_IO
    if isinstance(exc, (CFLError, DomainError, TwoSpeciesError, FloatingPointError, ArithmeticError)):
        return EXIT_NUMERICAL
    return EXIT_NUMERICAL


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (TwoSpeciesError, OSError, ArithmeticError, ValueError) as exc:
        code = exit_code_for(exc)
        if isinstance(exc, ValueError) and not isinstance(exc, TwoSpeciesError):
            code = EXIT_CONFIG
        _emit_error(type(exc).__name__, str(exc), code)
        return code


if __name__ == "__main__":
    sys.exit(main())
