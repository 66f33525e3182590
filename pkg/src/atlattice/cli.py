"""Command-line front end: ``atlattice {segment,cell,profile1d,sweep,check}``.

Exit codes: 0 success, 2 usage or input error, 3 solver stopped at the
iteration cap, 4 invariant failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys

import numpy as np

from . import cell, checks
from ._validation import check_int, check_positive, parse_float_list
from .energy import EnergyParams, energy_breakdown, step_datum_1d
from .lattice import Grid, ufield
from .pgm import PGMError, ingest_pgm, rescale, write_pgm
from .solver import SolveConfig, SolverError, alternate_minimize

log = logging.getLogger("atlattice")

EXIT_OK, EXIT_USAGE, EXIT_NONCONVERGED, EXIT_INVARIANT = 0, 2, 3, 4

DEFAULTS = {
    "segment": {"ell": "0.125", "eta": 0.0, "fidelity": 1.0, "tol": 1e-8, "max_iters": 200},
    "cell": {"ell": "1", "T": "32,64,128", "angles": "0,15,30,45,60,75,90", "tol": 1e-12},
    "profile1d": {"ell": "0.25,0.5,1,2,4", "ns": "1,2"},
    "sweep": {"ell": "0.0625,1,64", "sites": 512, "height": 10.0, "eta": 0.0, "fidelity": 1.0,
              "tol": 1e-8, "max_iters": 500},
    "check": {"seed": 0},
}
COMMON = {"out": ".", "seed": 0}

# config-file keys and how to read them
KEYS = {
    "input": str, "out": str, "ell": str, "delta": float, "epsilon": float, "eta": float,
    "fidelity": float, "tol": float, "max_iters": int, "seed": int, "T": str, "angles": str,
    "height": float, "sites": int, "ns": str, "policy": str, "budget": int,
}

PHI_HEADER = ["ell", "angle_deg", "nu_x", "nu_y", "T", "phi_T", "phi_extrapolated",
              "lower_bound_ok", "upper_bound_ok"]
CVALS_HEADER = ["ell", "n", "c_closed", "c_numeric_N200", "abs_diff", "root_r"]
REGIMES_HEADER = ["ell", "delta", "epsilon", "F", "G", "fidelity", "total", "min_v",
                  "jump_detected", "iterations", "stop"]
TRACE_HEADER = ["iter", "F", "G", "fidelity", "total"]


class UsageError(Exception):
    pass


def read_config(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment; unknown keys are rejected."""
    if not os.path.exists(path):
        raise UsageError(f"config file not found: {path}")
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key = value")
            key, val = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in KEYS:
                raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                out[key] = KEYS[key](val)
            except ValueError as exc:
                raise UsageError(f"{path}:{lineno}: bad value for {key}: {val!r}") from exc
    return out


def resolve(args) -> dict:
    """Merge command line over config file over defaults."""
    merged = dict(COMMON)
    merged.update(DEFAULTS[args.command])
    if args.config:
        merged.update(read_config(args.config))
    for key in KEYS:
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    return merged


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def _outdir(cfg):
    out = cfg["out"]
    os.makedirs(out, exist_ok=True)
    return out


def _solve_config(cfg):
    return SolveConfig(max_outer_iters=check_int(cfg["max_iters"], "max_iters"),
                       rel_energy_tol=check_positive(cfg["tol"], "tol"))


def _params(cfg, delta):
    if cfg.get("epsilon") is not None:
        eps = check_positive(cfg["epsilon"], "epsilon")
    else:
        ells = parse_float_list(cfg["ell"], "ell")
        if len(ells) != 1:
            raise UsageError("segment takes a single --ell value")
        eps = delta / check_positive(ells[0], "ell")
    return EnergyParams(eps, delta, check_positive(cfg["eta"], "eta", allow_zero=True),
                        check_positive(cfg["fidelity"], "fidelity", allow_zero=True))


def cmd_segment(cfg) -> int:
    path = cfg.get("input")
    if not path:
        raise UsageError("segment needs an input PGM file")
    if not os.path.exists(path):
        raise UsageError(f"input file not found: {path}")
    g = ingest_pgm(path)
    if cfg.get("delta") is not None:
        grid = Grid(check_positive(cfg["delta"], "delta"), g.grid.shape, g.grid.mask, g.grid.origin)
        g = ufield(grid, g.values)
    params = _params(cfg, g.grid.delta)
    res = alternate_minimize(g, params, _solve_config(cfg))
    out = _outdir(cfg)
    u_img, (lo, hi) = rescale(res.u.to_array())
    write_pgm(os.path.join(out, "u.pgm"), u_img)
    write_pgm(os.path.join(out, "v.pgm"), res.v.to_array())
    rows = []
    for r in res.trace:
        d = r.as_row()
        rows.append([d[k] for k in TRACE_HEADER])
    write_csv(os.path.join(out, "trace.csv"), TRACE_HEADER, rows)
    fin = res.final
    summary = (f"iterations={res.n_iter} stop={res.stop_reason} total={fin.total!r} "
               f"min_v={float(res.v.values.min())!r} u_min={lo!r} u_max={hi!r}")
    with open(os.path.join(out, "summary.txt"), "w") as fh:
        fh.write(summary + "\n")
    print(summary)
    return EXIT_OK if res.converged else EXIT_NONCONVERGED


def cmd_cell(cfg) -> int:
    ells = parse_float_list(cfg["ell"], "ell")
    angles = parse_float_list(cfg["angles"], "angles")
    Ts = parse_float_list(cfg["T"], "T")
    for e in ells:
        check_positive(e, "ell")
    policy = cfg.get("policy", "flat")
    rows = cell.regime_report(ells, angles, Ts, policy=policy, budget=cfg.get("budget", 200),
                              config=SolveConfig(linear_tol=check_positive(cfg["tol"], "tol")))
    out = _outdir(cfg)
    table = []
    failed = False
    for r in rows:
        # the upper bound is asserted for coordinate and diagonal directions only
        strict = cell.is_lattice_direction(r.nu)
        failed |= not r.lower_bound_ok or (strict and not r.upper_bound_ok)
        table.append([r.ell, r.angle_deg, float(r.nu[0]), float(r.nu[1]), r.T, r.phi_T,
                      r.phi_extrapolated, r.lower_bound_ok, r.upper_bound_ok])
    write_csv(os.path.join(out, "phi.csv"), PHI_HEADER, table)
    log.info("wrote %d rows to %s", len(table), os.path.join(out, "phi.csv"))
    return EXIT_INVARIANT if failed else EXIT_OK


def cmd_profile1d(cfg) -> int:
    ells = parse_float_list(cfg["ell"], "ell")
    ns = [int(n) for n in parse_float_list(cfg["ns"], "ns")]
    rows = []
    failed = False
    for ell in ells:
        for n in ns:
            closed = cell.c_ell_closed_form(ell, n)
            numeric = cell.c_ell_numeric(ell, n, 200)[0]
            diff = abs(closed - numeric)
            failed |= diff > 1e-6
            rows.append([ell, n, closed, numeric, diff, cell.profile_root(ell, n)])
    write_csv(os.path.join(_outdir(cfg), "cvals.csv"), CVALS_HEADER, rows)
    return EXIT_INVARIANT if failed else EXIT_OK


def sweep_rows(ells, sites=512, height=10.0, delta=None, eta=0.0, fidelity=1.0, config=None):
    """One segmentation of the 1D step datum per ell at fixed delta."""
    delta = 1.0 / sites if delta is None else delta
    grid = Grid.from_shape(sites, delta)
    g = step_datum_1d(grid, 0.5 * sites * delta, height)
    rows = []
    for ell in ells:
        p = EnergyParams.from_ell(ell, delta, eta=eta, fidelity_weight=fidelity)
        res = alternate_minimize(g, p, config)
        e = energy_breakdown(res.u, res.v, p.evaluation_mode(), g=g)
        vmin = float(res.v.values.min())
        rows.append([float(ell), delta, p.epsilon, e.bulk, e.surface, e.fidelity, e.total, vmin,
                     vmin < 0.5, res.n_iter, res.stop_reason])
    return rows


def cmd_sweep(cfg) -> int:
    ells = parse_float_list(cfg["ell"], "ell")
    for e in ells:
        check_positive(e, "ell")
    sites = check_int(cfg["sites"], "sites", minimum=4)
    delta = None if cfg.get("delta") is None else check_positive(cfg["delta"], "delta")
    rows = sweep_rows(ells, sites, check_positive(cfg["height"], "height", allow_zero=True), delta,
                      check_positive(cfg["eta"], "eta", allow_zero=True),
                      check_positive(cfg["fidelity"], "fidelity", allow_zero=True), _solve_config(cfg))
    write_csv(os.path.join(_outdir(cfg), "regimes.csv"), REGIMES_HEADER, rows)
    return EXIT_OK if all(r[-1] == "tolerance" for r in rows) else EXIT_NONCONVERGED


def cmd_check(cfg) -> int:
    results = checks.run_all(seed=int(cfg["seed"]))
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{r.name:<{width}}  {'PASS' if r.ok else 'FAIL'}  {r.detail}")
    return EXIT_OK if all(r.ok for r in results) else EXIT_INVARIANT


COMMANDS = {"segment": cmd_segment, "cell": cmd_cell, "profile1d": cmd_profile1d,
            "sweep": cmd_sweep, "check": cmd_check}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="atlattice", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", metavar="PATH")
        p.add_argument("--out", metavar="DIR")
        p.add_argument("--seed", type=int)
        if name == "check":
            continue
        p.add_argument("--ell", help="ratio delta/epsilon; comma list where several are allowed")
        p.add_argument("--tol", type=float)
        if name in ("segment", "sweep"):
            p.add_argument("--delta", type=float)
            p.add_argument("--eta", type=float)
            p.add_argument("--max-iters", dest="max_iters", type=int)
            p.add_argument("--fidelity", type=float)
        if name == "segment":
            p.add_argument("input", nargs="?")
            p.add_argument("--epsilon", type=float)
        if name == "sweep":
            p.add_argument("--height", type=float)
            p.add_argument("--sites", type=int)
        if name == "cell":
            p.add_argument("--T", dest="T", help='cube sides, e.g. "32,64,128"')
            p.add_argument("--angles", help='normal angles in degrees, e.g. "0,15,90"')
            p.add_argument("--policy", choices=["flat", "local-search"])
            p.add_argument("--budget", type=int)
        if name == "profile1d":
            p.add_argument("--ns", help='dimensions n, e.g. "1,2"')
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = resolve(args)
        return COMMANDS[args.command](cfg)
    except (UsageError, PGMError, ValueError, TypeError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except AssertionError as exc:
        print(f"invariant failure: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
