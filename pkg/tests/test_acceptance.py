"""Acceptance criteria, one test each; every test prints a PASS/FAIL line."""

import math
import time

import numpy as np
import pytest

from atlattice import checks
from atlattice.cell import (CellSpec, c_ell_closed_form, c_ell_numeric, extrapolate, is_lattice_direction,
                            nu_from_angle, regime_report, solve_cell)
from atlattice.cli import sweep_rows
from atlattice.energy import EnergyParams, recovery_pair_1d, total_energy
from atlattice.lattice import build_grid
from atlattice.solver import SolveConfig

GOLD = (1 + 5**0.5) / 2


def _crit_1():
    closed = c_ell_closed_form(1, 1)
    numeric = c_ell_numeric(1, 1, 200)[0]
    ok = abs(closed - 1.6180339887) <= 1e-9 and abs(numeric - closed) <= 1e-6
    return ok, f"closed {closed:.12f}, numeric {numeric:.12f}", 0.1


def _crit_2():
    worst = max(abs(c_ell_closed_form(l, n) - c_ell_numeric(l, n, 200)[0])
                for l in (0.25, 0.5, 1, 2, 4) for n in (1, 2))
    return worst <= 1e-6, f"max |closed - numeric| = {worst:.2e}", 1.0


def _crit_3():
    phi64 = solve_cell(CellSpec(64, [0.0, 1.0], 1.0)).phi
    Ts = (32, 64, 128)
    ext = extrapolate(Ts, [solve_cell(CellSpec(T, [0.0, 1.0], 1.0)).phi for T in Ts])
    r1, r2 = abs(phi64 - GOLD) / GOLD, abs(ext - GOLD) / GOLD
    return r1 < 0.02 and r2 < 0.005, f"phi_64 {phi64:.6f} (rel {r1:.2%}), extrapolated {ext:.7f} (rel {r2:.3%})", 10.0


def _crit_4():
    phi = solve_cell(CellSpec(64, nu_from_angle(45), 1.0)).phi
    ref = math.sqrt(2) * c_ell_closed_form(1, 2)
    rel = abs(phi - ref) / ref
    return rel < 0.03, f"phi_64 {phi:.6f} vs {ref:.6f} (rel {rel:.2%})", 30.0


def _crit_5():
    T = 64
    rows = regime_report([0.1, 0.5, 1, 2, 8], [0, 30, 45, 60, 90], [T])
    bad = []
    for r in rows:
        if r.phi_T < max(r.ell / 2, (T - math.sqrt(2)) / T):
            bad.append((r.ell, r.angle_deg, "lower"))
        cap = float(np.max(np.abs(r.nu))) * (1 + 2 / r.ell**2) * (1 + 5 / T)
        if is_lattice_direction(r.nu) and r.phi_T / r.ell > cap:
            bad.append((r.ell, r.angle_deg, "upper"))
    return not bad, f"{len(rows)} rows, violations {bad}", 300.0


def _crit_6():
    small = c_ell_closed_form(0.01, 1)
    big = c_ell_closed_form(10, 1) / 10
    ok = abs(small - 1) <= 1e-2 and 1 <= big <= 1 + 1.1 / 100
    return ok, f"c(0.01) = {small:.5f}, c(10)/10 = {big:.5f}", 0.1


def _crit_7():
    sub, sup = sweep_rows([1 / 16, 64], sites=512, height=10.0, config=SolveConfig(max_outer_iters=500))
    total, jump_sub, jump_sup = sub[6], sub[8], sup[8]
    ok = abs(total - 1) <= 0.15 and jump_sub and not jump_sup
    return ok, f"ell=1/16 total {total:.4f} jump {jump_sub}; ell=64 jump {jump_sup}", 30.0


def _crit_8():
    ok, detail = checks.suite_interpolation_bound(np.random.default_rng(8), trials=200)
    return ok, detail, 5.0


def _crit_9():
    rng = np.random.default_rng(9)
    ok1, d1 = checks.suite_solver_oracle(rng, trials=10)
    ok2, d2 = checks.suite_monotone_trace(rng, trials=50)
    return ok1 and ok2, f"{d1}; {d2}", 10.0


def _crit_10():
    ok, detail = checks.suite_rescaling(np.random.default_rng(10), trials=100)
    return ok, detail, 1.0


def _crit_11():
    eps = 1 / 64
    p = EnergyParams(eps, eps / 16)
    u, v = recovery_pair_1d(build_grid(0, 1, p.delta), 0.5, 1.0, p)
    e = total_energy(u, v, p)
    return 1 - 1e-6 <= e <= 1.1, f"energy {e:.5f}", 1.0


CRITERIA = {
    1: ("golden-ratio constant", _crit_1),
    2: ("closed form vs oracle", _crit_2),
    3: ("coordinate cell problem", _crit_3),
    4: ("diagonal cell problem", _crit_4),
    5: ("regime bounds", _crit_5),
    6: ("regime limits of c_ell", _crit_6),
    7: ("1D step segmentation", _crit_7),
    8: ("interpolation bound", _crit_8),
    9: ("solver oracle", _crit_9),
    10: ("rescaling identity", _crit_10),
    11: ("recovery-pair bound", _crit_11),
}


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, capsys):
    name, fn = CRITERIA[number]
    t0 = time.perf_counter()
    ok, detail, limit = fn()
    elapsed = time.perf_counter() - t0
    in_time = elapsed < limit
    passed = ok and in_time
    with capsys.disabled():
        print(f"\n[{'PASS' if passed else 'FAIL'}] {number:2d} {name}: {detail} "
              f"({elapsed:.2f} s, limit {limit:g} s)")
    assert ok, detail
    assert in_time, f"took {elapsed:.2f} s, limit {limit:g} s"
