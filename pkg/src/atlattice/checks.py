"""Randomized property suites, runnable from the command line.

Each suite takes a ``numpy.random.Generator`` and returns ``(ok, detail)``.
Tolerances are chosen so the verdicts do not depend on the seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import cell, energy, lattice, solver
from .energy import EnergyParams
from .lattice import Grid, ufield, vfield


def dense_quadratic(q, size):
    """Hessian ``H`` and linear part ``g`` of a quadratic ``q`` on R^size, by polarization.

    ``q(x) = x.H.x / 2 + g.x + q(0)``; only evaluations of ``q`` are used.
    """
    e = np.eye(size)
    q0 = q(np.zeros(size))
    qi = np.array([q(e[i]) for i in range(size)])
    H = np.empty((size, size))
    for i in range(size):
        H[i, i] = q(2 * e[i]) - 2 * qi[i] + q0
        for j in range(i + 1, size):
            H[i, j] = H[j, i] = q(e[i] + e[j]) - qi[i] - qi[j] + q0
    g = qi - q0 - 0.5 * np.diag(H)
    return H, g


def dense_u_minimizer(grid, v, g, params):
    def q(x):
        u = ufield(grid, x)
        return (energy.bulk_energy(u, v, params) + energy.eta_energy(u, params)
                + energy.data_term(u, g, params))
    H, lin = dense_quadratic(q, grid.size)
    return np.linalg.solve(H, -lin)


def dense_v_minimizer(grid, u, params):
    def q(x):
        # evaluated off the admissible set, so the V-kind check is bypassed
        w = ufield(grid, x)
        return energy.bulk_energy(u, w, params) + energy.surface_energy(w, params)
    H, lin = dense_quadratic(q, grid.size)
    return np.linalg.solve(H, -lin)


def _random_pair_1d(rng, sites):
    delta = rng.uniform(0.01, 0.1)
    eps = delta * rng.uniform(1.0, 8.0)
    grid = Grid.from_shape(sites, delta, origin=[rng.uniform(-1, 1)])
    amp = 10.0 ** rng.uniform(-1, 1.5)
    u = ufield(grid, amp * rng.standard_normal(sites).cumsum() * rng.choice([0.1, 1.0]))
    v = vfield(grid, rng.uniform(0, 1, sites) ** rng.uniform(0.2, 3))
    return grid, u, v, EnergyParams(eps, delta)


def suite_lattice_partition(rng, trials=50):
    for _ in range(trials):
        shape = tuple(rng.integers(1, 9, size=rng.integers(1, 3)))
        grid = Grid.from_shape(shape, 0.5)
        sel = rng.random(grid.size) < rng.uniform(0.1, 1.0)
        inner, bnd = lattice.split_interior_boundary(grid, sel)
        if set(inner) & set(bnd) or sorted(set(inner) | set(bnd)) != list(np.flatnonzero(sel)):
            return False, f"partition broken on shape {shape}"
    return True, f"{trials} random regions"


def suite_truncation(rng, trials=50):
    for _ in range(trials):
        grid, u, v, p = _random_pair_1d(rng, 32)
        m1, m2 = sorted(rng.uniform(0, 5, 2))
        t1 = lattice.truncate(u, m1)
        if not np.array_equal(lattice.truncate(t1, m1).values, t1.values):
            return False, "truncate not idempotent"
        if np.any(np.abs(t1.values) > np.abs(lattice.truncate(u, m2).values) + 1e-15):
            return False, "truncate not monotone in m"
        if energy.total_energy(t1, v, p) > energy.total_energy(u, v, p) * (1 + 1e-12) + 1e-14:
            return False, "energy increased under truncation"
    return True, f"{trials} random fields"


def suite_interpolation_bound(rng, trials=200):
    """Lattice energy dominates the continuum energy of the affine interpolants."""
    worst = math.inf
    for _ in range(trials):
        grid, u, v, p = _random_pair_1d(rng, 64)
        x = grid.coords[:, 0]
        a, b = x[0], x[-1]
        e = energy.total_energy(u, v, p)
        at = energy.continuum_at_1d(lattice.affine_interpolate_1d(u), lattice.affine_interpolate_1d(v),
                                    (a + 2 * p.delta, b - 2 * p.delta), p.epsilon)
        worst = min(worst, e - at)
        if e < at - 1e-10:
            return False, f"E = {e:.6g} < AT = {at:.6g}"
    return True, f"{trials} pairs, min margin {worst:.3g}"


def suite_rescaling(rng, trials=100):
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(1, 3))
        shape = (int(rng.integers(2, 12)),) * n
        delta = 10.0 ** rng.uniform(-2, 1)
        p = EnergyParams(delta / 10.0 ** rng.uniform(-1.5, 1.5), delta)
        grid = Grid.from_shape(shape, delta)
        w = ufield(grid, rng.standard_normal(grid.size) * 10.0 ** rng.uniform(-1, 2))
        v = vfield(grid, rng.uniform(0, 1, grid.size))
        h = energy.rescaled_energy(w, v, p)
        ref = (p.epsilon / delta) * energy.total_energy(
            ufield(grid, math.sqrt(delta / p.epsilon) * w.values), v, p)
        err = abs(h - ref) / max(abs(ref), 1e-300)
        worst = max(worst, err)
        if err > 1e-12:
            return False, f"relative error {err:.3g}"
    return True, f"{trials} fields, max rel err {worst:.2g}"


def suite_energy_symmetries(rng, trials=30):
    for _ in range(trials):
        nx, ny = (int(s) for s in rng.integers(2, 8, 2))
        delta = rng.uniform(0.05, 0.5)
        p = EnergyParams(delta * rng.uniform(0.5, 4), delta)
        grid = Grid.from_shape((nx, ny), delta)
        U = rng.standard_normal((nx, ny))
        Vv = rng.uniform(0, 1, (nx, ny))
        e = energy.total_energy(ufield(grid, U.ravel()), vfield(grid, Vv.ravel()), p)
        if e < 0:
            return False, "negative energy"
        shifted = energy.total_energy(ufield(grid, U.ravel() + rng.normal()), vfield(grid, Vv.ravel()), p)
        if not math.isclose(e, shifted, rel_tol=1e-10):
            return False, "not invariant under u + c"
        gt = Grid.from_shape((ny, nx), delta)
        swap = energy.total_energy(ufield(gt, U.T.ravel()), vfield(gt, Vv.T.ravel()), p)
        flip = energy.total_energy(ufield(grid, U[::-1].ravel()), vfield(grid, Vv[::-1].ravel()), p)
        if not (math.isclose(e, swap, rel_tol=1e-10) and math.isclose(e, flip, rel_tol=1e-10)):
            return False, "not invariant under axis swap or reflection"
    return True, f"{trials} random 2D pairs"


def suite_solver_oracle(rng, trials=10):
    worst = 0.0
    for _ in range(trials):
        sites = int(rng.integers(4, 8))
        shape = (sites * sites,) if rng.random() < 0.5 else (sites, sites)
        delta = rng.uniform(0.05, 0.3)
        p = EnergyParams(delta * rng.uniform(0.5, 4), delta, eta=rng.choice([0.0, 1e-3]),
                         fidelity_weight=rng.uniform(0.5, 5))
        grid = Grid.from_shape(shape, delta)
        g = ufield(grid, rng.standard_normal(grid.size))
        v = vfield(grid, rng.uniform(0, 1, grid.size))
        u = solver.u_step(grid, v, g, p)
        ref = dense_u_minimizer(grid, v, g, p)
        err = np.linalg.norm(u.values - ref) / max(np.linalg.norm(ref), 1e-300)
        vs = solver.v_step(grid, u, p)
        vref = dense_v_minimizer(grid, u, p)
        verr = np.linalg.norm(vs.values - vref) / np.linalg.norm(vref)
        worst = max(worst, err, verr)
        if err > 1e-8 or verr > 1e-8:
            return False, f"dense mismatch {max(err, verr):.3g}"
        if vref.min() < -1e-9 or vref.max() > 1 + 1e-9:
            return False, "maximum principle violated"
    return True, f"{trials} systems, max rel err {worst:.2g}"


def suite_monotone_trace(rng, trials=50):
    for _ in range(trials):
        sites = int(rng.integers(8, 40))
        delta = 1.0 / sites
        p = EnergyParams(delta / rng.choice([0.25, 1.0, 4.0]), delta, fidelity_weight=rng.uniform(1, 50))
        grid = Grid.from_shape(sites, delta)
        g = ufield(grid, rng.uniform(-5, 5) * (rng.random(sites) < 0.5) + 0.3 * rng.standard_normal(sites))
        res = solver.alternate_minimize(g, p, solver.SolveConfig(max_outer_iters=30))
        obj = res.objectives()
        e0 = max(obj[0], 1.0)
        if np.any(np.diff(obj) > 1e-10 * e0):
            return False, f"energy increased by {np.diff(obj).max():.3g}"
    return True, f"{trials} random data"


def suite_cell(rng, trials=6):
    for _ in range(trials):
        ang = float(rng.uniform(0, 180))
        T = int(rng.integers(8, 40))
        spec = cell.CellSpec(T, cell.nu_from_angle(ang), 1.0)
        ch = cell.flat_channel(spec)
        if not ch.path.is_strong:
            return False, f"channel at {ang:.1f} deg not strong"
    for ell in (0.25, 0.5, 1.0, 2.0, 4.0):
        d = abs(cell.c_ell_closed_form(ell, 1) - cell.c_ell_numeric(ell, 1, 200)[0])
        if d > 1e-6:
            return False, f"closed form off by {d:.3g} at ell={ell}"
    return True, "channels valid, closed form matches oracle"


@dataclass
class SuiteResult:
    name: str
    ok: bool
    detail: str


SUITES = {
    "lattice-partition": suite_lattice_partition,
    "truncation": suite_truncation,
    "interpolation-bound": suite_interpolation_bound,
    "rescaling": suite_rescaling,
    "energy-symmetries": suite_energy_symmetries,
    "solver-oracle": suite_solver_oracle,
    "monotone-trace": suite_monotone_trace,
    "cell": suite_cell,
}


def run_all(seed=0, names=None) -> list:
    out = []
    for name, fn in SUITES.items():
        if names and name not in names:
            continue
        rng = np.random.default_rng([seed, len(out)])
        try:
            ok, detail = fn(rng)
        except Exception as exc:  # a crash is a failed suite
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append(SuiteResult(name, bool(ok), detail))
    return out
