"""Alternating minimization of the perturbed lattice energy.

Each half-step minimizes an SPD quadratic exactly: the u-step solves a
weighted graph-Laplacian system, the v-step a screened Poisson system.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components

from .energy import EnergyBreakdown, EnergyParams, energy_breakdown
from .lattice import Grid, ScalarField, build_grid, ufield, vfield

# overshoot of v beyond [0, 1] tolerated as round-off
CLAMP_TOL = 1e-9


class SolverError(RuntimeError):
    """Inner linear solve failed or the problem is ill-posed."""


class IndefiniteSystemError(SolverError):
    pass


class InvariantError(AssertionError):
    """A discrete maximum principle or similar guarantee was violated."""


@dataclass(frozen=True)
class SolveConfig:
    """Outer and inner stopping rules.

    ``method`` is ``"cg"`` (Jacobi-preconditioned conjugate gradient) or
    ``"direct"`` (sparse LU); ``u0``/``v0`` override the default start u = g, v = 1.
    """

    max_outer_iters: int = 200
    rel_energy_tol: float = 1e-8
    linear_tol: float = 1e-12
    max_linear_iters: int | None = None
    method: str = "cg"
    u0: np.ndarray | None = None
    v0: np.ndarray | None = None
    clamp_tol: float = CLAMP_TOL

    def __post_init__(self):
        if int(self.max_outer_iters) < 1:
            raise ValueError("max_outer_iters must be >= 1")
        if not (self.rel_energy_tol > 0 and self.linear_tol > 0):
            raise ValueError("tolerances must be > 0")
        if self.method not in ("cg", "direct"):
            raise ValueError(f"unknown linear method {self.method!r}")
        if self.clamp_tol < 0:
            raise ValueError("clamp_tol must be >= 0")


@dataclass(frozen=True, eq=False)
class BoundaryCondition:
    """Pinned values for u and v on sets of sites.

    ``t`` and ``nu`` record the jump data when the condition comes from
    :meth:`step`; generic conditions leave them as None.
    """

    u_sites: np.ndarray
    u_values: np.ndarray
    v_sites: np.ndarray
    v_values: np.ndarray
    t: float | None = None
    nu: np.ndarray | None = None

    def __post_init__(self):
        for name in ("u_sites", "v_sites"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.int64).reshape(-1))
        for name in ("u_values", "v_values"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).reshape(-1))
        if self.u_sites.shape != self.u_values.shape or self.v_sites.shape != self.v_values.shape:
            raise ValueError("pinned sites and values must have the same length")
        if self.v_values.size and (self.v_values.min() < 0 or self.v_values.max() > 1):
            raise ValueError("pinned v values must lie in [0, 1]")
        if self.nu is not None:
            nu = np.asarray(self.nu, dtype=float)
            if abs(np.linalg.norm(nu) - 1.0) > 1e-9:
                raise ValueError("nu must be a unit vector")
            object.__setattr__(self, "nu", nu)

    def check(self, grid: Grid):
        for s in (self.u_sites, self.v_sites):
            if s.size and (s.min() < 0 or s.max() >= grid.size):
                raise ValueError("pinned sites must be member sites of the grid")

    @classmethod
    def step(cls, grid: Grid, t, nu, band) -> "BoundaryCondition":
        """Jump datum ``t * 1{<x, nu> > 0}`` for u and the edge indicator for v,
        both pinned on ``band`` (boolean per site or index array)."""
        nu = np.asarray(nu, dtype=float)
        uh, vh = step_data(grid, t, nu)
        idx = np.asarray(band)
        if idx.dtype == bool:
            idx = np.flatnonzero(idx)
        return cls(idx, uh[idx], idx, vh[idx], float(t), nu)


def side_plus(points, nu) -> np.ndarray:
    """True where ``<x, nu>`` is strictly positive (beyond round-off)."""
    return np.asarray(points, dtype=float) @ np.asarray(nu, dtype=float) > 1e-9 * max(
        1.0, float(np.max(np.abs(points))) if np.size(points) else 1.0)


def jump_sites(points, nu, step) -> np.ndarray:
    """Sites with a lattice neighbour (at distance ``step``) across the line <x, nu> = 0."""
    points = np.asarray(points, dtype=float)
    s0 = side_plus(points, nu)
    out = np.zeros(len(points), dtype=bool)
    for e in ((step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)):
        out |= side_plus(points + np.array(e), nu) != s0
    return out


def step_data(grid: Grid, t, nu):
    """Extended boundary data: u = t on the positive side, v = 0 on the jump sites."""
    x = grid.coords
    uh = np.where(side_plus(x, nu), float(t), 0.0)
    vh = np.where(jump_sites(x, nu, grid.delta), 0.0, 1.0)
    return uh, vh


# --- linear algebra -------------------------------------------------------------


def laplacian(size, a, b, w) -> sp.csr_matrix:
    """Weighted graph Laplacian for bonds ``(a, b)`` with weights ``w``."""
    w = np.asarray(w, dtype=float)
    off = sp.coo_matrix((np.concatenate([-w, -w]), (np.concatenate([a, b]), np.concatenate([b, a]))),
                        shape=(size, size))
    deg = np.bincount(a, weights=w, minlength=size) + np.bincount(b, weights=w, minlength=size)
    return (off + sp.diags(deg)).tocsr()


def solve_spd(A, rhs, config: SolveConfig, x0=None) -> np.ndarray:
    """Solve ``A x = rhs`` with A sparse SPD."""
    n = A.shape[0]
    if n == 0:
        return np.zeros(0)
    if config.method == "direct":
        return np.atleast_1d(spla.spsolve(A.tocsc(), rhs))
    if not np.any(rhs) and (x0 is None or not np.any(x0)):
        return np.zeros(n)
    d = A.diagonal()
    if np.any(d <= 0):
        raise IndefiniteSystemError("non-positive diagonal entry in an SPD solve")
    M = sp.diags(1.0 / d)
    maxiter = config.max_linear_iters or max(10 * n, 1000)
    x, info = spla.cg(A, rhs, x0=x0, rtol=config.linear_tol, atol=0.0, maxiter=maxiter, M=M)
    if info != 0:
        # conjugate gradient may stall near round-off on stiff systems
        res = np.linalg.norm(A @ x - rhs)
        if not res <= 100 * config.linear_tol * np.linalg.norm(rhs):
            raise SolverError(f"conjugate gradient did not converge (info={info}, residual={res:.3e})")
    return x


def _pinned(size, sites, values):
    fixed = np.zeros(size, dtype=bool)
    val = np.zeros(size)
    if sites is not None and len(sites):
        fixed[sites] = True
        val[sites] = values
    return fixed, val


def _reduced_solve(A, rhs, fixed, val, config, x0=None):
    """Solve A x = rhs on the free sites with x = val on the fixed ones."""
    free = ~fixed
    x = val.copy()
    if not free.any():
        return x
    if fixed.any():
        rhs = rhs[free] - A[free][:, fixed] @ val[fixed]
        A = A[free][:, free]
    else:
        rhs = rhs.copy()
    guess = None if x0 is None else np.asarray(x0, dtype=float)[free]
    x[free] = solve_spd(A.tocsr(), rhs, config, guess)
    return x


def _bond_weights(grid, v, params: EnergyParams):
    a, b = grid.all_bonds
    vv = v.values
    scale = grid.delta ** (grid.n - 2)
    return a, b, scale * (0.5 * (vv[a] ** 2 + vv[b] ** 2) + params.eta)


def u_step(grid: Grid, v: ScalarField, g: ScalarField | None, params: EnergyParams,
           bc: BoundaryCondition | None = None, config: SolveConfig | None = None,
           u0=None) -> ScalarField:
    """Exact minimizer of ``u -> F(u, v) + eta-term + fidelity`` over the free sites."""
    config = config or SolveConfig()
    lam = params.fidelity_weight
    size = grid.size
    if bc is not None:
        bc.check(grid)
    fixed, val = _pinned(size, None if bc is None else bc.u_sites, None if bc is None else bc.u_values)
    a, b, w = _bond_weights(grid, v, params)
    if lam == 0:
        _require_anchor(size, a, b, w, fixed)
        gv = np.zeros(size)
    else:
        if g is None:
            raise ValueError("a datum g is required when fidelity_weight > 0")
        gv = g.values
    mass = lam * grid.delta**grid.n
    A = laplacian(size, a, b, w) + sp.diags(np.full(size, mass))
    u = _reduced_solve(A, mass * gv, fixed, val, config, u0)
    return ufield(grid, u)


def _require_anchor(size, a, b, w, fixed):
    """Without fidelity every positive-weight component needs a pinned site."""
    pos = w > 0
    adj = sp.coo_matrix((np.ones(int(pos.sum())), (a[pos], b[pos])), shape=(size, size))
    ncomp, labels = connected_components(adj, directed=False)
    anchored = np.zeros(ncomp, dtype=bool)
    anchored[labels[fixed]] = True
    if not anchored[labels[~fixed]].all():
        raise IndefiniteSystemError(
            "u-step is singular: no fidelity, and a free component has no pinned site")


def local_gradient_sq(grid: Grid, u: ScalarField) -> np.ndarray:
    """``a^i = sum over lattice neighbours of |(u^i - u^j) / delta|^2``."""
    a, b = grid.all_bonds
    d2 = ((u.values[a] - u.values[b]) / grid.delta) ** 2
    return np.bincount(a, weights=d2, minlength=grid.size) + np.bincount(b, weights=d2, minlength=grid.size)


def v_step(grid: Grid, u: ScalarField, params: EnergyParams, bc: BoundaryCondition | None = None,
           config: SolveConfig | None = None, v0=None) -> ScalarField:
    """Exact minimizer of ``v -> E(u, v)`` (unconstrained; the maximum principle keeps it in [0, 1])."""
    config = config or SolveConfig()
    size = grid.size
    d, eps, n = grid.delta, params.epsilon, grid.n
    if bc is not None:
        bc.check(grid)
    fixed, val = _pinned(size, None if bc is None else bc.v_sites, None if bc is None else bc.v_values)
    acoef = local_gradient_sq(grid, u)
    a, b = grid.all_bonds
    L = laplacian(size, a, b, np.full(a.size, eps * d ** (n - 2)))
    A = L + sp.diags(d**n * (acoef + 1.0 / eps))
    rhs = np.full(size, d**n / eps)
    v = _reduced_solve(A, rhs, fixed, val, config, v0)
    over = max(-v.min(), v.max() - 1.0, 0.0)
    if over > config.clamp_tol:
        raise InvariantError(f"v-step left [0, 1] by {over:.3e}")
    return vfield(grid, np.clip(v, 0.0, 1.0))


# --- outer loop -----------------------------------------------------------------


@dataclass
class TraceRecord:
    iteration: int
    energies: EnergyBreakdown

    def as_row(self) -> dict:
        e = self.energies
        return {"iter": self.iteration, "F": e.bulk, "G": e.surface, "fidelity": e.fidelity,
                "eta": e.eta, "total": e.total}


@dataclass
class SolveResult:
    u: ScalarField
    v: ScalarField
    trace: list = field(default_factory=list)
    n_iter: int = 0
    converged: bool = False
    stop_reason: str = ""

    def __iter__(self):
        # allows ``u, v, trace = alternate_minimize(...)``
        return iter((self.u, self.v, self.trace))

    @property
    def final(self) -> EnergyBreakdown:
        return self.trace[-1].energies

    def objectives(self) -> np.ndarray:
        return np.array([r.energies.objective for r in self.trace])


def alternate_minimize(g: ScalarField, params: EnergyParams, config: SolveConfig | None = None,
                       bc: BoundaryCondition | None = None) -> SolveResult:
    """Staggered minimization of the perturbed energy, u-step first.

    Stops when the relative energy decrease ``(E_{k-1} - E_k) / max(E_0, 1)``
    falls below ``config.rel_energy_tol`` or after ``max_outer_iters`` sweeps.
    The trace holds the starting energy followed by one record per sweep.
    """
    config = config or SolveConfig()
    grid = g.grid
    if bc is not None:
        bc.check(grid)
    u_vals = g.values.copy() if config.u0 is None else np.asarray(config.u0, dtype=float).copy()
    v_vals = np.ones(grid.size) if config.v0 is None else np.asarray(config.v0, dtype=float).copy()
    if bc is not None:
        u_vals[bc.u_sites] = bc.u_values
        v_vals[bc.v_sites] = bc.v_values
    u, v = ufield(grid, u_vals), vfield(grid, v_vals)
    use_g = g if params.fidelity_weight > 0 else None

    def record(k):
        return TraceRecord(k, energy_breakdown(u, v, params, g=use_g))

    trace = [record(0)]
    e0 = trace[0].energies.objective
    scale = max(e0, 1.0) if math.isfinite(e0) else 1.0
    converged = False
    k = 0
    for k in range(1, int(config.max_outer_iters) + 1):
        u = u_step(grid, v, g, params, bc, config, u0=u.values)
        v = v_step(grid, u, params, bc, config, v0=v.values)
        trace.append(record(k))
        drop = trace[-2].energies.objective - trace[-1].energies.objective
        if drop / scale < config.rel_energy_tol:
            converged = True
            break
    if bc is None and params.fidelity_weight > 0:
        gmax = float(np.max(np.abs(g.values)))
        umax = float(np.max(np.abs(u.values)))
        if umax > gmax + 1e-8 * max(1.0, gmax):
            raise InvariantError(f"|u|_inf = {umax} exceeds |g|_inf = {gmax}")
    return SolveResult(u, v, trace, k, converged, "tolerance" if converged else "max_iters")


# --- localized cube problems ----------------------------------------------------


def rotated_cube_coords(points, nu):
    """Coordinates ``(<x, nu_perp>, <x, nu>)`` with ``nu_perp = (-nu_2, nu_1)``."""
    nu = np.asarray(nu, dtype=float)
    perp = np.array([-nu[1], nu[0]])
    p = np.asarray(points, dtype=float)
    return p @ perp, p @ nu


def cube_grid(nu, rho, delta) -> Grid:
    """Lattice points of delta*Z^2 inside the open rotated square of side rho."""
    half = rho / 2.0
    r = half * math.sqrt(2.0) + delta

    def inside(x):
        s, t = rotated_cube_coords(x, nu)
        return (np.abs(s) < half - 1e-12) & (np.abs(t) < half - 1e-12)

    return build_grid((-r, -r), (r, r), delta, mask=inside)


def cube_band(grid: Grid, nu, rho, width) -> np.ndarray:
    """Sites within ``width`` of the boundary of the rotated square."""
    s, t = rotated_cube_coords(grid.coords, nu)
    dist = rho / 2.0 - np.maximum(np.abs(s), np.abs(t))
    return dist <= width * (1 + 1e-9)


def localized_min(t, nu, rho, params: EnergyParams, config: SolveConfig | None = None,
                  eta=None, return_result=False):
    """Boundary-value estimate of the surface density: ``E(u, v, Q) / rho``.

    u and v are pinned to the jump datum on a band of width ``2 delta``; the
    fidelity term is off and the solver's eta floor is on.
    """
    nu = np.asarray(nu, dtype=float)
    if nu.shape != (2,):
        raise ValueError("localized_min is two-dimensional")
    if abs(np.linalg.norm(nu) - 1) > 1e-9:
        raise ValueError("nu must be a unit vector")
    d = params.delta
    if not rho > 2 * d:
        raise ValueError(f"rho must exceed 2*delta (rho={rho}, delta={d})")
    grid = cube_grid(nu, rho, d)
    band = cube_band(grid, nu, rho, 2 * d)
    if band.all():
        raise ValueError("the boundary band covers the whole cube; increase rho")
    sp_params = EnergyParams(params.epsilon, d, 1e-3 * params.epsilon if eta is None else eta, 0.0)
    bc = BoundaryCondition.step(grid, t, nu, band)
    uh, vh = step_data(grid, t, nu)
    config = config or SolveConfig()
    cfg = SolveConfig(config.max_outer_iters, config.rel_energy_tol, config.linear_tol,
                      config.max_linear_iters, config.method, uh, vh, config.clamp_tol)
    res = alternate_minimize(ufield(grid, uh), sp_params, cfg, bc)
    e = energy_breakdown(res.u, res.v, sp_params.evaluation_mode())
    value = (e.bulk + e.surface) / rho
    if return_result:
        return value, res
    return value
