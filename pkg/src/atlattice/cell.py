"""Channels, the lattice cell problem for the surface density, and the
one-dimensional optimal-profile constants.

The cell problem lives on the unit lattice Z^2.  The cube of side T with
normal nu is taken half-open,

    TQ^nu = {x : -T/2 < <x, nu> <= T/2,  -T/2 <= <x, nu_perp> < T/2},

with ``nu_perp = (-nu_2, nu_1)``.  For nu = e_2 this contains exactly T
columns and a jump line with a symmetric profile on both sides.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import solve_banded

from .lattice import Grid, ScalarField, vfield
from .solver import SolveConfig, laplacian, solve_spd

_TOL = 1e-9


def nu_from_angle(angle_deg) -> np.ndarray:
    """Unit vector at ``angle_deg`` from e_1; tiny components are snapped to 0."""
    a = math.radians(float(angle_deg))
    nu = np.array([math.cos(a), math.sin(a)])
    nu[np.abs(nu) < 1e-12] = 0.0
    return nu / np.linalg.norm(nu)


def _as_points(points) -> np.ndarray:
    p = np.asarray(points, dtype=np.int64)
    if p.size == 0:
        return p.reshape(0, 2)
    if p.ndim != 2 or p.shape[1] != 2:
        raise ValueError("points must be an (m, 2) integer array")
    return p


def is_path(points) -> bool:
    p = _as_points(points)
    if len(p) == 0:
        return False
    if len(p) == 1:
        return True
    steps = np.abs(np.diff(p, axis=0)).sum(axis=1)
    return bool(np.all(steps == 1))


def is_strong_path(points) -> bool:
    """A path whose interior points each have a horizontal and a vertical
    lattice neighbour somewhere in the path."""
    p = _as_points(points)
    if not is_path(p):
        return False
    pts = set(map(tuple, p.tolist()))
    if len(pts) != len(p):
        return False
    for x, y in p[1:-1].tolist():
        horiz = (x + 1, y) in pts or (x - 1, y) in pts
        vert = (x, y + 1) in pts or (x, y - 1) in pts
        if not (horiz and vert):
            return False
    return True


def path_edges(points) -> set:
    p = _as_points(points)
    return {frozenset((tuple(a), tuple(b))) for a, b in zip(p[:-1].tolist(), p[1:].tolist())}


def are_disjoint(p, q) -> bool:
    """Paths are disjoint when they share no lattice edge."""
    return not (path_edges(p) & path_edges(q))


@dataclass(frozen=True, eq=False)
class LatticePath:
    points: np.ndarray

    def __post_init__(self):
        p = _as_points(self.points).copy()
        p.setflags(write=False)
        object.__setattr__(self, "points", p)

    def __len__(self):
        return len(self.points)

    @property
    def is_path(self) -> bool:
        return is_path(self.points)

    @property
    def is_strong(self) -> bool:
        return is_strong_path(self.points)


# --- cube geometry --------------------------------------------------------------


def _perp(nu):
    return np.array([-nu[1], nu[0]])


def in_cube(points, T, nu) -> np.ndarray:
    p = np.asarray(points, dtype=float)
    s = p @ nu
    t = p @ _perp(nu)
    h = T / 2.0
    return (s > -h + _TOL) & (s <= h + _TOL) & (t >= -h - _TOL) & (t < h - _TOL)


def cube_grid(T, nu) -> Grid:
    """Unit-lattice sites of TQ^nu, as a masked grid on [-R, R]^2 with site (0, 0) at the centre."""
    R = math.ceil(T / math.sqrt(2.0)) + 2
    n = 2 * R + 1
    ii, jj = np.meshgrid(np.arange(n) - R, np.arange(n) - R, indexing="ij")
    pts = np.stack([ii.ravel(), jj.ravel()], axis=1)
    mask = in_cube(pts, T, nu).reshape(n, n)
    return Grid(1.0, (n, n), mask, np.array([-R, -R], dtype=float))


_STEPS = np.array([[1, 0], [-1, 0], [0, 1], [0, -1]])


def _plus(points, nu):
    return np.asarray(points, dtype=float) @ nu > _TOL


def jump_set(points, T, nu) -> np.ndarray:
    """S^nu: sites with a neighbour in the cube on the other side of <x, nu> = 0."""
    p = np.asarray(points)
    s0 = _plus(p, nu)
    out = np.zeros(len(p), dtype=bool)
    for e in _STEPS:
        q = p + e
        out |= in_cube(q, T, nu) & (_plus(q, nu) != s0)
    return out


def left_right_boundary(points, T, nu):
    """Masks of the discrete left and right sides (neighbour beyond <x, nu_perp> = -+T/2)."""
    p = np.asarray(points)
    perp = _perp(nu)
    h = T / 2.0
    left = np.zeros(len(p), dtype=bool)
    right = np.zeros(len(p), dtype=bool)
    for e in _STEPS:
        t = (p + e) @ perp
        left |= t <= -h + _TOL
        right |= t >= h - _TOL
    return left, right


def outer_band(grid: Grid, T, nu) -> np.ndarray:
    """Cube sites with a lattice neighbour outside the cube."""
    p = grid.multi_index + grid.origin.astype(np.int64)
    out = np.zeros(grid.size, dtype=bool)
    for e in _STEPS:
        out |= ~in_cube(p + e, T, nu)
    return out


# --- channels -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Channel:
    path: LatticePath
    T: float
    nu: np.ndarray

    def __post_init__(self):
        if not self.path.is_strong:
            raise ValueError("a channel must be a strong path")
        ok, why = channel_endpoints_ok(self.path.points, self.T, self.nu)
        if not ok:
            raise ValueError(f"invalid channel: {why}")

    @property
    def points(self) -> np.ndarray:
        return self.path.points


def channel_endpoints_ok(points, T, nu):
    p = _as_points(points)
    if len(p) < 2:
        return False, "fewer than two points"
    if not in_cube(p, T, nu).all():
        return False, "points outside the cube"
    ends = p[[0, -1]]
    s = jump_set(ends, T, nu)
    left, right = left_right_boundary(ends, T, nu)
    a = s & left
    b = s & right
    if (a[0] and b[1]) or (a[1] and b[0]):
        return True, ""
    return False, "endpoints do not meet both discrete sides of the jump set"


def _staircase(T, nu) -> np.ndarray:
    """Strong staircase along the line, alternating one step along the
    columns with one step across them.

    Each column carries two sites, ideally the pair straddling the line.  The
    alternation forces a parity defect (a column shifted by one site) after
    some runs; a small dynamic program places these defects away from the
    lateral sides of the cube, where the channel must end on the jump set.
    """
    nu = np.asarray(nu, dtype=float)
    # march along axis p, straddle along axis q
    p_ax, q_ax = (0, 1) if abs(nu[1]) >= abs(nu[0]) - _TOL else (1, 0)
    slope = -nu[p_ax] / nu[q_ax]

    def pt(c, r):
        out = np.zeros((np.size(c), 2), dtype=np.int64)
        out[:, p_ax], out[:, q_ax] = c, r
        return out

    R = math.ceil(T / math.sqrt(2.0)) + 2
    cols = np.arange(-R, R + 1)
    target = np.floor(slope * cols + _TOL).astype(np.int64)
    lo_in = in_cube(pt(cols, target), T, nu)
    up_in = in_cube(pt(cols, target + 1), T, nu)
    full = np.flatnonzero(lo_in & up_in)
    if full.size < 2:
        raise ValueError("cube too small to host a channel")
    hit = np.flatnonzero(lo_in | up_in)
    lo, hi = max(hit[0] - 2, 0), min(hit[-1] + 2, len(cols) - 1)
    cols, target = cols[lo:hi + 1], target[lo:hi + 1]
    m = len(cols)
    weight = np.zeros(m)
    weight[hit[0] - lo:hit[-1] - lo + 1] = 1.0
    # the outermost full columns carry the channel's endpoints
    weight[full[0] - lo] = weight[full[-1] - lo] = 1e3

    # state: entry row offset d in {-1, 0, 1, 2} relative to the target;
    # exits go one row up or down and the pair's lower row may be off by one
    offs = (-1, 0, 1, 2)
    inf = math.inf
    cost = [{d: 0.0 if d in (0, 1) else inf for d in offs}]
    back = []
    for k in range(m):
        a = target[k]
        nxt = {d: inf for d in offs}
        arg = {}
        for d, c0 in cost[-1].items():
            if c0 == inf:
                continue
            e = a + d
            for step in (1, -1):
                x = e + step
                low = min(e, x)
                if abs(low - a) > 1:
                    continue
                c = c0 + (0.0 if low == a else weight[k])
                if k + 1 < m:
                    dn = x - target[k + 1]
                    if dn not in nxt:
                        continue
                else:
                    dn = 0
                if c < nxt.get(dn, inf) - 1e-12:
                    nxt[dn] = c
                    arg[dn] = (d, step)
        cost.append(nxt)
        back.append(arg)
    d = min((c, dd) for dd, c in cost[-1].items())[1]
    steps = []
    for k in range(m - 1, -1, -1):
        d, step = back[k][d]
        steps.append((d, step))
    steps.reverse()
    pts = []
    for k, (d, step) in enumerate(steps):
        e = target[k] + d
        pts.append(pt(cols[k], e)[0])
        pts.append(pt(cols[k], e + step)[0])
    return np.array(pts, dtype=np.int64)


def _clip_run(points, T, nu) -> np.ndarray:
    inside = in_cube(points, T, nu)
    if not inside.any():
        raise ValueError("no channel point inside the cube")
    # longest contiguous inside run closest to the centre
    d = np.abs(points).sum(axis=1)
    centre = int(np.argmin(np.where(inside, d, np.iinfo(np.int64).max)))
    lo = centre
    while lo > 0 and inside[lo - 1]:
        lo -= 1
    hi = centre
    while hi < len(points) - 1 and inside[hi + 1]:
        hi += 1
    return points[lo:hi + 1]


def _trim_ends(points, T, nu) -> np.ndarray:
    s = jump_set(points, T, nu)
    left, right = left_right_boundary(points, T, nu)
    sl, sr = s & left, s & right
    # widest run from one side to the other, so every column carries the channel
    best = None
    for a_mask, b_mask in ((sl, sr), (sr, sl)):
        ia = np.flatnonzero(a_mask)
        ib = np.flatnonzero(b_mask)
        if ia.size and ib.size:
            lo, hi = ia.min(), ib.max()
            if hi > lo and (best is None or hi - lo > best[1] - best[0]):
                best = (lo, hi)
    if best is None:
        raise ValueError("cube too small to host a channel")
    return points[best[0]:best[1] + 1]


def flat_channel(spec: "CellSpec") -> Channel:
    """Staircase channel tracking the line <x, nu> = 0 (straight for coordinate nu)."""
    T, nu = spec.T, spec.nu
    pts = _trim_ends(_clip_run(_staircase(T, nu), T, nu), T, nu)
    return Channel(LatticePath(pts), T, nu)


# --- the cell problem -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CellSpec:
    """One cell problem: cube side ``T``, normal ``nu``, ratio ``ell``.

    ``channel_policy`` is ``"flat"``, ``"given"`` (uses ``channel``) or
    ``"local-search"`` (greedy single-site deformations within ``budget``
    energy evaluations, starting from ``channel`` if given, else the flat one).
    """

    T: float
    nu: np.ndarray
    ell: float
    channel_policy: str = "flat"
    budget: int = 200
    boundary_band: int = 1
    channel: LatticePath | None = None

    def __post_init__(self):
        nu = np.asarray(self.nu, dtype=float).reshape(2)
        if abs(np.linalg.norm(nu) - 1.0) > 1e-9:
            raise ValueError("nu must be a unit vector")
        object.__setattr__(self, "nu", nu)
        if not self.T >= 4:
            raise ValueError(f"T must be >= 4, got {self.T}")
        if not self.ell > 0:
            raise ValueError(f"ell must be > 0, got {self.ell}")
        if self.channel_policy not in ("flat", "given", "local-search"):
            raise ValueError(f"unknown channel policy {self.channel_policy!r}")
        if self.channel_policy == "given" and self.channel is None:
            raise ValueError("policy 'given' needs a channel")
        if self.boundary_band != 1:
            raise ValueError("only a boundary band of width 1 is supported")


def cell_energy(v: ScalarField, ell, T) -> float:
    """``(1/2T) [ell * sum (v-1)^2 + (1/ell) * sum over bonds (v^i - v^j)^2]``."""
    vals = v.values
    if vals.min() < 0 or vals.max() > 1:
        return math.inf
    a, b = v.grid.all_bonds
    site = float(np.sum((vals - 1.0) ** 2))
    bond = float(np.sum((vals[a] - vals[b]) ** 2))
    return (ell * site + bond / ell) / (2.0 * T)


@dataclass
class CellResult:
    v: ScalarField
    phi: float
    channel: Channel
    evaluations: int = 1

    def __iter__(self):
        return iter((self.v, self.phi, self.channel))


class _CellSystem:
    """Assembled cell matrix ``ell I + L / ell``; re-solved for each channel."""

    def __init__(self, T, nu, ell, config):
        self.T, self.nu, self.ell = T, nu, ell
        self.grid = cube_grid(T, nu)
        self.sites = self.grid.multi_index + self.grid.origin.astype(np.int64)
        a, b = self.grid.all_bonds
        size = self.grid.size
        self.A = (sp.identity(size) * ell + laplacian(size, a, b, np.ones(a.size)) / ell).tocsr()
        self.band = outer_band(self.grid, T, nu)
        self.config = config or SolveConfig(linear_tol=1e-12)
        self._last = None

    def site_index(self, points) -> np.ndarray:
        p = np.asarray(points) - self.grid.origin.astype(np.int64)
        return self.grid.index_map[p[:, 0], p[:, 1]]

    def solve(self, points):
        idx = self.site_index(points)
        if np.any(idx < 0):
            raise ValueError("channel leaves the cube")
        fixed = self.band.copy()
        fixed[idx] = True
        val = np.ones(self.grid.size)
        val[idx] = 0.0
        free = ~fixed
        rhs = np.full(int(free.sum()), self.ell) - self.A[free][:, fixed] @ val[fixed]
        x0 = None if self._last is None else self._last[free]
        sol = val.copy()
        sol[free] = solve_spd(self.A[free][:, free].tocsr(), rhs, self.config, x0)
        if sol.min() < -1e-9 or sol.max() > 1 + 1e-9:
            raise AssertionError("cell solution violates the maximum principle")
        sol = np.clip(sol, 0.0, 1.0)
        self._last = sol
        v = vfield(self.grid, sol)
        return v, cell_energy(v, self.ell, self.T)


def _local_moves(points, T, nu):
    """Shortcuts removing a two-site detour, single-site corner flips and unit
    translations of one or two consecutive interior sites; endpoints stay fixed."""
    occupied = set(map(tuple, points.tolist()))
    m = len(points)
    for k in range(1, m - 2):
        if np.abs(points[k + 2] - points[k - 1]).sum() == 1:
            yield np.concatenate([points[:k], points[k + 2:]])
    for k in range(1, m - 1):
        flip = points[k - 1] + points[k + 1] - points[k]
        cands = [(k, 1, flip - points[k])]
        for e in _STEPS:
            cands.append((k, 1, e))
            if k + 1 < m - 1:
                cands.append((k, 2, e))
        for start, width, e in cands:
            if not np.any(e):
                continue
            moved = points[start:start + width] + e
            if any(tuple(q) in occupied for q in moved.tolist()):
                continue
            if not in_cube(moved, T, nu).all():
                continue
            cand = points.copy()
            cand[start:start + width] = moved
            yield cand


def solve_cell(spec: CellSpec, config: SolveConfig | None = None) -> CellResult:
    """Minimize the cell energy with v = 0 on the channel and v = 1 on the outer band.

    The value is exact for the channel used and an upper bound for the
    infimum over all channels.
    """
    system = _CellSystem(spec.T, spec.nu, spec.ell, config)
    if spec.channel is not None:
        channel = Channel(spec.channel, spec.T, spec.nu)
    else:
        channel = flat_channel(spec)
    v, phi = system.solve(channel.points)
    evals = 1
    if spec.channel_policy == "local-search":
        pts = channel.points.copy()
        improved = True
        while improved and evals < spec.budget:
            improved = False
            for cand in _local_moves(pts, spec.T, spec.nu):
                if not is_strong_path(cand):
                    continue
                if not channel_endpoints_ok(cand, spec.T, spec.nu)[0]:
                    continue
                cv, cphi = system.solve(cand)
                evals += 1
                if cphi < phi - 1e-12:
                    pts, v, phi, improved = cand, cv, cphi, True
                    break
                if evals >= spec.budget:
                    break
        channel = Channel(LatticePath(pts), spec.T, spec.nu)
        # the warm-started system may hold a rejected candidate
        v, phi = system.solve(channel.points)
    return CellResult(v, phi, channel, evals)


def column_energy(v: ScalarField, ell, column=0) -> float:
    """Unnormalized energy of one vertical column: site terms plus the vertical bonds."""
    g = v.grid
    sites = g.multi_index + g.origin.astype(np.int64)
    sel = sites[:, 0] == column
    a, b = g.bonds(1)
    keep = sel[a] & sel[b]
    vals = v.values
    return float(ell * np.sum((vals[sel] - 1) ** 2) + np.sum((vals[a[keep]] - vals[b[keep]]) ** 2) / ell)


# --- one-dimensional constants --------------------------------------------------


def c_ell_closed_form(ell, n=1) -> float:
    """Optimal one-dimensional profile energy ``c_{ell, n}`` (``c_ell`` for n = 1)."""
    if not ell > 0:
        raise ValueError(f"ell must be > 0, got {ell}")
    if n < 1:
        raise ValueError("n must be >= 1")
    s = math.sqrt(ell * ell + 4 * n)
    num = 4 * n + (s + ell) ** 2
    den = ell * (s + ell) ** 2 + 4 * n * s + 4 * n * ell
    return ell / n + num / den


def profile_root(ell, n=1) -> float:
    """Root in (0, 1) of ``r^2 - (2 + ell^2/n) r + 1 = 0``."""
    b = 2.0 + ell * ell / n
    return (b - math.sqrt(b * b - 4.0)) / 2.0


def c_ell_numeric(ell, n=1, N=200):
    """Truncated profile problem on sites 0..N with v^0 = 0, v^N = 1.

    Solves the tridiagonal Euler-Lagrange system and returns
    ``(energy, profile)``; the energy is
    ``sum_{i<N} (ell/n)(v^i - 1)^2 + (1/ell)(v^{i+1} - v^i)^2``.
    """
    if N < 8:
        raise ValueError("N must be >= 8")
    if not ell > 0:
        raise ValueError(f"ell must be > 0, got {ell}")
    m = N - 1
    w = ell / n
    k = 1.0 / ell
    ab = np.zeros((3, m))
    ab[0, 1:] = -k
    ab[1, :] = w + 2 * k
    ab[2, :-1] = -k
    rhs = np.full(m, w)
    rhs[-1] += k  # v^N = 1
    interior = solve_banded((1, 1), ab, rhs)
    v = np.concatenate([[0.0], interior, [1.0]])
    energy = float(np.sum(w * (v[:-1] - 1) ** 2 + k * np.diff(v) ** 2))
    return energy, v


# --- finite-T extrapolation and bounds -----------------------------------------


def extrapolate(Ts, values) -> float:
    """Least-squares fit ``phi_T = phi_inf + a / T``; returns ``phi_inf``."""
    Ts = np.asarray(Ts, dtype=float)
    values = np.asarray(values, dtype=float)
    if Ts.size < 2:
        return math.nan
    A = np.stack([np.ones_like(Ts), 1.0 / Ts], axis=1)
    coef, *_ = np.linalg.lstsq(A, values, rcond=None)
    return float(coef[0])


def lower_bound(ell, T) -> float:
    return max(ell / 2.0, (T - math.sqrt(2.0)) / T)


def upper_bound(ell, nu, T) -> float:
    """Bound on phi itself: ``ell * |nu|_inf (1 + 2/ell^2)(1 + 5/T)``."""
    return ell * float(np.max(np.abs(nu))) * (1 + 2 / ell**2) * (1 + 5.0 / T)


def is_lattice_direction(nu) -> bool:
    """Coordinate or diagonal direction."""
    a = np.abs(np.asarray(nu, dtype=float))
    return bool(a.min() < 1e-12 or abs(a[0] - a[1]) < 1e-12)


@dataclass
class RegimeRow:
    ell: float
    angle_deg: float
    nu: np.ndarray
    T: float
    phi_T: float
    phi_extrapolated: float = math.nan
    lower_bound_ok: bool = True
    upper_bound_ok: bool = True
    meta: dict = field(default_factory=dict)


def regime_report(ells, angles, Ts, policy="flat", budget=200, config=None) -> list:
    """Cell values with bound checks, ordered by ell, then angle, then T.

    ``phi_extrapolated`` is shared by the rows of one (ell, angle) pair and is
    NaN when fewer than two T values are given.
    """
    Ts = [float(t) for t in Ts]
    if any(t < 16 for t in Ts):
        raise ValueError("regime_report needs T >= 16")
    rows = []
    for ell in ells:
        for ang in angles:
            nu = nu_from_angle(ang)
            vals = []
            for T in Ts:
                res = solve_cell(CellSpec(T, nu, float(ell), policy, budget), config)
                vals.append(res.phi)
            ext = extrapolate(Ts, vals)
            for T, phi in zip(Ts, vals):
                lo = phi >= lower_bound(ell, T) - 1e-12
                hi = phi <= upper_bound(ell, nu, T) + 1e-12
                rows.append(RegimeRow(float(ell), float(ang), nu, T, phi, ext, bool(lo), bool(hi)))
    return rows
