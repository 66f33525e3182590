"""Finite-difference Ambrosio-Tortorelli energies on lattice fields.

Conventions (fixed once here and used everywhere):

* bulk term: every bond ``{i, j}`` is seen from both endpoints, each time
  weighted by ``v**2`` at the base site, so a bond carries
  ``delta**(n-2) * (v_i**2 + v_j**2) / 2 * (u_i - u_j)**2``;
* surface term: forward differences only, i.e. each bond once.

All functions accept an optional ``region``; a localized energy only keeps
the sites of the region and the bonds with both endpoints in it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .lattice import Grid, ScalarField, resolve_region, ufield, vfield

# above this many sites, sums go through math.fsum
_FSUM_THRESHOLD = 1_000_000


@dataclass(frozen=True)
class EnergyParams:
    """``epsilon`` is the phase-field width, ``delta`` the mesh size.

    ``eta`` is the small ellipticity floor added to ``v**2`` in the bulk term.
    It is zero for exact evaluation; the solver switches it on.
    """

    epsilon: float
    delta: float
    eta: float = 0.0
    fidelity_weight: float = 1.0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if not self.delta > 0:
            raise ValueError(f"delta must be > 0, got {self.delta}")
        if self.eta < 0:
            raise ValueError(f"eta must be >= 0, got {self.eta}")
        if self.fidelity_weight < 0:
            raise ValueError(f"fidelity_weight must be >= 0, got {self.fidelity_weight}")

    @classmethod
    def from_ell(cls, ell, delta, **kw) -> "EnergyParams":
        if not ell > 0:
            raise ValueError(f"ell must be > 0, got {ell}")
        return cls(epsilon=delta / ell, delta=delta, **kw)

    @property
    def ell(self) -> float:
        return self.delta / self.epsilon

    def solver_mode(self, eta=None) -> "EnergyParams":
        """Copy with the solver's default ``eta = 1e-3 * epsilon`` (or ``eta``)."""
        if eta is None:
            eta = 1e-3 * self.epsilon
        return EnergyParams(self.epsilon, self.delta, eta, self.fidelity_weight)

    def evaluation_mode(self) -> "EnergyParams":
        return EnergyParams(self.epsilon, self.delta, 0.0, self.fidelity_weight)


def _sum(x) -> float:
    x = np.asarray(x, dtype=float)
    if x.size > _FSUM_THRESHOLD:
        return math.fsum(x.tolist())
    return float(np.sum(x))


def _grid_of(*fields) -> Grid:
    grid = fields[0].grid
    for f in fields[1:]:
        if not f.grid.same_as(grid):
            raise ValueError("fields live on different grids")
    return grid


def _check_delta(grid: Grid, params: EnergyParams):
    if not math.isclose(grid.delta, params.delta, rel_tol=1e-12):
        raise ValueError(f"grid delta {grid.delta} differs from params.delta {params.delta}")


def region_bonds(grid: Grid, sel: np.ndarray):
    a, b = grid.all_bonds
    keep = sel[a] & sel[b]
    return a[keep], b[keep]


def _admissible(v: ScalarField) -> bool:
    return bool(v.values.min() >= 0.0 and v.values.max() <= 1.0)


def bulk_energy(u: ScalarField, v: ScalarField, params: EnergyParams, region=None) -> float:
    """``F(u, v, U)``; the eta part is reported by :func:`eta_energy`."""
    grid = _grid_of(u, v)
    _check_delta(grid, params)
    sel = resolve_region(grid, region)
    a, b = region_bonds(grid, sel)
    n = grid.n
    du2 = (u.values[a] - u.values[b]) ** 2
    w = 0.5 * (v.values[a] ** 2 + v.values[b] ** 2)
    return grid.delta ** (n - 2) * _sum(w * du2)


def eta_energy(u: ScalarField, params: EnergyParams, region=None) -> float:
    """Bulk energy of the ``eta`` floor alone (zero when ``params.eta == 0``)."""
    if params.eta == 0:
        return 0.0
    grid = u.grid
    sel = resolve_region(grid, region)
    a, b = region_bonds(grid, sel)
    return params.eta * grid.delta ** (grid.n - 2) * _sum((u.values[a] - u.values[b]) ** 2)


def surface_energy(v: ScalarField, params: EnergyParams, region=None) -> float:
    """``G(v, U)`` with forward differences for the gradient part."""
    grid = v.grid
    _check_delta(grid, params)
    sel = resolve_region(grid, region)
    a, b = region_bonds(grid, sel)
    d, eps, n = grid.delta, params.epsilon, grid.n
    site = _sum((v.values[sel] - 1.0) ** 2) * d**n / eps
    grad = _sum((v.values[a] - v.values[b]) ** 2) * eps * d ** (n - 2)
    return 0.5 * (site + grad)


def total_energy(u: ScalarField, v: ScalarField, params: EnergyParams, region=None) -> float:
    """``E = F + G``; ``inf`` when v leaves [0, 1]."""
    if not _admissible(v):
        return math.inf
    return bulk_energy(u, v, params, region) + surface_energy(v, params, region)


def data_term(u: ScalarField, g: ScalarField, params: EnergyParams, region=None) -> float:
    grid = _grid_of(u, g)
    sel = resolve_region(grid, region)
    return params.fidelity_weight * grid.delta**grid.n * _sum((u.values[sel] - g.values[sel]) ** 2)


def fidelity_energy(u, v, g, params: EnergyParams, region=None) -> float:
    """Perturbed energy ``E + fidelity_weight * sum delta^n |u - g|^2``."""
    _grid_of(u, v, g)
    e = total_energy(u, v, params, region)
    if math.isinf(e):
        return e
    return e + data_term(u, g, params, region)


def rescaled_energy(w: ScalarField, v: ScalarField, params: EnergyParams, region=None) -> float:
    """``H(w, v)``, the supercritical rescaling of E, evaluated term by term.

    Equals ``(eps/delta) * E(sqrt(delta/eps) * w, v)``; computed here directly
    from its own expansion so the identity can be tested.
    """
    if not _admissible(v):
        return math.inf
    grid = _grid_of(w, v)
    _check_delta(grid, params)
    sel = resolve_region(grid, region)
    a, b = region_bonds(grid, sel)
    d, eps, n = grid.delta, params.epsilon, grid.n
    vv = v.values
    bulk = d ** (n - 2) * _sum(0.5 * (vv[a] ** 2 + vv[b] ** 2) * (w.values[a] - w.values[b]) ** 2)
    site = d ** (n - 1) * _sum((vv[sel] - 1.0) ** 2)
    grad = d ** (n - 1) * (eps / d) ** 2 * _sum((vv[a] - vv[b]) ** 2)
    return bulk + 0.5 * (site + grad)


@dataclass(frozen=True)
class EnergyBreakdown:
    bulk: float
    surface: float
    fidelity: float = 0.0
    eta: float = 0.0

    @property
    def total(self) -> float:
        """Perturbed energy without the eta floor."""
        return self.bulk + self.surface + self.fidelity

    @property
    def objective(self) -> float:
        """What the alternating solver minimizes (includes eta)."""
        return self.total + self.eta


def energy_breakdown(u, v, params: EnergyParams, g=None, region=None) -> EnergyBreakdown:
    if not _admissible(v):
        return EnergyBreakdown(math.inf, math.inf)
    fid = 0.0 if g is None else data_term(u, g, params, region)
    return EnergyBreakdown(
        bulk_energy(u, v, params, region),
        surface_energy(v, params, region),
        fid,
        eta_energy(u, params, region),
    )


# --- one-dimensional continuum diagnostics ------------------------------------


def _merge_nodes(f, g, a, b):
    x = np.concatenate([f.nodes, g.nodes, [a, b]])
    x = np.unique(x[(x >= a) & (x <= b)])
    return x


def continuum_at_1d(u_fn, v_fn, interval, epsilon) -> float:
    """Exact Ambrosio-Tortorelli energy of piecewise-affine (u, v) on ``interval``.

    ``int v^2 |u'|^2 + 1/2 int ((v-1)^2/eps + eps |v'|^2)``; on each piece the
    integrands are quadratics and are integrated in closed form.
    """
    a, b = (float(t) for t in interval)
    if not b > a:
        raise ValueError("interval must have positive length")
    for fn in (u_fn, v_fn):
        lo, hi = fn.domain
        if a < lo - 1e-12 or b > hi + 1e-12:
            raise ValueError("interval lies outside the function domain")
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")
    x = _merge_nodes(u_fn, v_fn, a, b)
    h = np.diff(x)
    uu = u_fn(x)
    vv = v_fn(x)
    su = np.diff(uu) / h
    sv = np.diff(vv) / h
    v0, v1 = vv[:-1], vv[1:]
    # exact integral of an affine function squared: h (p^2 + pq + q^2) / 3
    int_v2 = h * (v0**2 + v0 * v1 + v1**2) / 3.0
    w0, w1 = v0 - 1.0, v1 - 1.0
    int_w2 = h * (w0**2 + w0 * w1 + w1**2) / 3.0
    bulk = np.sum(su**2 * int_v2)
    surf = 0.5 * np.sum(int_w2 / epsilon + epsilon * sv**2 * h)
    return float(bulk + surf)


@dataclass(frozen=True)
class PiecewiseFn1D:
    """Affine pieces on ``(knots[k], knots[k+1])`` given by start value and slope.

    Interior knots where consecutive pieces disagree are jump points.
    """

    knots: np.ndarray
    start_values: np.ndarray
    slopes: np.ndarray
    jump_tol: float = field(default=1e-12)

    def __post_init__(self):
        x = np.asarray(self.knots, dtype=float)
        c = np.asarray(self.start_values, dtype=float)
        s = np.asarray(self.slopes, dtype=float)
        if x.ndim != 1 or x.size < 2:
            raise ValueError("need at least two knots")
        if np.any(np.diff(x) <= 0):
            raise ValueError("knots must be strictly increasing")
        if c.shape != (x.size - 1,) or s.shape != (x.size - 1,):
            raise ValueError("one start value and one slope per piece")
        object.__setattr__(self, "knots", x)
        object.__setattr__(self, "start_values", c)
        object.__setattr__(self, "slopes", s)

    @classmethod
    def step(cls, a, b, at, left, right) -> "PiecewiseFn1D":
        return cls([a, at, b], [left, right], [0.0, 0.0])

    @property
    def jump_points(self) -> np.ndarray:
        h = np.diff(self.knots)
        ends = self.start_values + self.slopes * h
        gap = np.abs(ends[:-1] - self.start_values[1:])
        return self.knots[1:-1][gap > self.jump_tol]

    def jumps(self) -> np.ndarray:
        h = np.diff(self.knots)
        ends = self.start_values + self.slopes * h
        gap = self.start_values[1:] - ends[:-1]
        return gap[np.abs(gap) > self.jump_tol]


def ms_energy_1d(f: PiecewiseFn1D) -> float:
    """Dirichlet energy plus the number of jump points."""
    dirichlet = float(np.sum(f.slopes**2 * np.diff(f.knots)))
    return dirichlet + float(f.jump_points.size)


# --- recovery pairs -----------------------------------------------------------


def default_xi(params: EnergyParams) -> float:
    """Inner core half-width of the recovery profile, ``delta**2 / eps``.

    Any choice with ``xi / eps -> 0`` in the subcritical regime is admissible.
    """
    return params.delta**2 / params.epsilon


def recovery_pair_1d(grid: Grid, jump_location, jump_height, params: EnergyParams,
                     horizon=20.0, xi=None):
    """Sampled upper-bound construction for a single jump of height ``jump_height``.

    v vanishes within ``xi + delta`` of the jump, follows ``1 - exp(-s)`` in the
    stretched variable ``s = (d - xi - delta) / eps`` up to ``s = horizon`` and is
    1 beyond.  u is the step (0 left, ``jump_height`` right), cut to zero inside
    the core so that the jump happens where v is already 0.
    """
    if grid.n != 1:
        raise ValueError("recovery_pair_1d needs a 1D grid")
    if not horizon > 0:
        raise ValueError(f"horizon must be > 0, got {horizon}")
    if params.delta > params.epsilon:
        raise ValueError("recovery pairs are built in the subcritical setting delta <= epsilon")
    if xi is None:
        xi = default_xi(params)
    eps, d = params.epsilon, params.delta
    x = grid.coords[:, 0]
    dist = np.abs(x - jump_location)
    core = xi + math.sqrt(grid.n) * d
    s = (dist - core) / eps
    v = np.where(dist < core, 0.0, np.where(s < horizon, 1.0 - np.exp(-np.minimum(s, horizon)), 1.0))
    step = np.where(x > jump_location, float(jump_height), 0.0)
    # cut-off equal to 1 for d <= xi/2, 0 for d >= xi, linear in between
    if xi > 0:
        phi = np.clip((xi - dist) / (0.5 * xi), 0.0, 1.0)
    else:
        phi = np.zeros_like(dist)
    u = step * (1.0 - phi)
    return ufield(grid, u), vfield(grid, np.clip(v, 0.0, 1.0))


def step_datum_1d(grid: Grid, jump_at, height) -> ScalarField:
    """Exact cell averages of ``height * 1_{x > jump_at}`` over ``i + [0, delta)``."""
    if grid.n != 1:
        raise ValueError("step datum is one-dimensional")
    x = grid.coords[:, 0]
    frac = np.clip((x + grid.delta - jump_at) / grid.delta, 0.0, 1.0)
    return ufield(grid, height * frac)
