"""Lattice grids on delta*Z^n, scalar fields and the small geometric helpers
shared by the energies, the solver and the tests.

Sites are the lattice points of a bounding box, optionally thinned by a
membership mask.  Member sites are numbered in row-major order of their
integer multi-index; every reduction in the package iterates in that order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

U = "U"
V = "V"

# slack used when deciding whether a lattice point lies strictly inside a box
_BOX_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Grid:
    """Portion of the lattice ``origin + delta * Z^n`` selected by ``mask``.

    ``mask`` has one entry per multi-index of the bounding box ``shape``.
    """

    delta: float
    shape: tuple
    mask: np.ndarray
    origin: np.ndarray

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"delta must be > 0, got {self.delta}")
        shape = tuple(int(s) for s in self.shape)
        if len(shape) not in (1, 2):
            raise ValueError(f"only n = 1 or 2 is supported, got n = {len(shape)}")
        if any(s < 1 for s in shape):
            raise ValueError(f"shape components must be >= 1, got {shape}")
        mask = np.asarray(self.mask, dtype=bool)
        if mask.shape != shape:
            raise ValueError(f"mask shape {mask.shape} does not match {shape}")
        if not mask.any():
            raise ValueError("grid has no member sites")
        origin = np.asarray(self.origin, dtype=float).reshape(len(shape))
        mask = mask.copy()
        mask.setflags(write=False)
        origin.setflags(write=False)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "delta", float(self.delta))

    @classmethod
    def from_shape(cls, shape, delta, origin=None):
        """Full rectangular grid with ``shape`` sites, site 0 at ``origin``."""
        shape = tuple(int(s) for s in np.atleast_1d(shape))
        if origin is None:
            origin = np.zeros(len(shape))
        return cls(delta, shape, np.ones(shape, dtype=bool), origin)

    @property
    def n(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        """Number of member sites."""
        return int(self._flat.size)

    @cached_property
    def _flat(self) -> np.ndarray:
        return np.flatnonzero(self.mask.ravel())

    @cached_property
    def index_map(self) -> np.ndarray:
        """Bounding-box array holding the member index of each site, -1 outside."""
        out = np.full(self.shape, -1, dtype=np.int64)
        out.ravel()[self._flat] = np.arange(self._flat.size)
        out.setflags(write=False)
        return out

    @cached_property
    def multi_index(self) -> np.ndarray:
        """(size, n) integer multi-indices of the member sites."""
        idx = np.stack(np.unravel_index(self._flat, self.shape), axis=1)
        idx.setflags(write=False)
        return idx

    @cached_property
    def coords(self) -> np.ndarray:
        c = self.origin + self.delta * self.multi_index
        c.setflags(write=False)
        return c

    def bonds(self, axis: int) -> tuple[np.ndarray, np.ndarray]:
        """Member pairs ``(i, i + e_axis)``, both endpoints members."""
        return self._bonds[axis]

    @cached_property
    def _bonds(self):
        out = []
        imap = self.index_map
        for k in range(self.n):
            lo = [slice(None)] * self.n
            hi = [slice(None)] * self.n
            lo[k] = slice(0, -1)
            hi[k] = slice(1, None)
            a = imap[tuple(lo)].ravel()
            b = imap[tuple(hi)].ravel()
            keep = (a >= 0) & (b >= 0)
            # row-major order of the base site
            order = np.argsort(a[keep], kind="stable")
            pair = (a[keep][order], b[keep][order])
            for arr in pair:
                arr.setflags(write=False)
            out.append(pair)
        return tuple(out)

    @cached_property
    def all_bonds(self) -> tuple[np.ndarray, np.ndarray]:
        """Every nearest-neighbour bond once, as ``(base, forward)`` member indices."""
        a = np.concatenate([self.bonds(k)[0] for k in range(self.n)])
        b = np.concatenate([self.bonds(k)[1] for k in range(self.n)])
        return a, b

    def neighbors(self, site: int) -> list[int]:
        """Member indices of the lattice neighbours of ``site``."""
        mi = self.multi_index[site]
        out = []
        for k in range(self.n):
            for step in (-1, 1):
                j = mi.copy()
                j[k] += step
                if 0 <= j[k] < self.shape[k]:
                    m = self.index_map[tuple(j)]
                    if m >= 0:
                        out.append(int(m))
        return out

    def same_as(self, other: "Grid") -> bool:
        return self is other or (
            self.shape == other.shape
            and self.delta == other.delta
            and np.array_equal(self.mask, other.mask)
            and np.array_equal(self.origin, other.origin)
        )

    def to_array(self, values, fill=np.nan) -> np.ndarray:
        """Scatter per-site values into the bounding box."""
        out = np.full(self.shape, fill, dtype=float)
        out.ravel()[self._flat] = values
        return out

    def from_array(self, arr) -> np.ndarray:
        """Gather member-site values from a bounding-box array."""
        arr = np.asarray(arr, dtype=float)
        if arr.shape != self.shape:
            raise ValueError(f"array shape {arr.shape} does not match grid {self.shape}")
        return arr.ravel()[self._flat].copy()


@dataclass(frozen=True, eq=False)
class ScalarField:
    """One real value per member site; kind V is constrained to [0, 1]."""

    grid: Grid
    values: np.ndarray
    kind: str = U

    def __post_init__(self):
        if self.kind not in (U, V):
            raise ValueError(f"kind must be 'U' or 'V', got {self.kind!r}")
        vals = np.array(self.values, dtype=float).reshape(-1)
        if vals.size != self.grid.size:
            raise ValueError(
                f"field has {vals.size} values but the grid has {self.grid.size} sites")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        if self.kind == V and (vals.min() < 0.0 or vals.max() > 1.0):
            raise ValueError("V-field values must lie in [0, 1]")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return self.values.size

    def to_array(self, fill=np.nan) -> np.ndarray:
        return self.grid.to_array(self.values, fill)

    def with_values(self, values, kind=None) -> "ScalarField":
        return ScalarField(self.grid, values, self.kind if kind is None else kind)


def ufield(grid: Grid, values) -> ScalarField:
    return ScalarField(grid, values, U)


def vfield(grid: Grid, values) -> ScalarField:
    return ScalarField(grid, values, V)


@dataclass(frozen=True, eq=False)
class SubRegion:
    """Boolean selection of member sites, the discrete trace ``U ∩ delta Z^n``."""

    grid: Grid
    selected: np.ndarray

    def __post_init__(self):
        sel = np.asarray(self.selected, dtype=bool).reshape(-1)
        if sel.size != self.grid.size:
            raise ValueError("region selection must have one flag per member site")
        sel = sel.copy()
        sel.setflags(write=False)
        object.__setattr__(self, "selected", sel)

    @classmethod
    def whole(cls, grid: Grid) -> "SubRegion":
        return cls(grid, np.ones(grid.size, dtype=bool))

    @classmethod
    def from_indices(cls, grid: Grid, indices) -> "SubRegion":
        sel = np.zeros(grid.size, dtype=bool)
        idx = np.asarray(indices, dtype=np.int64).reshape(-1)
        if idx.size and (idx.min() < 0 or idx.max() >= grid.size):
            raise ValueError("region indices must refer to member sites")
        sel[idx] = True
        return cls(grid, sel)

    @classmethod
    def from_predicate(cls, grid: Grid, predicate: Callable) -> "SubRegion":
        """Select sites whose coordinates satisfy ``predicate(coords) -> bool array``."""
        return cls(grid, np.asarray(predicate(grid.coords), dtype=bool))

    @property
    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.selected)


def resolve_region(grid, region) -> np.ndarray:
    """Boolean per-site selection for ``region`` (None means the whole grid)."""
    if region is None:
        return np.ones(grid.size, dtype=bool)
    if isinstance(region, SubRegion):
        if not region.grid.same_as(grid):
            raise ValueError("region belongs to a different grid")
        return region.selected
    sel = np.asarray(region, dtype=bool).reshape(-1)
    if sel.size != grid.size:
        raise ValueError("region selection must have one flag per member site")
    return sel


def build_grid(lower, upper, delta, mask=None) -> Grid:
    """Lattice points of ``delta * Z^n`` strictly inside the open box (lower, upper).

    ``mask`` optionally restricts membership further; it is either a
    predicate on site coordinates or a boolean array over the bounding box.
    """
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    if lower.shape != upper.shape:
        raise ValueError("lower and upper corners must have the same dimension")
    if not np.all(upper > lower):
        raise ValueError("box side lengths must be > 0")
    if not (delta > 0):
        raise ValueError(f"delta must be > 0, got {delta}")
    kmin = [math.floor(a / delta + _BOX_TOL) + 1 for a in lower]
    kmax = [math.ceil(b / delta - _BOX_TOL) - 1 for b in upper]
    shape = tuple(hi - lo + 1 for lo, hi in zip(kmin, kmax))
    if any(s < 1 for s in shape):
        raise ValueError("the box contains no lattice sites at this delta")
    origin = delta * np.asarray(kmin, dtype=float)
    full = np.ones(shape, dtype=bool)
    if mask is None:
        return Grid(delta, shape, full, origin)
    if callable(mask):
        probe = Grid(delta, shape, full, origin)
        keep = np.asarray(mask(probe.coords), dtype=bool)
        return Grid(delta, shape, probe.to_array(keep, fill=0).astype(bool), origin)
    return Grid(delta, shape, np.asarray(mask, dtype=bool), origin)


def split_interior_boundary(grid: Grid, region=None) -> tuple[np.ndarray, np.ndarray]:
    """Split the region's sites into those whose 2n neighbours all lie in it and the rest."""
    sel = resolve_region(grid, region)
    mi = grid.multi_index
    interior = sel.copy()
    for k in range(grid.n):
        for step in (-1, 1):
            j = mi.copy()
            j[:, k] += step
            inside = (j[:, k] >= 0) & (j[:, k] < grid.shape[k])
            ok = np.zeros(grid.size, dtype=bool)
            jj = j[inside]
            m = grid.index_map[tuple(jj.T)]
            hit = m >= 0
            ok_inside = np.zeros(jj.shape[0], dtype=bool)
            ok_inside[hit] = sel[m[hit]]
            ok[inside] = ok_inside
            interior &= ok
    idx = np.flatnonzero(sel)
    return idx[interior[idx]], idx[~interior[idx]]


@dataclass(frozen=True)
class PiecewiseAffine:
    """Continuous piecewise-affine function through ``(nodes, values)``."""

    nodes: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.nodes, dtype=float)
        y = np.asarray(self.values, dtype=float)
        if x.ndim != 1 or x.shape != y.shape or x.size < 2:
            raise ValueError("need matching 1D node and value arrays with >= 2 entries")
        if np.any(np.diff(x) <= 0):
            raise ValueError("nodes must be strictly increasing")
        object.__setattr__(self, "nodes", x)
        object.__setattr__(self, "values", y)

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / np.diff(self.nodes)

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.nodes[0]), float(self.nodes[-1])

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        lo, hi = self.domain
        if np.any(t < lo - 1e-12) or np.any(t > hi + 1e-12):
            raise ValueError("evaluation point outside the interpolation domain")
        return np.interp(t, self.nodes, self.values)


def affine_interpolate_1d(field: ScalarField) -> PiecewiseAffine:
    """Piecewise-affine interpolation of a field on a 1D grid.

    Only consecutive member sites are joined, so the grid must be a single
    lattice interval.
    """
    g = field.grid
    if g.n != 1:
        raise ValueError("affine interpolation needs a 1D grid")
    if g.size < 2:
        raise ValueError("affine interpolation needs at least 2 sites")
    if np.any(np.diff(g.multi_index[:, 0]) != 1):
        raise ValueError("1D grid has holes; interpolate each interval separately")
    return PiecewiseAffine(g.coords[:, 0], field.values)


def slice_field(field: ScalarField, axis: int, offset: int) -> ScalarField:
    """Restriction of a 2D field to the lattice line through index ``offset``
    along ``axis`` (0-based; the other index is held at ``offset``)."""
    g = field.grid
    if g.n != 2:
        raise ValueError("slicing needs a 2D grid")
    if axis not in (0, 1):
        raise ValueError(f"axis must be 0 or 1, got {axis}")
    other = 1 - axis
    if not 0 <= offset < g.shape[other]:
        raise ValueError(f"offset {offset} outside 0..{g.shape[other] - 1}")
    arr_idx = [slice(None), slice(None)]
    arr_idx[other] = offset
    imap = g.index_map[tuple(arr_idx)]
    members = imap >= 0
    if not members.any():
        raise ValueError("empty slice")
    sub_mask = members
    origin = np.array([g.origin[axis]])
    line = Grid(g.delta, (g.shape[axis],), sub_mask, origin)
    return ScalarField(line, field.values[imap[members]], field.kind)


def truncate(field: ScalarField, m: float) -> ScalarField:
    """Clamp a field to [-m, m]."""
    if m < 0:
        raise ValueError(f"truncation level must be >= 0, got {m}")
    return field.with_values(np.clip(field.values, -m, m))


def cell_averages(grid: Grid, func: Callable, order: int = 8) -> np.ndarray:
    """Averages of ``func`` over the cells ``i + [0, delta)^n`` by tensor Gauss-Legendre."""
    x, w = np.polynomial.legendre.leggauss(order)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    if grid.n == 1:
        pts = grid.coords[:, :1] + grid.delta * x[None, :]
        return (func(pts) * w).sum(axis=1)
    X, Y = np.meshgrid(x, x, indexing="ij")
    W = np.outer(w, w).ravel()
    offs = np.stack([X.ravel(), Y.ravel()], axis=1) * grid.delta
    out = np.empty(grid.size)
    for i, c in enumerate(grid.coords):
        out[i] = np.dot(func(c + offs), W)
    return out
