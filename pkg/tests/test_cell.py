import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from atlattice.cell import (CellSpec, Channel, LatticePath, are_disjoint, c_ell_closed_form, c_ell_numeric,
                            cell_energy, channel_endpoints_ok, column_energy, cube_grid, extrapolate,
                            flat_channel, in_cube, is_lattice_direction, is_path, is_strong_path,
                            lower_bound, nu_from_angle, profile_root, regime_report, solve_cell, upper_bound)
from atlattice.lattice import Grid, vfield

E2 = np.array([0.0, 1.0])
DIAG = nu_from_angle(45)
GOLD = (1 + 5**0.5) / 2


def test_strong_path_examples():
    seg = [(0, 0), (1, 0), (2, 0)]
    assert is_path(seg) and not is_strong_path(seg)
    assert is_strong_path([(0, 0), (0, 1), (1, 1), (1, 2)])
    assert is_strong_path([(5, 5)])
    assert not is_path([(0, 0), (1, 1)])
    assert not is_strong_path([(0, 0), (0, 1), (0, 0)])


def test_disjoint_examples():
    p = [(0, 0), (1, 0), (1, 1)]
    assert not are_disjoint(p, p)
    assert are_disjoint([(0, 0), (1, 0)], [(1, 0), (1, 1)])
    assert not are_disjoint([(0, 0), (1, 0)], [(1, 0), (0, 0), (0, 1)])


def test_flat_channel_coordinate():
    ch = flat_channel(CellSpec(8, E2, 1.0))
    pts = ch.points
    assert ch.path.is_strong
    # two sites per column, on the rows straddling the line, across the whole cube
    assert set(pts[:, 1]) == {0, 1}
    assert len(pts) == 16
    cols, counts = np.unique(pts[:, 0], return_counts=True)
    assert np.all(counts == 2) and len(cols) == 8


def test_flat_channel_diagonal():
    T = 8
    ch = flat_channel(CellSpec(T, DIAG, 1.0))
    assert ch.path.is_strong
    assert 1.2 * T <= len(ch.points) <= 2.5 * T
    assert in_cube(ch.points, T, DIAG).all()


@given(st.integers(4, 60), st.floats(0, 180))
@settings(max_examples=80)
def test_flat_channel_always_valid(T, angle):
    ch = flat_channel(CellSpec(T, nu_from_angle(angle), 1.0))
    assert is_strong_path(ch.points)
    assert channel_endpoints_ok(ch.points, T, ch.nu)[0]


def test_spec_errors():
    with pytest.raises(ValueError):
        CellSpec(1, E2, 1.0)
    with pytest.raises(ValueError):
        CellSpec(8, [1.0, 1.0], 1.0)
    with pytest.raises(ValueError):
        CellSpec(8, E2, 0.0)
    with pytest.raises(ValueError):
        CellSpec(8, E2, 1.0, channel_policy="given")
    with pytest.raises(ValueError):
        Channel(LatticePath([(0, 0), (1, 0), (2, 0)]), 8, E2)


def test_cell_energy_examples():
    T, ell = 5, 0.7
    g = Grid.from_shape((T, T), 1.0)
    assert cell_energy(vfield(g, np.ones(T * T)), ell, T) == 0
    assert cell_energy(vfield(g, np.zeros(T * T)), ell, T) == pytest.approx(ell * T / 2)
    v = np.ones(T * T)
    v[12] = 0.0
    assert cell_energy(vfield(g, v), ell, T) == pytest.approx((ell + 4 / ell) / (2 * T))


def test_coordinate_cell_value():
    res = solve_cell(CellSpec(64, E2, 1.0))
    assert abs(res.phi - GOLD) / GOLD < 0.02
    v, phi, ch = res
    assert 0 <= v.values.min() and v.values.max() <= 1
    np.testing.assert_array_equal(v.values[v.grid.index_map[ch.points[:, 0] - v.grid.origin[0].astype(int),
                                                             ch.points[:, 1] - v.grid.origin[1].astype(int)]], 0)


def test_coordinate_directions_agree():
    a = solve_cell(CellSpec(32, E2, 1.3)).phi
    b = solve_cell(CellSpec(32, np.array([1.0, 0.0]), 1.3)).phi
    assert a == pytest.approx(b, rel=1e-9)


@pytest.mark.parametrize("ell", [0.5, 1.0, 2.0, 4.0])
def test_columns_decouple(ell):
    # the middle column is a two-sided one-dimensional profile
    T = 64
    res = solve_cell(CellSpec(T, E2, ell))
    half = c_ell_numeric(ell, 1, T // 2 - 1)[0]
    assert column_energy(res.v, ell, 0) == pytest.approx(2 * half, rel=1e-6)


def test_non_increasing_in_T():
    for nu, ell in ((E2, 1.0), (np.array([1.0, 0.0]), 0.5)):
        vals = [solve_cell(CellSpec(T, nu, ell)).phi for T in range(8, 49, 4)]
        assert np.all(np.diff(vals) <= 1e-9)


def test_diagonal_value():
    phi = solve_cell(CellSpec(64, DIAG, 1.0)).phi
    ref = math.sqrt(2) * c_ell_closed_form(1.0, 2)
    assert abs(phi - ref) / ref < 0.03


def test_local_search_not_worse():
    for nu in (E2, nu_from_angle(30)):
        flat = solve_cell(CellSpec(16, nu, 1.0)).phi
        ls = solve_cell(CellSpec(16, nu, 1.0, channel_policy="local-search", budget=60))
        assert ls.phi <= flat + 1e-12
        assert ls.evaluations <= 60


def test_local_search_removes_detour():
    T = 16
    flat = flat_channel(CellSpec(T, E2, 1.0)).points.tolist()
    k = flat.index([-1, 1])
    assert flat[k + 1] == [0, 1]
    detour = flat[:k + 1] + [[-1, 2], [0, 2]] + flat[k + 1:]
    path = LatticePath(detour)
    given = solve_cell(CellSpec(T, E2, 1.0, channel_policy="given", channel=path)).phi
    ls = solve_cell(CellSpec(T, E2, 1.0, channel_policy="local-search", channel=path, budget=200))
    assert ls.phi < given
    assert ls.phi <= solve_cell(CellSpec(T, E2, 1.0)).phi + 1e-12


def test_closed_form_examples():
    assert c_ell_closed_form(1, 1) == pytest.approx(GOLD, abs=1e-12)
    assert abs(c_ell_closed_form(1e-6, 1) - 1) < 1e-5
    assert abs(c_ell_closed_form(10, 1) - 10.0997) < 1e-2
    with pytest.raises(ValueError):
        c_ell_closed_form(0, 1)


@pytest.mark.parametrize("ell", [0.25, 0.5, 1.0, 2.0, 4.0])
@pytest.mark.parametrize("n", [1, 2])
def test_closed_form_matches_oracle(ell, n):
    assert abs(c_ell_closed_form(ell, n) - c_ell_numeric(ell, n, 200)[0]) <= 1e-6


def test_profile_shape():
    e, v = c_ell_numeric(1.0, 1, 200)
    assert e == pytest.approx(GOLD, abs=1e-6)
    assert np.all(np.diff(v[:30]) > 0) and np.all(np.diff(v) >= 0)
    r = profile_root(1.0, 1)
    assert r * r - 3 * r + 1 == pytest.approx(0, abs=1e-14)
    i = np.arange(100)
    np.testing.assert_allclose(v[:100], 1 - r**i, atol=1e-8)
    with pytest.raises(ValueError):
        c_ell_numeric(1.0, 1, 4)


def test_bounds_and_lattice_directions():
    assert lower_bound(4, 64) == 2
    assert lower_bound(0.5, 64) == pytest.approx((64 - 2**0.5) / 64)
    assert upper_bound(1, E2, 64) == pytest.approx(3 * (1 + 5 / 64))
    assert is_lattice_direction(E2) and is_lattice_direction(DIAG)
    assert not is_lattice_direction(nu_from_angle(30))
    assert math.isnan(extrapolate([64], [1.0]))
    assert extrapolate([10, 20, 40], [1 + 3 / 10, 1 + 3 / 20, 1 + 3 / 40]) == pytest.approx(1.0)


def test_large_ell_lower_bound():
    for ang in (0, 20, 45):
        assert solve_cell(CellSpec(32, nu_from_angle(ang), 4.0)).phi >= 2


def test_regime_examples():
    rows = regime_report([8.0], [90.0], [64])
    assert 1 <= rows[0].phi_T / 8 <= 1 + 2 / 64 + 0.05
    assert all(r.lower_bound_ok for r in rows)
    # the small-ell limit shows up after extrapolation; finite cubes carry a 1/T corner excess
    rows = regime_report([0.1], [90.0], [64, 128, 256])
    assert 0.98 <= rows[0].phi_extrapolated <= 1.15
    assert [r.T for r in rows] == [64, 128, 256]
    with pytest.raises(ValueError):
        regime_report([1.0], [0.0], [8])


def test_cube_grid_counts():
    for T in (8, 9, 16):
        assert cube_grid(T, E2).size == T * T
