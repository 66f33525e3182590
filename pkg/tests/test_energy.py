import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from atlattice import checks
from atlattice.energy import (EnergyParams, PiecewiseFn1D, bulk_energy, continuum_at_1d,
                              energy_breakdown, eta_energy, fidelity_energy, ms_energy_1d,
                              recovery_pair_1d, rescaled_energy, step_datum_1d, surface_energy,
                              total_energy)
from atlattice.lattice import Grid, PiecewiseAffine, SubRegion, build_grid, truncate, ufield, vfield

P11 = EnergyParams(1.0, 1.0)
G3 = Grid.from_shape(3, 1.0)


def test_params():
    p = EnergyParams.from_ell(0.25, 0.01)
    assert p.ell == pytest.approx(0.25, rel=1e-15)
    assert p.eta == 0
    assert p.solver_mode().eta == pytest.approx(1e-3 * p.epsilon)
    for bad in [dict(epsilon=0, delta=1), dict(epsilon=1, delta=-1), dict(epsilon=1, delta=1, eta=-1)]:
        with pytest.raises(ValueError):
            EnergyParams(**bad)


def test_bulk_hand_value():
    assert bulk_energy(ufield(G3, [0, 0, 1]), vfield(G3, [1, 1, 1]), P11) == pytest.approx(1.0)


def test_bulk_base_site_weight():
    # v only at the right endpoint of the bond: weight (0 + 1) / 2
    assert bulk_energy(ufield(G3, [0, 0, 1]), vfield(G3, [1, 0, 1]), P11) == pytest.approx(0.5)


def test_bulk_trivial_cases():
    rng = np.random.default_rng(1)
    v = vfield(G3, rng.random(3))
    assert bulk_energy(ufield(G3, [2, 2, 2]), v, P11) == 0
    assert bulk_energy(ufield(G3, rng.normal(size=3)), vfield(G3, np.zeros(3)), P11) == 0


def test_eta_part_reported_separately():
    p = EnergyParams(1.0, 1.0, eta=0.1)
    u = ufield(G3, [0, 0, 1])
    assert bulk_energy(u, vfield(G3, np.zeros(3)), p) == 0
    assert eta_energy(u, p) == pytest.approx(0.1)
    e = energy_breakdown(u, vfield(G3, np.zeros(3)), p)
    assert e.objective - e.total == pytest.approx(0.1)


def test_surface_hand_values():
    assert surface_energy(vfield(G3, [1, 0, 1]), P11) == pytest.approx(1.5)
    assert surface_energy(vfield(G3, np.ones(3)), P11) == 0
    g = Grid.from_shape((4, 5), 0.2)
    p = EnergyParams(0.7, 0.2)
    assert surface_energy(vfield(g, np.zeros(20)), p) == pytest.approx(20 * 0.2**2 / (2 * 0.7))


def test_total_and_sentinel():
    assert total_energy(ufield(G3, [0, 0, 1]), vfield(G3, [1, 1, 1]), P11) == pytest.approx(1.0)
    # u as in the bulk example and v as in the surface example
    u = ufield(G3, [0, 0, 1])
    v = vfield(G3, [1, 0, 1])
    assert total_energy(u, v, P11) == pytest.approx(bulk_energy(u, v, P11) + 1.5)
    bad = ufield(G3, [1, 1.5, 1])  # U-kind carrier of an inadmissible v
    assert math.isinf(total_energy(u, bad, P11))
    assert math.isinf(rescaled_energy(u, bad, P11))


def test_fidelity_examples():
    u = ufield(G3, [0, 0, 1])
    assert fidelity_energy(u, vfield(G3, np.ones(3)), u, P11) == pytest.approx(1.0)
    g = Grid.from_shape((3, 3), 0.5)
    p = EnergyParams(1.0, 0.5)
    c = 1.7
    e = fidelity_energy(ufield(g, np.full(9, c)), vfield(g, np.ones(9)), ufield(g, np.zeros(9)), p)
    assert e == pytest.approx(9 * 0.25 * c * c)


def test_mismatched_grids_rejected():
    with pytest.raises(ValueError):
        bulk_energy(ufield(G3, [0, 0, 1]), vfield(Grid.from_shape(4, 1.0), np.ones(4)), P11)
    with pytest.raises(ValueError):
        surface_energy(vfield(Grid.from_shape(3, 0.5), np.ones(3)), P11)


def test_rescaled_small_example():
    g = Grid.from_shape(2, 4.0)
    p = EnergyParams(1.0, 4.0)
    w = ufield(g, [0, 1])
    v = vfield(g, [1, 1])
    ref = 0.25 * total_energy(ufield(g, 2 * w.values), v, p)
    assert rescaled_energy(w, v, p) == pytest.approx(ref, rel=1e-14)
    assert rescaled_energy(ufield(g, [3, 3]), v, p) == 0


@given(st.integers(0, 2**31))
def test_rescaling_identity(seed):
    ok, detail = checks.suite_rescaling(np.random.default_rng(seed), trials=5)
    assert ok, detail


def test_zero_iff_trivial():
    g = Grid.from_shape((4, 4), 0.25)
    p = EnergyParams(0.5, 0.25)
    mask = np.zeros(16, bool)
    mask[[0, 1]] = True  # two disconnected pieces of a region may carry different constants
    region = SubRegion(g, mask | (np.arange(16) == 15))
    u = np.zeros(16)
    u[15] = 4.0
    assert total_energy(ufield(g, u), vfield(g, np.ones(16)), p, region) == 0
    assert total_energy(ufield(g, u), vfield(g, np.ones(16)), p) > 0


def test_locality_additivity():
    rng = np.random.default_rng(3)
    g = Grid.from_shape((8, 8), 0.1)
    p = EnergyParams(0.3, 0.1)
    u = ufield(g, rng.normal(size=64))
    v = vfield(g, rng.random(64))
    mi = g.multi_index
    r1 = mi[:, 0] < 3
    r2 = mi[:, 0] >= 5
    both = total_energy(u, v, p, r1 | r2)
    assert both == pytest.approx(total_energy(u, v, p, r1) + total_energy(u, v, p, r2), rel=1e-12)


def test_translation_invariance():
    rng = np.random.default_rng(4)
    g = Grid.from_shape((10, 10), 0.1)
    p = EnergyParams(0.2, 0.1)
    U = np.zeros((10, 10))
    Vv = np.ones((10, 10))
    U[2:6, 2:6] = rng.normal(size=(4, 4))
    Vv[2:6, 2:6] = rng.random((4, 4))
    e = total_energy(ufield(g, U.ravel()), vfield(g, Vv.ravel()), p)
    e2 = total_energy(ufield(g, np.roll(U, 1, 0).ravel()), vfield(g, np.roll(Vv, 1, 0).ravel()), p)
    assert e == pytest.approx(e2, rel=1e-12)


@given(st.integers(0, 2**31))
def test_symmetries_and_shift(seed):
    ok, detail = checks.suite_energy_symmetries(np.random.default_rng(seed), trials=3)
    assert ok, detail


@given(st.integers(0, 2**31))
def test_truncation_decreases_energy(seed):
    rng = np.random.default_rng(seed)
    g = Grid.from_shape((6, 6), 0.2)
    p = EnergyParams(0.4, 0.2)
    u = ufield(g, 5 * rng.normal(size=36))
    v = vfield(g, rng.random(36))
    m = rng.uniform(0, 6)
    assert total_energy(truncate(u, m), v, p) <= total_energy(u, v, p) * (1 + 1e-12)


@given(st.integers(0, 2**31))
def test_interpolation_bound(seed):
    ok, detail = checks.suite_interpolation_bound(np.random.default_rng(seed), trials=5)
    assert ok, detail


def test_continuum_examples():
    s, L = 1.7, 2.5
    u = PiecewiseAffine([0, L], [0, s * L])
    one = PiecewiseAffine([0, L], [1, 1])
    assert continuum_at_1d(u, one, (0, L), 0.3) == pytest.approx(s * s * L)
    v = PiecewiseAffine([0, 1], [0, 1])
    const = PiecewiseAffine([0, 1], [2, 2])
    assert continuum_at_1d(const, v, (0, 1), 1.0) == pytest.approx(2 / 3)
    with pytest.raises(ValueError):
        continuum_at_1d(const, v, (0, 2), 1.0)


def test_continuum_against_quadrature():
    rng = np.random.default_rng(5)
    x = np.sort(rng.uniform(0, 1, 6))
    u = PiecewiseAffine(x, rng.normal(size=6))
    v = PiecewiseAffine(x, rng.random(6))
    eps = 0.3
    a, b = x[0] + 0.01, x[-1] - 0.02
    t = np.linspace(a, b, 400001)
    du = np.gradient(u(t), t)
    dv = np.gradient(v(t), t)
    f = v(t) ** 2 * du ** 2 + 0.5 * ((v(t) - 1) ** 2 / eps + eps * dv ** 2)
    ref = np.trapezoid(f, t) if hasattr(np, "trapezoid") else np.trapz(f, t)
    assert continuum_at_1d(u, v, (a, b), eps) == pytest.approx(ref, rel=1e-3)


def test_ms_examples():
    assert ms_energy_1d(PiecewiseFn1D.step(0, 1, 0.5, 0, 3)) == 1
    assert ms_energy_1d(PiecewiseFn1D([0, 2], [0], [1.5])) == pytest.approx(1.5**2 * 2)
    f = PiecewiseFn1D([0, 0.3, 0.6, 1], [0, 1, 0], [1, 1, 1])
    assert ms_energy_1d(f) == pytest.approx(3.0)
    # a continuous kink is not a jump
    assert PiecewiseFn1D([0, 1, 2], [0, 1], [1, -1]).jump_points.size == 0
    with pytest.raises(ValueError):
        PiecewiseFn1D([0, 0], [0], [0])


def test_recovery_pair_shape_and_bound():
    eps = 1 / 64
    d = eps / 16
    p = EnergyParams(eps, d)
    g = build_grid(0, 1, d)
    u, v = recovery_pair_1d(g, 0.5, 1.0, p)
    x = g.coords[:, 0]
    far = np.abs(x - 0.5) > 0.4
    assert np.all(v.values[far] == 1.0)
    np.testing.assert_array_equal(u.values[far], (x[far] > 0.5).astype(float))
    assert v.values[np.argmin(np.abs(x - 0.5))] == 0
    e = total_energy(u, v, p)
    assert 1 - 1e-6 <= e <= 1.1
    with pytest.raises(ValueError):
        recovery_pair_1d(g, 0.5, 1.0, p, horizon=0)


def test_step_datum_cell_averages():
    g = Grid.from_shape(8, 0.125)
    s = step_datum_1d(g, 0.3, 10.0)
    # cell [0.25, 0.375) is 60% above the jump
    np.testing.assert_allclose(s.values, [0, 0, 6, 10, 10, 10, 10, 10])
