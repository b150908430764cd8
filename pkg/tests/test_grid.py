import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lipmax.grid import (Cube, Exponents, FunctionFamily, GridFunction, average, cube_count, enumerate_cubes,
                         indicator, make_grid, sample)


def test_grid_defaults():
    g = make_grid(2, 8)
    assert g.h == 0.125
    assert g.shape == (8, 8)
    assert g.cell_count == 64
    assert g.cell_volume == 0.125 ** 2
    assert g.cube_measure(3) == pytest.approx((3 * 0.125) ** 2)
    assert g.centers().shape == (8, 8, 2)
    np.testing.assert_allclose(g.axis_centers(), (np.arange(8) + 0.5) / 8)


@pytest.mark.parametrize("args", [(0, 4), (1, 0), (1, 4, -1.0), (1, 4, float("nan"))])
def test_grid_rejects_bad_arguments(args):
    with pytest.raises(ValueError):
        make_grid(*args)


@pytest.mark.parametrize("n,N", [(1, 1), (1, 7), (2, 5), (3, 3)])
def test_cube_count_matches_formula(n, N):
    grid = make_grid(n, N)
    cubes = list(enumerate_cubes(grid))
    assert len(cubes) == sum((N - s + 1) ** n for s in range(1, N + 1))
    assert len(cubes) == cube_count(grid, range(1, N + 1))
    assert len(set(map(str, cubes))) == len(cubes)


def test_enumeration_order_is_side_then_row_major():
    cubes = [str(q) for q in enumerate_cubes(make_grid(2, 2))]
    assert cubes == ["0,0:1", "0,1:1", "1,0:1", "1,1:1", "0,0:2"]


def test_enumeration_rejects_bad_scales():
    grid = make_grid(1, 4)
    with pytest.raises(ValueError):
        list(enumerate_cubes(grid, [5]))
    with pytest.raises(ValueError):
        list(enumerate_cubes(grid, []))


def test_cube_parse_and_check():
    q = Cube.parse("1,2:3")
    assert q.offset == (1, 2) and q.side == 3
    assert str(q) == "1,2:3"
    q.check(make_grid(2, 5))
    with pytest.raises(ValueError):
        q.check(make_grid(2, 4))
    with pytest.raises(ValueError):
        Cube.parse("1,2")
    with pytest.raises(ValueError):
        Cube((0,), 0)


def test_grid_function_is_read_only_and_finite():
    grid = make_grid(1, 3)
    f = GridFunction(grid, [1, 2, 3])
    with pytest.raises(ValueError):
        f.values[0] = 5
    with pytest.raises(ValueError):
        GridFunction(grid, [1, np.inf, 3])
    with pytest.raises(ValueError):
        GridFunction(grid, [1, 2])


def test_restrict_keeps_h():
    grid = make_grid(1, 8)
    f = GridFunction(grid, np.arange(8.0))
    r = f.restrict(Cube((2,), 3))
    assert r.grid.N == 3 and r.grid.h == grid.h
    np.testing.assert_array_equal(r.values, [2, 3, 4])


def test_average_of_indicator_is_exact():
    grid = make_grid(2, 6)
    Q = Cube((1, 2), 3)
    chi = indicator(Q, grid)
    assert average(chi, Q) == 1.0
    assert average(chi, Cube((0, 0), 6)) == 9 / 36


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 31), st.floats(-3, 3), st.floats(-3, 3))
def test_average_linear_and_bounded(seed, a, c):
    rng = np.random.default_rng(seed)
    grid = make_grid(2, 5)
    f = GridFunction(grid, rng.normal(size=grid.shape))
    g = GridFunction(grid, rng.normal(size=grid.shape))
    for Q in enumerate_cubes(grid, [1, 2, 4]):
        lin = average(f.like(a * f.values + c * g.values), Q)
        assert lin == pytest.approx(a * average(f, Q) + c * average(g, Q), abs=1e-12)
        v = f.values[Q.slices]
        assert v.min() - 1e-12 <= average(f, Q) <= v.max() + 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(1, 6))
def test_oscillation_has_mean_zero(seed, s):
    grid = make_grid(1, 6)
    f = GridFunction(grid, np.random.default_rng(seed).normal(size=6))
    for Q in enumerate_cubes(grid, [s]):
        dev = (f.values[Q.slices] - average(f, Q)) * grid.cell_volume
        assert abs(dev.sum()) <= 1e-12


def test_constant_family():
    f = sample(FunctionFamily("constant", {"value": 3}), make_grid(2, 4))
    assert np.all(f.values == 3)


def test_power_family_vanishes_at_its_center():
    grid = make_grid(1, 8)
    x0 = grid.axis_centers()[3]
    f = sample(FunctionFamily("power", {"beta": 0.4, "x0": x0}), grid)
    assert f.values[3] == 0
    assert np.all(f.values >= 0)


def test_cone_min_with_one_anchor_is_shifted_power():
    grid = make_grid(2, 6)
    a = [0.3, 0.6]
    cone = sample(FunctionFamily("cone_min", {"beta": 0.5, "anchors": [a], "offsets": [0.7]}), grid)
    power = sample(FunctionFamily("power", {"beta": 0.5, "x0": a}), grid)
    np.testing.assert_allclose(cone.values, power.values + 0.7, rtol=0, atol=1e-15)


def test_family_validation():
    with pytest.raises(ValueError):
        FunctionFamily("spline")
    with pytest.raises(ValueError):
        FunctionFamily("power", {"beta": 1.5})
    with pytest.raises(ValueError):
        FunctionFamily("random_smooth")
    with pytest.raises(ValueError):
        FunctionFamily("cone_min", {"beta": 0.5})


def test_sampling_is_deterministic():
    fam = FunctionFamily("random_smooth", {"positive": True}, seed=7)
    grid = make_grid(2, 8)
    assert sample(fam, grid) == sample(fam, grid)
    assert np.all(sample(fam, grid).values > 0)
    assert FunctionFamily.from_dict(fam.to_dict()) == fam


def test_log_family_is_clipped():
    grid = make_grid(1, 16)
    f = sample(FunctionFamily("log", {"amplitude": -1.0, "x0": 0.5}), grid)
    assert np.all(np.isfinite(f.values))
    assert f.values.max() == pytest.approx(-math.log(grid.h))


def test_lebesgue_exponents():
    e = Exponents.lebesgue(1, 0.5, 1.5)
    assert 1 / e.q == pytest.approx(1 / 1.5 - 0.5)
    assert e.p_conjugate == pytest.approx(3.0)
    with pytest.raises(ValueError):
        Exponents.lebesgue(1, 0.5, 2.5)


def test_morrey_exponents():
    a = Exponents.morrey_a(1, 0.4, 1.5, 0.2)
    assert 1 / a.q == pytest.approx(1 / 1.5 - 0.4 / 0.8)
    b = Exponents.morrey_b(1, 0.4, 1.5, 0.2)
    assert b.lam / b.p == pytest.approx(b.mu / b.q)
    with pytest.raises(ValueError):
        Exponents.morrey_a(1, 0.4, 1.5, 0.5)
    with pytest.raises(ValueError):
        Exponents(1, 0.5, 1.5, 2.0).check("lebesgue")
    assert Exponents.from_dict(b.to_dict()) == b
