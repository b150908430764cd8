import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lipmax import fixtures
from lipmax.grid import Cube, FunctionFamily, GridFunction, average, enumerate_cubes, indicator, make_grid, sample
from lipmax.norms import (bmo_norm, distribution, lipschitz_oscillation, lipschitz_pairwise,
                          lipschitz_pairwise_sampled, lp_norm, morrey_norm, mq_deviation, negativity_defect,
                          weak_constant)
from lipmax.operators import local_mf, maximal_commutator
from lipmax.scan import layer_cake_check


def rand(grid, seed):
    return GridFunction(grid, np.random.default_rng(seed).normal(size=grid.shape))


def test_lp_norms():
    f = fixtures.b4()
    assert lp_norm(f, 1) == pytest.approx(1.5)
    assert lp_norm(f, 2) == pytest.approx(math.sqrt(14 * 0.25))
    assert lp_norm(f, math.inf) == 3.0
    with pytest.raises(ValueError):
        lp_norm(f, 0.5)


def test_distribution_step_function():
    d = distribution(GridFunction(make_grid(1, 4, 0.25), [3.0, -1.0, 1.0, 0.0]))
    np.testing.assert_array_equal(d.thresholds, [3.0, 1.0])
    np.testing.assert_allclose(d.measures, [0.25, 0.75])
    assert d(3.0) == 0.0
    assert d(2.0) == 0.25
    assert d(1.0) == 0.25
    assert d(0.5) == 0.75
    assert d(0.0) == 0.75
    assert d.integral() == pytest.approx(1.25)


def test_weak_constant_closed_form():
    grid = make_grid(1, 4, 0.25)
    g = GridFunction(grid, [4.0, 2.0, 0.0, 0.0])
    f = GridFunction(grid, [1.0, 0.0, 0.0, 0.0])
    beta = 0.5
    # max(4 * 0.25**0.5, 2 * 0.5**0.5) / 0.25
    assert weak_constant(g, f, beta) == pytest.approx(max(4 * 0.5, 2 * math.sqrt(0.5)) / 0.25)
    with pytest.raises(ValueError):
        weak_constant(g, f.like(np.zeros(4)), beta)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(1, 2))
def test_layer_cake_identity(seed, n):
    grid = make_grid(n, 9 if n == 1 else 4)
    g = rand(grid, seed)
    d = distribution(g)
    assert d.integral() == pytest.approx(lp_norm(g, 1), rel=1e-12)


def test_layer_cake_fixture():
    rec = layer_cake_check(fixtures.b4(), Cube((0,), 4))
    assert rec["direct"] == pytest.approx(1.0, rel=1e-12)
    assert rec["layer_cake"] == pytest.approx(1.0, rel=1e-12)
    assert rec["exact"] and rec["dominated"]


def test_layer_cake_constant_is_zero():
    grid = make_grid(1, 6)
    rec = layer_cake_check(GridFunction(grid, np.full(6, 2.0)), Cube((1,), 4))
    assert rec["direct"] == 0.0 and rec["layer_cake"] == 0.0


@pytest.mark.parametrize("n,N", [(1, 16), (2, 8)])
def test_morrey_norm_of_indicators(n, N):
    grid = make_grid(n, N)
    for Q in itertools.islice(enumerate_cubes(grid), 0, None, 7):
        for p, lam in itertools.product((1, 2), (0.25, 0.5)):
            expected = Q.measure(grid) ** ((n - lam) / (n * p))
            assert morrey_norm(indicator(Q, grid), p, lam) == pytest.approx(expected, rel=1e-10)


def test_morrey_norm_endpoints():
    grid = make_grid(1, 8)
    f = rand(grid, 2)
    assert morrey_norm(f, 2, 0.0) == pytest.approx(lp_norm(f, 2), rel=1e-12)
    assert morrey_norm(f, 2, 1.0) == pytest.approx(np.abs(f.values).max(), rel=1e-12)
    with pytest.raises(ValueError):
        morrey_norm(f, 0.5, 0.2)
    with pytest.raises(ValueError):
        morrey_norm(f, 2, 1.5)


def test_morrey_argmax_first_wins():
    grid = make_grid(1, 4)
    value, cube = morrey_norm(GridFunction(grid, np.ones(4)), 1, 1.0, argmax=True)
    assert value == pytest.approx(1.0)
    assert str(cube) == "0:1"


def test_lipschitz_pairwise_of_power():
    grid = make_grid(1, 16)
    x0 = grid.axis_centers()[5]
    b = sample(FunctionFamily("power", {"beta": 0.5, "x0": x0}), grid)
    # |x|^beta is beta-Hoelder with constant 1, attained at pairs with one point at x0
    assert lipschitz_pairwise(b, 0.5) == pytest.approx(1.0, rel=1e-12)
    assert lipschitz_pairwise_sampled(b, 0.5, 500, seed=1) <= lipschitz_pairwise(b, 0.5) + 1e-15
    with pytest.raises(ValueError):
        lipschitz_pairwise(b, 1.0)


def test_lipschitz_oscillation_brute():
    grid = make_grid(2, 4)
    b = rand(grid, 5)
    beta = 0.3
    brute = 0.0
    for Q in enumerate_cubes(grid):
        v = b.values[Q.slices]
        osc = np.mean(np.abs(v - average(b, Q)))
        brute = max(brute, osc * Q.measure(grid) ** (-beta / 2))
    assert lipschitz_oscillation(b, beta) == pytest.approx(brute, rel=1e-12)


def test_bmo_norm_of_constant_is_zero():
    grid = make_grid(1, 5)
    assert bmo_norm(GridFunction(grid, np.full(5, 7.0))) == 0.0


@pytest.mark.parametrize("q", [1.0, 2.0])
def test_mq_deviation_brute(q):
    grid = make_grid(1, 7)
    b = GridFunction(grid, np.abs(rand(grid, 6).values))
    beta = 0.4
    brute = 0.0
    for Q in enumerate_cubes(grid):
        dev = np.abs(b.values[Q.slices] - local_mf(b, Q).values)
        val = np.mean(dev ** q) ** (1 / q) * Q.measure(grid) ** (-beta)
        brute = max(brute, val)
    assert mq_deviation(b, beta, q) == pytest.approx(brute, rel=1e-12)


def test_negativity_defect():
    grid = make_grid(1, 8)
    assert negativity_defect(GridFunction(grid, np.abs(rand(grid, 1).values)), 0.5) == 0.0
    # constant -1: attained on side-1 cubes, h**(-beta)
    value, cube = negativity_defect(GridFunction(grid, -np.ones(8)), 0.5, argmax=True)
    assert value == pytest.approx(8 ** 0.5, rel=1e-12)
    assert cube.side == 1


def test_pointwise_necessity_bound():
    grid = make_grid(1, 12)
    b = rand(grid, 3)
    for Q in enumerate_cubes(grid):
        mb = maximal_commutator(b, indicator(Q, grid)).values[Q.slices]
        assert np.all(np.abs(b.values[Q.slices] - average(b, Q)) <= mb + 1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31), st.floats(0.1, 10))
def test_functionals_homogeneous(seed, c):
    grid = make_grid(1, 8)
    b = rand(grid, seed)
    cb = b.like(c * b.values)
    assert lipschitz_oscillation(cb, 0.5) == pytest.approx(c * lipschitz_oscillation(b, 0.5), rel=1e-10)
    assert morrey_norm(cb, 2, 0.5) == pytest.approx(c * morrey_norm(b, 2, 0.5), rel=1e-10)
    assert negativity_defect(cb, 0.5) == pytest.approx(c * negativity_defect(b, 0.5), rel=1e-10)
