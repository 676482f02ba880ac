import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gptrap.core import (
    PairPotential,
    ParameterError,
    TrapPotential,
    build_radial_grid,
    eval_trap,
    radial_integral,
    sphere_area,
)


def test_sphere_area():
    assert sphere_area(2) == pytest.approx(2 * np.pi, rel=1e-15)
    assert sphere_area(3) == pytest.approx(4 * np.pi, rel=1e-15)


@pytest.mark.parametrize("D", [2, 3])
def test_gaussian_normalization(D):
    # int exp(-r^2) d^D x = pi^(D/2); in 2D the leading error is the h^4 Euler-Maclaurin term
    grid = build_radial_grid(D, 8.0, 801)
    val = radial_integral(np.exp(-grid.r**2), grid)
    tol = 1e-12 if D == 3 else grid.h**4
    assert val == pytest.approx(np.pi ** (D / 2), rel=tol)


@pytest.mark.parametrize("D", [2, 3])
def test_simpson_method(D):
    grid = build_radial_grid(D, 8.0, 801)
    val = radial_integral(np.exp(-grid.r**2), grid, method="simpson")
    assert val == pytest.approx(np.pi ** (D / 2), rel=1e-9)


def test_grid_errors():
    with pytest.raises(ParameterError) as e:
        build_radial_grid(4, 1.0, 100)
    assert e.value.key == "dim"
    with pytest.raises(ParameterError) as e:
        build_radial_grid(3, -1.0, 100)
    assert e.value.key == "r_max"
    with pytest.raises(ParameterError) as e:
        build_radial_grid(3, 1.0, 5)
    assert e.value.key == "n_points"
    grid = build_radial_grid(3, 1.0, 100)
    with pytest.raises(ParameterError) as e:
        radial_integral(np.ones(99), grid)
    assert e.value.key == "values"


def test_grid_arrays_readonly():
    grid = build_radial_grid(3, 1.0, 100)
    with pytest.raises(ValueError):
        grid.r[3] = 1.0
    assert grid.r[0] == 0.0 and grid.r[-1] == 1.0


@settings(max_examples=30, deadline=None)
@given(D=st.sampled_from([2, 3]), n=st.integers(16, 400), r_max=st.floats(0.5, 50.0))
def test_weights_positive_and_sum_to_ball_volume(D, n, r_max):
    grid = build_radial_grid(D, r_max, n)
    w = grid.weights
    assert np.all(w[1:] > 0) and w[0] >= 0
    # integrating 1 gives the ball volume up to O(h^2)
    ball = sphere_area(D) * r_max**D / D
    assert abs(w.sum() - ball) / ball < 2.0 * (D - 1) / (n - 1) ** 2 + 1e-12


@settings(max_examples=30, deadline=None)
@given(alpha=st.floats(0.3, 5.0), D=st.sampled_from([2, 3]))
def test_gaussian_width_family(alpha, D):
    grid = build_radial_grid(D, 12.0 / np.sqrt(alpha), 2001)
    val = radial_integral(np.exp(-alpha * grid.r**2), grid)
    assert val == pytest.approx((np.pi / alpha) ** (D / 2), rel=1e-10)


def test_trap_homogeneous_and_tabulated():
    trap = TrapPotential(s=2.0, c=0.5)
    assert trap(np.array([0.0, 2.0])).tolist() == [0.0, 2.0]
    tab = TrapPotential(table=([0.0, 1.0, 2.0], [0.0, 1.0, 4.0]))
    assert not tab.is_homogeneous
    assert tab(np.array([0.5, 3.0])).tolist() == [0.5, 7.0]
    assert eval_trap(trap, 1.0) == 0.5
    with pytest.raises(ParameterError):
        eval_trap(trap, -1.0)
    with pytest.raises(ParameterError) as e:
        TrapPotential(s=-1.0)
    assert e.value.key == "s"


def test_pair_potentials():
    hc = PairPotential.hard_core(0.5)
    assert np.isinf(hc(0.2)) and hc(0.6) == 0.0 and hc.range == 0.5
    ss = PairPotential.soft_sphere(3.0, 1.0)
    assert ss(np.array([0.5, 1.5])).tolist() == [3.0, 0.0]
    tb = PairPotential.tabulated([0.0, 1.0], [2.0, 0.0])
    assert tb(0.5) == 1.0 and tb(2.0) == 0.0
    with pytest.raises(ParameterError):
        PairPotential.soft_sphere(-1.0, 1.0)
    with pytest.raises(ParameterError):
        PairPotential.tabulated([0.0, 1.0], [-1.0, 0.0])
