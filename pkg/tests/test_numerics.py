import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from wiener_infinity import discretization as disc
from wiener_infinity.capacity import GridSpec, ball_grid, capacity, radial_capacity_exact
from wiener_infinity.geometry import Ball, OutsideBall
from wiener_infinity.numerics import richardson_order, solve_spd
from wiener_infinity.weighted_space import WeightedSpace


def test_one_by_one_system():
    A = sp.csr_matrix(np.array([[4.0]]))
    x, rep = solve_spd((A, np.array([2.0])))
    assert x[0] == pytest.approx(0.5)
    assert rep.iterations == 1 and rep.converged


def test_zero_rhs_gives_zero_field():
    A = sp.diags([2.0] * 5) - sp.eye(5, k=1) - sp.eye(5, k=-1)
    x, rep = solve_spd((A.tocsr(), np.zeros(5)))
    assert not x.any() and rep.converged


def test_argument_validation():
    A = sp.csr_matrix(np.eye(2))
    with pytest.raises(ValueError):
        solve_spd((A, np.ones(2)), tol=0.0)
    with pytest.raises(ValueError):
        solve_spd((A, np.ones(2)), max_iter=0)


def _cap_operator(m):
    s = WeightedSpace(2, 1.0)
    grid = ball_grid(s, np.zeros(2), 2.0, GridSpec(m=m))
    mask = disc.build_mask(s, grid, [(Ball(np.zeros(2), 1.0), 1.0), (OutsideBall(np.zeros(2), 2.0), 0.0)])
    return disc.assemble(s, grid, mask)


def test_capacitary_system_converges():
    op = _cap_operator(256)
    x, rep = solve_spd(op, 1e-10)
    assert rep.converged and rep.relative_residual <= 1e-10
    assert rep.iterations > 10


def test_preconditioned_residual_nonincreasing():
    _, rep = solve_spd(_cap_operator(64), 1e-10)
    h = np.asarray(rep.history)
    assert np.all(np.diff(h) <= 1e-14 * h[0])


def test_non_convergence_is_reported():
    _, rep = solve_spd(_cap_operator(64), 1e-12, max_iter=3)
    assert not rep.converged and rep.relative_residual > 1e-12


def test_bitwise_reproducible():
    op = _cap_operator(64)
    x1, _ = solve_spd(op, 1e-10)
    x2, _ = solve_spd(op, 1e-10)
    assert np.array_equal(x1, x2)


@settings(max_examples=30, deadline=None)
@given(c=st.floats(-10, 10), k=st.floats(0.1, 10), h=st.floats(0.01, 1.0))
def test_richardson_on_exact_sequences(c, k, h):
    assert richardson_order([c + k * h, c + k * h / 2, c + k * h / 4]) == pytest.approx(1.0, abs=1e-6)
    assert richardson_order([c + k * h**2, c + k * h**2 / 4, c + k * h**2 / 16]) == pytest.approx(2.0, abs=1e-5)


def test_richardson_indeterminate():
    assert math.isnan(richardson_order([1.0, 1.0, 1.0]))
    assert math.isnan(richardson_order([1.0, 2.0, 1.0]))


def test_capacity_refinement_order_2d():
    s = WeightedSpace(2, 1.0)
    exact = radial_capacity_exact(s, 1.0, 2.0)
    vals = [capacity(s, Ball(np.zeros(2), 1.0), (np.zeros(2), 2.0), GridSpec(m=m)).value for m in (64, 128, 256)]
    errs = [v - exact for v in vals]
    assert richardson_order(errs) >= 0.8
