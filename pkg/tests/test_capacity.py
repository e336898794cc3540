import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from wiener_infinity.capacity import (
    GridSpec,
    capacitary_potential,
    capacity,
    radial_capacity_exact,
    radial_potential_exact,
    whole_space_potential_bound,
)
from wiener_infinity.geometry import Ball, EmptyRegion, UnionOfBalls
from wiener_infinity.weighted_space import WeightedSpace, mu_ball, unit_sphere_area

S2 = WeightedSpace(2, 1.0)
S3 = WeightedSpace(3, 0.0)
O2, O3 = np.zeros(2), np.zeros(3)


def _radial_bvp_capacity(space, r, R):
    """Energy of the numerical solution of (t^(n-1+g) u')' = 0, u(r)=1, u(R)=0."""
    n, g = space.dimension, space.gamma
    p = n - 1 + g

    def rhs(t, y):
        return np.vstack([y[1] / t**p, np.zeros_like(t)])

    t = np.linspace(r, R, 200)
    sol = integrate.solve_bvp(rhs, lambda a, b: np.array([a[0] - 1, b[0]]), t, np.vstack([1 - (t - r) / (R - r), -np.ones_like(t)]), tol=1e-10)
    assert sol.success
    # y[1] = t^p u' is the flux, so the energy density t^p u'^2 is y[1]^2 / t^p
    e, _ = integrate.quad(lambda s: sol.sol(s)[1] ** 2 / s**p, r, R, epsabs=1e-13)
    return unit_sphere_area(n) * e


@pytest.mark.parametrize("n,g", [(3, 0.0), (2, 1.0), (3, 0.5), (4, -1.0)])
def test_radial_formula_matches_ode_oracle(n, g):
    s = WeightedSpace(n, g)
    assert radial_capacity_exact(s, 1.0, 2.0) == pytest.approx(_radial_bvp_capacity(s, 1.0, 2.0), rel=1e-7)


def test_radial_exact_examples():
    assert radial_capacity_exact(S3, 1.0, 2.0) == pytest.approx(8 * math.pi)
    assert radial_capacity_exact(S2, 1.0, 2.0) == pytest.approx(4 * math.pi)
    limit = radial_capacity_exact(S3, 1.0, math.inf)
    assert limit == pytest.approx(unit_sphere_area(3) * S3.alpha)
    assert radial_capacity_exact(S3, 1.0, 1e8) == pytest.approx(limit, rel=1e-7)
    with pytest.raises(ValueError):
        radial_capacity_exact(S3, 2.0, 1.0)


def test_empty_K_has_zero_potential_and_capacity():
    pot = capacitary_potential(S3, EmptyRegion(), (O3, 2.0), GridSpec(m=16))
    assert not pot.field.any()
    assert capacity(S3, EmptyRegion(), (O3, 2.0), GridSpec(m=16)).value == 0.0
    assert capacity(S3, UnionOfBalls(3, []), (O3, 2.0), GridSpec(m=16)).value == 0.0


def test_radial_potential_matches_closed_form():
    pot = capacitary_potential(S3, Ball(O3, 1.0), (O3, 2.0), GridSpec(m=48))
    pts = np.array([[1.2, 0.3, 0.1], [0.9, 0.9, 0.5], [0.2, 1.6, 0.4], [1.4, 1.0, 0.6]])
    assert np.allclose(pot.values_at(pts), radial_potential_exact(S3, 1.0, 2.0, pts), atol=5e-3)


@settings(max_examples=12, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_potential_lies_in_unit_interval(seed):
    rng = np.random.default_rng(seed)
    balls = [(rng.uniform(-1, 1, 2), rng.uniform(0.05, 0.5)) for _ in range(3)]
    pot = capacitary_potential(S2, UnionOfBalls(2, balls), (O2, 2.0), GridSpec(m=32))
    assert pot.field.min() >= 0.0 and pot.field.max() <= 1.0


@pytest.mark.parametrize("space,exact", [(S3, 8 * math.pi), (S2, 4 * math.pi)])
def test_capacity_approaches_radial_value(space, exact):
    n = space.dimension
    res = capacity(space, Ball(np.zeros(n), 1.0), (np.zeros(n), 2.0), GridSpec(m=64 if n == 3 else 256))
    assert res.value == pytest.approx(exact, rel=0.02)
    assert res.value == res.energy_value
    assert res.conservation_error <= 1e-6


def test_K_outside_B_is_rejected():
    with pytest.raises(ValueError, match="not contained"):
        capacity(S3, Ball((1.5, 0, 0), 1.0), (O3, 2.0), GridSpec(m=16))


def test_non_convergence_propagates():
    with pytest.raises(RuntimeError):
        capacity(S3, Ball(O3, 1.0), (O3, 2.0), GridSpec(m=32, max_iter=2))


def test_monotone_in_K():
    spec = GridSpec(m=32)
    caps = [capacity(S3, Ball(O3, r), (O3, 2.0), spec).value for r in (0.3, 0.6, 0.9, 1.2)]
    assert all(a <= b * (1 + 1e-6) for a, b in zip(caps, caps[1:]))
    two = UnionOfBalls(3, [((0.8, 0, 0), 0.3), ((-0.8, 0, 0), 0.3)])
    one = UnionOfBalls(3, [((0.8, 0, 0), 0.3)])
    assert capacity(S3, one, (O3, 2.0), spec).value <= capacity(S3, two, (O3, 2.0), spec).value


def test_anti_monotone_in_B():
    # same cell size: m scales with R
    vals = [capacity(S2, Ball(O2, 1.0), (O2, R), GridSpec(m=int(64 * R))).value for R in (2.0, 3.0, 4.0)]
    assert all(b <= a * (1 + 1e-6) for a, b in zip(vals, vals[1:]))


def test_measure_capacity_ratio_is_scale_invariant():
    s = S2
    const = s.sigma * (1 - 2.0**-s.alpha) / (unit_sphere_area(2) * s.alpha)
    exact = [mu_ball(s, r) / (r**2 * radial_capacity_exact(s, r, 2 * r)) for r in (1, 2, 4, 8)]
    assert np.allclose(exact, const, rtol=1e-12)
    num = [
        mu_ball(s, r) / (r**2 * capacity(s, Ball(O2, r), (O2, 2.0 * r), GridSpec(m=128)).value)
        for r in (1.0, 2.0, 4.0, 8.0)
    ]
    assert np.allclose(num, const, rtol=0.05)


def test_doubling_of_outer_ball():
    # cap(E, B_2t) / cap(E, B_2s) in [1, C] for t < s <= 2t; C = 1 / (1 - 2**-alpha) is the radial value
    C = 1 / (1 - 2.0**-S2.alpha)
    E = Ball((0.3, 0.0), 0.5)
    for t, s in ((1.0, 1.5), (1.0, 2.0), (2.0, 3.0)):
        a = capacity(S2, E, (O2, 2 * t), GridSpec(m=int(64 * t))).value
        b = capacity(S2, E, (O2, 2 * s), GridSpec(m=int(64 * s))).value
        assert 1 - 1e-6 <= a / b <= C


def test_whole_space_bound_examples():
    x = np.array([5.0, 0, 0])
    assert whole_space_potential_bound(S3, 1.0, 0.0, x) == 0.0
    cap = radial_capacity_exact(S3, 1.0, 2.0)
    for s in (4.0, 8.0, 16.0):
        assert whole_space_potential_bound(S3, 1.0, cap, np.array([s, 0, 0])) >= 1.0 / s
    with pytest.raises(ValueError):
        whole_space_potential_bound(S3, 1.0, cap, np.array([1.5, 0, 0]))


@pytest.mark.parametrize("space", [S3, S2, WeightedSpace(3, 0.5)], ids=["3d", "2d", "3d-g0.5"])
def test_whole_space_bound_decreasing_and_scaling(space):
    n = space.dimension
    cap = radial_capacity_exact(space, 1.0, 2.0)
    e1 = np.eye(n)[0]
    radii = 2.0 ** np.arange(2, 14)
    b = np.array([whole_space_potential_bound(space, 1.0, cap, s * e1) for s in radii])
    assert np.all(np.diff(b) < 0)
    assert b[-1] / b[-2] == pytest.approx(2.0**-space.alpha, rel=0.01)
