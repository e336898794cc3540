import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from wiener_infinity.weighted_space import (
    DIAGONAL_PERTURBED,
    WeightedSpace,
    mu_ball,
    mu_ball_bounds,
    unit_ball_volume,
    weight_at,
)


def test_weight_at_examples():
    assert weight_at(WeightedSpace(3, 0.0), (1, 2, 2)) == pytest.approx(1.0)
    assert weight_at(WeightedSpace(2, 1.0), (3, 4)) == pytest.approx(5.0)
    assert weight_at(WeightedSpace(3, -0.5), (4, 0, 0)) == pytest.approx(0.5)


def test_weight_at_origin_is_rejected():
    with pytest.raises(ValueError):
        weight_at(WeightedSpace(3, 0.0), (0, 0, 0))


@pytest.mark.parametrize("n,g", [(2, 0.0), (3, -1.0), (2, -0.5), (4, -2.0)])
def test_gamma_outside_range_rejected(n, g):
    with pytest.raises(ValueError, match="admissible range"):
        WeightedSpace(n, g)


def test_derived_alpha():
    assert WeightedSpace(3, 0.5).alpha == pytest.approx(1.5)
    assert WeightedSpace(2, 1.0).alpha == pytest.approx(1.0)


def test_mu_ball_examples():
    assert mu_ball(WeightedSpace(3, 0.0), 1.0) == pytest.approx(4 * math.pi / 3)
    assert mu_ball(WeightedSpace(3, 1.0), 2.0) == pytest.approx(16 * math.pi)
    # 2D, gamma = 1: compare with the 1-D quadrature of 2 pi r * r
    quad, _ = integrate.quad(lambda r: 2 * math.pi * r * r, 0, 1)
    assert mu_ball(WeightedSpace(2, 1.0), 1.0) == pytest.approx(quad, rel=1e-12)
    assert quad == pytest.approx(2 * math.pi / 3)


@settings(max_examples=60, deadline=None)
@given(
    n=st.integers(2, 5),
    g=st.floats(-1.9, 3.0),
    r=st.floats(0.01, 100.0),
    s=st.floats(0.01, 100.0),
)
def test_mu_ball_scaling(n, g, r, s):
    if n + g <= 2.05:
        return
    sp = WeightedSpace(n, g)
    assert mu_ball(sp, r * s) == pytest.approx(s ** (n + g) * mu_ball(sp, r), rel=1e-12)


def test_perturbed_weight_stays_in_ellipticity_band():
    rng = np.random.default_rng(0)
    for n, g in ((2, 1.0), (3, 0.0), (3, -0.5)):
        sp = WeightedSpace(n, g, DIAGONAL_PERTURBED, 0.3)
        pts = rng.normal(size=(100_000, n)) * rng.lognormal(0, 2, size=(100_000, 1))
        a = sp.coefficients(pts)
        base = np.linalg.norm(pts, axis=1, keepdims=True) ** g
        assert np.all(a >= base / sp.lam * (1 - 1e-12))
        assert np.all(a <= sp.lam * base * (1 + 1e-12))


def test_perturbed_lambda_too_small_rejected():
    with pytest.raises(ValueError):
        WeightedSpace(3, 0.0, DIAGONAL_PERTURBED, 0.3, lam=1.1)


def test_mu_ball_bounds_centered_and_lebesgue():
    sp = WeightedSpace(3, 0.0)
    lo, hi = mu_ball_bounds(sp, np.zeros(3), 2.0)
    assert lo <= mu_ball(sp, 2.0) <= hi
    lo, hi = mu_ball_bounds(sp, np.array([0.5, 0, 0]), 1.0)
    assert lo <= 4 * math.pi / 3 <= hi


def _weighted_ball_2d(center, r, g):
    # polar quadrature around the center
    cx, cy = center

    def inner(rho, th):
        x, y = cx + rho * math.cos(th), cy + rho * math.sin(th)
        return math.hypot(x, y) ** g * rho

    val, _ = integrate.dblquad(inner, 0, 2 * math.pi, 0, r, epsabs=1e-10, epsrel=1e-10)
    return val


def test_mu_ball_bounds_2d_quadrature():
    sp = WeightedSpace(2, 1.0)
    lo, hi = mu_ball_bounds(sp, np.array([0.5, 0.0]), 1.0)
    q = _weighted_ball_2d((0.5, 0.0), 1.0, 1.0)
    assert lo <= q <= hi


@settings(max_examples=25, deadline=None)
@given(
    g=st.floats(-0.9, 2.0),
    cx=st.floats(-2, 2),
    cy=st.floats(-2, 2),
    extra=st.floats(0.05, 3.0),
)
def test_mu_ball_bounds_bracket_random(g, cx, cy, extra):
    if 2 + g <= 2.05:
        return
    sp = WeightedSpace(2, g)
    c = np.array([cx, cy])
    r = float(np.linalg.norm(c)) + extra
    lo, hi = mu_ball_bounds(sp, c, r)
    q = _weighted_ball_2d(c, r, g)
    assert lo <= q * (1 + 1e-7) and q <= hi * (1 + 1e-7)


def test_mu_ball_bounds_precondition():
    with pytest.raises(ValueError):
        mu_ball_bounds(WeightedSpace(3, 0.0), np.array([1.0, 0, 0]), 1.0)


def test_sigma_formula():
    sp = WeightedSpace(3, 1.0)
    assert sp.sigma == pytest.approx(3 / 4 * unit_ball_volume(3))


def test_dict_roundtrip():
    sp = WeightedSpace(3, 0.5, DIAGONAL_PERTURBED, 0.3)
    assert WeightedSpace.from_dict(sp.to_dict()) == sp
