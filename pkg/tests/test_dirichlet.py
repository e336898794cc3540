import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wiener_infinity import dirichlet as dr
from wiener_infinity import geometry as geo
from wiener_infinity.numerics import DEFAULT_TOL
from wiener_infinity.weighted_space import WeightedSpace

S2 = WeightedSpace(2, 1.0)
S3 = WeightedSpace(3, 0.0)
OBST2 = geo.BoundedObstacle(2, 1.0)
SPEC2 = dr.ExhaustionGrid(h=1 / 8, core=4.0)
P2 = dr.default_probes(2, (2.0,))


def _solve(ext, R, f, f_bar, space=S2, spec=SPEC2):
    return dr.solve_truncated(dr.TruncatedProblem(space, ext, R, f, f_bar), spec)


def test_constant_data_gives_constant_solution():
    sol = _solve(OBST2, 16.0, 0.4, 0.4)
    u = sol.field[sol.mask.unknown]
    assert np.allclose(u, 0.4, atol=1e-8)


def test_radial_obstacle_solution():
    R = 16.0
    sol = _solve(OBST2, R, 0.0, 1.0)
    pts = dr.default_probes(2, (2.0, 4.0))
    a = S2.alpha
    exact = (1 - np.linalg.norm(pts, axis=1) ** -a) / (1 - R**-a)
    assert np.allclose(sol.values_at(pts), exact, rtol=0.02)


def test_flipping_data_gives_complement():
    u = _solve(OBST2, 16.0, 0.0, 1.0).values_at(P2)
    v = _solve(OBST2, 16.0, 1.0, 0.0).values_at(P2)
    assert np.allclose(u + v, 1.0, atol=1e-7)


def test_solution_between_data_bounds():
    f = lambda x: 0.2 + 0.1 * np.sin(x[:, 0])
    sol = _solve(OBST2, 16.0, f, 0.9)
    u = sol.field[sol.mask.unknown]
    assert u.min() >= 0.1 - 1e-9 and u.max() <= 0.9 + 1e-9


@settings(max_examples=8, deadline=None)
@given(shift=st.floats(0.0, 1.0), b1=st.floats(0.0, 1.0), db=st.floats(0.0, 1.0), seed=st.integers(0, 100))
def test_comparison_principle(shift, b1, db, seed):
    w = np.random.default_rng(seed).normal(size=2)
    f = lambda x: np.cos(x @ w)
    g = lambda x: np.cos(x @ w) + shift
    spec = dr.ExhaustionGrid(h=1 / 4, core=2.0)
    u = _solve(OBST2, 8.0, f, b1, spec=spec).field
    v = _solve(OBST2, 8.0, g, b1 + db, spec=spec).field
    assert np.all(u <= v + 1e-8)


def test_superposition():
    spec = replace(SPEC2, tol=dr.UNIQUENESS_TOL)
    f1 = lambda x: np.cos(x[:, 0])
    f2 = lambda x: 0.3 * x[:, 1] ** 2
    both = lambda x: f1(x) + f2(x)
    pts = dr.default_probes(2, (2.0, 3.0))
    u = _solve(OBST2, 16.0, both, 1.5, spec=spec).values_at(pts)
    a = _solve(OBST2, 16.0, f1, 1.0, spec=spec).values_at(pts)
    b = _solve(OBST2, 16.0, f2, 0.5, spec=spec).values_at(pts)
    assert np.max(np.abs(u - a - b)) <= dr.LINEARITY_FACTOR * DEFAULT_TOL


def test_probe_validation():
    with pytest.raises(ValueError, match="Omega"):
        dr.harmonic_measure_of_infinity(S2, OBST2, np.array([[0.5, 0.0]]), [8.0, 16.0, 32.0], SPEC2)
    with pytest.raises(ValueError, match="min"):
        dr.harmonic_measure_of_infinity(S2, OBST2, np.array([[5.0, 0.0]]), [8.0, 16.0, 32.0], SPEC2)


def test_obstacle_harmonic_measure_limit():
    probes = dr.default_probes(2, (2.0, 4.0))
    est = dr.harmonic_measure_of_infinity(S2, OBST2, probes, dr.default_schedule(4, 7), SPEC2)
    assert est.monotone_flag
    assert np.all((est.values >= 0) & (est.values <= 1))
    assert np.allclose(est.limit_estimate, [0.5, 0.75], rtol=0.03)
    lines = est.to_csv().splitlines()
    assert lines[0] == "R,probe,value" and len(lines) == 1 + 4 * 2


def test_half_space_harmonic_measure_decays():
    est = dr.harmonic_measure_of_infinity(S2, geo.HalfSpace(2), P2, dr.default_schedule(3, 7), SPEC2)
    v = est.values[:, 0]
    assert est.monotone_flag and np.all(np.diff(v) < 0)
    slope, (lo, hi) = dr.decay_fit(est)[0]
    assert slope < 0 and hi < 0


def test_uniqueness_obstacle_is_nonunique():
    spec = replace(SPEC2, tol=dr.UNIQUENESS_TOL)
    rep = dr.uniqueness_probe(S2, OBST2, 0.0, P2, dr.default_schedule(3, 6), spec)
    assert rep.verdict == dr.NON_UNIQUE
    assert rep.spreads[-1, 0] == pytest.approx(0.5, rel=0.03)
    other = dr.uniqueness_probe(S2, OBST2, lambda x: np.sin(x[:, 1]), P2, dr.default_schedule(3, 6), spec)
    assert np.allclose(rep.spreads, other.spreads, atol=dr.LINEARITY_FACTOR * DEFAULT_TOL)
    assert rep.linearity_ok and other.linearity_ok


def test_uniqueness_half_space_is_unique():
    spec = dr.ExhaustionGrid(h=1 / 4, core=4.0, tol=dr.UNIQUENESS_TOL)
    rep = dr.uniqueness_probe(S3, geo.HalfSpace(3), 0.0, dr.default_probes(3), dr.default_schedule(3, 8), spec)
    assert rep.verdict == dr.UNIQUE, rep.spreads[:, 0]


def test_uniqueness_needs_three_radii():
    with pytest.raises(ValueError):
        dr.uniqueness_probe(S2, OBST2, 0.0, P2, [8.0, 16.0], SPEC2)


@pytest.mark.parametrize("verdicts,expected", [
    ([0.3, 0.1, 0.05, 0.019], dr.UNIQUE),
    ([0.5, 0.5, 0.5, 0.5], dr.NON_UNIQUE),
    ([0.5, 0.4, 0.3, 0.2], dr.INDETERMINATE),
    ([0.05, 0.03, 0.025, 0.019], dr.INDETERMINATE),
    ([0.05, 0.04, 0.03, 0.019], dr.UNIQUE),
])
def test_probe_verdict_thresholds(verdicts, expected):
    assert dr._probe_verdict(np.array(verdicts), dr.UniquenessPolicy()) == expected


def test_bracket_constant_data_exact():
    rep = dr.limit_bracket_check(S2, OBST2, 0.3, 0.3, 0.3, 0.3, 16.0, SPEC2)
    # exact up to the iterative solve
    assert rep.ok and abs(rep.u_min - 0.3) < 1e-7 and abs(rep.u_max - 0.3) < 1e-7


def test_bracket_zero_data_gives_zero():
    rep = dr.limit_bracket_check(S2, OBST2, 0.0, 0.0, 0.0, 0.0, 16.0, SPEC2)
    assert rep.ok and rep.u_min == 0.0 and rep.u_max == 0.0


def test_bracket_alternating_chain_data():
    chain = geo.DyadicBallChain(2, "fraction")

    def f(x):
        k = np.floor(np.log2(np.linalg.norm(x, axis=1))).astype(int) + 1
        return (k % 2).astype(float)

    rep = dr.limit_bracket_check(S2, chain, f, 0.0, 1.0, 0.5, 32.0, SPEC2)
    assert rep.ok and rep.delta > 0
    assert -rep.delta <= rep.u_min and rep.u_max <= 1 + rep.delta


def test_bracket_rejects_f_bar_outside():
    with pytest.raises(ValueError):
        dr.limit_bracket_check(S2, OBST2, 0.0, 0.0, 1.0, 2.0, 16.0, SPEC2)


def test_degenerate_problem_rejected():
    # far sphere inside the obstacle: no unknown cells
    with pytest.raises(ValueError):
        _solve(geo.BoundedObstacle(2, 10.0), 8.0, 0.0, 1.0, spec=dr.ExhaustionGrid(h=1 / 2, core=2.0))
