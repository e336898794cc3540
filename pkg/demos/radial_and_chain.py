"""A tour of the toolkit on two small problems.

First the capacity of a ball in a ball, compared with its closed form.
Then a chain of balls whose radii shrink like 2**k / k**2 in 3D: the Wiener
terms fall off faster than 1/k, so infinity is irregular and the harmonic
measure of infinity stays positive as the truncation radius grows.

Run with ``python3 demos/radial_and_chain.py`` (a few seconds).
"""
import numpy as np

from wiener_infinity import dirichlet as dr
from wiener_infinity import geometry as geo
from wiener_infinity import wiener as wn
from wiener_infinity.capacity import GridSpec, capacity, radial_capacity_exact
from wiener_infinity.weighted_space import WeightedSpace

space = WeightedSpace(3, 0.5)
origin = np.zeros(3)

print("cap(B_1, B_2) for |x|^0.5 in R^3")
exact = radial_capacity_exact(space, 1.0, 2.0)
for m in (16, 32, 64):
    res = capacity(space, geo.Ball(origin, 1.0), (origin, 2.0), GridSpec(m=m))
    print(f"  m={m:3d}  value={res.value:.5f}  exact={exact:.5f}  flux-energy gap={res.conservation_error:.1e}")

chain = geo.DyadicBallChain(3, "power", p=2.0)
print("\nWiener terms for the k^-2 chain (coarse grid)")
series = wn.wiener_sum(space, chain, 2, 9, GridSpec(m=24))
for k, w in zip(series.ks, series.terms):
    print(f"  k={k}  w_k={w:.4e}")
verdict = wn.classify(series)
print(f"  verdict: {verdict.verdict}, tail slope {verdict.tail_slope:.2f}")

print("\nharmonic measure of infinity at |x| = 2")
est = dr.harmonic_measure_of_infinity(space, chain, R_schedule=dr.default_schedule(3, 6),
                                      grid_spec=dr.ExhaustionGrid(h=0.25))
for R, v in zip(est.R_schedule, est.values[:, 0]):
    print(f"  R={R:5.0f}  value={v:.4f}")
