"""Weighted capacities, capacitary potentials and radial closed forms."""
from dataclasses import dataclass, field, asdict
import math
import warnings

import numpy as np

from . import discretization as disc
from .geometry import OutsideBall
from .numerics import DEFAULT_TOL, SolveReport, solve_spd
from .weighted_space import unit_sphere_area


@dataclass(frozen=True)
class GridSpec:
    """How to grid a ball B_R: ``m`` cells across its diameter plus ``pad``
    cells of forced-zero margin on each side."""

    m: int = 64
    pad: int = 2
    fit: bool = True
    subcell: bool = True
    mirror: bool = True
    tol: float = DEFAULT_TOL
    max_iter: int = 50000

    def __post_init__(self):
        if self.m < 4 or self.m % 2:
            raise ValueError("GridSpec.m must be an even integer >= 4")

    def refined(self, factor=2):
        return GridSpec(**{**asdict(self), "m": self.m * factor})

    def to_dict(self):
        return asdict(self)


@dataclass
class CapacitaryPotential:
    field: np.ndarray
    grid: disc.Grid
    mask: disc.CellMask
    solve: SolveReport
    warnings: list = field(default_factory=list)

    def values_at(self, points):
        return sample(self.grid, self.field, points)


@dataclass
class CapacityResult:
    value: float
    energy_value: float
    flux_value: float
    grid: dict
    solve: SolveReport
    warnings: list = field(default_factory=list)

    @property
    def conservation_error(self):
        if self.energy_value == 0:
            return abs(self.flux_value)
        return abs(self.energy_value - self.flux_value) / self.energy_value

    def to_dict(self):
        return {
            "value": self.value,
            "energy": self.energy_value,
            "flux": self.flux_value,
            "conservation_error": self.conservation_error,
            "grid": self.grid,
            "solve": self.solve.to_dict(),
            "warnings": list(self.warnings),
        }


def ball_grid(space, center, radius, spec, mirror_axes=()):
    """Uniform grid covering B_radius(center) with ``pad`` margin cells.

    An off-origin center is snapped to the lattice h Z^n (one extra margin
    cell per side) so the origin stays a node.
    """
    h = 2.0 * radius / spec.m
    center = np.asarray(center, dtype=float)
    snapped = np.round(center / h) * h
    pad = spec.pad + int(np.any(snapped != center))
    mirror = tuple(a for a in mirror_axes if a < space.dimension) if spec.mirror else ()
    return disc.build_grid(space, radius + pad * h, spec.m + 2 * pad, center=snapped, mirror=mirror)


def _mirror_axes(space, K, center):
    axes = set(K.mirror_axes()) & {a for a in range(space.dimension) if center[a] == 0}
    return tuple(sorted(axes))


def capacitary_potential(space, K, B, grid_spec=GridSpec()):
    """Discrete minimiser of the weighted energy: 1 on K, 0 outside B.

    ``B`` is a pair (center, radius).  Returns a :class:`CapacitaryPotential`.
    """
    center, R = np.asarray(B[0], dtype=float), float(B[1])
    grid = ball_grid(space, center, R, grid_spec, _mirror_axes(space, K, center))
    pts = grid.centers()
    outside = np.sum((pts - center) ** 2, axis=1) >= R * R
    balls = K.small_balls() or []
    if K.contains(pts[outside]).any() or any(
        np.linalg.norm(np.asarray(c) - center) + rho > R for c, rho in balls
    ):
        raise ValueError("K is not contained in B")
    mask = disc.build_mask(
        space, grid, [(K, 1.0), (OutsideBall(center, R), 0.0)],
        fit=grid_spec.fit, subcell=grid_spec.subcell,
    )
    notes = list(mask.warnings)
    has_one = (mask.forced & (mask.values == 1.0)).any() or bool(mask.wells)
    if not has_one:
        if not K.is_empty():
            notes.append("K is nonempty but below grid resolution; potential set to 0")
            warnings.warn(notes[-1])
        return CapacitaryPotential(np.zeros(grid.shape), grid, mask, SolveReport(0, 0.0, True, grid_spec.tol), notes)
    op = disc.assemble(space, grid, mask)
    x, report = solve_spd(op, grid_spec.tol, grid_spec.max_iter)
    return CapacitaryPotential(op.scatter(x), grid, mask, report, notes)


def capacity(space, K, B, grid_spec=GridSpec()):
    """cap(K, B) as the energy of the discrete capacitary potential.

    The flux into the exterior of B is returned alongside as a
    conservation cross-check.
    """
    pot = capacitary_potential(space, K, B, grid_spec)
    if not pot.solve.converged:
        raise RuntimeError(
            f"capacity solve did not converge (relative residual {pot.solve.relative_residual:.3g})"
        )
    center, R = np.asarray(B[0], dtype=float), float(B[1])
    grid = pot.grid
    if not pot.field.any():
        return CapacityResult(0.0, 0.0, 0.0, grid.summary(), pot.solve, pot.warnings)
    e = disc.energy(space, grid, pot.field, pot.mask)
    shell = R - 0.25 * grid.h_min
    f = disc.flux(space, grid, pot.field, shell, center, pot.mask)
    return CapacityResult(e, e, f, grid.summary(), pot.solve, pot.warnings)


def radial_capacity_exact(space, r, R):
    """cap(closed B_r, B_R) for the isotropic weight, both balls centred at 0."""
    if not 0 < r < R:
        raise ValueError("need 0 < r < R")
    if not space.isotropic:
        raise ValueError("the radial closed form needs the isotropic coefficient")
    a = space.alpha
    if math.isinf(R):
        return unit_sphere_area(space.dimension) * a * r**a
    return unit_sphere_area(space.dimension) * a / (r**-a - R**-a)


def radial_potential_exact(space, r, R, x):
    """Capacitary potential of closed B_r in B_R at points ``x`` (isotropic)."""
    a = space.alpha
    d = np.linalg.norm(np.atleast_2d(x), axis=1)
    Rm = 0.0 if math.isinf(R) else R**-a
    u = (d**-a - Rm) / (r**-a - Rm)
    return np.clip(u, 0.0, 1.0)


def whole_space_potential_bound(space, K_radius, cap_value, x):
    """Comparison upper bound for the whole-space potential of K c B_r at x.

    Evaluates cap_value * int_d^inf dt / (t cap(B_t(x), B_2t(x))) in closed
    form with d = |x| - r the distance from x to B_r and the two-scale
    model cap(B_t(x), B_2t(x)) = kappa t**(n-2) max(t, |x|)**gamma, where
    kappa t**alpha is the exact centred value.
    """
    r = float(K_radius)
    s = float(np.linalg.norm(x))
    if not s > 2 * r:
        raise ValueError("need |x| > 2 r")
    if cap_value == 0:
        return 0.0
    n, g, a = space.dimension, space.gamma, space.alpha
    kappa = unit_sphere_area(n) * a / (1 - 2.0**-a)
    d = s - r
    if n == 2:
        near = math.log(s / d)
    else:
        near = (d ** (2 - n) - s ** (2 - n)) / (n - 2)
    integral = s**-g * near + s**-a / a
    return cap_value * integral / kappa


def sample(grid, field, points):
    """Multilinear interpolation of a cell field at ``points`` (mirror aware)."""
    from scipy.interpolate import RegularGridInterpolator

    axes = [np.asarray(c) for c in grid.centers_1d]
    vals = np.asarray(field).reshape(grid.shape)
    points = np.atleast_2d(np.asarray(points, dtype=float)).copy()
    for a in grid.mirror:
        axes[a] = np.concatenate([[-axes[a][0]], axes[a]])
        first = np.take(vals, [0], axis=a)
        vals = np.concatenate([first, vals], axis=a)
        points[:, a] = np.abs(points[:, a])
    interp = RegularGridInterpolator(axes, vals, bounds_error=True)
    return interp(points)
