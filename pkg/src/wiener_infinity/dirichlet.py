"""Truncated Dirichlet problems, harmonic measure of infinity, uniqueness.

Infinity is replaced by the far sphere |x| = R carrying the value
``f_bar``; letting R grow (exhaustion) probes the behaviour at infinity.
All radii of one schedule share a single graded grid, so the forced sets
are nested and the discrete comparison principle applies across R.
"""
from dataclasses import asdict, dataclass, field, replace
import csv
import io
import math

import numpy as np
from scipy import stats

from . import discretization as disc
from .capacity import radial_capacity_exact, sample, whole_space_potential_bound
from .geometry import OutsideBall, UnionOfBalls
from .numerics import DEFAULT_TOL, SolveReport, solve_spd
from .weighted_space import WeightedSpace

UNIQUE = "Unique"
NON_UNIQUE = "NonUnique"
INDETERMINATE = "Indeterminate"


@dataclass(frozen=True)
class ExhaustionGrid:
    """Graded grid for exhaustion runs.

    Spacing ``h`` on the core cube [-core, core]^n, then geometric growth
    by ``growth`` out to ``margin * R_max``.
    """

    h: float = 0.125
    core: float = 4.0
    growth: float = 1.3
    margin: float = 1.25
    fit: bool = True
    subcell: bool = True
    mirror: bool = True
    tol: float = DEFAULT_TOL
    max_iter: int = 100000

    @classmethod
    def default(cls, n):
        return cls(h=1 / 16 if n == 2 else 1 / 8)

    def to_dict(self):
        return asdict(self)

    def build(self, space, ext, R_max):
        mirror = ext.mirror_axes() if self.mirror else ()
        mirror = tuple(a for a in mirror if a < space.dimension)
        return disc.build_graded_grid(
            space, self.margin * R_max, self.h, self.core, self.growth, mirror=mirror
        )


@dataclass
class TruncatedProblem:
    space: WeightedSpace
    ext: object
    R: float
    f: object = 0.0
    f_bar: float = 1.0


def _obstacle_region(ext, reach):
    # ball families are passed as explicit unions so sub-cell balls become wells
    balls = ext.balls_near(0.0, reach)
    if balls is not None:
        return UnionOfBalls(ext.dimension, balls)
    return ext


def _mask(problem, grid, grid_spec):
    region = _obstacle_region(problem.ext, grid.half_width * math.sqrt(grid.dimension))
    far = OutsideBall(np.zeros(problem.space.dimension), problem.R)
    return disc.build_mask(
        problem.space, grid, [(region, problem.f), (far, float(problem.f_bar))],
        fit=grid_spec.fit, subcell=grid_spec.subcell,
    )


@dataclass
class DirichletSolution:
    field: np.ndarray
    grid: disc.Grid
    mask: disc.CellMask
    solve: SolveReport

    def values_at(self, points):
        return sample(self.grid, self.field, points)


def solve_truncated(problem, grid_spec=None, grid=None):
    """Discrete A-harmonic field on Omega n B_R with the given boundary data."""
    n = problem.space.dimension
    grid_spec = grid_spec or ExhaustionGrid.default(n)
    grid = grid or grid_spec.build(problem.space, problem.ext, problem.R)
    if grid.half_width < problem.R:
        raise ValueError("grid does not cover B_R")
    mask = _mask(problem, grid, grid_spec)
    if not mask.unknown.any():
        raise ValueError("degenerate system: Omega n B_R has no unknown cells")
    op = disc.assemble(problem.space, grid, mask)
    x, report = solve_spd(op, grid_spec.tol, grid_spec.max_iter)
    if not report.converged:
        raise RuntimeError(
            f"Dirichlet solve did not converge (relative residual {report.relative_residual:.3g})"
        )
    return DirichletSolution(op.scatter(x), grid, mask, report)


def _check_probes(ext, probes, R_schedule):
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    if ext.contains(probes).any():
        raise ValueError("every probe must lie in Omega (outside the exterior set)")
    if np.any(np.linalg.norm(probes, axis=1) >= min(R_schedule) / 2):
        raise ValueError("probes must satisfy |probe| < min(R_schedule) / 2")
    return probes


def default_schedule(j0=3, j1=7):
    return [2.0**j for j in range(j0, j1 + 1)]


def default_probes(n, radii=(2.0,)):
    """Probes at angle 60 degrees from e_1 in the (x_1, x_2) plane."""
    out = []
    for r in radii:
        p = np.zeros(n)
        p[0], p[1] = r * 0.5, r * math.sqrt(3) / 2
        out.append(p)
    return np.array(out)


@dataclass
class HarmonicMeasureEstimate:
    probes: np.ndarray
    R_schedule: list
    values: np.ndarray  # (len(R_schedule), len(probes))
    monotone_flag: bool
    solves: list = field(default_factory=list, repr=False)

    @property
    def limit_estimate(self):
        return self.values[-1]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["R", "probe", "value"])
        for R, row in zip(self.R_schedule, self.values):
            for p, v in zip(self.probes, row):
                w.writerow([repr(float(R)), " ".join(repr(float(c)) for c in p), repr(float(v))])
        return buf.getvalue()

    def to_dict(self):
        return {
            "probes": self.probes.tolist(),
            "R_schedule": [float(R) for R in self.R_schedule],
            "values": self.values.tolist(),
            "limit_estimate": self.limit_estimate.tolist(),
            "monotone": self.monotone_flag,
            "solves": [s.to_dict() for s in self.solves],
        }


MONOTONE_TOL = 1e-6


def _exhaustion(space, ext, f, f_bar, probes, R_schedule, grid_spec):
    grid = grid_spec.build(space, ext, max(R_schedule))
    values, solves = [], []
    for R in R_schedule:
        sol = solve_truncated(TruncatedProblem(space, ext, R, f, f_bar), grid_spec, grid)
        values.append(sol.values_at(probes))
        solves.append(sol.solve)
    return np.array(values), solves


def harmonic_measure_of_infinity(space, ext, probes=None, R_schedule=None, grid_spec=None):
    """Solutions with f = 0 on the boundary and 1 on the far sphere."""
    n = space.dimension
    R_schedule = sorted(R_schedule or default_schedule())
    probes = _check_probes(ext, default_probes(n) if probes is None else probes, R_schedule)
    grid_spec = grid_spec or ExhaustionGrid.default(n)
    values, solves = _exhaustion(space, ext, 0.0, 1.0, probes, R_schedule, grid_spec)
    monotone = bool(np.all(np.diff(values, axis=0) <= MONOTONE_TOL))
    return HarmonicMeasureEstimate(probes, list(R_schedule), values, monotone, solves)


def decay_fit(estimate, confidence=0.95):
    """Slope of log(value) against the number of dyadic shells between probe and R.

    Returns (slope, (lo, hi)) per probe.
    """
    out = []
    for i, p in enumerate(estimate.probes):
        shells = np.log2(np.asarray(estimate.R_schedule) / np.linalg.norm(p))
        v = estimate.values[:, i]
        if np.any(v <= 0) or len(v) < 3:
            out.append((math.nan, (math.nan, math.nan)))
            continue
        fit = stats.linregress(shells, np.log(v))
        q = stats.t.ppf(0.5 + confidence / 2, len(v) - 2)
        out.append((float(fit.slope), (fit.slope - q * fit.stderr, fit.slope + q * fit.stderr)))
    return out


UNIQUENESS_TOL = 1e-11
LINEARITY_FACTOR = 10


@dataclass(frozen=True)
class UniquenessPolicy:
    unique_below: float = 0.02
    decrease_factor: float = 2.0
    nonunique_above: float = 0.1
    stable_change: float = 0.1


@dataclass
class UniquenessReport:
    spreads: np.ndarray  # (len(R_schedule), len(probes))
    probe_verdicts: list
    verdict: str
    harmonic_measure: np.ndarray
    linearity_error: float
    R_schedule: list
    linearity_ok: bool = True

    def to_dict(self):
        return {
            "verdict": self.verdict,
            "probe_verdicts": self.probe_verdicts,
            "spread": self.spreads[-1].tolist(),
            "spreads": self.spreads.tolist(),
            "R_schedule": [float(R) for R in self.R_schedule],
            "linearity_error": self.linearity_error,
            "linearity_ok": self.linearity_ok,
        }


def _probe_verdict(s, policy):
    last = s[-1]
    if len(s) >= 3 and last < policy.unique_below and last * policy.decrease_factor <= s[-3]:
        return UNIQUE
    if last > policy.nonunique_above and abs(last - s[-2]) < policy.stable_change * last:
        return NON_UNIQUE
    return INDETERMINATE


def uniqueness_probe(space, ext, f=0.0, probes=None, R_schedule=None, grid_spec=None,
                     policy=UniquenessPolicy()):
    """Spread between the far-sphere values 1 and 0 for the same data f.

    By linearity the spread is the harmonic measure of infinity, which is
    recomputed independently to report ``linearity_error``.  Solves run at
    ``UNIQUENESS_TOL`` by default: the error of a Jacobi-preconditioned
    solve is up to ~100x its relative residual on these grids, and the
    linearity check compares solution values against 10 * DEFAULT_TOL.
    """
    n = space.dimension
    R_schedule = sorted(R_schedule or default_schedule(3, 9))
    if len(R_schedule) < 3:
        raise ValueError("uniqueness needs at least three radii")
    probes = _check_probes(ext, default_probes(n) if probes is None else probes, R_schedule)
    grid_spec = grid_spec or replace(ExhaustionGrid.default(n), tol=UNIQUENESS_TOL)
    u1, _ = _exhaustion(space, ext, f, 1.0, probes, R_schedule, grid_spec)
    u0, _ = _exhaustion(space, ext, f, 0.0, probes, R_schedule, grid_spec)
    spreads = np.abs(u1 - u0)
    hm, _ = _exhaustion(space, ext, 0.0, 1.0, probes, R_schedule, grid_spec)
    verdicts = [_probe_verdict(spreads[:, i], policy) for i in range(len(probes))]
    if all(v == UNIQUE for v in verdicts):
        verdict = UNIQUE
    elif all(v == NON_UNIQUE for v in verdicts):
        verdict = NON_UNIQUE
    else:
        verdict = INDETERMINATE
    err = float(np.max(np.abs(spreads - hm)))
    return UniquenessReport(spreads, verdicts, verdict, hm, err, list(R_schedule),
                            err <= LINEARITY_FACTOR * DEFAULT_TOL)


@dataclass
class BracketReport:
    lower: float
    upper: float
    delta: float
    u_min: float
    u_max: float
    ok: bool

    def to_dict(self):
        return asdict(self)


def limit_bracket_check(space, ext, f, f_lower, f_upper, f_bar, R, grid_spec=None):
    """Check f_lower - delta <= u <= f_upper + delta on R/2 <= |x| <= 3R/4.

    ``delta`` is twice the sup of |f| times the whole-space potential bound
    of the unit ball at |x| = R/2, plus the solver tolerance.
    """
    if not f_lower <= f_bar <= f_upper:
        raise ValueError("f_bar must lie in [f_lower, f_upper]")
    n = space.dimension
    grid_spec = grid_spec or ExhaustionGrid.default(n)
    sol = solve_truncated(TruncatedProblem(space, ext, R, f, f_bar), grid_spec)
    pts = sol.grid.centers()
    r = np.linalg.norm(pts, axis=1)
    shell = (r >= R / 2) & (r <= 0.75 * R) & sol.mask.unknown.ravel()
    u = sol.field.ravel()[shell]
    forced_vals = sol.mask.values[sol.mask.forced]
    f_sup = max(abs(f_lower), abs(f_upper), float(np.max(np.abs(forced_vals), initial=0.0)))
    iso = WeightedSpace(n, space.gamma)
    x = np.zeros(n)
    x[0] = R / 2
    bound = whole_space_potential_bound(iso, 1.0, radial_capacity_exact(iso, 1.0, 2.0), x)
    delta = 2 * f_sup * bound + grid_spec.tol
    if u.size == 0:
        raise ValueError("no unknown cells in the outer shell")
    lo, hi = float(u.min()), float(u.max())
    ok = f_lower - delta <= lo and hi <= f_upper + delta
    return BracketReport(f_lower, f_upper, delta, lo, hi, bool(ok))
