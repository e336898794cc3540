"""Parametric exterior sets, their dyadic slabs, and rasterization.

An exterior set describes the complement of the open set on which the
Dirichlet problem lives.  All membership tests are exact comparisons on
floating-point coordinates (no tolerance).  Points are arrays of shape
``(N, n)``.

Geometry JSON (``"schema": 1``)::

    {"schema": 1, "family": "bounded_obstacle", "params": {"radius": 1.0}}
    {"schema": 1, "family": "half_space", "params": {}}
    {"schema": 1, "family": "cone", "params": {"aperture": 0.785398}}
    {"schema": 1, "family": "dyadic_ball_chain",
     "params": {"rule": "power", "p": 2}}
    {"schema": 1, "family": "union_of_balls",
     "params": {"balls": [{"center": [3, 0, 0], "radius": 0.5}]}}

Chain radius rules give rho_k = 2**k * c * f(k), clamped to 2**(k-3):
``"fraction"`` (f = 1, c = 1/16 by default), ``"power"`` (f = k**-p) and
``"exp"`` (f = exp(-k**q)), both with c = 1/8 by default.
"""
import math

import numpy as np

REGULAR = "Regular"
IRREGULAR = "Irregular"
INDETERMINATE = "Indeterminate"

SCHEMA_VERSION = 1


def _as_points(points):
    return np.atleast_2d(np.asarray(points, dtype=float))


def _norms(points):
    return np.sqrt(np.sum(points * points, axis=1))


class Region:
    """Closed point set with an exact membership test."""

    def contains(self, points):
        raise NotImplementedError

    def small_balls(self):
        """Balls (center, radius) wholly contained in the region.

        Returns ``None`` when the region has no ball structure.  The list
        may be partial; the sub-cell obstacle model uses it for balls below
        grid resolution while everything else is rasterized.
        """
        return None

    def is_empty(self):
        return False

    def mirror_axes(self):
        """Coordinate axes across which the region is mirror symmetric."""
        return ()

    def __call__(self, points):
        return self.contains(points)


class EmptyRegion(Region):
    def contains(self, points):
        return np.zeros(len(_as_points(points)), dtype=bool)

    def small_balls(self):
        return []

    def is_empty(self):
        return True

    def mirror_axes(self):
        return tuple(range(16))


class Ball(Region):
    def __init__(self, center, radius):
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)

    def contains(self, points):
        d = _as_points(points) - self.center
        return np.sum(d * d, axis=1) <= self.radius**2

    def small_balls(self):
        return [(self.center, self.radius)]

    def mirror_axes(self):
        return tuple(a for a in range(len(self.center)) if self.center[a] == 0)


class OutsideBall(Region):
    """Closed complement {|x - center| >= radius} of an open ball."""

    def __init__(self, center, radius):
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)

    def contains(self, points):
        d = _as_points(points) - self.center
        return np.sum(d * d, axis=1) >= self.radius**2

    def mirror_axes(self):
        return tuple(a for a in range(len(self.center)) if self.center[a] == 0)


class Intersection(Region):
    def __init__(self, *regions):
        self.regions = regions

    def contains(self, points):
        points = _as_points(points)
        out = np.ones(len(points), dtype=bool)
        for r in self.regions:
            out &= r.contains(points)
        return out

    def mirror_axes(self):
        axes = set(self.regions[0].mirror_axes())
        for r in self.regions[1:]:
            axes &= set(r.mirror_axes())
        return tuple(sorted(axes))

    def small_balls(self):
        # balls of the first region lying wholly inside the other (ball) regions
        balls = self.regions[0].small_balls()
        if balls is None or not all(isinstance(r, Ball) for r in self.regions[1:]):
            return None
        return [
            (c, rho)
            for c, rho in balls
            if all(np.linalg.norm(c - r.center) + rho <= r.radius for r in self.regions[1:])
        ]


class AnnulusSlab(Region):
    """``parent`` intersected with 2**(k-1) <= |x - center| <= 2**k."""

    def __init__(self, parent, k, center=None):
        self.parent = parent
        self.k = int(k)
        self.center = None if center is None else np.asarray(center, dtype=float)

    @property
    def inner(self):
        return 2.0 ** (self.k - 1)

    @property
    def outer(self):
        return 2.0**self.k

    def in_annulus(self, points):
        points = _as_points(points)
        if self.center is not None:
            points = points - self.center
        r2 = np.sum(points * points, axis=1)
        return (r2 >= self.inner**2) & (r2 <= self.outer**2)

    def contains(self, points):
        points = _as_points(points)
        return self.in_annulus(points) & self.parent.contains(points)

    def _ball_inside(self, c, rho):
        d = np.linalg.norm(c - (0 if self.center is None else self.center))
        return d - rho >= self.inner and d + rho <= self.outer

    def small_balls(self):
        # balls straddling a shell boundary are left to plain rasterization
        balls = self.parent.balls_near(self.inner, self.outer, self.center)
        if balls is None:
            return None
        return [(c, r) for c, r in balls if self._ball_inside(c, r)]

    def is_empty(self):
        return self.parent.slab_is_empty(self.k, self.center)

    def mirror_axes(self):
        axes = self.parent.mirror_axes()
        if self.center is None:
            return axes
        return tuple(a for a in axes if self.center[a] == 0)


class ExteriorSet(Region):
    family = None
    dimension = None

    def mirror_axes(self):
        """Coordinate axes across which the set is mirror symmetric."""
        return tuple(range(1, self.dimension))

    def balls_near(self, r_lo, r_hi, center=None):
        """Balls meeting the shell r_lo <= |x - center| <= r_hi, or None."""
        return None

    def slab_is_empty(self, k, center=None):
        return False

    def slab(self, k, center=None):
        if k < 1:
            raise ValueError("slab index k must be >= 1")
        return AnnulusSlab(self, k, center)

    def predicted_verdict(self, space):
        return None

    def params(self):
        return {}

    def to_dict(self):
        return {
            "schema": SCHEMA_VERSION,
            "family": self.family,
            "n": self.dimension,
            "params": self.params(),
        }


class BoundedObstacle(ExteriorSet):
    family = "bounded_obstacle"

    def __init__(self, dimension, radius=1.0):
        self.dimension = dimension
        self.radius = float(radius)

    def contains(self, points):
        points = _as_points(points)
        return np.sum(points * points, axis=1) <= self.radius**2

    def mirror_axes(self):
        return tuple(range(self.dimension))

    def balls_near(self, r_lo, r_hi, center=None):
        return [(np.zeros(self.dimension), self.radius)]

    def small_balls(self):
        return [(np.zeros(self.dimension), self.radius)]

    def slab_is_empty(self, k, center=None):
        shift = 0.0 if center is None else float(np.linalg.norm(center))
        return 2.0 ** (k - 1) > self.radius + shift

    def predicted_verdict(self, space):
        return IRREGULAR

    def params(self):
        return {"radius": self.radius}


class HalfSpace(ExteriorSet):
    """Exterior set {x_1 <= 0}."""

    family = "half_space"

    def __init__(self, dimension):
        self.dimension = dimension

    def contains(self, points):
        return _as_points(points)[:, 0] <= 0

    def predicted_verdict(self, space):
        return REGULAR


class Cone(ExteriorSet):
    """Closed cone of half-angle ``aperture`` around the positive x_1 axis."""

    family = "cone"

    def __init__(self, dimension, aperture):
        if not 0 < aperture < math.pi / 2:
            raise ValueError("cone aperture must lie in (0, pi/2)")
        self.dimension = dimension
        self.aperture = float(aperture)

    def contains(self, points):
        points = _as_points(points)
        return points[:, 0] >= math.cos(self.aperture) * _norms(points)

    def predicted_verdict(self, space):
        return REGULAR

    def params(self):
        return {"aperture": self.aperture}


class DyadicBallChain(ExteriorSet):
    """One closed ball per dyadic annulus, centred on the x_1 axis.

    Ball k (k >= 1) has center 3 * 2**(k-2) e_1 and radius
    ``2**k * min(c * f(k), 1/8)`` so it stays inside 2**(k-1) <= |x| <= 2**k.
    The prefactor ``c`` defaults to 1/16 for the fraction rule and to 1/8
    otherwise, which keeps the power and exp rules unclamped for all k.
    """

    family = "dyadic_ball_chain"
    RULES = ("fraction", "power", "exp")

    def __init__(self, dimension, rule="fraction", c=None, p=1.0, q=1.0):
        if rule not in self.RULES:
            raise ValueError(f"unknown radius rule {rule!r}")
        if c is None:
            c = 1 / 16 if rule == "fraction" else 1 / 8
        if not c > 0:
            raise ValueError("chain prefactor c must be positive")
        self.dimension = dimension
        self.rule = rule
        self.c, self.p, self.q = float(c), float(p), float(q)

    def relative_radius(self, k):
        """rho_k / 2**k before clamping."""
        return float(self._relative(np.asarray(k, dtype=float)))

    def _relative(self, k):
        if self.rule == "fraction":
            f = np.ones_like(k)
        elif self.rule == "power":
            f = k ** (-self.p)
        else:
            f = np.exp(-(k**self.q))
        return self.c * f

    def radius(self, k):
        return float(self._radius_array(k))

    def _radius_array(self, k):
        k = np.asarray(k, dtype=float)
        return 2.0**k * np.minimum(self._relative(k), 0.125)

    def center(self, k):
        c = np.zeros(self.dimension)
        c[0] = 3 * 2.0 ** (k - 2)
        return c

    def ball(self, k):
        return self.center(k), self.radius(k)

    def _k_range(self, r_max):
        return range(1, max(1, int(math.ceil(math.log2(max(r_max, 1.0))))) + 2)

    def contains(self, points):
        points = _as_points(points)
        out = np.zeros(len(points), dtype=bool)
        r = _norms(points)
        # ball k lives in 2**(k-1) <= |x| <= 2**k; test only that candidate
        with np.errstate(divide="ignore"):
            k_lo = np.floor(np.log2(np.where(r > 0, r, 1.0))).astype(int)
        for dk in (0, 1):
            k = np.maximum(k_lo + dk, 1)
            centers = 3 * 2.0 ** (k - 2)
            radii = self._radius_array(k)
            d2 = (points[:, 0] - centers) ** 2 + np.sum(points[:, 1:] ** 2, axis=1)
            out |= d2 <= radii**2
        return out

    def balls_near(self, r_lo, r_hi, center=None):
        shift = 0.0 if center is None else float(np.linalg.norm(center))
        out = []
        for k in self._k_range(r_hi + shift):
            c, rho = self.ball(k)
            d = np.linalg.norm(c - (0 if center is None else center))
            if d + rho >= r_lo and d - rho <= r_hi:
                out.append((c, rho))
        return out

    def balls_within(self, r_max):
        return [self.ball(k) for k in self._k_range(r_max) if 3 * 2.0 ** (k - 2) - self.radius(k) <= r_max]

    def small_balls(self):
        return None

    def slab_is_empty(self, k, center=None):
        return False

    def predicted_verdict(self, space):
        n = space.dimension
        if self.rule == "fraction":
            return REGULAR
        if self.rule == "power":
            # n >= 3: w_k ~ k**(-p (n-2)); n = 2: w_k ~ 1 / (p log k)
            if n == 2:
                return REGULAR
            return REGULAR if self.p * (n - 2) <= 1 else IRREGULAR
        # exp rule: n >= 3 gives geometric decay; n = 2 gives w_k ~ k**-q
        if n == 2:
            return REGULAR if self.q <= 1 else IRREGULAR
        return IRREGULAR

    def params(self):
        d = {"rule": self.rule, "c": self.c}
        d.update({"fraction": {}, "power": {"p": self.p}, "exp": {"q": self.q}}[self.rule])
        return d


class UnionOfBalls(ExteriorSet):
    family = "union_of_balls"

    def __init__(self, dimension, balls):
        self.dimension = dimension
        self.balls = [(np.asarray(c, dtype=float), float(r)) for c, r in balls]
        for c, _ in self.balls:
            if len(c) != dimension:
                raise ValueError("ball center has wrong dimension")

    def contains(self, points):
        points = _as_points(points)
        out = np.zeros(len(points), dtype=bool)
        for c, r in self.balls:
            d = points - c
            out |= np.sum(d * d, axis=1) <= r * r
        return out

    def mirror_axes(self):
        axes = []
        for a in range(self.dimension):
            if all(c[a] == 0 for c, _ in self.balls):
                axes.append(a)
        return tuple(axes)

    def balls_near(self, r_lo, r_hi, center=None):
        o = 0 if center is None else center
        return [
            (c, r)
            for c, r in self.balls
            if np.linalg.norm(c - o) + r >= r_lo and np.linalg.norm(c - o) - r <= r_hi
        ]

    def small_balls(self):
        return list(self.balls)

    def is_empty(self):
        return not self.balls

    def params(self):
        return {"balls": [{"center": c.tolist(), "radius": r} for c, r in self.balls]}


FAMILIES = {
    cls.family: cls
    for cls in (BoundedObstacle, HalfSpace, Cone, DyadicBallChain, UnionOfBalls)
}


def from_dict(d, dimension=None):
    """Build an exterior set from its geometry JSON object."""
    if d.get("schema", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise ValueError(f"unsupported geometry schema {d.get('schema')!r}")
    family = d.get("family")
    if family not in FAMILIES:
        raise ValueError(f"unknown geometry family {family!r}")
    n = int(d.get("n", dimension or 0))
    if n < 2:
        raise ValueError("geometry needs a dimension n >= 2")
    p = dict(d.get("params", {}))
    if family == "bounded_obstacle":
        return BoundedObstacle(n, p.get("radius", 1.0))
    if family == "half_space":
        return HalfSpace(n)
    if family == "cone":
        return Cone(n, p["aperture"])
    if family == "dyadic_ball_chain":
        return DyadicBallChain(n, **p)
    return UnionOfBalls(n, [(b["center"], b["radius"]) for b in p["balls"]])


def contains(ext, point):
    return bool(ext.contains(point)[0])


def predicted_verdict(ext, space):
    return ext.predicted_verdict(space)


def rasterize(predicate, grid):
    """Boolean mask of the cells whose center satisfies ``predicate``."""
    return np.asarray(predicate(grid.centers()), dtype=bool).reshape(grid.shape)
