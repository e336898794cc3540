"""Power-weighted measure and diagonal coefficient fields.

The operator is ``div(A grad u)`` with ``A(x)`` diagonal and comparable to
``|x|**gamma`` times the identity.  Everything downstream reads the
coefficient through :meth:`WeightedSpace.coefficients`.
"""
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma as gamma_fn


ISOTROPIC = "isotropic"
DIAGONAL_PERTURBED = "diagonal_perturbed"


def unit_ball_volume(n):
    return np.pi ** (n / 2) / gamma_fn(n / 2 + 1)


def unit_sphere_area(n):
    """Surface measure of the unit sphere in R^n."""
    return 2 * np.pi ** (n / 2) / gamma_fn(n / 2)


@dataclass(frozen=True)
class WeightedSpace:
    """Dimension, weight exponent and coefficient field.

    ``amplitude`` only matters in ``diagonal_perturbed`` mode, where

        a_i(x) = |x|**gamma * (1 + amplitude * (2 x_i**2/|x|**2 - 1))

    The modulation is homogeneous of degree 0, so dyadic scale invariance
    is kept, and even in every coordinate, so mirror symmetry of a
    geometry carries over to the discrete problem.  ``lam`` defaults to the
    smallest admissible ellipticity constant for the chosen mode.
    """

    dimension: int
    gamma: float
    coefficient_mode: str = ISOTROPIC
    amplitude: float = 0.0
    lam: float = None

    def __post_init__(self):
        n, g = self.dimension, self.gamma
        if int(n) != n or n < 2:
            raise ValueError(f"dimension must be an integer >= 2, got {n}")
        if not n + g > 2:
            raise ValueError(
                f"gamma={g} is outside the admissible range gamma > 2 - n = {2 - n}"
            )
        if self.coefficient_mode not in (ISOTROPIC, DIAGONAL_PERTURBED):
            raise ValueError(f"unknown coefficient mode {self.coefficient_mode!r}")
        if self.coefficient_mode == ISOTROPIC and self.amplitude != 0.0:
            raise ValueError("amplitude is only meaningful in diagonal_perturbed mode")
        if not 0.0 <= self.amplitude < 1.0:
            raise ValueError("amplitude must lie in [0, 1)")
        needed = 1.0 / (1.0 - self.amplitude)
        if self.lam is None:
            object.__setattr__(self, "lam", needed)
        elif self.lam < 1.0 or self.lam < needed * (1 - 1e-12):
            raise ValueError(
                f"lam={self.lam} too small; this coefficient field needs lam >= {needed}"
            )

    @property
    def alpha(self):
        return self.dimension + self.gamma - 2

    @property
    def isotropic(self):
        return self.coefficient_mode == ISOTROPIC

    @property
    def sigma(self):
        """Constant in mu(B_r(0)) = sigma * r**(n + gamma)."""
        n = self.dimension
        return n / (n + self.gamma) * unit_ball_volume(n)

    def coefficients(self, points):
        """Diagonal entries of A at ``points`` (shape (..., n)) -> (..., n)."""
        points = np.asarray(points, dtype=float)
        r2 = np.sum(points * points, axis=-1)
        if np.any(r2 == 0):
            raise ValueError("the weight is singular at the origin")
        base = r2 ** (self.gamma / 2)
        if self.isotropic:
            return np.repeat(base[..., None], self.dimension, axis=-1)
        shape = 2 * points**2 / r2[..., None] - 1
        return base[..., None] * (1 + self.amplitude * shape)

    def to_dict(self):
        return {
            "n": self.dimension,
            "gamma": self.gamma,
            "lambda": self.lam,
            "coefficient_mode": self.coefficient_mode,
            "amplitude": self.amplitude,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            int(d["n"]),
            float(d["gamma"]),
            d.get("coefficient_mode", ISOTROPIC),
            float(d.get("amplitude", 0.0)),
            d.get("lambda"),
        )


def weight_at(space, point):
    """Diagonal coefficient value(s) at a single point.

    Returns a float in isotropic mode and an array of the ``n`` diagonal
    entries otherwise.
    """
    c = space.coefficients(np.atleast_2d(point))[0]
    return float(c[0]) if space.isotropic else c


def mu_ball(space, radius):
    if radius <= 0:
        raise ValueError("radius must be positive")
    return space.sigma * radius ** (space.dimension + space.gamma)


def mu_ball_bounds(space, center, radius):
    """Bracket for mu(B_radius(center)) from B_{r-|c|}(0) c B_r(c) c B_{r+|c|}(0)."""
    c = float(np.linalg.norm(center))
    if radius <= c:
        raise ValueError("need radius > |center|")
    p = space.dimension + space.gamma
    return space.sigma * (radius - c) ** p, space.sigma * (radius + c) ** p
