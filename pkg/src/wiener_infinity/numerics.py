"""Jacobi-preconditioned conjugate-residual solver and convergence orders."""
from dataclasses import dataclass, field
import math

import numpy as np

DEFAULT_TOL = 1e-9


@dataclass
class SolveReport:
    iterations: int
    relative_residual: float
    converged: bool
    tol: float
    restarts: int = 0
    history: list = field(default_factory=list, repr=False)

    def to_dict(self):
        return {
            "iterations": self.iterations,
            "relative_residual": self.relative_residual,
            "converged": self.converged,
            "tol": self.tol,
            "restarts": self.restarts,
        }


def solve_spd(op, tol=DEFAULT_TOL, max_iter=20000, x0=None, max_restarts=200):
    """Solve ``op.matrix x = op.rhs``; ``op`` may also be a (matrix, rhs) pair.

    Preconditioned conjugate residuals: the preconditioned residual norm
    ``sqrt(r . D^-1 r)`` is non-increasing, and ``history`` records it.  A
    rounding-induced increase triggers a restart from the current iterate.
    Convergence is judged on ``|b - A x| / |b|``.
    """
    if not 0 < tol < 1:
        raise ValueError("tol must lie in (0, 1)")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    A, b = (op.matrix, op.rhs) if hasattr(op, "matrix") else op
    b = np.asarray(b, dtype=float)
    dinv = 1.0 / A.diagonal()
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return np.zeros_like(b), SolveReport(0, 0.0, True, tol)

    def start(x):
        r = b - A @ x
        z = dinv * r
        Az = A @ z
        return r, z, Az, z.copy(), Az.copy()

    r, z, Az, p, Ap = start(x)
    zAz = z @ Az
    history = [math.sqrt(max(r @ z, 0.0))]
    restarts = 0
    it = 0
    rel = np.linalg.norm(r) / bnorm
    while rel > tol and it < max_iter:
        MAp = dinv * Ap
        denom = Ap @ MAp
        if denom <= 0 or zAz <= 0:
            break
        step = zAz / denom
        x += step * p
        r -= step * Ap
        z -= step * MAp
        it += 1
        pres = math.sqrt(max(r @ z, 0.0))
        if pres > history[-1]:
            restarts += 1
            r, z, Az, p, Ap = start(x)
            zAz = z @ Az
            pres = math.sqrt(max(r @ z, 0.0))
            history.append(pres)
            rel = np.linalg.norm(r) / bnorm
            continue
        history.append(pres)
        Az = A @ z
        zAz_new = z @ Az
        beta = zAz_new / zAz
        zAz = zAz_new
        p = z + beta * p
        Ap = Az + beta * Ap
        if it % 50 == 0:
            # replace the recursive residual to limit drift
            rel = np.linalg.norm(b - A @ x) / bnorm
        else:
            rel = np.linalg.norm(r) / bnorm
        if rel <= tol:
            # the recursive residual can drift below the true one; confirm
            true_rel = np.linalg.norm(b - A @ x) / bnorm
            if true_rel > tol and restarts < max_restarts:
                restarts += 1
                r, z, Az, p, Ap = start(x)
                zAz = z @ Az
                rel = true_rel
    rel = float(np.linalg.norm(b - A @ x) / bnorm)
    return x, SolveReport(it, rel, rel <= tol, tol, restarts, history)


def richardson_order(values):
    """Observed order from values at spacings h, h/2, h/4.

    Returns ``nan`` when the successive differences vanish or change sign
    (indeterminate).
    """
    v1, v2, v3 = (float(v) for v in values)
    d1, d2 = v1 - v2, v2 - v3
    if d2 == 0 or d1 == 0 or (d1 > 0) != (d2 > 0):
        return float("nan")
    return math.log2(d1 / d2)
