"""Cell-centred finite-volume discretization of div(A grad u).

Grids are tensor products of 1-D node arrays.  The origin is always a node
in every axis, so neither a cell center nor a face center can coincide with
it and the weight is never evaluated at its singularity.  A grid may
represent only the half x_a >= 0 of an axis (``mirror``); the plane x_a = 0
is then a symmetry plane and totals (energy, flux) are multiplied by
``2 ** len(mirror)``.

Face transmissibility is ``a_axis(face center) * area / distance`` between
neighbouring cell centers; on a uniform grid this is ``a * h**(n-2)``.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy import integrate, special

from .weighted_space import unit_sphere_area

UNKNOWN = 0
FORCED_ONE = 1
FORCED_ZERO = 2

# relative distance (in units of the smallest cell) at which a point counts as on a node
NODE_TOL = 1e-9


class Grid:
    def __init__(self, nodes, mirror=()):
        self.nodes = tuple(np.asarray(x, dtype=float) for x in nodes)
        self.mirror = tuple(sorted(mirror))
        for a, x in enumerate(self.nodes):
            if len(x) < 2 or np.any(np.diff(x) <= 0):
                raise ValueError(f"nodes along axis {a} must be strictly increasing")
        for a in self.mirror:
            if self.nodes[a][0] != 0.0:
                raise ValueError(f"mirrored axis {a} must start at 0")
        self.centers_1d = tuple(0.5 * (x[1:] + x[:-1]) for x in self.nodes)
        self.widths = tuple(np.diff(x) for x in self.nodes)
        _check_origin(self.nodes, self.centers_1d)

    @property
    def dimension(self):
        return len(self.nodes)

    @property
    def shape(self):
        return tuple(len(c) for c in self.centers_1d)

    @property
    def size(self):
        return int(np.prod(self.shape))

    @property
    def mirror_factor(self):
        return 2 ** len(self.mirror)

    @property
    def half_width(self):
        return max(max(abs(x[0]), abs(x[-1])) for x in self.nodes)

    @property
    def h(self):
        """Largest cell width (the spacing for uniform grids)."""
        return max(float(w.max()) for w in self.widths)

    @property
    def h_min(self):
        return min(float(w.min()) for w in self.widths)

    @property
    def cells_per_axis(self):
        return self.shape[0]

    def centers(self):
        mesh = np.meshgrid(*self.centers_1d, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def cell_volumes(self):
        mesh = np.meshgrid(*self.widths, indexing="ij")
        return np.prod(np.stack(mesh), axis=0)

    def locate(self, point):
        """Multi-indices of the cells whose closed box contains ``point``.

        A coordinate lying on a node selects both neighbouring cells, except
        on a mirror plane where only the represented side exists.
        """
        per_axis = []
        for a, x in enumerate(self.nodes):
            p = point[a]
            if a in self.mirror:
                p = abs(p)
            if p < x[0] or p > x[-1]:
                return []
            j = int(np.argmin(np.abs(x - p)))
            if abs(x[j] - p) <= NODE_TOL * self.h_min:
                idx = [i for i in (j - 1, j) if 0 <= i < len(x) - 1]
            else:
                idx = [int(np.searchsorted(x, p)) - 1]
            per_axis.append(idx)
        return [tuple(t) for t in np.array(np.meshgrid(*per_axis, indexing="ij")).reshape(self.dimension, -1).T]

    def summary(self):
        return {
            "shape": list(self.shape),
            "half_width": self.half_width,
            "h_min": self.h_min,
            "h_max": self.h,
            "mirror": list(self.mirror),
            "uniform": all(np.allclose(w, w[0]) for w in self.widths),
        }


def uniform_nodes(L, m, mirror=False, shift=0.0):
    h = 2.0 * L / m
    if mirror:
        return h * np.arange(m // 2 + 1)
    return h * np.arange(-(m // 2), m // 2 + 1) + shift


def graded_nodes(L, h, core, growth=1.2, mirror=False, shift=0.0):
    """Symmetric nodes: spacing ``h`` on [0, core], then geometric growth to L."""
    if not (h > 0 and L > 0 and growth >= 1):
        raise ValueError("graded grid needs h > 0, L > 0 and growth >= 1")
    pos = [0.0]
    step = h
    while pos[-1] < L:
        if pos[-1] >= core:
            step *= growth
        pos.append(pos[-1] + step)
    pos = np.array(pos)
    # stretch the growth region so the last node lands on L
    if len(pos) > 2 and pos[-1] != L:
        grown = pos > core
        if grown.any():
            c0 = pos[~grown][-1]
            pos[grown] = c0 + (pos[grown] - c0) * (L - c0) / (pos[-1] - c0)
        else:
            pos *= L / pos[-1]
    if mirror:
        return pos
    return np.concatenate([-pos[:0:-1], pos]) + shift


def build_grid(space, L, m, center=None, mirror=()):
    """Uniform grid on [-L, L]^n (shifted by ``center``) with m cells per axis."""
    if int(m) != m or m % 2:
        raise ValueError(f"cells per axis must be an even integer, got {m}")
    if m < 4 or L <= 0:
        raise ValueError("need m >= 4 and L > 0")
    n = space.dimension
    center = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    nodes = []
    for a in range(n):
        if a in mirror and center[a] != 0:
            raise ValueError("mirror axes need a zero center coordinate")
        nodes.append(uniform_nodes(L, m, a in mirror, center[a]))
    return Grid(nodes, mirror)


def build_graded_grid(space, L, h, core, growth=1.2, center=None, mirror=()):
    n = space.dimension
    center = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    nodes = [graded_nodes(L, h, core, growth, a in mirror, center[a]) for a in range(n)]
    return Grid(nodes, mirror)


def _check_origin(nodes, centers):
    """Reject grids where the origin is a cell center or a face center."""
    status = []
    for x, c in zip(nodes, centers):
        status.append("node" if np.any(x == 0.0) else "center" if np.any(c == 0.0) else "free")
    if "free" in status:
        return
    if status.count("node") <= 1:
        raise ValueError("the origin coincides with a cell or face center of this grid")


# ---------------------------------------------------------------------------
# cell masks


@dataclass
class CellMask:
    """Forced cells with their values, plus boundary-fit and sub-cell data.

    ``theta[a]`` (face arrays, default 1) is the fraction of the
    center-to-center distance at which the forcing boundary crosses a face
    between an unknown and a forced cell; ``face_value[a]`` is the boundary
    value at the crossing (NaN means: use the forced cell's value).
    ``wells`` lists sub-cell obstacles as (flat cell indices, conductance
    per cell, value).
    """

    forced: np.ndarray
    values: np.ndarray
    theta: list = None
    face_value: list = None
    wells: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @classmethod
    def from_tags(cls, tags):
        tags = np.asarray(tags)
        forced = tags != UNKNOWN
        values = np.where(tags == FORCED_ONE, 1.0, 0.0)
        return cls(forced, values)

    @property
    def unknown(self):
        return ~self.forced

    @property
    def tags(self):
        t = np.full(self.forced.shape, UNKNOWN, dtype=np.int8)
        t[self.forced & (self.values == 1.0)] = FORCED_ONE
        t[self.forced & (self.values == 0.0)] = FORCED_ZERO
        t[self.forced & (self.values != 0.0) & (self.values != 1.0)] = 3
        return t


def _slices(n, a):
    lo = [slice(None)] * n
    hi = [slice(None)] * n
    lo[a] = slice(0, -1)
    hi[a] = slice(1, None)
    return tuple(lo), tuple(hi)


def face_centers(grid, a):
    axes = list(grid.centers_1d)
    axes[a] = grid.nodes[a][1:-1]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack(mesh, axis=-1)


def transmissibilities(space, grid):
    """Per-axis face transmissibility arrays."""
    n = grid.dimension
    out = []
    for a in range(n):
        fc = face_centers(grid, a)
        coef = space.coefficients(fc.reshape(-1, n))[:, a].reshape(fc.shape[:-1])
        geo = 1.0 / np.diff(grid.centers_1d[a])
        shape = [1] * n
        shape[a] = -1
        geo = geo.reshape(shape)
        for b in range(n):
            if b != a:
                s = [1] * n
                s[b] = -1
                geo = geo * grid.widths[b].reshape(s)
        out.append(coef * geo)
    return out


# lattice Green's function constants for the sub-cell ball model


def _lattice_green_3d(x):
    f = lambda t: np.prod([special.ive(abs(xi), 2 * t) for xi in x])
    return integrate.quad(f, 0, np.inf, limit=400)[0]


def _lattice_kernel_2d(x):
    """Potential kernel A(x) = G(0) - G(x) for 4u - sum(neighbours) = delta."""
    f = lambda t: special.ive(0, 2 * t) ** 2 - special.ive(abs(x[0]), 2 * t) * special.ive(abs(x[1]), 2 * t)
    return integrate.quad(f, 0, np.inf, limit=400)[0]


_R_EQ_CACHE = {}


def equivalent_radius(n, node_axes):
    """Equivalent well radius (in units of h) for a ball whose center sits
    on cell nodes in ``node_axes`` of the ``n`` axes (0 = cell center).

    The ball is tied to the 2**node_axes surrounding cells with equal
    conductance; r_eq makes the far field of the lattice solution match
    the continuum potential of the ball.
    """
    key = (n, node_axes)
    if key in _R_EQ_CACHE:
        return _R_EQ_CACHE[key]
    offs = np.array(np.meshgrid(*[[0, 1] if a < node_axes else [0] for a in range(n)], indexing="ij")).reshape(n, -1).T
    m = len(offs)
    diffs = [tuple(np.abs(p - q)) for p in offs for q in offs]
    if n == 2:
        kappa = (2 * np.euler_gamma + np.log(8)) / (4 * np.pi)
        mean_a = sum(_lattice_kernel_2d(d) for d in diffs) / m**2
        r = float(np.exp(-2 * np.pi * (kappa - mean_a)))
    elif n == 3:
        mean_g = sum(_lattice_green_3d(d) for d in diffs) / m**2
        r = float(1.0 / (4 * np.pi * mean_g))
    else:
        r = None
    _R_EQ_CACHE[key] = r
    return r


def well_conductance(n, a, rho, r_eq):
    """Conductance between a ball of radius rho < r_eq and its host cells."""
    if n == 2:
        return 2 * np.pi * a / np.log(r_eq / rho)
    return 4 * np.pi * a / (1.0 / rho - 1.0 / r_eq)


def radial_well_conductance(space, rho, r_eq):
    """Conductance between an origin-centred ball of radius rho and r_eq."""
    a = space.alpha
    return unit_sphere_area(space.dimension) * a / (rho**-a - r_eq**-a)


def _host_cells(grid, center):
    cells = grid.locate(center)
    node_axes = 0
    for a, x in enumerate(grid.nodes):
        p = abs(center[a]) if a in grid.mirror else center[a]
        if np.min(np.abs(x - p)) <= NODE_TOL * grid.h_min:
            node_axes += 1
    return cells, node_axes


def build_mask(space, grid, constraints, fit=True, subcell=True):
    """Tag cells from a priority-ordered list of (region, value) pairs.

    ``value`` is a number or a callable on points.  With ``fit`` the
    crossing of each forcing boundary along faces next to unknown cells is
    located by bisection.  With ``subcell`` balls smaller than the lattice
    equivalent radius are tied to their host cells through a well
    conductance instead of being rasterized.
    """
    n = grid.dimension
    pts = grid.centers()
    forced = np.zeros(grid.size, dtype=bool)
    values = np.zeros(grid.size)
    label = np.full(grid.size, -1)
    wells, warnings = [], []
    h_loc = lambda cells: float(np.exp(np.mean([np.log(grid.widths[a][c[a]]) for c in cells for a in range(n)])))

    for ci, (region, value) in enumerate(constraints):
        inside = region.contains(pts) & ~forced
        if subcell and n in (2, 3):
            balls = region.small_balls() or []
            for c, rho in balls:
                c = np.asarray(c, dtype=float)
                cells, node_axes = _host_cells(grid, c)
                at_origin = not c.any()
                if not cells or (np.linalg.norm(c) <= rho and not at_origin):
                    continue
                h = h_loc(cells)
                r_eq = equivalent_radius(n, node_axes) * h
                d = pts - c
                in_ball = np.sum(d * d, axis=1) <= rho * rho
                captured = in_ball.any()
                if rho >= r_eq and captured:
                    continue
                rho_eff = rho
                if rho >= r_eq:
                    rho_eff = 0.99 * r_eq
                    warnings.append(f"ball radius {rho:.3g} between lattice scales; clamped to {rho_eff:.3g}")
                flat = np.array([np.ravel_multi_index(cc, grid.shape) for cc in cells])
                full_count = 2**node_axes
                if at_origin:
                    # the weight is singular here; use the radial |x|**-alpha profile
                    t = radial_well_conductance(space, rho_eff, r_eq) / full_count
                else:
                    a = float(np.exp(np.mean(np.log(space.coefficients(c[None, :])[0]))))
                    t = well_conductance(n, a, rho_eff, r_eq) / full_count
                v = value(c[None, :])[0] if callable(value) else float(value)
                wells.append((flat, np.full(len(flat), t), v))
                inside &= ~in_ball
        if callable(value):
            v = value(pts[inside])
        else:
            v = float(value)
        forced[inside] = True
        values[inside] = v
        label[inside] = ci

    forced = forced.reshape(grid.shape)
    values = values.reshape(grid.shape)
    label = label.reshape(grid.shape)
    for flat, _, _ in wells:
        if forced.ravel()[flat].any():
            warnings.append("sub-cell ball host cell is forced; well ignored there")
    wells = [(f[~forced.ravel()[f]], t[~forced.ravel()[f]], v) for f, t, v in wells]
    wells = [w for w in wells if len(w[0])]

    mask = CellMask(forced, values, wells=wells, warnings=warnings)
    if fit:
        _fit_boundaries(grid, mask, label, constraints)
    return mask


def _fit_boundaries(grid, mask, label, constraints, iterations=48, theta_min=1e-3):
    n = grid.dimension
    mesh = np.meshgrid(*grid.centers_1d, indexing="ij")
    X = np.stack(mesh, axis=-1)
    mask.theta, mask.face_value = [], []
    for a in range(n):
        lo, hi = _slices(n, a)
        fshape = X[lo].shape[:-1]
        theta = np.ones(fshape)
        fval = np.full(fshape, np.nan)
        for src, dst in ((lo, hi), (hi, lo)):
            sel = mask.unknown[src] & mask.forced[dst]
            if not sel.any():
                continue
            p0 = X[src][sel]
            p1 = X[dst][sel]
            lab = label[dst][sel]
            s_lo = np.zeros(len(p0))
            s_hi = np.ones(len(p0))
            for ci in np.unique(lab):
                if ci < 0:
                    continue
                k = lab == ci
                region, value = constraints[ci]
                a0, a1 = p0[k], p1[k]
                l, u = s_lo[k], s_hi[k]
                for _ in range(iterations):
                    mid = 0.5 * (l + u)
                    hit = region.contains(a0 + mid[:, None] * (a1 - a0))
                    u = np.where(hit, mid, u)
                    l = np.where(hit, l, mid)
                s_hi[k] = u
                cross = a0 + u[:, None] * (a1 - a0)
                vals = value(cross) if callable(value) else np.full(len(cross), float(value))
                fv = fval[sel]
                fv[k] = vals
                fval[sel] = fv
            theta[sel] = np.maximum(s_hi, theta_min)
        mask.theta.append(theta)
        mask.face_value.append(fval)


# ---------------------------------------------------------------------------
# assembly, energy and flux


@dataclass
class DiscreteOperator:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    index: np.ndarray  # flat cell -> unknown number, -1 for forced cells
    grid: Grid
    mask: CellMask

    @property
    def size(self):
        return self.matrix.shape[0]

    def scatter(self, x):
        """Full cell field from the unknown vector ``x``."""
        u = self.mask.values.ravel().copy()
        u[self.index >= 0] = x
        return u.reshape(self.grid.shape)


def _face_terms(mask, a, t):
    """Effective coefficient per face after boundary fitting."""
    if mask.theta is None:
        return t, None
    return t / mask.theta[a], mask.face_value[a]


def assemble(space, grid, mask):
    """Assemble the SPD system over the unknown cells of ``mask``."""
    n = grid.dimension
    unknown = mask.unknown
    if not unknown.any():
        raise ValueError("degenerate system: no unknown cells")
    index = np.full(grid.size, -1)
    index[unknown.ravel()] = np.arange(int(unknown.sum()))
    idx = index.reshape(grid.shape)
    N = int(unknown.sum())
    diag = np.zeros(N)
    rhs = np.zeros(N)
    rows, cols, vals = [], [], []
    for a, t in enumerate(transmissibilities(space, grid)):
        lo, hi = _slices(n, a)
        coef_fit, fval = _face_terms(mask, a, t)
        both = unknown[lo] & unknown[hi]
        i, j, c = idx[lo][both], idx[hi][both], t[both]
        rows += [i, j]
        cols += [j, i]
        vals += [-c, -c]
        np.add.at(diag, i, c)
        np.add.at(diag, j, c)
        for src, dst in ((lo, hi), (hi, lo)):
            sel = unknown[src] & mask.forced[dst]
            c = coef_fit[sel]
            v = mask.values[dst][sel]
            if fval is not None:
                fv = fval[sel]
                v = np.where(np.isnan(fv), v, fv)
            np.add.at(diag, idx[src][sel], c)
            np.add.at(rhs, idx[src][sel], c * v)
    for flat, t, v in mask.wells:
        np.add.at(diag, index[flat], t)
        np.add.at(rhs, index[flat], t * v)
    rows.append(np.arange(N))
    cols.append(np.arange(N))
    vals.append(diag)
    A = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N, N)
    )
    return DiscreteOperator(A, rhs, index, grid, mask)


def _face_values(mask, field, a):
    """Left/right values and coefficient multipliers per face along axis a."""
    n = field.ndim
    lo, hi = _slices(n, a)
    left, right = field[lo].copy(), field[hi].copy()
    scale = np.ones(left.shape)
    if mask is not None and mask.theta is not None:
        fv = mask.face_value[a]
        for src, dst, arr in ((lo, hi, right), (hi, lo, left)):
            sel = mask.unknown[src] & mask.forced[dst]
            scale[sel] = 1.0 / mask.theta[a][sel]
            use = sel & ~np.isnan(fv)
            arr[use] = fv[use]
    return left, right, scale


def energy(space, grid, field, mask=None):
    """Discrete weighted Dirichlet energy sum_f t_f (jump across f)^2."""
    field = np.asarray(field, dtype=float).reshape(grid.shape)
    total = 0.0
    for a, t in enumerate(transmissibilities(space, grid)):
        left, right, scale = _face_values(mask, field, a)
        total += float(np.sum(t * scale * (right - left) ** 2))
    if mask is not None:
        u = field.ravel()
        for flat, t, v in mask.wells:
            total += float(np.sum(t * (v - u[flat]) ** 2))
    return total * grid.mirror_factor


def flux(space, grid, field, shell, center=None, mask=None):
    """Total flux out of the ball |x - center| < shell across the faces it cuts.

    With a mask, the shell must separate the forced cells of value 1 from
    those of value 0.
    """
    n = grid.dimension
    field = np.asarray(field, dtype=float).reshape(grid.shape)
    center = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    pts = grid.centers()
    inside = (np.sum((pts - center) ** 2, axis=1) < shell**2).reshape(grid.shape)
    if mask is not None:
        ones = mask.forced & (mask.values == 1.0)
        zeros = mask.forced & (mask.values == 0.0)
        well_out = any(v == 1.0 and np.linalg.norm(_well_center(grid, f) - center) >= shell for f, _, v in mask.wells)
        if (ones & ~inside).any() or (zeros & inside).any() or well_out:
            raise ValueError(f"shell of radius {shell} does not separate the forced sets")
    total = 0.0
    for a, t in enumerate(transmissibilities(space, grid)):
        lo, hi = _slices(n, a)
        left, right, scale = _face_values(mask, field, a)
        cut_out = inside[lo] & ~inside[hi]
        cut_in = ~inside[lo] & inside[hi]
        total += float(np.sum((t * scale * (left - right))[cut_out]))
        total += float(np.sum((t * scale * (right - left))[cut_in]))
    return total * grid.mirror_factor


def _well_center(grid, flat):
    pts = grid.centers()[flat]
    return pts.mean(axis=0)
