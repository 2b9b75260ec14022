"""Centered (and approximate uncentered) capacitary maximal functions.

For a finite atomic measure the centered value at ``x`` is computed exactly:
``nu(closed ball(x, r))`` is a right-continuous step function of ``r`` that
jumps only at the atom distances, and ``c`` is continuous and increasing,
so the supremum over ``r`` is the maximum over atom distances of
(cumulative weight) / c(distance).

For grid fields the ball integrals come from prefix sums of the
piecewise-constant cell model (exact in 1-D, Gauss-Legendre across columns
in 2-D) and the supremum over ``r`` is taken on a per-point radius lattice
that always includes the smallest radius covering the whole support.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, cKDTree
from scipy.spatial.distance import cdist

from .capacity import RadialProfile, ball_capacity, inverse_ball_capacity, scaling_envelope
from .errors import ConfigurationError, DomainError
from .sampling import AtomicMeasure, Grid, ScalarField, field_mass, scale_measure

POINT_CHUNK = 512
GAUSS_NODES = 4


def _ratio(mass, cap):
    """mass / cap with mass / 0 = +inf for positive mass and 0 / 0 = 0."""
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(cap > 0, mass / np.where(cap > 0, cap, 1.0),
                       np.where(mass > 0, np.inf, 0.0))
    return out


def _as_points(points, n):
    p = np.asarray(points, dtype=float)
    if p.ndim == 0:
        p = p.reshape(1, 1)
    elif p.ndim == 1:
        p = p[:, None] if n == 1 else p[None, :]
    if p.shape[1] != n:
        raise DomainError(f"points must have dimension {n}")
    return p


def _map_chunks(fn, points, workers=1, chunk=POINT_CHUNK):
    """Apply ``fn`` to consecutive chunks of points; output order never depends on ``workers``."""
    pieces = [points[i:i + chunk] for i in range(0, len(points), chunk)]
    if not pieces:
        return np.zeros(0)
    if workers and workers > 1 and len(pieces) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            out = list(ex.map(fn, pieces))
    else:
        out = [fn(p) for p in pieces]
    return np.concatenate(out)


@dataclass
class MaximalField:
    """Maximal-function values at a list of points (``+inf`` allowed at atoms)."""

    eval_points: np.ndarray
    values: np.ndarray
    mode: str = "centered"
    grid: Grid | None = None

    def superlevel_mask(self, lam):
        return self.values > lam

    def to_csv(self, path):
        n = self.eval_points.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "z"][:n] + ["value"])
            for p, v in zip(self.eval_points, self.values):
                w.writerow([*(f"{c:.17g}" for c in p), "inf" if np.isinf(v) else f"{v:.17g}"])


# ---------------------------------------------------------------- atomic measures

def _centered_measure_chunk(positions, weights, profile, pts):
    if positions.shape[0] == 0:
        return np.zeros(len(pts))
    dist = cdist(pts, positions)
    order = np.argsort(dist, axis=1, kind="stable")
    dsorted = np.take_along_axis(dist, order, axis=1)
    cum = np.cumsum(weights[order], axis=1)
    return _ratio(cum, ball_capacity(profile, dsorted)).max(axis=1)


def maximal_at_point_measure(nu: AtomicMeasure, profile: RadialProfile, x) -> float:
    """Exact centered value ``sup_r nu(B(x, r)) / c(r)``."""
    pts = _as_points(x, nu.n)
    return float(_centered_measure_chunk(nu.positions, nu.weights, profile, pts[:1])[0])


def maximal_field_measure(nu: AtomicMeasure, profile: RadialProfile, eval_points,
                          workers=1, grid=None) -> MaximalField:
    pts = _as_points(eval_points, nu.n)
    vals = _map_chunks(
        lambda p: _centered_measure_chunk(nu.positions, nu.weights, profile, p),
        pts, workers)
    return MaximalField(pts, vals, "centered", grid)


def openness_radius(nu: AtomicMeasure, profile: RadialProfile, x, lam) -> float:
    """Radius ``delta`` with ``M nu(z) > lam`` whenever ``|z - x| < delta``.

    Takes a ball ``B(x, r)`` with ``nu(B) / c(r) > lam``, picks ``s > r``
    with ``nu(B) / c(s) > lam`` and returns ``s - r``: every ball
    ``B(z, s)`` with ``|z - x| < s - r`` contains ``B(x, r)``.  Returns 0
    when ``M nu(x) <= lam``.
    """
    if not lam > 0:
        raise DomainError("lambda must be positive")
    pts = _as_points(x, nu.n)
    d = np.linalg.norm(nu.positions - pts[0], axis=1)
    order = np.argsort(d, kind="stable")
    d = d[order]
    cum = np.cumsum(nu.weights[order])
    best = 0.0
    for r, wsum in zip(d, cum):
        if wsum <= 0:
            continue
        r_star = inverse_ball_capacity(profile, wsum / lam)
        if r_star > r:
            best = max(best, (r_star - r) / 2)
    return best


# ---------------------------------------------------------------- grid fields

@dataclass(frozen=True)
class RadiusPolicy:
    """How the supremum over radii is discretized for grid fields.

    ``adaptive`` scans ``count`` geometric radii between the distance to the
    support and the covering radius of each point, then ``passes`` times
    rescans ``refine`` linear radii between the neighbours of the best one.
    ``lattice`` uses the fixed radii ``[r_min, r_max]``.  ``atom_distances`` is the exact rule for atomic
    measures and is accepted only there.
    """

    mode: str = "adaptive"
    r_min: float | None = None
    r_max: float | None = None
    count: int = 32
    geometric: bool = True
    include_support_cover: bool = True
    refine: int = 9
    passes: int = 2

    def __post_init__(self):
        if self.mode not in ("adaptive", "lattice", "atom_distances"):
            raise ConfigurationError(f"unknown radius policy mode {self.mode!r}")
        if self.mode == "lattice":
            if self.r_min is None or self.r_max is None or not self.r_min > 0:
                raise ConfigurationError("lattice policy needs 0 < r_min <= r_max")
            if self.count < 2 or self.r_max < self.r_min:
                raise ConfigurationError("lattice policy needs count >= 2 and r_max >= r_min")
        if self.mode == "adaptive" and self.count < 2:
            raise ConfigurationError("adaptive policy needs count >= 2")

    def lattice(self):
        if self.geometric:
            return np.geomspace(self.r_min, self.r_max, self.count)
        return np.linspace(self.r_min, self.r_max, self.count)

    def refined(self):
        """Policy for a grid refined by two: twice the radius count."""
        return RadiusPolicy(self.mode, self.r_min, self.r_max, 2 * self.count,
                            self.geometric, self.include_support_cover,
                            2 * self.refine - 1, self.passes)


def default_lattice_policy(grid: Grid, count=256) -> RadiusPolicy:
    """Geometric lattice from ``h`` to the grid diagonal."""
    diag = grid.h * math.sqrt(sum(e * e for e in grid.extents))
    return RadiusPolicy("lattice", grid.h, diag, count)


class BallIntegrator:
    """Integrals of a piecewise-constant grid field over arbitrary balls."""

    def __init__(self, field: ScalarField):
        self.field = field
        grid = field.grid
        self.n = grid.n
        self.h = grid.h
        self.mass = field_mass(field)
        s = field.samples
        nz = np.nonzero(s)
        if len(nz[0]) == 0:
            raise DomainError("field has zero mass")
        lo = [int(a.min()) for a in nz]
        hi = [int(a.max()) + 1 for a in nz]
        self.lo_idx, self.hi_idx = lo, hi
        box = s[tuple(slice(a, b) for a, b in zip(lo, hi))]
        h = self.h
        if self.n == 1:
            self.edges = grid.origin[0] + np.arange(lo[0], hi[0] + 1) * h
            self.cum = np.concatenate([[0.0], np.cumsum(box * h)])
            self.support_lo = self.edges[0]
            self.support_hi = self.edges[-1]
        else:
            xe = grid.origin[0] + np.arange(lo[0], hi[0] + 1) * h
            self.y0 = grid.origin[1] + lo[1] * h
            self.ny = hi[1] - lo[1]
            # column prefix sums along y, in mass per unit x-length
            self.colcum = np.concatenate(
                [np.zeros((box.shape[0], 1)), np.cumsum(box * h, axis=1)], axis=1)
            self.xedges = xe
            self.gauss = np.polynomial.legendre.leggauss(GAUSS_NODES)
            cells = np.argwhere(box > 0)
            centers = np.column_stack([
                grid.origin[0] + (cells[:, 0] + lo[0] + 0.5) * h,
                grid.origin[1] + (cells[:, 1] + lo[1] + 0.5) * h,
            ])
            self._tree = cKDTree(centers)
            corners = (centers[:, None, :]
                       + 0.5 * h * np.array([[-1, -1], [-1, 1], [1, -1], [1, 1]])[None]).reshape(-1, 2)
            try:
                self.hull = corners[ConvexHull(corners).vertices]
            except Exception:
                self.hull = corners
        self.centroid = self._centroid()

    def _centroid(self):
        f = self.field
        pts = f.grid.cell_centers()
        w = f.samples.ravel() * f.grid.cell_volume
        return np.array([math.fsum(w * pts[:, a]) for a in range(self.n)]) / self.mass

    def nearest(self, x):
        """Lower bound on the distance from ``x`` to the support."""
        if self.n == 1:
            return max(self.support_lo - x[0], x[0] - self.support_hi, 0.0)
        d, _ = self._tree.query(x)
        return max(d - self.h * math.sqrt(2) / 2, 0.0)

    def farthest(self, x):
        """Smallest radius of a ball at ``x`` containing every support cell."""
        if self.n == 1:
            return max(abs(x[0] - self.support_lo), abs(x[0] - self.support_hi))
        return float(np.max(np.linalg.norm(self.hull - x, axis=1)))

    def integral(self, x, radii):
        """Field mass inside the closed balls ``B(x, r)`` for each ``r`` in ``radii``."""
        radii = np.asarray(radii, dtype=float)
        if self.n == 1:
            return (np.interp(x[0] + radii, self.edges, self.cum)
                    - np.interp(x[0] - radii, self.edges, self.cum))
        # x = x0 + r sin(t) per column piece; the chord edge becomes smooth in t
        xi, wi = self.gauss
        rr = np.maximum(radii, 1e-300)[:, None]
        reach = float(radii.max()) if radii.size else 0.0
        cols = np.nonzero((self.xedges[1:] >= x[0] - reach) & (self.xedges[:-1] <= x[0] + reach))[0]
        if cols.size == 0:
            return np.zeros_like(radii)
        ta = np.arcsin(np.clip((self.xedges[cols] - x[0]) / rr, -1.0, 1.0))
        tb = np.arcsin(np.clip((self.xedges[cols + 1] - x[0]) / rr, -1.0, 1.0))
        half_span = (tb - ta)[..., None] / 2
        t = ta[..., None] + half_span * (xi + 1)
        half = rr[..., None] * np.cos(t)
        col = np.broadcast_to(cols[None, :, None], t.shape)
        strip = self._column_cdf(x[1] + half, col) - self._column_cdf(x[1] - half, col)
        return np.sum(strip * half * half_span * wi, axis=(1, 2))

    def _column_cdf(self, y, col):
        u = (y - self.y0) / self.h
        k = np.clip(np.floor(u), 0, self.ny - 1).astype(np.intp)
        frac = np.clip(u - k, 0.0, 1.0)
        a = self.colcum[col, k]
        b = self.colcum[col, k + 1]
        return a + frac * (b - a)


def _field_value(integ: BallIntegrator, profile, x, policy: RadiusPolicy):
    r_cover = integ.farthest(x)
    if policy.mode == "lattice":
        radii = policy.lattice()
    else:
        r_lo = max(integ.nearest(x), integ.h / 8)
        r_hi = r_cover
        if r_hi <= r_lo:
            r_lo = r_hi / 2
        radii = np.geomspace(r_lo, r_hi, policy.count)
    vals = integ.integral(x, radii) / ball_capacity(profile, radii)
    best = float(np.max(vals))
    if policy.mode == "adaptive" and policy.refine > 1:
        for _ in range(policy.passes):
            k = int(np.argmax(vals))
            radii = np.linspace(radii[max(k - 1, 0)], radii[min(k + 1, len(radii) - 1)],
                                policy.refine)
            vals = integ.integral(x, radii) / ball_capacity(profile, radii)
            best = max(best, float(np.max(vals)))
    if policy.include_support_cover and r_cover > 0:
        best = max(best, integ.mass / ball_capacity(profile, r_cover))
    return best


def maximal_at_point_field(field: ScalarField, profile: RadialProfile, x,
                           policy: RadiusPolicy | None = None, integrator=None) -> float:
    """Centered value of the grid field at ``x`` (see :class:`RadiusPolicy`)."""
    policy = policy or RadiusPolicy()
    if policy.mode == "atom_distances":
        raise ConfigurationError("atom_distances policy applies to atomic measures only")
    integ = integrator or BallIntegrator(field)
    pts = _as_points(x, field.n)
    return _field_value(integ, profile, pts[0], policy)


def maximal_field_field(field: ScalarField, profile: RadialProfile, eval_points,
                        policy: RadiusPolicy | None = None, workers=1,
                        integrator=None, grid=None) -> MaximalField:
    policy = policy or RadiusPolicy()
    integ = integrator or BallIntegrator(field)
    pts = _as_points(eval_points, field.n)
    vals = _map_chunks(
        lambda chunk: np.array([_field_value(integ, profile, p, policy) for p in chunk]),
        pts, workers, chunk=64)
    return MaximalField(pts, vals, "centered", grid)


# ---------------------------------------------------------------- uncentered

def _uncentered_measure(nu: AtomicMeasure, profile, x):
    centers = np.vstack([nu.positions, x[None, :], (nu.positions + x) / 2])
    rho = np.linalg.norm(centers - x, axis=1)
    dist = cdist(centers, nu.positions)
    order = np.argsort(dist, axis=1, kind="stable")
    dsorted = np.take_along_axis(dist, order, axis=1)
    cum = np.cumsum(nu.weights[order], axis=1)
    # a ball around a candidate center must still contain x
    radii = np.maximum(dsorted, rho[:, None])
    return float(_ratio(cum, ball_capacity(profile, radii)).max())


def _uncentered_field(integ: BallIntegrator, profile, x, policy, n_centers=9):
    best = _field_value(integ, profile, x, policy)
    for s in np.linspace(0, 1, n_centers)[1:]:
        c = x + s * (integ.centroid - x)
        rho = float(np.linalg.norm(c - x))
        r_cover = max(integ.farthest(c), rho)
        radii = np.geomspace(max(rho, integ.h / 8), max(r_cover, rho, integ.h / 8) * (1 + 1e-12),
                             policy.count)
        vals = integ.integral(c, radii) / ball_capacity(profile, radii)
        best = max(best, float(np.max(vals)), integ.mass / ball_capacity(profile, r_cover))
    return best


def uncentered_maximal_at_point(source, profile: RadialProfile, x,
                                policy: RadiusPolicy | None = None) -> float:
    """Lower bound for the supremum over all balls that contain ``x``.

    Candidate centers are the atoms, ``x`` itself and the midpoints of ``x``
    and each atom (for grids: points on the segment from ``x`` to the mass
    centroid); radii are restricted to those whose ball still contains
    ``x``.  Because ``x`` is a candidate center the result is never below
    the centered value.
    """
    if isinstance(source, AtomicMeasure):
        pts = _as_points(x, source.n)
        return _uncentered_measure(source, profile, pts[0])
    policy = policy or RadiusPolicy()
    integ = source if isinstance(source, BallIntegrator) else BallIntegrator(source)
    pts = _as_points(x, integ.n)
    return _uncentered_field(integ, profile, pts[0], policy)


# ---------------------------------------------------------------- unified operator

class MaximalOperator:
    """``x -> M_C(source)(x)`` for an atomic measure or a grid field.

    Bundles the quantities the level-set tools need: total mass, centroid
    and the support extent about a point.
    """

    def __init__(self, source, profile: RadialProfile, policy: RadiusPolicy | None = None,
                 centered=True):
        self.source = source
        self.profile = profile
        self.centered = centered
        if isinstance(source, AtomicMeasure):
            if source.size == 0 or not source.total_mass > 0:
                raise DomainError("input measure is empty")
            self.kind = "measure"
            self.n = source.n
            self.mass = source.total_mass
            self.centroid = source.centroid
            self.policy = None
        elif isinstance(source, ScalarField):
            self.kind = "field"
            self.integrator = BallIntegrator(source)
            self.n = source.n
            self.mass = self.integrator.mass
            self.centroid = self.integrator.centroid
            self.policy = policy or RadiusPolicy()
        else:
            raise DomainError(f"unsupported source type {type(source).__name__}")

    def support_extent(self, center):
        center = np.asarray(center, dtype=float)
        if self.kind == "measure":
            return float(np.max(np.linalg.norm(self.source.positions - center, axis=1)))
        return self.integrator.farthest(center)

    def safe_radius(self, center, lam):
        """Distance from ``center`` beyond which ``M <= lam`` is guaranteed."""
        reach = inverse_ball_capacity(self.profile, self.mass / lam)
        if not self.centered:
            reach *= 2
        return self.support_extent(center) + reach

    def __call__(self, points, workers=1):
        pts = _as_points(points, self.n)
        if self.kind == "measure":
            if self.centered:
                return maximal_field_measure(self.source, self.profile, pts, workers).values
            return np.array([_uncentered_measure(self.source, self.profile, p) for p in pts])
        if self.centered:
            return maximal_field_field(self.source, self.profile, pts, self.policy,
                                       workers, self.integrator).values
        return np.array([_uncentered_field(self.integrator, self.profile, p, self.policy)
                         for p in pts])

    def describe(self):
        if self.kind == "measure":
            return {"type": "atoms", "size": self.source.size, "mass": self.mass}
        return {"type": "field", "label": self.source.label, "h": self.source.grid.h,
                "mass": self.mass}


# ---------------------------------------------------------------- scaling sandwich

@dataclass
class SandwichReport:
    t: float
    n_points: int
    violations: int
    max_lower_excess: float
    max_upper_excess: float
    tight: bool

    @property
    def passed(self):
        return self.violations == 0

    def to_dict(self):
        return dict(self.__dict__, passed=self.passed)


def sandwich_check(nu: AtomicMeasure, profile: RadialProfile, t, points, rtol=1e-10) -> SandwichReport:
    """Compare ``M nu(x/t) / psi(t) <= M nu_t(x) <= M nu(x/t) / phi(t)`` pointwise."""
    if not t > 0:
        raise DomainError("scale t must be positive")
    env = scaling_envelope(profile)
    pts = _as_points(points, nu.n)
    base = maximal_field_measure(nu, profile, pts / t).values
    mid = maximal_field_measure(scale_measure(nu, t), profile, pts).values
    lower = base / float(env.psi(t))
    upper = base / float(env.phi(t))
    finite = np.isfinite(mid)
    bad_lo = np.zeros(len(pts), bool)
    bad_hi = np.zeros(len(pts), bool)
    bad_lo[finite] = lower[finite] > mid[finite] * (1 + rtol)
    bad_hi[finite] = mid[finite] > upper[finite] * (1 + rtol)
    # at an atom every side is infinite; a finite middle with an infinite side is a violation
    bad_hi |= np.isinf(mid) & ~np.isinf(upper)
    bad_lo |= finite & np.isinf(lower)
    with np.errstate(invalid="ignore", divide="ignore"):
        ex_lo = np.where(finite & (mid > 0), lower / mid - 1, 0.0)
        ex_hi = np.where(finite & (upper > 0), mid / upper - 1, 0.0)
    tight = bool(np.allclose(lower[finite], mid[finite], rtol=1e-12)
                 and np.allclose(upper[finite], mid[finite], rtol=1e-12))
    return SandwichReport(float(t), len(pts), int(np.sum(bad_lo | bad_hi)),
                          float(np.max(ex_lo, initial=0.0)), float(np.max(ex_hi, initial=0.0)),
                          tight)
