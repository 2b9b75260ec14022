"""Superlevel sets of maximal functions and capacity bounds for them.

The capacity of a general set is not determined by a ball profile, so
every set here gets a certified-style bracket from the capacity axioms:
an inscribed ball gives a lower bound (monotonicity) and an enclosing ball
or a finite covering by balls gives an upper bound (monotonicity plus
subadditivity).

Level sets come in two representations.  ``cells`` marks grid cells whose
maximal value exceeds the threshold.  ``rays`` traces the outer boundary
along a fan of directions from a center, which stays cheap when the set is
far larger than any feasible grid (small thresholds).
"""

from __future__ import annotations

import json
import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .capacity import RadialProfile, ball_capacity, scaling_envelope
from .errors import DomainError, NonBracketingError
from .maximal import MaximalField, MaximalOperator
from .sampling import Grid

RAY_RTOL = 1e-6
OUTER_CAP = 1e6
INWARD_FACTOR = 1.5
DEFAULT_DIRECTIONS = 64
DILATION = 3.0


def ray_directions(n, count=DEFAULT_DIRECTIONS):
    """Unit directions: ``+-1`` in 1-D, ``count`` equally spaced angles in 2-D."""
    if n == 1:
        return np.array([[-1.0], [1.0]])
    if n == 2:
        a = 2 * np.pi * np.arange(count) / count
        return np.column_stack([np.cos(a), np.sin(a)])
    raise DomainError("ray directions are implemented for n in {1, 2}")


@dataclass
class LevelSetApprox:
    """Discrete stand-in for ``{x : M(x) > lam}``.

    For ``cells`` the set is the union of the cells flagged in ``mask``.
    For ``rays`` it is the star-shaped region whose boundary along
    ``directions[k]`` lies in ``[r_in[k], r_out[k]]`` from ``center``.
    """

    lam: float
    kind: str
    grid: Grid | None = None
    mask: np.ndarray | None = None
    center: np.ndarray | None = None
    directions: np.ndarray | None = None
    r_in: np.ndarray | None = None
    r_out: np.ndarray | None = None
    source: dict = field(default_factory=dict)

    @property
    def empty(self):
        if self.kind == "cells":
            return not bool(self.mask.any())
        return self.r_out is None or len(self.r_out) == 0

    def points(self):
        """Cell centers (cells) or outer boundary points (rays)."""
        if self.kind == "cells":
            return self.grid.cell_centers()[self.mask.ravel()]
        return self.center + self.r_out[:, None] * self.directions

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            if self.kind == "cells":
                n = self.grid.n
                idx = np.argwhere(self.mask)
                pts = self.points()
                w.writerow(["i", "j"][:n] + ["x", "y"][:n])
                for k, p in zip(idx, pts):
                    w.writerow([*k.tolist(), *(f"{c:.17g}" for c in p)])
            else:
                n = self.directions.shape[1]
                w.writerow(["dx", "dy"][:n] + ["r_in", "r_out"])
                for d, a, b in zip(self.directions, self.r_in, self.r_out):
                    w.writerow([*(f"{c:.17g}" for c in d), f"{a:.17g}", f"{b:.17g}"])


def superlevel_cells(mfield: MaximalField, lam) -> LevelSetApprox:
    """Cells of the evaluation grid where the maximal value exceeds ``lam``."""
    if mfield.grid is None:
        raise DomainError("superlevel_cells needs a maximal field evaluated on a grid")
    mask = (mfield.values > lam).reshape(mfield.grid.shape)
    return LevelSetApprox(float(lam), "cells", grid=mfield.grid, mask=mask)


def superlevel_boundary_rays(op: MaximalOperator, lam, center=None, directions=None,
                             rtol=RAY_RTOL, outer_cap=OUTER_CAP, workers=1) -> LevelSetApprox:
    """Bracket the outermost crossing of ``M = lam`` along each ray.

    The march starts at a radius where ``M <= lam`` is guaranteed (the
    support extent plus the radius at which even the whole mass in a
    touching ball falls below ``lam``), steps inward by a constant factor
    until ``M > lam`` and then bisects.
    """
    if not lam > 0:
        raise DomainError("lambda must be positive")
    center = op.centroid if center is None else np.asarray(center, dtype=float)
    dirs = ray_directions(op.n) if directions is None else np.asarray(directions, dtype=float)
    m0 = op(center[None, :])[0]
    if not m0 > lam:
        raise NonBracketingError(
            f"lambda={lam:g} is not below the maximal value {m0:g} at the ray center")
    k = len(dirs)
    start = op.safe_radius(center, lam) * (1 + 1e-9)
    if start > outer_cap:
        probe = op(center + outer_cap * dirs, workers)
        bad = np.flatnonzero(probe > lam)
        if bad.size:
            raise NonBracketingError(
                f"M > lambda={lam:g} at the march cap {outer_cap:g} along direction "
                f"{dirs[bad[0]].tolist()}", dirs[bad[0]])
        start = outer_cap
    r_out = np.full(k, start)
    r_in = np.zeros(k)
    active = np.ones(k, bool)
    tiny = start * 1e-300
    while active.any():
        trial = r_out[active] / INWARD_FACTOR
        inside = op(center + trial[:, None] * dirs[active], workers) > lam
        idx = np.flatnonzero(active)
        r_in[idx[inside]] = trial[inside]
        r_out[idx[~inside]] = trial[~inside]
        active[idx[inside]] = False
        if np.any(r_out[active] < tiny):
            bad = np.flatnonzero(active & (r_out < tiny))[0]
            raise NonBracketingError("ray march collapsed onto the center", dirs[bad])
    active = (r_out - r_in) > rtol * r_out
    while active.any():
        mid = 0.5 * (r_in[active] + r_out[active])
        inside = op(center + mid[:, None] * dirs[active], workers) > lam
        idx = np.flatnonzero(active)
        r_in[idx[inside]] = mid[inside]
        r_out[idx[~inside]] = mid[~inside]
        active = (r_out - r_in) > rtol * r_out
    return LevelSetApprox(float(lam), "rays", center=center, directions=dirs,
                          r_in=r_in, r_out=r_out, source=op.describe())


def probe_rays(lset: LevelSetApprox, op: MaximalOperator, rng=None, n_probes=32):
    """Check a traced set: ``0.9 r_in`` probes must be inside, ``1.1 r_out`` outside."""
    rng = np.random.default_rng(rng)
    k = len(lset.directions)
    pick = rng.integers(0, k, size=n_probes)
    dirs = lset.directions[pick]
    inner = op(lset.center + 0.9 * lset.r_in[pick, None] * dirs)
    outer = op(lset.center + 1.1 * lset.r_out[pick, None] * dirs)
    return {
        "interior_misses": int(np.sum(~(inner > lset.lam))),
        "exterior_misses": int(np.sum(outer > lset.lam)),
        "probes": int(n_probes),
        "passed": bool(np.all(inner > lset.lam) and np.all(outer <= lset.lam)),
    }


# ---------------------------------------------------------------- enclosing balls

def _circle_two(a, b):
    c = (a + b) / 2
    return c, float(np.linalg.norm(a - c))


def _circle_three(a, b, c):
    ax, ay = a
    bx, by = b
    cx, cy = c
    d = 2 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    if abs(d) < 1e-14 * max(1.0, np.abs(np.concatenate([a, b, c])).max() ** 2):
        # collinear: the widest pair decides
        pairs = [(a, b), (a, c), (b, c)]
        return max((_circle_two(p, q) for p, q in pairs), key=lambda t: t[1])
    a2, b2, c2 = ax * ax + ay * ay, bx * bx + by * by, cx * cx + cy * cy
    ux = (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d
    uy = (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d
    center = np.array([ux, uy])
    r = max(np.linalg.norm(center - p) for p in (a, b, c))
    return center, float(r)


def minimal_enclosing_ball(points, rng=0):
    """Smallest ball containing ``points`` (exact for n <= 2).

    2-D uses the randomized incremental construction on the convex hull
    vertices; 1-D is the midpoint of the extremes.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if len(pts) == 0:
        raise DomainError("cannot enclose an empty set")
    if pts.shape[1] == 1:
        lo, hi = pts[:, 0].min(), pts[:, 0].max()
        return np.array([(lo + hi) / 2]), float((hi - lo) / 2)
    if pts.shape[1] != 2:
        raise DomainError("minimal enclosing balls are implemented for n <= 2")
    pts = np.unique(pts, axis=0)
    if len(pts) > 8:
        try:
            from scipy.spatial import ConvexHull
            pts = pts[ConvexHull(pts).vertices]
        except Exception:
            pass
    pts = pts[np.random.default_rng(rng).permutation(len(pts))]

    def outside(p, c, r):
        return np.linalg.norm(p - c) > r * (1 + 1e-12) + 1e-300

    c, r = pts[0].copy(), 0.0
    for i in range(1, len(pts)):
        if not outside(pts[i], c, r):
            continue
        c, r = pts[i].copy(), 0.0
        for j in range(i):
            if not outside(pts[j], c, r):
                continue
            c, r = _circle_two(pts[i], pts[j])
            for k in range(j):
                if outside(pts[k], c, r):
                    c, r = _circle_three(pts[i], pts[j], pts[k])
    return c, r


def enclosing_ball(lset: LevelSetApprox):
    """Minimal ball around the set; cells are padded by their circumradius."""
    if lset.empty:
        raise DomainError("level set is empty")
    c, r = minimal_enclosing_ball(lset.points())
    if lset.kind == "cells":
        r += lset.grid.h * math.sqrt(lset.grid.n) / 2
    return c, r


def inscribed_ball(lset: LevelSetApprox, center_hint=None):
    """A large ball inside the set.

    Rays: the ball at the ray center of radius ``min r_in``.  Cells: the
    better of the hint cell and the deepest cell of the Euclidean distance
    transform, shrunk by one cell circumradius so the ball stays inside the
    union of flagged cells.
    """
    if lset.empty:
        raise DomainError("level set is empty")
    if lset.kind == "rays":
        return lset.center.copy(), float(lset.r_in.min())
    grid = lset.grid
    padded = np.pad(lset.mask, 1, constant_values=False)
    edt = ndimage.distance_transform_edt(padded)[tuple(slice(1, -1) for _ in range(grid.n))]
    pad = grid.h * math.sqrt(grid.n) / 2
    radius = np.maximum(edt * grid.h - pad, 0.0)
    best = np.unravel_index(int(np.argmax(radius)), radius.shape)
    cands = [best]
    if center_hint is not None:
        idx = np.floor((np.asarray(center_hint) - grid.lower) / grid.h).astype(int)
        if np.all(idx >= 0) and np.all(idx < np.array(grid.shape)) and lset.mask[tuple(idx)]:
            cands.append(tuple(idx))
    pick = max(cands, key=lambda i: radius[i])
    center = grid.lower + (np.array(pick) + 0.5) * grid.h
    return center, float(radius[pick])


def covering_family(lset: LevelSetApprox):
    """One enclosing ball per connected component (cells) or the enclosing ball (rays)."""
    if lset.kind == "rays":
        return [enclosing_ball(lset)]
    labels, count = ndimage.label(lset.mask, structure=np.ones((3,) * lset.grid.n))
    centers = lset.grid.cell_centers()
    pad = lset.grid.h * math.sqrt(lset.grid.n) / 2
    out = []
    flat = labels.ravel()
    for lab in range(1, count + 1):
        c, r = minimal_enclosing_ball(centers[flat == lab])
        out.append((c, r + pad))
    return out


@dataclass
class CapacityBounds:
    lam: float
    lower: float
    upper: float
    witness_lower: tuple
    witness_upper: dict

    @property
    def inscribed_radius(self):
        return self.witness_lower[1]

    @property
    def enclosing_radius(self):
        return self.witness_upper["enclosing"][1]

    def to_dict(self):
        def ball(b):
            return {"center": np.asarray(b[0]).tolist(), "radius": float(b[1])}
        return {
            "lambda": self.lam,
            "lower": self.lower,
            "upper": self.upper,
            "witnesses": {
                "inscribed": ball(self.witness_lower),
                "enclosing": ball(self.witness_upper["enclosing"]),
                "covering": [ball(b) for b in self.witness_upper["covering"]],
            },
        }


def capacity_bounds(lset: LevelSetApprox, profile: RadialProfile, center_hint=None) -> CapacityBounds:
    """``c(inscribed) <= C(E) <= min(c(enclosing), sum of c over the covering)``."""
    ins = inscribed_ball(lset, center_hint if center_hint is not None else lset.center)
    enc = enclosing_ball(lset)
    cover = covering_family(lset)
    lower = ball_capacity(profile, ins[1])
    upper = ball_capacity(profile, enc[1])
    if len(cover) > 1:
        upper = min(upper, math.fsum(ball_capacity(profile, r) for _, r in cover))
    if lower > upper * (1 + 1e-12):
        raise DomainError(f"inconsistent bounds at lambda={lset.lam:g}: {lower} > {upper}")
    return CapacityBounds(lset.lam, float(lower), float(upper), ins,
                          {"enclosing": enc, "covering": cover})


def bounds_to_json(bounds, path):
    with open(path, "w") as fh:
        json.dump([b.to_dict() for b in bounds], fh, indent=2)


# ---------------------------------------------------------------- covering

@dataclass
class BallFamily:
    centers: np.ndarray
    radii: np.ndarray
    dilation: float = DILATION

    def __post_init__(self):
        self.centers = np.atleast_2d(np.asarray(self.centers, dtype=float))
        self.radii = np.asarray(self.radii, dtype=float).ravel()
        if len(self.radii) == 0:
            self.centers = self.centers.reshape(0, self.centers.shape[-1] if self.centers.size else 1)
        if self.centers.shape[0] != len(self.radii):
            raise DomainError("need one radius per ball center")
        if np.any(self.radii <= 0):
            raise DomainError("ball radii must be positive")

    def __len__(self):
        return len(self.radii)

    @property
    def n(self):
        return self.centers.shape[1]

    @classmethod
    def random(cls, count, n=2, rng=None, box=10.0, r_range=(0.1, 2.0)):
        rng = np.random.default_rng(rng)
        centers = rng.uniform(-box, box, size=(count, n))
        radii = np.exp(rng.uniform(np.log(r_range[0]), np.log(r_range[1]), size=count))
        return cls(centers, radii)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "z"][:self.n] + ["radius"])
            for c, r in zip(self.centers, self.radii):
                w.writerow([*(f"{v:.17g}" for v in c), f"{r:.17g}"])


def greedy_disjoint_subfamily(family: BallFamily) -> BallFamily:
    """Largest-first greedy selection of pairwise disjoint balls.

    Every input ball meets a selected ball at least as large, so the
    ``3``-dilates of the selection cover the union of the family.  Ties are
    broken by lexicographic center order, which makes the result
    deterministic.
    """
    if len(family) == 0:
        return BallFamily(family.centers, family.radii, family.dilation)
    keys = [family.centers[:, a] for a in reversed(range(family.n))] + [-family.radii]
    order = np.lexsort(keys)
    sel_c, sel_r = [], []
    for i in order:
        c, r = family.centers[i], family.radii[i]
        if sel_c:
            gap = np.linalg.norm(np.array(sel_c) - c, axis=1) - np.array(sel_r)
            if np.any(gap < r):
                continue
        sel_c.append(c)
        sel_r.append(r)
    return BallFamily(np.array(sel_c), np.array(sel_r), family.dilation)


def sample_union(family: BallFamily, count, rng=None):
    """Uniform-in-ball samples from the union, picking balls by volume."""
    rng = np.random.default_rng(rng)
    n = family.n
    p = family.radii ** n
    which = rng.choice(len(family), size=count, p=p / p.sum())
    g = rng.normal(size=(count, n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    rad = family.radii[which] * rng.uniform(size=count) ** (1 / n)
    return family.centers[which] + g * rad[:, None]


def covering_report(family: BallFamily, selection: BallFamily, n_probes=10_000, rng=None):
    """Disjointness of the selection and Monte-Carlo coverage of the union by its dilates."""
    c, r = selection.centers, selection.radii
    if len(selection) > 1:
        d = np.linalg.norm(c[:, None, :] - c[None, :, :], axis=2)
        s = r[:, None] + r[None, :]
        np.fill_diagonal(d, np.inf)
        disjoint = bool(np.all(d >= s))
    else:
        disjoint = True
    probes = sample_union(family, n_probes, rng)
    dist = np.linalg.norm(probes[:, None, :] - c[None, :, :], axis=2)
    covered = np.any(dist <= selection.dilation * r[None, :] * (1 + 1e-12), axis=1)
    misses = int(np.sum(~covered))
    return {"selected": len(selection), "family": len(family), "disjoint": disjoint,
            "probes": n_probes, "misses": misses, "passed": disjoint and misses == 0}


# ---------------------------------------------------------------- weak (1,1) bound

def weak11_bound_check(source, profile: RadialProfile, lambdas, eval_grid: Grid | None = None,
                       mode="rays", directions=None, workers=1):
    """Check ``lam * upper(C(E_lam)) <= psi(3) * mass`` for each threshold.

    With the greedy covering, ``C(E) <= sum C(3 B_i) <= psi(3) sum C(B_i)
    <= psi(3) / lam * mass``, so ``gamma = psi(3)``.
    """
    op = source if isinstance(source, MaximalOperator) else MaximalOperator(source, profile)
    gamma = float(scaling_envelope(profile).psi(DILATION))
    mfield = None
    if mode == "cells":
        if eval_grid is None:
            raise DomainError("cells mode needs an evaluation grid")
        pts = eval_grid.cell_centers()
        mfield = MaximalField(pts, op(pts, workers), "centered", eval_grid)
    entries = []
    for lam in lambdas:
        if mode == "cells":
            lset = superlevel_cells(mfield, lam)
            if lset.empty:
                entries.append({"lambda": float(lam), "upper": 0.0, "h_upper": 0.0,
                                "violated": False})
                continue
        else:
            lset = superlevel_boundary_rays(op, lam, directions=directions, workers=workers)
        b = capacity_bounds(lset, profile)
        hu = lam * b.upper
        entries.append({"lambda": float(lam), "upper": b.upper, "h_upper": hu,
                        "violated": bool(hu > gamma * op.mass)})
    best = max((e["h_upper"] / op.mass for e in entries), default=0.0)
    return {"gamma": gamma, "mass": op.mass, "entries": entries,
            "violations": sum(e["violated"] for e in entries),
            "empirical_constant": best,
            "passed": all(not e["violated"] for e in entries)}
