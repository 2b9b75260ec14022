"""Grid-sampled densities and finite atomic measures.

Fields are piecewise constant on the cells of a regular grid: the sample
stored for a cell is the value of ``|f|`` at the cell center, and the field
is taken to be that constant on the whole cell.  Masses are summed with
``math.fsum`` so that a field and the atomic measure built from it carry
bit-identical totals whatever the order or sparsity of the summands.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .capacity import unit_ball_volume
from .errors import ConfigurationError, DomainError

DEFAULT_CELL_BUDGET = 2 ** 24
GAUSSIAN_SUPPORT_SIGMAS = 5.0
PRESETS = ("indicator_ball", "gaussian", "two_bumps")


@dataclass(frozen=True)
class Grid:
    """Regular grid of ``prod(extents)`` cubic cells of side ``h``.

    ``origin`` is the lower corner of the box; cell ``(i, j)`` has center
    ``origin + (i + 0.5, j + 0.5) * h``.
    """

    n: int
    origin: tuple
    h: float
    extents: tuple
    budget: int = DEFAULT_CELL_BUDGET

    def __post_init__(self):
        origin = tuple(float(o) for o in np.atleast_1d(self.origin))
        extents = tuple(int(e) for e in np.atleast_1d(self.extents))
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "extents", extents)
        if self.n not in (1, 2):
            raise ConfigurationError("grids are supported for n in {1, 2}")
        if len(origin) != self.n or len(extents) != self.n:
            raise ConfigurationError("origin and extents must have one entry per axis")
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ConfigurationError("cell spacing h must be positive")
        if any(e < 1 for e in extents):
            raise ConfigurationError("extents must be positive")
        if self.size > self.budget:
            raise ConfigurationError(
                f"grid has {self.size} cells, over the budget of {self.budget}")

    @classmethod
    def centered(cls, n, half_width, h, budget=DEFAULT_CELL_BUDGET):
        """Symmetric box ``[-half_width, half_width]^n`` (rounded up to whole cells)."""
        if not half_width > 0:
            raise ConfigurationError("half_width must be positive")
        cells = int(math.ceil(2 * half_width / h - 1e-9))
        origin = (-cells * h / 2,) * n
        return cls(n, origin, h, (cells,) * n, budget)

    @classmethod
    def from_dict(cls, spec):
        spec = dict(spec)
        try:
            n = int(spec["n"])
            h = float(spec["h"])
            if "half_width" in spec:
                return cls.centered(n, float(spec["half_width"]), h,
                                    spec.get("budget", DEFAULT_CELL_BUDGET))
            return cls(n, tuple(spec["origin"]), h, tuple(spec["extents"]),
                       spec.get("budget", DEFAULT_CELL_BUDGET))
        except KeyError as exc:
            raise ConfigurationError(f"grid spec is missing {exc}") from None

    @property
    def shape(self):
        return self.extents

    @property
    def size(self):
        return int(np.prod(self.extents))

    @property
    def cell_volume(self):
        return self.h ** self.n

    @property
    def lower(self):
        return np.array(self.origin)

    @property
    def upper(self):
        return np.array(self.origin) + self.h * np.array(self.extents)

    def axis_centers(self, axis):
        # offsets from the box midpoint are odd multiples of h/2, so mirrored
        # cells of a symmetric box get exactly opposite coordinates
        e = self.extents[axis]
        mid = self.origin[axis] + e * self.h / 2
        return mid + (2 * np.arange(e) + 1 - e) * (self.h / 2)

    def axis_edges(self, axis):
        return self.origin[axis] + np.arange(self.extents[axis] + 1) * self.h

    def cell_centers(self):
        """All cell centers as an ``(size, n)`` array in axis-major (C) order."""
        axes = [self.axis_centers(a) for a in range(self.n)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def contains_ball(self, center, radius):
        center = np.asarray(center, dtype=float)
        return bool(np.all(center - radius >= self.lower - 1e-12)
                    and np.all(center + radius <= self.upper + 1e-12))

    def refined(self):
        """Same box with half the cell spacing."""
        return Grid(self.n, self.origin, self.h / 2,
                    tuple(2 * e for e in self.extents), self.budget)


@dataclass(frozen=True)
class ScalarField:
    """Nonnegative cell samples of ``|f|`` on a grid."""

    grid: Grid
    samples: np.ndarray
    analytic_mass: float | None = None
    label: str = "field"

    def __post_init__(self):
        s = np.array(self.samples, dtype=float)
        if s.shape != self.grid.shape:
            raise ConfigurationError(
                f"samples of shape {s.shape} do not match grid {self.grid.shape}")
        if not np.all(np.isfinite(s)) or np.any(s < 0):
            raise DomainError("field samples must be finite and nonnegative")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def n(self):
        return self.grid.n

    def scaled(self, a):
        am = None if self.analytic_mass is None else a * self.analytic_mass
        return ScalarField(self.grid, self.samples * a, am, self.label)


def _preset_density(preset, points, n, R, sigma, separation):
    r2 = np.sum(points ** 2, axis=1)
    if preset == "indicator_ball":
        return (r2 <= R * R).astype(float)
    if preset == "gaussian":
        norm = (2 * math.pi * sigma ** 2) ** (-n / 2)
        return norm * np.exp(-r2 / (2 * sigma ** 2))
    shift = np.zeros(n)
    shift[0] = separation / 2
    left = np.sum((points + shift) ** 2, axis=1) <= R * R
    right = np.sum((points - shift) ** 2, axis=1) <= R * R
    return (left | right).astype(float)


def make_field(preset: str, grid: Grid, R=1.0, sigma=1.0, separation=4.0,
               center=None) -> ScalarField:
    """Sample one of the built-in radially symmetric densities on ``grid``.

    ``indicator_ball(R)`` and ``two_bumps(R, separation)`` are indicator
    functions of one ball, or of two balls centered at ``+-separation/2``
    along the first axis.  ``gaussian(sigma)`` is the normalized Gaussian
    density, whose support is taken to be the ball of radius ``5 sigma``.
    """
    if preset not in PRESETS:
        raise ConfigurationError(f"unknown preset {preset!r}")
    n = grid.n
    c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    if preset == "indicator_ball":
        if not R > 0:
            raise ConfigurationError("R must be positive")
        fits = grid.contains_ball(c, R)
        mass = unit_ball_volume(n) * R ** n
    elif preset == "gaussian":
        if not sigma > 0:
            raise ConfigurationError("sigma must be positive")
        fits = grid.contains_ball(c, GAUSSIAN_SUPPORT_SIGMAS * sigma)
        mass = 1.0
    else:
        if not (R > 0 and separation > 2 * R):
            raise ConfigurationError("two_bumps needs R > 0 and separation > 2R")
        shift = np.zeros(n)
        shift[0] = separation / 2
        fits = grid.contains_ball(c - shift, R) and grid.contains_ball(c + shift, R)
        mass = 2 * unit_ball_volume(n) * R ** n
    if not fits:
        raise ConfigurationError(f"support of {preset} does not fit in the grid box")
    pts = grid.cell_centers() - c
    vals = _preset_density(preset, pts, n, R, sigma, separation)
    return ScalarField(grid, vals.reshape(grid.shape), mass, preset)


def field_mass(field: ScalarField) -> float:
    """L1 norm of the piecewise-constant field, ``sum(samples) * h**n``."""
    w = field.samples.ravel() * field.grid.cell_volume
    return math.fsum(w)


@dataclass(frozen=True)
class AtomicMeasure:
    """Finite measure ``sum_i w_i delta_{x_i}``; positions have shape ``(k, n)``."""

    positions: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        if pos.ndim == 1:
            pos = pos[:, None]
        w = np.array(self.weights, dtype=float).ravel()
        if pos.ndim != 2 or pos.shape[0] != w.shape[0]:
            raise DomainError("need one weight per atom position")
        if not np.all(np.isfinite(pos)) or not np.all(np.isfinite(w)) or np.any(w < 0):
            raise DomainError("atom positions must be finite and weights nonnegative")
        pos.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_atoms(cls, atoms, n=None):
        """Build from ``[(position, weight), ...]``."""
        atoms = list(atoms)
        if not atoms:
            if n is None:
                raise DomainError("empty atom list needs an explicit dimension")
            return cls(np.zeros((0, n)), np.zeros(0))
        pos = [np.atleast_1d(np.asarray(p, dtype=float)) for p, _ in atoms]
        return cls(np.array(pos), np.array([w for _, w in atoms]))

    @property
    def n(self):
        return self.positions.shape[1]

    @property
    def size(self):
        return self.positions.shape[0]

    @property
    def total_mass(self):
        return math.fsum(self.weights)

    @property
    def centroid(self):
        m = self.total_mass
        if m <= 0:
            raise DomainError("centroid of a zero measure is undefined")
        return np.array([math.fsum(self.weights * self.positions[:, a]) / m
                         for a in range(self.n)])

    def mass_in_ball(self, center, r):
        """Measure of the closed ball ``B(center, r)``."""
        d = np.linalg.norm(self.positions - np.asarray(center, dtype=float), axis=1)
        return math.fsum(self.weights[d <= r])

    def scaled(self, a):
        return AtomicMeasure(self.positions, self.weights * a)

    def with_atom(self, position, weight):
        pos = np.vstack([self.positions, np.atleast_1d(position)[None, :]])
        return AtomicMeasure(pos, np.append(self.weights, weight))

    def to_dict(self):
        return {"atoms": [[p.tolist(), float(w)] for p, w in zip(self.positions, self.weights)]}


def delta_measure(n=1) -> AtomicMeasure:
    """Unit point mass at the origin of R^n."""
    return AtomicMeasure(np.zeros((1, n)), np.ones(1))


def two_atom_measure(n=2, separation=2.0) -> AtomicMeasure:
    """Atoms of weight 1/2 at ``+-separation/2`` along the first axis."""
    pos = np.zeros((2, n))
    pos[0, 0] = -separation / 2
    pos[1, 0] = separation / 2
    return AtomicMeasure(pos, np.full(2, 0.5))


def scale_measure(nu: AtomicMeasure, t) -> AtomicMeasure:
    """Push-forward under ``x -> t x``, so that ``nu_t(E) = nu(E / t)``."""
    if not t > 0:
        raise DomainError("scale t must be positive")
    return AtomicMeasure(nu.positions * t, nu.weights)


def normalize_measure(nu: AtomicMeasure) -> AtomicMeasure:
    """Rescale weights to total mass exactly 1.

    The largest weight absorbs the rounding residual, so ``total_mass``
    of the result is exactly ``1.0``.
    """
    m = nu.total_mass
    if not m > 0:
        raise DomainError("cannot normalize a measure of zero mass")
    if m == 1.0:
        return AtomicMeasure(nu.positions, nu.weights)
    w = nu.weights / m
    k = int(np.argmax(w))
    rest = np.delete(w, k)
    w[k] = 1.0 - math.fsum(rest)
    out = AtomicMeasure(nu.positions, w)
    if out.total_mass != 1.0:
        # one more correction step handles the rare double-rounding case
        w[k] += 1.0 - out.total_mass
        out = AtomicMeasure(nu.positions, w)
    return out


def field_to_measure(field: ScalarField) -> AtomicMeasure:
    """One atom per nonzero cell, at the cell center, of weight ``sample * h**n``."""
    flat = field.samples.ravel()
    keep = np.flatnonzero(flat > 0)
    if keep.size == 0:
        raise DomainError("field has zero mass")
    centers = field.grid.cell_centers()[keep]
    return AtomicMeasure(centers, flat[keep] * field.grid.cell_volume)


def sample_gaussian_atoms(count, n=2, sigma=1.0, rng=None) -> AtomicMeasure:
    """``count`` equal-weight atoms drawn from a centered Gaussian (total mass 1)."""
    rng = np.random.default_rng(rng)
    pos = rng.normal(scale=sigma, size=(count, n))
    return normalize_measure(AtomicMeasure(pos, np.ones(count)))


def write_field_csv(field: ScalarField, path):
    """Write one row per cell: indices, center coordinates, value."""
    n = field.n
    header = ["i", "j"][:n] + ["x", "y"][:n] + ["value"]
    idx = np.indices(field.grid.shape).reshape(n, -1).T
    centers = field.grid.cell_centers()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for k, v in enumerate(field.samples.ravel()):
            w.writerow([*idx[k].tolist(), *(f"{c:.17g}" for c in centers[k]), f"{v:.17g}"])


def read_field_csv(path, h=None) -> ScalarField:
    """Import a field written by :func:`write_field_csv` (or any CSV with the same columns).

    Missing cells are zero.  The spacing is inferred from the coordinates
    unless ``h`` is given.
    """
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise ConfigurationError(f"cannot read field CSV {path}: {exc}") from None
    if not rows:
        raise ConfigurationError(f"field CSV {path} is empty")
    n = 2 if "j" in rows[0] else 1
    idx = np.array([[int(r[k]) for k in ("i", "j")[:n]] for r in rows])
    xy = np.array([[float(r[k]) for k in ("x", "y")[:n]] for r in rows])
    vals = np.array([float(r["value"]) for r in rows])
    if h is None:
        span = idx[:, 0].max() - idx[:, 0].min()
        if span == 0:
            raise ConfigurationError("cannot infer h from a single column of cells; pass h")
        h = (xy[:, 0].max() - xy[:, 0].min()) / span
    base = idx.min(axis=0)
    k0 = int(np.argmin(np.sum(idx - base, axis=1)))
    origin = xy[k0] - (idx[k0] - base + 0.5) * h
    extents = tuple(int(e) for e in idx.max(axis=0) - base + 1)
    grid = Grid(n, tuple(origin), float(h), extents)
    samples = np.zeros(extents)
    samples[tuple((idx - base).T)] = vals
    return ScalarField(grid, samples, None, path.stem)
