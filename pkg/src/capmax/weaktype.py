"""The weak-type curve ``h(lam) = lam * C({M > lam})`` and checks on it."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .capacity import RadialProfile, ScalingEnvelope, scaling_envelope
from .errors import DomainError
from .maximal import MaximalField, MaximalOperator, RadiusPolicy
from .sampling import AtomicMeasure, Grid, scale_measure
from .setcap import (DILATION, capacity_bounds, superlevel_boundary_rays,
                     superlevel_cells, probe_rays)


def geometric_schedule(start=1e-1, stop=1e-4, per_decade=10):
    """Decreasing thresholds from ``start`` to ``stop``, ``per_decade`` per factor ten."""
    if not (start > 0 and stop > 0 and start >= stop):
        raise DomainError("need start >= stop > 0")
    count = int(round(math.log10(start / stop) * per_decade)) + 1
    return np.geomspace(start, stop, max(count, 1))


@dataclass
class CurveEntry:
    lam: float
    h_lower: float
    h_upper: float
    set_mode: str
    inscribed_radius: float
    enclosing_radius: float
    lower: float
    upper: float
    probes: dict | None = None
    bounds: object = None


@dataclass
class WeakTypeCurve:
    entries: list
    source: dict
    profile: RadialProfile
    mass: float

    def __len__(self):
        return len(self.entries)

    @property
    def lambdas(self):
        return np.array([e.lam for e in self.entries])

    @property
    def h_lower(self):
        return np.array([e.h_lower for e in self.entries])

    @property
    def h_upper(self):
        return np.array([e.h_upper for e in self.entries])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["lambda", "h_lower", "h_upper", "set_mode",
                        "inscribed_radius", "enclosing_radius"])
            for e in self.entries:
                w.writerow([f"{e.lam:.17g}", f"{e.h_lower:.17g}", f"{e.h_upper:.17g}",
                            e.set_mode, f"{e.inscribed_radius:.17g}",
                            f"{e.enclosing_radius:.17g}"])


def _cells_feasible(mfield: MaximalField, lam):
    vals = mfield.values.reshape(mfield.grid.shape)
    rim = np.concatenate([np.take(vals, [0, -1], axis=a).ravel() for a in range(vals.ndim)])
    return bool(np.all(rim <= lam)) and bool(np.any(vals > lam))


def weaktype_curve(source, profile: RadialProfile, lambdas, mode="rays",
                   eval_grid: Grid | None = None, directions=None,
                   policy: RadiusPolicy | None = None, rtol=1e-6, workers=1,
                   probe_seed=None) -> WeakTypeCurve:
    """Capacity bracket of ``E_lam`` and ``h`` bounds for each threshold.

    ``mode`` is ``"rays"``, ``"cells"`` (needs ``eval_grid``) or ``"auto"``,
    which uses cells while the set stays inside the evaluation grid and
    rays below that.  With ``probe_seed`` set, every traced set is probed
    and the outcome stored on its entry.
    """
    lambdas = [float(v) for v in lambdas]
    if any(not v > 0 for v in lambdas):
        raise DomainError("thresholds must be positive")
    if any(b >= a for a, b in zip(lambdas, lambdas[1:])):
        raise DomainError("thresholds must be strictly decreasing")
    op = source if isinstance(source, MaximalOperator) else MaximalOperator(source, profile, policy)
    mfield = None
    if mode in ("cells", "auto") and eval_grid is not None:
        pts = eval_grid.cell_centers()
        mfield = MaximalField(pts, op(pts, workers), "centered", eval_grid)
    elif mode == "cells":
        raise DomainError("cells mode needs an evaluation grid")

    def one(lam):
        use_cells = mode == "cells" or (mode == "auto" and mfield is not None
                                        and _cells_feasible(mfield, lam))
        probes = None
        if use_cells:
            lset = superlevel_cells(mfield, lam)
            if lset.empty:
                raise DomainError(f"superlevel set at lambda={lam:g} is empty on the grid")
        else:
            lset = superlevel_boundary_rays(op, lam, directions=directions, rtol=rtol)
            if probe_seed is not None:
                probes = probe_rays(lset, op, rng=probe_seed)
        b = capacity_bounds(lset, profile, center_hint=op.centroid)
        return CurveEntry(lam, lam * b.lower, lam * b.upper, lset.kind,
                          b.inscribed_radius, b.enclosing_radius, b.lower, b.upper, probes, b)

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            entries = list(ex.map(one, lambdas))
    else:
        entries = [one(lam) for lam in lambdas]
    return WeakTypeCurve(entries, op.describe(), profile, op.mass)


@dataclass
class LimitEstimate:
    value: float
    spread: float
    trend: float
    lam_min: float

    def to_dict(self):
        return dict(self.__dict__)


def limit_estimate(curve: WeakTypeCurve) -> LimitEstimate:
    """Midpoint of the ``h`` bracket at the smallest threshold.

    ``spread`` is the bracket width there and ``trend`` the change of the
    midpoint over the last decade; no convergence rate is assumed.
    """
    if len(curve) < 3:
        raise DomainError("limit estimate needs at least 3 curve entries")
    lam = curve.lambdas
    mid = 0.5 * (curve.h_lower + curve.h_upper)
    k = int(np.argmin(lam))
    j = int(np.argmin(np.abs(np.log(lam / (10 * lam[k])))))
    return LimitEstimate(float(mid[k]), float(curve.h_upper[k] - curve.h_lower[k]),
                         float(abs(mid[k] - mid[j])), float(lam[k]))


def theorem_check(curve: WeakTypeCurve, envelope: ScalingEnvelope | None = None, rtol=0.0):
    """Containment of ``h/mass`` at the smallest threshold in ``[1/tau, tau]``.

    The bracket is widened by ``slack`` (the bound spread over the mass) and,
    since any computed threshold is still finite, by the relative allowance
    ``rtol``: ``h_lower/mass >= (1 - rtol)/tau - slack`` and
    ``h_upper/mass <= (1 + rtol) tau + slack``.
    """
    env = envelope or scaling_envelope(curve.profile)
    k = int(np.argmin(curve.lambdas))
    e = curve.entries[k]
    lo = e.h_lower / curve.mass
    hi = e.h_upper / curve.mass
    slack = (e.h_upper - e.h_lower) / curve.mass
    tau = env.tau
    lo_edge = (1 - rtol) / tau - slack
    hi_edge = (1 + rtol) * tau + slack
    return {"tau": tau, "lam_min": e.lam, "ratio_lower": lo, "ratio_upper": hi,
            "slack": slack, "rtol": rtol, "bracket": [lo_edge, hi_edge],
            "passed": bool(lo >= lo_edge and hi <= hi_edge)}


def scaling_convergence(nu: AtomicMeasure, profile: RadialProfile, lam, t_schedule,
                        tol=0.05, directions=None):
    """Capacity bounds of ``{M nu_t > lam}`` against ``1/lam`` as ``t`` shrinks."""
    if abs(nu.total_mass - 1.0) > 1e-12:
        raise DomainError("scaling convergence needs a unit-mass measure")
    target = 1.0 / lam
    rows = []
    for t in t_schedule:
        op = MaximalOperator(scale_measure(nu, t), profile)
        lset = superlevel_boundary_rays(op, lam, directions=directions)
        b = capacity_bounds(lset, profile)
        err = max(abs(b.lower - target), abs(b.upper - target)) / target
        rows.append({"t": float(t), "lower": b.lower, "upper": b.upper,
                     "rel_err_lower": abs(b.lower - target) / target,
                     "rel_err_upper": abs(b.upper - target) / target, "rel_err": err})
    errs = [r["rel_err"] for r in rows]
    monotone = all(b <= a * (1 + 1e-9) + 1e-12 for a, b in zip(errs, errs[1:]))
    converged = bool(rows) and errs[-1] <= tol
    return {"lambda": float(lam), "target": target, "rows": rows, "monotone": monotone,
            "converged": converged, "passed": monotone and converged}


def boundedness_check(curve: WeakTypeCurve, lambda0, gamma=None):
    """Empirical ``A <= h(lam) <= gamma`` over the entries with ``lam < lambda0``."""
    gamma = float(scaling_envelope(curve.profile).psi(DILATION)) if gamma is None else gamma
    tail = [e for e in curve.entries if e.lam < lambda0]
    if len(tail) < 2:
        return {"lambda0": lambda0, "insufficient_data": True, "passed": False}
    a_emp = min(e.h_lower for e in tail)
    g_emp = max(e.h_upper for e in tail)
    bound = gamma * curve.mass
    return {"lambda0": lambda0, "insufficient_data": False, "A_emp": a_emp,
            "gamma_emp": g_emp, "gamma_bound": bound,
            "passed": bool(a_emp > 0 and g_emp <= bound)}


def write_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
