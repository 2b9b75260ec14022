"""Radial capacity profiles and their scaling envelopes.

A capacity here is only ever evaluated on balls.  Its ball profile
``c(r) = C(B(x, r))`` does not depend on the center, vanishes at ``r = 0``
and is strictly increasing.  Three families are built in:

* ``lebesgue(n)``: ``c(r) = omega_n r**n`` (volume of the n-ball),
* ``power_law(kappa, d)``: ``c(r) = kappa r**d``,
* ``wobble(kappa, d, eps)``: ``c(r) = kappa r**d (1 + eps sin(log r))``.

The wobble family is homogeneous only up to a bounded factor, which is what
makes its envelope ratio ``tau`` exceed one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import gamma as gamma_fn

from .errors import DomainError

KINDS = ("lebesgue", "power_law", "wobble")

# Relative slack allowed when comparing exactly homogeneous profiles in
# floating point: (t*r)**d and t**d * r**d can differ in the last few ulps.
HOMOGENEOUS_RTOL = 8 * np.finfo(float).eps
WOBBLE_RTOL = 1e-12
INVERSE_RTOL = 1e-12


def unit_ball_volume(n):
    """Lebesgue measure of the unit ball in R^n."""
    if n == 1:
        return 2.0
    if n == 2:
        return math.pi
    return math.pi ** (n / 2) / gamma_fn(n / 2 + 1)


@dataclass(frozen=True)
class RadialProfile:
    """Ball profile ``r -> C(B(x, r))`` of a center-independent capacity.

    Use the :meth:`lebesgue`, :meth:`power_law` and :meth:`wobble`
    constructors rather than filling the fields by hand.
    """

    kind: str
    kappa: float = 1.0
    d: float = 1.0
    epsilon: float = 0.0
    n: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown profile kind {self.kind!r}")
        if not (self.kappa > 0 and np.isfinite(self.kappa)):
            raise DomainError("kappa must be positive and finite")
        if not (self.d > 0 and np.isfinite(self.d)):
            raise DomainError("homogeneity exponent d must be positive")
        # eps < 1 keeps c positive; the stronger monotonicity guarantee
        # eps < d/(d+1) is checked by validate_profile, not here.
        if not 0 <= self.epsilon < 1:
            raise DomainError("wobble amplitude must lie in [0, 1)")
        if self.kind == "lebesgue" and (self.n is None or self.n < 1):
            raise DomainError("lebesgue profile needs a positive dimension n")

    @classmethod
    def lebesgue(cls, n):
        n = int(n)
        if n < 1:
            raise DomainError("dimension must be positive")
        return cls("lebesgue", kappa=unit_ball_volume(n), d=float(n), n=n)

    @classmethod
    def power_law(cls, kappa, d, n=None):
        return cls("power_law", kappa=float(kappa), d=float(d), n=n)

    @classmethod
    def wobble(cls, kappa, d, epsilon, n=None):
        return cls("wobble", kappa=float(kappa), d=float(d),
                   epsilon=float(epsilon), n=n)

    @classmethod
    def from_dict(cls, spec):
        """Build a profile from ``{"kind": ..., "n"|"kappa"|"d"|"epsilon": ...}``."""
        spec = dict(spec)
        kind = spec.pop("kind", None)
        if kind == "lebesgue":
            return cls.lebesgue(spec["n"])
        if kind == "power_law":
            return cls.power_law(spec.get("kappa", 1.0), spec["d"], spec.get("n"))
        if kind == "wobble":
            return cls.wobble(spec.get("kappa", 1.0), spec["d"],
                              spec.get("epsilon", 0.0), spec.get("n"))
        raise DomainError(f"unknown profile kind {kind!r}")

    def to_dict(self):
        if self.kind == "lebesgue":
            return {"kind": "lebesgue", "n": self.n}
        out = {"kind": self.kind, "kappa": self.kappa, "d": self.d}
        if self.kind == "wobble":
            out["epsilon"] = self.epsilon
        if self.n is not None:
            out["n"] = self.n
        return out

    @property
    def homogeneous(self):
        return self.kind != "wobble" or self.epsilon == 0.0

    def __call__(self, r):
        return ball_capacity(self, r)

    def inverse(self, v):
        return inverse_ball_capacity(self, v)


def ball_capacity(profile: RadialProfile, r):
    """Capacity of a ball of radius ``r`` (scalar or array)."""
    arr = np.asarray(r, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise DomainError("ball radius must be nonnegative")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = profile.kappa * arr ** profile.d
        if profile.kind == "wobble" and profile.epsilon:
            finite = (arr > 0) & np.isfinite(arr)
            mod = np.ones_like(arr)
            mod[finite] += profile.epsilon * np.sin(np.log(arr[finite]))
            out = out * mod
    out = np.where(arr == 0, 0.0, out)
    if np.ndim(r) == 0:
        return float(out)
    return out


def _wobble_inverse(profile, v):
    if np.isinf(v):
        return math.inf
    eps = profile.epsilon
    base = v / profile.kappa
    lo = (base / (1 + eps)) ** (1 / profile.d)
    hi = (base / (1 - eps)) ** (1 / profile.d)
    if lo == hi:
        return lo

    def g(u):
        return ball_capacity(profile, math.exp(u)) - v

    u = brentq(g, math.log(lo), math.log(hi), xtol=INVERSE_RTOL * 1e-3,
               rtol=4 * np.finfo(float).eps, maxiter=500)
    return math.exp(u)


def inverse_ball_capacity(profile: RadialProfile, v):
    """Radius ``r`` with ``c(r) = v`` for ``v > 0`` (scalar or array)."""
    arr = np.asarray(v, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError("capacity value must be positive")
    if profile.homogeneous:
        out = (arr / profile.kappa) ** (1.0 / profile.d)
    else:
        out = np.vectorize(lambda x: _wobble_inverse(profile, x), otypes=[float])(arr)
    if np.ndim(v) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class ScalingEnvelope:
    """Bounds ``phi(t) c(r) <= c(t r) <= psi(t) c(r)`` with ``phi, psi = t**d * factor``."""

    d: float
    lower_factor: float = 1.0
    upper_factor: float = 1.0

    def phi(self, t):
        return np.asarray(t, dtype=float) ** self.d * self.lower_factor

    def psi(self, t):
        return np.asarray(t, dtype=float) ** self.d * self.upper_factor

    @property
    def tau(self):
        return self.upper_factor / self.lower_factor


def scaling_envelope(profile: RadialProfile) -> ScalingEnvelope:
    if profile.homogeneous:
        return ScalingEnvelope(profile.d)
    q = (1 + profile.epsilon) / (1 - profile.epsilon)
    return ScalingEnvelope(profile.d, 1.0 / q, q)


@dataclass
class ProfileReport:
    """Outcome of :func:`validate_profile`; ``checks`` maps name to (passed, detail)."""

    profile: RadialProfile
    checks: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)

    @property
    def passed(self):
        return all(ok for ok, _ in self.checks.values())

    @property
    def failures(self):
        return [name for name, (ok, _) in self.checks.items() if not ok]

    def to_dict(self):
        return {
            "profile": self.profile.to_dict(),
            "passed": self.passed,
            "checks": {k: {"passed": ok, "detail": det} for k, (ok, det) in self.checks.items()},
            "violations": [list(v) for v in self.violations[:50]],
        }


def validate_profile(profile: RadialProfile, r_samples: Sequence[float],
                     t_samples: Sequence[float]) -> ProfileReport:
    """Check Assumptions on a sample lattice and report every failure.

    Monotonicity fails either on a sampled decrease or, for the wobble
    family, when ``eps >= d/(d+1)`` (outside the region where the
    derivative is guaranteed positive).
    """
    r = np.sort(np.asarray(r_samples, dtype=float))
    t = np.asarray(t_samples, dtype=float)
    if r.size == 0 or t.size == 0 or np.any(r <= 0) or np.any(t <= 0):
        raise DomainError("sample lists must be nonempty and positive")
    report = ProfileReport(profile)
    c = ball_capacity(profile, r)

    ok = ball_capacity(profile, 0.0) == 0.0 and bool(np.all(c > 0))
    report.checks["positivity"] = (ok, "c(0) = 0 and c > 0 on samples")

    steps = np.diff(c)
    bad = np.flatnonzero(steps <= 0)
    detail = "strictly increasing on samples"
    ok = bad.size == 0
    if not ok:
        detail = f"decrease between r={r[bad[0]]:.6g} and r={r[bad[0] + 1]:.6g}"
    if profile.kind == "wobble":
        limit = profile.d / (profile.d + 1)
        if profile.epsilon >= limit:
            ok = False
            detail = (f"wobble amplitude {profile.epsilon} >= d/(d+1) = {limit:.6g}; "
                      "monotonicity not guaranteed")
    report.checks["monotonicity"] = (ok, detail)

    tiny = r[0] * np.logspace(-1, -12, 12)
    ct = ball_capacity(profile, tiny)
    ok = bool(np.all(np.diff(ct) < 0)) and ct[-1] < 1e-6 * c[0]
    report.checks["vanishing_at_zero"] = (ok, "c(r) -> 0 as r -> 0")

    env = scaling_envelope(profile)
    tol = HOMOGENEOUS_RTOL if profile.homogeneous else WOBBLE_RTOL
    T, R = np.meshgrid(t, r, indexing="ij")
    ctr = ball_capacity(profile, T * R)
    cr = ball_capacity(profile, R)
    lo = env.phi(T) * cr
    hi = env.psi(T) * cr
    viol = (ctr < lo * (1 - tol)) | (ctr > hi * (1 + tol))
    report.violations = [(float(a), float(b)) for a, b in zip(T[viol], R[viol])]
    report.checks["envelope"] = (
        not report.violations,
        "phi(t) c(r) <= c(t r) <= psi(t) c(r) on lattice"
        if not report.violations else f"{len(report.violations)} violating (t, r) pairs",
    )
    small = np.logspace(-1, -6, 6)
    ok = (bool(np.all(env.phi(small) <= env.psi(small)))
          and bool(np.all(np.diff(env.psi(small)) < 0)) and env.d > 0)
    report.checks["envelope_limits"] = (ok, "phi <= psi and both -> 0 as t -> 0")
    return report


def default_lattice():
    """Geometric radius and scale lattices used by the validators."""
    return np.logspace(-4, 4, 81), np.logspace(-6, 2, 41)
