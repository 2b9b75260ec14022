"""Batch front-end: ``capmax {maximal,curve,verify,covering} --config run.json``.

Exit codes: 0 success (all checks pass), 1 a verification check failed,
2 the configuration or input is unusable.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import capacity, maximal, sampling, setcap, weaktype
from .capacity import RadialProfile
from .errors import ConfigurationError, DomainError, NonBracketingError

SCHEMA = 1

DEFAULT_PROFILES = [
    {"kind": "lebesgue", "n": 1},
    {"kind": "lebesgue", "n": 2},
    {"kind": "power_law", "kappa": 1.0, "d": 1.5},
    {"kind": "wobble", "kappa": 1.0, "d": 2.0, "epsilon": 0.2},
]
DEFAULT_INPUTS = [
    {"type": "delta", "n": 2},
    {"type": "two_atom", "n": 2, "separation": 2.0},
    {"type": "preset", "preset": "indicator_ball", "R": 1.0,
     "grid": {"n": 1, "half_width": 1.5, "h": 0.01}},
    {"type": "preset", "preset": "gaussian", "sigma": 1.0,
     "grid": {"n": 2, "half_width": 6.0, "h": 0.1}},
]


class CheckFailed(Exception):
    pass


@contextlib.contextmanager
def atomic_path(path):
    """Yield a temporary path next to ``path``; rename it into place on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    os.close(fd)
    try:
        yield tmp
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def write_json(obj, path):
    with atomic_path(path) as tmp:
        with open(tmp, "w") as fh:
            json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


# ---------------------------------------------------------------- config parsing

def load_config(path):
    if path is None:
        return {"schema": SCHEMA}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigurationError("config must be a JSON object")
    if cfg.get("schema", SCHEMA) != SCHEMA:
        raise ConfigurationError(f"unsupported config schema {cfg.get('schema')!r}")
    cfg.setdefault("schema", SCHEMA)
    base = Path(path).resolve().parent
    cfg["_base"] = str(base)
    return cfg


def parse_profile(spec):
    if not isinstance(spec, dict):
        raise ConfigurationError("profile must be an object")
    try:
        return RadialProfile.from_dict(spec)
    except KeyError as exc:
        raise ConfigurationError(f"profile spec is missing {exc}") from None
    except DomainError as exc:
        raise ConfigurationError(f"invalid profile: {exc}") from None


def parse_grid(spec):
    if spec is None:
        return None
    if not isinstance(spec, dict):
        raise ConfigurationError("grid must be an object")
    return sampling.Grid.from_dict(spec)


def parse_input(spec, grid=None, base="."):
    """Build an atomic measure or a grid field from an input spec."""
    if not isinstance(spec, dict) or "type" not in spec:
        raise ConfigurationError("input must be an object with a 'type'")
    kind = spec["type"]
    grid = parse_grid(spec.get("grid")) or grid
    try:
        if kind == "delta":
            n = spec.get("n", grid.n if grid else 1)
            return sampling.delta_measure(n)
        if kind == "two_atom":
            n = spec.get("n", grid.n if grid else 2)
            return sampling.two_atom_measure(n, spec.get("separation", 2.0))
        if kind == "gaussian_atoms":
            return sampling.sample_gaussian_atoms(spec.get("count", 100), spec.get("n", 2),
                                                  spec.get("sigma", 1.0), spec.get("seed", 0))
        if kind == "atoms":
            atoms = spec.get("atoms", [])
            if not atoms:
                raise ConfigurationError("input measure is empty")
            nu = sampling.AtomicMeasure.from_atoms(atoms)
            if not nu.total_mass > 0:
                raise ConfigurationError("input measure has zero mass")
            return nu
        if kind == "preset":
            if grid is None:
                raise ConfigurationError("preset input needs a grid spec")
            params = {k: spec[k] for k in ("R", "sigma", "separation", "center") if k in spec}
            return sampling.make_field(spec["preset"], grid, **params)
        if kind == "field_csv":
            path = Path(base) / spec["path"]
            return sampling.read_field_csv(path, spec.get("h"))
    except KeyError as exc:
        raise ConfigurationError(f"input spec is missing {exc}") from None
    except DomainError as exc:
        raise ConfigurationError(f"invalid input: {exc}") from None
    raise ConfigurationError(f"unknown input type {kind!r}")


def parse_lambdas(spec, default=None):
    if spec is None:
        if default is None:
            raise ConfigurationError("missing lambda schedule")
        spec = default
    if isinstance(spec, dict):
        try:
            lams = weaktype.geometric_schedule(spec.get("start", 1e-1), spec["stop"],
                                               spec.get("per_decade", 10))
        except (KeyError, DomainError) as exc:
            raise ConfigurationError(f"bad lambda schedule: {exc}") from None
    else:
        lams = np.asarray(spec, dtype=float)
    if lams.ndim != 1 or np.any(lams <= 0) or np.any(np.diff(lams) >= 0):
        raise ConfigurationError("lambda schedule must be positive and strictly decreasing")
    return lams


def _mode(cfg, key, default):
    return (cfg.get("mode") or {}).get(key, default)


def _directions(cfg, n):
    return setcap.ray_directions(n, int(cfg.get("directions", setcap.DEFAULT_DIRECTIONS)))


# ---------------------------------------------------------------- subcommands

def cmd_maximal(cfg, out):
    if "grid" not in cfg or cfg["grid"] is None:
        raise ConfigurationError("maximal needs a grid spec")
    grid = parse_grid(cfg["grid"])
    if "profile" not in cfg:
        raise ConfigurationError("maximal needs a profile")
    profile = parse_profile(cfg["profile"])
    source = parse_input(cfg.get("input", {"type": "delta"}), grid, cfg.get("_base", "."))
    pts = np.asarray(cfg["eval_points"], dtype=float) if "eval_points" in cfg else grid.cell_centers()
    centered = _mode(cfg, "operator", "centered") == "centered"
    op = maximal.MaximalOperator(source, profile, centered=centered)
    vals = op(pts, cfg.get("threads", 1))
    mf = maximal.MaximalField(maximal._as_points(pts, op.n), vals,
                              "centered" if centered else "uncentered_approx")
    with atomic_path(Path(out) / "maximal.csv") as tmp:
        mf.to_csv(tmp)
    return 0


def _curve(cfg, source, profile, lams, probe_seed=None):
    mode = _mode(cfg, "set", "rays")
    eval_grid = parse_grid(cfg.get("eval_grid"))
    return weaktype.weaktype_curve(
        source, profile, lams, mode=mode, eval_grid=eval_grid,
        directions=_directions(cfg, source.n), workers=cfg.get("threads", 1),
        probe_seed=probe_seed)


def cmd_curve(cfg, out):
    if "profile" not in cfg:
        raise ConfigurationError("curve needs a profile")
    profile = parse_profile(cfg["profile"])
    grid = parse_grid(cfg.get("grid"))
    source = parse_input(cfg.get("input", {"type": "delta"}), grid, cfg.get("_base", "."))
    lams = parse_lambdas(cfg.get("lambdas"), {"start": 1e-1, "stop": 1e-4, "per_decade": 10})
    if len(lams) < 3:
        raise ConfigurationError("the limit estimate needs at least 3 thresholds")
    try:
        curve = _curve(cfg, source, profile, lams)
    except NonBracketingError as exc:
        raise ConfigurationError(f"lambda schedule cannot be traced: {exc}") from None
    est = weaktype.limit_estimate(curve)
    out = Path(out)
    with atomic_path(out / "curve.csv") as tmp:
        curve.to_csv(tmp)
    write_json({"limit": est.to_dict(), "mass": curve.mass, "profile": profile.to_dict(),
                "source": curve.source,
                "theorem_check": weaktype.theorem_check(curve, rtol=cfg.get("theorem_rtol", 0.05))},
               out / "limit.json")
    write_json([e.bounds.to_dict() for e in curve.entries], out / "bounds.json")
    return 0


def _family_from_config(cfg, seed):
    if "balls" in cfg:
        b = cfg["balls"]
        try:
            return setcap.BallFamily(np.asarray(b["centers"], dtype=float),
                                     np.asarray(b["radii"], dtype=float))
        except (KeyError, DomainError, ValueError) as exc:
            raise ConfigurationError(f"bad ball family: {exc}") from None
    spec = cfg.get("random_family", {})
    return setcap.BallFamily.random(int(spec.get("count", 100)), int(spec.get("n", 2)),
                                    rng=spec.get("seed", seed), box=spec.get("box", 10.0))


def cmd_covering(cfg, out):
    seed = int(cfg.get("seed", 0))
    family = _family_from_config(cfg, seed)
    if len(family) == 0:
        raise ConfigurationError("ball family is empty")
    sel = setcap.greedy_disjoint_subfamily(family)
    report = setcap.covering_report(family, sel, int(cfg.get("probes", 10_000)), rng=seed)
    out = Path(out)
    with atomic_path(out / "selection.csv") as tmp:
        sel.to_csv(tmp)
    write_json(report, out / "covering.json")
    return 0 if report["passed"] else 1


def _label(spec):
    if spec.get("type") == "preset":
        return f"{spec['preset']}(n={parse_grid(spec['grid']).n})"
    return f"{spec['type']}(n={spec.get('n', '?')})"


def _plabel(profile):
    if profile.kind == "lebesgue":
        return f"lebesgue({profile.n})"
    if profile.kind == "power_law":
        return f"power_law({profile.kappa:g},{profile.d:g})"
    return f"wobble({profile.kappa:g},{profile.d:g},{profile.epsilon:g})"


def _compatible(source, profile):
    return profile.kind != "lebesgue" or profile.n == source.n


def run_verify(cfg, workers=1):
    """Run the verification suite; returns the list of check records."""
    seed = int(cfg.get("seed", 0))
    rng = np.random.default_rng(seed)
    if "profile" in cfg:
        pspecs = [cfg["profile"]]
    else:
        pspecs = cfg.get("profiles", DEFAULT_PROFILES)
    profiles = [parse_profile(p) for p in pspecs]
    ispecs = cfg.get("inputs", DEFAULT_INPUTS)
    if not ispecs:
        raise ConfigurationError("verify needs at least one input")
    inputs = [(_label(s), parse_input(s, None, cfg.get("_base", "."))) for s in ispecs]
    atom_lams = parse_lambdas(cfg.get("lambdas"), [1e-1, 1e-2, 1e-3, 1e-4])
    field_lams = parse_lambdas(cfg.get("field_lambdas"),
                               {"start": 1e-1, "stop": 1e-6, "per_decade": 1})
    t_sched = [float(t) for t in cfg.get("t_schedule", [1.0, 0.5, 0.1, 0.01])]
    checks = []

    def record(name, passed, **details):
        checks.append({"name": name, "passed": bool(passed), **details})

    lattice_r, lattice_t = capacity.default_lattice()
    for p in profiles:
        rep = capacity.validate_profile(p, lattice_r, lattice_t)
        record(f"validate_profile[{_plabel(p)}]", rep.passed, report=rep.to_dict())

    for p in profiles:
        n = p.n or 2
        curve = weaktype.weaktype_curve(sampling.delta_measure(n), p, [1e-1, 1e-2, 1e-3, 1e-4],
                                        directions=setcap.ray_directions(n, 16))
        err = float(np.max(np.abs(np.concatenate([curve.h_lower, curve.h_upper]) - 1)))
        record(f"point_mass_exactness[{_plabel(p)}]", err <= 1e-3, max_rel_err=err)

    two = sampling.two_atom_measure(2)
    rep = weaktype.scaling_convergence(two, RadialProfile.power_law(1, 1), 0.1, t_sched,
                                       directions=setcap.ray_directions(2, 32))
    record("scaling_convergence[two_atom,power_law(1,1)]", rep["passed"], report=rep)

    for p in profiles:
        n = p.n or 2
        misses = 0
        tested = 0
        for _ in range(10):
            nu = sampling.AtomicMeasure(rng.normal(size=(5, n)), rng.uniform(0.1, 1, 5))
            pts = rng.normal(scale=2, size=(20, n))
            vals = maximal.maximal_field_measure(nu, p, pts).values
            lam = float(np.median(vals))
            for x, v in zip(pts, vals):
                if not v > lam:
                    continue
                delta = maximal.openness_radius(nu, p, x, lam)
                dirs = rng.normal(size=(8, n))
                dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
                z = x + dirs * (delta * rng.uniform(0, 1, (8, 1)))
                misses += int(np.sum(maximal.maximal_field_measure(nu, p, z).values <= lam))
                tested += 8
        record(f"superlevel_openness[{_plabel(p)}]", misses == 0 and tested > 0,
               probes=tested, misses=misses)

    wobbly = [p for p in profiles if not p.homogeneous] or profiles
    for p in wobbly:
        n = p.n or 2
        pts = rng.normal(scale=3, size=(int(cfg.get("sandwich_points", 200)), n))
        for t in (0.5, 0.1, 0.01):
            rep = maximal.sandwich_check(sampling.two_atom_measure(n), p, t, pts)
            record(f"sandwich[{_plabel(p)},t={t:g}]", rep.passed, report=rep.to_dict())

    for label, src in inputs:
        is_field = isinstance(src, sampling.ScalarField)
        for p in profiles:
            if not _compatible(src, p) or (is_field and p.kind != "lebesgue"):
                continue
            lams = field_lams if is_field else atom_lams
            ndir = 32 if src.n == 2 else 2
            try:
                curve = weaktype.weaktype_curve(src, p, lams, directions=setcap.ray_directions(src.n, ndir),
                                                workers=workers, probe_seed=seed)
            except NonBracketingError as exc:
                record(f"curve[{label},{_plabel(p)}]", False, error=str(exc))
                continue
            tag = f"[{label},{_plabel(p)}]"
            probes_ok = all(e.probes["passed"] for e in curve.entries)
            record(f"ray_probes{tag}", probes_ok,
                   misses=[e.probes for e in curve.entries if not e.probes["passed"]])
            gamma = float(capacity.scaling_envelope(p).psi(setcap.DILATION))
            worst = float(np.max(curve.h_upper)) / curve.mass
            record(f"weak11_bound{tag}", worst <= gamma, gamma=gamma, worst=worst)
            tc = weaktype.theorem_check(curve, rtol=float(cfg.get("theorem_rtol", 0.05)))
            record(f"tau_bracket{tag}", tc["passed"], report=tc)
            bc = weaktype.boundedness_check(curve, float(cfg.get("lambda0", 0.05)))
            record(f"boundedness{tag}", bc["passed"], report=bc)

    # informational: centered vs uncentered on the point mass
    p = profiles[0]
    n = p.n or 2
    x = np.zeros(n)
    x[0] = 1.0
    delta = sampling.delta_measure(n)
    cen = maximal.maximal_at_point_measure(delta, p, x)
    unc = maximal.uncentered_maximal_at_point(delta, p, x)
    checks.append({"name": "centered_vs_uncentered", "passed": True, "informational": True,
                   "centered": cen, "uncentered": unc, "ratio": unc / cen})
    return checks


def cmd_verify(cfg, out):
    checks = run_verify(cfg, cfg.get("threads", 1))
    failed = [c["name"] for c in checks if not c["passed"]]
    write_json({"passed": not failed, "failed": failed, "checks": checks},
               Path(out) / "verify.json")
    for c in checks:
        print(f"{'PASS' if c['passed'] else 'FAIL'}  {c['name']}")
    if failed:
        print("failed checks: " + ", ".join(failed), file=sys.stderr)
        return 1
    return 0


COMMANDS = {"maximal": cmd_maximal, "curve": cmd_curve, "verify": cmd_verify,
            "covering": cmd_covering}


def build_parser():
    parser = argparse.ArgumentParser(prog="capmax", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="run configuration (JSON)")
        p.add_argument("--out", help="output directory (overrides config 'out')")
        p.add_argument("--seed", type=int, help="seed for randomized checks")
        p.add_argument("--threads", type=int, help="worker threads")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        for key in ("out", "seed", "threads"):
            val = getattr(args, key)
            if val is not None:
                cfg[key] = val
        out = cfg.get("out", "capmax_out")
        return COMMANDS[args.command](cfg, out)
    except (ConfigurationError, DomainError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except CheckFailed as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
