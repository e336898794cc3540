"""Command-line front end.

Exit codes: 0 success (Indeterminate verdicts included), 2 invalid input,
3 numerical failure (non-convergence or a failed verification suite).
"""
import argparse
from dataclasses import asdict, replace
import json
import math
import re
import sys

import numpy as np

from . import __version__
from . import capacity as cap
from . import dirichlet as dr
from . import geometry as geo
from . import verification as ver
from . import wiener as wn
from .weighted_space import WeightedSpace

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3


class ConfigError(ValueError):
    pass


def _parse_window(text):
    m = re.fullmatch(r"\s*(\d+)\s*(?:\.\.|:|-)\s*(\d+)\s*", text)
    if not m:
        raise ConfigError(f"--window expects M0..M1, got {text!r}")
    return int(m.group(1)), int(m.group(2))


def _parse_rmax(text):
    m = re.fullmatch(r"\s*2\s*\^\s*(\d+)\s*", text)
    if m:
        return int(m.group(1))
    value = float(text)
    j = math.log2(value)
    if value <= 0 or j != int(j):
        raise ConfigError(f"--rmax must be a power of two, got {text!r}")
    return int(j)


def load_config(args):
    cfg = {}
    if args.config:
        with open(args.config) as fh:
            cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def build_space(cfg):
    s = cfg.get("space")
    if s is None:
        raise ConfigError("config needs a 'space' object with n and gamma")
    try:
        return WeightedSpace.from_dict(s)
    except KeyError as e:
        raise ConfigError(f"space is missing {e}") from None


def build_geometry(cfg, n):
    g = cfg.get("geometry")
    if g is None:
        raise ConfigError("config needs a 'geometry' object")
    ext = geo.from_dict(g, n)
    if ext.dimension != n:
        raise ConfigError("geometry dimension differs from space dimension")
    return ext


def _region(spec, n, cfg):
    if spec.get("empty"):
        return geo.EmptyRegion()
    if "ball" in spec:
        b = spec["ball"]
        return geo.Ball(_vector(b.get("center"), n), float(b["radius"]))
    if "slab" in spec:
        return build_geometry(cfg, n).slab(int(spec["slab"]["k"]))
    return geo.from_dict(spec, n)


def _vector(v, n):
    if v is None:
        return np.zeros(n)
    v = np.asarray(v, dtype=float)
    if v.shape != (n,):
        raise ConfigError(f"expected a vector of length {n}")
    return v


def _envelope(command, resolved, result):
    return {
        "toolkit": "wiener_infinity",
        "version": __version__,
        "command": command,
        "config": resolved,
        "result": result,
    }


def _emit(args, payload, csv_text=None):
    if args.format == "csv":
        if csv_text is None:
            raise ConfigError(f"{args.command} has no CSV output")
        text = csv_text
    else:
        text = json.dumps(ver._jsonable(payload), indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _grid_options(cfg, key):
    """Config ``grid`` may be an integer or an object of grid fields."""
    g = cfg.get(key)
    if g is None:
        return {}
    if isinstance(g, dict):
        return dict(g)
    return {"m": int(g)}


def _grid_spec(args, cfg, n):
    opts = _grid_options(cfg, "grid")
    if args.grid:
        opts["m"] = args.grid
    return replace(wn.default_grid(n), **opts)


def _exhaustion_spec(args, cfg, n, **kw):
    opts = {**kw, **_grid_options(cfg, "exhaustion")}
    m = args.grid or _grid_options(cfg, "grid").get("m")
    if m:
        opts["h"] = 1.0 / float(m)
    return replace(dr.ExhaustionGrid.default(n), **opts)


def _schedule(args, cfg, default_j1):
    if "R_schedule" in cfg and not args.rmax:
        return [float(r) for r in cfg["R_schedule"]]
    j1 = _parse_rmax(args.rmax) if args.rmax else default_j1
    j0 = int(cfg.get("j0", 3))
    if j1 < j0 + 2:
        raise ConfigError("R schedule needs at least three radii")
    return dr.default_schedule(j0, j1)


def _window(args, cfg, n):
    if args.window:
        return _parse_window(args.window)
    if "window" in cfg:
        return tuple(int(v) for v in cfg["window"])
    return wn.default_window(n)


def _base(cfg, space, args):
    return {"space": space.to_dict(), "jobs": args.jobs}


def cmd_capacity(args, cfg):
    space = build_space(cfg)
    n = space.dimension
    c = cfg.get("capacity", {})
    K = _region(c.get("K", {"empty": True}), n, cfg)
    B = c.get("B", {"radius": 2.0})
    center, radius = _vector(B.get("center"), n), float(B["radius"])
    spec = _grid_spec(args, cfg, n)
    res = cap.capacity(space, K, (center, radius), spec)
    resolved = _base(cfg, space, args) | {"capacity": c, "grid": spec.to_dict()}
    out = res.to_dict()
    if space.isotropic and isinstance(K, geo.Ball) and not K.center.any() and not center.any():
        out["radial_exact"] = cap.radial_capacity_exact(space, K.radius, radius)
    _emit(args, _envelope("capacity", resolved, out))


def _series(args, cfg):
    space = build_space(cfg)
    n = space.dimension
    ext = build_geometry(cfg, n)
    m0, m1 = _window(args, cfg, n)
    spec = _grid_spec(args, cfg, n)
    center = cfg.get("center")
    center = None if center is None else _vector(center, n)
    series = wn.wiener_sum(space, ext, m0, m1, spec, args.jobs, center)
    resolved = _base(cfg, space, args) | {
        "geometry": ext.to_dict(), "window": [m0, m1], "grid": spec.to_dict(),
        "center": None if center is None else center.tolist(),
    }
    extra = {}
    if cfg.get("equivalence"):
        spo = int(cfg.get("samples_per_octave", 4))
        integral = wn.wiener_integral(space, ext, 2.0**m0, 2.0**m1, spo, spec, args.jobs, center)
        extra["equivalence"] = wn.equivalence_ratio(series, integral).to_dict()
        resolved["samples_per_octave"] = spo
    return space, ext, series, resolved, extra


def cmd_wiener(args, cfg):
    _, _, series, resolved, extra = _series(args, cfg)
    _emit(args, _envelope("wiener", resolved, {"series": series.to_dict(), **extra}), series.to_csv())


def cmd_classify(args, cfg):
    space, ext, series, resolved, extra = _series(args, cfg)
    p = cfg.get("policy", {})
    policy = wn.ClassifyPolicy(**p)
    resolved["policy"] = asdict(policy)
    if len(series.terms) < policy.min_window:
        verdict = wn.RegularityVerdict(geo.INDETERMINATE, math.nan, (math.nan, math.nan),
                                       {"reason": "window shorter than the policy minimum",
                                        "flag": "short_window"})
    else:
        verdict = wn.classify(series, policy)
    result = {
        "verdict": verdict.to_dict(),
        "series": series.to_dict(),
        "predicted_verdict": ext.predicted_verdict(space),
        **extra,
    }
    _emit(args, _envelope("classify", resolved, result), series.to_csv())


def _probes(cfg, n):
    if "probes" in cfg:
        return np.array([_vector(p, n) for p in cfg["probes"]])
    return dr.default_probes(n)


def cmd_harmonic_measure(args, cfg):
    space = build_space(cfg)
    n = space.dimension
    ext = build_geometry(cfg, n)
    schedule = _schedule(args, cfg, 7)
    spec = _exhaustion_spec(args, cfg, n)
    est = dr.harmonic_measure_of_infinity(space, ext, _probes(cfg, n), schedule, spec)
    resolved = _base(cfg, space, args) | {
        "geometry": ext.to_dict(), "R_schedule": schedule, "grid": spec.to_dict(),
        "probes": est.probes.tolist(),
    }
    result = est.to_dict()
    result["decay_fit"] = [
        {"slope": s, "interval": list(iv)} for s, iv in dr.decay_fit(est)
    ]
    _emit(args, _envelope("harmonic-measure", resolved, result), est.to_csv())


def cmd_uniqueness(args, cfg):
    space = build_space(cfg)
    n = space.dimension
    ext = build_geometry(cfg, n)
    schedule = _schedule(args, cfg, 9)
    spec = _exhaustion_spec(args, cfg, n, tol=dr.UNIQUENESS_TOL)
    f = float(cfg.get("f", 0.0))
    rep = dr.uniqueness_probe(space, ext, f, _probes(cfg, n), schedule, spec)
    resolved = _base(cfg, space, args) | {
        "geometry": ext.to_dict(), "R_schedule": schedule, "grid": spec.to_dict(),
        "probes": _probes(cfg, n).tolist(), "f": f,
    }
    _emit(args, _envelope("uniqueness", resolved, rep.to_dict()))


def cmd_verify(args, cfg):
    if args.suite not in ver.SUITES:
        raise ConfigError(f"unknown suite {args.suite!r}; choose from {', '.join(ver.SUITES)}")
    results = ver.run_suite(args.suite)
    for r in results:
        print(r.line(), file=sys.stderr)
    payload = _envelope("verify", {"suite": args.suite}, {
        "passed": all(r.passed for r in results),
        "criteria": [r.to_dict() for r in results],
    })
    _emit(args, payload)
    return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERIC


COMMANDS = {
    "capacity": cmd_capacity,
    "wiener": cmd_wiener,
    "classify": cmd_classify,
    "harmonic-measure": cmd_harmonic_measure,
    "uniqueness": cmd_uniqueness,
    "verify": cmd_verify,
}


def make_parser():
    parser = argparse.ArgumentParser(
        prog="wiener-infinity",
        description="Weighted capacities, Wiener sums and regularity of infinity.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        if name == "verify":
            p.add_argument("suite", help=f"one of: {', '.join(ver.SUITES)}")
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--grid", type=int, help="cells across B (capacity, wiener) or per unit length (exhaustion)")
        p.add_argument("--window", help="shell window M0..M1")
        p.add_argument("--rmax", help="largest truncation radius, e.g. 2^7")
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--out", help="write output here instead of stdout")
        p.add_argument("--format", choices=("json", "csv"), default="json")
    return parser


def main(argv=None):
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_INVALID if e.code else EXIT_OK
    try:
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        cfg = load_config(args)
        code = COMMANDS[args.command](args, cfg)
        return EXIT_OK if code is None else code
    except RuntimeError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, KeyError, TypeError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
