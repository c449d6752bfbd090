"""``uconvex`` command line.

Every option can also be given in a JSON file passed with ``--config``;
explicit flags win over the file.  Output is deterministic JSON tagged with
``"schema": "uconvex/1"``.  Exit codes: 0 success, 1 property violated,
2 invalid configuration.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys

from . import __version__
from .barycenters import barycenter_median, barycenter_orlicz, barycenter_p, circumcenter
from .convexity import check_busemann, check_clarkson, check_p_convexity, estimate_modulus
from .means import as_exponent, parse_orlicz
from .reports import dumps
from .sequences import (
    SequenceSpec,
    asymptotic_center,
    banach_saks_experiment,
    coconvex_limit_probe,
    cone_counterexample_demo,
    dyadic_merge_probe,
    opial_check,
    ray_shadow,
)
from .sets import build_hull, dist_to_set, hull_distance, segment_projection
from .spaces import EuclideanCone, parse_space
from .transport import DiscreteMeasure, wasserstein_inf, wasserstein_monotone_check, wasserstein_p

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG = 0, 1, 2


class ConfigError(Exception):
    pass


# -- option types -------------------------------------------------------------------


def _json_arg(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise argparse.ArgumentTypeError(f"invalid JSON: {exc}") from exc


def _float_list(text):
    if isinstance(text, list):
        return [float(v) for v in text]
    return [float(v) for v in str(text).split(",") if v.strip()]


def _int_list(text):
    if isinstance(text, list):
        return [int(v) for v in text]
    return [int(v) for v in str(text).split(",") if v.strip()]


# -- option groups ----------------------------------------------------------------


def _common(sp, seed=False):
    sp.add_argument("--config", help="JSON file with option values")
    sp.add_argument("--out", help="write the JSON report here instead of stdout")
    sp.add_argument("--threads", type=int, default=None, help="worker threads (results do not depend on it)")
    if seed:
        sp.add_argument("--seed", type=int, default=None, help="random seed (falls back to $UCONVEX_SEED)")


def _space_opt(sp, required=True):
    sp.add_argument("--space", default=None, help="space spec, e.g. euclidean:3, lp:2:1.5, cone:4")
    sp.set_defaults(_space_required=required)


def build_parser():
    parser = argparse.ArgumentParser(prog="uconvex", description="Experiments on uniformly convex metric spaces.")
    parser.add_argument("--version", action="version", version=f"uconvex {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("check-convexity", help="sampled p-convexity check")
    _common(sp, seed=True)
    _space_opt(sp)
    sp.add_argument("--p", default=None)
    sp.add_argument("--samples", type=int, default=None)
    sp.add_argument("--radius", type=float, default=None)
    sp.add_argument("--tol", type=float, default=None)

    sp = sub.add_parser("modulus", help="empirical modulus of uniform p-convexity")
    _common(sp, seed=True)
    _space_opt(sp)
    sp.add_argument("--p", default=None)
    sp.add_argument("--eps", type=_float_list, default=None, help="comma separated epsilon grid")
    sp.add_argument("--samples", type=int, default=None)
    sp.add_argument("--radius", type=float, default=None)
    sp.add_argument("--max-attempts", type=int, default=None)
    sp.add_argument("--format", choices=["json", "csv"], default=None)

    sp = sub.add_parser("busemann", help="sampled p-Busemann check")
    _common(sp, seed=True)
    _space_opt(sp)
    sp.add_argument("--p", default=None)
    sp.add_argument("--samples", type=int, default=None)
    sp.add_argument("--radius", type=float, default=None)
    sp.add_argument("--tol", type=float, default=None)

    sp = sub.add_parser("clarkson", help="scalar Clarkson inequality check")
    _common(sp, seed=True)
    sp.add_argument("--p", type=float, default=None)
    sp.add_argument("--samples", type=int, default=None)
    sp.add_argument("--c", type=float, default=None, help="override the constant")
    sp.add_argument("--tol", type=float, default=None)

    sp = sub.add_parser("hull", help="sampled iterated convex hull and distance of a query point")
    _common(sp, seed=True)
    _space_opt(sp)
    sp.add_argument("--generators", type=_json_arg, default=None)
    sp.add_argument("--query", type=_json_arg, default=None)
    sp.add_argument("--depth", type=int, default=None)
    sp.add_argument("--pairs-per-level", type=int, default=None)

    sp = sub.add_parser("project", help="nearest point on a geodesic segment")
    _common(sp)
    _space_opt(sp)
    sp.add_argument("--point", type=_json_arg, default=None)
    sp.add_argument("--a", type=_json_arg, default=None)
    sp.add_argument("--b", type=_json_arg, default=None)

    sp = sub.add_parser("wasserstein", help="exact w_p / w_inf between discrete measures")
    _common(sp)
    _space_opt(sp)
    sp.add_argument("--mu", type=_json_arg, default=None)
    sp.add_argument("--nu", type=_json_arg, default=None)
    sp.add_argument("--p", default=None, help="exponent, or inf for the bottleneck distance")
    sp.add_argument("--p-list", type=_float_list, default=None, help="run the monotonicity check over these p")

    for name, helptext in (("barycenter", "p-barycenter (p = 1 gives the median)"),
                           ("orlicz-barycenter", "barycenter for an Orlicz function")):
        sp = sub.add_parser(name, help=helptext)
        _common(sp, seed=True)
        _space_opt(sp)
        sp.add_argument("--mu", type=_json_arg, default=None)
        sp.add_argument("--restarts", type=int, default=None)
        if name == "barycenter":
            sp.add_argument("--p", type=float, default=None)
        else:
            sp.add_argument("--orlicz", default=None, help="pow:<p> or exp-minus-one")

    sp = sub.add_parser("circumcenter", help="minimax center of a point set")
    _common(sp)
    _space_opt(sp)
    sp.add_argument("--points", type=_json_arg, default=None)

    def seq_opts(sp, space_required=False):
        _space_opt(sp, required=space_required)
        sp.add_argument("--sequence", type=_json_arg, default=None, help='{"generator": ..., "length": ..., "params": {...}}')
        sp.add_argument("--tail-start", type=int, default=None)

    sp = sub.add_parser("asymptotic-center", help="asymptotic center of a finite tail")
    _common(sp)
    seq_opts(sp)

    sp = sub.add_parser("opial", help="Opial inequality on a tail window")
    _common(sp)
    seq_opts(sp)
    sp.add_argument("--weak-limit", type=_json_arg, default=None)
    sp.add_argument("--competitors", type=_json_arg, default=None)

    sp = sub.add_parser("coconvex-probe", help="membership in hulls of random subsequences")
    _common(sp, seed=True)
    seq_opts(sp)
    sp.add_argument("--candidates", type=_json_arg, default=None)
    sp.add_argument("--depth", type=int, default=None)
    sp.add_argument("--tol", type=float, default=None)
    sp.add_argument("--subsequences", type=int, default=None)
    sp.add_argument("--shadow", choices=["none", "ray"], default=None)

    sp = sub.add_parser("cone-demo", help="two limit-set points of (e_n, 1) in a Euclidean cone")
    _common(sp, seed=True)
    sp.add_argument("--n", type=int, default=None)
    sp.add_argument("--depth", type=int, default=None)
    sp.add_argument("--csv", default=None, help="also write the (n, m, projection_radius) rows here")
    sp.add_argument("--format", choices=["json", "csv"], default=None)

    sp = sub.add_parser("banach-saks", help="barycenters of growing prefixes")
    _common(sp)
    seq_opts(sp)
    sp.add_argument("--p", type=float, default=None)
    sp.add_argument("--prefix-lengths", type=_int_list, default=None)
    sp.add_argument("--reference", type=_json_arg, default=None)

    sp = sub.add_parser("dyadic-probe", help="variances of dyadic blocks")
    _common(sp)
    seq_opts(sp)
    sp.add_argument("--p", type=float, default=None)
    sp.add_argument("--levels", type=int, default=None)
    return parser


DEFAULTS = {
    "threads": 1,
    "p": 2.0,
    "samples": 10_000,
    "radius": 1.0,
    "tol": 1e-9,
    "eps": [0.1, 0.5, 1.0],
    "max_attempts": 10**6,
    "format": "json",
    "depth": 6,
    "pairs_per_level": 256,
    "restarts": 0,
    "orlicz": "pow:2",
    "tail_start": 0,
    "subsequences": 16,
    "shadow": "none",
    "n": 8,
    "prefix_lengths": [4, 16, 64],
    "levels": 3,
}

# per-command overrides of the shared defaults
COMMAND_DEFAULTS = {
    "modulus": {"samples": 100_000},
    "clarkson": {"samples": 100_000, "tol": 1e-12},
    "coconvex-probe": {"tol": 1e-3},
    "wasserstein": {"p": 1.0},
}

#: commands whose output depends on random draws; they need --seed or $UCONVEX_SEED
RANDOMIZED = {"check-convexity", "modulus", "busemann", "clarkson", "hull", "coconvex-probe"}


def _merge_config(args, parser):
    values = vars(args)
    if values.get("config"):
        try:
            with open(values["config"], encoding="utf-8") as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {values['config']}: {exc}") from exc
        if not isinstance(cfg, dict):
            raise ConfigError("config file must hold a JSON object")
        cfg.pop("command", None)
        for key, val in cfg.items():
            dest = key.replace("-", "_")
            if dest not in values or dest.startswith("_") or dest == "config":
                raise ConfigError(f"unknown option {key!r} for {args.command}")
            if values[dest] is None:
                values[dest] = val
    for key, val in {**DEFAULTS, **COMMAND_DEFAULTS.get(args.command, {})}.items():
        if key in values and values[key] is None:
            values[key] = val
    if "seed" in values and values["seed"] is None:
        env = os.environ.get("UCONVEX_SEED")
        if env is not None:
            try:
                values["seed"] = int(env)
            except ValueError as exc:
                raise ConfigError(f"UCONVEX_SEED={env!r} is not an integer") from exc
    if args.command in RANDOMIZED and values.get("seed") is None:
        raise ConfigError(f"{args.command} is randomized: pass --seed or set UCONVEX_SEED")
    if values.get("seed") is None and "seed" in values:
        values["seed"] = 0
    if values.get("threads") is not None and values["threads"] < 1:
        raise ConfigError("--threads must be >= 1")
    if values.get("tol") is not None and not values["tol"] > 0:
        raise ConfigError("tolerance must be positive")
    for key in ("eps", "p_list"):
        if isinstance(values.get(key), (str, int, float)):
            values[key] = _float_list(values[key])
    if isinstance(values.get("prefix_lengths"), (str, int)):
        values["prefix_lengths"] = _int_list(values["prefix_lengths"])
    return args


def _need(args, *names):
    for n in names:
        if getattr(args, n, None) is None:
            raise ConfigError(f"missing option --{n.replace('_', '-')}")


def _space(args):
    if args.space is None:
        if getattr(args, "_space_required", True):
            raise ConfigError("missing option --space")
        return None
    return parse_space(args.space)


def _measure(s, obj, name):
    if not isinstance(obj, dict) or "points" not in obj:
        raise ConfigError(f"--{name} must be a JSON object with 'points' (and optional 'weights')")
    return DiscreteMeasure.from_json(obj, s)


def _sequence(args):
    _need(args, "sequence")
    spec = SequenceSpec.from_dict(args.sequence)
    s = _space(args) or spec.default_space()
    return s, spec


# -- commands ---------------------------------------------------------------------


def cmd_check_convexity(args):
    s = _space(args)
    rep = check_p_convexity(s, as_exponent(args.p), n_samples=args.samples, seed=args.seed, radius=args.radius,
                            tol=args.tol, threads=args.threads)
    return {"command": "check-convexity", "space": str(s), "report": rep.to_dict()}, not rep.passed


def cmd_modulus(args):
    s = _space(args)
    table = estimate_modulus(s, as_exponent(args.p), args.eps, n_samples=args.samples, seed=args.seed,
                             radius=args.radius, max_attempts=args.max_attempts, threads=args.threads)
    payload = {"command": "modulus", "space": str(s), "seed": args.seed, "table": table.to_dict()}
    if args.format == "csv":
        rows = [("eps", "rho_hat", "rho_raw", "rho_tilde", "samples", "attempts")]
        rows += list(zip(table.epsilons, table.rho_hat, table.rho_raw, table.rho_tilde, table.samples, table.attempts))
        return _csv_text(rows), False
    return payload, False


def cmd_busemann(args):
    s = _space(args)
    rep = check_busemann(s, as_exponent(args.p), n_samples=args.samples, seed=args.seed, radius=args.radius,
                         tol=args.tol, threads=args.threads)
    return {"command": "busemann", "space": str(s), "report": rep.to_dict()}, not rep.passed


def cmd_clarkson(args):
    rep = check_clarkson(args.p, n_samples=args.samples, seed=args.seed, c=args.c, tol=args.tol)
    return {"command": "clarkson", "report": rep.to_dict()}, not rep.passed


def cmd_hull(args):
    s = _space(args)
    _need(args, "generators")
    gens = [s.from_json(g) for g in args.generators]
    hull = build_hull(s, gens, args.depth, seed=args.seed, pairs_per_level=args.pairs_per_level)
    payload = {"command": "hull", "space": str(s), "depth": args.depth, "levels": hull.levels,
               "cloud_size": len(hull), "skipped_pairs": hull.skipped}
    if args.query is not None:
        q = s.from_json(args.query)
        d_cloud, near = dist_to_set(s, q, hull)
        d_ref, best = hull_distance(s, q, hull)
        payload["query"] = {"point": s.to_json(q), "cloud_distance": d_cloud, "cloud_nearest": s.to_json(near),
                            "distance": d_ref, "nearest": s.to_json(best)}
    return payload, False


def cmd_project(args):
    s = _space(args)
    _need(args, "point", "a", "b")
    res = segment_projection(s, s.from_json(args.point), s.from_json(args.a), s.from_json(args.b))
    return {"command": "project", "space": str(s), "projection": s.to_json(res.point), "t": res.t,
            "distance": res.distance, "fallback": res.fallback}, False


def cmd_wasserstein(args):
    s = _space(args)
    _need(args, "mu", "nu")
    mu, nu = _measure(s, args.mu, "mu"), _measure(s, args.nu, "nu")
    payload = {"command": "wasserstein", "space": str(s)}
    violated = False
    p = as_exponent(args.p)
    if p is as_exponent("inf"):
        payload.update({"p": "inf", "value": wasserstein_inf(s, mu, nu)})
    else:
        value, plan = wasserstein_p(s, mu, nu, p)
        payload.update({"p": p, "value": value, "plan": plan.to_json()})
    if args.p_list:
        rep = wasserstein_monotone_check(s, mu, nu, args.p_list)
        payload["monotone_check"] = rep.to_dict()
        violated = not rep.passed
    return payload, violated


def cmd_barycenter(args):
    s = _space(args)
    _need(args, "mu")
    mu = _measure(s, args.mu, "mu")
    kw = {"seed": args.seed, "restarts": args.restarts, "threads": args.threads}
    res = barycenter_median(s, mu, **kw) if args.p == 1.0 else barycenter_p(s, mu, args.p, **kw)
    return {"command": "barycenter", "space": str(s), "p": args.p, "result": res.to_dict(s)}, False


def cmd_orlicz_barycenter(args):
    s = _space(args)
    _need(args, "mu")
    mu = _measure(s, args.mu, "mu")
    L = parse_orlicz(args.orlicz)
    res = barycenter_orlicz(s, mu, L, seed=args.seed, restarts=args.restarts, threads=args.threads)
    return {"command": "orlicz-barycenter", "space": str(s), "orlicz": L.descriptor, "result": res.to_dict(s)}, False


def cmd_circumcenter(args):
    s = _space(args)
    _need(args, "points")
    res = circumcenter(s, [s.from_json(x) for x in args.points])
    return {"command": "circumcenter", "space": str(s), "result": res.to_dict(s), "radius": res.value}, False


def cmd_asymptotic_center(args):
    s, spec = _sequence(args)
    res = asymptotic_center(s, spec, tail_start=args.tail_start)
    return {"command": "asymptotic-center", "space": str(s), "sequence": spec.to_dict(), "result": res.to_dict(s)}, False


def cmd_opial(args):
    s, spec = _sequence(args)
    _need(args, "weak_limit", "competitors")
    rep = opial_check(s, spec, s.from_json(args.weak_limit), [s.from_json(c) for c in args.competitors],
                      tail_start=args.tail_start)
    return {"command": "opial", "space": str(s), "report": rep.to_dict()}, not rep.passed


def cmd_coconvex_probe(args):
    s, spec = _sequence(args)
    _need(args, "candidates")
    shadow = None
    if args.shadow == "ray":
        if not isinstance(s, EuclideanCone):
            raise ConfigError("--shadow ray needs a cone space")
        shadow = ray_shadow
    rep = coconvex_limit_probe(s, spec, [s.from_json(c) for c in args.candidates], hull_depth=args.depth,
                               tol=args.tol, k=args.subsequences, seed=args.seed, tail_start=args.tail_start,
                               shadow=shadow, threads=args.threads)
    return {"command": "coconvex-probe", "space": str(s), "report": rep.to_dict()}, not rep.passed


def cmd_cone_demo(args):
    report, rows = cone_counterexample_demo(args.n, hull_depth=args.depth, seed=args.seed, threads=args.threads)
    table = [("n", "m", "projection_radius")] + rows
    ok = report["inequality_holds"] and all(report["supported"]) and report["weak_limit_unique"]
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            fh.write(_csv_text(table))
    if args.format == "csv":
        return _csv_text(table), not ok
    return {"command": "cone-demo", **report}, not ok


def cmd_banach_saks(args):
    s, spec = _sequence(args)
    ref = s.from_json(args.reference) if args.reference is not None else None
    rep = banach_saks_experiment(s, spec, p=args.p, prefix_lengths=args.prefix_lengths, reference=ref)
    return {"command": "banach-saks", "space": str(s), "report": rep.to_dict()}, not rep.passed


def cmd_dyadic_probe(args):
    s, spec = _sequence(args)
    rep = dyadic_merge_probe(s, spec, p=args.p, levels=args.levels)
    return {"command": "dyadic-probe", "space": str(s), "report": rep.to_dict()}, not rep.passed


COMMANDS = {
    "check-convexity": cmd_check_convexity,
    "modulus": cmd_modulus,
    "busemann": cmd_busemann,
    "clarkson": cmd_clarkson,
    "hull": cmd_hull,
    "project": cmd_project,
    "wasserstein": cmd_wasserstein,
    "barycenter": cmd_barycenter,
    "circumcenter": cmd_circumcenter,
    "orlicz-barycenter": cmd_orlicz_barycenter,
    "asymptotic-center": cmd_asymptotic_center,
    "opial": cmd_opial,
    "coconvex-probe": cmd_coconvex_probe,
    "cone-demo": cmd_cone_demo,
    "banach-saks": cmd_banach_saks,
    "dyadic-probe": cmd_dyadic_probe,
}


def _csv_text(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in rows:
        writer.writerow(["" if v is None else (repr(float(v)) if isinstance(v, float) else v) for v in row])
    return buf.getvalue()


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with status 2
        return int(exc.code or 0)
    try:
        args = _merge_config(args, parser)
        payload, violated = COMMANDS[args.command](args)
    except (ConfigError, ValueError, KeyError, TypeError) as exc:
        print(f"uconvex {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    text = payload if isinstance(payload, str) else dumps(payload)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_VIOLATION if violated else EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
