"""``pdfm`` command-line front end.

Exit codes: 0 success, 1 validation or refusal error, 2 usage error.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import math
import secrets
import shlex
import sys
from pathlib import Path

from . import __version__
from .convergence import RNG_NAME, convergence_experiment, rate_fit, reports_to_csv
from .diagram import PersistenceDiagram, load_diagram, load_diagram_dir
from .errors import CapExceededError, DiagramValidationError
from .frechet import brute_force_optimal_grouping, certify_unique_mean, frechet_function, turner_mean
from .grouping import (
    check_flatness,
    find_flat_grouping,
    load_grouping,
    mean_diagram,
    save_grouping,
    variance_closed_form,
    variance_definitional,
)
from .tangent import barycenter_equality_check, hugging, hugging_equality_check, lambda_mixture
from .wasserstein import brute_force_w2, w2_distance

SUBCOMMANDS = ("dist", "mean", "variance", "flatness", "converge", "hugging", "barycheck", "oracle")


def _fmt(x) -> str:
    return format(x, ".17g")


def _digest(path) -> str:
    h = hashlib.sha256()
    p = Path(path)
    files = sorted(p.glob("*.json")) if p.is_dir() else [p]
    for f in files:
        h.update(f.name.encode())
        h.update(f.read_bytes())
    return h.hexdigest()


def manifest(argv, inputs, seed=None) -> dict:
    return {
        "command_line": "pdfm " + " ".join(shlex.quote(a) for a in argv),
        "seed": seed,
        "tool_version": __version__,
        "input_digests": {str(p): _digest(p) for p in inputs},
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
    }


def _emit(args, payload: dict, text_lines):
    if args.json:
        print(json.dumps(payload, indent=2))
    else:
        for line in text_lines:
            print(line)


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)


def _diagrams(directory):
    return [d for _, d in load_diagram_dir(directory)]


# -- subcommands -------------------------------------------------------------

def cmd_dist(args, argv):
    a, b = load_diagram(args.a), load_diagram(args.b)
    if args.oracle:
        dist, match = brute_force_w2(a, b)
    else:
        dist, match = w2_distance(a, b)
    payload = {"distance": dist, "matching": match.to_json(), "manifest": manifest(argv, [args.a, args.b])}
    if args.matching_out:
        _write_json(args.matching_out, payload)
    _emit(args, payload, [_fmt(dist)])
    return 0


def cmd_mean(args, argv):
    diagrams = _diagrams(args.dir)
    seed = args.seed
    if args.algorithm == "brute":
        grouping, var, n_opt = brute_force_optimal_grouping(diagrams)
        report = check_flatness(grouping)
        result = {
            "mean": mean_diagram(grouping).to_json(),
            "grouping": grouping.to_json(),
            "variance": var,
            "n_optima": n_opt,
            "unique_certified": report.flat,
            "certificate": report.to_json(),
        }
    else:
        init = args.init
        if init == "random":
            if seed is None:
                seed = secrets.randbits(63)
                print(f"seed: {seed}", file=sys.stderr)
        else:
            # CLI indices are 1-based, matching the sorted file order
            init = int(init) - 1
        res = turner_mean(diagrams, init=init, max_iters=args.max_iters, seed=seed)
        result = res.to_json()
        result["certificate"] = check_flatness(res.grouping).to_json()
    result["frechet_function"] = frechet_function(PersistenceDiagram.from_json(result["mean"]), diagrams)
    result["manifest"] = manifest(argv, [args.dir], seed)
    if args.out:
        _write_json(args.out, result)
    lines = [
        f"variance: {_fmt(result['variance'])}",
        f"mean points: {len(result['mean']['points'])}",
        f"unique_certified: {str(result['unique_certified']).lower()}",
    ]
    if "n_optima" in result:
        lines.append(f"n_optima: {result['n_optima']}")
    if "converged" in result:
        lines.append(f"converged: {str(result['converged']).lower()} after {result['iterations']} iterations")
    _emit(args, result, lines)
    return 0


def cmd_variance(args, argv):
    diagrams = _diagrams(args.diagrams)
    g = load_grouping(args.grouping, diagrams)
    vd, vc = variance_definitional(g), variance_closed_form(g)
    payload = {
        "variance_definitional": vd,
        "variance_closed_form": vc,
        "manifest": manifest(argv, [args.grouping, args.diagrams]),
    }
    _emit(args, payload, [f"variance (definitional): {_fmt(vd)}", f"variance (closed form): {_fmt(vc)}"])
    return 0


def cmd_flatness(args, argv):
    diagrams = _diagrams(args.dir)
    g = find_flat_grouping(diagrams)
    payload = {"flat": g is not None, "manifest": manifest(argv, [args.dir])}
    lines = [f"flat: {str(g is not None).lower()}"]
    if g is not None:
        rep = check_flatness(g)
        payload["report"] = rep.to_json()
        payload["grouping"] = g.to_json()
        lo, hi = rep.feasible_interval
        lines.append(f"lambda interval: ({_fmt(lo)}, {_fmt(hi)})")
        lines.append(f"witness lambda: {_fmt(rep.witness_lambda)}")
        if args.emit_grouping:
            save_grouping(g, args.emit_grouping)
    _emit(args, payload, lines)
    return 0


def cmd_converge(args, argv):
    diagrams = _diagrams(args.dir)
    if args.grouping:
        g = load_grouping(args.grouping, diagrams)
    else:
        g = find_flat_grouping(diagrams)
        if g is None:
            raise DiagramValidationError("no --grouping given and no flat grouping was found")
    try:
        B_list = [int(b) for b in args.B.split(",") if b.strip()]
    except ValueError:
        raise DiagramValidationError(f"--B must be a comma-separated list of integers, got {args.B!r}")
    seed = args.seed
    if seed is None:
        seed = secrets.randbits(63)
        print(f"seed: {seed}", file=sys.stderr)
    reports = convergence_experiment(diagrams, g, B_list, args.trials, seed)
    text = reports_to_csv(reports)
    inputs = [args.dir] + ([args.grouping] if args.grouping else [])
    man = manifest(argv, inputs, seed)
    man["rng"] = RNG_NAME
    if args.out:
        Path(args.out).write_text(text)
        _write_json(str(args.out) + ".manifest.json", man)
    try:
        slope = rate_fit(reports)
    except ValueError:
        slope = None
    payload = {
        "reports": [
            {"B": r.B, "trials": r.trials, "estimate": r.estimate, "std_error": r.std_error,
             "bound": r.bound, "seed": r.seed}
            for r in reports
        ],
        "slope": slope,
        "manifest": man,
    }
    lines = text.rstrip("\n").split("\n")
    if slope is not None:
        lines.append(f"# log-log slope: {_fmt(slope)}")
    _emit(args, payload, lines)
    return 0


def _certified(diagrams):
    g = find_flat_grouping(diagrams)
    if g is None:
        raise DiagramValidationError("no flat grouping found; the Fréchet mean is not certified")
    return g, mean_diagram(g)


def _load_weights(path):
    with open(path) as fh:
        obj = json.load(fh)
    if isinstance(obj, dict):
        obj = obj.get("weights")
    if not isinstance(obj, list):
        raise DiagramValidationError('weights JSON must be a list or {"weights": [...]}')
    return obj


def cmd_hugging(args, argv):
    diagrams = _diagrams(args.dir)
    g, z_star = _certified(diagrams)
    y = lambda_mixture(g, _load_weights(args.y))
    kappas = [hugging(z_star, y, d) for d in diagrams]
    lhs, rhs = hugging_equality_check(diagrams, z_star, y)
    payload = {
        "kappa": kappas,
        "lhs": lhs,
        "rhs": rhs,
        "residual": abs(lhs - rhs),
        "y": y.to_json(),
        "manifest": manifest(argv, [args.dir, args.y]),
    }
    lines = [f"kappa[{i + 1}]: {_fmt(k)}" for i, k in enumerate(kappas)]
    lines += [f"lhs: {_fmt(lhs)}", f"rhs: {_fmt(rhs)}", f"residual: {_fmt(abs(lhs - rhs))}"]
    _emit(args, payload, lines)
    return 0


def cmd_barycheck(args, argv):
    diagrams = _diagrams(args.dir)
    cand = load_diagram(args.candidate) if args.candidate else _certified(diagrams)[1]
    val = barycenter_equality_check(diagrams, cand)
    payload = {
        "lhs": val,
        "rhs": 0.0,
        "residual": abs(val),
        "manifest": manifest(argv, [args.dir] + ([args.candidate] if args.candidate else [])),
    }
    _emit(args, payload, [f"double sum: {_fmt(val)}", f"residual: {_fmt(abs(val))}"])
    return 0


def cmd_oracle(args, argv):
    diagrams = _diagrams(args.dir)
    g, var, n_opt = brute_force_optimal_grouping(diagrams)
    cert = certify_unique_mean(diagrams)
    payload = {
        "variance": var,
        "n_optima": n_opt,
        "grouping": g.to_json(),
        "mean": mean_diagram(g).to_json(),
        "flat_certified": cert is not None,
        "manifest": manifest(argv, [args.dir]),
    }
    _emit(args, payload, [
        f"variance: {_fmt(var)}",
        f"n_optima: {n_opt}",
        f"flat_certified: {str(cert is not None).lower()}",
    ])
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="print machine-readable JSON")

    p = argparse.ArgumentParser(prog="pdfm", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"pdfm {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="{" + ",".join(SUBCOMMANDS) + "}")

    s = sub.add_parser("dist", parents=[common], help="W2 distance between two diagrams")
    s.add_argument("a")
    s.add_argument("b")
    s.add_argument("--oracle", action="store_true", help="use exhaustive enumeration")
    s.add_argument("--matching-out", help="write the matching as JSON")
    s.set_defaults(func=cmd_dist)

    s = sub.add_parser("mean", parents=[common], help="Fréchet mean of a directory of diagrams")
    s.add_argument("dir")
    s.add_argument("--algorithm", choices=("turner", "brute"), default="turner")
    s.add_argument("--init", default="1", help="1-based diagram index or 'random'")
    s.add_argument("--seed", type=int)
    s.add_argument("--max-iters", type=int, default=100)
    s.add_argument("--out")
    s.set_defaults(func=cmd_mean)

    s = sub.add_parser("variance", parents=[common], help="variance of a grouping")
    s.add_argument("grouping")
    s.add_argument("--diagrams", required=True)
    s.set_defaults(func=cmd_variance)

    s = sub.add_parser("flatness", parents=[common], help="search for a flat grouping")
    s.add_argument("dir")
    s.add_argument("--emit-grouping")
    s.set_defaults(func=cmd_flatness)

    s = sub.add_parser("converge", parents=[common], help="Monte Carlo finite-sample rate")
    s.add_argument("dir")
    s.add_argument("--grouping")
    s.add_argument("--B", default="1,2,4,8,16,32,64")
    s.add_argument("--trials", type=int, default=10000)
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_converge)

    s = sub.add_parser("hugging", parents=[common], help="hugging function at the certified mean")
    s.add_argument("dir")
    s.add_argument("--y", required=True, help="JSON list of mixture weights")
    s.set_defaults(func=cmd_hugging)

    s = sub.add_parser("barycheck", parents=[common], help="barycenter double-sum at a candidate")
    s.add_argument("dir")
    s.add_argument("--candidate")
    s.set_defaults(func=cmd_barycheck)

    s = sub.add_parser("oracle", parents=[common], help="exhaustive optimal grouping")
    s.add_argument("dir")
    s.set_defaults(func=cmd_oracle)
    return p


def dispatch(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args, argv)
    except (DiagramValidationError, CapExceededError, ValueError, ZeroDivisionError, OSError) as exc:
        print(f"pdfm {args.command}: error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(dispatch())
