"""Command-line front end.

Exit codes: 0 positive verdict or nonempty result, 3 negative verdict or
empty result, 2 usage or input error, 1 internal error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from fractions import Fraction
from pathlib import Path

from . import cost as costmod
from .core import TAError, fmt
from .diagnosis import (check_delta_diag, check_diag, delta_bound,
                        min_cardinality, min_delta, min_mask, min_mask_size,
                        min_sensor_set, twin_plant)
from .modelio import load_ta, ta_to_dot
from .observer import check_obs_diag, load_observer, product_obs
from .region import build_region_graph, to_dot
from .synthesis import Resource, build_game, game_to_dot, instantiate, synthesize, template_to_dot

logger = logging.getLogger("tadiag")

OK, NEGATIVE, USAGE, INTERNAL = 0, 3, 2, 1


class UsageError(Exception):
    pass


def _sigma(args, A):
    if args.sigma is None:
        return frozenset(A.events)
    names = frozenset(t for t in args.sigma.split(",") if t)
    unknown = names - A.events
    if unknown:
        raise UsageError(f"--sigma: unknown events {sorted(unknown)}")
    return names


def _delta(args, required=True):
    if args.delta is None:
        if required:
            raise UsageError("--delta is required")
        return None
    if args.delta < 0:
        raise UsageError("--delta must be nonnegative")
    return args.delta


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"not a rational number: {text!r}") from None


def _emit(args, payload):
    if isinstance(payload, str):
        text = payload
    else:
        text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if getattr(args, "out", None):
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_check(args) -> int:
    A = load_ta(args.model)
    sigma = _sigma(args, A)
    delta = _delta(args, required=False)
    v = check_diag(A, sigma) if delta is None else check_delta_diag(A, sigma, delta)
    v.params["sigma"] = sorted(sigma)
    _emit(args, v.to_json())
    return OK if v.diagnosable else NEGATIVE


def cmd_min_delta(args) -> int:
    A = load_ta(args.model)
    sigma = _sigma(args, A)
    d = min_delta(A, sigma)
    _emit(args, {"minDelta": d, "diagnosable": d is not None, "sigma": sorted(sigma),
                 "deltaBound": delta_bound(A, sigma)})
    return OK if d is not None else NEGATIVE


def cmd_min_sensors(args) -> int:
    A = load_ta(args.model)
    if args.n is not None:
        S = min_sensor_set(A, args.n)
        res = None if S is None else (args.n, S)
    else:
        res = min_cardinality(A)
    if res is None:
        _emit(args, {"n": args.n, "sigma": None})
        return NEGATIVE
    _emit(args, {"n": res[0], "sigma": sorted(res[1])})
    return OK


def cmd_min_mask(args) -> int:
    A = load_ta(args.model)
    if args.n is not None:
        M = min_mask(A, args.n)
        res = None if M is None else (args.n, M)
    else:
        res = min_mask_size(A)
    if res is None:
        _emit(args, {"n": args.n, "mask": None})
        return NEGATIVE
    _emit(args, res[1].to_json())
    return OK


def cmd_check_obs(args) -> int:
    A = load_ta(args.model)
    if not args.observer:
        raise UsageError("--observer is required")
    obs = load_observer(args.observer)
    v = check_obs_diag(A, obs, _delta(args))
    _emit(args, v.to_json())
    return OK if v.diagnosable else NEGATIVE


def _resource(args) -> Resource:
    clocks = tuple(t for t in (args.clocks or "").split(",") if t)
    g = _fraction(args.granularity) if args.granularity else Fraction(1)
    K = _fraction(args.max) if args.max is not None else Fraction(0)
    return Resource(clocks, K, g)


def cmd_synth(args) -> int:
    A = load_ta(args.model)
    t = synthesize(A, _delta(args), _resource(args))
    if args.dot:
        _emit(args, template_to_dot(t))
    elif args.instantiate:
        if t.empty:
            sys.stderr.write("empty template: no diagnosing observer for this resource\n")
        else:
            _emit(args, instantiate(t).to_text())
    else:
        _emit(args, t.to_json())
    return NEGATIVE if t.empty else OK


def cmd_cost(args) -> int:
    A = load_ta(args.model)
    if args.observer:
        A = product_obs(A, load_observer(args.observer))
    try:
        val, cycle = costmod.mean_cost_cycle(A, maximize=not args.min)
    except costmod.NoTimeCycleError as exc:
        sys.stderr.write(f"{exc}\n")
        return NEGATIVE
    key = "minMeanCost" if args.min else "maxMeanCost"
    _emit(args, {key: fmt(val), "witnessCycle": cycle})
    return OK


def cmd_export_dot(args) -> int:
    A = load_ta(args.model)
    target = args.target
    if target == "model":
        text = ta_to_dot(A)
    elif target == "region":
        text = to_dot(build_region_graph(A))
    elif target == "twin":
        T, _ = twin_plant(A, _sigma(args, A), _delta(args, required=False))
        text = ta_to_dot(T)
    elif target == "game":
        text = game_to_dot(build_game(A, _delta(args), _resource(args)))
    else:
        text = template_to_dot(synthesize(A, _delta(args), _resource(args)))
    _emit(args, text)
    return OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tadiag",
                                description="Fault diagnosis and observer synthesis for timed automata.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, sigma=True, delta=True, resource=False):
        sp.add_argument("--model", required=True)
        if sigma:
            sp.add_argument("--sigma", help="comma-separated observable events (default: all)")
        if delta:
            sp.add_argument("--delta", type=int)
        if resource:
            sp.add_argument("--clocks", help="comma-separated observer clocks")
            sp.add_argument("--max", help="largest constant in observer guards")
            sp.add_argument("--granularity", help="guard granularity, as 1/m")
        sp.add_argument("--out", help="write the result to this file")

    sp = sub.add_parser("check", help="decide diagnosability (with --delta: within delta)")
    common(sp)
    sp.set_defaults(func=cmd_check)
    sp = sub.add_parser("min-delta", help="least delta making the model diagnosable")
    common(sp, delta=False)
    sp.set_defaults(func=cmd_min_delta)
    sp = sub.add_parser("min-sensors", help="smallest diagnosing set of observable events")
    common(sp, sigma=False, delta=False)
    sp.add_argument("--n", type=int)
    sp.set_defaults(func=cmd_min_sensors)
    sp = sub.add_parser("min-mask", help="smallest diagnosing mask")
    common(sp, sigma=False, delta=False)
    sp.add_argument("--n", type=int)
    sp.set_defaults(func=cmd_min_mask)
    sp = sub.add_parser("check-obs", help="diagnosability under a dynamic observer")
    common(sp, sigma=False)
    sp.add_argument("--observer")
    sp.set_defaults(func=cmd_check_obs)
    sp = sub.add_parser("synth", help="most permissive diagnosing observers for a resource")
    common(sp, sigma=False, resource=True)
    sp.add_argument("--dot", action="store_true", help="print the template as DOT")
    sp.add_argument("--instantiate", action="store_true", help="print one observer")
    sp.set_defaults(func=cmd_synth)
    sp = sub.add_parser("cost", help="maximal (or minimal) mean cost")
    common(sp, sigma=False, delta=False)
    sp.add_argument("--observer")
    sp.add_argument("--min", action="store_true")
    sp.set_defaults(func=cmd_cost)
    sp = sub.add_parser("export-dot", help="Graphviz export")
    common(sp, resource=True)
    sp.add_argument("--target", choices=["model", "region", "twin", "game", "template"],
                    default="model")
    sp.set_defaults(func=cmd_export_dot)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, TAError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return USAGE
    except Exception as exc:  # pragma: no cover - reported, not hidden
        logger.exception("internal error")
        sys.stderr.write(f"internal error: {exc}\n")
        return INTERNAL


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
