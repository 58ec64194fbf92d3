"""Command-line entry point: ``flowcore <command> [flags]``.

Each command prints ``key=value`` summary lines (starting with the resolved
configuration) and, with ``--out``, writes a JSON or CSV artifact whose
header records the tool version, seed and a hash of the inputs.

Exit codes: 0 on success, 1 on a domain failure (an invalid instance, or a
payoff outside the core under ``--expect-core``), 2 on usage errors and
unreadable input files.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from fractions import Fraction
from pathlib import Path

from . import __version__
from .certificate import certify_coalition
from .empirical import (
    MODELS,
    default_workers,
    generate,
    parse_grid,
    run_ecore,
    sweep,
    time_matrix,
    write_ecore_csv,
    write_timematrix_csv,
)
from .incorporate import IncorporationOrder, incorporate, incorporate_spider, random_valid_order
from .lp.game import demand_incident, fairness_lp
from .model import (
    Flow,
    StructureError,
    as_fraction,
    dumps_canonical,
    flow_from_dict,
    flow_to_dict,
    format_rational,
    instance_from_dict,
    instance_to_dict,
    is_feasible,
    payoff,
)
from .singlesink import (
    SingleSinkInstance,
    bicriteria,
    fair_core_flow,
    single_sink_from_dict,
)
from .verify import verify_approx_core

__all__ = ["main", "build_parser"]


class UsageError(Exception):
    """Bad flags or unreadable input; exit code 2."""


class DomainError(Exception):
    """A well-formed request whose answer is a failure; exit code 1."""


def _rational(text: str) -> Fraction:
    try:
        return as_fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from exc


def _int_list(text: str) -> list:
    try:
        return [int(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated node ids: {text!r}") from exc


def _read_json(path: str) -> tuple:
    """``(data, sha256 of the raw bytes)``."""
    try:
        raw = Path(path).read_bytes()
        return json.loads(raw, parse_float=Fraction), hashlib.sha256(raw).hexdigest()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise UsageError(f"{path} is not valid JSON: {exc}") from exc


def _jsonable(x):
    if isinstance(x, Fraction):
        return format_rational(x)
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def _config(args) -> dict:
    skip = {"func", "command"}
    return {k: _jsonable(v) for k, v in sorted(vars(args).items()) if k not in skip}


def _header(args, input_hash: str | None) -> dict:
    seed = getattr(args, "seed", None)
    return {
        "tool": "flowcore",
        "version": __version__,
        "command": args.command,
        "seed": seed,
        "input_sha256": input_hash,
        "config": _config(args),
    }


def _hash_of(*parts: str | None) -> str | None:
    parts = [p for p in parts if p]
    if not parts:
        return None
    if len(parts) == 1:
        return parts[0]
    return hashlib.sha256("".join(parts).encode()).hexdigest()


def _emit(pairs: dict) -> None:
    for k, v in pairs.items():
        if isinstance(v, bool):
            v = "true" if v else "false"
        elif isinstance(v, (dict, list)):
            v = json.dumps(_jsonable(v), sort_keys=True, separators=(",", ":"))
        elif isinstance(v, Fraction):
            v = format_rational(v)
        print(f"{k}={v}")


def _write_json(path, header: dict, body: dict) -> None:
    doc = dict(body)
    doc["header"] = header
    Path(path).write_text(dumps_canonical(doc))


def _load_game(path: str):
    data, digest = _read_json(path)
    if "sink" in data:
        return single_sink_from_dict(data), digest
    return instance_from_dict(data), digest


def _base(game):
    return game.base if isinstance(game, SingleSinkInstance) else game


def _load_flow(path: str, instance) -> tuple:
    data, digest = _read_json(path)
    return flow_from_dict(data, instance), digest


def _pay(values) -> list:
    return [format_rational(x) for x in values]


# -- commands -------------------------------------------------------------------


def cmd_gen(args) -> int:
    if args.model != "constant" and args.seed is None:
        raise UsageError(f"--seed is required for model {args.model}")
    inst = generate(args.model, args.n, args.c, args.d, args.seed)
    body = instance_to_dict(inst)
    digest = hashlib.sha256(json.dumps(_config(args), sort_keys=True).encode()).hexdigest()
    _emit({"config": _config(args), "n": inst.n, "commodities": len(inst.demands)})
    if args.out:
        _write_json(args.out, _header(args, digest), body)
    else:
        sys.stdout.write(dumps_canonical(body))
    return 0


def _order_from_args(args, inst) -> IncorporationOrder | None:
    if args.start is not None:
        seq = args.sequence if args.sequence is not None else []
        return IncorporationOrder(args.start, tuple(seq))
    if args.seed is not None:
        return random_valid_order(inst, seed=args.seed)
    return None


def cmd_incorporate(args) -> int:
    inst, digest = _load_game(args.instance)
    inst = _base(inst)
    order = _order_from_args(args, inst)
    if inst.topology == "spider":
        flow = incorporate_spider(inst, order)
        trace = None
    else:
        flow, trace = incorporate(inst, order)
    pay = payoff(inst, flow)
    _emit({"config": _config(args), "order": str(order) if order else "default", "payoff": _pay(pay)})
    if args.trace and trace is not None:
        Path(args.trace).write_text(trace.to_jsonl())
    if args.out:
        body = flow_to_dict(flow)
        body["payoff"] = _pay(pay)
        if order is not None:
            body["order"] = {"start": order.start, "sequence": list(order.sequence)}
        _write_json(args.out, _header(args, digest), body)
    return 0


def cmd_verify(args) -> int:
    inst, digest = _load_game(args.instance)
    inst = _base(inst)
    if (args.flow is None) == (args.payoff is None):
        raise UsageError("give exactly one of --flow or --payoff")
    if args.flow is not None:
        target, fdigest = _load_flow(args.flow, inst)
        feas = is_feasible(inst, target)
        if not feas:
            raise DomainError(f"flow is infeasible: {feas.violation}")
    else:
        target, fdigest = [as_fraction(x) for x in args.payoff.split(",")], None
    verdict = verify_approx_core(inst, target, args.rho)
    out = {"config": _config(args), "in_core": verdict.in_core, "coalitions_checked": verdict.coalitions_checked}
    if verdict.breakaway is not None:
        out["breakaway"] = list(verdict.breakaway.S)
        out["margin"] = verdict.breakaway.margin
    _emit(out)
    if args.out:
        _write_json(args.out, _header(args, _hash_of(digest, fdigest)), verdict.to_dict())
    if args.expect_core and not verdict.in_core:
        return 1
    return 0


def cmd_certify(args) -> int:
    inst, digest = _load_game(args.instance)
    inst = _base(inst)
    flow, fdigest = _load_flow(args.flow, inst)
    res = certify_coalition(inst, flow, args.coalition)
    out = {"config": _config(args), "method": res.method, "deviates": res.witness is not None}
    body = {"S": sorted(res.S), "method": res.method}
    if res.certificate is not None:
        body["certificate"] = res.certificate.to_dict()
    if res.witness is not None:
        body["witness"] = flow_to_dict(res.witness)
        body["margin"] = format_rational(res.margin)
        out["margin"] = res.margin
    _emit(out)
    if args.out:
        _write_json(args.out, _header(args, _hash_of(digest, fdigest)), body)
    return 0


def cmd_sweep(args) -> int:
    if args.model != "constant" and args.seed is None:
        raise UsageError(f"--seed is required for model {args.model}")
    grid = parse_grid(args.c_grid)
    if not grid:
        raise UsageError("empty --c-grid")
    seed = 0 if args.seed is None else args.seed
    rows = sweep(args.model, args.n, args.d, grid, args.samples, seed, audit=args.audit, workers=args.workers)
    _emit({"config": _config(args)})
    for C, r in rows:
        _emit({"C": C, "distinct": r.distinct, "sw_min": r.sw.min, "lp_sw": r.lp_sw, "fair_max": r.fairness.max, "lp_fair": r.lp_fairness})
    digest = hashlib.sha256(json.dumps(_config(args), sort_keys=True).encode()).hexdigest()
    header = _header(args, digest)
    if args.out:
        flat = dict(header)
        flat["config"] = json.dumps(header["config"], sort_keys=True)
        write_ecore_csv(rows, args.out, flat)
    if args.report:
        body = {"reports": [dict(r.to_dict(with_vectors=False), C=format_rational(C)) for C, r in rows]}
        _write_json(args.report, header, body)
    if args.audit and any(r.audit_failures for _, r in rows):
        return 1
    return 0


def cmd_timematrix(args) -> int:
    if args.instance:
        inst, digest = _load_game(args.instance)
        inst = _base(inst)
    else:
        if args.model != "constant" and args.seed is None:
            raise UsageError(f"--seed is required for model {args.model}")
        inst = generate(args.model, args.n, args.c, args.d, args.seed)
        digest = hashlib.sha256(json.dumps(_config(args), sort_keys=True).encode()).hexdigest()
    seed = 0 if args.seed is None else args.seed
    tm = time_matrix(inst, args.samples, seed, workers=args.workers)
    _emit({"config": _config(args), "n": tm.n, "samples": args.samples})
    if args.out:
        header = _header(args, digest)
        header["config"] = json.dumps(header["config"], sort_keys=True)
        write_timematrix_csv(tm, args.out, header)
    return 0


def cmd_ecore(args) -> int:
    inst, digest = _load_game(args.instance)
    inst = _base(inst)
    r = run_ecore(inst, args.samples, args.seed, audit=args.audit, workers=args.workers)
    _emit({"config": _config(args), "distinct": r.distinct, "sw_min": r.sw.min, "lp_sw": r.lp_sw, "fair_max": r.fairness.max, "lp_fair": r.lp_fairness})
    if args.out:
        _write_json(args.out, _header(args, digest), r.to_dict())
    return 1 if r.audit_failures else 0


def cmd_singlesink(args) -> int:
    game, digest = _load_game(args.instance)
    if not isinstance(game, SingleSinkInstance):
        raise DomainError("instance has no sink; add \"sink\" and \"terminals\"")
    flow, x, tau = fair_core_flow(game)
    total = sum(x.values(), Fraction(0))
    _emit({"config": _config(args), "tau": tau, "total": total, "fairness": min(x.values()), "x": {s: x[s] for s in sorted(x)}})
    if args.out:
        body = flow_to_dict(flow)
        body.update(tau=format_rational(tau), x={str(s): format_rational(x[s]) for s in sorted(x)})
        _write_json(args.out, _header(args, digest), body)
    return 0


def cmd_bicriteria(args) -> int:
    game, digest = _load_game(args.instance)
    base = _base(game)
    fdigest = None
    fair_flow = None
    if args.fair_flow:
        fair_flow, fdigest = _load_flow(args.fair_flow, base)
    eligible = None
    if isinstance(game, SingleSinkInstance):
        eligible = [s for s, _ in game.terminals]
    elif fair_flow is None:
        eligible = demand_incident(base)
    res = bicriteria(game, args.lam, fair_flow=fair_flow, eligible=eligible)
    if eligible is None:
        eligible = demand_incident(base)
    idx = base.index
    fairness = min((res.payoff[idx[v]] for v in eligible), default=Fraction(0))
    out = {
        "config": _config(args),
        "payoff": _pay(res.payoff),
        "fairness": fairness,
        "tau": res.tau,
        "rho": res.factor,
    }
    if args.check:
        out["approx_core"] = verify_approx_core(base, res.flow, res.factor).in_core
    _emit(out)
    if args.out:
        body = flow_to_dict(res.flow)
        body.update(
            payoff=_pay(res.payoff),
            fairness=format_rational(fairness),
            tau=format_rational(res.tau),
            rho=format_rational(res.factor),
        )
        _write_json(args.out, _header(args, _hash_of(digest, fdigest)), body)
    return 0


# -- parser ---------------------------------------------------------------------


def _model_flags(p, need_c=True):
    p.add_argument("--model", choices=MODELS, default="constant", help="game generator")
    p.add_argument("--n", type=int, default=50, help="number of players")
    if need_c:
        p.add_argument("--c", type=_rational, default=Fraction(1), help="capacity parameter")
    p.add_argument("--d", type=_rational, default=Fraction(1), help="demand parameter")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flowcore", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"flowcore {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a game instance")
    _model_flags(p)
    p.add_argument("--seed", type=int, help="64-bit seed (random models)")
    p.add_argument("--out", help="instance JSON path (stdout if omitted)")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("incorporate", help="compute a core flow by incorporation")
    p.add_argument("--instance", required=True)
    p.add_argument("--start", type=int, help="first node of the order")
    p.add_argument("--sequence", type=_int_list, help="remaining nodes, comma separated")
    p.add_argument("--seed", type=int, help="draw a random valid order instead")
    p.add_argument("--trace", help="write the routing trace as JSON lines")
    p.add_argument("--out", help="flow JSON path")
    p.set_defaults(func=cmd_incorporate)

    p = sub.add_parser("verify", help="exact core (or approximate core) membership")
    p.add_argument("--instance", required=True)
    p.add_argument("--flow", help="flow JSON")
    p.add_argument("--payoff", help="payoff vector, comma separated rationals")
    p.add_argument("--rho", type=_rational, default=Fraction(1), help="approximation factor >= 1")
    p.add_argument("--expect-core", action="store_true", help="exit 1 unless in the core")
    p.add_argument("--out", help="verdict JSON path")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("certify", help="certificate or deviation for one coalition")
    p.add_argument("--instance", required=True)
    p.add_argument("--flow", required=True)
    p.add_argument("--coalition", type=_int_list, required=True, help="node ids, comma separated")
    p.add_argument("--out", help="certificate JSON path")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("sweep", help="sample cores over a grid of capacity parameters")
    _model_flags(p, need_c=False)
    p.add_argument("--c-grid", required=True, help="start:stop:step (inclusive) or comma list")
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--seed", type=int)
    p.add_argument("--audit", action="store_true", help="verify every distinct payoff exactly")
    p.add_argument("--workers", type=int, default=default_workers(), help="processes (default FLOWCORE_THREADS or 1)")
    p.add_argument("--out", help="ecore CSV path")
    p.add_argument("--report", help="full JSON report path")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("ecore", help="sample core payoffs of one instance")
    p.add_argument("--instance", required=True)
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--audit", action="store_true")
    p.add_argument("--workers", type=int, default=default_workers())
    p.add_argument("--out", help="report JSON path")
    p.set_defaults(func=cmd_ecore)

    p = sub.add_parser("timematrix", help="average payoff by position and incorporation time")
    _model_flags(p)
    p.add_argument("--instance", help="use this path instance instead of a generated one")
    p.add_argument("--samples", type=int, default=5000)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, default=default_workers())
    p.add_argument("--out", help="timematrix CSV path")
    p.set_defaults(func=cmd_timematrix)

    p = sub.add_parser("singlesink", help="fair core flow of a single-sink game")
    p.add_argument("--instance", required=True, help="instance JSON with sink and terminals")
    p.add_argument("--out", help="flow JSON path")
    p.set_defaults(func=cmd_singlesink)

    p = sub.add_parser("bicriteria", help="blend a core flow with a fair flow")
    p.add_argument("--instance", required=True)
    p.add_argument("--lambda", dest="lam", type=_rational, required=True, help="weight in (0,1)")
    p.add_argument("--fair-flow", help="fair flow JSON (default: fairness LP optimum)")
    p.add_argument("--check", action="store_true", help="also verify the approximate core exactly")
    p.add_argument("--out", help="flow JSON path")
    p.set_defaults(func=cmd_bicriteria)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"flowcore: error: {exc}", file=sys.stderr)
        return 2
    except (DomainError, StructureError, ValueError) as exc:
        print(f"flowcore: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
