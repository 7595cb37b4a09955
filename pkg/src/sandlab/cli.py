"""Command-line entry point: ``sandlab <subcommand> ...`` prints a JSON report.

Exit codes: 0 success (including budget exhaustion, reported in the JSON),
2 a semantic check failed, 1 usage or system error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .analysis import (
    OverBudget,
    cube_radius_bound,
    dimensional_reduction,
    inner_bound_check,
    lambda_radius_bound,
    measure_growth_many,
    outer_bound_check,
    robust_boxes_experiment,
    write_table,
)
from .backgrounds import Constant, LambdaAugmented, parse_background
from .engine import Budget, Status, odometer_agreement, parse_scheduler, stabilize
from .explosion import certify_explosion, check_disaster_hypotheses
from .leastaction import dominates, induced_configuration, is_stabilizing, slab_construction, tropical_min_check
from .render import get_palette, write_ppm
from .spg import load_grid, save_grid

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CHECK_FAILED = 2
REPORT_VERSION = 1

log = logging.getLogger("sandlab")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


@dataclass
class ExperimentConfig:
    subcommand: str
    d: int | None = None
    background: str | None = None
    n: object = None
    scheduler: str | None = None
    seed: int | None = None
    max_topplings: int | None = None
    max_radius: int | None = None
    eps: float | None = None
    outputs: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


_OUTPUT_KEYS = ("out_final", "out_odometer", "out_config", "image", "table", "out")
_CONFIG_KEYS = {"subcommand", "d", "bg", "n", "scheduler", "seed", "max_topplings", "max_radius", "eps"}
_SKIP = {"func", "verbose", "timing"}


def _config(args) -> ExperimentConfig:
    ns = vars(args)
    outputs = {k: ns[k] for k in _OUTPUT_KEYS if ns.get(k) is not None}
    params = {k: v for k, v in ns.items() if k not in _CONFIG_KEYS and k not in _OUTPUT_KEYS and k not in _SKIP}
    return ExperimentConfig(
        subcommand=args.subcommand,
        d=ns.get("d"),
        background=ns.get("bg"),
        n=ns.get("n"),
        scheduler=ns.get("scheduler"),
        seed=ns.get("seed"),
        max_topplings=ns.get("max_topplings"),
        max_radius=ns.get("max_radius"),
        eps=ns.get("eps"),
        outputs=outputs,
        params=params,
    )


def _budget(args) -> Budget:
    return Budget(args.max_topplings, args.max_radius)


def _strip_timing(obj):
    if isinstance(obj, dict):
        return {k: _strip_timing(v) for k, v in obj.items() if k != "runtime"}
    if isinstance(obj, list):
        return [_strip_timing(v) for v in obj]
    return obj


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _parse_slice(specs, dim):
    fixed = {}
    for item in specs or []:
        axis, _, value = item.partition("=")
        try:
            fixed[int(axis)] = int(value)
        except ValueError:
            raise UsageError(f"bad slice {item!r}; use AXIS=VALUE") from None
    if dim >= 3 and not fixed:
        fixed = {k: 0 for k in range(2, dim)}
    return fixed


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from None


# subcommands return (result dict, passed)


def cmd_stabilize(args):
    bg = parse_background(args.bg)
    sch = parse_scheduler(args.scheduler, args.seed)
    res = stabilize(bg, args.n, args.d, sch, _budget(args), certify_radius=args.certify_radius)
    out = res.summary()
    if res.status is Status.STABLE:
        out["laplacian_identity"] = res.laplacian_identity_holds()
        out["mass_conserved"] = int(res.final.heights.astype(np.int64).sum()) == int(res.initial().heights.sum())
    if res.certificate is not None:
        out["certificate"] = res.certificate.to_dict()
    if args.out_final:
        save_grid(args.out_final, res.final, args.encoding)
    if args.out_odometer:
        save_grid(args.out_odometer, res.odometer, args.encoding)
    if args.image:
        write_ppm(args.image, res.final, get_palette(args.palette), _parse_slice(args.slice, args.d))
    ok = res.status is not Status.STABLE or (out["laplacian_identity"] and out["mass_conserved"])
    return out, ok


def cmd_odometer(args):
    bg = parse_background(args.bg)
    names = [s.strip() for s in args.compare.split(",")] if args.compare else [args.scheduler]
    schedulers = [parse_scheduler(s, args.seed) for s in names]
    results = [stabilize(bg, args.n, args.d, s, _budget(args)) for s in schedulers]
    rep = odometer_agreement(bg, args.n, args.d, schedulers, results=results)
    out = rep.to_dict()
    first = results[0]
    out["summary"] = first.summary()
    if args.out_odometer:
        save_grid(args.out_odometer, first.odometer, args.encoding)
    return out, rep.agree is not False


def cmd_explode(args):
    bg = parse_background(args.bg)
    cert = certify_explosion(bg, args.n, args.d, args.target_radius, _budget(args), threshold=args.threshold)
    return cert.to_dict(with_stages=args.stages), cert.certified


def cmd_hypotheses(args):
    bg = parse_background(args.bg)
    rep = check_disaster_hypotheses(bg, args.d, args.r_min, args.r_max)
    ok = rep.passes if args.strict else rep.passes_eventually
    return rep.to_dict(), ok


def cmd_bounds(args):
    bg = parse_background(args.bg)
    d = args.d
    sch = parse_scheduler(args.scheduler, args.seed)
    ns = _ints(args.n)
    bound = None
    if isinstance(bg, Constant) and d <= bg.h <= 2 * d - 2:
        bound = lambda n: cube_radius_bound(d, bg.h, n, args.eps)
    elif isinstance(bg, LambdaAugmented) and bg.h == 2 * d - 2:
        bound = lambda n: lambda_radius_bound(d, bg.m, n, args.eps)
    jobs = [(bg, n, d, sch, _budget(args), bound(n) if bound else None) for n in ns]
    records = measure_growth_many(jobs, args.workers)
    out = {"records": [asdict(r) for r in records]}
    ok = all(r.within_bound is not False for r in records)
    checks = []
    if isinstance(bg, Constant) and (args.inner or args.outer):
        for n in ns:
            res = stabilize(bg, n, d, sch, _budget(args))
            if args.inner:
                checks.append(inner_bound_check(d, bg.h, n, args.allowance, result=res).to_dict())
            if args.outer:
                checks.append(outer_bound_check(d, bg.h, n, args.eps, args.allowance, result=res).to_dict())
    elif args.inner or args.outer:
        raise UsageError("inner/outer checks need a constant background")
    out["checks"] = checks
    ok = ok and all(c["holds"] for c in checks)
    if args.table:
        write_table(records, args.table)
    return out, ok


def cmd_boxes(args):
    rep = robust_boxes_experiment(
        _ints(args.radii), args.interior, args.N, dim=args.d, shell_h=args.shell, budget=_budget(args)
    )
    return rep.to_dict(), rep.holds


def cmd_reduce(args):
    rng = tuple(_ints(args.m_range)) if args.m_range else None
    if rng is not None and len(rng) != 2:
        raise UsageError("--m-range takes LO,HI")
    rep = dimensional_reduction(args.n, args.d, args.lam, rng, _budget(args))
    out = rep.to_dict()
    ok = True if args.min_fraction is None else rep.match_fraction >= args.min_fraction
    return out, ok


def cmd_render(args):
    grid = load_grid(args.grid)
    write_ppm(args.out, grid, get_palette(args.palette), _parse_slice(args.slice, grid.dim))
    return {"dim": grid.dim, "radius": grid.radius, "palette": args.palette, "out": args.out}, True


def cmd_verify_leastaction(args):
    d, h, n = args.d, args.h, args.n
    sc = slab_construction(d, h, n, args.eps)
    bg = Constant(h)
    cand = [is_stabilizing(bg, n, u, slab_axis=i).to_dict() for i, u in enumerate(sc.candidates)]
    trop = tropical_min_check(bg, n, sc.candidates[0], sc.candidates[-1], slab_axes=(0, d - 1))
    res = stabilize(bg, n, d, parse_scheduler(args.scheduler, args.seed), _budget(args))
    if res.status is not Status.STABLE:
        raise OverBudget(res)
    dom, witness, margin = dominates(sc.min_candidate, res.odometer.heights)
    if args.out_config:
        save_grid(args.out_config, induced_configuration(bg, n, sc.min_candidate), "le32")
    out = {
        "construction": sc.to_dict(),
        "candidates_stabilizing": cand,
        "tropical_min": trop.to_dict(),
        "dominates_odometer": dom,
        "witness": witness,
        "min_margin": margin,
        "odometer_max": int(res.odometer.heights.max()),
    }
    ok = all(c["ok"] for c in cand) and trop.ok and dom
    return out, ok


def _common(p, scheduler=True):
    p.add_argument("-d", type=int, default=2, help="lattice dimension")
    p.add_argument("--max-topplings", type=int, default=Budget().max_topplings)
    p.add_argument("--max-radius", type=int, default=Budget().max_radius)
    if scheduler:
        p.add_argument("--scheduler", default="sweep", help="sweep, enumeration, parallel, random, nested")
        p.add_argument("--seed", type=int, default=0, help="seed for the random scheduler")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sandlab", description="Abelian sandpile growth experiments on Z^d.")
    p.add_argument("--version", action="version", version=f"sandlab {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--timing", action="store_true", help="keep wall-clock runtimes in the report")
    p.add_argument("--workers", type=int, default=1, help="processes for independent runs")
    sub = p.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    s = sub.add_parser("stabilize", help="stabilize background + n particles at the origin")
    _common(s)
    s.add_argument("--bg", required=True, help="background descriptor, e.g. constant:2")
    s.add_argument("-n", type=int, required=True)
    s.add_argument("--certify-radius", type=int, help="on budget exhaustion, try an explosion certificate")
    s.add_argument("--out-final", help="SPG1 dump of the final configuration")
    s.add_argument("--out-odometer", help="SPG1 dump of the odometer")
    s.add_argument("--encoding", choices=("ascii", "le32"), default="le32")
    s.add_argument("--image", help="PPM rendering of the final configuration")
    s.add_argument("--palette", default="fig1")
    s.add_argument("--slice", action="append", help="AXIS=VALUE for d >= 3 (default: fix axes 2.. at 0)")
    s.set_defaults(func=cmd_stabilize)

    s = sub.add_parser("odometer", help="odometer under one or several schedulers")
    _common(s)
    s.add_argument("--bg", required=True)
    s.add_argument("-n", type=int, required=True)
    s.add_argument("--compare", help="comma-separated schedulers whose odometers must agree")
    s.add_argument("--out-odometer")
    s.add_argument("--encoding", choices=("ascii", "le32"), default="le32")
    s.set_defaults(func=cmd_odometer)

    s = sub.add_parser("explode", help="staged explosion certificate")
    _common(s, scheduler=False)
    s.add_argument("--bg", required=True)
    s.add_argument("-n", type=int, required=True)
    s.add_argument("--target-radius", type=int, required=True)
    s.add_argument("--threshold", type=int, help="face threshold r0; stage 0 cube must reach it")
    s.add_argument("--stages", action="store_true", help="include every stage in the report")
    s.set_defaults(func=cmd_explode)

    s = sub.add_parser("hypotheses", help="scan faces for the explosion hypotheses")
    s.add_argument("-d", type=int, default=2)
    s.add_argument("--bg", required=True)
    s.add_argument("--r-min", type=int, default=1)
    s.add_argument("--r-max", type=int, required=True)
    s.add_argument("--strict", action="store_true", help="fail on any failing face, not only past a threshold")
    s.set_defaults(func=cmd_hypotheses)

    s = sub.add_parser("bounds", help="growth radii against the radius bounds")
    _common(s)
    s.add_argument("--bg", required=True)
    s.add_argument("-n", required=True, help="particle count or comma-separated list")
    s.add_argument("--eps", type=float, default=0.1)
    s.add_argument("--inner", action="store_true", help="check the inner ball containment")
    s.add_argument("--outer", action="store_true", help="check the outer ball containment (h <= d-1)")
    s.add_argument("--allowance", type=float, default=10.0)
    s.add_argument("--table", help="write growth records to CSV or JSON")
    s.set_defaults(func=cmd_bounds)

    s = sub.add_parser("boxes", help="robust boxes, one particle at a time")
    _common(s, scheduler=False)
    s.add_argument("--radii", required=True, help="increasing shell radii, e.g. 3,6,9")
    s.add_argument("--interior", type=int, default=3)
    s.add_argument("--shell", type=int, help="shell height (default 2d-2)")
    s.add_argument("-N", type=int, required=True)
    s.set_defaults(func=cmd_boxes)

    s = sub.add_parser("reduce", help="match a central slice against lower-dimensional piles")
    _common(s, scheduler=False)
    s.add_argument("-n", type=int, required=True)
    s.add_argument("--lam", type=float, default=0.5)
    s.add_argument("--m-range", help="LO,HI to scan instead of the mass-matched search")
    s.add_argument("--min-fraction", type=float, help="fail unless the best match fraction reaches this")
    s.set_defaults(func=cmd_reduce)

    s = sub.add_parser("render", help="render an SPG1 grid to PPM")
    s.add_argument("--grid", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--palette", default="fig1", help="fig1..fig4 or a palette JSON file")
    s.add_argument("--slice", action="append")
    s.set_defaults(func=cmd_render)

    s = sub.add_parser("verify-leastaction", help="check the explicit stabilizing functions")
    _common(s)
    s.add_argument("--h", type=int, default=2)
    s.add_argument("-n", type=int, required=True)
    s.add_argument("--eps", type=float, default=0.2)
    s.add_argument("--out-config", help="SPG1 dump of the configuration induced by the min candidate")
    s.set_defaults(func=cmd_verify_leastaction)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"sandlab: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        result, ok = args.func(args)
    except UsageError as exc:
        print(f"sandlab: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OverBudget as exc:
        result, ok = {"status": exc.result.status.value, "summary": exc.result.summary()}, True
    except (ValueError, OSError) as exc:
        print(f"sandlab: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    report = {"spg_report": REPORT_VERSION, "version": __version__, "config": _config(args).to_dict(),
              "passed": bool(ok), "result": result}
    if not args.timing:
        report = _strip_timing(report)
    print(json.dumps(_jsonable(report), indent=2, sort_keys=True))
    return EXIT_OK if ok else EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())
