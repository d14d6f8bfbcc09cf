"""Command-line front end: gen, solve, ap, backbone, sweep, rescale, crossover, plot."""
from __future__ import annotations

import argparse
import json
import os
import sys

from . import experiments
from .assignment import solve_ap
from .backbone import backbone_fraction, enumerate_optimal_tours
from .instances import InstanceSpec, generate, read_instance, write_instance
from .solver import solve_atsp


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage problems, not argparse's 2
        raise _UsageError(message)


def _build_parser() -> _Parser:
    p = _Parser(prog="atsplab", description="ATSP precision-transition toolkit")
    sub = p.add_subparsers(dest="verb", required=True)

    g = sub.add_parser("gen", help="generate a random instance file")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--digits", type=float, required=True)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--index", type=int, default=0)
    g.add_argument("--out", required=True)

    s = sub.add_parser("solve", help="solve an instance file exactly")
    s.add_argument("--in", dest="path", required=True)
    s.add_argument("--json", action="store_true")

    a = sub.add_parser("ap", help="assignment relaxation of an instance file")
    a.add_argument("--in", dest="path", required=True)

    b = sub.add_parser("backbone", help="backbone fraction of an instance file")
    b.add_argument("--in", dest="path", required=True)
    b.add_argument("--enumerate", action="store_true", dest="enum")
    b.add_argument("--cap", type=int, default=1_000_000)

    w = sub.add_parser("sweep", help="run an (n, digits) ensemble sweep to CSV")
    w.add_argument("--sizes", required=True, help="comma-separated city counts")
    w.add_argument("--digits", required=True, help="grid start:stop:step")
    w.add_argument("--instances", type=int, required=True)
    w.add_argument("--seed", type=int, required=True)
    w.add_argument("--measures", default="rho", help="comma-separated measure names")
    w.add_argument("--out", required=True)
    w.add_argument("--workers", type=int, default=None)
    w.add_argument("--optima-cap", type=int, default=1_000_000)
    w.add_argument("--plot-dir", default=None, help="also render figures into this directory")

    r = sub.add_parser("rescale", help="attach the rescaled coordinate to a sweep CSV")
    r.add_argument("--in", dest="path", required=True)
    r.add_argument("--beta-c", type=float, required=True)
    r.add_argument("--out", required=True)

    c = sub.add_parser("crossover", help="estimate the crossing point of per-size curves")
    c.add_argument("--in", dest="path", required=True)
    c.add_argument("--measure", required=True)

    f = sub.add_parser("plot", help="render figures from a sweep CSV")
    f.add_argument("--in", dest="path", required=True)
    f.add_argument("--out-dir", required=True)
    f.add_argument("--beta-c", type=float, default=None)
    return p


def result_to_json(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def _cmd_gen(args) -> int:
    spec = InstanceSpec(n=args.n, digits=args.digits, seed=args.seed, index=args.index)
    write_instance(generate(spec), args.out)
    return 0


def _cmd_solve(args) -> int:
    d = read_instance(args.path)
    res = solve_atsp(d)
    tour = res.tour.order.tolist()
    if args.json:
        payload = {
            "n": d.n,
            "R": d.range_size,
            "b": d.digits,
            "cost": res.cost,
            "tour": tour,
            "ap_cost": res.root_ap_cost,
            "ap_calls": res.metrics.ap_calls,
            "nodes_expanded": res.metrics.nodes_expanded,
            "wall_ms": res.metrics.wall_time * 1000.0,
        }
        print(result_to_json(payload))
    else:
        print(f"cost {res.cost}")
        print("tour " + " ".join(str(c) for c in tour))
        print(f"ap_cost {res.root_ap_cost}")
        print(f"ap_calls {res.metrics.ap_calls}")
        print(f"nodes {res.metrics.nodes_expanded}")
    return 0


def _cmd_ap(args) -> int:
    d = read_instance(args.path)
    a = solve_ap(d)
    print(f"ap_cost {a.cost}")
    print(f"cycles {len(a.cycles)}")
    for cyc in a.cycles:
        print("cycle " + " ".join(str(i) for i, _ in cyc))
    return 0


def _cmd_backbone(args) -> int:
    d = read_instance(args.path)
    report = backbone_fraction(d)
    print(f"cost {report.optimal_cost}")
    print(f"fraction {report.fraction:.6g}")
    print("arcs " + " ".join(f"{i}>{j}" for i, j in report.backbone_arcs))
    if args.enum:
        enum = enumerate_optimal_tours(d, cap=args.cap, keep_tours=False)
        print(f"optima_count {enum.count}")
        print(f"optima_saturated {int(enum.saturated)}")
    return 0


def _parse_grid(text: str) -> tuple[float, float, float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise _UsageError(f"digits grid must be start:stop:step, got {text!r}")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError:
        raise _UsageError(f"digits grid must be numeric, got {text!r}") from None
    if step <= 0 or stop < start:
        raise _UsageError(f"invalid digits grid {text!r}")
    return start, stop, step


def _cmd_sweep(args) -> int:
    try:
        sizes = [int(s) for s in args.sizes.split(",") if s]
    except ValueError:
        raise _UsageError(f"sizes must be integers, got {args.sizes!r}") from None
    measures = tuple(m for m in args.measures.split(",") if m)
    unknown = [m for m in measures if m not in experiments.MEASURES]
    if unknown:
        raise _UsageError(f"unknown measures {unknown}")
    grid = _parse_grid(args.digits)
    workers = args.workers
    if workers is None:
        workers = int(os.environ.get("ATSPLAB_WORKERS", "1"))
    try:
        cfg = experiments.SweepConfig(
            sizes=sizes,
            digits_grid=grid,
            instances_per_point=args.instances,
            master_seed=args.seed,
            measures=measures,
            optima_cap=args.optima_cap,
            workers=workers,
        )
    except ValueError as exc:
        raise _UsageError(str(exc)) from None
    rows = experiments.run_sweep(cfg)
    experiments.write_rows_csv(rows, args.out, measures)
    if args.plot_dir is not None:
        from .plots import render_sweep_figures

        render_sweep_figures(rows, measures, args.plot_dir)
    return 0


def _cmd_rescale(args) -> int:
    rows, measures = experiments.read_rows_csv(args.path)
    rows = experiments.rescale_table(rows, args.beta_c)
    experiments.write_rows_csv(rows, args.out, measures)
    return 0


def _cmd_crossover(args) -> int:
    rows, measures = experiments.read_rows_csv(args.path)
    if args.measure not in measures:
        raise _UsageError(f"measure {args.measure!r} not in CSV (has {list(measures)})")
    curves: dict[int, list[tuple[float, float]]] = {}
    for r in rows:
        curves.setdefault(r.n, []).append((r.beta, r.mean(args.measure)))
    if len(curves) < 2:
        raise _UsageError("crossover needs at least two sizes in the CSV")
    est = experiments.estimate_crossover(curves)
    if est.beta_c is None:
        print("beta_c none")
    else:
        print(f"beta_c {est.beta_c:.6g}")
    print(f"spread {est.spread:.6g}")
    print(f"pairs {len(est.pairs)}")
    if est.degenerate:
        print("degenerate 1")
    return 0


def _cmd_plot(args) -> int:
    from .plots import render_sweep_figures

    rows, measures = experiments.read_rows_csv(args.path)
    render_sweep_figures(rows, measures, args.out_dir, beta_c=args.beta_c)
    return 0


_DISPATCH = {
    "gen": _cmd_gen,
    "solve": _cmd_solve,
    "ap": _cmd_ap,
    "backbone": _cmd_backbone,
    "sweep": _cmd_sweep,
    "rescale": _cmd_rescale,
    "crossover": _cmd_crossover,
    "plot": _cmd_plot,
}


def run(argv: list[str]) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return 0 if exc.code in (0, None) else 1
    try:
        return _DISPATCH[args.verb](args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, experiments.SweepError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
