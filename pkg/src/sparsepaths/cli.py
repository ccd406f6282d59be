"""Command-line entry point.

Subcommands: ``spmin``, ``policy``, ``dissim``, ``cluster``, and ``check``
(with sub-checks ``triangle``, ``duality``, ``convexity``, ``kkt``).
Structured JSON goes to stdout or the requested file; a short human
summary goes to stderr.  Exit codes: 0 success (and passing checks),
1 validation error or failing check, 2 solver non-convergence.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .cluster import load_labels, tune_parameter
from .dissim import (
    KINDS,
    dissimilarity_matrix,
    load_matrix_csv,
    save_matrix_csv,
    triangle_check,
)
from .dot import render_net_flows
from .errors import ConvergenceError, SparsePathsError
from .graph import (
    FROM_COLUMN,
    INVERSE_AFFINITY,
    Graph,
    load_edge_list,
    reference_probabilities,
)
from .rsp_kl import kl_policy_iterate
from .rsp_tsallis import (
    convexity_probe,
    expected_cost,
    expected_visits,
    tsallis_policy_iterate,
)
from .simplex import SimplexProblem, spmin, spmin_bisection, spmin_quadratic

SCHEMA = "sparsepaths/1"


class _ValidationError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # route argparse failures through the exit-code policy (1, not 2)
    def error(self, message):
        raise _ValidationError(message)


def _positive(flag):
    def convert(text):
        value = float(text)
        if not value > 0:
            raise argparse.ArgumentTypeError(
                f"{flag} must be positive, got {text}")
        return value
    return convert


def _float_list(flag):
    def convert(text):
        try:
            return [float(tok) for tok in text.split(",") if tok != ""]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(f"{flag}: {exc}") from None
    return convert


def _parse_grid(text):
    """A theta grid: 'A..B' for log-decade steps or a comma list."""
    if ".." in text:
        lo_text, hi_text = text.split("..", 1)
        lo, hi = float(lo_text), float(hi_text)
        if lo <= 0 or hi <= 0 or hi < lo:
            raise argparse.ArgumentTypeError(
                f"--grid endpoints must be positive and ordered, got {text}")
        num = int(round(np.log10(hi / lo))) + 1
        return [float(t) for t in np.logspace(np.log10(lo), np.log10(hi),
                                              num=max(num, 1))]
    values = [float(tok) for tok in text.split(",") if tok != ""]
    if not values:
        raise argparse.ArgumentTypeError("--grid must be non-empty")
    return values


def _parse_ref_vector(text):
    if text == "uniform":
        return "uniform"
    try:
        return [float(tok) for tok in text.split(",") if tok != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"--ref must be 'uniform' or a comma list, got {text!r}"
        ) from None


def _add_graph_flags(sub):
    sub.add_argument("--graph", required=True, help="edge-list file")
    sub.add_argument("--undirected", action="store_true",
                     help="mirror every edge")
    sub.add_argument("--cost", choices=["column", "inverse-affinity"],
                     default="column",
                     help="cost source: 4th column or 1/affinity")
    sub.add_argument("--ref", choices=["natural", "uniform"],
                     default="natural", help="reference transition kind")


def _load_graph(args):
    convention = FROM_COLUMN if args.cost == "column" else INVERSE_AFFINITY
    g = load_edge_list(args.graph, undirected=args.undirected,
                       cost_convention=convention)
    ref = reference_probabilities(g, args.ref)
    return g, ref


def build_parser() -> _Parser:
    parser = _Parser(prog="sparsepaths",
                     description="Sparse randomized shortest-path routing "
                                 "policies and node dissimilarities.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="key=value file of flag defaults; "
                                         "command-line flags override it")
    subs = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = subs.add_parser("spmin", help="one simplex projection")
    p.add_argument("--costs", required=True, type=_float_list("--costs"),
                   help="comma-separated costs")
    p.add_argument("--ref", default="uniform", type=_parse_ref_vector,
                   help="'uniform' or comma-separated reference weights")
    p.add_argument("--r", type=float, default=2.0, help="divergence order")
    p.add_argument("--T", type=_positive("--T"), default=1.0,
                   help="temperature")
    p.add_argument("--method", choices=["auto", "linear", "bisection"],
                   default="auto", help="solver variant")
    p.add_argument("--json", dest="json_path", metavar="FILE",
                   help="write JSON here instead of stdout")

    p = subs.add_parser("policy", help="solve one routing policy")
    _add_graph_flags(p)
    p.add_argument("--divergence", choices=["kl", "tsallis"],
                   default="tsallis")
    p.add_argument("--r", type=float, default=2.0, help="divergence order")
    p.add_argument("--theta", type=_positive("--theta"), default=1.0,
                   help="inverse temperature")
    p.add_argument("--target", required=True, help="absorbing target node")
    p.add_argument("--source", help="flow source node (default: first "
                                    "non-target node when flows are needed)")
    p.add_argument("--tol", type=_positive("--tol"), default=1e-10)
    p.add_argument("--max-iter", type=int, default=10000)
    p.add_argument("--dot", metavar="FILE", help="write net flows as DOT")
    p.add_argument("--json", dest="json_path", metavar="FILE",
                   help="write JSON here instead of stdout")

    p = subs.add_parser("dissim", help="pairwise dissimilarity matrix")
    _add_graph_flags(p)
    p.add_argument("--kind", choices=list(KINDS), required=True)
    p.add_argument("--r", type=float, default=2.0, help="divergence order")
    p.add_argument("--theta", type=_positive("--theta"), default=1.0,
                   help="inverse temperature")
    p.add_argument("--out", required=True, metavar="FILE",
                   help="CSV output path")
    p.add_argument("--jobs", type=int, default=None,
                   help="worker threads over targets (default: auto)")
    p.add_argument("--json", dest="json_path", metavar="FILE",
                   help="write JSON here instead of stdout")

    p = subs.add_parser("cluster", help="modularity-tuned clustering")
    _add_graph_flags(p)
    p.add_argument("--labels", help="ground-truth labels file")
    p.add_argument("--kind", choices=list(KINDS), default="tsallis-fe")
    p.add_argument("--r", type=float, default=2.0, help="divergence order")
    p.add_argument("--grid", type=_parse_grid,
                   default=_parse_grid("1e-4..1e5"),
                   help="theta grid: 'A..B' log decades or comma list")
    p.add_argument("--k", type=int, required=True, help="cluster count")
    p.add_argument("--restarts", type=int, default=30)
    p.add_argument("--repetitions", type=int, default=1,
                   help="outer averaging repetitions per grid value")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=None,
                   help="worker threads over grid values (default: auto)")
    p.add_argument("--report", metavar="FILE",
                   help="write the JSON report here instead of stdout")

    p = subs.add_parser("check", help="diagnostics and audits")
    checks = p.add_subparsers(dest="check", parser_class=_Parser)

    c = checks.add_parser("triangle", help="triangle-inequality audit")
    c.add_argument("matrix", help="dissimilarity CSV")
    c.add_argument("--slack", type=float, default=1e-9)
    c.add_argument("--json", dest="json_path", metavar="FILE")

    c = checks.add_parser("duality", help="duality gap of one policy")
    _add_graph_flags(c)
    c.add_argument("--target", required=True)
    c.add_argument("--r", type=float, default=2.0)
    c.add_argument("--theta", type=_positive("--theta"), default=1.0)
    c.add_argument("--tol", type=_positive("--tol"), default=1e-8)
    c.add_argument("--json", dest="json_path", metavar="FILE")

    c = checks.add_parser("convexity", help="random quadratic-form probe")
    c.add_argument("--m", type=int, default=20)
    c.add_argument("--samples", type=int, default=10000)
    c.add_argument("--r-min", type=float, default=1.1)
    c.add_argument("--r-max", type=float, default=4.1)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--tol", type=float, default=-1e-12,
                   help="pass when min relative eigenvalue >= this")
    c.add_argument("--json", dest="json_path", metavar="FILE")

    c = checks.add_parser("kkt", help="stationarity residual audit")
    c.add_argument("--costs", type=_float_list("--costs"),
                   help="audit one explicit instance")
    c.add_argument("--ref", default="uniform", type=_parse_ref_vector)
    c.add_argument("--r", type=float, default=2.0)
    c.add_argument("--T", type=_positive("--T"), default=1.0)
    c.add_argument("--instances", type=int, default=1000,
                   help="random instances when --costs is absent")
    c.add_argument("--m", type=int, default=10)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--tol", type=_positive("--tol"), default=1e-9)
    c.add_argument("--json", dest="json_path", metavar="FILE")
    return parser


def _apply_config(parser, argv):
    """Load key=value defaults from --config; flags still override."""
    if "--config" not in argv:
        return argv
    at = argv.index("--config")
    if at + 1 >= len(argv):
        raise _ValidationError("--config needs a file path")
    path = argv[at + 1]
    pairs = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise _ValidationError(
                        f"--config {path} line {lineno}: expected key=value")
                key, value = line.split("=", 1)
                pairs[key.strip()] = value.strip()
    except OSError as exc:
        raise _ValidationError(f"--config: {exc}") from None
    # locate the subcommand parsers actually in use
    rest = [a for i, a in enumerate(argv) if i not in (at, at + 1)]
    chain = [parser]
    scan = rest
    while scan:
        head = scan[0]
        actions = [a for a in chain[-1]._actions
                   if isinstance(a, argparse._SubParsersAction)]
        if actions and head in actions[0].choices:
            chain.append(actions[0].choices[head])
            scan = scan[1:]
            continue
        break
    for key, value in pairs.items():
        flag = "--" + key
        placed = False
        for sub in reversed(chain):
            action = next((a for a in sub._actions
                           if flag in a.option_strings), None)
            if action is None:
                continue
            if isinstance(action, argparse._StoreTrueAction):
                converted = value.lower() in ("1", "true", "yes", "on")
            elif action.type is not None:
                try:
                    converted = action.type(value)
                except (ValueError, argparse.ArgumentTypeError) as exc:
                    raise _ValidationError(
                        f"--config key {key!r}: {exc}") from None
            else:
                converted = value
            sub.set_defaults(**{action.dest: converted})
            placed = True
            break
        if not placed:
            raise _ValidationError(f"--config key {key!r} matches no flag")
    return rest


def _emit(payload: dict, json_path, summary: str) -> None:
    payload = {"schema": SCHEMA, **payload}
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if json_path:
        with open(json_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    print(summary, file=sys.stderr)


def _triplets(matrix) -> dict:
    coo = matrix.tocoo() if hasattr(matrix, "tocoo") else None
    if coo is None:
        dense = np.asarray(matrix)
        rows, cols = np.nonzero(dense)
        vals = dense[rows, cols]
    else:
        rows, cols, vals = coo.row, coo.col, coo.data
    order = np.lexsort((cols, rows))
    return {"rows": [int(x) for x in rows[order]],
            "cols": [int(x) for x in cols[order]],
            "values": [float(x) for x in vals[order]]}


def _cmd_spmin(args) -> int:
    costs = np.asarray(args.costs, dtype=float)
    if costs.size == 0:
        raise _ValidationError("--costs must be non-empty")
    if args.ref == "uniform":
        ref = np.full(costs.size, 1.0 / costs.size)
    else:
        ref = np.asarray(args.ref, dtype=float)
        if ref.size != costs.size:
            raise _ValidationError(
                f"--ref has {ref.size} entries, --costs has {costs.size}")
        total = ref.sum()
        if total <= 0:
            raise _ValidationError("--ref must have positive total mass")
        ref = ref / total
    problem = SimplexProblem(costs=costs, ref=ref, r=args.r, T=args.T)
    if args.method == "linear" and args.r != 2.0:
        raise _ValidationError("--method linear needs --r 2")
    solver = {"auto": spmin, "linear": spmin_quadratic,
              "bisection": spmin_bisection}[args.method]
    sol = solver(problem)
    _emit({"p": sol.p.tolist(), "mu": sol.mu,
           "support": [int(i) for i in sol.support],
           "kkt_residual": sol.kkt_residual,
           "r": args.r, "T": args.T},
          args.json_path,
          f"spmin: support {len(sol.support)}/{costs.size}, "
          f"mu={sol.mu:.6g}, residual={sol.kkt_residual:.3g}")
    return 0


def _cmd_policy(args) -> int:
    g, ref = _load_graph(args)
    t = g.index(args.target)
    if args.divergence == "tsallis":
        pol = tsallis_policy_iterate(g, ref, t, r=args.r, T=1.0 / args.theta,
                                     tol=args.tol, max_iter=args.max_iter)
        lam = pol.lam_ts
        payload = {"divergence": "tsallis", "r": args.r,
                   "duality_gap": pol.duality_gap}
    else:
        pol = kl_policy_iterate(g, ref, t, theta=args.theta, tol=args.tol,
                                max_iter=args.max_iter)
        lam = pol.lam
        payload = {"divergence": "kl"}
    payload.update({"theta": args.theta, "target": args.target,
                    "nodes": list(g.node_names),
                    "lambda": [float(x) for x in lam],
                    "iterations": pol.iterations,
                    "converged": pol.converged,
                    "P": _triplets(pol.P)})
    summary = (f"policy: {args.divergence} theta={args.theta:g} converged "
               f"in {pol.iterations} sweeps")
    if args.source is not None or args.dot is not None:
        source = args.source
        if source is None:
            source = next(name for name in g.node_names
                          if g.index(name) != t)
        flow = expected_visits(pol, g, source)
        payload["flows"] = {"source": source,
                            "node_visits": [float(x)
                                            for x in flow.node_visits],
                            "net_flows": _triplets(flow.net_flows),
                            "expected_cost": expected_cost(flow, g)}
        if args.dot is not None:
            render_net_flows(g, flow, args.dot)
            summary += f"; DOT written to {args.dot}"
    _emit(payload, args.json_path, summary)
    return 0


def _cmd_dissim(args) -> int:
    g, ref = _load_graph(args)
    D = dissimilarity_matrix(g, ref, args.kind, r=args.r, theta=args.theta,
                             jobs=args.jobs)
    save_matrix_csv(D, args.out)
    _emit({"kind": args.kind, "r": args.r, "theta": args.theta, "n": g.n,
           "out": args.out, "max": float(D.D.max()),
           "mean": float(D.D.mean())},
          args.json_path,
          f"dissim: {args.kind} ({g.n}x{g.n}) written to {args.out}")
    return 0


def _cmd_cluster(args) -> int:
    convention = FROM_COLUMN if args.cost == "column" else INVERSE_AFFINITY
    g = load_edge_list(args.graph, undirected=args.undirected,
                       cost_convention=convention)
    labels = load_labels(args.labels, g) if args.labels else None
    result = tune_parameter(g, args.kind, args.r, args.grid, args.k,
                            restarts=args.restarts, seed=args.seed,
                            labels=labels, ref_kind=args.ref, jobs=args.jobs,
                            repetitions=args.repetitions)
    scores = {"modularity": result.scores.modularity}
    if labels is not None:
        scores["nmi"] = result.scores.nmi
        scores["ari"] = result.scores.ari
    assignment = {name: int(c) for name, c in
                  zip(g.node_names, result.partition.assignment)}
    _emit({"kind": args.kind, "r": args.r, "k": args.k, "seed": args.seed,
           "grid": list(args.grid), "best_theta": result.best_theta,
           "scores": scores, "assignment": assignment,
           "collapsed": result.partition.collapsed,
           "per_theta": list(result.per_theta),
           "warnings": list(result.warnings)},
          args.report,
          f"cluster: best theta={result.best_theta:g} "
          f"modularity={result.scores.modularity:.4f}"
          + (f" ari={result.scores.ari:.4f}" if labels is not None else ""))
    return 0


def _cmd_check_triangle(args) -> int:
    D, names = load_matrix_csv(args.matrix)
    report = triangle_check(D, slack=args.slack)
    ok = report["violations"] == 0
    _emit({"matrix": args.matrix, "n": len(names), "slack": args.slack,
           "violations": report["violations"],
           "worst_slack": report["worst_slack"], "pass": ok},
          args.json_path,
          f"triangle: {report['violations']} violations "
          f"(worst slack {report['worst_slack']:.3g})")
    return 0 if ok else 1


def _cmd_check_duality(args) -> int:
    g, ref = _load_graph(args)
    pol = tsallis_policy_iterate(g, ref, args.target, r=args.r,
                                 T=1.0 / args.theta)
    ok = pol.duality_gap <= args.tol
    _emit({"target": args.target, "r": args.r, "theta": args.theta,
           "duality_gap": pol.duality_gap, "tol": args.tol,
           "iterations": pol.iterations, "pass": ok},
          args.json_path,
          f"duality: gap={pol.duality_gap:.3g} (tol {args.tol:g})")
    return 0 if ok else 1


def _cmd_check_convexity(args) -> int:
    report = convexity_probe(m=args.m, samples=args.samples,
                             r_range=(args.r_min, args.r_max),
                             rng_seed=args.seed)
    ok = report["min_relative_eigenvalue"] >= args.tol
    _emit({**report, "tol": args.tol, "pass": ok}, args.json_path,
          f"convexity: min relative eigenvalue "
          f"{report['min_relative_eigenvalue']:.3g} over "
          f"{args.samples} samples")
    return 0 if ok else 1


def _cmd_check_kkt(args) -> int:
    worst = 0.0
    if args.costs is not None:
        costs = np.asarray(args.costs, dtype=float)
        if args.ref == "uniform":
            ref = np.full(costs.size, 1.0 / costs.size)
        else:
            ref = np.asarray(args.ref, dtype=float)
            ref = ref / ref.sum()
        sol = spmin(SimplexProblem(costs=costs, ref=ref, r=args.r, T=args.T))
        worst = sol.kkt_residual
        count = 1
    else:
        rng = np.random.default_rng(args.seed)
        if args.instances < 1 or args.m < 2:
            raise _ValidationError("--instances and --m must be positive")
        for _ in range(args.instances):
            costs = rng.uniform(0.0, 10.0, args.m)
            ref = rng.dirichlet(np.ones(args.m))
            r = rng.uniform(1.2, 4.1)
            T = 10.0 ** rng.uniform(-2.0, 2.0)
            sol = spmin(SimplexProblem(costs=costs, ref=ref, r=r, T=T))
            worst = max(worst, sol.kkt_residual)
        count = args.instances
    ok = worst <= args.tol
    _emit({"instances": count, "worst_residual": worst, "tol": args.tol,
           "pass": ok},
          args.json_path,
          f"kkt: worst residual {worst:.3g} over {count} instances")
    return 0 if ok else 1


_COMMANDS = {
    "spmin": _cmd_spmin,
    "policy": _cmd_policy,
    "dissim": _cmd_dissim,
    "cluster": _cmd_cluster,
}
_CHECKS = {
    "triangle": _cmd_check_triangle,
    "duality": _cmd_check_duality,
    "convexity": _cmd_check_convexity,
    "kkt": _cmd_check_kkt,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config(parser, argv)
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            print("error: a subcommand is required", file=sys.stderr)
            return 1
        if args.command == "check":
            if args.check is None:
                print("error: check needs one of: triangle, duality, "
                      "convexity, kkt", file=sys.stderr)
                return 1
            return _CHECKS[args.check](args)
        return _COMMANDS[args.command](args)
    except _ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SparsePathsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
