"""Command-line interface.

    sips net gen --kind scale-free --n 100 --seed 7 -o net.json
    sips net validate net.json
    sips analyze net.json --model linear
    sips classify --net net.json --model linear
    sips ode run --net net.json --model linear --init init.json --T 50 -o traj.csv
    sips exact run --net net.json --init "i:3,p:7" --T 50 --paths 10000 \
        --seed 42 --grid 200 -o avg.csv
    sips sweep --config sweep.json -o outdir/
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import dynamics, equilibria, exactsim, harness, netmodel
from .netmodel import RateRanges
from .rates import build_model


def _add_range_options(parser: argparse.ArgumentParser) -> None:
    defaults = netmodel.DEFAULT_RATE_RANGES
    for name in ("beta", "delta1", "delta2", "gamma", "alpha"):
        parser.add_argument(
            f"--{name}-range", nargs=2, type=float, metavar=("LO", "HI"),
            default=list(getattr(defaults, name)),
            help=f"uniform sampling range for {name} (default %(default)s)")


def _ranges_from_args(args) -> RateRanges:
    return RateRanges(
        beta=tuple(args.beta_range), delta1=tuple(args.delta1_range),
        delta2=tuple(args.delta2_range), gamma=tuple(args.gamma_range),
        alpha=tuple(args.alpha_range))


def _add_model_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--model", default="linear",
        choices=["linear", "exp_saturating", "rational_saturating"],
        help="rate-function family (default %(default)s)")
    parser.add_argument(
        "--saturation", type=float, default=None,
        help="per-node family parameter, broadcast to all nodes "
             "(ceiling for exp_saturating, curvature for rational_saturating)")
    parser.add_argument(
        "--g-equals-h", choices=["auto", "yes", "no"], default="auto",
        help="whether the two patching channels are the same function "
             "(auto: detect from the matrices)")


def _model_from_args(net, args):
    geh = {"auto": None, "yes": True, "no": False}[args.g_equals_h]
    return build_model(net, args.model, f_param=args.saturation,
                       g_param=args.saturation, h_param=args.saturation,
                       g_equals_h=geh)


def _parse_node_spec(text: str, n: int) -> tuple[list[int], list[int]]:
    """Parse "i:3,p:7" style node lists."""
    infected: list[int] = []
    patched: list[int] = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        try:
            tag, value = token.split(":")
            node = int(value)
        except ValueError:
            raise ValueError(f"bad init token {token!r}: expected i:<id> or p:<id>")
        if not 0 <= node < n:
            raise ValueError(f"init node {node} out of range 0..{n - 1}")
        if tag == "i":
            infected.append(node)
        elif tag == "p":
            patched.append(node)
        else:
            raise ValueError(f"bad init tag {tag!r}: expected 'i' or 'p'")
    return infected, patched


def _initial_state(init: str, n: int) -> dynamics.PopulationState:
    path = Path(init)
    if path.is_file():
        doc = json.loads(path.read_text())
        if "I" in doc or "P" in doc:
            return dynamics.PopulationState(
                np.asarray(doc.get("I", np.zeros(n)), dtype=float),
                np.asarray(doc.get("P", np.zeros(n)), dtype=float))
        return dynamics.PopulationState.from_nodes(
            n, doc.get("infected", ()), doc.get("patched", ()))
    infected, patched = _parse_node_spec(init, n)
    return dynamics.PopulationState.from_nodes(n, infected, patched)


def _cmd_net_gen(args) -> int:
    ranges = _ranges_from_args(args)
    if args.kind == "scale-free":
        net = netmodel.generate_scale_free(
            args.n, args.attach, ranges, seed=args.seed,
            independent_layers=args.independent_layers)
    else:
        net = netmodel.generate_small_world(
            args.n, args.k, args.rewire_p, ranges, seed=args.seed,
            independent_layers=args.independent_layers)
    netmodel.save(net, args.output)
    print(f"wrote {args.output} (n={net.n})")
    return 0


def _cmd_net_validate(args) -> int:
    net = netmodel.load(args.network, require_strongly_connected=False)
    report = netmodel.validate(net)
    for check in report.checks:
        status = "ok  " if check.passed else "FAIL"
        detail = f"  ({check.detail})" if check.detail and not check.passed else ""
        print(f"{status} {check.name}{detail}")
    return 0 if report.ok else 1


def _cmd_analyze(args) -> int:
    net = netmodel.load(args.network)
    model = _model_from_args(net, args)
    report = equilibria.full_spectral_report(model)
    print(json.dumps(report.to_dict(), indent=2))
    return 0


def _cmd_classify(args) -> int:
    net = netmodel.load(args.net)
    model = _model_from_args(net, args)
    report = equilibria.classify(model)
    print(json.dumps(report.to_dict(), indent=2))
    return 0


def _cmd_ode_run(args) -> int:
    net = netmodel.load(args.net)
    model = _model_from_args(net, args)
    state0 = _initial_state(args.init, net.n)
    traj = dynamics.integrate(model, state0, args.T, dt=args.dt,
                              grid_points=args.grid)
    harness.write_trajectory_csv(args.output, traj)
    print(f"wrote {args.output} ({args.grid} grid points)")
    return 0


def _cmd_exact_run(args) -> int:
    net = netmodel.load(args.net,
                        require_strongly_connected=not args.allow_reducible)
    infected, patched = _parse_node_spec(args.init, net.n)
    x0 = exactsim.ChainState.from_nodes(net.n, infected, patched)
    traj = exactsim.gillespie(net, x0, args.T, args.paths, seed=args.seed,
                              grid_points=args.grid, workers=args.workers)
    harness.write_trajectory_csv(args.output, traj)
    print(f"wrote {args.output} ({args.paths} paths)")
    return 0


def _cmd_sweep(args) -> int:
    cfg = harness.ExperimentConfig.from_json(args.config)
    if args.workers is not None:
        cfg = harness.ExperimentConfig.from_dict(
            {**cfg.to_dict(), "workers": args.workers})
    report = harness.run_sweep(cfg, progress=not args.quiet)
    harness.emit_report(report, args.output)
    summary = report.collection_summary()
    print(json.dumps(summary, indent=2))
    failures = summary["errors"]
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sips",
        description="Simulate and analyze virus-patch dynamics on directed "
                    "networks")
    sub = parser.add_subparsers(dest="command", required=True)

    p_net = sub.add_parser("net", help="generate or validate networks")
    net_sub = p_net.add_subparsers(dest="net_command", required=True)

    p_gen = net_sub.add_parser("gen", help="generate a random network")
    p_gen.add_argument("--kind", required=True,
                       choices=["scale-free", "small-world"])
    p_gen.add_argument("--n", type=int, required=True)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--attach", type=int, default=3,
                       help="edges per new node (scale-free)")
    p_gen.add_argument("--k", type=int, default=6,
                       help="ring-lattice degree (small-world)")
    p_gen.add_argument("--rewire-p", type=float, default=0.1,
                       help="rewiring probability (small-world)")
    p_gen.add_argument("--independent-layers", action="store_true",
                       help="draw a separate topology for the patch layer")
    _add_range_options(p_gen)
    p_gen.add_argument("-o", "--output", required=True)
    p_gen.set_defaults(func=_cmd_net_gen)

    p_val = net_sub.add_parser("validate", help="check network invariants")
    p_val.add_argument("network")
    p_val.set_defaults(func=_cmd_net_validate)

    p_analyze = sub.add_parser("analyze",
                               help="spectral report of the threshold matrices")
    p_analyze.add_argument("network")
    _add_model_options(p_analyze)
    p_analyze.set_defaults(func=_cmd_analyze)

    p_classify = sub.add_parser("classify", help="predict the asymptotic regime")
    p_classify.add_argument("--net", required=True)
    _add_model_options(p_classify)
    p_classify.set_defaults(func=_cmd_classify)

    p_ode = sub.add_parser("ode", help="node-level ODE tier")
    ode_sub = p_ode.add_subparsers(dest="ode_command", required=True)
    p_ode_run = ode_sub.add_parser("run", help="integrate a trajectory")
    p_ode_run.add_argument("--net", required=True)
    _add_model_options(p_ode_run)
    p_ode_run.add_argument("--init", required=True,
                           help='JSON state file or "i:3,p:7" node list')
    p_ode_run.add_argument("--T", type=float, required=True)
    p_ode_run.add_argument("--dt", type=float, default=None)
    p_ode_run.add_argument("--grid", type=int, default=201)
    p_ode_run.add_argument("-o", "--output", required=True)
    p_ode_run.set_defaults(func=_cmd_ode_run)

    p_exact = sub.add_parser("exact", help="exact-chain tier")
    exact_sub = p_exact.add_subparsers(dest="exact_command", required=True)
    p_exact_run = exact_sub.add_parser("run", help="average sample paths")
    p_exact_run.add_argument("--net", required=True)
    p_exact_run.add_argument("--init", required=True,
                             help='node list like "i:3,p:7"')
    p_exact_run.add_argument("--T", type=float, required=True)
    p_exact_run.add_argument("--paths", type=int, default=10_000)
    p_exact_run.add_argument("--seed", type=int, default=0)
    p_exact_run.add_argument("--grid", type=int, default=200)
    p_exact_run.add_argument("--workers", type=int, default=1)
    p_exact_run.add_argument("--allow-reducible", action="store_true",
                             help="admit networks whose layers are not "
                                  "strongly connected")
    p_exact_run.add_argument("-o", "--output", required=True)
    p_exact_run.set_defaults(func=_cmd_exact_run)

    p_sweep = sub.add_parser("sweep", help="run a comparison sweep")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("-o", "--output", required=True)
    p_sweep.add_argument("--workers", type=int, default=None,
                         help="override the config's worker count")
    p_sweep.add_argument("--quiet", action="store_true")
    p_sweep.set_defaults(func=_cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
