"""Command-line entry point for the seed-selection pipeline.

With ``--out DIR`` every subcommand writes its outputs plus a single
``manifest.json`` recording parameters, input and output hashes, version
and wall-clock time. Without it, the primary output goes to stdout.

Every flag can be set from the environment as ``DTIM_<FLAG>`` (dashes
become underscores, e.g. ``DTIM_RNG_SEED=7``); command-line values win.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from importlib import metadata
from pathlib import Path
from typing import Sequence

from . import metrics, ris
from .errors import DTIMError
from .fixtures import NAMES, example2
from .graph import centrality_stats, dumps_edge_list, load_edge_list
from .greedy import DEFAULT_ETA, SelectionConfig, dtim_select
from .lurkerrank import DEFAULT_DAMPING, DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE, dumps_ranks, load_ranks, lurker_rank
from .simulate import DEFAULT_RUNS, default_workers, estimate_capital
from .weights import (
    DiffusionGraph,
    build_diffusion_graph,
    dumps_diffusion_graph,
    load_diffusion_graph,
    select_targets,
)

ENV_PREFIX = "DTIM_"
DEFAULT_L_PERC = 25.0
DEFAULT_MAX_THETA = 2_000_000

logger = logging.getLogger("dtim")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _unit(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"expected a value in [0, 1], got {text}")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x]


def _int_list(text: str) -> list[int]:
    return [_positive_int(x) for x in text.split(",") if x]


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def _sha256(path: str | os.PathLike) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class Run:
    """Collects outputs of one subcommand and writes them with a manifest."""

    def __init__(self, args: argparse.Namespace, inputs: Sequence[str]):
        self.args = args
        self.inputs = [p for p in inputs if p]
        self.outputs: dict[str, str] = {}
        self.start = time.perf_counter()

    def emit(self, name: str, text: str, primary: bool = False) -> None:
        out = self.args.out
        if out is None:
            if primary:
                sys.stdout.write(text)
            return
        path = Path(out) / name
        path.write_text(text, encoding="utf-8")
        self.outputs[name] = _sha256(path)

    def finish(self) -> None:
        if self.args.out is None:
            return
        params = {
            k: v
            for k, v in vars(self.args).items()
            if k not in ("func", "out") and not callable(v)
        }
        manifest = {
            "subcommand": self.args.command,
            "parameters": params,
            "inputs": {p: _sha256(p) for p in self.inputs},
            "outputs": self.outputs,
            "version": _version(),
            "duration_seconds": round(time.perf_counter() - self.start, 6),
        }
        path = Path(self.args.out) / "manifest.json"
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")


def _targets(dg: DiffusionGraph, args: argparse.Namespace):
    if args.L is not None:
        return select_targets(dg.node_weight, threshold=args.L)
    return select_targets(dg.node_weight, percentage=args.L_perc)


def _read_seeds(path: str, dg: DiffusionGraph) -> list[int]:
    """Seed labels, one per line, or the rank-prefixed selection output."""
    seeds = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            label = parts[1] if len(parts) >= 5 else parts[0]
            seeds.append(dg.graph.index_of(int(label)))
    return seeds


def cmd_ingest(args: argparse.Namespace) -> int:
    run = Run(args, [args.edges])
    g = load_edge_list(args.edges)
    run.emit("graph.edges", dumps_edge_list(g))
    summary = (
        f"nodes {g.node_count}\nedges {g.edge_count}\n"
        f"duplicates_dropped {g.dropped.duplicates}\nself_loops_dropped {g.dropped.self_loops}\n"
    )
    run.emit("summary.txt", summary, primary=True)
    if args.centrality:
        cs = centrality_stats(g)
        lines = ["node\toutdegree\tbetweenness\tcoreness\n"]
        for v in range(g.node_count):
            lines.append(f"{g.labels[v]}\t{cs.outdegree[v]}\t{cs.betweenness[v]:.17g}\t{cs.coreness[v]}\n")
        run.emit("centrality.tsv", "".join(lines))
    run.finish()
    return 0


def cmd_rank(args: argparse.Namespace) -> int:
    run = Run(args, [args.graph])
    g = load_edge_list(args.graph)
    ranks = lurker_rank(g, args.damping, args.tolerance, args.max_iterations)
    logger.info("converged in %d iterations", ranks.iterations_used)
    run.emit("ranks.txt", dumps_ranks(g, ranks), primary=True)
    run.finish()
    return 0


def cmd_weight(args: argparse.Namespace) -> int:
    run = Run(args, [args.graph, args.ranks])
    g = load_edge_list(args.graph)
    if args.ranks:
        ranks = load_ranks(g, args.ranks)
    else:
        ranks = lurker_rank(g, args.damping)
    dg = build_diffusion_graph(g, ranks, args.epsilon_r)
    run.emit("diffusion.txt", dumps_diffusion_graph(dg), primary=True)
    run.finish()
    return 0


def cmd_targets(args: argparse.Namespace) -> int:
    run = Run(args, [args.diffusion])
    dg = load_diffusion_graph(args.diffusion)
    ts = _targets(dg, args)
    text = f"# threshold {ts.threshold_used:.17g}\n" + "".join(f"{dg.graph.labels[v]}\n" for v in ts.sorted())
    run.emit("targets.txt", text, primary=True)
    run.finish()
    return 0


def cmd_select(args: argparse.Namespace) -> int:
    run = Run(args, [args.diffusion])
    dg = load_diffusion_graph(args.diffusion)
    ts = _targets(dg, args)
    res = dtim_select(dg, ts, SelectionConfig(args.k, args.alpha, args.eta, args.variant))
    if res.status != "complete":
        logger.warning("selection stopped early: %s", res.status)
    run.emit("seeds.txt", res.dumps(dg.graph.labels), primary=True)
    run.emit("diversity.txt", res.diversity_table.dumps(dg.graph.labels))
    run.finish()
    return 0


def cmd_ris_select(args: argparse.Namespace) -> int:
    run = Run(args, [args.diffusion])
    dg = load_diffusion_graph(args.diffusion)
    ts = _targets(dg, args)
    pool = None
    if args.pool_cache and os.path.exists(args.pool_cache):
        pool, cached_seed = ris.load_pool(args.pool_cache, dg, ts)
        if cached_seed != args.rng_seed:
            logger.warning("cached pool was sampled with rng seed %d", cached_seed)
        run.inputs.append(args.pool_cache)
    max_theta = args.max_theta or None
    result = ris.ris_select(
        dg, ts, args.k, args.alpha, args.variant, args.epsilon, args.rng_seed, max_theta, pool
    )
    if max_theta and result.kpt.theta >= max_theta:
        logger.warning("theta capped at %d", max_theta)
    if args.pool_cache and pool is None:
        ris.save_pool(args.pool_cache, result.pool, dg.content_hash(), args.rng_seed)
    if result.seeds.status != "complete":
        logger.warning("selection stopped early: %s", result.seeds.status)
    run.emit("seeds.txt", result.seeds.dumps(dg.graph.labels), primary=True)
    k = result.kpt
    run.emit(
        "kpt.txt",
        f"kpt {k.kpt:.17g}\nrefined_kpt {k.refined_kpt:.17g}\ntheta {k.theta}\n"
        f"epsilon {k.epsilon:.17g}\nlambda {k.lambda_:.17g}\npool_size {result.pool_size}\n",
    )
    run.finish()
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    run = Run(args, [args.diffusion, args.seeds])
    dg = load_diffusion_graph(args.diffusion)
    ts = _targets(dg, args)
    seeds = _read_seeds(args.seeds, dg)
    rep = estimate_capital(dg, seeds, ts, args.runs, args.rng_seed, args.threads)
    run.emit("simulation.txt", rep.dumps(dg.graph.labels), primary=True)
    run.finish()
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    run = Run(args, [args.diffusion])
    dg = load_diffusion_graph(args.diffusion)
    ts = _targets(dg, args)
    table = metrics.sweep(
        dg, ts, args.alphas, args.ks, args.variant, args.eta, args.runs, args.rng_seed, args.threads
    )
    run.emit("sweep.tsv", table.dumps(dg.graph.labels), primary=True)
    run.finish()
    return 0


def cmd_overlap(args: argparse.Namespace) -> int:
    inputs = list(args.seed_files) + ([args.graph] if args.graph else [])
    run = Run(args, inputs)
    sets = []
    for path in args.seed_files:
        with open(path, encoding="utf-8") as fh:
            rows = [ln.split() for ln in fh if ln.strip() and not ln.startswith("#")]
        sets.append([int(r[1]) if len(r) >= 5 else int(r[0]) for r in rows])
    labels = list(args.seed_files)
    run.emit("overlap.tsv", metrics.overlap_matrix(labels, sets).dumps(), primary=True)
    if args.graph:
        g = load_edge_list(args.graph)
        cs = centrality_stats(g)
        lines = ["run\tcv_outdegree\tcv_betweenness\tcv_coreness\n"]
        for lab, seeds in zip(labels, sets):
            idx = [g.index_of(s) for s in seeds]
            cvs = []
            for values in (cs.outdegree, cs.betweenness, cs.coreness):
                try:
                    cvs.append(f"{metrics.coefficient_of_variation([values[i] for i in idx]):.17g}")
                except (ZeroDivisionError, ValueError):
                    cvs.append("nan")
            lines.append("\t".join([lab, *cvs]) + "\n")
        run.emit("centrality_cv.tsv", "".join(lines))
    run.finish()
    return 0


def cmd_example2(args: argparse.Namespace) -> int:
    run = Run(args, [])
    dg, ts = example2()
    variants = ["global", "local"] if args.variant == "both" else [args.variant]
    lines = []
    for variant in variants:
        res = dtim_select(dg, ts, SelectionConfig(1, 0.5, 0.0, variant))
        prefix = "" if len(variants) == 1 else f"{variant} "
        lines.append(f"{prefix}seed: {NAMES[res.seeds[0]]}\n")
    run.emit("example2.txt", "".join(lines), primary=True)
    if args.out is not None:
        sys.stdout.write("".join(lines))
    run.finish()
    return 0


def _add_targets(p: argparse.ArgumentParser) -> None:
    group = p.add_mutually_exclusive_group()
    group.add_argument("--L", type=float, default=None, help="absolute target threshold on ell")
    group.add_argument("--L-perc", type=_positive_float, default=DEFAULT_L_PERC, help="top percentage of nodes by ell")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=None, help="output directory (created if missing)")
    common.add_argument("--threads", type=_positive_int, default=default_workers(), help="worker processes")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="dtim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help: str) -> argparse.ArgumentParser:
        return sub.add_parser(name, parents=[common], help=help)

    p = add("ingest", help="normalize an edge list")
    p.add_argument("edges")
    p.add_argument("--centrality", action="store_true", help="also export outdegree, betweenness, coreness")
    p.set_defaults(func=cmd_ingest)

    p = add("rank", help="LurkerRank scores")
    p.add_argument("graph")
    p.add_argument("--damping", type=_unit, default=DEFAULT_DAMPING)
    p.add_argument("--tolerance", type=_positive_float, default=DEFAULT_TOLERANCE)
    p.add_argument("--max-iterations", type=_positive_int, default=DEFAULT_MAX_ITERATIONS)
    p.set_defaults(func=cmd_rank)

    p = add("weight", help="build the diffusion graph")
    p.add_argument("graph")
    p.add_argument("--ranks", default=None, help="rank file; computed when omitted")
    p.add_argument("--damping", type=_unit, default=DEFAULT_DAMPING)
    p.add_argument("--epsilon-r", type=_positive_float, default=None)
    p.set_defaults(func=cmd_weight)

    p = add("targets", help="list target nodes")
    p.add_argument("diffusion")
    _add_targets(p)
    p.set_defaults(func=cmd_targets)

    p = add("select", help="greedy seed selection")
    p.add_argument("diffusion")
    p.add_argument("--k", type=_positive_int, required=True)
    p.add_argument("--alpha", type=_unit, default=0.5)
    p.add_argument("--eta", type=_unit, default=DEFAULT_ETA)
    p.add_argument("--variant", choices=("local", "global"), default="global")
    _add_targets(p)
    p.set_defaults(func=cmd_select)

    p = add("ris-select", help="seed selection by reverse influence sampling")
    p.add_argument("diffusion")
    p.add_argument("--k", type=_positive_int, required=True)
    p.add_argument("--alpha", type=_unit, default=0.5)
    p.add_argument("--variant", choices=("local", "global", "capital-only"), default="global")
    p.add_argument("--epsilon", type=_positive_float, default=ris.DEFAULT_EPSILON)
    p.add_argument("--rng-seed", type=int, default=0)
    p.add_argument("--max-theta", type=int, default=DEFAULT_MAX_THETA, help="cap on RR sets; 0 disables")
    p.add_argument("--pool-cache", default=None, help="binary RR-set cache, reused when present")
    _add_targets(p)
    p.set_defaults(func=cmd_ris_select)

    p = add("simulate", help="Monte Carlo capital of a seed set")
    p.add_argument("diffusion")
    p.add_argument("--seeds", required=True)
    p.add_argument("--runs", type=_positive_int, default=DEFAULT_RUNS)
    p.add_argument("--rng-seed", type=int, default=0)
    _add_targets(p)
    p.set_defaults(func=cmd_simulate)

    p = add("sweep", help="capital over an alpha x k grid")
    p.add_argument("diffusion")
    p.add_argument("--alphas", type=_float_list, default=[round(0.1 * i, 1) for i in range(11)])
    p.add_argument("--ks", type=_int_list, default=[10])
    p.add_argument("--variant", choices=("local", "global"), default="global")
    p.add_argument("--eta", type=_unit, default=DEFAULT_ETA)
    p.add_argument("--runs", type=_positive_int, default=DEFAULT_RUNS)
    p.add_argument("--rng-seed", type=int, default=0)
    _add_targets(p)
    p.set_defaults(func=cmd_sweep)

    p = add("overlap", help="pairwise seed-set overlap")
    p.add_argument("seed_files", nargs="+")
    p.add_argument("--graph", default=None, help="edge list; adds centrality CV of each seed set")
    p.set_defaults(func=cmd_overlap)

    p = add("example2", help="run the one-target worked example")
    p.add_argument("--variant", choices=("global", "local", "both"), default="both")
    p.set_defaults(func=cmd_example2)

    _apply_env(parser)
    return parser


def _apply_env(parser: argparse.ArgumentParser) -> None:
    """Replace defaults with DTIM_<DEST> environment values (argparse converts them)."""
    parsers = [parser]
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            parsers += list(action.choices.values())
    for p in parsers:
        for action in p._actions:
            if not action.option_strings or action.dest in ("help",):
                continue
            value = os.environ.get(ENV_PREFIX + action.dest.upper())
            if value is None:
                continue
            if action.nargs == 0:
                action.default = value.lower() in ("1", "true", "yes", "on")
            else:
                action.default = value
                action.required = False


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    if args.out is not None:
        os.makedirs(args.out, exist_ok=True)
    try:
        return args.func(args)
    except (DTIMError, ValueError, OSError) as exc:
        print(f"dtim: error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())
