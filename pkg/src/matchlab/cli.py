"""Command-line interface.

Exit codes: 0 success, 1 configuration or usage error, 2 contract violation
or failed oracle check.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional, Sequence, TextIO

from matchlab import experiments, oracle, treealg
from matchlab.errors import ConfigError, ContractError, MatchlabError
from matchlab.graph import tree_excess
from matchlab.market import MarketConfig, TierSpec, parse_dist, sample_market
from matchlab.matching import (
    almost_stable_witness,
    deferred_acceptance,
    interim_blocking_report,
    mean_applicant_rank,
    preferences,
)
from matchlab.signaling import (
    MECHANISM_KINDS,
    build_interview_graph,
    general_imbalance,
    make_mechanism,
    target_tiers,
)

EXIT_OK, EXIT_CONFIG, EXIT_CONTRACT = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse would exit 2; usage errors are config errors here
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _tiers(text: str) -> TierSpec:
    try:
        app, firm = text.split(";")
        return TierSpec(tuple(float(x) for x in app.split(",")), tuple(float(x) for x in firm.split(",")))
    except (ValueError, ConfigError) as exc:
        raise argparse.ArgumentTypeError(f"bad tier spec {text!r}: {exc}") from exc


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from exc


def _add_market_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("market and mechanism (override --config values)")
    g.add_argument("--config", metavar="PATH", help="scenario JSON file")
    g.add_argument("--seed", type=_u64, metavar="U64", help="base seed (unsigned 64-bit)")
    g.add_argument("--n-applicants", type=int, metavar="N", help="number of applicants")
    g.add_argument("--n-firms", type=int, metavar="N", help="number of firms")
    g.add_argument("--d", type=int, help="signals per agent")
    g.add_argument("--mechanism", choices=MECHANISM_KINDS, help="signaling mechanism")
    g.add_argument("--dist-pre", metavar="SPEC", help="pre-interview score law, e.g. normal:0,1")
    g.add_argument("--dist-post", metavar="SPEC", help="post-interview score law, e.g. uniform:-1,1")
    g.add_argument("--tiers", type=_tiers, metavar="A1,A2,..;B1,B2,..", help="tier fractions, lowest tier first")
    g.add_argument("--proposing-side", choices=("applicant", "firm"), help="proposing side of deferred acceptance")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("run control")
    g.add_argument("--trials", type=int, metavar="N", help="trials per sweep point")
    g.add_argument("--threads", type=int, metavar="K", help="worker processes (default: $MATCHLAB_THREADS or 1)")
    g.add_argument("--epsilon", type=float, help="almost-stability threshold as a fraction of applicants")
    g.add_argument("--output", metavar="PATH", help="CSV destination (default: stdout)")
    g.add_argument("--summary", metavar="PATH", help="also write per-sweep-value means and standard errors")
    g.add_argument("--timing", action="store_true", help="record wall-clock runtime_ms (breaks byte-identity)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="matchlab", description="Interview-signaling matching market simulator.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="run a scenario and write per-trial CSV")
    _add_market_flags(p)
    _add_run_flags(p)

    p = sub.add_parser("sweep", help="run a scenario over a list of parameter values")
    _add_market_flags(p)
    _add_run_flags(p)
    p.add_argument("--param", required=True, choices=experiments.SWEEP_PARAMETERS)
    p.add_argument("--values", required=True, type=_int_list, metavar="V1,V2,..")

    p = sub.add_parser("inspect", help="build one market and describe its graph, matching and blocking pairs")
    _add_market_flags(p)
    p.add_argument("--epsilon", type=float, help="almost-stability threshold as a fraction of applicants")
    p.add_argument("--edges", metavar="PATH", help="export the interview graph as an a,j edge list")
    p.add_argument("--output", metavar="PATH", help="destination (default: stdout)")

    p = sub.add_parser("tree-mp", help="proposal passing and message-passing marginals on a tree")
    p.add_argument("--d", type=int, help="degree of a regular tree")
    p.add_argument("--depth", type=int, help="depth of a regular tree")
    p.add_argument("--tree", metavar="PATH", help="tree JSON: {root, edges, prefs}")
    p.add_argument("--output", metavar="PATH", help="destination (default: stdout)")

    p = sub.add_parser("fixed-point", help="fixed point of f_a o f_b")
    p.add_argument("--a", type=float, required=True, help="out-degree at odd depth")
    p.add_argument("--b", type=float, required=True, help="out-degree at even depth")
    p.add_argument("--epsilon", type=float, help="also report Gamma_epsilon and the iteration bound")
    p.add_argument("--output", metavar="PATH", help="destination (default: stdout)")

    p = sub.add_parser("oracle-check", help="compare fast paths with brute-force enumeration")
    p.add_argument("--instances", type=int, default=500, metavar="N", help="random instances to check")
    p.add_argument("--max-agents", type=int, default=5, metavar="N", help="maximum agents per side")
    p.add_argument("--seed", type=_u64, default=1, metavar="U64", help="battery seed")
    p.add_argument("--trees", type=int, default=0, metavar="N", help="also run the tree battery on this many trees")
    p.add_argument("--output", metavar="PATH", help="destination (default: stdout)")
    return parser


# ---------------------------------------------------------------------------
# scenario assembly


def _load_scenario(args: argparse.Namespace) -> experiments.ScenarioConfig:
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config} is not valid JSON: {exc}") from exc
        cfg = experiments.ScenarioConfig.from_json(doc)
    else:
        cfg = experiments.ScenarioConfig(
            MarketConfig(1000, 1000, pre_dist=parse_dist("normal:0,1"), post_dist=parse_dist("uniform:-1,1")),
            make_mechanism("applicant", 10),
        )
    market = cfg.market
    overrides = {}
    if args.n_applicants is not None:
        overrides["n_applicants"] = args.n_applicants
    if args.n_firms is not None:
        overrides["n_firms"] = args.n_firms
    if args.dist_pre is not None:
        overrides["pre_dist"] = parse_dist(args.dist_pre)
    if args.dist_post is not None:
        overrides["post_dist"] = parse_dist(args.dist_post)
    if args.tiers is not None:
        overrides["tiers"] = args.tiers
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        market = market.replace(**overrides)
    mech = cfg.mechanism
    if args.mechanism is not None or args.d is not None:
        mech = make_mechanism(args.mechanism or mech.kind, args.d if args.d is not None else mech.d)
    changes = dict(market=market, mechanism=mech)
    for name in ("trials", "epsilon", "proposing_side", "output"):
        value = getattr(args, name, None)
        if value is not None:
            changes[name] = value
    if getattr(args, "param", None) is not None:
        changes["sweep_parameter"] = args.param
        changes["sweep_values"] = tuple(args.values)
    return experiments.ScenarioConfig(**{**_fields(cfg), **changes})


def _fields(cfg: experiments.ScenarioConfig) -> dict:
    return {k: getattr(cfg, k) for k in cfg.__dataclass_fields__}


def _threads(args: argparse.Namespace) -> int:
    if args.threads is not None:
        threads = args.threads
    else:
        env = os.environ.get("MATCHLAB_THREADS", "1")
        try:
            threads = int(env)
        except ValueError as exc:
            raise ConfigError(f"MATCHLAB_THREADS must be an integer, got {env!r}") from exc
    if threads < 1:
        raise ConfigError("threads must be >= 1")
    return threads


def _emit(text: str, path: Optional[str], stdout: TextIO) -> None:
    if path:
        Path(path).write_text(text)
    else:
        stdout.write(text)


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(args: argparse.Namespace, stdout: TextIO) -> int:
    cfg = _load_scenario(args)
    records = experiments.run_scenario(cfg, threads=_threads(args), timing=args.timing)
    _emit(experiments.records_to_csv(records), cfg.output, stdout)
    if args.summary:
        rows = experiments.aggregate(records, cfg.metrics, cfg.epsilon)
        Path(args.summary).write_text(experiments.aggregate_to_csv(rows, cfg.metrics))
    return EXIT_OK


def cmd_inspect(args: argparse.Namespace, stdout: TextIO) -> int:
    cfg = _load_scenario(args)
    inst = sample_market(cfg.market)
    graph = build_interview_graph(inst, cfg.mechanism)
    prefs = preferences(inst, graph)
    matching = deferred_acceptance(inst, graph, cfg.proposing_side, prefs=prefs)
    report = interim_blocking_report(inst, graph, matching)
    witness = almost_stable_witness(inst, graph)
    tiers = cfg.market.tiers
    imbalanced, gap = general_imbalance(tiers, inst.n_applicants, inst.n_firms)
    tmap = target_tiers(tiers, inst.n_applicants, inst.n_firms)
    lines = [
        f"n_applicants = {inst.n_applicants}",
        f"n_firms = {inst.n_firms}",
        f"mechanism = {cfg.mechanism.kind} (d = {cfg.mechanism.d})",
        f"dist_pre = {cfg.market.pre_dist.tag}",
        f"dist_post = {cfg.market.post_dist.tag}",
        f"applicant_tier_sizes = {tiers.applicant_sizes(inst.n_applicants)}",
        f"firm_tier_sizes = {tiers.firm_sizes(inst.n_firms)}",
        f"applicant_target_tiers = {list(tmap.applicant_targets)}",
        f"firm_target_tiers = {list(tmap.firm_targets)}",
        f"generally_imbalanced = {str(imbalanced).lower()} (gap = {gap:g})",
        f"edges = {graph.edge_count}",
        f"tree_excess = {tree_excess(graph)}",
        f"matched_pairs = {len(matching.pairs())}",
        f"unmatched_applicants = {matching.unmatched_applicants()}",
        f"unmatched_firms = {matching.unmatched_firms()}",
        f"mean_applicant_rank = {mean_applicant_rank(prefs, matching):.6f}",
        f"blocking_pairs = {report.n_pairs}",
        f"applicants_blocked = {report.applicants_blocked}",
        f"firms_blocked = {report.firms_blocked}",
        f"perfect_interim_stable = {str(report.n_pairs == 0).lower()}",
        f"witness_size = {len(witness.witness)}",
        f"witness_verified = {str(witness.verified).lower()}",
    ]
    if cfg.epsilon is not None:
        ok = witness.verified and len(witness.witness) <= cfg.epsilon * inst.n_applicants
        lines.append(f"almost_interim_stable = {str(ok).lower()}")
    if args.edges:
        graph.export_edge_list(args.edges)
    _emit("\n".join(lines) + "\n", args.output, stdout)
    return EXIT_OK


def cmd_tree_mp(args: argparse.Namespace, stdout: TextIO) -> int:
    lines = []
    if args.tree:
        try:
            doc = json.loads(Path(args.tree).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read tree file {args.tree}: {exc}") from exc
        tree = treealg.RootedPrefTree.from_json(doc)
        trace = treealg.proposal_passing(tree)
        mu = treealg.marginal_proposal_probabilities(tree)
        lines.append(f"nodes = {len(tree)}")
        lines.append("node,parent,proposes_to_parent,partner,mu")
        for v in tree.bfs_order:
            parent = tree.parent.get(v)
            partner = trace.matching[v]
            lines.append(
                f"{v},{'' if parent is None else parent},{str(trace.proposes[v]).lower()},"
                f"{'' if partner is None else partner},{'' if v not in mu else format(mu[v], '.6f')}"
            )
    elif args.d is not None and args.depth is not None:
        if args.d < 1 or args.depth < 1:
            raise ConfigError("--d and --depth must be >= 1")
        shape = treealg.regular_tree_shape(args.d, args.depth)
        mu = treealg.marginal_proposal_probabilities(shape)
        first = shape[1][0][0]
        iterate = treealg.iterate_f(args.d - 1, args.depth - 1)
        lines.append(f"mu_root_child = {mu[first]:.12f}")
        lines.append(f"f_iterate = {iterate:.12f}")
    else:
        raise ConfigError("tree-mp needs --tree, or both --d and --depth")
    _emit("\n".join(lines) + "\n", args.output, stdout)
    return EXIT_OK


def cmd_fixed_point(args: argparse.Namespace, stdout: TextIO) -> int:
    r = treealg.fixed_point(args.a, args.b, args.epsilon)
    lines = [
        f"x_star = {r.x_star:.6f}",
        f"regime = {r.regime}",
        f"asymptotic_x_star = {r.asymptotic_x_star:.6f}",
        f"residual = {treealg.composition_residual(args.a, args.b, r.x_star):.3e}",
    ]
    if args.epsilon is not None:
        lines.append(f"gamma_epsilon = {r.gamma_epsilon:.6f}")
        lines.append(f"gamma_epsilon_exact = {r.gamma_epsilon_exact:.6f}")
        needed = r.iterations_needed()
        lines.append(f"iterations_needed = {'' if needed is None else needed}")
    _emit("\n".join(lines) + "\n", args.output, stdout)
    return EXIT_OK


def cmd_oracle_check(args: argparse.Namespace, stdout: TextIO) -> int:
    if args.instances < 0 or args.max_agents < 1:
        raise ConfigError("--instances must be >= 0 and --max-agents >= 1")
    results = [oracle.cross_check_battery(args.instances, args.max_agents, args.seed)]
    if args.trees:
        results.append(oracle.tree_battery(args.trees, seed=args.seed))
    lines = [r.summary() for r in results]
    for r in results:
        lines += [f"  {msg}" for msg in r.failures[:20]]
    _emit("\n".join(lines) + "\n", args.output, stdout)
    return EXIT_OK if all(r.passed for r in results) else EXIT_CONTRACT


COMMANDS = {
    "simulate": cmd_simulate,
    "sweep": cmd_simulate,
    "inspect": cmd_inspect,
    "tree-mp": cmd_tree_mp,
    "fixed-point": cmd_fixed_point,
    "oracle-check": cmd_oracle_check,
}


def parse_and_dispatch(argv: Optional[Sequence[str]] = None, stdout: TextIO | None = None) -> int:
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args, stdout)
    except ContractError as exc:
        print(f"matchlab: contract violation: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    except (MatchlabError, ValueError) as exc:
        print(f"matchlab: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main() -> None:
    sys.exit(parse_and_dispatch())


if __name__ == "__main__":
    main()
