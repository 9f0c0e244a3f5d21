"""Command-line pipeline: ingest traces, cluster tasks, run simulations, report.

Exit codes: 0 success, 2 input/config error, 3 runtime error (deadlock).
Environment overrides: S4OC_SEED (default seed), S4OC_OUT_DIR (default
output directory).
"""

from __future__ import annotations

import argparse
import csv
import os
import random
import sys

from .arch import load_arch
from .communities import (
    QualityParams,
    detect_communities,
    modularity,
    security_cohesion,
    singleton_partition,
    write_partition,
)
from .qlearn import QTable
from .sim import DeadlockError, Env, ScenarioError, acyclic_clusters, load_scenario
from .trace import active_kernel, build_dag, build_idg, parse_trace, write_idg

METRICS_FIELDS = (
    "episode",
    "mapper",
    "epsilon",
    "seed",
    "makespan",
    "comm_bytes_hops",
    "energy",
    "security_score",
    "violations",
    "sensitive_tasks",
    "decisions",
    "explorations",
    "migrations",
    "steps",
)


def _default_seed() -> int:
    raw = os.environ.get("S4OC_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ScenarioError(f"S4OC_SEED must be an integer, got {raw!r}") from None


def _out_dir(args) -> str:
    out = args.out_dir or os.environ.get("S4OC_OUT_DIR") or "."
    os.makedirs(out, exist_ok=True)
    return out


def _read_text(path: str) -> str:
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such file: {path}")
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def cmd_ingest(args) -> int:
    from .trace import ClassifierThresholds

    thresholds = ClassifierThresholds(
        crypto=args.th_crypto,
        matrix_mul=args.th_matmul,
        fft=args.th_fft,
        loop_backedges=args.th_loop,
    )
    instructions = parse_trace(_read_text(args.trace))
    graph = build_idg(instructions, thresholds)
    dag = build_dag(instructions)
    out = _out_dir(args)
    with open(os.path.join(out, "dag_edges.txt"), "w", encoding="utf-8") as fh:
        fh.write("# producer consumer bytes\n")
        for a, b, w in dag.edges:
            fh.write(f"{a} {b} {w}\n")
    write_idg(graph, os.path.join(out, "idg_edges.txt"), os.path.join(out, "idg_nodes.txt"))
    if args.stats:
        distinct_dsts = len({i.dst for i in instructions if i.dst is not None})
        print(f"instructions: {len(instructions)}")
        print(f"distinct_dsts: {distinct_dsts}")
        print(f"dag_edges: {len(dag.edges)}")
        print(f"free_inputs: {dag.free_inputs}")
        print(f"tasks: {len(graph.nodes)}")
        print(f"idg_edges: {len(graph.edges)}")
        print(f"kernel: {active_kernel()}")
    return 0


def cmd_cluster(args) -> int:
    from .trace import read_idg

    nodes_path = args.nodes
    if nodes_path is None:
        if "edges" not in os.path.basename(args.idg):
            raise ScenarioError("cannot derive node table path; pass --nodes")
        nodes_path = os.path.join(
            os.path.dirname(args.idg), os.path.basename(args.idg).replace("edges", "nodes")
        )
    for path in (args.idg, nodes_path):
        if not os.path.exists(path):
            raise FileNotFoundError(f"no such file: {path}")
    graph = read_idg(args.idg, nodes_path)
    if not graph.nodes:
        raise ScenarioError(f"{args.idg}: task graph is empty")
    params = QualityParams(lambda_sec=args.lambda_sec)
    partition = detect_communities(graph, params)
    out_path = args.out or os.path.join(_out_dir(args), "partition.txt")
    write_partition(partition, out_path)
    mod = modularity(graph, partition)
    sec = security_cohesion(graph, partition)
    print(f"communities: {len(set(partition.values()))}")
    print(f"modularity: {mod!r}")
    print(f"security_cohesion: {sec!r}")
    print(f"lambda_sec: {params.lambda_sec!r}")
    print(f"quality: {mod + params.lambda_sec * sec!r}")
    print(f"partition: {out_path}")
    return 0


def _run_setup(args):
    scenario = load_scenario(args.scenario)
    seed = args.seed if args.seed is not None else (
        int(os.environ["S4OC_SEED"]) if "S4OC_SEED" in os.environ else scenario.seed
    )
    arch = load_arch(scenario.arch_path)
    instructions = parse_trace(_read_text(scenario.trace_path))
    graph = build_idg(instructions)
    clustering = scenario.clustering and not args.no_cluster
    if graph.nodes and clustering:
        partition = acyclic_clusters(graph, detect_communities(graph, scenario.quality))
    else:
        partition = singleton_partition(graph)
    for _, eid in scenario.attacks:
        arch.element(eid)  # surface bad attack targets as a config error
    return scenario, seed, arch, graph, partition


def cmd_run(args) -> int:
    if args.seed is None and "S4OC_SEED" in os.environ:
        _default_seed()  # validate the override early
    scenario, seed, arch, graph, partition = _run_setup(args)
    agents = args.agents if args.agents is not None else scenario.agents
    episodes = args.episodes if args.episodes is not None else scenario.episodes
    epsilon = args.epsilon if args.epsilon is not None else scenario.rl.epsilon
    mapper = args.baseline or "rl"
    out = _out_dir(args)

    qtable = QTable()
    rng = random.Random(seed)
    rows = []
    last_report = None

    def one_episode(index: int, label: str, eps: float):
        nonlocal last_report
        env = Env(
            arch,
            graph,
            partition,
            rl=scenario.rl,
            sim=scenario.sim,
            agents=agents,
            workload_cap=scenario.workload_cap,
            qtable=qtable,
            rng=rng,
            mapper=mapper,
            epsilon=eps,
            attacks=scenario.attacks,
        )
        report = env.run()
        last_report = report
        rows.append(
            {
                "episode": index,
                "mapper": label,
                "epsilon": repr(eps),
                "seed": seed,
                "makespan": report.makespan,
                "comm_bytes_hops": report.total_comm_bytes_hops,
                "energy": repr(report.energy),
                "security_score": repr(report.security_score),
                "violations": report.violations,
                "sensitive_tasks": report.sensitive_tasks,
                "decisions": report.stats.decisions,
                "explorations": report.stats.explorations,
                "migrations": report.stats.migrations,
                "steps": report.steps,
            }
        )
        return report

    for episode in range(episodes):
        eps = max(0.0, epsilon - episode * scenario.rl.epsilon_decay)
        one_episode(episode, mapper, eps if mapper == "rl" else 0.0)
    if args.eval:
        if mapper != "rl":
            raise ScenarioError("--eval only applies to the rl mapper")
        one_episode(episodes, "rl-greedy", 0.0)

    with open(os.path.join(out, "metrics.csv"), "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=METRICS_FIELDS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    with open(os.path.join(out, "events.csv"), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("time", "kind", "detail"))
        for event in last_report.events:
            writer.writerow((event.time, event.kind, event.detail()))
    if mapper == "rl":
        with open(os.path.join(out, "qtable.txt"), "w", encoding="utf-8") as fh:
            fh.write(qtable.dump())
    summary = last_report.summary()
    with open(os.path.join(out, "summary.txt"), "w", encoding="utf-8") as fh:
        fh.write(summary)
    print(summary, end="")
    return 0


def cmd_report(args) -> int:
    path = args.path
    if os.path.isdir(path):
        path = os.path.join(path, "metrics.csv")
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    if not rows:
        print("no runs recorded")
        return 0
    cols = ("episode", "mapper", "makespan", "comm_bytes_hops", "energy",
            "security_score", "violations")
    widths = {c: max(len(c), max(len(r[c]) for r in rows)) for c in cols}
    print("  ".join(c.ljust(widths[c]) for c in cols))
    for r in rows:
        print("  ".join(r[c].ljust(widths[c]) for c in cols))
    for metric in ("makespan", "comm_bytes_hops", "violations"):
        values = [float(r[metric]) for r in rows]
        print(f"mean_{metric}: {sum(values) / len(values):.3f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="s4oc",
        description="Trace ingestion, security-aware clustering and learned task "
        "mapping on a four-layer manycore model.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse a trace and emit the task graph files")
    p.add_argument("trace", help="trace file")
    p.add_argument("--out-dir", default=None)
    p.add_argument("--stats", action="store_true", help="print trace/graph counters")
    p.add_argument("--th-crypto", type=float, default=0.30,
                   help="crypto-opcode fraction for the Crypto affinity rule")
    p.add_argument("--th-matmul", type=float, default=0.40,
                   help="mul/fma fraction for the MatrixMul affinity rule")
    p.add_argument("--th-fft", type=float, default=0.25,
                   help="butterfly/shuffle fraction for the FFT affinity rule")
    p.add_argument("--th-loop", type=int, default=2,
                   help="back-edge count for the Loop affinity rule")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("cluster", help="partition a task graph into communities")
    p.add_argument("idg", help="edge-list file from ingest")
    p.add_argument("--nodes", default=None, help="node-attribute table (default: derived)")
    p.add_argument("--lambda-sec", type=float, default=0.5, dest="lambda_sec")
    p.add_argument("--out", default=None, help="partition output path")
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("run", help="simulate a scenario")
    p.add_argument("scenario", help="scenario file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--agents", type=int, default=None)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--episodes", type=int, default=None)
    p.add_argument("--eval", action="store_true",
                   help="append one greedy (epsilon=0) episode after training")
    p.add_argument("--baseline", choices=("random", "greedy-nearest"), default=None)
    p.add_argument("--no-cluster", action="store_true",
                   help="map singleton task clusters (skip community detection)")
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="print a table from a metrics.csv")
    p.add_argument("path", help="metrics.csv or an output directory")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DeadlockError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        # TraceError/ArchError/ScenarioError are ValueErrors: input problems.
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
