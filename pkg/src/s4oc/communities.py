"""Security-weighted modularity and greedy community detection on task graphs.

The quality score is Newman weighted modularity plus a security-cohesion term
scaled by ``lambda_sec``. Directed task-graph weights are symmetrized before
scoring. Detection starts from singleton communities and repeatedly applies
the single best node move into a neighboring community until no move improves
quality by more than ``EPS_GAIN``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .trace import SecurityClass, TaskGraph

EPS_GAIN = 1e-9


@dataclass
class QualityParams:
    lambda_sec: float = 0.5

    def __post_init__(self):
        if not math.isfinite(self.lambda_sec):
            raise ValueError(f"lambda_sec must be finite, got {self.lambda_sec}")
        if self.lambda_sec < 0:
            raise ValueError(f"lambda_sec must be >= 0, got {self.lambda_sec}")


def _check_partition(graph: TaskGraph, partition: dict[int, int]) -> None:
    missing = [t for t in graph.nodes if t not in partition]
    if missing:
        raise ValueError(f"partition misses task {missing[0]}")


def _symmetrized(graph: TaskGraph) -> dict[int, dict[int, float]]:
    adj: dict[int, dict[int, float]] = {t: {} for t in graph.nodes}
    for (a, b), w in graph.edges.items():
        if a == b or w == 0:
            continue
        adj[a][b] = adj[a].get(b, 0.0) + w
        adj[b][a] = adj[b].get(a, 0.0) + w
    return adj


def modularity(graph: TaskGraph, partition: dict[int, int]) -> float:
    """Newman weighted modularity; returns 0 for graphs with no edge weight."""
    _check_partition(graph, partition)
    adj = _symmetrized(graph)
    two_m = sum(sum(nbrs.values()) for nbrs in adj.values())
    if two_m == 0:
        return 0.0
    q = 0.0
    communities = set(partition[t] for t in graph.nodes)
    for comm in communities:
        members = [t for t in graph.nodes if partition[t] == comm]
        intra = sum(
            w for u in members for v, w in adj[u].items() if partition[v] == comm
        )
        degree = sum(sum(adj[u].values()) for u in members)
        q += intra / two_m - (degree / two_m) ** 2
    return q


def security_cohesion(graph: TaskGraph, partition: dict[int, int]) -> float:
    """Intra-community weight fraction with matching security classes, minus
    the fraction pairing crypto-secret tasks with plain ones; 0 if edgeless."""
    _check_partition(graph, partition)
    adj = _symmetrized(graph)
    total = sum(sum(nbrs.values()) for nbrs in adj.values()) / 2.0
    if total == 0:
        return 0.0
    same = 0.0
    bad = 0.0
    for u in graph.nodes:
        for v, w in adj[u].items():
            if u < v and partition[u] == partition[v]:
                su, sv = graph.nodes[u].sec, graph.nodes[v].sec
                if su == sv:
                    same += w
                elif {su, sv} == {SecurityClass.CRYPTO_SECRET, SecurityClass.PLAIN}:
                    bad += w
    return (same - bad) / total


def quality(graph: TaskGraph, partition: dict[int, int], params: QualityParams | None = None) -> float:
    params = params or QualityParams()
    return modularity(graph, partition) + params.lambda_sec * security_cohesion(graph, partition)


def singleton_partition(graph: TaskGraph) -> dict[int, int]:
    return {t: i for i, t in enumerate(graph.node_ids())}


def one_community_partition(graph: TaskGraph) -> dict[int, int]:
    return {t: 0 for t in graph.node_ids()}


def relabel_dense(graph: TaskGraph, partition: dict[int, int]) -> dict[int, int]:
    """Renumber community ids densely from 0 in order of first appearance."""
    mapping: dict[int, int] = {}
    out = {}
    for t in graph.node_ids():
        c = partition[t]
        if c not in mapping:
            mapping[c] = len(mapping)
        out[t] = mapping[c]
    return out


def detect_communities(
    graph: TaskGraph,
    params: QualityParams | None = None,
    history: list[float] | None = None,
) -> dict[int, int]:
    """Greedy local-move community detection.

    Starts from singletons; each round evaluates moving every node into each
    community holding one of its neighbors (nodes scanned in ascending id,
    target communities in ascending id) and applies the single move with the
    largest quality gain. Stops when the best gain is <= EPS_GAIN; if the
    stall point scores below the all-in-one merge (a state reachable by local
    moves), that merge is returned instead, so the result never falls short
    of either trivial partition. If ``history`` is given, the quality after
    each accepted move is appended.
    """
    if not graph.nodes:
        raise ValueError("cannot partition an empty task graph")
    params = params or QualityParams()
    adj = _symmetrized(graph)
    secs = {t: graph.nodes[t].sec for t in graph.nodes}
    degree = {t: sum(adj[t].values()) for t in graph.nodes}
    two_m = sum(degree.values())
    total = two_m / 2.0
    node_order = graph.node_ids()
    partition = singleton_partition(graph)
    comm_degree = {partition[t]: degree[t] for t in node_order}

    def move_gain(u: int, target: int) -> float:
        # Only the source and target community terms change; O(deg(u)).
        home = partition[u]
        w_home = w_tgt = same = bad = 0.0
        su = secs[u]
        for v, w in adj[u].items():
            cv = partition[v]
            if cv == home:
                sign = -1.0
                w_home += w
            elif cv == target:
                sign = 1.0
                w_tgt += w
            else:
                continue
            sv = secs[v]
            if su == sv:
                same += sign * w
            elif {su, sv} == {SecurityClass.CRYPTO_SECRET, SecurityClass.PLAIN}:
                bad += sign * w
        d_mod = (2.0 * w_tgt - 2.0 * w_home) / two_m
        ku = degree[u]
        d_mod -= 2.0 * ku * (comm_degree[target] - (comm_degree[home] - ku)) / (two_m * two_m)
        d_sec = (same - bad) / total if total else 0.0
        return d_mod + params.lambda_sec * d_sec

    if two_m > 0:
        current = quality(graph, partition, params)
        while True:
            best_gain = EPS_GAIN
            best_move: tuple[int, int] | None = None
            for u in node_order:
                home = partition[u]
                neighbor_comms = sorted(set(partition[v] for v in adj[u]) - {home})
                for target in neighbor_comms:
                    gain = move_gain(u, target)
                    if gain > best_gain:
                        best_gain = gain
                        best_move = (u, target)
            if best_move is None:
                break
            u, target = best_move
            comm_degree[partition[u]] -= degree[u]
            comm_degree[target] += degree[u]
            partition[u] = target
            current += best_gain
            if history is not None:
                history.append(current)
        merged = one_community_partition(graph)
        merged_quality = quality(graph, merged, params)
        if merged_quality > current + EPS_GAIN:
            if history is not None:
                history.append(merged_quality)
            return merged
    return relabel_dense(graph, partition)


def write_partition(partition: dict[int, int], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# task community\n")
        for task in sorted(partition):
            fh.write(f"{task} {partition[task]}\n")


def read_partition(path: str) -> dict[int, int]:
    out: dict[int, int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}: line {lineno}: expected 'task community'")
            out[int(parts[0])] = int(parts[1])
    return out
