"""Discrete-event execution of mapped task clusters on the architecture graph.

The event loop is single-threaded and owns all mutation. Each step advances
to the next event timestamp, applies every event due there (task finishes
free their element and release dependency-satisfied clusters), dispatches
newly ready clusters into the agent pool, and then lets agents decide in
agent-id order: every decision is made against the availability snapshot
taken at the start of the phase, while commits apply serially, so a target
grabbed by an earlier agent triggers the busy/migration path exactly as a
concurrent commit would.

Occupancy is unit-granular: a PE runs one cluster at a time and its
``available`` flag toggles 1 -> 0 -> 1 from commit to finish (reconfiguration
and message-wait time included). Attack events set ``compromised`` at their
cycle; clusters already running there finish, but their security-sensitive
member tasks count as violations.
"""

from __future__ import annotations

import configparser
import graphlib
import heapq
import math
import os
from dataclasses import dataclass, field

from .arch import ArchGraph, LogicType, PESubtype, parse_logic
from .communities import QualityParams
from .qlearn import (
    Action,
    AgentPool,
    DecisionStats,
    QTable,
    RLParams,
    affinity_matches,
    avail_bucket,
    make_state,
    migrate,
    q_update,
    reward,
    select_action,
)
from .trace import AffinityClass, SecurityClass, TaskGraph, security_rank


class DeadlockError(RuntimeError):
    def __init__(self, message: str, cycle=None):
        super().__init__(message)
        self.cycle = cycle or []


class ScenarioError(ValueError):
    """Malformed or incoherent scenario file."""


# Event kinds.
TASK_START = "TaskStart"
TASK_FINISH = "TaskFinish"
MESSAGE_DELIVERED = "MessageDelivered"
RECONFIG_DONE = "ReconfigDone"
ATTACK_INJECTED = "AttackInjected"
MIGRATION_PERFORMED = "MigrationPerformed"


@dataclass
class SimEvent:
    time: int
    kind: str
    payload: dict

    def detail(self) -> str:
        return ";".join(f"{k}={v}" for k, v in self.payload.items())


DEFAULT_BUSY_ENERGY = {
    PESubtype.CPU: 1.0,
    PESubtype.GPU: 3.0,
    PESubtype.PUF: 1.0,
    PESubtype.ASIC: 1.0,
    PESubtype.HWA_FFT: 0.5,
    PESubtype.HWA_MM: 0.5,
    PESubtype.HWA_CRYPTO: 0.5,
}

# Execution speedup by (affinity, element subtype); anything else runs at 1x.
SPEEDUP = {
    (AffinityClass.CRYPTO, PESubtype.HWA_CRYPTO): 8.0,
    (AffinityClass.FFT, PESubtype.HWA_FFT): 8.0,
    (AffinityClass.MATRIX_MUL, PESubtype.HWA_MM): 8.0,
    (AffinityClass.MATRIX_MUL, PESubtype.GPU): 4.0,
    (AffinityClass.LOOP, PESubtype.GPU): 4.0,
}


@dataclass
class SimParams:
    base_instr_cost: float = 1.0
    reconfig_delay: int = 50
    idle_energy: float = 0.1  # units per idle PE cycle
    busy_energy: dict = field(default_factory=lambda: dict(DEFAULT_BUSY_ENERGY))


@dataclass
class ClusterInfo:
    id: int
    tasks: list[int]
    n_instructions: int
    affinity: AffinityClass
    logic: LogicType
    sec: SecurityClass
    sensitive_tasks: int


def exec_time(cluster: ClusterInfo, element, params: SimParams, logic: LogicType | None = None) -> int:
    """Cycles to run a cluster: base costs over the speedup table, doubled on
    a logic-type mismatch."""
    speedup = SPEEDUP.get((cluster.affinity, element.subtype), 1.0)
    cycles = math.ceil(cluster.n_instructions * params.base_instr_cost / speedup)
    effective_logic = logic if logic is not None else element.logic
    if effective_logic != cluster.logic:
        cycles *= 2
    return cycles


def comm_time(nbytes: int, hops: int, min_bandwidth: int, latency: int) -> int:
    """Cycles to move a message: serialization at the narrowest link plus
    per-hop latency; 0 for same-element transfers."""
    if nbytes < 0 or hops < 0:
        raise ValueError("bytes and hops must be non-negative")
    if hops == 0:
        return 0
    return math.ceil(nbytes / min_bandwidth) + hops * latency


@dataclass
class SimReport:
    makespan: int
    total_comm_bytes_hops: int
    energy: float
    security_score: float
    violations: int
    sensitive_tasks: int
    events: list[SimEvent]
    stats: DecisionStats
    steps: int

    def summary(self) -> str:
        return (
            f"makespan_cycles      {self.makespan}\n"
            f"comm_bytes_hops      {self.total_comm_bytes_hops}\n"
            f"energy_units         {self.energy!r}\n"
            f"security_score       {self.security_score!r}\n"
            f"violations           {self.violations}\n"
            f"sensitive_tasks      {self.sensitive_tasks}\n"
            f"decisions            {self.stats.decisions}\n"
            f"explorations         {self.stats.explorations}\n"
            f"migrations           {self.stats.migrations}\n"
            f"events               {len(self.events)}\n"
        )


def summarize_events(events, arch: ArchGraph | None = None, params: SimParams | None = None) -> dict:
    """Recompute report counters from an event log (replay check)."""
    starts = [e.time for e in events if e.kind == TASK_START]
    finishes = [e for e in events if e.kind == TASK_FINISH]
    makespan = (max(e.time for e in finishes) - min(starts)) if finishes else 0
    comm = sum(
        e.payload["bytes"] * e.payload["hops"] for e in events if e.kind == MESSAGE_DELIVERED
    )
    violations = sum(e.payload["violations"] for e in finishes)
    out = {"makespan": makespan, "total_comm_bytes_hops": comm, "violations": violations}
    if arch is not None and params is not None:
        busy: dict[int, int] = {}
        for e in finishes:
            eid = e.payload["element"]
            busy[eid] = busy.get(eid, 0) + e.time - e.payload["occupied_from"]
        horizon = max((e.time for e in finishes), default=0)
        energy = 0.0
        for el in arch.pes():
            b = busy.get(el.id, 0)
            energy += b * params.busy_energy[el.subtype] + (horizon - b) * params.idle_energy
        out["energy"] = energy
    return out


def _majority(pairs, ordering):
    """Highest total weight wins; ties resolve to the earliest enum member."""
    totals: dict = {}
    for value, weight in pairs:
        totals[value] = totals.get(value, 0) + weight
    return min(totals, key=lambda v: (-totals[v], ordering.index(v)))


def _strongly_connected(nodes, adj):
    """Iterative Tarjan SCC; components in deterministic discovery order."""
    index: dict = {}
    low: dict = {}
    onstack: set = set()
    stack: list = []
    components: list[list] = []
    counter = 0
    for root in nodes:
        if root in index:
            continue
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        onstack.add(root)
        work = [(root, iter(adj[root]))]
        while work:
            node, it = work[-1]
            advanced = False
            for nxt in it:
                if nxt not in index:
                    index[nxt] = low[nxt] = counter
                    counter += 1
                    stack.append(nxt)
                    onstack.add(nxt)
                    work.append((nxt, iter(adj[nxt])))
                    advanced = True
                    break
                if nxt in onstack:
                    low[node] = min(low[node], index[nxt])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                component = []
                while True:
                    w = stack.pop()
                    onstack.discard(w)
                    component.append(w)
                    if w == node:
                        break
                components.append(component)
    return components


def acyclic_clusters(graph: TaskGraph, partition: dict[int, int]) -> dict[int, int]:
    """Merge communities that form dependency cycles.

    Tasks in different communities may legally exchange data both ways, but
    whole-cluster atomic execution admits no order for mutually-dependent
    clusters. Collapsing each strongly connected component of the cluster
    graph into one cluster makes the cluster graph a DAG; ids are renumbered
    densely by the smallest original community id in each component.
    """
    comms = sorted(set(partition.values()))
    adj: dict[int, list[int]] = {c: [] for c in comms}
    seen = set()
    for (a, b) in sorted(graph.edges):
        ca, cb = partition[a], partition[b]
        if ca != cb and (ca, cb) not in seen:
            seen.add((ca, cb))
            adj[ca].append(cb)
    components = _strongly_connected(comms, adj)
    components.sort(key=min)
    new_id = {c: i for i, comp in enumerate(components) for c in comp}
    return {task: new_id[partition[task]] for task in partition}


def build_clusters(graph: TaskGraph, partition: dict[int, int]):
    """Cluster metadata plus the aggregated inter-cluster byte edges."""
    members: dict[int, list[int]] = {}
    for task in sorted(graph.nodes):
        members.setdefault(partition[task], []).append(task)
    clusters: dict[int, ClusterInfo] = {}
    for cid, tasks in sorted(members.items()):
        nodes = [graph.nodes[t] for t in tasks]
        clusters[cid] = ClusterInfo(
            id=cid,
            tasks=tasks,
            n_instructions=sum(n.n_instructions for n in nodes),
            affinity=_majority(
                ((n.affinity, n.n_instructions) for n in nodes), list(AffinityClass)
            ),
            logic=_majority(((n.logic, n.n_instructions) for n in nodes), list(LogicType)),
            sec=max((n.sec for n in nodes), key=security_rank),
            sensitive_tasks=sum(1 for n in nodes if security_rank(n.sec) > 0),
        )
    edges: dict[tuple[int, int], int] = {}
    for (a, b), w in graph.edges.items():
        ca, cb = partition[a], partition[b]
        if ca != cb:
            edges[(ca, cb)] = edges.get((ca, cb), 0) + w
    return clusters, edges


class Env:
    """One simulation run binding architecture, clusters, agents and learning."""

    def __init__(
        self,
        arch: ArchGraph,
        graph: TaskGraph,
        partition: dict[int, int],
        *,
        rl: RLParams | None = None,
        sim: SimParams | None = None,
        agents: int = 1,
        workload_cap: int | None = None,
        qtable: QTable | None = None,
        rng=None,
        mapper: str = "rl",
        epsilon: float | None = None,
        attacks=(),
        check_invariants: bool = True,
    ):
        if mapper not in ("rl", "random", "greedy-nearest"):
            raise ValueError(f"unknown mapper {mapper!r}")
        self.arch = arch
        self.graph = graph
        self.rl = rl or RLParams()
        self.sim = sim or SimParams()
        self.qtable = qtable if qtable is not None else QTable()
        if rng is None:
            import random

            rng = random.Random(0)
        self.rng = rng
        self.mapper = mapper
        self.epsilon = self.rl.epsilon if epsilon is None else epsilon
        self.check_invariants = check_invariants

        arch.reset_runtime_state()
        self.pe_ids = [el.id for el in arch.pes()]
        if graph.nodes and not self.pe_ids:
            raise ValueError("architecture has no processing elements")

        self.clusters, self.cluster_edges = build_clusters(graph, partition)
        self._preds: dict[int, list[tuple[int, int]]] = {c: [] for c in self.clusters}
        self._succs: dict[int, list[int]] = {c: [] for c in self.clusters}
        traffic: dict[int, dict[int, int]] = {c: {} for c in self.clusters}
        for (a, b), w in sorted(self.cluster_edges.items()):
            self._preds[b].append((a, w))
            self._succs[a].append(b)
            traffic[a][b] = traffic[a].get(b, 0) + w
            traffic[b][a] = traffic[b].get(a, 0) + w
        self._traffic = {c: sorted(nbrs.items()) for c, nbrs in traffic.items()}
        self._remaining_preds = {c: len(ps) for c, ps in self._preds.items()}

        self.pool = AgentPool(agents, workload_cap)
        self.stats = DecisionStats()
        self.now = 0
        self._heap: list = []
        self._seq = 0
        self.events: list[SimEvent] = []
        self.locations: dict[int, int] = {}
        self.finish_times: dict[int, int] = {}
        self.finished: set[int] = set()
        self._owner: dict[int, int] = {}
        self._occupied_from: dict[int, int] = {}
        self._busy_cycles: dict[int, int] = {}
        self._pending: list = [None] * agents
        self.violations = 0
        self.total_comm_bytes_hops = 0
        self.steps = 0
        self.sensitive_tasks = sum(c.sensitive_tasks for c in self.clusters.values())
        self._ready = [c for c in sorted(self.clusters) if self._remaining_preds[c] == 0]

        for cycle, eid in attacks:
            self.inject_attack(cycle, eid)

    # -- event plumbing --------------------------------------------------

    def _schedule(self, time: int, kind: str, payload: dict) -> None:
        heapq.heappush(self._heap, (time, self._seq, kind, payload))
        self._seq += 1

    def inject_attack(self, cycle: int, element_id: int) -> None:
        """Mark an element compromised at the given cycle."""
        self.arch.element(element_id)  # raises ArchError on unknown ids
        if cycle < self.now:
            raise ValueError(f"attack cycle {cycle} is in the past (now={self.now})")
        self._schedule(cycle, ATTACK_INJECTED, {"element": element_id})

    def location(self, cid: int) -> int | None:
        return self.locations.get(cid)

    def neighbor_traffic(self, cid: int):
        return self._traffic[cid]

    def _apply(self, event: SimEvent) -> None:
        payload = event.payload
        if event.kind == TASK_FINISH:
            cid = payload["cluster"]
            el = self.arch.element(payload["element"])
            el.available = 1.0
            self._busy_cycles[el.id] = (
                self._busy_cycles.get(el.id, 0) + event.time - payload["occupied_from"]
            )
            added = self.clusters[cid].sensitive_tasks if el.compromised else 0
            self.violations += added
            payload["violations"] = added
            self.finished.add(cid)
            self.finish_times[cid] = event.time
            self.pool.finished(self._owner[cid])
            for succ in self._succs[cid]:
                self._remaining_preds[succ] -= 1
                if self._remaining_preds[succ] == 0:
                    self._ready.append(succ)
        elif event.kind == RECONFIG_DONE:
            self.arch.element(payload["element"]).logic = parse_logic(payload["logic"])
        elif event.kind == ATTACK_INJECTED:
            self.arch.element(payload["element"]).compromised = True
        # TaskStart / MessageDelivered / MigrationPerformed are log-only.

    def _log_now(self, kind: str, payload: dict) -> SimEvent:
        event = SimEvent(self.now, kind, payload)
        self.events.append(event)
        return event

    # -- agent decisions -------------------------------------------------

    def _candidates(self, cluster: ClusterInfo) -> list[Action]:
        cands = []
        for eid in self.pe_ids:
            el = self.arch.elements[eid]
            cands.append(Action(eid))
            if el.reconfigurable and el.logic != cluster.logic:
                cands.append(Action(eid, cluster.logic))
        return cands

    def _state(self, cluster: ClusterInfo, snapshot: dict[int, float]):
        digests = []
        for eid in self.pe_ids:
            el = self.arch.elements[eid]
            digests.append((el.subtype, el.logic, avail_bucket(snapshot[eid]), el.compromised))
        return make_state(cluster.affinity, cluster.sec, cluster.logic, digests)

    def _comm_cost(self, cluster: ClusterInfo, eid: int) -> int:
        cost = 0
        for other, nbytes in self._traffic[cluster.id]:
            loc = self.locations.get(other)
            if loc is not None:
                hops = self.arch.hop_distance(eid, loc)
                cost += nbytes * (hops or 0)
        return cost

    def _greedy_nearest(self, cluster: ClusterInfo, snapshot: dict[int, float]) -> Action:
        def rank(eid: int):
            el = self.arch.elements[eid]
            return (
                snapshot[eid] <= 0.0,  # idle elements first
                not affinity_matches(cluster.affinity, el.subtype),
                self._comm_cost(cluster, eid),
                eid,
            )

        return Action(min(self.pe_ids, key=rank))

    def _decide_and_commit(self, agent: int, cid: int, snapshot: dict[int, float]) -> bool:
        cluster = self.clusters[cid]
        state = None
        if self.mapper == "rl":
            candidates = self._candidates(cluster)
            state = self._state(cluster, snapshot)
            pending = self._pending[agent]
            if pending is not None:
                q_update(self.qtable, *pending, state, candidates, self.rl)
                self._pending[agent] = None
            action = select_action(
                self.qtable, state, candidates, self.epsilon, self.rng, self.stats
            )
        elif self.mapper == "random":
            self.stats.decisions += 1
            action = Action(self.pe_ids[self.rng.randrange(len(self.pe_ids))])
        else:  # greedy-nearest
            self.stats.decisions += 1
            action = self._greedy_nearest(cluster, snapshot)

        target = self.arch.element(action.element)
        chosen_busy = target.available <= 0.0
        final = action.element
        migration_hops = 0
        if chosen_busy:
            alt = migrate(self, cluster, action.element)
            if alt is None:
                if self.mapper == "rl":
                    r = reward(self, cluster, action, final_element=None, params=self.rl)
                    self._pending[agent] = (state, action, r)
                return False
            migration_hops = self.arch.hop_distance(action.element, alt)
            final = alt
            self.stats.migrations += 1
            self._log_now(
                MIGRATION_PERFORMED,
                {
                    "cluster": cid,
                    "from_element": action.element,
                    "to_element": alt,
                    "hops": migration_hops,
                },
            )

        el = self.arch.element(final)
        ready_at = self.now
        effective_logic = el.logic
        if (
            action.reconfig_logic is not None
            and final == action.element
            and el.reconfigurable
            and el.logic != action.reconfig_logic
        ):
            ready_at = self.now + self.sim.reconfig_delay
            effective_logic = action.reconfig_logic
            self._schedule(
                ready_at, RECONFIG_DONE, {"element": final, "logic": action.reconfig_logic.value}
            )

        start = ready_at
        for pred, nbytes in self._preds[cid]:
            src = self.locations[pred]
            path = self.arch.shortest_path(src, final)
            if path is None:
                raise DeadlockError(
                    f"no route from element {src} to element {final} for cluster {cid}"
                )
            hops, min_bw, total_latency = self.arch.path_metrics(path)
            delay = 0 if hops == 0 else math.ceil(nbytes / min_bw) + total_latency
            arrival = max(self.now, self.finish_times[pred] + delay)
            self.total_comm_bytes_hops += nbytes * hops
            self._schedule(
                arrival,
                MESSAGE_DELIVERED,
                {
                    "src": pred,
                    "dst": cid,
                    "bytes": nbytes,
                    "hops": hops,
                    "from_element": src,
                    "to_element": final,
                },
            )
            start = max(start, arrival)

        cycles = exec_time(cluster, el, self.sim, logic=effective_logic)
        finish = start + cycles
        el.available = 0.0
        self.locations[cid] = final
        self._owner[cid] = agent
        self._occupied_from[cid] = self.now
        self.pool.started(agent)
        self._schedule(start, TASK_START, {"cluster": cid, "element": final, "committed": self.now})
        self._schedule(
            finish,
            TASK_FINISH,
            {
                "cluster": cid,
                "element": final,
                "started": start,
                "occupied_from": self.now,
                "cycles": cycles,
            },
        )
        if self.mapper == "rl":
            r = reward(
                self,
                cluster,
                action,
                final_element=final,
                chosen_busy=chosen_busy,
                migration_hops=migration_hops,
                params=self.rl,
            )
            self._pending[agent] = (state, action, r)
        return True

    # -- main loop ---------------------------------------------------------

    def step(self) -> list[SimEvent]:
        """Advance one timestamp: apply due events, dispatch, let agents act.

        Returns every event logged during the call (the ones due at this
        timestamp plus any commit-time events such as migrations).
        """
        self.steps += 1
        log_mark = len(self.events)
        if self._heap:
            t = self._heap[0][0]
            assert t >= self.now, "event queue went backwards"
            self.now = t
            while self._heap and self._heap[0][0] == t:
                _, _, kind, payload = heapq.heappop(self._heap)
                event = SimEvent(t, kind, payload)
                self._apply(event)
                self.events.append(event)

        newly_ready = self._ready
        self._ready = []
        self.pool.note_step(len(newly_ready))
        self.pool.dispatch(newly_ready)

        snapshot = {eid: self.arch.elements[eid].available for eid in self.pe_ids}
        for agent in range(self.pool.n_agents):
            while self.pool.can_pull(agent):
                cid = self.pool.pop(agent)
                if not self._decide_and_commit(agent, cid, snapshot):
                    self.pool.requeue(agent, cid)
                    break

        if (
            not self._heap
            and not self._ready
            and self.pool.idle()
            and len(self.finished) < len(self.clusters)
        ):
            cycle = self._find_dependency_cycle()
            raise DeadlockError(
                "deadlock: no pending events and unfinished clusters remain; "
                f"dependency cycle {' -> '.join(map(str, cycle))}",
                cycle,
            )
        if self.check_invariants:
            self._assert_occupancy()
        return self.events[log_mark:]

    def _find_dependency_cycle(self) -> list[int]:
        remaining = {
            c: [p for p, _ in self._preds[c] if p not in self.finished]
            for c in self.clusters
            if c not in self.finished
        }
        try:
            graphlib.TopologicalSorter(remaining).prepare()
        except graphlib.CycleError as exc:
            return list(exc.args[1])
        return sorted(remaining)

    def _assert_occupancy(self) -> None:
        busy = sum(1 for eid in self.pe_ids if self.arch.elements[eid].available <= 0.0)
        in_flight = sum(self.pool.in_flight)
        assert busy == in_flight, f"occupancy skew: {busy} busy PEs vs {in_flight} in flight"

    def run(self) -> SimReport:
        """Step until every cluster finishes; deadlocks propagate."""
        while len(self.finished) < len(self.clusters):
            self.step()
        for agent, pending in enumerate(self._pending):
            if pending is not None:
                q_update(self.qtable, *pending, None, [], self.rl)
                self._pending[agent] = None

        if self.finish_times:
            horizon = max(self.finish_times.values())
            first_start = min(e.time for e in self.events if e.kind == TASK_START)
            makespan = horizon - first_start
        else:
            horizon = 0
            makespan = 0
        energy = 0.0
        for el in self.arch.pes():
            busy = self._busy_cycles.get(el.id, 0)
            energy += busy * self.sim.busy_energy[el.subtype]
            energy += (horizon - busy) * self.sim.idle_energy
        if self.sensitive_tasks:
            score = 1.0 - self.violations / self.sensitive_tasks
            score = min(1.0, max(0.0, score))
        else:
            score = 1.0
        return SimReport(
            makespan=makespan,
            total_comm_bytes_hops=self.total_comm_bytes_hops,
            energy=energy,
            security_score=score,
            violations=self.violations,
            sensitive_tasks=self.sensitive_tasks,
            events=self.events,
            stats=self.stats,
            steps=self.steps,
        )


def run(env: Env) -> SimReport:
    return env.run()


# -- scenario files ----------------------------------------------------------


@dataclass
class Scenario:
    arch_path: str
    trace_path: str
    seed: int = 0
    agents: int = 1
    episodes: int = 1
    workload_cap: int | None = None
    clustering: bool = True
    rl: RLParams = field(default_factory=RLParams)
    sim: SimParams = field(default_factory=SimParams)
    quality: QualityParams = field(default_factory=QualityParams)
    attacks: list[tuple[int, int]] = field(default_factory=list)


_RL_FLOAT_KEYS = (
    "alpha",
    "gamma",
    "epsilon",
    "epsilon_decay",
    "busy_penalty",
    "w_affinity",
    "w_logic",
    "w_comm",
    "w_migrate",
    "w_compromised",
)


def load_scenario(path: str) -> Scenario:
    """Parse a scenario file; see the README for the format."""
    parser = configparser.ConfigParser(allow_no_value=True, delimiters=("=",))
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh, source=path)
    except configparser.Error as exc:
        raise ScenarioError(f"{path}: {exc}") from exc

    if not parser.has_section("paths"):
        raise ScenarioError(f"{path}: missing [paths] section")
    base = os.path.dirname(os.path.abspath(path))

    def resolve(name: str) -> str:
        if not parser.has_option("paths", name):
            raise ScenarioError(f"{path}: [paths] missing '{name}'")
        value = parser.get("paths", name)
        return value if os.path.isabs(value) else os.path.join(base, value)

    scenario = Scenario(arch_path=resolve("arch"), trace_path=resolve("trace"))

    if parser.has_section("sim"):
        known = {"seed", "agents", "episodes", "workload_cap", "clustering",
                 "base_instr_cost", "reconfig_delay"}
        for key in parser.options("sim"):
            if key not in known:
                raise ScenarioError(f"{path}: unknown [sim] key {key!r}")
        scenario.seed = parser.getint("sim", "seed", fallback=scenario.seed)
        scenario.agents = parser.getint("sim", "agents", fallback=scenario.agents)
        scenario.episodes = parser.getint("sim", "episodes", fallback=scenario.episodes)
        if parser.has_option("sim", "workload_cap"):
            scenario.workload_cap = parser.getint("sim", "workload_cap")
        scenario.clustering = parser.getboolean("sim", "clustering", fallback=True)
        scenario.sim.base_instr_cost = parser.getfloat(
            "sim", "base_instr_cost", fallback=scenario.sim.base_instr_cost
        )
        scenario.sim.reconfig_delay = parser.getint(
            "sim", "reconfig_delay", fallback=scenario.sim.reconfig_delay
        )

    if parser.has_section("rl"):
        kwargs = {}
        for key in parser.options("rl"):
            if key not in _RL_FLOAT_KEYS:
                raise ScenarioError(f"{path}: unknown [rl] key {key!r}")
            kwargs[key] = parser.getfloat("rl", key)
        try:
            scenario.rl = RLParams(**kwargs)
        except ValueError as exc:
            raise ScenarioError(f"{path}: [rl] {exc}") from exc

    if parser.has_section("quality"):
        for key in parser.options("quality"):
            if key != "lambda_sec":
                raise ScenarioError(f"{path}: unknown [quality] key {key!r}")
        try:
            scenario.quality = QualityParams(parser.getfloat("quality", "lambda_sec"))
        except ValueError as exc:
            raise ScenarioError(f"{path}: [quality] {exc}") from exc

    if parser.has_section("energy"):
        by_value = {st.value: st for st in PESubtype}
        for key in parser.options("energy"):
            if key == "idle":
                scenario.sim.idle_energy = parser.getfloat("energy", "idle")
            elif key in by_value:
                scenario.sim.busy_energy[by_value[key]] = parser.getfloat("energy", key)
            else:
                raise ScenarioError(f"{path}: unknown [energy] key {key!r}")

    if parser.has_section("attacks"):
        for key in parser.options("attacks"):
            parts = key.split()
            if len(parts) != 3 or parts[0] != "attack":
                raise ScenarioError(
                    f"{path}: bad attack line {key!r}; expected 'attack <cycle> <element id>'"
                )
            try:
                cycle, eid = int(parts[1]), int(parts[2])
            except ValueError:
                raise ScenarioError(f"{path}: non-integer attack fields in {key!r}") from None
            if cycle < 0:
                raise ScenarioError(f"{path}: negative attack cycle in {key!r}")
            scenario.attacks.append((cycle, eid))
    return scenario
