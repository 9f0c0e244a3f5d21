import math
import random

import pytest

from conftest import MINI_TRACE
from s4oc.arch import ArchError, LogicType, PESubtype, build_arch
from s4oc.communities import detect_communities, singleton_partition
from s4oc.sim import (
    ATTACK_INJECTED,
    MESSAGE_DELIVERED,
    RECONFIG_DONE,
    TASK_FINISH,
    TASK_START,
    ClusterInfo,
    DeadlockError,
    Env,
    ScenarioError,
    SimParams,
    SPEEDUP,
    acyclic_clusters,
    build_clusters,
    comm_time,
    exec_time,
    load_scenario,
    summarize_events,
)
from s4oc.trace import AffinityClass, SecurityClass, TaskGraph, TaskNode, build_idg, parse_trace
from s4oc.workloads import clustered_instructions, independent_instructions, mesh_arch_config


def task_graph(specs, edges=()):
    """specs: {task: dict(n_instructions=..., affinity=..., logic=..., sec=...)}"""
    nodes = {}
    for tid, kw in specs.items():
        nodes[tid] = TaskNode(task=tid, **kw)
    return TaskGraph(nodes=nodes, edges=dict(edges))


def single_pe_arch(subtype="cpu", **pe_extra):
    return build_arch(
        {
            "elements": [
                {"id": 0, "kind": "ce"},
                {"id": 1, "kind": "pe", "subtype": subtype, **pe_extra},
            ],
            "links": [{"a": 0, "b": 1}],
        }
    )


def cluster(n_instr, affinity=AffinityClass.GENERAL, logic=LogicType.BINARY):
    return ClusterInfo(
        id=0,
        tasks=[0],
        n_instructions=n_instr,
        affinity=affinity,
        logic=logic,
        sec=SecurityClass.PLAIN,
        sensitive_tasks=0,
    )


# -- exec_time / comm_time -----------------------------------------------------


def test_exec_time_general_on_cpu():
    arch = single_pe_arch("cpu")
    assert exec_time(cluster(100), arch.element(1), SimParams()) == 100


def test_exec_time_hwa_speedup():
    arch = single_pe_arch("hwa_mm")
    got = exec_time(cluster(80, affinity=AffinityClass.MATRIX_MUL), arch.element(1), SimParams())
    assert got == 10


def test_exec_time_logic_mismatch_doubles():
    arch = single_pe_arch("cpu")
    got = exec_time(cluster(100, logic=LogicType.TERNARY), arch.element(1), SimParams())
    assert got == 200


def test_exec_time_gpu_loop_speedup():
    arch = single_pe_arch("gpu")
    assert exec_time(cluster(100, affinity=AffinityClass.LOOP), arch.element(1), SimParams()) == 25


def test_comm_time_same_element_is_free():
    assert comm_time(4096, 0, 32, 1) == 0
    assert comm_time(0, 0, 32, 1) == 0


def test_comm_time_formula():
    assert comm_time(64, 2, 32, 1) == 4
    assert comm_time(0, 3, 32, 1) == 3
    assert comm_time(100, 1, 32, 2) == 6


def test_comm_time_rejects_negative():
    with pytest.raises(ValueError):
        comm_time(-1, 0, 32, 1)
    with pytest.raises(ValueError):
        comm_time(1, -1, 32, 1)


def test_speedup_table_agrees_with_affinity_matches():
    from s4oc.qlearn import AFFINITY_TARGETS

    for affinity, targets in AFFINITY_TARGETS.items():
        for subtype in PESubtype:
            assert (subtype in targets) == (SPEEDUP.get((affinity, subtype), 1.0) > 1.0)


# -- cluster building -----------------------------------------------------------


def test_build_clusters_majority_attributes():
    g = task_graph(
        {
            0: dict(n_instructions=10, affinity=AffinityClass.CRYPTO, sec=SecurityClass.CRYPTO_SECRET),
            1: dict(n_instructions=30, affinity=AffinityClass.LOOP),
            2: dict(n_instructions=5, affinity=AffinityClass.CRYPTO),
        }
    )
    clusters, edges = build_clusters(g, {0: 0, 1: 0, 2: 0})
    assert edges == {}
    info = clusters[0]
    assert info.n_instructions == 45
    assert info.affinity == AffinityClass.LOOP
    assert info.sec == SecurityClass.CRYPTO_SECRET
    assert info.sensitive_tasks == 1


def test_build_clusters_aggregates_cross_edges():
    g = task_graph(
        {i: dict(n_instructions=1) for i in range(4)},
        {(0, 2): 5, (1, 2): 7, (2, 3): 2, (0, 1): 9},
    )
    _, edges = build_clusters(g, {0: 0, 1: 0, 2: 1, 3: 1})
    assert edges == {(0, 1): 12}


def test_acyclic_clusters_merges_mutual_dependencies():
    g = task_graph(
        {i: dict(n_instructions=1) for i in range(4)},
        {(0, 1): 1, (1, 2): 1, (2, 0): 1, (2, 3): 1},
    )
    merged = acyclic_clusters(g, {0: 0, 1: 1, 2: 2, 3: 3})
    assert merged[0] == merged[1] == merged[2]
    assert merged[3] != merged[0]
    # idempotent on already-acyclic partitions
    assert acyclic_clusters(g, merged) == merged


# -- event algebra ----------------------------------------------------------------


def test_single_cluster_single_pe():
    arch = single_pe_arch("cpu")
    g = task_graph({0: dict(n_instructions=7)})
    env = Env(arch, g, {0: 0}, rng=random.Random(0))
    report = env.run()
    kinds = [(e.kind, e.time) for e in report.events]
    assert (TASK_START, 0) in kinds
    assert (TASK_FINISH, 7) in kinds
    assert report.makespan == 7
    assert report.total_comm_bytes_hops == 0


def test_two_independent_clusters_start_together():
    arch = build_arch(mesh_arch_config(1, 2, subtype_cycle=("cpu",), me_perimeter=False))
    g = task_graph({0: dict(n_instructions=5), 1: dict(n_instructions=5)})
    env = Env(arch, g, {0: 0, 1: 1}, agents=2, rng=random.Random(0))
    report = env.run()
    starts = [e for e in report.events if e.kind == TASK_START]
    assert len(starts) == 2
    assert all(e.time == 0 for e in starts)


def test_chain_start_equals_finish_plus_comm_time():
    # A general task then a matrix-multiply task; greedy-nearest maps them to
    # the CPU and the MM accelerator, so the 64-byte message crosses the NoC.
    arch = build_arch(
        {
            "elements": [
                {"id": 0, "kind": "ce"},
                {"id": 1, "kind": "ce"},
                {"id": 2, "kind": "pe", "subtype": "cpu"},
                {"id": 3, "kind": "pe", "subtype": "hwa_mm"},
            ],
            "links": [
                {"a": 0, "b": 1, "bandwidth": 32, "latency": 1},
                {"a": 0, "b": 2, "bandwidth": 32, "latency": 1},
                {"a": 1, "b": 3, "bandwidth": 32, "latency": 1},
            ],
        }
    )
    g = task_graph(
        {
            0: dict(n_instructions=10),
            1: dict(n_instructions=8, affinity=AffinityClass.MATRIX_MUL),
        },
        {(0, 1): 64},
    )
    env = Env(arch, g, {0: 0, 1: 1}, mapper="greedy-nearest", rng=random.Random(0))
    report = env.run()
    finish_a = next(e.time for e in report.events if e.kind == TASK_FINISH and e.payload["cluster"] == 0)
    start_b = next(e.time for e in report.events if e.kind == TASK_START and e.payload["cluster"] == 1)
    loc = {e.payload["cluster"]: e.payload["element"] for e in report.events if e.kind == TASK_START}
    assert loc[0] == 2 and loc[1] == 3
    hops = arch.hop_distance(2, 3)
    assert start_b == finish_a + comm_time(64, hops, 32, 1)


def test_no_start_before_messages_delivered():
    arch = build_arch(mesh_arch_config(2, 2))
    instrs = clustered_instructions(groups=2, tasks_per_group=6, seed=9)
    g = build_idg(instrs)
    part = acyclic_clusters(g, detect_communities(g))
    env = Env(arch, g, part, agents=2, rng=random.Random(1))
    report = env.run()
    start_at = {
        e.payload["cluster"]: e.time for e in report.events if e.kind == TASK_START
    }
    for e in report.events:
        if e.kind == MESSAGE_DELIVERED:
            assert e.time <= start_at[e.payload["dst"]]


def test_event_log_times_non_decreasing_and_replay_matches():
    arch = build_arch(mesh_arch_config(2, 3))
    instrs = clustered_instructions(groups=3, tasks_per_group=5, seed=4)
    g = build_idg(instrs)
    part = acyclic_clusters(g, detect_communities(g))
    params = SimParams()
    env = Env(arch, g, part, agents=3, sim=params, rng=random.Random(2))
    report = env.run()
    times = [e.time for e in report.events]
    assert times == sorted(times)
    replay = summarize_events(report.events, arch=arch, params=params)
    assert replay["makespan"] == report.makespan
    assert replay["total_comm_bytes_hops"] == report.total_comm_bytes_hops
    assert replay["violations"] == report.violations
    assert replay["energy"] == pytest.approx(report.energy)


def test_makespan_at_least_critical_path_bound():
    # Longest-path oracle over the cluster DAG with best-case execution times.
    for seed in range(5):
        arch = build_arch(mesh_arch_config(2, 2))
        instrs = clustered_instructions(groups=2, tasks_per_group=4, seed=seed)
        g = build_idg(instrs)
        part = acyclic_clusters(g, detect_communities(g))
        env = Env(arch, g, part, agents=2, rng=random.Random(seed))
        clusters, edges = env.clusters, env.cluster_edges
        subtypes = {el.subtype for el in arch.pes()}
        best = {
            cid: min(
                math.ceil(info.n_instructions / SPEEDUP.get((info.affinity, st), 1.0))
                for st in subtypes
            )
            for cid, info in clusters.items()
        }
        succs = {}
        for (a, b) in edges:
            succs.setdefault(a, []).append(b)
        memo = {}

        def longest(cid):
            if cid not in memo:
                memo[cid] = best[cid] + max(
                    (longest(s) for s in succs.get(cid, [])), default=0
                )
            return memo[cid]

        bound = max(longest(c) for c in clusters)
        report = env.run()
        assert report.makespan >= bound


def test_occupancy_invariant_checked_every_step():
    arch = build_arch(mesh_arch_config(2, 2))
    instrs = independent_instructions(40, seed=6)
    g = build_idg(instrs)
    env = Env(arch, g, singleton_partition(g), agents=2, workload_cap=2, rng=random.Random(3))
    report = env.run()  # _assert_occupancy runs inside every step
    assert env.pool.max_in_flight_seen <= 2
    assert report.makespan > 0


# -- attacks ---------------------------------------------------------------------


def _secure_graph():
    return task_graph(
        {
            0: dict(n_instructions=6, sec=SecurityClass.CRYPTO_SECRET, affinity=AffinityClass.CRYPTO),
            1: dict(n_instructions=6),
        }
    )


def test_attack_sets_flag_and_counts_violation():
    arch = single_pe_arch("hwa_crypto")
    env = Env(arch, _secure_graph(), {0: 0, 1: 1}, rng=random.Random(0), attacks=[(0, 1)])
    report = env.run()
    assert arch.element(1).compromised
    assert report.violations == 1  # only the crypto-secret task counts
    assert report.sensitive_tasks == 1
    assert report.security_score == 0.0
    assert any(e.kind == ATTACK_INJECTED for e in report.events)


def test_attack_on_unknown_element_rejected():
    arch = single_pe_arch("cpu")
    with pytest.raises(ArchError, match="999"):
        Env(arch, _secure_graph(), {0: 0, 1: 1}, attacks=[(0, 999)])


def test_attack_on_unused_element_changes_nothing_else():
    arch = build_arch(mesh_arch_config(2, 2))
    me_id = max(arch.elements)  # perimeter ME, never executes tasks
    g = task_graph({0: dict(n_instructions=9)})

    base = Env(arch, g, {0: 0}, rng=random.Random(5)).run()
    attacked = Env(arch, g, {0: 0}, rng=random.Random(5), attacks=[(0, me_id)]).run()
    assert attacked.makespan == base.makespan
    assert attacked.total_comm_bytes_hops == base.total_comm_bytes_hops
    assert attacked.violations == base.violations == 0
    assert attacked.security_score == base.security_score
    kinds = [e for e in attacked.events if e.kind != ATTACK_INJECTED]
    assert [(e.kind, e.time, e.payload) for e in kinds] == [
        (e.kind, e.time, e.payload) for e in base.events
    ]


def test_attack_must_not_be_in_the_past():
    arch = single_pe_arch("cpu")
    env = Env(arch, task_graph({0: dict(n_instructions=3)}), {0: 0})
    env.now = 10
    with pytest.raises(ValueError, match="past"):
        env.inject_attack(5, 1)


# -- full runs --------------------------------------------------------------------


def test_empty_task_graph():
    arch = single_pe_arch("cpu")
    report = Env(arch, TaskGraph(nodes={}, edges={}), {}).run()
    assert report.makespan == 0
    assert report.security_score == 1.0
    assert report.events == []


def test_mini_trace_on_one_cpu():
    arch = single_pe_arch("cpu")
    g = build_idg(parse_trace(MINI_TRACE))
    report = Env(arch, g, {0: 0}, rng=random.Random(0)).run()
    assert report.makespan == 3
    assert report.total_comm_bytes_hops == 0


def test_arch_invariants_hold_after_simulation():
    arch = build_arch(mesh_arch_config(2, 2, reconfigurable=True))
    instrs = clustered_instructions(groups=2, tasks_per_group=5, seed=14)
    g = build_idg(instrs)
    part = acyclic_clusters(g, detect_communities(g))
    Env(arch, g, part, agents=2, rng=random.Random(0), epsilon=0.5, attacks=[(2, 4)]).run()
    arch.validate()  # mutation (availability/compromised/logic) broke nothing


def test_identical_seeds_reproduce_reports():
    arch = build_arch(mesh_arch_config(2, 2))
    instrs = clustered_instructions(groups=2, tasks_per_group=5, seed=8)
    g = build_idg(instrs)
    part = acyclic_clusters(g, detect_communities(g))

    def run_once():
        env = Env(arch, g, part, agents=2, rng=random.Random(42), attacks=[(3, 4)])
        r = env.run()
        return (
            r.makespan,
            r.total_comm_bytes_hops,
            r.energy,
            r.violations,
            [(e.time, e.kind, tuple(e.payload.items())) for e in r.events],
        )

    assert run_once() == run_once()


def test_deadlock_reports_cycle():
    g = task_graph(
        {0: dict(n_instructions=2), 1: dict(n_instructions=2)},
        {(0, 1): 4, (1, 0): 4},
    )
    arch = single_pe_arch("cpu")
    env = Env(arch, g, {0: 0, 1: 1}, rng=random.Random(0))
    with pytest.raises(DeadlockError) as info:
        env.run()
    assert set(info.value.cycle) >= {0, 1}
    assert "cycle" in str(info.value)


def test_reconfiguration_delay_and_logic_switch():
    # One reconfigurable binary PE, a ternary-preferring task; with eps=1 the
    # seeded explorer eventually picks the reconfigure action.
    arch = build_arch(
        {
            "elements": [
                {"id": 0, "kind": "ce"},
                {"id": 1, "kind": "pe", "subtype": "cpu", "reconfigurable": True},
            ],
            "links": [{"a": 0, "b": 1}],
        }
    )
    g = task_graph({0: dict(n_instructions=4, logic=LogicType.TERNARY)})
    seen = None
    for seed in range(10):
        env = Env(arch, g, {0: 0}, rng=random.Random(seed), epsilon=1.0)
        report = env.run()
        recon = [e for e in report.events if e.kind == RECONFIG_DONE]
        if recon:
            seen = (report, recon[0])
            break
    assert seen is not None, "exploration never picked the reconfigure action"
    report, recon = seen
    params = SimParams()
    assert recon.time == params.reconfig_delay
    start = next(e for e in report.events if e.kind == TASK_START)
    assert start.time == params.reconfig_delay
    # logic now matches: no mismatch doubling
    finish = next(e for e in report.events if e.kind == TASK_FINISH)
    assert finish.time == params.reconfig_delay + 4


def test_busy_pick_migrates_or_requeues():
    # Two clusters, one PE: second decision must requeue (no idle element).
    arch = single_pe_arch("cpu")
    g = task_graph({0: dict(n_instructions=5), 1: dict(n_instructions=5)})
    env = Env(arch, g, {0: 0, 1: 1}, agents=2, rng=random.Random(0))
    report = env.run()
    starts = sorted(e.time for e in report.events if e.kind == TASK_START)
    assert starts == [0, 5]  # serialized on the single PE
    assert report.makespan == 10


# -- scenario files ---------------------------------------------------------------


def write_scenario(tmp_path, body):
    path = tmp_path / "scenario.ini"
    path.write_text(body)
    return str(path)


def test_scenario_roundtrip(tmp_path):
    (tmp_path / "arch.json").write_text("{}")
    (tmp_path / "app.trace").write_text("")
    path = write_scenario(
        tmp_path,
        """[paths]
arch = arch.json
trace = app.trace

[sim]
seed = 9
agents = 3
episodes = 4
workload_cap = 2
clustering = false

[rl]
alpha = 0.2
epsilon = 0.05

[quality]
lambda_sec = 0.25

[energy]
cpu = 2.0
idle = 0.2

[attacks]
attack 10 4
attack 0 2
""",
    )
    sc = load_scenario(path)
    assert sc.arch_path.endswith("arch.json") and sc.trace_path.endswith("app.trace")
    assert (sc.seed, sc.agents, sc.episodes, sc.workload_cap) == (9, 3, 4, 2)
    assert sc.clustering is False
    assert sc.rl.alpha == 0.2 and sc.rl.epsilon == 0.05 and sc.rl.gamma == 0.9
    assert sc.quality.lambda_sec == 0.25
    assert sc.sim.busy_energy[PESubtype.CPU] == 2.0
    assert sc.sim.idle_energy == 0.2
    assert sc.attacks == [(10, 4), (0, 2)]


def test_scenario_unknown_key_rejected(tmp_path):
    path = write_scenario(tmp_path, "[paths]\narch = a\ntrace = t\n\n[rl]\nbogus = 1\n")
    with pytest.raises(ScenarioError, match="bogus"):
        load_scenario(path)


def test_scenario_missing_paths_rejected(tmp_path):
    path = write_scenario(tmp_path, "[sim]\nseed = 1\n")
    with pytest.raises(ScenarioError, match="paths"):
        load_scenario(path)


def test_scenario_bad_attack_line_rejected(tmp_path):
    path = write_scenario(
        tmp_path, "[paths]\narch = a\ntrace = t\n\n[attacks]\nattack five 3\n"
    )
    with pytest.raises(ScenarioError, match="attack"):
        load_scenario(path)
