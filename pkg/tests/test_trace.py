import random

import pytest

from conftest import MINI_TRACE
from s4oc.arch import LogicType
from s4oc.trace import (
    AffinityClass,
    ClassifierThresholds,
    Instruction,
    SecurityClass,
    TaskNode,
    TraceError,
    build_dag,
    build_idg,
    classify_affinity,
    parse_trace,
    serialize_trace,
)
from s4oc.workloads import random_instructions


def brute_force_edges(instructions):
    """O(N^2) backward-scan dependency oracle: for every distinct source
    register, walk backwards to the most recent writer."""
    edges = set()
    free = 0
    for j, ins in enumerate(instructions):
        for reg in dict.fromkeys(ins.srcs):
            producer = None
            for i in range(j - 1, -1, -1):
                if instructions[i].dst == reg:
                    producer = i
                    break
            if producer is None:
                free += 1
            else:
                edges.add(
                    (
                        instructions[producer].index,
                        ins.index,
                        instructions[producer].size,
                    )
                )
    return edges, free


# -- parsing ------------------------------------------------------------------


def test_parse_mini_trace():
    instrs = parse_trace(MINI_TRACE)
    assert len(instrs) == 3
    assert [i.dst for i in instrs] == ["%4", "%5", "%6"]
    assert [i.opcode for i in instrs] == ["and", "mul", "add"]
    assert instrs[0].srcs == ["%2", "%3"]
    assert all(i.size == 4 and i.task == 0 for i in instrs)


def test_parse_empty_file():
    assert parse_trace("") == []
    assert parse_trace("# only a comment\n\n") == []


def test_parse_error_on_missing_commas():
    with pytest.raises(TraceError, match="line 1"):
        parse_trace("add %4 %5\n")


def test_parse_error_names_line():
    text = "%1 = add %0\n%2 = bogus op\n"
    with pytest.raises(TraceError, match="line 2"):
        parse_trace(text)


def test_unknown_annotation_key_rejected():
    with pytest.raises(TraceError, match="unknown annotation key 'wat'"):
        parse_trace("%1 = add %0 ; wat=3\n")


def test_task_annotation_is_sticky():
    text = "%1 = add ; task=2\n%2 = sub\n%3 = mul ; task=5\n%4 = add\n"
    tasks = [i.task for i in parse_trace(text)]
    assert tasks == [2, 2, 5, 5]


def test_annotations_parse():
    text = "%1 = aes_enc %0 ; size=16 ; affinity=crypto ; logic=ternary ; sec=cryptosecret ; backedge=1\n"
    (ins,) = parse_trace(text)
    assert ins.size == 16
    assert ins.affinity == AffinityClass.CRYPTO
    assert ins.logic == LogicType.TERNARY
    assert ins.sec == SecurityClass.CRYPTO_SECRET
    assert ins.backedge == 1


def test_dstless_instruction_and_comments():
    text = "store %1, %2 ; size=8  # spill\nbr %3\n"
    instrs = parse_trace(text)
    assert [i.dst for i in instrs] == [None, None]
    assert instrs[0].opcode == "store"
    assert instrs[0].size == 8


def test_bad_size_rejected():
    with pytest.raises(TraceError, match="size"):
        parse_trace("%1 = add ; size=0\n")


def test_roundtrip_mini_trace():
    instrs = parse_trace(MINI_TRACE)
    assert parse_trace(serialize_trace(instrs)) == instrs


def test_roundtrip_random_traces():
    for seed in range(10):
        instrs = random_instructions(80, n_registers=20, n_tasks=4, seed=seed)
        assert parse_trace(serialize_trace(instrs)) == instrs


# -- dependence DAG -----------------------------------------------------------


def test_mini_trace_dag_edges():
    dag = build_dag(parse_trace(MINI_TRACE))
    assert {(a, b) for a, b, _ in dag.edges} == {(0, 1), (0, 2), (1, 2)}
    assert dag.free_inputs == 3  # %2, %3 for the first read, %2 again later


def test_single_instruction_dag():
    dag = build_dag([Instruction(index=0, dst="%1", opcode="add", srcs=[])])
    assert dag.edges == []
    assert dag.free_inputs == 0


def test_repeated_source_register_yields_one_edge():
    instrs = parse_trace("%1 = add\n%2 = mul %1, %1\n")
    dag = build_dag(instrs)
    assert dag.edges == [(0, 1, 4)]


def test_edges_are_forward_only():
    for seed in range(20):
        instrs = random_instructions(120, n_registers=15, seed=seed)
        dag = build_dag(instrs)
        assert all(a < b for a, b, _ in dag.edges)


def test_dag_matches_quadratic_oracle():
    for seed in range(100):
        rng = random.Random(seed)
        instrs = random_instructions(
            rng.randint(1, 200),
            n_registers=rng.randint(1, 50),
            seed=seed,
            dstless_fraction=0.2,
        )
        dag = build_dag(instrs)
        oracle_edges, oracle_free = brute_force_edges(instrs)
        assert set(dag.edges) == oracle_edges
        assert len(dag.edges) == len(oracle_edges)
        assert dag.free_inputs == oracle_free


def test_dag_on_task_subset_uses_trace_indices():
    instrs = parse_trace(MINI_TRACE)
    for i in instrs:
        i.task = 0 if i.index < 2 else 1
    subset = [i for i in instrs if i.task == 0]
    dag = build_dag(subset)
    assert {(a, b) for a, b, _ in dag.edges} == {(0, 1)}


# -- task graph ---------------------------------------------------------------


def test_idg_single_task():
    graph = build_idg(parse_trace(MINI_TRACE))
    assert sorted(graph.nodes) == [0]
    assert graph.edges == {}
    node = graph.nodes[0]
    assert node.n_instructions == 3
    assert node.opcode_hist == {"add": 1, "and": 1, "mul": 1}


def test_idg_cross_task_weight():
    # First two instructions in task 0, third in task 1; both reads of the
    # third instruction cross tasks at the default 4 bytes each.
    instrs = parse_trace(MINI_TRACE)
    for i in instrs:
        i.task = 0 if i.index < 2 else 1
    graph = build_idg(instrs)
    assert graph.edges == {(0, 1): 8}


def test_idg_matches_oracle_grouping():
    for seed in range(30):
        instrs = random_instructions(150, n_registers=25, n_tasks=5, seed=seed)
        graph = build_idg(instrs)
        oracle_edges, _ = brute_force_edges(instrs)
        expected = {}
        by_index = {i.index: i for i in instrs}
        for a, b, w in oracle_edges:
            ta, tb = by_index[a].task, by_index[b].task
            if ta != tb:
                expected[(ta, tb)] = expected.get((ta, tb), 0) + w
        assert graph.edges == expected


def test_idg_weight_sum_bounded_by_fanout():
    instrs = random_instructions(200, n_registers=10, n_tasks=4, seed=5)
    graph = build_idg(instrs)
    max_fanout = max(len(i.srcs) for i in instrs)
    assert sum(graph.edges.values()) <= sum(i.size for i in instrs) * max(1, max_fanout)


def test_idg_memory_footprint_and_free_inputs():
    text = "%1 = load %p ; size=32 ; task=0\nstore %1, %p ; size=16\n%2 = add %9\n"
    graph = build_idg(parse_trace(text))
    node = graph.nodes[0]
    assert node.mem_bytes == 48
    assert node.free_inputs == 3  # %p read twice, %9 once; none ever written


# -- affinity classifier -------------------------------------------------------


def _node(hist, backedges=0, annotation=None):
    return TaskNode(
        task=0,
        n_instructions=sum(hist.values()),
        opcode_hist=hist,
        backedges=backedges,
        affinity_annotation=annotation,
    )


def test_annotation_beats_histogram():
    node = _node({"mul": 100}, annotation=AffinityClass.FFT)
    assert classify_affinity(node) == AffinityClass.FFT


def test_pure_mul_is_matrix_mul():
    assert classify_affinity(_node({"mul": 100})) == AffinityClass.MATRIX_MUL


def test_mixed_below_thresholds_is_general():
    hist = {"add": 10, "mul": 3, "xor": 2, "shuffle": 1, "sub": 10}
    assert classify_affinity(_node(hist)) == AffinityClass.GENERAL


def test_crypto_rule():
    assert classify_affinity(_node({"aes_enc": 3, "xor": 2, "add": 5})) == AffinityClass.CRYPTO


def test_fft_rule():
    assert classify_affinity(_node({"butterfly": 3, "add": 7})) == AffinityClass.FFT


def test_loop_rule_via_backedges():
    assert classify_affinity(_node({"add": 10}, backedges=2)) == AffinityClass.LOOP
    assert classify_affinity(_node({"add": 10}, backedges=1)) == AffinityClass.GENERAL


def test_threshold_override():
    loose = ClassifierThresholds(matrix_mul=0.2)
    hist = {"mul": 3, "add": 7}
    assert classify_affinity(_node(hist)) == AffinityClass.GENERAL
    assert classify_affinity(_node(hist), loose) == AffinityClass.MATRIX_MUL


def test_idg_applies_annotations_and_defaults():
    text = (
        "%1 = add ; task=0 ; affinity=loop ; sec=sidechannel ; logic=quaternary\n"
        "%2 = add ; task=1\n"
    )
    graph = build_idg(parse_trace(text))
    assert graph.nodes[0].affinity == AffinityClass.LOOP
    assert graph.nodes[0].sec == SecurityClass.SIDE_CHANNEL
    assert graph.nodes[0].logic == LogicType.QUATERNARY
    assert graph.nodes[1].affinity == AffinityClass.GENERAL
    assert graph.nodes[1].sec == SecurityClass.PLAIN
    assert graph.nodes[1].logic == LogicType.BINARY


# -- file formats --------------------------------------------------------------


def test_idg_file_roundtrip(tmp_path):
    instrs = random_instructions(120, n_registers=20, n_tasks=6, seed=11)
    graph = build_idg(instrs)
    edges = tmp_path / "idg_edges.txt"
    nodes = tmp_path / "idg_nodes.txt"
    from s4oc.trace import read_idg, write_idg

    write_idg(graph, str(edges), str(nodes))
    loaded = read_idg(str(edges), str(nodes))
    assert loaded.edges == graph.edges
    assert set(loaded.nodes) == set(graph.nodes)
    for t in graph.nodes:
        a, b = graph.nodes[t], loaded.nodes[t]
        assert (a.n_instructions, a.affinity, a.logic, a.sec) == (
            b.n_instructions,
            b.affinity,
            b.logic,
            b.sec,
        )
        assert a.opcode_hist == b.opcode_hist


def test_kernel_selection_and_fallback_agree():
    from s4oc import _depscan_py
    from s4oc.trace import _depscan, _intern

    instrs = random_instructions(500, n_registers=40, seed=21, dstless_fraction=0.15)
    args = _intern(instrs)
    got = _depscan.scan_last_writers(*args)
    want = _depscan_py.scan_last_writers(*args)
    assert list(got[0]) == list(want[0])
    assert list(got[1]) == list(want[1])
    assert got[2] == want[2]
