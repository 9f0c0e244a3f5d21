"""IR-style trace parsing, instruction dependence DAGs, and the weighted task graph.

Trace grammar, one instruction per line::

    [%dst =] <opcode> [%src1[, %src2 ...]] [; key=value ...]

``#`` starts a comment (rest of line). Annotation keys: ``size`` (bytes
produced, default 4), ``task`` (sticky: applies to this and subsequent lines
until changed), ``affinity``, ``logic``, ``sec``, ``backedge``. Empty
annotation segments are ignored, so a bare trailing ``;`` is legal.

Dependence edges and the task graph both follow last-writer semantics: an
instruction depends on the most recent earlier instruction that wrote one of
its source registers. The scan is O(N) dictionary work over N instructions
(one last-writer slot per distinct destination register); the inner loop runs
in the compiled ``_depscan`` kernel when it is available.
"""

from __future__ import annotations

import os
import re
from array import array
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum

from .arch import LogicType, parse_logic

if os.environ.get("S4OC_PURE_PYTHON"):
    from . import _depscan_py as _depscan
else:
    try:
        from . import _depscan  # type: ignore[no-redef]
    except ImportError:
        from . import _depscan_py as _depscan  # type: ignore[no-redef]


def active_kernel() -> str:
    """Name of the dependency-scan implementation selected at import."""
    return "compiled" if _depscan.COMPILED else "pure-python"


class TraceError(ValueError):
    """Malformed trace input; carries the 1-based line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class AffinityClass(Enum):
    LOOP = "loop"
    FFT = "fft"
    MATRIX_MUL = "matrixmul"
    CRYPTO = "crypto"
    GENERAL = "general"


class SecurityClass(Enum):
    PLAIN = "plain"
    SIDE_CHANNEL = "sidechannel"
    CRYPTO_SECRET = "cryptosecret"


def security_rank(sec: SecurityClass) -> int:
    return [SecurityClass.PLAIN, SecurityClass.SIDE_CHANNEL, SecurityClass.CRYPTO_SECRET].index(sec)


DEFAULT_SIZE = 4

_AFFINITY_ALIASES = {m.value: m for m in AffinityClass}
_AFFINITY_ALIASES["mm"] = AffinityClass.MATRIX_MUL
_AFFINITY_ALIASES["matrix_mul"] = AffinityClass.MATRIX_MUL
_SEC_ALIASES = {m.value: m for m in SecurityClass}
_SEC_ALIASES["side_channel"] = SecurityClass.SIDE_CHANNEL
_SEC_ALIASES["crypto_secret"] = SecurityClass.CRYPTO_SECRET
_SEC_ALIASES["secret"] = SecurityClass.CRYPTO_SECRET

_REG_RE = re.compile(r"^%[A-Za-z0-9_.]+$")
_OPCODE_RE = re.compile(r"^[A-Za-z][A-Za-z0-9_.]*$")

MEMORY_OPCODES = frozenset({"load", "store"})


@dataclass
class Instruction:
    index: int
    dst: str | None
    opcode: str
    srcs: list[str]
    size: int = DEFAULT_SIZE
    task: int = 0
    affinity: AffinityClass | None = None
    logic: LogicType | None = None
    sec: SecurityClass | None = None
    backedge: int = 0


def _parse_annotation(lineno: int, key: str, value: str, instr: Instruction, state: dict) -> None:
    if key == "size":
        try:
            size = int(value)
        except ValueError:
            raise TraceError(lineno, f"size must be an integer, got {value!r}") from None
        if size < 1:
            raise TraceError(lineno, f"size must be >= 1, got {size}")
        instr.size = size
    elif key == "task":
        try:
            state["task"] = int(value)
        except ValueError:
            raise TraceError(lineno, f"task must be an integer, got {value!r}") from None
        instr.task = state["task"]
    elif key == "affinity":
        tok = value.strip().lower()
        if tok not in _AFFINITY_ALIASES:
            raise TraceError(lineno, f"unknown affinity class {value!r}")
        instr.affinity = _AFFINITY_ALIASES[tok]
    elif key == "logic":
        try:
            instr.logic = parse_logic(value)
        except ValueError:
            raise TraceError(lineno, f"unknown logic type {value!r}") from None
    elif key == "sec":
        tok = value.strip().lower()
        if tok not in _SEC_ALIASES:
            raise TraceError(lineno, f"unknown security class {value!r}")
        instr.sec = _SEC_ALIASES[tok]
    elif key == "backedge":
        try:
            instr.backedge = int(value)
        except ValueError:
            raise TraceError(lineno, f"backedge must be an integer, got {value!r}") from None
    else:
        raise TraceError(lineno, f"unknown annotation key {key!r}")


def parse_trace(text: str) -> list[Instruction]:
    """Parse trace text into one Instruction per non-comment line, in order."""
    instructions: list[Instruction] = []
    state = {"task": 0}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        segments = line.split(";")
        head = segments[0].strip()
        if not head:
            raise TraceError(lineno, "annotation with no instruction")

        dst: str | None = None
        if "=" in head:
            dst_part, _, head = head.partition("=")
            dst = dst_part.strip()
            head = head.strip()
            if not _REG_RE.match(dst):
                raise TraceError(lineno, f"bad destination register {dst!r}")
        parts = head.split(None, 1)
        opcode = parts[0]
        if not _OPCODE_RE.match(opcode):
            raise TraceError(lineno, f"bad opcode {opcode!r}")
        srcs: list[str] = []
        if len(parts) == 2:
            for tok in parts[1].split(","):
                tok = tok.strip()
                if not _REG_RE.match(tok):
                    raise TraceError(lineno, f"bad source register {tok!r}")
                srcs.append(tok)

        instr = Instruction(
            index=len(instructions),
            dst=dst,
            opcode=opcode.lower(),
            srcs=srcs,
            task=state["task"],
        )
        for seg in segments[1:]:
            seg = seg.strip()
            if not seg:
                continue
            key, eq, value = seg.partition("=")
            if not eq:
                raise TraceError(lineno, f"annotation {seg!r} is not key=value")
            _parse_annotation(lineno, key.strip().lower(), value.strip(), instr, state)
        instructions.append(instr)
    return instructions


def serialize_trace(instructions: list[Instruction]) -> str:
    """Inverse of parse_trace: parse(serialize(instrs)) == instrs."""
    lines = []
    current_task: int | None = None
    for ins in instructions:
        head = f"{ins.dst} = {ins.opcode}" if ins.dst else ins.opcode
        if ins.srcs:
            head += " " + ", ".join(ins.srcs)
        ann = [f"size={ins.size}"]
        if ins.task != (current_task if current_task is not None else 0):
            ann.append(f"task={ins.task}")
        current_task = ins.task
        if ins.affinity is not None:
            ann.append(f"affinity={ins.affinity.value}")
        if ins.logic is not None:
            ann.append(f"logic={ins.logic.value}")
        if ins.sec is not None:
            ann.append(f"sec={ins.sec.value}")
        if ins.backedge:
            ann.append(f"backedge={ins.backedge}")
        lines.append(head + " ; " + " ; ".join(ann))
    return "\n".join(lines) + ("\n" if lines else "")


# -- dependence scan --------------------------------------------------------


@dataclass
class InstructionDAG:
    """Data-dependence DAG over one instruction list.

    Edges are (producer index, consumer index, bytes) triples using the
    instructions' trace indices; every edge points forward, so the graph is
    acyclic by construction. free_inputs counts reads of registers never
    written earlier in the list (one per distinct register per instruction).
    """

    instructions: list[Instruction]
    edges: list[tuple[int, int, int]]
    free_inputs: int


def _intern(instructions: list[Instruction]):
    reg_ids: dict[str, int] = {}
    dst_ids = []
    src_ids = []
    src_offsets = [0]
    for ins in instructions:
        for reg in dict.fromkeys(ins.srcs):  # dedupe repeated reads, keep order
            src_ids.append(reg_ids.setdefault(reg, len(reg_ids)))
        src_offsets.append(len(src_ids))
        if ins.dst is None:
            dst_ids.append(-1)
        else:
            dst_ids.append(reg_ids.setdefault(ins.dst, len(reg_ids)))
    return (
        array("q", dst_ids),
        array("q", src_ids),
        array("q", src_offsets),
        len(reg_ids),
    )


def build_dag(instructions: list[Instruction]) -> InstructionDAG:
    """Build the last-writer dependence DAG; edge weight is the producer's size."""
    dst_ids, src_ids, src_offsets, n_regs = _intern(instructions)
    producers, consumers, free_inputs = _depscan.scan_last_writers(
        dst_ids, src_ids, src_offsets, n_regs
    )
    edges = [
        (instructions[p].index, instructions[c].index, instructions[p].size)
        for p, c in zip(producers, consumers)
    ]
    return InstructionDAG(instructions=instructions, edges=edges, free_inputs=free_inputs)


# -- task graph --------------------------------------------------------------


@dataclass
class ClassifierThresholds:
    """Rule-table cutoffs for affinity classification (fractions of the opcode mix)."""

    crypto: float = 0.30
    matrix_mul: float = 0.40
    fft: float = 0.25
    loop_backedges: int = 2


DEFAULT_THRESHOLDS = ClassifierThresholds()

_CRYPTO_OPS = frozenset({"xor", "rol", "ror", "rotl", "rotr"})
_MATMUL_OPS = frozenset({"mul", "fmul", "fma", "mad"})
_FFT_OPS = frozenset({"butterfly", "bfly", "shuffle", "shufflevector"})


def _is_crypto_op(op: str) -> bool:
    return op in _CRYPTO_OPS or op.startswith("aes") or op.startswith("sha")


@dataclass
class TaskNode:
    task: int
    n_instructions: int = 0
    opcode_hist: dict[str, int] = field(default_factory=dict)
    affinity: AffinityClass = AffinityClass.GENERAL
    logic: LogicType = LogicType.BINARY
    sec: SecurityClass = SecurityClass.PLAIN
    mem_bytes: int = 0
    backedges: int = 0
    free_inputs: int = 0
    affinity_annotation: AffinityClass | None = None


@dataclass
class TaskGraph:
    """Task-level dependency graph; edge weights aggregate cross-task bytes."""

    nodes: dict[int, TaskNode]
    edges: dict[tuple[int, int], int]

    def node_ids(self) -> list[int]:
        return sorted(self.nodes)

    def sorted_edges(self) -> list[tuple[int, int, int]]:
        return [(a, b, w) for (a, b), w in sorted(self.edges.items())]


def classify_affinity(
    node: TaskNode, thresholds: ClassifierThresholds = DEFAULT_THRESHOLDS
) -> AffinityClass:
    """Rule-based affinity: explicit annotation wins, then the opcode-mix table."""
    if node.affinity_annotation is not None:
        return node.affinity_annotation
    total = sum(node.opcode_hist.values())
    if total == 0:
        return AffinityClass.GENERAL
    crypto = sum(n for op, n in node.opcode_hist.items() if _is_crypto_op(op))
    if crypto / total >= thresholds.crypto:
        return AffinityClass.CRYPTO
    matmul = sum(n for op, n in node.opcode_hist.items() if op in _MATMUL_OPS)
    if matmul / total >= thresholds.matrix_mul:
        return AffinityClass.MATRIX_MUL
    fft = sum(n for op, n in node.opcode_hist.items() if op in _FFT_OPS)
    if fft / total >= thresholds.fft:
        return AffinityClass.FFT
    if node.backedges >= thresholds.loop_backedges:
        return AffinityClass.LOOP
    return AffinityClass.GENERAL


def build_idg(
    instructions: list[Instruction],
    thresholds: ClassifierThresholds = DEFAULT_THRESHOLDS,
) -> TaskGraph:
    """Aggregate the instruction-level dependence scan into the task graph.

    One node per distinct task label; an edge (a, b) sums the byte sizes of
    all dependencies whose producer lives in task a and consumer in task b.
    Per-task free_inputs count reads satisfied by no writer in any task.
    """
    nodes: dict[int, TaskNode] = {}
    hists: dict[int, Counter] = {}
    for ins in instructions:
        node = nodes.get(ins.task)
        if node is None:
            node = nodes[ins.task] = TaskNode(task=ins.task)
            hists[ins.task] = Counter()
        node.n_instructions += 1
        hists[ins.task][ins.opcode] += 1
        node.backedges += ins.backedge
        if ins.opcode in MEMORY_OPCODES:
            node.mem_bytes += ins.size
        if ins.affinity is not None:
            node.affinity_annotation = ins.affinity
        if ins.logic is not None:
            node.logic = ins.logic
        if ins.sec is not None:
            node.sec = ins.sec

    edges: dict[tuple[int, int], int] = {}
    dst_ids, src_ids, src_offsets, n_regs = _intern(instructions)
    producers, consumers, _ = _depscan.scan_last_writers(dst_ids, src_ids, src_offsets, n_regs)
    for p, c in zip(producers, consumers):
        ta, tb = instructions[p].task, instructions[c].task
        if ta != tb:
            key = (ta, tb)
            edges[key] = edges.get(key, 0) + instructions[p].size

    # Free inputs are per-task: rescan each task in isolation.
    by_task: dict[int, list[Instruction]] = {}
    for ins in instructions:
        by_task.setdefault(ins.task, []).append(ins)
    for task, node in nodes.items():
        node.opcode_hist = dict(sorted(hists[task].items()))
        node.free_inputs = build_dag(by_task[task]).free_inputs
        node.affinity = classify_affinity(node, thresholds)
    return TaskGraph(nodes=nodes, edges=edges)


# -- text formats -------------------------------------------------------------


def write_idg(graph: TaskGraph, edges_path: str, nodes_path: str) -> None:
    """Emit the edge list (`src dst bytes` lines) and the node-attribute table."""
    with open(edges_path, "w", encoding="utf-8") as fh:
        fh.write("# src dst bytes\n")
        for a, b, w in graph.sorted_edges():
            fh.write(f"{a} {b} {w}\n")
    with open(nodes_path, "w", encoding="utf-8") as fh:
        fh.write("# task n_instr affinity logic sec mem_bytes backedges free_inputs opcodes\n")
        for tid in graph.node_ids():
            n = graph.nodes[tid]
            hist = ",".join(f"{op}:{cnt}" for op, cnt in sorted(n.opcode_hist.items())) or "-"
            fh.write(
                f"{tid} {n.n_instructions} {n.affinity.value} {n.logic.value} "
                f"{n.sec.value} {n.mem_bytes} {n.backedges} {n.free_inputs} {hist}\n"
            )


def read_idg(edges_path: str, nodes_path: str) -> TaskGraph:
    nodes: dict[int, TaskNode] = {}
    edges: dict[tuple[int, int], int] = {}
    with open(nodes_path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 9:
                raise TraceError(lineno, f"node table row needs 9 fields, got {len(parts)}")
            tid = int(parts[0])
            hist = {}
            if parts[8] != "-":
                for item in parts[8].split(","):
                    op, _, cnt = item.partition(":")
                    hist[op] = int(cnt)
            nodes[tid] = TaskNode(
                task=tid,
                n_instructions=int(parts[1]),
                opcode_hist=hist,
                affinity=_AFFINITY_ALIASES[parts[2]],
                logic=parse_logic(parts[3]),
                sec=_SEC_ALIASES[parts[4]],
                mem_bytes=int(parts[5]),
                backedges=int(parts[6]),
                free_inputs=int(parts[7]),
            )
    with open(edges_path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise TraceError(lineno, f"edge row needs 3 fields, got {len(parts)}")
            a, b, w = int(parts[0]), int(parts[1]), int(parts[2])
            if w < 0:
                raise TraceError(lineno, f"negative edge weight {w}")
            for t in (a, b):
                if t not in nodes:
                    raise TraceError(lineno, f"edge references unknown task {t}")
            edges[(a, b)] = edges.get((a, b), 0) + w
    return TaskGraph(nodes=nodes, edges=edges)
