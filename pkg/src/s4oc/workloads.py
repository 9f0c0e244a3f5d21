"""Synthetic traces and architecture descriptions for experiments and tests."""

from __future__ import annotations

import random

from .trace import AffinityClass, Instruction, SecurityClass

OPCODES = ("add", "sub", "mul", "and", "or", "xor", "shl", "load", "store")

GROUP_AFFINITIES = (
    AffinityClass.GENERAL,
    AffinityClass.LOOP,
    AffinityClass.MATRIX_MUL,
    AffinityClass.CRYPTO,
    AffinityClass.FFT,
)


def random_instructions(
    n: int,
    n_registers: int = 50,
    n_tasks: int = 1,
    seed: int = 0,
    max_srcs: int = 3,
    dstless_fraction: float = 0.1,
    opcodes=OPCODES,
) -> list[Instruction]:
    """Uniformly random instruction stream over a bounded register pool."""
    rng = random.Random(seed)
    regs = [f"%r{i}" for i in range(n_registers)]
    out = []
    for i in range(n):
        srcs = [rng.choice(regs) for _ in range(rng.randint(0, max_srcs))]
        dst = None if rng.random() < dstless_fraction else rng.choice(regs)
        out.append(
            Instruction(
                index=i,
                dst=dst,
                opcode=rng.choice(opcodes),
                srcs=srcs,
                size=rng.randint(1, 64),
                task=rng.randrange(n_tasks),
            )
        )
    return out


def trace_info(instructions: list[Instruction]) -> dict:
    """Ground-truth counters for generated traces."""
    return {
        "instructions": len(instructions),
        "distinct_dsts": len({i.dst for i in instructions if i.dst is not None}),
        "tasks": len({i.task for i in instructions}),
    }


def clustered_instructions(
    groups: int = 8,
    tasks_per_group: int = 8,
    instr_per_task: int = 18,
    seed: int = 0,
    cross_fraction: float = 0.1,
    reads_per_task: int = 3,
    export_size: int = 64,
    secure_group: int | None = None,
) -> list[Instruction]:
    """Task stream whose dependency graph has group-shaped communities.

    Each task reads the export registers of earlier tasks, mostly from its
    own group, so intra-group byte traffic dominates. ``secure_group`` marks
    one group's tasks crypto-secret with crypto-flavored opcodes.
    """
    rng = random.Random(seed)
    out: list[Instruction] = []
    n_tasks = groups * tasks_per_group
    for task in range(n_tasks):
        group = task // tasks_per_group
        donors: list[int] = []
        for _ in range(reads_per_task):
            group_start = group * tasks_per_group
            in_group = [t for t in range(group_start, task)]
            earlier = list(range(task))
            if in_group and rng.random() >= cross_fraction:
                donors.append(rng.choice(in_group))
            elif earlier:
                donors.append(rng.choice(earlier))
        crypto = secure_group is not None and group == secure_group
        opcodes = ("aes_enc", "xor", "sha_round", "add") if crypto else OPCODES
        for j in range(instr_per_task):
            srcs = []
            if j > 0:
                srcs.append(f"%t{task}_{j - 1}")
            if j < len(donors):
                srcs.append(f"%t{donors[j]}_x")
            out.append(
                Instruction(
                    index=len(out),
                    dst=f"%t{task}_{j}",
                    opcode=rng.choice(opcodes),
                    srcs=srcs,
                    size=rng.randint(4, 16),
                    task=task,
                    affinity=GROUP_AFFINITIES[group % len(GROUP_AFFINITIES)] if j == 0 else None,
                    sec=SecurityClass.CRYPTO_SECRET if crypto and j == 0 else None,
                )
            )
        out.append(
            Instruction(
                index=len(out),
                dst=f"%t{task}_x",
                opcode="add",
                srcs=[f"%t{task}_{instr_per_task - 1}"],
                size=export_size,
                task=task,
            )
        )
    return out


def independent_instructions(
    n_tasks: int,
    min_instr: int = 3,
    max_instr: int = 9,
    seed: int = 0,
) -> list[Instruction]:
    """Many dependency-free tasks; stresses queueing rather than the network."""
    rng = random.Random(seed)
    out: list[Instruction] = []
    for task in range(n_tasks):
        k = rng.randint(min_instr, max_instr)
        for j in range(k):
            srcs = [f"%u{task}_{j - 1}"] if j > 0 else []
            out.append(
                Instruction(
                    index=len(out),
                    dst=f"%u{task}_{j}",
                    opcode=rng.choice(OPCODES),
                    srcs=srcs,
                    size=4,
                    task=task,
                )
            )
    return out


def mesh_arch_config(
    rows: int,
    cols: int,
    subtype_cycle=("cpu", "gpu", "cpu", "hwa_mm"),
    logic_cycle=("binary",),
    reconfigurable: bool = False,
    me_perimeter: bool = True,
    bandwidth: int = 32,
    latency: int = 1,
) -> dict:
    """JSON-ready mesh description: rows x cols CEs, one PE per CE, MEs on
    the perimeter."""
    pes = [
        {
            "subtype": subtype_cycle[i % len(subtype_cycle)],
            "logic": logic_cycle[i % len(logic_cycle)],
            "reconfigurable": reconfigurable,
        }
        for i in range(rows * cols)
    ]
    mes = []
    if me_perimeter:
        for r in range(rows):
            for c in range(cols):
                if r in (0, rows - 1) or c in (0, cols - 1):
                    mes.append({"row": r, "col": c})
    return {
        "mesh": {
            "rows": rows,
            "cols": cols,
            "pes": pes,
            "mes": mes,
            "bandwidth": bandwidth,
            "latency": latency,
        }
    }
