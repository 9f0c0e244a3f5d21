"""Pure-Python fallback for the last-writer dependency scan kernel."""

COMPILED = False


def scan_last_writers(dst_ids, src_ids, src_offsets, n_regs):
    """Scan interned instructions for register data dependencies.

    dst_ids[j] is the register written by instruction j (-1 for none),
    src_ids[src_offsets[j]:src_offsets[j+1]] are the registers it reads.
    Returns (producers, consumers, free_inputs) where edge k runs from
    instruction producers[k] to consumers[k], and free_inputs counts reads
    of registers with no prior writer.
    """
    last = [-1] * n_regs
    producers = []
    consumers = []
    free_inputs = 0
    add_p = producers.append
    add_c = consumers.append
    for j in range(len(dst_ids)):
        for s in range(src_offsets[j], src_offsets[j + 1]):
            i = last[src_ids[s]]
            if i >= 0:
                add_p(i)
                add_c(j)
            else:
                free_inputs += 1
        d = dst_ids[j]
        if d >= 0:
            last[d] = j
    return producers, consumers, free_inputs
