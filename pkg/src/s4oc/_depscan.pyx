# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""C kernel for the last-writer dependency scan over interned register ids."""

from array import array

from cpython.mem cimport PyMem_Free, PyMem_Malloc

COMPILED = True


def scan_last_writers(const long long[::1] dst_ids,
                      const long long[::1] src_ids,
                      const long long[::1] src_offsets,
                      Py_ssize_t n_regs):
    """Same contract as s4oc._depscan_py.scan_last_writers."""
    cdef Py_ssize_t n = dst_ids.shape[0]
    cdef Py_ssize_t total_srcs = src_ids.shape[0]
    cdef long long *last = NULL
    cdef long long *out_p = NULL
    cdef long long *out_c = NULL
    cdef Py_ssize_t j, s, e = 0
    cdef long long i, d, free_inputs = 0

    if n_regs > 0:
        last = <long long *> PyMem_Malloc(n_regs * sizeof(long long))
        if last == NULL:
            raise MemoryError()
        for j in range(n_regs):
            last[j] = -1
    if total_srcs > 0:
        out_p = <long long *> PyMem_Malloc(total_srcs * sizeof(long long))
        out_c = <long long *> PyMem_Malloc(total_srcs * sizeof(long long))
        if out_p == NULL or out_c == NULL:
            PyMem_Free(last)
            PyMem_Free(out_p)
            PyMem_Free(out_c)
            raise MemoryError()

    try:
        for j in range(n):
            for s in range(src_offsets[j], src_offsets[j + 1]):
                i = last[src_ids[s]]
                if i >= 0:
                    out_p[e] = i
                    out_c[e] = j
                    e += 1
                else:
                    free_inputs += 1
            d = dst_ids[j]
            if d >= 0:
                last[d] = j
        producers = array("q")
        consumers = array("q")
        if e > 0:
            producers.frombytes((<char *> out_p)[:e * sizeof(long long)])
            consumers.frombytes((<char *> out_c)[:e * sizeof(long long)])
    finally:
        PyMem_Free(last)
        PyMem_Free(out_p)
        PyMem_Free(out_c)
    return producers, consumers, free_inputs
