# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled walk stepping. Mirrors ``_pykernels`` exactly."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def walk_chunk(const cnp.int64_t[::1] indptr,
               const cnp.int64_t[::1] indices,
               const double[::1] cumprob,
               const double[::1] hold,
               cnp.int64_t node,
               double clock,
               const double[::1] uniforms,
               const double[::1] record_times,
               cnp.int64_t[::1] out,
               Py_ssize_t k):
    cdef Py_ssize_t nrec = record_times.shape[0]
    cdef Py_ssize_t nu = uniforms.shape[0]
    cdef Py_ssize_t used = 0
    cdef bint weighted = cumprob.shape[0] > 0
    cdef cnp.int64_t lo, hi, j, deg
    cdef double nxt, u
    with nogil:
        while k < nrec:
            nxt = clock + hold[node]
            while k < nrec and record_times[k] < nxt:
                out[k] = node
                k += 1
            if k >= nrec or used == nu:
                break
            u = uniforms[used]
            used += 1
            lo = indptr[node]
            hi = indptr[node + 1]
            deg = hi - lo
            if deg > 0:
                if weighted:
                    j = lo
                    while j < hi - 1 and cumprob[j] <= u:
                        j += 1
                else:
                    j = lo + <cnp.int64_t>(u * deg)
                    if j >= hi:
                        j = hi - 1
                node = indices[j]
            clock = nxt
    return node, clock, k, used
