# Compiled server-side kernels. Semantics are defined by _pykernels.
from libc.stdint cimport uint8_t, uint64_t, uintptr_t
from libc.string cimport memset

import numpy as np
cimport numpy as cnp

from .gf256 import MUL as _MUL_TABLE

cnp.import_array()

cdef const uint8_t[:, ::1] _MUL = _MUL_TABLE


def xor_rows(const uint8_t[::1] mask, const uint8_t[:, ::1] data):
    cdef Py_ssize_t r = data.shape[0]
    cdef Py_ssize_t s = data.shape[1]
    cdef Py_ssize_t j, c, lanes
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] out = np.zeros(s, dtype=np.uint8)
    cdef uint8_t *acc = <uint8_t *> out.data
    cdef const uint8_t *row
    cdef uint64_t *acc64
    cdef const uint64_t *row64
    if mask.shape[0] * 8 < r:
        raise ValueError("selection mask shorter than the row count")
    if r == 0 or s == 0:
        return out
    cdef bint wide = (s % 8 == 0
                      and (<uintptr_t> &data[0, 0]) % 8 == 0
                      and (<uintptr_t> acc) % 8 == 0)
    lanes = s // 8
    with nogil:
        for j in range(r):
            if not (mask[j >> 3] >> (7 - (j & 7))) & 1:
                continue
            row = &data[j, 0]
            if wide:
                acc64 = <uint64_t *> acc
                row64 = <const uint64_t *> row
                for c in range(lanes):
                    acc64[c] ^= row64[c]
            else:
                for c in range(s):
                    acc[c] ^= row[c]
    return out


def gf_vecmat(const uint8_t[::1] rho, const uint8_t[:, ::1] data):
    cdef Py_ssize_t r = data.shape[0]
    cdef Py_ssize_t s = data.shape[1]
    cdef Py_ssize_t j, c
    cdef uint8_t coef
    cdef const uint8_t *tbl
    cdef const uint8_t *row
    if rho.shape[0] != r:
        raise ValueError("query length does not match the row count")
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] out = np.zeros(s, dtype=np.uint8)
    cdef uint8_t *acc = <uint8_t *> out.data
    if r == 0 or s == 0:
        return out
    with nogil:
        for j in range(r):
            coef = rho[j]
            if coef == 0:
                continue
            tbl = &_MUL[coef, 0]
            row = &data[j, 0]
            for c in range(s):
                acc[c] ^= tbl[row[c]]
    return out


def gf_matmul(const uint8_t[:, ::1] a, const uint8_t[:, ::1] b):
    cdef Py_ssize_t q = a.shape[0]
    cdef Py_ssize_t r = a.shape[1]
    cdef Py_ssize_t s = b.shape[1]
    cdef Py_ssize_t i, j, c
    cdef uint8_t coef
    cdef const uint8_t *tbl
    cdef const uint8_t *row
    cdef const uint8_t *col
    cdef uint8_t *acc
    if b.shape[0] != r:
        raise ValueError("inner dimensions differ")
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] out = np.zeros((q, s), dtype=np.uint8)
    cdef uint8_t *base = <uint8_t *> out.data
    if q == 0 or r == 0 or s == 0:
        return out
    # column j of a must be contiguous; strided reads at a page-multiple stride thrash L1
    cdef const uint8_t[:, ::1] at = np.ascontiguousarray(np.asarray(a).T)
    with nogil:
        for j in range(r):
            row = &b[j, 0]
            col = &at[j, 0]
            for i in range(q):
                coef = col[i]
                if coef == 0:
                    continue
                tbl = &_MUL[coef, 0]
                acc = base + i * s
                for c in range(s):
                    acc[c] ^= tbl[row[c]]
    return out
