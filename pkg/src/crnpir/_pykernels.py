"""Pure numpy kernels; the reference semantics for the compiled ones."""

import numpy as np

from .gf256 import MUL

_CHUNK = 2048


def xor_rows(mask, data):
    """XOR of the rows of ``data`` whose bit is set in the packed (MSB-first) mask."""
    r, s = data.shape
    if mask.shape[0] * 8 < r:
        raise ValueError("selection mask shorter than the row count")
    sel = np.unpackbits(mask, count=r).astype(bool)
    rows = data[sel]
    if rows.shape[0] == 0:
        return np.zeros(s, dtype=np.uint8)
    if s % 8 == 0:
        return np.bitwise_xor.reduce(rows.view(np.uint64), axis=0).view(np.uint8)
    return np.bitwise_xor.reduce(rows, axis=0)


def gf_vecmat(rho, data):
    r, s = data.shape
    if rho.shape[0] != r:
        raise ValueError("query length does not match the row count")
    out = np.zeros(s, dtype=np.uint8)
    for start in range(0, r, _CHUNK):
        block = MUL[rho[start:start + _CHUNK, None], data[start:start + _CHUNK]]
        if block.shape[0]:
            out ^= np.bitwise_xor.reduce(block, axis=0)
    return out


def gf_matmul(a, b):
    q, r = a.shape
    if b.shape[0] != r:
        raise ValueError("inner dimensions differ")
    out = np.zeros((q, b.shape[1]), dtype=np.uint8)
    for j in range(r):
        out ^= MUL[a[:, j, None], b[j][None, :]]
    return out
