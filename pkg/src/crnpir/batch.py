"""Batched Goldberg queries answered with Strassen multiplication over GF(2^8).

Addition in GF(2^8) is XOR, so Strassen's linear combinations are exact.
Each recursion level pads odd dimensions with one zero row/column and strips
it on return; blocks whose smallest dimension is below ``cutoff`` (or is 1)
go to the naive kernel.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .errors import InsufficientResponsesError, ParameterError, ProtocolError
from .goldberg import GoldbergResponse, RecoveryReport, goldberg_build_queries, goldberg_recover
from .sharing import EvalPointSet
from .spectrumdb import DatabaseMatrix

DEFAULT_CUTOFF = 64


@dataclass
class QueryMatrix:
    alpha: int
    rows: np.ndarray
    t: int = 0

    @property
    def q(self) -> int:
        return self.rows.shape[0]


@dataclass
class ResponseMatrix:
    server_id: int
    alpha: int
    values: np.ndarray

    def row(self, j: int) -> GoldbergResponse:
        return GoldbergResponse(self.server_id, self.alpha, self.values[j])


def naive_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return kernels.gf_matmul(a, b)


def _pad(m: np.ndarray, rows: int, cols: int) -> np.ndarray:
    if m.shape == (rows, cols):
        return m
    out = np.zeros((rows, cols), dtype=np.uint8)
    out[: m.shape[0], : m.shape[1]] = m
    return out


def strassen_mul(a, b, cutoff: int = DEFAULT_CUTOFF) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.uint8)
    b = np.ascontiguousarray(b, dtype=np.uint8)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ProtocolError(f"cannot multiply {a.shape} by {b.shape}")
    if cutoff < 1:
        raise ParameterError("cutoff must be at least 1")
    return _strassen(a, b, cutoff)


def _strassen(a: np.ndarray, b: np.ndarray, cutoff: int) -> np.ndarray:
    q, r = a.shape
    s = b.shape[1]
    if min(q, r, s) < cutoff or min(q, r, s) == 1:
        return kernels.gf_matmul(a, b)
    q2, r2, s2 = (q + 1) // 2, (r + 1) // 2, (s + 1) // 2
    a = _pad(a, 2 * q2, 2 * r2)
    b = _pad(b, 2 * r2, 2 * s2)
    a11, a12, a21, a22 = a[:q2, :r2], a[:q2, r2:], a[q2:, :r2], a[q2:, r2:]
    b11, b12, b21, b22 = b[:r2, :s2], b[:r2, s2:], b[r2:, :s2], b[r2:, s2:]

    def sub(x, y):
        return _strassen(np.ascontiguousarray(x), np.ascontiguousarray(y), cutoff)

    m1 = sub(a11 ^ a22, b11 ^ b22)
    m2 = sub(a21 ^ a22, b11)
    m3 = sub(a11, b12 ^ b22)
    m4 = sub(a22, b21 ^ b11)
    m5 = sub(a11 ^ a12, b22)
    m6 = sub(a21 ^ a11, b11 ^ b12)
    m7 = sub(a12 ^ a22, b21 ^ b22)

    out = np.empty((2 * q2, 2 * s2), dtype=np.uint8)
    out[:q2, :s2] = m1 ^ m4 ^ m5 ^ m7
    out[:q2, s2:] = m3 ^ m5
    out[q2:, :s2] = m2 ^ m4
    out[q2:, s2:] = m1 ^ m2 ^ m3 ^ m6
    return out[:q, :s]


def batch_build_queries(betas: Sequence[int], r: int, ell: int, t: int,
                        points: EvalPointSet | None, rng) -> list[QueryMatrix]:
    """One Goldberg query set per beta, drawn in order, stacked row-wise per server."""
    if len(betas) < 1:
        raise ParameterError("a batch needs at least one query")
    per_beta = [goldberg_build_queries(beta, r, ell, t, points, rng) for beta in betas]
    return [
        QueryMatrix(per_beta[0][i].alpha, np.stack([qs[i].rho for qs in per_beta]), t)
        for i in range(ell)
    ]


def batch_server_answer(query: QueryMatrix, db: DatabaseMatrix, server_id: int = 0,
                        cutoff: int = DEFAULT_CUTOFF) -> ResponseMatrix:
    rows = np.asarray(query.rows, dtype=np.uint8)
    if rows.ndim != 2 or rows.shape[1] != db.r:
        raise ProtocolError(f"query matrix {rows.shape} does not match r={db.r}")
    return ResponseMatrix(server_id, query.alpha, strassen_mul(rows, db.data, cutoff))


def batch_recover(responses: Sequence[ResponseMatrix], t: int, w: int = 8,
                  degree: int | None = None) -> list[RecoveryReport]:
    if not responses:
        raise InsufficientResponsesError("no responses to recover from")
    qs = {resp.values.shape[0] for resp in responses}
    if len(qs) > 1:
        raise ProtocolError("responses carry different batch sizes")
    q = qs.pop()
    return [goldberg_recover([resp.row(j) for resp in responses], t, w, degree=degree)
            for j in range(q)]
