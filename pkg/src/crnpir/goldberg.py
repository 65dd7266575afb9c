"""Shamir-shared PIR over GF(2^8): t-private, k-out-of-l robust, byzantine-robust.

Responses from honest servers are shares of D_beta on polynomials of degree t
(degree t + tau against a tau-shared database). Recovery first interpolates
from the t+1 lowest-id responses and checks the rest against that polynomial
(easy path); if any word disagrees it falls back to Berlekamp-Welch on the
disagreeing words (hard path). Unique decoding corrects up to
floor((k - degree - 1) / 2) corrupted responses; list decoding is not
implemented, but ``decoder`` accepts any callable with rs_decode's contract.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import gf256, kernels
from .errors import (
    ByzantineOverloadError,
    DecodeError,
    InsufficientResponsesError,
    ParameterError,
    ProtocolError,
)
from .gf256 import MUL
from .sharing import EvalPointSet, share_vector
from .spectrumdb import DatabaseMatrix, basis_vector

Decoder = Callable[[Sequence[tuple[int, int]], int], tuple[gf256.FieldPolynomial, set[int]]]


@dataclass
class GoldbergQuery:
    alpha: int
    rho: np.ndarray
    t: int = 0

    @property
    def r(self) -> int:
        return self.rho.shape[0]


@dataclass
class GoldbergResponse:
    server_id: int
    alpha: int
    values: np.ndarray


@dataclass
class RecoveryReport:
    record: bytes
    honest: frozenset = field(default_factory=frozenset)
    byzantine: frozenset = field(default_factory=frozenset)
    path: str = "easy"


def goldberg_build_queries(beta: int, r: int, ell: int, t: int,
                           points: EvalPointSet | None, rng) -> list[GoldbergQuery]:
    points = points or EvalPointSet.default(ell)
    if len(points) != ell:
        raise ParameterError(f"{len(points)} evaluation points for {ell} servers")
    if not 0 <= t < ell:
        raise ParameterError(f"t={t} must satisfy 0 <= t < l={ell}")
    shares = share_vector(basis_vector(beta, r), t, points, rng)
    return [GoldbergQuery(sh.alpha, sh.values, t) for sh in shares]


def goldberg_server_answer(q: GoldbergQuery, db: DatabaseMatrix, server_id: int = 0) -> GoldbergResponse:
    rho = np.asarray(q.rho, dtype=np.uint8)
    if rho.ndim != 1 or rho.shape[0] != db.r:
        raise ProtocolError(f"query length {rho.size} does not match r={db.r}")
    return GoldbergResponse(server_id, q.alpha, kernels.gf_vecmat(rho, db.data))


def _horner_rows(coeffs: np.ndarray, x: int) -> np.ndarray:
    col = MUL[:, x]
    acc = coeffs[-1].copy()
    for d in range(coeffs.shape[0] - 2, -1, -1):
        acc = col[acc] ^ coeffs[d]
    return acc


def recovery_mul_count(k: int, degree: int, s: int) -> int:
    """Client multiplications on the easy path: interpolation plus verification."""
    return s * ((degree + 1) ** 2 + (k - degree - 1) * degree)


def goldberg_recover(responses: Sequence[GoldbergResponse], t: int, w: int = 8,
                     decoder: Decoder = gf256.rs_decode, degree: int | None = None) -> RecoveryReport:
    """Recover D_beta from k responses whose shares lie on degree-``degree`` polynomials.

    ``degree`` defaults to t; tau-independent retrieval passes t + tau.
    """
    if w != 8:
        raise ParameterError("only w = 8 is supported")
    deg = t if degree is None else degree
    resp = sorted(responses, key=lambda x: x.server_id)
    k = len(resp)
    if k <= deg:
        raise InsufficientResponsesError(f"need more than {deg} responses, got {k}")
    ids = [x.server_id for x in resp]
    alphas = [x.alpha for x in resp]
    shapes = {np.shape(x.values) for x in resp}
    if len(shapes) != 1:
        raise ProtocolError("responses differ in length")
    values = np.stack([np.asarray(x.values, dtype=np.uint8) for x in resp])
    s = values.shape[1]

    basis = gf256.lagrange_basis(alphas[: deg + 1])
    coeffs = np.zeros((deg + 1, s), dtype=np.uint8)
    for i in range(deg + 1):
        coeffs ^= MUL[basis[i][:, None], values[i][None, :]]
    bad_words = np.zeros(s, dtype=bool)
    for m in range(deg + 1, k):
        bad_words |= _horner_rows(coeffs, alphas[m]) != values[m]
    kernels.counters.add(client_gf_muls=recovery_mul_count(k, deg, s))

    record = coeffs[0].copy()
    if not bad_words.any():
        return RecoveryReport(record.tobytes(), frozenset(ids), frozenset(), "easy")

    bound = gf256.max_correctable(k, deg)
    if bound < 1:
        raise ByzantineOverloadError(
            f"responses are inconsistent but k={k}, degree={deg} cannot correct any error")
    flagged: set[int] = set()
    for c in np.flatnonzero(bad_words):
        pts = list(zip(alphas, values[:, c].tolist()))
        try:
            poly, idx = decoder(pts, deg)
        except DecodeError as exc:
            raise ByzantineOverloadError(f"word {c}: {exc}") from exc
        record[c] = poly.coefficients[0]
        flagged.update(ids[i] for i in idx)
    if len(flagged) > bound:
        raise ByzantineOverloadError(
            f"{len(flagged)} servers disagree; at most {bound} can be corrected")
    return RecoveryReport(record.tobytes(), frozenset(ids) - flagged, frozenset(flagged), "hard")
