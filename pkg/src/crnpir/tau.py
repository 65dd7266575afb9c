"""tau-independent retrieval: the database itself is Shamir-shared across servers.

Word (j, c) is stored at server i as g_jc(alpha_i) for a random degree-tau
polynomial with g_jc(0) = W_jc. A degree-t Goldberg query then yields

    R_i[c] = sum_j f_j(alpha_i) * g_jc(alpha_i) = h_c(alpha_i),

where h_c = sum_j f_j * g_jc has degree t + tau and
h_c(0) = sum_j e_beta[j] * W_jc = W_beta,c. So servers run the unchanged
Goldberg answer, and the client interpolates with t + tau + 1 points.

Share replicas never carry the generator seed or the evaluation-point set;
each replica only knows its own alpha.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import IndexRangeError, ParameterError
from .goldberg import GoldbergResponse, RecoveryReport, goldberg_recover
from .sharing import EvalPointSet, share_vector
from .spectrumdb import KIND_SHARE, DatabaseMatrix


@dataclass
class SharedDatabaseSet:
    dbs: list[DatabaseMatrix]
    points: EvalPointSet
    tau: int

    def __len__(self):
        return len(self.dbs)

    def share_set_digest(self) -> bytes:
        h = hashlib.sha256(b"crnpir-shares" + bytes([self.tau]))
        for db in self.dbs:
            h.update(db.body_digest())
        return h.digest()

    def _stamp(self) -> None:
        digest = self.share_set_digest().hex()
        for db in self.dbs:
            db.meta["share_set_digest"] = digest


def pu_encode_database(plain: DatabaseMatrix, tau: int, points: EvalPointSet, rng) -> SharedDatabaseSet:
    if tau < 0:
        raise ParameterError("tau must be non-negative")
    if tau >= len(points):
        raise ParameterError(f"tau={tau} needs more than {tau} servers")
    shares = share_vector(plain.data.ravel(), tau, points, rng)
    dbs = []
    for i, sh in enumerate(shares, start=1):
        dbs.append(DatabaseMatrix(
            sh.values.reshape(plain.data.shape),
            grid=plain.grid,
            seed=None,
            padding_rows=plain.padding_rows,
            kind=KIND_SHARE,
            meta={"tau": tau, "alpha": sh.alpha, "server_id": i},
        ))
    out = SharedDatabaseSet(dbs, points, tau)
    out._stamp()
    return out


def pu_add_record(dbs: SharedDatabaseSet, j: int, record, rng) -> SharedDatabaseSet:
    """Re-share row j (1-based) with fresh randomness; other rows are untouched."""
    r, s = dbs.dbs[0].data.shape
    if not 1 <= j <= r:
        raise IndexRangeError(f"row {j} outside 1..{r}")
    row = np.frombuffer(bytes(record), dtype=np.uint8)
    if row.size != s:
        raise ParameterError(f"record has {row.size} bytes; rows hold {s}")
    for db, sh in zip(dbs.dbs, share_vector(row, dbs.tau, dbs.points, rng)):
        db.data[j - 1] = sh.values
    dbs._stamp()
    return dbs


def tau_recover(responses: Sequence[GoldbergResponse], t: int, tau: int, w: int = 8) -> RecoveryReport:
    """Goldberg recovery with response polynomials of degree t + tau."""
    return goldberg_recover(responses, t, w, degree=t + tau)
