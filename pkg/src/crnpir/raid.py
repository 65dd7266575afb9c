"""Partitioned XOR PIR with redundancy pi ((pi-1)-private).

The r rows are cut into l chunks of r/l rows. Server i (1-based) stores chunks
i, i+1, ..., i+pi-1 (mod l), so every chunk lives on pi servers. A query to
server i is an explicit bit-vector ("flip chunk") for its first chunk plus a
128-bit seed; the seed is expanded with AES-128-CTR (zero IV) into the
selection vectors for its other pi-1 chunks. For each chunk, the flip part is
the XOR of the other holders' expanded parts with e_beta restricted to the
chunk, so XORing all l answers yields D_beta.

Upload is r + l*kappa bits: l flip chunks of r/l bits plus l seeds. Privacy of
the seeded parts is computational (it rests on the PRG); the flip chunks alone
are information-theoretically masked.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from . import kernels
from .chor import ChorResponse, chor_reconstruct, packed_basis, packed_len, tail_mask
from .errors import ParameterError, ProtocolError
from .params import KAPPA_BITS
from .spectrumdb import KIND_CHUNK, DatabaseMatrix

SEED_BYTES = KAPPA_BITS // 8
_ZERO_IV = b"\0" * 16


@dataclass(frozen=True)
class ChunkLayout:
    ell: int
    pi: int
    r: int

    def __post_init__(self):
        if self.ell < 2:
            raise ParameterError("at least two servers are required")
        if not 2 <= self.pi <= self.ell:
            raise ParameterError(f"need 2 <= pi <= l, got pi={self.pi}, l={self.ell}")
        if self.r % self.ell:
            raise ParameterError(f"l={self.ell} must divide r={self.r}")

    @property
    def chunk_rows(self) -> int:
        return self.r // self.ell

    def stored_chunks(self, server: int) -> list[int]:
        return [(server - 1 + d) % self.ell + 1 for d in range(self.pi)]

    def holders(self, chunk: int) -> list[int]:
        """Servers storing ``chunk``; the first one holds it as its flip chunk."""
        return [(chunk - 1 - d) % self.ell + 1 for d in range(self.pi)]

    def chunk_of(self, beta: int) -> tuple[int, int]:
        """(chunk, 1-based offset inside the chunk) for row beta."""
        c, off = divmod(beta - 1, self.chunk_rows)
        return c + 1, off + 1

    def digest(self) -> bytes:
        return hashlib.sha256(struct.pack(">4sHHQ", b"RAID", self.ell, self.pi, self.r)).digest()


@dataclass
class RaidQuery:
    server_id: int
    flip: np.ndarray
    seed: bytes
    flip_bits: int | None = None

    @property
    def payload_nbytes(self) -> int:
        return self.flip.size + len(self.seed)


def prg_expand(seed: bytes, parts: int, chunk_rows: int) -> list[np.ndarray]:
    """AES-128-CTR keystream cut into ``parts`` packed selection vectors."""
    if len(seed) != SEED_BYTES:
        raise ProtocolError(f"seed must be {SEED_BYTES} bytes")
    nbytes = packed_len(chunk_rows)
    enc = Cipher(algorithms.AES(seed), modes.CTR(_ZERO_IV)).encryptor()
    stream = np.frombuffer(enc.update(b"\0" * (parts * nbytes)), dtype=np.uint8).reshape(parts, nbytes).copy()
    stream[:, -1] &= tail_mask(chunk_rows)
    return list(stream)


Expander = Callable[[bytes, int, int], list]


def raid_partition(db: DatabaseMatrix, ell: int, pi: int) -> list[DatabaseMatrix]:
    """Cut ``db`` into the l chunk stores."""
    layout = ChunkLayout(ell, pi, db.r)
    cr = layout.chunk_rows
    source = db.digest().hex()
    stores = []
    for i in range(1, ell + 1):
        rows = np.concatenate([db.data[(c - 1) * cr: c * cr] for c in layout.stored_chunks(i)])
        stores.append(DatabaseMatrix(
            rows, grid=db.grid, seed=db.seed, padding_rows=db.padding_rows, kind=KIND_CHUNK,
            meta={"ell": ell, "pi": pi, "first_chunk": i, "server_id": i,
                  "total_rows": db.r, "source_digest": source},
        ))
    return stores


def layout_of(store: DatabaseMatrix) -> ChunkLayout:
    if store.kind != KIND_CHUNK:
        raise ProtocolError("not a chunk store")
    return ChunkLayout(store.meta["ell"], store.meta["pi"], store.meta["total_rows"])


def raid_build_queries(beta: int, layout: ChunkLayout, rng, expand: Expander = prg_expand) -> list[RaidQuery]:
    ell, cr = layout.ell, layout.chunk_rows
    if not 1 <= beta <= layout.r:
        raise ParameterError(f"beta={beta} outside 1..{layout.r}")
    seeds = [bytes(np.asarray(rng.integers(0, 256, size=SEED_BYTES, dtype=np.uint8), dtype=np.uint8))
             for _ in range(ell)]
    # expanded[i][c]: server i's seeded selection vector for chunk c
    expanded = {}
    for i in range(1, ell + 1):
        parts = expand(seeds[i - 1], layout.pi - 1, cr)
        expanded[i] = dict(zip(layout.stored_chunks(i)[1:], parts))
    target_chunk, offset = layout.chunk_of(beta)
    queries = []
    for c in range(1, ell + 1):
        flip = np.zeros(packed_len(cr), dtype=np.uint8)
        if c == target_chunk:
            flip ^= packed_basis(offset, cr)
        for h in layout.holders(c)[1:]:
            flip ^= np.asarray(expanded[h][c], dtype=np.uint8)
        queries.append(RaidQuery(c, flip, seeds[c - 1], cr))
    return queries


def raid_selection(q: RaidQuery, layout: ChunkLayout, expand: Expander = prg_expand) -> list[np.ndarray]:
    """The packed selection vectors a server applies, one per stored chunk, in storage order."""
    cr = layout.chunk_rows
    if q.flip.shape != (packed_len(cr),) or q.flip_bits not in (None, cr):
        raise ProtocolError(f"flip chunk holds {q.flip.size * 8} bits; chunks have {cr} rows")
    return [q.flip] + [np.asarray(p, dtype=np.uint8) for p in expand(q.seed, layout.pi - 1, cr)]


def raid_server_answer(q: RaidQuery, store: DatabaseMatrix, server_id: int | None = None,
                       expand: Expander = prg_expand) -> ChorResponse:
    layout = layout_of(store)
    cr = layout.chunk_rows
    if store.r != layout.pi * cr:
        raise ProtocolError("chunk store size does not match its layout")
    acc = np.zeros(store.s, dtype=np.uint8)
    for d, sel in enumerate(raid_selection(q, layout, expand)):
        acc ^= kernels.xor_rows(sel, store.data[d * cr:(d + 1) * cr])
    sid = store.meta.get("server_id", q.server_id) if server_id is None else server_id
    return ChorResponse(sid, acc)


def raid_reconstruct(responses: Sequence[ChorResponse], ell: int) -> bytes:
    return chor_reconstruct(responses, ell)
