"""XOR-based PIR over l replicated databases; (l-1)-private, not robust.

Query shares are packed bit-vectors (numpy uint8, MSB-first, so bit j of the
string "1011" is the j-th character). Padding bits past r are always zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .errors import IncompleteResponseError, IndexRangeError, ParameterError, ProtocolError
from .spectrumdb import DatabaseMatrix


def packed_len(r: int) -> int:
    return (r + 7) // 8


def tail_mask(r: int) -> int:
    """Mask for the valid bits of the last packed byte."""
    rem = r % 8
    return 0xFF if rem == 0 else (0xFF << (8 - rem)) & 0xFF


def pack_bits(bits) -> np.ndarray:
    return np.packbits(np.asarray(bits, dtype=np.uint8))


def unpack_bits(packed, r: int) -> np.ndarray:
    return np.unpackbits(np.asarray(packed, dtype=np.uint8), count=r)


def bits_str(packed, r: int) -> str:
    return "".join(map(str, unpack_bits(packed, r)))


def packed_basis(beta: int, r: int) -> np.ndarray:
    if not 1 <= beta <= r:
        raise IndexRangeError(f"beta={beta} outside 1..{r}")
    e = np.zeros(packed_len(r), dtype=np.uint8)
    e[(beta - 1) // 8] = 0x80 >> ((beta - 1) % 8)
    return e


def chor_shares(e_packed: np.ndarray, randoms: np.ndarray) -> np.ndarray:
    """Stack the l-1 random vectors with their XOR-complement.

    ``randoms`` has shape (..., l-1, nbytes); the result has shape
    (..., l, nbytes) and XORs to ``e_packed`` along the server axis.
    """
    last = np.bitwise_xor.reduce(randoms, axis=-2) ^ e_packed
    return np.concatenate([randoms, last[..., None, :]], axis=-2)


@dataclass
class ChorQuerySet:
    r: int
    shares: list[np.ndarray]

    def __len__(self):
        return len(self.shares)


@dataclass
class ChorResponse:
    server_id: int
    block: np.ndarray


def chor_build_query(beta: int, r: int, ell: int, rng) -> ChorQuerySet:
    if ell < 2:
        raise ParameterError("Chor needs at least two servers")
    e = packed_basis(beta, r)
    nbytes = packed_len(r)
    randoms = np.asarray(rng.integers(0, 256, size=(ell - 1, nbytes), dtype=np.uint8), dtype=np.uint8)
    randoms = randoms.reshape(ell - 1, nbytes).copy()
    randoms[:, -1] &= tail_mask(r)
    stacked = chor_shares(e, randoms)
    return ChorQuerySet(r, [stacked[i].copy() for i in range(ell)])


def chor_server_answer(rho, db: DatabaseMatrix, server_id: int = 0) -> ChorResponse:
    rho = np.asarray(rho, dtype=np.uint8)
    if rho.shape != (packed_len(db.r),):
        raise ProtocolError(f"query holds {rho.size * 8} bits; database has {db.r} rows")
    return ChorResponse(server_id, kernels.xor_rows(rho, db.data))


def xor_blocks(responses: Sequence[ChorResponse]) -> np.ndarray:
    lengths = {resp.block.shape for resp in responses}
    if len(lengths) != 1:
        raise ProtocolError("responses differ in length")
    return np.bitwise_xor.reduce(np.stack([resp.block for resp in responses]), axis=0)


def chor_reconstruct(responses: Sequence[ChorResponse], ell: int) -> bytes:
    """XOR all l responses into D_beta. Any missing response is fatal."""
    ids = {resp.server_id for resp in responses}
    if len(responses) != ell or len(ids) != ell:
        expected = set(range(1, ell + 1))
        raise IncompleteResponseError(
            f"Chor needs all {ell} responses, got {len(responses)}",
            missing=expected - ids,
        )
    return xor_blocks(responses).tobytes()
