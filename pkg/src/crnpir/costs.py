"""Per-query communication in bits (upload plus download payload, no framing).

r rows, b bits per record, l servers, w bits per field word, k responses kept,
kappa bits per PRG seed, q queries per batch.
"""

from __future__ import annotations

from .params import KAPPA_BITS, Protocol


def chor_comm_bits(r: int, b: int, ell: int) -> int:
    return (r + b) * ell


def goldberg_comm_bits(r: int, b: int, ell: int, w: int = 8, k: int | None = None) -> int:
    k = ell if k is None else k
    return r * w * ell + k * b


def batch_comm_bits(r: int, b: int, ell: int, q: int, w: int = 8, k: int | None = None) -> int:
    return q * goldberg_comm_bits(r, b, ell, w, k)


def raid_comm_bits(r: int, b: int, ell: int, kappa: int = KAPPA_BITS) -> int:
    return r + ell * kappa + ell * b


def trivial_comm_bits(r: int, b: int) -> int:
    """Downloading the whole database: n = r * b bits."""
    return r * b


def comm_bits(protocol, r: int, b: int, ell: int, w: int = 8, k: int | None = None,
              q: int = 1, kappa: int = KAPPA_BITS) -> int:
    protocol = Protocol.parse(protocol)
    if protocol is Protocol.CHOR:
        return chor_comm_bits(r, b, ell)
    if protocol is Protocol.GOLD:
        return goldberg_comm_bits(r, b, ell, w, k)
    if protocol is Protocol.BATCH:
        return batch_comm_bits(r, b, ell, q, w, k)
    return raid_comm_bits(r, b, ell, kappa)


def kilobytes(bits: int) -> float:
    """Decimal kilobytes (1000 bytes)."""
    return bits / 8 / 1000


def kibibytes(bits: int) -> float:
    return bits / 8 / 1024
