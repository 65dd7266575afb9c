"""Binary wire format. All integers are big-endian.

Frame::

    u32 length (bytes after this prefix) | u8 version | u8 kind | u8 protocol | body

Bodies per (kind, protocol)::

    HELLO        (empty)
    HELLO_ACK    u8 version | u16 server id | u8 alpha | 32B digest | u8 protocol bitmap
                 | u64 r | u32 s | u32 meta length | meta (UTF-8 JSON)
    ERROR        u16 code | UTF-8 message
    QUERY CHOR   u64 r | packed bits
    QUERY GOLD   u64 r | u8 t | u8 alpha | r field elements
    QUERY BATCH  u32 q | u8 alpha | u64 r | u8 t | q*r field elements
    QUERY RAID   32B layout digest | u64 flip bits | flip bytes | 16B seed
    RESPONSE CHOR/RAID   u16 server id | u32 elapsed us | block
    RESPONSE GOLD        u16 server id | u32 elapsed us | u8 alpha | s field elements
    RESPONSE BATCH       u16 server id | u32 elapsed us | u8 alpha | u32 q | u32 s | q*s elements

Payload sizes (what the communication formulas count) exclude every header
field above: they are the packed bits, field elements, blocks and seeds.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .batch import QueryMatrix, ResponseMatrix
from .chor import ChorResponse, packed_len
from .errors import ProtocolError
from .goldberg import GoldbergQuery, GoldbergResponse
from .params import Protocol
from .raid import SEED_BYTES, RaidQuery

VERSION = 1
PREFIX = struct.Struct(">I")
HEAD = struct.Struct(">BBB")
FRAME_OVERHEAD = PREFIX.size + HEAD.size
DEFAULT_MAX_FRAME = 64 * 1024 * 1024


class Kind(IntEnum):
    HELLO = 1
    HELLO_ACK = 2
    QUERY = 3
    RESPONSE = 4
    ERROR = 5


class ErrorCode(IntEnum):
    MALFORMED = 1
    VERSION = 2
    DIMENSION = 3
    UNSUPPORTED = 4
    INTERNAL = 5


@dataclass
class Frame:
    kind: int
    protocol: int
    body: bytes
    version: int = VERSION

    def encode(self) -> bytes:
        return PREFIX.pack(HEAD.size + len(self.body)) + HEAD.pack(self.version, self.kind, self.protocol) + self.body

    @classmethod
    def decode(cls, data: bytes) -> "Frame":
        """Decode a frame given the bytes after the length prefix."""
        if len(data) < HEAD.size:
            raise ProtocolError("frame shorter than its header")
        version, kind, protocol = HEAD.unpack_from(data)
        return cls(kind, protocol, bytes(data[HEAD.size:]), version)


def split_frames(buf: bytes) -> list[Frame]:
    out = []
    pos = 0
    while pos < len(buf):
        (n,) = PREFIX.unpack_from(buf, pos)
        out.append(Frame.decode(buf[pos + 4: pos + 4 + n]))
        pos += 4 + n
    return out


@dataclass
class HelloInfo:
    version: int
    server_id: int
    alpha: int
    digest: bytes
    protocols: frozenset
    r: int
    s: int
    meta: dict


_ACK = struct.Struct(">BHB32sBQII")


def encode_hello_ack(info: HelloInfo) -> bytes:
    bitmap = 0
    for p in info.protocols:
        bitmap |= 1 << (int(p) - 1)
    meta = json.dumps(info.meta, sort_keys=True).encode()
    return _ACK.pack(info.version, info.server_id, info.alpha, info.digest, bitmap,
                     info.r, info.s, len(meta)) + meta


def decode_hello_ack(body: bytes) -> HelloInfo:
    try:
        version, sid, alpha, digest, bitmap, r, s, mlen = _ACK.unpack_from(body)
        meta = json.loads(body[_ACK.size:_ACK.size + mlen]) if mlen else {}
    except (struct.error, ValueError) as exc:
        raise ProtocolError(f"malformed HELLO_ACK: {exc}") from exc
    protos = frozenset(p for p in Protocol if bitmap & (1 << (int(p) - 1)))
    return HelloInfo(version, sid, alpha, digest, protos, r, s, meta)


def encode_error(code: int, message: str) -> bytes:
    return struct.pack(">H", code) + message.encode()


def decode_error(body: bytes) -> tuple[int, str]:
    if len(body) < 2:
        return ErrorCode.MALFORMED, "truncated error frame"
    return struct.unpack_from(">H", body)[0], body[2:].decode(errors="replace")


# --- queries -----------------------------------------------------------------

_U64 = struct.Struct(">Q")
_GOLD = struct.Struct(">QBB")
_BATCH = struct.Struct(">IBQB")
_RAID = struct.Struct(">32sQ")


@dataclass
class ChorQuery:
    """A single server's share of a Chor query."""

    r: int
    bits: np.ndarray


def encode_query(protocol, query, layout_digest: bytes = b"") -> tuple[bytes, int]:
    """Return (body, payload bytes)."""
    protocol = Protocol(protocol)
    if protocol is Protocol.CHOR:
        bits = np.asarray(query.bits, dtype=np.uint8).tobytes()
        return _U64.pack(query.r) + bits, len(bits)
    if protocol is Protocol.GOLD:
        rho = np.asarray(query.rho, dtype=np.uint8).tobytes()
        return _GOLD.pack(len(rho), query.t, query.alpha) + rho, len(rho)
    if protocol is Protocol.BATCH:
        rows = np.asarray(query.rows, dtype=np.uint8)
        q, r = rows.shape
        data = rows.tobytes()
        return _BATCH.pack(q, query.alpha, r, query.t) + data, len(data)
    if protocol is Protocol.RAID:
        if len(layout_digest) != 32:
            raise ProtocolError("RAID queries carry a 32-byte layout digest")
        flip = np.asarray(query.flip, dtype=np.uint8).tobytes()
        nbits = query.flip_bits if query.flip_bits is not None else len(flip) * 8
        return _RAID.pack(layout_digest, nbits) + flip + query.seed, len(flip) + len(query.seed)
    raise ProtocolError(f"unknown protocol {protocol}")


def decode_query(protocol, body: bytes):
    """Return (query object, extra header fields)."""
    protocol = Protocol(protocol)
    try:
        if protocol is Protocol.CHOR:
            (r,) = _U64.unpack_from(body)
            bits = np.frombuffer(body, dtype=np.uint8, offset=_U64.size)
            if bits.size != packed_len(r):
                raise ProtocolError(f"CHOR query carries {bits.size} bytes for r={r}")
            return ChorQuery(r, bits), {}
        if protocol is Protocol.GOLD:
            r, t, alpha = _GOLD.unpack_from(body)
            rho = np.frombuffer(body, dtype=np.uint8, offset=_GOLD.size)
            if rho.size != r:
                raise ProtocolError(f"GOLD query carries {rho.size} elements for r={r}")
            return GoldbergQuery(alpha, rho, t), {}
        if protocol is Protocol.BATCH:
            q, alpha, r, t = _BATCH.unpack_from(body)
            data = np.frombuffer(body, dtype=np.uint8, offset=_BATCH.size)
            if data.size != q * r:
                raise ProtocolError(f"BATCH query carries {data.size} elements for {q}x{r}")
            return QueryMatrix(alpha, data.reshape(q, r), t), {}
        if protocol is Protocol.RAID:
            digest, nbits = _RAID.unpack_from(body)
            nflip = packed_len(nbits)
            end = _RAID.size + nflip
            if len(body) != end + SEED_BYTES:
                raise ProtocolError("RAID query length does not match its flip size")
            flip = np.frombuffer(body, dtype=np.uint8, offset=_RAID.size, count=nflip)
            return RaidQuery(0, flip, bytes(body[end:]), nbits), {"layout_digest": digest}
    except struct.error as exc:
        raise ProtocolError(f"truncated {protocol.name} query") from exc
    raise ProtocolError(f"unknown protocol {protocol}")


# --- responses ---------------------------------------------------------------

_RESP = struct.Struct(">HI")
_RESP_GOLD = struct.Struct(">HIB")
_RESP_BATCH = struct.Struct(">HIBII")


def encode_response(protocol, resp, elapsed_us: int = 0) -> tuple[bytes, int]:
    protocol = Protocol(protocol)
    elapsed_us = min(int(elapsed_us), 2**32 - 1)
    if protocol in (Protocol.CHOR, Protocol.RAID):
        block = np.asarray(resp.block, dtype=np.uint8).tobytes()
        return _RESP.pack(resp.server_id, elapsed_us) + block, len(block)
    if protocol is Protocol.GOLD:
        vals = np.asarray(resp.values, dtype=np.uint8).tobytes()
        return _RESP_GOLD.pack(resp.server_id, elapsed_us, resp.alpha) + vals, len(vals)
    if protocol is Protocol.BATCH:
        vals = np.asarray(resp.values, dtype=np.uint8)
        q, s = vals.shape
        data = vals.tobytes()
        return _RESP_BATCH.pack(resp.server_id, elapsed_us, resp.alpha, q, s) + data, len(data)
    raise ProtocolError(f"unknown protocol {protocol}")


def payload_view(protocol, body: bytes) -> tuple[int, int]:
    """(offset, length) of the payload inside a response body."""
    protocol = Protocol(protocol)
    head = {Protocol.CHOR: _RESP, Protocol.RAID: _RESP, Protocol.GOLD: _RESP_GOLD,
            Protocol.BATCH: _RESP_BATCH}[protocol].size
    return head, len(body) - head


def decode_response(protocol, body: bytes):
    """Return (response object, elapsed microseconds, payload bytes)."""
    protocol = Protocol(protocol)
    try:
        if protocol in (Protocol.CHOR, Protocol.RAID):
            sid, us = _RESP.unpack_from(body)
            block = np.frombuffer(body, dtype=np.uint8, offset=_RESP.size).copy()
            return ChorResponse(sid, block), us, block.size
        if protocol is Protocol.GOLD:
            sid, us, alpha = _RESP_GOLD.unpack_from(body)
            vals = np.frombuffer(body, dtype=np.uint8, offset=_RESP_GOLD.size).copy()
            return GoldbergResponse(sid, alpha, vals), us, vals.size
        if protocol is Protocol.BATCH:
            sid, us, alpha, q, s = _RESP_BATCH.unpack_from(body)
            vals = np.frombuffer(body, dtype=np.uint8, offset=_RESP_BATCH.size)
            if vals.size != q * s:
                raise ProtocolError("BATCH response size mismatch")
            return ResponseMatrix(sid, alpha, vals.reshape(q, s).copy()), us, vals.size
    except struct.error as exc:
        raise ProtocolError(f"truncated {protocol.name} response") from exc
    raise ProtocolError(f"unknown protocol {protocol}")
