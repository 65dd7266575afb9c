"""Spectrum database model: grid index, record layout, matrix view, file container.

Row beta (1-based) holds the availability record for one (cell, channel,
timeslot) combination. Cells are ``cell_m`` squares laid out east (columns)
and north (rows) of the grid origin on an equirectangular approximation.

File layout (little-endian)::

    0   4  magic b"SPDB"
    4   2  format version (u16)
    6   1  word bits w (u8, always 8)
    7   1  store kind (u8: 0 plain, 1 share replica, 2 chunk store)
    8   8  r, rows in the body (u64)
    16  8  s, words per row (u64)
    24  4  extension length in bytes (u32)
    28  4  reserved, zero
    32 32  SHA-256 over extension || body
    64  -  extension: UTF-8 JSON (grid, seed, padding, kind-specific fields)
    ..  -  body: r*s bytes, row-major
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    CoverageError,
    DatabaseFormatError,
    DigestError,
    IndexRangeError,
    ParameterError,
    TruncatedError,
    VersionError,
)

MAGIC = b"SPDB"
FORMAT_VERSION = 1
HEADER = struct.Struct("<4sHBBQQI4s32s")
assert HEADER.size == 64

KIND_PLAIN = 0
KIND_SHARE = 1
KIND_CHUNK = 2

DEFAULT_BLOCK_BYTES = 560
DEFAULT_CELL_M = 100.0
MIN_RECORD_BYTES = 16
METERS_PER_DEGREE = 6_371_008.8 * math.pi / 180.0


@dataclass(frozen=True)
class GridConfig:
    origin_lat: float = 40.0
    origin_lon: float = -105.0
    cell_m: float = DEFAULT_CELL_M
    width: int = 1
    height: int = 1
    channels: int = 1
    timeslots: int = 1
    first_channel: int = 1

    def __post_init__(self):
        if min(self.width, self.height, self.channels, self.timeslots) < 1:
            raise ParameterError("grid dimensions must be positive")
        if self.cell_m <= 0:
            raise ParameterError("cell size must be positive")

    @property
    def rows(self) -> int:
        return self.width * self.height * self.channels * self.timeslots

    @property
    def lon_scale(self) -> float:
        return METERS_PER_DEGREE * math.cos(math.radians(self.origin_lat))

    @classmethod
    def strip(cls, rows: int, **kw) -> "GridConfig":
        """A one-cell-high strip of ``rows`` cells (one channel, one slot)."""
        return cls(width=rows, **kw)


@dataclass(frozen=True)
class SpectrumKey:
    lat: float
    lon: float
    channel: int
    timeslot: int

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0 or not -180.0 <= self.lon <= 180.0:
            raise CoverageError(f"({self.lat}, {self.lon}) is not a WGS-84 coordinate")


def cell_of(lat: float, lon: float, grid: GridConfig) -> tuple[int, int]:
    north = (lat - grid.origin_lat) * METERS_PER_DEGREE
    east = (lon - grid.origin_lon) * grid.lon_scale
    row = math.floor(north / grid.cell_m)
    col = math.floor(east / grid.cell_m)
    if not (0 <= row < grid.height and 0 <= col < grid.width):
        raise CoverageError(f"({lat}, {lon}) lies outside the grid")
    return row, col


def inv_index(key: SpectrumKey, grid: GridConfig) -> int:
    """Map a key to its 1-based row index beta."""
    row, col = cell_of(key.lat, key.lon, grid)
    ch = key.channel - grid.first_channel
    if not 0 <= ch < grid.channels:
        raise CoverageError(f"channel {key.channel} not served by this grid")
    if not 0 <= key.timeslot < grid.timeslots:
        raise CoverageError(f"timeslot {key.timeslot} outside the horizon")
    return ((row * grid.width + col) * grid.channels + ch) * grid.timeslots + key.timeslot + 1


def key_for_index(beta: int, grid: GridConfig) -> SpectrumKey:
    """Inverse of inv_index; the key sits at the centre of its cell."""
    if not 1 <= beta <= grid.rows:
        raise IndexRangeError(f"beta={beta} outside 1..{grid.rows}")
    rest, slot = divmod(beta - 1, grid.timeslots)
    cell, ch = divmod(rest, grid.channels)
    row, col = divmod(cell, grid.width)
    lat = grid.origin_lat + (row + 0.5) * grid.cell_m / METERS_PER_DEGREE
    lon = grid.origin_lon + (col + 0.5) * grid.cell_m / grid.lon_scale
    return SpectrumKey(lat, lon, ch + grid.first_channel, slot)


def basis_vector(beta: int, r: int) -> np.ndarray:
    """e_beta as a length-r uint8 vector."""
    if not 1 <= beta <= r:
        raise IndexRangeError(f"beta={beta} outside 1..{r}")
    e = np.zeros(r, dtype=np.uint8)
    e[beta - 1] = 1
    return e


_RECORD_FIELDS = struct.Struct("<BhII")


@dataclass(frozen=True)
class SpectrumRecord:
    """Decoded availability record.

    Layout: availability flag (u8), max EIRP in 0.1 dBm (i16), validity window
    start/end in seconds (u32, u32), opaque filler, then CRC-32 of everything
    before it.
    """

    available: bool
    max_power_ddbm: int
    valid_from: int
    valid_until: int
    filler: bytes = b""

    def pack(self, size: int) -> bytes:
        if size < MIN_RECORD_BYTES:
            raise ParameterError(f"records need at least {MIN_RECORD_BYTES} bytes")
        head = _RECORD_FIELDS.pack(int(self.available), self.max_power_ddbm,
                                   self.valid_from, self.valid_until)
        body_len = size - 4
        body = (head + self.filler)[:body_len].ljust(body_len, b"\0")
        return body + struct.pack("<I", zlib.crc32(body))

    @classmethod
    def unpack(cls, raw: bytes) -> "SpectrumRecord":
        raw = bytes(raw)
        if not verify_record(raw):
            raise DatabaseFormatError("record checksum mismatch")
        flag, power, start, end = _RECORD_FIELDS.unpack_from(raw)
        return cls(bool(flag), power, start, end, raw[_RECORD_FIELDS.size:-4])


def verify_record(raw) -> bool:
    raw = bytes(raw)
    if len(raw) < MIN_RECORD_BYTES:
        return False
    return zlib.crc32(raw[:-4]) == struct.unpack("<I", raw[-4:])[0]


def expected_record(seed: int, beta: int, size: int) -> bytes:
    """The record generate_database places at row beta; a pure function of (seed, beta)."""
    h = hashlib.shake_256(b"crnpir-record" + struct.pack("<QQ", seed & (2**64 - 1), beta)).digest(size)
    window = int.from_bytes(h[3:7], "little")
    rec = SpectrumRecord(
        available=bool(h[0] & 1),
        max_power_ddbm=int.from_bytes(h[1:3], "little") % 401,
        valid_from=window,
        valid_until=min(window + 3600 * (1 + h[7] % 24), 2**32 - 1),
        filler=h[_RECORD_FIELDS.size:size - 4],
    )
    return rec.pack(size)


@dataclass
class DatabaseMatrix:
    """r x s matrix of bytes; row beta (1-based) is record beta."""

    data: np.ndarray
    grid: GridConfig | None = None
    seed: int | None = None
    padding_rows: int = 0
    kind: int = KIND_PLAIN
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.uint8)
        if self.data.ndim != 2:
            raise ParameterError("database must be a 2-d byte matrix")

    @property
    def r(self) -> int:
        return self.data.shape[0]

    @property
    def s(self) -> int:
        return self.data.shape[1]

    w = 8

    @property
    def b_bits(self) -> int:
        return self.s * self.w

    @property
    def n_bits(self) -> int:
        return self.r * self.b_bits

    def row(self, beta: int) -> bytes:
        if not 1 <= beta <= self.r:
            raise IndexRangeError(f"beta={beta} outside 1..{self.r}")
        return self.data[beta - 1].tobytes()

    def extension(self) -> dict:
        ext = {"grid": asdict(self.grid) if self.grid else None,
               "seed": self.seed, "padding_rows": self.padding_rows}
        ext.update(self.meta)
        return ext

    def digest(self) -> bytes:
        return _digest(_ext_bytes(self.extension()), self.data)

    def consistency_digest(self) -> bytes:
        """Digest every server of one deployment must agree on."""
        if self.kind == KIND_SHARE:
            return bytes.fromhex(self.meta["share_set_digest"])
        if self.kind == KIND_CHUNK:
            return bytes.fromhex(self.meta["source_digest"])
        return self.digest()

    def body_digest(self) -> bytes:
        return hashlib.sha256(self.data.tobytes()).digest()

    def __eq__(self, other):
        if not isinstance(other, DatabaseMatrix):
            return NotImplemented
        return (np.array_equal(self.data, other.data) and self.grid == other.grid
                and self.seed == other.seed and self.padding_rows == other.padding_rows
                and self.kind == other.kind and self.meta == other.meta)


def generate_database(grid: GridConfig, block_bytes: int = DEFAULT_BLOCK_BYTES,
                      seed: int = 0, align: int = 1) -> DatabaseMatrix:
    """Deterministic synthetic database; r is padded with zero rows to a multiple of ``align``."""
    if block_bytes < MIN_RECORD_BYTES:
        raise ParameterError(f"records need at least {MIN_RECORD_BYTES} bytes")
    rows = grid.rows
    padded = -(-rows // align) * align
    data = np.zeros((padded, block_bytes), dtype=np.uint8)
    for beta in range(1, rows + 1):
        data[beta - 1] = np.frombuffer(expected_record(seed, beta, block_bytes), dtype=np.uint8)
    return DatabaseMatrix(data, grid=grid, seed=seed, padding_rows=padded - rows)


def _ext_bytes(ext: dict) -> bytes:
    return json.dumps(ext, sort_keys=True, separators=(",", ":")).encode()


def _digest(ext: bytes, data: np.ndarray) -> bytes:
    h = hashlib.sha256(ext)
    h.update(memoryview(np.ascontiguousarray(data)).cast("B"))
    return h.digest()


_EXT_BASE = {"grid", "seed", "padding_rows"}


def store_database(db: DatabaseMatrix, path) -> None:
    ext = _ext_bytes(db.extension())
    digest = _digest(ext, db.data)
    header = HEADER.pack(MAGIC, FORMAT_VERSION, db.w, db.kind, db.r, db.s, len(ext),
                         b"\0" * 4, digest)
    with open(path, "wb") as f:
        f.write(header)
        f.write(ext)
        f.write(memoryview(db.data).cast("B"))


def load_database(path) -> DatabaseMatrix:
    path = Path(path)
    size = path.stat().st_size
    with open(path, "rb") as f:
        raw = f.read(HEADER.size)
        if len(raw) < HEADER.size:
            raise TruncatedError("file shorter than the 64-byte header")
        magic, version, w, kind, r, s, ext_len, _, digest = HEADER.unpack(raw)
        if magic != MAGIC:
            raise DatabaseFormatError(f"bad magic {magic!r}")
        if version != FORMAT_VERSION:
            raise VersionError(f"format version {version}, expected {FORMAT_VERSION}")
        if w != 8:
            raise DatabaseFormatError(f"unsupported word size {w}")
        if size != HEADER.size + ext_len + r * s:
            raise TruncatedError(f"file holds {size} bytes; header implies {HEADER.size + ext_len + r * s}")
        ext = f.read(ext_len)
        data = np.empty((r, s), dtype=np.uint8)
        f.readinto(memoryview(data).cast("B"))
    if _digest(ext, data) != digest:
        raise DigestError(f"{path}: content digest mismatch")
    meta = json.loads(ext)
    grid = GridConfig(**meta["grid"]) if meta.get("grid") else None
    extra = {k: v for k, v in meta.items() if k not in _EXT_BASE}
    return DatabaseMatrix(data, grid=grid, seed=meta.get("seed"),
                          padding_rows=meta.get("padding_rows", 0), kind=kind, meta=extra)
