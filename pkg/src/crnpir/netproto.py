"""Deployment layer: server handler, TCP daemon, transports and the client engine.

A ``ServerHandler`` turns request frames into reply frames for one store and
applies the configured faults. The same handler sits behind both transports:
``LocalTransport`` calls it in-process, ``TcpTransport`` reaches a ``Daemon``
over a socket. Either way the client engine builds identical frames, so
payloads and records match byte for byte.
"""

from __future__ import annotations

import asyncio
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import wire
from .batch import batch_build_queries, batch_recover, batch_server_answer
from .chor import chor_build_query, chor_reconstruct, chor_server_answer
from .errors import (
    ConsistencyError,
    ParameterError,
    ProtocolError,
    QuorumError,
    RemoteError,
)
from .goldberg import RecoveryReport, goldberg_build_queries, goldberg_recover, goldberg_server_answer
from .params import Protocol, ProtocolParams
from .raid import ChunkLayout, layout_of, raid_build_queries, raid_server_answer
from .sharing import EvalPointSet
from .spectrumdb import KIND_CHUNK, KIND_PLAIN, KIND_SHARE, DatabaseMatrix, GridConfig, SpectrumKey, inv_index
from .wire import ErrorCode, Frame, HelloInfo, Kind

log = logging.getLogger(__name__)

BYZANTINE_MODES = ("none", "flip", "garbage")


class SecureRandom:
    """Byte-valued ``integers`` backed by os.urandom; the default query randomness."""

    def integers(self, low, high, size=None, dtype=np.uint8):
        if (low, high) != (0, 256):
            raise ValueError("SecureRandom only draws uniform bytes")
        shape = () if size is None else size
        n = int(np.prod(shape))
        return np.frombuffer(os.urandom(n), dtype=np.uint8).reshape(shape).astype(dtype)


@dataclass
class FaultProfile:
    drop: float = 0.0
    latency_ms: float = 0.0
    byzantine: str = "none"
    seed: int = 0

    def __post_init__(self):
        if self.byzantine not in BYZANTINE_MODES:
            raise ParameterError(f"byzantine mode must be one of {BYZANTINE_MODES}")
        if not 0.0 <= self.drop <= 1.0:
            raise ParameterError("drop probability must be in [0, 1]")


_SUPPORTED = {
    KIND_PLAIN: frozenset({Protocol.CHOR, Protocol.GOLD, Protocol.BATCH}),
    KIND_SHARE: frozenset({Protocol.GOLD, Protocol.BATCH}),
    KIND_CHUNK: frozenset({Protocol.RAID}),
}


class ServerHandler:
    """Answers frames for one database, share replica or chunk store."""

    def __init__(self, store: DatabaseMatrix, server_id: int | None = None, alpha: int | None = None,
                 fault: FaultProfile | None = None, max_frame: int = wire.DEFAULT_MAX_FRAME):
        self.store = store
        self.server_id = int(server_id or store.meta.get("server_id", 1))
        self.alpha = int(alpha or store.meta.get("alpha", self.server_id))
        self.fault = fault or FaultProfile()
        self.max_frame = max_frame
        self.protocols = _SUPPORTED[store.kind]
        self.digest = store.consistency_digest()
        self._layout = layout_of(store) if store.kind == KIND_CHUNK else None
        self._rng = np.random.default_rng(self.fault.seed)
        self._lock = threading.Lock()

    def hello_info(self) -> HelloInfo:
        st = self.store
        meta = {"kind": st.kind, "padding_rows": st.padding_rows,
                "grid": st.extension()["grid"]}
        for key in ("tau", "ell", "pi", "first_chunk", "total_rows"):
            if key in st.meta:
                meta[key] = st.meta[key]
        return HelloInfo(wire.VERSION, self.server_id, self.alpha, self.digest, self.protocols,
                         st.r, st.s, meta)

    def _error(self, code, message, protocol=0) -> bytes:
        return Frame(Kind.ERROR, protocol, wire.encode_error(code, message)).encode()

    def handle(self, frame: Frame) -> tuple[bytes | None, float]:
        """Return (reply frame or None when the fault profile drops it, delay in seconds)."""
        delay = self.fault.latency_ms / 1000.0
        if frame.version != wire.VERSION:
            return self._error(ErrorCode.VERSION, f"unsupported version {frame.version}"), delay
        if frame.kind == Kind.HELLO:
            return Frame(Kind.HELLO_ACK, 0, wire.encode_hello_ack(self.hello_info())).encode(), delay
        if frame.kind != Kind.QUERY:
            return self._error(ErrorCode.MALFORMED, f"unexpected frame kind {frame.kind}"), delay
        try:
            protocol = Protocol(frame.protocol)
        except ValueError:
            return self._error(ErrorCode.UNSUPPORTED, f"unknown protocol {frame.protocol}"), delay
        if protocol not in self.protocols:
            return self._error(ErrorCode.UNSUPPORTED, f"{protocol.name} not served here", protocol), delay
        try:
            query, extra = wire.decode_query(protocol, frame.body)
        except ProtocolError as exc:
            return self._error(ErrorCode.MALFORMED, str(exc), protocol), delay

        with self._lock:
            dropped = self.fault.drop > 0 and self._rng.random() < self.fault.drop
        if dropped:
            return None, delay

        start = time.perf_counter()
        try:
            resp = self._answer(protocol, query, extra)
        except ProtocolError as exc:
            return self._error(ErrorCode.DIMENSION, str(exc), protocol), delay
        elapsed = time.perf_counter() - start
        body, _ = wire.encode_response(protocol, resp, elapsed * 1e6)
        body = self._corrupt(protocol, body)
        return Frame(Kind.RESPONSE, protocol, body).encode(), delay

    def _answer(self, protocol, query, extra):
        st = self.store
        if protocol is Protocol.CHOR:
            if query.r != st.r:
                raise ProtocolError(f"query for r={query.r}; database has r={st.r}")
            return chor_server_answer(query.bits, st, self.server_id)
        if protocol is Protocol.GOLD:
            if query.alpha != self.alpha:
                raise ProtocolError(f"query evaluated at alpha={query.alpha}; this server is {self.alpha}")
            return goldberg_server_answer(query, st, self.server_id)
        if protocol is Protocol.BATCH:
            if query.alpha != self.alpha:
                raise ProtocolError(f"query evaluated at alpha={query.alpha}; this server is {self.alpha}")
            return batch_server_answer(query, st, self.server_id)
        if extra.get("layout_digest") != self._layout.digest():
            raise ProtocolError("query built for a different chunk layout")
        return raid_server_answer(query, st, self.server_id)

    def _corrupt(self, protocol, body: bytes) -> bytes:
        mode = self.fault.byzantine
        if mode == "none":
            return body
        off, n = wire.payload_view(protocol, body)
        buf = bytearray(body)
        if mode == "flip":
            buf[off:] = bytes(b ^ 0xFF for b in buf[off:])
        else:
            with self._lock:
                buf[off:] = self._rng.integers(0, 256, size=n, dtype=np.uint8).tobytes()
        return bytes(buf)


# --- server side -------------------------------------------------------------

class Daemon:
    """asyncio TCP server around a ServerHandler; one task per connection."""

    def __init__(self, handler: ServerHandler, host: str = "127.0.0.1", port: int = 0):
        self.handler = handler
        self.host = host
        self.port = port
        self._server = None

    async def start(self) -> int:
        self._server = await asyncio.start_server(self._connection, self.host, self.port)
        self.port = self._server.sockets[0].getsockname()[1]
        log.info("server %d listening on %s:%d", self.handler.server_id, self.host, self.port)
        return self.port

    async def serve_forever(self):
        if self._server is None:
            await self.start()
        async with self._server:
            await self._server.serve_forever()

    async def stop(self):
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()

    async def _connection(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        loop = asyncio.get_running_loop()
        try:
            while True:
                (n,) = wire.PREFIX.unpack(await reader.readexactly(wire.PREFIX.size))
                if n > self.handler.max_frame:
                    log.warning("closing connection: %d-byte frame exceeds limit", n)
                    break
                data = await reader.readexactly(n)
                try:
                    frame = Frame.decode(data)
                except ProtocolError as exc:
                    writer.write(self.handler._error(ErrorCode.MALFORMED, str(exc)))
                    await writer.drain()
                    continue
                out, delay = await loop.run_in_executor(None, self.handler.handle, frame)
                if delay:
                    await asyncio.sleep(delay)
                if out is None:
                    continue
                writer.write(out)
                await writer.drain()
        except (asyncio.IncompleteReadError, ConnectionError):
            pass
        finally:
            writer.close()


class ServerThread:
    """Run a Daemon on its own event loop in a background thread."""

    def __init__(self, handler: ServerHandler, host: str = "127.0.0.1", port: int = 0):
        self.daemon = Daemon(handler, host, port)
        self._loop = asyncio.new_event_loop()
        self._thread = threading.Thread(target=self._loop.run_forever, daemon=True)

    @property
    def address(self) -> tuple[str, int]:
        return self.daemon.host, self.daemon.port

    def start(self) -> "ServerThread":
        self._thread.start()
        asyncio.run_coroutine_threadsafe(self.daemon.start(), self._loop).result()
        return self

    def stop(self):
        asyncio.run_coroutine_threadsafe(self.daemon.stop(), self._loop).result()
        self._loop.call_soon_threadsafe(self._loop.stop)
        self._thread.join()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()


def serve(store: DatabaseMatrix, bind: tuple[str, int], fault: FaultProfile | None = None,
          server_id: int | None = None, alpha: int | None = None) -> None:
    """Blocking daemon entry point."""
    daemon = Daemon(ServerHandler(store, server_id, alpha, fault), *bind)
    asyncio.run(daemon.serve_forever())


# --- client side -------------------------------------------------------------

@dataclass
class ServerDescriptor:
    """Where server ``server_id`` lives: a (host, port) pair or an in-process handler."""

    address: object
    server_id: int
    alpha: int | None = None
    digest: bytes | None = None


class LocalTransport:
    def __init__(self, handler: ServerHandler):
        self.handler = handler

    async def exchange(self, data: bytes) -> bytes | None:
        out, delay = self.handler.handle(Frame.decode(data[wire.PREFIX.size:]))
        if delay:
            await asyncio.sleep(delay)
        return out

    async def close(self):
        pass


class TcpTransport:
    def __init__(self, reader, writer):
        self.reader = reader
        self.writer = writer

    @classmethod
    async def connect(cls, host: str, port: int) -> "TcpTransport":
        reader, writer = await asyncio.open_connection(host, port)
        return cls(reader, writer)

    async def exchange(self, data: bytes) -> bytes | None:
        self.writer.write(data)
        await self.writer.drain()
        prefix = await self.reader.readexactly(wire.PREFIX.size)
        (n,) = wire.PREFIX.unpack(prefix)
        return prefix + await self.reader.readexactly(n)

    async def close(self):
        self.writer.close()
        try:
            await self.writer.wait_closed()
        except ConnectionError:
            pass


async def _open(desc: ServerDescriptor):
    if isinstance(desc.address, ServerHandler):
        return LocalTransport(desc.address)
    host, port = desc.address
    return await TcpTransport.connect(host, int(port))


@dataclass
class Transcript:
    bytes_up: int = 0
    bytes_down: int = 0
    framing_up: int = 0
    framing_down: int = 0
    t_query_build: float = 0.0
    t_server: dict = field(default_factory=dict)
    t_recover: float = 0.0
    t_total: float = 0.0
    responders: list = field(default_factory=list)
    non_responders: list = field(default_factory=list)
    errors: dict = field(default_factory=dict)
    # full query frames sent, and response payloads without the timing header
    payloads_up: dict = field(default_factory=dict)
    payloads_down: dict = field(default_factory=dict)


@dataclass
class FetchResult:
    protocol: Protocol
    betas: list
    reports: list
    transcript: Transcript

    @property
    def report(self) -> RecoveryReport:
        return self.reports[0]

    @property
    def record(self) -> bytes:
        return self.reports[0].record


def measure_transcript(result: FetchResult) -> dict:
    tr = result.transcript
    return {
        "bytes_up": tr.bytes_up,
        "bytes_down": tr.bytes_down,
        "framing_up": tr.framing_up,
        "framing_down": tr.framing_down,
        "t_query_build": tr.t_query_build,
        "t_server": dict(tr.t_server),
        "t_recover": tr.t_recover,
        "t_total": tr.t_total,
    }


def _quorum(protocol: Protocol, params: ProtocolParams) -> int:
    if protocol in (Protocol.CHOR, Protocol.RAID):
        return params.ell
    return params.k


def _build(protocol, params, betas, r, alphas, rng, layout):
    """Per-server (query object, layout digest) in server-id order."""
    ell = params.ell
    if protocol is Protocol.CHOR:
        qs = chor_build_query(betas[0], r, ell, rng)
        return [wire.ChorQuery(r, share) for share in qs.shares]
    points = EvalPointSet(tuple(alphas))
    if protocol is Protocol.GOLD:
        return goldberg_build_queries(betas[0], r, ell, params.t, points, rng)
    if protocol is Protocol.BATCH:
        return batch_build_queries(betas, r, ell, params.t, points, rng)
    return raid_build_queries(betas[0], layout, rng)


async def fetch_rows_async(betas: Sequence[int], servers: Sequence[ServerDescriptor],
                           params: ProtocolParams, protocol, timeout: float = 30.0,
                           rng=None) -> FetchResult:
    protocol = Protocol.parse(protocol)
    params.validate(protocol)
    betas = [int(b) for b in betas]
    if protocol is not Protocol.BATCH and len(betas) != 1:
        raise ParameterError(f"{protocol.name} retrieves one record per query")
    if len(servers) != params.ell:
        raise ParameterError(f"{len(servers)} servers given for l={params.ell}")
    servers = sorted(servers, key=lambda d: d.server_id)
    rng = rng if rng is not None else SecureRandom()
    tr = Transcript()
    t0 = time.perf_counter()

    async def connect_and_hello(desc):
        transport = await asyncio.wait_for(_open(desc), timeout)
        hello = Frame(Kind.HELLO, 0, b"").encode()
        reply = await asyncio.wait_for(transport.exchange(hello), timeout)
        if reply is None:
            raise ProtocolError("no HELLO_ACK")
        frame = Frame.decode(reply[wire.PREFIX.size:])
        if frame.kind == Kind.ERROR:
            raise RemoteError(*wire.decode_error(frame.body))
        return transport, wire.decode_hello_ack(frame.body), len(hello), len(reply)

    opened = await asyncio.gather(*(connect_and_hello(d) for d in servers), return_exceptions=True)
    transports, infos = {}, {}
    for desc, res in zip(servers, opened):
        if isinstance(res, BaseException):
            tr.errors[desc.server_id] = repr(res)
            continue
        transport, info, up, down = res
        transports[desc.server_id], infos[desc.server_id] = transport, info
        tr.framing_up += up
        tr.framing_down += down

    try:
        return await _run(protocol, params, betas, servers, transports, infos, rng, timeout, tr, t0)
    finally:
        await asyncio.gather(*(t.close() for t in transports.values()), return_exceptions=True)


async def _run(protocol, params, betas, servers, transports, infos, rng, timeout, tr, t0):
    ell = params.ell
    if not infos:
        raise QuorumError("no server answered HELLO", missing=[d.server_id for d in servers])
    digests = {info.digest for info in infos.values()}
    for desc in servers:
        if desc.digest is not None:
            digests.add(desc.digest)
    if len(digests) != 1:
        raise ConsistencyError("servers disagree on the database digest")
    any_info = next(iter(infos.values()))
    layout = None
    if protocol is Protocol.RAID:
        meta = any_info.meta
        layout = ChunkLayout(meta["ell"], meta["pi"], meta["total_rows"])
        if layout.ell != ell:
            raise ParameterError(f"chunk stores were cut for l={layout.ell}, not {ell}")
        if layout.pi != params.pi:
            raise ParameterError(f"chunk stores use pi={layout.pi}, not {params.pi}")
        for sid, info in infos.items():
            if info.meta.get("first_chunk") != sid:
                raise ParameterError(f"server {sid} stores chunk {info.meta.get('first_chunk')} first")
        r = layout.r
    else:
        r = any_info.r
        store_tau = any_info.meta.get("tau", 0)
        if store_tau != params.tau:
            raise ParameterError(f"servers hold tau={store_tau} shares; params say tau={params.tau}")
    for beta in betas:
        if not 1 <= beta <= r:
            raise ParameterError(f"beta={beta} outside 1..{r}")
    alphas = []
    for desc in servers:
        info = infos.get(desc.server_id)
        alphas.append(desc.alpha or (info.alpha if info else desc.server_id))
    if protocol in (Protocol.GOLD, Protocol.BATCH) and len(set(alphas)) != len(alphas):
        raise ConsistencyError(f"servers share evaluation points {alphas}; give each a distinct server id")

    tb = time.perf_counter()
    queries = _build(protocol, params, betas, r, alphas, rng, layout)
    digest = layout.digest() if layout else b""
    frames = {}
    for desc, query in zip(servers, queries):
        body, payload = wire.encode_query(protocol, query, digest)
        frames[desc.server_id] = (Frame(Kind.QUERY, protocol, body).encode(), payload)
    tr.t_query_build = time.perf_counter() - tb

    async def ask(sid):
        data, _ = frames[sid]
        try:
            reply = await asyncio.wait_for(transports[sid].exchange(data), timeout)
        except (asyncio.TimeoutError, ConnectionError, asyncio.IncompleteReadError) as exc:
            return sid, None, repr(exc) if not isinstance(exc, asyncio.TimeoutError) else "timeout"
        return sid, reply, None

    tasks = set()
    for sid in transports:
        data, payload = frames[sid]
        tr.bytes_up += payload
        tr.framing_up += len(data) - payload
        tr.payloads_up[sid] = data
        tasks.add(asyncio.ensure_future(ask(sid)))

    need = _quorum(protocol, params)
    responses = {}
    pending = tasks
    while pending and len(responses) < need:
        done, pending = await asyncio.wait(pending, return_when=asyncio.FIRST_COMPLETED)
        for task in sorted(done, key=lambda t: t.result()[0]):
            sid, reply, err = task.result()
            if reply is None:
                tr.errors[sid] = err or "dropped"
                continue
            frame = Frame.decode(reply[wire.PREFIX.size:])
            if frame.kind == Kind.ERROR:
                tr.errors[sid] = "remote %d: %s" % wire.decode_error(frame.body)
                continue
            try:
                resp, us, payload = wire.decode_response(protocol, frame.body)
            except ProtocolError as exc:
                tr.errors[sid] = repr(exc)
                continue
            if len(responses) >= need:
                continue
            resp.server_id = sid
            responses[sid] = resp
            tr.t_server[sid] = us / 1e6
            tr.bytes_down += payload
            tr.framing_down += len(reply) - payload
            off, n = wire.payload_view(protocol, frame.body)
            tr.payloads_down[sid] = frame.body[off:off + n]
    for task in pending:
        task.cancel()

    tr.responders = sorted(responses)
    tr.non_responders = [d.server_id for d in servers if d.server_id not in responses]
    degree = params.degree
    if protocol in (Protocol.CHOR, Protocol.RAID) and len(responses) < ell:
        raise QuorumError(f"{protocol.name} needs all {ell} responses; missing "
                          f"{tr.non_responders}", missing=tr.non_responders)
    if protocol in (Protocol.GOLD, Protocol.BATCH) and len(responses) <= degree:
        raise QuorumError(f"{len(responses)} responses cannot recover degree-{degree} shares; "
                          f"missing {tr.non_responders}", missing=tr.non_responders)

    tc = time.perf_counter()
    resp_list = [responses[sid] for sid in tr.responders]
    if protocol in (Protocol.CHOR, Protocol.RAID):
        rec = chor_reconstruct(resp_list, ell)
        reports = [RecoveryReport(rec, frozenset(tr.responders), frozenset(), "xor")]
    elif protocol is Protocol.GOLD:
        reports = [goldberg_recover(resp_list, params.t, params.w, degree=degree)]
    else:
        reports = batch_recover(resp_list, params.t, params.w, degree=degree)
    tr.t_recover = time.perf_counter() - tc
    tr.t_total = time.perf_counter() - t0
    return FetchResult(protocol, betas, reports, tr)


def fetch_rows(betas, servers, params, protocol, timeout: float = 30.0, rng=None) -> FetchResult:
    return asyncio.run(fetch_rows_async(betas, servers, params, protocol, timeout, rng))


async def _grid_from_hello(servers, timeout) -> GridConfig:
    for desc in servers:
        try:
            transport = await asyncio.wait_for(_open(desc), timeout)
        except (OSError, asyncio.TimeoutError):
            continue
        try:
            reply = await asyncio.wait_for(transport.exchange(Frame(Kind.HELLO, 0, b"").encode()), timeout)
        except (OSError, asyncio.TimeoutError, asyncio.IncompleteReadError):
            continue
        finally:
            await transport.close()
        if reply is None:
            continue
        frame = Frame.decode(reply[wire.PREFIX.size:])
        if frame.kind == Kind.HELLO_ACK:
            grid = wire.decode_hello_ack(frame.body).meta.get("grid")
            if grid:
                return GridConfig(**grid)
    raise QuorumError("no server advertised a grid", missing=[d.server_id for d in servers])


def private_fetch(key, servers: Sequence[ServerDescriptor], params: ProtocolParams, protocol,
                  timeout: float = 30.0, rng=None, grid: GridConfig | None = None) -> FetchResult:
    """Privately fetch the record(s) for one SpectrumKey, or a list of keys with BATCH."""
    keys = [key] if isinstance(key, SpectrumKey) else list(key)
    if grid is None:
        grid = asyncio.run(_grid_from_hello(servers, timeout))
    betas = [inv_index(k, grid) for k in keys]
    return fetch_rows(betas, servers, params, protocol, timeout, rng)
