"""Benchmark harness: runs retrieval trials through netproto and reports costs.

Each scenario sweeps the cartesian product of its parameter lists. Tuples that
violate a protocol's constraints are skipped with a logged reason. Every trial
checks the recovered record, and the measured payload bytes must equal the
communication formula exactly; any failure aborts with the seed that caused it.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import logging
import statistics
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import costs
from .errors import ParameterError
from .kernels import counters
from .netproto import FaultProfile, ServerDescriptor, ServerHandler, ServerThread, fetch_rows
from .params import PRIVACY_LABELS, Protocol, ProtocolParams
from .raid import raid_partition
from .sharing import EvalPointSet
from .spectrumdb import DatabaseMatrix, GridConfig, generate_database, verify_record
from .tau import pu_encode_database

log = logging.getLogger(__name__)

CSV_COLUMNS = [
    "protocol", "r", "b_bytes", "n_bits", "ell", "t", "k", "theta", "tau", "pi", "q",
    "trials", "comm_bytes", "predicted_bytes", "t_db_s", "t_su_s", "t_total_s",
    "server_ops", "client_ops", "successes", "byzantine_identified", "privacy",
]

TIMING_FOOTER = ("Timings are medians measured on this machine and are not reproduction "
                 "targets; only the communication sizes are checked exactly.")


class BenchFailure(RuntimeError):
    pass


@dataclass
class BenchScenario:
    protocol: str
    r: list = field(default_factory=lambda: [1024])
    b: list = field(default_factory=lambda: [560])
    ell: list = field(default_factory=lambda: [3])
    t: list = field(default_factory=lambda: [1])
    k: list = field(default_factory=lambda: [None])
    theta: list = field(default_factory=lambda: [0])
    tau: list = field(default_factory=lambda: [0])
    pi: list = field(default_factory=lambda: [2])
    q: list = field(default_factory=lambda: [1])
    trials: int = 30
    seed: int = 0
    output: str | None = None
    transport: str = "loopback"
    byzantine: str = "flip"

    @classmethod
    def from_dict(cls, d: dict) -> "BenchScenario":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ParameterError(f"unknown scenario keys {sorted(unknown)}")
        d = dict(d)
        for name in ("r", "b", "ell", "t", "k", "theta", "tau", "pi", "q"):
            if name in d and not isinstance(d[name], list):
                d[name] = [d[name]]
        return cls(**d)

    @classmethod
    def load(cls, path) -> "BenchScenario":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def tuples(self):
        """(r, b, ProtocolParams) for every valid swept combination."""
        protocol = Protocol.parse(self.protocol)
        for r, b, ell, t, k, theta, tau, pi, q in itertools.product(
                self.r, self.b, self.ell, self.t, self.k, self.theta, self.tau, self.pi, self.q):
            params = ProtocolParams(ell=ell, t=t, k=k, theta=theta, tau=tau, pi=pi, q=q)
            try:
                params.validate(protocol)
                if tau and protocol not in (Protocol.GOLD, Protocol.BATCH):
                    raise ParameterError("tau applies to GOLD and BATCH only")
                if theta and protocol not in (Protocol.GOLD, Protocol.BATCH):
                    raise ParameterError("byzantine servers are only tolerated by GOLD and BATCH")
            except ParameterError as exc:
                log.info("skipping %s r=%s %s: %s", protocol.name, r, params, exc)
                continue
            yield r, b, params


@dataclass
class BenchRow:
    protocol: str
    r: int
    b_bytes: int
    n_bits: int
    ell: int
    t: int
    k: int
    theta: int
    tau: int
    pi: int
    q: int
    trials: int
    comm_bytes: int
    predicted_bytes: float
    t_db_s: float
    t_su_s: float
    t_total_s: float
    server_ops: int
    client_ops: int
    successes: int
    byzantine_identified: int
    privacy: str


@dataclass
class Deployment:
    db: DatabaseMatrix
    servers: list
    byzantine: frozenset
    threads: list = field(default_factory=list)

    def close(self):
        for th in self.threads:
            th.stop()
        self.threads = []


def build_deployment(protocol, rows: int, block_bytes: int, params: ProtocolParams, seed: int = 0,
                     transport: str = "loopback", byzantine: str = "flip") -> Deployment:
    """Generate a database, cut it into per-server stores and stand up the servers."""
    protocol = Protocol.parse(protocol)
    ell = params.ell
    align = 8 * ell if protocol is Protocol.RAID else 8
    db = generate_database(GridConfig.strip(rows), block_bytes, seed, align)
    if protocol is Protocol.RAID:
        stores = raid_partition(db, ell, params.pi)
    elif params.tau:
        shared = pu_encode_database(db, params.tau, EvalPointSet.default(ell), np.random.default_rng(seed))
        stores = shared.dbs
    else:
        stores = [db] * ell
    bad = frozenset(range(ell - params.theta + 1, ell + 1))
    handlers = [ServerHandler(st, i, fault=FaultProfile(byzantine=byzantine, seed=seed + i) if i in bad else None)
                for i, st in enumerate(stores, start=1)]
    dep = Deployment(db, [], bad)
    if transport == "tcp":
        dep.threads = [ServerThread(h).start() for h in handlers]
        dep.servers = [ServerDescriptor(th.address, h.server_id) for th, h in zip(dep.threads, handlers)]
    elif transport == "loopback":
        dep.servers = [ServerDescriptor(h, h.server_id) for h in handlers]
    else:
        raise ParameterError(f"unknown transport {transport!r}")
    return dep


def _run_tuple(protocol: Protocol, rows: int, block_bytes: int, params: ProtocolParams,
               scenario: BenchScenario) -> BenchRow:
    dep = build_deployment(protocol, rows, block_bytes, params, scenario.seed,
                           scenario.transport, scenario.byzantine)
    db = dep.db
    q = params.q if protocol is Protocol.BATCH else 1
    t_db, t_su, t_total, server_ops, client_ops = [], [], [], [], []
    comm = predicted = None
    ok = identified = 0
    try:
        for trial in range(scenario.trials):
            pick = np.random.default_rng([scenario.seed, trial])
            betas = [int(x) for x in pick.integers(1, db.grid.rows + 1, size=q)]
            before = counters.snapshot()
            res = fetch_rows(betas, dep.servers, params, protocol,
                             rng=np.random.default_rng([scenario.seed, trial, 1]))
            after = counters.snapshot()
            for beta, rep in zip(betas, res.reports):
                if rep.record != db.row(beta) or not verify_record(rep.record):
                    raise BenchFailure(f"{protocol.name} trial {trial} beta={beta}: wrong record "
                                       f"(seed={scenario.seed}, params={params})")
            tr = res.transcript
            expect_bad = dep.byzantine & set(tr.responders)
            if all(rep.byzantine == expect_bad for rep in res.reports):
                identified += 1
            ok += 1
            comm = tr.bytes_up + tr.bytes_down
            predicted = costs.comm_bits(protocol, db.r, db.b_bits, params.ell, params.w,
                                        len(tr.responders), q) / 8
            if comm != predicted:
                raise BenchFailure(f"{protocol.name} trial {trial}: measured {comm} payload bytes, "
                                   f"formula gives {predicted} (seed={scenario.seed})")
            t_db.append(statistics.fmean(tr.t_server.values()))
            t_su.append(tr.t_query_build + tr.t_recover)
            t_total.append(tr.t_total)
            server_ops.append((after["gf_mul_adds"] - before["gf_mul_adds"]
                               + after["xor_bytes_scanned"] - before["xor_bytes_scanned"]) // params.ell)
            client_ops.append(after["client_gf_muls"] - before["client_gf_muls"])
    finally:
        dep.close()
    return BenchRow(
        protocol.name, db.r, db.s, db.n_bits, params.ell, params.t, params.k, params.theta,
        params.tau, params.pi, q, scenario.trials, comm, predicted,
        statistics.median(t_db), statistics.median(t_su), statistics.median(t_total),
        int(statistics.median(server_ops)), int(statistics.median(client_ops)),
        ok, identified, PRIVACY_LABELS[protocol],
    )


def bench_run(scenario: BenchScenario) -> list[BenchRow]:
    protocol = Protocol.parse(scenario.protocol)
    rows = []
    for r, b, params in scenario.tuples():
        row = _run_tuple(protocol, r, b, params, scenario)
        log.info("%s r=%d l=%d t=%d k=%d: comm=%d B t_db=%.4fs", row.protocol, row.r, row.ell,
                 row.t, row.k, row.comm_bytes, row.t_db_s)
        rows.append(row)
    if scenario.output:
        Path(scenario.output).write_text(to_csv(rows))
    return rows


def bench_trivial_baseline(db: DatabaseMatrix, scenario: BenchScenario, beta: int | None = None) -> BenchRow:
    """Download the whole database and read the row locally."""
    beta = beta or 1
    t_total = []
    for _ in range(max(scenario.trials, 1)):
        start = time.perf_counter()
        copy = np.frombuffer(db.data.tobytes(), dtype=np.uint8).reshape(db.r, db.s)
        record = copy[beta - 1].tobytes()
        t_total.append(time.perf_counter() - start)
        if record != db.row(beta):
            raise BenchFailure("trivial download returned the wrong row")
    n_bytes = costs.trivial_comm_bits(db.r, db.b_bits) // 8
    return BenchRow("TRIVIAL", db.r, db.s, db.n_bits, 1, 0, 1, 0, 0, 0, 1, len(t_total),
                    n_bytes, n_bytes, 0.0, statistics.median(t_total), statistics.median(t_total),
                    0, 0, len(t_total), 0, "perfectly private")


def reference_scale_rows(r: int = 10**6, b_bytes: int = 560, ell: int = 6, k: int = 6) -> dict:
    """Formula-only communication at the given scale, in bits."""
    b = b_bytes * 8
    return {
        Protocol.CHOR: costs.chor_comm_bits(r, b, ell),
        Protocol.GOLD: costs.goldberg_comm_bits(r, b, ell, 8, k),
        Protocol.RAID: costs.raid_comm_bits(r, b, ell),
    }


def to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(asdict(row))
    return buf.getvalue()


def from_csv(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text)))


def report(rows, csv_path=None) -> tuple[str, str]:
    """Return (fixed-width table, CSV text); also writes the CSV when a path is given."""
    header = f"{'protocol':<8} {'r':>8} {'l':>3} {'t':>3} {'k':>3} {'tau':>3} {'pi':>3} {'q':>4} {'comm KB':>11} " \
             f"{'t_db s':>10} {'t_su s':>10} {'t_total s':>10}  privacy"
    lines = [header, "-" * len(header)]
    for row in rows:
        lines.append(f"{row.protocol:<8} {row.r:>8} {row.ell:>3} {row.t:>3} {row.k:>3} {row.tau:>3} {row.pi:>3} {row.q:>4} "
                     f"{row.comm_bytes / 1000:>11.2f} {row.t_db_s:>10.6f} {row.t_su_s:>10.6f} "
                     f"{row.t_total_s:>10.6f}  {row.privacy}")
    lines.append("")
    lines.append(TIMING_FOOTER)
    text = to_csv(rows)
    if csv_path:
        Path(csv_path).write_text(text)
    return "\n".join(lines) + "\n", text
