"""Command-line entry point: ``crnpir <subcommand>``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys

import numpy as np

from . import costs
from .bench import BenchScenario, bench_run, bench_trivial_baseline, build_deployment, reference_scale_rows, report
from .errors import PIRError
from .netproto import FaultProfile, ServerDescriptor, measure_transcript, private_fetch, serve
from .params import Protocol, ProtocolParams
from .raid import raid_partition
from .sharing import EvalPointSet
from .spectrumdb import (
    GridConfig,
    SpectrumKey,
    SpectrumRecord,
    generate_database,
    load_database,
    store_database,
)
from .tau import pu_encode_database


def _address(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not host or not port.isdigit():
        raise argparse.ArgumentTypeError(f"expected host:port, got {text!r}")
    return host, int(port)


def _numbers(text: str, kind=int) -> list:
    return [kind(x) for x in text.split(",") if x]


def cmd_dbgen(args) -> int:
    if args.grid:
        width, height, channels, slots = _numbers(args.grid)
        grid = GridConfig(args.origin[0], args.origin[1], args.cell_m, width, height, channels, slots)
    else:
        grid = GridConfig.strip(args.rows, origin_lat=args.origin[0], origin_lon=args.origin[1],
                                cell_m=args.cell_m)
    db = generate_database(grid, args.block_bytes, args.seed, args.align)
    store_database(db, args.out)
    print(f"wrote {args.out}: r={db.r} s={db.s} digest={db.digest().hex()}")
    return 0


def cmd_dbshare(args) -> int:
    db = load_database(args.store)
    rng = np.random.default_rng(args.seed) if args.seed is not None else np.random.default_rng()
    shared = pu_encode_database(db, args.tau, EvalPointSet.default(args.ell), rng)
    for i, part in enumerate(shared.dbs, start=1):
        path = f"{args.out_prefix}.{i}.spdb"
        store_database(part, path)
        print(f"wrote {path}: alpha={part.meta['alpha']}")
    print(f"share set digest {shared.share_set_digest().hex()}")
    return 0


def cmd_dbpartition(args) -> int:
    db = load_database(args.store)
    for i, part in enumerate(raid_partition(db, args.ell, args.pi), start=1):
        path = f"{args.out_prefix}.{i}.spdb"
        store_database(part, path)
        print(f"wrote {path}: chunks {part.meta['first_chunk']}.. ({part.r} rows)")
    return 0


def cmd_serve(args) -> int:
    store = load_database(args.store)
    fault = FaultProfile(args.fault_drop, args.fault_latency_ms, args.fault_byz, args.fault_seed)
    try:
        serve(store, args.bind, fault, args.server_id, args.alpha)
    except KeyboardInterrupt:
        pass
    return 0


def _batch_keys(path) -> list[SpectrumKey]:
    keys = []
    with open(path, newline="") as f:
        for row in csv.reader(f):
            if not row or row[0].lstrip().startswith("#"):
                continue
            lat, lon, ch, slot = row[:4]
            keys.append(SpectrumKey(float(lat), float(lon), int(ch), int(slot)))
    return keys


def cmd_fetch(args) -> int:
    protocol = Protocol.parse(args.protocol)
    servers = [ServerDescriptor(addr, i) for i, addr in enumerate(args.servers, start=1)]
    if args.batch_file:
        keys = _batch_keys(args.batch_file)
    else:
        if None in (args.lat, args.lon, args.channel, args.slot):
            print("fetch needs --lat --lon --channel --slot or --batch-file", file=sys.stderr)
            return 2
        keys = [SpectrumKey(args.lat, args.lon, args.channel, args.slot)]
    params = ProtocolParams(ell=len(servers), t=args.t, k=args.k, tau=args.tau, pi=args.pi, q=len(keys))
    res = private_fetch(keys if protocol is Protocol.BATCH else keys[0], servers, params, protocol,
                        timeout=args.timeout)
    out = []
    for beta, rep in zip(res.betas, res.reports):
        rec = SpectrumRecord.unpack(rep.record)
        out.append({"beta": beta, "available": rec.available, "max_power_ddbm": rec.max_power_ddbm,
                    "valid_from": rec.valid_from, "valid_until": rec.valid_until,
                    "byzantine": sorted(rep.byzantine), "path": rep.path})
    print(json.dumps({"records": out, "transcript": measure_transcript(res)}, indent=2, default=str))
    return 0


def cmd_bench(args) -> int:
    if args.reference_scale:
        formulas = reference_scale_rows()
        print(f"CHOR  {costs.kilobytes(formulas[Protocol.CHOR]):10.2f} KB")
        print(f"GOLD  {costs.kilobytes(formulas[Protocol.GOLD]):10.2f} KB")
        print(f"RAID  {costs.kibibytes(formulas[Protocol.RAID]):10.2f} KiB")
        if not args.scenario:
            return 0
    if not args.scenario:
        print("bench needs --scenario or --reference-scale", file=sys.stderr)
        return 2
    rows = []
    for path in args.scenario:
        scenario = BenchScenario.load(path)
        rows.extend(bench_run(scenario))
        if args.trivial:
            r, b, params = next(scenario.tuples())
            dep = build_deployment(scenario.protocol, r, b, params, scenario.seed)
            rows.append(bench_trivial_baseline(dep.db, scenario))
    table, _ = report(rows, args.csv)
    print(table, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="crnpir", description="Private spectrum-database queries.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("dbgen", help="generate a synthetic spectrum database")
    g.add_argument("--rows", type=int, default=1024, help="rows of a one-cell-high strip grid")
    g.add_argument("--grid", help="width,height,channels,timeslots (overrides --rows)")
    g.add_argument("--origin", type=lambda s: _numbers(s, float), default=[40.0, -105.0],
                   help="lat,lon of the grid's south-west corner")
    g.add_argument("--cell-m", type=float, default=100.0)
    g.add_argument("--block-bytes", type=int, default=560)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--align", type=int, default=8, help="pad r to a multiple of this")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_dbgen)

    s = sub.add_parser("dbshare", help="Shamir-share a database into l replicas")
    s.add_argument("--store", required=True)
    s.add_argument("--tau", type=int, required=True)
    s.add_argument("--ell", type=int, required=True)
    s.add_argument("--seed", type=int, help="only for reproducible tests; omit in deployment")
    s.add_argument("--out-prefix", required=True)
    s.set_defaults(func=cmd_dbshare)

    c = sub.add_parser("dbpartition", help="cut a database into RAID chunk stores")
    c.add_argument("--store", required=True)
    c.add_argument("--ell", type=int, required=True)
    c.add_argument("--pi", type=int, required=True)
    c.add_argument("--out-prefix", required=True)
    c.set_defaults(func=cmd_dbpartition)

    v = sub.add_parser("serve", help="run one database server")
    v.add_argument("--store", required=True)
    v.add_argument("--bind", type=_address, default=("127.0.0.1", 7400))
    v.add_argument("--server-id", type=int)
    v.add_argument("--alpha", type=int)
    v.add_argument("--fault-drop", type=float, default=0.0)
    v.add_argument("--fault-byz", choices=["none", "flip", "garbage"], default="none")
    v.add_argument("--fault-latency-ms", type=float, default=0.0)
    v.add_argument("--fault-seed", type=int, default=0)
    v.set_defaults(func=cmd_serve)

    f = sub.add_parser("fetch", help="privately fetch spectrum availability")
    f.add_argument("--protocol", required=True, choices=[p.name.lower() for p in Protocol])
    f.add_argument("--servers", required=True, type=lambda s: [_address(a) for a in s.split(",")],
                   help="host:port list in server-id order")
    f.add_argument("--lat", type=float)
    f.add_argument("--lon", type=float)
    f.add_argument("--channel", type=int)
    f.add_argument("--slot", type=int)
    f.add_argument("--batch-file", help="CSV of lat,lon,channel,slot (batch protocol)")
    f.add_argument("--t", type=int, default=1)
    f.add_argument("--k", type=int)
    f.add_argument("--tau", type=int, default=0)
    f.add_argument("--pi", type=int, default=2)
    f.add_argument("--timeout", type=float, default=10.0)
    f.set_defaults(func=cmd_fetch)

    b = sub.add_parser("bench", help="run benchmark scenarios")
    b.add_argument("--scenario", action="append", help="scenario JSON file (repeatable)")
    b.add_argument("--csv", help="write all rows to this CSV file")
    b.add_argument("--trivial", action="store_true", help="add the full-download baseline row")
    b.add_argument("--reference-scale", action="store_true",
                   help="print formula communication at r=10^6, b=560 B, l=6, k=6")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except PIRError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
