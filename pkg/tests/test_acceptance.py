"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line that pytest prints in an "acceptance
criteria" section at the end of the run.
"""

import itertools
import statistics
import time

import numpy as np
import pytest

from conftest import FixedRandom, hand_db
from oracles import SeedRandom, hand_expander, oracle_mul, rs_oracle
from crnpir import costs, gf256
from crnpir.batch import QueryMatrix, batch_build_queries, batch_server_answer, strassen_mul
from crnpir.bench import BenchScenario, bench_run, build_deployment, reference_scale_rows
from crnpir.chor import chor_build_query, chor_reconstruct, chor_server_answer, chor_shares, packed_basis
from crnpir.errors import ByzantineOverloadError, DecodeError, IncompleteResponseError
from crnpir.goldberg import goldberg_build_queries, goldberg_recover, goldberg_server_answer
from crnpir.kernels import counters
from crnpir.netproto import FaultProfile, ServerDescriptor, ServerHandler, ServerThread, fetch_rows
from crnpir.params import Protocol, ProtocolParams
from crnpir.raid import ChunkLayout, raid_build_queries, raid_partition, raid_reconstruct, raid_server_answer
from crnpir.sharing import EvalPointSet, share_vector
from crnpir.spectrumdb import DatabaseMatrix, GridConfig, expected_record, generate_database, verify_record
from crnpir.tau import pu_encode_database

pytestmark = pytest.mark.acceptance


def loopback(stores, faults=None):
    faults = faults or {}
    return [ServerDescriptor(ServerHandler(st, i, fault=faults.get(i)), i) for i, st in enumerate(stores, start=1)]


def median_time(fn, trials=30):
    samples = []
    for _ in range(trials):
        start = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - start)
    return statistics.median(samples)


def paired_median_times(fa, fb, trials=30):
    """Alternate two workloads so machine-level drift hits both equally."""
    fa(), fb()
    ta, tb = [], []
    for _ in range(trials):
        for fn, out in ((fa, ta), (fb, tb)):
            start = time.perf_counter()
            fn()
            out.append(time.perf_counter() - start)
    return statistics.median(ta), statistics.median(tb)


def total_variation(a, b):
    return 0.5 * float(np.abs(a / a.sum() - b / b.sum()).sum())


def homogeneity_z(a, b):
    """Chi-square homogeneity statistic of two histograms, as a z-score against its dof."""
    a = a.astype(np.float64)
    b = b.astype(np.float64)
    keep = (a + b) > 0
    a, b = a[keep], b[keep]
    na, nb = a.sum(), b.sum()
    pooled = (a + b) / (na + nb)
    chi2 = float((((a - na * pooled) ** 2) / (na * pooled) + ((b - nb * pooled) ** 2) / (nb * pooled)).sum())
    dof = keep.sum() - 1
    return (chi2 - dof) / np.sqrt(2 * dof)


# 1 -------------------------------------------------------------------------

def test_c01_reference_scale_formulas(criterion):
    with criterion(1, "communication formulas at r=10^6, b=560 B, l=6, w=8, k=6") as notes:
        f = reference_scale_rows()
        chor_kb = costs.kilobytes(f[Protocol.CHOR])
        gold_kb = costs.kilobytes(f[Protocol.GOLD])
        raid_kib = costs.kibibytes(f[Protocol.RAID])
        notes.append(f"CHOR {chor_kb:.2f} KB, GOLD {gold_kb:.2f} KB, RAID {raid_kib:.2f} KiB")
        assert round(chor_kb) == 753
        assert gold_kb == pytest.approx(6000, rel=0.01)
        assert round(gold_kb) == 6003
        assert raid_kib == pytest.approx(125, rel=0.01)


# 2 -------------------------------------------------------------------------

def test_c02_measured_bytes_equal_formulas(criterion):
    with criterion(2, "measured payload bytes equal the formulas at r=10^4, b=560 B, l=6") as notes:
        start = time.perf_counter()
        b = 560 * 8
        scenarios = [
            BenchScenario("CHOR", r=[10**4], b=[560], ell=[6], trials=3),
            BenchScenario("GOLD", r=[10**4], b=[560], ell=[6], t=[2], k=[6, 4], trials=3),
            BenchScenario("GOLD", r=[10**4], b=[560], ell=[6], t=[2], tau=[1], trials=3),
            BenchScenario("BATCH", r=[10**4], b=[560], ell=[6], t=[2], q=[4], trials=3),
            BenchScenario("RAID", r=[10**4], b=[560], ell=[6], pi=[2, 6], trials=3),
        ]
        rows = [row for sc in scenarios for row in bench_run(sc)]
        for row in rows:
            r = row.r
            expect = {
                "CHOR": (r + b) * 6,
                "GOLD": r * 8 * 6 + row.k * b,
                "BATCH": row.q * (r * 8 * 6 + row.k * b),
                "RAID": r + 6 * 128 + 6 * b,
            }[row.protocol]
            assert row.comm_bytes * 8 == expect, row
            assert row.successes == row.trials
        chor = next(row for row in rows if row.protocol == "CHOR")
        assert round(chor.comm_bytes / 1000, 2) == 10.86
        elapsed = time.perf_counter() - start
        notes.append(f"{len(rows)} configurations in {elapsed:.1f} s")
        assert elapsed < 60


# 3 -------------------------------------------------------------------------

def _trial_sweep(protocol, params, trials, rows=1024, block=560, per_db=100):
    q = params.q if protocol is Protocol.BATCH else 1
    ok = 0
    deployments = {}
    try:
        for trial in range(trials):
            seed = 1000 + trial // per_db
            if seed not in deployments:
                deployments[seed] = build_deployment(protocol, rows, block, params, seed)
            dep = deployments[seed]
            rng = np.random.default_rng([seed, trial])
            betas = [int(x) for x in rng.integers(1, dep.db.grid.rows + 1, size=q)]
            res = fetch_rows(betas, dep.servers, params, protocol, rng=rng)
            for beta, rep in zip(betas, res.reports):
                assert rep.record == expected_record(seed, beta, block), (protocol, seed, beta)
                assert verify_record(rep.record)
            ok += 1
    finally:
        for dep in deployments.values():
            dep.close()
    return ok


def test_c03_end_to_end_correctness(criterion):
    with criterion(3, "random-trial correctness for every protocol") as notes:
        start = time.perf_counter()
        cases = [
            ("CHOR", Protocol.CHOR, ProtocolParams(6)),
            ("GOLD", Protocol.GOLD, ProtocolParams(6, t=2)),
            ("BATCH q=16", Protocol.BATCH, ProtocolParams(6, t=2, q=16)),
            ("tau=1", Protocol.GOLD, ProtocolParams(6, t=2, tau=1)),
        ] + [(f"RAID pi={pi}", Protocol.RAID, ProtocolParams(6, pi=pi)) for pi in range(2, 7)]
        counts = []
        for label, protocol, params in cases:
            ok = _trial_sweep(protocol, params, 1000)
            assert ok == 1000
            counts.append(f"{label} {ok}/1000")
        elapsed = time.perf_counter() - start
        notes.append(", ".join(counts) + f"; {elapsed:.0f} s")
        assert elapsed < 600


# 4 -------------------------------------------------------------------------

def test_c04_hand_vectors(criterion):
    with criterion(4, "hand-worked Chor, Goldberg and RAID examples"):
        d4 = hand_db([0xAA, 0xBB, 0xCC, 0xDD])
        qs = chor_build_query(3, 4, 2, FixedRandom([[0b1011_0000]]))
        answers = [chor_server_answer(s, d4, i) for i, s in enumerate(qs.shares, start=1)]
        assert [int(a.block[0]) for a in answers] == [0xBB, 0x77]
        assert chor_reconstruct(answers, 2) == bytes([0xCC])

        gq = goldberg_build_queries(1, 2, 3, 1, EvalPointSet.default(3), FixedRandom([[0x03, 0x01]]))
        assert [q.rho.tolist() for q in gq] == [[0x02, 0x01], [0x07, 0x02], [0x04, 0x03]]
        d2 = hand_db([[0x01], [0x02]])
        gans = [goldberg_server_answer(q, d2, i) for i, q in enumerate(gq, start=1)]
        assert [int(a.values[0]) for a in gans] == [0x00, 0x03, 0x02]
        assert goldberg_recover(gans, 1).record == bytes([0x01])

        d6 = hand_db([1, 2, 4, 8, 16, 32])
        expand = hand_expander({bytes([i]) * 16: p for i, p in [(1, ["11"]), (2, ["10"]), (3, ["01"])]})
        layout = ChunkLayout(3, 2, 6)
        rq = raid_build_queries(3, layout, SeedRandom(), expand)
        stores = raid_partition(d6, 3, 2)
        rans = [raid_server_answer(q, st, expand=expand) for q, st in zip(rq, stores)]
        assert [int(a.block[0]) for a in rans] == [2 ^ 4 ^ 8, 8 ^ 16, 16 ^ 2]
        assert raid_reconstruct(rans, 3) == bytes([4])


# 5 -------------------------------------------------------------------------

def test_c05_robustness_to_dropped_servers(criterion):
    with criterion(5, "GOLD survives two drops; CHOR reports one drop") as notes:
        db = generate_database(GridConfig.strip(256), 64, seed=21)
        rng = np.random.default_rng(5)
        gold_ok = chor_failed = 0
        for trial in range(100):
            dropped = sorted(int(x) for x in rng.choice(np.arange(1, 7), size=2, replace=False))
            beta = int(rng.integers(1, db.r + 1))
            servers = loopback([db] * 6, {i: FaultProfile(drop=1.0) for i in dropped})
            res = fetch_rows([beta], servers, ProtocolParams(6, t=2, k=4), "GOLD", rng=rng)
            if res.record == db.row(beta) and res.transcript.non_responders == dropped:
                gold_ok += 1
            one = int(rng.integers(1, 7))
            servers = loopback([db] * 6, {one: FaultProfile(drop=1.0)})
            try:
                fetch_rows([beta], servers, ProtocolParams(6), "CHOR", rng=rng)
            except IncompleteResponseError as exc:
                chor_failed += exc.missing == {one}
        notes.append(f"GOLD {gold_ok}/100 recovered, CHOR {chor_failed}/100 incomplete-response errors")
        assert gold_ok == 100 and chor_failed == 100


# 6 -------------------------------------------------------------------------

def test_c06_byzantine_robustness(criterion):
    with criterion(6, "GOLD l=6 t=2 k=6: one byzantine server identified, two overload") as notes:
        db = generate_database(GridConfig.strip(256), 64, seed=22)
        rng = np.random.default_rng(6)
        identified = overloaded = 0
        for trial in range(100):
            mode = ("flip", "garbage")[trial % 2]
            beta = int(rng.integers(1, db.r + 1))
            bad = int(rng.integers(1, 7))
            servers = loopback([db] * 6, {bad: FaultProfile(byzantine=mode, seed=trial)})
            rep = fetch_rows([beta], servers, ProtocolParams(6, t=2, theta=1), "GOLD", rng=rng).report
            identified += rep.record == db.row(beta) and rep.byzantine == {bad}
            pair = [int(x) for x in rng.choice(np.arange(1, 7), size=2, replace=False)]
            servers = loopback([db] * 6, {i: FaultProfile(byzantine=mode, seed=trial + i) for i in pair})
            try:
                fetch_rows([beta], servers, ProtocolParams(6, t=2, theta=2), "GOLD", rng=rng)
            except ByzantineOverloadError:
                overloaded += 1
        notes.append(f"identified {identified}/100, overload {overloaded}/100")
        assert identified == 100 and overloaded == 100


# 7 -------------------------------------------------------------------------

CHUNK = 1 << 23


def _pair_histograms(sample, total):
    """Histogram every pair of server rows of ``sample(n)`` (shape (servers, n)) over 65536 cells."""
    hists = None
    for _ in range(total // CHUNK):
        shares = sample(CHUNK).astype(np.uint16)
        pairs = list(itertools.combinations(range(shares.shape[0]), 2))
        if hists is None:
            hists = {p: np.zeros(65536, np.int64) for p in pairs}
        for a, b in pairs:
            hists[(a, b)] += np.bincount((shares[a] << 8) | shares[b], minlength=65536)
    return hists


def test_c07_privacy(criterion):
    with criterion(7, "coalitions below the privacy threshold see beta-independent views") as notes:
        total = 1 << 27
        worst = {}

        # Chor, r=8, l=3: any two of the three one-byte query shares
        rng = np.random.default_rng(71)
        probe = chor_build_query(5, 8, 3, np.random.default_rng(9))
        again = chor_shares(packed_basis(5, 8), np.random.default_rng(9).integers(0, 256, size=(2, 1), dtype=np.uint8))
        assert [s.tolist() for s in probe.shares] == again.tolist()

        def chor_sample(beta):
            e = packed_basis(beta, 8)[0]
            return lambda n: chor_shares(np.full(n, e, np.uint8), rng.integers(0, 256, size=(2, n), dtype=np.uint8))

        h1 = _pair_histograms(chor_sample(1), total)
        h8 = _pair_histograms(chor_sample(8), total)
        worst["chor"] = max((total_variation(h1[p], h8[p]), homogeneity_z(h1[p], h8[p])) for p in h1)

        # Goldberg and batch, t=2 of l=3: per coordinate, the secret is 1 at beta and 0 elsewhere
        points = EvalPointSet.default(3)

        def gold_sample(bit):
            def draw(n):
                return np.stack([sh.values for sh in share_vector(np.full(n, bit, np.uint8), 2, points, rng)])
            return draw

        g0 = _pair_histograms(gold_sample(0), total)
        g1 = _pair_histograms(gold_sample(1), total)
        worst["gold"] = max((total_variation(g0[p], g1[p]), homogeneity_z(g0[p], g1[p])) for p in g0)

        # tau-independence, tau=1 of l=3: one server's share database against two plaintexts
        n = 1 << 22

        def share_hist(value):
            plain = DatabaseMatrix(np.full((n, 1), value, np.uint8))
            shared = pu_encode_database(plain, 1, points, rng)
            return [np.bincount(d.data.ravel(), minlength=256) for d in shared.dbs]

        ta, tb = share_hist(0x00), share_hist(0xA5)
        worst["tau"] = max((total_variation(a, b), homogeneity_z(a, b)) for a, b in zip(ta, tb))

        # RAID r=6, l=3, pi=2: each single server's flip bits and the top of its seed
        layout = ChunkLayout(3, 2, 6)
        trials = 500_000

        def raid_hist(beta):
            hist = np.zeros((3, 64), np.int64)
            for _ in range(trials):
                for i, q in enumerate(raid_build_queries(beta, layout, rng)):
                    hist[i, (int(q.flip[0]) >> 6) << 4 | q.seed[0] >> 4] += 1
            return hist

        ra, rb = raid_hist(1), raid_hist(6)
        worst["raid"] = max((total_variation(ra[i], rb[i]), homogeneity_z(ra[i], rb[i])) for i in range(3))

        notes.append(", ".join(f"{k} TV={v[0]:.4f} z={v[1]:.2f}" for k, v in worst.items()))
        assert all(tv < 0.02 for tv, _ in worst.values())
        assert all(abs(z) < 5 for _, z in worst.values())


# 8 -------------------------------------------------------------------------

def test_c08_oracle_equivalences(criterion):
    with criterion(8, "Strassen, Berlekamp-Welch and batch answers match brute-force oracles") as notes:
        rng = np.random.default_rng(8)
        shapes = 0
        for _ in range(120):
            q, r, s = (int(x) for x in rng.integers(1, 40, size=3))
            a = rng.integers(0, 256, size=(q, r), dtype=np.uint8)
            b = rng.integers(0, 256, size=(r, s), dtype=np.uint8)
            for cutoff in (1, 3, 64):
                assert np.array_equal(strassen_mul(a, b, cutoff), oracle_mul(a, b)), (q, r, s, cutoff)
            shapes += 1

        decoded = 0
        for k in range(1, 9):
            for t in range(0, min(3, k - 1) + 1):
                bound = gf256.max_correctable(k, t)
                xs = [int(x) for x in rng.choice(np.arange(1, 256), size=k, replace=False)]
                for nerr in range(0, min(k, max(bound, 0) + 1) + 1):
                    for bad in itertools.combinations(range(k), nerr):
                        coeffs = [int(c) for c in rng.integers(0, 256, size=t + 1)]
                        pts = [(x, gf256.eval_poly(coeffs, x)) for x in xs]
                        for i in bad:
                            pts[i] = (pts[i][0], pts[i][1] ^ int(rng.integers(1, 256)))
                        expect = rs_oracle(pts, t)
                        if expect is None:
                            with pytest.raises(DecodeError):
                                gf256.rs_decode(pts, t)
                        else:
                            poly, found = gf256.rs_decode(pts, t)
                            assert (poly.coefficients, frozenset(found)) == expect, (k, t, bad)
                        decoded += 1

        db = generate_database(GridConfig.strip(300), 100, seed=23)
        for q, cutoff in ((3, 2), (70, 64), (16, 64)):
            betas = [int(x) for x in rng.integers(1, db.r + 1, size=q)]
            qm = batch_build_queries(betas, db.r, 3, 1, None, rng)[0]
            batched = batch_server_answer(qm, db, cutoff=cutoff).values
            singles = np.stack([goldberg_server_answer(_row_query(qm, j), db).values for j in range(q)])
            assert batched.tobytes() == singles.tobytes()
        notes.append(f"{shapes} Strassen shapes, {decoded} decoder cases")


def _row_query(qm: QueryMatrix, j):
    from crnpir.goldberg import GoldbergQuery
    return GoldbergQuery(qm.alpha, qm.rows[j], qm.t)


# 9 -------------------------------------------------------------------------

def test_c09_performance_trends(criterion):
    with criterion(9, "server and client cost trends at desk scale (medians of 30)") as notes:
        rng = np.random.default_rng(9)

        def chor_answer(db):
            rho = chor_build_query(1, db.r, 2, rng).shares[0]
            return lambda: chor_server_answer(rho, db)

        def gold_answer(db):
            q = goldberg_build_queries(1, db.r, 3, 1, None, rng)[0]
            return lambda: goldberg_server_answer(q, db)

        small = generate_database(GridConfig.strip(1 << 14), 560, seed=31)
        large = generate_database(GridConfig.strip(1 << 15), 560, seed=32)
        c_small, c_large = paired_median_times(chor_answer(small), chor_answer(large))
        g_small, g_large = paired_median_times(gold_answer(small), gold_answer(large))
        notes.append(f"doubling n: CHOR x{c_large / c_small:.2f}, GOLD x{g_large / g_small:.2f}")
        assert 1.5 <= c_large / c_small <= 2.5 and 1.5 <= g_large / g_small <= 2.5

        t_chor, t_gold = paired_median_times(chor_answer(small), gold_answer(small))
        notes.append(f"CHOR {t_chor * 1e3:.2f} ms < GOLD {t_gold * 1e3:.2f} ms")
        assert t_chor < t_gold

        # RAID pi=2 against CHOR at l=6 over the same database
        db = generate_database(GridConfig.strip(49152), 560, seed=33, align=48)
        layout = ChunkLayout(6, 2, db.r)
        store = raid_partition(db, 6, 2)[0]
        rq = raid_build_queries(1, layout, rng)[0]
        t_raid, t_chor6 = paired_median_times(lambda: raid_server_answer(rq, store), chor_answer(db))
        notes.append(f"RAID pi=2 {t_raid * 1e3:.2f} ms < CHOR {t_chor6 * 1e3:.2f} ms")
        assert t_raid < t_chor6

        # GOLD at l=k=6: server work fixed in t, client recovery grows with t
        gdb = generate_database(GridConfig.strip(2048), 560, seed=34)
        server_ops, client_ops, recover_t = [], [], []
        for t in range(1, 6):
            qs = goldberg_build_queries(7, gdb.r, 6, t, None, rng)
            before = counters.snapshot()["gf_mul_adds"]
            answers = [goldberg_server_answer(q, gdb, i) for i, q in enumerate(qs, start=1)]
            server_ops.append((counters.snapshot()["gf_mul_adds"] - before) // 6)
            before = counters.snapshot()["client_gf_muls"]
            assert goldberg_recover(answers, t).record == gdb.row(7)
            client_ops.append(counters.snapshot()["client_gf_muls"] - before)
            recover_t.append(median_time(lambda: goldberg_recover(answers, t)))
        notes.append(f"client muls by t {client_ops}")
        assert len(set(server_ops)) == 1
        assert client_ops == sorted(client_ops) and len(set(client_ops)) == len(client_ops)
        assert recover_t[0] < recover_t[-1]

        # tau-mode: client cost depends on t + tau only
        plain = generate_database(GridConfig.strip(512), 560, seed=35)
        shared = pu_encode_database(plain, 2, EvalPointSet.default(6), rng)
        costs_by_split = {}
        for t, tau in ((1, 2), (2, 1), (3, 0)):
            stores = shared.dbs if tau == 2 else pu_encode_database(plain, tau, EvalPointSet.default(6), rng).dbs
            before = counters.snapshot()
            res = fetch_rows([9], loopback(stores), ProtocolParams(6, t=t, tau=tau), "GOLD", rng=rng)
            after = counters.snapshot()
            assert res.record == plain.row(9)
            costs_by_split[(t, tau)] = (after["client_gf_muls"] - before["client_gf_muls"],
                                        after["gf_mul_adds"] - before["gf_mul_adds"])
        notes.append(f"t+tau=3 client muls {sorted({c for c, _ in costs_by_split.values()})}")
        assert len(set(costs_by_split.values())) == 1


# 10 ------------------------------------------------------------------------

def _parity_stores(protocol, params):
    db = generate_database(GridConfig.strip(500), 64, seed=41, align=8 * params.ell)
    if protocol is Protocol.RAID:
        return db, raid_partition(db, params.ell, params.pi)
    if params.tau:
        return db, pu_encode_database(db, params.tau, EvalPointSet.default(params.ell),
                                      np.random.default_rng(1)).dbs
    return db, [db] * params.ell


def test_c10_loopback_tcp_parity(criterion):
    with criterion(10, "loopback and TCP runs exchange identical payloads") as notes:
        cases = [
            ("CHOR", Protocol.CHOR, ProtocolParams(4), [17]),
            ("GOLD", Protocol.GOLD, ProtocolParams(4, t=2), [17]),
            ("BATCH", Protocol.BATCH, ProtocolParams(4, t=1, q=3), [3, 17, 400]),
            ("tau", Protocol.GOLD, ProtocolParams(4, t=1, tau=1), [17]),
            ("RAID", Protocol.RAID, ProtocolParams(4, pi=3), [17]),
        ]
        checked = []
        for label, protocol, params, betas in cases:
            db, stores = _parity_stores(protocol, params)
            handlers = [ServerHandler(st, i) for i, st in enumerate(stores, start=1)]
            threads = [ServerThread(h).start() for h in handlers]
            try:
                tcp = [ServerDescriptor(th.address, h.server_id) for th, h in zip(threads, handlers)]
                local = [ServerDescriptor(h, h.server_id) for h in handlers]
                for seed in range(5):
                    a = fetch_rows(betas, local, params, protocol, rng=np.random.default_rng(seed))
                    b = fetch_rows(betas, tcp, params, protocol, rng=np.random.default_rng(seed))
                    assert a.transcript.payloads_up == b.transcript.payloads_up
                    assert a.transcript.payloads_down == b.transcript.payloads_down
                    assert [r.record for r in a.reports] == [r.record for r in b.reports]
                    assert [r.record for r in a.reports] == [db.row(x) for x in betas]
            finally:
                for th in threads:
                    th.stop()
            checked.append(label)
        notes.append(", ".join(checked))
