import numpy as np
import pytest

from conftest import hand_db
from oracles import SeedRandom, hand_expander
from crnpir.chor import ChorResponse, bits_str, packed_len, unpack_bits
from crnpir.errors import IncompleteResponseError, ParameterError, ProtocolError
from crnpir.kernels import counters
from crnpir.raid import (
    ChunkLayout,
    RaidQuery,
    prg_expand,
    raid_build_queries,
    raid_partition,
    raid_reconstruct,
    raid_selection,
    raid_server_answer,
)
from crnpir.spectrumdb import verify_record

D6 = hand_db([1, 2, 4, 8, 16, 32])


def test_layout_examples():
    stores = raid_partition(D6, 3, 2)
    assert [s.data[:, 0].tolist() for s in stores] == [[1, 2, 4, 8], [4, 8, 16, 32], [16, 32, 1, 2]]
    full = raid_partition(D6, 3, 3)
    assert all(sorted(s.data[:, 0].tolist()) == [1, 2, 4, 8, 16, 32] for s in full)
    with pytest.raises(ParameterError):
        raid_partition(D6, 3, 1)
    with pytest.raises(ParameterError):
        raid_partition(D6, 4, 2)


def test_every_chunk_held_pi_times():
    for ell in range(2, 7):
        for pi in range(2, ell + 1):
            lay = ChunkLayout(ell, pi, ell * 8)
            held = [c for i in range(1, ell + 1) for c in lay.stored_chunks(i)]
            assert sorted(held) == sorted(list(range(1, ell + 1)) * pi)
            for c in range(1, ell + 1):
                assert all(c in lay.stored_chunks(h) for h in lay.holders(c))


def test_hand_example():
    seeds = {bytes([i]) * 16: p for i, p in [(1, ["11"]), (2, ["10"]), (3, ["01"])]}
    expand = hand_expander(seeds)
    lay = ChunkLayout(3, 2, 6)
    qs = raid_build_queries(3, lay, SeedRandom(), expand)
    payloads = [[bits_str(sel, 2) for sel in raid_selection(q, lay, expand)] for q in qs]
    assert payloads == [["01", "11"], ["01", "10"], ["10", "01"]]
    stores = raid_partition(D6, 3, 2)
    answers = [raid_server_answer(q, st, expand=expand) for q, st in zip(qs, stores)]
    assert [int(a.block[0]) for a in answers] == [2 ^ 4 ^ 8, 8 ^ 16, 16 ^ 2]
    assert raid_reconstruct(answers, 3) == bytes([4])


def test_chunk_parts_xor_to_basis():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        ell = int(rng.integers(2, 7))
        pi = int(rng.integers(2, ell + 1))
        lay = ChunkLayout(ell, pi, ell * 8 * int(rng.integers(1, 4)))
        beta = int(rng.integers(1, lay.r + 1))
        qs = raid_build_queries(beta, lay, rng)
        parts = {c: np.zeros(packed_len(lay.chunk_rows), np.uint8) for c in range(1, ell + 1)}
        for q in qs:
            for c, sel in zip(lay.stored_chunks(q.server_id), raid_selection(q, lay)):
                parts[c] ^= sel
        e = np.concatenate([unpack_bits(parts[c], lay.chunk_rows) for c in range(1, ell + 1)])
        assert e.tolist() == np.eye(lay.r, dtype=np.uint8)[beta - 1].tolist()


def test_end_to_end(raid_db):
    rng = np.random.default_rng(1)
    for ell in (2, 3, 4, 6):
        for pi in range(2, ell + 1):
            stores = raid_partition(raid_db, ell, pi)
            for beta in rng.integers(1, raid_db.r + 1, size=5):
                qs = raid_build_queries(int(beta), ChunkLayout(ell, pi, raid_db.r), rng)
                rec = raid_reconstruct([raid_server_answer(q, s) for q, s in zip(qs, stores)], ell)
                assert rec == raid_db.row(int(beta))
                if beta <= raid_db.grid.rows:
                    assert verify_record(rec)


def test_upload_size(raid_db):
    lay = ChunkLayout(6, 2, raid_db.r)
    qs = raid_build_queries(1, lay, np.random.default_rng(2))
    assert sum(q.payload_nbytes for q in qs) * 8 == raid_db.r + 6 * 128


def test_server_work_proportional_to_pi(raid_db):
    for pi in (2, 3, 6):
        stores = raid_partition(raid_db, 6, pi)
        assert stores[0].r == pi * raid_db.r // 6
        q = raid_build_queries(5, ChunkLayout(6, pi, raid_db.r), np.random.default_rng(3))[0]
        counters.reset()
        raid_server_answer(q, stores[0])
        assert counters.snapshot()["xor_rows_scanned"] == pi * raid_db.r // 6


def test_prg_is_deterministic():
    a = prg_expand(b"k" * 16, 3, 20)
    assert all(np.array_equal(x, y) for x, y in zip(a, prg_expand(b"k" * 16, 3, 20)))
    assert all(int(x[-1]) & 0x0F == 0 for x in a)
    with pytest.raises(ProtocolError):
        prg_expand(b"short", 1, 8)


def test_errors(raid_db):
    stores = raid_partition(raid_db, 3, 2)
    bad = RaidQuery(1, np.zeros(3, np.uint8), b"\0" * 16)
    with pytest.raises(ProtocolError):
        raid_server_answer(bad, stores[0])
    with pytest.raises(IncompleteResponseError):
        raid_reconstruct([ChorResponse(1, np.zeros(4, np.uint8))], 3)
