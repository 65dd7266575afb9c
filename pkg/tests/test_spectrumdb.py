import itertools
import math

import numpy as np
import pytest

from crnpir.errors import CoverageError, DigestError, IndexRangeError, ParameterError, TruncatedError, VersionError
from crnpir.spectrumdb import (
    HEADER,
    METERS_PER_DEGREE,
    GridConfig,
    SpectrumKey,
    SpectrumRecord,
    basis_vector,
    expected_record,
    generate_database,
    inv_index,
    key_for_index,
    load_database,
    store_database,
    verify_record,
)

GRID = GridConfig(width=5, height=4, channels=3, timeslots=2, first_channel=21)


def test_origin_and_last_keys():
    assert inv_index(SpectrumKey(40.0001, -104.9999, 21, 0), GRID) == 1
    last = key_for_index(GRID.rows, GRID)
    assert inv_index(last, GRID) == GRID.rows == 120


def test_inv_index_bijective_and_row_major():
    seen = []
    for row, col, ch, slot in itertools.product(range(4), range(5), range(3), range(2)):
        lat = 40.0 + (row + 0.5) * 100 / METERS_PER_DEGREE
        lon = -105.0 + (col + 0.5) * 100 / (METERS_PER_DEGREE * math.cos(math.radians(40.0)))
        beta = inv_index(SpectrumKey(lat, lon, 21 + ch, slot), GRID)
        assert beta == ((row * 5 + col) * 3 + ch) * 2 + slot + 1
        assert key_for_index(beta, GRID) == SpectrumKey(lat, lon, 21 + ch, slot)
        seen.append(beta)
    assert sorted(seen) == list(range(1, GRID.rows + 1))


@pytest.mark.parametrize("key", [
    SpectrumKey(39.99, -104.999, 21, 0),
    SpectrumKey(40.0001, -104.9999, 20, 0),
    SpectrumKey(40.0001, -104.9999, 21, 2),
])
def test_out_of_coverage(key):
    with pytest.raises(CoverageError):
        inv_index(key, GRID)


def test_invalid_coordinates():
    with pytest.raises(CoverageError):
        SpectrumKey(91.0, 0.0, 1, 0)


def test_nearby_points_share_or_neighbour_a_cell():
    # points closer than one cell size never land more than one cell apart
    rng = np.random.default_rng(0)
    grid = GridConfig(width=50, height=50)
    for _ in range(500):
        lat = 40.0 + rng.uniform(0.0002, 0.04)
        lon = -105.0 + rng.uniform(0.0002, 0.05)
        d = rng.uniform(0, 99.0)
        ang = rng.uniform(0, 2 * math.pi)
        lat2 = lat + d * math.sin(ang) / METERS_PER_DEGREE
        lon2 = lon + d * math.cos(ang) / grid.lon_scale
        try:
            b1 = inv_index(SpectrumKey(lat, lon, 1, 0), grid) - 1
            b2 = inv_index(SpectrumKey(lat2, lon2, 1, 0), grid) - 1
        except CoverageError:
            continue
        (r1, c1), (r2, c2) = divmod(b1, 50), divmod(b2, 50)
        assert abs(r1 - r2) <= 1 and abs(c1 - c2) <= 1


def test_basis_vector():
    assert basis_vector(3, 4).tolist() == [0, 0, 1, 0]
    assert basis_vector(1, 1).tolist() == [1]
    with pytest.raises(IndexRangeError):
        basis_vector(5, 4)


def test_record_pack_unpack():
    rec = SpectrumRecord(True, -35, 100, 200, b"xyz")
    raw = rec.pack(32)
    assert len(raw) == 32 and verify_record(raw)
    back = SpectrumRecord.unpack(raw)
    assert (back.available, back.max_power_ddbm, back.valid_from, back.valid_until) == (True, -35, 100, 200)
    with pytest.raises(ParameterError):
        rec.pack(8)


def test_generate_is_deterministic_and_checksummed():
    grid = GridConfig.strip(1000)
    a = generate_database(grid, 560, seed=4)
    b = generate_database(grid, 560, seed=4)
    assert a == b
    assert a != generate_database(grid, 560, seed=5)
    for beta in np.random.default_rng(0).integers(1, 1001, size=1000):
        row = a.row(int(beta))
        assert verify_record(row) and row == expected_record(4, int(beta), 560)


def test_desk_scale_size():
    db = generate_database(GridConfig.strip(10_000), 560, seed=0)
    assert db.n_bits == 10_000 * 4480 == 44_800_000
    assert db.n_bits / 8 == 5.6e6


def test_padding_rows_are_zero():
    db = generate_database(GridConfig.strip(10), 16, seed=1, align=8)
    assert db.r == 16 and db.padding_rows == 6
    assert not db.data[10:].any()


def test_trivial_retrieval_identity(small_db):
    for beta in (1, 17, 64):
        e = basis_vector(beta, small_db.r)
        assert np.bitwise_xor.reduce(small_db.data[e.astype(bool)], axis=0).tobytes() == small_db.row(beta)


def test_store_load_round_trip(tmp_path, small_db):
    path = tmp_path / "db.spdb"
    store_database(small_db, path)
    assert load_database(path) == small_db


def test_load_errors(tmp_path, small_db):
    path = tmp_path / "db.spdb"
    store_database(small_db, path)
    raw = bytearray(path.read_bytes())

    flipped = bytearray(raw)
    flipped[-1] ^= 1
    path.write_bytes(flipped)
    with pytest.raises(DigestError):
        load_database(path)

    path.write_bytes(raw[:-5])
    with pytest.raises(TruncatedError):
        load_database(path)

    versioned = bytearray(raw)
    versioned[4:6] = (2).to_bytes(2, "little")
    path.write_bytes(versioned)
    with pytest.raises(VersionError):
        load_database(path)

    assert HEADER.size == 64
