"""Arithmetic in GF(2^8) with the AES modulus x^8 + x^4 + x^3 + x + 1.

Multiplication goes through a full 256x256 product table (64 KB), built from
exp/log tables and cross-checked against schoolbook multiplication at import.
Addition is XOR. Polynomials are plain sequences of ints, lowest degree first.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DecodeError, FieldDomainError

MODULUS = 0x11B
GENERATOR = 0x03
WORD_BITS = 8


def schoolbook_mul(a: int, b: int) -> int:
    """Shift-and-add product, reduced by MODULUS. Slow; used as the reference."""
    result = 0
    while b:
        if b & 1:
            result ^= a
        b >>= 1
        a <<= 1
        if a & 0x100:
            a ^= MODULUS
    return result


def _build_tables():
    exp = np.zeros(512, dtype=np.int32)
    log = np.zeros(256, dtype=np.int32)
    x = 1
    for i in range(255):
        exp[i] = x
        log[x] = i
        x = schoolbook_mul(x, GENERATOR)
    exp[255:510] = exp[:255]

    a = np.arange(256)
    la = log[a][:, None]
    lb = log[a][None, :]
    mul = exp[la + lb].astype(np.uint8)
    mul[0, :] = 0
    mul[:, 0] = 0

    # vectorised schoolbook reference over all 65536 pairs
    ref = np.zeros((256, 256), dtype=np.int32)
    aa = np.broadcast_to(a[:, None], (256, 256)).astype(np.int32).copy()
    bb = np.broadcast_to(a[None, :], (256, 256)).astype(np.int32).copy()
    for _ in range(8):
        ref ^= np.where(bb & 1, aa, 0)
        bb >>= 1
        aa <<= 1
        aa = np.where(aa & 0x100, aa ^ MODULUS, aa)
    if not np.array_equal(mul, ref.astype(np.uint8)):
        raise RuntimeError("GF(2^8) product table failed schoolbook verification")

    inv = np.zeros(256, dtype=np.uint8)
    inv[1:] = exp[(255 - log[1:]) % 255]
    return mul, inv, exp[:510].astype(np.uint8), log


MUL, INV, EXP, LOG = _build_tables()
MUL.flags.writeable = False
INV.flags.writeable = False

# bytes rows index faster than numpy scalars in the pure-Python decoders
_ROWS = [bytes(row) for row in MUL]
_INV = bytes(INV)


def add(a: int, b: int) -> int:
    return a ^ b


def mul(a: int, b: int) -> int:
    return _ROWS[a][b]


def inv(a: int) -> int:
    if a == 0:
        raise FieldDomainError("zero has no multiplicative inverse")
    return _INV[a]


def div(a: int, b: int) -> int:
    return _ROWS[a][inv(b)]


def power(a: int, e: int) -> int:
    out = 1
    for _ in range(e):
        out = _ROWS[out][a]
    return out


@dataclass(frozen=True)
class FieldPolynomial:
    """Polynomial over GF(2^8); coefficients lowest degree first, trimmed."""

    coefficients: tuple[int, ...]

    def __init__(self, coefficients: Iterable[int]):
        coeffs = list(coefficients)
        while len(coeffs) > 1 and coeffs[-1] == 0:
            coeffs.pop()
        if not coeffs:
            coeffs = [0]
        object.__setattr__(self, "coefficients", tuple(int(c) for c in coeffs))

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, x: int) -> int:
        return eval_poly(self.coefficients, x)


def eval_poly(p: Sequence[int] | FieldPolynomial, x: int) -> int:
    """Horner evaluation."""
    coeffs = p.coefficients if isinstance(p, FieldPolynomial) else p
    row = _ROWS[x]
    acc = 0
    for c in reversed(coeffs):
        acc = row[acc] ^ c
    return acc


def poly_mul(p: Sequence[int], q: Sequence[int]) -> list[int]:
    out = [0] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        if a == 0:
            continue
        row = _ROWS[a]
        for j, b in enumerate(q):
            out[i + j] ^= row[b]
    return out


def poly_divmod(num: Sequence[int], den: Sequence[int]) -> tuple[list[int], list[int]]:
    den = list(den)
    while len(den) > 1 and den[-1] == 0:
        den.pop()
    if den == [0]:
        raise FieldDomainError("polynomial division by zero")
    rem = list(num)
    lead_inv = inv(den[-1])
    dd = len(den) - 1
    if len(rem) - 1 < dd:
        return [0], rem
    quot = [0] * (len(rem) - dd)
    for i in range(len(rem) - 1, dd - 1, -1):
        c = rem[i]
        if c == 0:
            continue
        f = _ROWS[c][lead_inv]
        quot[i - dd] = f
        frow = _ROWS[f]
        for j, d in enumerate(den):
            rem[i - dd + j] ^= frow[d]
    return quot, rem[:dd] if dd else [0]


def _check_xs(xs: Sequence[int]) -> None:
    if len(set(xs)) != len(xs):
        raise FieldDomainError("duplicate x-coordinates")
    if any(x == 0 for x in xs):
        raise FieldDomainError("x-coordinate of zero")


def lagrange_weights(xs: Sequence[int], at: int = 0) -> list[int]:
    """Weights L_i(at) so that f(at) = XOR_i mul(L_i(at), y_i)."""
    _check_xs(xs)
    weights = []
    for i, xi in enumerate(xs):
        num = 1
        den = 1
        for j, xj in enumerate(xs):
            if i != j:
                num = _ROWS[num][at ^ xj]
                den = _ROWS[den][xi ^ xj]
        weights.append(_ROWS[num][_INV[den]])
    return weights


def lagrange_at_zero(points: Sequence[tuple[int, int]], count: int | None = None) -> int:
    """f(0) of the degree < count polynomial through the first ``count`` points."""
    if count is None:
        count = len(points)
    if count < 1 or count > len(points):
        raise FieldDomainError("count must be between 1 and the number of points")
    pts = points[:count]
    xs = [x for x, _ in pts]
    acc = 0
    for wgt, (_, y) in zip(lagrange_weights(xs), pts):
        acc ^= _ROWS[wgt][y]
    return acc


def lagrange_basis(xs: Sequence[int]) -> np.ndarray:
    """Coefficient matrix B with B[i] the coefficients of the i-th basis polynomial.

    For values y at xs, the interpolating polynomial is XOR_i y_i * B[i].
    """
    _check_xs(xs)
    m = len(xs)
    basis = np.zeros((m, m), dtype=np.uint8)
    for i, xi in enumerate(xs):
        poly = [1]
        den = 1
        for j, xj in enumerate(xs):
            if i != j:
                poly = poly_mul(poly, [xj, 1])
                den = _ROWS[den][xi ^ xj]
        scale = _INV[den]
        basis[i, :] = [_ROWS[c][scale] for c in poly]
    return basis


def interpolate(points: Sequence[tuple[int, int]]) -> FieldPolynomial:
    xs = [x for x, _ in points]
    basis = lagrange_basis(xs)
    coeffs = np.zeros(len(points), dtype=np.uint8)
    for (_, y), row in zip(points, basis):
        coeffs ^= MUL[y][row]
    return FieldPolynomial(coeffs.tolist())


def solve_linear(matrix: list[list[int]], rhs: list[int]) -> list[int] | None:
    """Gaussian elimination over GF(2^8). Free variables are set to zero.

    Returns None when the system is inconsistent.
    """
    rows = len(matrix)
    cols = len(matrix[0]) if rows else 0
    aug = [list(r) + [b] for r, b in zip(matrix, rhs)]
    pivots = []
    row = 0
    for col in range(cols):
        pivot = next((i for i in range(row, rows) if aug[i][col]), None)
        if pivot is None:
            continue
        aug[row], aug[pivot] = aug[pivot], aug[row]
        scale = _ROWS[_INV[aug[row][col]]]
        aug[row] = [scale[v] for v in aug[row]]
        prow = aug[row]
        for i in range(rows):
            f = aug[i][col]
            if i != row and f:
                frow = _ROWS[f]
                aug[i] = [a ^ frow[b] for a, b in zip(aug[i], prow)]
        pivots.append(col)
        row += 1
        if row == rows:
            break
    for i in range(row, rows):
        if aug[i][cols]:
            return None
    solution = [0] * cols
    for i, col in enumerate(pivots):
        solution[col] = aug[i][cols]
    return solution


def max_correctable(k: int, degree_bound: int) -> int:
    """Unique-decoding radius floor((k - t - 1) / 2), or -1 when k <= t."""
    if k <= degree_bound:
        return -1
    return (k - degree_bound - 1) // 2


def rs_decode(points: Sequence[tuple[int, int]], degree_bound: int) -> tuple[FieldPolynomial, set[int]]:
    """Berlekamp-Welch decoding.

    Returns the unique polynomial of degree <= degree_bound that disagrees with
    at most floor((k - t - 1)/2) of the points, plus the indices (into
    ``points``) where it disagrees.
    """
    k = len(points)
    t = degree_bound
    xs = [x for x, _ in points]
    _check_xs(xs)
    e = max_correctable(k, t)
    if e < 0:
        raise DecodeError(f"{k} points cannot determine a degree-{t} polynomial")

    # unknowns: E_0..E_{e-1} (E monic of degree e), then Q_0..Q_{e+t}
    n_q = e + t + 1
    matrix = []
    rhs = []
    for x, y in points:
        xrow = _ROWS[x]
        powers = [1]
        for _ in range(e + t):
            powers.append(xrow[powers[-1]])
        yrow = _ROWS[y]
        matrix.append([yrow[powers[j]] for j in range(e)] + powers[:n_q])
        rhs.append(yrow[powers[e]])
    sol = solve_linear(matrix, rhs)
    if sol is None:
        raise DecodeError("no error-locator solution; too many corrupted points")
    locator = sol[:e] + [1]
    quot, rem = poly_divmod(sol[e:], locator)
    if any(rem):
        raise DecodeError("error locator does not divide; too many corrupted points")
    poly = FieldPolynomial(quot)
    if poly.degree > t:
        raise DecodeError("decoded polynomial exceeds the degree bound")
    bad = {i for i, (x, y) in enumerate(points) if eval_poly(poly.coefficients, x) != y}
    if len(bad) > e:
        raise DecodeError(f"{len(bad)} disagreements exceed the correctable {e}")
    return poly, bad
