"""Brute-force reference implementations shared by the unit and acceptance tests."""

import itertools

import numpy as np

from crnpir import gf256
from crnpir.gf256 import MUL


def rs_oracle(points, t):
    """Exhaustive error-position search: the unique lowest-error polynomial, or None."""
    k = len(points)
    bound = (k - t - 1) // 2
    for e in range(bound + 1):
        found = set()
        for bad in itertools.combinations(range(k), e):
            good = [p for i, p in enumerate(points) if i not in bad]
            poly = gf256.interpolate(good[: t + 1])
            if all(gf256.eval_poly(poly, x) == y for x, y in good):
                errs = frozenset(i for i, (x, y) in enumerate(points) if gf256.eval_poly(poly, x) != y)
                if len(errs) <= bound:
                    found.add((poly.coefficients, errs))
        if found:
            return found.pop() if len(found) == 1 else None
    return None


def oracle_mul(a, b):
    """Triple loop through the product table; no shared kernel code."""
    out = np.zeros((a.shape[0], b.shape[1]), dtype=np.uint8)
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            out[i] ^= MUL[a[i, j]][b[j]]
    return out


def hand_expander(parts_by_seed):
    def expand(seed, parts, chunk_rows):
        return [np.array([int(p, 2) << (8 - chunk_rows)], np.uint8) for p in parts_by_seed[seed]]
    return expand


class SeedRandom:
    def __init__(self):
        self.n = 0

    def integers(self, low, high, size=None, dtype=np.uint8):
        self.n += 1
        return np.full(size, self.n, dtype=np.uint8)
