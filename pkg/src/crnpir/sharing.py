"""(t, l)-Shamir secret sharing of byte vectors over GF(2^8).

Every coordinate of a secret vector gets its own random degree-t polynomial,
so sharing a vector of m bytes is m independent sharings done in one pass.
Callers supply the random generator (``numpy.random.Generator`` or anything
with a compatible ``integers`` method). Production callers should seed it from
``secrets``/``os.urandom``; tests seed it for reproducible transcripts.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import gf256
from .errors import (
    ByzantineOverloadError,
    DecodeError,
    FieldDomainError,
    InsufficientSharesError,
    ParameterError,
)
from .gf256 import MUL


@dataclass(frozen=True)
class EvalPointSet:
    alphas: tuple[int, ...]

    def __post_init__(self):
        alphas = tuple(int(a) for a in self.alphas)
        object.__setattr__(self, "alphas", alphas)
        if len(alphas) > 255:
            raise ParameterError("at most 255 distinct nonzero evaluation points exist")
        if any(not 0 < a < 256 for a in alphas):
            raise ParameterError("evaluation points must be nonzero field elements")
        if len(set(alphas)) != len(alphas):
            raise ParameterError("evaluation points must be distinct")

    @classmethod
    def default(cls, ell: int) -> "EvalPointSet":
        """alpha_i = i for servers 1..ell."""
        return cls(tuple(range(1, ell + 1)))

    def __len__(self):
        return len(self.alphas)

    def __iter__(self):
        return iter(self.alphas)


@dataclass
class ShareVector:
    alpha: int
    values: np.ndarray

    def __post_init__(self):
        if self.alpha == 0:
            raise FieldDomainError("share evaluation point must be nonzero")
        self.values = np.asarray(self.values, dtype=np.uint8)


def random_coefficients(rng, t: int, m: int) -> np.ndarray:
    """Draw the t x m non-constant coefficients; row d multiplies x^(d+1)."""
    coeffs = rng.integers(0, 256, size=(t, m), dtype=np.uint8)
    return np.asarray(coeffs, dtype=np.uint8).reshape(t, m)


def evaluate_shares(secret: np.ndarray, coeffs: np.ndarray, alpha: int) -> np.ndarray:
    """Horner evaluation of all coordinate polynomials at one point."""
    col = MUL[:, alpha]
    if coeffs.shape[0] == 0:
        return secret.copy()
    acc = coeffs[-1].copy()
    for d in range(coeffs.shape[0] - 2, -1, -1):
        acc = col[acc] ^ coeffs[d]
    return col[acc] ^ secret


def share_vector(secret, t: int, points: EvalPointSet, rng) -> list[ShareVector]:
    """Split ``secret`` into len(points) shares; any t of them reveal nothing."""
    secret = np.asarray(secret, dtype=np.uint8).ravel()
    if not 0 <= t < len(points):
        raise ParameterError(f"threshold t={t} must satisfy 0 <= t < {len(points)}")
    coeffs = random_coefficients(rng, t, secret.size)
    return [ShareVector(a, evaluate_shares(secret, coeffs, a)) for a in points]


def _interpolate_at_zero(shares: Sequence[ShareVector]) -> np.ndarray:
    weights = gf256.lagrange_weights([s.alpha for s in shares])
    out = np.zeros_like(shares[0].values)
    for w, s in zip(weights, shares):
        out ^= MUL[w][s.values]
    return out


def reconstruct(shares: Sequence[ShareVector], t: int) -> np.ndarray:
    """Coordinate-wise Lagrange interpolation at zero from the first t+1 shares."""
    if len(shares) < t + 1:
        raise InsufficientSharesError(f"need {t + 1} shares, got {len(shares)}")
    return _interpolate_at_zero(list(shares)[: t + 1])


def reconstruct_with_errors(shares: Sequence[ShareVector], t: int) -> tuple[np.ndarray, set[int]]:
    """Error-correcting reconstruction; returns (secret, alphas of corrupted shares)."""
    shares = list(shares)
    k = len(shares)
    if k <= t:
        raise InsufficientSharesError(f"need more than {t} shares, got {k}")
    alphas = [s.alpha for s in shares]
    values = np.stack([s.values for s in shares])
    secret = np.zeros(values.shape[1], dtype=np.uint8)
    bad: set[int] = set()
    for c in range(values.shape[1]):
        column = values[:, c].tolist()
        try:
            poly, idx = gf256.rs_decode(list(zip(alphas, column)), t)
        except DecodeError as exc:
            raise ByzantineOverloadError(f"coordinate {c}: {exc}") from exc
        secret[c] = poly.coefficients[0]
        bad.update(alphas[i] for i in idx)
    if len(bad) > gf256.max_correctable(k, t):
        raise ByzantineOverloadError(f"{len(bad)} corrupted shares exceed the decoding bound")
    return secret, bad
