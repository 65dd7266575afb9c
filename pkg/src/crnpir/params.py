"""Protocol identifiers and the global parameter tuple with its constraints."""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

from .errors import ParameterError

KAPPA_BITS = 128


class Protocol(IntEnum):
    CHOR = 1
    GOLD = 2
    BATCH = 3
    RAID = 4

    @classmethod
    def parse(cls, name) -> "Protocol":
        if isinstance(name, Protocol):
            return name
        try:
            return cls[str(name).upper()]
        except KeyError:
            raise ParameterError(f"unknown protocol {name!r}") from None


PRIVACY_LABELS = {
    Protocol.CHOR: "(ℓ − 1) -private",
    Protocol.GOLD: "t -private",
    Protocol.BATCH: "t -private",
    Protocol.RAID: "(π − 1) -private",
}


@dataclass
class ProtocolParams:
    """(l, t, k, theta, tau, pi, w, q) for one retrieval.

    ``k`` is the number of responses the client waits for; it defaults to l.
    ``theta`` is the number of byzantine servers the caller expects; it is only
    used for validation and reporting.
    """

    ell: int
    t: int = 1
    k: int | None = None
    theta: int = 0
    tau: int = 0
    pi: int = 2
    w: int = 8
    q: int = 1

    def __post_init__(self):
        if self.k is None:
            self.k = self.ell

    @property
    def degree(self) -> int:
        """Degree of the response polynomials for the Goldberg family."""
        return self.t + self.tau

    def validate(self, protocol) -> "ProtocolParams":
        protocol = Protocol.parse(protocol)
        if self.ell < 2:
            raise ParameterError("at least two servers are required")
        if self.w != 8:
            raise ParameterError("only w = 8 is supported")
        if protocol in (Protocol.GOLD, Protocol.BATCH):
            if not 0 < self.t < self.ell:
                raise ParameterError(f"need 0 < t < l, got t={self.t}, l={self.ell}")
            if self.tau < 0:
                raise ParameterError("tau must be non-negative")
            if not self.t + self.tau < self.k <= self.ell:
                raise ParameterError(
                    f"need 0 < t <= t + tau < k <= l, got t={self.t}, tau={self.tau}, "
                    f"k={self.k}, l={self.ell}")
            if protocol is Protocol.BATCH and self.q < 1:
                raise ParameterError("batch size q must be at least 1")
        elif protocol is Protocol.RAID:
            if not 2 <= self.pi <= self.ell:
                raise ParameterError(f"need 2 <= pi <= l, got pi={self.pi}")
        return self


def validate_tau(t: int, tau: int, k: int, ell: int) -> None:
    """Check 0 < t <= t + tau < k <= l."""
    ProtocolParams(ell=ell, t=t, k=k, tau=tau).validate(Protocol.GOLD)
