"""Hot-loop kernels with a compiled backend and a numpy fallback.

The Cython extension ``_ckernels`` is used when it was built; otherwise (or
when ``CRNPIR_PURE=1``) the numpy implementation in ``_pykernels`` is used.
Both produce identical bytes. ``counters`` records how much work the kernels
did, independent of which backend ran.
"""

from __future__ import annotations

import os
import threading
from dataclasses import dataclass, fields

import numpy as np

from . import _pykernels

try:
    if os.environ.get("CRNPIR_PURE"):
        raise ImportError("pure backend requested")
    from . import _ckernels as _impl

    BACKEND = "cython"
except ImportError:
    _impl = _pykernels
    BACKEND = "numpy"


@dataclass
class OpCounters:
    xor_rows_scanned: int = 0
    xor_bytes_scanned: int = 0
    gf_mul_adds: int = 0
    client_gf_muls: int = 0
    leaf_matmuls: int = 0

    def __post_init__(self):
        self._lock = threading.Lock()

    def add(self, **deltas):
        with self._lock:
            for name, value in deltas.items():
                setattr(self, name, getattr(self, name) + value)

    def reset(self):
        with self._lock:
            for f in fields(self):
                setattr(self, f.name, 0)

    def snapshot(self) -> dict:
        with self._lock:
            return {f.name: getattr(self, f.name) for f in fields(self)}


counters = OpCounters()


def backend_module(name: str | None = None):
    """Return the kernel module for ``name`` ("cython" or "numpy"), or the active one."""
    if name is None:
        return _impl
    if name == "numpy":
        return _pykernels
    if name == "cython":
        from . import _ckernels

        return _ckernels
    raise ValueError(f"unknown backend {name!r}")


def _u8(a, ndim):
    a = np.ascontiguousarray(a, dtype=np.uint8)
    if a.ndim != ndim:
        raise ValueError(f"expected a {ndim}-d array")
    return a


def xor_rows(mask, data) -> np.ndarray:
    data = _u8(data, 2)
    out = _impl.xor_rows(_u8(mask, 1), data)
    counters.add(xor_rows_scanned=data.shape[0], xor_bytes_scanned=data.size)
    return out


def gf_vecmat(rho, data) -> np.ndarray:
    data = _u8(data, 2)
    out = _impl.gf_vecmat(_u8(rho, 1), data)
    counters.add(gf_mul_adds=data.size)
    return out


def gf_matmul(a, b) -> np.ndarray:
    a = _u8(a, 2)
    b = _u8(b, 2)
    out = _impl.gf_matmul(a, b)
    counters.add(gf_mul_adds=a.shape[0] * b.size, leaf_matmuls=1)
    return out
