"""Compare the compiled and numpy kernel backends on the server hot loops.

    python3 benchmarks/bench_kernels.py [--rows 16384] [--block 560] [--repeat 7]
"""

import argparse
import timeit

import numpy as np

from crnpir import _pykernels

try:
    from crnpir import _ckernels
except ImportError:
    _ckernels = None


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--rows", type=int, default=16384)
    ap.add_argument("--block", type=int, default=560)
    ap.add_argument("--repeat", type=int, default=7)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    data = rng.integers(0, 256, size=(args.rows, args.block), dtype=np.uint8)
    mask = rng.integers(0, 256, size=(args.rows + 7) // 8, dtype=np.uint8)
    rho = rng.integers(0, 256, size=args.rows, dtype=np.uint8)
    a = rng.integers(0, 256, size=(32, args.rows), dtype=np.uint8)

    backends = [("numpy", _pykernels)]
    if _ckernels is None:
        print("compiled backend not built; showing numpy only")
    else:
        backends.append(("cython", _ckernels))
        assert np.array_equal(_ckernels.xor_rows(mask, data), _pykernels.xor_rows(mask, data))
        assert np.array_equal(_ckernels.gf_vecmat(rho, data), _pykernels.gf_vecmat(rho, data))

    print(f"r={args.rows} s={args.block}, best of {args.repeat} runs (ms)")
    print(f"{'kernel':<12}" + "".join(f"{name:>12}" for name, _ in backends))
    cases = [
        ("xor_rows", lambda m: m.xor_rows(mask, data)),
        ("gf_vecmat", lambda m: m.gf_vecmat(rho, data)),
        ("gf_matmul32", lambda m: m.gf_matmul(a, data)),
    ]
    for label, fn in cases:
        cells = []
        for _, mod in backends:
            best = min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat))
            cells.append(f"{best * 1e3:>12.2f}")
        print(f"{label:<12}" + "".join(cells))


if __name__ == "__main__":
    main()
