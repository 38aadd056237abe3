"""Time the numba kernels against their pure-numpy fallbacks.

    python benchmarks/bench_kernels.py [--log2-guesses 26] [--repeat 3]

Both flavours are run on the same inputs and their outputs compared before
timing is reported.  The first numba call (compilation) is excluded.
"""

import argparse
import random
import time

import numpy as np

from armoury import kernels
from armoury.cipher import DEFAULT_SPEC, sco


def best_of(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--log2-guesses", type=int, default=26)
    ap.add_argument("--log2-keys", type=int, default=14)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    spec = DEFAULT_SPEC
    degrees = np.array(spec.degrees)
    masks = np.array(spec.masks, dtype=np.int64)
    d1, d2, _ = spec.degrees
    rng = np.random.default_rng(0)
    keys = rng.integers(0, 1 << 59, 1 << args.log2_keys, dtype=np.int64)
    target = sco(random.Random(1).getrandbits(59))
    seq1 = kernels.register_sequences_numpy(d1, spec.masks[0], 59)
    seq2 = kernels.register_sequences_numpy(d2, spec.masks[1], 59)
    lo, hi = 0, 1 << args.log2_guesses

    cases = {
        "sco_batch": (lambda: kernels.sco_batch_numba(keys, degrees, masks, 59),
                      lambda: kernels.sco_batch_numpy(keys, degrees, masks, 59),
                      len(keys), "keys"),
        "register_sequences(d=19)": (lambda: kernels.register_sequences_numba(d2, spec.masks[1], 59),
                                     lambda: kernels.register_sequences_numpy(d2, spec.masks[1], 59),
                                     1 << d2, "states"),
        "scan_pairs": (lambda: kernels.scan_pairs_numba(seq1, seq2, target, lo, hi, d2),
                       lambda: kernels.scan_pairs_numpy(seq1, seq2, target, lo, hi, d2),
                       hi - lo, "guesses"),
    }
    print(f"{'kernel':<26} {'numba s':>10} {'numpy s':>10} {'speedup':>8}  throughput (numba)")
    for name, (fast, slow, n, unit) in cases.items():
        fast()  # compile
        tf, a = best_of(fast, args.repeat)
        ts, b = best_of(slow, args.repeat)
        if not np.array_equal(np.sort(a), np.sort(b)):
            raise SystemExit(f"{name}: numba and numpy outputs differ")
        print(f"{name:<26} {tf:>10.4f} {ts:>10.4f} {ts / tf:>7.1f}x  {n / tf:,.0f} {unit}/s")
    full = (1 << (d1 + d2)) / ((hi - lo) / best_of(cases["scan_pairs"][0], 1)[0])
    print(f"\nprojected full 2**{d1 + d2} scan on one core: {full:.0f} s")


if __name__ == "__main__":
    main()
