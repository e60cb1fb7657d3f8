"""Compare the compiled scan kernels with the pure-Python fallback.

Run from the repository root:

    python3 benchmarks/bench_kernels.py [--events N]

Both implementations are imported side by side, so the numbers come
from one process and one workload. The same kernels back every query
scan and history lookup, which makes this the speed story for search
over a big recording.
"""

from __future__ import annotations

import argparse
import random
import time
from array import array

from odbx._kernels import _fallback as pure

try:
    from odbx._kernels import _native as native
except ImportError:
    native = None


def best_of(fn, repeat=5):
    out = None
    t = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        dt = time.perf_counter() - t0
        t = dt if t is None else min(t, dt)
    return t, out


def fmt(seconds: float) -> str:
    if seconds >= 1.0:
        return f"{seconds:8.3f} s "
    if seconds >= 1e-3:
        return f"{seconds * 1e3:8.2f} ms"
    return f"{seconds * 1e6:8.1f} us"


def row(label: str, fn_pure, fn_native):
    tp, got_p = best_of(fn_pure)
    if native is None:
        print(f"{label:34s} {fmt(tp)}   (no compiled module)")
        return
    tn, got_n = best_of(fn_native)
    assert got_p == got_n, f"{label}: implementations disagree"
    print(f"{label:34s} {fmt(tp)} {fmt(tn)} {tp / tn:8.1f}x")


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--events", type=int, default=1_000_000,
                    help="synthetic log size (default 1e6)")
    args = ap.parse_args()
    n = args.events

    rng = random.Random(2718)
    # packed words with the live layout: kind in the low nibble
    words = array("I", ((rng.randrange(3) << 24)
                        | (rng.randrange(200) << 4)
                        | rng.choice((0, 1, 2, 2, 2, 3, 5))
                        for _ in range(n)))
    words[n - 5] = (2 << 24) | (7 << 4) | 9     # one needle near the end
    ts = array("q", range(0, 4 * n, 4))
    probes = [rng.randrange(4 * n) for _ in range(10_000)]

    backend = "missing" if native is None else "present"
    print(f"{n} events, compiled module {backend}")
    print(f"{'kernel':34s} {'pure':11s} {'native':11s} {'speedup':>8s}")

    row("scan kind fwd, no match",
        lambda: pure.scan_words(words, 0xF, 0xD, 0, n),
        lambda: native.scan_words(words, 0xF, 0xD, 0, n))
    row("scan kind bwd, no match",
        lambda: pure.scan_words(words, 0xF, 0xD, n - 1, 0, False),
        lambda: native.scan_words(words, 0xF, 0xD, n - 1, 0, False))
    row("scan thread+kind, late match",
        lambda: pure.scan_words(words, 0xFF00000F, (2 << 24) | 9,
                                0, n),
        lambda: native.scan_words(words, 0xFF00000F, (2 << 24) | 9,
                                  0, n))
    row("count one kind over the log",
        lambda: pure.count_matches(words, 0xF, 2, 0, n),
        lambda: native.count_matches(words, 0xF, 2, 0, n))
    row("closest_prev x 10000",
        lambda: [pure.closest_prev(ts, t) for t in probes],
        lambda: [native.closest_prev(ts, t) for t in probes])


if __name__ == "__main__":
    main()
