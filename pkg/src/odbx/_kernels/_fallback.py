"""Pure-Python versions of the scan kernels. Same signatures and results
as the compiled module; only the speed differs."""

from __future__ import annotations

from bisect import bisect_right


def scan_words(words, mask: int, want: int, start: int, stop: int,
               forward: bool = True) -> int:
    """First index i with (words[i] & mask) == want, scanning start..stop
    (stop excluded going forward, included going backward). -1 if none."""
    if forward:
        for i in range(start, stop):
            if words[i] & mask == want:
                return i
    else:
        for i in range(start, stop - 1, -1):
            if words[i] & mask == want:
                return i
    return -1


def count_matches(words, mask: int, want: int, start: int, stop: int) -> int:
    n = 0
    for i in range(start, stop):
        if words[i] & mask == want:
            n += 1
    return n


def closest_prev(ts, t: int) -> int:
    """Index of the last element <= t in sorted ts, or -1."""
    return bisect_right(ts, t) - 1
