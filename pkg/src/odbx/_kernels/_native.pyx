# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled scan kernels over the packed event words and history arrays."""

from cpython cimport array


def scan_words(object words, unsigned int mask, unsigned int want,
               Py_ssize_t start, Py_ssize_t stop, bint forward=True):
    cdef const unsigned int[:] w = words
    cdef Py_ssize_t i
    if forward:
        for i in range(start, stop):
            if (w[i] & mask) == want:
                return i
    else:
        for i in range(start, stop - 1, -1):
            if (w[i] & mask) == want:
                return i
    return -1


def count_matches(object words, unsigned int mask, unsigned int want,
                  Py_ssize_t start, Py_ssize_t stop):
    cdef const unsigned int[:] w = words
    cdef Py_ssize_t i, n = 0
    for i in range(start, stop):
        if (w[i] & mask) == want:
            n += 1
    return n


def closest_prev(object ts, long long t):
    """Binary search: index of the last element <= t, or -1."""
    cdef const long long[:] a = ts
    cdef Py_ssize_t lo = 0, hi = a.shape[0], mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if a[mid] <= t:
            lo = mid + 1
        else:
            hi = mid
    return lo - 1
