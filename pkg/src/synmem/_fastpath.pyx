# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for per-access Bernoulli fault injection.

Keep the RNG in lockstep with kernels.py: same splitmix64 chain, same
(pass, element, slot) counter layout, same 53-bit uniform threshold test.
"""

from libc.stdint cimport int32_t, uint16_t, uint64_t


cdef inline uint64_t mix64(uint64_t x) nogil:
    cdef uint64_t z = x + <uint64_t>0x9E3779B97F4A7C15
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EB
    return z ^ (z >> 31)


cdef inline double u53(uint64_t h) nogil:
    return <double>(h >> 11) * (1.0 / 9007199254740992.0)


def flip_mask_words(uint16_t[:, ::1] flips, int32_t[::1] positions,
                    double p, object bank_key, object pass_id):
    """Fill ``flips`` with one pass's read-flip words for a bank."""
    cdef uint64_t key = <uint64_t>(<unsigned long long>bank_key)
    cdef uint64_t pid = <uint64_t>(<unsigned long long>pass_id)
    cdef Py_ssize_t rows = flips.shape[0], cols = flips.shape[1]
    cdef Py_ssize_t n_flip = positions.shape[0]
    cdef Py_ssize_t i, j, f
    cdef uint64_t skey, base
    cdef uint16_t word
    with nogil:
        skey = mix64(key ^ mix64(pid))
        for i in range(rows):
            for j in range(cols):
                base = <uint64_t>(i * cols + j) * <uint64_t>n_flip
                word = 0
                for f in range(n_flip):
                    if u53(mix64(skey ^ mix64(base + <uint64_t>f))) < p:
                        word |= <uint16_t>1 << positions[f]
                flips[i, j] = word


def bernoulli_matmul(double[:, ::1] x, uint16_t[:, ::1] patterns,
                     int32_t[::1] positions, double p, object bank_key,
                     int word_bits, object pass_base, double[:, ::1] out):
    """out[s, j] = sum_i x[s, i] * decode(patterns[i, j] ^ flips(s, i, j)).

    ``out`` must be zero-initialized; the caller applies the bank scale.
    """
    cdef uint64_t key = <uint64_t>(<unsigned long long>bank_key)
    cdef uint64_t p0 = <uint64_t>(<unsigned long long>pass_base)
    cdef Py_ssize_t n = x.shape[0], rows = patterns.shape[0], cols = patterns.shape[1]
    cdef Py_ssize_t n_flip = positions.shape[0]
    cdef Py_ssize_t s, i, j, f
    cdef uint64_t skey, base
    cdef uint16_t word
    cdef int32_t value
    cdef int32_t full = 1 << word_bits
    cdef int32_t half = full >> 1
    cdef double xi
    with nogil:
        for s in range(n):
            skey = mix64(key ^ mix64(p0 + <uint64_t>s))
            for i in range(rows):
                xi = x[s, i]
                for j in range(cols):
                    word = patterns[i, j]
                    if n_flip > 0 and p > 0.0:
                        base = <uint64_t>(i * cols + j) * <uint64_t>n_flip
                        for f in range(n_flip):
                            if u53(mix64(skey ^ mix64(base + <uint64_t>f))) < p:
                                word ^= <uint16_t>1 << positions[f]
                    value = <int32_t>word
                    if value >= half:
                        value -= full
                    out[s, j] += xi * <double>value
