"""Hot kernels for per-access fault injection, with a compiled fast path.

The per-access Bernoulli read model redraws every unprotected weight bit at
every access, so a batch evaluation cannot collapse into one BLAS call. The
compiled extension (``synmem._fastpath``, Cython) fuses flip-mask generation,
two's-complement decode and the matvec into one pass; this module carries a
pure-numpy fallback with the exact same counter-based RNG so flip masks are
bit-identical between backends (accumulated sums differ only by float
summation order).

RNG scheme, shared verbatim by both backends:

    skey = mix64(bank_key ^ mix64(pass_id))
    h    = mix64(skey ^ mix64(element_index * n_flip + flip_slot))
    flip iff (h >> 11) * 2^-53 < p

Backend selection happens at import; set SYNMEM_DISABLE_FASTPATH=1 to force
the fallback.
"""

from __future__ import annotations

import os

import numpy as np

from .quantnet import sign_extend

_U64 = np.uint64
_GAMMA = _U64(0x9E3779B97F4A7C15)
_MUL1 = _U64(0xBF58476D1CE4E5B9)
_MUL2 = _U64(0x94D049BB133111EB)
_INV_2_53 = 1.0 / 9007199254740992.0

try:
    if os.environ.get("SYNMEM_DISABLE_FASTPATH") == "1":
        raise ImportError("fast path disabled by SYNMEM_DISABLE_FASTPATH")
    from . import _fastpath

    HAVE_FASTPATH = True
except ImportError:
    _fastpath = None
    HAVE_FASTPATH = False


def backend_name() -> str:
    return "compiled" if HAVE_FASTPATH else "numpy-fallback"


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z + _GAMMA).astype(_U64)
    z = (z ^ (z >> _U64(30))) * _MUL1
    z = (z ^ (z >> _U64(27))) * _MUL2
    return z ^ (z >> _U64(31))


def _pass_key(bank_key: int, pass_id: int) -> np.uint64:
    with np.errstate(over="ignore"):
        return _mix64(np.array([_U64(bank_key) ^ _mix64(np.array([pass_id], dtype=_U64))[0]], dtype=_U64))[0]


def flip_mask_words_fallback(
    shape: tuple[int, int],
    positions: np.ndarray,
    p: float,
    bank_key: int,
    pass_id: int,
) -> np.ndarray:
    """One pass's read-flip words for a whole bank (uint16)."""
    rows, cols = shape
    n_flip = len(positions)
    flips = np.zeros((rows, cols), dtype=np.uint16)
    if n_flip == 0 or p <= 0.0:
        return flips
    with np.errstate(over="ignore"):
        skey = _pass_key(bank_key, pass_id)
        ctr = np.arange(rows * cols * n_flip, dtype=_U64)
        h = _mix64(skey ^ _mix64(ctr))
    u = (h >> _U64(11)).astype(np.float64) * _INV_2_53
    hit = (u < p).reshape(rows, cols, n_flip)
    for slot, pos in enumerate(positions):
        flips |= hit[:, :, slot].astype(np.uint16) << np.uint16(pos)
    return flips


def bernoulli_matmul_fallback(
    x: np.ndarray,
    patterns: np.ndarray,
    positions: np.ndarray,
    p: float,
    bank_key: int,
    word_bits: int,
    pass_base: int = 0,
) -> np.ndarray:
    """out[s] = x[s] @ decode(patterns ^ flips(pass_base + s)); scale applied by caller."""
    n = x.shape[0]
    out = np.empty((n, patterns.shape[1]))
    for s in range(n):
        flips = flip_mask_words_fallback(
            patterns.shape, positions, p, bank_key, pass_base + s
        )
        w = sign_extend(patterns ^ flips, word_bits).astype(np.float64)
        out[s] = x[s] @ w
    return out


def flip_mask_words_fastpath(shape, positions, p, bank_key, pass_id):
    rows, cols = shape
    flips = np.zeros((rows, cols), dtype=np.uint16)
    if len(positions) == 0 or p <= 0.0:
        return flips
    _fastpath.flip_mask_words(
        flips, np.asarray(positions, dtype=np.int32), float(p), bank_key, pass_id
    )
    return flips


def bernoulli_matmul_fastpath(x, patterns, positions, p, bank_key, word_bits, pass_base=0):
    x = np.ascontiguousarray(x, dtype=np.float64)
    patterns = np.ascontiguousarray(patterns, dtype=np.uint16)
    out = np.zeros((x.shape[0], patterns.shape[1]))
    _fastpath.bernoulli_matmul(
        x,
        patterns,
        np.asarray(positions, dtype=np.int32),
        float(p),
        bank_key,
        int(word_bits),
        int(pass_base),
        out,
    )
    return out


if HAVE_FASTPATH:
    flip_mask_words = flip_mask_words_fastpath
    bernoulli_matmul = bernoulli_matmul_fastpath
else:
    flip_mask_words = flip_mask_words_fallback
    bernoulli_matmul = bernoulli_matmul_fallback
