"""Deterministic seed derivation.

Every stochastic step in the pipeline (chip sampling, write power-up values,
per-access read flips, dataset generation) draws from a seed derived here, so
parallel execution order can never change results. Derivation is a keyed
BLAKE2b hash over a tagged, length-prefixed encoding of the components; any
(master seed, component...) tuple maps to a stable 64-bit seed.
"""

from __future__ import annotations

import hashlib
import struct

_PERSON = b"synmem.seed"

MASK64 = (1 << 64) - 1


def derive_seed(*parts: int | float | str | bytes | tuple | list) -> int:
    """Derive a 64-bit seed from an arbitrary tuple of components.

    Floats are encoded by their IEEE-754 bits, so 0.65 and 0.6500000001 derive
    different seeds while repeated runs agree exactly.
    """
    h = hashlib.blake2b(digest_size=8, person=_PERSON)
    _feed(h, parts)
    return int.from_bytes(h.digest(), "big")


def _feed(h, obj) -> None:
    if isinstance(obj, bool):  # bool is an int subclass; tag it distinctly
        h.update(b"b" + (b"\x01" if obj else b"\x00"))
    elif isinstance(obj, int):
        raw = obj.to_bytes((obj.bit_length() + 8) // 8 + 1, "big", signed=True)
        h.update(b"i" + struct.pack(">I", len(raw)) + raw)
    elif isinstance(obj, float):
        h.update(b"f" + struct.pack(">d", obj))
    elif isinstance(obj, str):
        raw = obj.encode("utf-8")
        h.update(b"s" + struct.pack(">I", len(raw)) + raw)
    elif isinstance(obj, bytes):
        h.update(b"y" + struct.pack(">I", len(obj)) + obj)
    elif isinstance(obj, (tuple, list)):
        h.update(b"t" + struct.pack(">I", len(obj)))
        for item in obj:
            _feed(h, item)
    else:
        raise TypeError(f"cannot derive a seed from {type(obj).__name__!r}")


def mix64(x: int) -> int:
    """SplitMix64 finalizer; a bijective 64-bit mixer.

    Must stay in lockstep with the C implementation in ``_fastpath.pyx`` and
    the vectorized one in ``kernels.py``: the compiled and fallback kernels
    are only interchangeable because all three agree bit for bit.
    """
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def hash_u64(key: int, counter: int) -> int:
    """Stateless counter-based hash: one 64-bit word per (key, counter)."""
    return mix64((key ^ mix64(counter & MASK64)) & MASK64)
