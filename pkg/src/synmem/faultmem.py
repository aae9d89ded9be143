"""Voltage-dependent SRAM bitcell failure models, hybrid layouts, and fault masks.

Failure taxonomy for a 6T cell at scaled voltage: read-access failures (the
cell returns the wrong value within the read cycle), write failures (the cell
cannot be flipped during the load, so it retains a random power-up value), and
read-disturb failures (neglected: identically zero by default). An 8T cell has
decoupled read/write paths and is treated as failure-free over the supported
voltage range.

A sampled ChipInstance is one Monte Carlo realization of process variation:
a fixed per-bit map of which cells read-fail and which write-fail at a given
voltage. The same cell never carries both (conflicting sizing requirements),
which the categorical sampler guarantees by construction.
"""

from __future__ import annotations

import enum
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .quantnet import QuantizedNetwork, sign_extend
from .seeding import derive_seed, hash_u64

# Documentation constants of the reference 22 nm bitcell design (not used in
# any computation): static read noise margin and write margin, in millivolts.
READ_SNM_MV = 195.0
WRITE_MARGIN_MV = 250.0

DEFAULT_VNOM = 0.95


class BitcellKind(enum.Enum):
    SIX_T = "sixT"
    EIGHT_T = "eightT"


class FailureType(enum.Enum):
    READ_ACCESS = "read_access"
    WRITE = "write"
    READ_DISTURB = "read_disturb"


class AccessMode(enum.Enum):
    """How read-access failures manifest during inference.

    STATIC_MASK: a read-failing cell always returns the wrong value (process
    variation is structural per chip at a given voltage). PER_ACCESS_BERNOULLI:
    every unprotected bit flips independently with the read-failure probability
    at every access.
    """

    STATIC_MASK = "static"
    PER_ACCESS_BERNOULLI = "bernoulli"


@dataclass(frozen=True)
class VtVariationParams:
    """Threshold-voltage variation of a transistor vs the minimum-sized device."""

    sigma_vt0: float  # std-dev of a minimum-sized transistor, volts
    length: float
    width: float
    length_min: float
    width_min: float

    def __post_init__(self):
        for name in ("sigma_vt0", "length", "width", "length_min", "width_min"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.length < self.length_min or self.width < self.width_min:
            raise ValueError("L and W must be at least the technology minimum")


def sigma_vt(p: VtVariationParams) -> float:
    """sigma_VT0 * sqrt((Lmin/L) * (Wmin/W)): variation shrinks with device area."""
    return p.sigma_vt0 * math.sqrt((p.length_min / p.length) * (p.width_min / p.width))


_LOG_FLOOR = 1e-300  # stand-in for p=0 inside log-space interpolation


class TableCurve:
    """Failure probability vs voltage, tabulated; log-space interpolation.

    Queries between points interpolate linearly in log-probability, queries
    outside the table clamp to the endpoint values, and queries exactly at a
    tabulated voltage return the tabulated probability (zeros included).
    """

    def __init__(self, points):
        pts = [(float(v), float(p)) for v, p in points]
        if not pts:
            raise ValueError("empty failure table")
        pts.sort(key=lambda vp: vp[0])
        for v, p in pts:
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"probability {p} at {v} V outside [0, 1]")
        for (v0, p0), (v1, p1) in zip(pts, pts[1:]):
            if v1 == v0:
                raise ValueError(f"duplicate voltage {v0} in table")
            if p1 > p0:
                raise ValueError(
                    f"table not monotone: p({v1})={p1} > p({v0})={p0}"
                )
        self.voltages = np.array([v for v, _ in pts])
        self.probs = np.array([p for _, p in pts])

    def value(self, v: float) -> float:
        if v <= self.voltages[0]:
            return float(self.probs[0])
        if v >= self.voltages[-1]:
            return float(self.probs[-1])
        hi = int(np.searchsorted(self.voltages, v))
        if self.voltages[hi] == v:
            return float(self.probs[hi])
        lo = hi - 1
        t = (v - self.voltages[lo]) / (self.voltages[hi] - self.voltages[lo])
        lp0 = math.log(max(self.probs[lo], _LOG_FLOOR))
        lp1 = math.log(max(self.probs[hi], _LOG_FLOOR))
        return math.exp((1.0 - t) * lp0 + t * lp1)

    @property
    def support(self) -> tuple[float, float]:
        return float(self.voltages[0]), float(self.voltages[-1])

    def to_json(self):
        return {"table": [[float(v), float(p)] for v, p in zip(self.voltages, self.probs)]}


class AnalyticMarginCurve:
    """Gaussian-margin failure model: p(V) = Phi(-(mu0 + slope*(V - Vnom)) / sigma_m).

    Abstracts a Monte Carlo margin analysis: the operating margin shrinks
    linearly as the supply drops and failures are the Gaussian tail below zero.
    """

    def __init__(self, mu0: float, slope: float, sigma_m: float, vnom: float = DEFAULT_VNOM):
        if sigma_m <= 0:
            raise ValueError("sigma_m must be strictly positive")
        if slope < 0:
            raise ValueError("slope must be non-negative (failures worsen as V drops)")
        self.mu0 = float(mu0)
        self.slope = float(slope)
        self.sigma_m = float(sigma_m)
        self.vnom = float(vnom)

    def value(self, v: float) -> float:
        margin = self.mu0 + self.slope * (v - self.vnom)
        # Phi(-m/s) = erfc(m / (s*sqrt(2))) / 2
        return 0.5 * math.erfc(margin / (self.sigma_m * math.sqrt(2.0)))

    @property
    def support(self) -> tuple[float, float]:
        return (0.0, math.inf)

    def to_json(self):
        return {"analytic": {"mu0": self.mu0, "slope": self.slope, "sigma_m": self.sigma_m}}


class ZeroCurve:
    """Identically zero failure probability."""

    def value(self, v: float) -> float:
        return 0.0

    @property
    def support(self) -> tuple[float, float]:
        return (0.0, math.inf)

    def to_json(self):
        return {"zero": True}


def _curve_from_json(obj, vnom: float):
    if obj is None or obj.get("zero"):
        return ZeroCurve()
    if "table" in obj:
        return TableCurve(obj["table"])
    if "analytic" in obj:
        a = obj["analytic"]
        return AnalyticMarginCurve(a["mu0"], a["slope"], a["sigma_m"], vnom)
    raise ValueError(f"unrecognized failure curve spec: {obj!r}")


_ZERO = ZeroCurve()


@dataclass
class FailureModel:
    """Per-bitcell-kind, per-failure-type voltage curves."""

    vnom: float = DEFAULT_VNOM
    curves: dict = field(default_factory=dict)  # (BitcellKind, FailureType) -> curve

    @classmethod
    def from_json(cls, obj: dict) -> "FailureModel":
        vnom = float(obj.get("vnom", DEFAULT_VNOM))
        curves = {}
        cells = obj.get("cells", {})
        for kind in BitcellKind:
            spec = cells.get(kind.value, {})
            for ftype in FailureType:
                if ftype.value in spec:
                    curves[(kind, ftype)] = _curve_from_json(spec[ftype.value], vnom)
        return cls(vnom=vnom, curves=curves)

    @classmethod
    def load(cls, path) -> "FailureModel":
        with open(path) as f:
            return cls.from_json(json.load(f))

    def to_json(self) -> dict:
        cells = {}
        for (kind, ftype), curve in self.curves.items():
            cells.setdefault(kind.value, {})[ftype.value] = curve.to_json()
        return {"vnom": self.vnom, "cells": cells}

    def curve(self, kind: BitcellKind, ftype: FailureType):
        # 8T cells and read disturb default to zero; 6T read/write must be given.
        return self.curves.get((kind, ftype), _ZERO)

    @property
    def support(self) -> tuple[float, float]:
        """Intersection of the configured 6T table supports (widest default)."""
        lo, hi = 0.0, math.inf
        for curve in self.curves.values():
            clo, chi = curve.support
            lo, hi = max(lo, clo), min(hi, chi)
        return lo, hi


def failure_prob(model: FailureModel, kind: BitcellKind, ftype: FailureType, v: float) -> float:
    """Probability that one bitcell of `kind` exhibits `ftype` at supply `v`."""
    if v <= 0:
        raise ValueError(f"supply voltage must be positive, got {v}")
    if kind is BitcellKind.EIGHT_T and (kind, ftype) not in model.curves:
        return 0.0
    return model.curve(kind, ftype).value(v)


class LayoutKind(enum.Enum):
    ALL_SIX_T = "all6t"
    HYBRID_UNIFORM = "hybrid"
    SENSITIVITY_BANKS = "banks"


@dataclass(frozen=True)
class MemoryLayout:
    """Which bit positions of each weight bank live in 8T cells.

    Protected bits are always the top of the word: the sign bit first, then
    downward. ``k_per_bank`` is only set for the per-bank sensitivity variant.
    """

    kind: LayoutKind
    word_bits: int = 8
    k: int = 0
    k_per_bank: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.kind is LayoutKind.SENSITIVITY_BANKS:
            if not self.k_per_bank:
                raise ValueError("sensitivity layout needs one k per bank")
            for kb in self.k_per_bank:
                if not 0 <= kb <= self.word_bits:
                    raise ValueError(f"k={kb} outside [0, {self.word_bits}]")
        elif not 0 <= self.k <= self.word_bits:
            raise ValueError(f"k={self.k} outside [0, {self.word_bits}]")

    @classmethod
    def all_six_t(cls, word_bits: int = 8) -> "MemoryLayout":
        return cls(LayoutKind.ALL_SIX_T, word_bits)

    @classmethod
    def hybrid_uniform(cls, k: int, word_bits: int = 8) -> "MemoryLayout":
        return cls(LayoutKind.HYBRID_UNIFORM, word_bits, k=k)

    @classmethod
    def sensitivity_banks(cls, k_per_bank, word_bits: int = 8) -> "MemoryLayout":
        return cls(
            LayoutKind.SENSITIVITY_BANKS, word_bits, k_per_bank=tuple(int(k) for k in k_per_bank)
        )

    @property
    def n_banks(self) -> int | None:
        """Bank count pinned by the layout, or None if it applies to any count."""
        return len(self.k_per_bank) if self.k_per_bank is not None else None

    def protected_count(self, bank: int) -> int:
        if self.kind is LayoutKind.ALL_SIX_T:
            return 0
        if self.kind is LayoutKind.HYBRID_UNIFORM:
            return self.k
        if not 0 <= bank < len(self.k_per_bank):
            raise IndexError(f"bank {bank} outside layout with {len(self.k_per_bank)} banks")
        return self.k_per_bank[bank]

    def protected_positions(self, bank: int) -> frozenset[int]:
        k = self.protected_count(bank)
        return frozenset(range(self.word_bits - k, self.word_bits))

    def flippable_positions(self, bank: int) -> np.ndarray:
        """Unprotected (6T) bit positions, ascending; int32 for the kernels."""
        k = self.protected_count(bank)
        return np.arange(self.word_bits - k, dtype=np.int32)

    def protected_word_mask(self, bank: int) -> int:
        mask = 0
        for pos in self.protected_positions(bank):
            mask |= 1 << pos
        return mask

    def digest(self, n_banks: int) -> str:
        """Canonical id used for seed derivation and equivalence.

        Normalized to the per-bank protection profile, so all-6T equals
        hybrid{0} and a constant per-bank list equals the uniform hybrid:
        equal profiles sample identical chips from identical seeds.
        """
        ks = [self.protected_count(b) for b in range(n_banks)]
        if len(set(ks)) == 1:
            return f"w{self.word_bits}:u{ks[0]}"
        return f"w{self.word_bits}:b" + "-".join(str(k) for k in ks)

    @property
    def label(self) -> str:
        """Human-readable name used in CSV output."""
        if self.kind is LayoutKind.ALL_SIX_T:
            return "all6t"
        if self.kind is LayoutKind.HYBRID_UNIFORM:
            return f"hybrid{self.k}"
        return "banks-" + "-".join(str(k) for k in self.k_per_bank)


def protected_positions(layout: MemoryLayout, bank: int) -> frozenset[int]:
    """Bit positions of `bank` stored in 8T cells (the k most significant)."""
    return layout.protected_positions(bank)


@dataclass
class ChipInstance:
    """One sampled chip: fixed read- and write-fault masks per bank.

    Masks are word-shaped uint16 arrays; bit b of mask[i, j] marks bit b of
    the weight word at (i, j). Read and write masks are disjoint per bit and
    never touch 8T-mapped positions.
    """

    layout: MemoryLayout
    voltage: float
    seed: int
    read_prob: float
    write_prob: float
    read_masks: list[np.ndarray]
    write_masks: list[np.ndarray]

    def validate(self) -> None:
        for bank, (rm, wm) in enumerate(zip(self.read_masks, self.write_masks)):
            if np.any(rm & wm):
                raise AssertionError(f"bank {bank}: read/write masks overlap")
            protected = np.uint16(self.layout.protected_word_mask(bank))
            if np.any((rm | wm) & protected):
                raise AssertionError(f"bank {bank}: fault at an 8T-protected position")

    def fault_counts(self) -> tuple[int, int]:
        """(read-fault bits, write-fault bits) across all banks."""
        read = sum(int(np.bitwise_count(m.astype(np.uint64)).sum()) for m in self.read_masks)
        write = sum(int(np.bitwise_count(m.astype(np.uint64)).sum()) for m in self.write_masks)
        return read, write


def sample_chip(
    layout: MemoryLayout,
    model: FailureModel,
    v: float,
    bank_shapes,
    seed: int,
) -> ChipInstance:
    """Draw one chip's fault masks at supply `v`.

    Each 6T-mapped bit takes one categorical draw: read-fault with p_ra,
    write-fault with p_wf, healthy otherwise; 8T-mapped bits are never
    sampled. If p_ra + p_wf exceeds 1 the pair is renormalized with a warning.
    """
    if layout.n_banks is not None and layout.n_banks != len(bank_shapes):
        raise ValueError(
            f"layout pins {layout.n_banks} banks but {len(bank_shapes)} shapes given"
        )
    p_ra = failure_prob(model, BitcellKind.SIX_T, FailureType.READ_ACCESS, v)
    p_wf = failure_prob(model, BitcellKind.SIX_T, FailureType.WRITE, v)
    total = p_ra + p_wf
    if total > 1.0:
        warnings.warn(
            f"p_read + p_write = {total:.4f} > 1 at {v} V; renormalizing",
            RuntimeWarning,
            stacklevel=2,
        )
        p_ra, p_wf = p_ra / total, p_wf / total
    rng = np.random.default_rng(seed)
    read_masks, write_masks = [], []
    for bank, (rows, cols) in enumerate(bank_shapes):
        positions = layout.flippable_positions(bank)
        read = np.zeros((rows, cols), dtype=np.uint16)
        write = np.zeros((rows, cols), dtype=np.uint16)
        if len(positions) and (p_ra > 0 or p_wf > 0):
            u = rng.random((rows, cols, len(positions)))
            read_hit = u < p_ra
            write_hit = (u >= p_ra) & (u < p_ra + p_wf)
            for slot, pos in enumerate(positions):
                read |= read_hit[:, :, slot].astype(np.uint16) << np.uint16(pos)
                write |= write_hit[:, :, slot].astype(np.uint16) << np.uint16(pos)
        read_masks.append(read)
        write_masks.append(write)
    return ChipInstance(
        layout=layout,
        voltage=v,
        seed=seed,
        read_prob=p_ra,
        write_prob=p_wf,
        read_masks=read_masks,
        write_masks=write_masks,
    )


class FaultyWeightStore:
    """Stored weight patterns of one chip, plus the read-fault semantics.

    In STATIC_MASK mode a read returns stored ^ read_mask (a read-failing
    cell is persistently wrong). In PER_ACCESS_BERNOULLI mode every 6T bit
    flips independently with the chip's read probability at every access,
    keyed by (chip seed, bank, pass id) so repeated reads of the same pass
    are reproducible.
    """

    def __init__(
        self,
        chip: ChipInstance,
        stored: list[np.ndarray],
        word_bits: int,
        mode: AccessMode = AccessMode.STATIC_MASK,
    ):
        self.chip = chip
        self.stored = stored
        self.word_bits = word_bits
        self.mode = mode
        self._read_key = derive_seed(chip.seed, "read-stream")

    @property
    def is_static(self) -> bool:
        return self.mode is AccessMode.STATIC_MASK

    @property
    def n_banks(self) -> int:
        return len(self.stored)

    def bank_key(self, bank: int) -> int:
        return hash_u64(self._read_key, bank)

    def read_bank(self, bank: int, pass_id: int = 0) -> np.ndarray:
        """Bit patterns served for one forward pass over an entire bank."""
        if self.is_static:
            return self.stored[bank] ^ self.chip.read_masks[bank]
        flips = kernels.flip_mask_words(
            self.stored[bank].shape,
            self.chip.layout.flippable_positions(bank),
            self.chip.read_prob,
            self.bank_key(bank),
            pass_id,
        )
        return self.stored[bank] ^ flips

    def bank_matmul(self, bank: int, x: np.ndarray, pass_base: int = 0) -> np.ndarray:
        """Fused per-access faulty matmul: row s of `x` is pass `pass_base + s`."""
        positions = self.chip.layout.flippable_positions(bank)
        if self.is_static or len(positions) == 0 or self.chip.read_prob <= 0.0:
            # nothing can flip per access: identical to a clean BLAS product
            w = sign_extend(self.read_bank(bank), self.word_bits).astype(np.float64)
            return x @ w
        return kernels.bernoulli_matmul(
            x,
            self.stored[bank],
            positions,
            self.chip.read_prob,
            self.bank_key(bank),
            self.word_bits,
            pass_base,
        )

    def read_word(self, bank: int, row: int, col: int, pass_id: int = 0) -> int:
        return int(self.read_bank(bank, pass_id)[row, col])


def read_weight(store: FaultyWeightStore, bank: int, row: int, col: int, pass_id: int = 0) -> int:
    """Bit pattern one weight read returns (word_bits wide)."""
    return store.read_word(bank, row, col, pass_id)


def write_weights(
    chip: ChipInstance,
    q: QuantizedNetwork,
    seed: int,
    mode: AccessMode = AccessMode.STATIC_MASK,
) -> FaultyWeightStore:
    """Load quantized weights into the chip, applying write failures once.

    A write-failing cell cannot be flipped from its power-up state, so it
    retains an independent uniform random bit: it matches the intended value
    with probability 1/2. All other cells store the intended bit.
    """
    if len(chip.read_masks) != q.arch.n_banks:
        raise ValueError("chip bank count does not match network")
    word_bits = q.fmt.total_bits
    rng = np.random.default_rng(seed)
    stored = []
    for bank in range(q.arch.n_banks):
        intended = q.bank_patterns(bank)
        if intended.shape != chip.read_masks[bank].shape:
            raise ValueError(f"bank {bank}: chip shape does not match network")
        wmask = chip.write_masks[bank]
        if np.any(wmask):
            powerup = rng.integers(0, 1 << word_bits, size=intended.shape, dtype=np.uint16)
            stored.append((intended & ~wmask) | (powerup & wmask))
        else:
            stored.append(intended.copy())
    return FaultyWeightStore(chip, stored, word_bits, mode)
