"""Failure curves, layouts, chip sampling, and the faulty weight store."""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from synmem.faultmem import (
    AccessMode,
    AnalyticMarginCurve,
    BitcellKind,
    FailureModel,
    FailureType,
    LayoutKind,
    MemoryLayout,
    TableCurve,
    VtVariationParams,
    ZeroCurve,
    failure_prob,
    protected_positions,
    read_weight,
    sample_chip,
    sigma_vt,
    write_weights,
)
from synmem.quantnet import FixedPointFormat, NetworkArch, init_network, quantize, sign_extend
from synmem.seeding import derive_seed

SIX = BitcellKind.SIX_T
EIGHT = BitcellKind.EIGHT_T
READ = FailureType.READ_ACCESS
WRITE = FailureType.WRITE


def constant_model(p_read: float, p_write: float) -> FailureModel:
    """Voltage-flat failure curves; handy for statistical checks."""
    return FailureModel(
        vnom=0.95,
        curves={
            (SIX, READ): TableCurve([[0.5, p_read], [0.95, p_read]]),
            (SIX, WRITE): TableCurve([[0.5, p_write], [0.95, p_write]]),
        },
    )


class TestSigmaVt:
    def test_minimum_device_is_baseline(self):
        p = VtVariationParams(0.03, 1.0, 1.0, 1.0, 1.0)
        assert sigma_vt(p) == 0.03

    def test_upsizing_shrinks_variation(self):
        p = VtVariationParams(0.03, 2.0, 2.0, 1.0, 1.0)
        assert sigma_vt(p) == pytest.approx(0.015)

    def test_validation(self):
        with pytest.raises(ValueError):
            VtVariationParams(0.03, 0.5, 1.0, 1.0, 1.0)


class TestTableCurve:
    def test_exact_at_tabulated_points(self):
        c = TableCurve([[0.6, 0.035], [0.65, 0.008], [0.95, 0.0]])
        assert c.value(0.6) == 0.035
        assert c.value(0.65) == 0.008
        assert c.value(0.95) == 0.0

    def test_log_space_interpolation(self):
        c = TableCurve([[0.6, 0.035], [0.65, 0.008]])
        # midpoint in v is the geometric mean in p
        assert c.value(0.625) == pytest.approx(math.sqrt(0.035 * 0.008), rel=1e-12)

    def test_clamps_outside_support(self):
        c = TableCurve([[0.6, 0.035], [0.65, 0.008]])
        assert c.value(0.5) == 0.035
        assert c.value(1.2) == 0.008

    def test_rejects_non_monotone(self):
        with pytest.raises(ValueError):
            TableCurve([[0.6, 0.001], [0.65, 0.01]])

    def test_rejects_empty_and_bad_probability(self):
        with pytest.raises(ValueError):
            TableCurve([])
        with pytest.raises(ValueError):
            TableCurve([[0.6, 1.5]])

    def test_support(self):
        c = TableCurve([[0.6, 0.035], [0.95, 0.0]])
        assert c.support == (0.6, 0.95)

    @given(st.floats(min_value=0.55, max_value=0.95))
    def test_interpolation_bounded_by_endpoints(self, v):
        c = TableCurve([[0.55, 0.1], [0.75, 0.001], [0.95, 1e-8]])
        p = c.value(v)
        assert 1e-8 <= p <= 0.1

    def test_zero_next_to_positive_decays(self):
        c = TableCurve([[0.9, 1e-8], [0.95, 0.0]])
        assert c.value(0.95) == 0.0
        assert 0.0 < c.value(0.925) < 1e-8


class TestAnalyticCurve:
    def test_half_at_zero_margin(self):
        c = AnalyticMarginCurve(mu0=0.0, slope=1.0, sigma_m=0.05, vnom=0.95)
        assert c.value(0.95) == pytest.approx(0.5)

    def test_decreasing_in_voltage(self):
        c = AnalyticMarginCurve(mu0=0.19, slope=0.9, sigma_m=0.04, vnom=0.95)
        vs = [0.6, 0.7, 0.8, 0.9]
        ps = [c.value(v) for v in vs]
        assert all(a > b for a, b in zip(ps, ps[1:]))

    def test_validation(self):
        with pytest.raises(ValueError):
            AnalyticMarginCurve(0.1, -1.0, 0.05, 0.95)
        with pytest.raises(ValueError):
            AnalyticMarginCurve(0.1, 1.0, 0.0, 0.95)


class TestFailureModel:
    def test_json_roundtrip(self, tmp_path):
        m = constant_model(0.01, 0.002)
        path = tmp_path / "fm.json"
        path.write_text(json.dumps(m.to_json()))
        m2 = FailureModel.load(path)
        for v in (0.5, 0.7, 0.95):
            assert failure_prob(m2, SIX, READ, v) == failure_prob(m, SIX, READ, v)

    def test_unconfigured_8t_is_zero(self):
        m = constant_model(0.3, 0.1)
        assert failure_prob(m, EIGHT, READ, 0.5) == 0.0
        assert failure_prob(m, EIGHT, WRITE, 0.5) == 0.0

    def test_read_disturb_defaults_zero(self):
        m = constant_model(0.3, 0.1)
        assert failure_prob(m, SIX, FailureType.READ_DISTURB, 0.6) == 0.0

    def test_nonpositive_voltage_rejected(self):
        m = constant_model(0.3, 0.1)
        with pytest.raises(ValueError):
            failure_prob(m, SIX, READ, 0.0)

    def test_zero_curve(self):
        assert ZeroCurve().value(0.1) == 0.0

    def test_unrecognized_curve_spec(self):
        with pytest.raises(ValueError):
            FailureModel.from_json(
                {"vnom": 0.95, "cells": {"sixT": {"read_access": {"bogus": 1}}}}
            )


class TestMemoryLayout:
    def test_all6t(self):
        lay = MemoryLayout.all_six_t(8)
        assert lay.protected_count(0) == 0
        assert list(lay.flippable_positions(0)) == list(range(8))
        assert lay.label == "all6t"

    def test_hybrid3_protects_top_bits(self):
        lay = MemoryLayout.hybrid_uniform(3, 8)
        assert set(protected_positions(lay, 0)) == {7, 6, 5}
        assert list(lay.flippable_positions(0)) == [0, 1, 2, 3, 4]
        assert lay.protected_word_mask(0) == 0b11100000
        assert lay.label == "hybrid3"

    def test_hybrid8_protects_everything(self):
        lay = MemoryLayout.hybrid_uniform(8, 8)
        assert len(lay.flippable_positions(0)) == 0
        assert lay.protected_word_mask(0) == 0xFF

    def test_per_bank_profile(self):
        lay = MemoryLayout.sensitivity_banks([2, 4, 0], 8)
        assert lay.protected_count(0) == 2
        assert lay.protected_count(1) == 4
        assert list(lay.flippable_positions(2)) == list(range(8))
        assert lay.label == "banks-2-4-0"
        assert lay.n_banks == 3

    def test_k_out_of_range(self):
        with pytest.raises(ValueError):
            MemoryLayout.hybrid_uniform(9, 8)
        with pytest.raises(ValueError):
            MemoryLayout.sensitivity_banks([2, -1], 8)
        with pytest.raises(ValueError):
            MemoryLayout.sensitivity_banks([], 8)

    def test_digest_equivalences(self):
        # layouts that protect the same bits hash identically, so they see
        # identical sampled chips under the same master seed
        all6t = MemoryLayout.all_six_t(8)
        h0 = MemoryLayout.hybrid_uniform(0, 8)
        b0 = MemoryLayout.sensitivity_banks([0, 0, 0], 8)
        assert all6t.digest(3) == h0.digest(3) == b0.digest(3)
        h3 = MemoryLayout.hybrid_uniform(3, 8)
        b3 = MemoryLayout.sensitivity_banks([3, 3, 3], 8)
        assert h3.digest(3) == b3.digest(3)
        assert h3.digest(3) != all6t.digest(3)
        # order matters for genuinely per-bank profiles
        asym = MemoryLayout.sensitivity_banks([2, 4], 8)
        assert asym.digest(2) != MemoryLayout.sensitivity_banks([4, 2], 8).digest(2)
        # word width matters
        assert MemoryLayout.hybrid_uniform(3, 10).digest(3) != h3.digest(3)

    def test_kind_enum(self):
        assert MemoryLayout.all_six_t(8).kind is LayoutKind.ALL_SIX_T
        assert MemoryLayout.hybrid_uniform(2, 8).kind is LayoutKind.HYBRID_UNIFORM


class TestSampleChip:
    def test_deterministic_and_disjoint(self):
        m = constant_model(0.1, 0.05)
        lay = MemoryLayout.hybrid_uniform(2, 8)
        shapes = [(20, 15), (15, 4)]
        c1 = sample_chip(lay, m, 0.6, shapes, 77)
        c2 = sample_chip(lay, m, 0.6, shapes, 77)
        c3 = sample_chip(lay, m, 0.6, shapes, 78)
        for b in range(2):
            assert np.array_equal(c1.read_masks[b], c2.read_masks[b])
            assert np.array_equal(c1.write_masks[b], c2.write_masks[b])
            assert np.all(c1.read_masks[b] & c1.write_masks[b] == 0)
        assert any(
            not np.array_equal(c1.read_masks[b], c3.read_masks[b]) for b in range(2)
        )
        c1.validate()

    def test_protected_bits_never_fault(self):
        m = constant_model(0.5, 0.4)  # extreme rates
        lay = MemoryLayout.sensitivity_banks([3, 1], 8)
        chip = sample_chip(lay, m, 0.6, [(30, 20), (20, 10)], 5)
        for b in range(2):
            mask = np.uint16(lay.protected_word_mask(b))
            assert np.all((chip.read_masks[b] | chip.write_masks[b]) & mask == 0)
        chip.validate()

    def test_no_faults_at_nominal_voltage(self):
        m = FailureModel(
            vnom=0.95,
            curves={
                (SIX, READ): TableCurve([[0.5, 0.25], [0.95, 0.0]]),
                (SIX, WRITE): TableCurve([[0.5, 0.05], [0.95, 0.0]]),
            },
        )
        chip = sample_chip(MemoryLayout.all_six_t(8), m, 0.95, [(50, 40)], 3)
        assert chip.fault_counts() == (0, 0)

    def test_renormalizes_excess_probability(self):
        m = constant_model(0.7, 0.6)
        with pytest.warns(RuntimeWarning, match="renormaliz"):
            chip = sample_chip(MemoryLayout.all_six_t(8), m, 0.6, [(40, 30)], 1)
        # after renormalization every bit faults one way or the other
        union = chip.read_masks[0] | chip.write_masks[0]
        assert np.all(union == 0xFF)
        assert np.all(chip.read_masks[0] & chip.write_masks[0] == 0)

    def test_bank_count_mismatch(self):
        m = constant_model(0.1, 0.05)
        lay = MemoryLayout.sensitivity_banks([1, 2], 8)
        with pytest.raises(ValueError):
            sample_chip(lay, m, 0.6, [(4, 4)], 0)

    def test_empirical_rates_3sigma(self):
        # one big bank, ~1e6 bits; marginal rates must match the categorical draw
        p_r, p_w = 0.01, 0.002
        m = constant_model(p_r, p_w)
        chip = sample_chip(MemoryLayout.all_six_t(8), m, 0.7, [(500, 250)], 11)
        n = 500 * 250 * 8
        reads, writes = chip.fault_counts()
        for count, p in ((reads, p_r), (writes, p_w)):
            sigma = math.sqrt(n * p * (1 - p))
            assert abs(count - n * p) <= 3 * sigma


class TestWriteWeights:
    @pytest.fixture()
    def qnet(self):
        return quantize(init_network(NetworkArch((10, 8, 6)), 31))

    def test_faultless_write_stores_exact_patterns(self, qnet):
        m = constant_model(0.0, 0.0)
        chip = sample_chip(MemoryLayout.all_six_t(8), m, 0.9, qnet.arch.bank_shapes, 1)
        store = write_weights(chip, qnet, 2)
        for b in range(qnet.arch.n_banks):
            assert np.array_equal(store.stored[b], qnet.bank_patterns(b))
            assert np.array_equal(store.read_bank(b), qnet.bank_patterns(b))

    def test_write_faults_confined_to_write_mask(self, qnet):
        m = constant_model(0.0, 0.3)
        chip = sample_chip(MemoryLayout.hybrid_uniform(2, 8), m, 0.6, qnet.arch.bank_shapes, 7)
        store = write_weights(chip, qnet, 8)
        flipped_any = 0
        for b in range(qnet.arch.n_banks):
            diff = store.stored[b] ^ qnet.bank_patterns(b)
            assert np.all(diff & ~chip.write_masks[b] == 0)
            flipped_any += int(np.bitwise_count(diff).sum())
        assert flipped_any > 0  # p=0.3 over ~100 words: to fail is astronomical

    def test_write_fault_bits_are_random_powerup(self, qnet):
        # a write-failing cell keeps its power-up value: across many seeds the
        # stored bit should match the intended one about half the time
        m = constant_model(0.0, 0.5)
        chip = sample_chip(MemoryLayout.all_six_t(8), m, 0.6, qnet.arch.bank_shapes, 3)
        wmask_bits = sum(int(np.bitwise_count(wm).sum()) for wm in chip.write_masks)
        mismatches = 0
        trials = 30
        for s in range(trials):
            store = write_weights(chip, qnet, s)
            for b in range(qnet.arch.n_banks):
                diff = store.stored[b] ^ qnet.bank_patterns(b)
                mismatches += int(np.bitwise_count(diff).sum())
        rate = mismatches / (wmask_bits * trials)
        assert abs(rate - 0.5) < 0.05

    def test_shape_mismatch_rejected(self, qnet):
        m = constant_model(0.0, 0.0)
        other = quantize(init_network(NetworkArch((9, 8, 6)), 1))
        chip = sample_chip(MemoryLayout.all_six_t(8), m, 0.9, other.arch.bank_shapes, 1)
        with pytest.raises(ValueError):
            write_weights(chip, qnet, 0)


class TestFaultyStoreStatic:
    def test_read_applies_static_mask(self):
        qnet = quantize(init_network(NetworkArch((6, 5, 4)), 3))
        m = constant_model(0.2, 0.0)
        chip = sample_chip(MemoryLayout.all_six_t(8), m, 0.6, qnet.arch.bank_shapes, 9)
        store = write_weights(chip, qnet, 10)
        for b in range(2):
            assert np.array_equal(store.read_bank(b), store.stored[b] ^ chip.read_masks[b])
            # static reads are pass-independent
            assert np.array_equal(store.read_bank(b, pass_id=5), store.read_bank(b))

    def test_bank_matmul_matches_decoded_blas(self):
        qnet = quantize(init_network(NetworkArch((6, 5, 4)), 3))
        m = constant_model(0.15, 0.05)
        chip = sample_chip(MemoryLayout.hybrid_uniform(1, 8), m, 0.6, qnet.arch.bank_shapes, 2)
        store = write_weights(chip, qnet, 4)
        rng = np.random.default_rng(0)
        x = rng.uniform(-1, 1, (7, 6))
        w = sign_extend(store.read_bank(0), 8).astype(np.float64)
        assert np.array_equal(store.bank_matmul(0, x), x @ w)

    def test_read_weight_function(self):
        qnet = quantize(init_network(NetworkArch((6, 5, 4)), 3))
        m = constant_model(0.0, 0.0)
        chip = sample_chip(MemoryLayout.all_six_t(8), m, 0.9, qnet.arch.bank_shapes, 1)
        store = write_weights(chip, qnet, 2)
        assert read_weight(store, 0, 2, 3) == int(qnet.bank_patterns(0)[2, 3])


class TestFaultyStoreBernoulli:
    @pytest.fixture()
    def store(self):
        qnet = quantize(init_network(NetworkArch((12, 10, 8)), 13))
        m = constant_model(0.05, 0.0)
        chip = sample_chip(
            MemoryLayout.hybrid_uniform(3, 8), m, 0.6, qnet.arch.bank_shapes, 21
        )
        return write_weights(chip, qnet, 22, AccessMode.PER_ACCESS_BERNOULLI)

    def test_same_pass_same_read(self, store):
        a = store.read_bank(0, pass_id=4)
        b = store.read_bank(0, pass_id=4)
        assert np.array_equal(a, b)

    def test_different_pass_different_read(self, store):
        a = store.read_bank(0, pass_id=4)
        b = store.read_bank(0, pass_id=5)
        assert not np.array_equal(a, b)

    def test_flips_only_on_unprotected_bits(self, store):
        mask = np.uint16(store.chip.layout.protected_word_mask(0))
        for pass_id in range(6):
            diff = store.read_bank(0, pass_id) ^ store.stored[0]
            assert np.all(diff & mask == 0)

    def test_matmul_matches_per_pass_reads(self, store):
        rng = np.random.default_rng(1)
        x = rng.uniform(-1, 1, (5, 12))
        got = store.bank_matmul(0, x, pass_base=3)
        for s in range(5):
            w = sign_extend(store.read_bank(0, pass_id=3 + s), 8).astype(np.float64)
            assert np.allclose(got[s], x[s] @ w, rtol=1e-10, atol=1e-12)

    def test_zero_probability_reads_clean(self):
        qnet = quantize(init_network(NetworkArch((12, 10, 8)), 13))
        m = constant_model(0.0, 0.0)
        chip = sample_chip(
            MemoryLayout.all_six_t(8), m, 0.9, qnet.arch.bank_shapes, 21
        )
        store = write_weights(chip, qnet, 22, AccessMode.PER_ACCESS_BERNOULLI)
        for b in range(2):
            assert np.array_equal(store.read_bank(b, 0), qnet.bank_patterns(b))

    def test_empirical_flip_rate(self):
        qnet = quantize(init_network(NetworkArch((80, 60, 10)), 13))
        p = 0.02
        m = constant_model(p, 0.0)
        chip = sample_chip(MemoryLayout.all_six_t(8), m, 0.6, qnet.arch.bank_shapes, 1)
        store = write_weights(chip, qnet, 2, AccessMode.PER_ACCESS_BERNOULLI)
        n_bits = 80 * 60 * 8
        flips = 0
        passes = 10
        for pass_id in range(passes):
            diff = store.read_bank(0, pass_id) ^ store.stored[0]
            flips += int(np.bitwise_count(diff).sum())
        n = n_bits * passes
        sigma = math.sqrt(n * p * (1 - p))
        assert abs(flips - n * p) <= 4 * sigma


@given(
    word_bits=st.integers(min_value=2, max_value=16),
    data=st.data(),
)
@settings(max_examples=60, deadline=None)
def test_layout_protection_property(word_bits, data):
    """No sampled fault ever lands on a protected position, any layout."""
    n_banks = data.draw(st.integers(1, 3))
    ks = data.draw(
        st.lists(st.integers(0, word_bits), min_size=n_banks, max_size=n_banks)
    )
    lay = MemoryLayout.sensitivity_banks(ks, word_bits)
    m = constant_model(0.4, 0.3)
    shapes = [(4, 3)] * n_banks
    seed = data.draw(st.integers(0, 2**32))
    chip = sample_chip(lay, m, 0.6, shapes, seed)
    chip.validate()
    for b in range(n_banks):
        mask = np.uint16(lay.protected_word_mask(b))
        assert np.all((chip.read_masks[b] | chip.write_masks[b]) & mask == 0)
        assert np.all(chip.read_masks[b] & chip.write_masks[b] == 0)
