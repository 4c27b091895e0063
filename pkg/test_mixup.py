#!/usr/bin/env python3
"""Tests for waveform/label mixup, λ sampling and SNR mixing"""

import numpy as np
from scipy import stats

from exceptions import InsufficientSpeakersError, ShapeError, ZeroEnergyError
from mixup import (
    BetaParams,
    SoftLabel,
    align_interferer,
    interferer_gain,
    batch_mixup_plan,
    energy_normalize,
    measure_snr,
    mix_batch,
    mix_labels,
    mix_waveforms,
    sample_lambda,
    snr_mix,
)
from speech_signal import Waveform


def noise(n, seed, sample_rate=8000):
    return Waveform(np.random.default_rng(seed).standard_normal(n), sample_rate)


def test_mix_waveforms_examples():
    xa = Waveform(np.array([3.0, 4.0]), 8000)
    xb = Waveform(np.array([0.0, 2.0]), 8000)
    np.testing.assert_allclose(mix_waveforms(xa, xb, 1.0).samples, [0.6, 0.8])
    np.testing.assert_allclose(mix_waveforms(xa, xb, 0.0).samples, [0.0, 1.0], atol=1e-15)
    np.testing.assert_allclose(mix_waveforms(xa, xb, 0.5).samples, [0.3, 0.9])


def test_mix_waveforms_norm_bounded_and_symmetric():
    xa, xb = noise(500, 1), noise(500, 2)
    for lam in (0.0, 0.1, 0.37, 0.5, 0.9, 1.0):
        mixed = mix_waveforms(xa, xb, lam)
        assert np.linalg.norm(mixed.samples) <= 1.0 + 1e-12
        swapped = mix_waveforms(xb, xa, 1.0 - lam)
        assert np.allclose(mixed.samples, swapped.samples)


def test_mix_waveforms_errors():
    try:
        mix_waveforms(noise(10, 0), Waveform(np.zeros(10), 8000), 0.5)
        assert False, "expected ZeroEnergyError"
    except ZeroEnergyError:
        pass
    try:
        mix_waveforms(noise(10, 0), noise(12, 1), 0.5)
        assert False, "expected ShapeError"
    except ShapeError:
        pass


def test_energy_normalize():
    w = energy_normalize(Waveform(np.array([3.0, 4.0]), 8000))
    assert np.allclose(w.samples, [0.6, 0.8])


def test_mix_labels():
    label = mix_labels(2, 5, 0.7)
    assert label.weights == {2: 0.7, 5: 1.0 - 0.7}
    assert label.as_pair() == (2, 5, 0.7)

    assert mix_labels(3, 3, 0.4).weights == {3: 1.0}
    assert mix_labels(2, 5, 1.0).weights == {2: 1.0}
    assert mix_labels(2, 5, 0.0).weights == {5: 1.0}
    assert SoftLabel.one_hot(4).as_pair() == (4, 4, 1.0)


def test_soft_label_validation():
    for weights in ({}, {1: 0.5, 2: 0.6}, {1: 0.2, 2: 0.3, 3: 0.5}):
        try:
            SoftLabel(weights)
            assert False, f"expected ValueError for {weights}"
        except ValueError:
            pass


def test_beta_params():
    params = BetaParams(0.2, 0.2)
    assert params.mean == 0.5
    assert abs(params.variance - 0.25 / 1.4) < 1e-12
    try:
        BetaParams(0.0, 1.0)
        assert False, "expected ValueError"
    except ValueError:
        pass


def draw_many(params, n, seed):
    rng = np.random.default_rng(seed)
    return np.array([sample_lambda(params, rng) for _ in range(n)])


def test_sample_lambda_distribution():
    params = BetaParams(0.2, 0.2)
    draws = draw_many(params, 100_000, 123)
    assert draws.min() >= 0.0 and draws.max() <= 1.0
    assert abs(draws.mean() - params.mean) < 0.01
    assert abs(draws.var() - params.variance) < 0.005
    # U-shaped: little mass in the middle
    assert np.mean((draws > 0.4) & (draws < 0.6)) < 0.1
    assert stats.kstest(draws, "beta", args=(0.2, 0.2)).pvalue > 0.01


def test_sample_lambda_uniform_case():
    draws = draw_many(BetaParams(1.0, 1.0), 100_000, 321)
    assert abs(draws.mean() - 0.5) < 0.01
    assert stats.kstest(draws, "uniform").pvalue > 0.01


def test_sample_lambda_seeded():
    params = BetaParams(1.0, 1.0)
    assert sample_lambda(params, 7) == sample_lambda(params, 7)


def test_batch_mixup_plan():
    params = BetaParams()
    for seed in range(20):
        plan = batch_mixup_plan(6, params, seed)
        assert len(plan) == 6
        for index, draw in enumerate(plan):
            assert draw.partner_index != index
            assert 0 <= draw.partner_index < 6
            assert 0.0 <= draw.lam <= 1.0
    assert batch_mixup_plan(6, params, 3) == batch_mixup_plan(6, params, 3)


def test_batch_mixup_plan_needs_two():
    try:
        batch_mixup_plan(1, BetaParams(), 0)
        assert False, "expected InsufficientSpeakersError"
    except InsufficientSpeakersError:
        pass


def test_mix_batch_matches_mix_waveforms():
    rng = np.random.default_rng(22)
    samples = rng.standard_normal((6, 300))
    plan = batch_mixup_plan(6, BetaParams(0.4, 0.4), seed=3)
    mixed = mix_batch(samples, plan)
    for row, draw in enumerate(plan):
        expected = mix_waveforms(
            Waveform(samples[row], 8000), Waveform(samples[draw.partner_index], 8000), draw.lam
        )
        assert np.allclose(mixed[row], expected.samples, atol=1e-12)
    silent_row = np.vstack([samples[:5], np.zeros(300)])
    for bad, error in ((samples[:5], ShapeError), (silent_row, ZeroEnergyError)):
        try:
            mix_batch(bad, plan)
            assert False, f"expected {error.__name__}"
        except error:
            pass


def test_snr_mix_hits_requested_snr():
    rng = np.random.default_rng(10)
    for pair in range(100):
        target = noise(int(rng.integers(800, 4000)), 2 * pair)
        interferer = noise(int(rng.integers(300, 4000)), 2 * pair + 1)
        for snr_db in (0.0, 2.0, 5.0, 10.0):
            mixture = snr_mix(target, interferer, snr_db)
            assert len(mixture) == len(target)
            assert abs(measure_snr(target, mixture) - snr_db) < 1e-6


def test_snr_mix_zero_db_equal_power():
    target = Waveform(np.array([1.0, -1.0, 1.0, -1.0]), 8000)
    interferer = Waveform(np.array([2.0, 2.0, 2.0, 2.0]), 8000)
    mixture = snr_mix(target, interferer, 0.0)
    assert np.allclose(mixture.samples, [2.0, 0.0, 2.0, 0.0])


def test_mix_orthogonal_units():
    xa = Waveform(np.array([1.0, 0.0]), 8000)
    xb = Waveform(np.array([0.0, 1.0]), 8000)
    assert np.allclose(mix_waveforms(xa, xb, 0.5).samples, [0.5, 0.5])


def test_batch_of_two_swaps():
    plan = batch_mixup_plan(2, BetaParams(), 5)
    assert [draw.partner_index for draw in plan] == [1, 0]


def test_interferer_gain_and_tiling():
    assert abs(interferer_gain(1.0, 4.0, 0.0) - 0.5) < 1e-12
    assert abs(interferer_gain(2.0, 2.0, 0.0) - 1.0) < 1e-12
    half = Waveform(np.array([1.0, 2.0, 3.0]), 8000)
    assert np.array_equal(align_interferer(half, 6), [1.0, 2.0, 3.0, 1.0, 2.0, 3.0])


def test_snr_mix_silent_interferer():
    try:
        snr_mix(noise(100, 0), Waveform(np.zeros(50), 8000), 0.0)
        assert False, "expected ZeroEnergyError"
    except ZeroEnergyError:
        pass


if __name__ == "__main__":
    tests = [(name, fn) for name, fn in list(globals().items()) if name.startswith("test_")]
    for name, fn in tests:
        fn()
        print(f"✓ {name}")
    print(f"\nAll {len(tests)} mixup tests passed")
