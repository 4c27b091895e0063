#!/usr/bin/env python3
"""Tests for the extractor, its gradients, the optimizer and the trainer"""

import os
import tempfile

import numpy as np

from embedding_model import (
    STD_EPSILON,
    ClrSchedule,
    EmbeddingModel,
    MixupAblation,
    ModelTrainer,
    OptimizerState,
    TrainPhaseConfig,
    adam_step,
    backward,
    clr_lr,
    embed_waveform,
    embed_waveforms,
    forward,
    forward_batch,
    init_model,
    load_checkpoint,
    save_checkpoint,
)
from exceptions import CheckpointError, ShapeError, TrainingDivergenceError
from margin_loss import MarginConfig, batch_loss
from mixup import SoftLabel
from speech_signal import SpeakerProfile, Waveform, extract_features, mean_normalize


def small_model(seed=0, n_bins=6, hidden=8, dim=4, n_speakers=5):
    model = init_model(n_bins, hidden, dim, n_speakers, seed)
    rng = np.random.default_rng(seed + 100)
    model.frame_b = 0.1 * rng.standard_normal(hidden)
    model.proj_b = 0.1 * rng.standard_normal(dim)
    return model


def two_speaker_pool():
    return [
        SpeakerProfile(0, np.array([250.0, 600.0, 900.0]), np.array([1.0, 0.8, 0.6])),
        SpeakerProfile(1, np.array([1800.0, 2600.0, 3300.0]), np.array([1.0, 0.7, 0.9])),
    ]


def tiny_trainer(seed=0, **overrides):
    settings = dict(
        n_bins=12,
        hidden_dim=16,
        embedding_dim=8,
        batch_size=8,
        utterances_per_speaker=3,
        utterance_s=1.0,
    )
    settings.update(overrides)
    return ModelTrainer(two_speaker_pool(), seed=seed, **settings)


def test_zero_input_gives_projection_bias():
    model = init_model(6, 8, 4, 3, seed=0)
    model.proj_b = np.array([0.5, -1.0, 2.0, 0.0])
    assert np.allclose(forward(model, np.zeros((10, 6))), model.proj_b)


def test_constant_frames_have_zero_std():
    model = small_model()
    frames = np.tile(np.random.default_rng(1).standard_normal(6), (7, 1))
    hidden = np.tanh(frames[0] @ model.frame_W + model.frame_b)
    expected = np.concatenate([hidden, np.zeros(8)]) @ model.proj_W + model.proj_b
    assert np.allclose(forward(model, frames), expected)


def test_forward_matches_step_by_step():
    model = small_model(seed=2)
    frames = np.random.default_rng(3).standard_normal((5, 6))
    hidden = np.zeros((5, 8))
    for t in range(5):
        hidden[t] = np.tanh(frames[t] @ model.frame_W + model.frame_b)
    mean = hidden.sum(axis=0) / 5
    std = np.sqrt(((hidden - mean) ** 2).sum(axis=0) / 5 + STD_EPSILON) - np.sqrt(STD_EPSILON)
    expected = np.concatenate([mean, std]) @ model.proj_W + model.proj_b
    out = forward(model, frames)
    assert np.all(np.isfinite(out))
    assert np.allclose(out, expected, atol=1e-12)


def test_forward_batch_matches_forward():
    model = small_model()
    stack = np.random.default_rng(4).standard_normal((3, 9, 6))
    batch = forward_batch(model, stack)
    for row, frames in zip(batch, stack):
        assert np.allclose(row, forward(model, frames))


def test_feature_bins_must_match():
    try:
        forward(small_model(), np.zeros((4, 5)))
        assert False, "expected ShapeError"
    except ShapeError:
        pass


def test_backward_zero_upstream():
    model = small_model()
    grads = backward(model, np.random.default_rng(0).standard_normal((5, 6)), np.zeros(4))
    assert all(np.all(g == 0) for g in grads.values())


def test_single_frame_std_branch_has_no_gradient():
    model = small_model()
    frames = np.random.default_rng(5).standard_normal((1, 6))
    upstream = np.random.default_rng(6).standard_normal(4)
    grads = backward(model, frames, upstream)
    # Only the mean half of the pooled vector reaches frame_W
    mean_only = EmbeddingModel(
        model.frame_W,
        model.frame_b,
        np.vstack([model.proj_W[:8], np.zeros((8, 4))]),
        model.proj_b,
        model.centers,
    )
    reference = backward(mean_only, frames, upstream)
    assert np.allclose(grads["frame_W"], reference["frame_W"])
    assert np.allclose(grads["frame_b"], reference["frame_b"])


def test_backward_matches_finite_differences():
    model = small_model(seed=7)
    rng = np.random.default_rng(8)
    stack = rng.standard_normal((2, 5, 6))
    upstream = rng.standard_normal((2, 4))
    grads = backward(model, stack, upstream)

    def objective(params):
        return float(np.sum(upstream * forward_batch(EmbeddingModel.from_parameters(params), stack)))

    h = 1e-6
    for name in ("frame_W", "frame_b", "proj_W", "proj_b"):
        params = {k: v.copy() for k, v in model.parameters().items()}
        numeric = np.zeros_like(params[name])
        for index in np.ndindex(numeric.shape):
            original = params[name][index]
            params[name][index] = original + h
            plus = objective(params)
            params[name][index] = original - h
            minus = objective(params)
            params[name][index] = original
            numeric[index] = (plus - minus) / (2 * h)
        error = np.max(np.abs(grads[name] - numeric)) / max(np.max(np.abs(numeric)), 1e-8)
        assert error < 1e-5, f"{name}: relative error {error}"


def test_loss_gradient_through_model():
    model = small_model(seed=9, n_bins=6, hidden=8, dim=4, n_speakers=5)
    stack = np.random.default_rng(10).standard_normal((3, 6, 6))
    labels = [SoftLabel({0: 0.7, 2: 0.3}), SoftLabel.one_hot(4), SoftLabel({1: 0.5, 3: 0.5})]
    cfg = MarginConfig(m=0.2, s=5.0)
    loss = batch_loss(forward_batch(model, stack), model.centers, labels, cfg)
    grads = backward(model, stack, loss.grad_e)
    grads["centers"] = loss.grad_W

    def objective(params):
        m = EmbeddingModel.from_parameters(params)
        return batch_loss(forward_batch(m, stack), m.centers, labels, cfg).value

    h = 1e-6
    for name in ("frame_W", "frame_b", "proj_W", "proj_b", "centers"):
        params = {k: v.copy() for k, v in model.parameters().items()}
        numeric = np.zeros_like(params[name])
        for index in np.ndindex(numeric.shape):
            original = params[name][index]
            params[name][index] = original + h
            plus = objective(params)
            params[name][index] = original - h
            minus = objective(params)
            params[name][index] = original
            numeric[index] = (plus - minus) / (2 * h)
        error = np.max(np.abs(grads[name] - numeric)) / max(np.max(np.abs(numeric)), 1e-8)
        assert error < 1e-5, f"{name}: relative error {error}"


def test_embed_waveforms_matches_single():
    model = init_model(12, 16, 8, 2, seed=0)
    rng = np.random.default_rng(11)
    waveforms = [Waveform(rng.standard_normal(n) * 0.1, 8000) for n in (2400, 2400, 3200)]
    batch = embed_waveforms(model, waveforms)
    for row, w in zip(batch, waveforms):
        assert np.allclose(row, embed_waveform(model, w))


def test_adam_fixed_point():
    params = {"w": np.array([1.0, -2.0])}
    state = OptimizerState.for_parameters(params, weight_decay=0.0)
    new_params, new_state = adam_step(state, params, {"w": np.zeros(2)}, lr=0.1)
    assert np.array_equal(new_params["w"], params["w"])
    assert new_state.step == 1


def test_adam_first_step_magnitude():
    params = {"w": np.array([0.0])}
    state = OptimizerState.for_parameters(params, weight_decay=0.0)
    new_params, _ = adam_step(state, params, {"w": np.array([1.0])}, lr=0.1)
    assert abs(new_params["w"][0] + 0.1) < 1e-6


def test_adam_decoupled_decay():
    params = {"w": np.array([3.0])}
    state = OptimizerState.for_parameters(params, weight_decay=2e-4)
    new_params, _ = adam_step(state, params, {"w": np.array([0.0])}, lr=0.01)
    assert abs(new_params["w"][0] - 3.0 * (1 - 0.01 * 2e-4)) < 1e-12


def test_adam_rejects_bad_gradients():
    params = {"w": np.ones(2)}
    state = OptimizerState.for_parameters(params)
    for grads, error in (
        ({"w": np.ones(3)}, ShapeError),
        ({"v": np.ones(2)}, ShapeError),
        ({"w": np.array([1.0, np.nan])}, TrainingDivergenceError),
    ):
        try:
            adam_step(state, params, grads, lr=0.1)
            assert False, f"expected {error.__name__}"
        except error:
            pass


def test_clr_schedule():
    schedule = ClrSchedule(lr_min=1e-8, lr_max=1e-3, cycle_len=100)
    assert clr_lr(schedule, 0) == 1e-8
    assert abs(clr_lr(schedule, 50) - 1e-3) < 1e-15
    assert abs(clr_lr(schedule, 150) - ((1e-3 - 1e-8) / 2 + 1e-8)) < 1e-15
    assert abs(clr_lr(schedule, 250) - ((1e-3 - 1e-8) / 4 + 1e-8)) < 1e-15

    flat = ClrSchedule(lr_min=1e-8, lr_max=1e-3, cycle_len=100, mode="triangular")
    assert abs(clr_lr(flat, 150) - 1e-3) < 1e-15


def test_ablation_labels():
    assert MixupAblation().label == "full"
    assert MixupAblation(True, False).label == "A"
    assert MixupAblation(False, True).label == "B"
    assert MixupAblation(True, True).label == "C"


def test_zero_steps_keeps_initial_model():
    trainer = tiny_trainer()
    initial = trainer.model.copy()
    model = trainer.train([TrainPhaseConfig(steps=0, crop_s=0.5)])
    for name, value in initial.parameters().items():
        assert np.array_equal(model.parameters()[name], value)
    assert trainer.loss_history.empty


def test_training_is_deterministic():
    phases = [
        TrainPhaseConfig(crop_s=0.5, steps=4, cycle_len=4, lr_max=1e-2),
        TrainPhaseConfig(
            name="finetune", margin=0.5, crop_s=1.0, augment=False, steps=3, mixup=True
        ),
    ]
    first = tiny_trainer(seed=3).train(phases)
    second = tiny_trainer(seed=3).train(phases)
    for name, value in first.parameters().items():
        assert np.array_equal(second.parameters()[name], value)


def test_clean_batch_rows_are_normalized_training_utterances():
    trainer = tiny_trainer(seed=4)
    features, labels = trainer._make_batch(
        0, 0, TrainPhaseConfig(crop_s=1.0, augment=False, steps=1)
    )
    assert features.shape[0] == 8
    assert np.allclose(features.mean(axis=1), 0.0, atol=1e-12)
    for row, label in zip(features, labels):
        (speaker,) = label.weights
        candidates = [
            mean_normalize(extract_features(Waveform(utterance, 8000), n_bins=12)).frames
            for utterance in trainer.utterances[speaker]
        ]
        assert any(np.allclose(row, candidate) for candidate in candidates)


def test_mixup_batch_labels_and_masking():
    trainer = tiny_trainer(seed=5)
    phase = TrainPhaseConfig(crop_s=0.5, steps=1, mixup=True)
    features, labels = trainer._make_batch(0, 0, phase)
    assert np.all(np.isfinite(features))
    assert np.allclose(features.mean(axis=1), 0.0, atol=1e-12)
    assert all(abs(sum(label.weights.values()) - 1.0) < 1e-12 for label in labels)
    again, again_labels = trainer._make_batch(0, 0, phase)
    assert np.array_equal(features, again)
    assert [l.weights for l in labels] == [l.weights for l in again_labels]


def test_training_reduces_loss():
    trainer = tiny_trainer(seed=1)
    trainer.train(
        [
            TrainPhaseConfig(
                crop_s=0.5, augment=False, lr_max=1e-2, lr_min=1e-5, cycle_len=200, steps=200
            )
        ]
    )
    losses = trainer.loss_history["loss"].to_numpy()
    assert len(losses) == 200
    assert losses[-20:].mean() < losses[:20].mean()
    assert 0.0 <= trainer.training_accuracy() <= 1.0


def test_mixup_ablation_c_trains():
    trainer = tiny_trainer(seed=2)
    trainer.train(
        [
            TrainPhaseConfig(
                crop_s=0.5,
                steps=10,
                mixup=True,
                ablation=MixupAblation(True, True),
            )
        ]
    )
    assert np.all(np.isfinite(trainer.loss_history["loss"]))


def test_checkpoint_round_trip():
    model = small_model(seed=12)
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "model.npz")
        save_checkpoint(model, path)
        loaded = load_checkpoint(path)
    for name, value in model.parameters().items():
        assert np.array_equal(loaded.parameters()[name], value)


def test_checkpoint_rejects_other_files():
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "other.npz")
        np.savez(path, version=np.array("something-else"), frame_W=np.zeros((2, 2)))
        try:
            load_checkpoint(path)
            assert False, "expected CheckpointError"
        except CheckpointError:
            pass


if __name__ == "__main__":
    tests = [(name, fn) for name, fn in list(globals().items()) if name.startswith("test_")]
    for name, fn in tests:
        fn()
        print(f"✓ {name}")
    print(f"\nAll {len(tests)} embedding model tests passed")
