#!/usr/bin/env python3
"""Tests for the mixed-margin AAM-softmax loss and its gradients"""

import numpy as np
from scipy.special import logsumexp

from exceptions import DegenerateInputError
from margin_loss import (
    MarginConfig,
    aam_softmax_loss,
    apply_mixed_margin,
    batch_loss,
    cosines_and_angles,
    margin_mixup_loss,
    predict_speakers,
)
from mixup import SoftLabel, mix_labels


def naive_loss(e, W, a, b, lam, m, s):
    """Element-by-element evaluation with explicit angles"""
    n_classes = W.shape[1]
    logits = []
    for j in range(n_classes):
        w = W[:, j]
        cos = np.dot(e, w) / (np.linalg.norm(e) * np.linalg.norm(w))
        theta = np.arccos(np.clip(cos, -1 + 1e-7, 1 - 1e-7))
        if j == a:
            theta += lam * m
        if j == b:
            theta += (1 - lam) * m
        logits.append(s * np.cos(theta))
    logits = np.array(logits)
    log_probs = logits - np.log(np.sum(np.exp(logits - logits.max()))) - logits.max()
    return -(lam * log_probs[a] + (1 - lam) * log_probs[b])


def numeric_gradient(fn, x, h=1e-6):
    grad = np.zeros_like(x)
    for index in np.ndindex(x.shape):
        plus, minus = x.copy(), x.copy()
        plus[index] += h
        minus[index] -= h
        grad[index] = (fn(plus) - fn(minus)) / (2 * h)
    return grad


def relative_error(analytic, numeric):
    return np.max(np.abs(analytic - numeric)) / max(np.max(np.abs(numeric)), 1e-8)


def test_cosines_and_angles():
    cos, theta = cosines_and_angles(np.array([1.0, 0.0]), np.array([[1.0, 0.0, 1.0], [1.0, 1.0, 0.0]]))
    assert abs(cos[0] - 1 / np.sqrt(2)) < 1e-12
    assert abs(theta[0] - np.pi / 4) < 1e-9
    assert abs(theta[1] - np.pi / 2) < 1e-9
    assert abs(theta[2]) < 1e-3


def test_apply_mixed_margin():
    theta = np.array([0.5, 1.0, 1.5])
    assert np.allclose(apply_mixed_margin(theta, 0, 1, 1.0, 0.2), [0.7, 1.0, 1.5])
    assert np.allclose(apply_mixed_margin(theta, 0, 1, 0.5, 0.2), [0.6, 1.1, 1.5])
    assert np.allclose(apply_mixed_margin(theta, 2, 0, 0.3, 0.0), theta)


def test_scalar_example():
    out = margin_mixup_loss(
        np.array([1.0, 0.0]), np.eye(2), 0, 1, 1.0, MarginConfig(m=0.0, s=1.0)
    )
    assert abs(out.value - np.log(1 + np.exp(-1))) < 1e-6


def test_matches_naive_evaluation():
    rng = np.random.default_rng(0)
    cfg = MarginConfig(m=0.2, s=30.0)
    for _ in range(50):
        e = rng.standard_normal(4)
        W = rng.standard_normal((4, 5))
        a, b = rng.integers(0, 5, size=2)
        lam = rng.uniform()
        out = margin_mixup_loss(e, W, int(a), int(b), lam, cfg)
        assert abs(out.value - naive_loss(e, W, a, b, lam, cfg.m, cfg.s)) < 1e-9


def reference_aam(e, W, y, m, s):
    """Plain AAM-softmax cross-entropy: target logit s·cos(θ_y + m), others s·cos θ_j"""
    cos = (W.T @ e) / (np.linalg.norm(W, axis=0) * np.linalg.norm(e))
    cos = np.clip(cos, -1 + 1e-7, 1 - 1e-7)
    logits = s * cos
    logits[y] = s * np.cos(np.arccos(cos[y]) + m)
    return float(logsumexp(logits) - logits[y])


def test_lambda_one_is_standard_aam_softmax():
    rng = np.random.default_rng(1)
    for _ in range(100):
        dim, n_classes = int(rng.integers(3, 9)), int(rng.integers(2, 11))
        e, W = rng.standard_normal(dim), rng.standard_normal((dim, n_classes))
        y, b = (int(v) for v in rng.integers(0, n_classes, size=2))
        cfg = MarginConfig(m=float(rng.choice([0.0, 0.2, 0.5])), s=float(rng.choice([10.0, 30.0])))
        expected = reference_aam(e, W, y, cfg.m, cfg.s)
        tolerance = 1e-12 * max(1.0, abs(expected))
        assert abs(margin_mixup_loss(e, W, y, b, 1.0, cfg).value - expected) <= tolerance
        assert abs(aam_softmax_loss(e, W, y, cfg).value - expected) <= tolerance


def test_lambda_one_ignores_partner():
    rng = np.random.default_rng(11)
    cfg = MarginConfig()
    e, W = rng.standard_normal(6), rng.standard_normal((6, 4))
    aam = aam_softmax_loss(e, W, 2, cfg)
    for b in range(4):
        mixed = margin_mixup_loss(e, W, 2, b, 1.0, cfg)
        assert abs(mixed.value - aam.value) < 1e-12
        assert np.allclose(mixed.grad_e, aam.grad_e, atol=1e-12)


def test_symmetric_in_speaker_swap():
    rng = np.random.default_rng(2)
    cfg = MarginConfig()
    e, W = rng.standard_normal(4), rng.standard_normal((4, 5))
    first = margin_mixup_loss(e, W, 1, 3, 0.3, cfg)
    second = margin_mixup_loss(e, W, 3, 1, 0.7, cfg)
    assert abs(first.value - second.value) < 1e-12


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(3)
    checked = same_speaker = 0
    while checked < 60:
        dim, n_classes = int(rng.integers(2, 9)), int(rng.integers(2, 11))
        e, W = rng.standard_normal(dim), rng.standard_normal((dim, n_classes))
        a = int(rng.integers(n_classes))
        b = a if checked % 4 == 0 else int(rng.integers(n_classes))
        lam = float(rng.choice([0.0, 0.3, 1.0]))
        cfg = MarginConfig(m=float(rng.choice([0.0, 0.2])), s=float(rng.choice([10.0, 30.0])))

        out = margin_mixup_loss(e, W, a, b, lam, cfg)
        if out.value < 1e-4:
            # gradients this small drown in finite-difference rounding
            continue
        grad_e = numeric_gradient(lambda x: margin_mixup_loss(x, W, a, b, lam, cfg).value, e)
        grad_W = numeric_gradient(lambda x: margin_mixup_loss(e, x, a, b, lam, cfg).value, W)
        assert relative_error(out.grad_e, grad_e) < 1e-5, (dim, n_classes, a, b, lam, cfg)
        assert relative_error(out.grad_W, grad_W) < 1e-5, (dim, n_classes, a, b, lam, cfg)
        checked += 1
        same_speaker += a == b
    assert same_speaker >= 15


def test_embedding_gradient_orthogonal_to_embedding():
    # the loss only depends on the direction of e
    rng = np.random.default_rng(4)
    e, W = rng.standard_normal(5), rng.standard_normal((5, 3))
    out = margin_mixup_loss(e, W, 0, 1, 0.6, MarginConfig())
    assert abs(np.dot(out.grad_e, e)) < 1e-9


def test_loss_grows_with_margin():
    rng = np.random.default_rng(5)
    W = rng.standard_normal((4, 6))
    e = W[:, 2] + 0.3 * rng.standard_normal(4)
    values = [
        aam_softmax_loss(e, W, 2, MarginConfig(m=m, s=30.0)).value
        for m in np.linspace(0.0, 0.5, 11)
    ]
    assert np.all(np.diff(values) >= -1e-12)


def test_batch_loss():
    rng = np.random.default_rng(6)
    cfg = MarginConfig()
    W = rng.standard_normal((4, 5))
    embeddings = rng.standard_normal((3, 4))
    labels = [mix_labels(0, 3, 0.8), SoftLabel.one_hot(1), mix_labels(4, 2, 0.25)]

    single = batch_loss(embeddings[:1], W, labels[:1], cfg)
    alone = margin_mixup_loss(embeddings[0], W, 0, 3, 0.8, cfg)
    assert abs(single.value - alone.value) < 1e-12

    doubled = batch_loss(np.repeat(embeddings[:1], 2, axis=0), W, labels[:1] * 2, cfg)
    assert abs(doubled.value - single.value) < 1e-10

    full = batch_loss(embeddings, W, labels, cfg)
    per_element = [
        margin_mixup_loss(e, W, *label.as_pair(), cfg).value
        for e, label in zip(embeddings, labels)
    ]
    assert abs(full.value - np.mean(per_element)) < 1e-12
    assert full.grad_e.shape == (3, 4)
    assert full.grad_W.shape == W.shape


def test_batch_loss_matches_per_element_gradients():
    rng = np.random.default_rng(12)
    for _ in range(20):
        dim, n_classes, size = int(rng.integers(2, 9)), int(rng.integers(2, 11)), int(rng.integers(1, 9))
        W = rng.standard_normal((dim, n_classes))
        embeddings = rng.standard_normal((size, dim))
        # includes same-speaker pairs, which collapse to one-hot labels
        labels = [
            mix_labels(*(int(v) for v in rng.integers(0, n_classes, size=2)), float(rng.uniform()))
            for _ in range(size)
        ]
        for fix_margin, fix_loss in ((False, False), (True, False), (False, True), (True, True)):
            out = batch_loss(embeddings, W, labels, MarginConfig(), fix_margin, fix_loss)
            singles = [
                margin_mixup_loss(
                    e,
                    W,
                    *label.as_pair(),
                    MarginConfig(),
                    margin_lambda=1.0 if fix_margin else None,
                    loss_lambda=1.0 if fix_loss else None,
                )
                for e, label in zip(embeddings, labels)
            ]
            assert abs(out.value - np.mean([s.value for s in singles])) < 1e-10
            np.testing.assert_allclose(
                out.grad_e, np.array([s.grad_e for s in singles]) / size, atol=1e-12
            )
            np.testing.assert_allclose(
                out.grad_W, sum(s.grad_W for s in singles) / size, atol=1e-12
            )


def test_lambda_overrides():
    rng = np.random.default_rng(7)
    cfg = MarginConfig()
    e, W = rng.standard_normal(4), rng.standard_normal((4, 5))
    label = [mix_labels(1, 4, 0.4)]
    both = batch_loss([e], W, label, cfg, fix_margin_lambda=True, fix_loss_lambda=True)
    assert abs(both.value - aam_softmax_loss(e, W, 1, cfg).value) < 1e-10

    margin_only = batch_loss([e], W, label, cfg, fix_margin_lambda=True)
    expected = margin_mixup_loss(e, W, 1, 4, 0.4, cfg, margin_lambda=1.0)
    assert abs(margin_only.value - expected.value) < 1e-10
    assert abs(margin_only.value - both.value) > 1e-6


def test_loss_lambda_override_keeps_split_margin():
    rng = np.random.default_rng(8)
    cfg = MarginConfig(m=0.3, s=30.0)
    e, W = rng.standard_normal(4), rng.standard_normal((4, 5))
    label = [mix_labels(1, 4, 0.4)]
    loss_only = batch_loss([e], W, label, cfg, fix_loss_lambda=True)

    # one-hot target on the primary speaker, margin still split 0.4 / 0.6
    cos, theta = cosines_and_angles(e, W)
    logits = cfg.s * np.cos(apply_mixed_margin(theta, 1, 4, 0.4, cfg.m))
    assert abs(loss_only.value - (logsumexp(logits) - logits[1])) < 1e-10

    expected = margin_mixup_loss(e, W, 1, 4, 0.4, cfg, loss_lambda=1.0)
    assert abs(loss_only.value - expected.value) < 1e-10
    assert abs(loss_only.value - aam_softmax_loss(e, W, 1, cfg).value) > 1e-6
    assert abs(loss_only.value - batch_loss([e], W, label, cfg).value) > 1e-6


def test_degenerate_inputs():
    cfg = MarginConfig()
    for e, W in (
        (np.zeros(3), np.ones((3, 2))),
        (np.ones(3), np.array([[1.0, 0.0], [1.0, 0.0], [1.0, 0.0]])),
    ):
        try:
            margin_mixup_loss(e, W, 0, 1, 0.5, cfg)
            assert False, "expected DegenerateInputError"
        except DegenerateInputError:
            pass


def test_predict_speakers():
    W = np.eye(3)
    embeddings = np.array([[0.1, 2.0, 0.0], [-1.0, 0.0, 0.5], [3.0, 0.2, 0.1]])
    assert predict_speakers(embeddings, W).tolist() == [1, 2, 0]


if __name__ == "__main__":
    tests = [(name, fn) for name, fn in list(globals().items()) if name.startswith("test_")]
    for name, fn in tests:
        fn()
        print(f"✓ {name}")
    print(f"\nAll {len(tests)} margin loss tests passed")
