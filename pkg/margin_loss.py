#!/usr/bin/env python3
"""
Margin Loss Module for the Margin-Mixup Speaker Verification Toolkit

Additive angular margin (AAM) softmax with the margin split between the two
speakers of a mixed utterance, and its exact gradients with respect to the
embedding and the class centers.

Loss for one embedding e with speakers a, b and weight λ:

    θ̂_a = θ_a + λm,  θ̂_b = θ_b + (1 − λ)m,  θ̂_j = θ_j otherwise
    L = −[λ log softmax_a + (1 − λ) log softmax_b],  softmax over s·cos(θ̂)

Standard AAM-softmax is the λ = 1 case.
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp, softmax

from exceptions import DegenerateInputError, ShapeError
from mixup import SoftLabel

# Cosines are clamped this far inside [-1, 1] before arccos
COSINE_CLAMP = 1e-7

DEFAULT_MARGIN = 0.2
DEFAULT_SCALE = 30.0


@dataclass(frozen=True)
class MarginConfig:
    """AAM margin penalty m (radians) and scale s"""

    m: float = DEFAULT_MARGIN
    s: float = DEFAULT_SCALE

    def __post_init__(self):
        if self.m < 0:
            raise ValueError(f"Margin must be non-negative, got {self.m}")
        if self.s <= 0:
            raise ValueError(f"Scale must be positive, got {self.s}")


@dataclass(frozen=True, eq=False)
class LossOutput:
    """Loss value with gradients w.r.t. the embedding(s) and the class centers"""

    value: float
    grad_e: np.ndarray
    grad_W: np.ndarray


def validate_centers(W: np.ndarray) -> np.ndarray:
    """Check a D x N class-center matrix: finite, no zero column"""
    W = np.asarray(W, dtype=float)
    if W.ndim != 2:
        raise ShapeError(f"Class centers must be a D x N matrix, got shape {W.shape}")
    if not np.all(np.isfinite(W)):
        raise DegenerateInputError("Class centers contain non-finite entries")
    if np.any(np.linalg.norm(W, axis=0) == 0.0):
        raise DegenerateInputError("Class centers contain a zero column")
    return W


def _unit_vectors(e: np.ndarray, W: np.ndarray):
    e = np.asarray(e, dtype=float)
    W = np.asarray(W, dtype=float)
    if e.ndim != 1 or W.ndim != 2 or W.shape[0] != e.size:
        raise ShapeError(
            f"Embedding of size {e.size} does not match class centers of shape {W.shape}"
        )
    e_norm = float(np.linalg.norm(e))
    w_norms = np.linalg.norm(W, axis=0)
    if e_norm == 0.0:
        raise DegenerateInputError("Embedding has zero norm")
    if np.any(w_norms == 0.0):
        raise DegenerateInputError("Class centers contain a zero column")
    return e / e_norm, e_norm, W / w_norms, w_norms


def _clamped_cosines(u: np.ndarray, V: np.ndarray):
    # u is one unit embedding (D) or a B x D stack
    raw = u @ V
    cos = np.clip(raw, -1.0 + COSINE_CLAMP, 1.0 - COSINE_CLAMP)
    return cos, cos == raw


def cosines_and_angles(e: np.ndarray, W: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Cosine and angle between an embedding and every class center

    Returns:
        tuple: (cos, theta), both length N; cos clamped to [−1 + 1e-7, 1 − 1e-7]
    """
    u, _, V, _ = _unit_vectors(e, W)
    cos, _ = _clamped_cosines(u, V)
    return cos, np.arccos(cos)


def margin_shifts(
    n_classes: int, a: int, b: int, lam: float, m: float
) -> np.ndarray:
    """Per-class angular shift δ: λm on a, (1 − λ)m on b (summed when a == b)"""
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"λ must lie in [0, 1], got {lam}")
    if not (0 <= a < n_classes and 0 <= b < n_classes):
        raise ValueError(f"Class indices ({a}, {b}) outside [0, {n_classes})")
    shifts = np.zeros(n_classes)
    shifts[a] += lam * m
    shifts[b] += (1.0 - lam) * m
    return shifts


def apply_mixed_margin(
    theta: np.ndarray, a: int, b: int, lam: float, m: float
) -> np.ndarray:
    """Add the λ-weighted margin to the angles of speakers a and b"""
    theta = np.asarray(theta, dtype=float)
    return theta + margin_shifts(theta.size, a, b, lam, m)


def margin_mixup_loss(
    e: np.ndarray,
    W: np.ndarray,
    a: int,
    b: int,
    lam: float,
    cfg: MarginConfig,
    margin_lambda: Optional[float] = None,
    loss_lambda: Optional[float] = None,
) -> LossOutput:
    """
    Mixed-margin AAM-softmax loss with exact gradients

    Args:
        e: Length-D embedding
        W: D x N class centers (normalized inside the cosine only)
        a: Primary speaker
        b: Partner speaker
        lam: Interpolation weight of a
        cfg: Margin and scale
        margin_lambda: Override of λ inside the margin split (ablation A/C)
        loss_lambda: Override of λ inside the log-likelihood combination (ablation B/C)

    Returns:
        LossOutput: value, grad_e (length D), grad_W (D x N)
    """
    lam_margin = lam if margin_lambda is None else margin_lambda
    lam_loss = lam if loss_lambda is None else loss_lambda
    if not 0.0 <= lam_loss <= 1.0:
        raise ValueError(f"λ must lie in [0, 1], got {lam_loss}")

    u, e_norm, V, w_norms = _unit_vectors(e, W)
    cos, inside = _clamped_cosines(u, V)
    n_classes = cos.size
    shifts = margin_shifts(n_classes, a, b, lam_margin, cfg.m)

    # cos(θ + δ) = cosθ·cosδ − sinθ·sinδ; δ = 0 leaves cosθ untouched
    sin = np.sqrt(1.0 - cos**2)
    cos_shift, sin_shift = np.cos(shifts), np.sin(shifts)
    shifted = cos * cos_shift - sin * sin_shift
    logits = cfg.s * shifted

    targets = np.zeros(n_classes)
    targets[a] += lam_loss
    targets[b] += 1.0 - lam_loss

    value = float(logsumexp(logits) - targets @ logits)

    # dL/dcos_j, zero where the cosine was clamped
    dshifted_dcos = cos_shift + sin_shift * cos / sin
    grad_cos = (softmax(logits) - targets) * cfg.s * dshifted_dcos * inside

    grad_e = (V @ grad_cos - (grad_cos @ cos) * u) / e_norm
    grad_W = (np.outer(u, grad_cos) - V * (grad_cos * cos)) / w_norms
    return LossOutput(value=value, grad_e=grad_e, grad_W=grad_W)


def aam_softmax_loss(
    e: np.ndarray, W: np.ndarray, label: int, cfg: MarginConfig
) -> LossOutput:
    """Standard single-target AAM-softmax (margin-mixup with λ = 1)"""
    return margin_mixup_loss(e, W, label, label, 1.0, cfg)


def batch_loss(
    embeddings: Sequence[np.ndarray],
    W: np.ndarray,
    labels: Sequence[SoftLabel],
    cfg: MarginConfig,
    fix_margin_lambda: bool = False,
    fix_loss_lambda: bool = False,
) -> LossOutput:
    """
    Mean margin-mixup loss over a mini-batch

    Args:
        embeddings: B embeddings (sequence or B x D array)
        W: D x N class centers
        labels: B soft labels (1 or 2 entries each)
        cfg: Margin and scale
        fix_margin_lambda: Force λ = 1 inside the margin split
        fix_loss_lambda: Force λ = 1 inside the loss combination

    Returns:
        LossOutput: mean value, grad_e as B x D (gradient of the mean), mean grad_W

    Computed for the whole batch at once; row i agrees with
    margin_mixup_loss on embedding i up to rounding.
    """
    if len(embeddings) == 0:
        raise ValueError("Cannot compute the loss of an empty batch")
    if len(embeddings) != len(labels):
        raise ShapeError(
            f"{len(embeddings)} embeddings but {len(labels)} labels"
        )

    E = np.asarray(embeddings, dtype=float)
    W = np.asarray(W, dtype=float)
    if E.ndim != 2 or W.ndim != 2 or E.shape[1] != W.shape[0]:
        raise ShapeError(
            f"Embeddings of shape {E.shape} do not match class centers of shape {W.shape}"
        )
    e_norms = np.linalg.norm(E, axis=1)
    w_norms = np.linalg.norm(W, axis=0)
    if np.any(e_norms == 0.0):
        raise DegenerateInputError("Embedding has zero norm")
    if np.any(w_norms == 0.0):
        raise DegenerateInputError("Class centers contain a zero column")
    U, V = E / e_norms[:, None], W / w_norms
    cos, inside = _clamped_cosines(U, V)
    batch_size, n_classes = cos.shape

    a, b, lam = (np.array(column) for column in zip(*(label.as_pair() for label in labels)))
    if np.any((np.minimum(a, b) < 0) | (np.maximum(a, b) >= n_classes)):
        raise ValueError(f"Class indices outside [0, {n_classes})")
    lam = lam.astype(float)
    lam_margin = np.ones(batch_size) if fix_margin_lambda else lam
    lam_loss = np.ones(batch_size) if fix_loss_lambda else lam

    rows = np.arange(batch_size)
    shifts = np.zeros((batch_size, n_classes))
    np.add.at(shifts, (rows, a), lam_margin * cfg.m)
    np.add.at(shifts, (rows, b), (1.0 - lam_margin) * cfg.m)
    targets = np.zeros((batch_size, n_classes))
    np.add.at(targets, (rows, a), lam_loss)
    np.add.at(targets, (rows, b), 1.0 - lam_loss)

    sin = np.sqrt(1.0 - cos**2)
    cos_shift, sin_shift = np.cos(shifts), np.sin(shifts)
    logits = cfg.s * (cos * cos_shift - sin * sin_shift)
    values = logsumexp(logits, axis=1) - np.sum(targets * logits, axis=1)

    dshifted_dcos = cos_shift + sin_shift * cos / sin
    grad_cos = (softmax(logits, axis=1) - targets) * cfg.s * dshifted_dcos * inside

    grad_e = (grad_cos @ V.T - np.sum(grad_cos * cos, axis=1)[:, None] * U) / e_norms[:, None]
    grad_W = (U.T @ grad_cos - V * np.sum(grad_cos * cos, axis=0)) / w_norms
    return LossOutput(
        value=float(values.mean()),
        grad_e=grad_e / batch_size,
        grad_W=grad_W / batch_size,
    )


def predict_speakers(embeddings: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Class with the highest cosine for each row of a B x D embedding matrix"""
    E = np.atleast_2d(np.asarray(embeddings, dtype=float))
    E = E / np.linalg.norm(E, axis=1, keepdims=True)
    V = validate_centers(W)
    V = V / np.linalg.norm(V, axis=0)
    return np.argmax(E @ V, axis=1)
