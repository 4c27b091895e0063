#!/usr/bin/env python3
"""
Mixup Module for the Margin-Mixup Speaker Verification Toolkit

Waveform interpolation of two energy-normalized utterances, the matching
soft labels, beta-distributed interpolation weights, batch pairing plans
and SNR-controlled interferer mixing used to build overlapped test sets.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from exceptions import InsufficientSpeakersError, ShapeError, ZeroEnergyError
from speech_signal import SeedLike, Waveform


@dataclass(frozen=True)
class BetaParams:
    """Shape parameters of the beta distribution λ is drawn from"""

    alpha: float = 0.2
    beta: float = 0.2

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError(
                f"Beta parameters must be positive, got ({self.alpha}, {self.beta})"
            )

    @property
    def mean(self) -> float:
        return self.alpha / (self.alpha + self.beta)

    @property
    def variance(self) -> float:
        total = self.alpha + self.beta
        return self.alpha * self.beta / (total**2 * (total + 1.0))


@dataclass(frozen=True)
class MixupDraw:
    """Interpolation weight and in-batch partner of one batch element"""

    lam: float
    partner_index: int

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"λ must lie in [0, 1], got {self.lam}")


@dataclass(frozen=True)
class SoftLabel:
    """
    Interpolated target over at most two speakers

    The first key is the primary speaker (the one weighted by λ).
    """

    weights: Dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        if not 1 <= len(self.weights) <= 2:
            raise ValueError(
                f"SoftLabel must have 1 or 2 entries, got {len(self.weights)}"
            )
        if any(w < 0 for w in self.weights.values()):
            raise ValueError("SoftLabel weights must be non-negative")
        total = sum(self.weights.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"SoftLabel weights must sum to 1, got {total}")

    @classmethod
    def one_hot(cls, speaker_id: int) -> "SoftLabel":
        return cls({int(speaker_id): 1.0})

    def as_pair(self) -> Tuple[int, int, float]:
        """(a, b, λ) with a the primary speaker; single-speaker labels give (a, a, 1)"""
        items = list(self.weights.items())
        if len(items) == 1:
            return items[0][0], items[0][0], 1.0
        (a, lam), (b, _) = items
        return a, b, lam


def energy_normalize(w: Waveform) -> Waveform:
    """Scale a waveform to unit L2 norm"""
    norm = float(np.linalg.norm(w.samples))
    if norm == 0.0:
        raise ZeroEnergyError("Cannot energy-normalize an all-zero waveform")
    return Waveform(w.samples / norm, w.sample_rate)


def mix_waveforms(xa: Waveform, xb: Waveform, lam: float) -> Waveform:
    """
    Interpolate two energy-normalized waveforms

    x̂ = λ·xa/‖xa‖ + (1 − λ)·xb/‖xb‖

    Args:
        xa: Primary waveform
        xb: Partner waveform (same length and sample rate)
        lam: Interpolation strength in [0, 1]

    Returns:
        Waveform: the mixture (not re-normalized)
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"λ must lie in [0, 1], got {lam}")
    if xa.sample_rate != xb.sample_rate:
        raise ShapeError(
            f"Sample rates differ: {xa.sample_rate} vs {xb.sample_rate}"
        )
    if len(xa) != len(xb):
        raise ShapeError(
            f"Waveform lengths differ: {len(xa)} vs {len(xb)}; crop or tile first"
        )
    a = energy_normalize(xa).samples
    b = energy_normalize(xb).samples
    return Waveform(lam * a + (1.0 - lam) * b, xa.sample_rate)


def mix_batch(samples: np.ndarray, plan: Sequence["MixupDraw"]) -> np.ndarray:
    """
    mix_waveforms of every row of a B x n stack with its planned partner

    Row i becomes λ_i·x_i/‖x_i‖ + (1 − λ_i)·x_p/‖x_p‖ with p its partner_index.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[0] != len(plan):
        raise ShapeError(
            f"Plan of {len(plan)} draws does not match a sample stack of shape {samples.shape}"
        )
    norms = np.linalg.norm(samples, axis=1)
    if np.any(norms == 0.0):
        raise ZeroEnergyError("Cannot energy-normalize an all-zero waveform")
    unit = samples / norms[:, None]
    lams = np.array([draw.lam for draw in plan])[:, None]
    partners = np.array([draw.partner_index for draw in plan])
    return lams * unit + (1.0 - lams) * unit[partners]


def mix_labels(a: int, b: int, lam: float) -> SoftLabel:
    """
    Interpolate two one-hot labels

    weight(a) = λ, weight(b) = 1 − λ; a collision collapses to a single
    entry and zero weights are pruned.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"λ must lie in [0, 1], got {lam}")
    a, b = int(a), int(b)
    if a == b:
        return SoftLabel.one_hot(a)
    weights = {a: float(lam), b: 1.0 - float(lam)}
    return SoftLabel({k: v for k, v in weights.items() if v > 0.0})


def sample_lambda(params: BetaParams, seed: SeedLike) -> float:
    """
    Draw one interpolation weight from Beta(α, β)

    Args:
        params: Beta shape parameters
        seed: Integer seed, or a Generator to draw from (advances it)

    Returns:
        float: value in [0, 1]
    """
    rng = np.random.default_rng(seed)
    return float(np.clip(rng.beta(params.alpha, params.beta), 0.0, 1.0))


def batch_mixup_plan(
    batch_size: int, params: BetaParams, seed: SeedLike
) -> List[MixupDraw]:
    """
    Pair every batch element with another one and draw its λ

    Partners come from a shuffled batch permutation; self-pairings are
    re-drawn uniformly among the other elements. Same-speaker pairs are
    allowed (their labels collapse in mix_labels).
    """
    if batch_size < 2:
        raise InsufficientSpeakersError(
            f"Mixup needs a batch of at least 2, got {batch_size}"
        )
    rng = np.random.default_rng(seed)
    partners = rng.permutation(batch_size)
    for index in np.flatnonzero(partners == np.arange(batch_size)):
        other = int(rng.integers(0, batch_size - 1))
        partners[index] = other + 1 if other >= index else other
    lams = np.clip(rng.beta(params.alpha, params.beta, size=batch_size), 0.0, 1.0)
    return [
        MixupDraw(lam=float(lam), partner_index=int(partner))
        for lam, partner in zip(lams, partners)
    ]


def mean_power(samples: np.ndarray) -> float:
    return float(np.mean(np.asarray(samples, dtype=float) ** 2))


def interferer_gain(p_target: float, p_interferer: float, snr_db: float) -> float:
    """g = sqrt(P_target / (P_interferer · 10^(snr_db / 10)))"""
    if p_target <= 0 or p_interferer <= 0:
        raise ZeroEnergyError("SNR mixing needs non-silent target and interferer")
    return float(np.sqrt(p_target / (p_interferer * 10.0 ** (snr_db / 10.0))))


def align_interferer(interferer: Waveform, n_samples: int) -> np.ndarray:
    """Tile or truncate the interferer so it fully overlaps n_samples"""
    return np.resize(interferer.samples, n_samples)


def snr_mix(target: Waveform, interferer: Waveform, snr_db: float) -> Waveform:
    """
    Add an interfering utterance at a given SNR

    The interferer is repeated/truncated to the target length and scaled so
    that P_target / P_scaled_interferer = 10^(snr_db / 10); the target itself
    is left unscaled and the sum is not re-normalized.
    """
    if target.sample_rate != interferer.sample_rate:
        raise ShapeError(
            f"Sample rates differ: {target.sample_rate} vs {interferer.sample_rate}"
        )
    aligned = align_interferer(interferer, len(target))
    gain = interferer_gain(mean_power(target.samples), mean_power(aligned), snr_db)
    return Waveform(target.samples + gain * aligned, target.sample_rate)


def measure_snr(target: Waveform, mixture: Waveform) -> float:
    """SNR in dB of a mixture against its clean target (residual = interferer)"""
    residual = mixture.samples - target.samples
    return float(
        10.0 * np.log10(mean_power(target.samples) / mean_power(residual))
    )
