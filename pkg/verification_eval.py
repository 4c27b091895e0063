#!/usr/bin/env python3
"""
Verification Evaluation Module for the Margin-Mixup Speaker Verification Toolkit

Builds single-speaker and overlapped (interfering speaker added to the test
side) trial lists, scores them with cosine similarity, applies top-K
adaptive s-normalization against a cohort of averaged training-speaker
embeddings and reports equal error rates.
"""

import warnings
from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from embedding_model import EmbeddingModel, embed_waveforms
from exceptions import DegenerateInputError, InsufficientSpeakersError, UnknownSpeakerError
from mixup import snr_mix
from speech_signal import (
    DEFAULT_FRAME_MS,
    DEFAULT_HOP_MS,
    UtteranceBank,
    UtteranceRef,
    Waveform,
    derive_seed,
)

# Population std below this counts as a degenerate cohort
STD_GUARD = 1e-12

PAIR_STREAM = 0
INTERFERER_STREAM = 1

SCORE_COLUMNS = ["enroll", "test", "label", "raw", "norm"]


class CohortVarianceWarning(RuntimeWarning):
    """Adaptive s-norm fell back to the raw score (zero cohort variance)"""


@dataclass(frozen=True)
class Interferer:
    """Utterance added to a test utterance at a given SNR"""

    utt: UtteranceRef
    snr_db: float


@dataclass(frozen=True)
class Trial:
    """One verification trial; the interferer (if any) overlaps the test side"""

    enroll: UtteranceRef
    test: UtteranceRef
    is_target: bool
    interferer: Optional[Interferer] = None

    def __post_init__(self):
        if self.is_target != (self.enroll.speaker_id == self.test.speaker_id):
            raise ValueError(
                f"Trial {self.enroll.key} / {self.test.key} labelled "
                f"{'target' if self.is_target else 'nontarget'} inconsistently"
            )
        if self.interferer is not None:
            speaker = self.interferer.utt.speaker_id
            if speaker in (self.enroll.speaker_id, self.test.speaker_id):
                raise ValueError(
                    f"Interferer {self.interferer.utt.key} shares a speaker with the trial"
                )


# ---------------------------------------------------------------------------
# Trial construction


def split_interferer_speakers(
    speaker_ids: Sequence[int], seed: int
) -> Tuple[List[int], List[int]]:
    """
    Reserve a disjoint interferer subset (a third of the speakers, at least one)

    Returns:
        tuple: (trial speakers, interferer speakers), both sorted
    """
    if len(speaker_ids) < 3:
        raise InsufficientSpeakersError(
            f"Overlapped trials need at least 3 speakers, got {len(speaker_ids)}"
        )
    rng = np.random.default_rng(derive_seed(seed, INTERFERER_STREAM))
    shuffled = [int(s) for s in rng.permutation(sorted(speaker_ids))]
    n_interferers = max(1, len(shuffled) // 3)
    return sorted(shuffled[n_interferers:]), sorted(shuffled[:n_interferers])


def build_clean_trials(
    speaker_ids: Sequence[int],
    n_target: int,
    n_nontarget: int,
    utterances_per_speaker: int,
    seed: int,
) -> List[Trial]:
    """Balanced target / nontarget trials without interferers"""
    speaker_ids = sorted(int(s) for s in speaker_ids)
    if n_nontarget > 0 and len(speaker_ids) < 2:
        raise InsufficientSpeakersError("Nontarget trials need at least 2 speakers")
    if n_target > 0 and (not speaker_ids or utterances_per_speaker < 2):
        raise InsufficientSpeakersError(
            "Target trials need a speaker with at least 2 utterances"
        )

    rng = np.random.default_rng(derive_seed(seed, PAIR_STREAM))
    trials = []
    for _ in range(n_target):
        speaker = int(rng.choice(speaker_ids))
        first, second = rng.choice(utterances_per_speaker, size=2, replace=False)
        trials.append(
            Trial(UtteranceRef(speaker, int(first)), UtteranceRef(speaker, int(second)), True)
        )
    for _ in range(n_nontarget):
        enroll_spk, test_spk = rng.choice(speaker_ids, size=2, replace=False)
        trials.append(
            Trial(
                UtteranceRef(int(enroll_spk), int(rng.integers(utterances_per_speaker))),
                UtteranceRef(int(test_spk), int(rng.integers(utterances_per_speaker))),
                False,
            )
        )
    return trials


def add_interferers(
    trials: Sequence[Trial],
    interferer_speakers: Sequence[int],
    snr_range: Tuple[float, float],
    utterances_per_speaker: int,
    seed: int,
) -> List[Trial]:
    """Attach one interferer per trial, snr_db uniform in snr_range"""
    low, high = snr_range
    if low > high:
        raise ValueError(f"SNR range ({low}, {high}) is reversed")
    interferer_speakers = sorted(int(s) for s in interferer_speakers)
    if not interferer_speakers:
        raise InsufficientSpeakersError("No interferer speakers available")

    rng = np.random.default_rng(derive_seed(seed, INTERFERER_STREAM, 1))
    overlapped = []
    for trial in trials:
        utt = UtteranceRef(
            int(rng.choice(interferer_speakers)), int(rng.integers(utterances_per_speaker))
        )
        snr_db = float(rng.uniform(low, high))
        overlapped.append(
            Trial(trial.enroll, trial.test, trial.is_target, Interferer(utt, snr_db))
        )
    return overlapped


def build_trials(
    speaker_ids: Sequence[int],
    n_target: int,
    n_nontarget: int,
    overlap: Optional[Tuple[float, float]] = None,
    seed: int = 0,
    utterances_per_speaker: int = 6,
) -> List[Trial]:
    """
    Build a verification trial list

    Args:
        speaker_ids: Evaluation speakers
        n_target: Number of same-speaker trials
        n_nontarget: Number of different-speaker trials
        overlap: (low, high) SNR range in dB, or None for a single-speaker set
        seed: Trial seed
        utterances_per_speaker: Utterances available per speaker

    Returns:
        list: targets first, then nontargets; with overlap every trial carries an
        interferer from a speaker subset disjoint from the trial speakers
    """
    if overlap is None:
        return build_clean_trials(
            speaker_ids, n_target, n_nontarget, utterances_per_speaker, seed
        )
    trial_speakers, interferer_speakers = split_interferer_speakers(speaker_ids, seed)
    trials = build_clean_trials(
        trial_speakers, n_target, n_nontarget, utterances_per_speaker, seed
    )
    return add_interferers(
        trials, interferer_speakers, overlap, utterances_per_speaker, seed
    )


# ---------------------------------------------------------------------------
# Scoring


def cosine_score(e1: np.ndarray, e2: np.ndarray) -> float:
    """Cosine similarity of two embeddings"""
    e1 = np.asarray(e1, dtype=float)
    e2 = np.asarray(e2, dtype=float)
    n1, n2 = np.linalg.norm(e1), np.linalg.norm(e2)
    if n1 == 0.0 or n2 == 0.0:
        raise DegenerateInputError("Cannot score a zero embedding")
    return float(np.clip(e1 @ e2 / (n1 * n2), -1.0, 1.0))


def _unit_rows(E: np.ndarray) -> np.ndarray:
    E = np.atleast_2d(np.asarray(E, dtype=float))
    norms = np.linalg.norm(E, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise DegenerateInputError("Cannot score a zero embedding")
    return E / norms


@dataclass(frozen=True, eq=False)
class Cohort:
    """Per-speaker mean embeddings (K x D) and the adaptive top-K size"""

    embeddings: np.ndarray
    top_k: int

    def __post_init__(self):
        embeddings = np.atleast_2d(np.asarray(self.embeddings, dtype=float))
        if embeddings.shape[0] == 0 or embeddings.size == 0:
            raise ValueError("Cohort must not be empty")
        if not 1 <= self.top_k <= embeddings.shape[0]:
            raise ValueError(
                f"top_k must lie in [1, {embeddings.shape[0]}], got {self.top_k}"
            )
        object.__setattr__(self, "embeddings", _unit_rows(embeddings))

    @property
    def size(self) -> int:
        return self.embeddings.shape[0]


def build_cohort(
    model: EmbeddingModel,
    bank: UtteranceBank,
    speaker_ids: Sequence[int],
    utterances_per_speaker: int,
    top_k: int,
    frame_ms: float = DEFAULT_FRAME_MS,
    hop_ms: float = DEFAULT_HOP_MS,
) -> Cohort:
    """
    Average the length-normalized embeddings of each speaker's utterances

    top_k is clamped to the number of cohort speakers.
    """
    refs = [
        UtteranceRef(int(speaker), index)
        for speaker in speaker_ids
        for index in range(utterances_per_speaker)
    ]
    embeddings = _unit_rows(
        embed_waveforms(model, [bank.get(ref) for ref in refs], frame_ms, hop_ms)
    )
    means = embeddings.reshape(len(speaker_ids), utterances_per_speaker, -1).mean(axis=1)
    return Cohort(means, min(top_k, len(speaker_ids)))


def cohort_statistics(e: np.ndarray, cohort: Cohort) -> Tuple[float, float]:
    """Mean and population std of the top-K cohort cosines against e"""
    scores = cohort.embeddings @ _unit_rows(e)[0]
    top = np.sort(scores)[-cohort.top_k :]
    return float(top.mean()), float(top.std())


def adaptive_snorm(
    raw: float, e_enroll: np.ndarray, e_test: np.ndarray, cohort: Cohort
) -> float:
    """
    Top-K adaptive symmetric score normalization

    ½·[(raw − μ_e)/σ_e + (raw − μ_t)/σ_t] with statistics of the top-K cohort
    cosines of each side. Falls back to the raw score with a
    CohortVarianceWarning when either side has zero variance.
    """
    mean_e, std_e = cohort_statistics(e_enroll, cohort)
    mean_t, std_t = cohort_statistics(e_test, cohort)
    if std_e < STD_GUARD or std_t < STD_GUARD:
        warnings.warn(
            "Cohort scores have zero variance; using the raw score",
            CohortVarianceWarning,
            stacklevel=2,
        )
        return float(raw)
    return float(0.5 * ((raw - mean_e) / std_e + (raw - mean_t) / std_t))


def compute_eer(
    target_scores: Sequence[float], nontarget_scores: Sequence[float]
) -> Tuple[float, float]:
    """
    Equal error rate by threshold sweep

    Thresholds are every distinct score plus one just above the maximum;
    at threshold t, FRR = P(target < t) and FAR = P(nontarget >= t). The
    crossing between the last point with FRR < FAR and the first with
    FRR >= FAR is linearly interpolated.

    Args:
        target_scores: Scores of target trials
        nontarget_scores: Scores of nontarget trials

    Returns:
        tuple: (eer in [0, 1], interpolated threshold)
    """
    tar = np.sort(np.asarray(target_scores, dtype=float))
    non = np.sort(np.asarray(nontarget_scores, dtype=float))
    if tar.size == 0 or non.size == 0:
        raise ValueError("EER needs at least one target and one nontarget score")

    unique = np.unique(np.concatenate([tar, non]))
    thresholds = np.append(unique, np.nextafter(unique[-1], np.inf))
    frr = np.searchsorted(tar, thresholds, side="left") / tar.size
    far = 1.0 - np.searchsorted(non, thresholds, side="left") / non.size

    index = int(np.argmax(frr >= far))
    if index == 0:
        return float(frr[0]), float(thresholds[0])

    gap_before = far[index - 1] - frr[index - 1]
    gap_after = frr[index] - far[index]
    alpha = gap_before / (gap_before + gap_after)
    eer = frr[index - 1] + alpha * (frr[index] - frr[index - 1])
    threshold = thresholds[index - 1] + alpha * (thresholds[index] - thresholds[index - 1])
    return float(np.clip(eer, 0.0, 1.0)), float(threshold)


# ---------------------------------------------------------------------------
# End-to-end evaluation


@dataclass(eq=False)
class ScoreSet:
    """Per-trial raw and normalized scores"""

    frame: pd.DataFrame

    def __len__(self) -> int:
        return len(self.frame)

    @property
    def raw(self) -> np.ndarray:
        return self.frame["raw"].to_numpy()

    @property
    def norm(self) -> np.ndarray:
        return self.frame["norm"].to_numpy()

    @property
    def labels(self) -> np.ndarray:
        return self.frame["label"].to_numpy().astype(bool)

    def eer(self, normalized: bool = True) -> float:
        scores = self.norm if normalized else self.raw
        return compute_eer(scores[self.labels], scores[~self.labels])[0]

    def to_csv(self, path: str):
        self.frame.to_csv(path, index=False)


class EvaluationResult(NamedTuple):
    eer_raw: float
    eer_norm: float
    scores: ScoreSet


def _overlap(bank: UtteranceBank, target: UtteranceRef, interferer: Interferer) -> Waveform:
    return snr_mix(bank.get(target), bank.get(interferer.utt), interferer.snr_db)


def check_trial_speakers(trials: Sequence[Trial], speaker_ids: Sequence[int]):
    """Raise UnknownSpeakerError for the first trial that references a speaker not in speaker_ids"""
    known = set(speaker_ids)
    for number, trial in enumerate(trials, start=1):
        refs = [trial.enroll, trial.test]
        if trial.interferer is not None:
            refs.append(trial.interferer.utt)
        for ref in refs:
            if ref.speaker_id not in known:
                raise UnknownSpeakerError(
                    f"Trial {number} references unknown speaker {ref.speaker_id} ({ref.key}); "
                    f"known speakers are {min(known)}..{max(known)}"
                )


def evaluate(
    model: EmbeddingModel,
    trials: Sequence[Trial],
    cohort: Optional[Cohort],
    bank: UtteranceBank,
    frame_ms: float = DEFAULT_FRAME_MS,
    hop_ms: float = DEFAULT_HOP_MS,
    overlap_enroll: bool = False,
) -> EvaluationResult:
    """
    Score a trial list and compute raw and s-normalized EER

    Args:
        model: Trained extractor
        trials: Trial list (non-empty, with both target and nontarget trials)
        cohort: s-norm cohort, or None to skip normalization (norm = raw)
        bank: Evaluation utterance bank the trial references point into
        frame_ms: Feature frame length
        hop_ms: Feature hop
        overlap_enroll: Also add the trial's interferer to the enrollment side

    Returns:
        EvaluationResult: (eer_raw, eer_norm, ScoreSet)
    """
    if not trials:
        raise ValueError("Cannot evaluate an empty trial list")
    check_trial_speakers(trials, bank.speaker_ids)

    # Each distinct (utterance, interferer) input is embedded once
    inputs: Dict[Tuple[UtteranceRef, Optional[Interferer]], int] = {}
    waveforms: List[Waveform] = []

    def slot(ref: UtteranceRef, interferer: Optional[Interferer]) -> int:
        key = (ref, interferer)
        if key not in inputs:
            inputs[key] = len(waveforms)
            waveforms.append(bank.get(ref) if interferer is None else _overlap(bank, ref, interferer))
        return inputs[key]

    pairs = []
    for trial in trials:
        enroll_side = trial.interferer if overlap_enroll else None
        pairs.append((slot(trial.enroll, enroll_side), slot(trial.test, trial.interferer)))

    embeddings = embed_waveforms(model, waveforms, frame_ms, hop_ms)

    rows = []
    for trial, (enroll_slot, test_slot) in zip(trials, pairs):
        e_enroll, e_test = embeddings[enroll_slot], embeddings[test_slot]
        raw = cosine_score(e_enroll, e_test)
        norm = raw if cohort is None else adaptive_snorm(raw, e_enroll, e_test, cohort)
        row = {
            "enroll": trial.enroll.key,
            "test": trial.test.key,
            "label": int(trial.is_target),
            "raw": raw,
            "norm": norm,
        }
        if trial.interferer is not None:
            row["interferer"] = trial.interferer.utt.key
            row["snr_db"] = trial.interferer.snr_db
        rows.append(row)

    scores = ScoreSet(pd.DataFrame(rows))
    return EvaluationResult(scores.eer(normalized=False), scores.eer(normalized=True), scores)


def dump_mixture_embeddings(
    model: EmbeddingModel,
    bank: UtteranceBank,
    speaker_a: int,
    speaker_b: int,
    snr_list: Sequence[float],
    utterance_index: int = 0,
    frame_ms: float = DEFAULT_FRAME_MS,
    hop_ms: float = DEFAULT_HOP_MS,
) -> pd.DataFrame:
    """
    Embeddings of two pure utterances and of their mixtures at each SNR

    The SNR is that of speaker_a over speaker_b. Rows: pure_a, pure_b, then
    one `mix` row per SNR; columns source, snr_db, e0..e{D-1}.
    """
    if speaker_a == speaker_b:
        raise ValueError("Mixture dump needs two different speakers")
    ref_a = UtteranceRef(int(speaker_a), utterance_index)
    ref_b = UtteranceRef(int(speaker_b), utterance_index)
    pure_a, pure_b = bank.get(ref_a), bank.get(ref_b)

    sources = ["pure_a", "pure_b"] + ["mix"] * len(snr_list)
    snrs = [np.nan, np.nan] + [float(snr) for snr in snr_list]
    waveforms = [pure_a, pure_b] + [snr_mix(pure_a, pure_b, snr) for snr in snr_list]
    embeddings = embed_waveforms(model, waveforms, frame_ms, hop_ms)

    table = pd.DataFrame(
        embeddings, columns=[f"e{i}" for i in range(model.embedding_dim)]
    )
    table.insert(0, "snr_db", snrs)
    table.insert(0, "source", sources)
    return table
