#!/usr/bin/env python3
"""
Data Loader Service for the Margin-Mixup Speaker Verification Toolkit

This service handles reading and writing of waveforms, speaker-pool
manifests and trial manifests.
"""

import os
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.io import wavfile

from speech_signal import DEFAULT_JITTER, SpeakerProfile, UtteranceRef, Waveform
from verification_eval import Interferer, Trial

PCM_SCALE = 32767


def write_wav(w: Waveform, path: str):
    """
    Write a waveform as 16-bit PCM mono

    Args:
        w: Waveform (samples outside [-1, 1] are clipped)
        path: Output .wav path
    """
    pcm = np.round(np.clip(w.samples, -1.0, 1.0) * PCM_SCALE).astype(np.int16)
    wavfile.write(path, w.sample_rate, pcm)


def read_wav(path: str) -> Waveform:
    """
    Read a mono WAV file into a float waveform

    Args:
        path: .wav path (16-bit PCM or float)

    Returns:
        Waveform: samples scaled to [-1, 1] for integer PCM
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"WAV file not found: {path}")
    sample_rate, data = wavfile.read(path)
    if data.ndim != 1:
        raise ValueError(f"{path}: expected mono audio, got {data.shape[1]} channels")
    if np.issubdtype(data.dtype, np.integer):
        samples = data.astype(float) / PCM_SCALE
    else:
        samples = data.astype(float)
    return Waveform(samples, int(sample_rate))


def save_speaker_pool(
    pool: Sequence[SpeakerProfile], path: str, sample_rate: int
):
    """
    Write a speaker-pool manifest

    One line per speaker: `speaker_id freq1:amp1 freq2:amp2 ...`, with the
    shared jitter and the sample rate in a header comment.
    """
    jitter = pool[0].fundamental_jitter if pool else DEFAULT_JITTER
    if any(profile.fundamental_jitter != jitter for profile in pool):
        raise ValueError("All speakers of a manifest must share one jitter value")

    with open(path, "w", encoding="utf-8") as f:
        f.write(f"# jitter={jitter!r} sample_rate={sample_rate}\n")
        for profile in pool:
            components = " ".join(
                f"{freq!r}:{amp!r}"
                for freq, amp in zip(profile.frequencies.tolist(), profile.amplitudes.tolist())
            )
            f.write(f"{profile.speaker_id} {components}".rstrip() + "\n")


def load_speaker_pool(path: str) -> Tuple[List[SpeakerProfile], Optional[int]]:
    """
    Read a speaker-pool manifest

    Returns:
        tuple: (profiles, sample rate from the header or None)
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"Speaker pool manifest not found: {path}")

    jitter, sample_rate = DEFAULT_JITTER, None
    pool = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for token in line[1:].split():
                    key, _, value = token.partition("=")
                    if key == "jitter":
                        jitter = float(value)
                    elif key == "sample_rate":
                        sample_rate = int(value)
                continue
            try:
                speaker_part, *component_parts = line.split()
                components = [part.split(":") for part in component_parts]
                frequencies = [float(freq) for freq, _ in components]
                amplitudes = [float(amp) for _, amp in components]
            except ValueError:
                raise ValueError(f"{path}:{line_no}: malformed speaker line {line!r}")
            pool.append(
                SpeakerProfile(
                    speaker_id=int(speaker_part),
                    frequencies=np.array(frequencies),
                    amplitudes=np.array(amplitudes),
                    fundamental_jitter=jitter,
                )
            )
    return pool, sample_rate


def format_trial(trial: Trial) -> str:
    parts = [str(int(trial.is_target)), trial.enroll.key, trial.test.key]
    if trial.interferer is not None:
        parts += [trial.interferer.utt.key, repr(trial.interferer.snr_db)]
    return " ".join(parts)


def parse_trial(line: str) -> Trial:
    """Parse `label enroll_id test_id [interferer_id snr_db]`"""
    parts = line.split()
    if len(parts) not in (3, 5) or parts[0] not in ("0", "1"):
        raise ValueError(f"Malformed trial line: {line!r}")
    interferer = None
    if len(parts) == 5:
        interferer = Interferer(UtteranceRef.parse(parts[3]), float(parts[4]))
    return Trial(
        enroll=UtteranceRef.parse(parts[1]),
        test=UtteranceRef.parse(parts[2]),
        is_target=parts[0] == "1",
        interferer=interferer,
    )


def save_trials(trials: Sequence[Trial], path: str):
    """Write a trial manifest, one trial per line"""
    with open(path, "w", encoding="utf-8") as f:
        for trial in trials:
            f.write(format_trial(trial) + "\n")


def load_trials(path: str) -> List[Trial]:
    """Read a trial manifest written by save_trials"""
    if not os.path.exists(path):
        raise FileNotFoundError(f"Trial manifest not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        return [parse_trial(line) for line in f if line.strip() and not line.startswith("#")]
