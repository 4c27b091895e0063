#!/usr/bin/env python3
"""
Speech Signal Module for the Margin-Mixup Speaker Verification Toolkit

Waveform container, synthetic speaker generation, framed log mel-band
features and feature-level augmentation (SpecAugment-style masking).

Every function here is a pure function of its inputs; randomness is drawn
from numpy Generators built from the caller's seed.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import get_window

from exceptions import InvalidProfileError, TooShortError, UnknownSpeakerError

# Integer seed or a Generator to draw from
SeedLike = Union[int, np.random.Generator]

# Defaults (desk scale)
DEFAULT_SAMPLE_RATE = 8000
DEFAULT_FRAME_MS = 25.0
DEFAULT_HOP_MS = 10.0
DEFAULT_N_BINS = 24
DEFAULT_JITTER = 0.01
DEFAULT_NOISE_FLOOR = 0.05
DEFAULT_N_COMPONENTS = 6

# Log compression floor
LOG_EPSILON = 1e-10

# RMS of the tonal part before noise is added, and the hard bounds
# every synthesized utterance is kept within.
TONAL_RMS = 0.3
RMS_BOUNDS = (0.05, 1.0)


def hz_to_mel(freq_hz):
    return 2595.0 * np.log10(1.0 + np.asarray(freq_hz, dtype=float) / 700.0)


def mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=float) / 2595.0) - 1.0)


def rms(samples: np.ndarray) -> float:
    """Root mean square amplitude"""
    samples = np.asarray(samples, dtype=float)
    return float(np.sqrt(np.mean(samples**2)))


@dataclass(frozen=True, eq=False)
class Waveform:
    """Mono sample buffer with its sample rate"""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError("Waveform must be a non-empty 1-D sample buffer")
        if not np.all(np.isfinite(samples)):
            raise ValueError("Waveform contains non-finite samples")
        if int(self.sample_rate) <= 0:
            raise ValueError(f"Invalid sample rate: {self.sample_rate}")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate

    @property
    def rms(self) -> float:
        return rms(self.samples)


@dataclass(frozen=True, eq=False)
class SpeakerProfile:
    """
    Synthetic speaker identity: a set of sinusoidal components.

    Attributes:
        speaker_id: Integer label in [0, N)
        frequencies: Component frequencies in Hz
        amplitudes: Per-component amplitudes (positive)
        fundamental_jitter: Relative stddev of the per-utterance frequency perturbation
    """

    speaker_id: int
    frequencies: np.ndarray
    amplitudes: np.ndarray
    fundamental_jitter: float = DEFAULT_JITTER

    def __post_init__(self):
        frequencies = np.atleast_1d(np.asarray(self.frequencies, dtype=float))
        amplitudes = np.atleast_1d(np.asarray(self.amplitudes, dtype=float))
        if frequencies.shape != amplitudes.shape:
            raise InvalidProfileError(
                f"Speaker {self.speaker_id}: {frequencies.size} frequencies "
                f"but {amplitudes.size} amplitudes"
            )
        if np.any(amplitudes <= 0):
            raise InvalidProfileError(
                f"Speaker {self.speaker_id}: amplitudes must be positive"
            )
        if np.any(frequencies <= 0):
            raise InvalidProfileError(
                f"Speaker {self.speaker_id}: frequencies must be positive"
            )
        if self.fundamental_jitter < 0:
            raise InvalidProfileError(
                f"Speaker {self.speaker_id}: jitter must be non-negative"
            )
        object.__setattr__(self, "frequencies", frequencies)
        object.__setattr__(self, "amplitudes", amplitudes)

    @property
    def n_components(self) -> int:
        return self.frequencies.size

    def validate_for(self, sample_rate: int):
        """Raise InvalidProfileError if any component is at or above Nyquist"""
        nyquist = sample_rate / 2.0
        if np.any(self.frequencies >= nyquist):
            raise InvalidProfileError(
                f"Speaker {self.speaker_id}: component at "
                f"{self.frequencies.max():.1f} Hz is not below Nyquist ({nyquist:.1f} Hz)"
            )


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """T x F grid of log band energies"""

    frames: np.ndarray
    frame_length_ms: float = DEFAULT_FRAME_MS
    hop_ms: float = DEFAULT_HOP_MS

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=float)
        if frames.ndim != 2 or frames.shape[0] < 1 or frames.shape[1] < 1:
            raise ValueError(f"FeatureMatrix must be T x F with T, F >= 1, got {frames.shape}")
        if not np.all(np.isfinite(frames)):
            raise ValueError("FeatureMatrix contains non-finite entries")
        object.__setattr__(self, "frames", frames)

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def n_bins(self) -> int:
        return self.frames.shape[1]


def generate_speaker_pool(
    n_speakers: int,
    n_components: int = DEFAULT_N_COMPONENTS,
    sample_rate: int = DEFAULT_SAMPLE_RATE,
    seed: int = 0,
    freq_range: Optional[Tuple[float, float]] = None,
    jitter: float = DEFAULT_JITTER,
    id_offset: int = 0,
) -> List[SpeakerProfile]:
    """
    Draw a pool of random synthetic speakers

    Component frequencies are uniform on the mel scale inside freq_range,
    amplitudes uniform in [0.2, 1].

    Args:
        n_speakers: Number of speakers to create
        n_components: Sinusoids per speaker
        sample_rate: Target sample rate (bounds the frequency range)
        seed: Pool seed
        freq_range: (low, high) Hz; defaults to (100, 0.45 * sample_rate)
        jitter: fundamental_jitter for every speaker
        id_offset: First speaker_id

    Returns:
        list: SpeakerProfile objects with ids id_offset .. id_offset + n_speakers - 1
    """
    low, high = freq_range if freq_range is not None else (100.0, 0.45 * sample_rate)
    if not 0 < low < high < sample_rate / 2.0:
        raise ValueError(f"Frequency range {low}-{high} Hz does not fit below Nyquist")

    rng = np.random.default_rng(seed)
    mel_low, mel_high = hz_to_mel(low), hz_to_mel(high)
    pool = []
    for index in range(n_speakers):
        frequencies = np.sort(mel_to_hz(rng.uniform(mel_low, mel_high, n_components)))
        amplitudes = rng.uniform(0.2, 1.0, n_components)
        pool.append(
            SpeakerProfile(
                speaker_id=id_offset + index,
                frequencies=frequencies,
                amplitudes=amplitudes,
                fundamental_jitter=jitter,
            )
        )
    return pool


def synth_utterance(
    profile: SpeakerProfile,
    duration_s: float,
    seed: int,
    sample_rate: int = DEFAULT_SAMPLE_RATE,
    noise_floor: float = DEFAULT_NOISE_FLOOR,
) -> Waveform:
    """
    Synthesize one utterance of a speaker

    Sum of the profile's sinusoids (frequencies jittered once per utterance,
    random phases) plus white noise scaled to exactly noise_floor RMS.

    Args:
        profile: Speaker to synthesize
        duration_s: Length in seconds (> 0)
        seed: Utterance seed; identical seeds give bit-identical waveforms
        sample_rate: Output sample rate in Hz
        noise_floor: RMS of the additive white noise

    Returns:
        Waveform: with RMS inside RMS_BOUNDS
    """
    if duration_s <= 0:
        raise ValueError(f"Duration must be positive, got {duration_s}")
    if noise_floor <= 0:
        raise ValueError(f"Noise floor must be positive, got {noise_floor}")
    profile.validate_for(sample_rate)

    rng = np.random.default_rng(seed)
    n_samples = max(1, int(round(duration_s * sample_rate)))
    n_components = profile.n_components

    jitter = 1.0 + profile.fundamental_jitter * rng.standard_normal(n_components)
    frequencies = np.clip(profile.frequencies * jitter, 1.0, 0.999 * sample_rate / 2.0)
    phases = rng.uniform(0.0, 2.0 * np.pi, n_components)
    noise = rng.standard_normal(n_samples)
    noise *= noise_floor / max(rms(noise), np.finfo(float).tiny)

    samples = noise
    if n_components > 0:
        gain = TONAL_RMS / np.sqrt(np.sum(profile.amplitudes**2) / 2.0)
        t = np.arange(n_samples) / sample_rate
        tone = np.sin(2.0 * np.pi * np.outer(t, frequencies) + phases) @ (
            gain * profile.amplitudes
        )
        samples = tone + noise

    # Keep the level inside the documented bounds
    level = rms(samples)
    low, high = RMS_BOUNDS
    if level > high:
        samples = samples * (0.9 * high / level)
    elif level < low:
        samples = samples * (low / level)

    return Waveform(samples, sample_rate)


@lru_cache(maxsize=32)
def _cached_filterbank(n_bins: int, n_fft: int, sample_rate: int) -> np.ndarray:
    mel_points = np.linspace(hz_to_mel(0.0), hz_to_mel(sample_rate / 2.0), n_bins + 2)
    edges = mel_to_hz(mel_points)
    left, center, right = edges[:-2], edges[1:-1], edges[2:]

    fft_freqs = np.fft.rfftfreq(n_fft, d=1.0 / sample_rate)[:, None]
    rising = (fft_freqs - left) / (center - left)
    falling = (right - fft_freqs) / (right - center)
    filterbank = np.maximum(0.0, np.minimum(rising, falling))
    filterbank.setflags(write=False)
    return filterbank


def mel_filterbank(n_bins: int, n_fft: int, sample_rate: int) -> np.ndarray:
    """
    Triangular mel-spaced filterbank from 0 Hz to Nyquist

    Returns:
        ndarray: (n_fft // 2 + 1) x n_bins weight matrix, peak weight 1 at each band center
    """
    return _cached_filterbank(int(n_bins), int(n_fft), int(sample_rate))


def mel_band_centers(n_bins: int, sample_rate: int) -> np.ndarray:
    """Center frequency (Hz) of every band in mel_filterbank"""
    mel_points = np.linspace(hz_to_mel(0.0), hz_to_mel(sample_rate / 2.0), n_bins + 2)
    return mel_to_hz(mel_points)[1:-1]


def frame_geometry(sample_rate: int, frame_ms: float, hop_ms: float) -> Tuple[int, int]:
    """Frame and hop length in samples"""
    frame_len = int(round(sample_rate * frame_ms / 1000.0))
    hop = int(round(sample_rate * hop_ms / 1000.0))
    if frame_len < 1 or hop < 1:
        raise ValueError(f"Frame ({frame_ms} ms) and hop ({hop_ms} ms) must span a sample")
    return frame_len, hop


def extract_features_batch(
    samples: np.ndarray,
    sample_rate: int,
    frame_ms: float = DEFAULT_FRAME_MS,
    hop_ms: float = DEFAULT_HOP_MS,
    n_bins: int = DEFAULT_N_BINS,
    epsilon: float = LOG_EPSILON,
) -> np.ndarray:
    """
    Log mel-band energies for a stack of equal-length waveforms

    Args:
        samples: B x n array (or a single length-n vector)
        sample_rate: Sample rate in Hz
        frame_ms: Analysis window length
        hop_ms: Hop between frames
        n_bins: Number of mel bands
        epsilon: Floor applied before the log

    Returns:
        ndarray: B x T x n_bins (or T x n_bins for 1-D input)
    """
    samples = np.asarray(samples, dtype=float)
    frame_len, hop = frame_geometry(sample_rate, frame_ms, hop_ms)
    if samples.shape[-1] < frame_len:
        raise TooShortError(
            f"Waveform of {samples.shape[-1]} samples is shorter than one "
            f"{frame_ms} ms frame ({frame_len} samples)"
        )

    frames = sliding_window_view(samples, frame_len, axis=-1)[..., ::hop, :]
    window = get_window("hann", frame_len)
    spectrum = np.abs(np.fft.rfft(frames * window, axis=-1))
    energies = spectrum @ mel_filterbank(n_bins, frame_len, sample_rate)
    return np.log(np.maximum(energies, epsilon))


def extract_features(
    w: Waveform,
    frame_ms: float = DEFAULT_FRAME_MS,
    hop_ms: float = DEFAULT_HOP_MS,
    n_bins: int = DEFAULT_N_BINS,
    epsilon: float = LOG_EPSILON,
) -> FeatureMatrix:
    """
    Framed log mel-band energies of a waveform

    T = floor((len - frame) / hop) + 1 frames, each Hann-windowed, turned into a
    magnitude spectrum, pooled into n_bins triangular mel bands and
    log-compressed with floor epsilon.
    """
    frames = extract_features_batch(
        w.samples, w.sample_rate, frame_ms, hop_ms, n_bins, epsilon
    )
    return FeatureMatrix(frames, frame_length_ms=frame_ms, hop_ms=hop_ms)


def mean_normalize(f: FeatureMatrix) -> FeatureMatrix:
    """Remove the per-bin mean over time"""
    return FeatureMatrix(
        f.frames - f.frames.mean(axis=0, keepdims=True),
        frame_length_ms=f.frame_length_ms,
        hop_ms=f.hop_ms,
    )


def spec_augment(
    f: FeatureMatrix, max_freq_mask: int, max_time_mask: int, seed: int
) -> FeatureMatrix:
    """
    Mask one frequency span and one time span with the matrix mean

    Draw order from default_rng(seed): frequency width in [0, max_freq_mask],
    frequency start, time width in [0, max_time_mask], time start.
    """
    n_frames, n_bins = f.frames.shape
    if not 0 <= max_freq_mask <= n_bins:
        raise ValueError(f"max_freq_mask={max_freq_mask} outside [0, {n_bins}]")
    if not 0 <= max_time_mask <= n_frames:
        raise ValueError(f"max_time_mask={max_time_mask} outside [0, {n_frames}]")

    rng = np.random.default_rng(seed)
    freq_width = int(rng.integers(0, max_freq_mask + 1))
    freq_start = int(rng.integers(0, n_bins - freq_width + 1))
    time_width = int(rng.integers(0, max_time_mask + 1))
    time_start = int(rng.integers(0, n_frames - time_width + 1))

    fill = f.frames.mean()
    masked = f.frames.copy()
    masked[:, freq_start : freq_start + freq_width] = fill
    masked[time_start : time_start + time_width, :] = fill
    return FeatureMatrix(masked, frame_length_ms=f.frame_length_ms, hop_ms=f.hop_ms)


def spec_augment_batch(
    frames: np.ndarray, max_freq_mask: int, max_time_mask: int, seed: SeedLike
) -> np.ndarray:
    """
    spec_augment for every matrix of a B x T x F stack

    Each matrix gets one frequency span and one time span filled with its own
    mean. Spans are drawn as vectors (frequency widths, frequency starts, time
    widths, time starts), so a row does not repeat spec_augment's draws for
    any single seed.
    """
    frames = np.asarray(frames, dtype=float)
    if frames.ndim != 3:
        raise ValueError(f"Expected a B x T x F stack, got shape {frames.shape}")
    n_rows, n_frames, n_bins = frames.shape
    if not 0 <= max_freq_mask <= n_bins:
        raise ValueError(f"max_freq_mask={max_freq_mask} outside [0, {n_bins}]")
    if not 0 <= max_time_mask <= n_frames:
        raise ValueError(f"max_time_mask={max_time_mask} outside [0, {n_frames}]")

    rng = np.random.default_rng(seed)
    freq_width = rng.integers(0, max_freq_mask + 1, n_rows)
    freq_start = rng.integers(0, n_bins - freq_width + 1)
    time_width = rng.integers(0, max_time_mask + 1, n_rows)
    time_start = rng.integers(0, n_frames - time_width + 1)

    bins, steps = np.arange(n_bins), np.arange(n_frames)
    freq_mask = (bins >= freq_start[:, None]) & (bins < (freq_start + freq_width)[:, None])
    time_mask = (steps >= time_start[:, None]) & (steps < (time_start + time_width)[:, None])
    mask = freq_mask[:, None, :] | time_mask[:, :, None]
    fill = frames.mean(axis=(1, 2))
    return np.where(mask, fill[:, None, None], frames)


def random_crop(w: Waveform, crop_s: float, seed: int) -> Waveform:
    """
    Random fixed-length crop; short inputs are tiled first

    Args:
        w: Input waveform
        crop_s: Crop length in seconds
        seed: Crop seed

    Returns:
        Waveform: round(crop_s * sample_rate) samples
    """
    if crop_s <= 0:
        raise ValueError(f"Crop length must be positive, got {crop_s}")
    n_crop = max(1, int(round(crop_s * w.sample_rate)))

    samples = w.samples
    if samples.size < n_crop:
        samples = np.tile(samples, int(np.ceil(n_crop / samples.size)))

    rng = np.random.default_rng(seed)
    start = int(rng.integers(0, samples.size - n_crop + 1))
    return Waveform(samples[start : start + n_crop].copy(), w.sample_rate)


def random_crop_batch(
    samples: np.ndarray, crop_s: float, sample_rate: int, seed: SeedLike
) -> np.ndarray:
    """
    random_crop for every row of a B x n sample stack

    Rows shorter than the crop are tiled first; starts are drawn as one
    vector from seed.

    Returns:
        ndarray: B x round(crop_s * sample_rate) crops
    """
    if crop_s <= 0:
        raise ValueError(f"Crop length must be positive, got {crop_s}")
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    n_crop = max(1, int(round(crop_s * sample_rate)))
    if samples.shape[1] < n_crop:
        samples = np.tile(samples, (1, int(np.ceil(n_crop / samples.shape[1]))))

    rng = np.random.default_rng(seed)
    starts = rng.integers(0, samples.shape[1] - n_crop + 1, samples.shape[0])
    windows = sliding_window_view(samples, n_crop, axis=1)
    return windows[np.arange(samples.shape[0]), starts]


def stack_samples(waveforms: Sequence[Waveform]) -> np.ndarray:
    """Stack equal-length waveforms into a B x n array"""
    lengths = {len(w) for w in waveforms}
    if len(lengths) != 1:
        raise ValueError(f"Waveforms must have equal length, got {sorted(lengths)}")
    return np.stack([w.samples for w in waveforms])


def derive_seed(*values: int) -> int:
    """Independent 32-bit seed for a (seed, stream, counter, ...) tuple"""
    return int(np.random.SeedSequence([int(v) for v in values]).generate_state(1)[0])


@dataclass(frozen=True, order=True)
class UtteranceRef:
    """Reference to the index-th utterance of a speaker"""

    speaker_id: int
    index: int

    @property
    def key(self) -> str:
        return f"spk{self.speaker_id:04d}-utt{self.index:03d}"

    @classmethod
    def parse(cls, key: str) -> "UtteranceRef":
        try:
            speaker_part, utt_part = key.split("-")
            return cls(int(speaker_part[3:]), int(utt_part[3:]))
        except (ValueError, IndexError):
            raise ValueError(f"Malformed utterance id: {key!r}")


class UtteranceBank:
    """
    Lazily synthesized, cached utterances of a speaker pool

    The waveform of a reference depends only on (seed, namespace, speaker,
    index), so training and evaluation banks built from the same pool never
    share utterances when their namespaces differ.
    """

    def __init__(
        self,
        pool: Sequence[SpeakerProfile],
        duration_s: float,
        sample_rate: int = DEFAULT_SAMPLE_RATE,
        seed: int = 0,
        namespace: int = 0,
        noise_floor: float = DEFAULT_NOISE_FLOOR,
    ):
        self.profiles = {profile.speaker_id: profile for profile in pool}
        self.duration_s = duration_s
        self.sample_rate = sample_rate
        self.seed = seed
        self.namespace = namespace
        self.noise_floor = noise_floor
        self._cache = {}

    @property
    def speaker_ids(self) -> List[int]:
        return sorted(self.profiles)

    def seed_for(self, ref: UtteranceRef) -> int:
        return derive_seed(self.seed, self.namespace, ref.speaker_id, ref.index)

    def synthesize(self, ref: UtteranceRef) -> Waveform:
        """Waveform of a reference, without caching it"""
        if ref.speaker_id not in self.profiles:
            raise UnknownSpeakerError(
                f"Unknown speaker {ref.speaker_id} in {ref.key}; this bank holds "
                f"speakers {self.speaker_ids[0]}..{self.speaker_ids[-1]}"
            )
        return synth_utterance(
            self.profiles[ref.speaker_id],
            self.duration_s,
            self.seed_for(ref),
            sample_rate=self.sample_rate,
            noise_floor=self.noise_floor,
        )

    def get(self, ref: UtteranceRef) -> Waveform:
        """Waveform of a reference (synthesized on first access)"""
        if ref not in self._cache:
            self._cache[ref] = self.synthesize(ref)
        return self._cache[ref]

    def stack(self, speaker_ids: Sequence[int], n_utterances: int) -> np.ndarray:
        """S x U x n array of utterances 0 .. U-1 of each speaker (not cached)"""
        return np.stack(
            [
                np.stack(
                    [self.synthesize(UtteranceRef(int(s), i)).samples for i in range(n_utterances)]
                )
                for s in speaker_ids
            ]
        )
