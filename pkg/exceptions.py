#!/usr/bin/env python3
"""
Exceptions for the Margin-Mixup Speaker Verification Toolkit

Input errors derive from ValueError so callers that only care about
"bad input" can catch a single type; divergence is a RuntimeError.
"""


class InvalidProfileError(ValueError):
    """Speaker profile with a component at/above Nyquist or a non-positive amplitude"""


class TooShortError(ValueError):
    """Waveform shorter than one analysis frame"""


class ZeroEnergyError(ValueError):
    """Waveform with no energy where a normalization or power ratio is needed"""


class ShapeError(ValueError):
    """Array shapes or sample rates that do not agree"""


class DegenerateInputError(ValueError):
    """Zero-norm embedding or class center"""


class TrainingDivergenceError(RuntimeError):
    """Non-finite loss or gradient during training"""


class InsufficientSpeakersError(ValueError):
    """Not enough speakers (or batch elements) for the requested construction"""


class UnknownSpeakerError(ValueError):
    """Utterance reference to a speaker outside the utterance bank"""


class CheckpointError(ValueError):
    """Checkpoint file with an unknown version tag or inconsistent shapes"""


class ConfigError(ValueError):
    """Unknown key or unparsable value in an experiment config file"""
