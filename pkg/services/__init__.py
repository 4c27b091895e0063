#!/usr/bin/env python3
"""
Services Package for the Margin-Mixup Speaker Verification Toolkit

This package contains modular services for file I/O, model caching and reporting.
"""

# Waveform, speaker-pool and trial-manifest I/O
from .data_loader_service import (
    read_wav,
    write_wav,
    load_speaker_pool,
    save_speaker_pool,
    load_trials,
    save_trials,
)

# Trained-model cache
from .database_service import (
    DatabaseService,
    training_fingerprint,
)

from .file_system_service import (
    create_experiment_output_directories,
    write_meta,
    validate_input_file,
)

from .report_service import (
    generate_experiment_report,
    relative_improvements,
)

__all__ = [
    # Data loading
    "read_wav",
    "write_wav",
    "load_speaker_pool",
    "save_speaker_pool",
    "load_trials",
    "save_trials",
    # Database services
    "DatabaseService",
    "training_fingerprint",
    # File system operations
    "create_experiment_output_directories",
    "write_meta",
    "validate_input_file",
    # Report generation
    "generate_experiment_report",
    "relative_improvements",
]
