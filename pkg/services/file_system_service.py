#!/usr/bin/env python3
"""
File System Service for the Margin-Mixup Speaker Verification Toolkit

This service handles output directory creation and file system checks.
"""

import os
from typing import Dict

OUTPUT_SUBDIRS = (
    "tables",  # Result tables and score sets
    "checkpoints",  # Trained model checkpoints
    "logs",  # Training logs
    "reports",  # Text summaries
)


def create_experiment_output_directories(output_dir: str) -> Dict[str, str]:
    """
    Create the output directory tree for an experiment run

    Args:
        output_dir (str): Base output directory path

    Returns:
        dict: subdirectory name -> path
    """
    os.makedirs(output_dir, exist_ok=True)
    paths = {}
    for subdir in OUTPUT_SUBDIRS:
        paths[subdir] = os.path.join(output_dir, subdir)
        os.makedirs(paths[subdir], exist_ok=True)
    return paths


def write_meta(output_dir: str, seed: int, config_hash: str, extra: Dict = None) -> str:
    """Write `meta.txt` (seed, config hash and any extra key=value lines)"""
    path = os.path.join(output_dir, "meta.txt")
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"seed={seed}\n")
        f.write(f"config_hash={config_hash}\n")
        for key, value in (extra or {}).items():
            f.write(f"{key}={value}\n")
    return path


def validate_input_file(path: str, description: str = "Input file") -> bool:
    """
    Validate that an input file exists

    Args:
        path (str): Path to the file
        description (str): What the file is, for the error message

    Returns:
        bool: True if the file exists, False otherwise
    """
    if not os.path.isfile(path):
        print(f"Error: {description} '{path}' does not exist.")
        return False
    return True
