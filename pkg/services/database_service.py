#!/usr/bin/env python3
"""
Database Service for the Margin-Mixup Speaker Verification Toolkit

This service handles the SQLite cache of trained models, so that a system
shared between experiments (same config, phases and seed) is trained once.
"""

import hashlib
import json
import os
import sqlite3
import threading
from datetime import datetime
from typing import Dict, List, Optional

DEFAULT_DB_NAME = "model_cache.db"


def training_fingerprint(settings: Dict, phases: List[Dict], seed: int) -> str:
    """
    SHA-256 over the canonical JSON of everything that determines a trained model

    Args:
        settings: Trainer settings (dimensions, pool parameters, optimizer, ...)
        phases: Phase configurations as plain dicts
        seed: Training seed

    Returns:
        str: hex digest
    """
    payload = json.dumps(
        {"settings": settings, "phases": phases, "seed": seed},
        sort_keys=True,
        separators=(",", ":"),
        default=str,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class DatabaseService:
    """Service for managing the trained-model cache"""

    def __init__(self, db_path: str = DEFAULT_DB_NAME):
        """
        Initialize the database service

        Args:
            db_path (str): Path to the SQLite database file
        """
        self.db_path = db_path
        self._lock = threading.Lock()
        self._init_database()

    def _init_database(self):
        """Create the models table if it doesn't exist"""
        with sqlite3.connect(self.db_path) as conn:
            cursor = conn.cursor()
            cursor.execute(
                """
                CREATE TABLE IF NOT EXISTS models (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    fingerprint TEXT UNIQUE NOT NULL,
                    checkpoint_path TEXT NOT NULL,
                    system TEXT,
                    final_loss REAL,
                    created_at TEXT NOT NULL
                )
            """
            )
            cursor.execute(
                "CREATE INDEX IF NOT EXISTS idx_fingerprint ON models (fingerprint)"
            )
            conn.commit()

    def register_model(
        self,
        fingerprint: str,
        checkpoint_path: str,
        system: str = "",
        final_loss: Optional[float] = None,
    ):
        """
        Record (or replace) the checkpoint of a trained model

        Args:
            fingerprint (str): training_fingerprint of the model
            checkpoint_path (str): Where the checkpoint was saved
            system (str): Human-readable system label
            final_loss (float, optional): Last training loss
        """
        with self._lock, sqlite3.connect(self.db_path) as conn:
            conn.execute(
                """
                INSERT OR REPLACE INTO models
                (fingerprint, checkpoint_path, system, final_loss, created_at)
                VALUES (?, ?, ?, ?, ?)
            """,
                (
                    fingerprint,
                    os.path.abspath(checkpoint_path),
                    system,
                    final_loss,
                    datetime.now().isoformat(timespec="seconds"),
                ),
            )
            conn.commit()

    def get_model(self, fingerprint: str) -> Optional[Dict]:
        """
        Look up a cached model

        Records whose checkpoint file has disappeared are treated as missing.

        Returns:
            dict or None: the model record
        """
        with sqlite3.connect(self.db_path) as conn:
            cursor = conn.cursor()
            cursor.execute("SELECT * FROM models WHERE fingerprint = ?", (fingerprint,))
            row = cursor.fetchone()
            if row is None:
                return None
            record = dict(zip([desc[0] for desc in cursor.description], row))
        if not os.path.exists(record["checkpoint_path"]):
            return None
        return record

    def list_models(self) -> List[Dict]:
        """All cached model records, oldest first"""
        with sqlite3.connect(self.db_path) as conn:
            cursor = conn.cursor()
            cursor.execute("SELECT * FROM models ORDER BY id")
            columns = [desc[0] for desc in cursor.description]
            return [dict(zip(columns, row)) for row in cursor.fetchall()]

    def cleanup_orphaned_records(self) -> int:
        """Remove records whose checkpoint file no longer exists"""
        with self._lock, sqlite3.connect(self.db_path) as conn:
            cursor = conn.cursor()
            cursor.execute("SELECT id, checkpoint_path FROM models")
            orphaned_ids = [
                model_id
                for model_id, path in cursor.fetchall()
                if not os.path.exists(path)
            ]
            if orphaned_ids:
                cursor.execute(
                    f'DELETE FROM models WHERE id IN ({",".join("?" * len(orphaned_ids))})',
                    orphaned_ids,
                )
                conn.commit()
                print(f"Cleaned up {len(orphaned_ids)} orphaned model records")
            return len(orphaned_ids)

    def get_database_stats(self) -> Dict:
        """Get database statistics"""
        with sqlite3.connect(self.db_path) as conn:
            cursor = conn.cursor()
            cursor.execute("SELECT COUNT(*) FROM models")
            model_count = cursor.fetchone()[0]
            cursor.execute("SELECT COUNT(DISTINCT system) FROM models")
            system_count = cursor.fetchone()[0]
        return {
            "cached_models": model_count,
            "unique_systems": system_count,
            "database_path": self.db_path,
        }
