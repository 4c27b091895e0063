#!/usr/bin/env python3
"""
Report Service for the Margin-Mixup Speaker Verification Toolkit

This service handles the generation of experiment summary reports.
"""

import os
from datetime import datetime
from typing import Optional

import pandas as pd


def relative_improvements(rows: pd.DataFrame, baseline: str = "baseline") -> pd.DataFrame:
    """
    Relative EER improvement of every system over the baseline

    improvement = (EER_baseline − EER_system) / EER_baseline · 100, per test
    set (and per SNR when the table has an snr_db column). Cells whose
    baseline EER is zero are left as NaN.

    Args:
        rows: Result rows (system, test_set, eer, ...)
        baseline: Name of the reference system

    Returns:
        DataFrame: system, test_set, eer, baseline_eer, improvement_pct
    """
    keys = ["test_set"] + (["snr_db"] if "snr_db" in rows.columns else [])
    reference = rows[rows["system"] == baseline][keys + ["eer"]].rename(
        columns={"eer": "baseline_eer"}
    )
    if reference.empty:
        raise ValueError(f"Result table has no {baseline!r} rows")
    merged = rows[rows["system"] != baseline].merge(reference, on=keys, how="left")
    base = merged["baseline_eer"].where(merged["baseline_eer"] > 0)
    merged["improvement_pct"] = (base - merged["eer"]) / base * 100.0
    return merged[["system"] + keys + ["eer", "baseline_eer", "improvement_pct"]]


def generate_experiment_report(
    table, output_dir: str, title: str, baseline: str = "baseline"
) -> Optional[str]:
    """
    Write a plain-text summary of a result table

    Args:
        table: ResultTable
        output_dir: Base output directory (report goes to reports/)
        title: Experiment name
        baseline: Reference system for the relative improvements

    Returns:
        str: Path to the generated report file, or None on failure
    """
    report_path = os.path.join(output_dir, "reports", f"{title}_summary.txt")

    try:
        os.makedirs(os.path.dirname(report_path), exist_ok=True)
        with open(report_path, "w", encoding="utf-8") as f:
            f.write(f"MARGIN-MIXUP {title.upper()} REPORT\n")
            f.write("=" * 50 + "\n\n")
            f.write(f"Generated: {datetime.now():%Y-%m-%d %H:%M:%S}\n")
            f.write(f"Seed: {table.seed}\n")
            f.write(f"Config hash: {table.config_hash}\n\n")

            f.write("EQUAL ERROR RATES (%)\n")
            f.write("-" * 20 + "\n")
            for _, row in table.rows.iterrows():
                snr = f" @ {row['snr_db']:g} dB" if "snr_db" in row.index else ""
                f.write(
                    f"{row['system']:<16} {row['test_set']:<18}{snr}  "
                    f"s-norm {row['eer'] * 100:6.2f}   raw {row['eer_raw'] * 100:6.2f}\n"
                )
            f.write("\n")

            if baseline in set(table.rows["system"]):
                f.write(f"RELATIVE IMPROVEMENT OVER '{baseline}'\n")
                f.write("-" * 30 + "\n")
                for _, row in relative_improvements(table.rows, baseline).iterrows():
                    value = row["improvement_pct"]
                    text = "n/a" if pd.isna(value) else f"{value:+.1f}%"
                    f.write(f"{row['system']:<16} {row['test_set']:<18} {text}\n")

        print(f"  ✓ Generated summary report: {report_path}")
        return report_path

    except Exception as e:
        print(f"  ✗ Failed to generate summary report: {str(e)}")
        return None
