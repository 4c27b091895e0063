#!/usr/bin/env python3
"""
Acceptance Check for the Margin-Mixup Speaker Verification Toolkit

Runs the experiment suites on several seeds with the desk configuration
and prints PASS/FAIL for each trend criterion:

- Headline: overlapped EER of margin-mixup >= 20% relative below the
  baseline on every seed; clean EER no more than 30% relative worse; the
  headline runs of all seeds finish within --budget seconds (default 600)
- Ablation: full <= A < B and full < C on the overlapped set, and C below
  the baseline, on at least 2 seeds
- Beta sweep: clean EER(α=1) > EER(α=0.1) and 0 dB EER(α=1) < EER(α=0.1)
  on at least 2 seeds
- SNR sweep: EER non-increasing in SNR (at most one inversion) for both
  systems; relative improvement largest at the lowest SNR on at least 2 seeds
- Determinism: re-running every suite with the same seed reproduces its
  CSV outputs byte for byte
- Extractor sanity: 20 speakers, no mixup, 2000 steps -> training accuracy > 90%

Usage:
    python acceptance_check.py                  # seeds 0 1 2, desk defaults
    python acceptance_check.py --seeds 0 1 2 3 --config desk.cfg
    python acceptance_check.py --headline-only  # timed headline check only
"""

import argparse
import filecmp
import os
import sys
import tempfile
import time
from typing import Dict, List

import numpy as np

from embedding_model import ModelTrainer, TrainPhaseConfig
from experiment_config import ExperimentConfig, load_config
from experiments import SUITES, ExperimentRunner, ResultTable, condition_label, trainer_settings
from services import relative_improvements
from speech_signal import derive_seed, generate_speaker_pool

# Wall-clock allowance for the headline suite over all seeds
HEADLINE_BUDGET_S = 600.0


def count_inversions(values) -> int:
    """Number of adjacent increases in a sequence expected to be non-increasing"""
    return int(np.sum(np.diff(np.asarray(values, dtype=float)) > 0))


def check_headline(tables: List[ResultTable], overlap: str) -> bool:
    ok = True
    for table in tables:
        base_o, mix_o = table.eer("baseline", overlap), table.eer("margin_mixup", overlap)
        base_c, mix_c = table.eer("baseline", "clean"), table.eer("margin_mixup", "clean")
        overlap_gain = (base_o - mix_o) / base_o if base_o > 0 else 0.0
        clean_loss = (mix_c - base_c) / base_c if base_c > 0 else (0.0 if mix_c == 0 else np.inf)
        seed_ok = overlap_gain >= 0.20 and clean_loss <= 0.30
        print(
            f"  seed {table.seed}: overlap {base_o:.4f} -> {mix_o:.4f} "
            f"({overlap_gain * 100:+.1f}%), clean {base_c:.4f} -> {mix_c:.4f} "
            f"({clean_loss * 100:+.1f}% worse)  {'ok' if seed_ok else 'no'}"
        )
        ok &= seed_ok
    return ok


def check_ablation(tables: List[ResultTable], overlap: str) -> bool:
    hits = 0
    for table in tables:
        eer = {system: table.eer(system, overlap) for system in table.systems}
        seed_ok = (
            eer["full"] <= eer["A"] < eer["B"]
            and eer["full"] < eer["C"]
            and eer["C"] < eer["baseline"]
        )
        print(
            f"  seed {table.seed}: "
            + ", ".join(f"{k}={v:.4f}" for k, v in eer.items())
            + f"  {'ok' if seed_ok else 'no'}"
        )
        hits += seed_ok
    return hits >= min(2, len(tables))


def check_beta_sweep(tables: List[ResultTable], alphas: List[float]) -> bool:
    hits = 0
    low, high = f"beta_{min(alphas):g}", f"beta_{max(alphas):g}"
    zero_db = condition_label((0.0, 0.0))
    for table in tables:
        seed_ok = table.eer(high, "clean") > table.eer(low, "clean") and table.eer(
            high, zero_db
        ) < table.eer(low, zero_db)
        print(
            f"  seed {table.seed}: clean {table.eer(low, 'clean'):.4f} -> "
            f"{table.eer(high, 'clean'):.4f}, 0 dB {table.eer(low, zero_db):.4f} -> "
            f"{table.eer(high, zero_db):.4f}  {'ok' if seed_ok else 'no'}"
        )
        hits += seed_ok
    return hits >= min(2, len(tables))


def check_snr_sweep(tables: List[ResultTable]) -> bool:
    monotone_ok = True
    peak_hits = 0
    for table in tables:
        rows = table.rows.sort_values("snr_db")
        for system in ("baseline", "margin_mixup"):
            inversions = count_inversions(rows[rows["system"] == system]["eer"])
            monotone_ok &= inversions <= 1
        gains = relative_improvements(rows).sort_values("snr_db")
        gains = gains[gains["system"] == "margin_mixup"]["improvement_pct"].fillna(-np.inf)
        peak_ok = int(np.argmax(gains.to_numpy())) == 0
        print(
            f"  seed {table.seed}: relative gains "
            + ", ".join(f"{g:+.1f}%" for g in gains)
            + f"  {'ok' if peak_ok else 'no'}"
        )
        peak_hits += peak_ok
    return monotone_ok and peak_hits >= min(2, len(tables))


def check_determinism(config: ExperimentConfig) -> bool:
    """Run every suite twice from scratch and compare every CSV they write"""
    with tempfile.TemporaryDirectory() as first, tempfile.TemporaryDirectory() as second:
        for out in (first, second):
            runner = ExperimentRunner(config, output_dir=out, use_cache=False)
            for suite in SUITES.values():
                suite(runner)
        tables_a = os.path.join(first, "tables")
        names = sorted(os.listdir(tables_a))
        match, mismatch, errors = filecmp.cmpfiles(
            tables_a, os.path.join(second, "tables"), names, shallow=False
        )
        suites = {name.replace("-", "_") for name in SUITES}
        missing = suites - {os.path.splitext(name)[0] for name in names}
        if missing:
            print(f"  ❌ No CSV written for: {', '.join(sorted(missing))}")
        print(f"  {len(match)} identical CSV files, {len(mismatch) + len(errors)} differing")
        return not mismatch and not errors and not missing


def check_headline_budget(
    tables: List[ResultTable], overlap: str, elapsed: float, budget_s: float
) -> bool:
    """Headline trend, and the headline runs of all seeds within budget_s seconds"""
    trend_ok = check_headline(tables, overlap)
    within = elapsed <= budget_s
    print(
        f"  headline runs took {elapsed:.0f}s for {len(tables)} seeds "
        f"(budget {budget_s:.0f}s)  {'ok' if within else 'no'}"
    )
    return trend_ok and within


def check_extractor(config: ExperimentConfig) -> bool:
    pool = generate_speaker_pool(
        20,
        config.n_components,
        config.sample_rate,
        seed=derive_seed(config.seed, 99),
        jitter=config.fundamental_jitter,
    )
    trainer = ModelTrainer(pool, seed=config.seed, **trainer_settings(config))
    trainer.train(
        [
            TrainPhaseConfig(
                name="sanity",
                margin=config.margin,
                crop_s=config.initial_crop_s,
                lr_max=config.initial_lr_max,
                lr_min=config.lr_min,
                cycle_len=1000,
                steps=2000,
            )
        ]
    )
    accuracy = trainer.training_accuracy()
    print(f"  training accuracy {accuracy * 100:.1f}%")
    return accuracy > 0.90


def main():
    parser = argparse.ArgumentParser(description="Trend-based acceptance checks")
    parser.add_argument("--config", help="Experiment config file")
    parser.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    parser.add_argument("--output", default="acceptance_output")
    parser.add_argument(
        "--budget",
        type=float,
        default=HEADLINE_BUDGET_S,
        help="Seconds allowed for the headline runs of all seeds (default: 600)",
    )
    parser.add_argument(
        "--headline-only", action="store_true", help="Only run the timed headline check"
    )
    parser.add_argument("--skip-determinism", action="store_true")
    args = parser.parse_args()

    base = load_config(args.config) if args.config else ExperimentConfig()
    results: Dict[str, bool] = {}
    tables: Dict[str, List[ResultTable]] = {
        "headline": [], "ablation": [], "beta": [], "snr": []
    }

    start = time.time()
    headline_elapsed = 0.0
    for seed in args.seeds:
        config = base.with_overrides(seed=seed)
        print(f"\n{'=' * 60}\nSeed {seed}\n{'=' * 60}")
        # No model cache, so the headline timing always includes training
        runner = ExperimentRunner(
            config,
            output_dir=os.path.join(args.output, f"seed{seed}"),
            verbose=True,
            use_cache=False,
        )
        headline_start = time.time()
        tables["headline"].append(runner.run_headline())
        headline_elapsed += time.time() - headline_start
        if args.headline_only:
            continue
        tables["ablation"].append(runner.run_ablation())
        tables["beta"].append(runner.run_beta_sweep())
        tables["snr"].append(runner.run_snr_sweep())

    overlap = condition_label((base.snr_low, base.snr_high))
    print("\nHeadline trend and runtime")
    results["headline"] = check_headline_budget(
        tables["headline"], overlap, headline_elapsed, args.budget
    )
    if not args.headline_only:
        print("\nAblation ordering")
        results["ablation"] = check_ablation(tables["ablation"], overlap)
        print("\nBeta sweep trend")
        results["beta-sweep"] = check_beta_sweep(tables["beta"], list(base.beta_grid))
        print("\nSNR sweep trend")
        results["snr-sweep"] = check_snr_sweep(tables["snr"])
        if not args.skip_determinism:
            print("\nDeterminism")
            results["determinism"] = check_determinism(base.with_overrides(seed=args.seeds[0]))
        print("\nExtractor sanity")
        results["extractor"] = check_extractor(base)

    print(f"\n{'=' * 60}")
    for name, passed in results.items():
        print(f"{'✅ PASS' if passed else '❌ FAIL'}  {name}")
    print(f"\nTotal time: {time.time() - start:.0f}s")
    sys.exit(0 if all(results.values()) else 1)


if __name__ == "__main__":
    main()
