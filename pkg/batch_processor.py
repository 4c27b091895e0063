#!/usr/bin/env python3
"""
Unified Batch Processor for the Margin-Mixup Speaker Verification Toolkit

This script runs several experiment suites from one configuration:
- Headline comparison (baseline vs. margin-mixup)
- λ-override ablation
- Beta(α, α) sweep
- Fixed-SNR sweep

The suites share one ExperimentRunner, so a system used by several suites
(e.g. the baseline) is trained once.

Usage:
    python batch_processor.py --all                        # Run every suite
    python batch_processor.py --headline --snr-sweep       # Run specific suites
    python batch_processor.py --help                       # Show help
"""

import asyncio
import argparse
import os
import sys
from typing import Any, Dict, List

from experiment_config import ExperimentConfig, load_config, save_config
from experiments import SUITES, ExperimentRunner
from services import generate_experiment_report


SUITE_INFO = {
    "headline": "Baseline vs. margin-mixup on clean and overlapped trials",
    "ablation": "Full margin-mixup vs. λ forced to 1 in margin / loss / both",
    "beta-sweep": "One margin-mixup system per Beta(α, α) in beta_grid",
    "snr-sweep": "Baseline and margin-mixup at every SNR in snr_grid",
}


async def run_suite(
    suite: str, runner: ExperimentRunner, semaphore: asyncio.Semaphore
) -> Dict[str, Any]:
    """Run a single suite with semaphore control"""
    async with semaphore:
        print(f"\n{'='*80}")
        print(f"Starting {suite}")
        print(f"{'='*80}")

        try:
            start_time = asyncio.get_event_loop().time()
            table = await asyncio.to_thread(SUITES[suite], runner)
            end_time = asyncio.get_event_loop().time()

            if runner.output_dir is not None:
                generate_experiment_report(table, runner.output_dir, suite.replace("-", "_"))
            return {
                "suite": suite,
                "success": True,
                "duration": end_time - start_time,
                "rows": len(table),
            }
        except Exception as e:
            print(f"❌ Error in {suite}: {str(e)}")
            return {"suite": suite, "success": False, "error": str(e)}


async def run_suites(
    selected: List[str], runner: ExperimentRunner, max_concurrent: int = 2
) -> List[Dict[str, Any]]:
    """Run multiple suites concurrently with controlled concurrency"""
    if not selected:
        print("No suites selected!")
        return []

    print(f"\n🚀 Starting {len(selected)} experiment suites...")
    print(f"📁 Output directory: {runner.output_dir}")
    print(f"⚡ Max concurrent suites: {max_concurrent}")

    semaphore = asyncio.Semaphore(max_concurrent)
    results = await asyncio.gather(
        *(run_suite(suite, runner, semaphore) for suite in selected),
        return_exceptions=True,
    )

    processed_results = []
    for suite, result in zip(selected, results):
        if isinstance(result, Exception):
            print(f"❌ Unexpected error: {result}")
            processed_results.append({"suite": suite, "success": False, "error": str(result)})
        else:
            processed_results.append(result)
    return processed_results


def print_results_summary(results: List[Dict[str, Any]]):
    """Print a summary of all suite results"""
    print(f"\n{'='*80}")
    print("📊 EXPERIMENT RESULTS SUMMARY")
    print(f"{'='*80}")

    successful = sum(1 for result in results if result["success"])
    failed = len(results) - successful

    for result in results:
        status = "✅ SUCCESS" if result["success"] else "❌ FAILED"
        duration = f"({result['duration']:.1f}s)" if "duration" in result else ""
        error_info = f" - Error: {result['error']}" if "error" in result else ""
        print(f"{status} {result['suite']} {duration}{error_info}")

    print(f"\n📈 SUMMARY:")
    print(f"  ✅ Successful: {successful}")
    print(f"  ❌ Failed: {failed}")
    print(f"  📊 Total: {len(results)}")

    if failed == 0:
        print(f"\n🎉 All suites completed successfully!")
    else:
        print(f"\n⚠️  {failed} suite(s) failed. Check the logs above for details.")


def main():
    """Main function with argument parsing"""
    parser = argparse.ArgumentParser(
        description="Unified Batch Processor for margin-mixup experiments",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python batch_processor.py --all                       # Run every suite
  python batch_processor.py --headline --ablation       # Run two suites
  python batch_processor.py --config desk.cfg --all     # Use a config file
  python batch_processor.py --output runs/seed1 --seed 1
  python batch_processor.py --concurrent 1              # One suite at a time
        """,
    )

    parser.add_argument("--all", action="store_true", help="Run all suites")
    for suite, description in SUITE_INFO.items():
        parser.add_argument(f"--{suite}", action="store_true", help=description)

    parser.add_argument("--config", help="Experiment config file")
    parser.add_argument("--seed", type=int, help="Override the config seed")
    parser.add_argument(
        "--output", default="output", help="Output directory for results (default: output)"
    )
    parser.add_argument(
        "--concurrent",
        type=int,
        default=None,
        help="Maximum concurrent suites (default: max_concurrent from the config)",
    )
    parser.add_argument("-q", "--quiet", action="store_true", help="Less progress output")

    args = parser.parse_args()

    if args.all:
        selected = list(SUITES)
    else:
        selected = [suite for suite in SUITES if getattr(args, suite.replace("-", "_"))]

    if not selected:
        print("❌ No suites selected!")
        print("Use --help to see available options")
        print("Use --all to run all suites")
        sys.exit(1)

    if args.config and not os.path.exists(args.config):
        print(f"❌ Config file '{args.config}' does not exist!")
        sys.exit(1)

    print(f"🎯 Selected suites:")
    for suite in selected:
        print(f"  • {suite}: {SUITE_INFO[suite]}")

    try:
        config = load_config(args.config) if args.config else ExperimentConfig()
        if args.seed is not None:
            config = config.with_overrides(seed=args.seed)
        runner = ExperimentRunner(config, output_dir=args.output, verbose=not args.quiet)
        save_config(config, os.path.join(args.output, "config.txt"))

        concurrent = args.concurrent or config.max_concurrent
        results = asyncio.run(run_suites(selected, runner, concurrent))
        print_results_summary(results)

        if any(not result["success"] for result in results):
            sys.exit(1)

    except KeyboardInterrupt:
        print("\n⚠️  Process interrupted by user")
        sys.exit(1)
    except Exception as e:
        print(f"\n❌ Unexpected error: {str(e)}")
        import traceback

        traceback.print_exc()
        sys.exit(1)


if __name__ == "__main__":
    main()
