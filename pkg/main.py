#!/usr/bin/env python3
"""
Margin-Mixup Speaker Verification Toolkit

Command-line entry point.

Usage:
    python main.py gen-pool                       # Write speaker-pool manifests
    python main.py train --system margin_mixup    # Train (or reuse) one system
    python main.py eval --system baseline         # Evaluate one system
    python main.py headline                       # Baseline vs. margin-mixup
    python main.py ablation                       # λ-override ablation
    python main.py beta-sweep [--alphas 0.2,0.4]  # Beta(α, α) sweep
    python main.py snr-sweep [--snrs 0,5]         # Fixed-SNR sweep
    python main.py dump-embeddings                # Mixture embedding table

Global flags: --config <file>, --seed <int>, --out <dir>, --set key=value
"""

import argparse
import os
import sys

from embedding_model import MixupAblation
from experiment_config import ExperimentConfig, load_config, parse_config, save_config
from experiments import SUITES, ExperimentRunner, SystemSpec, condition_label
from mixup import BetaParams
from services import (
    generate_experiment_report,
    load_trials,
    save_speaker_pool,
    save_trials,
    validate_input_file,
    write_wav,
)
from speech_signal import UtteranceRef
from verification_eval import check_trial_speakers, evaluate

SYSTEMS = ("baseline", "margin_mixup", "A", "B", "C")

# Sweep suites accept a grid that replaces the configured one
GRID_FLAGS = {
    "beta-sweep": ("--alphas", "Comma-separated α = β values (default: beta_grid)"),
    "snr-sweep": ("--snrs", "Comma-separated SNRs in dB (default: snr_grid)"),
}


def parse_grid(text: str):
    try:
        return tuple(float(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"Expected comma-separated numbers, got {text!r}")


def build_config(args) -> ExperimentConfig:
    """Config file (or defaults), then --set overrides, then --seed"""
    config = load_config(args.config) if args.config else ExperimentConfig()
    if args.set:
        config = parse_config("\n".join(args.set), base=config)
    if args.seed is not None:
        config = config.with_overrides(seed=args.seed)
    return config


def system_spec(runner: ExperimentRunner, name: str, beta=None) -> SystemSpec:
    if name == "baseline":
        return runner.baseline_spec()
    overrides = {}
    if beta is not None:
        overrides["beta_params"] = BetaParams(beta, beta)
    if name in ("A", "B", "C"):
        overrides["ablation"] = MixupAblation(
            fix_margin_lambda=name in ("A", "C"), fix_loss_lambda=name in ("B", "C")
        )
    return runner.margin_mixup_spec(name, **overrides)


def cmd_gen_pool(runner: ExperimentRunner, args):
    config = runner.config
    for label, pool in (("train", runner.train_pool), ("eval", runner.eval_pool)):
        path = os.path.join(args.out, f"pool_{label}.txt")
        save_speaker_pool(pool, path, config.sample_rate)
        print(f"✓ Wrote {len(pool)} speakers: {path}")

    if args.wav_speakers:
        wav_dir = os.path.join(args.out, "wav")
        os.makedirs(wav_dir, exist_ok=True)
        for speaker in runner.eval_bank.speaker_ids[: args.wav_speakers]:
            ref = UtteranceRef(speaker, 0)
            write_wav(runner.eval_bank.get(ref), os.path.join(wav_dir, f"{ref.key}.wav"))
        print(f"✓ Wrote example utterances to {wav_dir}")


def cmd_train(runner: ExperimentRunner, args):
    runner.train_system(system_spec(runner, args.system, args.beta))
    print(f"✓ System '{args.system}' ready (checkpoints in {runner.paths['checkpoints']})")


def cmd_eval(runner: ExperimentRunner, args):
    spec = system_spec(runner, args.system, args.beta)

    if args.trials:
        if not validate_input_file(args.trials, "Trial manifest"):
            sys.exit(1)
        trials = load_trials(args.trials)
        check_trial_speakers(trials, runner.eval_bank.speaker_ids)
        model = runner.train_system(spec)
        result = evaluate(
            model,
            trials,
            runner.cohort_for(model),
            runner.eval_bank,
            runner.config.frame_ms,
            runner.config.hop_ms,
            overlap_enroll=args.overlap_enroll,
        )
        label = os.path.splitext(os.path.basename(args.trials))[0]
        result.scores.to_csv(os.path.join(runner.paths["tables"], f"scores_{spec.name}_{label}.csv"))
        print(f"{label}: EER {result.eer_norm * 100:.2f}% (raw {result.eer_raw * 100:.2f}%)")
        return

    model = runner.train_system(spec)
    for snr_range in (None, runner.overlap_range):
        label = condition_label(snr_range)
        save_trials(runner.trials_for(snr_range), os.path.join(args.out, f"trials_{label}.txt"))
        result = runner.evaluate_system(spec.name, model, snr_range)
        print(f"{label}: EER {result.eer_norm * 100:.2f}% (raw {result.eer_raw * 100:.2f}%)")


def cmd_suite(runner: ExperimentRunner, args):
    grid = getattr(args, "grid", None)
    if grid is not None:
        table = SUITES[args.command](runner, grid)
    else:
        table = SUITES[args.command](runner)
    print()
    print(table.rows.to_string(index=False))
    generate_experiment_report(table, args.out, args.command.replace("-", "_"))


def cmd_dump_embeddings(runner: ExperimentRunner, args):
    table = runner.dump_embeddings(
        args.speaker_a, args.speaker_b, spec=system_spec(runner, args.system)
    )
    print(f"✓ Dumped {len(table)} embeddings to {runner.paths['tables']}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Margin-mixup speaker verification experiments on synthetic speakers",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--config", help="Experiment config file (key = value lines)")
    parser.add_argument("--seed", type=int, help="Override the config seed")
    parser.add_argument("--out", default="output", help="Output directory (default: output)")
    parser.add_argument(
        "--set",
        action="append",
        metavar="KEY=VALUE",
        help="Override one config key (repeatable)",
    )
    parser.add_argument("-q", "--quiet", action="store_true", help="Only print results")
    parser.add_argument(
        "--no-cache", action="store_true", help="Do not reuse cached trained models"
    )

    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-pool", help="Write speaker-pool manifests")
    gen.add_argument(
        "--wav-speakers", type=int, default=0, help="Also write one WAV for this many eval speakers"
    )

    for name, help_text in (("train", "Train one system"), ("eval", "Evaluate one system")):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--system", choices=SYSTEMS, default="margin_mixup")
        cmd.add_argument("--beta", type=float, help="Beta(α, α) parameter for mixup systems")
        if name == "eval":
            cmd.add_argument("--trials", help="Trial manifest to score instead of the built-in sets")
            cmd.add_argument(
                "--overlap-enroll",
                action="store_true",
                help="Add each trial's interferer to the enrollment side too",
            )

    for name in SUITES:
        suite = sub.add_parser(name, help=f"Run the {name} experiment")
        if name in GRID_FLAGS:
            flag, help_text = GRID_FLAGS[name]
            suite.add_argument(
                flag, dest="grid", type=parse_grid, metavar="V1,V2,...", help=help_text
            )

    dump = sub.add_parser("dump-embeddings", help="Embeddings of two speakers and their mixtures")
    dump.add_argument("--system", choices=SYSTEMS, default="margin_mixup")
    dump.add_argument("--speaker-a", type=int)
    dump.add_argument("--speaker-b", type=int)
    return parser


COMMANDS = {
    "gen-pool": cmd_gen_pool,
    "train": cmd_train,
    "eval": cmd_eval,
    "dump-embeddings": cmd_dump_embeddings,
    **{name: cmd_suite for name in SUITES},
}


def main(argv=None):
    """Main function to run the margin-mixup experiments"""
    args = build_parser().parse_args(argv)

    try:
        config = build_config(args)
        runner = ExperimentRunner(
            config, output_dir=args.out, verbose=not args.quiet, use_cache=not args.no_cache
        )
        save_config(config, os.path.join(args.out, "config.txt"))
        COMMANDS[args.command](runner, args)
    except KeyboardInterrupt:
        print("\n⚠️  Process interrupted by user")
        sys.exit(1)
    except (ValueError, FileNotFoundError) as e:
        print(f"❌ {e}")
        sys.exit(1)
    except Exception as e:
        print(f"\n❌ Unexpected error: {str(e)}")
        import traceback

        traceback.print_exc()
        sys.exit(1)


if __name__ == "__main__":
    main()
