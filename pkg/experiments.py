#!/usr/bin/env python3
"""
Experiments Module for the Margin-Mixup Speaker Verification Toolkit

Trains the compared systems from one seed and data stream, evaluates them
on clean and overlapped trial sets and collects the EERs in result tables:

    headline     baseline vs. margin-mixup, clean and overlapped
    ablation     full margin-mixup vs. the three λ-override variants
    beta-sweep   one margin-mixup system per Beta(α, α)
    snr-sweep    baseline and margin-mixup at fixed interferer SNRs
"""

import asyncio
import os
import threading
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from embedding_model import (
    TRAIN_UTTERANCE_NAMESPACE,
    EmbeddingModel,
    MixupAblation,
    ModelTrainer,
    TrainPhaseConfig,
    load_checkpoint,
    save_checkpoint,
)
from experiment_config import ExperimentConfig, config_hash
from mixup import BetaParams
from services.database_service import DatabaseService, training_fingerprint
from services.file_system_service import create_experiment_output_directories, write_meta
from speech_signal import UtteranceBank, derive_seed, generate_speaker_pool
from verification_eval import (
    Cohort,
    EvaluationResult,
    Trial,
    add_interferers,
    build_clean_trials,
    build_cohort,
    dump_mixture_embeddings,
    evaluate,
    split_interferer_speakers,
)

POOL_STREAM = 10
EVAL_UTTERANCE_NAMESPACE = 1

RESULT_COLUMNS = ["system", "test_set", "eer", "eer_raw"]

SnrRange = Optional[Tuple[float, float]]


def condition_label(snr_range: SnrRange) -> str:
    """`clean`, `overlap_2dB` (fixed SNR) or `overlap_0-5dB` (uniform range)"""
    if snr_range is None:
        return "clean"
    low, high = snr_range
    if low == high:
        return f"overlap_{low:g}dB"
    return f"overlap_{low:g}-{high:g}dB"


@dataclass
class ResultTable:
    """EER rows (system, test_set, eer, eer_raw[, snr_db]) with run metadata"""

    rows: pd.DataFrame = field(default_factory=lambda: pd.DataFrame(columns=RESULT_COLUMNS))
    seed: int = 0
    config_hash: str = ""

    def __post_init__(self):
        eers = self.rows[["eer", "eer_raw"]].to_numpy(dtype=float)
        if np.any((eers < 0) | (eers > 1)):
            raise ValueError("EER values must lie in [0, 1]")

    def __len__(self) -> int:
        return len(self.rows)

    def eer(self, system: str, test_set: str, normalized: bool = True) -> float:
        """EER of one (system, test set) cell"""
        column = "eer" if normalized else "eer_raw"
        match = self.rows[(self.rows["system"] == system) & (self.rows["test_set"] == test_set)]
        if match.empty:
            raise KeyError(f"No result for system {system!r} on {test_set!r}")
        return float(match[column].iloc[0])

    @property
    def systems(self) -> List[str]:
        return list(dict.fromkeys(self.rows["system"]))

    @property
    def test_sets(self) -> List[str]:
        return list(dict.fromkeys(self.rows["test_set"]))

    def to_csv(self, path: str):
        """Write `# seed=` / `# config_hash=` header lines, then the rows"""
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(f"# seed={self.seed}\n")
            f.write(f"# config_hash={self.config_hash}\n")
            self.rows.to_csv(f, index=False)

    @classmethod
    def from_csv(cls, path: str) -> "ResultTable":
        meta = {}
        with open(path, "r", encoding="utf-8") as f:
            for line in f:
                if not line.startswith("#"):
                    break
                key, _, value = line[1:].strip().partition("=")
                meta[key.strip()] = value.strip()
        rows = pd.read_csv(path, comment="#", float_precision="round_trip")
        return cls(rows=rows, seed=int(meta.get("seed", 0)), config_hash=meta.get("config_hash", ""))


@dataclass(frozen=True)
class SystemSpec:
    """A trained system: mixup on/off, its beta parameters and λ overrides"""

    name: str
    mixup: bool = False
    beta_params: BetaParams = field(default_factory=BetaParams)
    ablation: MixupAblation = field(default_factory=MixupAblation)


def system_phases(
    config: ExperimentConfig,
    mixup: bool,
    beta_params: BetaParams = None,
    ablation: MixupAblation = None,
) -> List[TrainPhaseConfig]:
    """
    Initial training followed by large-margin fine-tuning

    Fine-tuning raises the margin and crop length, lowers the learning rate
    and disables augmentation; mixup (when enabled) runs in both phases.
    """
    beta_params = beta_params or BetaParams(config.beta_alpha, config.beta_beta)
    ablation = ablation or MixupAblation()
    shared = dict(
        lr_min=config.lr_min, mixup=mixup, beta_params=beta_params, ablation=ablation
    )
    return [
        TrainPhaseConfig(
            name="initial",
            margin=config.margin,
            crop_s=config.initial_crop_s,
            augment=True,
            lr_max=config.initial_lr_max,
            cycle_len=config.initial_cycle_len,
            steps=config.initial_steps,
            **shared,
        ),
        TrainPhaseConfig(
            name="finetune",
            margin=config.finetune_margin,
            crop_s=config.finetune_crop_s,
            augment=False,
            lr_max=config.finetune_lr_max,
            cycle_len=config.finetune_cycle_len,
            steps=config.finetune_steps,
            **shared,
        ),
    ]


def trainer_settings(config: ExperimentConfig) -> Dict:
    """ModelTrainer keyword arguments derived from a config"""
    return dict(
        n_bins=config.n_bins,
        hidden_dim=config.hidden_dim,
        embedding_dim=config.embedding_dim,
        batch_size=config.batch_size,
        sample_rate=config.sample_rate,
        frame_ms=config.frame_ms,
        hop_ms=config.hop_ms,
        utterances_per_speaker=config.utterances_per_speaker,
        utterance_s=config.utterance_s,
        noise_floor=config.noise_floor,
        scale=config.scale,
        weight_decay=config.weight_decay,
        max_freq_mask=config.max_freq_mask,
        max_time_mask=config.max_time_mask,
    )


class ExperimentRunner:
    """
    Owns the speaker pools, utterance banks, trial sets and trained systems
    of one configuration

    Every system is trained from the same seed, so all of them see the same
    initialization and the same data stream; only the mixup stream and the
    loss differ. Trained models are cached in memory and, when an output
    directory is given, as checkpoints indexed in a SQLite database.
    """

    def __init__(
        self,
        config: ExperimentConfig = None,
        output_dir: Optional[str] = None,
        verbose: bool = False,
        use_cache: bool = True,
    ):
        self.config = config or ExperimentConfig()
        self.output_dir = output_dir
        self.verbose = verbose
        self.config_hash = config_hash(self.config)
        cfg = self.config

        self.train_pool = generate_speaker_pool(
            cfg.n_speakers,
            cfg.n_components,
            cfg.sample_rate,
            seed=derive_seed(cfg.seed, POOL_STREAM, 0),
            jitter=cfg.fundamental_jitter,
        )
        self.eval_pool = generate_speaker_pool(
            cfg.n_eval_speakers,
            cfg.n_components,
            cfg.sample_rate,
            seed=derive_seed(cfg.seed, POOL_STREAM, 1),
            jitter=cfg.fundamental_jitter,
            id_offset=cfg.n_speakers,
        )
        self.train_bank = UtteranceBank(
            self.train_pool,
            cfg.utterance_s,
            sample_rate=cfg.sample_rate,
            seed=cfg.seed,
            namespace=TRAIN_UTTERANCE_NAMESPACE,
            noise_floor=cfg.noise_floor,
        )
        self.eval_bank = UtteranceBank(
            self.eval_pool,
            cfg.eval_utterance_s,
            sample_rate=cfg.sample_rate,
            seed=cfg.seed,
            namespace=EVAL_UTTERANCE_NAMESPACE,
            noise_floor=cfg.noise_floor,
        )

        self.trial_speakers, self.interferer_speakers = split_interferer_speakers(
            self.eval_bank.speaker_ids, cfg.seed
        )
        self.clean_trials = build_clean_trials(
            self.trial_speakers,
            cfg.n_target_trials,
            cfg.n_nontarget_trials,
            cfg.eval_utterances_per_speaker,
            cfg.seed,
        )
        self._trial_sets: Dict[str, List[Trial]] = {"clean": self.clean_trials}

        self._models: Dict[str, EmbeddingModel] = {}
        self._cohorts: Dict[int, Cohort] = {}
        self._lock = threading.Lock()
        self._system_locks: Dict[str, threading.Lock] = {}
        self.paths: Dict[str, str] = {}
        self.database: Optional[DatabaseService] = None
        if output_dir is not None:
            self.paths = create_experiment_output_directories(output_dir)
            write_meta(output_dir, cfg.seed, self.config_hash)
            if use_cache:
                self.database = DatabaseService(os.path.join(output_dir, "model_cache.db"))

    # -- systems ---------------------------------------------------------

    def phases_for(self, spec: SystemSpec) -> List[TrainPhaseConfig]:
        return system_phases(self.config, spec.mixup, spec.beta_params, spec.ablation)

    def fingerprint(self, spec: SystemSpec) -> str:
        settings = trainer_settings(self.config)
        settings.update(
            n_speakers=self.config.n_speakers,
            n_components=self.config.n_components,
            fundamental_jitter=self.config.fundamental_jitter,
        )
        phases = [phase.as_dict() for phase in self.phases_for(spec)]
        return training_fingerprint(settings, phases, self.config.seed)

    def train_system(self, spec: SystemSpec) -> EmbeddingModel:
        """Train one system, or reuse it from the in-memory or database cache"""
        fingerprint = self.fingerprint(spec)
        with self._lock:
            system_lock = self._system_locks.setdefault(fingerprint, threading.Lock())

        # One thread trains a given system; others wait for its result
        with system_lock:
            if fingerprint in self._models:
                return self._models[fingerprint]
            model = self._load_cached(fingerprint)
            if model is None:
                model = self._train(spec, fingerprint)
            elif self.verbose:
                print(f"  ✓ Loaded cached model for '{spec.name}'")
            self._models[fingerprint] = model
        return model

    def _load_cached(self, fingerprint: str) -> Optional[EmbeddingModel]:
        if self.database is None:
            return None
        record = self.database.get_model(fingerprint)
        if record is None:
            return None
        return load_checkpoint(record["checkpoint_path"])

    def _train(self, spec: SystemSpec, fingerprint: str) -> EmbeddingModel:
        if self.verbose:
            print(f"\nTraining system '{spec.name}'...")
        trainer = ModelTrainer(
            self.train_pool,
            seed=self.config.seed,
            log_interval=self.config.log_interval,
            verbose=self.verbose,
            **trainer_settings(self.config),
        )
        model = trainer.train(self.phases_for(spec))
        history = trainer.loss_history

        if self.output_dir is not None:
            trainer.save_training_log(os.path.join(self.paths["logs"], f"train_{spec.name}.csv"))
            checkpoint_path = os.path.join(self.paths["checkpoints"], f"{fingerprint[:16]}.npz")
            save_checkpoint(model, checkpoint_path)
            if self.database is not None:
                final_loss = float(history["loss"].iloc[-1]) if len(history) else None
                self.database.register_model(fingerprint, checkpoint_path, spec.name, final_loss)
        if self.verbose:
            print(f"✓ System '{spec.name}' trained ({len(history)} steps)")
        return model

    async def _train_systems_async(self, specs: Sequence[SystemSpec]) -> List[EmbeddingModel]:
        semaphore = asyncio.Semaphore(self.config.max_concurrent)

        async def train_one(spec: SystemSpec) -> EmbeddingModel:
            async with semaphore:
                return await asyncio.to_thread(self.train_system, spec)

        return await asyncio.gather(*(train_one(spec) for spec in specs))

    def train_systems(self, specs: Sequence[SystemSpec]) -> Dict[str, EmbeddingModel]:
        """
        Train several systems concurrently

        Specs that resolve to the same training fingerprint are trained once.

        Returns:
            dict: system name -> model, in input order
        """
        unique: Dict[str, SystemSpec] = {}
        for spec in specs:
            unique.setdefault(self.fingerprint(spec), spec)
        models = asyncio.run(self._train_systems_async(list(unique.values())))
        by_fingerprint = dict(zip(unique, models))
        return {spec.name: by_fingerprint[self.fingerprint(spec)] for spec in specs}

    # -- evaluation ------------------------------------------------------

    def trials_for(self, snr_range: SnrRange) -> List[Trial]:
        """Trial set for a test condition; overlapped sets reuse the clean pairs"""
        label = condition_label(snr_range)
        if label not in self._trial_sets:
            self._trial_sets[label] = add_interferers(
                self.clean_trials,
                self.interferer_speakers,
                snr_range,
                self.config.eval_utterances_per_speaker,
                self.config.seed,
            )
        return self._trial_sets[label]

    def cohort_for(self, model: EmbeddingModel) -> Cohort:
        """s-norm cohort of a model (averaged training-speaker embeddings)"""
        if id(model) not in self._cohorts:
            self._cohorts[id(model)] = build_cohort(
                model,
                self.train_bank,
                self.train_bank.speaker_ids,
                self.config.utterances_per_speaker,
                self.config.cohort_top_k,
                self.config.frame_ms,
                self.config.hop_ms,
            )
        return self._cohorts[id(model)]

    def evaluate_system(
        self, name: str, model: EmbeddingModel, snr_range: SnrRange
    ) -> EvaluationResult:
        """Evaluate a system on one test condition (scores saved under tables/)"""
        label = condition_label(snr_range)
        result = evaluate(
            model,
            self.trials_for(snr_range),
            self.cohort_for(model),
            self.eval_bank,
            self.config.frame_ms,
            self.config.hop_ms,
        )
        if self.output_dir is not None:
            result.scores.to_csv(os.path.join(self.paths["tables"], f"scores_{name}_{label}.csv"))
        if self.verbose:
            print(
                f"  {name:<16} {label:<18} EER {result.eer_norm * 100:6.2f}% "
                f"(raw {result.eer_raw * 100:6.2f}%)"
            )
        return result

    def _result_table(
        self,
        specs: Sequence[SystemSpec],
        conditions: Sequence[SnrRange],
        with_snr: bool = False,
    ) -> ResultTable:
        models = self.train_systems(specs)
        if self.verbose:
            print("\nEvaluating...")
        rows = []
        for spec in specs:
            for snr_range in conditions:
                result = self.evaluate_system(spec.name, models[spec.name], snr_range)
                row = {
                    "system": spec.name,
                    "test_set": condition_label(snr_range),
                    "eer": result.eer_norm,
                    "eer_raw": result.eer_raw,
                }
                if with_snr:
                    row["snr_db"] = snr_range[0]
                rows.append(row)
        columns = RESULT_COLUMNS + (["snr_db"] if with_snr else [])
        return ResultTable(pd.DataFrame(rows, columns=columns), self.config.seed, self.config_hash)

    def _save(self, table: ResultTable, name: str) -> ResultTable:
        if self.output_dir is not None:
            path = os.path.join(self.paths["tables"], f"{name}.csv")
            table.to_csv(path)
            if self.verbose:
                print(f"✓ Results saved: {path}")
        return table

    # -- suites ----------------------------------------------------------

    @property
    def overlap_range(self) -> Tuple[float, float]:
        return (self.config.snr_low, self.config.snr_high)

    def baseline_spec(self) -> SystemSpec:
        return SystemSpec("baseline", mixup=False)

    def margin_mixup_spec(self, name: str = "margin_mixup", **overrides) -> SystemSpec:
        beta = BetaParams(self.config.beta_alpha, self.config.beta_beta)
        return SystemSpec(name, mixup=True, **{"beta_params": beta, **overrides})

    def run_headline(self) -> ResultTable:
        """Baseline vs. margin-mixup on the clean and overlapped sets (4 rows)"""
        specs = [self.baseline_spec(), self.margin_mixup_spec()]
        table = self._result_table(specs, [None, self.overlap_range])
        return self._save(table, "headline")

    def run_ablation(self) -> ResultTable:
        """
        Full margin-mixup and the λ-override variants

        A forces λ = 1 in the margin split, B in the loss combination, C in
        both (input mixup as pure augmentation). The baseline is included as
        a labelled reference row.
        """
        specs = [self.baseline_spec(), self.margin_mixup_spec("full")]
        for fix_margin, fix_loss in ((True, False), (False, True), (True, True)):
            ablation = MixupAblation(fix_margin_lambda=fix_margin, fix_loss_lambda=fix_loss)
            specs.append(self.margin_mixup_spec(ablation.label, ablation=ablation))
        table = self._result_table(specs, [None, self.overlap_range])
        return self._save(table, "ablation")

    def run_beta_sweep(self, alphas: Optional[Sequence[float]] = None) -> ResultTable:
        """
        One margin-mixup system per α = β, plus the baseline

        Args:
            alphas: α values to train (defaults to beta_grid)
        """
        alphas = self.config.beta_grid if alphas is None else tuple(alphas)
        if not alphas or any(alpha <= 0 for alpha in alphas):
            raise ValueError(f"Beta sweep needs positive α values, got {list(alphas)}")
        specs = [self.baseline_spec()] + [
            SystemSpec(f"beta_{alpha:g}", mixup=True, beta_params=BetaParams(alpha, alpha))
            for alpha in alphas
        ]
        conditions = [None, (0.0, 0.0), (2.0, 2.0), self.overlap_range]
        table = self._result_table(specs, conditions)
        return self._save(table, "beta_sweep")

    def run_snr_sweep(self, snr_grid: Optional[Sequence[float]] = None) -> ResultTable:
        """
        Baseline and margin-mixup at every fixed SNR (long form with snr_db)

        Args:
            snr_grid: SNRs in dB (defaults to the configured snr_grid)
        """
        snr_grid = self.config.snr_grid if snr_grid is None else tuple(snr_grid)
        if not snr_grid:
            raise ValueError("SNR sweep needs at least one SNR")
        specs = [self.baseline_spec(), self.margin_mixup_spec()]
        conditions = [(float(snr), float(snr)) for snr in snr_grid]
        table = self._result_table(specs, conditions, with_snr=True)
        return self._save(table, "snr_sweep")

    def dump_embeddings(
        self,
        speaker_a: Optional[int] = None,
        speaker_b: Optional[int] = None,
        spec: Optional[SystemSpec] = None,
    ) -> pd.DataFrame:
        """Embedding table of two evaluation speakers and their mixtures over snr_grid"""
        ids = self.eval_bank.speaker_ids
        speaker_a = ids[0] if speaker_a is None else speaker_a
        speaker_b = ids[1] if speaker_b is None else speaker_b
        spec = spec or self.margin_mixup_spec()
        model = self.train_system(spec)
        table = dump_mixture_embeddings(
            model,
            self.eval_bank,
            speaker_a,
            speaker_b,
            self.config.snr_grid,
            frame_ms=self.config.frame_ms,
            hop_ms=self.config.hop_ms,
        )
        if self.output_dir is not None:
            table.to_csv(
                os.path.join(self.paths["tables"], f"embeddings_{spec.name}.csv"), index=False
            )
        return table


SUITES: Dict[str, Callable[[ExperimentRunner], ResultTable]] = {
    "headline": ExperimentRunner.run_headline,
    "ablation": ExperimentRunner.run_ablation,
    "beta-sweep": ExperimentRunner.run_beta_sweep,
    "snr-sweep": ExperimentRunner.run_snr_sweep,
}


def run_headline(config: ExperimentConfig = None, **runner_args) -> ResultTable:
    return ExperimentRunner(config, **runner_args).run_headline()


def run_ablation(config: ExperimentConfig = None, **runner_args) -> ResultTable:
    return ExperimentRunner(config, **runner_args).run_ablation()


def run_beta_sweep(
    config: ExperimentConfig = None, alphas: Optional[Sequence[float]] = None, **runner_args
) -> ResultTable:
    return ExperimentRunner(config, **runner_args).run_beta_sweep(alphas)


def run_snr_sweep(
    config: ExperimentConfig = None, snr_grid: Optional[Sequence[float]] = None, **runner_args
) -> ResultTable:
    return ExperimentRunner(config, **runner_args).run_snr_sweep(snr_grid)
