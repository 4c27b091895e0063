#!/usr/bin/env python3
"""
Embedding Model Module for the Margin-Mixup Speaker Verification Toolkit

A small trainable speaker-embedding extractor:

    frames (T x F) -> affine + tanh (T x H) -> mean ‖ std pooling (2H)
                   -> affine projection (D)

with hand-written backpropagation, Adam with decoupled weight decay, a
cyclical (triangular / triangular2) learning-rate schedule and the
two-phase trainer (initial training + large-margin fine-tuning).
"""

import json
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from exceptions import (
    CheckpointError,
    InsufficientSpeakersError,
    ShapeError,
    TrainingDivergenceError,
)
from margin_loss import MarginConfig, batch_loss, predict_speakers
from mixup import BetaParams, SoftLabel, batch_mixup_plan, mix_batch, mix_labels
from speech_signal import (
    DEFAULT_FRAME_MS,
    DEFAULT_HOP_MS,
    DEFAULT_NOISE_FLOOR,
    DEFAULT_SAMPLE_RATE,
    FeatureMatrix,
    SpeakerProfile,
    UtteranceBank,
    Waveform,
    derive_seed,
    extract_features,
    extract_features_batch,
    mean_normalize,
    random_crop_batch,
    spec_augment_batch,
    stack_samples,
)

PARAM_NAMES = ("frame_W", "frame_b", "proj_W", "proj_b", "centers")
CHECKPOINT_VERSION = "margin-mixup-ckpt-v1"

# Added under the square root of the pooled variance
STD_EPSILON = 1e-8

# Seed streams
INIT_STREAM = 0
DATA_STREAM = 1
MIXUP_STREAM = 2
TRAIN_UTTERANCE_NAMESPACE = 0


@dataclass(eq=False)
class EmbeddingModel:
    """
    Extractor parameters plus AAM class centers

    Attributes:
        frame_W: F x H frame transform
        frame_b: H frame bias
        proj_W: 2H x D projection after pooling
        proj_b: D projection bias
        centers: D x N class centers
    """

    frame_W: np.ndarray
    frame_b: np.ndarray
    proj_W: np.ndarray
    proj_b: np.ndarray
    centers: np.ndarray

    def __post_init__(self):
        for name in PARAM_NAMES:
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        n_bins, hidden = self.frame_W.shape
        dim = self.proj_b.shape[0]
        expected = {
            "frame_b": (hidden,),
            "proj_W": (2 * hidden, dim),
            "proj_b": (dim,),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ShapeError(
                    f"{name} has shape {getattr(self, name).shape}, expected {shape}"
                )
        if self.centers.ndim != 2 or self.centers.shape[0] != dim:
            raise ShapeError(
                f"centers has shape {self.centers.shape}, expected ({dim}, N)"
            )
        if dim < 2 or hidden < dim:
            raise ShapeError(f"Need D >= 2 and H >= D, got D={dim}, H={hidden}")
        for name in PARAM_NAMES:
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"Parameter {name} contains non-finite values")

    @property
    def n_bins(self) -> int:
        return self.frame_W.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.frame_W.shape[1]

    @property
    def embedding_dim(self) -> int:
        return self.proj_W.shape[1]

    @property
    def n_speakers(self) -> int:
        return self.centers.shape[1]

    def parameters(self) -> Dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    @classmethod
    def from_parameters(cls, params: Dict[str, np.ndarray]) -> "EmbeddingModel":
        return cls(**{name: params[name] for name in PARAM_NAMES})

    def copy(self) -> "EmbeddingModel":
        return EmbeddingModel.from_parameters(
            {name: value.copy() for name, value in self.parameters().items()}
        )


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_model(
    n_bins: int, hidden_dim: int, embedding_dim: int, n_speakers: int, seed: int
) -> EmbeddingModel:
    """Glorot-uniform weights, zero biases, Glorot-uniform class centers"""
    rng = np.random.default_rng(seed)
    return EmbeddingModel(
        frame_W=_glorot(rng, n_bins, hidden_dim),
        frame_b=np.zeros(hidden_dim),
        proj_W=_glorot(rng, 2 * hidden_dim, embedding_dim),
        proj_b=np.zeros(embedding_dim),
        centers=_glorot(rng, embedding_dim, n_speakers),
    )


# ---------------------------------------------------------------------------
# Forward / backward


def _as_batch(model: EmbeddingModel, features) -> np.ndarray:
    if isinstance(features, FeatureMatrix):
        features = features.frames
    X = np.asarray(features, dtype=float)
    if X.ndim == 2:
        X = X[None]
    if X.ndim != 3 or X.shape[1] < 1:
        raise ShapeError(f"Features must be T x F or B x T x F, got shape {X.shape}")
    if X.shape[2] != model.n_bins:
        raise ShapeError(
            f"Features have {X.shape[2]} bins but the model expects {model.n_bins}"
        )
    return X


def _forward_cache(model: EmbeddingModel, X: np.ndarray):
    hidden = np.tanh(X @ model.frame_W + model.frame_b)
    mean = hidden.mean(axis=1)
    centered = hidden - mean[:, None, :]
    root = np.sqrt((centered**2).mean(axis=1) + STD_EPSILON)
    # Shifted so that a constant sequence pools to exactly zero std
    std = root - np.sqrt(STD_EPSILON)
    pooled = np.concatenate([mean, std], axis=1)
    embeddings = pooled @ model.proj_W + model.proj_b
    cache = {"X": X, "hidden": hidden, "centered": centered, "root": root, "pooled": pooled}
    return embeddings, cache


def _backward_cache(
    model: EmbeddingModel, cache: Dict[str, np.ndarray], grad_embeddings: np.ndarray
) -> Dict[str, np.ndarray]:
    X, hidden = cache["X"], cache["hidden"]
    n_frames = X.shape[1]
    hidden_dim = model.hidden_dim

    grad_proj_W = cache["pooled"].T @ grad_embeddings
    grad_proj_b = grad_embeddings.sum(axis=0)

    grad_pooled = grad_embeddings @ model.proj_W.T
    grad_mean = grad_pooled[:, :hidden_dim]
    grad_std = grad_pooled[:, hidden_dim:]
    grad_hidden = (
        grad_mean[:, None, :]
        + grad_std[:, None, :] * cache["centered"] / cache["root"][:, None, :]
    ) / n_frames
    grad_pre = grad_hidden * (1.0 - hidden**2)

    return {
        "frame_W": X.reshape(-1, X.shape[2]).T @ grad_pre.reshape(-1, hidden_dim),
        "frame_b": grad_pre.sum(axis=(0, 1)),
        "proj_W": grad_proj_W,
        "proj_b": grad_proj_b,
    }


def forward_batch(model: EmbeddingModel, features) -> np.ndarray:
    """Embeddings (B x D) of a B x T x F feature stack"""
    embeddings, _ = _forward_cache(model, _as_batch(model, features))
    return embeddings


def forward(model: EmbeddingModel, f: Union[FeatureMatrix, np.ndarray]) -> np.ndarray:
    """
    Embedding of one utterance

    Args:
        model: Extractor
        f: FeatureMatrix (or T x F array) with model.n_bins bins

    Returns:
        ndarray: length-D embedding
    """
    return forward_batch(model, f)[0]


def backward(
    model: EmbeddingModel, f, loss_grad_e: np.ndarray
) -> Dict[str, np.ndarray]:
    """
    Gradients of <loss_grad_e, forward(model, f)> w.r.t. the extractor parameters

    Accepts a single utterance with a length-D gradient, or a B x T x F stack
    with a B x D gradient (gradients summed over the batch).

    Returns:
        dict: frame_W, frame_b, proj_W, proj_b gradients
    """
    X = _as_batch(model, f)
    grad = np.atleast_2d(np.asarray(loss_grad_e, dtype=float))
    if grad.shape != (X.shape[0], model.embedding_dim):
        raise ShapeError(
            f"Upstream gradient has shape {grad.shape}, expected "
            f"({X.shape[0]}, {model.embedding_dim})"
        )
    _, cache = _forward_cache(model, X)
    return _backward_cache(model, cache, grad)


def embed_waveform(
    model: EmbeddingModel,
    w: Waveform,
    frame_ms: float = DEFAULT_FRAME_MS,
    hop_ms: float = DEFAULT_HOP_MS,
) -> np.ndarray:
    """Clean-path embedding: features -> mean normalization -> forward"""
    features = extract_features(w, frame_ms, hop_ms, model.n_bins)
    return forward(model, mean_normalize(features))


def embed_waveforms(
    model: EmbeddingModel,
    waveforms: Sequence[Waveform],
    frame_ms: float = DEFAULT_FRAME_MS,
    hop_ms: float = DEFAULT_HOP_MS,
    chunk_size: int = 128,
) -> np.ndarray:
    """
    Clean-path embeddings of many waveforms (N x D)

    Equal-length waveforms are featurized and embedded together; results
    match embed_waveform row by row.
    """
    embeddings = np.empty((len(waveforms), model.embedding_dim))
    by_shape: Dict[Tuple[int, int], List[int]] = {}
    for index, w in enumerate(waveforms):
        by_shape.setdefault((len(w), w.sample_rate), []).append(index)

    for (_, sample_rate), indices in by_shape.items():
        for start in range(0, len(indices), chunk_size):
            chunk = indices[start : start + chunk_size]
            features = extract_features_batch(
                stack_samples([waveforms[i] for i in chunk]),
                sample_rate,
                frame_ms,
                hop_ms,
                model.n_bins,
            )
            features = features - features.mean(axis=1, keepdims=True)
            embeddings[chunk] = forward_batch(model, features)
    return embeddings


# ---------------------------------------------------------------------------
# Optimization


@dataclass(eq=False)
class OptimizerState:
    """Adam moments, step counter and constants"""

    m: Dict[str, np.ndarray]
    v: Dict[str, np.ndarray]
    step: int = 0
    weight_decay: float = 2e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_parameters(
        cls, params: Dict[str, np.ndarray], weight_decay: float = 2e-4, **constants
    ) -> "OptimizerState":
        return cls(
            m={name: np.zeros_like(value) for name, value in params.items()},
            v={name: np.zeros_like(value) for name, value in params.items()},
            weight_decay=weight_decay,
            **constants,
        )


def adam_step(
    state: OptimizerState,
    params: Dict[str, np.ndarray],
    grads: Dict[str, np.ndarray],
    lr: float,
) -> Tuple[Dict[str, np.ndarray], OptimizerState]:
    """
    One bias-corrected Adam update with decoupled weight decay

    p <- p − lr·wd·p − lr·m̂ / (sqrt(v̂) + eps)

    Returns:
        tuple: (new parameters, new optimizer state); inputs are not modified
    """
    if set(params) != set(grads) or set(params) != set(state.m):
        raise ShapeError(
            f"Parameter groups {sorted(params)} do not match gradients "
            f"{sorted(grads)} / optimizer state {sorted(state.m)}"
        )
    for name, grad in grads.items():
        if np.shape(grad) != np.shape(params[name]):
            raise ShapeError(
                f"Gradient for {name} has shape {np.shape(grad)}, "
                f"expected {np.shape(params[name])}"
            )
        if not np.all(np.isfinite(grad)):
            raise TrainingDivergenceError(
                f"Non-finite gradient for {name} at optimizer step {state.step + 1}"
            )

    step = state.step + 1
    bias1 = 1.0 - state.beta1**step
    bias2 = 1.0 - state.beta2**step
    new_params, new_m, new_v = {}, {}, {}
    for name, param in params.items():
        grad = np.asarray(grads[name], dtype=float)
        m = state.beta1 * state.m[name] + (1.0 - state.beta1) * grad
        v = state.beta2 * state.v[name] + (1.0 - state.beta2) * grad**2
        update = (m / bias1) / (np.sqrt(v / bias2) + state.eps)
        new_params[name] = param * (1.0 - lr * state.weight_decay) - lr * update
        new_m[name], new_v[name] = m, v

    new_state = OptimizerState(
        m=new_m,
        v=new_v,
        step=step,
        weight_decay=state.weight_decay,
        beta1=state.beta1,
        beta2=state.beta2,
        eps=state.eps,
    )
    return new_params, new_state


CLR_MODES = ("triangular", "triangular2")


@dataclass(frozen=True)
class ClrSchedule:
    """Cyclical learning rate between lr_min and lr_max"""

    lr_min: float = 1e-8
    lr_max: float = 1e-3
    cycle_len: int = 1500
    mode: str = "triangular2"

    def __post_init__(self):
        if not 0 < self.lr_min < self.lr_max:
            raise ValueError(
                f"Need 0 < lr_min < lr_max, got {self.lr_min} / {self.lr_max}"
            )
        if self.cycle_len <= 0:
            raise ValueError(f"Cycle length must be positive, got {self.cycle_len}")
        if self.mode not in CLR_MODES:
            raise ValueError(f"Unknown CLR mode {self.mode!r}; expected one of {CLR_MODES}")


def clr_lr(schedule: ClrSchedule, step: int) -> float:
    """
    Learning rate at a step

    Triangle from lr_min up to the peak at cycle_len / 2 and back; in
    triangular2 mode the peak height halves after every full cycle.
    """
    if step < 0:
        raise ValueError(f"Step must be non-negative, got {step}")
    cycle = step // schedule.cycle_len
    position = (step % schedule.cycle_len) / schedule.cycle_len
    height = 1.0 - abs(2.0 * position - 1.0)
    amplitude = schedule.lr_max - schedule.lr_min
    if schedule.mode == "triangular2":
        amplitude *= 0.5**cycle
    return schedule.lr_min + amplitude * height


# ---------------------------------------------------------------------------
# Training


@dataclass(frozen=True)
class MixupAblation:
    """λ overrides isolating the margin-mixup components"""

    fix_margin_lambda: bool = False
    fix_loss_lambda: bool = False

    @property
    def label(self) -> str:
        return {
            (False, False): "full",
            (True, False): "A",
            (False, True): "B",
            (True, True): "C",
        }[(self.fix_margin_lambda, self.fix_loss_lambda)]


@dataclass(frozen=True)
class TrainPhaseConfig:
    """
    One training phase

    The initial phase uses the base margin with augmentation; large-margin
    fine-tuning raises the margin and crop length and disables augmentation.
    """

    name: str = "initial"
    margin: float = 0.2
    crop_s: float = 2.0
    augment: bool = True
    lr_max: float = 1e-3
    lr_min: float = 1e-8
    cycle_len: int = 1500
    steps: int = 3000
    mixup: bool = False
    beta_params: BetaParams = field(default_factory=BetaParams)
    ablation: MixupAblation = field(default_factory=MixupAblation)

    def __post_init__(self):
        if self.margin < 0:
            raise ValueError(f"Margin must be non-negative, got {self.margin}")
        if self.crop_s <= 0:
            raise ValueError(f"Crop length must be positive, got {self.crop_s}")
        if self.steps < 0:
            raise ValueError(f"Steps must be non-negative, got {self.steps}")

    @property
    def schedule(self) -> ClrSchedule:
        return ClrSchedule(lr_min=self.lr_min, lr_max=self.lr_max, cycle_len=self.cycle_len)

    def as_dict(self) -> Dict:
        return asdict(self)


class ModelTrainer:
    """
    Trains an EmbeddingModel on a synthetic speaker pool

    All randomness comes from one seed: model initialization, the training
    utterances, and counter-based per-step streams for data (speakers,
    utterances, crops, augmentation) and mixup (pairs, λ). The data stream
    does not depend on whether mixup is enabled, so systems trained with the
    same seed see the same crops.
    """

    def __init__(
        self,
        pool: Sequence[SpeakerProfile],
        seed: int = 0,
        n_bins: int = 24,
        hidden_dim: int = 64,
        embedding_dim: int = 32,
        batch_size: int = 32,
        sample_rate: int = DEFAULT_SAMPLE_RATE,
        frame_ms: float = DEFAULT_FRAME_MS,
        hop_ms: float = DEFAULT_HOP_MS,
        utterances_per_speaker: int = 6,
        utterance_s: float = 4.0,
        noise_floor: float = DEFAULT_NOISE_FLOOR,
        scale: float = 30.0,
        weight_decay: float = 2e-4,
        max_freq_mask: int = 3,
        max_time_mask: int = 5,
        log_interval: int = 100,
        verbose: bool = False,
    ):
        speaker_ids = sorted(profile.speaker_id for profile in pool)
        if len(speaker_ids) < 2:
            raise InsufficientSpeakersError(
                f"Training needs at least 2 speakers, got {len(speaker_ids)}"
            )
        if speaker_ids != list(range(len(speaker_ids))):
            raise ValueError("Training speaker ids must be 0 .. N-1")

        self.seed = seed
        self.n_speakers = len(speaker_ids)
        self.batch_size = batch_size
        self.sample_rate = sample_rate
        self.frame_ms = frame_ms
        self.hop_ms = hop_ms
        self.utterances_per_speaker = utterances_per_speaker
        self.scale = scale
        self.weight_decay = weight_decay
        self.max_freq_mask = max_freq_mask
        self.max_time_mask = max_time_mask
        self.log_interval = log_interval
        self.verbose = verbose

        self.bank = UtteranceBank(
            pool,
            utterance_s,
            sample_rate=sample_rate,
            seed=seed,
            namespace=TRAIN_UTTERANCE_NAMESPACE,
            noise_floor=noise_floor,
        )
        self.model = init_model(
            n_bins, hidden_dim, embedding_dim, self.n_speakers, derive_seed(seed, INIT_STREAM)
        )
        self.history: List[Dict] = []
        self.global_step = 0
        self._utterances = None

    @property
    def loss_history(self) -> pd.DataFrame:
        """Rows of (step, lr, loss, phase)"""
        return pd.DataFrame(self.history, columns=["step", "lr", "loss", "phase"])

    def save_training_log(self, path: str):
        """Write the `step,lr,loss` training log CSV"""
        self.loss_history[["step", "lr", "loss"]].to_csv(path, index=False)

    def train(self, phases: Sequence[TrainPhaseConfig]) -> EmbeddingModel:
        """Run every phase in order and return the trained model"""
        if not phases:
            raise ValueError("At least one training phase is required")
        for phase_index, phase in enumerate(phases):
            self._run_phase(phase_index, phase)
        return self.model

    def _run_phase(self, phase_index: int, phase: TrainPhaseConfig):
        if phase.steps == 0:
            return
        if self.verbose:
            mode = "margin-mixup" if phase.mixup else "no mixup"
            print(f"\n{'=' * 60}")
            print(
                f"Phase '{phase.name}': {phase.steps} steps, m={phase.margin}, "
                f"crop={phase.crop_s}s, augment={phase.augment}, {mode}"
            )
            print(f"{'=' * 60}")

        params = self.model.parameters()
        state = OptimizerState.for_parameters(params, weight_decay=self.weight_decay)
        schedule = phase.schedule
        margin = MarginConfig(m=phase.margin, s=self.scale)

        for step in range(phase.steps):
            lr = clr_lr(schedule, step)
            features, labels = self._make_batch(phase_index, step, phase)
            model = EmbeddingModel.from_parameters(params)

            embeddings, cache = _forward_cache(model, features)
            loss = batch_loss(
                embeddings,
                model.centers,
                labels,
                margin,
                fix_margin_lambda=phase.ablation.fix_margin_lambda,
                fix_loss_lambda=phase.ablation.fix_loss_lambda,
            )
            if not np.isfinite(loss.value):
                raise TrainingDivergenceError(
                    f"Non-finite loss in phase '{phase.name}' at step {step} (lr={lr:.3e})"
                )
            grads = _backward_cache(model, cache, loss.grad_e)
            grads["centers"] = loss.grad_W
            try:
                params, state = adam_step(state, params, grads, lr)
            except TrainingDivergenceError as e:
                raise TrainingDivergenceError(
                    f"Phase '{phase.name}' step {step} (lr={lr:.3e}): {e}"
                ) from e

            self.history.append(
                {"step": self.global_step, "lr": lr, "loss": loss.value, "phase": phase.name}
            )
            self.global_step += 1
            if self.verbose and (step % self.log_interval == 0 or step == phase.steps - 1):
                print(f"  step {step:5d}  lr={lr:.2e}  loss={loss.value:.4f}")

        self.model = EmbeddingModel.from_parameters(params)
        if self.verbose:
            print(f"✓ Phase '{phase.name}' completed")

    @property
    def utterances(self) -> np.ndarray:
        """N x U x n stack of the training utterances, synthesized on first use"""
        if self._utterances is None:
            self._utterances = self.bank.stack(
                range(self.n_speakers), self.utterances_per_speaker
            )
        return self._utterances

    def _make_batch(
        self, phase_index: int, step: int, phase: TrainPhaseConfig
    ) -> Tuple[np.ndarray, List[SoftLabel]]:
        rng = np.random.default_rng(derive_seed(self.seed, DATA_STREAM, phase_index, step))
        size = self.batch_size
        speakers = rng.integers(0, self.n_speakers, size)
        indices = rng.integers(0, self.utterances_per_speaker, size)
        samples = random_crop_batch(
            self.utterances[speakers, indices], phase.crop_s, self.sample_rate, rng
        )

        if phase.mixup:
            plan = batch_mixup_plan(
                size,
                phase.beta_params,
                derive_seed(self.seed, MIXUP_STREAM, phase_index, step),
            )
            labels = [
                mix_labels(int(speakers[i]), int(speakers[draw.partner_index]), draw.lam)
                for i, draw in enumerate(plan)
            ]
            samples = mix_batch(samples, plan)
        else:
            labels = [SoftLabel.one_hot(int(s)) for s in speakers]

        raw = extract_features_batch(
            samples,
            self.sample_rate,
            self.frame_ms,
            self.hop_ms,
            self.model.n_bins,
        )
        if phase.augment:
            raw = spec_augment_batch(
                raw,
                min(self.max_freq_mask, raw.shape[2]),
                min(self.max_time_mask, raw.shape[1]),
                rng,
            )
        # mean_normalize per row
        return raw - raw.mean(axis=1, keepdims=True), labels

    def training_accuracy(self) -> float:
        """Fraction of (full, clean) training utterances classified to their own speaker"""
        utterances = self.utterances
        waveforms = [
            Waveform(utterances[speaker, index], self.sample_rate)
            for speaker in range(self.n_speakers)
            for index in range(self.utterances_per_speaker)
        ]
        embeddings = embed_waveforms(self.model, waveforms, self.frame_ms, self.hop_ms)
        targets = np.repeat(np.arange(self.n_speakers), self.utterances_per_speaker)
        predicted = predict_speakers(embeddings, self.model.centers)
        return float(np.mean(predicted == targets))


def train(
    pool: Sequence[SpeakerProfile],
    phases: Sequence[TrainPhaseConfig],
    seed: int,
    **settings,
) -> EmbeddingModel:
    """Train a model on a speaker pool (see ModelTrainer for settings)"""
    return ModelTrainer(pool, seed=seed, **settings).train(phases)


# ---------------------------------------------------------------------------
# Checkpoints


def save_checkpoint(model: EmbeddingModel, path: str):
    """Write all parameter arrays with a version tag and a JSON shape header"""
    params = model.parameters()
    shapes = {name: list(value.shape) for name, value in params.items()}
    with open(path, "wb") as handle:
        np.savez(
            handle,
            version=np.array(CHECKPOINT_VERSION),
            shapes=np.array(json.dumps(shapes)),
            **params,
        )


def load_checkpoint(path: str) -> EmbeddingModel:
    """Read a checkpoint written by save_checkpoint (exact round trip)"""
    with np.load(path, allow_pickle=False) as data:
        if "version" not in data.files or str(data["version"]) != CHECKPOINT_VERSION:
            raise CheckpointError(f"{path} is not a {CHECKPOINT_VERSION} checkpoint")
        shapes = json.loads(str(data["shapes"]))
        params = {}
        for name in PARAM_NAMES:
            if name not in data.files:
                raise CheckpointError(f"{path} is missing parameter {name}")
            value = data[name].copy()
            if list(value.shape) != shapes.get(name):
                raise CheckpointError(
                    f"{path}: {name} has shape {list(value.shape)}, header says {shapes.get(name)}"
                )
            params[name] = value
    return EmbeddingModel.from_parameters(params)
