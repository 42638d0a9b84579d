"""Training, evaluation, and deterministic sweeps over system variants.

Three variants share one code path through the channel:

* ``RIS``            -- direct path plus the phase-aligned reflected cascade,
* ``POINT_TO_POINT`` -- the same path with all reflection amplitudes zero,
* ``UPPER_BOUND``    -- the channel is bypassed entirely (noiseless features).

Every random draw comes from a stream derived from
``(master_seed, run_seed, stream id, epoch/batch indices)``, so runs are
reproducible byte-for-byte, and evaluation cells that differ only in the
CSI error scale (or only in the variant) see identical channel and noise
realizations, which turns cross-cell comparisons into paired tests.

Training follows the joint end-to-end recipe: encode, normalize, propagate
through the fading channel at the training SNR with perfect CSI, decode,
teacher-forced cross-entropy, backprop, clipped SGD (or Adam via config).
A fixed epoch count runs to completion and the parameters with the best
validation loss are retained.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .autodiff import Tensor, backward, softmax
from .channel import (
    CsiErrorModel,
    NoiseModel,
    align_phases,
    apply_channel,
    derotate,
    effective_gain,
    perturb_csi,
    sample_channel_batch,
    snr_to_sigma,
    zero_reflection,
)
from .errors import ConfigError, NumericalError
from .metrics import BleuConfig, LossInputs, corpus_bleu, cross_entropy_loss
from .model import ShapeConfig, Transceiver, save_checkpoint
from .text import (
    PAD_ID,
    TokenBatch,
    Vocabulary,
    build_vocab,
    encode_corpus,
    length_filter,
    load_corpus,
    make_batches,
    strip_special_ids,
)

RESULT_HEADER = "variant,snr_db,epsilon,seed,bleu1,bleu2,mean_loss,n_sentences"
INCOMPLETE_MARKER = "INCOMPLETE"

# Stream ids for derived seeds; never reuse a number.
_STREAM_INIT = 0
_STREAM_SHUFFLE = 1
_STREAM_CHANNEL = 2
_STREAM_NOISE = 3
_STREAM_CSI = 4
_STREAM_VAL_CHANNEL = 5
_STREAM_VAL_NOISE = 6
_STREAM_SPLIT = 7


class SystemVariant(Enum):
    RIS = "RIS"
    POINT_TO_POINT = "POINT_TO_POINT"
    UPPER_BOUND = "UPPER_BOUND"


def derive_seed(*parts: int) -> np.random.SeedSequence:
    """Deterministic child seed from integer path components."""
    return np.random.SeedSequence([int(p) for p in parts])


@dataclass(frozen=True)
class OptimizerSettings:
    kind: str = "sgd"
    learning_rate: float = 0.1
    momentum: float = 0.0
    clip_norm: float = 1.0
    epochs: int = 30

    def __post_init__(self):
        if self.kind not in ("sgd", "adam"):
            raise ConfigError(f"optimizer must be 'sgd' or 'adam', got {self.kind!r}")
        if self.learning_rate <= 0.0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.clip_norm < 0.0:
            raise ConfigError(f"clip_norm must be >= 0 (0 disables), got {self.clip_norm}")


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: model shape, channel, training recipe, sweep axes, paths."""

    train_corpus: Path
    test_corpus: Path
    checkpoint_dir: Path
    results_path: Path
    vocab_path: Path
    max_len: int = 22
    embed_dim: int = 64
    num_heads: int = 4
    num_layers: int = 2
    ffn_width: int = 128
    symbols_per_token: int = 8
    feature_dim: int = 64
    max_vocab: int = 4000
    min_freq: int = 1
    min_words: int = 4
    n_elements: int = 10
    train_snr_db: float = 7.0
    train_batch_size: int = 64
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    val_fraction: float = 0.1
    eval_snrs_db: tuple[float, ...] = (0.0, 3.0, 6.0, 9.0, 12.0, 15.0, 18.0)
    csi_error_scales: tuple[float, ...] = (0.0,)
    seeds: tuple[int, ...] = (1, 2, 3)
    eval_batch_size: int = 128
    master_seed: int = 1
    variants: tuple[SystemVariant, ...] = (
        SystemVariant.RIS,
        SystemVariant.POINT_TO_POINT,
        SystemVariant.UPPER_BOUND,
    )

    def __post_init__(self):
        object.__setattr__(self, "train_corpus", Path(self.train_corpus))
        object.__setattr__(self, "test_corpus", Path(self.test_corpus))
        object.__setattr__(self, "checkpoint_dir", Path(self.checkpoint_dir))
        object.__setattr__(self, "results_path", Path(self.results_path))
        object.__setattr__(self, "vocab_path", Path(self.vocab_path))
        if not self.seeds:
            raise ConfigError("seed list is empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError(f"seed list has duplicates: {self.seeds}")
        if not self.eval_snrs_db:
            raise ConfigError("evaluation SNR list is empty")
        if any(s < 0.0 for s in self.csi_error_scales):
            raise ConfigError(f"CSI error scales must be >= 0: {self.csi_error_scales}")
        if not self.variants:
            raise ConfigError("variant list is empty")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ConfigError(f"val_fraction must be in [0, 1), got {self.val_fraction}")
        if self.min_words < 1:
            raise ConfigError(f"min_words must be >= 1, got {self.min_words}")
        if self.max_vocab < 5:
            raise ConfigError(f"max_vocab must exceed the reserved ids, got {self.max_vocab}")
        if self.n_elements < 1:
            raise ConfigError(f"n_elements must be >= 1, got {self.n_elements}")
        if self.eval_batch_size < 1:
            raise ConfigError(f"eval batch_size must be >= 1, got {self.eval_batch_size}")

    @property
    def max_words(self) -> int:
        """Longest sentence the fixed row layout can hold (START/END take 2 slots)."""
        return self.max_len - 2

    def shape_config(self, vocab_size: int) -> ShapeConfig:
        return ShapeConfig(
            vocab_size=vocab_size,
            max_len=self.max_len,
            embed_dim=self.embed_dim,
            num_heads=self.num_heads,
            num_layers=self.num_layers,
            ffn_width=self.ffn_width,
            symbols_per_token=self.symbols_per_token,
            feature_dim=self.feature_dim,
            batch_size=self.train_batch_size,
        )

    def checkpoint_path(self, variant: SystemVariant, seed: int) -> Path:
        return self.checkpoint_dir / f"{variant.value.lower()}_seed{seed}.ckpt"

    def log_path(self, variant: SystemVariant, seed: int) -> Path:
        return self.checkpoint_dir / f"{variant.value.lower()}_seed{seed}.log"


@dataclass
class PreparedData:
    """Filtered, encoded corpora plus the concrete model shape."""

    vocab: Vocabulary
    shapes: ShapeConfig
    train_ids: np.ndarray
    val_ids: np.ndarray
    test_ids: np.ndarray


def prepare_data(config: ExperimentConfig) -> PreparedData:
    """Load corpora, filter by length, build the vocabulary, encode, split.

    The validation split is carved from the training corpus with a
    permutation derived from the master seed alone, so every variant and
    run seed trains on the same order-stable split.
    """
    train_lines = length_filter(load_corpus(config.train_corpus), config.min_words, config.max_words)
    test_lines = length_filter(load_corpus(config.test_corpus), config.min_words, config.max_words)
    if not train_lines:
        raise ConfigError(f"no usable sentences in {config.train_corpus}")
    if not test_lines:
        raise ConfigError(f"no usable sentences in {config.test_corpus}")
    vocab = build_vocab(train_lines, min_freq=config.min_freq, max_size=config.max_vocab - 4)
    shapes = config.shape_config(vocab.size)
    encoded = encode_corpus(train_lines, vocab, config.max_len)
    rng = np.random.default_rng(derive_seed(config.master_seed, _STREAM_SPLIT))
    order = rng.permutation(encoded.shape[0])
    n_val = int(round(config.val_fraction * encoded.shape[0]))
    val_ids = encoded[order[:n_val]]
    train_ids = encoded[order[n_val:]]
    test_ids = encode_corpus(test_lines, vocab, config.max_len)
    return PreparedData(vocab=vocab, shapes=shapes, train_ids=train_ids, val_ids=val_ids, test_ids=test_ids)


# -- optimizers ------------------------------------------------------------


class SgdOptimizer:
    """Plain SGD with optional momentum."""

    def __init__(self, params: list[Tensor], learning_rate: float, momentum: float = 0.0):
        self.params = params
        self.learning_rate = learning_rate
        self.momentum = momentum
        self._velocity = [np.zeros_like(p.data) for p in params] if momentum else None

    def step(self, grads: dict[Tensor, np.ndarray]) -> None:
        for i, p in enumerate(self.params):
            g = grads.get(p)
            if g is None:
                continue
            if self._velocity is not None:
                self._velocity[i] = self.momentum * self._velocity[i] + g
                g = self._velocity[i]
            p.data -= self.learning_rate * g


class AdamOptimizer:
    """Adam with the usual defaults; available behind the optimizer config
    flag as the documented desk-scale convergence aid."""

    def __init__(self, params: list[Tensor], learning_rate: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.learning_rate = learning_rate
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self._m = [np.zeros_like(p.data) for p in params]
        self._v = [np.zeros_like(p.data) for p in params]
        self._t = 0

    def step(self, grads: dict[Tensor, np.ndarray]) -> None:
        self._t += 1
        b1, b2 = self.beta1, self.beta2
        for i, p in enumerate(self.params):
            g = grads.get(p)
            if g is None:
                continue
            self._m[i] = b1 * self._m[i] + (1 - b1) * g
            self._v[i] = b2 * self._v[i] + (1 - b2) * g * g
            m_hat = self._m[i] / (1 - b1**self._t)
            v_hat = self._v[i] / (1 - b2**self._t)
            p.data -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)


def make_optimizer(settings: OptimizerSettings, params: list[Tensor]):
    if settings.kind == "adam":
        return AdamOptimizer(params, settings.learning_rate)
    return SgdOptimizer(params, settings.learning_rate, settings.momentum)


def clip_gradients(grads: dict[Tensor, np.ndarray], max_norm: float) -> float:
    """Scale all gradients so their global L2 norm is at most ``max_norm``
    (0 disables).  Returns the pre-clip norm."""
    total = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))
    if max_norm > 0.0 and total > max_norm:
        scale = max_norm / total
        for g in grads.values():
            g *= scale
    return total


# -- the shared channel path ----------------------------------------------


def pass_through_channel(
    symbols: Tensor,
    variant: SystemVariant,
    n_elements: int,
    snr_db: float,
    csi_error_scale: float,
    channel_seed,
    noise_seed,
    csi_seed,
) -> Tensor:
    """Propagate a (B, M, 2) symbol Tensor under one system variant.

    One channel realization per batch row (block fading).  The receiver's
    CSI estimate drives the reflection phases and the derotation; the true
    coefficients drive the propagation.  UPPER_BOUND returns the symbols
    untouched and consumes no randomness.
    """
    if variant is SystemVariant.UPPER_BOUND:
        return symbols
    batch = symbols.shape[0]
    channels = sample_channel_batch(batch, n_elements, channel_seed)
    estimate = perturb_csi(channels, CsiErrorModel(csi_error_scale), csi_seed)
    if variant is SystemVariant.RIS:
        reflection = align_phases(estimate)
    else:
        reflection = zero_reflection(n_elements, batch_shape=(batch,))
    gain = effective_gain(channels, reflection)
    received = apply_channel(symbols, gain, NoiseModel(snr_to_sigma(snr_db)), noise_seed)
    return derotate(received, estimate.direct_phase)


def _teacher_forced_loss(model: Transceiver, batch: TokenBatch, received: Tensor) -> Tensor:
    features = model.channel_decode(received)
    prefix = batch.ids[:, :-1]
    targets = batch.ids[:, 1:]
    logits = model.semantic_decode(features, prefix)
    probs = softmax(logits, axis=-1)
    return cross_entropy_loss(LossInputs(probs, targets, targets == PAD_ID))


def _batch_loss(
    model: Transceiver,
    batch: TokenBatch,
    variant: SystemVariant,
    config: ExperimentConfig,
    snr_db: float,
    csi_error_scale: float,
    channel_seed,
    noise_seed,
    csi_seed,
) -> Tensor:
    stream = model.channel_encode(model.semantic_encode(batch))
    received = pass_through_channel(
        stream.symbols, variant, config.n_elements, snr_db,
        csi_error_scale, channel_seed, noise_seed, csi_seed,
    )
    return _teacher_forced_loss(model, batch, received)


# -- training --------------------------------------------------------------


@dataclass
class TrainOutcome:
    """Best parameters plus the per-epoch log of one training run."""

    state: dict[str, np.ndarray]
    log_lines: list[str]
    best_epoch: int
    best_val_loss: float


def train(
    config: ExperimentConfig,
    data: PreparedData,
    variant: SystemVariant,
    seed: int,
    progress=None,
) -> TrainOutcome:
    """Train one variant at one seed; returns the best-validation state.

    Raises NumericalError as soon as a batch loss goes non-finite.  With an
    empty validation split the training loss stands in for retention.
    ``progress`` (if given) is called with each completed epoch's log line.
    """
    model = Transceiver.init(data.shapes, derive_seed(config.master_seed, seed, _STREAM_INIT))
    optimizer = make_optimizer(config.optimizer, model.params.tensors())
    log_lines = ["epoch,mean_loss,val_loss"]
    best_val = np.inf
    best_state = model.params.copy_state()
    best_epoch = 0
    for epoch in range(config.optimizer.epochs):
        total, rows = 0.0, 0
        batches = make_batches(
            data.train_ids,
            config.train_batch_size,
            shuffle_seed=derive_seed(config.master_seed, seed, _STREAM_SHUFFLE, epoch),
        )
        for bi, batch in enumerate(batches):
            loss = _batch_loss(
                model, batch, variant, config, config.train_snr_db, 0.0,
                derive_seed(config.master_seed, seed, _STREAM_CHANNEL, epoch, bi),
                derive_seed(config.master_seed, seed, _STREAM_NOISE, epoch, bi),
                derive_seed(config.master_seed, seed, _STREAM_CSI, epoch, bi),
            )
            value = loss.item()
            if not np.isfinite(value):
                raise NumericalError(
                    f"{variant.value} seed {seed}: loss became {value} at epoch {epoch}, batch {bi}"
                )
            grads = backward(loss)
            clip_gradients(grads, config.optimizer.clip_norm)
            optimizer.step(grads)
            total += value * batch.batch_size
            rows += batch.batch_size
        mean_loss = total / rows
        val_loss = _validation_loss(model, data, variant, config, seed)
        retained = mean_loss if np.isnan(val_loss) else val_loss
        line = f"{epoch},{mean_loss!r},{val_loss!r}"
        log_lines.append(line)
        if progress is not None:
            progress(line)
        if retained < best_val:
            best_val = retained
            best_state = model.params.copy_state()
            best_epoch = epoch
    return TrainOutcome(state=best_state, log_lines=log_lines, best_epoch=best_epoch, best_val_loss=best_val)


def _validation_loss(
    model: Transceiver,
    data: PreparedData,
    variant: SystemVariant,
    config: ExperimentConfig,
    seed: int,
) -> float:
    """Teacher-forced loss on the validation split under frozen channel
    draws (the same realizations every epoch, so the curve is comparable)."""
    if data.val_ids.shape[0] == 0:
        return float("nan")
    total, rows = 0.0, 0
    for bi, batch in enumerate(make_batches(data.val_ids, config.eval_batch_size)):
        loss = _batch_loss(
            model, batch, variant, config, config.train_snr_db, 0.0,
            derive_seed(config.master_seed, seed, _STREAM_VAL_CHANNEL, bi),
            derive_seed(config.master_seed, seed, _STREAM_VAL_NOISE, bi),
            derive_seed(config.master_seed, seed, _STREAM_CSI, bi),
        )
        total += loss.item() * batch.batch_size
        rows += batch.batch_size
    return total / rows


def save_outcome(config: ExperimentConfig, variant: SystemVariant, seed: int, outcome: TrainOutcome) -> Path:
    """Write checkpoint and training log atomically; returns the checkpoint path."""
    config.checkpoint_dir.mkdir(parents=True, exist_ok=True)
    path = config.checkpoint_path(variant, seed)
    tmp = path.with_suffix(".tmp")
    save_checkpoint(tmp, outcome.state)
    os.replace(tmp, path)
    log_path = config.log_path(variant, seed)
    log_tmp = log_path.with_suffix(".logtmp")
    log_tmp.write_text("\n".join(outcome.log_lines) + "\n", encoding="utf-8")
    os.replace(log_tmp, log_path)
    return path


# -- evaluation ------------------------------------------------------------


@dataclass(frozen=True)
class RunResult:
    """One sweep cell: corpus BLEU and mean loss at fixed conditions."""

    variant: SystemVariant
    snr_db: float
    epsilon: float
    seed: int
    bleu1: float
    bleu2: float
    mean_loss: float
    n_sentences: int

    def csv_row(self) -> str:
        return (
            f"{self.variant.value},{self.snr_db!r},{self.epsilon!r},{self.seed},"
            f"{self.bleu1!r},{self.bleu2!r},{self.mean_loss!r},{self.n_sentences}"
        )


def evaluate(
    model: Transceiver,
    data: PreparedData,
    config: ExperimentConfig,
    variant: SystemVariant,
    snr_db: float,
    epsilon: float,
    seed: int,
) -> RunResult:
    """Greedy-decode the test corpus under one condition cell.

    BLEU-1/BLEU-2 are corpus-level over (reference, decoded) id pairs with
    the structural ids stripped; the mean loss is teacher-forced under the
    same channel realizations.  Seeds depend only on (master, seed, batch),
    so cells sharing a seed see paired channel and noise draws.
    """
    pairs: list[tuple[list[int], list[int]]] = []
    total_loss, rows = 0.0, 0
    for bi, batch in enumerate(make_batches(data.test_ids, config.eval_batch_size)):
        stream = model.channel_encode(model.semantic_encode(batch))
        received = pass_through_channel(
            stream.symbols, variant, config.n_elements, snr_db, epsilon,
            derive_seed(config.master_seed, seed, _STREAM_CHANNEL, bi),
            derive_seed(config.master_seed, seed, _STREAM_NOISE, bi),
            derive_seed(config.master_seed, seed, _STREAM_CSI, bi),
        )
        loss = _teacher_forced_loss(model, batch, received)
        total_loss += loss.item() * batch.batch_size
        rows += batch.batch_size
        decoded = model.greedy_decode(model.channel_decode(received))
        for ref_row, cand_row in zip(batch.ids, decoded.ids):
            pairs.append((strip_special_ids(ref_row), strip_special_ids(cand_row)))
    mean_loss = total_loss / rows
    if not np.isfinite(mean_loss):
        raise NumericalError(f"evaluation loss became {mean_loss} ({variant.value}, {snr_db} dB)")
    return RunResult(
        variant=variant,
        snr_db=float(snr_db),
        epsilon=float(epsilon),
        seed=seed,
        bleu1=corpus_bleu(pairs, BleuConfig({1: 1.0})),
        bleu2=corpus_bleu(pairs, BleuConfig({2: 1.0})),
        mean_loss=mean_loss,
        n_sentences=rows,
    )


def load_trained_model(config: ExperimentConfig, data: PreparedData, variant: SystemVariant, seed: int) -> Transceiver:
    path = config.checkpoint_path(variant, seed)
    if not path.exists():
        raise FileNotFoundError(f"missing checkpoint for {variant.value} seed {seed}: {path}")
    return Transceiver.from_checkpoint(data.shapes, path)


def sweep(config: ExperimentConfig, data: PreparedData) -> list[RunResult]:
    """Evaluate the full (variant, snr, epsilon, seed) grid and write the CSV.

    Rows are emitted in that nesting order.  On any failure the rows
    finished so far are written with an INCOMPLETE marker appended, then the
    error propagates.
    """
    rows: list[RunResult] = []
    models: dict[tuple[SystemVariant, int], Transceiver] = {}
    try:
        for variant in config.variants:
            for snr_db in config.eval_snrs_db:
                for epsilon in config.csi_error_scales:
                    for seed in config.seeds:
                        key = (variant, seed)
                        if key not in models:
                            models[key] = load_trained_model(config, data, variant, seed)
                        rows.append(
                            evaluate(models[key], data, config, variant, snr_db, epsilon, seed)
                        )
    except BaseException:
        write_results_csv(config.results_path, rows, complete=False)
        raise
    write_results_csv(config.results_path, rows, complete=True)
    return rows


def write_results_csv(path: str | Path, rows: list[RunResult], complete: bool = True) -> None:
    """Atomic CSV write (temp file + rename); float fields use repr so a
    rerun of the same sweep reproduces the file byte-for-byte."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [RESULT_HEADER] + [r.csv_row() for r in rows]
    if not complete:
        lines.append(INCOMPLETE_MARKER + "," * (RESULT_HEADER.count(",")))
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text("\n".join(lines) + "\n", encoding="utf-8")
    os.replace(tmp, path)


def read_results_csv(path: str | Path) -> list[RunResult]:
    """Parse a results file back; the INCOMPLETE marker raises ValueError."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != RESULT_HEADER:
        raise ValueError(f"{path} does not start with the results header")
    rows = []
    for line in lines[1:]:
        if line.startswith(INCOMPLETE_MARKER):
            raise ValueError(f"{path} holds a partial sweep (INCOMPLETE marker)")
        variant, snr, eps, seed, b1, b2, loss, n = line.split(",")
        rows.append(
            RunResult(
                variant=SystemVariant(variant),
                snr_db=float(snr),
                epsilon=float(eps),
                seed=int(seed),
                bleu1=float(b1),
                bleu2=float(b2),
                mean_loss=float(loss),
                n_sentences=int(n),
            )
        )
    return rows


def summarize(rows: list[RunResult]) -> list[str]:
    """Seed-averaged BLEU per (variant, snr, epsilon) cell, one line each."""
    groups: dict[tuple[str, float, float], list[RunResult]] = {}
    for r in rows:
        groups.setdefault((r.variant.value, r.snr_db, r.epsilon), []).append(r)
    lines = ["variant snr_db epsilon mean_bleu1 mean_bleu2"]
    for (variant, snr_db, epsilon), cell in groups.items():
        b1 = sum(r.bleu1 for r in cell) / len(cell)
        b2 = sum(r.bleu2 for r in cell) / len(cell)
        lines.append(f"{variant} {snr_db:g} {epsilon:g} {b1:.4f} {b2:.4f}")
    return lines
