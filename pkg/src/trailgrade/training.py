"""Mini-batch Adam training with early stopping on held-out accuracy.

Each epoch shuffles the training set, runs batches of 32 through train-mode
forward / backward / Adam, then measures sparse categorical accuracy on both
splits in infer mode. The weights of the best test epoch are snapshotted and
returned; training stops after `patience` epochs without strict improvement
or at `max_epochs`.
"""

from dataclasses import dataclass

import numpy as np

from .errors import EmptyBatch, EmptyDataset, NumericFailure, ShapeMismatch
from .nn.adam import adam_step, init_adam
from .nn.model import ModelConfig, ModelParams, backward, build_model, conv_kernels, forward
from .nn.ops import l2_penalty, sparse_categorical_crossentropy

HISTORY_CSV_HEADER = "epoch,train_sca,test_sca,train_loss"


@dataclass(frozen=True)
class TrainConfig:
    seed: int
    batch_size: int = 32
    max_epochs: int = 1500
    patience: int = 250
    learning_rate: float = 0.001

    def __post_init__(self):
        if min(self.batch_size, self.max_epochs, self.patience) < 1 or self.learning_rate <= 0:
            raise ValueError("batch_size, max_epochs, patience, learning_rate must be positive")
        if self.patience > self.max_epochs:
            raise ValueError("patience cannot exceed max_epochs")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_sca: float
    test_sca: float
    train_loss: float


@dataclass(frozen=True)
class ConfusionMatrix:
    """counts[true][predicted] over one evaluation."""

    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.counts)) / self.total

    def to_csv(self) -> str:
        k = self.counts.shape[0]
        header = "," + ",".join(str(j) for j in range(k))
        rows = [header]
        for i in range(k):
            rows.append(f"{i}," + ",".join(str(int(c)) for c in self.counts[i]))
        return "\n".join(rows) + "\n"


@dataclass
class TrainResult:
    best_params: ModelParams
    best_epoch: int
    best_test_sca: float
    history: list
    confusion: ConfusionMatrix
    stopped_early: bool


def sparse_categorical_accuracy(probs, labels) -> float:
    """Fraction of rows whose argmax (lowest index on ties) equals the label."""
    probs = np.asarray(probs)
    labels = np.asarray(labels)
    if probs.ndim != 2 or probs.shape[0] == 0:
        raise EmptyBatch("need at least one prediction row")
    if labels.shape != (probs.shape[0],):
        raise ShapeMismatch(f"labels {labels.shape} do not match batch of {probs.shape[0]}")
    return float(np.mean(probs.argmax(axis=1) == labels))


def confusion_matrix(probs, labels, classes: int = 3) -> ConfusionMatrix:
    probs = np.asarray(probs)
    labels = np.asarray(labels)
    if probs.ndim != 2 or probs.shape[0] == 0:
        raise EmptyBatch("need at least one prediction row")
    if labels.shape != (probs.shape[0],):
        raise ShapeMismatch(f"labels {labels.shape} do not match batch of {probs.shape[0]}")
    counts = np.zeros((classes, classes), dtype=np.int64)
    np.add.at(counts, (labels, probs.argmax(axis=1)), 1)
    return ConfusionMatrix(counts)


def _stack(samples):
    data = np.stack([s.data for s in samples])
    labels = np.array([s.label for s in samples], dtype=np.int64)
    return data, labels


def _evaluate_arrays(params, data, labels, batch_size=64):
    preds = np.empty(len(data), dtype=np.int64)
    for lo in range(0, len(data), batch_size):
        probs, _ = forward(params, data[lo : lo + batch_size])
        preds[lo : lo + batch_size] = probs.argmax(axis=1)
    k = params.config.classes
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (labels, preds), 1)
    cm = ConfusionMatrix(counts)
    return cm.accuracy, cm


def evaluate(params: ModelParams, samples, batch_size: int = 32):
    """Infer-mode (accuracy, confusion matrix) over a sample set. Pure.

    The default batch size matches the training loop's evaluation batches, so
    re-evaluating a snapshot reproduces its recorded accuracy bit for bit.
    """
    if not samples:
        raise EmptyDataset("nothing to evaluate")
    data, labels = _stack(samples)
    return _evaluate_arrays(params, data, labels, batch_size)


def train(train_samples, test_samples, model_config: ModelConfig, train_config: TrainConfig) -> TrainResult:
    """Run the full training loop; deterministic given data and seed."""
    if not train_samples or not test_samples:
        raise EmptyDataset("train and test sets must be non-empty")
    train_data, train_labels = _stack(train_samples)
    test_data, test_labels = _stack(test_samples)
    expected = (model_config.window_points, 4, 3)
    if train_data.shape[1:] != expected or test_data.shape[1:] != expected:
        raise ShapeMismatch(
            f"samples of shape {train_data.shape[1:]} do not match the {expected} model input"
        )

    rng = np.random.default_rng(train_config.seed)
    params = build_model(model_config, rng)
    state = init_adam(params)
    n = len(train_data)
    # No degenerate-batch merging is needed here: batchnorm reduces over
    # B * n * 4 values per channel, which is >= 8 even for a 1-sample batch.
    history = []
    best_sca, best_epoch, best_params = -1.0, 0, None
    stopped_early = False
    for epoch in range(1, train_config.max_epochs + 1):
        perm = rng.permutation(n)
        loss_sum = 0.0
        for lo in range(0, n, train_config.batch_size):
            idx = perm[lo : lo + train_config.batch_size]
            probs, cache = forward(params, train_data[idx], train=True, rng=rng)
            ce_loss, _ = sparse_categorical_crossentropy(probs, train_labels[idx])
            penalty, _ = l2_penalty(conv_kernels(params), model_config.l2_coeff)
            loss = ce_loss + penalty
            if not np.isfinite(loss):
                raise NumericFailure(f"non-finite loss at epoch {epoch}")
            grads = backward(cache, train_labels[idx])
            adam_step(params, grads, state, lr=train_config.learning_rate)
            loss_sum += loss * len(idx)
        # evaluating at the training batch size keeps buffer shapes uniform,
        # which the allocator rewards
        train_sca, _ = _evaluate_arrays(params, train_data, train_labels, train_config.batch_size)
        test_sca, _ = _evaluate_arrays(params, test_data, test_labels, train_config.batch_size)
        history.append(EpochRecord(epoch, train_sca, test_sca, loss_sum / n))
        if test_sca > best_sca:
            best_sca, best_epoch, best_params = test_sca, epoch, params.copy()
        if epoch - best_epoch >= train_config.patience:
            stopped_early = True
            break
    _, confusion = _evaluate_arrays(best_params, test_data, test_labels, train_config.batch_size)
    return TrainResult(best_params, best_epoch, best_sca, history, confusion, stopped_early)


def history_to_csv(history) -> str:
    """`epoch,train_sca,test_sca,train_loss` rows; floats round-trip exactly."""
    rows = [HISTORY_CSV_HEADER]
    for r in history:
        rows.append(f"{r.epoch},{r.train_sca!r},{r.test_sca!r},{r.train_loss!r}")
    return "\n".join(rows) + "\n"


def history_from_csv(text):
    lines = [ln for ln in text.split("\n") if ln.strip()]
    if not lines or lines[0].strip() != HISTORY_CSV_HEADER:
        raise ValueError(f"expected header {HISTORY_CSV_HEADER!r}")
    out = []
    for line in lines[1:]:
        epoch, train_sca, test_sca, train_loss = line.split(",")
        out.append(EpochRecord(int(epoch), float(train_sca), float(test_sca), float(train_loss)))
    return out
