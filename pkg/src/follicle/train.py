"""Training loop, per-epoch history, and evaluation."""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .config import TrainConfig
from .errors import ParamError, TrainingDiverged
from .metrics import ConfusionMatrix
from .nn import NUM_CLASSES, Adam, Model, build_model, cross_entropy
from .seeding import seed_stream

EVAL_BATCH = 64


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float


def _check_inputs(x: np.ndarray, y: np.ndarray, input_size: int, what: str) -> None:
    if len(x) == 0:
        raise ParamError(f"{what} set is empty")
    if x.ndim != 4 or x.shape[1:] != (input_size, input_size, 3):
        raise ParamError(f"{what} images must be (N, {input_size}, {input_size}, 3), got {x.shape}")
    if len(y) != len(x):
        raise ParamError(f"{what} labels length {len(y)} != images {len(x)}")


def eval_loss_acc(model: Model, x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Mean loss and accuracy in eval mode (dropout off)."""
    losses, correct = 0.0, 0
    for start in range(0, len(x), EVAL_BATCH):
        xb, yb = x[start : start + EVAL_BATCH], y[start : start + EVAL_BATCH]
        probs = model.forward(xb, train=False)
        losses += cross_entropy(probs, yb) * len(xb)
        correct += int((probs.argmax(axis=1) == yb).sum())
    return losses / len(x), correct / len(x)


def train(
    config: TrainConfig,
    train_x: np.ndarray,
    train_y: np.ndarray,
    val_x: np.ndarray,
    val_y: np.ndarray,
    model: Model | None = None,
) -> tuple[Model, Adam, list[EpochRecord]]:
    """Train for config.epochs and return the final-epoch model.

    The train set is reshuffled every epoch from a seeded stream; Adam
    updates once per batch (a short final batch is allowed). Train metrics
    are averaged over batches as trained (dropout active); validation runs
    in eval mode after each epoch.
    """
    _check_inputs(train_x, train_y, config.input_size, "train")
    _check_inputs(val_x, val_y, config.input_size, "validation")
    if model is None:
        model = build_model(config)
    adam = Adam(
        model.params(),
        lr=config.adam.learning_rate,
        beta1=config.adam.beta1,
        beta2=config.adam.beta2,
        eps=config.adam.epsilon,
    )
    shuffle_rng = seed_stream(config.seed, "shuffle")
    dropout_rng = seed_stream(config.seed, "dropout")

    history: list[EpochRecord] = []
    n = len(train_x)
    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(n)
        loss_sum, correct = 0.0, 0
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            xb, yb = train_x[batch], train_y[batch]
            probs = model.forward(xb, train=True, rng=dropout_rng)
            loss = cross_entropy(probs, yb)
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}, batch {start // config.batch_size}"
                )
            loss_sum += loss * len(xb)
            correct += int((probs.argmax(axis=1) == yb).sum())
            model.backward(probs, yb)
            adam.step()
        val_loss, val_acc = eval_loss_acc(model, val_x, val_y)
        history.append(
            EpochRecord(
                epoch=epoch,
                train_loss=loss_sum / n,
                train_acc=correct / n,
                val_loss=val_loss,
                val_acc=val_acc,
            )
        )
    return model, adam, history


def predict_classes(model: Model, x: np.ndarray) -> np.ndarray:
    """Eval-mode argmax predictions; ties break to the lowest class index."""
    preds = []
    for start in range(0, len(x), EVAL_BATCH):
        probs = model.forward(x[start : start + EVAL_BATCH], train=False)
        preds.append(probs.argmax(axis=1))
    return np.concatenate(preds)


def evaluate(model: Model, x: np.ndarray, y: np.ndarray) -> tuple[ConfusionMatrix, np.ndarray]:
    """Confusion matrix (rows true, columns predicted) and raw predictions."""
    if len(x) == 0:
        raise ParamError("evaluation set is empty")
    preds = predict_classes(model, x)
    return ConfusionMatrix.from_pairs(y, preds, NUM_CLASSES), preds


def history_to_csv(history: list[EpochRecord], config_hash: str | None = None) -> str:
    """CSV with one row per epoch; optional provenance comment line."""
    buf = io.StringIO()
    if config_hash:
        buf.write(f"# config_hash: {config_hash}\n")
    buf.write("epoch,train_loss,train_acc,val_loss,val_acc\n")
    for rec in history:
        buf.write(
            f"{rec.epoch},{rec.train_loss:.6f},{rec.train_acc:.6f},{rec.val_loss:.6f},{rec.val_acc:.6f}\n"
        )
    return buf.getvalue()


def confusion_to_csv(cm: ConfusionMatrix, class_names: tuple[str, ...], config_hash: str | None = None) -> str:
    """CSV of counts; first column is the true class name."""
    buf = io.StringIO()
    if config_hash:
        buf.write(f"# config_hash: {config_hash}\n")
    buf.write("true_class," + ",".join(f"pred_{n}" for n in class_names) + "\n")
    for k, name in enumerate(class_names):
        buf.write(name + "," + ",".join(str(int(v)) for v in cm.counts[k]) + "\n")
    return buf.getvalue()
