"""Deterministic single-instance trainer with a two-group Adam.

Weights update at lr_weights, the trainable activation parameters at
lr_activation; both share one Adam state machine. Instances are
visited in a seeded shuffle, one forward/backward per instance, so a
run is reproducible bit for bit.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .neuralnet import ModelConfig, ModelParams, deffsi_forward, hurst_features, init_params
from .series import LabeledDataset

__all__ = [
    "TrainConfig",
    "TrainingDiverged",
    "train",
    "evaluate",
    "split_dataset",
    "accuracy_score",
    "macro_f1_score",
]


@dataclass(frozen=True)
class TrainConfig:
    lr_weights: float = 3e-4
    lr_activation: float = 5e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    epochs: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.lr_weights <= 0 or self.lr_activation <= 0:
            raise ValueError("learning rates must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")


class TrainingDiverged(RuntimeError):
    """Loss left the finite range; message names epoch and instance."""


def _is_activation_param(name: str) -> bool:
    return name.startswith("act.")


class _Adam:
    def __init__(self, params: ModelParams, cfg: TrainConfig):
        self.cfg = cfg
        self.step_count = 0
        self.m = {k: np.zeros_like(t.data) for k, t in params.tensors.items()}
        self.v = {k: np.zeros_like(t.data) for k, t in params.tensors.items()}

    def step(self, params: ModelParams):
        self.step_count += 1
        c = self.cfg
        bc1 = 1.0 - c.adam_beta1**self.step_count
        bc2 = 1.0 - c.adam_beta2**self.step_count
        for name, tensor in params.tensors.items():
            if tensor.grad is None:
                continue
            g = tensor.grad
            m = self.m[name]
            v = self.v[name]
            m *= c.adam_beta1
            m += (1.0 - c.adam_beta1) * g
            v *= c.adam_beta2
            v += (1.0 - c.adam_beta2) * g * g
            lr = c.lr_activation if _is_activation_param(name) else c.lr_weights
            tensor.data = tensor.data - lr * (m / bc1) / (np.sqrt(v / bc2) + c.adam_eps)


def _precompute_features(dataset: LabeledDataset, model_cfg: ModelConfig) -> list[np.ndarray]:
    return [hurst_features(doc, model_cfg) for doc, _ in dataset.items]


def _instance_loss_and_logits(doc, target, model_cfg, params, fv):
    logits = deffsi_forward(doc, model_cfg, params, fv=fv)
    loss = ad.cross_entropy(logits, target)
    return loss, logits


def _targets(dataset: LabeledDataset, idx: int):
    if dataset.tag_sequences is not None:
        return np.asarray(dataset.tag_sequences[idx], dtype=np.int64)
    return dataset.items[idx][1]


def train(
    dataset: LabeledDataset,
    cfg: TrainConfig,
    model_cfg: ModelConfig,
    params: ModelParams | None = None,
    features: list[np.ndarray] | None = None,
) -> tuple[ModelParams, list[dict]]:
    """Run the full loop; returns params and per-epoch history.

    history entries are {"epoch", "loss", "accuracy"} with the mean
    training loss and training accuracy of that pass. Non-finite loss
    aborts with the offending epoch and instance in the message.
    """
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    if params is None:
        embed_dim = dataset.items[0][0].dim
        params = init_params(model_cfg, embed_dim, seed=cfg.seed)
    if features is None:
        features = _precompute_features(dataset, model_cfg)

    rng = np.random.default_rng(cfg.seed)
    optimizer = _Adam(params, cfg)
    history: list[dict] = []
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(dataset))
        losses = np.empty(len(dataset))
        hits = 0
        total = 0
        for pos, idx in enumerate(order):
            doc, _ = dataset.items[idx]
            target = _targets(dataset, int(idx))
            params.zero_grads()
            loss, logits = _instance_loss_and_logits(doc, target, model_cfg, params, features[idx])
            value = float(loss.data)
            if not np.isfinite(value):
                raise TrainingDiverged(
                    f"non-finite loss {value} at epoch {epoch}, instance {int(idx)}"
                )
            loss.backward()
            optimizer.step(params)
            losses[pos] = value
            pred = np.argmax(logits.data, axis=-1)
            hits += int(np.sum(pred == target))
            total += pred.size if hasattr(pred, "size") else 1
        history.append(
            {"epoch": epoch, "loss": float(losses.mean()), "accuracy": hits / total}
        )
    return params, history


def evaluate(
    dataset: LabeledDataset,
    model_cfg: ModelConfig,
    params: ModelParams,
    features: list[np.ndarray] | None = None,
) -> dict:
    """Accuracy and macro-F1 on a dataset with fixed parameters."""
    if features is None:
        features = _precompute_features(dataset, model_cfg)
    y_true: list[int] = []
    y_pred: list[int] = []
    for idx, (doc, _) in enumerate(dataset.items):
        target = _targets(dataset, idx)
        logits = deffsi_forward(doc, model_cfg, params, fv=features[idx])
        pred = np.argmax(logits.data, axis=-1)
        if np.ndim(pred) == 0:
            y_true.append(int(target))
            y_pred.append(int(pred))
        else:
            y_true.extend(int(v) for v in target)
            y_pred.extend(int(v) for v in pred)
    classes = model_cfg.n_classes
    return {
        "accuracy": accuracy_score(y_true, y_pred),
        "macro_f1": macro_f1_score(y_true, y_pred, classes),
    }


def accuracy_score(y_true, y_pred) -> float:
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.size == 0:
        raise ValueError("no predictions to score")
    return float(np.mean(y_true == y_pred))


def macro_f1_score(y_true, y_pred, n_classes: int) -> float:
    """Unweighted mean of per-class F1; absent classes contribute 0."""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    scores = []
    for c in range(n_classes):
        tp = float(np.sum((y_pred == c) & (y_true == c)))
        fp = float(np.sum((y_pred == c) & (y_true != c)))
        fn = float(np.sum((y_pred != c) & (y_true == c)))
        denom = 2 * tp + fp + fn
        scores.append(0.0 if denom == 0 else 2 * tp / denom)
    return float(np.mean(scores))


def split_dataset(
    dataset: LabeledDataset, seed: int, ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)
) -> tuple[LabeledDataset, LabeledDataset, LabeledDataset]:
    """Seeded train/validation/test split preserving item order within parts."""
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError("split ratios must sum to 1")
    n = len(dataset)
    order = np.random.default_rng(seed).permutation(n)
    n_train = int(round(ratios[0] * n))
    n_val = int(round(ratios[1] * n))
    parts = (order[:n_train], order[n_train : n_train + n_val], order[n_train + n_val :])

    def build(indices) -> LabeledDataset:
        items = [dataset.items[i] for i in indices]
        tags = None
        if dataset.tag_sequences is not None:
            tags = [dataset.tag_sequences[i] for i in indices]
        return LabeledDataset(items=items, n_classes=dataset.n_classes, tag_sequences=tags)

    return tuple(build(p) for p in parts)
