"""Closed-set pretraining and the placeholder fine-tuning loop.

Every batch of the fine-tuning loop is split into two halves: the first
feeds the classifier-placeholder loss, the second is mixed within itself
and feeds the data-placeholder loss. One optimizer step is taken on the
summed loss. All randomness flows from the config seed; identical configs
give bit-identical models.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datastore import LabeledSet
from .gradcore import Array, SgdMomentum, cross_entropy_from_logits
from .network import SplitMlp
from .placeholders import MIX_MODES, build_mix_pairs, loss_classifier_placeholder, loss_data_placeholder

TRAIN_MODES = ("baseline", "dummy_only", "mixup_only", "full")


@dataclass
class TrainConfig:
    beta: float = 1.0
    gamma: float = 0.1
    num_dummy: int = 5
    alpha: float = 2.0
    learning_rate: float = 0.001
    momentum: float = 0.9
    batch_size: int = 128
    pretrain_epochs: int = 100
    finetune_epochs: int = 50
    mix_mode: str = "hidden"
    train_mode: str = "full"
    seed: int = 0

    def __post_init__(self):
        if self.beta < 0 or self.gamma < 0:
            raise ValueError("beta and gamma must be nonnegative")
        if self.num_dummy < 1:
            raise ValueError(f"num_dummy must be at least 1, got {self.num_dummy}")
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.batch_size < 2:
            raise ValueError(f"batch_size must be at least 2, got {self.batch_size}")
        if self.pretrain_epochs < 0 or self.finetune_epochs < 0:
            raise ValueError("epoch counts must be nonnegative")
        if self.mix_mode not in MIX_MODES:
            raise ValueError(f"mix_mode must be one of {MIX_MODES}, got {self.mix_mode!r}")
        if self.train_mode not in TRAIN_MODES:
            raise ValueError(f"train_mode must be one of {TRAIN_MODES}, got {self.train_mode!r}")


def split_batch_halves(features: Array, labels: Array) -> tuple[tuple[Array, Array], tuple[Array, Array]]:
    """First ceil(B/2) rows and the remainder, order preserved."""
    n = features.shape[0]
    if n < 2:
        raise ValueError(f"cannot split a batch of {n} rows into two halves")
    cut = (n + 1) // 2
    return (features[:cut], labels[:cut]), (features[cut:], labels[cut:])


def _closed_accuracy(model: SplitMlp, dataset: LabeledSet) -> float:
    logits = model.closed_head.forward(model.embed_post(model.embed_pre(dataset.features)))
    return float((logits.argmax(axis=1) == dataset.labels).mean())


def _log(log_lines: list[str] | None, epoch: int, l1: float, l2: float, acc: float) -> None:
    if log_lines is not None:
        log_lines.append(f"{epoch}\t{l1:.6f}\t{l2:.6f}\t{acc:.6f}")


def _batches(rng: np.random.Generator, n: int, batch_size: int):
    perm = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield perm[start:start + batch_size]


def pretrain_closed(dataset: LabeledSet, config: TrainConfig,
                    log_lines: list[str] | None = None) -> SplitMlp:
    """Train a fresh model with K-way cross-entropy on the closed head only.

    The dummy head is initialised but receives no gradient. K is the number
    of distinct labels, which must be contiguous from 0.
    """
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    num_known = int(dataset.labels.max()) + 1
    if num_known < 2:
        raise ValueError(f"need at least 2 known classes, got {num_known}")
    rng = np.random.default_rng(config.seed)
    model = SplitMlp.create(dataset.dim, num_known, config.num_dummy, rng)
    optimizer = SgdMomentum(model.parameters(), config.learning_rate, config.momentum)
    for epoch in range(config.pretrain_epochs):
        losses = []
        for idx in _batches(rng, len(dataset), config.batch_size):
            xb = dataset.features[idx]
            yb = dataset.labels[idx]
            model.zero_grads()
            logits = model.closed_head.forward(model.embed_post(model.embed_pre(xb)))
            loss, d_logits = cross_entropy_from_logits(logits, yb)
            model.backward_pre(model.backward_post(model.closed_head.backward(d_logits)))
            optimizer.step(model.gradients())
            losses.append(loss)
        _log(log_lines, epoch, float(np.mean(losses)), 0.0, _closed_accuracy(model, dataset))
    return model


def finetune_placeholders(model: SplitMlp, dataset: LabeledSet, config: TrainConfig,
                          log_lines: list[str] | None = None) -> SplitMlp:
    """Fine-tune a pretrained model with the placeholder losses.

    train_mode selects the objective: "baseline" returns the model untouched,
    "dummy_only" uses the classifier-placeholder loss alone, "mixup_only"
    uses plain combined cross-entropy plus gamma times the data-placeholder
    loss, and "full" uses both placeholder terms. The mixup term is skipped
    entirely (drawing nothing from the rng) when gamma == 0 or the mode does
    not use it, so full with gamma=0 is bit-identical to dummy_only.
    """
    if config.train_mode == "baseline":
        return model
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    if dataset.labels.max() >= model.num_known:
        raise ValueError(
            f"label {dataset.labels.max()} out of range for {model.num_known} known classes"
        )
    beta = 0.0 if config.train_mode == "mixup_only" else config.beta
    use_mix = config.train_mode in ("mixup_only", "full") and config.gamma > 0
    rng = np.random.default_rng(config.seed)
    optimizer = SgdMomentum(model.parameters(), config.learning_rate, config.momentum)
    for epoch in range(config.finetune_epochs):
        l1_values = []
        l2_values = []
        for idx in _batches(rng, len(dataset), config.batch_size):
            if idx.size < 2:
                continue  # a trailing single row cannot be split
            (x1, y1), (x2, y2) = split_batch_halves(dataset.features[idx], dataset.labels[idx])
            model.zero_grads()
            l1 = loss_classifier_placeholder(model, x1, y1, beta)
            l2 = 0.0
            if use_mix:
                pairs = build_mix_pairs(y2, rng, config.alpha)
                l2 = loss_data_placeholder(model, x2, pairs, config.mix_mode,
                                           grad_scale=config.gamma)
            optimizer.step(model.gradients())
            l1_values.append(l1)
            l2_values.append(l2)
        _log(log_lines, epoch, float(np.mean(l1_values)), float(np.mean(l2_values)),
             _closed_accuracy(model, dataset))
    return model
