"""Split MLP with a closed-set head and a dummy rejection head.

The embedding is split into pre-layers and post-layers so hidden
representations can be mixed at the split point. Both heads read the same
final embedding; the dummy head's per-row max joins the closed logits as
column K of the combined logit matrix, with gradients routed only through
the selected dummy column.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gradcore import Array, DenseLayer, as_matrix, softmax_rows

DEFAULT_PRE_WIDTHS = (64, 64)
DEFAULT_POST_WIDTHS = (32, 16)
DUMMY_INIT_STD = 0.01


@dataclass
class AugmentedLogits:
    """Closed logits plus the winning dummy logit as one extra column."""

    closed: Array        # B x K
    dummy_all: Array     # B x C
    dummy_max: Array     # B
    dummy_argmax: Array  # B, lowest index on ties
    combined: Array      # B x (K+1), column K is dummy_max


class SplitMlp:
    def __init__(self, pre_layers: list[DenseLayer], post_layers: list[DenseLayer],
                 closed_head: DenseLayer, dummy_head: DenseLayer,
                 input_dim: int, calibration_bias: float = 0.0):
        if closed_head.out_dim < 2:
            raise ValueError(f"need at least 2 known classes, got {closed_head.out_dim}")
        if dummy_head.out_dim < 1:
            raise ValueError("need at least 1 dummy classifier")
        if closed_head.in_dim != dummy_head.in_dim:
            raise ValueError(
                f"heads disagree on embedding width: {closed_head.in_dim} vs {dummy_head.in_dim}"
            )
        self.pre_layers = pre_layers
        self.post_layers = post_layers
        self.closed_head = closed_head
        self.dummy_head = dummy_head
        self.input_dim = input_dim
        self.calibration_bias = calibration_bias

    @classmethod
    def create(cls, input_dim: int, num_known: int, num_dummy: int, rng: np.random.Generator,
               pre_widths: tuple[int, ...] = DEFAULT_PRE_WIDTHS,
               post_widths: tuple[int, ...] = DEFAULT_POST_WIDTHS) -> SplitMlp:
        """Build the default architecture: relu pre-layers, relu post-layers
        with a final linear embedding, linear heads. `pre_widths` may be empty,
        which makes the pre-embedding the identity (mixing then happens on raw
        inputs). `post_widths` must end with the embedding width."""
        if not post_widths:
            raise ValueError("post_widths must contain at least the embedding width")
        pre_layers = []
        width = input_dim
        for w in pre_widths:
            pre_layers.append(DenseLayer.create(width, w, "relu", rng))
            width = w
        post_layers = []
        for i, w in enumerate(post_widths):
            act = "linear" if i == len(post_widths) - 1 else "relu"
            post_layers.append(DenseLayer.create(width, w, act, rng))
            width = w
        closed_head = DenseLayer.create(width, num_known, "linear", rng)
        dummy_head = DenseLayer.create(width, num_dummy, "linear", rng, weight_std=DUMMY_INIT_STD)
        return cls(pre_layers, post_layers, closed_head, dummy_head, input_dim)

    @property
    def num_known(self) -> int:
        return self.closed_head.out_dim

    @property
    def num_dummy(self) -> int:
        return self.dummy_head.out_dim

    @property
    def embedding_dim(self) -> int:
        return self.closed_head.in_dim

    # -- forward ----------------------------------------------------------

    def embed_pre(self, x) -> Array:
        h = as_matrix(x)
        if h.shape[1] != self.input_dim:
            raise ValueError(f"input shape {h.shape} does not match input dimension {self.input_dim}")
        for layer in self.pre_layers:
            h = layer.forward(h)
        return h

    def embed_post(self, h) -> Array:
        out = as_matrix(h)
        for layer in self.post_layers:
            out = layer.forward(out)
        return out

    def heads_from_embedding(self, embedding) -> AugmentedLogits:
        closed = self.closed_head.forward(embedding)
        dummy_all = self.dummy_head.forward(embedding)
        dummy_argmax = dummy_all.argmax(axis=1)
        dummy_max = dummy_all[np.arange(dummy_all.shape[0]), dummy_argmax]
        combined = np.concatenate([closed, dummy_max[:, None]], axis=1)
        return AugmentedLogits(closed, dummy_all, dummy_max, dummy_argmax, combined)

    def augmented_logits(self, x) -> AugmentedLogits:
        return self.heads_from_embedding(self.embed_post(self.embed_pre(x)))

    # -- backward ---------------------------------------------------------

    def backward_heads(self, d_closed, d_dummy_all) -> Array:
        return self.closed_head.backward(d_closed) + self.dummy_head.backward(d_dummy_all)

    def backward_post(self, d_embedding) -> Array:
        d = d_embedding
        for layer in reversed(self.post_layers):
            d = layer.backward(d)
        return d

    def backward_pre(self, d_hidden) -> Array:
        d = d_hidden
        for layer in reversed(self.pre_layers):
            d = layer.backward(d)
        return d

    # -- parameter plumbing ------------------------------------------------

    def layers(self) -> list[DenseLayer]:
        return [*self.pre_layers, *self.post_layers, self.closed_head, self.dummy_head]

    def parameters(self) -> list[Array]:
        return [p for layer in self.layers() for p in layer.parameters()]

    def gradients(self) -> list[Array]:
        return [g for layer in self.layers() for g in layer.gradients()]

    def zero_grads(self) -> None:
        for layer in self.layers():
            layer.zero_grad()


def split_combined_grad(aug: AugmentedLogits, d_combined) -> tuple[Array, Array]:
    """Route the gradient of the combined logits back to the two heads.

    Column K flows only into the per-row argmax dummy column; the other
    dummy columns receive exactly zero.
    """
    d_combined = as_matrix(d_combined)
    n, k = aug.closed.shape
    d_closed = d_combined[:, :k].copy()
    d_dummy_all = np.zeros_like(aug.dummy_all)
    d_dummy_all[np.arange(n), aug.dummy_argmax] = d_combined[:, k]
    return d_closed, d_dummy_all


def _calibrated_scores(model: SplitMlp, x, bias: float | None) -> tuple[Array, Array]:
    if bias is None:
        bias = model.calibration_bias
    aug = model.augmented_logits(x)
    return aug.closed, aug.dummy_max + bias


def predict_open(model: SplitMlp, x, bias: float | None = None) -> Array:
    """Per row: argmax over [closed logits, dummy_max + bias].

    Label K means "unknown"; ties resolve to the known class with the
    lowest index, so rejection requires strictly higher dummy evidence.
    """
    closed, dummy = _calibrated_scores(model, x, bias)
    scores = np.concatenate([closed, dummy[:, None]], axis=1)
    return scores.argmax(axis=1)


def knownness_score(model: SplitMlp, x, bias: float | None = None) -> Array:
    """Best closed logit minus the calibrated dummy logit; higher = more known."""
    closed, dummy = _calibrated_scores(model, x, bias)
    return closed.max(axis=1) - dummy


def baseline_confidence(model: SplitMlp, x) -> Array:
    """Max softmax probability over the K closed logits (dummy head ignored)."""
    aug = model.augmented_logits(x)
    return softmax_rows(aug.closed).max(axis=1)
