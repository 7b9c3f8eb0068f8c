"""Versioned text checkpoints: architecture, weights, calibration, config.

Weights round-trip through decimal text exactly (repr of a float64 parses
back to the same bits), so a saved and reloaded model produces bit-identical
logits.
"""

from __future__ import annotations

import json
from dataclasses import asdict

import numpy as np

from .datastore import Standardization
from .gradcore import DenseLayer
from .network import SplitMlp
from .trainer import TrainConfig

FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def _layer_doc(layer: DenseLayer) -> dict:
    return {
        "in": layer.in_dim,
        "out": layer.out_dim,
        "activation": layer.activation,
        "weights": layer.weights.tolist(),
        "biases": layer.biases.tolist(),
    }


def _layer_from_doc(doc: dict) -> DenseLayer:
    layer = DenseLayer(np.array(doc["weights"], dtype=np.float64),
                       np.array(doc["biases"], dtype=np.float64),
                       doc["activation"])
    if (layer.in_dim, layer.out_dim) != (doc["in"], doc["out"]):
        raise CheckpointError(
            f"layer shape {(layer.in_dim, layer.out_dim)} does not match "
            f"declared ({doc['in']}, {doc['out']})"
        )
    return layer


def checkpoint_text(model: SplitMlp, config: TrainConfig,
                    standardization: Standardization | None = None) -> str:
    doc = {
        "format_version": FORMAT_VERSION,
        "architecture": {
            "input_dim": model.input_dim,
            "split_index": len(model.pre_layers),
            "num_known": model.num_known,
            "num_dummy": model.num_dummy,
        },
        "pre_layers": [_layer_doc(layer) for layer in model.pre_layers],
        "post_layers": [_layer_doc(layer) for layer in model.post_layers],
        "closed_head": _layer_doc(model.closed_head),
        "dummy_head": _layer_doc(model.dummy_head),
        "calibration_bias": model.calibration_bias,
        "train_config": asdict(config),
        "standardization": None if standardization is None else {
            "mean": standardization.mean.tolist(),
            "std": standardization.std.tolist(),
        },
    }
    return json.dumps(doc, indent=2) + "\n"


def save_checkpoint(path, model: SplitMlp, config: TrainConfig,
                    standardization: Standardization | None = None) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(checkpoint_text(model, config, standardization))


def load_checkpoint(path) -> tuple[SplitMlp, TrainConfig, Standardization | None]:
    with open(path, "r", encoding="utf-8") as f:
        raw = f.read()
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: not a valid checkpoint ({exc})") from None
    if not isinstance(doc, dict) or "format_version" not in doc:
        raise CheckpointError(f"{path}: missing format_version")
    version = doc["format_version"]
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: checkpoint format version {version}, this build reads version {FORMAT_VERSION}"
        )
    try:
        arch = doc["architecture"]
        model = SplitMlp(
            pre_layers=[_layer_from_doc(d) for d in doc["pre_layers"]],
            post_layers=[_layer_from_doc(d) for d in doc["post_layers"]],
            closed_head=_layer_from_doc(doc["closed_head"]),
            dummy_head=_layer_from_doc(doc["dummy_head"]),
            input_dim=arch["input_dim"],
            calibration_bias=float(doc["calibration_bias"]),
        )
        if arch["split_index"] != len(model.pre_layers):
            raise CheckpointError(f"{path}: split_index does not match the stored pre-layers")
        if (arch["num_known"], arch["num_dummy"]) != (model.num_known, model.num_dummy):
            raise CheckpointError(f"{path}: head widths do not match the declared architecture")
        config = TrainConfig(**doc["train_config"])
        std_doc = doc["standardization"]
        standardization = None if std_doc is None else Standardization(
            np.array(std_doc["mean"], dtype=np.float64),
            np.array(std_doc["std"], dtype=np.float64),
        )
    except CheckpointError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"{path}: malformed checkpoint ({exc})") from None
    return model, config, standardization
