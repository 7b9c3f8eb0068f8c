"""Open-set recognition with classifier and data placeholders.

A small split MLP is trained on known classes, augmented with a dummy
rejection head and manifold-mixup "novel" instances, calibrated on held-out
known data, and evaluated with detection AUC and macro-F1 over K+1 classes.
"""

from .calibration import CalibrationResult, select_bias
from .datastore import LabeledSet, OpenSplit, gen_gaussian_blobs, gen_rings, split_known_unknown
from .metrics import EvalReport, auc, evaluate, macro_f1, openness
from .network import SplitMlp, baseline_confidence, knownness_score, predict_open
from .trainer import TrainConfig, finetune_placeholders, pretrain_closed

__all__ = [
    "CalibrationResult",
    "EvalReport",
    "LabeledSet",
    "OpenSplit",
    "SplitMlp",
    "TrainConfig",
    "auc",
    "baseline_confidence",
    "evaluate",
    "finetune_placeholders",
    "gen_gaussian_blobs",
    "gen_rings",
    "knownness_score",
    "macro_f1",
    "openness",
    "predict_open",
    "pretrain_closed",
    "select_bias",
    "split_known_unknown",
]
