"""Post-training bias search on a known-class validation set.

The gap between the best closed logit and the best raw dummy logit is
computed per validation instance; the gap range is divided into equal
intervals and the largest bias that still keeps the target fraction of
validation data recognised as known is selected. Model weights are never
touched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gradcore import Array
from .network import SplitMlp


@dataclass
class CalibrationResult:
    chosen_bias: float
    achieved_known_rate: float
    candidate_count: int
    gap_min: float
    gap_max: float
    target_met: bool


def logit_gaps(model: SplitMlp, features) -> Array:
    """Per instance: max closed logit minus max raw dummy logit (no bias)."""
    features = np.asarray(features, dtype=np.float64)
    if features.shape[0] == 0:
        raise ValueError("empty validation set")
    aug = model.augmented_logits(features)
    return aug.closed.max(axis=1) - aug.dummy_max


def candidate_biases(gaps, intervals: int = 100) -> Array:
    """intervals+1 evenly spaced values spanning [min(gaps), max(gaps)];
    a degenerate span collapses to a single candidate."""
    gaps = np.asarray(gaps, dtype=np.float64)
    if gaps.size == 0:
        raise ValueError("empty gap list")
    if intervals < 1:
        raise ValueError(f"intervals must be at least 1, got {intervals}")
    lo = float(gaps.min())
    hi = float(gaps.max())
    if lo == hi:
        return np.array([lo])
    return np.linspace(lo, hi, intervals + 1)


def known_rate(gaps, bias: float) -> float:
    """Fraction of instances with gap strictly above the bias."""
    gaps = np.asarray(gaps, dtype=np.float64)
    return float((gaps > bias).mean())


def select_bias(model: SplitMlp, val_set, target_rate: float = 0.95,
                intervals: int = 100) -> CalibrationResult:
    """Largest candidate bias whose known-rate still meets target_rate.

    If no candidate qualifies, the smallest (most permissive) candidate is
    returned with target_met=False. `val_set` may be a LabeledSet or a bare
    feature matrix; labels are ignored, validation data is known-class only.
    """
    features = getattr(val_set, "features", val_set)
    gaps = logit_gaps(model, features)
    candidates = candidate_biases(gaps, intervals)
    chosen = None
    for bias in candidates:  # ascending; rate is non-increasing
        if known_rate(gaps, bias) >= target_rate:
            chosen = float(bias)
        else:
            break
    target_met = chosen is not None
    if chosen is None:
        chosen = float(candidates[0])
    return CalibrationResult(
        chosen_bias=chosen,
        achieved_known_rate=known_rate(gaps, chosen),
        candidate_count=len(candidates),
        gap_min=float(gaps.min()),
        gap_max=float(gaps.max()),
        target_met=target_met,
    )
