"""Shared prediction container for the PLS engine and both baselines."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class PredictionSet:
    """Per-row probabilities, thresholded labels, and true labels.

    `raw` keeps the unclamped score that determined the label; `row_index`
    tracks positions in the originating matrix so pooled cross-validation
    output can be reordered.
    """

    probability: np.ndarray
    label: np.ndarray
    truth: np.ndarray
    raw: np.ndarray
    row_index: np.ndarray = field(default=None)

    def __post_init__(self):
        self.probability = np.asarray(self.probability, dtype=np.float64)
        self.label = np.asarray(self.label, dtype=np.int64)
        self.truth = np.asarray(self.truth, dtype=np.int64)
        self.raw = np.asarray(self.raw, dtype=np.float64)
        if self.row_index is None:
            self.row_index = np.arange(len(self.probability))
        self.row_index = np.asarray(self.row_index, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.probability)


THRESHOLD = 0.5


def threshold_labels(raw: np.ndarray) -> np.ndarray:
    """Shared label rule across all three models: 1 iff score >= 0.5."""
    return (np.asarray(raw) >= THRESHOLD).astype(np.int64)


def pool_predictions(parts: list[PredictionSet]) -> PredictionSet:
    """Concatenate fold predictions and sort by original row index."""
    merged = PredictionSet(
        probability=np.concatenate([p.probability for p in parts]),
        label=np.concatenate([p.label for p in parts]),
        truth=np.concatenate([p.truth for p in parts]),
        raw=np.concatenate([p.raw for p in parts]),
        row_index=np.concatenate([p.row_index for p in parts]),
    )
    order = np.argsort(merged.row_index, kind="stable")
    return PredictionSet(
        probability=merged.probability[order],
        label=merged.label[order],
        truth=merged.truth[order],
        raw=merged.raw[order],
        row_index=merged.row_index[order],
    )
