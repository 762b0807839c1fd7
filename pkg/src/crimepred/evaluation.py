"""Multiclass log loss with renormalization, smoothing search, and diagnostics.

Rows of a probability matrix are divided by their sums before scoring, so
any positive row scaling (including the inflation caused by adding a
smoothing constant) leaves the loss unchanged in structure. Per-row loss is
-log(max(p_true, clip)) with clip = 1e-15.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateRowError, LabelError, ParameterError

CLIP = 1e-15
FORMAT_VERSION = 1


def _validated(p, y, n_rows_required: bool = True):
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if p.ndim != 2:
        raise ParameterError(f"probability matrix must be 2-D, got shape {p.shape}")
    if y.shape != (p.shape[0],):
        raise ParameterError("labels must be one per probability row")
    if p.size and p.min() < 0.0:
        raise ParameterError("probabilities must be nonnegative")
    if n_rows_required and p.shape[0] == 0:
        raise ParameterError("at least one row is required")
    if y.size and (y.min() < 0 or y.max() >= p.shape[1]):
        raise LabelError(
            f"labels outside [0, {p.shape[1]}): range [{y.min()}, {y.max()}]"
        )
    return p, y


def _row_losses(p: np.ndarray, y: np.ndarray, clip: float) -> np.ndarray:
    sums = p.sum(axis=1)
    zero = np.flatnonzero(sums <= 0.0)
    if zero.size:
        raise DegenerateRowError(int(zero[0]))
    picked = p[np.arange(p.shape[0]), y] / sums
    return -np.log(np.maximum(picked, clip))


def multiclass_log_loss(p, y, clip: float = CLIP) -> float:
    """Mean of -log(renormalized probability of the true class)."""
    p, y = _validated(p, y)
    return float(np.mean(_row_losses(p, y, clip)))


def accuracy(p, y) -> float:
    """Fraction of rows whose argmax (ties to the lower class index) is y."""
    p, y = _validated(p, y)
    return float(np.mean(p.argmax(axis=1) == y))


def baseline_uniform_loss(n_classes: int) -> float:
    """Log loss of a uniform prediction over n_classes, i.e. ln(C).

    Computed as -log(1/C) so a literal uniform probability matrix scores
    bit-for-bit the same through multiclass_log_loss.
    """
    if n_classes < 1:
        raise ParameterError(f"class count must be >= 1, got {n_classes}")
    return float(-np.log(1.0 / n_classes))


@dataclass(frozen=True)
class PerLabelStats:
    label: int
    mispredictions: int
    mean_log_loss: float


def per_label_diagnostics(p, y, clip: float = CLIP) -> tuple[PerLabelStats, ...]:
    """Misprediction count and mean row loss per true label.

    Only labels with at least one misprediction appear; the mean is taken
    over the mispredicted rows of that label.
    """
    p, y = _validated(p, y)
    losses = _row_losses(p, y, clip)
    predicted = p.argmax(axis=1)
    wrong = predicted != y
    out = []
    for label in np.unique(y):
        mask = wrong & (y == label)
        count = int(mask.sum())
        if count == 0:
            continue
        out.append(
            PerLabelStats(
                label=int(label),
                mispredictions=count,
                mean_log_loss=float(losses[mask].mean()),
            )
        )
    return tuple(out)


@dataclass(frozen=True)
class SmoothingResult:
    epsilon_grid: tuple[float, ...]
    losses: tuple[float, ...]
    best_epsilon: float
    best_loss: float
    improvement_percent: float

    def to_json_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "epsilon_grid": list(self.epsilon_grid),
            "losses": list(self.losses),
            "best_epsilon": self.best_epsilon,
            "best_loss": self.best_loss,
            "improvement_percent": self.improvement_percent,
        }


def default_smoothing_grid() -> np.ndarray:
    return np.concatenate([[0.0], np.logspace(-7.0, -1.0, 60)])


def smoothing_search(p, y, grid: Optional[Sequence[float]] = None,
                     clip: float = CLIP) -> SmoothingResult:
    """Evaluate the log loss of P + epsilon over a grid of epsilons.

    Renormalization inside multiclass_log_loss absorbs the inflated row
    sums. The grid always contains 0 (prepended when missing), so the best
    loss is never worse than the unsmoothed loss. Improvement is relative
    to epsilon = 0.
    """
    p, y = _validated(p, y)
    eps = default_smoothing_grid() if grid is None else np.asarray(grid, dtype=np.float64)
    if eps.size and eps.min() < 0.0:
        raise ParameterError("smoothing epsilons must be nonnegative")
    if 0.0 not in eps:
        eps = np.concatenate([[0.0], eps])
    eps = np.sort(eps)
    losses = np.array([float(np.mean(_row_losses(p + e, y, clip))) for e in eps])
    best = int(np.argmin(losses))
    loss_zero = float(losses[eps == 0.0][0])
    improvement = 100.0 * (loss_zero - losses[best]) / loss_zero if loss_zero > 0 else 0.0
    return SmoothingResult(
        epsilon_grid=tuple(float(e) for e in eps),
        losses=tuple(float(l) for l in losses),
        best_epsilon=float(eps[best]),
        best_loss=float(losses[best]),
        improvement_percent=float(improvement),
    )


@dataclass(frozen=True)
class EvaluationReport:
    model_kind: str
    n_samples: int
    n_classes: int
    log_loss: float
    accuracy: float
    baseline_log_loss: float
    per_label: tuple[PerLabelStats, ...]

    def to_json_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "model_kind": self.model_kind,
            "n_samples": self.n_samples,
            "n_classes": self.n_classes,
            "log_loss": self.log_loss,
            "accuracy": self.accuracy,
            "baseline_log_loss": self.baseline_log_loss,
            "per_label": [
                {
                    "label": s.label,
                    "mispredictions": s.mispredictions,
                    "mean_log_loss": s.mean_log_loss,
                }
                for s in self.per_label
            ],
        }

    def write_json(self, path):
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(self.to_json_dict(), handle, indent=2, sort_keys=True)
            handle.write("\n")

    def write_per_label_csv(self, path):
        import csv as _csv

        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = _csv.writer(handle)
            writer.writerow(["label", "mispredictions", "mean_log_loss"])
            for s in self.per_label:
                writer.writerow([s.label, s.mispredictions, repr(s.mean_log_loss)])


def evaluate_predictions(p, y, model_kind: str, n_classes: Optional[int] = None,
                         clip: float = CLIP) -> EvaluationReport:
    """Bundle log loss, accuracy, the uniform baseline, and per-label stats."""
    p, y = _validated(p, y)
    c = p.shape[1] if n_classes is None else n_classes
    return EvaluationReport(
        model_kind=model_kind,
        n_samples=p.shape[0],
        n_classes=c,
        log_loss=multiclass_log_loss(p, y, clip),
        accuracy=accuracy(p, y),
        baseline_log_loss=baseline_uniform_loss(c),
        per_label=per_label_diagnostics(p, y, clip),
    )
