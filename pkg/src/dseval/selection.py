"""Threshold selection on a validation split, frozen transfer to a test split.

Modes: a single threshold on the ID axis, a single threshold on the OOD axis
(the unused axis sits at its accept-all sentinel), or a joint pair. Transfer
applies the raw frozen thresholds to the test set with no re-optimization;
``test_opt`` re-optimizes on the test set and exists only to expose the
selection/deployment gap, so reports must label it as leaky.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

from .core import EvalSet, ThresholdPair, accept_all_threshold
from .dsmetrics import ConfusionCounts, ThresholdGrid, confusion_counts, ds_f1, f1_from_counts
from .metrics_single import best_f1_single

__all__ = ["SelectionMode", "SelectionResult", "select_thresholds", "apply_thresholds", "test_opt"]


class SelectionMode(Enum):
    ID_ONLY = "id_only"
    OOD_ONLY = "ood_only"
    DOUBLE = "double"


@dataclass(frozen=True)
class SelectionResult:
    mode: SelectionMode
    frozen: ThresholdPair
    val_f1: float
    test_f1: float | None = None


def select_thresholds(
    val_set: EvalSet,
    ch_id: str,
    ch_ood: str,
    mode: SelectionMode,
    grid: ThresholdGrid,
) -> SelectionResult:
    """Pick the best operating point on the validation set for one mode."""
    if mode is SelectionMode.ID_ONLY:
        f1, tau = best_f1_single(val_set, ch_id, grid.id_thresholds)
        frozen = ThresholdPair(
            tau_id=tau, tau_ood=accept_all_threshold(val_set.channel(ch_ood))
        )
    elif mode is SelectionMode.OOD_ONLY:
        f1, tau = best_f1_single(val_set, ch_ood, grid.ood_thresholds)
        frozen = ThresholdPair(
            tau_id=accept_all_threshold(val_set.channel(ch_id)), tau_ood=tau
        )
    else:
        result = ds_f1(val_set, ch_id, ch_ood, grid)
        f1, frozen = result.value, result.best_pair
    return SelectionResult(mode=mode, frozen=frozen, val_f1=f1)


def apply_thresholds(
    test_set: EvalSet, ch_id: str, ch_ood: str, frozen: ThresholdPair
) -> tuple[float, ConfusionCounts]:
    """Evaluate the frozen pair on a test set; no re-optimization."""
    counts = confusion_counts(test_set, ch_id, ch_ood, frozen)
    return f1_from_counts(counts), counts


def test_opt(
    test_set: EvalSet,
    ch_id: str,
    ch_ood: str,
    mode: SelectionMode,
    grid: ThresholdGrid,
) -> SelectionResult:
    """Optimize directly on the test set (leaky; reported as "test-opt")."""
    result = select_thresholds(test_set, ch_id, ch_ood, mode, grid)
    return replace(result, test_f1=result.val_f1)
