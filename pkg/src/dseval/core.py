"""Core dataset types and the two-threshold acceptance primitive.

An evaluation set mixes in-distribution (ID) samples, which carry a
correctness flag, with out-of-distribution (OOD) samples, which do not.
Every sample exposes the same named score channels; all downstream metrics
are pure functions of an :class:`EvalSet` and thresholds on its channels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

__all__ = [
    "DsevalError",
    "MixedSchema",
    "MissingCorrectness",
    "NonFiniteScore",
    "UnknownChannel",
    "Origin",
    "SampleRecord",
    "ThresholdPair",
    "EvalSet",
    "build_eval_set",
    "acceptance_set",
    "accept_all_threshold",
]


class DsevalError(Exception):
    """Base class for errors raised by this package."""


class MixedSchema(DsevalError):
    pass


class MissingCorrectness(DsevalError):
    pass


class NonFiniteScore(DsevalError):
    pass


class UnknownChannel(DsevalError):
    pass


class Origin(Enum):
    ID = "id"
    OOD = "ood"


@dataclass(frozen=True)
class SampleRecord:
    """One evaluation sample.

    ``correct`` must be set for ID samples and must be None for OOD samples;
    :func:`build_eval_set` enforces this rather than the constructor, so that
    invalid records can be rejected with a proper diagnostic.
    """

    sample_id: str
    origin: Origin
    correct: bool | None
    scores: Mapping[str, float]


@dataclass(frozen=True)
class ThresholdPair:
    """Acceptance thresholds, one per score axis. Comparisons are inclusive."""

    tau_id: float
    tau_ood: float


def accept_all_threshold(values: Sequence[float] | np.ndarray) -> float:
    """A sentinel threshold strictly below every value, so ``>=`` accepts all."""
    return float(np.min(values)) - 1.0


class EvalSet:
    """Immutable mixed ID/OOD evaluation set with column access to channels.

    Instances are built by :func:`build_eval_set`, are safe to share across
    concurrent readers, and never mutate after construction.
    """

    def __init__(self, records, channel_names, matrix, is_id, id_correct):
        self._records: tuple[SampleRecord, ...] = records
        self._channel_names: tuple[str, ...] = channel_names
        self._matrix = matrix
        self._is_id = is_id
        self._id_correct = id_correct
        for arr in (matrix, is_id, id_correct):
            arr.setflags(write=False)

    @property
    def records(self) -> tuple[SampleRecord, ...]:
        return self._records

    @property
    def channel_names(self) -> tuple[str, ...]:
        return self._channel_names

    @property
    def n_total(self) -> int:
        return len(self._records)

    @property
    def n_id(self) -> int:
        return int(self._is_id.sum())

    @property
    def n_ood(self) -> int:
        return self.n_total - self.n_id

    @property
    def is_id(self) -> np.ndarray:
        """Boolean mask, True at ID rows."""
        return self._is_id

    @property
    def id_correct(self) -> np.ndarray:
        """Boolean mask, True only at correctly classified ID rows."""
        return self._id_correct

    @property
    def id_wrong(self) -> np.ndarray:
        return self._is_id & ~self._id_correct

    @property
    def id_accuracy(self) -> float:
        return float(self._id_correct.sum() / self.n_id)

    def channel(self, name: str) -> np.ndarray:
        """Read-only float64 column for a named score channel."""
        try:
            col = self._channel_names.index(name)
        except ValueError:
            raise UnknownChannel(
                f"unknown channel {name!r}; available: {list(self._channel_names)}"
            ) from None
        return self._matrix[:, col]

    def __len__(self) -> int:
        return self.n_total

    def __repr__(self) -> str:
        return (
            f"EvalSet(n_id={self.n_id}, n_ood={self.n_ood}, "
            f"channels={list(self._channel_names)})"
        )


def build_eval_set(records: Sequence[SampleRecord]) -> EvalSet:
    """Validate records and assemble an :class:`EvalSet`.

    Requires a non-empty record list with at least one ID sample, a uniform
    channel schema, an origin-consistent correctness flag, and finite scores.
    Input order is preserved.
    """
    records = tuple(records)
    if not records:
        raise MixedSchema("cannot build an evaluation set from zero records")

    channel_names = tuple(records[0].scores.keys())
    schema = frozenset(channel_names)
    n = len(records)
    matrix = np.empty((n, len(channel_names)), dtype=np.float64)
    is_id = np.zeros(n, dtype=bool)
    id_correct = np.zeros(n, dtype=bool)

    for i, rec in enumerate(records):
        if frozenset(rec.scores.keys()) != schema:
            raise MixedSchema(
                f"record {rec.sample_id!r} has channels {sorted(rec.scores)} "
                f"but the set schema is {sorted(schema)}"
            )
        if rec.origin is Origin.ID:
            if rec.correct is None:
                raise MissingCorrectness(
                    f"ID record {rec.sample_id!r} lacks a correctness flag"
                )
            is_id[i] = True
            id_correct[i] = bool(rec.correct)
        else:
            if rec.correct is not None:
                raise MissingCorrectness(
                    f"OOD record {rec.sample_id!r} must not carry a correctness flag"
                )
        for j, name in enumerate(channel_names):
            v = float(rec.scores[name])
            if not math.isfinite(v):
                raise NonFiniteScore(
                    f"record {rec.sample_id!r} channel {name!r} has non-finite score {v!r}"
                )
            matrix[i, j] = v

    if not is_id.any():
        raise MissingCorrectness("an evaluation set needs at least one ID record")
    return EvalSet(records, channel_names, matrix, is_id, id_correct)


def acceptance_set(
    eval_set: EvalSet, ch_id: str, ch_ood: str, pair: ThresholdPair
) -> np.ndarray:
    """Indices accepted by the pair rule: s_ood >= tau_ood and s_id >= tau_id.

    Both comparisons are inclusive, so ties at a threshold are accepted.
    Returned indices are in ascending dataset order.
    """
    s_id = eval_set.channel(ch_id)
    s_ood = eval_set.channel(ch_ood)
    return np.flatnonzero((s_id >= pair.tau_id) & (s_ood >= pair.tau_ood))
