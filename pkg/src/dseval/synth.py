"""Seeded synthetic evaluation sets over two correlated score channels.

Three populations (correct ID, misclassified ID, OOD) each draw their
(s_id, s_ood) pair from a bivariate Gaussian. Generation is fully determined
by the seed; the draw order (correct block, wrong block, OOD block) is part
of the determinism contract.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .core import DsevalError, EvalSet, Origin, SampleRecord, build_eval_set

__all__ = [
    "InvalidConfig",
    "PopulationParams",
    "SynthConfig",
    "generate",
    "far_ood_config",
    "near_ood_config",
    "config_from_dict",
    "config_to_dict",
    "CHANNEL_ID",
    "CHANNEL_OOD",
]

CHANNEL_ID = "s_id"
CHANNEL_OOD = "s_ood"


class InvalidConfig(DsevalError):
    pass


@dataclass(frozen=True)
class PopulationParams:
    """Bivariate Gaussian over (s_id, s_ood) for one sample population."""

    mean_s_id: float
    mean_s_ood: float
    std_s_id: float = 1.0
    std_s_ood: float = 1.0
    corr: float = 0.0


@dataclass(frozen=True)
class SynthConfig:
    n_id: int
    n_ood: int
    id_accuracy: float
    correct: PopulationParams
    wrong: PopulationParams
    ood: PopulationParams
    seed: int


def _validate(config: SynthConfig) -> None:
    if config.n_id < 1:
        raise InvalidConfig("n_id must be >= 1")
    if config.n_ood < 0:
        raise InvalidConfig("n_ood must be >= 0")
    if not 0.0 < config.id_accuracy <= 1.0:
        raise InvalidConfig("id_accuracy must be in (0, 1]")
    for name in ("correct", "wrong", "ood"):
        pop: PopulationParams = getattr(config, name)
        if pop.std_s_id <= 0 or pop.std_s_ood <= 0:
            raise InvalidConfig(f"{name} population needs positive stds")
        if not -1.0 < pop.corr < 1.0:
            raise InvalidConfig(f"{name} correlation must lie in (-1, 1)")


def _draw(rng: np.random.Generator, pop: PopulationParams, n: int) -> np.ndarray:
    z = rng.standard_normal((n, 2))
    out = np.empty((n, 2))
    out[:, 0] = pop.mean_s_id + pop.std_s_id * z[:, 0]
    out[:, 1] = pop.mean_s_ood + pop.std_s_ood * (
        pop.corr * z[:, 0] + np.sqrt(1.0 - pop.corr**2) * z[:, 1]
    )
    return out


def generate(config: SynthConfig) -> EvalSet:
    """Draw an evaluation set; identical configs give bit-identical sets."""
    _validate(config)
    n_correct = int(round(config.n_id * config.id_accuracy))
    n_wrong = config.n_id - n_correct
    rng = np.random.default_rng(config.seed)
    blocks = [
        (_draw(rng, config.correct, n_correct), Origin.ID, True),
        (_draw(rng, config.wrong, n_wrong), Origin.ID, False),
        (_draw(rng, config.ood, config.n_ood), Origin.OOD, None),
    ]
    records = []
    for scores, origin, correct in blocks:
        prefix = "id" if origin is Origin.ID else "ood"
        for row in scores:
            records.append(
                SampleRecord(
                    sample_id=f"{prefix}-{len(records):06d}",
                    origin=origin,
                    correct=correct,
                    scores={CHANNEL_ID: float(row[0]), CHANNEL_OOD: float(row[1])},
                )
            )
    return build_eval_set(records)


# Preset populations: the OOD population mirrors the correct population on
# s_id, so a lone ID-confidence threshold cannot reject it; only the s_ood
# placement differs between the two presets.
_CORRECT = PopulationParams(mean_s_id=2.0, mean_s_ood=0.0)
_WRONG = PopulationParams(mean_s_id=-1.5, mean_s_ood=0.0)


def far_ood_config(
    n_id: int, n_ood: int, id_accuracy: float = 0.75, seed: int = 0
) -> SynthConfig:
    """OOD shifted 8 sigma below the ID bulk on s_ood."""
    return SynthConfig(
        n_id=n_id,
        n_ood=n_ood,
        id_accuracy=id_accuracy,
        correct=_CORRECT,
        wrong=_WRONG,
        ood=PopulationParams(mean_s_id=2.0, mean_s_ood=-8.0),
        seed=seed,
    )


def near_ood_config(
    n_id: int, n_ood: int, id_accuracy: float = 0.75, seed: int = 0
) -> SynthConfig:
    """OOD overlapping the ID bulk on s_ood."""
    return SynthConfig(
        n_id=n_id,
        n_ood=n_ood,
        id_accuracy=id_accuracy,
        correct=_CORRECT,
        wrong=_WRONG,
        ood=PopulationParams(mean_s_id=2.0, mean_s_ood=-1.0),
        seed=seed,
    )


def config_to_dict(config: SynthConfig) -> dict:
    return asdict(config)


def config_from_dict(data: dict) -> SynthConfig:
    try:
        pops = {
            name: PopulationParams(**data[name]) for name in ("correct", "wrong", "ood")
        }
        return SynthConfig(
            n_id=int(data["n_id"]),
            n_ood=int(data["n_ood"]),
            id_accuracy=float(data["id_accuracy"]),
            seed=int(data["seed"]),
            **pops,
        )
    except (KeyError, TypeError) as exc:
        raise InvalidConfig(f"malformed synth config: {exc}") from None
