"""Post-hoc confidence scores computed from stored logits and features.

Every score is oriented so that higher means "more trustworthy / more ID".
Fit artifacts (class templates, Gaussian stats, feature banks, principal
subspaces, combiner parameters) are estimated once on a designated fit split
and are immutable afterwards; scoring distinct samples never mutates them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import DsevalError, Origin

__all__ = [
    "NonPositiveTemperature",
    "EmptyClassTemplate",
    "SingularCovariance",
    "KTooLarge",
    "ZeroVector",
    "RankDeficient",
    "DegenerateSpread",
    "LogitRecord",
    "FeatureRecord",
    "GaussianStats",
    "FeatureBank",
    "PrincipalBasis",
    "SircParams",
    "FitArtifacts",
    "softmax",
    "msp",
    "max_logit",
    "energy",
    "neg_entropy",
    "fit_class_templates",
    "klm",
    "fit_gaussian_stats",
    "mahalanobis",
    "build_feature_bank",
    "default_k",
    "knn_score",
    "l1_feature_norm",
    "default_pca_dim",
    "fit_principal_subspace",
    "residual_score",
    "fit_vim_alpha",
    "vim",
    "fit_sirc_params",
    "sirc_combine",
]

PROB_CLAMP = 1e-12  # floor applied to probabilities before any log


class NonPositiveTemperature(DsevalError):
    pass


class EmptyClassTemplate(DsevalError):
    pass


class SingularCovariance(DsevalError):
    pass


class KTooLarge(DsevalError):
    pass


class ZeroVector(DsevalError):
    pass


class RankDeficient(DsevalError):
    pass


class DegenerateSpread(DsevalError):
    pass


@dataclass(frozen=True)
class LogitRecord:
    """Raw classifier logits for one sample; label present iff origin is ID."""

    sample_id: str
    origin: Origin
    label: int | None
    logits: np.ndarray


@dataclass(frozen=True)
class FeatureRecord:
    """Penultimate-layer features for one sample."""

    sample_id: str
    origin: Origin
    label: int | None
    features: np.ndarray


def softmax(logits) -> np.ndarray:
    """Numerically stable softmax (max-shifted)."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def msp(logits) -> float:
    """Maximum softmax probability, in (1/C, 1]."""
    return float(softmax(logits).max())


def max_logit(logits) -> float:
    return float(np.max(np.asarray(logits, dtype=np.float64)))


def energy(logits, temperature: float = 1.0) -> float:
    """T * log-sum-exp(logits / T), computed max-shifted."""
    if temperature <= 0:
        raise NonPositiveTemperature(f"temperature must be > 0, got {temperature}")
    z = np.asarray(logits, dtype=np.float64) / temperature
    m = z.max()
    return float(temperature * (m + np.log(np.exp(z - m).sum())))


def neg_entropy(logits) -> float:
    """Negative softmax entropy, sum p*log(p) with 0*log(0) := 0; in [-ln C, 0]."""
    p = softmax(logits)
    mask = p > 0
    return float(np.sum(p[mask] * np.log(p[mask])))


def _clamp_renorm(probs: np.ndarray) -> np.ndarray:
    q = np.clip(probs, PROB_CLAMP, 1.0)
    return q / q.sum()


def fit_class_templates(probs, predictions) -> np.ndarray:
    """Per-class mean softmax vector over fit samples, keyed by predicted class.

    Every class must receive at least one predicted fit sample.
    """
    probs = np.asarray(probs, dtype=np.float64)
    predictions = np.asarray(predictions, dtype=np.int64)
    n_classes = probs.shape[1]
    templates = np.empty((n_classes, n_classes))
    for k in range(n_classes):
        members = probs[predictions == k]
        if members.shape[0] == 0:
            raise EmptyClassTemplate(f"no fit sample is predicted as class {k}")
        templates[k] = _clamp_renorm(members.mean(axis=0))
    return templates


def klm(probs, class_templates) -> float:
    """Negated minimum KL divergence from the sample to any class template."""
    p = _clamp_renorm(np.asarray(probs, dtype=np.float64))
    templates = np.asarray(class_templates, dtype=np.float64)
    kl = np.sum(p * (np.log(p) - np.log(templates)), axis=1)
    return float(-kl.min())


@dataclass(frozen=True)
class GaussianStats:
    """Per-class means with a shared, regularized inverse covariance."""

    classes: np.ndarray
    means: np.ndarray
    cov_inv: np.ndarray


def fit_gaussian_stats(features, labels) -> GaussianStats:
    """Class means and shared covariance, regularized as cov + 1e-6*tr/D * I."""
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    classes = np.unique(y)
    d = x.shape[1]
    means = np.stack([x[y == c].mean(axis=0) for c in classes])
    centered = x.copy()
    for c, mu in zip(classes, means):
        centered[y == c] -= mu
    cov = centered.T @ centered / x.shape[0]
    lam = 1e-6 * np.trace(cov) / d
    reg = cov + lam * np.eye(d)
    try:
        np.linalg.cholesky(reg)
        cov_inv = np.linalg.inv(reg)
    except np.linalg.LinAlgError:
        raise SingularCovariance(
            "regularized covariance is not positive definite"
        ) from None
    cov_inv = (cov_inv + cov_inv.T) / 2.0
    return GaussianStats(classes=classes, means=means, cov_inv=cov_inv)


def mahalanobis(feature, stats: GaussianStats) -> float:
    """Negated squared Mahalanobis distance to the nearest class mean; <= 0."""
    f = np.asarray(feature, dtype=np.float64)
    diff = f - stats.means
    d2 = np.einsum("ij,jk,ik->i", diff, stats.cov_inv, diff)
    return float(-d2.min())


@dataclass(frozen=True)
class FeatureBank:
    """L2-normalized fit features used for nearest-neighbor scoring."""

    vectors: np.ndarray

    @property
    def size(self) -> int:
        return self.vectors.shape[0]


def _unit(vec: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(vec)
    if norm == 0.0:
        raise ZeroVector("cannot L2-normalize a zero vector")
    return vec / norm


def build_feature_bank(features) -> FeatureBank:
    x = np.asarray(features, dtype=np.float64)
    norms = np.linalg.norm(x, axis=1)
    if np.any(norms == 0.0):
        raise ZeroVector("feature bank contains a zero vector")
    return FeatureBank(vectors=x / norms[:, None])


def default_k(bank_size: int) -> int:
    """k proportional to the bank, floored at 1."""
    return max(1, int(0.005 * bank_size))


def knn_score(feature, bank: FeatureBank, k: int) -> float:
    """Negated Euclidean distance to the k-th nearest normalized bank vector."""
    if not 1 <= k <= bank.size:
        raise KTooLarge(f"k={k} outside [1, {bank.size}]")
    q = _unit(np.asarray(feature, dtype=np.float64))
    dists = np.linalg.norm(bank.vectors - q, axis=1)
    return float(-np.partition(dists, k - 1)[k - 1])


def l1_feature_norm(feature) -> float:
    return float(np.abs(np.asarray(feature, dtype=np.float64)).sum())


def default_pca_dim(feature_dim: int) -> int:
    return min(feature_dim - 1, 256)


@dataclass(frozen=True)
class PrincipalBasis:
    """Data mean plus an orthonormal basis (columns) of the top-d subspace."""

    mean: np.ndarray
    basis: np.ndarray


def fit_principal_subspace(features, d: int) -> PrincipalBasis:
    """Top-d principal directions of the mean-centered fit features."""
    x = np.asarray(features, dtype=np.float64)
    n, dim = x.shape
    if not 1 <= d < dim:
        raise ValueError(f"subspace dimension must satisfy 1 <= d < {dim}, got {d}")
    mean = x.mean(axis=0)
    _, s, vt = np.linalg.svd(x - mean, full_matrices=False)
    nonzero = int(np.count_nonzero(s > s[0] * max(n, dim) * np.finfo(np.float64).eps))
    if nonzero < d:
        raise RankDeficient(
            f"centered features have rank {nonzero}, cannot extract {d} directions"
        )
    return PrincipalBasis(mean=mean, basis=vt[:d].T)


def residual_score(feature, basis: PrincipalBasis) -> float:
    """Negated norm of the component outside the principal subspace; <= 0."""
    centered = np.asarray(feature, dtype=np.float64) - basis.mean
    recon = basis.basis @ (basis.basis.T @ centered)
    return float(-np.linalg.norm(centered - recon))


def fit_vim_alpha(logits, features, basis: PrincipalBasis) -> float:
    """Scale balancing the logit term against the residual term.

    alpha = mean max-logit / mean residual norm over the fit set.
    """
    logits = np.asarray(logits, dtype=np.float64)
    mean_logit = float(logits.max(axis=1).mean())
    residuals = [-residual_score(f, basis) for f in np.asarray(features, dtype=np.float64)]
    mean_residual = float(np.mean(residuals))
    if mean_residual <= 0.0:
        raise RankDeficient(
            "fit features lie inside the principal subspace; residual scale is zero"
        )
    alpha = mean_logit / mean_residual
    if alpha <= 0.0:
        raise ValueError(f"fitted alpha must be positive, got {alpha}")
    return alpha


def vim(logits, feature, basis: PrincipalBasis, vim_alpha: float) -> float:
    """Energy score penalized by the scaled principal-subspace residual."""
    return energy(logits) + vim_alpha * residual_score(feature, basis)


@dataclass(frozen=True)
class SircParams:
    a: float
    b: float


def fit_sirc_params(s2_values) -> SircParams:
    """Location/scale of the secondary score on the ID fit split.

    a = mean - 3*std and b = 1/std, so the gate saturates for typical ID
    samples and opens as s2 drops below the bulk of the fit distribution.
    """
    s2 = np.asarray(s2_values, dtype=np.float64)
    std = float(np.std(s2))
    if std == 0.0:
        raise DegenerateSpread("secondary score has zero spread on the fit split")
    return SircParams(a=float(np.mean(s2)) - 3.0 * std, b=1.0 / std)


def sirc_combine(s1: float, s1_max: float, s2: float, a: float, b: float) -> float:
    """Primary-score deficit gated by the secondary score; higher is better.

    Returns -(s1_max - s1) * (1 + exp(-b * (s2 - a))).
    """
    if s1 > s1_max:
        raise ValueError(f"s1={s1} exceeds its stated maximum {s1_max}")
    return -(s1_max - s1) * (1.0 + np.exp(-b * (s2 - a)))


@dataclass(frozen=True)
class FitArtifacts:
    """Immutable bundle of everything estimated on the fit split."""

    class_templates: np.ndarray | None = None
    gaussian_stats: GaussianStats | None = None
    feature_bank: FeatureBank | None = None
    principal_basis: PrincipalBasis | None = None
    vim_alpha: float | None = None
    sirc_l1: SircParams | None = None
    sirc_res: SircParams | None = None
    extra: dict = field(default_factory=dict)
