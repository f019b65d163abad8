"""Exponential families ``P_lam(x) = P0(x) exp(lam . f(x) - A(lam))`` over a
finite alphabet, and their analytics.

The log-partition function ``A`` is evaluated with max-subtracted
log-sum-exp; no partition sum is ever formed in the linear domain.  All
free energies are prior-relative: ``F(P) = U(P) + D(P || P0)``, which
reproduces ``F(P_lam) = -A(lam)`` and the regret identity
``D(P || P_lam) = F(P) - F(P_lam)`` for arbitrary priors, not just the
uniform one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import logsumexp

from .dist import (
    FeatureSet,
    FiniteDistribution,
    cross_entropy,
    entropy,
    kl_divergence,
    moments,
)
from .errors import DomainError, FamilyMismatch, InputError


def compute_log_partition(
    prior: FiniteDistribution, features: FeatureSet, lam: np.ndarray
) -> float:
    """``A(lam) = log sum_x P0(x) exp(lam . f(x))`` via log-sum-exp."""
    features.check_alphabet(prior)
    mask = prior.support
    scores = prior.log_probs[mask]
    if features.dim:
        scores = scores + lam @ features.matrix[:, mask]
    return float(logsumexp(scores))


@dataclass(frozen=True, eq=False)
class ExpFamModel:
    """An exponential-family member: prior, features, natural parameters.

    The cached ``log_partition`` is computed at construction; instances are
    immutable and safe to share across threads.
    """

    prior: FiniteDistribution
    features: FeatureSet
    lam: np.ndarray
    log_partition: float

    def __init__(self, prior, features, lam):
        lam = np.asarray(lam, dtype=float)
        if lam.ndim != 1 or lam.shape[0] != features.dim:
            raise InputError(
                f"lambda has shape {lam.shape}, expected ({features.dim},)"
            )
        if lam.size and not np.all(np.isfinite(lam)):
            raise InputError("natural parameters must be finite")
        features.check_alphabet(prior)
        lam = np.array(lam, copy=True)
        lam.flags.writeable = False
        object.__setattr__(self, "prior", prior)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(
            self, "log_partition", compute_log_partition(prior, features, lam)
        )

    @property
    def dim(self) -> int:
        return self.features.dim

    @cached_property
    def _log_probs(self) -> np.ndarray:
        lp = np.array(self.prior.log_probs, copy=True)
        mask = self.prior.support
        shift = -self.log_partition
        if self.dim:
            lp[mask] += self.lam @ self.features.matrix[:, mask]
        lp[mask] += shift
        return lp

    def to_distribution(self) -> FiniteDistribution:
        """The member distribution; sums to 1 within 1e-12 by construction."""
        return FiniteDistribution(self.prior.outcomes, np.exp(self._log_probs))

    @cached_property
    def _dist(self) -> FiniteDistribution:
        return self.to_distribution()

    def with_lambda(self, lam) -> "ExpFamModel":
        return ExpFamModel(self.prior, self.features, lam)

    def same_family(self, other: "ExpFamModel") -> bool:
        return (
            self.prior.outcomes == other.prior.outcomes
            and np.array_equal(self.prior.probs, other.prior.probs)
            and np.array_equal(self.features.matrix, other.features.matrix)
        )

    def to_json(self) -> dict:
        return {
            "prior": self.prior.to_json(),
            "features": self.features.to_json(),
            "lambda": self.lam.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ExpFamModel":
        for key in ("prior", "features", "lambda"):
            if key not in obj:
                raise InputError(f"model: missing field {key!r}")
        return cls(
            FiniteDistribution.from_json(obj["prior"]),
            FeatureSet.from_json(obj["features"]),
            obj["lambda"],
        )


def log_partition(model: ExpFamModel) -> float:
    """The model's cached log-partition value ``A(lam)``."""
    return model.log_partition


def mean_parameters(model: ExpFamModel) -> np.ndarray:
    """Gradient of the log-partition: ``E_{P_lam}[f]``."""
    return moments(model._dist, model.features)


def fisher_information(model: ExpFamModel) -> np.ndarray:
    """Hessian of the log-partition: the feature covariance under ``P_lam``.

    Symmetric positive semidefinite; exactly singular when features are
    linearly dependent on the support.
    """
    w = model._dist.probs
    f = model.features.matrix
    m = f @ w
    cov = (f * w) @ f.T - np.outer(m, m)
    return 0.5 * (cov + cov.T)


def internal_energy(model: ExpFamModel, p: FiniteDistribution) -> float:
    """``U(P) = -lam . E_P[f]``."""
    if model.dim == 0:
        return 0.0
    return float(-np.dot(model.lam, moments(p, model.features)))


@dataclass(frozen=True)
class EnergyReport:
    """Internal energy, prior-relative free energy, and entropy of one
    distribution under one model's parameters."""

    internal_energy: float
    free_energy: float
    rel_entropy_to_prior: float
    entropy: float


def energies(model: ExpFamModel, p: FiniteDistribution) -> EnergyReport:
    """Energy bookkeeping for ``p`` under the model's parameters.

    ``free_energy = internal_energy + D(p || prior)``; for ``p`` equal to
    the model's own distribution this is ``-A(lam)``.
    """
    u = internal_energy(model, p)
    d0 = kl_divergence(p, model.prior)
    return EnergyReport(
        internal_energy=u,
        free_energy=u + d0,
        rel_entropy_to_prior=d0,
        entropy=entropy(p),
    )


def free_energy(model: ExpFamModel, p: FiniteDistribution) -> float:
    return energies(model, p).free_energy


def model_entropy(model: ExpFamModel) -> float:
    """``H(P_lam)``, assembled as ``H(P_lam, P0) - lam . grad A + A(lam)``."""
    h_prior = cross_entropy(model._dist, model.prior)
    if model.dim == 0:
        return h_prior + model.log_partition
    return (
        h_prior
        - float(np.dot(model.lam, mean_parameters(model)))
        + model.log_partition
    )


def model_cross_entropy(model: ExpFamModel, p: FiniteDistribution) -> float:
    """Log loss of the model on data ``p``:
    ``H(p, P_lam) = H(p, P0) + U(p) + A(lam)``.

    Infinite when ``p`` puts mass outside the prior's support.
    """
    h_prior = cross_entropy(p, model.prior)
    if math.isinf(h_prior):
        return math.inf
    return h_prior + internal_energy(model, p) + model.log_partition


def deviance(model_star: ExpFamModel, model: ExpFamModel) -> float:
    """``D(P_{lam*} || P_lam)`` between two members of one family.

    Evaluated in natural-parameter form:
    ``(lam* - lam) . alpha + A(lam) - A(lam*)`` with
    ``alpha = E_{P_{lam*}}[f]``.
    """
    if not model_star.same_family(model):
        raise FamilyMismatch("deviance requires a common prior and features")
    alpha = mean_parameters(model_star)
    return float(
        np.dot(model_star.lam - model.lam, alpha)
        + model.log_partition
        - model_star.log_partition
    )


def cgf(model: ExpFamModel, theta) -> float:
    """Cumulant generating function of the features under ``P_lam``:
    ``A(lam + theta) - A(lam)``."""
    theta = np.asarray(theta, dtype=float)
    shifted = compute_log_partition(model.prior, model.features, model.lam + theta)
    return shifted - model.log_partition


def centered_cgf(model: ExpFamModel, theta) -> float:
    """CGF of the mean-centered features, equal to the Bregman divergence
    of the log-partition between ``lam + theta`` and ``lam``.

    Non-negative for every ``theta`` by convexity of the log-partition.
    """
    theta = np.asarray(theta, dtype=float)
    return cgf(model, theta) - float(np.dot(theta, mean_parameters(model)))


@dataclass(frozen=True)
class HeatCapacity:
    """Sensitivity of one feature's expectation to its temperature.

    ``temperature`` is ``1 / lam_i``, or ``None`` when ``lam_i == 0``
    (the temperature is undefined there; the value is exactly 0).
    """

    value: float
    temperature: float | None
    feature: str


def heat_capacity(model: ExpFamModel, i: int) -> HeatCapacity:
    """``d E[f_i] / d T_i = -lam_i^2 * var(f_i)``; never positive."""
    if not 0 <= i < model.dim:
        raise DomainError(f"feature index {i} out of range [0, {model.dim})")
    lam_i = float(model.lam[i])
    var_i = float(fisher_information(model)[i, i])
    value = -(lam_i**2) * var_i
    temperature = None if lam_i == 0.0 else 1.0 / lam_i
    return HeatCapacity(
        value=value, temperature=temperature, feature=model.features.names[i]
    )
