"""Data model and likelihood arithmetic for annotator attentiveness.

An annotator with attentiveness ``eta`` in [0, 1] prefers the stronger
model's response with probability ``1/2 + eta * (mu - 1/2)``, where ``mu``
is the population-level probability that the stronger model wins a
comparison. ``eta = 0`` is a fair coin, ``eta = 1`` tracks the population
preference exactly. Everything downstream (EM, posteriors, filtering) is
built on the likelihood functions here.

All likelihood code works from the sufficient statistic ``(sum_z, n)`` of a
user's history and stays in log space: label counts reach the thousands and
raw products would underflow.
"""

from dataclasses import dataclass
from typing import Literal, Union

import numpy as np

from .numerics import QuadratureGrid, log_beta, log_sum_exp

# Continuous prior densities are evaluated with eta clipped to this margin so
# endpoint nodes keep finite log-densities even for near-flat shapes; for the
# admissible families (alpha, beta > 1) the true density vanishes there and
# the distortion is far below quadrature resolution.
ETA_DENSITY_CLIP = 1e-12


@dataclass(frozen=True)
class AnnotationRecord:
    """One binary preference label: 1 means model A's response was chosen."""

    user_id: str
    item_id: str
    label: int

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")


@dataclass(frozen=True)
class UserHistory:
    """A user's full label sequence plus the cached label sum."""

    user_id: str
    labels: tuple[int, ...]
    sum_z: int

    def __post_init__(self):
        if any(z not in (0, 1) for z in self.labels):
            raise ValueError("labels must be 0/1")
        if self.sum_z != sum(self.labels):
            raise ValueError("sum_z cache disagrees with labels")

    @classmethod
    def from_labels(cls, user_id: str, labels) -> "UserHistory":
        labels = tuple(int(z) for z in labels)
        return cls(user_id=user_id, labels=labels, sum_z=sum(labels))

    @property
    def n(self) -> int:
        return len(self.labels)


def histories_from_records(records) -> list["UserHistory"]:
    """Group records into per-user histories, first-seen user order.

    Rejects duplicate (user_id, item_id) pairs; labels keep record order.
    """
    seen: set[tuple[str, str]] = set()
    labels: dict[str, list[int]] = {}
    for rec in records:
        key = (rec.user_id, rec.item_id)
        if key in seen:
            raise ValueError(f"duplicate (user_id, item_id): {key!r}")
        seen.add(key)
        labels.setdefault(rec.user_id, []).append(rec.label)
    return [UserHistory.from_labels(uid, zs) for uid, zs in labels.items()]


@dataclass(frozen=True)
class TwoPointPrior:
    """Attentiveness takes value eta_lo with probability q1, else eta_hi."""

    q1: float
    eta_lo: float
    eta_hi: float

    def __post_init__(self):
        if not 0.0 <= self.q1 <= 1.0:
            raise ValueError("q1 must lie in [0, 1]")
        if not 0.0 <= self.eta_lo <= self.eta_hi <= 1.0:
            raise ValueError("need 0 <= eta_lo <= eta_hi <= 1")

    @property
    def q2(self) -> float:
        return 1.0 - self.q1


@dataclass(frozen=True)
class BetaPrior:
    """Beta(alpha, beta) attentiveness density; shapes strictly above 1."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 1.0 and self.beta > 1.0):
            raise ValueError("Beta prior requires alpha > 1 and beta > 1")

    def log_density(self, eta) -> np.ndarray:
        e = np.clip(np.asarray(eta, dtype=float), ETA_DENSITY_CLIP, 1.0 - ETA_DENSITY_CLIP)
        return (
            (self.alpha - 1.0) * np.log(e)
            + (self.beta - 1.0) * np.log1p(-e)
            - log_beta(self.alpha, self.beta)
        )


@dataclass(frozen=True)
class LogisticNormalMixturePrior:
    """Density of sigmoid(X) where X is a Gaussian mixture on the logit line."""

    weights: tuple[float, ...]
    means: tuple[float, ...]
    sigmas: tuple[float, ...]

    def __post_init__(self):
        k = len(self.weights)
        if k == 0 or len(self.means) != k or len(self.sigmas) != k:
            raise ValueError("weights/means/sigmas must share a positive length")
        if k > 1 and any(not 0.0 < w < 1.0 for w in self.weights):
            raise ValueError("component weights must lie in (0, 1)")
        if abs(sum(self.weights) - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")
        if any(s <= 0.0 for s in self.sigmas):
            raise ValueError("sigmas must be positive")

    def log_density(self, eta) -> np.ndarray:
        e = np.clip(np.asarray(eta, dtype=float), ETA_DENSITY_CLIP, 1.0 - ETA_DENSITY_CLIP)
        x = np.log(e) - np.log1p(-e)
        w = np.log(np.asarray(self.weights))
        m = np.asarray(self.means)
        s = np.asarray(self.sigmas)
        comp = (
            w
            - 0.5 * np.log(2.0 * np.pi)
            - np.log(s)
            - 0.5 * ((x[..., None] - m) / s) ** 2
        )
        return log_sum_exp(comp, axis=-1) - np.log(e) - np.log1p(-e)


AttentivenessPrior = Union[TwoPointPrior, BetaPrior, LogisticNormalMixturePrior]

MuMode = Literal["fixed", "free"]


@dataclass(frozen=True)
class ModelParams:
    """Full parameter vector: attentiveness prior plus the preference rate mu.

    mu is the probability that the stronger model wins a comparison; the
    model is unidentifiable at mu = 1/2 and degenerate at 1, so the open
    interval is enforced. mu_mode records whether mu was held fixed or
    estimated alongside the prior.
    """

    prior: AttentivenessPrior
    mu: float
    mu_mode: MuMode = "fixed"

    def __post_init__(self):
        if not 0.5 < self.mu < 1.0:
            raise ValueError("mu must lie strictly inside (1/2, 1)")
        if self.mu_mode not in ("fixed", "free"):
            raise ValueError("mu_mode must be 'fixed' or 'free'")


def bernoulli_response_prob(eta, mu):
    """P(label = 1) for attentiveness eta: 1/2 + eta * (mu - 1/2)."""
    e = np.asarray(eta, dtype=float)
    if np.any(e < 0.0) or np.any(e > 1.0):
        raise ValueError("eta must lie in [0, 1]")
    if not 0.0 < mu < 1.0:
        raise ValueError("mu must lie in (0, 1)")
    out = 0.5 + e * (mu - 0.5)
    return float(out) if out.ndim == 0 else out


def obs_loglik(z: int, mu: float, eta: float) -> float:
    """Log-probability of one label under attentiveness eta."""
    if z not in (0, 1):
        raise ValueError("z must be 0 or 1")
    g = bernoulli_response_prob(eta, mu)
    p = g if z == 1 else 1.0 - g
    return float(np.log(p)) if p > 0.0 else float("-inf")


def loglik_from_counts(sum_z, n, mu, eta):
    """User log-likelihood from the sufficient statistic (sum_z, n).

    Vectorizes over eta; with mu in (0, 1) both outcome probabilities are
    positive, so the result is finite.
    """
    if np.any(np.asarray(sum_z) < 0) or np.any(np.asarray(sum_z) > np.asarray(n)):
        raise ValueError("need 0 <= sum_z <= n")
    g = bernoulli_response_prob(eta, mu)
    return sum_z * np.log(g) + (np.asarray(n) - sum_z) * np.log1p(-g)


def user_loglik(history: UserHistory, mu: float, eta: float) -> float:
    """Log-likelihood of one user's history at a single eta."""
    return float(loglik_from_counts(history.sum_z, history.n, mu, eta))


def prior_log_masses(prior: AttentivenessPrior, grid: QuadratureGrid):
    """Discrete log-mass representation of a prior for marginalization.

    Returns (support, log_mass): atoms and log-probabilities for the
    two-point family, or grid nodes and log(weight * density) for continuous
    families. Marginal likelihoods are then log-sum-exp reductions either way.
    """
    if isinstance(prior, TwoPointPrior):
        support = np.array([prior.eta_lo, prior.eta_hi])
        with np.errstate(divide="ignore"):
            log_mass = np.log(np.array([prior.q1, prior.q2]))
        return support, log_mass
    with np.errstate(divide="ignore"):
        log_w = np.log(grid.weights)
    return grid.nodes, log_w + prior.log_density(grid.nodes)


def suff_stats(histories):
    """Dedup histories by (sum_z, n): unique stat rows plus multiplicities.

    Returns (sum_z_u, n_u, count_u, inverse) with `inverse` mapping each
    history to its row. Likelihoods and posteriors depend on a history only
    through this pair, so EM-scale work is O(unique rows), not O(users).
    """
    stats = np.array([[h.sum_z, h.n] for h in histories], dtype=float)
    uniq, inverse, counts = np.unique(
        stats, axis=0, return_inverse=True, return_counts=True
    )
    return uniq[:, 0], uniq[:, 1], counts.astype(float), inverse


def _loglik_matrix(sum_z_u, n_u, mu, support):
    g = bernoulli_response_prob(support, mu)
    log_g = np.log(g)
    log_1mg = np.log1p(-g)
    return np.outer(sum_z_u, log_g) + np.outer(n_u - sum_z_u, log_1mg)


def observed_loglik(histories, params: ModelParams, grid: QuadratureGrid) -> float:
    """Observed-data log-likelihood: sum over users of the log marginal.

    The per-user marginal integrates the likelihood against the prior,
    exactly for the two-point family and by trapezoid quadrature for
    continuous ones; the inner reduction is a log-sum-exp.
    """
    if not histories:
        return 0.0
    support, log_mass = prior_log_masses(params.prior, grid)
    sum_z_u, n_u, counts, _ = suff_stats(histories)
    smat = _loglik_matrix(sum_z_u, n_u, params.mu, support)
    per_row = log_sum_exp(log_mass[None, :] + smat, axis=1)
    if np.any(~np.isfinite(per_row)):
        raise FloatingPointError("marginal likelihood underflowed to zero")
    return float(np.dot(counts, per_row))
