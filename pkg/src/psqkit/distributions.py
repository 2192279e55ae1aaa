"""Hyper-exponential job-size laws: evaluation, moments, truncation, sampling.

A hyper-exponential law is a finite mixture of exponentials with
complementary CDF  sum_i p_i * exp(-mu_i * x).  It is the job-size model for
both the batch-arrival PS queue and the two-level PS discipline, so this
module also provides the threshold-truncated moments and the excess
(overshoot) law used by the threshold analysis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptyPhases,
    MalformedScenario,
    NegativeArgument,
    NonPositiveParameter,
    WeightsNotNormalized,
)

# exp(-a) underflows to subnormals near a = 745.13; beyond this the term is
# flushed to an exact 0.0 so downstream tail sums are reproducible.
EXP_FLUSH = 745.0

# phases closer than this in relative rate are merged (summing weights)
_MERGE_RTOL = 1e-9


def _exp_neg(a):
    """exp(-a) with arguments beyond the underflow threshold flushed to 0."""
    a = np.asarray(a, dtype=float)
    out = np.where(a > EXP_FLUSH, 0.0, np.exp(-np.minimum(a, EXP_FLUSH)))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class HyperExp:
    """Mixture of exponentials with strictly decreasing rates.

    Attributes:
        weights: mixing probabilities, all > 0, summing to 1.
        rates: exponential rates, strictly decreasing, all > 0.

    Instances are immutable; build them with :func:`make_hyperexp`, which
    validates, merges near-duplicate rates, and sorts.
    """

    weights: tuple[float, ...]
    rates: tuple[float, ...]

    @property
    def n_phases(self) -> int:
        return len(self.rates)

    def as_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Return (weights, rates) as float arrays."""
        return np.array(self.weights), np.array(self.rates)


@dataclass(frozen=True)
class TruncatedStats:
    """Moments of a job-size law truncated at a threshold.

    Attributes:
        theta: truncation threshold.
        x1: first truncated moment, integral of the CCDF over [0, theta].
        x2: second truncated moment, integral of 2*y*CCDF(y) over [0, theta].
        tail: CCDF at theta.
        tail_terms: per-phase tail contributions p_i * exp(-mu_i * theta).
    """

    theta: float
    x1: float
    x2: float
    tail: float
    tail_terms: tuple[float, ...]


def make_hyperexp(phases) -> HyperExp:
    """Build a validated HyperExp from (weight, rate) pairs.

    Near-duplicate rates (relative gap < 1e-9) are merged by summing their
    weights, which preserves the law exactly and keeps all spectral gaps
    strictly positive.  Weights must sum to 1 within 1e-9; they are then
    renormalized so the stored sum is 1 to machine precision.

    Raises:
        EmptyPhases: phase list is empty.
        NonPositiveParameter: some weight or rate is <= 0.
        WeightsNotNormalized: |sum(p) - 1| > 1e-9.
    """
    phases = list(phases)
    if not phases:
        raise EmptyPhases("need at least one (weight, rate) phase")
    for p, mu in phases:
        if not (p > 0.0) or not (mu > 0.0):
            raise NonPositiveParameter(f"phase (p={p}, mu={mu}) must be positive")
    total = float(sum(p for p, _ in phases))
    if abs(total - 1.0) > 1e-9:
        raise WeightsNotNormalized(f"weights sum to {total!r}, expected 1")

    phases.sort(key=lambda pm: -pm[1])
    merged: list[list[float]] = []
    for p, mu in phases:
        if merged and abs(merged[-1][1] - mu) < _MERGE_RTOL * merged[-1][1]:
            merged[-1][0] += p
        else:
            merged.append([p, mu])
    weights = np.array([p for p, _ in merged]) / total
    rates = tuple(float(mu) for _, mu in merged)
    return HyperExp(weights=tuple(float(w) for w in weights), rates=rates)


def ccdf(d: HyperExp, x):
    """Complementary CDF  sum_i p_i * exp(-mu_i * x); accepts scalars or arrays."""
    xs = np.asarray(x, dtype=float)
    if np.any(xs < 0):
        raise NegativeArgument("ccdf argument must be >= 0")
    p, mu = d.as_arrays()
    out = _exp_neg(np.multiply.outer(xs, mu)) @ p
    return out if out.ndim else float(out)


def mean(d: HyperExp) -> float:
    """Mean job size  sum_i p_i / mu_i."""
    p, mu = d.as_arrays()
    return float(np.sum(p / mu))


def second_moment(d: HyperExp) -> float:
    """Second raw moment  sum_i 2 p_i / mu_i^2."""
    p, mu = d.as_arrays()
    return float(np.sum(2.0 * p / mu**2))


def truncated_stats(d: HyperExp, theta: float) -> TruncatedStats:
    """Truncated first/second moments and tail at a threshold.

    Closed forms (antiderivatives of the defining integrals):
        x1 = sum_i p_i (1 - e^{-mu_i theta}) / mu_i
        x2 = sum_i 2 p_i (1 - e^{-mu_i theta} (1 + mu_i theta)) / mu_i^2
    """
    if theta < 0:
        raise NegativeArgument("threshold must be >= 0")
    p, mu = d.as_arrays()
    e = _exp_neg(mu * theta)
    terms = p * e
    x1 = float(np.sum(p * (1.0 - e) / mu))
    x2 = float(np.sum(2.0 * p * (1.0 - e * (1.0 + mu * theta)) / mu**2))
    return TruncatedStats(
        theta=float(theta),
        x1=x1,
        x2=x2,
        tail=float(np.sum(terms)),
        tail_terms=tuple(float(t) for t in terms),
    )


def excess_law(d: HyperExp, theta: float) -> HyperExp:
    """Law of the remaining size beyond theta, given size > theta.

    Same rates, reweighted to p_i e^{-mu_i theta} / ccdf(theta).  Phases whose
    tail term underflowed to exact 0 are dropped (their conditional weight is
    zero and a zero weight is not a valid phase).

    Raises:
        NegativeArgument: theta < 0.
        NonPositiveParameter: the whole tail underflowed (theta far beyond
            the largest representable scale), so no excess law exists.
    """
    if theta < 0:
        raise NegativeArgument("threshold must be >= 0")
    p, mu = d.as_arrays()
    terms = p * _exp_neg(mu * theta)
    tail = float(np.sum(terms))
    if tail <= 0.0:
        raise NonPositiveParameter(
            f"tail underflowed to 0 at theta={theta}; excess law undefined"
        )
    keep = terms > 0.0
    w = terms[keep] / tail
    return HyperExp(
        weights=tuple(float(x) for x in w),
        rates=tuple(float(r) for r in mu[keep]),
    )


def sample(d: HyperExp, rng: np.random.Generator, size=None):
    """Draw job sizes: pick phase i with probability p_i, then Exp(mu_i).

    Mutates only the caller-supplied generator; fixed generator state gives
    an identical sequence.  Returns a scalar for size=None, else an array.
    """
    p, mu = d.as_arrays()
    cum = np.cumsum(p)
    cum[-1] = 1.0
    n = 1 if size is None else int(size)
    idx = np.searchsorted(cum, rng.random(n), side="right")
    out = rng.exponential(1.0, n) / mu[idx]
    return float(out[0]) if size is None else out


def hyperexp_to_json(d: HyperExp) -> dict:
    """Scenario-file fragment: {"phases": [{"p": .., "mu": ..}, ...]}."""
    return {"phases": [{"p": p, "mu": mu} for p, mu in zip(d.weights, d.rates)]}


def hyperexp_from_json(obj) -> HyperExp:
    """Parse the scenario-file fragment produced by :func:`hyperexp_to_json`."""
    try:
        pairs = [(ph["p"], ph["mu"]) for ph in obj["phases"]]
    except (KeyError, TypeError) as exc:
        raise MalformedScenario(f"bad phases fragment: {exc}") from exc
    return make_hyperexp(pairs)
