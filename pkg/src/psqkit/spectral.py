"""Secular-equation roots for the batch-arrival PS analysis.

The secular function is

    psi(s) = 1 - coupling * sum_i p_i / (s + mu_i),

whose N zeros -b_k are all real, simple, and interlace the poles -mu_i:
0 < b_N < mu_N and mu_{i+1} < b_i < mu_i.  Each bracket therefore carries a
guaranteed sign change of g(x) = psi(-x), which the finder exploits:
lockstep bisection alternating with bracket-safeguarded secant steps, all
brackets refined simultaneously as numpy vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distributions import HyperExp
from .errors import BracketFailure, NonPositiveParameter, PoleEvaluation, UnstableSystem

# convergence: |g(x)| below RESID_TOL, or bracket narrower than WIDTH_RTOL*mu_1
RESID_TOL = 1e-13
WIDTH_RTOL = 1e-14

# rate pairs closer than this (relative) or residuals limited by the
# double-precision conditioning floor set the conditioning_warning flag
_NEAR_DEGENERATE_RTOL = 1e-6
_RESID_CAP = 1e-12


@dataclass(frozen=True)
class SecularProblem:
    """Coupling strength plus the mixture terms of the secular function.

    coupling is the product (batch rate * mean batch size); stability
    requires coupling * sum_i p_i/mu_i < 1.
    """

    coupling: float
    weights: tuple[float, ...]
    rates: tuple[float, ...]

    def __post_init__(self):
        if self.coupling < 0:
            raise NonPositiveParameter(f"coupling must be >= 0, got {self.coupling}")
        mu = np.array(self.rates)
        p = np.array(self.weights)
        if len(p) != len(mu) or len(mu) == 0:
            raise NonPositiveParameter("weights and rates must be nonempty, same length")
        if np.any(p <= 0) or np.any(mu <= 0):
            raise NonPositiveParameter("weights and rates must be positive")
        if np.any(np.diff(mu) >= 0):
            raise NonPositiveParameter("rates must be strictly decreasing")
        if abs(p.sum() - 1.0) > 1e-9:
            raise NonPositiveParameter(f"weights sum to {p.sum()!r}, expected 1")
        if self.rho >= 1.0:
            raise UnstableSystem(f"unstable: rho = {self.rho}")

    @property
    def rho(self) -> float:
        """Offered load implied by the coupling, coupling * sum(p/mu)."""
        p, mu = np.array(self.weights), np.array(self.rates)
        return float(self.coupling * np.sum(p / mu))

    @classmethod
    def from_hyperexp(cls, coupling: float, d: HyperExp) -> "SecularProblem":
        return cls(coupling=float(coupling), weights=d.weights, rates=d.rates)


@dataclass(frozen=True)
class SpectralRoots:
    """Roots b_1 > ... > b_N of the secular equation, one per bracket.

    conditioning_warning is set when rates are nearly degenerate or a root
    sits so close to its pole that the residual is limited by the
    double-precision conditioning floor rather than the solver tolerance.
    """

    roots: tuple[float, ...]
    conditioning_warning: bool = False


def psi_eval(prob: SecularProblem, s: float) -> float:
    """Evaluate psi(s) = 1 - coupling * sum_i p_i/(s + mu_i).

    Raises:
        PoleEvaluation: s is within 1e-14*mu_i of a pole -mu_i.
    """
    p = np.array(prob.weights)
    mu = np.array(prob.rates)
    denom = s + mu
    if np.any(np.abs(denom) < 1e-14 * mu):
        raise PoleEvaluation(f"s={s} is numerically at a pole of psi")
    return float(1.0 - prob.coupling * np.sum(p / denom))


def _g_batch(x, p, mu, coupling):
    """g at a vector of points, one per bracket: g(x) = psi(-x)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = p[None, :] / (mu[None, :] - x[:, None])
        return 1.0 - coupling * terms.sum(axis=1)


def _g_prime_abs(x, p, mu, coupling):
    """|g'(x)| = coupling * sum_i p_i/(mu_i - x)^2, elementwise."""
    with np.errstate(divide="ignore", invalid="ignore"):
        return coupling * (p[None, :] / (mu[None, :] - x[:, None]) ** 2).sum(axis=1)


def find_roots(prob: SecularProblem) -> SpectralRoots:
    """Find all N secular roots, one per interlacing bracket.

    Brackets are (mu_{i+1}, mu_i) for i < N and (0, mu_N) for the last root.
    Endpoints at poles are inset by 1e-12 of the bracket width; if the sign
    condition is not yet met there (root extremely close to the pole) the
    inset shrinks geometrically toward the pole until it is.

    Raises:
        UnstableSystem: the problem's load is >= 1.
        NonPositiveParameter: coupling is not > 0 (no roots to find).
        BracketFailure: a bracket carries no resolvable sign change, which
            signals an invariant breach (or a root beyond double resolution).
    """
    if prob.coupling <= 0.0:
        raise NonPositiveParameter("find_roots requires coupling > 0")
    if prob.rho >= 1.0:
        raise UnstableSystem(f"unstable: rho = {prob.rho}")

    p = np.array(prob.weights)
    mu = np.array(prob.rates)
    n = len(mu)
    lo = np.empty(n)
    lo[: n - 1] = mu[1:]
    lo[n - 1] = 0.0
    hi = mu.copy()
    width0 = hi - lo

    # inset endpoints away from the poles until the sign change is captured;
    # the lower endpoint of the last bracket is 0 (not a pole), keep it exact
    a = lo + 1e-12 * width0
    a[n - 1] = 0.0
    b = hi - 1e-12 * width0
    ga = _g_batch(a, p, mu, prob.coupling)
    gb = _g_batch(b, p, mu, prob.coupling)
    for _ in range(60):
        bad_a = ~(ga > 0.0)
        bad_b = ~(gb < 0.0)
        if not (bad_a.any() or bad_b.any()):
            break
        a = np.where(bad_a, lo + (a - lo) / 1024.0, a)
        b = np.where(bad_b, hi - (hi - b) / 1024.0, b)
        if np.any(a[bad_a] <= lo[bad_a]) or np.any(b[bad_b] >= hi[bad_b]):
            raise BracketFailure("sign change not resolvable next to a pole")
        ga = np.where(bad_a, _g_batch(a, p, mu, prob.coupling), ga)
        gb = np.where(bad_b, _g_batch(b, p, mu, prob.coupling), gb)
    else:
        raise BracketFailure("bracket sign conditions violated")

    wtol = WIDTH_RTOL * mu[0]
    xbest = 0.5 * (a + b)
    gbest = _g_batch(xbest, p, mu, prob.coupling)
    done = np.zeros(n, dtype=bool)
    for it in range(220):
        done |= (np.abs(gbest) < RESID_TOL) | ((b - a) <= wtol)
        if done.all():
            break
        if it % 2 == 0:
            x = 0.5 * (a + b)
        else:
            # secant through the bracket endpoints lands strictly inside;
            # safeguard against endpoint stagnation by flooring the step
            x = b - gb * (b - a) / (gb - ga)
            step = 1e-3 * (b - a)
            x = np.clip(x, a + step, b - step)
        x = np.where(done, xbest, x)
        gx = _g_batch(x, p, mu, prob.coupling)
        pos = gx > 0.0
        a = np.where(~done & pos, x, a)
        ga = np.where(~done & pos, gx, ga)
        b = np.where(~done & ~pos, x, b)
        gb = np.where(~done & ~pos, gx, gb)
        better = ~done & (np.abs(gx) < np.abs(gbest))
        xbest = np.where(better, x, xbest)
        gbest = np.where(better, gx, gbest)

    resid = np.abs(gbest)
    floor = 64.0 * np.finfo(float).eps * _g_prime_abs(xbest, p, mu, prob.coupling) * xbest
    if np.any(resid > np.maximum(_RESID_CAP, floor)):
        raise BracketFailure(
            f"root residual {resid.max():.3e} above tolerance and conditioning floor"
        )
    if np.any(xbest <= lo) or np.any(xbest >= hi) or np.any(np.diff(xbest) >= 0):
        raise BracketFailure("roots escaped their interlacing brackets")

    near_degenerate = bool(
        n > 1 and np.min((mu[:-1] - mu[1:]) / mu[:-1]) < _NEAR_DEGENERATE_RTOL
    )
    floor_limited = bool(np.any(resid > _RESID_CAP))
    return SpectralRoots(
        roots=tuple(float(r) for r in xbest),
        conditioning_warning=near_degenerate or floor_limited,
    )
