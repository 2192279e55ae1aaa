"""Shared random-instance generators for the property tests.

Generators keep spectra comfortably conditioned (weight floors, bounded
rate ratios) so residual assertions test the algorithms rather than the
limits of double precision.
"""

import numpy as np

from psqkit import HyperExp, SecularProblem, make_hyperexp


def random_hyperexp(
    rng: np.random.Generator,
    n_max: int = 8,
    ratio_span: tuple[float, float] = (1.15, 3.0),
    weight_floor: float = 0.25,
) -> HyperExp:
    """Random mixture with bounded rate ratios and floored weights."""
    n = int(rng.integers(1, n_max + 1))
    ratios = rng.uniform(*ratio_span, size=n - 1)
    rates = np.concatenate([[1.0], np.cumprod(ratios)])[::-1] * rng.uniform(0.2, 4.0)
    weights = weight_floor / n + (1.0 - weight_floor) * rng.dirichlet(np.ones(n))
    return make_hyperexp(list(zip(weights, rates)))


def random_secular(
    rng: np.random.Generator,
    n_max: int = 50,
    rho_span: tuple[float, float] = (0.15, 0.9),
) -> SecularProblem:
    """Random stable secular problem over a random mixture."""
    d = random_hyperexp(rng, n_max=n_max, ratio_span=(1.1, 1.6), weight_floor=0.3)
    p, mu = d.as_arrays()
    m = float(np.sum(p / mu))
    rho = rng.uniform(*rho_span)
    return SecularProblem(coupling=rho / m, weights=d.weights, rates=d.rates)


def interleaved_squares(rng: np.random.Generator, n_max: int = 10, margin: float = 0.05):
    """Random strictly interleaved (mu^2, b^2) families, decreasing.

    Each b_k is placed inside its bracket with a relative margin from both
    endpoints, keeping all pairwise gaps >= ~margin relative.
    """
    n = int(rng.integers(1, n_max + 1))
    ratios = rng.uniform(1.2, 2.5, size=n - 1)
    mu = np.concatenate([[1.0], np.cumprod(ratios)])[::-1] * rng.uniform(0.5, 2.0)
    lo = np.concatenate([mu[1:], [0.1 * mu[-1]]])
    frac = rng.uniform(margin, 1.0 - margin, size=n)
    b = lo + frac * (mu - lo)
    return tuple(float(v) for v in mu**2), tuple(float(v) for v in b**2)
