"""Batch-arrival processor-sharing queue: closed-form conditional response time.

The expected conditional response time for a job of size x is

    alpha(x) = c0*x + sum_k (c_k/b_k) * (1 - exp(-b_k*x)),

with c0 = 1/(1-rho), the b_k the secular roots for coupling lambda*n_bar,
and c_k = b_extra/(2*lambda*n_bar) * x_k/b_k built from the Cauchy-system
solution x_k.  The module also evaluates the mean sojourn time and a
residual check of the defining integro-differential equation, integrated
analytically (every term is a mix of exponentials).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import cauchy, spectral
from .distributions import HyperExp, _exp_neg, mean
from .errors import DegenerateSpectrum, NegativeArgument, NonPositiveParameter, UnstableSystem

# phases whose secular root would sit closer to its pole than the double
# grid can represent are dropped before the spectral solve; the induced
# error in every output is O(coupling * weight), i.e. below roundoff
_PRUNE_ULPS = 512.0


@dataclass(frozen=True)
class BpsInput:
    """Arrival and service description of the batch-PS queue.

    Attributes:
        lam: Poisson rate of batch epochs.
        n_bar: mean batch size (jobs), > 0.
        b_extra: mean number of companions arriving with a tagged job, >= 0.
        service: hyper-exponential job-size law.
    """

    lam: float
    n_bar: float
    b_extra: float
    service: HyperExp

    def __post_init__(self):
        if not (self.lam > 0.0) or not (self.n_bar > 0.0):
            raise NonPositiveParameter("lam and n_bar must be > 0")
        if self.b_extra < 0.0:
            raise NonPositiveParameter("b_extra must be >= 0")
        if self.rho >= 1.0:
            raise UnstableSystem(f"unstable: rho = {self.rho}")

    @property
    def rho(self) -> float:
        return self.lam * self.n_bar * mean(self.service)


@dataclass(frozen=True)
class BpsSolution:
    """Coefficients of the closed-form response-time curve.

    coeffs pairs with roots.roots elementwise; cauchy_weights are the raw
    Cauchy-system solution values x_k (exposed for diagnostics).  All
    coefficients are 0 when b_extra = 0, in which case alpha(x) = x/(1-rho).
    """

    c0: float
    coeffs: tuple[float, ...]
    cauchy_weights: tuple[float, ...]
    roots: spectral.SpectralRoots
    rho: float
    input: BpsInput


def solve_bps(inp: BpsInput) -> BpsSolution:
    """Solve the batch-PS queue: secular roots, Cauchy weights, coefficients."""
    coupling = inp.lam * inp.n_bar
    p, mu = inp.service.as_arrays()
    keep = coupling * p >= _PRUNE_ULPS * np.finfo(float).eps * mu
    if not keep.any():
        raise DegenerateSpectrum(
            "coupling too small to resolve any secular root; treat as load-only PS"
        )
    p, mu = p[keep] / p[keep].sum(), mu[keep]

    prob = spectral.SecularProblem(
        coupling=coupling,
        weights=tuple(float(w) for w in p),
        rates=tuple(float(r) for r in mu),
    )
    roots = spectral.find_roots(prob)
    b = np.array(roots.roots)
    x = cauchy.solve_closed_form(cauchy.CauchySystem.from_spectrum(mu, b))
    c = (inp.b_extra / (2.0 * coupling)) * x / b
    return BpsSolution(
        c0=1.0 / (1.0 - inp.rho),
        coeffs=tuple(float(v) for v in c),
        cauchy_weights=tuple(float(v) for v in x),
        roots=roots,
        rho=inp.rho,
        input=inp,
    )


def _check_nonneg(x) -> np.ndarray:
    xs = np.asarray(x, dtype=float)
    if np.any(xs < 0):
        raise NegativeArgument("job size must be >= 0")
    return xs


def alpha(sol: BpsSolution, x):
    """Expected conditional response time for a job of size x.

    alpha(0) = 0 exactly; alpha is strictly increasing and, for
    b_extra > 0, strictly concave.  Accepts scalars or arrays.
    """
    xs = _check_nonneg(x)
    b = np.array(sol.roots.roots)
    gamma = np.array(sol.coeffs) / b
    out = sol.c0 * xs + (1.0 - _exp_neg(np.multiply.outer(xs, b))) @ gamma
    return out if out.ndim else float(out)


def alpha_derivatives(sol: BpsSolution, x):
    """Slope and curvature of alpha: (c0 + sum c_k e^{-b_k x}, -sum c_k b_k e^{-b_k x})."""
    xs = _check_nonneg(x)
    b = np.array(sol.roots.roots)
    c = np.array(sol.coeffs)
    e = _exp_neg(np.multiply.outer(xs, b))
    slope = sol.c0 + e @ c
    curvature = -(e @ (c * b))
    if slope.ndim:
        return slope, curvature
    return float(slope), float(curvature)


def mean_sojourn_bps(sol: BpsSolution) -> float:
    """Mean sojourn time  m/(1-rho) + sum_{i,j} p_i c_j / (mu_i + b_j)."""
    p, mu = sol.input.service.as_arrays()
    b = np.array(sol.roots.roots)
    c = np.array(sol.coeffs)
    double_sum = float(p @ (c / (mu[:, None] + b[None, :])).sum(axis=1))
    return mean(sol.input.service) / (1.0 - sol.rho) + double_sum


def kleinrock_residual(sol: BpsSolution, x):
    """Residual of the defining integro-differential equation at x.

    Evaluates  alpha'(x) - L*I_inf(x) - L*I_conv(x) - b_extra*ccdf(x) - 1
    with L = lambda*n_bar, where both integrals of alpha'(y) against the
    shifted tail are expanded analytically into mixes of exponentials.
    A correct solution drives this to rounding level; the residual scale
    to compare against is 1 + alpha'(x).
    """
    xs = _check_nonneg(x)
    lam_n = sol.input.lam * sol.input.n_bar
    p, mu = sol.input.service.as_arrays()
    b = np.array(sol.roots.roots)
    c = np.array(sol.coeffs)
    c0 = sol.c0

    e_mu = _exp_neg(np.multiply.outer(xs, mu))  # (..., I)
    e_b = _exp_neg(np.multiply.outer(xs, b))  # (..., K)
    slope = c0 + e_b @ c

    # tail-lookahead integral: sum_i p_i e^{-mu_i x} * Laplace(alpha')(mu_i)
    laplace = c0 / mu + (c[None, :] / (mu[:, None] + b[None, :])).sum(axis=1)
    i_inf = e_mu @ (p * laplace)

    # convolution integral over [0, x], antiderivatives of e^{-a y} e^{-m (x-y)}
    i_conv = (1.0 - e_mu) @ (p * c0 / mu)
    gap = mu[:, None] - b[None, :]  # nonzero by interlacing
    w = p[:, None] * c[None, :] / gap
    i_conv = i_conv + e_b @ w.sum(axis=0) - e_mu @ w.sum(axis=1)

    resid = slope - lam_n * (i_inf + i_conv) - sol.input.b_extra * (e_mu @ p) - 1.0
    return resid if resid.ndim else float(resid)


def bin_conditional_sojourn(sol: BpsSolution, lo: float, hi: float) -> float:
    """Exact E[alpha(X) | lo < X <= hi] under the service law; hi may be inf.

    The oracle for per-size-bin simulated sojourns: integrating the curve
    against the law removes binning bias entirely.
    """
    if lo < 0 or hi <= lo:
        raise NegativeArgument("need 0 <= lo < hi")
    p, mu = sol.input.service.as_arrays()
    b = np.array(sol.roots.roots)
    gamma = np.array(sol.coeffs) / b

    def upper(edge):
        if np.isinf(edge):
            return np.zeros_like(mu)
        return (edge + 1.0 / mu) * _exp_neg(mu * edge)

    prob = float(p @ (_exp_neg(mu * lo) - (0.0 if np.isinf(hi) else _exp_neg(mu * hi))))
    if prob <= 0.0:
        raise NonPositiveParameter(f"bin ({lo}, {hi}] has zero probability")
    ix = float(p @ (upper(lo) - upper(hi)))
    rate_sum = mu[:, None] + b[None, :]
    e_lo = _exp_neg(rate_sum * lo)
    e_hi = 0.0 if np.isinf(hi) else _exp_neg(rate_sum * hi)
    ie = ((p * mu)[None, :] @ ((e_lo - e_hi) / rate_sum)).ravel()
    return float((sol.c0 * ix + gamma @ (prob - ie)) / prob)


def response_curve(sol: BpsSolution, xs) -> dict[str, np.ndarray]:
    """Column table of the curve and its diagnostics over a grid of sizes."""
    xs = np.atleast_1d(_check_nonneg(xs))
    slope, curv = alpha_derivatives(sol, xs)
    return {
        "x": xs,
        "alpha": alpha(sol, xs),
        "alpha_prime": slope,
        "alpha_second": curv,
        "residual": kleinrock_residual(sol, xs),
    }
