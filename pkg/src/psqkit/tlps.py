"""Two-level processor sharing: threshold evaluation, sweeps, optimization.

Work up to the threshold theta runs in a high-priority PS queue; the
remainder waits in a low-priority PS queue served only while the high queue
is empty.  The low queue behaves as a batch-arrival PS system whose batch
parameters derive from the threshold-truncated moments of the job-size law:

    n_bar   = tail / (1 - rho_theta)
    b_extra = 2*lam*tail*(w_bar + theta) / (1 - rho_theta)

with tail the CCDF at theta, rho_theta the truncated load, and w_bar the
mean wait behind the high queue.  The mean sojourn time combines the
high-queue terms with a double sum over the tail terms and the low-queue
curve coefficients.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import bps
from .distributions import (
    HyperExp,
    TruncatedStats,
    _exp_neg,
    excess_law,
    mean,
    truncated_stats,
)
from .errors import DegenerateSpectrum, NegativeArgument, NonPositiveParameter, UnstableSystem

# default sweep grid: log-spaced thresholds spanning [1e-2, 1e2] mean sizes
GRID_POINTS = 64
GRID_SPAN = (1e-2, 1e2)

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class TlpsModel:
    """Poisson job arrivals at rate lam with hyper-exponential sizes."""

    lam: float
    jobsize: HyperExp

    def __post_init__(self):
        if not (self.lam > 0.0):
            raise NonPositiveParameter("lam must be > 0")
        if self.rho >= 1.0:
            raise UnstableSystem(f"unstable: rho = {self.rho}")

    @property
    def rho(self) -> float:
        return self.lam * mean(self.jobsize)

    @property
    def ps_baseline(self) -> float:
        """Mean sojourn of plain PS (the theta -> 0 and theta -> inf limit)."""
        return mean(self.jobsize) / (1.0 - self.rho)


@dataclass(frozen=True)
class TlpsEvaluation:
    """Everything the threshold analysis derives at one theta.

    bps is None for thresholds so deep in the tail that the low queue's
    coupling underflows double resolution; such rows carry the plain-PS
    values analytically (the exact limit).
    """

    model: TlpsModel
    theta: float
    trunc: TruncatedStats
    rho_theta: float
    w_bar: float
    n_bar: float
    b_extra: float
    bps: bps.BpsSolution | None
    t_mean: float


@dataclass(frozen=True)
class SweepReport:
    """Threshold grid of evaluations plus the located minimizer."""

    rows: tuple[TlpsEvaluation, ...]
    best_theta: float
    best_t: float
    ps_baseline: float


def evaluate_tlps(model: TlpsModel, theta: float) -> TlpsEvaluation:
    """Evaluate the discipline at one threshold.

    Computes the truncated moments, the low-queue batch parameters, the
    embedded batch-PS solution on the excess law, and the mean sojourn time.
    """
    if theta < 0:
        raise NegativeArgument("theta must be >= 0")
    trunc = truncated_stats(model.jobsize, theta)
    rho_theta = model.lam * trunc.x1
    w_bar = model.lam * trunc.x2 / (2.0 * (1.0 - rho_theta))
    if trunc.tail <= 0.0:
        return _baseline_row(model, theta, trunc, rho_theta, w_bar)

    n_bar = trunc.tail / (1.0 - rho_theta)
    b_extra = 2.0 * model.lam * trunc.tail * (w_bar + theta) / (1.0 - rho_theta)
    try:
        sol = bps.solve_bps(
            bps.BpsInput(
                lam=model.lam,
                n_bar=n_bar,
                b_extra=b_extra,
                service=excess_law(model.jobsize, theta),
            )
        )
    except DegenerateSpectrum:
        # coupling below double resolution: the exact limit is plain PS
        return _baseline_row(model, theta, trunc, rho_theta, w_bar, n_bar, b_extra)

    b = np.array(sol.roots.roots)
    x = np.array(sol.cauchy_weights)
    tail_terms = np.array(trunc.tail_terms)
    _, mu = model.jobsize.as_arrays()
    double_sum = float(tail_terms @ ((x / b)[None, :] / (mu[:, None] + b[None, :])).sum(axis=1))
    t_mean = (
        (trunc.x1 + w_bar * trunc.tail) / (1.0 - rho_theta)
        + (mean(model.jobsize) - trunc.x1) / (1.0 - model.rho)
        + (w_bar + theta) / (1.0 - rho_theta) * double_sum
    )
    return TlpsEvaluation(
        model=model,
        theta=float(theta),
        trunc=trunc,
        rho_theta=rho_theta,
        w_bar=w_bar,
        n_bar=n_bar,
        b_extra=b_extra,
        bps=sol,
        t_mean=t_mean,
    )


def _baseline_row(model, theta, trunc, rho_theta, w_bar, n_bar=0.0, b_extra=0.0):
    return TlpsEvaluation(
        model=model,
        theta=float(theta),
        trunc=trunc,
        rho_theta=rho_theta,
        w_bar=w_bar,
        n_bar=n_bar,
        b_extra=b_extra,
        bps=None,
        t_mean=model.ps_baseline,
    )


def t_mean_via_embedded(ev: TlpsEvaluation) -> float:
    """Mean sojourn via the embedded batch-PS mean (route-equality check).

    Algebraically identical to the direct double-sum in evaluate_tlps; the
    test suite asserts the two routes agree.
    """
    if ev.bps is None:
        return ev.model.ps_baseline
    first = (ev.trunc.x1 + ev.w_bar * ev.trunc.tail) / (1.0 - ev.rho_theta)
    return first + ev.trunc.tail / (1.0 - ev.rho_theta) * bps.mean_sojourn_bps(ev.bps)


def conditional_sojourn(model: TlpsModel, theta: float, x):
    """Expected sojourn for a job of size x at threshold theta.

    Linear x/(1-rho_theta) up to theta, then the low-queue branch
    (w_bar + theta + alpha(x - theta)) / (1 - rho_theta), which jumps by
    w_bar/(1-rho_theta) at theta.  Accepts scalars or arrays.
    """
    return conditional_from_evaluation(evaluate_tlps(model, theta), x)


def conditional_from_evaluation(ev: TlpsEvaluation, x):
    """As conditional_sojourn, reusing an existing evaluation."""
    xs = np.asarray(x, dtype=float)
    if np.any(xs < 0):
        raise NegativeArgument("job size must be >= 0")
    scale = 1.0 - ev.rho_theta
    low = np.minimum(xs, ev.theta) / scale
    y = np.maximum(xs - ev.theta, 0.0)
    if ev.bps is not None:
        curve = bps.alpha(ev.bps, y)
    else:
        curve = y * scale / (1.0 - ev.model.rho)
    high = (ev.w_bar + ev.theta + curve) / scale
    out = np.where(xs <= ev.theta, low, high)
    return out if out.ndim else float(out)


def sweep_theta(model: TlpsModel, grid, max_workers: int | None = None) -> SweepReport:
    """Evaluate a sorted grid of thresholds and locate the best row.

    Rows are independent; max_workers > 1 evaluates them in a thread pool
    (order of the report is always the grid order).
    """
    thetas = [float(t) for t in grid]
    if not thetas:
        raise NegativeArgument("grid must be nonempty")
    if any(t < 0 for t in thetas) or any(a > b for a, b in zip(thetas, thetas[1:])):
        raise NegativeArgument("grid must be sorted and nonnegative")
    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            rows = list(pool.map(lambda t: evaluate_tlps(model, t), thetas))
    else:
        rows = [evaluate_tlps(model, t) for t in thetas]
    best = int(np.argmin([r.t_mean for r in rows]))
    return SweepReport(
        rows=tuple(rows),
        best_theta=rows[best].theta,
        best_t=rows[best].t_mean,
        ps_baseline=model.ps_baseline,
    )


def default_theta_grid(model: TlpsModel, points: int = GRID_POINTS) -> np.ndarray:
    """Log-spaced thresholds over GRID_SPAN mean job sizes."""
    m = mean(model.jobsize)
    return np.geomspace(GRID_SPAN[0] * m, GRID_SPAN[1] * m, points)


def optimize_theta(model: TlpsModel, bracket: tuple[float, float]) -> tuple[float, float]:
    """Locate a low-sojourn threshold inside a bracket.

    A 64-point log-spaced scan seeds golden-section refinement around the
    best scanned point, down to relative width 1e-6.  Returns the incumbent
    minimum over every evaluation; no global-optimality claim is made.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if lo < 0 or hi < lo:
        raise NegativeArgument("need 0 <= lo <= hi")
    if hi == lo:
        return lo, evaluate_tlps(model, lo).t_mean

    start = lo if lo > 0 else hi * 1e-8
    pts = np.geomspace(start, hi, GRID_POINTS)
    if lo == 0.0:
        pts[0] = 0.0
    vals = [evaluate_tlps(model, t).t_mean for t in pts]
    i = int(np.argmin(vals))
    best_theta, best_t = float(pts[i]), vals[i]

    a = float(pts[max(i - 1, 0)])
    b = float(pts[min(i + 1, len(pts) - 1)])
    tol = 1e-6 * max(b, mean(model.jobsize))
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc = evaluate_tlps(model, c).t_mean
    fd = evaluate_tlps(model, d).t_mean
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = evaluate_tlps(model, c).t_mean
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = evaluate_tlps(model, d).t_mean
        for t, f in ((c, fc), (d, fd)):
            if f < best_t:
                best_theta, best_t = t, f
    return best_theta, best_t


def bin_conditional_sojourn_tlps(ev: TlpsEvaluation, lo: float, hi: float) -> float:
    """Exact E[sojourn | lo < size <= hi] at this threshold; hi may be inf.

    Splits the bin at theta: the linear branch integrates sizes against the
    job law; the low-queue branch reuses the batch-PS bin oracle under the
    excess law (the shifted integrand is exactly that law's expectation).
    """
    if lo < 0 or hi <= lo:
        raise NegativeArgument("need 0 <= lo < hi")
    p, mu = ev.model.jobsize.as_arrays()

    def seg_prob(a, b_):
        hi_part = 0.0 if np.isinf(b_) else _exp_neg(mu * b_)
        return float(p @ (_exp_neg(mu * a) - hi_part))

    def seg_mean(a, b_):
        # integral of x dF over (a, b_]
        def anti(edge):
            if np.isinf(edge):
                return np.zeros_like(mu)
            return (edge + 1.0 / mu) * _exp_neg(mu * edge)

        return float(p @ (anti(a) - anti(b_)))

    scale = 1.0 - ev.rho_theta
    total_prob = seg_prob(lo, hi)
    if total_prob <= 0.0:
        raise NonPositiveParameter(f"bin ({lo}, {hi}] has zero probability")

    acc = 0.0
    lo_lin, hi_lin = lo, min(hi, ev.theta)
    if hi_lin > lo_lin:
        acc += seg_mean(lo_lin, hi_lin) / scale
    lo_ex, hi_ex = max(lo, ev.theta), hi
    if hi_ex > lo_ex:
        pr = seg_prob(lo_ex, hi_ex)
        if pr > 0.0:
            if ev.bps is not None:
                curve = bps.bin_conditional_sojourn(ev.bps, lo_ex - ev.theta, hi_ex - ev.theta)
            else:
                y_mean = seg_mean(lo_ex, hi_ex) / pr - ev.theta
                curve = y_mean * scale / (1.0 - ev.model.rho)
            acc += pr * (ev.w_bar + ev.theta + curve) / scale
    return acc / total_prob
