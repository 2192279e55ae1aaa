"""Closed-form solution of the squared-parameter Cauchy linear system.

The system is  sum_j x_j / (mu_q^2 - b_j^2) = 1  for q = 1..N, with the
mu and b families strictly interleaved, which keeps every denominator and
every pairwise gap nonzero.  The closed form expresses each x_k as a ratio
of products of spectral gaps; products are accumulated as sums of logs with
a separate sign counter so that N of a few dozen cannot overflow doubles.
A dense partial-pivoting solve and an elimination determinant are provided
as independent oracles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSpectrum, SingularMatrix

# below this minimum relative spectral gap the closed form is flagged as
# ill-conditioned (it is still returned; callers may consult the estimate)
ILL_CONDITIONED_GAP = 1e-3


@dataclass(frozen=True)
class CauchySystem:
    """Squared rates and squared roots, both strictly decreasing.

    Raises DegenerateSpectrum at construction if any pairwise gap
    (mu_q^2 - b_k^2, or b_q^2 - b_k^2 for q != k) underflows to zero.
    """

    mu_sq: tuple[float, ...]
    b_sq: tuple[float, ...]

    def __post_init__(self):
        m = np.array(self.mu_sq)
        b = np.array(self.b_sq)
        if len(m) != len(b) or len(m) == 0:
            raise DegenerateSpectrum("mu_sq and b_sq must be nonempty, same length")
        if np.any(np.diff(m) >= 0) or np.any(np.diff(b) >= 0):
            raise DegenerateSpectrum("mu_sq and b_sq must be strictly decreasing")
        if np.any(self._mu_gaps() == 0.0) or np.any(self._b_gaps() == 0.0):
            raise DegenerateSpectrum("a pairwise spectral gap underflowed to zero")

    def _mu_gaps(self) -> np.ndarray:
        m, b = np.array(self.mu_sq), np.array(self.b_sq)
        return m[:, None] - b[None, :]

    def _b_gaps(self) -> np.ndarray:
        b = np.array(self.b_sq)
        g = b[:, None] - b[None, :]
        return g[~np.eye(len(b), dtype=bool)]

    @classmethod
    def from_spectrum(cls, rates, roots) -> "CauchySystem":
        """Build from (unsquared) rates and secular roots."""
        return cls(
            mu_sq=tuple(float(m) ** 2 for m in rates),
            b_sq=tuple(float(r) ** 2 for r in roots),
        )

    @property
    def min_relative_gap(self) -> float:
        """Smallest pairwise gap relative to the magnitudes it separates."""
        m, b = np.array(self.mu_sq), np.array(self.b_sq)
        scale_mb = np.maximum(m[:, None], b[None, :])
        rel = np.abs(self._mu_gaps()) / scale_mb
        bb = np.maximum(b[:, None], b[None, :])[~np.eye(len(b), dtype=bool)]
        if len(b) > 1:
            rel_b = np.abs(self._b_gaps()) / bb
            return float(min(rel.min(), rel_b.min()))
        return float(rel.min())

    @property
    def condition_estimate(self) -> float:
        """Ratio of largest to smallest |b_q^2 - b_k^2| (1.0 for N = 1)."""
        if len(self.b_sq) == 1:
            return 1.0
        g = np.abs(self._b_gaps())
        return float(g.max() / g.min())

    @property
    def is_ill_conditioned(self) -> bool:
        return self.min_relative_gap < ILL_CONDITIONED_GAP


def _signed_log_rows(gaps: np.ndarray):
    """Per-column (sign product, log-abs sum) over rows of a gap matrix."""
    signs = np.prod(np.sign(gaps), axis=0)
    logs = np.sum(np.log(np.abs(gaps)), axis=0)
    return signs, logs


def solve_closed_form(sys: CauchySystem) -> np.ndarray:
    """x_k = prod_q(mu_q^2 - b_k^2) / prod_{q != k}(b_q^2 - b_k^2).

    All x_k are strictly positive under interleaving.
    """
    num_sign, num_log = _signed_log_rows(sys._mu_gaps())
    b = np.array(sys.b_sq)
    bg = b[:, None] - b[None, :]
    np.fill_diagonal(bg, 1.0)  # excluded q = k factor, neutral element
    den_sign, den_log = _signed_log_rows(bg)
    return num_sign * den_sign * np.exp(num_log - den_log)


def solve_direct(sys: CauchySystem) -> np.ndarray:
    """Dense partial-pivoting solve of the same system; oracle for the closed form."""
    d = 1.0 / sys._mu_gaps()
    try:
        return np.linalg.solve(d, np.ones(len(sys.mu_sq)))
    except np.linalg.LinAlgError as exc:
        raise SingularMatrix(str(exc)) from exc


def cauchy_determinant(sys: CauchySystem) -> float:
    """det of the coefficient matrix [1/(mu_q^2 - b_k^2)], in closed form.

    Equals prod_{j<k}(mu_j^2 - mu_k^2)(b_k^2 - b_j^2) / prod_{j,k}(mu_j^2 - b_k^2),
    strictly positive under interleaving.
    """
    m, b = np.array(sys.mu_sq), np.array(sys.b_sq)
    iu = np.triu_indices(len(m), k=1)
    mm = (m[:, None] - m[None, :])[iu]
    bb = (b[None, :] - b[:, None])[iu]  # b_k^2 - b_j^2 for j < k
    mb = sys._mu_gaps().ravel()
    pairs = np.concatenate([mm, bb])
    sign = np.prod(np.sign(pairs)) * np.prod(np.sign(mb))
    log = np.sum(np.log(np.abs(pairs))) - np.sum(np.log(np.abs(mb)))
    return float(sign * np.exp(log))
