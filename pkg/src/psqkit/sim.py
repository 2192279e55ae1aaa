"""Discrete-event simulation oracle for the batch-PS and two-level PS queues.

The engine advances processor sharing exactly, with no time slicing: while n
jobs share the server each receives rate 1/n, so a virtual service clock
that grows at 1/n turns every completion into a heap lookup (a job arriving
at virtual time v with size x departs at virtual time v + x).  Between
events remaining work is linear in time, making event times closed-form and
the oracle free of discretization bias.

Replication r draws from an independent counter-based Philox stream keyed
seed XOR r, so results are reproducible across platforms and replication
order, and replications can run concurrently.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .distributions import HyperExp, mean
from .errors import InvalidBins, NonPositiveParameter, UnstableConfig

_CHUNK = 8192


@dataclass(frozen=True)
class BatchLaw:
    """Probability mass function of the batch size K >= 1.

    b_extra is the size-biased companion count (E[K^2] - E[K]) / E[K]: the
    expected number of jobs arriving with (and in addition to) a tagged job
    picked uniformly among jobs.
    """

    sizes: tuple[int, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        if not self.sizes or len(self.sizes) != len(self.probs):
            raise NonPositiveParameter("batch pmf must be nonempty, sizes matching probs")
        if any(int(k) != k or k < 1 for k in self.sizes):
            raise NonPositiveParameter("batch sizes must be integers >= 1")
        if any(p <= 0 for p in self.probs):
            raise NonPositiveParameter("batch probabilities must be > 0")
        if abs(sum(self.probs) - 1.0) > 1e-9:
            raise NonPositiveParameter(f"batch probabilities sum to {sum(self.probs)!r}")

    @property
    def mean_n(self) -> float:
        return float(sum(k * p for k, p in zip(self.sizes, self.probs)))

    @property
    def b_extra(self) -> float:
        ek = self.mean_n
        ek2 = sum(k * k * p for k, p in zip(self.sizes, self.probs))
        return float((ek2 - ek) / ek)

    @classmethod
    def deterministic(cls, k: int) -> "BatchLaw":
        return cls(sizes=(int(k),), probs=(1.0,))

    @classmethod
    def geometric(cls, mean_size: float, tail_mass: float = 1e-12) -> "BatchLaw":
        """Geometric on {1, 2, ...} with the given mean, truncated at tail_mass."""
        if mean_size < 1.0:
            raise NonPositiveParameter("geometric batch mean must be >= 1")
        if mean_size == 1.0:
            return cls.deterministic(1)
        p = 1.0 / mean_size
        kmax = 1
        while (1.0 - p) ** kmax > tail_mass:
            kmax += 1
        ks = np.arange(1, kmax + 1)
        pmf = p * (1.0 - p) ** (ks - 1)
        pmf /= pmf.sum()
        return cls(sizes=tuple(int(k) for k in ks), probs=tuple(float(q) for q in pmf))


def batch_law_stats(law: BatchLaw) -> tuple[float, float]:
    """(mean batch size, size-biased companion count) of a batch law."""
    return law.mean_n, law.b_extra


@dataclass(frozen=True)
class SimConfig:
    """One simulation scenario plus run-length and replication settings.

    kind "bps" needs a batch law; kind "tlps" needs a threshold.  horizon
    counts completed jobs per replication, the first warmup of which are
    discarded.  size_bins are interior edges for conditional-sojourn bins;
    underflow and overflow bins are added automatically so counts total.
    """

    kind: str
    lam: float
    service: HyperExp
    horizon: int
    warmup: int
    replications: int
    seed: int
    batch: BatchLaw | None = None
    theta: float | None = None
    size_bins: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("bps", "tlps"):
            raise NonPositiveParameter(f"kind must be 'bps' or 'tlps', got {self.kind!r}")
        if self.kind == "bps" and self.batch is None:
            raise NonPositiveParameter("bps simulation needs a batch law")
        if self.kind == "tlps" and (self.theta is None or self.theta < 0):
            raise NonPositiveParameter("tlps simulation needs theta >= 0")
        if not (self.lam > 0):
            raise NonPositiveParameter("lam must be > 0")
        if not (self.horizon > self.warmup >= 0):
            raise NonPositiveParameter("need horizon > warmup >= 0")
        if self.replications < 1:
            raise NonPositiveParameter("need at least one replication")
        if self.size_bins is not None:
            edges = list(self.size_bins)
            if not edges or any(e <= 0 for e in edges) or any(
                a >= b for a, b in zip(edges, edges[1:])
            ):
                raise InvalidBins("size bins must be positive and strictly increasing")


@dataclass(frozen=True)
class BinStat:
    lo: float
    hi: float
    count: int
    mean: float
    stderr: float


@dataclass(frozen=True)
class SimResult:
    mean_sojourn: float
    stderr: float
    bins: tuple[BinStat, ...]
    replications: int
    seed: int


class _Draws:
    """Chunked consumption of one vectorized RNG recipe (keeps draws fast
    while preserving a deterministic draw order per replication)."""

    def __init__(self, rng, fn):
        self._rng = rng
        self._fn = fn
        self._buf = fn(rng, _CHUNK)
        self._i = 0

    def take(self) -> float:
        if self._i >= len(self._buf):
            self._buf = self._fn(self._rng, _CHUNK)
            self._i = 0
        v = self._buf[self._i]
        self._i += 1
        return v


def _size_sampler(d: HyperExp):
    p, mu = d.as_arrays()
    cum = np.cumsum(p)
    cum[-1] = 1.0

    def draw(rng, n):
        idx = np.searchsorted(cum, rng.random(n), side="right")
        return rng.exponential(1.0, n) / mu[idx]

    return draw


def _batch_sampler(law: BatchLaw):
    cum = np.cumsum(law.probs)
    cum[-1] = 1.0
    sizes = np.array(law.sizes)

    def draw(rng, n):
        return sizes[np.searchsorted(cum, rng.random(n), side="right")]

    return draw


def _rep_rng(seed: int, rep: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed ^ rep))


def _run_bps(cfg: SimConfig, rep: int):
    """One replication; returns (sizes, sojourns) of the kept completions."""
    rng = _rep_rng(cfg.seed, rep)
    arrivals = _Draws(rng, lambda r, n: r.exponential(1.0 / cfg.lam, n))
    jobs = _Draws(rng, _size_sampler(cfg.service))
    batches = _Draws(rng, _batch_sampler(cfg.batch))

    kept = cfg.horizon - cfg.warmup
    out_size = np.empty(kept)
    out_soj = np.empty(kept)
    heap: list[tuple[float, float, float]] = []
    s = 0.0  # virtual service clock
    t = 0.0
    next_arr = arrivals.take()
    completed = 0
    while completed < cfg.horizon:
        n = len(heap)
        if n:
            v_min = heap[0][0]
            assert v_min >= s, "virtual clock passed a pending departure"
            dt = (v_min - s) * n
            if t + dt <= next_arr:
                t += dt
                s = v_min
                _, arr, size = heapq.heappop(heap)
                if completed >= cfg.warmup:
                    out_size[completed - cfg.warmup] = size
                    out_soj[completed - cfg.warmup] = t - arr
                completed += 1
                continue
            s += (next_arr - t) / n  # server busy: work conservation
        t = next_arr
        for _ in range(int(batches.take())):
            x = jobs.take()
            heapq.heappush(heap, (s + x, t, x))
        next_arr = t + arrivals.take()
    return out_size, out_soj


def _run_tlps(cfg: SimConfig, rep: int):
    """One replication of the two-queue discipline."""
    rng = _rep_rng(cfg.seed, rep)
    arrivals = _Draws(rng, lambda r, n: r.exponential(1.0 / cfg.lam, n))
    jobs = _Draws(rng, _size_sampler(cfg.service))
    theta = float(cfg.theta)

    kept = cfg.horizon - cfg.warmup
    out_size = np.empty(kept)
    out_soj = np.empty(kept)
    high: list[tuple[float, float, float]] = []
    low: list[tuple[float, float, float]] = []
    s_h = 0.0
    s_l = 0.0
    t = 0.0
    next_arr = arrivals.take()
    completed = 0

    def record(size, soj, completed):
        if completed >= cfg.warmup:
            out_size[completed - cfg.warmup] = size
            out_soj[completed - cfg.warmup] = soj

    while completed < cfg.horizon:
        n_h, n_l = len(high), len(low)
        if n_h:
            # high queue owns the server: low progress is forbidden here
            dt = (high[0][0] - s_h) * n_h
            if t + dt <= next_arr:
                t += dt
                s_h = high[0][0]
                _, arr, size = heapq.heappop(high)
                if size > theta:
                    heapq.heappush(low, (s_l + (size - theta), arr, size))
                else:
                    record(size, t - arr, completed)
                    completed += 1
                continue
            s_h += (next_arr - t) / n_h
        elif n_l:
            dt = (low[0][0] - s_l) * n_l
            if t + dt <= next_arr:
                t += dt
                s_l = low[0][0]
                _, arr, size = heapq.heappop(low)
                record(size, t - arr, completed)
                completed += 1
                continue
            s_l += (next_arr - t) / n_l
        t = next_arr
        x = jobs.take()
        chunk = min(x, theta)
        assert chunk <= theta, "attained service in the high queue exceeds theta"
        if chunk > 0.0:
            heapq.heappush(high, (s_h + chunk, t, x))
        else:
            heapq.heappush(low, (s_l + x, t, x))
        next_arr = t + arrivals.take()
    return out_size, out_soj


def _bin_edges(cfg: SimConfig):
    if cfg.size_bins is None:
        return None
    inner = list(cfg.size_bins)
    return [0.0] + inner + [np.inf]


def _combine(cfg: SimConfig, per_rep) -> SimResult:
    rep_means = np.array([soj.mean() for _, soj in per_rep])
    r = len(per_rep)
    stderr = float(rep_means.std(ddof=1) / np.sqrt(r)) if r > 1 else 0.0

    bins: list[BinStat] = []
    edges = _bin_edges(cfg)
    if edges is not None:
        interior = np.array(edges[1:-1])
        rep_idx = [np.searchsorted(interior, size, side="left") for size, _ in per_rep]
        for i in range(len(edges) - 1):
            samples = []
            count = 0
            for (_, soj), idx in zip(per_rep, rep_idx):
                mask = idx == i
                count += int(mask.sum())
                if mask.any():
                    samples.append(soj[mask].mean())
            if samples:
                m = float(np.mean(samples))
                se = float(np.std(samples, ddof=1) / np.sqrt(len(samples))) if len(samples) > 1 else 0.0
            else:
                m, se = float("nan"), float("nan")
            bins.append(BinStat(lo=edges[i], hi=edges[i + 1], count=count, mean=m, stderr=se))

    return SimResult(
        mean_sojourn=float(rep_means.mean()),
        stderr=stderr,
        bins=tuple(bins),
        replications=r,
        seed=cfg.seed,
    )


def simulate_bps(cfg: SimConfig) -> SimResult:
    """Simulate the batch-arrival PS queue; deterministic per (seed, config)."""
    if cfg.kind != "bps":
        raise NonPositiveParameter("config kind must be 'bps'")
    rho = cfg.lam * cfg.batch.mean_n * mean(cfg.service)
    if rho >= 1.0:
        raise UnstableConfig(f"unstable: rho = {rho}")
    return _combine(cfg, [_run_bps(cfg, rep) for rep in range(cfg.replications)])


def simulate_tlps(cfg: SimConfig) -> SimResult:
    """Simulate the two-level PS discipline; deterministic per (seed, config)."""
    if cfg.kind != "tlps":
        raise NonPositiveParameter("config kind must be 'tlps'")
    rho = cfg.lam * mean(cfg.service)
    if rho >= 1.0:
        raise UnstableConfig(f"unstable: rho = {rho}")
    return _combine(cfg, [_run_tlps(cfg, rep) for rep in range(cfg.replications)])


def simresult_to_json(res: SimResult) -> dict:
    """JSON-serializable dump of a simulation result."""
    return {
        "mean_sojourn": res.mean_sojourn,
        "stderr": res.stderr,
        "replications": res.replications,
        "seed": res.seed,
        "bins": [
            {
                "bin_lo": b.lo,
                "bin_hi": None if np.isinf(b.hi) else b.hi,
                "count": b.count,
                "mean": b.mean,
                "stderr": b.stderr,
            }
            for b in res.bins
        ],
    }
