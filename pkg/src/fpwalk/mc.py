"""Seeded Monte Carlo oracle for first-passage laws and sup events.

Streams are counter-based: every (master seed, cell) pair keys its own Philox
generator, so distinct cells never overlap and results are reproducible bit
for bit regardless of how work is scheduled.  Uncertainty is quantified by
batch means: paths are split into at least 30 batches and the standard error
is the batch standard deviation over sqrt(batches), which stays honest for
heavy-tailed bin occupancies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import zeta

from .steps import BoundedLazy, LeftPareto, ParetoLattice, StepLaw, TableLaw

__all__ = [
    "McEstimate",
    "McFirstPassage",
    "LawSampler",
    "sample_first_passage",
    "sample_sup_event",
    "export_histogram_csv",
]

_CORE_HALF = 2**14  # alias/searchsorted table covers |k| <= this


@dataclass
class McEstimate:
    estimate: float
    stderr: float
    paths: int
    seed: int
    batches: int


@dataclass
class McFirstPassage:
    barrier_x: int
    horizon: int
    est: np.ndarray      # est[n-1] ~ P(T_x = n)
    se: np.ndarray
    surv: McEstimate     # P(T_x > horizon)
    paths: int
    seed: int
    batches: int

    def bin(self, n: int) -> McEstimate:
        return McEstimate(float(self.est[n - 1]), float(self.se[n - 1]),
                          self.paths, self.seed, self.batches)


class LawSampler:
    """Inverse-transform sampler: core table plus analytic tail inversion."""

    def __init__(self, law: StepLaw, core_half: int = _CORE_HALF):
        self.law = law
        if isinstance(law, (BoundedLazy, TableLaw)):
            if isinstance(law, BoundedLazy):
                support = np.array([-1, 0, 1])
                probs = np.array([law.p, 1 - 2 * law.p, law.p])
            else:
                support = np.array(law.support)
                probs = np.array(law.probs)
            self.kind = "table"
            self.support = support
            self.cdf = np.cumsum(probs)
            return
        self.kind = "heavy"
        ks = np.arange(-core_half, core_half + 1)
        pm = law.pmf_array(ks)
        self.core_half = core_half
        self.support = ks
        self.cdf = np.cumsum(pm)
        self.low_rem = law.tail_below(-core_half - 1)   # P(X < -core)
        self.high_rem = law.tail_above(core_half)       # P(X > core)
        self.a1 = law.alpha + 1.0

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        u = rng.random(size)
        if self.kind == "table":
            idx = np.searchsorted(self.cdf, u, side="right")
            idx = np.minimum(idx, len(self.support) - 1)
            return self.support[idx].astype(np.int64)
        out = np.empty(size, dtype=np.int64)
        low = u < self.low_rem
        high = u > 1.0 - self.high_rem
        mid = ~(low | high)
        cdf0 = self.low_rem
        idx = np.searchsorted(cdf0 + self.cdf, u[mid], side="right")
        idx = np.minimum(idx, len(self.support) - 1)
        out[mid] = self.support[idx]
        if np.any(low):
            # P(X <= -k) = w zeta(a1, k); invert u = that
            w = self.law.tail_below(-1) / zeta(self.a1, 1.0)
            out[low] = -self._invert_zeta_tail(u[low] / w)
        if np.any(high):
            w = self.law.tail_above(0) / zeta(self.a1, 1.0)
            out[high] = self._invert_zeta_tail((1.0 - u[high]) / w)
        return out

    def _invert_zeta_tail(self, targets: np.ndarray) -> np.ndarray:
        """Smallest integer k with zeta(a1, k) <= target (discrete inversion)."""
        a = self.a1 - 1.0
        k = np.maximum((targets * a) ** (-1.0 / a), 1.0)
        for _ in range(40):
            f = zeta(self.a1, k) - targets
            fp = -self.a1 * zeta(self.a1 + 1.0, k)
            k_new = np.maximum(k - f / fp, 0.5 * k)
            if np.max(np.abs(k_new - k) / k) < 1e-12:
                k = k_new
                break
            k = k_new
        k = np.floor(k)
        # local exact adjustment: want smallest integer with zeta <= target
        for _ in range(4):
            too_big = zeta(self.a1, k) > targets
            k = k + too_big
            too_small = (k > 1) & (zeta(self.a1, np.maximum(k - 1, 1)) <= targets)
            k = k - too_small
        return k.astype(np.int64)


def _rng_for(seed: int, cell: int) -> np.random.Generator:
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, cell & 0xFFFFFFFFFFFFFFFF],
                   dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def sample_first_passage(law: StepLaw, x: int, N: int, paths: int,
                         seed: int, *, batches: int = 32,
                         cell: int = 0) -> McFirstPassage:
    """Histogram of T_x over 1..N from simulated paths, with batch-mean errors."""
    if paths < 10**4:
        raise ValueError("use at least 1e4 paths")
    if batches < 30:
        raise ValueError("at least 30 batches for honest errors")
    sampler = LawSampler(law)
    rng = _rng_for(seed, cell)
    per = paths // batches
    counts = np.zeros((batches, N + 1))  # last column: survived
    chunk_rows = max(1, min(per, 2**22 // max(N, 1)))
    for b in range(batches):
        done = 0
        while done < per:
            rows = min(chunk_rows, per - done)
            steps = sampler.sample(rng, rows * N).reshape(rows, N)
            pos = np.cumsum(steps, axis=1)
            crossed = pos > x
            any_cross = crossed.any(axis=1)
            first = np.where(any_cross, crossed.argmax(axis=1), N)
            counts[b] += np.bincount(first, minlength=N + 1)
            done += rows
    freq = counts / per
    est = freq.mean(axis=0)
    se = freq.std(axis=0, ddof=1) / np.sqrt(batches)
    surv = McEstimate(float(est[N]), float(se[N]), per * batches, seed, batches)
    return McFirstPassage(barrier_x=x, horizon=N, est=est[:N], se=se[:N],
                          surv=surv, paths=per * batches, seed=seed,
                          batches=batches)


def sample_sup_event(law: StepLaw, x: int, n: int, paths: int, seed: int, *,
                     batches: int = 32, cell: int = 1) -> McEstimate:
    """Estimate of P(max_{r<=n} S_r <= x) by direct simulation."""
    if batches < 30:
        raise ValueError("at least 30 batches for honest errors")
    sampler = LawSampler(law)
    rng = _rng_for(seed, cell)
    per = paths // batches
    freqs = np.empty(batches)
    chunk_rows = max(1, min(per, 2**22 // max(n, 1)))
    for b in range(batches):
        done = 0
        hits = 0
        while done < per:
            rows = min(chunk_rows, per - done)
            steps = sampler.sample(rng, rows * n).reshape(rows, n)
            pos = np.cumsum(steps, axis=1)
            hits += int(np.sum(pos.max(axis=1) <= x))
            done += rows
        freqs[b] = hits / per
    est = float(freqs.mean())
    se = float(freqs.std(ddof=1) / np.sqrt(batches))
    return McEstimate(est, se, per * batches, seed, batches)


def export_histogram_csv(hist: McFirstPassage, path):
    import csv
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "estimate", "stderr"])
        for n in range(1, hist.horizon + 1):
            w.writerow([n, repr(float(hist.est[n - 1])), repr(float(hist.se[n - 1]))])
