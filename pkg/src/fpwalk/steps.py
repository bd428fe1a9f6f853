"""Integer-lattice step-law families attracted to stable laws.

Three concrete families are shipped:

``BoundedLazy(p)``
    Steps -1, 0, +1 with ``P(+1) = P(-1) = p``.  Mean zero, variance ``2p``,
    attracted to the normal law (index 2, positivity 1/2).  ``p = 1/2`` is the
    simple walk, which is periodic and therefore excluded from local-limit
    diagnostics but kept available because its passage probabilities have
    closed combinatorial forms.

``ParetoLattice(alpha, ...)``
    Two-sided power tails ``pmf(k) = w_pm |k|^(-alpha-1) / Z`` for ``|k| >= 1``
    plus an adjustable atom at 0.  The right tail is regularly varying with
    index ``-alpha``, and the single-site mass is regularly varying with index
    ``-alpha - 1``, so the local tail condition holds for every fixed span.
    Skewed weights are allowed only for ``alpha < 1`` (no centering sequences
    in scope).

``LeftPareto(alpha, scale)``
    Heavy left tail of index ``alpha`` in (1, 2), bounded right side
    ``{0, +1}``, centered exactly.  Its limit has no positive jumps
    (``alpha * rho = 1``), the spectrally negative test case.

Tails are evaluated in closed form through the Hurwitz zeta function, so the
exactness contracts (total mass to 1e-14, tails to 1e-13) hold with large
margin; tests check them against direct series summation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import zeta

from .errors import NonConvergence

__all__ = [
    "StepLaw",
    "BoundedLazy",
    "ParetoLattice",
    "LeftPareto",
    "TableLaw",
    "NormingSequence",
    "bounded_lazy",
    "pareto_lattice",
    "left_pareto",
    "table_law",
    "simple_walk",
    "pmf_at",
    "tail",
    "local_mass",
    "norming",
]


def _support_gcd(offsets):
    """gcd of support differences relative to the smallest support point."""
    base = offsets[0]
    g = 0
    for k in offsets[1:]:
        g = math.gcd(g, k - base)
    return g


class StepLaw:
    """Common interface of all step-law families.

    Subclasses are frozen dataclasses; instances are immutable, hashable and
    safe to share across threads.  All probabilities are exact up to double
    rounding: bounded families by table lookup, power-tail families through
    the Hurwitz zeta function.
    """

    family: str
    alpha: float
    rho_nominal: float
    mean: float
    sigma2: float
    support_kind: str

    # -- single-point mass ------------------------------------------------

    def pmf_at(self, k: int) -> float:
        raise NotImplementedError

    def pmf_window(self, lo: int, hi: int) -> np.ndarray:
        """Vector of pmf values on the inclusive integer range [lo, hi]."""
        ks = np.arange(lo, hi + 1)
        return self.pmf_array(ks)

    def pmf_array(self, ks: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    # -- tails ------------------------------------------------------------

    def tail(self, x: int) -> float:
        """P(X > x) for x >= 0."""
        if x < 0:
            raise ValueError("tail is defined for x >= 0")
        return self.tail_above(x)

    def tail_above(self, y: int) -> float:
        """P(X > y) for any integer y."""
        raise NotImplementedError

    def tail_below(self, m: int) -> float:
        """P(X <= m) for any integer m."""
        raise NotImplementedError

    def tail_above_array(self, ys: np.ndarray) -> np.ndarray:
        return np.array([self.tail_above(int(y)) for y in np.asarray(ys).ravel()])

    def tail_below_array(self, ms: np.ndarray) -> np.ndarray:
        return np.array([self.tail_below(int(m)) for m in np.asarray(ms).ravel()])

    def local_mass(self, x: int, delta: int = 1) -> float:
        """P(X in [x, x + delta)) for delta >= 1."""
        if delta < 1:
            raise ValueError("delta must be >= 1")
        return self.tail_above(x - 1) - self.tail_above(x + delta - 1)

    # -- structure --------------------------------------------------------

    @property
    def is_aperiodic(self) -> bool:
        raise NotImplementedError

    @property
    def max_up(self):
        """Largest positive support point, or None for an unbounded right side."""
        return None

    @property
    def bounded_support(self) -> bool:
        return self.support_kind == "finite"

    def norming(self) -> "NormingSequence":
        raise NotImplementedError

    def describe(self) -> str:
        return f"{self.family}({self.params_string()})"

    def params_string(self) -> str:
        return ""


@dataclass(frozen=True)
class BoundedLazy(StepLaw):
    p: float
    family: str = "lazy"
    support_kind: str = "finite"

    def __post_init__(self):
        if not 0.0 < self.p <= 0.5:
            raise ValueError("BoundedLazy requires p in (0, 1/2]")

    @property
    def alpha(self) -> float:
        return 2.0

    @property
    def rho_nominal(self) -> float:
        return 0.5

    @property
    def mean(self) -> float:
        return 0.0

    @property
    def sigma2(self) -> float:
        return 2.0 * self.p

    def pmf_at(self, k: int) -> float:
        if k == 0:
            return 1.0 - 2.0 * self.p
        if k == 1 or k == -1:
            return self.p
        return 0.0

    def pmf_array(self, ks):
        ks = np.asarray(ks)
        out = np.zeros(ks.shape)
        out[ks == 0] = 1.0 - 2.0 * self.p
        out[np.abs(ks) == 1] = self.p
        return out

    def tail_above(self, y: int) -> float:
        if y >= 1:
            return 0.0
        if y == 0:
            return self.p
        if y == -1:
            return 1.0 - self.p
        return 1.0

    def tail_below(self, m: int) -> float:
        if m <= -2:
            return 0.0
        if m == -1:
            return self.p
        if m == 0:
            return 1.0 - self.p
        return 1.0

    @property
    def is_aperiodic(self) -> bool:
        return self.p < 0.5

    @property
    def max_up(self):
        return 1

    def norming(self) -> "NormingSequence":
        return NormingSequence(law=self, mode="variance")

    def params_string(self) -> str:
        return f"p={self.p:g}"


@dataclass(frozen=True)
class ParetoLattice(StepLaw):
    """Two-sided lattice Pareto with tail index alpha and an atom at 0."""

    alpha: float
    atom0: float = 0.2
    w_plus: float = 1.0
    w_minus: float = 1.0
    family: str = "pareto"
    support_kind: str = "two-sided-infinite"

    def __post_init__(self):
        if not 0.0 < self.alpha < 2.0:
            raise ValueError("ParetoLattice requires alpha in (0, 2)")
        if not 0.0 <= self.atom0 < 1.0:
            raise ValueError("atom0 must lie in [0, 1)")
        if self.w_plus <= 0 or self.w_minus <= 0:
            raise ValueError("tail weights must be positive")
        if self.alpha >= 1.0 and self.w_plus != self.w_minus:
            # centering sequences are out of scope, so only the symmetric
            # construction has mean zero when a mean exists
            raise ValueError("skewed tails require alpha < 1")

    @property
    def norm_z(self) -> float:
        return (self.w_plus + self.w_minus) * zeta(self.alpha + 1.0, 1.0) / (1.0 - self.atom0)

    @property
    def rho_nominal(self) -> float:
        if self.w_plus == self.w_minus:
            return 0.5
        beta = (self.w_plus - self.w_minus) / (self.w_plus + self.w_minus)
        a = self.alpha
        return 0.5 + math.atan(beta * math.tan(math.pi * a / 2.0)) / (math.pi * a)

    @property
    def mean(self) -> float:
        if self.alpha > 1.0:
            return 0.0  # symmetric by construction
        return math.nan

    @property
    def sigma2(self) -> float:
        return math.inf

    def pmf_at(self, k: int) -> float:
        if k == 0:
            return self.atom0
        w = self.w_plus if k > 0 else self.w_minus
        return w * abs(k) ** (-self.alpha - 1.0) / self.norm_z

    def pmf_array(self, ks):
        ks = np.asarray(ks, dtype=float)
        out = np.empty(ks.shape)
        z = self.norm_z
        pos = ks > 0
        neg = ks < 0
        out[pos] = self.w_plus * ks[pos] ** (-self.alpha - 1.0) / z
        out[neg] = self.w_minus * (-ks[neg]) ** (-self.alpha - 1.0) / z
        out[ks == 0] = self.atom0
        return out

    def tail_above(self, y: int) -> float:
        # P(X > y) = sum_{k > y} pmf(k), closed form via Hurwitz zeta
        if y >= 0:
            return self.w_plus * zeta(self.alpha + 1.0, y + 1.0) / self.norm_z
        if y == -1:
            return 1.0 - self.tail_below(-1)
        return 1.0 - self.tail_below(y)

    def tail_below(self, m: int) -> float:
        # P(X <= m)
        if m <= -1:
            return self.w_minus * zeta(self.alpha + 1.0, float(-m)) / self.norm_z
        return 1.0 - self.tail_above(m)

    def tail_above_array(self, ys):
        ys = np.asarray(ys, dtype=float)
        out = np.empty(ys.shape)
        nonneg = ys >= 0
        out[nonneg] = self.w_plus * zeta(self.alpha + 1.0, ys[nonneg] + 1.0) / self.norm_z
        if np.any(~nonneg):
            out[~nonneg] = 1.0 - self.tail_below_array(ys[~nonneg])
        return out

    def tail_below_array(self, ms):
        ms = np.asarray(ms, dtype=float)
        out = np.empty(ms.shape)
        neg = ms <= -1
        out[neg] = self.w_minus * zeta(self.alpha + 1.0, -ms[neg]) / self.norm_z
        if np.any(~neg):
            out[~neg] = 1.0 - self.tail_above_array(ms[~neg])
        return out

    def tail_continuous(self, x: float) -> float:
        """Monotone continuous interpolation of the right tail, exact at integers."""
        return self.w_plus * zeta(self.alpha + 1.0, x + 1.0) / self.norm_z

    def left_tail_continuous(self, x: float) -> float:
        """Continuous interpolation of P(X < -x), exact at integers."""
        return self.w_minus * zeta(self.alpha + 1.0, x + 1.0) / self.norm_z

    @property
    def is_aperiodic(self) -> bool:
        return True

    def norming(self) -> "NormingSequence":
        return NormingSequence(law=self, mode="tail-inversion")

    def params_string(self) -> str:
        s = f"alpha={self.alpha:g},atom0={self.atom0:g}"
        if self.w_plus != self.w_minus:
            s += f",w+={self.w_plus:g},w-={self.w_minus:g}"
        return s


@dataclass(frozen=True)
class LeftPareto(StepLaw):
    """Heavy left Pareto tail, bounded right side, exactly centered.

    pmf(-k) = scale * k^(-alpha-1) for k >= 1, pmf(+1) = scale * zeta(alpha)
    so the mean vanishes, and the remaining mass sits at 0.  The attracting
    stable law is spectrally negative with rho = 1/alpha.
    """

    alpha: float = 1.5
    scale: float = 0.25
    family: str = "leftpareto"
    support_kind: str = "left-infinite"

    def __post_init__(self):
        if not 1.0 < self.alpha < 2.0:
            raise ValueError("LeftPareto requires alpha in (1, 2)")
        cap = 1.0 / (zeta(self.alpha, 1.0) + zeta(self.alpha + 1.0, 1.0))
        if not 0.0 < self.scale < cap:
            raise ValueError(f"scale must lie in (0, {cap:.6f}) for a valid pmf")

    @property
    def rho_nominal(self) -> float:
        return 1.0 / self.alpha

    @property
    def mean(self) -> float:
        return 0.0

    @property
    def sigma2(self) -> float:
        return math.inf

    @property
    def _p_up(self) -> float:
        return self.scale * zeta(self.alpha, 1.0)

    @property
    def _p_zero(self) -> float:
        return 1.0 - self.scale * (zeta(self.alpha, 1.0) + zeta(self.alpha + 1.0, 1.0))

    def pmf_at(self, k: int) -> float:
        if k == 0:
            return self._p_zero
        if k == 1:
            return self._p_up
        if k < 0:
            return self.scale * (-k) ** (-self.alpha - 1.0)
        return 0.0

    def pmf_array(self, ks):
        ks = np.asarray(ks, dtype=float)
        out = np.zeros(ks.shape)
        neg = ks < 0
        out[neg] = self.scale * (-ks[neg]) ** (-self.alpha - 1.0)
        out[ks == 0] = self._p_zero
        out[ks == 1] = self._p_up
        return out

    def tail_above(self, y: int) -> float:
        if y >= 1:
            return 0.0
        if y == 0:
            return self._p_up
        return 1.0 - self.tail_below(y)

    def tail_below(self, m: int) -> float:
        if m <= -1:
            return self.scale * zeta(self.alpha + 1.0, float(-m))
        if m == 0:
            return 1.0 - self._p_up
        return 1.0

    def tail_below_array(self, ms):
        ms = np.asarray(ms, dtype=float)
        out = np.empty(ms.shape)
        neg = ms <= -1
        out[neg] = self.scale * zeta(self.alpha + 1.0, -ms[neg])
        out[ms == 0] = 1.0 - self._p_up
        out[ms >= 1] = 1.0
        return out

    def tail_above_array(self, ys):
        ys = np.asarray(ys, dtype=float)
        out = np.zeros(ys.shape)
        out[ys == 0] = self._p_up
        low = ys <= -1
        if np.any(low):
            out[low] = 1.0 - self.tail_below_array(ys[low])
        return out

    def left_tail_continuous(self, x: float) -> float:
        """Continuous interpolation of P(X < -x), exact at integers."""
        return self.scale * zeta(self.alpha + 1.0, x + 1.0)

    @property
    def is_aperiodic(self) -> bool:
        return True

    @property
    def max_up(self):
        return 1

    def norming(self) -> "NormingSequence":
        return NormingSequence(law=self, mode="left-tail-inversion")

    def params_string(self) -> str:
        return f"alpha={self.alpha:g},scale={self.scale:g}"


@dataclass(frozen=True)
class TableLaw(StepLaw):
    """Finite-support law given by an explicit table; used by oracle tests."""

    support: tuple
    probs: tuple
    family: str = "table"
    support_kind: str = "finite"

    def __post_init__(self):
        if len(self.support) != len(self.probs):
            raise ValueError("support and probs must have equal length")
        if abs(sum(self.probs) - 1.0) > 1e-12:
            raise ValueError("probabilities must sum to 1")
        if any(p < 0 for p in self.probs):
            raise ValueError("probabilities must be nonnegative")
        if list(self.support) != sorted(set(self.support)):
            raise ValueError("support must be sorted and duplicate-free")

    @property
    def alpha(self) -> float:
        return 2.0

    @property
    def rho_nominal(self) -> float:
        return 0.5

    @property
    def mean(self) -> float:
        return float(sum(k * p for k, p in zip(self.support, self.probs)))

    @property
    def sigma2(self) -> float:
        m = self.mean
        return float(sum((k - m) ** 2 * p for k, p in zip(self.support, self.probs)))

    def pmf_at(self, k: int) -> float:
        try:
            return self.probs[self.support.index(k)]
        except ValueError:
            return 0.0

    def pmf_array(self, ks):
        ks = np.asarray(ks)
        out = np.zeros(ks.shape)
        for k, p in zip(self.support, self.probs):
            out[ks == k] = p
        return out

    def tail_above(self, y: int) -> float:
        return float(sum(p for k, p in zip(self.support, self.probs) if k > y))

    def tail_below(self, m: int) -> float:
        return float(sum(p for k, p in zip(self.support, self.probs) if k <= m))

    @property
    def is_aperiodic(self) -> bool:
        pts = [k for k, p in zip(self.support, self.probs) if p > 0]
        return len(pts) > 1 and _support_gcd(pts) == 1

    @property
    def max_up(self):
        ups = [k for k, p in zip(self.support, self.probs) if p > 0 and k > 0]
        return max(ups) if ups else None

    def norming(self) -> "NormingSequence":
        if self.mean != 0.0:
            raise ValueError("norming requires a centered law")
        return NormingSequence(law=self, mode="variance")

    def params_string(self) -> str:
        return ",".join(f"{k}:{p:g}" for k, p in zip(self.support, self.probs))


@dataclass(frozen=True)
class NormingSequence:
    """Scale sequence c_n of the functional limit, with continuous interpolation.

    variance mode:            c(t) = sqrt(sigma2 * t)
    tail-inversion mode:      t * P(X > c(t)) = 1, right tail interpolated
                              through the Hurwitz zeta closed form
    left-tail-inversion mode: t * P(X < -c(t)) = 1, for the spectrally
                              negative family where the right tail degenerates
    """

    law: StepLaw
    mode: str

    def __call__(self, t: float) -> float:
        if t < 1:
            raise ValueError("norming is defined for t >= 1")
        if self.mode == "variance":
            return math.sqrt(self.law.sigma2 * t)
        return float(self.array(np.array([t]))[0])

    def array(self, ts) -> np.ndarray:
        """Vectorized evaluation of c(t)."""
        ts = np.asarray(ts, dtype=float)
        if self.mode == "variance":
            return np.sqrt(self.law.sigma2 * ts)
        if self.mode == "tail-inversion":
            law = self.law
            a, w = law.alpha, law.w_plus / law.norm_z
        elif self.mode == "left-tail-inversion":
            law = self.law
            a, w = law.alpha, law.scale
        else:
            raise ValueError(f"unknown norming mode {self.mode!r}")
        return _invert_zeta_tail(a, w, ts)


def _invert_zeta_tail(a: float, w: float, ts: np.ndarray) -> np.ndarray:
    """Solve t * w * zeta(a+1, c+1) = 1 for c, vectorized Newton iteration.

    zeta(a+1, c+1) ~ c^-a / a gives the starting point; the derivative
    d/dc zeta(s, c+1) = -s zeta(s+1, c+1) is exact, so Newton converges
    quadratically.  The equation has no solution c >= 1 once 1/t exceeds the
    tail at 1; below that threshold t_ref the sequence continues as the pure
    power c(t) = (t / t_ref)^(1/a), which keeps c strictly increasing and
    positive down to t = 1.
    """
    ts = np.asarray(ts, dtype=float)
    t_ref = 1.0 / (w * zeta(a + 1.0, 2.0))  # c(t_ref) = 1
    small = ts < t_ref
    c = np.empty(ts.shape)
    c[small] = (ts[small] / t_ref) ** (1.0 / a)
    if np.any(~small):
        tt = ts[~small]
        target = 1.0 / tt
        x = np.maximum((w / (a * target)) ** (1.0 / a), 1.0)
        for _ in range(60):
            f = w * zeta(a + 1.0, x + 1.0) - target
            fp = -w * (a + 1.0) * zeta(a + 2.0, x + 1.0)
            x_new = x - f / fp
            bad = ~np.isfinite(x_new) | (x_new <= 0)
            if np.any(bad):
                x_new[bad] = 0.5 * x[bad]
            if np.max(np.abs(x_new - x) / np.maximum(x, 1e-300)) < 1e-13:
                x = x_new
                break
            x = x_new
        else:
            raise NonConvergence("tail inversion for the norming sequence did not converge")
        resid = tt * w * zeta(a + 1.0, x + 1.0) - 1.0
        if np.max(np.abs(resid)) > 1e-9:
            raise NonConvergence("tail inversion residual exceeds 1e-9")
        c[~small] = x
    return c


# -- constructors ---------------------------------------------------------

def bounded_lazy(p: float) -> BoundedLazy:
    return BoundedLazy(p=p)


def simple_walk() -> BoundedLazy:
    """The simple symmetric walk (periodic; useful for exact enumeration)."""
    return BoundedLazy(p=0.5)


def pareto_lattice(alpha: float, atom0: float = 0.2,
                   w_plus: float = 1.0, w_minus: float = 1.0) -> ParetoLattice:
    return ParetoLattice(alpha=alpha, atom0=atom0, w_plus=w_plus, w_minus=w_minus)


def left_pareto(alpha: float = 1.5, scale: float = 0.25) -> LeftPareto:
    return LeftPareto(alpha=alpha, scale=scale)


def table_law(support, probs) -> TableLaw:
    return TableLaw(support=tuple(support), probs=tuple(probs))


# -- free-function operation surface ---------------------------------------

def pmf_at(law: StepLaw, k: int) -> float:
    """Exact step mass P(X = k)."""
    return law.pmf_at(k)


def tail(law: StepLaw, x: int) -> float:
    """Exact right tail P(X > x) for x >= 0."""
    return law.tail(x)


def local_mass(law: StepLaw, x: int, delta: int = 1) -> float:
    """Exact windowed mass P(X in [x, x + delta))."""
    return law.local_mass(x, delta)


@lru_cache(maxsize=65536)
def _norming_cached(law: StepLaw, n: int) -> float:
    return law.norming()(float(n))


def norming(law: StepLaw, n: int) -> float:
    """The norming value c_n for integer n >= 1."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return _norming_cached(law, int(n))
