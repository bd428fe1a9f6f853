"""Exact killed-convolution dynamics for lattice walks.

The engine evolves the sub-probability vector ``P(S_n = j, alive)`` one step
at a time by convolving with the step pmf.  "Alive" means the walk has not
yet left ``(-inf, x]`` (killed runs), or simply everything (unkilled runs).
Crossing mass is never materialized: the per-step passage increment is the
analytic right tail summed against the current vector, so unbounded-support
overshoot is exact.

Heavy-tailed laws shed mass polynomially far from the origin, and a plain
window would need astronomically many sites before dropped mass could no
longer jump back and bias the window values.  The engine therefore carries,
on each unbarriered side, a coarse far field: fixed-width mass blocks that
receive everything the fine core sheds, evolve under a block-resolution
version of the step law, and feed mass back into the core.  Block placement
is wrong by at most a block width at distances of at least a core width, so
the induced error on core values is a ~1e-3 relative correction of the
already tiny return flow.  Mass falling beyond the far extent accumulates in
``defect`` and is reported, never renormalized.

Everything is deterministic: reductions have fixed order and the FFT backend
is bit-stable across worker counts.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from .errors import WindowOverflow
from .steps import StepLaw

__all__ = [
    "KilledLawVector",
    "FirstPassageTable",
    "UnkilledLaw",
    "WindowSpec",
    "FarConfig",
    "MirrorLaw",
    "mirror",
    "suggest_window",
    "evolve",
    "first_passage_table",
    "killed_snapshot",
    "killed_sweep",
    "unkilled_law",
    "export_fp_csv",
    "export_killed_csv",
]

_FFT_WORKERS = 2
_DIRECT_COST_CAP = 2**20  # multiply-adds; direct convolution below, spectral above


# ---------------------------------------------------------------------------
# law mirroring


@dataclass(frozen=True)
class MirrorLaw(StepLaw):
    """The law of -X; lets stay-positive sweeps reuse the top-barrier engine."""

    base: StepLaw
    family: str = "mirror"

    @property
    def alpha(self):
        return self.base.alpha

    @property
    def rho_nominal(self):
        return 1.0 - self.base.rho_nominal

    @property
    def mean(self):
        return -self.base.mean

    @property
    def sigma2(self):
        return self.base.sigma2

    @property
    def support_kind(self):
        kinds = {"left-infinite": "right-infinite", "right-infinite": "left-infinite"}
        return kinds.get(self.base.support_kind, self.base.support_kind)

    def pmf_at(self, k):
        return self.base.pmf_at(-k)

    def pmf_array(self, ks):
        return self.base.pmf_array(-np.asarray(ks))

    def tail_above(self, y):
        # P(-X > y) = P(X <= -y-1)
        return self.base.tail_below(-y - 1)

    def tail_below(self, m):
        return self.base.tail_above(-m - 1)

    def tail_above_array(self, ys):
        return self.base.tail_below_array(-np.asarray(ys) - 1)

    def tail_below_array(self, ms):
        return self.base.tail_above_array(-np.asarray(ms) - 1)

    @property
    def is_aperiodic(self):
        return self.base.is_aperiodic

    @property
    def bounded_support(self):
        return self.base.bounded_support

    @property
    def max_up(self):
        return _max_down(self.base)

    def norming(self):
        # scale proxy for window sizing; the mirrored walk spreads identically
        return self.base.norming()

    def describe(self):
        return f"mirror({self.base.describe()})"


def mirror(law: StepLaw) -> StepLaw:
    if isinstance(law, MirrorLaw):
        return law.base
    return MirrorLaw(base=law)


def _max_down(law: StepLaw):
    """Largest downward step, or None if the left side is unbounded."""
    if law.support_kind in ("two-sided-infinite", "left-infinite"):
        return None
    if isinstance(law, MirrorLaw):
        up = law.base.max_up
        return up if up is not None else None
    for k in range(-1, -65, -1):
        if law.tail_below(k) == 0.0:
            return -k - 1
    raise ValueError("could not locate a bounded left support edge")


# ---------------------------------------------------------------------------
# window policy


@dataclass(frozen=True)
class FarConfig:
    """Coarse far-field geometry on one side of the core window."""

    block: int = 128
    extent: int = 4_000_000  # sites covered by coarse blocks beyond the core

    @property
    def n_blocks(self) -> int:
        return self.extent // self.block


@dataclass(frozen=True)
class WindowSpec:
    """Core window plus optional far fields; hi is the barrier for killed runs."""

    lo: int
    hi: int
    far_low: FarConfig | None = None
    far_high: FarConfig | None = None

    @property
    def width(self) -> int:
        return self.hi - self.lo + 1


def _heavy_sides(law: StepLaw):
    kind = law.support_kind
    return (kind in ("two-sided-infinite", "left-infinite"),
            kind in ("two-sided-infinite", "right-infinite"))


def _return_coeff(law: StepLaw) -> float:
    """K such that the down-and-back truncation error over all (escape, return)
    step pairs is ~ (n^2/2) K L^(-2a-1) / (2a+1) for a cutoff at distance L.

    K is the product of the two pmf power coefficients c_lo c_hi, where
    pmf(k) ~ c |k|^(-a-1); each c is read off the exact tail at a deep probe.
    """
    a = law.alpha
    probe = 10**7
    c_lo = law.tail_below(-probe) * probe**a * a
    c_hi = law.tail_above(probe) * probe**a * a
    return c_lo * c_hi


def suggest_window(law: StepLaw, x: int, n_max: int, *,
                   site_abs_err: float = 1e-9,
                   fp_abs_err: float | None = None,
                   start: int = 0,
                   readout_lo: int = 0,
                   mem_cap: int = 4 * 10**9) -> WindowSpec:
    """Pick a window meeting an absolute accuracy target for core site values.

    Three cases:
    * bounded left support: an exact window covering every reachable site;
    * heavy left tail but bounded upward steps: mass dropped below the window
      cannot climb back past ``readout_lo`` within the horizon, so a window
      ``n_max * max_up`` below the lowest readout is exact, no far field;
    * heavy left tail, unbounded upward steps: the plain-truncation bias of a
      single site value at cutoff L obeys the one-big-jump bound
      (n^2/2) K L^(-2a-1)/(2a+1); the core is sized so the far field's
      block-placement slip of that return flow meets the target and the far
      extent so that the untracked remainder does too.

    ``fp_abs_err``, when given, additionally budgets the passage increments:
    mass parked in far blocks crosses the barrier at the rate of the step
    tail, a larger flow than single-site returns, with the same relative
    placement slip.
    """
    heavy_low, _ = _heavy_sides(law)
    base = min(start, 0, readout_lo)
    if not heavy_low:
        down = _max_down(law)
        lo = base - down * n_max - 1
        spec = WindowSpec(lo=min(lo, x - 1), hi=x, far_low=None)
    elif law.max_up is not None:
        lo = base - law.max_up * n_max - 2
        spec = WindowSpec(lo=min(lo, x - 1), hi=x, far_low=None)
    else:
        a = law.alpha
        coeff = _return_coeff(law)
        pairs = 0.5 * n_max * n_max

        def plain_err(L):
            return pairs * coeff * L ** (-2 * a - 1) / (2 * a + 1)

        grid = 10.0 ** np.linspace(2.0, 9.5, 600)
        block = 128
        # placement error of the far field: mass decimated to blocks sits up
        # to one block off, a relative (a+1) R / L slip of the return flow
        ok_core = grid[(a + 1) * block / grid * plain_err(grid) <= 0.5 * site_abs_err]
        core_gap = int(ok_core[0]) if ok_core.size else int(grid[-1])
        ok_ext = grid[plain_err(grid) <= 0.5 * site_abs_err]
        extent = int(ok_ext[0]) if ok_ext.size else int(grid[-1])
        if fp_abs_err is not None:
            # crossing flow out of parked far mass: pairs * K/a^2 * L^(-2a)
            cross = pairs * coeff / a**2 * grid ** (-2 * a)
            okc = grid[(a + 1) * block / grid * cross <= 0.5 * fp_abs_err]
            core_gap = max(core_gap, int(okc[0]) if okc.size else int(grid[-1]))
            oke = grid[cross <= 0.5 * fp_abs_err]
            extent = max(extent, int(oke[0]) if oke.size else int(grid[-1]))
        bulk = 8.0 * law.norming()(max(float(n_max), 1.0))
        core_gap = max(1024, int(bulk), core_gap)
        core_gap = -(-core_gap // block) * block
        extent = -(-max(extent, core_gap + block) // block) * block
        spec = WindowSpec(lo=base - core_gap, hi=x,
                          far_low=FarConfig(block=block, extent=extent))
    need = spec.width * 8 * 8 + (spec.far_low.n_blocks * 8 * 6 if spec.far_low else 0)
    if need > mem_cap:
        raise WindowOverflow(
            f"window of {spec.width} sites needs ~{need/1e9:.2f} GB against a "
            f"cap of {mem_cap/1e9:.2f} GB")
    return spec


# ---------------------------------------------------------------------------
# state containers


@dataclass
class KilledLawVector:
    """Sub-probability vector P(S_n = j, T_x > n) on the window [lo, x].

    ``defect`` is all alive mass not held at site resolution (far-field blocks
    plus anything beyond the far extent); tracked, never renormalized.
    Conservation: sum(masses) + defect + fp_cum = 1.
    """

    n: int
    barrier_x: int
    lo: int
    masses: np.ndarray
    defect: float
    fp_cum: float
    fp_error_bound: float = 0.0

    @property
    def hi(self) -> int:
        return self.lo + len(self.masses) - 1

    def mass_at(self, j: int) -> float:
        if self.lo <= j <= self.hi:
            return float(self.masses[j - self.lo])
        return 0.0

    def total_alive(self) -> float:
        return float(np.sum(self.masses)) + self.defect

    def conservation_residual(self) -> float:
        return abs(self.total_alive() + self.fp_cum - 1.0)


@dataclass
class FirstPassageTable:
    """fp[n] = P(T_x = n) and surv[n] = P(T_x > n) for 1 <= n <= N."""

    barrier_x: int
    fp: np.ndarray          # index n-1 holds P(T_x = n)
    surv: np.ndarray        # index n holds P(T_x > n); surv[0] = 1
    fp_error_bound: float   # bound on the total passage mass unaccounted for
    defect_final: float

    @property
    def horizon(self) -> int:
        return len(self.fp)


@dataclass
class UnkilledLaw:
    """Law of S_n on a window; far mass appears as side defects."""

    n: int
    lo: int
    masses: np.ndarray
    defect_low: float   # alive mass strictly below the window
    defect_high: float  # alive mass strictly above the window
    rho_n: float        # P(S_n > 0); exact up to roundoff (defects are signed-definite)

    @property
    def hi(self) -> int:
        return self.lo + len(self.masses) - 1

    def mass_at(self, j: int) -> float:
        if self.lo <= j <= self.hi:
            return float(self.masses[j - self.lo])
        return 0.0

    def tail_above(self, x: int) -> float:
        """P(S_n > x) for x inside the window; all high defect counts."""
        if not (self.lo <= x <= self.hi):
            raise ValueError("x outside window")
        return float(np.sum(self.masses[x - self.lo + 1:])) + self.defect_high


# ---------------------------------------------------------------------------
# cached geometry pieces


_kern_cache: dict = {}
_tail_cache: dict = {}
_far_cache: dict = {}


def _kernel(law: StepLaw, span: int) -> np.ndarray:
    key = (law, span)
    out = _kern_cache.get(key)
    if out is None:
        out = law.pmf_window(-span, span)
        _kern_cache[key] = out
    return out


def _tail_vec(law: StepLaw, span: int) -> np.ndarray:
    """tail_above(d) for d = span..0 (i.e. F-bar(hi - i) over the window)."""
    key = (law, span)
    out = _tail_cache.get(key)
    if out is None:
        out = law.tail_above_array(np.arange(span, -1, -1))
        _tail_cache[key] = out
    return out


# ---------------------------------------------------------------------------
# coarse far field (written for the low side; the high side mirrors its data)


class _FarField:
    """Block-resolution mass field below a fine core [lo, hi].

    Block b covers sites [lo - (b+1)R, lo - bR - 1], b = 0 .. NB-1.
    """

    def __init__(self, law: StepLaw, lo: int, hi: int, cfg: FarConfig):
        self.law = law
        self.lo, self.hi = lo, hi
        self.R = R = cfg.block
        self.NB = NB = cfg.n_blocks
        self.W = W = hi - lo + 1
        self.NV = NV = -(-W // R) + 1   # virtual blocks spanning the core and above
        self.NS = NS = -(-W // R)       # decimated source blocks
        self.B_bin = min((W - 1) // R, NB)
        key = (law, R, NB, W)
        cached = _far_cache.get(key)
        if cached is None:
            cached = self._build_kernels(law, lo, hi, R, NB, NV, NS)
            _far_cache[key] = cached
        (self.k_far, self.k_top_rem, self.k_bot_rem, self._far_nfft, self._far_kf,
         self.k_deep, self.k_deep_rem, self._deep_nfft, self._deep_kf,
         self._seed) = cached
        self.blocks = np.zeros(NB)
        self.defect = 0.0

    @staticmethod
    def _build_kernels(law, lo, hi, R, NB, NV, NS):
        # far-to-anywhere kernel over block displacements d; landing v = b + d
        d = np.arange(-(NV + NB - 1), NB + 2)
        upper = -d * R + R // 2 - 1    # integer X in [-dR - R/2, -dR + R/2 - 1]
        lower = -d * R - R // 2 - 1
        k_far = law.tail_below_array(upper) - law.tail_below_array(lower)
        k_top_rem = law.tail_above(int(upper[0]))
        k_bot_rem = law.tail_below(int(lower[-1]))
        far_nfft = sfft.next_fast_len(NB + len(k_far) - 1)
        far_kf = sfft.rfft(k_far, far_nfft)
        # deep landings from the decimated core: steps X <= lo - hi - 1 only
        m = np.arange(0, NB + NS + 1)
        cut = lo - hi - 1
        up2 = np.minimum(-(m + 1.0) * R + R // 2 - 1, cut)
        lo2 = -(m + 1.0) * R - R // 2 - 1
        diff = law.tail_below_array(up2) - law.tail_below_array(lo2)
        k_deep = np.where(up2 > lo2, diff, 0.0)
        k_deep_rem = law.tail_below(int(lo2[-1]))
        deep_nfft = sfft.next_fast_len(NS + len(k_deep) - 1)
        deep_kf = sfft.rfft(k_deep, deep_nfft)
        # first-step seeding from a unit mass at the origin
        edges = lo - np.arange(NB + 1) * R  # block b spans [edges[b+1], edges[b]-1]
        seed = law.tail_below_array(edges[:-1] - 1) - law.tail_below_array(edges[1:] - 1)
        return (k_far, k_top_rem, k_bot_rem, far_nfft, far_kf,
                k_deep, k_deep_rem, deep_nfft, deep_kf, seed)

    # -- inbound flows ------------------------------------------------------

    def seed_first_step(self):
        """Deposit P(X in block) for a first step from the origin."""
        self.blocks += self._seed
        self.defect += self.law.tail_below(int(self.lo - self.NB * self.R - 1))

    def take_site_landings(self, below_core: np.ndarray):
        """Fine-conv output on sites [2lo-hi, lo-1], ascending order."""
        R = self.R
        xrev = below_core[::-1]  # xrev[0] = site lo-1, going downward
        nfull = self.B_bin * R
        if nfull:
            self.blocks[:self.B_bin] += np.add.reduceat(
                xrev[:nfull], np.arange(0, nfull, R))
        rest = float(np.sum(xrev[nfull:]))
        if rest != 0.0:
            if self.B_bin < self.NB:
                self.blocks[self.B_bin] += rest
            else:
                self.defect += rest

    def take_deep_landings(self, core: np.ndarray):
        """Landings with steps X <= lo - hi - 1, from the block-decimated core."""
        R, NS, NB = self.R, self.NS, self.NB
        pad = NS * R - self.W
        dec = np.add.reduceat(np.concatenate([core, np.zeros(pad)]),
                              np.arange(0, NS * R, R))
        total = float(np.sum(dec))
        if total <= 0.0:
            return
        # landing block v = m - s with kernel index m and source block s
        out = sfft.irfft(sfft.rfft(dec[::-1], self._deep_nfft) * self._deep_kf,
                         self._deep_nfft, workers=_FFT_WORKERS)
        self.blocks += out[NS - 1: NS - 1 + NB]
        # all deep landings truly sit below lo; block-center placement can push
        # boundary cells to v < 0, so clamp that mass into the top block
        self.blocks[0] += float(np.sum(out[: NS - 1]))
        self.defect += float(np.sum(out[NS - 1 + NB: NS + NB + len(self.k_deep) - 1]))
        self.defect += total * self.k_deep_rem

    # -- one far-field step --------------------------------------------------

    def step(self):
        """Evolve blocks one step; returns (inflow over [lo, hi], above-hi mass)."""
        NB, NV, R, W = self.NB, self.NV, self.R, self.W
        total = float(np.sum(self.blocks))
        if total == 0.0:
            return None, 0.0
        out = sfft.irfft(sfft.rfft(self.blocks, self._far_nfft) * self._far_kf,
                         self._far_nfft, workers=_FFT_WORKERS)
        off = NV + NB - 1   # output index of landing block v = 0
        new_blocks = out[off: off + NB].copy()
        deep = float(np.sum(out[off + NB: NB + len(self.k_far) - 1]))
        above = float(np.sum(out[:off - NV])) + total * self.k_top_rem
        core_inflow = np.zeros(W)
        for v in range(-NV, 0):
            inflow = float(out[off + v])
            if inflow == 0.0:
                continue
            a = self.lo - (v + 1) * R
            b = self.lo - v * R - 1
            a_in, b_in = max(a, self.lo), min(b, self.hi)
            width = b - a + 1
            if b_in >= a_in:
                core_inflow[a_in - self.lo: b_in - self.lo + 1] += inflow / width
            if b > self.hi:
                above += inflow * (b - max(a, self.hi + 1) + 1) / width
        self.blocks = new_blocks
        self.defect += deep + total * self.k_bot_rem
        return core_inflow, above

    def total(self) -> float:
        return float(np.sum(self.blocks)) + self.defect


# ---------------------------------------------------------------------------
# the evolver


class StepEvolver:
    """One-step evolution on a fixed window geometry.

    With a top barrier, ``hi`` is the barrier and crossing mass is absorbed
    through the analytic tail.  Without one, a far field (on mirrored data)
    catches the high side when it is heavy.  The low side holds either an
    exact bounded window or the coarse far field.
    """

    def __init__(self, law: StepLaw, spec: WindowSpec, *, barrier: bool = True,
                 mem_cap: int = 4 * 10**9):
        self.law = law
        self.spec = spec
        self.lo, self.hi = spec.lo, spec.hi
        self.barrier = barrier
        W = spec.width
        if W * 8 * 8 > mem_cap:
            raise WindowOverflow(f"core window of {W} sites exceeds the memory cap")
        self.W = W
        span = self.hi - self.lo
        self.top_tail = _tail_vec(law, span) if barrier else None
        kern = _kernel(law, span)
        self.conv_len = W + len(kern) - 1
        nnz = int(np.count_nonzero(kern))
        self._direct = min(W * len(kern), nnz * W) <= _DIRECT_COST_CAP
        if self._direct:
            self._kern_nz = np.nonzero(kern)[0]
            self._kern_vals = kern[self._kern_nz]
        else:
            self._nfft = sfft.next_fast_len(self.conv_len)
            key = (law, span, "kf", self._nfft)
            kf = _kern_cache.get(key)
            if kf is None:
                kf = sfft.rfft(kern, self._nfft)
                _kern_cache[key] = kf
            self._kf = kf
        self.far_low = _FarField(law, self.lo, self.hi, spec.far_low) \
            if spec.far_low else None
        if spec.far_high is not None:
            if barrier:
                raise ValueError("far_high is incompatible with a top barrier")
            self.far_high = _FarField(mirror(law), -self.hi, -self.lo, spec.far_high)
        else:
            self.far_high = None
        if not barrier and self.far_high is None:
            self.top_shed = _tail_vec(law, span)
        if self.far_low is None:
            # P(X <= lo - 1 - i) for i in [lo, hi]; zero when the window is exact
            self.low_shed = law.tail_below_array(np.arange(-1, -W - 1, -1))

    def _convolve(self, m: np.ndarray) -> np.ndarray:
        if self._direct:
            out = np.zeros(self.conv_len)
            for idx, val in zip(self._kern_nz, self._kern_vals):
                out[idx: idx + self.W] += val * m
            return out
        spec = sfft.rfft(m, self._nfft)
        spec *= self._kf
        return sfft.irfft(spec, self._nfft, workers=_FFT_WORKERS)[: self.conv_len]

    def step(self, core: np.ndarray):
        """Advance one step: returns (new_core, absorbed_top, flows dict)."""
        W = self.W
        absorbed = float(core @ self.top_tail) if self.barrier else 0.0
        shed_high = 0.0
        if not self.barrier and self.far_high is None:
            shed_high = float(core @ self.top_shed)
        out = self._convolve(core)
        below = out[: W - 1]             # sites [2lo-hi, lo-1]
        new_core = out[W - 1: 2 * W - 1].copy()
        above = out[2 * W - 1:]          # sites [hi+1, 2hi-lo]
        deep_low = 0.0
        # far fields step on their pre-deposit blocks; this step's landings
        # are deposited afterwards and first move next step
        up = up_m = 0.0
        if self.far_low is not None:
            inflow, up = self.far_low.step()
            if inflow is not None:
                new_core += inflow
        if self.far_high is not None:
            inflow_m, up_m = self.far_high.step()
            if inflow_m is not None:
                new_core += inflow_m[::-1]
        if self.far_low is not None:
            self.far_low.take_site_landings(below)
            self.far_low.take_deep_landings(core)
            if up_m:
                self.far_low.blocks[0] += up_m
            if self.barrier:
                absorbed += up
            elif self.far_high is not None:
                self.far_high.blocks[0] += up
            else:
                shed_high += up
        else:
            deep_low = float(core @ self.low_shed) + float(np.sum(below)) + up_m
        if self.far_high is not None:
            self.far_high.take_site_landings(above[::-1])
            self.far_high.take_deep_landings(core[::-1])
        return new_core, absorbed, {"deep_low": deep_low, "shed_high": shed_high}

    def far_total(self) -> float:
        t = 0.0
        if self.far_low is not None:
            t += self.far_low.total()
        if self.far_high is not None:
            t += self.far_high.total()
        return t


# ---------------------------------------------------------------------------
# sweeps


@dataclass
class SweepResult:
    law: StepLaw
    barrier_x: int
    fp: np.ndarray
    surv: np.ndarray
    snapshots: dict
    rows: np.ndarray | None
    rows_lo: int | None
    defect_final: float
    fp_error_bound: float
    window_mass: np.ndarray    # per-step sum of core masses
    alive_defect: np.ndarray   # per-step far + shed mass (alive, untracked)


def killed_sweep(law: StepLaw, x: int, N: int, *,
                 spec: WindowSpec | None = None,
                 site_abs_err: float = 1e-9,
                 fp_abs_err: float | None = None,
                 snapshots=(),
                 collect_rows: tuple[int, int] | None = None,
                 first_step_init: bool = False,
                 mem_cap: int = 4 * 10**9) -> SweepResult:
    """Run the top-barrier DP from S_0 = 0 up to horizon N.

    ``first_step_init`` applies the first step analytically, which allows a
    barrier below the start (used by stay-positive sweeps via mirroring).
    ``snapshots`` is an iterable of n at which to keep the full core vector;
    ``collect_rows`` an inclusive site range recorded at every step.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if spec is None:
        spec = suggest_window(law, x, N, site_abs_err=site_abs_err,
                              fp_abs_err=fp_abs_err, mem_cap=mem_cap)
    ev = StepEvolver(law, spec, barrier=True, mem_cap=mem_cap)
    core = np.zeros(spec.width)
    fp = np.zeros(N)
    surv = np.ones(N + 1)
    start_n = 1
    if first_step_init:
        ks = np.arange(spec.lo, x + 1)
        core[:] = law.pmf_array(ks)
        fp[0] = law.tail_above(x)
        surv[1] = surv[0] - fp[0]
        if ev.far_low is not None:
            ev.far_low.seed_first_step()
        start_n = 2
    else:
        if not (spec.lo <= 0 <= spec.hi):
            raise ValueError("start 0 outside window; use first_step_init")
        core[-spec.lo] = 1.0
    snapset = {int(s) for s in snapshots}
    snaps = {}
    rows = None
    if collect_rows is not None:
        a, b = collect_rows
        if not (spec.lo <= a <= b <= spec.hi):
            raise ValueError("collect_rows range must lie inside the window")
        rsl = slice(a - spec.lo, b - spec.lo + 1)
        rows = np.zeros((N + 1, b - a + 1))
        rows[start_n - 1] = core[rsl]
    fp_cum = float(fp[0]) if first_step_init else 0.0
    window_mass = np.zeros(N + 1)
    alive_defect = np.zeros(N + 1)
    window_mass[start_n - 1] = float(np.sum(core))
    shed_low = 0.0
    if first_step_init and ev.far_low is None:
        shed_low += law.tail_below(spec.lo - 1)
    alive_defect[start_n - 1] = ev.far_total() + shed_low
    err_rate = law.tail_above(
        max(x - (spec.lo - (spec.far_low.extent if spec.far_low else 0)), 1))
    err_bound = 0.0
    if first_step_init and 1 in snapset:
        snaps[1] = KilledLawVector(n=1, barrier_x=x, lo=spec.lo, masses=core.copy(),
                                   defect=ev.far_total() + shed_low, fp_cum=fp_cum)
    for n in range(start_n, N + 1):
        core, absorbed, flows = ev.step(core)
        shed_low += flows["deep_low"]
        fp[n - 1] = absorbed
        fp_cum += absorbed
        surv[n] = surv[n - 1] - absorbed
        if ev.far_low is not None:
            err_bound += ev.far_low.defect * err_rate
        window_mass[n] = float(np.sum(core))
        alive_defect[n] = ev.far_total() + shed_low
        if rows is not None:
            rows[n] = core[rsl]
        if n in snapset:
            snaps[n] = KilledLawVector(
                n=n, barrier_x=x, lo=spec.lo, masses=core.copy(),
                defect=ev.far_total() + shed_low, fp_cum=fp_cum,
                fp_error_bound=err_bound)
    return SweepResult(law=law, barrier_x=x, fp=fp, surv=surv, snapshots=snaps,
                       rows=rows,
                       rows_lo=None if collect_rows is None else collect_rows[0],
                       defect_final=ev.far_total() + shed_low,
                       fp_error_bound=err_bound,
                       window_mass=window_mass, alive_defect=alive_defect)


# ---------------------------------------------------------------------------
# public operations


def first_passage_table(law: StepLaw, x: int, N: int, *,
                        spec: WindowSpec | None = None,
                        site_abs_err: float = 1e-9,
                        fp_abs_err: float | None = None,
                        mem_cap: int = 4 * 10**9) -> FirstPassageTable:
    """Exact fp[n] = P(T_x = n) and surv[n] = P(T_x > n) for 1 <= n <= N."""
    if x < 0:
        raise ValueError("x must be >= 0")
    res = killed_sweep(law, x, N, spec=spec, site_abs_err=site_abs_err,
                       fp_abs_err=fp_abs_err, mem_cap=mem_cap)
    return FirstPassageTable(barrier_x=x, fp=res.fp, surv=res.surv,
                             fp_error_bound=res.fp_error_bound,
                             defect_final=res.defect_final)


def killed_snapshot(law: StepLaw, x: int, n: int, *,
                    spec: WindowSpec | None = None,
                    site_abs_err: float = 1e-9,
                    mem_cap: int = 4 * 10**9) -> KilledLawVector:
    """The full vector P(S_n = j, T_x > n) on the window."""
    if x < 0:
        raise ValueError("x must be >= 0")
    res = killed_sweep(law, x, n, spec=spec, site_abs_err=site_abs_err,
                       snapshots=(n,), mem_cap=mem_cap)
    return res.snapshots[n]


def evolve(state: KilledLawVector, law: StepLaw):
    """One exact killed step from an explicit state.

    Returns (new_state, fp_increment).  Mass shed below the window joins the
    defect with no far field, so this entry point suits bounded-support laws
    and demonstrations; large sweeps should use killed_sweep.
    """
    spec = WindowSpec(lo=state.lo, hi=state.barrier_x)
    ev = StepEvolver(law, spec, barrier=True)
    core, absorbed, flows = ev.step(state.masses)
    defect = state.defect + flows["deep_low"]
    new = KilledLawVector(
        n=state.n + 1, barrier_x=state.barrier_x, lo=state.lo, masses=core,
        defect=defect,
        fp_cum=state.fp_cum + absorbed,
        fp_error_bound=state.fp_error_bound
        + defect * law.tail_above(max(state.barrier_x - state.lo, 1)))
    return new, absorbed


def unkilled_law(law: StepLaw, n: int, *,
                 spec: WindowSpec | None = None,
                 site_abs_err: float = 1e-9,
                 mem_cap: int = 4 * 10**9) -> UnkilledLaw:
    """The pmf of S_n on a window, plus rho_n = P(S_n > 0)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if spec is None:
        spec = _unkilled_spec(law, n, site_abs_err, mem_cap)
    ev = StepEvolver(law, spec, barrier=False, mem_cap=mem_cap)
    core = np.zeros(spec.width)
    core[-spec.lo] = 1.0
    shed_hi = 0.0
    shed_lo = 0.0
    for _ in range(n):
        core, _absorbed, flows = ev.step(core)
        shed_hi += flows["shed_high"]
        shed_lo += flows["deep_low"]
    d_lo = shed_lo + (ev.far_low.total() if ev.far_low else 0.0)
    d_hi = shed_hi + (ev.far_high.total() if ev.far_high else 0.0)
    rho_n = float(np.sum(core[-spec.lo + 1:])) + d_hi
    return UnkilledLaw(n=n, lo=spec.lo, masses=core, defect_low=d_lo,
                       defect_high=d_hi, rho_n=rho_n)


def _unkilled_spec(law, n, site_abs_err, mem_cap):
    one_sided = suggest_window(law, 0, n, site_abs_err=site_abs_err, mem_cap=mem_cap)
    _, heavy_high = _heavy_sides(law)
    lo = one_sided.lo
    if heavy_high:
        hi = -lo
        far_high = one_sided.far_low
    else:
        hi = (law.max_up or 1) * n + 1
        far_high = None
    return WindowSpec(lo=lo, hi=hi, far_low=one_sided.far_low, far_high=far_high)


# ---------------------------------------------------------------------------
# CSV export


def export_fp_csv(table: FirstPassageTable, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "fp", "surv"])
        for n in range(1, table.horizon + 1):
            w.writerow([n, repr(float(table.fp[n - 1])), repr(float(table.surv[n]))])


def export_killed_csv(vec: KilledLawVector, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "j", "mass", "defect"])
        for i, m in enumerate(vec.masses):
            w.writerow([vec.n, vec.lo + i, repr(float(m)), repr(vec.defect)])
