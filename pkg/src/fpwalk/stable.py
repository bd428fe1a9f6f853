"""Limiting stable objects: densities, meanders, passage and killed densities.

The limit model of a step law is pinned down by the walk's own norming: for
index 2 the variance norming gives a standard normal limit, for index < 2 the
tail-inversion norming fixes the jump measure so that the limit has
``nu(z, inf) = c_plus z^-alpha`` with ``c_plus = 1`` (right-tail inversion) or
the mirrored statement for the spectrally negative family.  In the S1
parameterization this means

    scale^alpha = (c_plus + c_minus) Gamma(1 - alpha) cos(pi alpha / 2)

for alpha != 1, with the usual limit value pi/2 per unit jump weight at
alpha = 1.  Densities are evaluated through the oscillatory-integral machinery
behind scipy's levy_stable (normal closed form at alpha = 2).

Meander densities for general alpha are extracted from the killed engine:
c_n g(n, round(z c_n)) / P(tau- > n) converges to the meander density p(z)
uniformly, and a matching statement holds for the reversed walk.  Extracted
grids carry a two-horizon stability estimate and power-law edge models so
they can serve as integrands.

The killed density q_x(w) (endpoint distance w = x - Y_1 on the event that
the running maximum stays below x) is assembled from the ladder-process
factorization: the bivariate renewal densities of the increasing ladder
processes of Y and -Y are

    u(t, z)  = t^(rho - eta - 1)   p(z t^-eta)
    u-(t, z) = t^(-eta - rho)      ptilde(z t^-eta)

up to constants, and q_x(w) is proportional to their time-space convolution;
the overall constant is fixed by matching the total mass to an independently
supplied value of P(sup Y <= x on [0,1]).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import levy_stable, norm

from .errors import (
    NormalizationUnavailable,
    PreconditionViolated,
    QuadratureFailure,
    ResolutionTooCoarse,
    SingularIntegrand,
)
from .exact import killed_sweep, mirror, suggest_window, unkilled_law
from .steps import BoundedLazy, LeftPareto, ParetoLattice, StepLaw, TableLaw

__all__ = [
    "StableModel",
    "DensityGrid",
    "limit_model",
    "stable_density",
    "brownian_meander_p",
    "brownian_h",
    "brownian_killed_density",
    "brownian_sup_below",
    "spectrally_negative_h",
    "local_limit_f0_check",
    "extract_meander",
    "q_profile",
    "q_density",
    "passage_density_from_killed",
    "spectrally_negative_check",
    "export_density_csv",
]


# ---------------------------------------------------------------------------
# the limit model


@dataclass(frozen=True)
class StableModel:
    """Stable limit law in the walk's own normalization."""

    alpha: float
    rho: float
    beta: float   # S1 skewness; determined by the tail weights
    scale: float  # S1 scale matching the walk's norming sequence

    def __post_init__(self):
        if not 0 < self.alpha <= 2:
            raise ValueError("alpha must lie in (0, 2]")
        if not 0 < self.rho < 1:
            raise ValueError("rho must lie in (0, 1)")

    @property
    def eta(self) -> float:
        return 1.0 / self.alpha

    @property
    def spectrally_negative(self) -> bool:
        return abs(self.alpha * self.rho - 1.0) < 1e-12

    def density(self, y) -> float | np.ndarray:
        """Density of Y_1; closed form at alpha = 2, stable quadrature below."""
        if self.alpha == 2.0:
            return norm.pdf(y)
        out = levy_stable.pdf(y, self.alpha, self.beta, loc=0.0, scale=self.scale)
        return float(out) if np.isscalar(y) else out

    def cdf(self, y) -> float:
        if self.alpha == 2.0:
            return float(norm.cdf(y))
        return float(levy_stable.cdf(y, self.alpha, self.beta, loc=0.0,
                                     scale=self.scale))

    def h_closed_form(self, x: float) -> float | None:
        """h_x(1) when a closed form exists: processes with no positive jumps
        creep upward and their passage density is x f(x) at time 1."""
        if self.alpha == 2.0 or self.spectrally_negative:
            return x * float(self.density(x))
        return None


def limit_model(law: StepLaw) -> StableModel:
    """The stable limit of S_n / c_n under the law's own norming."""
    if isinstance(law, (BoundedLazy, TableLaw)):
        if abs(law.mean) > 1e-12:
            raise PreconditionViolated("limit model requires a centered law")
        return StableModel(alpha=2.0, rho=0.5, beta=0.0, scale=1.0)
    if isinstance(law, ParetoLattice):
        a = law.alpha
        c_plus = 1.0
        c_minus = law.w_minus / law.w_plus
        beta = (c_plus - c_minus) / (c_plus + c_minus)
        if a == 1.0:
            if abs(beta) > 1e-12:
                raise PreconditionViolated("alpha = 1 requires symmetric tails")
            sigma = (c_plus + c_minus) * math.pi / 2.0
        else:
            sigma = ((c_plus + c_minus) * math.gamma(1.0 - a)
                     * math.cos(math.pi * a / 2.0)) ** (1.0 / a)
        return StableModel(alpha=a, rho=law.rho_nominal, beta=beta, scale=sigma)
    if isinstance(law, LeftPareto):
        a = law.alpha
        sigma = (math.gamma(1.0 - a) * math.cos(math.pi * a / 2.0)) ** (1.0 / a)
        return StableModel(alpha=a, rho=1.0 / a, beta=-1.0, scale=sigma)
    raise ValueError(f"no limit model for family {law.family!r}")


def stable_density(model: StableModel, y: float) -> float:
    """f(y), the density of Y_1."""
    return float(model.density(y))


# ---------------------------------------------------------------------------
# Brownian closed forms


def brownian_meander_p(x) -> float | np.ndarray:
    """Meander density at time 1 for the Brownian case: x exp(-x^2/2)."""
    x = np.asarray(x, dtype=float)
    out = np.where(x >= 0, x * np.exp(-x * x / 2.0), 0.0)
    return float(out) if out.ndim == 0 else out


def brownian_h(x: float) -> float:
    """First-passage density over level x at time 1: x phi(x)."""
    return x * math.exp(-x * x / 2.0) / math.sqrt(2.0 * math.pi)


def spectrally_negative_h(model: StableModel, x: float) -> float:
    """h_x(1) = x f(x) for spectrally negative models (upward creeping)."""
    if not (model.alpha == 2.0 or model.spectrally_negative):
        raise PreconditionViolated("closed passage density needs no positive jumps")
    return x * float(model.density(x))


def brownian_killed_density(x: float, w) -> float | np.ndarray:
    """Reflection form of the killed endpoint density:
    P(Y_1 in x - dw, sup_{t<=1} Y_t < x) = phi(x - w) - phi(x + w)."""
    w = np.asarray(w, dtype=float)
    out = norm.pdf(x - w) - norm.pdf(x + w)
    return float(out) if out.ndim == 0 else out


def brownian_sup_below(x: float) -> float:
    """P(sup_{t<=1} Y_t <= x) = 2 Phi(x) - 1 for the Brownian case."""
    return 2.0 * float(norm.cdf(x)) - 1.0


# ---------------------------------------------------------------------------
# density grids


@dataclass
class DensityGrid:
    """A density sampled on a grid, with edge models for use as an integrand.

    Outside the grid the density continues as val0 (z/z0)^zero_exp near zero
    and as tail_coeff z^(-alpha-1) beyond the last abscissa (power tails are
    only attached when ``alpha`` < 2; otherwise the tail is treated as zero).
    """

    z: np.ndarray
    values: np.ndarray
    err: np.ndarray
    provenance: str          # closed-form | quadrature | extracted
    alpha: float
    zero_exp: float
    n_used: int | None = None
    cn: float | None = None
    tail_coeff: float = field(init=False, default=0.0)

    def __post_init__(self):
        if np.any(self.values < -1e-12):
            raise ValueError("density values must be nonnegative")
        self.values = np.maximum(self.values, 0.0)
        if self.alpha < 2.0:
            k = max(3, len(self.z) // 8)
            zz, vv = self.z[-k:], self.values[-k:]
            self.tail_coeff = float(np.mean(vv * zz ** (self.alpha + 1.0)))

    def at(self, v) -> np.ndarray:
        """Evaluate the density at arbitrary nonnegative arguments."""
        v = np.asarray(v, dtype=float)
        out = np.interp(v, self.z, self.values, left=np.nan, right=np.nan)
        below = v < self.z[0]
        if np.any(below):
            out[below] = self.values[0] * (v[below] / self.z[0]) ** self.zero_exp
        beyond = v > self.z[-1]
        if np.any(beyond):
            if self.alpha < 2.0:
                out[beyond] = self.tail_coeff * v[beyond] ** (-self.alpha - 1.0)
            else:
                out[beyond] = 0.0
        return out

    def total_mass(self) -> float:
        """Grid mass by trapezoid plus the analytic edge pieces."""
        bulk = float(np.trapezoid(self.values, self.z))
        lo = self.values[0] * self.z[0] / (self.zero_exp + 1.0)
        hi = self.tail_coeff * self.z[-1] ** (-self.alpha) / self.alpha \
            if self.alpha < 2.0 else 0.0
        return bulk + lo + hi


def export_density_csv(grid: DensityGrid, path):
    import csv
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["z", "value", "error", "provenance"])
        for z, v, e in zip(grid.z, grid.values, grid.err):
            w.writerow([repr(float(z)), repr(float(v)), repr(float(e)),
                        grid.provenance])


def brownian_meander_grid(zmax: float = 8.0, m: int = 1600) -> DensityGrid:
    z = np.linspace(1e-4, zmax, m)
    vals = brownian_meander_p(z)
    return DensityGrid(z=z, values=vals, err=np.zeros(m),
                       provenance="closed-form", alpha=2.0, zero_exp=1.0)


# ---------------------------------------------------------------------------
# local limit and meander extraction


def local_limit_f0_check(law: StepLaw, ngrid, *, mem_cap: int = 4 * 10**9) -> dict:
    """Compare c_n P(S_n = 0) against f(0) along a geometric n-grid."""
    if not law.is_aperiodic:
        raise PreconditionViolated("local limit checks require an aperiodic law")
    model = limit_model(law)
    f0 = float(model.density(0.0))
    ns = sorted(int(n) for n in ngrid)
    vals = []
    for n in ns:
        u = unkilled_law(law, n, mem_cap=mem_cap)
        vals.append(float(law.norming()(n)) * u.mass_at(0))
    vals = np.array(vals)
    lead = vals[len(vals) // 2:]
    return {"n": np.array(ns), "values": vals, "f0": f0,
            "ratio": vals / f0,
            "drift": float(np.max(np.abs(lead / lead[-1] - 1.0)))}


def extract_meander(law: StepLaw, n: int, zgrid=None, *,
                    site_rel_err: float = 5e-3,
                    mem_cap: int = 4 * 10**9):
    """Extract the meander densities p and ptilde from the killed engine.

    p comes from the stay-positive table: c_n g(n, round(z c_n)) / P(tau- > n);
    ptilde from the stay-nonpositive table and P(tau > n).  The per-point
    error estimate is the change against the half-horizon extraction.
    """
    if not law.is_aperiodic:
        raise PreconditionViolated("meander extraction requires an aperiodic law")
    cn = float(law.norming()(n))
    if cn < 20:
        raise ResolutionTooCoarse(f"c_n = {cn:.1f} < 20 lattice sites per unit")
    if zgrid is None:
        zgrid = np.concatenate([np.geomspace(0.02, 0.5, 12, endpoint=False),
                                np.linspace(0.5, 6.0, 45)])
    zgrid = np.asarray(zgrid, dtype=float)
    a, rho = law.alpha, law.rho_nominal

    p = _extract_one(mirror(law), law, n, zgrid, side="ascending",
                     site_rel_err=site_rel_err, mem_cap=mem_cap)
    pt = _extract_one(law, law, n, zgrid, side="descending",
                      site_rel_err=site_rel_err, mem_cap=mem_cap)
    return p, pt


def _extract_one(sweep_law, law, n, zgrid, *, side, site_rel_err, mem_cap):
    cn = float(law.norming()(n))
    cn2 = float(law.norming()(n // 2))
    a, rho = law.alpha, law.rho_nominal
    umax = int(np.ceil(zgrid[-1] * cn)) + 2
    scale_guess = 0.2 / cn / max(n, 2) ** 0.2  # crude site magnitude for budget
    site_err = site_rel_err * scale_guess
    if side == "ascending":
        spec = suggest_window(sweep_law, -1, n, site_abs_err=site_err,
                              readout_lo=-umax, mem_cap=mem_cap)
        res = killed_sweep(sweep_law, -1, n, spec=spec, first_step_init=True,
                           snapshots=(n // 2, n), mem_cap=mem_cap)
        zero_exp = a * rho
    else:
        spec = suggest_window(sweep_law, 0, n, site_abs_err=site_err,
                              readout_lo=-umax, mem_cap=mem_cap)
        res = killed_sweep(sweep_law, 0, n, spec=spec,
                           snapshots=(n // 2, n), mem_cap=mem_cap)
        zero_exp = a * (1.0 - rho)

    def grid_at(m, c_of_m):
        vec = res.snapshots[m]
        surv = res.surv[m]
        us = np.rint(zgrid * c_of_m).astype(int)
        us = np.maximum(us, 1)
        vals = np.array([vec.mass_at(-u) for u in us])
        return c_of_m * vals / surv

    vals_n = grid_at(n, cn)
    vals_h = grid_at(n // 2, cn2)
    err = np.abs(vals_n - vals_h)
    return DensityGrid(z=zgrid.copy(), values=vals_n, err=err,
                       provenance="extracted", alpha=a, zero_exp=zero_exp,
                       n_used=n, cn=cn)


# ---------------------------------------------------------------------------
# the killed-density pipeline


def _gauss_nodes(m):
    x, w = np.polynomial.legendre.leggauss(m)
    return 0.5 * (x + 1.0), 0.5 * w  # on [0, 1]


def _q_raw_single(model: StableModel, x: float, w: float,
                  p: DensityGrid, pt: DensityGrid, *,
                  t_nodes: int = 48, z_nodes: int = 160) -> float:
    """Unnormalized q_x(w): time-space convolution of the ladder densities.

    The time integral carries endpoint weights t^(rho-1) and (1-t)^(-rho)
    after the boundary layer of the space integral is accounted for; the
    substitutions t = s^(1/rho) near 0 and 1 - t = s^(1/(1-rho)) near 1
    flatten both.  The space integral is evaluated in the variable that
    resolves the thinner boundary layer.
    """
    eta, rho = model.eta, model.rho
    m = min(x, w)
    if m <= 0:
        return 0.0
    x0, w0 = x - m, w - m
    s_base, s_wt = _gauss_nodes(t_nodes)

    total = 0.0
    # t in (0, 1/2]: s in (0, (1/2)^rho]
    smax = 0.5 ** rho
    s = s_base * smax
    ts = s ** (1.0 / rho)
    jac = smax * s_wt * (1.0 / rho) * s ** (1.0 / rho - 1.0)
    total += _q_t_sum(model, ts, jac, x0, w0, m, p, pt, z_nodes)
    # t in (1/2, 1): 1-t = s^(1/(1-rho))
    smax = 0.5 ** (1.0 - rho)
    s = s_base * smax
    ts = 1.0 - s ** (1.0 / (1.0 - rho))
    jac = smax * s_wt * (1.0 / (1.0 - rho)) * s ** (1.0 / (1.0 - rho) - 1.0)
    total += _q_t_sum(model, ts, jac, x0, w0, m, p, pt, z_nodes)
    return total


def _q_t_sum(model, ts, jac, x0, w0, m, p, pt, z_nodes):
    eta, rho = model.eta, model.rho
    out = 0.0
    for t, jw in zip(ts, jac):
        a = t ** (-eta)
        b = (1.0 - t) ** (-eta)
        # inner integral J = int_0^m p((x0+z) a) pt((w0+z) b) dz, z from the
        # joint lower edge; resolve in the faster-varying argument
        if a >= b:
            zeta_max = min(m * a, _arg_cut(p, a * m))
            zeta = _graded_grid(zeta_max, z_nodes)
            vals = p.at(x0 * a + zeta) * pt.at((w0 + zeta / a) * b)
            J = float(np.trapezoid(vals, zeta)) / a
        else:
            zeta_max = min(m * b, _arg_cut(pt, b * m))
            zeta = _graded_grid(zeta_max, z_nodes)
            vals = pt.at(w0 * b + zeta) * p.at((x0 + zeta / b) * a)
            J = float(np.trapezoid(vals, zeta)) / b
        out += jw * t ** (rho - eta - 1.0) * (1.0 - t) ** (-eta - rho) * J
    return out


def _arg_cut(grid: DensityGrid, hard_cap: float) -> float:
    """Argument beyond which the density's mass is negligible."""
    if grid.alpha == 2.0:
        return min(hard_cap, 10.0)
    # power tail: keep until the remaining mass is ~1e-6
    c = max(grid.tail_coeff, 1e-300)
    cut = (c / (grid.alpha * 1e-6)) ** (1.0 / grid.alpha)
    return min(hard_cap, max(cut, 4.0 * grid.z[-1]))


def _graded_grid(zmax: float, nodes: int) -> np.ndarray:
    lin_top = min(10.0, zmax)
    lin = np.linspace(0.0, lin_top, max(nodes // 2, 8))
    if zmax > lin_top * 1.01:
        geo = np.geomspace(lin_top, zmax, max(nodes // 2, 8))[1:]
        return np.concatenate([lin, geo])
    return lin


def q_profile(model: StableModel, x: float, wgrid, p: DensityGrid,
              pt: DensityGrid, *, total_mass: float | None = None,
              check_error: bool = True) -> DensityGrid:
    """q_x on a w-grid, normalized so its total mass matches ``total_mass``.

    ``total_mass`` must be P(sup_{t<=1} Y_t < x): closed form in the Brownian
    case, otherwise an independent estimate (the Monte Carlo oracle).
    Raises NormalizationUnavailable without one, and QuadratureFailure when
    a node-refinement comparison shows the quadrature has not settled.
    """
    if model.alpha * model.rho > 1.0 + 1e-12:
        raise PreconditionViolated("killed-density factorization needs alpha rho <= 1")
    if total_mass is None:
        if model.alpha == 2.0:
            total_mass = brownian_sup_below(x)
        else:
            raise NormalizationUnavailable(
                "supply P(sup Y <= x): no closed form outside the Brownian case")
    wgrid = np.asarray(wgrid, dtype=float)
    raw = np.array([_q_raw_single(model, x, w, p, pt) for w in wgrid])
    if check_error:
        coarse = np.array([_q_raw_single(model, x, w, p, pt,
                                         t_nodes=24, z_nodes=80)
                           for w in wgrid[:: max(len(wgrid) // 8, 1)]])
        fine = raw[:: max(len(wgrid) // 8, 1)]
        rel = np.max(np.abs(coarse - fine) / np.maximum(np.abs(fine), 1e-300))
        if rel > 0.05:
            raise QuadratureFailure("killed-density quadrature has not settled",
                                    achieved_error=float(rel))
        err_scale = rel
    else:
        err_scale = 0.0
    grid = DensityGrid(z=wgrid.copy(), values=raw, err=err_scale * raw,
                       provenance="quadrature", alpha=model.alpha,
                       zero_exp=model.alpha * (1.0 - model.rho))
    scale = total_mass / grid.total_mass()
    grid.values = grid.values * scale
    grid.err = grid.err * scale
    grid.tail_coeff = grid.tail_coeff * scale
    return grid


def q_density(model: StableModel, x: float, w: float, p: DensityGrid,
              pt: DensityGrid, *, total_mass: float | None = None) -> float:
    """Pointwise normalized q_x(w); builds a default grid around w."""
    wmax = max(6.0, 4.0 * x, 3.0 * w)
    wgrid = np.concatenate([np.geomspace(max(1e-3, x * 1e-3), 0.5, 14,
                                         endpoint=False),
                            np.linspace(0.5, wmax, 48)])
    wgrid = np.unique(np.append(wgrid, w))
    grid = q_profile(model, x, wgrid, p, pt, total_mass=total_mass)
    return float(grid.at(np.array([w]))[0])


def passage_density_from_killed(model: StableModel, x: float,
                                qgrid: DensityGrid, *,
                                constant: float | None = None):
    """The passage-density integral h_x(1) = k int q_x(w) w^-alpha dw.

    Returns (value, raw_integral).  ``constant`` is the one-point calibration
    k; with None the raw integral is returned as the value (caller calibrates).
    Raises SingularIntegrand when the small-w behaviour of q makes the
    integral numerically divergent (needs alpha rho < 1).
    """
    a = model.alpha
    if a * model.rho >= 1.0 - 1e-12:
        raise PreconditionViolated("the passage integral needs alpha rho < 1")
    if qgrid.zero_exp - a <= -1.0 + 1e-9:
        raise SingularIntegrand("q_x(w) w^-alpha is not integrable at 0")
    w = qgrid.z
    vals = qgrid.values * w ** (-a)
    bulk = float(np.trapezoid(vals, w))
    # closed pieces from the edge models
    p0 = qgrid.zero_exp
    lo = qgrid.values[0] * w[0] ** (-a) * w[0] / (p0 - a + 1.0)
    hi = qgrid.tail_coeff * w[-1] ** (-2.0 * a) / (2.0 * a) if a < 2.0 else 0.0
    raw = bulk + lo + hi
    k = 1.0 if constant is None else constant
    return k * raw, raw


def spectrally_negative_check(model: StableModel, p: DensityGrid,
                              hgrid) -> dict:
    """Flatness report for the proportionality p(x) = k h_x(1).

    ``hgrid`` is a pair (xs, h_values) of empirical passage-density values.
    Returns per-point ratios and their coefficient of variation.
    """
    xs, hv = hgrid
    xs = np.asarray(xs, dtype=float)
    hv = np.asarray(hv, dtype=float)
    ratios = p.at(xs) / hv
    cv = float(np.std(ratios) / np.mean(ratios))
    return {"x": xs, "ratio": ratios, "cv": cv,
            "constant": float(np.mean(ratios))}
