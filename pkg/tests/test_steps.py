import math

import numpy as np
import pytest
from scipy.special import zeta

from fpwalk import steps
from fpwalk.steps import (
    BoundedLazy,
    LeftPareto,
    ParetoLattice,
    bounded_lazy,
    left_pareto,
    local_mass,
    norming,
    pareto_lattice,
    pmf_at,
    simple_walk,
    table_law,
    tail,
)


def brute_tail(law, x, horizon=10**6):
    """Direct series summation oracle for P(X > x), with an interval bound
    on the truncated remainder from integral comparison."""
    ks = np.arange(x + 1, x + horizon + 1, dtype=float)
    s = float(np.sum(law.pmf_array(ks)))
    a = law.alpha
    if isinstance(law, ParetoLattice):
        c = law.w_plus / law.norm_z
    else:
        c = 0.0
    top = x + horizon
    rem_hi = c * top ** (-a) / a          # integral from `top` of c t^-a-1
    rem_lo = c * (top + 1.0) ** (-a) / a
    return s, rem_lo, rem_hi


class TestBoundedLazy:
    def test_pmf_values(self):
        law = bounded_lazy(0.45)
        assert pmf_at(law, 1) == 0.45
        assert pmf_at(law, -1) == 0.45
        assert pmf_at(law, 0) == pytest.approx(0.10)
        assert pmf_at(simple_walk(), 2) == 0.0

    def test_tail(self):
        law = bounded_lazy(0.45)
        assert tail(law, 0) == 0.45
        assert tail(law, 1) == 0.0

    def test_moments_and_norming(self):
        law = bounded_lazy(0.45)
        assert law.mean == 0.0
        assert law.sigma2 == pytest.approx(0.9)
        assert norming(law, 100) == pytest.approx(math.sqrt(90.0))

    def test_local_mass_off_support(self):
        assert local_mass(bounded_lazy(0.45), 5, 3) == 0.0

    def test_total_mass(self):
        law = bounded_lazy(0.3)
        assert abs(sum(pmf_at(law, k) for k in range(-3, 4)) - 1.0) <= 1e-14

    def test_aperiodicity(self):
        assert bounded_lazy(0.45).is_aperiodic
        assert not simple_walk().is_aperiodic


class TestParetoLattice:
    def test_symmetry(self):
        law = pareto_lattice(0.8)
        for k in (1, 2, 17, 1000):
            assert pmf_at(law, k) == pmf_at(law, -k)
        for x in (0, 5, 100):
            assert abs(law.tail(x) - law.tail_below(-x - 1)) <= 1e-14

    def test_total_mass_closed_form(self):
        # atom + both analytic tails must give exactly 1
        law = pareto_lattice(0.8, atom0=0.2)
        total = law.atom0 + law.tail_above(0) + law.tail_below(-1)
        assert abs(total - 1.0) <= 1e-14
        law2 = pareto_lattice(0.6, atom0=0.1, w_plus=2.0, w_minus=1.0)
        total2 = law2.atom0 + law2.tail_above(0) + law2.tail_below(-1)
        assert abs(total2 - 1.0) <= 1e-14

    def test_tail_against_series_oracle(self):
        law = pareto_lattice(0.8)
        for x in (0, 3, 10, 1000):
            s, rem_lo, rem_hi = brute_tail(law, x)
            t = tail(law, x)
            assert s + rem_lo - 1e-13 <= t <= s + rem_hi + 1e-13

    def test_tail_regular_variation(self):
        law = pareto_lattice(0.8)
        v3 = tail(law, 10**3) * (10**3) ** 0.8
        v4 = tail(law, 10**4) * (10**4) ** 0.8
        assert v3 > 0 and v4 > 0
        assert abs(v4 / v3 - 1.0) <= 0.01

    def test_local_mass_regular_variation(self):
        law = pareto_lattice(0.8)
        v3 = local_mass(law, 10**3, 1) * (10**3) ** 1.8
        v4 = local_mass(law, 10**4, 1) * (10**4) ** 1.8
        assert abs(v4 / v3 - 1.0) <= 0.01
        assert local_mass(law, 7, 1) == pmf_at(law, 7)

    def test_regular_variation_slope(self):
        law = pareto_lattice(0.8)
        xs = np.geomspace(1e2, 1e5, 16)
        ts = law.tail_above_array(np.floor(xs))
        slope = np.polyfit(np.log(np.floor(xs)), np.log(ts), 1)[0]
        assert abs(slope + 0.8) <= 0.02

    def test_norming_tail_inversion(self):
        law = pareto_lattice(0.8)
        c = norming(law, 1000)
        assert 0.95 <= 1000 * tail(law, round(c)) <= 1.05

    def test_norming_monotone(self):
        law = pareto_lattice(0.8)
        ns = np.unique(np.geomspace(1, 10**4, 60).astype(int))
        cs = law.norming().array(ns.astype(float))
        assert np.all(np.diff(cs) > 0)

    def test_skewed_rho(self):
        law = pareto_lattice(0.6, atom0=0.1, w_plus=2.0, w_minus=1.0)
        a, beta = 0.6, 1.0 / 3.0
        want = 0.5 + math.atan(beta * math.tan(math.pi * a / 2)) / (math.pi * a)
        assert law.rho_nominal == pytest.approx(want)
        with pytest.raises(ValueError):
            pareto_lattice(1.5, w_plus=2.0, w_minus=1.0)

    def test_aperiodic(self):
        assert pareto_lattice(0.8).is_aperiodic


class TestLeftPareto:
    def test_centering_exact(self):
        law = left_pareto(1.5, 0.25)
        ks = np.arange(-10**6, 2)
        m = float(np.sum(ks * law.pmf_array(ks)))
        # remaining left-tail mean contribution is s * sum_{k>1e6} k^-alpha
        rem = law.scale * zeta(law.alpha, 1e6 + 1.0)
        assert abs(m - rem) <= 1e-12

    def test_total_mass(self):
        law = left_pareto()
        total = law.pmf_at(0) + law.pmf_at(1) + law.tail_below(-1)
        assert abs(total - 1.0) <= 1e-14

    def test_rho(self):
        assert left_pareto(1.5).rho_nominal == pytest.approx(2.0 / 3.0)

    def test_bounded_right(self):
        law = left_pareto()
        assert tail(law, 1) == 0.0
        assert tail(law, 0) == pytest.approx(law.pmf_at(1))
        assert law.max_up == 1

    def test_norming_left_inversion(self):
        law = left_pareto()
        c = norming(law, 4096)
        assert 0.999 <= 4096 * law.tail_below(-math.ceil(c)) / (
            law.tail_below(-math.ceil(c)) / law.left_tail_continuous(c)) <= 1.001
        # direct check on the continuous interpolant
        assert 4096 * law.left_tail_continuous(c) == pytest.approx(1.0, abs=1e-9)

    def test_aperiodic(self):
        assert left_pareto().is_aperiodic


class TestTableLaw:
    def test_basic(self):
        law = table_law((-2, -1, 0, 1, 2), (0.15, 0.2, 0.3, 0.2, 0.15))
        assert law.mean == pytest.approx(0.0)
        assert law.tail_above(0) == pytest.approx(0.35)
        assert law.tail_below(-1) == pytest.approx(0.35)
        assert law.is_aperiodic
        assert law.sigma2 == pytest.approx(2 * (0.15 * 4 + 0.2))

    def test_validation(self):
        with pytest.raises(ValueError):
            table_law((0, 1), (0.5, 0.6))


def test_norming_strictly_increasing_small_n():
    for law in (bounded_lazy(0.45), pareto_lattice(0.8), left_pareto()):
        prev = 0.0
        for n in (1, 2, 3, 10, 100, 10**4):
            c = norming(law, n)
            assert c > prev
            prev = c


def test_tail_plus_pmf_consistency():
    # tail(x-1) - tail(x) == pmf(x) ties the two closed forms together
    law = pareto_lattice(0.8)
    for x in (1, 2, 5, 50, 4096):
        assert law.tail_above(x - 1) - law.tail_above(x) == pytest.approx(
            law.pmf_at(x), rel=1e-12)
