import numpy as np
import pytest

from fpwalk import exact
from fpwalk.errors import WindowOverflow
from fpwalk.exact import (
    KilledLawVector,
    WindowSpec,
    evolve,
    first_passage_table,
    killed_snapshot,
    killed_sweep,
    mirror,
    suggest_window,
    unkilled_law,
)
from fpwalk.steps import bounded_lazy, left_pareto, pareto_lattice, simple_walk, table_law

from oracles import law_fractions, path_enumeration, rational_killed, rational_unkilled

ORACLE_LAWS = [
    bounded_lazy(0.45),
    bounded_lazy(0.3),
    simple_walk(),
    table_law((-2, -1, 0, 1, 2), (0.15, 0.2, 0.3, 0.2, 0.15)),
    table_law((-2, -1, 0, 1, 2), (0.1, 0.25, 0.3, 0.2, 0.15)),
]


def test_rational_oracle_matches_true_enumeration():
    # validates the pushforward oracle itself against walking every path
    law = table_law((-2, -1, 0, 1, 2), (0.1, 0.25, 0.3, 0.2, 0.15))
    probs = law_fractions(law)
    fp_a, killed_a = path_enumeration(probs, x=1, N=7)
    fp_b, snaps_b = rational_killed(probs, x=1, N=7)
    assert fp_a == fp_b
    for n in range(8):
        assert dict(killed_a[n]) == snaps_b[n]


@pytest.mark.parametrize("law", ORACLE_LAWS, ids=lambda l: l.describe())
@pytest.mark.parametrize("x", [0, 1, 3])
def test_engine_matches_rational_oracle(law, x):
    N = 12
    probs = law_fractions(law)
    fp_o, snaps_o = rational_killed(probs, x, N)
    res = killed_sweep(law, x, N, snapshots=range(1, N + 1))
    for n in range(1, N + 1):
        assert abs(res.fp[n - 1] - float(fp_o[n - 1])) <= 1e-12
        vec = res.snapshots[n]
        for j, mass in snaps_o[n].items():
            assert abs(vec.mass_at(j) - float(mass)) <= 1e-12
        window_sum = float(np.sum(vec.masses))
        assert abs(window_sum - float(sum(snaps_o[n].values()))) <= 1e-12


class TestSimpleWalkClosedForms:
    def test_fp_sequence(self):
        law = simple_walk()
        t = first_passage_table(law, 0, 5)
        assert np.allclose(t.fp, [0.5, 0.0, 0.125, 0.0, 0.0625], atol=1e-15)

    def test_fp_x1_n2(self):
        t = first_passage_table(simple_walk(), 1, 2)
        assert t.fp[1] == pytest.approx(0.25, abs=1e-15)

    def test_snapshot_examples(self):
        assert killed_snapshot(simple_walk(), 2, 2).mass_at(2) == pytest.approx(0.25, abs=1e-15)
        assert killed_snapshot(simple_walk(), 0, 2).mass_at(0) == pytest.approx(0.25, abs=1e-15)

    def test_unkilled(self):
        u = unkilled_law(simple_walk(), 2)
        assert u.mass_at(0) == pytest.approx(0.5, abs=1e-15)


class TestEvolveOp:
    def test_single_up_step(self):
        law = simple_walk()
        state = KilledLawVector(n=0, barrier_x=0, lo=-8, masses=np.zeros(9),
                                defect=0.0, fp_cum=0.0)
        state.masses[8] = 1.0  # site 0
        new, inc = evolve(state, law)
        assert inc == pytest.approx(0.5, abs=1e-15)
        assert new.n == 1
        assert new.mass_at(-1) == pytest.approx(0.5, abs=1e-15)
        assert new.conservation_residual() <= 1e-14

    def test_three_steps_fp(self):
        law = simple_walk()
        state = KilledLawVector(n=0, barrier_x=0, lo=-8, masses=np.zeros(9),
                                defect=0.0, fp_cum=0.0)
        state.masses[8] = 1.0
        incs = []
        for _ in range(3):
            state, inc = evolve(state, law)
            incs.append(inc)
        assert incs[2] == pytest.approx(1 / 8, abs=1e-15)


class TestConservationAndMonotonicity:
    @pytest.mark.parametrize("law", ORACLE_LAWS[:4], ids=lambda l: l.describe())
    def test_conservation(self, law):
        res = killed_sweep(law, 2, 40, snapshots=(40,))
        vec = res.snapshots[40]
        assert vec.conservation_residual() <= 1e-12
        assert abs(np.sum(res.fp) + res.surv[40] - 1.0) <= 1e-12

    def test_surv_monotone_in_n_and_x(self):
        law = bounded_lazy(0.45)
        tables = {x: first_passage_table(law, x, 64) for x in (0, 1, 2, 5)}
        for x, t in tables.items():
            assert np.all(np.diff(t.surv) <= 1e-15)
        for n in (1, 7, 32, 64):
            vals = [tables[x].surv[n] for x in (0, 1, 2, 5)]
            assert np.all(np.diff(vals) >= -1e-15)

    def test_fp_nonnegative(self):
        law = pareto_lattice(0.8)
        t = first_passage_table(law, 3, 64)
        assert np.all(t.fp >= -1e-16)
        # window mass + far defect must equal survival to the budget
        assert abs((1.0 - np.sum(t.fp)) - t.surv[64]) <= 1e-12


class TestHeavyTailEngine:
    def test_conservation_with_far_field(self):
        law = pareto_lattice(0.8)
        res = killed_sweep(law, 5, 60, snapshots=(60,))
        vec = res.snapshots[60]
        # defect holds the far mass; conservation must close to 1e-12
        assert vec.conservation_residual() <= 1e-12
        assert vec.defect > 0

    def test_far_field_matches_plain_big_window(self):
        # medium case: a plain window so large that truncation is negligible,
        # against the default policy window at its stated 1e-9 site budget
        law = pareto_lattice(0.8)
        x, N = 4, 30
        spec_big = WindowSpec(lo=-500_000, hi=x)
        big = killed_sweep(law, x, N, spec=spec_big, snapshots=(N,))
        small = killed_sweep(law, x, N, snapshots=(N,))
        vb, vs = big.snapshots[N], small.snapshots[N]
        for j in range(-40, x + 1):
            assert vs.mass_at(j) == pytest.approx(vb.mass_at(j), abs=1e-9)

    def test_fp_budget_controls_fp_error(self):
        law = pareto_lattice(0.8)
        x, N = 4, 30
        spec_big = WindowSpec(lo=-500_000, hi=x)
        big = killed_sweep(law, x, N, spec=spec_big)
        small = killed_sweep(law, x, N, fp_abs_err=1e-9)
        np.testing.assert_allclose(small.fp, big.fp, atol=1e-9)

    def test_tight_budget_tightens_the_answer(self):
        law = pareto_lattice(0.8)
        x, N = 4, 30
        spec_big = WindowSpec(lo=-500_000, hi=x)
        big = killed_sweep(law, x, N, spec=spec_big, snapshots=(N,))
        tight = killed_sweep(law, x, N, site_abs_err=1e-12, snapshots=(N,))
        vb, vt = big.snapshots[N], tight.snapshots[N]
        for j in range(-40, x + 1):
            assert vt.mass_at(j) == pytest.approx(vb.mass_at(j), abs=1e-12)

    def test_first_passage_pareto_first_step(self):
        law = pareto_lattice(0.8)
        t = first_passage_table(law, 0, 1)
        assert t.fp[0] == pytest.approx(law.tail(0), abs=1e-15)

    def test_unkilled_rho_symmetric(self):
        law = pareto_lattice(0.8)
        for n in (1, 5, 25, 100, 200):
            u = unkilled_law(law, n)
            assert u.rho_n == pytest.approx((1.0 - u.mass_at(0)) / 2.0, abs=1e-12)

    def test_unkilled_rho_first_step(self):
        u = unkilled_law(bounded_lazy(0.45), 1)
        assert u.rho_n == pytest.approx(0.45, abs=1e-15)

    def test_unkilled_matches_wide_convolution_n2(self):
        # n = 2 has the closed answer conv(pmf, pmf); evaluate it on a window
        # so wide that the leftover tail contribution is provably under 1e-12
        from scipy.signal import fftconvolve
        law = pareto_lattice(0.8)
        u = unkilled_law(law, 2)
        K = 2_000_000
        pm = law.pmf_array(np.arange(-K, K + 1))
        conv = fftconvolve(pm, pm)
        for j in (-3, -1, 0, 1, 3):
            assert u.mass_at(j) == pytest.approx(conv[2 * K + j], abs=1e-9)


class TestMirrorAndStayPositive:
    def test_mirrored_sweep_is_stay_positive(self):
        # g(m, u) for the simple walk from a mirrored barrier sweep
        law = simple_walk()
        res = killed_sweep(mirror(law), -1, 6, first_step_init=True,
                           collect_rows=(-6, -1))
        # g(1,1) = 1/2, g(2,2) = 1/4, g(3,1) = 1/8
        def g(m, u):
            return res.rows[m][-u - res.rows_lo]
        assert g(1, 1) == pytest.approx(0.5, abs=1e-15)
        assert g(2, 2) == pytest.approx(0.25, abs=1e-15)
        assert g(3, 1) == pytest.approx(0.125, abs=1e-15)

    def test_window_overflow(self):
        law = pareto_lattice(0.8)
        with pytest.raises(WindowOverflow):
            suggest_window(law, 0, 100, site_abs_err=1e-9, mem_cap=5 * 10**4)


class TestDeterminism:
    def test_bit_identical_reruns(self):
        law = pareto_lattice(0.8)
        a = killed_sweep(law, 3, 40, snapshots=(40,))
        b = killed_sweep(law, 3, 40, snapshots=(40,))
        assert np.array_equal(a.snapshots[40].masses, b.snapshots[40].masses)
        assert np.array_equal(a.fp, b.fp)
