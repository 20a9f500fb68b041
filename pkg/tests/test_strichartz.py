from fractions import Fraction
from itertools import product
from math import inf

import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from multiwave.data import gaussian_bumps, single_mode, zero_mean
from multiwave.errors import ExponentError
from multiwave.multipoint import LinearProblem, MultipointSpec, SourceSamples, solve_linear
from multiwave.operators import build_operator
from multiwave.spectral import Field, GridSpec, SpectralTrajectory, fft_values, mixed_norm
from multiwave.strichartz import (
    GapRelation,
    beta_exponent,
    bilinear_form,
    classify_pair,
    default_pair_set,
    dispersive_ratio,
    endpoint_pair,
    fit_decay,
    gap_check,
    sharp_pair_for_gap,
    strichartz_norm,
    strichartz_report,
)

F = Fraction
GRID_VALUES = [F(2), F(5, 2), F(3), F(4), F(6), F(8), inf]


def sympy_verdict(n, q, r):
    """Admissibility written out in sympy's extended rationals."""
    sq = sp.oo if q == inf else sp.Rational(q.numerator, q.denominator)
    sr = sp.oo if r == inf else sp.Rational(r.numerator, r.denominator)
    lhs = (0 if sq == sp.oo else 1 / sq) + sp.Rational(n - 1, 2) * (0 if sr == sp.oo else 1 / sr)
    rhs = sp.Rational(n - 1, 4)
    ok = bool(lhs <= rhs) and sq >= 2 and sr >= 2 and not (n == 2 and sq == 2 and sr == sp.oo)
    return ok, ok and bool(sp.Eq(lhs, rhs))


class TestClassify:
    def test_excluded_triple(self):
        v = classify_pair(2, 2, inf)
        assert not v.admissible and v.excluded_triple

    def test_four_dim_endpoint(self):
        v = classify_pair(4, 2, 6)
        assert v.admissible and v.sharp and v.endpoint

    def test_three_dim_sharp(self):
        v = classify_pair(3, 4, 4)
        assert v.admissible and v.sharp and not v.endpoint

    def test_small_dimension_rejected(self):
        with pytest.raises(ExponentError):
            classify_pair(1, 2, 2)

    def test_below_two_not_admissible(self):
        assert not classify_pair(4, F(3, 2), 2).admissible

    def test_scan_matches_independent_evaluator(self):
        count = 0
        for n, q, r in product(range(2, 7), GRID_VALUES, GRID_VALUES):
            v = classify_pair(n, q, r)
            assert (v.admissible, v.sharp) == sympy_verdict(n, q, r), (n, q, r)
            assert (not v.endpoint or v.sharp) and (not v.sharp or v.admissible)
            count += 1
        assert count == 5 * 49

    @pytest.mark.parametrize("n", range(4, 9))
    def test_endpoint_membership(self, n):
        q, r = endpoint_pair(n)
        v = classify_pair(n, q, r)
        assert v.endpoint and v.sharp and r == F(2 * (n - 1), n - 3)

    @given(st.integers(2, 9), st.fractions(F(1), F(10)), st.fractions(F(1), F(10)))
    def test_flag_chain(self, n, q, r):
        v = classify_pair(n, q, r)
        assert not v.endpoint or v.sharp
        assert not v.sharp or v.admissible
        assert not v.excluded_triple or not v.admissible

    @given(st.integers(2, 9), st.fractions(F(0), F(1, 2)))
    def test_sharp_pair_for_gap(self, n, gamma):
        try:
            q, r = sharp_pair_for_gap(n, gamma)
        except ExponentError:
            return
        assert classify_pair(n, q, r).sharp or (n == 2 and q == 2 and r == inf)
        assert gap_check(n, gamma, q, r, 1, 1).residual_solution == 0

    def test_default_pairs_three_dims(self):
        assert default_pair_set(3) == [(inf, F(2)), (F(4), F(4))]


class TestGap:
    def test_four_dim_counterexample(self):
        g = gap_check(4, F(1, 6), 10, F(30, 11), 1, 2)
        assert not g.valid
        assert g.residual_solution == F(1, 10) + F(22, 15) - (2 - F(1, 6))

    def test_three_dim_energy_pair(self):
        assert gap_check(3, 0, inf, 2, 1, 1).residual_solution == 0

    @given(st.integers(2, 6), st.fractions(F(2), F(20)), st.fractions(F(2), F(20)))
    def test_defining_relation(self, n, q, r):
        gamma = F(n, 2) - 1 / q - n / r
        # choose q~ = 1 and solve for r~
        rt = n / (F(n, 2) - gamma + 2 - 1)
        assert gap_check(n, gamma, q, r, 1, rt).valid

    def test_relation_object(self):
        gap = GapRelation(2, F(3, 8), 8, 4, 1, F(16, 13))
        assert gap.source_exponents == (inf, F(16, 3))
        with pytest.raises(ExponentError):
            GapRelation(2, F(3, 8), 8, 4, 1, 2)
        with pytest.raises(ExponentError):
            GapRelation(2, F(3, 8), 8, 4, 1, F(16, 13), alpha=F(1))


class TestBeta:
    def test_equal_exponents(self):
        assert beta_exponent(4, 3, 3) == 1
        assert beta_exponent(2, 5, 5) == 0

    def test_worked(self):
        assert beta_exponent(3, 2, 6) == 0

    @given(st.integers(2, 8), st.fractions(F(1), F(20)))
    def test_diagonal_is_positive_above_two(self, n, r):
        # recorded contradiction: the diagonal value is n/2 - 1, never negative for n > 2
        assert beta_exponent(n, r, r) == F(n, 2) - 1


def gaussian_on(points, L, seed=0, width=0.8, d=1):
    g = GridSpec.cube(2, points, L)
    return gaussian_bumps(g, d, np.random.default_rng(seed), width=width)


class TestDispersive:
    def test_energy_case(self):
        f = gaussian_on(64, 16.0)
        rep = dispersive_ratio(build_operator([[2.0]]), 0.0, 2, f, np.linspace(0.2, 3.8, 10))
        assert np.all(rep.ratios <= 1 + 1e-10)

    def test_window_bound(self):
        f = gaussian_on(32, 16.0)
        with pytest.raises(ValueError, match="L/4"):
            dispersive_ratio(build_operator([[1.0]]), 0.0, inf, f, [1.0, 4.5])

    def test_decay_exponent(self):
        g = GridSpec.cube(2, 512, 2 * np.pi * 32)
        f = gaussian_bumps(g, 1, np.random.default_rng(1), width=1.0)
        rep = dispersive_ratio(build_operator([[1.0]]), 0.0, inf, f, np.geomspace(5, 45, 10))
        assert rep.fit.exponent == pytest.approx(1.0, rel=0.15)
        assert np.isfinite(rep.ratios).all()

    def test_fit_recovers_power(self):
        t = np.geomspace(1, 10, 9)
        fit = fit_decay(t, 3.0 * t**-1.25)
        assert fit.exponent == pytest.approx(1.25) and fit.prefactor == pytest.approx(3.0)
        assert fit.rms < 1e-12


def one_mode_problem(steps_T=1.0):
    g = GridSpec.cube(2, 8, 2 * np.pi)
    op = build_operator([[np.pi**2 - 1]])
    return LinearProblem(g, op, single_mode(g, 1, (1, 0)), Field.zeros(g, 1), steps_T)


GAP2 = GapRelation(2, F(3, 8), 8, 4, 1, F(16, 13))


class TestStrichartzReport:
    def test_zero_data(self):
        g = GridSpec.cube(2, 8)
        prob = LinearProblem(g, build_operator([[1.0]]), Field.zeros(g, 1), Field.zeros(g, 1), 1.0)
        rep = strichartz_report(prob, MultipointSpec.cauchy(), GAP2)
        assert rep.lhs == rep.rhs == rep.ratio == 0

    def test_single_mode_closed_form(self):
        rep = strichartz_report(one_mode_problem(), MultipointSpec.cauchy(), GAP2, steps=64)
        pi = np.pi
        norm2, norm4 = 2 * pi, (4 * pi**2) ** 0.25
        lhs = (35 / 128) ** (1 / 8) * norm4 + norm2 + pi * norm2
        rhs = (pi**2 - 1) * norm2
        assert rep.terms["strichartz"] == pytest.approx((35 / 128) ** (1 / 8) * norm4, rel=1e-6)
        assert rep.ratio == pytest.approx(lhs / rhs, rel=1e-6)

    def test_mean_rejected(self):
        g = GridSpec.cube(2, 16, 16.0)
        phi = gaussian_bumps(g, 1, np.random.default_rng(0))
        prob = LinearProblem(g, build_operator([[1.0]]), phi, Field.zeros(g, 1), 1.0)
        with pytest.raises(ValueError, match="phi must have zero mean"):
            strichartz_report(prob, MultipointSpec.cauchy(), GAP2)

    def test_inadmissible_rejected(self):
        bad = GapRelation(2, F(3, 8), 8, 4, 1, F(16, 13))
        object.__setattr__(bad, "r", F(3, 2))
        with pytest.raises(ExponentError):
            strichartz_report(one_mode_problem(), MultipointSpec.cauchy(), bad)

    @given(st.floats(0.01, 100))
    def test_scaling_invariance(self, c):
        g = GridSpec.cube(2, 16, 16.0)
        rng = np.random.default_rng(3)
        phi, psi = zero_mean(gaussian_bumps(g, 1, rng)), zero_mean(gaussian_bumps(g, 1, rng))
        t = np.linspace(0, 1, 33)
        src = np.cos(t)[:, None, None, None] * zero_mean(gaussian_bumps(g, 1, rng)).values

        def ratio(s):
            prob = LinearProblem(g, build_operator([[2.0]]), Field(g, s * phi.values), Field(g, s * psi.values),
                                 1.0, SourceSamples(t, s * src))
            return strichartz_report(prob, MultipointSpec([0.2], [0.3], [0.5]), GAP2, steps=16).ratio

        assert ratio(c) == pytest.approx(ratio(1.0), rel=1e-10)


def source_traj(seed, nt=33, points=16):
    g = GridSpec.cube(2, points, 16.0)
    rng = np.random.default_rng(seed)
    t = np.linspace(0, 1, nt)
    bump = gaussian_bumps(g, 1, rng).values
    vals = np.cos(2 * t + rng.uniform(0, 6))[:, None, None, None] * bump
    hat = fft_values(vals, 2)
    return SpectralTrajectory(g, t, hat, np.zeros_like(hat))


class TestBilinear:
    def test_zero(self):
        Fz = source_traj(0)
        Fz = SpectralTrajectory(Fz.grid, Fz.times, 0 * Fz.u_hat, Fz.ut_hat)
        rep = bilinear_form(Fz, source_traj(1), 0.0, build_operator([[1.0]]))
        assert rep.value == 0 and rep.constant == 0

    def test_self_pairing_is_real(self):
        Fs = source_traj(2)
        rep = bilinear_form(Fs, Fs, 0.0, build_operator([[1.5]]))
        assert abs(rep.value.imag) <= 1e-10 * abs(rep.value)

    def test_refinement(self):
        op = build_operator([[1.5]])
        c = [bilinear_form(source_traj(4, nt), source_traj(5, nt), 0.5, op).constant for nt in (33, 65)]
        assert c[1] == pytest.approx(c[0], rel=0.1)

    def test_grid_mismatch(self):
        with pytest.raises(ValueError):
            bilinear_form(source_traj(0), source_traj(0, points=8), 0.0, build_operator([[1.0]]))


class TestStrichartzNorm:
    def traj(self):
        prob = one_mode_problem()
        return solve_linear(prob, MultipointSpec.cauchy(), 32)[0]

    def test_energy_singleton(self):
        t = self.traj()
        assert strichartz_norm(t, [(inf, 2)]) == pytest.approx(2 * np.pi, rel=1e-12)

    def test_monotone_in_pair_set(self):
        t = self.traj()
        assert strichartz_norm(t, [(inf, 2), (8, 4)]) >= strichartz_norm(t, [(inf, 2)])

    def test_default_set(self):
        t = self.traj()
        ref = max(mixed_norm(t, q, r) for q, r in ((inf, 2), (4, inf)))
        assert strichartz_norm(t) == pytest.approx(ref)

    def test_empty_and_inadmissible(self):
        t = self.traj()
        with pytest.raises(ExponentError):
            strichartz_norm(t, [])
        with pytest.raises(ExponentError):
            strichartz_norm(t, [(2, inf)])
