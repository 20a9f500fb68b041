import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from multiwave.data import ensemble, gaussian_bumps, single_mode, singular_instance
from multiwave.errors import GridError, MultipointConditionError, SingularModeError
from multiwave.multipoint import (
    LinearProblem,
    ModalData,
    MultipointSpec,
    SourceSamples,
    assemble_mode_system,
    assemble_rhs,
    duhamel_integral,
    energy,
    modal_propagate,
    mode_determinant,
    propagate,
    solve_initial_pair,
    solve_linear,
    verify_solution,
)
from multiwave.operators import build_operator, cosine_at, shifted, sine_at
from multiwave.spectral import Field, GridSpec, SpectralTrajectory, fft_values


def spd(seed, d):
    rng = np.random.default_rng(seed)
    B = rng.normal(size=(d, d))
    return build_operator(B @ B.T / d + np.eye(d))


coef = st.floats(-0.6, 0.6)


@st.composite
def specs(draw, max_m=3):
    m = draw(st.integers(1, max_m))
    a = np.array([draw(coef) for _ in range(m)])
    b = np.array([draw(coef) for _ in range(m)])
    lam = np.array(sorted(draw(st.floats(0.05, 1.0)) for _ in range(m)))
    try:
        return MultipointSpec(a, b, lam)
    except MultipointConditionError:
        return MultipointSpec([0.3], [0.2], [0.5])


class TestSpec:
    def test_cauchy_accepted(self):
        s = MultipointSpec([0.0, 0.0], [0.0, 0.0], [0.3, 0.6])
        assert s.is_cauchy and s.m == 2

    def test_pair_sum_rule(self):
        with pytest.raises(MultipointConditionError, match="alpha_1 \\+ beta_1"):
            MultipointSpec([1.0], [-1.0], [0.5])

    def test_product_rule(self):
        with pytest.raises(MultipointConditionError, match="sum"):
            MultipointSpec([1.0, -1.0], [1.0, 1.0], [0.2, 0.4])

    @pytest.mark.parametrize("lam", [[0.0], [-1.0], [np.inf]])
    def test_times_positive(self, lam):
        with pytest.raises(MultipointConditionError):
            MultipointSpec([0.5], [0.5], lam)

    def test_length_mismatch(self):
        with pytest.raises(MultipointConditionError):
            MultipointSpec([0.5, 0.1], [0.5], [0.2])

    def test_complex_coefficients(self):
        s = MultipointSpec([0.2 + 0.1j], [0.1 - 0.3j], [0.4])
        assert s.alphas.dtype == complex


class TestModeSystem:
    def test_cauchy_blocks(self):
        sys = assemble_mode_system(MultipointSpec.cauchy(), shifted(spd(1, 3), 2.0))
        assert np.array_equal(sys.a11, np.eye(3)) and np.array_equal(sys.a22, np.eye(3))
        assert not np.any(sys.a12) and not np.any(sys.a21)
        assert np.array_equal(mode_determinant(sys), np.eye(3))

    def test_scalar_a11(self):
        sh = shifted(build_operator([[2.0]]), 7.0)
        sys = assemble_mode_system(MultipointSpec([0.3], [0.1], [0.8]), sh)
        assert sys.a11[0, 0] == pytest.approx(1 - 0.3 * np.cos(3.0 * 0.8), abs=1e-15)

    def test_two_point_symbolic(self):
        w, t1, t2 = sp.symbols("w t1 t2", positive=True)
        a1, a2, b1, b2 = sp.Rational(1, 3), sp.Rational(-1, 5), sp.Rational(2, 7), sp.Rational(1, 4)
        C = lambda t: sp.cos(w * t)  # noqa: E731
        S = lambda t: sp.sin(w * t) / w  # noqa: E731
        blocks = [1 - a1 * C(t1) - a2 * C(t2), -(a1 * S(t1) + a2 * S(t2)),
                  w**2 * (b1 * S(t1) + b2 * S(t2)), 1 - b1 * C(t1) - b2 * C(t2)]
        subs = {w: sp.sqrt(5), t1: sp.Rational(3, 10), t2: sp.Rational(9, 10)}
        exact = [complex(sp.N(x.subs(subs), 30)) for x in blocks]
        sys = assemble_mode_system(
            MultipointSpec([1 / 3, -1 / 5], [2 / 7, 1 / 4], [0.3, 0.9]), shifted(build_operator([[2.0]]), 3.0)
        )
        got = [sys.a11[0, 0], sys.a12[0, 0], sys.a21[0, 0], sys.a22[0, 0]]
        assert np.allclose(got, exact, atol=1e-14, rtol=0)

    def test_quarter_determinant(self):
        sh = shifted(build_operator([[1.0]]), 0.0)
        D = mode_determinant(assemble_mode_system(MultipointSpec([0.25], [0.25], [np.pi / 2]), sh))
        assert D[0, 0] == pytest.approx(17 / 16, abs=1e-15)

    def test_singular_determinant(self):
        sh = shifted(build_operator([[1.0]]), 0.0)
        with pytest.raises(SingularModeError):
            mode_determinant(assemble_mode_system(MultipointSpec([1.0], [1.0], [2 * np.pi]), sh))

    @given(st.integers(0, 2**31), st.integers(1, 3), specs(), st.floats(0, 30))
    def test_determinant_closed_form(self, seed, d, spec, shift):
        sh = shifted(spd(seed, d), shift)
        sys = assemble_mode_system(spec, sh)
        D = sys.a11 @ sys.a22 - sys.a12 @ sys.a21
        C = [cosine_at(sh, lam) for lam in spec.lambdas]
        S = [sine_at(sh, lam) for lam in spec.lambdas]
        ref = np.eye(d, dtype=complex)
        for k in range(spec.m):
            ref -= (spec.alphas[k] + spec.betas[k]) * C[k]
            for j in range(spec.m):
                ref += spec.alphas[k] * spec.betas[j] * (C[k] @ C[j] + sh.matrix @ S[k] @ S[j])
        assert np.linalg.norm(D - ref) <= 1e-12 * max(1.0, np.linalg.norm(ref))

    @given(st.integers(0, 2**31), st.integers(1, 3), specs(), st.floats(0, 30))
    def test_block_cramer(self, seed, d, spec, shift):
        rng = np.random.default_rng(seed)
        sh = shifted(spd(seed, d), shift)
        f1 = rng.normal(size=d) + 1j * rng.normal(size=d)
        f2 = rng.normal(size=d) + 1j * rng.normal(size=d)
        sys = assemble_mode_system(spec, sh).with_rhs(f1, f2)
        try:
            u0, u1 = solve_initial_pair(sys)
        except SingularModeError:
            return
        r1 = sys.a11 @ u0 + sys.a12 @ u1 - f1
        r2 = sys.a21 @ u0 + sys.a22 @ u1 - f2
        scale = np.linalg.norm(f1) + np.linalg.norm(f2)
        cond = np.linalg.cond(sys.block_matrix())
        assert np.linalg.norm(r1) + np.linalg.norm(r2) <= 1e-11 * scale * max(1.0, cond / 100)


class TestDuhamel:
    def test_zero_source(self):
        sh = shifted(build_operator([[1.0]]), 0.0)
        t = np.linspace(0, 1, 11)
        assert duhamel_integral(sh, np.zeros((11, 1)), 0.7, t) == pytest.approx(0)

    def test_empty_interval(self):
        sh = shifted(build_operator([[1.0]]), 0.0)
        t = np.linspace(0, 1, 11)
        assert abs(duhamel_integral(sh, np.ones((11, 1)), 0.0, t)[0]) == 0

    def test_constant_source_order(self):
        sh = shifted(build_operator([[1.0]]), 0.0)
        errs = []
        for n in (8, 16, 32):
            t = np.linspace(0, 2, n + 1)
            val = duhamel_integral(sh, np.ones((n + 1, 1)), 1.7, t)[0]
            errs.append(abs(val - (1 - np.cos(1.7))))
        assert errs[-1] < 1e-8
        assert np.log2(errs[0] / errs[1]) == pytest.approx(4, abs=0.3)

    def test_outside_range(self):
        sh = shifted(build_operator([[1.0]]), 0.0)
        t = np.linspace(0, 1, 11)
        with pytest.raises(ValueError, match="outside"):
            duhamel_integral(sh, np.ones((11, 1)), 1.5, t)


class TestRhs:
    def test_homogeneous(self):
        sh = shifted(spd(0, 2), 1.0)
        spec = MultipointSpec([0.2], [0.3], [0.5])
        f1, f2 = assemble_rhs(spec, sh, None, [1, 2], [3, 4])
        assert np.array_equal(f1, [1, 2]) and np.array_equal(f2, [3, 4])

    def test_empty_sums(self):
        sh = shifted(spd(0, 2), 1.0)
        t = np.linspace(0, 1, 5)
        f1, f2 = assemble_rhs(MultipointSpec.cauchy(), sh, np.ones((5, 2)), [1, 2], [3, 4], t)
        assert np.array_equal(f1, [1, 2]) and np.array_equal(f2, [3, 4])

    def test_constant_source_closed_form(self):
        sh = shifted(build_operator([[1.0]]), 0.0)
        t = np.linspace(0, 1, 201)
        a, b, lam, F = 0.3, 0.2, 0.8, 2.0
        spec = MultipointSpec([a], [b], [lam])
        src = np.full((201, 1), F)
        f1, f2 = assemble_rhs(spec, sh, src, [0.5], [0.1], t)
        assert f1[0] == pytest.approx(a * (1 - np.cos(lam)) * F + 0.5, abs=1e-12)
        assert f2[0] == pytest.approx(b * np.sin(lam) * F + 0.1, abs=1e-12)
        g1, g2 = assemble_rhs(spec, sh, src, [0.5], [0.1], t, g2_sine_kernel=True, g2_half_term=True)
        assert g1[0] == f1[0]
        assert g2[0] == pytest.approx(b * (1 - np.cos(lam)) * F + 0.5 * b * F + 0.1, abs=1e-12)


class TestPerModeSolve:
    def test_cauchy_reduction(self):
        sh = shifted(spd(2, 2), 4.0)
        sys = assemble_mode_system(MultipointSpec.cauchy(), sh).with_rhs([1, 2j], [3, 4])
        u0, u1 = solve_initial_pair(sys)
        assert np.allclose(u0, [1, 2j]) and np.allclose(u1, [3, 4])

    def test_worked_instance(self):
        sh = shifted(build_operator([[1.0]]), 0.0)
        sys = assemble_mode_system(MultipointSpec([0.25], [0.25], [np.pi / 2]), sh).with_rhs([1.0], [0.0])
        u0, u1 = solve_initial_pair(sys)
        assert u0[0] == pytest.approx(16 / 17, abs=1e-14)
        r = sys.block_matrix() @ np.concatenate([u0, u1]) - [1.0, 0.0]
        assert np.abs(r).max() <= 1e-12

    def test_propagate_scalar(self):
        sh = shifted(build_operator([[4.0]]), 0.0)
        u, ut = propagate(sh, [1.0], [0.0], None, [0.0, np.pi / 2])
        assert u[0, 0] == 1 and ut[0, 0] == 0
        assert u[1, 0] == pytest.approx(-1, abs=1e-15) and ut[1, 0] == pytest.approx(0, abs=1e-14)

    def test_mode_energy(self):
        sh = shifted(spd(5, 3), 2.5)
        rng = np.random.default_rng(1)
        u0, u1 = rng.normal(size=3), rng.normal(size=3)
        u, ut = propagate(sh, u0, u1, None, np.linspace(0, 3, 31))
        e = np.sum(np.abs(ut) ** 2, axis=1) + np.real(np.einsum("ti,ij,tj->t", u.conj(), sh.matrix, u))
        assert np.abs(e - e[0]).max() <= 1e-12 * e[0]


def unit_mode_problem(a=3.0, horizon=1.0):
    g = GridSpec.cube(2, 16)
    op = build_operator([[a]])
    return LinearProblem(g, op, single_mode(g, 1, (1, 2)), Field.zeros(g, 1), horizon)


class TestSolveLinear:
    def test_cauchy_single_mode(self):
        prob = unit_mode_problem()
        traj, _ = solve_linear(prob, MultipointSpec.cauchy(), 50)
        w = np.sqrt(3.0 + 5.0)
        exact = np.cos(w * traj.times)[:, None, None, None] * prob.phi.values
        assert np.abs(traj.physical() - exact).max() <= 1e-12

    def test_cauchy_is_the_plain_propagator(self):
        (prob, _), = ensemble(3, 1, GridSpec.cube(2, 32, 16.0), max_m=1)
        traj, _ = solve_linear(prob, MultipointSpec.cauchy(), 16)
        modal = ModalData.from_problem(prob)
        u, _ = modal_propagate(modal.omega, modal.phi, modal.psi, modal.table, traj.times)
        assert np.array_equal(traj.u_hat, prob.operator.from_eigenbasis(u))

    def test_residuals_with_source(self):
        for prob, spec in ensemble(11, 4, GridSpec.cube(2, 32, 16.0)):
            _, rep = solve_linear(prob, spec, 32)
            assert rep.residual_u <= 1e-8 and rep.residual_ut <= 1e-8

    def test_per_mode_route_agrees(self):
        (prob, spec), = ensemble(5, 1, GridSpec.cube(2, 16, 16.0), max_hdim=2, max_m=2)
        traj, rep = solve_linear(prob, spec, 8)
        g = prob.grid
        src_hat = fft_values(prob.source.values, g.n)
        phi_hat = fft_values(prob.phi.values, g.n)
        psi_hat = fft_values(prob.psi.values, g.n)
        for idx in [(0, 0), (1, 3), (15, 2), (8, 8)]:
            sh = shifted(prob.operator, g.xi_squared()[idx])
            f1, f2 = assemble_rhs(spec, sh, src_hat[(slice(None),) + idx], phi_hat[idx], psi_hat[idx],
                                  prob.source.times)
            u0, u1 = solve_initial_pair(assemble_mode_system(spec, sh).with_rhs(f1, f2))
            assert np.allclose(u0, rep.u0_hat[idx], atol=1e-12)
            u, ut = propagate(sh, u0, u1, src_hat[(slice(None),) + idx], traj.times, prob.source.times)
            assert np.allclose(u, traj.u_hat[(slice(None),) + idx], atol=1e-12)
            assert np.allclose(ut, traj.ut_hat[(slice(None),) + idx], atol=1e-12)

    @given(st.integers(0, 2**31), st.floats(-2, 2), st.floats(-2, 2))
    def test_linearity(self, seed, c1, c2):
        g = GridSpec.cube(2, 16, 16.0)
        (p1, spec), (p2, _) = ensemble(seed, 2, g, max_hdim=1)
        p2 = LinearProblem(g, p1.operator, p2.phi, p2.psi, 1.0, p2.source)
        combo = LinearProblem(
            g, p1.operator, Field(g, c1 * p1.phi.values + c2 * p2.phi.values),
            Field(g, c1 * p1.psi.values + c2 * p2.psi.values), 1.0,
            SourceSamples(p1.source.times, c1 * p1.source.values + c2 * p2.source.values),
        )
        t1, _ = solve_linear(p1, spec, 8)
        t2, _ = solve_linear(p2, spec, 8)
        tc, _ = solve_linear(combo, spec, 8)
        ref = c1 * t1.u_hat + c2 * t2.u_hat
        assert np.abs(tc.u_hat - ref).max() <= 1e-11 * max(1.0, np.abs(ref).max())

    def test_energy_conservation(self):
        (prob, spec), = ensemble(9, 1, GridSpec.cube(2, 32, 16.0), source=False)
        traj, _ = solve_linear(prob, spec, 40)
        e = energy(traj, prob.operator)
        assert np.abs(e - e[0]).max() <= 1e-10 * e[0]

    def test_singular_modes_listed(self):
        prob, spec = singular_instance()
        with pytest.raises(SingularModeError) as info:
            solve_linear(prob, spec, 8)
        assert info.value.modes == [(0, 0)]

    def test_lambda_beyond_horizon(self):
        prob = unit_mode_problem(horizon=0.5)
        with pytest.raises(MultipointConditionError):
            solve_linear(prob, MultipointSpec([0.2], [0.2], [0.8]), 8)

    def test_source_must_cover_horizon(self):
        g = GridSpec.cube(1, 8)
        t = np.linspace(0, 0.5, 6)
        prob = LinearProblem(g, build_operator([[1.0]]), Field.zeros(g, 1), Field.zeros(g, 1), 1.0,
                             SourceSamples(t, np.ones((6, 8, 1))))
        with pytest.raises(GridError):
            solve_linear(prob, MultipointSpec.cauchy(), 8)

    def test_sine_kernel_variant_breaks_velocity_condition(self):
        (prob, spec), = ensemble(4, 1, GridSpec.cube(2, 16, 16.0))
        _, good = solve_linear(prob, spec, 16)
        _, alt = solve_linear(prob, spec, 16, g2_sine_kernel=True)
        assert good.residual_ut <= 1e-12 < alt.residual_ut
        assert alt.residual_u <= 1e-12


class TestVerify:
    def test_exact_solution_second_order(self):
        res = []
        for n in (20, 40, 80):
            prob = unit_mode_problem()
            spec = MultipointSpec([0.2], [0.3], [0.5])
            traj, _ = solve_linear(prob, spec, n)
            rep = verify_solution(traj, prob, spec)
            assert rep.residual_u <= 1e-10 and rep.residual_ut <= 1e-10
            res.append(rep.pde_residual)
        assert np.log2(res[0] / res[1]) == pytest.approx(2, abs=0.1)
        assert np.log2(res[1] / res[2]) == pytest.approx(2, abs=0.1)

    def test_zero(self):
        g = GridSpec.cube(2, 8)
        prob = LinearProblem(g, build_operator([[1.0]]), Field.zeros(g, 1), Field.zeros(g, 1), 1.0)
        spec = MultipointSpec([0.2], [0.3], [0.5])
        traj, _ = solve_linear(prob, spec, 10)
        rep = verify_solution(traj, prob, spec)
        assert rep.pde_residual == 0 and rep.residual_u == 0 and rep.residual_ut == 0

    def test_detects_perturbation(self):
        prob = unit_mode_problem()
        spec = MultipointSpec([0.2], [0.3], [0.5])
        traj, _ = solve_linear(prob, spec, 40)
        rng = np.random.default_rng(0)
        noise = 1e-3 * rng.normal(size=traj.u_hat.shape[1:]) * np.abs(traj.u_hat[0]).max()
        bad = SpectralTrajectory(traj.grid, traj.times, traj.u_hat + noise, traj.ut_hat)
        rep = verify_solution(bad, prob, spec)
        assert 1e-4 < rep.residual_u < 1e-2


def test_gaussian_bumps_are_compact():
    g = GridSpec.cube(2, 64, 16.0)
    f = gaussian_bumps(g, 2, np.random.default_rng(0), count=3)
    edge = np.concatenate([f.values[0].ravel(), f.values[:, 0].ravel()])
    assert np.abs(edge).max() < 1e-14 * 3
