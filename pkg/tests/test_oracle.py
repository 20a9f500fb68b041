import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import multiwave.multipoint as mp
import multiwave.operators as ops
from multiwave.data import ensemble, random_problem, single_mode, singular_instance
from multiwave.errors import GridError, SingularModeError, StabilityError
from multiwave.multipoint import LinearProblem, MultipointSpec, energy, solve_linear
from multiwave.operators import build_operator
from multiwave.oracle import compare, rk4_integrate, shooting_multipoint, stable_step
from multiwave.spectral import Field, GridSpec, SpectralTrajectory, fft_values, ifft_values


def mode_problem(a=11.0, mode=(3, 4), horizon=1.0):
    g = GridSpec.cube(2, 16)
    return LinearProblem(g, build_operator([[a]]), single_mode(g, 1, mode), Field.zeros(g, 1), horizon)


def rel(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)


class TestRK4:
    def test_zero(self):
        g = GridSpec.cube(2, 8)
        prob = LinearProblem(g, build_operator([[1.0]]), Field.zeros(g, 1), Field.zeros(g, 1), 1.0)
        traj = rk4_integrate(prob, prob.phi, prob.psi, 0.05)
        assert not np.any(traj.u_hat) and not np.any(traj.ut_hat)

    def test_fourth_order(self):
        prob = mode_problem()
        w = np.sqrt(11.0 + 25.0)
        errs = []
        dts = (4e-3, 2e-3, 1e-3)
        for dt in dts:
            traj = rk4_integrate(prob, prob.phi, prob.psi, dt, save_every=round(0.2 / dt))
            exact = np.cos(w * traj.times)[:, None, None, None] * prob.phi.values
            errs.append(np.abs(traj.physical() - exact).max())
        order = np.polyfit(np.log(dts), np.log(errs), 1)[0]
        assert order == pytest.approx(4.0, abs=0.2)

    def test_energy_drift(self):
        (prob, _), = ensemble(21, 1, GridSpec.cube(2, 32, 16.0), source=False)
        traj = rk4_integrate(prob, prob.phi, prob.psi, 1e-3, save_every=50)
        e = energy(traj, prob.operator)
        assert np.abs(e - e[0]).max() <= 1e-8 * e[0]

    def test_stability_bound_reported(self):
        prob = mode_problem()
        bound = stable_step(prob)
        with pytest.raises(StabilityError, match=f"{bound:.6g}"):
            rk4_integrate(prob, prob.phi, prob.psi, 2 * bound)

    def test_step_must_divide_horizon(self):
        prob = mode_problem()
        with pytest.raises(GridError):
            rk4_integrate(prob, prob.phi, prob.psi, 0.003)


class TestShooting:
    def test_cauchy_identity(self):
        (prob, _), = ensemble(2, 1, GridSpec.cube(2, 16, 16.0), source=False)
        res = shooting_multipoint(prob, MultipointSpec.cauchy())
        # identity map; only the FFT round trip separates the two
        assert rel(res.u0.values, prob.phi.values) <= 1e-14
        assert rel(res.u1.values, prob.psi.values) <= 1e-14

    def test_scalar_worked_instance(self):
        prob = mode_problem(a=3.0, mode=(1, 2))
        spec = MultipointSpec([0.25], [0.25], [0.6])
        _, rep = solve_linear(prob, spec, 4)
        res = shooting_multipoint(prob, spec, dt=1e-3)
        assert rel(fft_values(res.u0.values, prob.grid.n), rep.u0_hat) <= 1e-8

    def test_singular_flagged_by_both(self):
        prob, spec = singular_instance()
        with pytest.raises(SingularModeError) as analytic:
            solve_linear(prob, spec, 4)
        with pytest.raises(SingularModeError) as shot:
            shooting_multipoint(prob, spec, dt=1e-3)
        assert analytic.value.modes == shot.value.modes == [(0, 0)]

    def test_independent_of_analytic_formulas(self, monkeypatch):
        def boom(*a, **k):
            raise AssertionError("analytic formula used")

        for mod, name in ((ops, "cosine_at"), (ops, "sine_at"), (mp, "cosine_at"), (mp, "sine_at"),
                          (mp, "mode_determinant"), (mp, "assemble_mode_system")):
            monkeypatch.setattr(mod, name, boom)
        (prob, spec), = ensemble(8, 1, GridSpec.cube(1, 16, 16.0))
        shooting_multipoint(prob, spec)

    @settings(max_examples=12)
    @given(st.integers(0, 2**31), st.sampled_from([1, 2]))
    def test_agreement(self, seed, n):
        grid = GridSpec.cube(n, 32 if n == 2 else 64, 16.0)
        (prob, spec), = ensemble(seed, 1, grid)
        try:
            _, rep = solve_linear(prob, spec, 4)
        except SingularModeError:
            return
        res = shooting_multipoint(prob, spec)
        assert rel(fft_values(res.u0.values, grid.n), rep.u0_hat) <= 1e-8
        assert rel(fft_values(res.u1.values, grid.n), rep.u1_hat) <= 1e-8


class TestCompare:
    def traj(self):
        (prob, spec), = ensemble(4, 1, GridSpec.cube(2, 16, 16.0))
        return prob, spec, solve_linear(prob, spec, 20)[0]

    def test_identical(self):
        _, _, t = self.traj()
        assert all(v == 0 for v in compare(t, t).values())

    def test_injected_perturbation(self):
        _, _, t = self.traj()
        u = t.physical()
        bump = np.zeros_like(u)
        bump[5, 3, 4, 0] = 1e-5
        other = SpectralTrajectory(t.grid, t.times, fft_values(u + bump, t.grid.n), t.ut_hat)
        assert compare(t, other)["sup"] == pytest.approx(1e-5, rel=1e-6)

    def test_axis_mismatch(self):
        prob, spec, t = self.traj()
        s, _ = solve_linear(prob, spec, 10)
        with pytest.raises(GridError):
            compare(t, s)

    @pytest.mark.parametrize("source", [False, True])
    def test_spectral_vs_rk4(self, source):
        g = GridSpec.cube(2, 16, 16.0)
        errs = []
        for k in (64, 128, 256):
            # RK4 steps land on the source samples so the forcing kinks do not cost order
            prob, spec = random_problem(g, np.random.default_rng(4), hdim=2, m=2, source=source,
                                        source_steps=k)
            _, rep = solve_linear(prob, spec, 4)
            u0 = Field(g, ifft_values(rep.u0_hat, g.n))
            u1 = Field(g, ifft_values(rep.u1_hat, g.n))
            rk = rk4_integrate(prob, u0, u1, 1 / k, save_every=k // 8)
            ana, _ = solve_linear(prob, spec, rk.times)
            errs.append(compare(ana, rk)["sup_rel"])
        C = errs[0] * 64**4
        assert errs[-1] <= max(1e-8, 1.5 * C / 256**4)
        assert np.log2(errs[0] / errs[1]) == pytest.approx(4, abs=0.3)
