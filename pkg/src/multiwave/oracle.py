"""Brute-force reference solvers.

Nothing in this module touches the cosine/sine families or the analytic mode
determinant.  Time evolution is classical RK4 on the first-order system
``(u, v)' = (v, Delta u - A u + F)`` applied to every Fourier mode (same
spatial discretization as the analytic path, different time machinery), and
the multipoint initial pair comes from shooting: propagate basis initial
data to each ``lambda_k``, assemble the resulting linear map numerically and
solve it by LU with partial pivoting.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import inf

import numpy as np

from .errors import GridError, SingularModeError, StabilityError
from .multipoint import LinearProblem, MultipointSpec
from .spectral import Field, SpectralTrajectory, fft_values, ifft_values, mixed_norm_values

SHOOTING_TOL = 1e-8


def stable_step(problem: LinearProblem) -> float:
    """Largest admissible step ``0.5 / sqrt(max eigenvalue of A_xi)``."""
    top = problem.operator.spectral_radius + problem.grid.xi_squared().max()
    return 0.5 / np.sqrt(top)


class _Forcing:
    """Linear interpolation of spectral source samples."""

    def __init__(self, problem: LinearProblem):
        src = problem.source
        if src is None or not np.any(src.values):
            self.hat = None
            return
        self.times = src.times
        self.h = src.times[1] - src.times[0]
        self.hat = fft_values(src.values, problem.grid.n)

    def __call__(self, t: float):
        if self.hat is None:
            return 0.0
        x = t / self.h
        i = min(max(int(np.floor(x + 1e-12)), 0), len(self.times) - 2)
        th = x - i
        return (1 - th) * self.hat[i] + th * self.hat[i + 1]

    def breakpoints(self, t_end: float) -> np.ndarray:
        if self.hat is None:
            return np.zeros(0)
        return self.times[(self.times > 0) & (self.times < t_end)]


def _rk4_step(u, v, t, h, accel):
    k1u, k1v = v, accel(u, t)
    k2u, k2v = v + 0.5 * h * k1v, accel(u + 0.5 * h * k1u, t + 0.5 * h)
    k3u, k3v = v + 0.5 * h * k2v, accel(u + 0.5 * h * k2u, t + 0.5 * h)
    k4u, k4v = v + h * k3v, accel(u + h * k3u, t + h)
    u_new = u + (h / 6.0) * (k1u + 2 * k2u + 2 * k3u + k4u)
    v_new = v + (h / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
    return u_new, v_new


def rk4_integrate(problem: LinearProblem, u0: Field, u1: Field, dt: float, *,
                  save_every: int = 1) -> SpectralTrajectory:
    """Integrate the Cauchy problem over ``[0, T]`` with fixed-step RK4 in every mode."""
    bound = stable_step(problem)
    if dt > bound:
        raise StabilityError(f"dt = {dt:g} exceeds the RK4 stability bound {bound:.6g}")
    steps = problem.horizon / dt
    nsteps = int(round(steps))
    if abs(steps - nsteps) > 1e-9 * max(1.0, steps):
        raise GridError(f"dt = {dt:g} does not divide the horizon {problem.horizon:g}")
    grid = problem.grid
    xi2 = grid.xi_squared()[..., None]
    A_t = problem.operator.matrix.T
    forcing = _Forcing(problem)

    def accel(u, t):
        return -xi2 * u - u @ A_t + forcing(t)

    u = fft_values(u0.values, grid.n)
    v = fft_values(u1.values, grid.n)
    us, vs, ts = [u], [v], [0.0]
    for i in range(nsteps):
        u, v = _rk4_step(u, v, i * dt, dt, accel)
        if (i + 1) % save_every == 0:
            us.append(u)
            vs.append(v)
            ts.append((i + 1) * dt)
    return SpectralTrajectory(grid, np.array(ts), np.stack(us), np.stack(vs))


@dataclass
class ShootingResult:
    u0: Field
    u1: Field
    min_singular_value: float


def shooting_multipoint(problem: LinearProblem, spec: MultipointSpec, dt: float | None = None, *,
                        tol: float = SHOOTING_TOL) -> ShootingResult:
    """Initial pair of the multipoint problem by shooting.

    For every mode the ``2d`` basis initial states are propagated with RK4 to
    each ``lambda_k`` alongside a particular solution carrying the source.
    The assembled ``2d x 2d`` map of the conditions is solved by dense LU.
    A mode whose map has ``sigma_min <= tol * max(1, sigma_max)`` is
    reported as singular and raises :class:`SingularModeError`.
    """
    grid, op = problem.grid, problem.operator
    d = op.hdim
    bound = stable_step(problem)
    if dt is None:
        dt = 0.25 * bound
    if dt > bound:
        raise StabilityError(f"dt = {dt:g} exceeds the RK4 stability bound {bound:.6g}")
    xi2 = grid.xi_squared()[..., None, None]
    A = problem.operator.matrix
    forcing = _Forcing(problem)

    def accel_basis(U, t):
        return -xi2 * U - A @ U

    xi2v = grid.xi_squared()[..., None]

    def accel_part(u, t):
        return -xi2v * u - u @ A.T + forcing(t)

    eye = np.eye(2 * d, dtype=complex)
    U = np.broadcast_to(eye[:d], grid.points + (d, 2 * d)).copy()
    V = np.broadcast_to(eye[d:], grid.points + (d, 2 * d)).copy()
    p = np.zeros(grid.points + (d,), complex)
    pv = np.zeros_like(p)

    phi = fft_values(problem.phi.values, grid.n)
    psi = fft_values(problem.psi.values, grid.n)
    M = np.broadcast_to(eye, grid.points + (2 * d, 2 * d)).copy()
    rhs = np.concatenate([phi, psi], axis=-1)

    t = 0.0
    marks = np.unique(np.concatenate([spec.lambdas, forcing.breakpoints(spec.max_lambda)]))
    targets = {float(lam) for lam in spec.lambdas}
    for stop in marks:
        span = stop - t
        n = max(1, int(np.ceil(span / dt - 1e-9)))
        h = span / n
        for i in range(n):
            U, V = _rk4_step(U, V, t + i * h, h, accel_basis)
            if forcing.hat is not None:
                p, pv = _rk4_step(p, pv, t + i * h, h, accel_part)
        t = float(stop)
        if t in targets:
            for k in np.nonzero(spec.lambdas == t)[0]:
                a, b = spec.alphas[k], spec.betas[k]
                M[..., :d, :] -= a * U
                M[..., d:, :] -= b * V
                rhs[..., :d] += a * p
                rhs[..., d:] += b * pv

    sv = np.linalg.svd(M, compute_uv=False)
    smin, smax = sv[..., -1], sv[..., 0]
    singular = smin <= tol * np.maximum(1.0, smax)
    if np.any(singular):
        modes = [grid.mode_index(tuple(i)) for i in np.argwhere(singular)]
        raise SingularModeError(
            f"shooting map singular at {len(modes)} mode(s), first k = {modes[0]}", modes=modes
        )
    sol = np.linalg.solve(M, rhs[..., None])[..., 0]
    u0 = Field(grid, ifft_values(sol[..., :d], grid.n))
    u1 = Field(grid, ifft_values(sol[..., d:], grid.n))
    return ShootingResult(u0, u1, float(smin.min()))


def compare(a: SpectralTrajectory, b: SpectralTrajectory, norms=((inf, 2), (2, 2))) -> dict:
    """Differences between two trajectories on the same grid and time axis."""
    if a.grid.points != b.grid.points or a.grid.box_length != b.grid.box_length:
        raise GridError("trajectories live on different grids")
    if a.times.shape != b.times.shape or not np.allclose(a.times, b.times, rtol=0, atol=1e-12):
        raise GridError("trajectories have different time axes")
    diff = a.physical("u") - b.physical("u")
    ref = np.abs(a.physical("u")).max()
    out = {
        "sup": float(np.abs(diff).max()),
        "sup_rel": float(np.abs(diff).max() / ref) if ref > 0 else float(np.abs(diff).max()),
        "l2": mixed_norm_values(diff, a.times, a.grid, 2, 2) if len(a.times) > 1 else float(
            np.sqrt(np.sum(np.abs(diff) ** 2) * a.grid.cell_volume)),
    }
    if len(a.times) > 1:
        for q, r in norms:
            out[f"L{q}L{r}"] = mixed_norm_values(diff, a.times, a.grid, q, r)
    return out
