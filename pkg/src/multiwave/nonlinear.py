"""Picard iteration for the semilinear multipoint problem.

    u_tt - Delta u + A u = F(u),   F(u) = lam |u|^{k-1} u   (or lam ||u||_H^{k-1} u)

with the multipoint conditions of :mod:`multiwave.multipoint`.  One Picard
step is a full linear multipoint solve with source ``F(u)``.  Iterates are
measured in the V-norm ``||A u||_{L^q_t L^r_x}``, and the time window is picked
from the ball radius ``M`` so that ``T^{1/p} M^{k-1} <= 1/2``.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace
from fractions import Fraction
from math import inf

import numpy as np

from .errors import (
    DivergenceError,
    ExponentError,
    MultipointConditionError,
    NonConvergenceError,
    WindowCollapseError,
)
from .multipoint import (
    LinearProblem,
    MultipointSpec,
    SolveReport,
    SourceSamples,
    solve_linear,
)
from .spectral import Field, SpectralTrajectory, mixed_norm
from .strichartz import classify_pair, dual, recip, sharp_pair_for_gap

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Nonlinearity:
    kind: str = "scalar_power"
    coupling: float = 1.0
    k: float = 3.0

    def __post_init__(self):
        if self.kind not in ("scalar_power", "fiber_norm_power"):
            raise ValueError(f"unknown nonlinearity kind {self.kind!r}")
        if not self.k > 1:
            raise ValueError("power exponent k must exceed 1")


def eval_nonlinearity_values(nl: Nonlinearity, u: np.ndarray) -> np.ndarray:
    """Pointwise ``F(u)`` on arrays whose last axis is the fiber."""
    if nl.coupling == 0:
        return np.zeros_like(u)
    if nl.kind == "scalar_power":
        if u.shape[-1] != 1:
            raise ValueError("scalar_power nonlinearity needs hdim = 1")
        mag = np.abs(u)
    else:
        mag = np.linalg.norm(u, axis=-1, keepdims=True)
    return nl.coupling * mag ** (nl.k - 1) * u


def eval_nonlinearity(nl: Nonlinearity, u: Field) -> Field:
    return Field(u.grid, eval_nonlinearity_values(nl, u.values))


def theorem5_constants(n: int) -> dict:
    """Exponents of the local existence result as exact rationals.

    ``gamma = (n-3)/(2(n-1))``, ``k0 = (n+1)^2/((n-1)^2+4)``,
    ``q0 = 2(n+1)/(n-3)``, ``r0 = 2(n^2-1)/((n^2-1)+4)``, reported verbatim.
    ``r0`` is below 2 for every ``n >= 4``, so ``(q0, r0)`` is never
    admissible; the entry ``r0_admissible`` records that verdict and
    ``sharp_pair`` gives the sharp admissible pair matching ``gamma``.
    """
    if int(n) != n or n < 4:
        raise ExponentError(f"the existence result needs n >= 4, got {n}")
    n = int(n)
    gamma = Fraction(n - 3, 2 * (n - 1))
    k0 = Fraction((n + 1) ** 2, (n - 1) ** 2 + 4)
    q0 = Fraction(2 * (n + 1), n - 3)
    r0 = Fraction(2 * (n * n - 1), (n * n - 1) + 4)
    verdict = classify_pair(n, q0, r0)
    return {
        "n": n,
        "gamma": gamma,
        "k0": k0,
        "q0": q0,
        "r0": r0,
        "r0_admissible": verdict.admissible,
        "r0_below_2": r0 < 2,
        "sharp_pair": sharp_pair_for_gap(n, gamma),
    }


def holder_exponent(q, q_tilde, k) -> float | None:
    """``p`` with ``1/q~' = 1/q + (k-1)/q + 1/p``, or ``None`` if no ``p >= 1`` exists."""
    inv_p = recip(dual(q_tilde)) - Fraction(k).limit_denominator(10**6) * recip(q)
    if 0 < inv_p <= 1:
        return float(1 / inv_p)
    return None


def select_window(M: float, k: float, p: float, horizon: float = 1.0, *, target: float = 0.5) -> float:
    """Largest ``T = horizon / 2^j`` with ``T^{1/p} M^{k-1} <= target``.

    For ``M <= 1`` the product is not binding and the full horizon is used.
    """
    if M <= 0 or p < 1 or k <= 1:
        raise ValueError("select_window needs M > 0, p >= 1, k > 1")
    if M <= 1:
        return float(horizon)
    limit = (target / M ** (k - 1)) ** p
    T = float(horizon)
    while T > limit * (1 + 1e-12):
        T /= 2
        if T < 1e-300:
            break
    if T < 1e-6:
        warnings.warn(f"contraction window {T:.3e} is below 1e-6", RuntimeWarning, stacklevel=2)
    return T


@dataclass
class PicardConfig:
    """Picard iteration settings.

    ``q, r`` are the V-norm exponents (default: the sharp pair of the gap
    relation with ``gamma = 0``, i.e. ``(inf, 2)``).  ``p`` is the auxiliary
    exponent of the window rule; when ``None`` it is derived from
    ``q_tilde`` if possible, otherwise ``window`` (or the horizon) is used.
    ``start`` picks the first iterate: ``S(0)`` ("linear") or zero.
    """

    max_iter: int = 50
    tol: float = 1e-10
    contraction_target: float = 0.5
    M: float | None = None
    p: float | None = None
    q: float = inf
    r: float = 2.0
    q_tilde: float | None = None
    dt: float = 1 / 64
    window: float | None = None
    min_window: float = 1e-6
    guard: float = 2.0
    start: str = "linear"

    def __post_init__(self):
        if self.start not in ("linear", "zero"):
            raise ValueError(f"start must be 'linear' or 'zero', got {self.start!r}")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.M is not None and not self.M > 0:
            raise ValueError("ball radius M must be positive")
        if self.p is not None and self.p < 1:
            raise ValueError("Hölder exponent p must be >= 1")

    def resolved_p(self, k: float) -> float | None:
        if self.p is not None:
            return self.p
        if self.q_tilde is not None:
            return holder_exponent(self.q, self.q_tilde, k)
        return None


@dataclass
class ConvergenceReport:
    iterates: int = 0
    differences: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    norms: list = field(default_factory=list)
    window: float = 0.0
    M: float = 0.0
    converged: bool = False
    linear: SolveReport | None = None

    def rows(self):
        for i, d in enumerate(self.differences):
            yield {
                "iteration": i + 1,
                "difference": d,
                "ratio": self.ratios[i - 1] if i >= 1 else float("nan"),
                "norm": self.norms[i],
            }


def v_norm(traj: SpectralTrajectory, op_matrix, config: PicardConfig) -> float:
    return mixed_norm(traj.with_fiber_map(op_matrix), config.q, config.r)


def _window_grid(T: float, dt: float) -> np.ndarray:
    steps = max(2, int(round(T / dt)))
    return np.linspace(0.0, T, steps + 1)


def _external_on(problem: LinearProblem, times: np.ndarray) -> np.ndarray | None:
    src = problem.source
    if src is None:
        return None
    h = src.times[1] - src.times[0]
    out = np.empty((len(times),) + src.values.shape[1:], dtype=complex)
    for i, t in enumerate(times):
        x = t / h
        j = min(int(np.floor(x + 1e-9)), len(src.times) - 2)
        th = min(max(x - j, 0.0), 1.0)
        out[i] = (1 - th) * src.values[j] + th * src.values[j + 1]
    return out


def picard_map(u: SpectralTrajectory, problem: LinearProblem, spec: MultipointSpec, nl: Nonlinearity,
               **solve_kw) -> SpectralTrajectory:
    """``S(u)``: the linear multipoint solution with source ``F_ext + F(u)`` on ``u``'s time grid."""
    traj, _ = _picard_step(u, problem, spec, nl, **solve_kw)
    return traj


def _picard_step(u, problem, spec, nl, **solve_kw):
    times = u.times
    values = eval_nonlinearity_values(nl, u.physical("u"))
    ext = _external_on(problem, times)
    if ext is not None:
        values = values + ext
    window_problem = replace(problem, horizon=float(times[-1]), source=SourceSamples(times, values))
    return solve_linear(window_problem, spec, times, **solve_kw)


def _initial(problem, spec, times, **solve_kw):
    ext = _external_on(problem, times)
    src = None if ext is None else SourceSamples(times, ext)
    return solve_linear(replace(problem, horizon=float(times[-1]), source=src), spec, times, **solve_kw)


def solve_nonlinear(problem: LinearProblem, spec: MultipointSpec, nl: Nonlinearity,
                    config: PicardConfig | None = None, **solve_kw):
    """Fixed point ``u = S(u)`` on the first contraction window.

    Starts from ``S(0)``, iterates until the V-norm difference of successive
    iterates is ``<= config.tol``.  Returns ``(trajectory, ConvergenceReport)``.
    """
    config = config or PicardConfig()
    A = problem.operator.matrix
    horizon = problem.horizon
    s0_full, _ = _initial(problem, spec, _window_grid(horizon, config.dt), **solve_kw)
    M = config.M if config.M is not None else max(2 * v_norm(s0_full, A, config), 1e-300)
    p = config.resolved_p(nl.k)
    if config.window is not None:
        T = min(config.window, horizon)
    elif nl.coupling == 0 or p is None:
        T = horizon
    else:
        T = select_window(M, nl.k, p, horizon, target=config.contraction_target)
    if T < config.min_window:
        raise WindowCollapseError(f"contraction window {T:.3e} below {config.min_window:g}")
    if spec.m and spec.max_lambda > T * (1 + 1e-12):
        raise MultipointConditionError(
            f"multipoint time {spec.max_lambda} lies beyond the first window T = {T:.6g}"
        )
    times = _window_grid(T, config.dt)
    u, lin = _initial(problem, spec, times, **solve_kw) if T != horizon else (s0_full, None)
    if lin is None:
        _, lin = _initial(problem, spec, times, **solve_kw)
    if config.start == "zero":
        u = SpectralTrajectory(u.grid, times, np.zeros_like(u.u_hat), np.zeros_like(u.ut_hat))
    report = ConvergenceReport(window=T, M=M, linear=lin)
    prev_diff = None
    for it in range(config.max_iter):
        new, lin = _picard_step(u, problem, spec, nl, **solve_kw)
        diff = v_norm(SpectralTrajectory(u.grid, times, new.u_hat - u.u_hat, new.ut_hat - u.ut_hat), A, config)
        norm = v_norm(new, A, config)
        report.iterates = it + 1
        report.differences.append(diff)
        report.norms.append(norm)
        report.linear = lin
        if prev_diff is not None:
            report.ratios.append(diff / prev_diff if prev_diff > 0 else 0.0)
        log.debug("picard %d: diff %.3e norm %.3e", it + 1, diff, norm)
        u = new
        if norm > config.guard * M:
            raise DivergenceError(
                f"iterate left the ball: ||u||_V = {norm:.3e} > {config.guard:g} M = {config.guard * M:.3e}",
                report,
            )
        if diff <= config.tol:
            report.converged = True
            return u, report
        prev_diff = diff
    raise NonConvergenceError(
        f"no convergence in {config.max_iter} iterations (last difference {report.differences[-1]:.3e})",
        report,
    )


def _concat(parts: list) -> SpectralTrajectory:
    first = parts[0]
    times = [first.times]
    u = [first.u_hat]
    ut = [first.ut_hat]
    offset = first.times[-1]
    for part in parts[1:]:
        times.append(part.times[1:] + offset)
        u.append(part.u_hat[1:])
        ut.append(part.ut_hat[1:])
        offset += part.times[-1]
    return SpectralTrajectory(first.grid, np.concatenate(times), np.concatenate(u), np.concatenate(ut))


def _shift_source(problem: LinearProblem, t0: float) -> SourceSamples | None:
    src = problem.source
    if src is None:
        return None
    keep = src.times >= t0 - 1e-12
    h = src.times[1] - src.times[0]
    start = int(round(t0 / h))
    if abs(start * h - t0) > 1e-9 * h:
        raise ValueError("window boundaries must fall on the source time grid")
    return SourceSamples(src.times[keep] - src.times[start], src.values[keep])


def continue_solution(problem: LinearProblem, spec: MultipointSpec, nl: Nonlinearity,
                      config: PicardConfig | None, T_star: float, **solve_kw):
    """Chain contraction windows to cover ``[0, T_star]``.

    The multipoint conditions act on the first window only; later windows are
    Cauchy problems started from the end state of the previous one, with the
    window re-selected from the running ball radius.  Window lengths are
    rounded down to multiples of ``config.dt`` so the combined time grid stays
    uniform.  Returns ``(trajectory, reports)``; a window below
    ``config.min_window`` raises :class:`WindowCollapseError` carrying the
    partial trajectory.
    """
    config = config or PicardConfig()
    parts, reports = [], []
    t_cur = 0.0
    cur_problem = replace(problem, horizon=T_star)
    cur_spec = spec
    while t_cur < T_star * (1 - 1e-12):
        remaining = T_star - t_cur
        cur_problem = replace(cur_problem, horizon=remaining)
        try:
            window_cfg = config
            traj, rep = _solve_window(cur_problem, cur_spec, nl, window_cfg, **solve_kw)
        except WindowCollapseError as err:
            err.partial = _concat(parts) if parts else None
            raise
        parts.append(traj)
        reports.append(rep)
        t_cur += traj.times[-1]
        if t_cur >= T_star * (1 - 1e-12):
            break
        grid = problem.grid
        phi = Field(grid, traj.physical("u")[-1])
        psi = Field(grid, traj.physical("ut")[-1])
        cur_problem = LinearProblem(grid, problem.operator, phi, psi, T_star - t_cur,
                                    _shift_source(problem, t_cur))
        cur_spec = MultipointSpec.cauchy()
    return _concat(parts), reports


def _solve_window(problem, spec, nl, config, **solve_kw):
    dt = config.dt
    if config.window is not None:
        win = min(config.window, problem.horizon)
        n = max(1, int(np.floor(win / dt + 1e-9)))
        cfg = replace(config, window=n * dt if n * dt < problem.horizon * (1 - 1e-12) else problem.horizon)
        return solve_nonlinear(problem, spec, nl, cfg, **solve_kw)
    A = problem.operator.matrix
    s0, _ = _initial(problem, spec, _window_grid(problem.horizon, dt), **solve_kw)
    M = config.M if config.M is not None else max(2 * v_norm(s0, A, config), 1e-300)
    p = config.resolved_p(nl.k)
    if nl.coupling == 0 or p is None:
        T = problem.horizon
    else:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            T = select_window(M, nl.k, p, problem.horizon, target=config.contraction_target)
    if T < config.min_window:
        raise WindowCollapseError(f"contraction window {T:.3e} below {config.min_window:g} (M = {M:.3e})")
    if T < problem.horizon * (1 - 1e-12):
        n = int(np.floor(T / dt + 1e-9))
        if n < 1:
            raise WindowCollapseError(f"contraction window {T:.3e} is shorter than the time step {dt:g}")
        T = n * dt
    return solve_nonlinear(problem, spec, nl, replace(config, window=T, M=M), **solve_kw)
