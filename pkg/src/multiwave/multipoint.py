"""Linear wave problems with multipoint-in-time conditions.

Solves

    u_tt - Delta u + A u = F(t, x)
    u(0)   = phi + sum_k alpha_k u(lambda_k)
    u_t(0) = psi + sum_k beta_k  u_t(lambda_k)

mode by mode.  After a spatial Fourier transform every mode obeys
``v'' + A_xi v = F^`` with ``A_xi = A + |xi|^2``; the unknown initial pair
``(u0, u1)`` solves a 2x2 block system whose blocks are all functions of
``A_xi`` and therefore commute, so block Cramer's rule applies.

Two routes are provided.  The per-mode functions (``assemble_mode_system``,
``mode_determinant``, ``solve_initial_pair``, ``propagate``, ...) work with
explicit ``d x d`` matrices for a single frequency.  ``solve_linear`` runs the
same algebra for all modes at once in the eigenbasis of ``A``, where each
block is diagonal.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import GridError, MultipointConditionError, SingularModeError
from .operators import (
    OperatorSpec,
    ShiftedOperator,
    cosine_at,
    modal_frequencies,
    sine_at,
)
from .spectral import (
    Field,
    GridSpec,
    SpectralTrajectory,
    fft_values,
    ifft_values,
)

log = logging.getLogger(__name__)

DEFAULT_CONDITION_CAP = 1e12
_GL = (0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0))


@dataclass(frozen=True, eq=False)
class MultipointSpec:
    """Coefficients ``alpha_k``, ``beta_k`` and interior times ``lambda_k``.

    All-zero coefficients describe the classical Cauchy problem.  Otherwise
    every ``|alpha_k + beta_k|`` and the product ``(sum alpha)(sum beta)``
    must be nonzero.
    """

    alphas: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))
    betas: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))
    lambdas: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.alphas, dtype=complex))
        b = np.atleast_1d(np.asarray(self.betas, dtype=complex))
        lam = np.atleast_1d(np.asarray(self.lambdas, dtype=float))
        if not (a.shape == b.shape == lam.shape) or a.ndim != 1:
            raise MultipointConditionError("alphas, betas and lambdas must have equal length")
        if np.any(~np.isfinite(lam)) or np.any(lam <= 0):
            raise MultipointConditionError("multipoint times lambda_k must be positive")
        object.__setattr__(self, "alphas", a)
        object.__setattr__(self, "betas", b)
        object.__setattr__(self, "lambdas", lam)
        if self.is_cauchy:
            return
        tol = 1e-14
        for k in range(self.m):
            if abs(a[k] + b[k]) <= tol:
                raise MultipointConditionError(
                    f"alpha_{k + 1} + beta_{k + 1} = 0: each pair of coefficients must have nonzero sum"
                )
        if abs(a.sum() * b.sum()) <= tol:
            raise MultipointConditionError(
                "sum(alpha) * sum(beta) = 0: both coefficient sums must be nonzero"
            )

    @property
    def m(self) -> int:
        return len(self.lambdas)

    @property
    def is_cauchy(self) -> bool:
        return not (np.any(self.alphas != 0) or np.any(self.betas != 0))

    @property
    def max_lambda(self) -> float:
        return float(self.lambdas.max()) if self.m else 0.0

    @classmethod
    def cauchy(cls) -> "MultipointSpec":
        return cls()


@dataclass
class SourceSamples:
    """Physical source ``F(t, x)`` on a uniform time grid starting at 0."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape[0] != len(self.times) or len(self.times) < 2:
            raise GridError("source needs at least two time samples matching its values")
        if abs(self.times[0]) > 0:
            raise GridError("source time grid must start at 0")
        steps = np.diff(self.times)
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=0):
            raise GridError("source time grid must be uniform")

    @property
    def t_end(self) -> float:
        return float(self.times[-1])


@dataclass
class LinearProblem:
    grid: GridSpec
    operator: OperatorSpec
    phi: Field
    psi: Field
    horizon: float
    source: SourceSamples | None = None

    def __post_init__(self):
        d = self.operator.hdim
        for name, f in (("phi", self.phi), ("psi", self.psi)):
            if f.grid.points != self.grid.points or f.hdim != d:
                raise GridError(f"{name} does not match the grid/hdim of the problem")
        if self.source is not None and self.source.values.shape[1:] != self.grid.points + (d,):
            raise GridError("source samples do not match the grid/hdim of the problem")
        if not self.horizon > 0:
            raise GridError("horizon T must be positive")

    @property
    def hdim(self) -> int:
        return self.operator.hdim

    def with_data(self, phi=None, psi=None, source=...) -> "LinearProblem":
        return LinearProblem(
            self.grid,
            self.operator,
            self.phi if phi is None else phi,
            self.psi if psi is None else psi,
            self.horizon,
            self.source if source is ... else source,
        )


# ---------------------------------------------------------------------------
# Duhamel integrals
# ---------------------------------------------------------------------------


class DuhamelTable:
    """Cumulative Gauss-Legendre sums for ``int_0^t S(t-tau) G`` and ``int_0^t C(t-tau) G``.

    ``coeffs`` are source coefficients in the eigenbasis, shape ``(nt, *P)``,
    and ``omega`` has shape ``P``.  The source is linearly interpolated within
    each step and every step uses the 2-point Gauss-Legendre rule.  Using
    ``sin(w(t-tau)) = sin(wt)cos(w tau) - cos(wt)sin(w tau)`` the integrals at
    all grid times come from two running sums.
    """

    def __init__(self, omega: np.ndarray, times: np.ndarray | None, coeffs: np.ndarray | None):
        self.omega = omega
        self.zero = coeffs is None or not np.any(coeffs)
        if coeffs is None:
            self.times = None
            return
        self.times = np.asarray(times, dtype=float)
        self.h = float(self.times[1] - self.times[0])
        self.coeffs = coeffs
        if self.zero:
            return
        shape = (1,) * omega.ndim
        t0 = self.times[:-1].reshape((-1,) + shape)
        g0, g1 = coeffs[:-1], coeffs[1:]
        dc = np.zeros(g0.shape, dtype=complex)
        ds = np.zeros(g0.shape, dtype=complex)
        for theta in _GL:
            tau = t0 + theta * self.h
            g = (1 - theta) * g0 + theta * g1
            dc += np.cos(omega * tau) * g
            ds += np.sin(omega * tau) * g
        dc *= 0.5 * self.h
        ds *= 0.5 * self.h
        zeros = np.zeros((1,) + g0.shape[1:], dtype=complex)
        self.cum_c = np.concatenate([zeros, np.cumsum(dc, axis=0)])
        self.cum_s = np.concatenate([zeros, np.cumsum(ds, axis=0)])

    def value(self, t: float) -> np.ndarray:
        """Linearly interpolated source coefficients at time ``t``."""
        if self.times is None:
            return np.zeros(self.omega.shape, dtype=complex)
        i, theta = self._locate(t)
        if theta == 0.0:
            return self.coeffs[i]
        return (1 - theta) * self.coeffs[i] + theta * self.coeffs[i + 1]

    def _locate(self, t: float):
        if self.times is None:
            raise ValueError("no source samples")
        if t < -1e-12 * self.h or t > self.times[-1] * (1 + 1e-12) + 1e-14:
            raise ValueError(
                f"t = {t} lies outside the sampled source range [0, {self.times[-1]}]"
            )
        x = max(t, 0.0) / self.h
        j = int(round(x))
        if abs(x - j) <= 1e-9:
            return min(j, len(self.times) - 1), 0.0
        i = min(int(np.floor(x)), len(self.times) - 2)
        return i, x - i

    def _raw(self, t: float):
        i, theta = self._locate(t)
        c = self.cum_c[i].copy()
        s = self.cum_s[i].copy()
        if theta > 0:
            delta = theta * self.h
            ti = self.times[i]
            for node in _GL:
                tau = ti + node * delta
                frac = node * theta
                g = (1 - frac) * self.coeffs[i] + frac * self.coeffs[i + 1]
                c += 0.5 * delta * np.cos(self.omega * tau) * g
                s += 0.5 * delta * np.sin(self.omega * tau) * g
        return c, s

    def integrals(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """``(int_0^t S(t-tau) G dtau, int_0^t C(t-tau) G dtau)``."""
        if self.zero:
            if self.times is not None:
                self._locate(t)
            z = np.zeros(self.omega.shape, dtype=complex)
            return z, z.copy()
        c, s = self._raw(t)
        sn, cs = np.sin(self.omega * t), np.cos(self.omega * t)
        return (sn * c - cs * s) / self.omega, cs * c + sn * s

    def integrals_at(self, times) -> tuple[np.ndarray, np.ndarray]:
        times = np.asarray(times, dtype=float)
        out_s = np.zeros((len(times),) + self.omega.shape, dtype=complex)
        out_c = np.zeros_like(out_s)
        for n, t in enumerate(times):
            out_s[n], out_c[n] = self.integrals(t)
        return out_s, out_c


def duhamel_integral(sh: ShiftedOperator, source_modes, t: float, source_times) -> np.ndarray:
    """``int_0^t S(t - tau) F^(tau) dtau`` for one mode.

    ``source_modes`` has shape ``(nt, d)`` on the uniform grid ``source_times``.
    """
    V = sh.base.eigenvectors
    coeffs = np.asarray(source_modes, dtype=complex) @ V.conj()
    table = DuhamelTable(sh.omega, source_times, coeffs)
    i_s, _ = table.integrals(t)
    return i_s @ V.T


def _duhamel_pair(sh: ShiftedOperator, source_modes, t: float, source_times):
    V = sh.base.eigenvectors
    if source_modes is None:
        z = np.zeros(sh.base.hdim, dtype=complex)
        return z, z.copy()
    coeffs = np.asarray(source_modes, dtype=complex) @ V.conj()
    i_s, i_c = DuhamelTable(sh.omega, source_times, coeffs).integrals(t)
    return i_s @ V.T, i_c @ V.T


# ---------------------------------------------------------------------------
# Per-mode (matrix) route
# ---------------------------------------------------------------------------


@dataclass
class ModeSystem:
    shifted: ShiftedOperator
    a11: np.ndarray
    a12: np.ndarray
    a21: np.ndarray
    a22: np.ndarray
    f1: np.ndarray | None = None
    f2: np.ndarray | None = None
    cap: float = DEFAULT_CONDITION_CAP

    def with_rhs(self, f1, f2) -> "ModeSystem":
        return ModeSystem(self.shifted, self.a11, self.a12, self.a21, self.a22,
                          np.asarray(f1, complex), np.asarray(f2, complex), self.cap)

    def block_matrix(self) -> np.ndarray:
        return np.block([[self.a11, self.a12], [self.a21, self.a22]])


def assemble_mode_system(spec: MultipointSpec, sh: ShiftedOperator, cap: float = DEFAULT_CONDITION_CAP) -> ModeSystem:
    d = sh.base.hdim
    eye = np.eye(d, dtype=complex)
    sum_ac = np.zeros((d, d), complex)
    sum_as = np.zeros((d, d), complex)
    sum_bc = np.zeros((d, d), complex)
    sum_bs = np.zeros((d, d), complex)
    for a, b, lam in zip(spec.alphas, spec.betas, spec.lambdas):
        C, S = cosine_at(sh, lam), sine_at(sh, lam)
        sum_ac += a * C
        sum_as += a * S
        sum_bc += b * C
        sum_bs += b * S
    return ModeSystem(sh, eye - sum_ac, -sum_as, sh.matrix @ sum_bs, eye - sum_bc, cap=cap)


def mode_determinant(sys: ModeSystem) -> np.ndarray:
    """Block determinant ``D = a11 a22 - a12 a21`` (the blocks commute).

    Raises :class:`SingularModeError` when ``||D^-1||`` exceeds ``sys.cap``.
    """
    D = sys.a11 @ sys.a22 - sys.a12 @ sys.a21
    smin = np.linalg.svd(D, compute_uv=False).min()
    if smin == 0 or 1.0 / smin > sys.cap:
        raise SingularModeError(
            f"singular multipoint mode at |xi|^2 = {sys.shifted.shift:.6g}: smallest |D| = {smin:.3e}",
            modes=[sys.shifted.shift],
        )
    return D


def assemble_rhs(spec: MultipointSpec, sh: ShiftedOperator, source_modes, phi_hat, psi_hat,
                 source_times=None, *, g2_half_term: bool = False, g2_sine_kernel: bool = False):
    """Right-hand sides ``(f1, f2)`` of the mode system.

    ``f1 = phi^ + sum alpha_k int_0^{lambda_k} S(lambda_k - tau) F^``,
    ``f2 = psi^ + sum beta_k int_0^{lambda_k} C(lambda_k - tau) F^``; the
    second kernel is the time derivative of the first.  ``g2_sine_kernel``
    swaps it for ``S`` and ``g2_half_term`` adds ``beta_k F^(lambda_k) / 2``;
    both reproduce an alternative published form and break the multipoint
    conditions when ``F != 0``.
    """
    f1 = np.array(phi_hat, dtype=complex)
    f2 = np.array(psi_hat, dtype=complex)
    if source_modes is None:
        return f1, f2
    for a, b, lam in zip(spec.alphas, spec.betas, spec.lambdas):
        i_s, i_c = _duhamel_pair(sh, source_modes, lam, source_times)
        f1 += a * i_s
        f2 += b * (i_s if g2_sine_kernel else i_c)
        if g2_half_term:
            f2 += 0.5 * b * _interp(source_modes, source_times, lam)
    return f1, f2


def _interp(samples, times, t):
    times = np.asarray(times, float)
    h = times[1] - times[0]
    x = t / h
    i = min(int(np.floor(x)), len(times) - 2)
    th = x - i
    return (1 - th) * samples[i] + th * samples[i + 1]


def solve_initial_pair(sys: ModeSystem) -> tuple[np.ndarray, np.ndarray]:
    """Block Cramer: ``u0 = D^-1(a22 f1 - a12 f2)``, ``u1 = D^-1(a11 f2 - a21 f1)``."""
    D = mode_determinant(sys)
    u0 = np.linalg.solve(D, sys.a22 @ sys.f1 - sys.a12 @ sys.f2)
    u1 = np.linalg.solve(D, sys.a11 @ sys.f2 - sys.a21 @ sys.f1)
    return u0, u1


def propagate(sh: ShiftedOperator, u0, u1, source_modes, times, source_times=None):
    """Mode trajectory ``(u^(t), du^/dt(t))`` for each ``t`` in ``times``.

    ``u^  = C u0 + S u1 + int S(t-tau) F^``,
    ``u^_t = -A_xi S u0 + C u1 + int C(t-tau) F^``.
    """
    times = np.atleast_1d(np.asarray(times, float))
    d = sh.base.hdim
    u = np.zeros((len(times), d), complex)
    ut = np.zeros_like(u)
    Axi = sh.matrix
    for n, t in enumerate(times):
        C, S = cosine_at(sh, t), sine_at(sh, t)
        i_s, i_c = _duhamel_pair(sh, source_modes, t, source_times)
        u[n] = C @ u0 + S @ u1 + i_s
        ut[n] = -Axi @ (S @ u0) + C @ u1 + i_c
    return u, ut


# ---------------------------------------------------------------------------
# Vectorized route over all modes
# ---------------------------------------------------------------------------


@dataclass
class ModalData:
    """Eigenbasis quantities shared by every stage of a whole-field solve."""

    grid: GridSpec
    operator: OperatorSpec
    omega: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    table: DuhamelTable

    @classmethod
    def from_problem(cls, problem: LinearProblem) -> "ModalData":
        op, grid = problem.operator, problem.grid
        omega = modal_frequencies(op, grid.xi_squared())
        phi = op.to_eigenbasis(fft_values(problem.phi.values, grid.n))
        psi = op.to_eigenbasis(fft_values(problem.psi.values, grid.n))
        if problem.source is None:
            table = DuhamelTable(omega, None, None)
        else:
            coeffs = op.to_eigenbasis(fft_values(problem.source.values, grid.n))
            table = DuhamelTable(omega, problem.source.times, coeffs)
        return cls(grid, op, omega, phi, psi, table)


def modal_blocks(spec: MultipointSpec, omega: np.ndarray):
    """Diagonal entries of ``a11, a12, a21, a22`` in the eigenbasis."""
    one = np.ones(omega.shape, complex)
    s_ac = np.zeros(omega.shape, complex)
    s_as = np.zeros_like(s_ac)
    s_bc = np.zeros_like(s_ac)
    s_bs = np.zeros_like(s_ac)
    for a, b, lam in zip(spec.alphas, spec.betas, spec.lambdas):
        c = np.cos(omega * lam)
        s = np.sin(omega * lam) / omega
        s_ac += a * c
        s_as += a * s
        s_bc += b * c
        s_bs += b * s
    return one - s_ac, -s_as, omega**2 * s_bs, one - s_bc


def modal_propagate(omega, u0, u1, table: DuhamelTable, times):
    times = np.atleast_1d(np.asarray(times, float))
    tt = times.reshape((-1,) + (1,) * omega.ndim)
    c = np.cos(omega * tt)
    s = np.sin(omega * tt)
    u = c * u0 + (s / omega) * u1
    ut = -omega * s * u0 + c * u1
    if not table.zero:
        i_s, i_c = table.integrals_at(times)
        u += i_s
        ut += i_c
    elif table.times is not None:
        for t in times:
            table._locate(t)
    return u, ut


@dataclass
class SolveReport:
    mode_count: int
    min_abs_det: float
    max_condition: float
    residual_u: float = float("nan")
    residual_ut: float = float("nan")
    singular_modes: list = field(default_factory=list)
    u0_hat: np.ndarray | None = field(default=None, repr=False)
    u1_hat: np.ndarray | None = field(default=None, repr=False)

    def row(self) -> dict:
        return {
            "mode_count": self.mode_count,
            "min_abs_det": self.min_abs_det,
            "max_condition": self.max_condition,
            "residual_u": self.residual_u,
            "residual_ut": self.residual_ut,
        }


def _block_condition(a11, a12, a21, a22) -> np.ndarray:
    # 2-norm condition number of [[a11, a12], [a21, a22]] per entry, closed form
    fro2 = np.abs(a11) ** 2 + np.abs(a12) ** 2 + np.abs(a21) ** 2 + np.abs(a22) ** 2
    det = np.abs(a11 * a22 - a12 * a21)
    disc = np.sqrt(np.maximum(fro2**2 - 4 * det**2, 0.0))
    smax2 = 0.5 * (fro2 + disc)
    with np.errstate(divide="ignore"):
        smin2 = np.where(det > 0, det**2 / smax2, 0.0)
        return np.where(smin2 > 0, np.sqrt(smax2 / smin2), np.inf)


def solve_initial_pairs(modal: ModalData, spec: MultipointSpec, *, cap=DEFAULT_CONDITION_CAP,
                        g2_half_term=False, g2_sine_kernel=False):
    """Initial pair ``(u0, u1)`` for every mode, in eigenbasis coordinates."""
    omega, table = modal.omega, modal.table
    a11, a12, a21, a22 = modal_blocks(spec, omega)
    det = a11 * a22 - a12 * a21
    absdet = np.abs(det)
    cond = _block_condition(a11, a12, a21, a22)
    report = SolveReport(
        mode_count=modal.grid.size,
        min_abs_det=float(absdet.min()),
        max_condition=float(cond.max()),
    )
    singular = absdet * cap < 1.0
    if np.any(singular):
        idx = np.argwhere(singular.any(axis=-1))
        report.singular_modes = [modal.grid.mode_index(tuple(i)) for i in idx]
        shown = ", ".join(str(k) for k in report.singular_modes[:8])
        more = "" if len(idx) <= 8 else f" (+{len(idx) - 8} more)"
        err = SingularModeError(
            f"{len(idx)} singular multipoint mode(s), |D| < {1 / cap:.1e}, at k = {shown}{more}",
            modes=report.singular_modes,
        )
        err.report = report
        raise err

    f1 = modal.phi.copy()
    f2 = modal.psi.copy()
    for a, b, lam in zip(spec.alphas, spec.betas, spec.lambdas):
        i_s, i_c = table.integrals(lam)
        f1 += a * i_s
        f2 += b * (i_s if g2_sine_kernel else i_c)
        if g2_half_term:
            f2 += 0.5 * b * table.value(lam)
    u0 = (a22 * f1 - a12 * f2) / det
    u1 = (a11 * f2 - a21 * f1) / det
    return u0, u1, report


def uniform_times(horizon: float, steps) -> np.ndarray:
    if np.ndim(steps) == 0:
        return np.linspace(0.0, horizon, int(steps) + 1)
    times = np.asarray(steps, dtype=float)
    steps_ = np.diff(times)
    if times[0] != 0 or not np.allclose(steps_, steps_[0], rtol=1e-9, atol=0):
        raise GridError("trajectory times must be a uniform grid starting at 0")
    return times


def condition_residuals(modal: ModalData, spec: MultipointSpec, u0, u1) -> tuple[float, float]:
    """Relative residuals of both multipoint conditions, by exact propagation to each ``lambda_k``."""
    if spec.m == 0:
        return (float(np.linalg.norm(u0 - modal.phi) / max(np.linalg.norm(modal.phi), 1e-300)),
                float(np.linalg.norm(u1 - modal.psi) / max(np.linalg.norm(modal.psi), 1e-300)))
    u_l, ut_l = modal_propagate(modal.omega, u0, u1, modal.table, spec.lambdas)
    r_u = u0 - modal.phi
    r_ut = u1 - modal.psi
    scale_u = np.linalg.norm(modal.phi) + np.linalg.norm(u0)
    scale_ut = np.linalg.norm(modal.psi) + np.linalg.norm(u1)
    for k, (a, b) in enumerate(zip(spec.alphas, spec.betas)):
        r_u = r_u - a * u_l[k]
        r_ut = r_ut - b * ut_l[k]
        scale_u += abs(a) * np.linalg.norm(u_l[k])
        scale_ut += abs(b) * np.linalg.norm(ut_l[k])
    return (float(np.linalg.norm(r_u) / max(scale_u, 1e-300)),
            float(np.linalg.norm(r_ut) / max(scale_ut, 1e-300)))


def solve_linear(problem: LinearProblem, spec: MultipointSpec, times=64, *,
                 cap: float = DEFAULT_CONDITION_CAP, g2_half_term: bool = False,
                 g2_sine_kernel: bool = False) -> tuple[SpectralTrajectory, SolveReport]:
    """Solve the multipoint linear problem on a uniform time grid over ``[0, T]``.

    ``times`` is a step count or an explicit uniform grid.  Raises
    :class:`SingularModeError` listing the offending frequencies if any mode
    system is singular beyond ``cap``.
    """
    times = uniform_times(problem.horizon, times)
    if spec.m and spec.max_lambda > max(problem.horizon, times[-1]) * (1 + 1e-12):
        raise MultipointConditionError(
            f"multipoint time {spec.max_lambda} lies beyond the horizon {problem.horizon}"
        )
    if problem.source is not None:
        need = max(times[-1], spec.max_lambda)
        if problem.source.t_end < need * (1 - 1e-12):
            raise GridError(f"source samples end at {problem.source.t_end}, need coverage up to {need}")
    modal = ModalData.from_problem(problem)
    u0, u1, report = solve_initial_pairs(
        modal, spec, cap=cap, g2_half_term=g2_half_term, g2_sine_kernel=g2_sine_kernel
    )
    report.residual_u, report.residual_ut = condition_residuals(modal, spec, u0, u1)
    op = problem.operator
    report.u0_hat = op.from_eigenbasis(u0)
    report.u1_hat = op.from_eigenbasis(u1)
    u, ut = modal_propagate(modal.omega, u0, u1, modal.table, times)
    traj = SpectralTrajectory(problem.grid, times, op.from_eigenbasis(u), op.from_eigenbasis(ut))
    log.debug("solve_linear: %d modes, min|D| = %.3e", report.mode_count, report.min_abs_det)
    return traj, report


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------


def energy(traj: SpectralTrajectory, op: OperatorSpec) -> np.ndarray:
    """``E(t) = ||u_t||^2 + <A_xi u, u>`` summed over modes, scaled by the cell volume."""
    omega2 = modal_frequencies(op, traj.grid.xi_squared()) ** 2
    w = op.to_eigenbasis(traj.u_hat)
    wt = op.to_eigenbasis(traj.ut_hat)
    axes = tuple(range(1, w.ndim))
    e = np.sum(np.abs(wt) ** 2 + omega2 * np.abs(w) ** 2, axis=axes)
    return e * traj.grid.cell_volume


def sample_at(traj: SpectralTrajectory, t: float) -> tuple[np.ndarray, np.ndarray]:
    """``(u^, u^_t)`` at time ``t``: the stored sample, or cubic Hermite interpolation."""
    times = traj.times
    h = traj.dt
    x = t / h
    j = int(round(x))
    if abs(x - j) <= 1e-9 and 0 <= j < len(times):
        return traj.u_hat[j], traj.ut_hat[j]
    i = int(np.floor(x))
    if i < 0 or i >= len(times) - 1:
        raise ValueError(f"t = {t} lies outside the trajectory range")
    s = x - i
    p0, p1 = traj.u_hat[i], traj.u_hat[i + 1]
    m0, m1 = h * traj.ut_hat[i], h * traj.ut_hat[i + 1]
    h00, h10, h01, h11 = 2 * s**3 - 3 * s**2 + 1, s**3 - 2 * s**2 + s, -2 * s**3 + 3 * s**2, s**3 - s**2
    d00, d10, d01, d11 = 6 * s**2 - 6 * s, 3 * s**2 - 4 * s + 1, -6 * s**2 + 6 * s, 3 * s**2 - 2 * s
    u = h00 * p0 + h10 * m0 + h01 * p1 + h11 * m1
    ut = (d00 * p0 + d10 * m0 + d01 * p1 + d11 * m1) / h
    return u, ut


@dataclass
class VerifyReport:
    pde_residual: float
    pde_residual_rel: float
    residual_u: float
    residual_ut: float
    energy_drift: float = float("nan")

    def row(self) -> dict:
        return dict(self.__dict__)


def verify_solution(traj: SpectralTrajectory, problem: LinearProblem, spec: MultipointSpec,
                    source: SourceSamples | None = ..., ) -> VerifyReport:
    """Measure how well a trajectory solves the PDE and the multipoint conditions.

    The PDE residual uses spectral space derivatives and the central second
    difference in time at interior samples (``O(dt^2)``).  ``source`` defaults
    to the problem's source; it must be sampled on the trajectory's time grid.
    """
    if source is ...:
        source = problem.source
    grid, op = traj.grid, problem.operator
    h = traj.dt
    xi2 = grid.xi_squared()[..., None]
    u = traj.u_hat
    A_t = op.matrix.T
    pde = np.zeros(0)
    rel = 0.0
    if len(traj.times) >= 3:
        dtt = (u[2:] - 2 * u[1:-1] + u[:-2]) / h**2
        lhs_op = xi2 * u[1:-1] + u[1:-1] @ A_t
        res = dtt + lhs_op
        if source is not None:
            if source.values.shape[0] < len(traj.times) or not np.allclose(
                source.times[: len(traj.times)], traj.times, rtol=0, atol=1e-9 * h
            ):
                raise GridError("verification source must be sampled on the trajectory time grid")
            res = res - fft_values(source.values[1 : len(traj.times) - 1], grid.n)
        axes = tuple(range(1, res.ndim))
        pde = np.sqrt(np.sum(np.abs(res) ** 2, axis=axes) * grid.cell_volume)
        scale = np.sqrt(np.sum(np.abs(lhs_op) ** 2, axis=axes) * grid.cell_volume).max()
        rel = float(pde.max() / scale) if scale > 0 else float(pde.max())
    phi_hat = fft_values(problem.phi.values, grid.n)
    psi_hat = fft_values(problem.psi.values, grid.n)
    r_u = traj.u_hat[0] - phi_hat
    r_ut = traj.ut_hat[0] - psi_hat
    scale_u = np.linalg.norm(phi_hat) + np.linalg.norm(traj.u_hat[0])
    scale_ut = np.linalg.norm(psi_hat) + np.linalg.norm(traj.ut_hat[0])
    for a, b, lam in zip(spec.alphas, spec.betas, spec.lambdas):
        ul, utl = sample_at(traj, lam)
        r_u = r_u - a * ul
        r_ut = r_ut - b * utl
        scale_u += abs(a) * np.linalg.norm(ul)
        scale_ut += abs(b) * np.linalg.norm(utl)
    report = VerifyReport(
        pde_residual=float(pde.max()) if pde.size else 0.0,
        pde_residual_rel=rel,
        residual_u=float(np.linalg.norm(r_u) / scale_u) if scale_u > 0 else 0.0,
        residual_ut=float(np.linalg.norm(r_ut) / scale_ut) if scale_ut > 0 else 0.0,
    )
    if source is None or not np.any(source.values):
        e = energy(traj, op)
        report.energy_drift = float(np.max(np.abs(e - e[0])) / e[0]) if e[0] > 0 else 0.0
    return report


def to_physical(values_hat: np.ndarray, grid: GridSpec) -> np.ndarray:
    return ifft_values(values_hat, grid.n)
