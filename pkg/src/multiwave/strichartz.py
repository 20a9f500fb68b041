"""Strichartz exponent algebra and numerical checks of the wave estimates.

Exponents are handled as exact rationals (:class:`fractions.Fraction`) with
``math.inf`` standing for infinity, so admissibility and the gap relation are
decided without rounding.

The numerical side measures ratios ``LHS / RHS`` of the dispersive, Strichartz
and bilinear estimates on a periodic box.  Constants are not known, so these
are bounded-ratio experiments: a ratio that stays put under refinement and
across data is the evidence, not a proof.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import inf

import numpy as np

from .errors import ExponentError
from .multipoint import LinearProblem, MultipointSpec, solve_linear
from .operators import OperatorSpec, fractional_power, modal_frequencies
from .spectral import (
    Field,
    SobolevSpec,
    SpectralTrajectory,
    fft_values,
    ifft_values,
    lebesgue_norm_values,
    mixed_norm,
    mixed_norm_values,
    sobolev_norm_values,
)

# ---------------------------------------------------------------------------
# exact exponent arithmetic
# ---------------------------------------------------------------------------


def as_exponent(x):
    """Parse an exponent: int, Fraction, float, ``"5/2"``, ``"inf"`` or ``math.inf``."""
    if isinstance(x, str):
        s = x.strip().lower()
        if s in ("inf", "infinity", "oo", "∞"):
            return inf
        return Fraction(s)
    if isinstance(x, float):
        return inf if x == inf else Fraction(x).limit_denominator(10**9)
    return Fraction(x)


def recip(x) -> Fraction:
    x = as_exponent(x)
    return Fraction(0) if x == inf else 1 / x


def dual(p):
    """Hölder conjugate ``p'`` with ``1/p + 1/p' = 1``."""
    p = as_exponent(p)
    if p == inf:
        return Fraction(1)
    if p == 1:
        return inf
    return p / (p - 1)


def to_float(x) -> float:
    return inf if x == inf else float(x)


def fmt(x) -> str:
    return "inf" if x == inf else str(x)


@dataclass(frozen=True)
class AdmissibilityVerdict:
    admissible: bool
    sharp: bool
    endpoint: bool
    excluded_triple: bool


def classify_pair(n: int, q, r) -> AdmissibilityVerdict:
    """Classify ``(q, r)``: admissible iff ``1/q + (n-1)/(2r) <= (n-1)/4``,
    ``2 <= q, r <= inf`` and ``(n, q, r) != (2, 2, inf)``; sharp on equality;
    endpoint iff sharp with ``(q, r) = (2, 2(n-1)/(n-3))`` and ``n > 3``.
    """
    if int(n) != n or n <= 1:
        raise ExponentError(f"dimension must be an integer > 1, got {n}")
    n = int(n)
    q, r = as_exponent(q), as_exponent(r)
    excluded = n == 2 and q == 2 and r == inf
    if not (2 <= q <= inf and 2 <= r <= inf):
        return AdmissibilityVerdict(False, False, False, excluded)
    lhs = recip(q) + Fraction(n - 1, 2) * recip(r)
    rhs = Fraction(n - 1, 4)
    admissible = lhs <= rhs and not excluded
    sharp = admissible and lhs == rhs
    endpoint = sharp and n > 3 and q == 2 and r == Fraction(2 * (n - 1), n - 3)
    return AdmissibilityVerdict(admissible, sharp, endpoint, excluded)


def endpoint_pair(n: int):
    if n <= 3:
        raise ExponentError("the endpoint pair needs n > 3")
    return Fraction(2), Fraction(2 * (n - 1), n - 3)


def sharp_pair_for_gap(n: int, gamma):
    """The unique sharp admissible ``(q, r)`` with ``1/q + n/r = n/2 - gamma``."""
    gamma = Fraction(gamma)
    inv_q = Fraction(n - 1, n + 1) * gamma
    inv_r = Fraction(1, 2) - 2 * gamma / (n + 1)
    if inv_q < 0 or inv_r <= 0:
        raise ExponentError(f"no sharp pair for n={n}, gamma={gamma}")
    return (inf if inv_q == 0 else 1 / inv_q), 1 / inv_r


def default_pair_set(n: int) -> list:
    """Finite stand-in for the sup over admissible pairs: ``(inf, 2)``, the sharp
    pair with ``q = 4`` and, for ``n > 3``, the endpoint.  For ``n = 3`` the
    pair ``(2, inf)`` is left out."""
    pairs = [(inf, Fraction(2))]
    r_mid = inf if n == 2 else Fraction(2 * (n - 1), n - 2)
    pairs.append((Fraction(4), r_mid))
    if n > 3:
        pairs.append(endpoint_pair(n))
    return pairs


@dataclass(frozen=True)
class GapVerdict:
    valid: bool
    residual_solution: Fraction
    residual_source: Fraction


def gap_check(n: int, gamma, q, r, q_tilde, r_tilde) -> GapVerdict:
    """Check ``1/q + n/r = n/2 - gamma = 1/q~ + n/r~ - 2`` exactly."""
    target = Fraction(n, 2) - Fraction(gamma)
    res1 = recip(q) + n * recip(r) - target
    res2 = recip(q_tilde) + n * recip(r_tilde) - 2 - target
    return GapVerdict(res1 == 0 and res2 == 0, res1, res2)


@dataclass(frozen=True)
class GapRelation:
    n: int
    gamma: Fraction
    q: object
    r: object
    q_tilde: object
    r_tilde: object
    alpha: Fraction = Fraction(0)

    def __post_init__(self):
        for name in ("q", "r", "q_tilde", "r_tilde"):
            object.__setattr__(self, name, as_exponent(getattr(self, name)))
        object.__setattr__(self, "gamma", Fraction(self.gamma))
        object.__setattr__(self, "alpha", Fraction(self.alpha))
        if not 0 <= self.alpha < 1:
            raise ExponentError("alpha must lie in [0, 1)")
        if self.q_tilde < 1 or self.r_tilde < 1:
            raise ExponentError("source exponents must be >= 1")
        verdict = gap_check(self.n, self.gamma, self.q, self.r, self.q_tilde, self.r_tilde)
        if not verdict.valid:
            raise ExponentError(
                f"gap relation fails: residuals {verdict.residual_solution}, {verdict.residual_source}"
            )

    @property
    def source_exponents(self):
        """``(q~', r~')``, the exponents of the source norm."""
        return dual(self.q_tilde), dual(self.r_tilde)


def beta_exponent(n: int, r, r_tilde) -> Fraction:
    """``beta(r, r~) = n/2 - 1 - (n/2)(1/r - 1/r~)``."""
    if as_exponent(r) < 1 or as_exponent(r_tilde) < 1:
        raise ExponentError("beta needs r, r~ >= 1")
    return Fraction(n, 2) - 1 - Fraction(n, 2) * (recip(r) - recip(r_tilde))


# ---------------------------------------------------------------------------
# homogeneous propagator and dispersive decay
# ---------------------------------------------------------------------------


def homogeneous_propagator(op: OperatorSpec, f: Field, times, fiber_matrix=None) -> np.ndarray:
    """Physical samples of ``M U(t) f`` where ``U(t)`` maps ``f`` to the solution
    with ``u(0) = f``, ``u_t(0) = 0`` and no source; shape ``(nt, *points, d)``."""
    grid = f.grid
    omega = modal_frequencies(op, grid.xi_squared())
    w = op.to_eigenbasis(fft_values(f.values, grid.n))
    out = np.empty((len(times),) + f.values.shape, dtype=complex)
    for i, t in enumerate(times):
        vals = op.from_eigenbasis(np.cos(omega * t) * w)
        if fiber_matrix is not None:
            vals = vals @ np.asarray(fiber_matrix).T
        out[i] = ifft_values(vals, grid.n)
    return out


@dataclass
class PowerFit:
    exponent: float
    prefactor: float
    rms: float


def fit_decay(times, norms, shift: float = 0.0) -> PowerFit:
    """Least-squares fit ``norm ~ c (shift + t)^(-exponent)`` in log-log space."""
    x = np.log(shift + np.asarray(times, float))
    y = np.log(np.asarray(norms, float))
    slope, icpt = np.polyfit(x, y, 1)
    rms = float(np.sqrt(np.mean((y - (slope * x + icpt)) ** 2)))
    return PowerFit(float(-slope), float(np.exp(icpt)), rms)


@dataclass
class DispersiveReport:
    times: np.ndarray
    norms: np.ndarray
    ratios: np.ndarray
    predicted_exponent: float
    fit: PowerFit
    truncated_fit: PowerFit
    meta: dict = field(default_factory=dict)

    @property
    def better_model(self) -> str:
        return "power" if self.fit.rms <= self.truncated_fit.rms else "truncated"

    def rows(self):
        for t, nrm, rat in zip(self.times, self.norms, self.ratios):
            yield {"t": t, "norm": nrm, "ratio": rat}


def dispersive_ratio(op: OperatorSpec, alpha: float, p, data: Field, times) -> DispersiveReport:
    """Series ``t^{n(1/2-1/p)+alpha} ||A^alpha U(t) f||_p / ||f||_{p'}``.

    Times must stay below a quarter of the smallest box length so the
    unit-speed wave front never wraps around the torus.
    """
    p = as_exponent(p)
    if not 2 <= p <= inf:
        raise ExponentError("dispersive exponent p must lie in [2, inf]")
    if not 0 <= alpha < 1:
        raise ExponentError("alpha must lie in [0, 1)")
    times = np.asarray(times, float)
    bound = min(data.grid.box_length) / 4
    if np.any(times <= 0) or np.any(times >= bound):
        raise ValueError(f"dispersive times must lie in (0, L/4) = (0, {bound:.6g})")
    n = data.grid.n
    pf, pd = to_float(p), to_float(dual(p))
    Aa = fractional_power(op, alpha) if alpha else None
    norms = np.empty(len(times))
    for i, t in enumerate(times):
        snap = homogeneous_propagator(op, data, [t], Aa)[0]
        norms[i] = lebesgue_norm_values(snap, data.grid, pf)
    base = float(lebesgue_norm_values(data.values, data.grid, pd))
    predicted = n * (0.5 - to_float(recip(p))) + alpha
    ratios = times**predicted * norms / base
    fit = fit_decay(times, norms) if len(times) > 1 else PowerFit(np.nan, np.nan, np.nan)
    tfit = fit_decay(times, norms, 1.0) if len(times) > 1 else PowerFit(np.nan, np.nan, np.nan)
    return DispersiveReport(times, norms, ratios, predicted, fit, tfit,
                            {"p": fmt(p), "alpha": alpha, "n": n, "points": data.grid.points})


# ---------------------------------------------------------------------------
# Strichartz estimate
# ---------------------------------------------------------------------------


@dataclass
class EstimateReport:
    lhs: float
    rhs: float
    ratio: float
    meta: dict = field(default_factory=dict)
    terms: dict = field(default_factory=dict)

    @classmethod
    def build(cls, lhs, rhs, meta=None, terms=None):
        ratio = lhs / rhs if rhs > 0 else 0.0
        return cls(float(lhs), float(rhs), float(ratio), meta or {}, terms or {})


def _require_zero_mean(problem: LinearProblem, phi_hat, psi_hat, tol: float = 1e-10):
    zero = (0,) * problem.grid.n
    parts = [("phi", phi_hat[zero], phi_hat), ("psi", psi_hat[zero], psi_hat)]
    if problem.source is not None:
        src_hat = fft_values(problem.source.values, problem.grid.n)
        parts.append(("source", src_hat[(slice(None),) + zero], src_hat))
    for name, mean, full in parts:
        if np.linalg.norm(mean) > tol * max(np.linalg.norm(full), np.finfo(float).tiny):
            raise ValueError(f"{name} must have zero mean for a homogeneous norm of negative order")


def strichartz_report(problem: LinearProblem, spec: MultipointSpec, gap: GapRelation, *,
                      steps: int = 64, meta: dict | None = None) -> EstimateReport:
    """One instance of the Strichartz inequality: solve, then compare both sides.

    LHS: ``||A^a u||_{L^q L^r} + sup_t ||A^a u||_{L^2} + sup_t ||A^a u_t||_{W'^{gamma-1,2}}``
    RHS: ``||A phi||_{W'^{gamma,2}} + ||A psi||_{W'^{gamma-1,2}} + ||F||_{L^{q~'} L^{r~'}}``
    (``W'`` the homogeneous Sobolev norm).
    """
    verdict = classify_pair(gap.n, gap.q, gap.r)
    if not verdict.admissible:
        raise ExponentError(f"(q, r) = ({fmt(gap.q)}, {fmt(gap.r)}) is not admissible for n = {gap.n}")
    if problem.grid.n != gap.n:
        raise ExponentError("gap relation dimension differs from the grid dimension")
    grid, op = problem.grid, problem.operator
    phi_hat = fft_values(problem.phi.values, grid.n)
    psi_hat = fft_values(problem.psi.values, grid.n)
    has_source = problem.source is not None and np.any(problem.source.values)
    if not (np.any(phi_hat) or np.any(psi_hat) or has_source):
        return EstimateReport(0.0, 0.0, 0.0, meta or {})

    if gap.gamma < 1:
        # negative-order homogeneous norm on u_t: its mean mode must vanish for
        # all time, which holds exactly when the data have zero mean
        _require_zero_mean(problem, phi_hat, psi_hat)
    traj, _ = solve_linear(problem, spec, steps)
    Aa = fractional_power(op, float(gap.alpha))
    au = traj.with_fiber_map(Aa)
    s_gamma = SobolevSpec(float(gap.gamma), homogeneous=True)
    s_gamma1 = SobolevSpec(float(gap.gamma) - 1, homogeneous=True)

    strich = mixed_norm(au, to_float(gap.q), to_float(gap.r))
    energy = max(float(np.sqrt(np.sum(np.abs(au.u_hat[i]) ** 2) * grid.cell_volume))
                 for i in range(len(traj.times)))
    ut_hat = au.ut_hat.copy()
    if gap.gamma < 1:
        ut_hat[(slice(None),) + (0,) * grid.n] = 0  # roundoff only, see the check above
    deriv = max(sobolev_norm_values(ut_hat[i], grid, s_gamma1, spectral=True)
                for i in range(len(traj.times)))
    A_t = op.matrix.T
    data_phi = sobolev_norm_values(phi_hat @ A_t, grid, s_gamma, spectral=True)
    data_psi = sobolev_norm_values(psi_hat @ A_t, grid, s_gamma1, spectral=True)
    src = 0.0
    if has_source:
        qs, rs = gap.source_exponents
        keep = problem.source.times <= problem.horizon * (1 + 1e-12)
        src = mixed_norm_values(problem.source.values[keep], problem.source.times[keep], grid,
                                to_float(qs), to_float(rs))
    terms = {"strichartz": strich, "energy": energy, "derivative": deriv,
             "phi": data_phi, "psi": data_psi, "source": src}
    return EstimateReport.build(strich + energy + deriv, data_phi + data_psi + src, meta, terms)


@dataclass
class BilinearReport:
    value: complex
    norm_f: float
    norm_g: float
    constant: float


def bilinear_form(F: SpectralTrajectory, G: SpectralTrajectory, alpha: float, op: OperatorSpec,
                  pair=(inf, 2)) -> BilinearReport:
    """Retarded bilinear form ``T(F, G) = iint_{s<t} <(A^{a/2}U(s))* F(s), (A^{a/2}U(t))* G(t)> ds dt``.

    ``U`` is the homogeneous propagator (self-adjoint per mode).  The double
    integral uses trapezoid weights on the shared time grid with the diagonal
    ``s = t`` counted at half weight; the spatial inner product is exact.
    Also records ``C = |T| / (||F|| ||G||)`` in ``L^{q'}_t L^{r'}_x``.
    """
    if F.grid.points != G.grid.points or F.grid.box_length != G.grid.box_length:
        raise ValueError("F and G live on different grids")
    if F.times.shape != G.times.shape or not np.allclose(F.times, G.times):
        raise ValueError("F and G have different time grids")
    grid = F.grid
    omega = modal_frequencies(op, grid.xi_squared())
    weight = op.eigenvalues ** (alpha / 2)
    tt = F.times.reshape((-1,) + (1,) * omega.ndim)
    X = weight * np.cos(omega * tt) * op.to_eigenbasis(F.u_hat)
    Y = weight * np.cos(omega * tt) * op.to_eigenbasis(G.u_hat)
    nt = len(F.times)
    K = (X.reshape(nt, -1).conj() @ Y.reshape(nt, -1).T) * grid.cell_volume
    h = F.times[1] - F.times[0]
    w = np.full(nt, h)
    w[0] = w[-1] = h / 2
    W = np.triu(np.outer(w, w), 1) + np.diag(w * w) / 2
    value = complex(np.sum(W * K))
    q, r = as_exponent(pair[0]), as_exponent(pair[1])
    qd, rd = to_float(dual(q)), to_float(dual(r))
    nf = mixed_norm(F, qd, rd)
    ng = mixed_norm(G, qd, rd)
    const = abs(value) / (nf * ng) if nf * ng > 0 else 0.0
    return BilinearReport(value, nf, ng, const)


def strichartz_norm(traj: SpectralTrajectory, pairs=None) -> float:
    """Max of ``L^q_t L^r_x`` norms over a finite set of admissible pairs."""
    n = traj.grid.n
    if pairs is None:
        pairs = default_pair_set(n)
    pairs = list(pairs)
    if not pairs:
        raise ExponentError("strichartz_norm needs at least one exponent pair")
    best = 0.0
    for q, r in pairs:
        if not classify_pair(n, q, r).admissible:
            raise ExponentError(f"pair ({fmt(q)}, {fmt(r)}) is not admissible for n = {n}")
        best = max(best, mixed_norm(traj, to_float(as_exponent(q)), to_float(as_exponent(r))))
    return best
