"""Seeded data generators and randomized problem ensembles."""

from __future__ import annotations

import numpy as np

from .multipoint import LinearProblem, MultipointSpec, SourceSamples
from .operators import OperatorSpec, build_operator
from .spectral import Field, GridSpec, fft_values, ifft_values

# exp(-d^2 / (2 s^2)) < 1e-14 once d > 8.03 s
COMPACT_MARGIN = 8.1
DEFAULT_WIDTH = 0.8


def gaussian_bumps(grid: GridSpec, hdim: int, rng: np.random.Generator, *, count: int = 1,
                   width: float | tuple = DEFAULT_WIDTH) -> Field:
    """Sum of Gaussian bumps with seed-derived centers, widths and fiber amplitudes.

    Centers stay ``COMPACT_MARGIN`` widths away from every face of the box, so
    each bump is below 1e-14 on the boundary.  ``width`` is a fixed standard
    deviation or a ``(low, high)`` range to draw from.
    """
    coords = grid.coordinates()
    total = np.zeros(grid.points + (hdim,), dtype=complex)
    for _ in range(count):
        s = float(rng.uniform(*width)) if isinstance(width, tuple) else float(width)
        r2 = np.zeros(grid.points)
        for x, L in zip(coords, grid.box_length):
            lo, hi = COMPACT_MARGIN * s, L - COMPACT_MARGIN * s
            if hi <= lo:
                raise ValueError(f"bump width {s:g} too large for box length {L:g}")
            r2 = r2 + (x - rng.uniform(lo, hi)) ** 2
        amp = rng.normal(size=hdim)
        total += np.exp(-r2 / (2 * s * s))[..., None] * amp
    return Field(grid, total.real.astype(complex))


def single_mode(grid: GridSpec, hdim: int, mode, amplitude=1.0) -> Field:
    """``amplitude * exp(i k . x)`` with integer wave vector ``k`` (in units of ``2 pi / L``)."""
    k = tuple(int(v) for v in np.atleast_1d(mode))
    if len(k) != grid.n:
        raise ValueError(f"mode needs {grid.n} components")
    phase = sum(2 * np.pi * ki / L * x for ki, L, x in zip(k, grid.box_length, grid.coordinates()))
    amp = np.broadcast_to(np.asarray(amplitude, dtype=complex), (hdim,))
    return Field(grid, np.exp(1j * phase)[..., None] * amp)


def zero_mean(f: Field) -> Field:
    """Project out the ``k = 0`` Fourier mode."""
    hat = fft_values(f.values, f.grid.n)
    hat[(0,) * f.grid.n] = 0
    return Field(f.grid, ifft_values(hat, f.grid.n))


def random_spd(d: int, rng: np.random.Generator, margin: float = 1.0) -> OperatorSpec:
    B = rng.normal(size=(d, d))
    return build_operator(B @ B.T / d + margin * np.eye(d), name="random-spd")


def random_spec(m: int, rng: np.random.Generator, horizon: float = 1.0, scale: float = 0.4) -> MultipointSpec:
    """``m`` real coefficient pairs of magnitude ``<= scale`` at sorted times in ``(0, horizon]``."""
    if m == 0:
        return MultipointSpec.cauchy()
    while True:
        a = rng.uniform(-scale, scale, m)
        b = rng.uniform(-scale, scale, m)
        if np.all(np.abs(a + b) > 1e-3) and abs(a.sum() * b.sum()) > 1e-3:
            break
    lam = np.sort(rng.uniform(0.1 * horizon, horizon, m))
    return MultipointSpec(a, b, lam)


def smooth_source(grid: GridSpec, hdim: int, rng: np.random.Generator, horizon: float,
                  steps: int = 64) -> SourceSamples:
    """Gaussian bump in space times a random trigonometric envelope in time."""
    times = np.linspace(0.0, horizon, steps + 1)
    bump = gaussian_bumps(grid, hdim, rng).values
    freq, phase = rng.uniform(0.5, 4.0), rng.uniform(0, 2 * np.pi)
    env = np.cos(freq * times + phase)
    return SourceSamples(times, env.reshape((-1,) + (1,) * (grid.n + 1)) * bump[None])


def random_problem(grid: GridSpec, rng: np.random.Generator, *, hdim: int, m: int,
                   horizon: float = 1.0, source: bool = True, width: float = DEFAULT_WIDTH,
                   source_steps: int = 64):
    """One seeded linear multipoint scenario: ``(problem, spec)``."""
    op = random_spd(hdim, rng)
    phi = gaussian_bumps(grid, hdim, rng, width=width)
    psi = gaussian_bumps(grid, hdim, rng, width=width)
    src = smooth_source(grid, hdim, rng, horizon, source_steps) if source else None
    return LinearProblem(grid, op, phi, psi, horizon, src), random_spec(m, rng, horizon)


def ensemble(seed: int, count: int, grid: GridSpec, *, max_hdim: int = 3, max_m: int = 3,
             horizon: float = 1.0, source: bool = True, source_steps: int = 64):
    """``count`` scenarios drawn from one seed; hdim and m vary in ``1..max``."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        d = int(rng.integers(1, max_hdim + 1))
        m = int(rng.integers(1, max_m + 1))
        out.append(random_problem(grid, rng, hdim=d, m=m, horizon=horizon, source=source,
                                  source_steps=source_steps))
    return out


def singular_instance(points: int = 16):
    """A scenario whose ``k = 0`` mode has a vanishing multipoint determinant.

    With ``alpha = beta = 1`` at ``lambda = 1`` the determinant is
    ``2 - 2 cos w``, zero when ``w = 2 pi``; choosing
    ``A = 4 pi^2`` puts that frequency on the zero mode of a ``2 pi`` box.
    """
    grid = GridSpec.cube(2, points)
    op = build_operator([[4 * np.pi**2]])
    rng = np.random.default_rng(0)
    phi = gaussian_bumps(grid, 1, rng, width=0.3)
    problem = LinearProblem(grid, op, phi, Field.zeros(grid, 1), 1.0)
    return problem, MultipointSpec([1.0], [1.0], [1.0])


def strichartz_instance(grid: GridSpec, alpha, rng: np.random.Generator, *, hdim: int = 1, steps: int = 64,
                        horizon: float = 1.0):
    """Seeded zero-mean Cauchy instance for the Strichartz ratio.

    Draws depend on ``rng`` only, so the same seed gives the same continuous
    data on any grid and at any time resolution.
    """
    op = random_spd(hdim, rng)
    phi = zero_mean(gaussian_bumps(grid, hdim, rng, width=(0.5, 0.9)))
    psi = zero_mean(gaussian_bumps(grid, hdim, rng, width=(0.5, 0.9)))
    src = smooth_source(grid, hdim, rng, horizon, steps)
    hat = fft_values(src.values, grid.n)
    hat[(slice(None),) + (0,) * grid.n] = 0
    src = SourceSamples(src.times, ifft_values(hat, grid.n))
    return LinearProblem(grid, op, phi, psi, horizon, src), MultipointSpec.cauchy()
