"""Periodic grids, unitary Fourier transforms, multipliers and norms.

Fields live on a periodic box ``[0, L_1) x ... x [0, L_n)`` and take values in
``C^d``.  Values are stored as complex arrays of shape ``(*points, d)``; the
last axis is the fiber (the components of ``u`` in ``H = C^d``).

The transform is the unitary DFT (``norm="ortho"``), so the discrete
Plancherel identity holds exactly and multipliers need no extra scaling.
Continuous norms are Riemann sums weighted by the cell volume.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from math import inf, prod
from typing import Callable, Sequence

import numpy as np
import scipy.fft
from scipy.integrate import trapezoid

from .errors import GridError, NonFiniteError

DEFAULT_POINT_CAP = 2**24

_workers = 1


def set_workers(n: int) -> None:
    """Set the thread count used by the FFT backend."""
    global _workers
    _workers = max(1, int(n))


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid with ``points[i]`` samples on a box of period ``box_length[i]``."""

    points: tuple
    box_length: tuple
    max_points: int = DEFAULT_POINT_CAP

    def __post_init__(self):
        pts = tuple(int(p) for p in np.atleast_1d(self.points))
        box = np.broadcast_to(np.asarray(self.box_length, dtype=float), (len(pts),))
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "box_length", tuple(float(b) for b in box))
        if len(pts) < 1:
            raise GridError("grid needs at least one dimension")
        for p in pts:
            if p < 4 or p & (p - 1):
                raise GridError(f"sample count {p} must be a power of two >= 4")
        if any(not np.isfinite(b) or b <= 0 for b in self.box_length):
            raise GridError(f"box lengths must be positive, got {self.box_length}")
        if prod(pts) > self.max_points:
            raise GridError(f"{prod(pts)} grid points exceed the cap {self.max_points}")

    @classmethod
    def cube(cls, n: int, points: int, length: float = 2 * np.pi) -> "GridSpec":
        return cls((points,) * n, (length,) * n)

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def shape(self) -> tuple:
        return self.points

    @property
    def size(self) -> int:
        return prod(self.points)

    @property
    def cell_volume(self) -> float:
        return prod(L / p for L, p in zip(self.box_length, self.points))

    @property
    def volume(self) -> float:
        return prod(self.box_length)

    @property
    def axes(self) -> tuple:
        return tuple(range(self.n))

    def coordinates(self) -> list[np.ndarray]:
        """Sample coordinates per dimension, broadcastable to the grid shape."""
        out = []
        for i, (L, p) in enumerate(zip(self.box_length, self.points)):
            shape = [1] * self.n
            shape[i] = p
            out.append((np.arange(p) * (L / p)).reshape(shape))
        return out

    def wavenumbers(self) -> list[np.ndarray]:
        """Integer frequency index ``k`` per dimension in FFT order, broadcastable."""
        out = []
        for i, p in enumerate(self.points):
            shape = [1] * self.n
            shape[i] = p
            out.append(np.fft.fftfreq(p, 1.0 / p).reshape(shape))
        return out

    def frequencies(self) -> list[np.ndarray]:
        """Physical frequencies ``xi = 2 pi k / L`` per dimension, broadcastable."""
        return [2 * np.pi * k / L for k, L in zip(self.wavenumbers(), self.box_length)]

    def xi_squared(self) -> np.ndarray:
        """``|xi|^2`` on the full grid."""
        out = np.zeros(self.points)
        for xi in self.frequencies():
            out = out + xi**2
        return out

    def xi_vectors(self) -> np.ndarray:
        """Array of shape ``(*points, n)`` holding the frequency vector of each mode."""
        return np.stack(np.broadcast_arrays(*self.frequencies()), axis=-1)

    def mode_index(self, flat_or_tuple) -> tuple:
        """Integer frequency vector ``k`` of a grid position."""
        idx = np.unravel_index(flat_or_tuple, self.points) if np.isscalar(flat_or_tuple) else flat_or_tuple
        return tuple(int(np.fft.fftfreq(p, 1.0 / p)[i]) for i, p in zip(idx, self.points))


def _check_finite(values: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(values)):
        bad = np.argwhere(~np.isfinite(values))[0]
        raise NonFiniteError(f"{what} has a non-finite entry at index {tuple(int(i) for i in bad)}")


@dataclass
class Field:
    """An ``H``-valued function sampled on a periodic grid."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape == self.grid.points:
            v = v[..., None]
        if v.shape[:-1] != self.grid.points:
            raise GridError(f"field shape {v.shape} does not match grid {self.grid.points} x hdim")
        _check_finite(v, "field")
        self.values = v

    @property
    def hdim(self) -> int:
        return self.values.shape[-1]

    @classmethod
    def zeros(cls, grid: GridSpec, hdim: int) -> "Field":
        return cls(grid, np.zeros(grid.points + (hdim,), dtype=complex))


@dataclass
class SpectralField:
    """Fourier coefficients of a :class:`Field`, same layout, indexed by ``k``."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape[:-1] != self.grid.points:
            raise GridError(f"spectral shape {v.shape} does not match grid {self.grid.points}")
        self.values = v

    @property
    def hdim(self) -> int:
        return self.values.shape[-1]

    @property
    def xi(self) -> list[np.ndarray]:
        return self.grid.frequencies()


@dataclass(frozen=True)
class SobolevSpec:
    s: float
    homogeneous: bool = False

    def __post_init__(self):
        if not np.isfinite(self.s):
            raise ValueError("Sobolev order must be finite")


def fft_values(values: np.ndarray, n: int) -> np.ndarray:
    return scipy.fft.fftn(values, axes=tuple(range(-n - 1, -1)), norm="ortho", workers=_workers)


def ifft_values(values: np.ndarray, n: int) -> np.ndarray:
    return scipy.fft.ifftn(values, axes=tuple(range(-n - 1, -1)), norm="ortho", workers=_workers)


def forward_transform(f: Field) -> SpectralField:
    _check_finite(f.values, "field")
    return SpectralField(f.grid, fft_values(f.values, f.grid.n))


def inverse_transform(g: SpectralField) -> Field:
    _check_finite(g.values, "spectral field")
    return Field(g.grid, ifft_values(g.values, g.grid.n))


def apply_multiplier(g: SpectralField, m) -> SpectralField:
    """Left-multiply each mode's fiber vector by ``m(xi)``.

    ``m`` is either an array (shape ``(*points,)``, ``(*points, d)`` for a
    diagonal, or ``(*points, d, d)``) or a callable receiving the
    ``(*points, n)`` array of frequency vectors and returning one of those.
    """
    mult = m(g.grid.xi_vectors()) if callable(m) else m
    mult = np.asarray(mult)
    if not np.all(np.isfinite(mult)):
        flat = np.argwhere(~np.isfinite(mult))[0][: g.grid.n]
        raise NonFiniteError(f"multiplier is not finite at frequency index k = {g.grid.mode_index(tuple(flat))}")
    pts, d = g.grid.points, g.hdim
    if mult.ndim == 0 or mult.shape == pts:
        out = g.values * (mult[..., None] if mult.ndim else mult)
    elif mult.shape == pts + (d,):
        out = g.values * mult
    elif mult.shape == pts + (d, d):
        out = np.einsum("...ij,...j->...i", mult, g.values)
    else:
        raise GridError(f"multiplier shape {mult.shape} incompatible with grid {pts} and hdim {d}")
    return SpectralField(g.grid, out)


def sobolev_weight(grid: GridSpec, spec: SobolevSpec) -> np.ndarray:
    """``<xi>^s`` or ``|xi|^s`` on the grid; the zero mode gets 0 for homogeneous weights."""
    xi2 = grid.xi_squared()
    if not spec.homogeneous:
        return (1.0 + xi2) ** (spec.s / 2)
    w = np.zeros_like(xi2)
    nz = xi2 > 0
    w[nz] = xi2[nz] ** (spec.s / 2)
    return w


def sobolev_norm(f: Field, spec: SobolevSpec, *, mean_tol: float = 1e-10) -> float:
    """L2-based Sobolev norm ``||F^-1 w(xi) f^||_{L^2}`` with ``w = <xi>^s`` or ``|xi|^s``.

    A homogeneous norm of negative order needs the mean mode to vanish
    (relative to ``mean_tol``), otherwise the multiplier is singular.
    """
    return sobolev_norm_values(f.values, f.grid, spec, mean_tol=mean_tol, spectral=False)


def sobolev_norm_values(values, grid: GridSpec, spec: SobolevSpec, *, mean_tol=1e-10, spectral=False):
    vhat = np.asarray(values) if spectral else fft_values(np.asarray(values, dtype=complex), grid.n)
    if spec.homogeneous and spec.s < 0:
        zero = np.linalg.norm(vhat[(0,) * grid.n])
        if zero > mean_tol * max(np.linalg.norm(vhat), np.finfo(float).tiny):
            raise ValueError("homogeneous Sobolev norm of negative order needs a zero-mean field")
    w = sobolev_weight(grid, spec)
    return float(np.sqrt(grid.cell_volume * np.sum(w[..., None] ** 2 * np.abs(vhat) ** 2)))


def lebesgue_norm_values(values: np.ndarray, grid: GridSpec, p: float) -> np.ndarray:
    """``||f||_{L^p_x(H)}`` over the trailing ``(*points, d)`` axes; leading axes are kept."""
    if p < 1:
        raise ValueError(f"Lebesgue exponent must be >= 1, got {p}")
    pointwise = np.linalg.norm(values, axis=-1)
    axes = tuple(range(-grid.n, 0))
    if p == inf:
        return np.max(pointwise, axis=axes)
    scale = np.max(pointwise, axis=axes, keepdims=True)
    scale = np.where(scale > 0, scale, 1.0)
    s = np.sum((pointwise / scale) ** p, axis=axes) * grid.cell_volume
    return np.squeeze(scale, axis=axes) * s ** (1.0 / p)


def lebesgue_norm(f: Field, p: float) -> float:
    return float(lebesgue_norm_values(f.values, f.grid, p))


def time_norm(samples: np.ndarray, times: np.ndarray, q: float) -> float:
    """``L^q_t`` norm of nonnegative samples on a uniform grid (composite trapezoid)."""
    if q < 1:
        raise ValueError(f"time exponent must be >= 1, got {q}")
    samples = np.asarray(samples, dtype=float)
    if q == inf:
        return float(np.max(samples))
    if len(times) < 2:
        raise ValueError("mixed norms need at least two time samples")
    scale = samples.max()
    if scale == 0:
        return 0.0
    return float(scale * trapezoid((samples / scale) ** q, times) ** (1.0 / q))


def mixed_norm_values(values: np.ndarray, times: np.ndarray, grid: GridSpec, q: float, r: float) -> float:
    """``L^q_t L^r_x(H)`` of physical samples with shape ``(nt, *points, d)``."""
    if q < 1 or r < 1:
        raise ValueError(f"mixed norm exponents must be >= 1, got q={q}, r={r}")
    times = np.asarray(times, dtype=float)
    if len(times) < 2:
        raise ValueError("mixed norms need at least two time samples")
    steps = np.diff(times)
    if not np.allclose(steps, steps[0], rtol=1e-9, atol=0):
        raise ValueError("mixed norms need a uniform time grid")
    return time_norm(lebesgue_norm_values(values, grid, r), times, q)


@dataclass
class SpectralTrajectory:
    """Spectral snapshots of ``u`` and ``du/dt`` on a uniform time grid.

    ``u_hat`` and ``ut_hat`` have shape ``(nt, *points, d)``.
    """

    grid: GridSpec
    times: np.ndarray
    u_hat: np.ndarray
    ut_hat: np.ndarray
    _phys: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.u_hat.shape != self.ut_hat.shape or self.u_hat.shape[0] != len(self.times):
            raise GridError("trajectory components must share the grid and time axis")
        if self.u_hat.shape[1:-1] != self.grid.points:
            raise GridError("trajectory snapshots do not match the grid")
        _check_finite(self.u_hat, "trajectory")
        _check_finite(self.ut_hat, "trajectory derivative")

    @property
    def hdim(self) -> int:
        return self.u_hat.shape[-1]

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0

    def physical(self, component: str = "u") -> np.ndarray:
        if component not in self._phys:
            data = self.u_hat if component == "u" else self.ut_hat
            self._phys[component] = ifft_values(data, self.grid.n)
        return self._phys[component]

    def snapshot(self, i: int, component: str = "u") -> Field:
        return Field(self.grid, self.physical(component)[i])

    def with_fiber_map(self, matrix: np.ndarray) -> "SpectralTrajectory":
        """Apply a constant ``d x d`` matrix to every fiber (e.g. ``A^alpha u``)."""
        mt = np.asarray(matrix).T
        return SpectralTrajectory(self.grid, self.times, self.u_hat @ mt, self.ut_hat @ mt)

    def scaled(self, c) -> "SpectralTrajectory":
        return SpectralTrajectory(self.grid, self.times, c * self.u_hat, c * self.ut_hat)


def mixed_norm(traj: SpectralTrajectory, q: float, r: float, component: str = "u") -> float:
    """``L^q_t L^r_x(H)`` norm: Riemann sum in space, trapezoid (or max) in time."""
    return mixed_norm_values(traj.physical(component), traj.times, traj.grid, q, r)


def l2s_norm(v, s: float) -> float:
    """Weighted sequence norm ``(sum_j |2^{s j} v_j|^2)^{1/2}`` with ``j`` starting at 1."""
    v = np.asarray(v)
    _check_finite(v, "sequence")
    j = np.arange(1, v.shape[0] + 1, dtype=float)
    w = np.exp2(s * j)
    if v.ndim > 1:
        w = w.reshape((-1,) + (1,) * (v.ndim - 1))
    return float(np.sqrt(np.sum(np.abs(w * v) ** 2)))


# Snapshot file: 32-byte header "MWF1", n, counts[5], hdim (little-endian u32),
# then (real, imag) float64 pairs in row-major (spatial, component) order.
_MAGIC = b"MWF1"
_MAX_DIMS = 5


def write_field(path, f: Field) -> None:
    if f.grid.n > _MAX_DIMS:
        raise GridError(f"snapshot format supports at most {_MAX_DIMS} dimensions")
    counts = list(f.grid.points) + [0] * (_MAX_DIMS - f.grid.n)
    header = _MAGIC + struct.pack("<7I", f.grid.n, *counts, f.hdim)
    body = np.ascontiguousarray(f.values).astype("<c16").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(body)


def read_field(path, box_length: Sequence[float] | float = 2 * np.pi) -> Field:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != _MAGIC or len(raw) < 32:
        raise ValueError(f"{path} is not a field snapshot")
    n, *rest = struct.unpack("<7I", raw[4:32])
    counts, hdim = tuple(rest[:n]), rest[-1]
    expected = 32 + 16 * prod(counts) * hdim
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(raw)}")
    values = np.frombuffer(raw[32:], dtype="<c16").reshape(counts + (hdim,)).astype(complex)
    return Field(GridSpec(counts, box_length), values)


def field_from_function(grid: GridSpec, func: Callable, hdim: int | None = None) -> Field:
    """Sample ``func(*coords)`` on the grid; output may carry a trailing fiber axis."""
    vals = np.asarray(func(*np.broadcast_arrays(*grid.coordinates())), dtype=complex)
    if vals.shape == grid.points:
        vals = vals[..., None]
    if hdim is not None and vals.shape[-1] != hdim:
        vals = np.broadcast_to(vals, grid.points + (hdim,)).copy()
    return Field(grid, vals)
