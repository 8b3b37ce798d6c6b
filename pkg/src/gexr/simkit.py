"""Exact-in-distribution Gaussian path and field simulation on grids.

Generators are pure functions of (spec, grid, stream).  Each generator has a
sampler class that performs the one-off precomputation (circulant spectrum or
Cholesky factor) and then draws batches; the ``simulate_*`` wrappers return a
single :class:`SamplePath` for interactive use.

Fractional-Brownian-type paths on uniform grids go through circulant
embedding of the increment autocovariance (O(n log n), exact in law); general
stationary-increment variance functions and conditional residual fields go
through Cholesky factorization with a bounded jitter schedule.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import IO, Sequence

import numpy as np

from .covmodels import (
    LimitFieldComponent,
    LimitFieldSpec,
    ModelError,
    ThresholdedFamilySpec,
    VarianceFunction,
    fgn_autocovariance,
)
from .rng import RngStream

__all__ = [
    "GridSpec",
    "SamplePath",
    "FbmSampler",
    "StatIncrSampler",
    "LimitFieldSampler",
    "ResidualSampler",
    "simulate_fgn",
    "simulate_statincr",
    "simulate_limit_field",
    "simulate_conditional_residual",
    "dump_paths",
]

DEFAULT_POINT_BUDGET = 1 << 20

# negative circulant eigenvalues below this (relative to gamma(0)) are a hard
# error; smaller ones are numerical noise and get clipped
EMBEDDING_TOL = 1e-8

CHOLESKY_JITTERS = (0.0, 1e-12, 1e-10)


class SimulationError(RuntimeError):
    """Numerical breakdown in a generator (non-PSD model, bad embedding)."""


# ---------------------------------------------------------------------------
# grids and paths


@dataclass(frozen=True)
class GridSpec:
    """Uniform rectangular grid, one (lo, hi, n_points) triple per axis."""

    per_axis: tuple[tuple[float, float, int], ...]
    point_budget: int = DEFAULT_POINT_BUDGET

    def __post_init__(self):
        for lo, hi, n in self.per_axis:
            if n < 1:
                raise ModelError("each axis needs at least 1 point")
            if n == 1:
                if hi != lo:
                    raise ModelError("a single-point axis needs hi == lo")
            elif hi <= lo:
                raise ModelError("axis upper bound must exceed lower bound")
        if self.size > self.point_budget:
            raise ModelError(
                f"grid has {self.size} points, exceeding budget {self.point_budget}"
            )

    @staticmethod
    def line(lo: float, hi: float, n_points: int) -> "GridSpec":
        return GridSpec(((lo, hi, n_points),))

    @property
    def dim(self) -> int:
        return len(self.per_axis)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(n for _, _, n in self.per_axis)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def steps(self) -> tuple[float, ...]:
        return tuple(
            (hi - lo) / (n - 1) if n > 1 else 0.0 for lo, hi, n in self.per_axis
        )

    def axis_values(self, i: int) -> np.ndarray:
        lo, hi, n = self.per_axis[i]
        if n == 1:
            return np.array([lo if lo != 0.0 else 0.0])
        vals = lo + (hi - lo) * np.arange(n) / (n - 1)
        # snap the origin onto the grid exactly when it is spanned
        if lo <= 0.0 <= hi:
            j = int(np.argmin(np.abs(vals)))
            if abs(vals[j]) < 0.5 * (hi - lo) / (n - 1):
                vals[j] = 0.0
        return vals

    def axes(self) -> list[np.ndarray]:
        return [self.axis_values(i) for i in range(self.dim)]

    def points(self) -> np.ndarray:
        """(size, dim) array of grid points, C order."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=-1)

    def origin_index(self) -> tuple[int, ...]:
        """Multi-index of the origin; error if the origin is off-grid."""
        idx = []
        for i in range(self.dim):
            vals = self.axis_values(i)
            j = int(np.argmin(np.abs(vals)))
            if vals[j] != 0.0:
                raise ModelError("grid does not contain the origin")
            idx.append(j)
        return tuple(idx)


@dataclass(frozen=True)
class SamplePath:
    grid: GridSpec
    values: np.ndarray  # shaped grid.shape

    def __post_init__(self):
        if tuple(self.values.shape) != self.grid.shape:
            raise ModelError("path values do not match grid shape")


# ---------------------------------------------------------------------------
# low-level factorizations


def _chol_psd(cov: np.ndarray) -> np.ndarray:
    """Cholesky with a bounded jitter schedule; raises SimulationError."""
    scale = float(np.max(np.diag(cov))) if cov.size else 1.0
    if scale <= 0:
        scale = 1.0
    for jit in CHOLESKY_JITTERS:
        try:
            return np.linalg.cholesky(cov + jit * scale * np.eye(cov.shape[0]))
        except np.linalg.LinAlgError:
            continue
    raise SimulationError("covariance is not numerically nonnegative definite")


class _CirculantNoise:
    """Circulant-embedding sampler for stationary increments on a ring."""

    def __init__(self, alpha: float, n_incr: int, step: float):
        m = 1 << max(1, int(math.ceil(math.log2(2 * max(n_incr, 1)))))
        gamma = np.array([fgn_autocovariance(alpha, step, k) for k in range(m // 2 + 1)])
        ring = np.concatenate([gamma, gamma[-2:0:-1]])
        lam = np.fft.rfft(ring).real
        floor = -EMBEDDING_TOL * gamma[0]
        if np.any(lam < floor):
            raise SimulationError(
                "negative circulant eigenvalue in increment embedding; "
                "this signals numerical breakdown for the requested alpha/n"
            )
        lam = np.clip(lam, 0.0, None)
        self.m = m
        self.n_incr = n_incr
        # spectral weights for the Hermitian-symmetric normal draw
        self._sqrt_lam = np.sqrt(lam / m)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """(size, n_incr) stationary increments with the target covariance."""
        m = self.m
        half = m // 2
        z_re = rng.standard_normal((size, half + 1))
        z_im = rng.standard_normal((size, half - 1))
        spec = np.empty((size, half + 1), dtype=complex)
        spec[:, 0] = z_re[:, 0] * self._sqrt_lam[0] * math.sqrt(m)
        spec[:, half] = z_re[:, half] * self._sqrt_lam[half] * math.sqrt(m)
        mid = self._sqrt_lam[1:half] * math.sqrt(m / 2.0)
        spec[:, 1:half] = (z_re[:, 1:half] + 1j * z_im) * mid
        noise = np.fft.irfft(spec, n=m, axis=1) * math.sqrt(m)
        return noise[:, : self.n_incr]


class FbmSampler:
    """Paths with Var X(t) = |t|**alpha on a uniform grid containing 0.

    The grid runs from -n_left*step to n_right*step; X(0) = 0 exactly.
    Uses one circulant embedding over the whole span and recenters at the
    origin (increment stationarity makes this exact in law).
    """

    def __init__(self, alpha: float, step: float, n_right: int, n_left: int = 0):
        if n_right < 0 or n_left < 0 or n_right + n_left < 1:
            raise ModelError("need at least one increment")
        self.alpha = alpha
        self.step = step
        self.n_left = n_left
        self.n_right = n_right
        self._noise = _CirculantNoise(alpha, n_left + n_right, step)

    @property
    def n_points(self) -> int:
        return self.n_left + self.n_right + 1

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        incr = self._noise.sample(rng, size)
        path = np.concatenate(
            [np.zeros((size, 1)), np.cumsum(incr, axis=1)], axis=1
        )
        # recenter so that the value at the origin (index n_left) is 0
        return path - path[:, self.n_left : self.n_left + 1]

    def grid_values(self) -> np.ndarray:
        return np.arange(-self.n_left, self.n_right + 1) * self.step


class StatIncrSampler:
    """Cholesky sampler for a stationary-increment process on arbitrary lags.

    Cov(X(s), X(t)) = (sigma2(|s|) + sigma2(|t|) - sigma2(|t-s|)) / 2.
    Points with zero variance (the origin) are pinned to 0 exactly.
    """

    def __init__(self, vf: VarianceFunction, t_values: np.ndarray):
        t = np.asarray(t_values, dtype=float)
        var = vf(np.abs(t))
        dist = np.abs(t[:, None] - t[None, :])
        cov = 0.5 * (var[:, None] + var[None, :] - vf(dist))
        self.t_values = t
        self._free = var > 0
        try:
            self._L = _chol_psd(cov[np.ix_(self._free, self._free)])
        except SimulationError as exc:
            raise SimulationError(
                f"variance model rejected as not nonnegative definite: {exc}"
            ) from exc

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        z = rng.standard_normal((size, int(self._free.sum())))
        out = np.zeros((size, len(self.t_values)))
        out[:, self._free] = z @ self._L.T
        return out


def _component_sampler(comp: LimitFieldComponent, axis_values: np.ndarray):
    """Sampler for the unit process W of one limit-field component."""
    t = np.asarray(axis_values, dtype=float)
    uniform = len(t) >= 2 and np.allclose(np.diff(t), t[1] - t[0], rtol=0, atol=1e-12)
    if comp.mode == 0.0 or math.isinf(comp.mode):
        alpha = comp.base.alpha0 if comp.mode == 0.0 else comp.base.alpha_inf
        if uniform and np.any(t == 0.0):
            step = float(t[1] - t[0])
            n_left = int(np.argmin(np.abs(t)))
            return FbmSampler(alpha, step, len(t) - 1 - n_left, n_left)
        return StatIncrSampler(VarianceFunction.fbm(alpha), t)
    scale = 1.0 / math.sqrt(float(comp.base(comp.mode)))

    class _Scaled:
        def __init__(self):
            self._inner = StatIncrSampler(comp.base, comp.mode * t)

        def sample(self, rng, size):
            return self._inner.sample(rng, size) * scale

    return _Scaled()


class LimitFieldSampler:
    """Additive limit field over a d-dimensional grid.

    Field value at t equals sum_i sqrt(c_i) W_i(t_{axis_i}) with independent
    one-dimensional components; the batch shape is (size, *grid.shape).
    """

    def __init__(self, eta: LimitFieldSpec, grid: GridSpec):
        if grid.dim != eta.dim:
            raise ModelError("grid dimension does not match field dimension")
        self.eta = eta
        self.grid = grid
        self._samplers = [
            (c, _component_sampler(c, grid.axis_values(c.axis)))
            for c in eta.components
            if c.scale > 0
        ]

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        out = np.zeros((size, *self.grid.shape))
        for k, (comp, sampler) in enumerate(self._samplers):
            w = sampler.sample(rng, size) * math.sqrt(comp.scale)
            shape = [size] + [1] * self.grid.dim
            shape[1 + comp.axis] = self.grid.shape[comp.axis]
            out += w.reshape(shape)
        return out

    def variance(self) -> np.ndarray:
        """Analytic Var eta on the grid, shaped grid.shape."""
        return self.eta.variance(self.grid.points()).reshape(self.grid.shape)


class ResidualSampler:
    """Conditional residual R(t) = Z(t) - r(t,0) Z(0) of a family member.

    R(0) = 0 exactly and Cov(R(s), R(t)) = r(s,t) - r(s,0) r(t,0); Z(0) is
    never sampled, the residual covariance is factored directly.
    """

    def __init__(
        self, family: ThresholdedFamilySpec, u: float, tau: float, grid: GridSpec
    ):
        grid.origin_index()  # the conditioning identity pivots on t = 0
        pts = grid.points()
        r = family.corr_matrix(u, tau, pts)
        origin = np.zeros((1, grid.dim))
        r0 = np.asarray(family.correlation(u, tau, pts, origin)).reshape(-1)
        cov = r - np.outer(r0, r0)
        free = np.diag(cov) > 1e-14
        self.grid = grid
        self.r0 = r0
        self._free = free
        self._L = _chol_psd(cov[np.ix_(free, free)]) if np.any(free) else None

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        out = np.zeros((size, self.grid.size))
        if self._L is not None:
            z = rng.standard_normal((size, int(self._free.sum())))
            out[:, self._free] = z @ self._L.T
        return out.reshape(size, *self.grid.shape)


# ---------------------------------------------------------------------------
# one-shot wrappers


def simulate_fgn(alpha: float, n: int, step: float, rng: RngStream) -> SamplePath:
    """A path of Var |t|**alpha on {0, step, ..., n*step} via circulant embedding."""
    sampler = FbmSampler(alpha, step, n_right=n)
    values = sampler.sample(rng.generator(), 1)[0]
    return SamplePath(GridSpec.line(0.0, n * step, n + 1), values)


def simulate_statincr(vf: VarianceFunction, grid: GridSpec, rng: RngStream) -> SamplePath:
    if grid.dim != 1:
        raise ModelError("simulate_statincr expects a 1-D grid")
    sampler = StatIncrSampler(vf, grid.axis_values(0))
    return SamplePath(grid, sampler.sample(rng.generator(), 1)[0])


def simulate_limit_field(eta: LimitFieldSpec, grid: GridSpec, rng: RngStream) -> SamplePath:
    sampler = LimitFieldSampler(eta, grid)
    return SamplePath(grid, sampler.sample(rng.generator(), 1)[0])


def simulate_conditional_residual(
    family: ThresholdedFamilySpec, u: float, tau: float, grid: GridSpec, rng: RngStream
) -> SamplePath:
    sampler = ResidualSampler(family, u, tau, grid)
    return SamplePath(grid, sampler.sample(rng.generator(), 1)[0])


# ---------------------------------------------------------------------------
# binary path dumps

_MAGIC = b"GEXT"
_VERSION = 1


def dump_paths(paths: Sequence[SamplePath] | SamplePath, fh: IO[bytes]) -> None:
    """Write paths as little-endian float64, row-major, with a 16-byte header.

    Header: magic "GEXT", uint16 version, uint16 dim, then up to four uint16
    per-axis counts (zero-padded).  All paths must share one grid.
    """
    if isinstance(paths, SamplePath):
        paths = [paths]
    grid = paths[0].grid
    if grid.dim > 4:
        raise ModelError("binary dump supports at most 4 axes")
    counts = list(grid.shape) + [0] * (4 - grid.dim)
    fh.write(_MAGIC + struct.pack("<HH4H", _VERSION, grid.dim, *counts))
    for p in paths:
        if p.grid.shape != grid.shape:
            raise ModelError("all dumped paths must share one grid")
        fh.write(np.ascontiguousarray(p.values, dtype="<f8").tobytes())


def load_paths(fh: IO[bytes]) -> tuple[tuple[int, ...], np.ndarray]:
    """Read a dump back; returns (per-axis counts, array (n_paths, *counts))."""
    head = fh.read(16)
    if len(head) != 16 or head[:4] != _MAGIC:
        raise ModelError("not a path dump (bad magic)")
    version, dim, *counts = struct.unpack("<HH4H", head[4:])
    if version != _VERSION:
        raise ModelError(f"unsupported dump version {version}")
    shape = tuple(counts[:dim])
    body = np.frombuffer(fh.read(), dtype="<f8")
    per = int(np.prod(shape))
    if body.size % per:
        raise ModelError("truncated path dump")
    return shape, body.reshape(-1, *shape)
