"""Gaussian driving paths on uniform grids.

Provides exact-in-distribution samplers for multi-component Brownian motion
and fractional Brownian motion with Hurst index H in (1/2, 1), the moving
window average B^{H,n}_t = n * integral of B^H over [(t - 1/n) v 0, t] and
its derivative, grid Hoelder seminorms, and a binary dump format for paths.

The fBm sampler uses circulant embedding of the fractional Gaussian noise
autocovariance (an FFT method, O(N log N) per path).  If the embedding has
materially negative eigenvalues it falls back to a dense eigenfactorization
of the node covariance matrix with eigenvalue clipping.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "TimeGrid",
    "SamplePath",
    "FbmParams",
    "RngSeed",
    "PathGenerationError",
    "fbm_covariance",
    "sample_brownian",
    "sample_fbm",
    "smooth_fbm",
    "smoothed_derivative",
    "holder_seminorm",
    "write_path",
    "read_path",
]

# RNG stream tags keeping the Brownian and fBm draws of one (seed, stream)
# pair disjoint.
_BROWNIAN_TAG = 1
_FBM_TAG = 2

# Hoelder seminorms scan all node pairs up to this many steps and only
# power-of-two lags beyond it.
_DENSE_PAIR_LIMIT = 2**13

# Relative size (w.r.t. the largest eigenvalue) below which negative circulant
# eigenvalues are treated as roundoff and clipped silently.
_EMBEDDING_TOL = 1e-8


class PathGenerationError(RuntimeError):
    """Raised when no valid Gaussian factorization can be constructed."""


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid 0 = t_0 < t_1 < ... < t_N = T with t_k = k * T / N."""

    horizon: float
    steps: int

    def __post_init__(self):
        if not (np.isfinite(self.horizon) and self.horizon > 0):
            raise ValueError(f"horizon must be positive and finite, got {self.horizon}")
        if int(self.steps) != self.steps or self.steps < 2:
            raise ValueError(f"need an integer number of steps >= 2, got {self.steps}")
        object.__setattr__(self, "steps", int(self.steps))

    @property
    def spacing(self) -> float:
        return self.horizon / self.steps

    def times(self) -> np.ndarray:
        """All N + 1 node times."""
        return np.linspace(0.0, self.horizon, self.steps + 1)

    def refine(self, factor: int) -> "TimeGrid":
        """Grid with the same horizon and ``factor`` times as many steps."""
        factor = int(factor)
        if factor < 1:
            raise ValueError("refinement factor must be >= 1")
        return TimeGrid(self.horizon, self.steps * factor)

    def stride_to(self, coarse: "TimeGrid") -> int:
        """Node stride mapping ``coarse`` into this grid.

        Raises ValueError if this grid is not a refinement of ``coarse``.
        """
        if not np.isclose(self.horizon, coarse.horizon, rtol=1e-12, atol=0.0):
            raise ValueError("grids cover different horizons")
        if self.steps % coarse.steps:
            raise ValueError(f"{self.steps} steps do not refine {coarse.steps} steps")
        return self.steps // coarse.steps


@dataclass(frozen=True, eq=False)
class SamplePath:
    """Multi-component path values on the nodes of a uniform grid.

    ``values`` has shape (N + 1, c); entries are finite float64 and the array
    is frozen after construction.
    """

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] != self.grid.steps + 1:
            raise ValueError(
                f"values must have shape ({self.grid.steps + 1}, c), got {v.shape}"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("path values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n_components(self) -> int:
        return self.values.shape[1]

    def component(self, index: int) -> np.ndarray:
        """Node values of one component as a read-only 1-d array."""
        return self.values[:, index]


@dataclass(frozen=True)
class FbmParams:
    """Hurst index and component count for fractional Brownian motion.

    Only the long-memory regime 1/2 < H < 1 is supported; the pathwise
    integration theory used downstream fails at and below H = 1/2.
    """

    hurst: float
    components: int = 1

    def __post_init__(self):
        if not 0.5 < self.hurst < 1.0:
            raise ValueError(f"hurst must lie in (1/2, 1), got {self.hurst}")
        if self.components < 0:
            raise ValueError("components must be >= 0")


@dataclass(frozen=True)
class RngSeed:
    """Reproducible randomness address: one base seed plus a stream index.

    The same (seed, stream) pair always reproduces identical paths bit for
    bit.  Independent Monte Carlo paths use consecutive stream indices;
    Brownian and fBm draws of the same pair come from disjoint substreams.
    """

    seed: int
    stream: int = 0

    def __post_init__(self):
        if self.stream < 0:
            raise ValueError("stream index must be >= 0")
        object.__setattr__(self, "seed", int(self.seed) & (2**64 - 1))

    def generator(self, tag: int) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence(entropy=(self.seed, self.stream, tag))
        )

    def with_stream(self, stream: int) -> "RngSeed":
        return RngSeed(self.seed, stream)


def fbm_covariance(hurst, s, t):
    """Covariance of fBm: ``0.5 * (t^{2H} + s^{2H} - |t - s|^{2H})``.

    Accepts scalars or broadcastable arrays of non-negative times; H may be
    anywhere in (0, 1) here even though the samplers restrict to H > 1/2.
    """
    if not 0.0 < hurst < 1.0:
        raise ValueError(f"hurst must lie in (0, 1), got {hurst}")
    s = np.asarray(s, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if np.any(s < 0) or np.any(t < 0):
        raise ValueError("times must be non-negative")
    two_h = 2.0 * hurst
    out = 0.5 * (t**two_h + s**two_h - np.abs(t - s) ** two_h)
    return float(out) if out.ndim == 0 else out


def sample_brownian(grid: TimeGrid, m: int, seed: RngSeed) -> SamplePath:
    """Standard m-dimensional Brownian motion at the grid nodes.

    Components are independent, start at 0, and have independent N(0, dt)
    increments over the grid cells.
    """
    if m < 0:
        raise ValueError("component count must be >= 0")
    rng = seed.generator(_BROWNIAN_TAG)
    dw = rng.normal(0.0, np.sqrt(grid.spacing), size=(grid.steps, m))
    values = np.vstack([np.zeros((1, m)), np.cumsum(dw, axis=0)])
    return SamplePath(grid, values)


# Circulant eigenvalue factors keyed by (hurst, steps); None marks an
# embedding rejected for negative eigenvalues.
_spectrum_cache: dict = {}


def _fgn_spectrum(hurst: float, n: int):
    """sqrt(eigenvalue / 2n) factors of the 2n-circulant embedding of the
    unit-spacing fractional Gaussian noise autocovariance, or None if the
    embedding is not positive semi-definite."""
    key = (float(hurst), int(n))
    if key in _spectrum_cache:
        return _spectrum_cache[key]
    k = np.arange(n + 1, dtype=np.float64)
    two_h = 2.0 * hurst
    rho = 0.5 * ((k + 1) ** two_h - 2.0 * k**two_h + np.abs(k - 1) ** two_h)
    row = np.concatenate([rho, rho[-2:0:-1]])
    eigs = np.fft.fft(row).real
    if eigs.min() < -_EMBEDDING_TOL * eigs.max():
        coeff = None
    else:
        coeff = np.sqrt(np.clip(eigs, 0.0, None) / (2 * n))
    _spectrum_cache[key] = coeff
    return coeff


def _fgn_circulant(coeff: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """One exact unit-spacing fGn sample of length n from the embedding."""
    z = rng.standard_normal(2 * n)
    xi = np.empty(2 * n, dtype=np.complex128)
    xi[0] = z[0]
    xi[n] = z[1]
    half = (z[2 : n + 1] + 1j * z[n + 1 :]) / np.sqrt(2.0)
    xi[1:n] = half
    xi[n + 1 :] = np.conj(half[::-1])
    return np.fft.fft(coeff * xi).real[:n]


_dense_cache: dict = {}


def _fbm_dense_factor(hurst: float, grid: TimeGrid) -> np.ndarray:
    """Matrix L with L L^T equal to the node covariance [R_H(t_j, t_k)].

    Negative eigenvalues are clipped at zero and the spectrum rescaled so the
    total variance (trace) is preserved.
    """
    key = (float(hurst), grid.horizon, grid.steps)
    if key in _dense_cache:
        return _dense_cache[key]
    t = grid.times()[1:]
    cov = fbm_covariance(hurst, t[:, None], t[None, :])
    eigvals, eigvecs = np.linalg.eigh(cov)
    if eigvals.min() < 0:
        total = eigvals.sum()
        clipped = np.clip(eigvals, 0.0, None)
        mass = clipped.sum()
        if not (np.isfinite(total) and total > 0 and mass > 0):
            raise PathGenerationError(
                "covariance matrix is not positive after regularization"
            )
        eigvals = clipped * (total / mass)
        warnings.warn(
            "fBm covariance had negative eigenvalues; clipped and rescaled",
            RuntimeWarning,
            stacklevel=3,
        )
    factor = eigvecs * np.sqrt(eigvals)
    _dense_cache[key] = factor
    return factor


def sample_fbm(grid: TimeGrid, params: FbmParams, seed: RngSeed) -> SamplePath:
    """Fractional Brownian motion sampled exactly (in distribution) at the
    grid nodes.

    Each component is an independent centered Gaussian vector with covariance
    ``fbm_covariance(H, t_j, t_k)`` and value 0 at node 0.  Independence from
    any Brownian path drawn with the same RngSeed is guaranteed by disjoint
    RNG substreams.
    """
    rng = seed.generator(_FBM_TAG)
    n = grid.steps
    coeff = _fgn_spectrum(params.hurst, n)
    if coeff is None:
        warnings.warn(
            "circulant embedding not positive semi-definite; "
            "falling back to dense factorization",
            RuntimeWarning,
            stacklevel=2,
        )
        factor = _fbm_dense_factor(params.hurst, grid)
    if params.components == 0:
        return SamplePath(grid, np.zeros((n + 1, 0)))
    scale = grid.spacing**params.hurst
    cols = []
    for _ in range(params.components):
        if coeff is not None:
            increments = scale * _fgn_circulant(coeff, n, rng)
            levels = np.cumsum(increments)
        else:
            levels = factor @ rng.standard_normal(n)
        cols.append(np.concatenate([[0.0], levels]))
    return SamplePath(grid, np.column_stack(cols))


def _window_cells(grid: TimeGrid, n: int) -> int:
    """Number of grid cells in the averaging window 1/n; the window must be
    an integer multiple of the grid spacing."""
    if n < 1:
        raise ValueError("smoothing level n must be >= 1")
    w = 1.0 / (n * grid.spacing)
    cells = int(round(w))
    if cells < 1 or abs(w - cells) > 1e-9 * max(1.0, w):
        raise ValueError(
            f"window 1/n = {1.0 / n} is not an integer multiple of the "
            f"grid spacing {grid.spacing}"
        )
    return cells


def smooth_fbm(path: SamplePath, n: int) -> SamplePath:
    """Moving window average ``n * integral over [(t - 1/n) v 0, t]``.

    The path is extended by zero for t <= 0 (the window is clamped at 0) and
    the integral over each grid cell is the composite trapezoid value, which
    matches the piecewise-linear interpolant of the node values exactly.
    """
    cells = _window_cells(path.grid, n)
    v = path.values
    dt = path.grid.spacing
    mass = 0.5 * dt * (v[:-1] + v[1:])
    cumulative = np.vstack([np.zeros((1, v.shape[1])), np.cumsum(mass, axis=0)])
    lower = np.maximum(np.arange(path.grid.steps + 1) - cells, 0)
    return SamplePath(path.grid, n * (cumulative - cumulative[lower]))


def smoothed_derivative(path: SamplePath, n: int) -> SamplePath:
    """Derivative of the moving window average: ``n * (f(t) - f((t - 1/n) v 0))``."""
    cells = _window_cells(path.grid, n)
    v = path.values
    lower = np.maximum(np.arange(path.grid.steps + 1) - cells, 0)
    return SamplePath(path.grid, n * (v - v[lower]))


def _pair_lags(nsteps: int) -> np.ndarray:
    if nsteps <= _DENSE_PAIR_LIMIT:
        return np.arange(1, nsteps + 1)
    lags = 2 ** np.arange(int(np.log2(nsteps)) + 1)
    return lags[lags <= nsteps]


def _holder_rows(rows: np.ndarray, dt: float, gamma: float) -> np.ndarray:
    """Grid Hoelder seminorm of each row of ``rows`` (shape (B, N + 1))."""
    nsteps = rows.shape[1] - 1
    best = np.zeros(rows.shape[0])
    for lag in _pair_lags(nsteps):
        diff = np.max(np.abs(rows[:, lag:] - rows[:, :-lag]), axis=1)
        np.maximum(best, diff / (lag * dt) ** gamma, out=best)
    return best


def holder_seminorm(path: SamplePath, component: int, gamma: float) -> float:
    """max over node pairs j < k of |f(t_k) - f(t_j)| / (t_k - t_j)^gamma.

    All pairs are scanned for grids up to 2^13 steps; beyond that only pairs
    whose index distance is a power of two are used (they realize the
    supremum up to a bounded factor).
    """
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    row = path.component(component)[None, :]
    return float(_holder_rows(row, path.grid.spacing, gamma)[0])


# ---------------------------------------------------------------------------
# binary dump format: little-endian header + row-major float64 values

_PATH_MAGIC = b"MSP1"
_PATH_VERSION = 1
_HEADER = struct.Struct("<4sIQQddq")  # magic, version, N, c, T, hurst, seed


def write_path(path: SamplePath, dest, hurst: float | None = None, seed: int = 0) -> None:
    """Dump a SamplePath: header (magic, version, N, c, T, H-if-fBm, seed)
    followed by the (N + 1) x c node values, row-major little-endian float64."""
    header = _HEADER.pack(
        _PATH_MAGIC,
        _PATH_VERSION,
        path.grid.steps,
        path.n_components,
        path.grid.horizon,
        np.nan if hurst is None else float(hurst),
        int(seed),
    )
    payload = np.ascontiguousarray(path.values, dtype="<f8").tobytes()
    if hasattr(dest, "write"):
        dest.write(header + payload)
    else:
        with open(dest, "wb") as fh:
            fh.write(header + payload)


def read_path(src) -> tuple[SamplePath, dict]:
    """Read a path dump; returns the SamplePath and its header metadata."""
    if hasattr(src, "read"):
        raw = src.read()
    else:
        with open(src, "rb") as fh:
            raw = fh.read()
    magic, version, nsteps, ncomp, horizon, hurst, seed = _HEADER.unpack_from(raw)
    if magic != _PATH_MAGIC:
        raise ValueError("not a path dump (bad magic)")
    if version != _PATH_VERSION:
        raise ValueError(f"unsupported dump version {version}")
    count = (nsteps + 1) * ncomp
    values = np.frombuffer(raw, dtype="<f8", count=count, offset=_HEADER.size)
    path = SamplePath(TimeGrid(horizon, nsteps), values.reshape(nsteps + 1, ncomp))
    meta = {
        "version": version,
        "hurst": None if np.isnan(hurst) else hurst,
        "seed": seed,
    }
    return path, meta
