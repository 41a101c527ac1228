"""Time-stepping schemes for mixed and rough formulations.

Four schemes share two step kernels:

* skewed Euler (mixed): Ito drift, forward Brownian increment, fBm increment
  lagged by one step with B^H before time 0 taken as 0;
* natural Euler (rough): drift plus the Stratonovich correction
  (1/2) sum_i D_b^(i) b^(i), forward increments of both drivers;
* smoothed-drive Euler (mixed): drift a + c * (window-average derivative of
  B^H), Ito Brownian term;
* Milstein-type rough step: first-order increments of the joint driver
  g = (t, W, B^H) plus D_sigma sigma contracted against the per-cell area
  table over the stochastic components.  This is the high-accuracy engine
  behind ``reference_solution``.

All schemes are deterministic given (model, driver paths, grid), and every
kernel is vectorized over a leading batch axis so Monte Carlo sweeps can step
many paths at once.  A non-finite state aborts with the offending step index
rather than propagating.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .calculus import LevyAreaTable, build_levy_area
from .models import MIXED, ROUGH, SdeModel, ito_stratonovich_correction
from .paths import SamplePath, TimeGrid, smoothed_derivative

__all__ = [
    "SolveOutput",
    "NonFiniteStateError",
    "solve_skewed_euler",
    "solve_natural_euler",
    "solve_smoothed_euler",
    "solve_milstein_rough",
    "reference_solution",
    "strong_error",
    "SCHEMES",
]


class NonFiniteStateError(RuntimeError):
    """A scheme produced a non-finite state; integration was aborted."""

    def __init__(self, step: int):
        super().__init__(f"non-finite state after step {step}")
        self.step = step


@dataclass(frozen=True, eq=False)
class SolveOutput:
    """Solution path plus per-step diagnostics.

    ``coefficient_magnitude[k]`` is the largest absolute coefficient value
    evaluated at step k (across the batch when the solve was batched).
    Non-finite states never appear here: they raise NonFiniteStateError with
    the offending step index instead.
    """

    solution: SamplePath
    coefficient_magnitude: np.ndarray


def _require_kind(model: SdeModel, kind: str, scheme: str) -> None:
    if model.kind != kind:
        raise ValueError(f"{scheme} requires a model of kind {kind!r}, got {model.kind!r}")


def _restrict_values(path: SamplePath, grid: TimeGrid) -> np.ndarray:
    """Node values of ``path`` on the (coarser or equal) scheme grid."""
    stride = path.grid.stride_to(grid)
    return path.values[::stride]


def _check_components(values: np.ndarray, count: int, name: str) -> None:
    if values.shape[1] != count:
        raise ValueError(f"{name} path has {values.shape[1]} components, expected {count}")


def _euler_chain(drift_eval, b_eval, c_eval, x0, dt, dw, db):
    """Shared Euler recursion over a batch.

    x0 (P, d); dw (P, N, m) and db (P, N, ell) are the per-step multipliers
    of the diffusion fields (increments, lagged increments, or derivative
    times dt, depending on the scheme).  Returns (states (P, N+1, d),
    coefficient magnitudes (N,)).
    """
    nsteps = dw.shape[1]
    batch, dim = x0.shape
    states = np.empty((batch, nsteps + 1, dim))
    states[:, 0] = x0
    magnitude = np.empty(nsteps)
    x = x0
    for k in range(nsteps):
        a = drift_eval(x)
        bv = b_eval(x)
        cv = c_eval(x)
        magnitude[k] = max(
            np.abs(a).max(initial=0.0),
            np.abs(bv).max(initial=0.0),
            np.abs(cv).max(initial=0.0),
        )
        x = (
            x
            + a * dt
            + np.einsum("pdm,pm->pd", bv, dw[:, k])
            + np.einsum("pdl,pl->pd", cv, db[:, k])
        )
        if not np.all(np.isfinite(x)):
            raise NonFiniteStateError(k)
        states[:, k + 1] = x
    return states, magnitude


def _sigma_functions(coeffs):
    """Joint coefficient sigma = (a | b | c) and its Jacobian, shaped
    (..., d, D) and (..., d, D, d) with D = 1 + m + ell."""
    a, b, c = coeffs.drift, coeffs.brownian, coeffs.fbm
    if a.jacobian is None or b.jacobian is None or c.jacobian is None:
        raise ValueError("Milstein stepping needs analytic jacobians for a, b, c")

    def sigma(x):
        return np.concatenate(
            [a.evaluate(x)[..., None], b.evaluate(x), c.evaluate(x)], axis=-1
        )

    def sigma_jac(x):
        return np.concatenate(
            [a.jacobian(x)[..., None, :], b.jacobian(x), c.jacobian(x)], axis=-2
        )

    return sigma, sigma_jac


def _milstein_chain(sigma, sigma_jac, x0, dg, cells):
    """Milstein-type recursion over a batch.

    dg (P, N, D) holds joint-driver increments (time column first); ``cells``
    is a per-cell area tensor (P, N, D, D) or None, in which case the single
    cell trapezoid value (dg (x) dg) / 2 is used.  Area compensation runs over
    the stochastic components only, so with b = c = 0 the step reduces to
    forward Euler exactly.
    """
    nsteps = dg.shape[1]
    batch, dim = x0.shape
    states = np.empty((batch, nsteps + 1, dim))
    states[:, 0] = x0
    magnitude = np.empty(nsteps)
    x = x0
    for k in range(nsteps):
        s = sigma(x)
        jac = sigma_jac(x)
        if cells is None:
            noise = dg[:, k, 1:]
            block = 0.5 * noise[:, :, None] * noise[:, None, :]
        else:
            block = cells[:, k, 1:, 1:]
        magnitude[k] = np.abs(s).max(initial=0.0)
        x = (
            x
            + np.einsum("pdj,pj->pd", s, dg[:, k])
            + np.einsum("pril,plj,pji->pr", jac[:, :, 1:, :], s[:, :, 1:], block)
        )
        if not np.all(np.isfinite(x)):
            raise NonFiniteStateError(k)
        states[:, k + 1] = x
    return states, magnitude


def _lagged_increments(values: np.ndarray) -> np.ndarray:
    """Per-step fBm multiplier of the skewed scheme: the increment over the
    previous cell, with the step-0 increment equal to 0 (path 0 before 0)."""
    forward = np.diff(values, axis=0)
    return np.vstack([np.zeros((1, values.shape[1])), forward[:-1]])


def solve_skewed_euler(
    model: SdeModel, w: SamplePath, b: SamplePath, grid: TimeGrid
) -> SolveOutput:
    """Euler scheme for the mixed formulation with a one-step lag in the fBm
    increment:

        x_{k+1} = x_k + a(x_k) dt + b(x_k) (W_{k+1} - W_k)
                      + c(x_k) (B^H_k - B^H_{k-1}),   B^H_{-1} := 0.

    ``w`` and ``b`` may live on any refinement of ``grid``.
    """
    _require_kind(model, MIXED, "the skewed Euler scheme")
    d, m, ell = model.dims
    wv = _restrict_values(w, grid)
    bv = _restrict_values(b, grid)
    _check_components(wv, m, "Brownian")
    _check_components(bv, ell, "fBm")
    states, magnitude = _euler_chain(
        model.coeffs.drift.evaluate,
        model.coeffs.brownian.evaluate,
        model.coeffs.fbm.evaluate,
        model.x0[None, :],
        grid.spacing,
        np.diff(wv, axis=0)[None],
        _lagged_increments(bv)[None],
    )
    return SolveOutput(SamplePath(grid, states[0]), magnitude)


def solve_natural_euler(
    model: SdeModel, w: SamplePath, b: SamplePath, grid: TimeGrid
) -> SolveOutput:
    """Euler scheme for the rough formulation: the drift carries the
    Stratonovich correction and both driver increments are forward:

        x_{k+1} = x_k + [a + (1/2) sum_i D_b^(i) b^(i)](x_k) dt
                      + b(x_k) dW_k + c(x_k) dB^H_k.
    """
    _require_kind(model, ROUGH, "the natural Euler scheme")
    d, m, ell = model.dims
    wv = _restrict_values(w, grid)
    bv = _restrict_values(b, grid)
    _check_components(wv, m, "Brownian")
    _check_components(bv, ell, "fBm")
    correction = ito_stratonovich_correction(model.coeffs.brownian)
    base = model.coeffs.drift.evaluate

    def drift(x):
        return base(x) + correction.evaluate(x)

    states, magnitude = _euler_chain(
        drift,
        model.coeffs.brownian.evaluate,
        model.coeffs.fbm.evaluate,
        model.x0[None, :],
        grid.spacing,
        np.diff(wv, axis=0)[None],
        np.diff(bv, axis=0)[None],
    )
    return SolveOutput(SamplePath(grid, states[0]), magnitude)


def solve_smoothed_euler(
    model: SdeModel, w: SamplePath, b: SamplePath, n: int, grid: TimeGrid
) -> SolveOutput:
    """Euler scheme for the window-averaged drive:

        x_{k+1} = x_k + [a(x_k) + c(x_k) dB^{H,n}/dt(t_k)] dt + b(x_k) dW_k,

    where the derivative of the window average is evaluated on the fBm
    path's own grid (n must be aligned with it) and read at the scheme nodes.
    """
    _require_kind(model, MIXED, "the smoothed-drive Euler scheme")
    d, m, ell = model.dims
    wv = _restrict_values(w, grid)
    _check_components(wv, m, "Brownian")
    _check_components(b.values, ell, "fBm")
    derivative = _restrict_values(smoothed_derivative(b, n), grid)
    states, magnitude = _euler_chain(
        model.coeffs.drift.evaluate,
        model.coeffs.brownian.evaluate,
        model.coeffs.fbm.evaluate,
        model.x0[None, :],
        grid.spacing,
        np.diff(wv, axis=0)[None],
        (derivative[:-1] * grid.spacing)[None],
    )
    return SolveOutput(SamplePath(grid, states[0]), magnitude)


def solve_milstein_rough(
    model: SdeModel, table: LevyAreaTable, grid: TimeGrid
) -> SolveOutput:
    """Second-order scheme for the rough formulation driven by a per-cell
    area table: each step adds sigma(x_k) dg_k plus the Jacobian-weighted
    stochastic area block, sigma = (a | b | c), g = (t, W, B^H)."""
    _require_kind(model, ROUGH, "the Milstein-type rough scheme")
    d, m, ell = model.dims
    if table.grid != grid:
        raise ValueError("area table was built on a different grid")
    if (table.n_brownian, table.n_fbm) != (m, ell):
        raise ValueError(
            f"table dims ({table.n_brownian}, {table.n_fbm}) do not match model ({m}, {ell})"
        )
    sigma, sigma_jac = _sigma_functions(model.coeffs)
    states, magnitude = _milstein_chain(
        sigma,
        sigma_jac,
        model.x0[None, :],
        np.diff(table.node_values, axis=0)[None],
        table.cells[None],
    )
    return SolveOutput(SamplePath(grid, states[0]), magnitude)


def _joint_driver(grid: TimeGrid, wv: np.ndarray, bv: np.ndarray) -> SamplePath:
    return SamplePath(grid, np.column_stack([grid.times(), wv, bv]))


def reference_solution(
    model: SdeModel,
    w_fine: SamplePath,
    b_fine: SamplePath,
    coarse: TimeGrid,
    refine: int = 64,
) -> SolveOutput:
    """Strong-error oracle: solve on the grid refined by ``refine`` and read
    the result at the coarse nodes (exact node extraction, no interpolation).

    Rough models use the Milstein-type scheme on the fine grid; mixed models
    use the skewed Euler scheme.  ``refine`` below 4 is rejected: the oracle
    must dominate the accuracy of whatever coarse scheme it judges.
    """
    refine = int(refine)
    if refine < 4:
        raise ValueError("refine must be >= 4 for a trustworthy reference")
    fine = coarse.refine(refine)
    d, m, ell = model.dims
    if model.kind == ROUGH:
        wv = _restrict_values(w_fine, fine)
        bv = _restrict_values(b_fine, fine)
        _check_components(wv, m, "Brownian")
        _check_components(bv, ell, "fBm")
        table = build_levy_area(
            _joint_driver(fine, wv, bv), 1, n_brownian=m, n_fbm=ell
        )
        out = solve_milstein_rough(model, table, fine)
    else:
        out = solve_skewed_euler(model, w_fine, b_fine, fine)
    coarse_values = out.solution.values[::refine]
    return SolveOutput(SamplePath(coarse, coarse_values), out.coefficient_magnitude)


def strong_error(approx: SolveOutput, reference: SolveOutput) -> float:
    """max over shared grid nodes of the Euclidean distance between the two
    solutions."""
    if approx.solution.grid != reference.solution.grid:
        raise ValueError("solutions live on different grids")
    gap = approx.solution.values - reference.solution.values
    return float(np.sqrt((gap**2).sum(axis=1)).max())


# scheme registry: name -> (solver, required model kind); the smoothed-drive
# scheme additionally takes the window level n.
SCHEMES = {
    "skewed-euler": (solve_skewed_euler, MIXED),
    "natural-euler": (solve_natural_euler, ROUGH),
    "smoothed-euler": (solve_smoothed_euler, MIXED),
    "milstein-rough": (solve_milstein_rough, ROUGH),
}
