"""Coefficient fields, drift-correction transforms, and the model zoo.

A VectorField couples an evaluation map with its hand-coded Jacobian; all
maps accept batched states of shape (..., d).  The central transforms move a
coefficient set between the Ito (mixed) formulation and the Stratonovich /
rough formulation by shifting the drift by +/- (1/2) sum_i D_b^(i) b^(i),
where D_c^(i) f = Jacobian(f) . c^(i) is the derivative of f along the i-th
column of c.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

__all__ = [
    "VectorField",
    "CoefficientSet",
    "SdeModel",
    "MIXED",
    "ROUGH",
    "HYP_BOUNDED_SMOOTH",
    "HYP_LINEAR_GROWTH",
    "constant_field",
    "apply_D",
    "ito_stratonovich_correction",
    "mixed_from_rough",
    "rough_from_mixed",
    "jacobian_check",
    "make_model",
    "zoo_names",
    "model_info",
]

MIXED = "mixed"
ROUGH = "rough"

# Hypothesis tags: bounded with two bounded derivatives (the class every
# transform and rate experiment assumes) vs. merely C^1 with linear growth
# (admissible for mixed-solver smoke tests only).
HYP_BOUNDED_SMOOTH = "bounded-smooth"
HYP_LINEAR_GROWTH = "linear-growth"


@dataclass(frozen=True)
class VectorField:
    """Evaluable map on R^d with an optional analytic Jacobian.

    ``shape`` is (d,) for drift-like fields or (d, k) for diffusion-like
    fields; ``evaluate`` maps (..., d) -> (..., *shape) and ``jacobian`` maps
    (..., d) -> (..., *shape, d), the trailing axis indexing the partial
    derivative direction.
    """

    dim: int
    shape: tuple
    evaluate: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if len(self.shape) not in (1, 2) or self.shape[0] != self.dim:
            raise ValueError(f"output shape {self.shape} incompatible with dim {self.dim}")

    def column(self, index: int) -> "VectorField":
        """Column i of a diffusion-like field, as a drift-like field."""
        if len(self.shape) != 2:
            raise ValueError("column() requires a matrix-valued field")
        if not 0 <= index < self.shape[1]:
            raise ValueError(f"column {index} out of range")
        evaluate = lambda x, _f=self.evaluate, _i=index: _f(x)[..., :, _i]
        jac = None
        if self.jacobian is not None:
            jac = lambda x, _j=self.jacobian, _i=index: _j(x)[..., :, _i, :]
        return VectorField(self.dim, (self.dim,), evaluate, jac)


def constant_field(dim: int, value) -> VectorField:
    """Field with a constant value and zero Jacobian."""
    value = np.asarray(value, dtype=np.float64)
    if value.shape[0] != dim or value.ndim not in (1, 2):
        raise ValueError(f"constant of shape {value.shape} incompatible with dim {dim}")

    def evaluate(x, _v=value):
        return np.broadcast_to(_v, x.shape[:-1] + _v.shape).copy()

    def jacobian(x, _v=value):
        return np.zeros(x.shape[:-1] + _v.shape + (dim,))

    return VectorField(dim, value.shape, evaluate, jacobian)


def apply_D(c: VectorField, column: int, f: VectorField) -> VectorField:
    """Derivative of f along column i of c:  x -> Jacobian_f(x) . c^(i)(x)."""
    if len(c.shape) != 2:
        raise ValueError("c must be a matrix-valued field")
    if not 0 <= column < c.shape[1]:
        raise ValueError(f"column {column} out of range for shape {c.shape}")
    if f.dim != c.dim:
        raise ValueError(f"dimension mismatch: c on R^{c.dim}, f on R^{f.dim}")
    if f.jacobian is None:
        raise ValueError("f needs an analytic jacobian")
    matrix_valued = len(f.shape) == 2

    def evaluate(x):
        jac = f.jacobian(x)
        col = c.evaluate(x)[..., :, column]
        if matrix_valued:
            return np.einsum("...rkl,...l->...rk", jac, col)
        return np.einsum("...rl,...l->...r", jac, col)

    return VectorField(f.dim, f.shape, evaluate, None)


def ito_stratonovich_correction(b: VectorField) -> VectorField:
    """Drift shift between the Ito and Stratonovich readings of the Brownian
    integral: (1/2) sum_i D_b^(i) b^(i), a drift-like field on R^d."""
    if len(b.shape) != 2:
        raise ValueError("b must be a matrix-valued field")
    if b.jacobian is None:
        raise ValueError("b needs an analytic jacobian")

    def evaluate(x):
        jac = b.jacobian(x)  # (..., d, m, d)
        val = b.evaluate(x)  # (..., d, m)
        return 0.5 * np.einsum("...ril,...li->...r", jac, val)

    return VectorField(b.dim, (b.dim,), evaluate, None)


@dataclass(frozen=True)
class CoefficientSet:
    """Drift a (d), Brownian diffusion b (d x m), fBm diffusion c (d x ell),
    plus the smoothness class the set is declared to satisfy."""

    drift: VectorField
    brownian: VectorField
    fbm: VectorField
    hypothesis: str = HYP_BOUNDED_SMOOTH

    def __post_init__(self):
        d = self.drift.dim
        if self.drift.shape != (d,):
            raise ValueError("drift must be vector-valued")
        for name, field in (("brownian", self.brownian), ("fbm", self.fbm)):
            if field.dim != d or len(field.shape) != 2:
                raise ValueError(f"{name} diffusion must be a d x k field on R^{d}")

    @property
    def dims(self) -> tuple[int, int, int]:
        """(d, m, ell)."""
        return (self.drift.dim, self.brownian.shape[1], self.fbm.shape[1])


@dataclass(frozen=True, eq=False)
class SdeModel:
    """Coefficient set, formulation tag, and initial value.

    ``kind`` fixes how the Brownian integral is read: MIXED means Ito,
    ROUGH means Stratonovich within a joint rough driver.
    """

    kind: str
    coeffs: CoefficientSet
    x0: np.ndarray

    def __post_init__(self):
        if self.kind not in (MIXED, ROUGH):
            raise ValueError(f"kind must be '{MIXED}' or '{ROUGH}', got {self.kind!r}")
        x0 = np.atleast_1d(np.asarray(self.x0, dtype=np.float64))
        if x0.shape != (self.coeffs.dims[0],) or not np.all(np.isfinite(x0)):
            raise ValueError(f"x0 must be a finite vector of length {self.coeffs.dims[0]}")
        x0.setflags(write=False)
        object.__setattr__(self, "x0", x0)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.coeffs.dims


def mixed_from_rough(rough: CoefficientSet) -> CoefficientSet:
    """Coefficients whose mixed (Ito) solution coincides with the rough
    solution of ``rough``: the drift gains +(1/2) sum_i D_b^(i) b^(i); the
    diffusion fields are shared unchanged."""
    correction = ito_stratonovich_correction(rough.brownian)
    base = rough.drift

    def evaluate(x):
        return base.evaluate(x) + correction.evaluate(x)

    drift = VectorField(base.dim, base.shape, evaluate, None)
    return replace(rough, drift=drift)


def rough_from_mixed(mixed: CoefficientSet) -> CoefficientSet:
    """Inverse transform: the drift loses (1/2) sum_i D_b^(i) b^(i)."""
    correction = ito_stratonovich_correction(mixed.brownian)
    base = mixed.drift

    def evaluate(x):
        return base.evaluate(x) - correction.evaluate(x)

    drift = VectorField(base.dim, base.shape, evaluate, None)
    return replace(mixed, drift=drift)


def jacobian_check(f: VectorField, x, step: float = 1e-5) -> float:
    """Max-entry gap between the analytic Jacobian and central finite
    differences of ``evaluate`` at x; the guard every transform relies on."""
    if step <= 0:
        raise ValueError("step must be positive")
    if f.jacobian is None:
        raise ValueError("field has no analytic jacobian to check")
    x = np.asarray(x, dtype=np.float64)
    cols = []
    for axis in range(f.dim):
        offset = np.zeros(f.dim)
        offset[axis] = step
        cols.append((f.evaluate(x + offset) - f.evaluate(x - offset)) / (2 * step))
    numeric = np.stack(cols, axis=-1)
    return float(np.max(np.abs(numeric - f.jacobian(x))))


# ---------------------------------------------------------------------------
# model zoo


def _logistic(u):
    # overflow-free for large |u|
    decay = np.exp(-np.abs(u))
    return np.where(u >= 0, 1.0 / (1.0 + decay), decay / (1.0 + decay))


def _linear_scalar() -> CoefficientSet:
    # a(x) = -x, b(x) = 0.3 x, c(x) = 0.4 x: C^1 with linear growth and
    # bounded c', but not bounded itself.
    drift = VectorField(
        1,
        (1,),
        lambda x: -x,
        lambda x: -np.ones(x.shape + (1,)),
    )
    brownian = VectorField(
        1,
        (1, 1),
        lambda x: 0.3 * x[..., None],
        lambda x: 0.3 * np.ones(x.shape + (1, 1)),
    )
    fbm = VectorField(
        1,
        (1, 1),
        lambda x: 0.4 * x[..., None],
        lambda x: 0.4 * np.ones(x.shape + (1, 1)),
    )
    return CoefficientSet(drift, brownian, fbm, HYP_LINEAR_GROWTH)


def _trig() -> CoefficientSet:
    # a = sin x, b = (2 + cos x)/4, c = 2 + sin x: everything bounded and
    # smooth, b'b bounded and smooth, and inf c = 1 > 0.
    drift = VectorField(
        1,
        (1,),
        lambda x: np.sin(x),
        lambda x: np.cos(x)[..., None],
    )
    brownian = VectorField(
        1,
        (1, 1),
        lambda x: ((2.0 + np.cos(x)) / 4.0)[..., None],
        lambda x: (-np.sin(x) / 4.0)[..., None, None],
    )
    fbm = VectorField(
        1,
        (1, 1),
        lambda x: (2.0 + np.sin(x))[..., None],
        lambda x: np.cos(x)[..., None, None],
    )
    return CoefficientSet(drift, brownian, fbm, HYP_BOUNDED_SMOOTH)


def _trig_2d() -> CoefficientSet:
    # d = 2, m = 2, ell = 1 with bounded trigonometric / logistic entries;
    # exercises the multi-column correction sum and joint areas.
    def a_eval(x):
        return np.stack([np.sin(x[..., 1]), np.cos(x[..., 0])], axis=-1)

    def a_jac(x):
        zero = np.zeros_like(x[..., 0])
        row0 = np.stack([zero, np.cos(x[..., 1])], axis=-1)
        row1 = np.stack([-np.sin(x[..., 0]), zero], axis=-1)
        return np.stack([row0, row1], axis=-2)

    def b_eval(x):
        x1, x2 = x[..., 0], x[..., 1]
        col0 = np.stack([(2.0 + np.cos(x2)) / 4.0, np.sin(x1) / 4.0], axis=-1)
        col1 = np.stack([_logistic(x1) / 2.0, (2.0 + np.cos(x1)) / 5.0], axis=-1)
        return np.stack([col0, col1], axis=-1)

    def b_jac(x):
        x1, x2 = x[..., 0], x[..., 1]
        zero = np.zeros_like(x1)
        sig = _logistic(x1)
        jac = np.stack(
            [
                np.stack([np.stack([zero, -np.sin(x2) / 4.0], axis=-1),
                          np.stack([sig * (1.0 - sig) / 2.0, zero], axis=-1)], axis=-2),
                np.stack([np.stack([np.cos(x1) / 4.0, zero], axis=-1),
                          np.stack([-np.sin(x1) / 5.0, zero], axis=-1)], axis=-2),
            ],
            axis=-3,
        )
        # jac[..., r, i, l] = d b_{r,i} / d x_l
        return jac

    def c_eval(x):
        x1, x2 = x[..., 0], x[..., 1]
        return np.stack(
            [1.0 + _logistic(x2) / 2.0, 2.0 + np.sin(x1 + x2) / 2.0], axis=-1
        )[..., None]

    def c_jac(x):
        x1, x2 = x[..., 0], x[..., 1]
        zero = np.zeros_like(x1)
        sig = _logistic(x2)
        row0 = np.stack([zero, sig * (1.0 - sig) / 2.0], axis=-1)
        row1 = np.stack([np.cos(x1 + x2) / 2.0, np.cos(x1 + x2) / 2.0], axis=-1)
        rows = np.stack([row0, row1], axis=-2)  # (..., r, l)
        return rows[..., :, None, :]  # insert the single column axis

    drift = VectorField(2, (2,), a_eval, a_jac)
    brownian = VectorField(2, (2, 2), b_eval, b_jac)
    fbm = VectorField(2, (2, 1), c_eval, c_jac)
    return CoefficientSet(drift, brownian, fbm, HYP_BOUNDED_SMOOTH)


def _decay() -> CoefficientSet:
    # deterministic relaxation dx = -x dt with inert noise channels; used as
    # a harness self-test (every scheme must reduce to forward Euler).
    drift = VectorField(
        1,
        (1,),
        lambda x: -x,
        lambda x: -np.ones(x.shape + (1,)),
    )
    return CoefficientSet(
        drift,
        constant_field(1, np.zeros((1, 1))),
        constant_field(1, np.zeros((1, 1))),
        HYP_LINEAR_GROWTH,
    )


_ZOO = {
    "linear-scalar": {
        "factory": _linear_scalar,
        "x0": (1.0,),
        "fbm_diffusion_positive": False,
        "description": "scalar linear coefficients; mixed-solver smoke tests only",
    },
    "trig": {
        "factory": _trig,
        "x0": (1.0,),
        "fbm_diffusion_positive": True,
        "description": "scalar bounded trigonometric coefficients",
    },
    "trig-2d": {
        "factory": _trig_2d,
        "x0": (0.5, -0.3),
        "fbm_diffusion_positive": True,
        "description": "2-d state, two Brownian columns, one fBm column",
    },
    "decay": {
        "factory": _decay,
        "x0": (1.0,),
        "fbm_diffusion_positive": False,
        "description": "deterministic dx = -x dt; harness self-test",
    },
}


def zoo_names() -> list[str]:
    return sorted(_ZOO)


def model_info(name: str) -> dict:
    """Zoo metadata: hypothesis tag, dims, fBm-diffusion positivity."""
    entry = _zoo_entry(name)
    coeffs = entry["factory"]()
    return {
        "name": name,
        "hypothesis": coeffs.hypothesis,
        "dims": coeffs.dims,
        "fbm_diffusion_positive": entry["fbm_diffusion_positive"],
        "description": entry["description"],
    }


def _zoo_entry(name: str) -> dict:
    try:
        return _ZOO[name]
    except KeyError:
        raise ValueError(f"unknown model {name!r}; available: {zoo_names()}") from None


def make_model(name: str, kind: str) -> SdeModel:
    """Instantiate a zoo model under the given formulation tag."""
    entry = _zoo_entry(name)
    return SdeModel(kind, entry["factory"](), np.array(entry["x0"]))
