"""Measure calibration: pin the constant c in dmu = c dp dq.

The kernels come with an implicit reproducing measure; calibration recovers
its density numerically from the diagonal convolution identity
(Omega*Omega)(x,x) = 1 and validates at off-diagonal probe pairs.  The flat
models also get an exact complete-the-square convolution oracle, independent
of any quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import ModelName, ModelSpec, PhasePoint
from .grids import QuadratureGrid

__all__ = [
    "CalibrationResult",
    "CalibrationError",
    "calibrate_measure",
    "kernel_convolution",
    "analytic_convolution_flat",
]


class CalibrationError(RuntimeError):
    """Raised when the calibrated kernel fails idempotency at validation probes."""


@dataclass(frozen=True)
class CalibrationResult:
    c: float
    residual: float
    probe_count: int
    model: ModelSpec           # copy of the input model with measure_density = c


def kernel_convolution(model: ModelSpec, grid: QuadratureGrid, xs, ys) -> np.ndarray:
    """Quadrature evaluation of (Omega * Omega)(x, y) for paired points.

    ``xs`` and ``ys`` are (M, 2) arrays of endpoints; returns an (M,) complex
    array.  Grid weights are assumed to carry the same measure density as the
    model (the grid should be rebuilt after calibration).
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    zp, zq = grid.p, grid.q
    oxz = model.omega((xs[:, 0:1], xs[:, 1:2]), (zp[None, :], zq[None, :]))
    ozy = model.omega((zp[None, :], zq[None, :]), (ys[:, 0:1], ys[:, 1:2]))
    return (oxz * ozy) @ grid.weights


def calibrate_measure(model: ModelSpec, grid: QuadratureGrid, probes) -> CalibrationResult:
    """Solve for c from the diagonal probe, then validate all probe pairs.

    ``probes`` is a sequence of ((p,q), (p',q')) pairs; the first pair's left
    point doubles as the diagonal calibration point.  The diagonal convolution
    (Omega*Omega)(x,x) = c * int |Omega(x,z)|^2 dp dq is real and positive, so
    c is well posed.  A residual above ``tol`` raises CalibrationError.
    """
    probes = [(np.asarray(a, dtype=float), np.asarray(b, dtype=float)) for a, b in probes]
    if not probes:
        raise ValueError("need at least one probe pair")
    x0 = probes[0][0]
    base = kernel_convolution(model, grid, x0[None, :], x0[None, :])[0]
    if not (base.real > 0):
        raise CalibrationError(f"diagonal convolution not positive: {base}")
    c = model.measure_density / base.real
    calibrated = model.with_measure_density(c)
    scale = c / grid.measure_density
    xs = np.stack([a for a, _ in probes])
    ys = np.stack([b for _, b in probes])
    conv = kernel_convolution(model, grid, xs, ys) * scale
    exact = calibrated.omega((xs[:, 0], xs[:, 1]), (ys[:, 0], ys[:, 1]))
    residual = float(np.max(np.abs(conv - exact)))
    return CalibrationResult(c=c, residual=residual, probe_count=len(probes), model=calibrated)


def default_tolerance(model: ModelSpec) -> float:
    """Per-model idempotency tolerance (truncation-dominated for hyperbolic)."""
    return {
        ModelName.FLAT_PQ: 1e-6,
        ModelName.FLAT_SYMMETRIC: 1e-6,
        ModelName.SPHERE: 1e-4,
        ModelName.HYPERBOLIC: 1e-2,
    }[model.name]


def exact_measure_density(model: ModelSpec) -> float:
    """Closed-form density where one is known; used as a cross-check oracle.

    Flat: 1/(2 pi hbar).  Sphere: trace-equals-rank forces
    c * 4 pi hbar = k + 1.  Hyperbolic: calibrated numerically (the value
    approaches 1/(4 pi hbar) as the truncation grows, but only the numerical
    calibration is asserted).
    """
    h = model.hbar
    if model.name in (ModelName.FLAT_PQ, ModelName.FLAT_SYMMETRIC):
        return 1.0 / (2 * math.pi * h)
    if model.name is ModelName.SPHERE:
        return (model.sphere_k + 1) / (4 * math.pi * h)
    raise ValueError(f"no closed-form measure density for {model.name.value}")


def _quadratic_form(fun, scale: float):
    """Exact coefficients of a quadratic S(v) = c0 + b.v + v^T A v / 2 on R^2.

    ``fun`` must be exactly quadratic; evaluations at nine stencil points of
    step ``scale`` recover the coefficients to roundoff.
    """
    s = scale
    f00 = fun(0.0, 0.0)
    fp0 = fun(s, 0.0)
    fm0 = fun(-s, 0.0)
    f0p = fun(0.0, s)
    f0m = fun(0.0, -s)
    fpp = fun(s, s)
    fpm = fun(s, -s)
    fmp = fun(-s, s)
    fmm = fun(-s, -s)
    b = np.array([(fp0 - fm0) / (2 * s), (f0p - f0m) / (2 * s)])
    a11 = (fp0 - 2 * f00 + fm0) / s**2
    a22 = (f0p - 2 * f00 + f0m) / s**2
    a12 = (fpp - fpm - fmp + fmm) / (4 * s**2)
    A = np.array([[a11, a12], [a12, a22]])
    return f00, b, A


def analytic_convolution_flat(model: ModelSpec, x, y) -> complex:
    """Exact int Omega(x,z) Omega(z,y) dz / (2 pi hbar) by completing the square.

    The log of the product is exactly quadratic in z for the flat kernels, so
    the Gaussian integral has the closed form
    (2 pi / sqrt(det(-A))) exp(c0 - b^T A^{-1} b / 2).
    """
    if model.name not in (ModelName.FLAT_PQ, ModelName.FLAT_SYMMETRIC):
        raise ValueError("analytic convolution is only defined for flat kernels")
    x = np.asarray(tuple(x) if isinstance(x, PhasePoint) else x, dtype=float)
    y = np.asarray(tuple(y) if isinstance(y, PhasePoint) else y, dtype=float)

    def s_total(zp, zq):
        z = (np.array(zp), np.array(zq))
        return complex(model.log_omega((x[0], x[1]), z) + model.log_omega(z, (y[0], y[1])))

    c0, b, A = _quadratic_form(s_total, math.sqrt(model.hbar))
    negA = -A
    det = negA[0, 0] * negA[1, 1] - negA[0, 1] * negA[1, 0]
    if det.real <= 0:
        raise ValueError("non-decaying quadratic form; cannot complete the square")
    Ainv_b = np.linalg.solve(A, b)
    integral = (2 * math.pi / np.sqrt(det)) * np.exp(c0 - 0.5 * b @ Ainv_b)
    return complex(integral / (2 * math.pi * model.hbar))
