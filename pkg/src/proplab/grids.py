"""Quadrature grids over (possibly truncated) phase-space domains.

Tensor Gauss-Legendre in non-periodic directions, uniform trapezoid in the
periodic q direction of the sphere (spectrally accurate there), and a log-p
Gauss-Legendre rule for the hyperbolic half line whose integrands stretch over
decades.  Grid weights are plain Lebesgue dp dq weights times the model's
``measure_density`` at build time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import ModelName, ModelSpec

__all__ = ["QuadratureGrid", "phase_space_grid", "disk_grid", "HYPERBOLIC_DEFAULTS"]

# truncation defaults for the hyperbolic chart at hbar = 1, rescaled by sqrt(hbar):
# p spans [1e-3, 3e3] so the slow 1/p tail of convolution integrands is captured,
# q spans +-20 (the kernels decay like |q|^-4)
HYPERBOLIC_DEFAULTS = {"p_lo": 1e-3, "p_hi": 3e3, "q_half_width": 20.0}


@dataclass(frozen=True)
class QuadratureGrid:
    """Nodes and dmu weights discretizing a truncated phase-space domain."""

    nodes: np.ndarray          # (N, 2) array of (p, q)
    weights: np.ndarray        # (N,) positive dmu weights (include measure density)
    shape: tuple               # (n_p, n_q) tensor shape, or (N,) for scattered grids
    p_axis: np.ndarray
    q_axis: np.ndarray
    q_uniform_period: float | None = None   # set when q is a uniform periodic axis
    measure_density: float = 1.0
    bounds: tuple = ()

    def __post_init__(self):
        if np.any(self.weights <= 0):
            raise ValueError("quadrature weights must be positive")

    @property
    def p(self) -> np.ndarray:
        return self.nodes[:, 0]

    @property
    def q(self) -> np.ndarray:
        return self.nodes[:, 1]

    def total_mass(self) -> float:
        return float(np.sum(self.weights))

    def with_density(self, c: float) -> "QuadratureGrid":
        scale = c / self.measure_density
        return QuadratureGrid(
            nodes=self.nodes,
            weights=self.weights * scale,
            shape=self.shape,
            p_axis=self.p_axis,
            q_axis=self.q_axis,
            q_uniform_period=self.q_uniform_period,
            measure_density=float(c),
            bounds=self.bounds,
        )


def _gauss_legendre(a: float, b: float, n: int):
    t, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * t + 0.5 * (a + b), 0.5 * (b - a) * w


def _log_gauss_legendre(a: float, b: float, n: int):
    t, w = _gauss_legendre(math.log(a), math.log(b), n)
    x = np.exp(t)
    return x, w * x


def phase_space_grid(
    model: ModelSpec,
    n_p: int,
    n_q: int,
    p_bounds: tuple | None = None,
    q_bounds: tuple | None = None,
) -> QuadratureGrid:
    """Tensor grid adapted to the model's chart, weights including dmu density.

    Flat models default to the box [-8, 8]^2 * sqrt(hbar) (Gaussian tails below
    1e-13 for probes well inside); sphere and hyperbolic use their standard
    truncations.
    """
    h = model.hbar
    rh = math.sqrt(h)
    q_period = None
    if model.name is ModelName.SPHERE:
        ps, wp = _gauss_legendre(-rh, rh, n_p)
        step = 2 * math.pi * rh / n_q
        qs = np.arange(n_q) * step
        wq = np.full(n_q, step)
        q_period = 2 * math.pi * rh
        bounds = ((-rh, rh), (0.0, 2 * math.pi * rh))
    elif model.name is ModelName.HYPERBOLIC:
        p_lo, p_hi = p_bounds if p_bounds is not None else (
            HYPERBOLIC_DEFAULTS["p_lo"] * rh,
            HYPERBOLIC_DEFAULTS["p_hi"] * rh,
        )
        q_half = HYPERBOLIC_DEFAULTS["q_half_width"] * rh
        q_lo, q_hi = q_bounds if q_bounds is not None else (-q_half, q_half)
        ps, wp = _log_gauss_legendre(p_lo, p_hi, n_p)
        qs, wq = _gauss_legendre(q_lo, q_hi, n_q)
        bounds = ((p_lo, p_hi), (q_lo, q_hi))
    else:
        half = 8.0 * rh
        p_lo, p_hi = p_bounds if p_bounds is not None else (-half, half)
        q_lo, q_hi = q_bounds if q_bounds is not None else (-half, half)
        ps, wp = _gauss_legendre(p_lo, p_hi, n_p)
        qs, wq = _gauss_legendre(q_lo, q_hi, n_q)
        bounds = ((p_lo, p_hi), (q_lo, q_hi))
    P, Q = np.meshgrid(ps, qs, indexing="ij")
    W = np.outer(wp, wq) * model.measure_density
    return QuadratureGrid(
        nodes=np.column_stack([P.ravel(), Q.ravel()]),
        weights=W.ravel(),
        shape=(n_p, n_q),
        p_axis=ps,
        q_axis=qs,
        q_uniform_period=q_period,
        measure_density=model.measure_density,
        bounds=bounds,
    )


def disk_grid(model: ModelSpec, radius: float, n: int, center=(0.0, 0.0)) -> QuadratureGrid:
    """Tensor Gauss-Legendre grid on a bounding box, restricted to a disk.

    Used for Liouville-area eigenvalue counting on flat models; nodes outside
    the disk are dropped rather than given zero weight.
    """
    cp, cq = center
    ps, wp = _gauss_legendre(cp - radius, cp + radius, n)
    qs, wq = _gauss_legendre(cq - radius, cq + radius, n)
    P, Q = np.meshgrid(ps, qs, indexing="ij")
    W = np.outer(wp, wq) * model.measure_density
    keep = (P - cp) ** 2 + (Q - cq) ** 2 <= radius**2
    nodes = np.column_stack([P[keep], Q[keep]])
    return QuadratureGrid(
        nodes=nodes,
        weights=W[keep],
        shape=(nodes.shape[0],),
        p_axis=ps,
        q_axis=qs,
        measure_density=model.measure_density,
        bounds=((cp - radius, cp + radius), (cq - radius, cq + radius)),
    )
