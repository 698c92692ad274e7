"""Propagator axiom checker and the normalization lemma.

Axioms, for a kernel Omega with measure dmu = c dp dq:
  (i)   Omega(x, x) = 1 on the diagonal,
  (ii)  conj(Omega(x, y)) = Omega(y, x),
  (iii) quadrature idempotency (Omega * Omega)(x, y) = Omega(x, y),
  (iv)  d_y log Omega(x, y)|_{y=x} equals the model connection 1-form
        (the line-bundle covariant derivative of the kernel vanishes).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import vanest
from .calibration import default_tolerance, kernel_convolution
from .geometry import ConnectionOneForm, ModelName, ModelSpec
from .grids import QuadratureGrid

__all__ = [
    "AxiomReport",
    "AxiomTolerances",
    "check_axioms",
    "normalize_propagator",
    "NormalizedPropagator",
    "halton",
    "probe_points",
    "probe_pairs",
]


def halton(count: int, dim: int = 2, skip: int = 20) -> np.ndarray:
    """Low-discrepancy points in [0,1)^dim (van der Corput bases 2, 3, 5)."""
    bases = (2, 3, 5)[:dim]
    out = np.empty((count, dim))
    for d, b in enumerate(bases):
        idx = np.arange(skip, skip + count)
        col = np.zeros(count)
        f = 1.0
        i = idx.copy()
        while np.any(i > 0):
            f /= b
            col += f * (i % b)
            i //= b
        out[:, d] = col
    return out


def probe_box(model: ModelSpec) -> tuple:
    """Margin-shrunk probe region ((p_lo, p_hi), (q_lo, q_hi)) per model."""
    rh = math.sqrt(model.hbar)
    if model.name is ModelName.SPHERE:
        return ((-0.85 * rh, 0.85 * rh), (0.0, 2 * math.pi * rh))
    if model.name is ModelName.HYPERBOLIC:
        return ((0.5 * rh, 2.0 * rh), (-1.0 * rh, 1.0 * rh))
    return ((-2.5 * rh, 2.5 * rh), (-2.5 * rh, 2.5 * rh))


def probe_points(model: ModelSpec, count: int) -> np.ndarray:
    (plo, phi), (qlo, qhi) = probe_box(model)
    u = halton(count)
    return np.column_stack([plo + (phi - plo) * u[:, 0], qlo + (qhi - qlo) * u[:, 1]])


def probe_pairs(model: ModelSpec, count: int) -> list:
    pts = probe_points(model, 2 * count)
    return [(pts[2 * i], pts[2 * i + 1]) for i in range(count)]


@dataclass(frozen=True)
class AxiomTolerances:
    normalization: float = 1e-12
    hermiticity: float = 1e-12
    idempotency: float | None = None     # None: per-model default
    first_jet: float = 1e-6

    def for_model(self, model: ModelSpec) -> "AxiomTolerances":
        if self.idempotency is not None:
            return self
        return AxiomTolerances(
            self.normalization, self.hermiticity, default_tolerance(model), self.first_jet
        )


@dataclass(frozen=True)
class AxiomReport:
    model: str
    hbar: float
    normalization_max_err: float
    hermiticity_max_err: float
    idempotency_max_err: float
    first_jet_max_err: float
    probe_count: int
    tolerances: AxiomTolerances
    verdicts: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())

    def as_dict(self) -> dict:
        return {
            "model": self.model,
            "hbar": self.hbar,
            "normalization_max_err": self.normalization_max_err,
            "hermiticity_max_err": self.hermiticity_max_err,
            "idempotency_max_err": self.idempotency_max_err,
            "first_jet_max_err": self.first_jet_max_err,
            "probe_count": self.probe_count,
            "tolerances": {
                "normalization": self.tolerances.normalization,
                "hermiticity": self.tolerances.hermiticity,
                "idempotency": self.tolerances.idempotency,
                "first_jet": self.tolerances.first_jet,
            },
            "verdicts": dict(self.verdicts),
        }


def check_axioms(
    model: ModelSpec,
    grid: QuadratureGrid,
    probes=None,
    tol: AxiomTolerances | None = None,
    n_probes: int = 50,
    n_jet_points: int = 20,
) -> AxiomReport:
    """Evaluate all four propagator axioms on quasirandom probes.

    The model must be calibrated (axiom iii is meaningless otherwise), and the
    grid must carry the calibrated measure density.
    """
    if not model.calibrated:
        raise ValueError("model must be calibrated before the axiom check")
    tol = (tol or AxiomTolerances()).for_model(model)
    pairs = probes if probes is not None else probe_pairs(model, n_probes)
    xs = np.stack([np.asarray(a, dtype=float) for a, _ in pairs])
    ys = np.stack([np.asarray(b, dtype=float) for _, b in pairs])
    pts = np.vstack([xs, ys])

    diag = model.omega((pts[:, 0], pts[:, 1]), (pts[:, 0], pts[:, 1]))
    err_norm = float(np.max(np.abs(diag - 1.0)))

    fwd = model.omega((xs[:, 0], xs[:, 1]), (ys[:, 0], ys[:, 1]))
    bwd = model.omega((ys[:, 0], ys[:, 1]), (xs[:, 0], xs[:, 1]))
    err_herm = float(np.max(np.abs(np.conj(fwd) - bwd)))

    conv = kernel_convolution(model, grid, xs, ys)
    err_idem = float(np.max(np.abs(conv - fwd)))

    jet_pts = pts[:n_jet_points]
    err_jet = 0.0
    for pt in jet_pts:
        rep = vanest.extract_first_jet(model, pt)
        err_jet = max(err_jet, rep.residual_first)

    verdicts = {
        "normalization": err_norm < tol.normalization,
        "hermiticity": err_herm < tol.hermiticity,
        "idempotency": err_idem < tol.idempotency,
        "first_jet": err_jet < tol.first_jet,
    }
    return AxiomReport(
        model=model.name.value,
        hbar=model.hbar,
        normalization_max_err=err_norm,
        hermiticity_max_err=err_herm,
        idempotency_max_err=err_idem,
        first_jet_max_err=err_jet,
        probe_count=len(pairs),
        tolerances=tol,
        verdicts=verdicts,
    )


@dataclass(frozen=True)
class NormalizedPropagator:
    kernel: Callable                 # (x, y) -> complex
    theta: Callable                  # x -> ConnectionOneForm
    density: Callable                # x -> positive dmu density


def normalize_propagator(
    raw: Callable, raw_theta: Callable, density, h: float = 1e-5
) -> NormalizedPropagator:
    """Rescale a kernel with nonvanishing diagonal into a unit-diagonal one.

    With f(x) = raw(x, x) the output triple is
        kernel(x, y) = raw(x, y) / sqrt(f(x) f(y)),
        theta(x)     = raw_theta(x) + d log sqrt(f)|_x,
        density(x)   = f(x) * density'(x),
    which preserves the convolution identity exactly.  f must be real and
    positive wherever sampled.
    """
    dens_fn = density if callable(density) else (lambda x, _c=float(density): _c)

    def f_of(x):
        val = raw(x, x)
        val = complex(val)
        if abs(val.imag) > 1e-10 * max(1.0, abs(val.real)) or val.real <= 0:
            raise ValueError(f"diagonal value must be real positive, got {val} at {x}")
        return val.real

    def kernel(x, y):
        return raw(x, y) / math.sqrt(f_of(x) * f_of(y))

    def theta(x):
        base = raw_theta(x)
        p, q = float(x[0]), float(x[1])
        dlp = (math.log(f_of((p + h, q))) - math.log(f_of((p - h, q)))) / (2 * h)
        dlq = (math.log(f_of((p, q + h))) - math.log(f_of((p, q - h)))) / (2 * h)
        return ConnectionOneForm(base.coeff_p + 0.5 * dlp, base.coeff_q + 0.5 * dlq)

    def new_density(x):
        return f_of(x) * dens_fn(x)

    return NormalizedPropagator(kernel=kernel, theta=theta, density=new_density)
