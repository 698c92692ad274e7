"""Numerical van Est differentiation of multi-point kernels on the diagonal.

Extracts the 1-jet (connection 1-form) and covariant 2-jet of log Omega in the
second argument, differentiates (n+1)-point cochains to n-forms, and recovers
the curvature from the three-point cocycle.  All derivatives are central
differences with one Richardson halving.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .geometry import ModelSpec

__all__ = [
    "JetReport",
    "CochainSample",
    "StencilError",
    "extract_first_jet",
    "extract_second_jet",
    "vanest_degree_n",
    "curvature_from_cocycle",
]

_MIN_KERNEL_MAG = 1e-8


class StencilError(RuntimeError):
    """The kernel is too close to zero inside the differencing stencil."""


@dataclass(frozen=True)
class JetReport:
    point: tuple
    oneform_p: complex
    oneform_q: complex
    residual_first: float
    hessian: np.ndarray | None = None          # covariant 2x2, None for 1-jet reports
    ref_quadratic: tuple | None = None         # expected (-g_pp/2h, -g_qq/2h)
    residual_second_diag: float | None = None
    mixed_term: complex | None = None


@dataclass(frozen=True)
class CochainSample:
    """An (n+1)-point cochain with its normalization/symmetry contract."""

    arity: int                                  # number of arguments, n + 1
    values: Callable                            # (x_0, ..., x_n) -> complex
    normalized: bool = True
    even_perm_invariant: bool = True


def default_step(model: ModelSpec) -> float:
    # balances truncation against cancellation in log of near-unit values
    return 1e-3 * math.sqrt(model.hbar)


def _log_kernel_guarded(model: ModelSpec, x, ys):
    vals = model.omega(x, ys)
    if np.any(np.abs(vals) < _MIN_KERNEL_MAG):
        raise StencilError("kernel magnitude below 1e-8 inside stencil; shrink the step")
    return np.log(vals)


def _first_diff(model: ModelSpec, x, h: float):
    p, q = float(x[0]), float(x[1])
    ys_p = (np.array([p + h, p - h]), np.array([q, q]))
    ys_q = (np.array([p, p]), np.array([q + h, q - h]))
    lp = _log_kernel_guarded(model, (p, q), ys_p)
    lq = _log_kernel_guarded(model, (p, q), ys_q)
    return (lp[0] - lp[1]) / (2 * h), (lq[0] - lq[1]) / (2 * h)


def extract_first_jet(model: ModelSpec, x, h: float | None = None) -> JetReport:
    """1-form part of the diagonal jet of log Omega(x, .), Richardson over {h, h/2}.

    residual_first is the max componentwise deviation from the model's
    closed-form connection.
    """
    h = default_step(model) if h is None else float(h)
    if not np.all(model.domain.contains(x[0], x[1], margin=4 * h)):
        raise StencilError("point too close to the domain edge for a 4h stencil")
    dp1, dq1 = _first_diff(model, x, h)
    dp2, dq2 = _first_diff(model, x, h / 2)
    jet_p = (4 * dp2 - dp1) / 3
    jet_q = (4 * dq2 - dq1) / 3
    ref = model.theta(x)
    residual = max(abs(jet_p - complex(ref.coeff_p)), abs(jet_q - complex(ref.coeff_q)))
    return JetReport(point=(float(x[0]), float(x[1])), oneform_p=jet_p, oneform_q=jet_q,
                     residual_first=residual)


def _second_diff(model: ModelSpec, x, h: float):
    p, q = float(x[0]), float(x[1])
    ys = (
        np.array([p + h, p - h, p, p, p + h, p + h, p - h, p - h]),
        np.array([q, q, q + h, q - h, q + h, q - h, q + h, q - h]),
    )
    L = _log_kernel_guarded(model, (p, q), ys)
    # log Omega(x, x) = 0 exactly
    d_pp = (L[0] + L[1]) / h**2
    d_qq = (L[2] + L[3]) / h**2
    d_pq = (L[4] - L[5] - L[6] + L[7]) / (4 * h**2)
    return d_pp, d_qq, d_pq


def extract_second_jet(model: ModelSpec, x, h: float | None = None) -> JetReport:
    """Covariant diagonal Hessian of log Omega in its second argument.

    Raw central second differences are Richardson-extrapolated, then corrected
    with the model Christoffels acting on the (extrapolated) first
    derivatives.  The diagonal entries are compared against -g_ii/(2 hbar);
    the mixed entry is only reported.
    """
    h = default_step(model) if h is None else float(h)
    if not np.all(model.domain.contains(x[0], x[1], margin=6 * h)):
        raise StencilError("point too close to the domain edge for a 6h stencil")
    first = extract_first_jet(model, x, h)
    raw1 = _second_diff(model, x, h)
    raw2 = _second_diff(model, x, h / 2)
    d_pp, d_qq, d_pq = ((4 * b - a) / 3 for a, b in zip(raw1, raw2))
    met = model.metric(x)
    gam_p, gam_q = met.christoffels
    grad = (first.oneform_p, first.oneform_q)

    def corrected(i, j, raw):
        return raw - gam_p[i][j] * grad[0] - gam_q[i][j] * grad[1]

    cov_pp = corrected(0, 0, d_pp)
    cov_qq = corrected(1, 1, d_qq)
    cov_pq = corrected(0, 1, d_pq)
    hess = np.array([[cov_pp, cov_pq], [cov_pq, cov_qq]])
    ref = (-met.g_pp / (2 * model.hbar), -met.g_qq / (2 * model.hbar))
    residual2 = max(abs(cov_pp - ref[0]), abs(cov_qq - ref[1]))
    return JetReport(
        point=(float(x[0]), float(x[1])),
        oneform_p=first.oneform_p,
        oneform_q=first.oneform_q,
        residual_first=first.residual_first,
        hessian=hess,
        ref_quadratic=ref,
        residual_second_diag=residual2,
        mixed_term=cov_pq,
    )


def vanest_degree_n(cochain: CochainSample, x, directions, h: float = 1e-4) -> complex:
    """Degree-n van Est value n! X_n ... X_1 Omega(m, ., ..., .) at the diagonal.

    ``directions`` is a sequence of n tangent vectors; slot i of the cochain is
    differentiated along directions[i-1] by central differences.  Supports
    n in {1, 2}.
    """
    if not (cochain.normalized and cochain.even_perm_invariant):
        raise ValueError("cochain must be normalized and even-permutation invariant")
    n = cochain.arity - 1
    if n != len(directions):
        raise ValueError(f"need {n} directions for an arity-{cochain.arity} cochain")
    x = np.asarray(x, dtype=float)
    dirs = [np.asarray(d, dtype=float) for d in directions]
    if n == 1:
        fp = cochain.values(x, x + h * dirs[0])
        fm = cochain.values(x, x - h * dirs[0])
        return (fp - fm) / (2 * h)
    if n == 2:
        d1, d2 = dirs
        v = (
            cochain.values(x, x + h * d1, x + h * d2)
            - cochain.values(x, x + h * d1, x - h * d2)
            - cochain.values(x, x - h * d1, x + h * d2)
            + cochain.values(x, x - h * d1, x - h * d2)
        ) / (4 * h**2)
        return 2.0 * v
    raise NotImplementedError("only degrees 1 and 2 are implemented")


def triple_log_cochain(model: ModelSpec, x) -> CochainSample:
    """log of the three-point cocycle Omega(x,y) Omega(y,z) Omega(z,x) in (y, z)."""

    def values(m, y, z):
        return complex(
            model.log_omega((m[0], m[1]), (y[0], y[1]))
            + model.log_omega((y[0], y[1]), (z[0], z[1]))
            + model.log_omega((z[0], z[1]), (m[0], m[1]))
        )

    return CochainSample(arity=3, values=values)


def curvature_from_cocycle(model: ModelSpec, x, h: float | None = None) -> complex:
    """dp^dq coefficient of the curvature extracted from the 3-point cocycle.

    Applies the degree-2 van Est map to log of the cyclic kernel product and
    Richardson-extrapolates over {h, h/2}; for every model this should match
    the dp^dq coefficient of d(theta).
    """
    h = default_step(model) if h is None else float(h)
    if not np.all(model.domain.contains(x[0], x[1], margin=4 * h)):
        raise StencilError("point too close to the domain edge for the cocycle stencil")
    cochain = triple_log_cochain(model, x)
    e_p = (1.0, 0.0)
    e_q = (0.0, 1.0)
    v1 = vanest_degree_n(cochain, x, (e_p, e_q), h=h)
    v2 = vanest_degree_n(cochain, x, (e_p, e_q), h=h / 2)
    return (4 * v2 - v1) / 3
