"""Phase-space models: chart domains, kernels, connections, metrics, geodesics.

Each model lives in a single Darboux chart with coordinates (p, q) and carries
a closed-form two-point kernel ``omega``, the connection 1-form it
differentiates to on the diagonal, the compatible Riemannian metric with its
Christoffel symbols, geodesic distances and parallel-transport phases.
Everything is vectorized over numpy arrays.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

__all__ = [
    "ModelName",
    "PhasePoint",
    "ChartDomain",
    "ConnectionOneForm",
    "MetricAtPoint",
    "ModelSpec",
    "make_model",
    "geodesic_distance",
]

_GL64_T, _GL64_W = np.polynomial.legendre.leggauss(64)


class ModelName(str, enum.Enum):
    FLAT_SYMMETRIC = "flat_symmetric"
    FLAT_PQ = "flat_pq"
    SPHERE = "sphere"
    HYPERBOLIC = "hyperbolic"


class PhasePoint(NamedTuple):
    p: float
    q: float


def _split(x):
    """Accept PhasePoint, (p, q) tuple, or (..., 2) array; return p, q."""
    if isinstance(x, PhasePoint):
        return x.p, x.q
    arr = np.asarray(x, dtype=float) if not isinstance(x, tuple) else None
    if arr is not None and arr.ndim >= 1 and arr.shape[-1] == 2:
        return arr[..., 0], arr[..., 1]
    p, q = x
    return np.asarray(p, dtype=float), np.asarray(q, dtype=float)


class ConnectionOneForm(NamedTuple):
    """Coefficients of the connection 1-form: theta = coeff_p dp + coeff_q dq."""

    coeff_p: complex
    coeff_q: complex


class MetricAtPoint(NamedTuple):
    g_pp: float
    g_pq: float
    g_qq: float
    # christoffels[k][i][j] = Gamma^k_{ij}, index order (p, q)
    christoffels: tuple


@dataclass(frozen=True)
class ChartDomain:
    p_min: float
    p_max: float
    q_min: float
    q_max: float
    q_periodic: bool = False

    @property
    def q_period(self) -> float:
        return self.q_max - self.q_min

    def contains(self, p, q, margin: float = 0.0):
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        ok = (p >= self.p_min + margin) & (p <= self.p_max - margin)
        if not self.q_periodic:
            ok &= (q >= self.q_min + margin) & (q <= self.q_max - margin)
        return ok


class DomainError(ValueError):
    """A point lies outside the model's chart domain."""


class InjectivityError(ValueError):
    """A point pair has no unique connecting geodesic (e.g. near-antipodal)."""


@dataclass(frozen=True)
class ModelSpec:
    """A fully wired phase-space model.

    ``measure_density`` is the constant c in dmu = c dp dq.  Models come out
    of :func:`make_model` uncalibrated (c = 1); calibration pins c so that the
    kernel convolution reproduces the kernel.
    """

    name: ModelName
    hbar: float
    domain: ChartDomain
    measure_density: float = 1.0
    calibrated: bool = False
    sphere_paper_sign: bool = False

    # -- kernel ------------------------------------------------------------

    def omega(self, x, y):
        """Two-point kernel Omega(x, y); broadcasts over arrays."""
        return np.exp(self.log_omega(x, y))

    def log_omega(self, x, y):
        """Principal-branch logarithm of the kernel.

        Flat and hyperbolic kernels are evaluated directly in log form so the
        Gaussian/rational decay never overflows; the sphere kernel is an
        integer power of a magnitude-<=1 base, computed as k*log(base).
        """
        p, q = _split(x)
        pp, qq = _split(y)
        h = self.hbar
        if self.name is ModelName.FLAT_PQ:
            return (
                -((pp - p) ** 2 + (qq - q) ** 2) / (4 * h)
                + 1j * (pp + p) * (qq - q) / (2 * h)
            )
        if self.name is ModelName.FLAT_SYMMETRIC:
            return (
                -((pp - p) ** 2 + (qq - q) ** 2) / (4 * h)
                + 1j * (p * qq - q * pp) / (2 * h)
            )
        if self.name is ModelName.SPHERE:
            rh = math.sqrt(h)
            a = 0.5 * np.sqrt((1 + pp / rh) * (1 + p / rh))
            b = 0.5 * np.sqrt((1 - pp / rh) * (1 - p / rh))
            ph = (qq - q) / (2 * rh)
            sgn = 1.0 if self.sphere_paper_sign else -1.0
            base = a * np.exp(1j * ph) + b * np.exp(sgn * 1j * ph)
            return self.sphere_k * np.log(base)
        if self.name is ModelName.HYPERBOLIC:
            rh = math.sqrt(h)
            d = rh / (2 * pp) + rh / (2 * p) - 1j * (qq - q) / (2 * rh)
            return np.log(h) - np.log(pp * p) - 2 * np.log(d)
        raise ValueError(self.name)

    @property
    def sphere_k(self) -> int:
        """Integer 1/hbar (sphere only): the rank of the kernel is k + 1."""
        if self.name is not ModelName.SPHERE:
            raise ValueError("sphere_k is only defined for the sphere model")
        return round(1.0 / self.hbar)

    # -- connection and metric ----------------------------------------------

    def theta(self, x) -> ConnectionOneForm:
        """Connection 1-form at x: d_y log Omega(x, y)|_{y=x} in closed form."""
        p, q = _split(x)
        h = self.hbar
        zero = np.zeros_like(np.asarray(p, dtype=float))
        if self.name is ModelName.FLAT_PQ:
            return ConnectionOneForm(zero * 1j, 1j * p / h)
        if self.name is ModelName.FLAT_SYMMETRIC:
            return ConnectionOneForm(-1j * q / (2 * h), 1j * p / (2 * h))
        if self.name is ModelName.SPHERE:
            return ConnectionOneForm(zero * 1j, 1j * self.sphere_k * p / (2 * h))
        if self.name is ModelName.HYPERBOLIC:
            return ConnectionOneForm(zero * 1j, 1j * p / h)
        raise ValueError(self.name)

    def curvature_coefficient(self, x) -> complex:
        """dp^dq coefficient of d(theta) at x (constant for every model)."""
        h = self.hbar
        if self.name in (ModelName.FLAT_PQ, ModelName.FLAT_SYMMETRIC):
            return 1j / h
        if self.name is ModelName.SPHERE:
            return 1j * self.sphere_k / (2 * h)
        if self.name is ModelName.HYPERBOLIC:
            return 1j / h
        raise ValueError(self.name)

    def metric(self, x) -> MetricAtPoint:
        p, q = _split(x)
        h = self.hbar
        p = np.asarray(p, dtype=float)
        zero = np.zeros_like(p)
        if self.name in (ModelName.FLAT_PQ, ModelName.FLAT_SYMMETRIC):
            one = np.ones_like(p)
            gam = ((zero, zero), (zero, zero))
            return MetricAtPoint(one, zero, one, (gam, gam))
        if self.name is ModelName.SPHERE:
            k = self.sphere_k
            u2 = 1 - p**2 / h
            g_pp = (k / 2) / u2
            g_qq = (k / 2) * u2
            # Christoffels are scale-invariant, so they match the unscaled metric
            gpp = p / (h * u2)
            gqq = p * u2 / h
            gpq = -p / (h * u2)
            gam_p = ((gpp, zero), (zero, gqq))
            gam_q = ((zero, gpq), (gpq, zero))
            return MetricAtPoint(g_pp, zero, g_qq, (gam_p, gam_q))
        if self.name is ModelName.HYPERBOLIC:
            g_pp = h / p**2
            g_qq = p**2 / h
            gam_p = ((-1 / p, zero), (zero, -(p**3) / h**2))
            gam_q = ((zero, 1 / p), (1 / p, zero))
            return MetricAtPoint(g_pp, zero, g_qq, (gam_p, gam_q))
        raise ValueError(self.name)

    # -- geodesics -----------------------------------------------------------

    def sphere_radius(self) -> float:
        return math.sqrt(self.sphere_k * self.hbar / 2)

    def embed_sphere(self, p, q):
        """Chart point -> unit vector on S^2 (p = sqrt(hbar) cos(colatitude))."""
        rh = math.sqrt(self.hbar)
        u = np.clip(np.asarray(p, dtype=float) / rh, -1.0, 1.0)
        s = np.sqrt(1 - u**2)
        ph = np.asarray(q, dtype=float) / rh
        return np.stack([s * np.cos(ph), s * np.sin(ph), u], axis=-1)

    def geodesic_distance(self, x, y, check: bool = True):
        p, q = _split(x)
        pp, qq = _split(y)
        if check and not (np.all(self.domain.contains(p, q)) and np.all(self.domain.contains(pp, qq))):
            raise DomainError(f"point outside {self.name.value} chart domain")
        h = self.hbar
        if self.name in (ModelName.FLAT_PQ, ModelName.FLAT_SYMMETRIC):
            return np.hypot(pp - p, qq - q)
        if self.name is ModelName.SPHERE:
            n0 = self.embed_sphere(p, q)
            n1 = self.embed_sphere(pp, qq)
            ang = np.arccos(np.clip(np.sum(n0 * n1, axis=-1), -1.0, 1.0))
            if check and np.any(ang > math.pi - 1e-9):
                raise InjectivityError("antipodal points: geodesic is not unique")
            return self.sphere_radius() * ang
        if self.name is ModelName.HYPERBOLIC:
            # isometric to the upper half plane (x, y) = (q, hbar/p), metric hbar*(dx^2+dy^2)/y^2
            y0 = h / p
            y1 = h / pp
            arg = 1 + ((qq - q) ** 2 + (y1 - y0) ** 2) / (2 * y0 * y1)
            return math.sqrt(h) * np.arccosh(arg)
        raise ValueError(self.name)

    def geodesic_transport_phase(self, x, y):
        """Unimodular parallel-transport factor exp(int theta) along the geodesic.

        Flat and hyperbolic transport is in closed form; the sphere integrates
        theta along the great-circle arc with 64-point Gauss-Legendre.
        """
        p, q = _split(x)
        pp, qq = _split(y)
        h = self.hbar
        if self.name is ModelName.FLAT_PQ:
            return np.exp(1j * (p + pp) * (qq - q) / (2 * h))
        if self.name is ModelName.FLAT_SYMMETRIC:
            return np.exp(1j * (p * qq - q * pp) / (2 * h))
        if self.name is ModelName.HYPERBOLIC:
            # half-plane geodesics are circles centered on the axis; int dq/y is
            # the subtended angle, so the phase is exact
            x0, y0 = np.broadcast_arrays(np.asarray(q, float), h / np.asarray(p, float))
            x1, y1 = np.broadcast_arrays(np.asarray(qq, float), h / np.asarray(pp, float))
            dx = x1 - x0
            vertical = np.abs(dx) < 1e-14
            cen = np.where(
                vertical, 0.0, (x1**2 + y1**2 - x0**2 - y0**2) / np.where(vertical, 1.0, 2 * dx)
            )
            psi0 = np.arctan2(y0, x0 - cen)
            psi1 = np.arctan2(y1, x1 - cen)
            return np.where(vertical, 1.0 + 0j, np.exp(1j * (psi0 - psi1)))
        if self.name is ModelName.SPHERE:
            return self._sphere_transport(p, q, pp, qq)
        raise ValueError(self.name)

    def _sphere_transport(self, p, q, pp, qq):
        n0 = self.embed_sphere(p, q)
        n1 = self.embed_sphere(pp, qq)
        ang = np.arccos(np.clip(np.sum(n0 * n1, axis=-1), -1.0, 1.0))
        sin_ang = np.sin(ang)
        degen = (ang < 1e-12) | (ang > math.pi - 1e-12)
        safe_sin = np.where(degen, 1.0, sin_ang)
        acc = np.zeros_like(ang)
        for t, w in zip(0.5 * (_GL64_T + 1), 0.5 * _GL64_W):
            n = (np.sin((1 - t) * ang)[..., None] * n0 + np.sin(t * ang)[..., None] * n1) / safe_sin[..., None]
            dn = (
                ang[..., None]
                * (-np.cos((1 - t) * ang)[..., None] * n0 + np.cos(t * ang)[..., None] * n1)
                / safe_sin[..., None]
            )
            rho2 = n[..., 0] ** 2 + n[..., 1] ** 2
            rho2 = np.where(rho2 < 1e-300, 1.0, rho2)
            phidot = (n[..., 0] * dn[..., 1] - n[..., 1] * dn[..., 0]) / rho2
            acc = acc + w * n[..., 2] * phidot
        int_pdq = self.hbar * acc
        phase = np.exp(1j * self.sphere_k / (2 * self.hbar) * int_pdq)
        return np.where(degen, 1.0 + 0j, phase)

    # -- bookkeeping ----------------------------------------------------------

    def with_measure_density(self, c: float) -> "ModelSpec":
        return replace(self, measure_density=float(c), calibrated=True)

    def interior_margin(self) -> float:
        """A safe distance from chart/truncation edges for probe sampling."""
        return 0.1 * math.sqrt(self.hbar)


def make_model(name, hbar: float, sphere_paper_sign: bool = False) -> ModelSpec:
    """Build one of the four reference models at the given hbar.

    The sphere requires 1/hbar to be a positive integer; its kernel rank is
    then 1/hbar + 1.  ``sphere_paper_sign=True`` builds the variant whose
    second exponential carries the same sign as the first; it is kept only as
    a regression pin, since its diagonal derivative does not reproduce the
    connection.
    """
    if not isinstance(name, ModelName):
        name = ModelName(str(name))
    if not (hbar > 0):
        raise ValueError(f"hbar must be positive, got {hbar}")
    h = float(hbar)
    rh = math.sqrt(h)
    if sphere_paper_sign and name is not ModelName.SPHERE:
        raise ValueError("sphere_paper_sign only applies to the sphere model")
    if name is ModelName.SPHERE:
        k = 1.0 / h
        if abs(k - round(k)) > 1e-9 or round(k) < 1:
            raise ValueError(f"sphere model needs 1/hbar to be a positive integer, got 1/hbar={k}")
        domain = ChartDomain(-rh, rh, 0.0, 2 * math.pi * rh, q_periodic=True)
    elif name is ModelName.HYPERBOLIC:
        domain = ChartDomain(0.0, math.inf, -math.inf, math.inf)
    else:
        domain = ChartDomain(-math.inf, math.inf, -math.inf, math.inf)
    return ModelSpec(name=name, hbar=h, domain=domain, sphere_paper_sign=bool(sphere_paper_sign))


def geodesic_distance(model: ModelSpec, x, y):
    """Module-level alias for ModelSpec.geodesic_distance."""
    return model.geodesic_distance(x, y)
