"""Bergman kernels on CP^1 from explicit holomorphic section bases.

Sections of the degree-k bundle over CP^1 are polynomials of degree <= k in
the affine coordinate z, orthogonal under the Fubini-Study-weighted inner
product with weight (1+|z|^2)^(-k).  Monomial norms have exact Beta-function
values and are recomputed by quadrature as a cross-check of the quadrature
stack.  The normalized kernel's covariant derivative on the diagonal vanishes
exactly when the diagonal function is constant, and the construction exposes a
non-unitary basis perturbation to exercise the converse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SectionBasis",
    "BergmanKernel",
    "LemmaReport",
    "monomial_norm_exact",
    "monomial_norm_quadrature",
    "build_cp1_bergman",
    "check_lemma_berg",
    "bargmann_truncated_diag",
]


def monomial_norm_exact(a: int, k: int) -> float:
    """||z^a||^2 under the FS-weighted product: pi * a! (k-a)! / (k+1)!."""
    if not 0 <= a <= k:
        raise ValueError("monomial degree must satisfy 0 <= a <= k")
    return math.pi * math.factorial(a) * math.factorial(k - a) / math.factorial(k + 1)


def monomial_norm_quadrature(a: int, k: int, quad_n: int) -> float:
    """Radial quadrature of the same norm via s/(1+s) substitution.

    The substitution maps the integrand to t^a (1-t)^(k-a) on (0,1), a
    polynomial of degree k, so Gauss-Legendre with quad_n >= (k+2)/2 nodes is
    exact up to roundoff.
    """
    t, w = np.polynomial.legendre.leggauss(quad_n)
    t = 0.5 * (t + 1)
    w = 0.5 * w
    return math.pi * float(np.sum(w * t**a * (1 - t) ** (k - a)))


@dataclass(frozen=True)
class SectionBasis:
    degree: int
    norms: np.ndarray                 # quadrature monomial norms, cross-checked
    coefficient_scales: np.ndarray    # non-unitary perturbation factors, 1 = unperturbed

    def hermitian_weight(self, z) -> np.ndarray:
        return (1 + np.abs(z) ** 2) ** (-self.degree)

    def evaluate(self, z) -> np.ndarray:
        """Orthonormal section values psi_a(z), stacked along the last axis."""
        z = np.asarray(z, dtype=complex)
        pows = np.stack([z**a for a in range(self.degree + 1)], axis=-1)
        return pows * (self.coefficient_scales / np.sqrt(self.norms))


@dataclass(frozen=True)
class BergmanKernel:
    basis: SectionBasis

    @property
    def degree(self) -> int:
        return self.basis.degree

    def B(self, x, y):
        """Kernel sum over the (possibly perturbed) basis in the holomorphic frame."""
        bx = self.basis.evaluate(x)
        by = self.basis.evaluate(y)
        return np.sum(np.conj(bx) * by, axis=-1)

    def diag(self, x):
        """Gauge-invariant diagonal B(x,x) * weight(x); constant iff balanced."""
        x = np.asarray(x, dtype=complex)
        return np.real(self.B(x, x)) * self.basis.hermitian_weight(x)

    def normalized(self, x, y):
        """Unit-diagonal kernel B(x,y)/sqrt(B(x,x) B(y,y)) in the unit gauge."""
        return self.B(x, y) / np.sqrt(np.real(self.B(x, x)) * np.real(self.B(y, y)))


def build_cp1_bergman(k: int, quad_n: int = 64, scales=None) -> BergmanKernel:
    """Orthonormalize {1, z, ..., z^k} and assemble the Bergman kernel.

    Monomials are mutually orthogonal by rotational symmetry, so
    orthonormalization reduces to the radial norms, which the quadrature must
    reproduce against the exact Beta values to 1e-10.  ``scales`` rescales the
    monomial coefficients non-unitarily (used to break diagonal constancy).
    """
    if k < 1:
        raise ValueError("need degree k >= 1")
    norms = np.array([monomial_norm_quadrature(a, k, quad_n) for a in range(k + 1)])
    exact = np.array([monomial_norm_exact(a, k) for a in range(k + 1)])
    worst = float(np.max(np.abs(norms / exact - 1)))
    if worst > 1e-10:
        raise RuntimeError(f"quadrature norms disagree with Beta values by {worst:.2e}")
    scales = np.ones(k + 1) if scales is None else np.asarray(scales, dtype=float)
    if scales.shape != (k + 1,):
        raise ValueError("need one scale per basis monomial")
    return BergmanKernel(SectionBasis(degree=k, norms=norms, coefficient_scales=scales))


def _unit_gauge_connection(k: int, z: complex):
    """Connection 1-form of the FS Hermitian metric in the unit-norm frame.

    theta_u = (1/2)(d log h)^(1,0) - (1/2)(d log h)^(0,1) with
    h = (1+|z|^2)^(-k); purely imaginary components in (Re z, Im z).
    """
    denom = 1 + abs(z) ** 2
    comp_u = 1j * k * z.imag / denom
    comp_v = -1j * k * z.real / denom
    return comp_u, comp_v


def covariant_defect(kernel: BergmanKernel, z: complex, h: float = 1e-5) -> float:
    """|nabla_y Omega(x, y)|_{y=x}| for the normalized kernel, by differences.

    The covariant derivative in the unit gauge is d log Omega + theta_u; its
    two real components are differenced centrally in Re y and Im y.
    """
    z = complex(z)

    def logom(y):
        return np.log(kernel.normalized(np.array(z), np.array(y)))

    du = (logom(z + h) - logom(z - h)) / (2 * h)
    dv = (logom(z + 1j * h) - logom(z - 1j * h)) / (2 * h)
    tu, tv = _unit_gauge_connection(kernel.degree, z)
    return float(max(abs(du + tu), abs(dv + tv)))


@dataclass(frozen=True)
class LemmaReport:
    k: int
    diag_variation: float
    defect_unperturbed: float
    defect_perturbed: float
    perturbed_scale: float

    def as_dict(self) -> dict:
        return {
            "k": self.k,
            "diag_variation": self.diag_variation,
            "lemma_defect_unperturbed": self.defect_unperturbed,
            "lemma_defect_perturbed": self.defect_perturbed,
            "perturbed_scale": self.perturbed_scale,
        }


def check_lemma_berg(
    kernel: BergmanKernel, probes, h: float = 1e-5, perturb_scale: float = 1.5
) -> LemmaReport:
    """Both directions of the balanced-kernel criterion at the given probes.

    Unperturbed: the kernel's diagonal is constant and the covariant-derivative
    defect vanishes.  Perturbed (first basis section rescaled non-unitarily):
    the diagonal varies and the defect is bounded away from zero at some probe.
    """
    probes = [complex(z) for z in probes]
    k = kernel.degree
    clean = kernel
    scales = kernel.basis.coefficient_scales.copy()
    scales[0] *= perturb_scale
    bent = build_cp1_bergman(k, scales=scales)

    zs = np.array(probes)
    diag_clean = clean.diag(zs)
    variation = float(np.max(np.abs(diag_clean / diag_clean[0] - 1)))
    d_clean = max(covariant_defect(clean, z, h) for z in probes)
    d_bent = max(covariant_defect(bent, z, h) for z in probes)
    return LemmaReport(
        k=k,
        diag_variation=variation,
        defect_unperturbed=d_clean,
        defect_perturbed=d_bent,
        perturbed_scale=perturb_scale,
    )


def bargmann_truncated_diag(hbar: float, k: int, r) -> np.ndarray:
    """Relative diagonal deviation of the radius-truncated flat Bargmann basis.

    With sections z^a e^{-|z|^2 / 2 hbar}, a <= k, the normalized diagonal at
    radius r equals the Poisson(r^2/hbar) CDF at k, so the deviation from the
    untruncated constant is the upper Poisson tail.
    """
    r = np.asarray(r, dtype=float)
    lam = r**2 / hbar
    terms = np.array([np.exp(-lam + a * np.log(np.where(lam > 0, lam, 1.0)) - math.lgamma(a + 1))
                      for a in range(k + 1)])
    cdf = np.where(lam > 0, terms.sum(axis=0), 1.0)
    return 1.0 - cdf
