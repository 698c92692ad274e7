"""Discretized kernel operator, physical eigenspace, coherent states, quantization.

The weighted symmetrization A = W^{1/2} K^T W^{1/2} (entries built from
Omega(x_j, x_i), the kernel of the operator that integrates against the first
slot) is Hermitian by conjugate symmetry of the kernel.  Its lambda ~ 1
eigenspace is the physical Hilbert space; coherent states are kernel rows
projected onto it.

On the sphere the q-axis is uniform and periodic and the kernel depends on q
only through q'-q, so A is exactly (twisted) block-circulant; the "fourier"
method diagonalizes the same matrix mode by mode at a fraction of the dense
cost.  Both methods agree to roundoff.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .geometry import ModelName, ModelSpec
from .grids import QuadratureGrid

__all__ = [
    "DiscreteHilbert",
    "QuantizedObservable",
    "DiscretizationError",
    "BoundaryContaminationError",
    "build_discrete_hilbert",
    "coherent_state",
    "quantize",
    "special_observable_defect",
    "commutator_scaling_study",
]

PHYS_THRESHOLD = 0.5


class DiscretizationError(RuntimeError):
    def __init__(self, message, spectrum=None):
        super().__init__(message)
        self.spectrum = spectrum


class BoundaryContaminationError(ValueError):
    """Coherent-state probe too close to the truncation boundary."""


@dataclass(frozen=True)
class DiscreteHilbert:
    model: ModelSpec
    grid: QuadratureGrid
    spectrum: np.ndarray            # ascending eigenvalues of the weighted operator
    phys_basis: np.ndarray          # (N, rank) orthonormal columns, weighted coords
    phys_eigenvalues: np.ndarray    # (rank,) eigenvalues of the phys columns
    rank_phys: int
    method: str
    threshold: float = PHYS_THRESHOLD

    def clustering_defect(self) -> float:
        """max_i min(|lambda_i|, |lambda_i - 1|): distance from a {0,1} spectrum."""
        lam = self.spectrum
        return float(np.max(np.minimum(np.abs(lam), np.abs(lam - 1.0))))

    def omega_matrix(self) -> np.ndarray:
        """Materialize the weighted Hermitian kernel matrix (N x N)."""
        return _weighted_operator(self.model, self.grid)

    @property
    def sqrt_weights(self) -> np.ndarray:
        return np.sqrt(self.grid.weights)


def _weighted_operator(model: ModelSpec, grid: QuadratureGrid) -> np.ndarray:
    zp, zq = grid.p, grid.q
    K = model.omega((zp[:, None], zq[:, None]), (zp[None, :], zq[None, :]))
    sw = np.sqrt(grid.weights)
    return sw[:, None] * K.T * sw[None, :]


def _eig_dense(model, grid):
    A = _weighted_operator(model, grid)
    lam, vec = np.linalg.eigh(A)
    return lam, vec


def _eig_fourier(model, grid):
    """Exact mode-by-mode diagonalization for uniform periodic q grids.

    The kernel value at (p', q') x (p, q) is a function g(p', p, dq); a DFT in
    the q index (shifted by half a mode when the kernel is antiperiodic over
    the chart period, as happens for odd sphere rank) block-diagonalizes the
    weighted operator exactly.
    """
    n_p, n_q = grid.shape
    ps = grid.p_axis
    dq = grid.q_axis[1] - grid.q_axis[0]
    wq = grid.q_uniform_period / n_q
    wp = grid.weights.reshape(n_p, n_q)[:, 0] / wq

    d = np.arange(n_q) * dq
    # G[i, j, d] = Omega((p_j, 0), (p_i, d)); operator kernel with first slot integrated
    G = model.omega(
        (ps[None, :, None], np.zeros((1, 1, 1))),
        (ps[:, None, None], d[None, None, :]),
    )
    shift = model.omega((ps[:1], grid.q_axis[:1]), (ps[:1], grid.q_axis[:1] + grid.q_uniform_period))
    alpha = 0.0 if abs(complex(shift) - 1.0) < 1e-9 else 0.5
    modes = np.arange(n_q) + alpha
    E = np.exp(-2j * np.pi * np.outer(np.arange(n_q), modes) / n_q)
    Ghat = np.einsum("ijd,dm->mij", G, E)
    sw = np.sqrt(wp)
    blocks = wq * sw[None, :, None] * Ghat * sw[None, None, :]

    herm_defect = np.max(np.abs(blocks - np.conj(np.transpose(blocks, (0, 2, 1)))))
    if herm_defect > 1e-9:
        raise DiscretizationError(f"fourier blocks not Hermitian (defect {herm_defect:.2e})")
    lam_all = np.empty((n_q, n_p))
    vec_all = np.empty((n_q, n_p, n_p), dtype=complex)
    for m in range(n_q):
        lam_all[m], vec_all[m] = np.linalg.eigh(blocks[m])
    # lift block eigenvectors to the full grid: Psi[(i,a)] = u_i e^{2 pi i (m+alpha) a / n_q} / sqrt(n_q)
    phases = np.exp(2j * np.pi * np.outer(modes, np.arange(n_q)) / n_q) / math.sqrt(n_q)
    lam = lam_all.ravel()
    order = np.argsort(lam)
    lam = lam[order]
    idx_mode, idx_vec = np.unravel_index(order, (n_q, n_p))
    vec = np.empty((n_p * n_q, len(order)), dtype=complex)
    for col, (m, v) in enumerate(zip(idx_mode, idx_vec)):
        vec[:, col] = (vec_all[m][:, v][:, None] * phases[m][None, :]).ravel()
    return lam, vec


def build_discrete_hilbert(
    model: ModelSpec,
    grid: QuadratureGrid,
    method: str = "auto",
    spectrum_eps: float = 0.05,
    threshold: float = PHYS_THRESHOLD,
) -> DiscreteHilbert:
    """Assemble the weighted kernel operator and split off the physical space.

    Eigenvalues above ``threshold`` (default 1/2) span the physical space.  A
    spectrum escaping [-eps, 1+eps] raises DiscretizationError with the
    spectrum attached.
    """
    if not model.calibrated:
        raise ValueError("calibrate the model before building a discrete Hilbert space")
    if method == "auto":
        method = "fourier" if grid.q_uniform_period is not None else "dense"
    if method == "fourier":
        if grid.q_uniform_period is None:
            raise ValueError("fourier method needs a uniform periodic q axis")
        lam, vec = _eig_fourier(model, grid)
    elif method == "dense":
        lam, vec = _eig_dense(model, grid)
    else:
        raise ValueError(f"unknown method {method!r}")
    if lam.min() < -spectrum_eps or lam.max() > 1 + spectrum_eps:
        raise DiscretizationError(
            f"spectrum outside [-{spectrum_eps}, 1+{spectrum_eps}]: "
            f"[{lam.min():.3g}, {lam.max():.3g}]; refine the grid",
            spectrum=lam,
        )
    keep = lam > threshold
    return DiscreteHilbert(
        model=model,
        grid=grid,
        spectrum=lam,
        phys_basis=np.ascontiguousarray(vec[:, keep]),
        phys_eigenvalues=lam[keep],
        rank_phys=int(np.sum(keep)),
        method=method,
        threshold=threshold,
    )


def _boundary_margin(model: ModelSpec, grid: QuadratureGrid, x) -> float:
    (plo, phi), (qlo, qhi) = grid.bounds
    p, q = float(x[0]), float(x[1])
    dists = [p - plo, phi - p]
    if grid.q_uniform_period is None:
        dists += [q - qlo, qhi - q]
    return min(dists)


def coherent_state(H: DiscreteHilbert, x, strict: bool = True) -> np.ndarray:
    """Coordinates of |x> in the physical basis.

    The kernel row Omega(x, .) is a lambda ~ 1 eigenfunction, so projecting
    onto the physical basis loses only the discretization defect.  On
    truncated (non-periodic) charts, probes closer than 3 sqrt(hbar) to the
    boundary are rejected unless ``strict=False``.
    """
    if strict and H.model.name is not ModelName.SPHERE:
        if _boundary_margin(H.model, H.grid, x) < 3 * math.sqrt(H.model.hbar):
            raise BoundaryContaminationError(
                f"probe {tuple(x)} within 3*sqrt(hbar) of the truncation boundary"
            )
    row = H.model.omega((float(x[0]), float(x[1])), (H.grid.p, H.grid.q))
    return H.phys_basis.conj().T @ (H.sqrt_weights * row)


@dataclass(frozen=True)
class QuantizedObservable:
    symbol: str
    matrix: np.ndarray              # (rank, rank) in the physical basis

    @property
    def is_hermitian(self) -> bool:
        return bool(np.allclose(self.matrix, self.matrix.conj().T, atol=1e-12))


def quantize(H: DiscreteHilbert, f: Callable, symbol: str = "f") -> QuantizedObservable:
    """Matrix of sum_i w_i f(x_i) |x_i><x_i| in physical coordinates.

    Coherent coordinates of the grid nodes satisfy C = Lambda P^* W^{-1/2}
    exactly, which collapses the double sum to
    f_hat = Lambda (P^* diag(f) P) Lambda with Lambda the physical
    eigenvalues.  No N x N kernel matrix is materialized.
    """
    fvals = np.asarray(f(H.grid.p, H.grid.q), dtype=complex)
    if fvals.shape != H.grid.p.shape:
        raise ValueError("observable must evaluate to one value per grid node")
    P = H.phys_basis
    lam = H.phys_eigenvalues
    core = P.conj().T @ (fvals[:, None] * P)
    mat = lam[:, None] * core * lam[None, :]
    return QuantizedObservable(symbol=symbol, matrix=mat)


def special_observable_defect(H: DiscreteHilbert, f: Callable, probes) -> float:
    """max_x |f(x) - int f(y) |Omega(x,y)|^2 dmu(y)| over the probe points."""
    defect = 0.0
    fvals = np.asarray(f(H.grid.p, H.grid.q), dtype=float)
    for x in probes:
        row = H.model.omega((float(x[0]), float(x[1])), (H.grid.p, H.grid.q))
        integral = float(np.sum(fvals * np.abs(row) ** 2 * H.grid.weights))
        fx = float(f(np.asarray(x[0]), np.asarray(x[1])))
        defect = max(defect, abs(fx - integral))
    return defect


def commutator_scaling_study(
    builds: list,
    f: Callable,
    g: Callable,
    poisson_fg: Callable,
) -> list:
    """First-order star-product defect table over a descending hbar family.

    ``builds`` is a list of DiscreteHilbert instances (one per hbar,
    descending).  For each, the operator-norm defect
    ||[f_hat, g_hat] - i hbar {f,g}_hat|| / hbar is recorded; the sequence
    should stay bounded.
    """
    rows = []
    last_h = None
    for H in builds:
        if H.rank_phys < 3:
            raise ValueError("rank_phys < 3: commutator norms are not meaningful")
        h = H.model.hbar
        if last_h is not None and h >= last_h:
            raise ValueError("hbar list must be descending")
        last_h = h
        fhat = quantize(H, f, "f").matrix
        ghat = quantize(H, g, "g").matrix
        bracket = quantize(H, poisson_fg, "{f,g}").matrix
        defect = np.linalg.norm(fhat @ ghat - ghat @ fhat - 1j * h * bracket, 2)
        rows.append(
            {
                "hbar": h,
                "grid_n": int(H.grid.p.size),
                "rank_phys": H.rank_phys,
                "max_eig_defect": H.clustering_defect(),
                "commutator_defect": float(defect),
                "defect_over_hbar": float(defect / h),
            }
        )
    return rows
