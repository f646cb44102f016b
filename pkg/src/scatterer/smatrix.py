"""Far-field operator and scattering matrix on the sphere grid.

F collects far fields u_inf(theta_p; alpha_q) for plane waves from every
grid direction; S = I + (ik/2pi) F W realizes the scattering matrix as
an operator on grid samples, with the quadrature weights folded on the
right so matrix products implement the L2(S^2) integral composition.
Operator norms, adjoints, and the unitarity defect are all evaluated in
the weight-symmetrized frame W^{1/2} (.) W^{-1/2}, where the L2(S^2)
geometry becomes the plain Euclidean one.

For real impedance S is unitary up to discretization; for absorbing
impedance (Im gamma < 0) it is strictly subunitary; and S_gamma
(F_{gamma1})^* = F_gamma with gamma1(k) = conj(gamma(conj k)) replaces
unitarity for complex impedance.  Pole/zero duality at complex k is
exercised only against the sphere closed form (see sphere_oracle):
honest verification there beats an unverifiable general-mesh
continuation.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigvals, lu_factor, lu_solve, svdvals
from scipy.linalg.lapack import zgecon

from .geometry import SurfaceMesh
from .ntd import NtDMatrix, build_ntd
from .scatter import (DEFAULT_N_AZIMUTH, DEFAULT_N_POLAR,
                      SOLVE_CONDITION_LIMIT, SOLVE_RESIDUAL_LIMIT,
                      _diagnose_resonance, antipodal_indices,
                      farfield_directions)

_FOUR_PI = 4.0 * math.pi


@dataclass(frozen=True)
class FarFieldOperator:
    """Matrix of far-field kernels on the direction grid."""

    entries: np.ndarray          # F[p, q] = u_inf(theta_p; alpha_q)
    directions: np.ndarray
    weights: np.ndarray
    k: float
    gamma_value: complex
    n_polar: int
    n_azimuth: int

    @property
    def weighted(self) -> np.ndarray:
        """W^{1/2} F W^{1/2}, the frame in which L2(S^2) norms are
        Euclidean."""
        sq = np.sqrt(self.weights)
        return sq[:, None] * self.entries * sq[None, :]

    def reciprocity_residual(self) -> float:
        """Relative size of F(theta, alpha) - F(-alpha, -theta) on the
        grid, using the exact antipodal permutation."""
        ap = antipodal_indices(self.n_polar, self.n_azimuth)
        swapped = self.entries[ap][:, ap].T
        return float(np.linalg.norm(self.entries - swapped)
                     / np.linalg.norm(self.entries))


def far_field_operator(mesh: SurfaceMesh, k: float, model,
                       n_polar: int = DEFAULT_N_POLAR,
                       n_azimuth: int = DEFAULT_N_AZIMUTH,
                       ntd_matrix: NtDMatrix | None = None
                       ) -> FarFieldOperator:
    """Solve the impedance problem for every grid incidence and collect
    the far fields into the kernel matrix.

    All incidences share one factorization of (I - gamma D); a singular
    system therefore aborts the whole matrix with the resonance
    diagnosis (the singularity is a property of k, not of the incidence
    direction)."""
    k = float(k)
    if k <= 0.0:
        raise ValueError("far-field operator needs real k > 0")
    if ntd_matrix is None:
        ntd_matrix = build_ntd(mesh, k)
    gv = (complex(model.gamma(k)) if hasattr(model, "gamma")
          else complex(model))
    dirs, wq = farfield_directions(n_polar, n_azimuth)
    c = mesh.panel_centroids
    nrm = mesh.outward_normals
    w = mesh.panel_areas
    n = mesh.n_panels

    system = np.eye(n, dtype=complex) - gv * ntd_matrix.D
    anorm = np.linalg.norm(system, 1)
    lu, piv = lu_factor(system, overwrite_a=True, check_finite=False)
    rcond, info = zgecon(lu, anorm)
    cond = math.inf if (info != 0 or rcond == 0.0) else 1.0 / float(rcond)
    if cond > SOLVE_CONDITION_LIMIT:
        raise _diagnose_resonance(ntd_matrix, gv, cond,
                                  "far-field operator system singular")
    # incident data for all directions at once: N x Q
    phase_in = np.exp(1j * k * (c @ dirs.T))
    rhs = -(1j * k * (nrm @ dirs.T) - gv) * phase_in
    v = lu_solve((lu, piv), rhs, check_finite=False)
    resid = (np.linalg.norm(v - gv * (ntd_matrix.D @ v) - rhs, axis=0)
             / np.linalg.norm(rhs, axis=0))
    if np.max(resid) > SOLVE_RESIDUAL_LIMIT:
        raise _diagnose_resonance(
            ntd_matrix, gv, cond,
            f"far-field operator solve residual {np.max(resid):.2e}")
    u = ntd_matrix.D @ v
    phase_out = np.exp(-1j * k * (dirs @ c.T))        # Q x N
    slope = -1j * k * (dirs @ nrm.T)
    entries = ((slope * phase_out) @ (w[:, None] * u)
               - phase_out @ (w[:, None] * v)) / _FOUR_PI
    return FarFieldOperator(entries=entries, directions=dirs, weights=wq,
                            k=k, gamma_value=gv, n_polar=n_polar,
                            n_azimuth=n_azimuth)


@dataclass(frozen=True)
class ScatteringMatrix:
    """S = I + (ik/2pi) F W acting on grid samples."""

    S: np.ndarray
    weights: np.ndarray
    k: float
    gamma_value: complex

    @property
    def symmetrized(self) -> np.ndarray:
        """T = W^{1/2} S W^{-1/2}; Euclidean norms of T are L2(S^2)
        norms of S."""
        sq = np.sqrt(self.weights)
        return (sq[:, None] * self.S) / sq[None, :]

    def unitarity_defect(self) -> float:
        """Operator-norm distance of S S^* from the identity in L2(S^2)."""
        t = self.symmetrized
        gram = t @ t.conj().T
        gram[np.diag_indices_from(gram)] -= 1.0
        return float(np.linalg.norm(gram, 2))

    def eigenvalues(self) -> np.ndarray:
        """Spectrum of S as an L2(S^2) operator."""
        return eigvals(self.symmetrized, check_finite=False)

    def singular_values(self) -> np.ndarray:
        """L2(S^2) singular values; all <= 1 means no direction gains
        energy (absorbing impedance), >= 1 appears for gain media."""
        return svdvals(self.symmetrized, check_finite=False)


def smatrix(ff_op: FarFieldOperator) -> ScatteringMatrix:
    """Scattering matrix from the far-field operator, weights folded on
    the right."""
    s = (np.eye(ff_op.weights.size, dtype=complex)
         + (1j * ff_op.k / (2.0 * np.pi)) * ff_op.entries
         * ff_op.weights[None, :])
    return ScatteringMatrix(S=s, weights=ff_op.weights, k=ff_op.k,
                            gamma_value=ff_op.gamma_value)


def conjugate_relation_check(mesh: SurfaceMesh, k: float, model,
                             n_polar: int = DEFAULT_N_POLAR,
                             n_azimuth: int = DEFAULT_N_AZIMUTH,
                             ntd_matrix: NtDMatrix | None = None) -> float:
    """Relative defect of S_gamma (F_gamma1)^* = F_gamma on the grid,
    with gamma1(k) = conj(gamma(conj k)) and the adjoint taken in
    L2(S^2).  For real-coefficient impedance gamma1 = gamma and the
    relation reduces to the unitarity identity."""
    if not hasattr(model, "schwarz_reflection"):
        raise TypeError("model must provide schwarz_reflection() — wrap "
                        "bare numbers in an impedance model")
    f_g = far_field_operator(mesh, k, model, n_polar, n_azimuth,
                             ntd_matrix=ntd_matrix)
    f_g1 = far_field_operator(mesh, k, model.schwarz_reflection(),
                              n_polar, n_azimuth, ntd_matrix=ntd_matrix)
    f_hat = f_g.weighted
    t = (np.eye(f_hat.shape[0], dtype=complex)
         + (1j * k / (2.0 * np.pi)) * f_hat)
    defect = t @ f_g1.weighted.conj().T - f_hat
    return float(np.linalg.norm(defect, 2) / np.linalg.norm(f_hat, 2))


def write_farfield_operator_csv(ff_op: FarFieldOperator, path) -> None:
    """Dump the kernel matrix with its grid: one row per (p, q) pair."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["p", "q", "theta_x", "theta_y", "theta_z",
                         "alpha_x", "alpha_y", "alpha_z", "re_f", "im_f"])
        d = ff_op.directions
        for p in range(d.shape[0]):
            for q in range(d.shape[0]):
                val = ff_op.entries[p, q]
                writer.writerow([p, q,
                                 f"{d[p, 0]:.12e}", f"{d[p, 1]:.12e}",
                                 f"{d[p, 2]:.12e}",
                                 f"{d[q, 0]:.12e}", f"{d[q, 1]:.12e}",
                                 f"{d[q, 2]:.12e}",
                                 f"{val.real:.16e}", f"{val.imag:.16e}"])
