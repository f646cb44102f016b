"""Resonance poles: small-k predictions and complex root refinement.

For the springy impedance gamma = -Z k^2 the characteristic functions
g_j(k) = 1 - gamma(k) sigma_j(k) vanish near

    k_j^{+-} = +-1/sqrt(Z |sigma_j(0)|) + sigma_j'(0)/(2 Z sigma_j(0)^2),

one conjugate pair per mode with a nonvanishing projection c_j, drifting
onto the origin as the stiffness grows.  Refinement runs a secant
iteration on the scalar g_j with the eigenvalue re-tracked at every
iterate by seeded inverse iteration (root-finding on det(I - gamma D)
would under/overflow at thousands of panels, and the scalar needs no
derivative of D).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .geometry import SurfaceMesh
from .ntd import (NtDMatrix, SpectrumResult, TrackingAmbiguityError,
                  build_ntd, eigenvalue_derivative_at_zero, spectrum)

COEFF_RATIO_THRESHOLD = 1e-3     # admissibility: |c_j|^2 > ratio * area
NEAR_ZERO_RADIUS = 1e-2          # |k| below this flags a pole at the origin
REFINE_RESIDUAL_TOL = 1e-10
REFINE_MAX_ITER = 50
CONTINUATION_MIN_OVERLAP = 0.8
CLUSTER_WIDTH_RATIO = 0.02


@dataclass(frozen=True)
class PolePrediction:
    """Asymptotic pole location for one mode and sign."""

    j: int
    sign: int
    k: complex
    c: complex
    sigma0: complex


def predict_poles_springy(spec0: SpectrumResult, derivs, Z: float,
                          j_max: int | None = None,
                          coeff_ratio: float = COEFF_RATIO_THRESHOLD
                          ) -> list[PolePrediction]:
    """Predicted pole pair per admissible mode of the k = 0 spectrum.

    derivs maps mode index to sigma_j'(0) (a dict or an indexable array
    covering the admissible modes).  Modes whose projection satisfies
    |c_j|^2 <= coeff_ratio * area are excluded: without boundary-average
    content they do not couple to the incident wave.
    """
    if spec0.k != 0.0:
        raise ValueError("predictions start from the k = 0 spectrum")
    if not Z > 0:
        raise ValueError("stiffness Z must be positive")
    area = float(np.sum(spec0.weights))
    top = spec0.n_modes if j_max is None else min(j_max + 1, spec0.n_modes)
    out = []
    for j in range(top):
        c = complex(spec0.projections[j])
        if abs(c) ** 2 <= coeff_ratio * area:
            continue
        sigma0 = complex(spec0.eigenvalues[j])
        shift = complex(derivs[j]) / (2.0 * Z * sigma0 ** 2)
        for sign in (1, -1):
            k_pred = sign / math.sqrt(Z * abs(sigma0)) + shift
            out.append(PolePrediction(j=j, sign=sign, k=k_pred, c=c,
                                      sigma0=sigma0))
    return out


def _eigenpair_near(ntd_matrix: NtDMatrix, shift: complex,
                    seed_phi: np.ndarray,
                    min_overlap: float = CONTINUATION_MIN_OVERLAP,
                    max_iter: int = 12) -> tuple[complex, np.ndarray]:
    """Eigenpair of D continuing the seeded mode, by shifted inverse
    iteration.  The shift is refreshed once from the Rayleigh quotient if
    the first sweep has not converged."""
    d = ntd_matrix.D
    w = ntd_matrix.weights
    n = d.shape[0]

    def w_norm(x):
        return math.sqrt(float(np.sum(w * np.abs(x) ** 2)))

    phi = seed_phi / w_norm(seed_phi)
    sigma = complex(shift)
    for sweep in range(2):
        shifted = d - sigma * np.eye(n, dtype=complex)
        try:
            lu, piv = lu_factor(shifted, overwrite_a=True,
                                check_finite=False)
        except np.linalg.LinAlgError:
            sigma += 1e-12 * (1.0 + abs(sigma))
            shifted = d - sigma * np.eye(n, dtype=complex)
            lu, piv = lu_factor(shifted, overwrite_a=True,
                                check_finite=False)
        for _ in range(max_iter):
            y = lu_solve((lu, piv), phi, check_finite=False)
            phi = y / w_norm(y)
            d_phi = d @ phi
            rayleigh = complex(np.sum(w * d_phi * np.conj(phi)))
            resid = w_norm(d_phi - rayleigh * phi)
            if resid <= 1e-11 * max(abs(rayleigh), 1e-6):
                overlap = abs(np.sum(w * phi * np.conj(seed_phi))
                              / w_norm(seed_phi))
                if overlap < min_overlap:
                    raise TrackingAmbiguityError(
                        f"inverse iteration at k={ntd_matrix.k} settled on "
                        f"a mode with seed overlap {overlap:.3f}",
                        overlap, ())
                return rayleigh, phi
        sigma = rayleigh  # refresh the shift and sweep again
    raise RuntimeError(
        f"inverse iteration did not converge at k = {ntd_matrix.k} "
        f"(last residual {resid:.2e})")


@dataclass(frozen=True)
class ResonanceReport:
    """Outcome of refining one predicted pole."""

    j: int
    predicted_k: complex
    refined_k: complex
    residual: float
    iterations: int
    cluster: bool
    c: complex
    near_zero: bool


def refine_pole(mesh: SurfaceMesh, model, j: int, k_guess: complex,
                spec0: SpectrumResult | None = None,
                residual_tol: float = REFINE_RESIDUAL_TOL,
                max_iter: int = REFINE_MAX_ITER,
                min_overlap: float = CONTINUATION_MIN_OVERLAP
                ) -> ResonanceReport:
    """Secant refinement of a pole of mode j from the guess.

    Each iterate assembles D(k), continues the mode by seeded inverse
    iteration from the previous eigenvector (initially the k = 0 mode),
    and evaluates g(k) = 1 - gamma(k) sigma_j(k).  Success means
    |g| <= residual_tol within max_iter iterations; wavenumbers leaving
    the validity window raise the window error of the assembly layer.
    """
    if spec0 is None:
        spec0 = spectrum(build_ntd(mesh, 0.0))
    seed = {"phi": spec0.modes[:, j].astype(complex),
            "sigma": complex(spec0.eigenvalues[j])}
    gaps = np.abs(spec0.eigenvalues - spec0.eigenvalues[j])
    cluster = bool(np.sum(gaps <= CLUSTER_WIDTH_RATIO
                          * np.max(np.abs(spec0.eigenvalues))) > 1)
    evals = 0

    def g(k: complex) -> complex:
        nonlocal evals
        nd = build_ntd(mesh, k)
        sigma, phi = _eigenpair_near(nd, seed["sigma"], seed["phi"],
                                     min_overlap=min_overlap)
        seed["phi"], seed["sigma"] = phi, sigma
        evals += 1
        return 1.0 - model.gamma(k) * sigma

    k0 = complex(k_guess)
    k1 = k0 + 1e-3 * (abs(k0) + 1e-3) * (1.0 + 0.5j)
    g0, g1 = g(k0), g(k1)
    best_k, best_g = (k0, g0) if abs(g0) < abs(g1) else (k1, g1)
    for _ in range(max_iter):
        if abs(best_g) <= residual_tol:
            break
        denom = g1 - g0
        if denom == 0.0:
            break
        k2 = k1 - g1 * (k1 - k0) / denom
        g2 = g(k2)
        k0, g0, k1, g1 = k1, g1, k2, g2
        if abs(g2) < abs(best_g):
            best_k, best_g = k2, g2
    if abs(best_g) > residual_tol:
        raise RuntimeError(
            f"pole refinement stalled after {evals} evaluations with "
            f"|g| = {abs(best_g):.2e} at k = {best_k}")
    return ResonanceReport(j=j, predicted_k=complex(k_guess),
                           refined_k=best_k, residual=float(abs(best_g)),
                           iterations=evals, cluster=cluster,
                           c=complex(spec0.projections[j]),
                           near_zero=bool(abs(best_k) <= NEAR_ZERO_RADIUS))


@dataclass(frozen=True)
class SpringySweepRow:
    Z: float
    j: int
    sign: int
    predicted_k: complex
    refined_k: complex
    gap: float
    residual: float
    c: complex


@dataclass(frozen=True)
class SpringySweepTable:
    """predict + refine over a stiffness sweep."""

    rows: tuple[SpringySweepRow, ...]

    def gaps_for(self, j: int, sign: int = 1) -> np.ndarray:
        return np.array([r.gap for r in self.rows
                         if r.j == j and r.sign == sign])

    def stiffnesses_for(self, j: int, sign: int = 1) -> np.ndarray:
        return np.array([r.Z for r in self.rows
                         if r.j == j and r.sign == sign])

    def scaled_gaps_for(self, j: int, sign: int = 1) -> np.ndarray:
        """gap * Z^{3/2}; boundedness exhibits the convergence order."""
        return self.gaps_for(j, sign) * self.stiffnesses_for(j, sign) ** 1.5


def sweep_springy(mesh: SurfaceMesh, Z_list, j_max: int = 6,
                  signs=(1, -1),
                  spec0: SpectrumResult | None = None,
                  derivs: dict[int, complex] | None = None
                  ) -> SpringySweepTable:
    """Predict and refine springy poles for every stiffness in Z_list.

    The k = 0 spectrum and the admissible modes' derivatives are
    computed once (or supplied) and shared across the sweep."""
    from .impedance import Springy

    if spec0 is None:
        spec0 = spectrum(build_ntd(mesh, 0.0))
    area = float(np.sum(spec0.weights))
    admissible = [j for j in range(min(j_max + 1, spec0.n_modes))
                  if abs(spec0.projections[j]) ** 2
                  > COEFF_RATIO_THRESHOLD * area]
    if derivs is None:
        derivs = {}
    missing = [j for j in admissible if j not in derivs]
    if missing:
        spec_m = spectrum(build_ntd(mesh, -1e-3 / mesh.characteristic_diameter))
        spec_p = spectrum(build_ntd(mesh, 1e-3 / mesh.characteristic_diameter))
        for j in missing:
            der = eigenvalue_derivative_at_zero(
                mesh, j, spectra=(spec_m, spec0, spec_p))
            derivs[j] = der.value
    rows = []
    for z in Z_list:
        for pred in predict_poles_springy(spec0, derivs, z, j_max=j_max):
            if pred.sign not in signs:
                continue
            report = refine_pole(mesh, Springy(z), pred.j, pred.k,
                                 spec0=spec0)
            rows.append(SpringySweepRow(
                Z=float(z), j=pred.j, sign=pred.sign,
                predicted_k=pred.k, refined_k=report.refined_k,
                gap=float(abs(report.refined_k - pred.k)),
                residual=report.residual, c=pred.c))
    return SpringySweepTable(rows=tuple(rows))


@dataclass(frozen=True)
class GprModeStatus:
    """Resonance bookkeeping for one mode hit by 1/gamma(0)."""

    j: int
    sigma0: complex
    c: complex
    gpr_ok: bool
    amplitude_silent: bool
    product_derivative: complex   # (gamma sigma_j)'(0)


def gpr_condition_check(spec0: SpectrumResult, derivs, model,
                        rtol: float = 0.02,
                        coeff_ratio: float = COEFF_RATIO_THRESHOLD
                        ) -> list[GprModeStatus]:
    """Modes resonant at k = 0 (1/gamma(0) equal to sigma_j(0) within
    rtol) with the first-order-pole condition (gamma sigma_j)'(0) != 0
    evaluated from measured data.

    A mode with |c_j|^2 below coeff_ratio * area is amplitude-silent: the
    resonance exists but the scattering amplitude takes no pole from it.
    Returns an empty list when 1/gamma(0) misses the spectrum entirely.
    """
    if spec0.k != 0.0:
        raise ValueError("the resonance condition is read off at k = 0")
    g0 = complex(model.gamma(0.0))
    if g0 == 0.0:
        return []
    dg0 = complex(model.gamma_derivative(0.0))
    target = 1.0 / g0
    area = float(np.sum(spec0.weights))
    out = []
    for j in range(spec0.n_modes):
        sigma0 = complex(spec0.eigenvalues[j])
        if abs(sigma0 - target) > rtol * max(abs(target), abs(sigma0)):
            continue
        dsigma = complex(derivs[j])
        product_derivative = dg0 * sigma0 + g0 * dsigma
        # Reference magnitude of a non-degenerate product derivative:
        # eigenvalue derivatives at k = 0 run up to area/(4 pi) in size,
        # so measure the cancellation against that, not against the
        # (possibly jointly tiny) terms themselves.
        scale = abs(dg0 * sigma0) + abs(g0) * area / (4.0 * math.pi)
        gpr_ok = abs(product_derivative) > rtol * scale
        c = complex(spec0.projections[j])
        out.append(GprModeStatus(
            j=j, sigma0=sigma0, c=c, gpr_ok=gpr_ok,
            amplitude_silent=bool(abs(c) ** 2 <= coeff_ratio * area),
            product_derivative=product_derivative))
    return out


def write_sweep_csv(table: SpringySweepTable, path) -> None:
    """Export the stiffness sweep as CSV."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["Z", "j", "sign", "re_predicted", "im_predicted",
                         "re_refined", "im_refined", "gap", "residual",
                         "re_c", "im_c"])
        for r in table.rows:
            writer.writerow([
                f"{r.Z:.6g}", r.j, r.sign,
                f"{r.predicted_k.real:.16e}", f"{r.predicted_k.imag:.16e}",
                f"{r.refined_k.real:.16e}", f"{r.refined_k.imag:.16e}",
                f"{r.gap:.6e}", f"{r.residual:.3e}",
                f"{r.c.real:.12e}", f"{r.c.imag:.12e}"])
