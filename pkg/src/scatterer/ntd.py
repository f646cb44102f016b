"""Discrete exterior Neumann-to-Dirichlet operator and its spectrum.

The map from Neumann data v to the Dirichlet trace u of the outgoing
exterior field is realized by the direct boundary-integral method: the
exterior trace identity (I/2 - K_k) u = -S_k v gives

    D(k) = -(I/2 - K_k)^{-1} S_k.

Spectra are computed in the geometry of the panel-weighted L2 inner
product <f, g> = sum_i w_i f_i conj(g_i): eigenvectors of the similar
matrix W^{1/2} D W^{-1/2} (symmetric at k = 0) are mapped back and
normalized to unit weighted norm.  Mode families across k are connected
by weighted-overlap tracking, never by sorting.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eig as dense_eig
from scipy.linalg import eigh as dense_eigh
from scipy.linalg import lu_factor, lu_solve
from scipy.linalg.lapack import zgecon
from scipy.optimize import linear_sum_assignment

from .bie import (WavenumberWindowError, assemble_double_layer,
                  assemble_single_layer)
from .geometry import SurfaceMesh

DEFAULT_CONDITION_LIMIT = 1e6
DEFAULT_MIN_OVERLAP = 0.9
NOISE_FLOOR_RATIO = 1e-3


class TraceSystemConditionError(RuntimeError):
    """Trace system (I/2 - K) too ill-conditioned to invert reliably."""

    def __init__(self, message: str, condition_estimate: float):
        super().__init__(message)
        self.condition_estimate = condition_estimate


class TrackingAmbiguityError(RuntimeError):
    """Weighted-overlap matching could not pair modes unambiguously."""

    def __init__(self, message: str, worst_overlap: float,
                 indices: tuple[int, ...] = ()):
        super().__init__(message)
        self.worst_overlap = worst_overlap
        self.indices = indices


@dataclass(frozen=True)
class NtDMatrix:
    """Dense Neumann-to-Dirichlet matrix at one wavenumber."""

    D: np.ndarray
    k: complex
    weights: np.ndarray
    mesh: SurfaceMesh
    condition_estimate: float

    def __post_init__(self):
        self.D.setflags(write=False)


def max_wavenumber(mesh: SurfaceMesh) -> float:
    """Default |k| guard 1.0/diameter, keeping the trace system away from
    the first interior Dirichlet wavenumber of comparably sized cavities."""
    return 1.0 / mesh.characteristic_diameter


def build_ntd(mesh: SurfaceMesh, k: complex, k_max: float | None = None,
              condition_limit: float = DEFAULT_CONDITION_LIMIT) -> NtDMatrix:
    """Assemble D(k) = -(I/2 - K_k)^{-1} S_k with a conditioning guard.

    Raises WavenumberWindowError outside |k| <= k_max (default
    1/diameter) and TraceSystemConditionError when the estimated
    condition number of the trace system exceeds condition_limit, which
    signals proximity to an interior resonance or a defective mesh.
    """
    k = complex(k)
    limit = max_wavenumber(mesh) if k_max is None else k_max
    if abs(k) > limit * (1.0 + 1e-12):
        raise WavenumberWindowError(
            f"|k| = {abs(k):.4g} outside the validated window "
            f"|k| <= {limit:.4g} for this mesh"
        )
    single = assemble_single_layer(mesh, k)
    double = assemble_double_layer(mesh, k)
    n = mesh.n_panels
    trace = 0.5 * np.eye(n, dtype=complex) - double.entries
    anorm = np.linalg.norm(trace, 1)
    lu, piv = lu_factor(trace, overwrite_a=True, check_finite=False)
    del trace
    rcond, info = zgecon(lu, anorm)
    if info != 0 or rcond == 0.0 or not np.isfinite(rcond):
        raise TraceSystemConditionError(
            "condition estimation of the trace system failed", float("inf"))
    cond = 1.0 / float(rcond)
    if cond > condition_limit:
        raise TraceSystemConditionError(
            f"trace system condition estimate {cond:.3g} exceeds "
            f"{condition_limit:.3g} at k = {k}", cond)
    D = lu_solve((lu, piv), -single.entries, check_finite=False)
    return NtDMatrix(D=D, k=k, weights=mesh.quadrature_weights, mesh=mesh,
                     condition_estimate=cond)


@dataclass(frozen=True)
class EigenPair:
    """One mode of D(k): eigenvalue sigma, boundary field phi with
    sum_i w_i |phi_i|^2 = 1, and projection c = sum_i w_i phi_i."""

    j: int
    sigma: complex
    phi: np.ndarray
    c: complex
    residual: float


@dataclass(frozen=True)
class SpectrumResult:
    """Full weighted eigendecomposition of one NtDMatrix.

    At k = 0 the pairs are sorted ascending by real part (most negative
    first) and the modes are real with the sign convention c_j >= 0 when
    nonzero.  At k != 0 the stored order is by real part too, but there
    it is only a deterministic storage order: family identity across k
    comes from track(), never from position.
    """

    k: complex
    eigenvalues: np.ndarray
    modes: np.ndarray  # column j is phi_j
    projections: np.ndarray
    residuals: np.ndarray
    weights: np.ndarray
    mesh: SurfaceMesh = field(repr=False)

    @property
    def n_modes(self) -> int:
        return self.eigenvalues.size

    def pair(self, j: int) -> EigenPair:
        return EigenPair(j=j, sigma=complex(self.eigenvalues[j]),
                         phi=self.modes[:, j],
                         c=complex(self.projections[j]),
                         residual=float(self.residuals[j]))

    def pairs(self) -> list[EigenPair]:
        return [self.pair(j) for j in range(self.n_modes)]

    def overlap(self, other: "SpectrumResult") -> np.ndarray:
        """|weighted inner product| between every mode pair (self x other)."""
        return np.abs((self.weights[:, None] * self.modes).conj().T
                      @ other.modes)


def _fix_phase(modes: np.ndarray, weights: np.ndarray,
               projections: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic per-mode phase: rotate the largest-modulus component
    to the positive real axis, then flip sign so c >= 0 when resolvable."""
    lead = np.argmax(np.abs(modes), axis=0)
    phase = modes[lead, np.arange(modes.shape[1])]
    phase = np.where(np.abs(phase) > 0, phase / np.abs(phase), 1.0)
    modes = modes / phase[None, :]
    projections = projections / phase
    resolvable = np.abs(projections) > 1e-8
    flip = np.where(resolvable & (projections.real < 0), -1.0, 1.0)
    return modes * flip[None, :], projections * flip


def spectrum(ntd: NtDMatrix) -> SpectrumResult:
    """Eigendecomposition of D(k) in the weighted boundary geometry.

    At k = 0 the weighted operator is symmetric in exact arithmetic, and
    the residual skew part of the assembled matrix is pure discretization
    error; the spectrum there is taken from the symmetrized matrix, so
    the k = 0 mode basis is exactly W-orthonormal and the projection
    partial sums obey Bessel's inequality by construction.
    """
    w = ntd.weights
    sq = np.sqrt(w)
    if ntd.k == 0.0:
        sym = (sq[:, None] * ntd.D.real) / sq[None, :]
        sym = 0.5 * (sym + sym.T)
        vals_r, vecs_r = dense_eigh(sym, check_finite=False)  # ascending
        resid = np.linalg.norm(sym @ vecs_r - vecs_r * vals_r[None, :],
                               axis=0)
        vals = vals_r.astype(complex)
        vecs = vecs_r.astype(complex)
    else:
        sym = (sq[:, None] * ntd.D) / sq[None, :]
        vals, vecs = dense_eig(sym, check_finite=False)
        # unit 2-norm of vecs columns == unit weighted norm after mapping back
        vecs = vecs / np.linalg.norm(vecs, axis=0, keepdims=True)
        resid = np.linalg.norm(sym @ vecs - vecs * vals[None, :], axis=0)
        order = np.lexsort((vals.imag, vals.real))
        vals, vecs, resid = vals[order], vecs[:, order], resid[order]
    modes = vecs / sq[:, None]
    projections = w @ modes
    modes, projections = _fix_phase(modes, w, projections)
    return SpectrumResult(k=ntd.k, eigenvalues=vals, modes=modes,
                          projections=projections, residuals=resid,
                          weights=w, mesh=ntd.mesh)


def coefficients(spec: SpectrumResult) -> np.ndarray:
    """Projections c_j = sum_i w_i phi_j,i of the k = 0 spectrum; their
    squares partial-sum monotonically up to at most the surface area."""
    if spec.k != 0.0:
        raise ValueError("coefficients are defined from the k = 0 spectrum")
    return spec.projections.copy()


def track(spec_a: SpectrumResult, spec_b: SpectrumResult,
          n_modes: int | None = None,
          min_overlap: float = DEFAULT_MIN_OVERLAP) -> np.ndarray:
    """Match modes of spec_a to spec_b by maximal weighted overlap.

    Returns perm with perm[i] the index in spec_b continuing mode i of
    spec_a (first n_modes modes; all by default).  Raises
    TrackingAmbiguityError when any matched pair overlaps below
    min_overlap — the symptom of an unresolved cluster rotating between
    the two wavenumbers.
    """
    if spec_a.n_modes != spec_b.n_modes:
        raise ValueError("spectra live on different discretizations")
    n = spec_a.n_modes if n_modes is None else min(n_modes, spec_a.n_modes)
    overlap = np.abs(
        (spec_a.weights[:, None] * spec_a.modes[:, :n]).conj().T
        @ spec_b.modes)
    rows, cols = linear_sum_assignment(-overlap)
    matched = overlap[rows, cols]
    if np.any(matched < min_overlap):
        bad = tuple(int(i) for i in rows[matched < min_overlap])
        raise TrackingAmbiguityError(
            f"mode matching between k={spec_a.k} and k={spec_b.k} is "
            f"ambiguous: worst overlap {matched.min():.3f} < {min_overlap}",
            float(matched.min()), bad)
    perm = np.empty(n, dtype=int)
    perm[rows] = cols
    return perm


def track_clustered(spec_a: SpectrumResult, spec_b: SpectrumResult,
                    n_modes: int | None = None,
                    min_overlap: float = DEFAULT_MIN_OVERLAP,
                    cluster_width_ratio: float = 0.02) -> np.ndarray:
    """Like track, but near-degenerate clusters are matched as subspaces.

    Eigenvectors inside a cluster mix arbitrarily between wavenumbers,
    so their one-to-one overlaps carry no information.  A matched pair
    below the per-mode threshold is accepted when every vector of its
    cluster keeps at least min_overlap^2 of its weighted mass inside the
    span of the cluster's image; a genuinely lost mode still raises
    TrackingAmbiguityError.  The tracked block is widened to the end of
    any cluster it would cut through.
    """
    if spec_a.n_modes != spec_b.n_modes:
        raise ValueError("spectra live on different discretizations")
    n = spec_a.n_modes if n_modes is None else min(n_modes, spec_a.n_modes)
    width = cluster_width_ratio * float(np.max(np.abs(spec_a.eigenvalues)))
    while (n < spec_a.n_modes
           and abs(spec_a.eigenvalues[n] - spec_a.eigenvalues[n - 1])
           <= width):
        n += 1
    overlap = np.abs(
        (spec_a.weights[:, None] * spec_a.modes[:, :n]).conj().T
        @ spec_b.modes)
    rows, cols = linear_sum_assignment(-overlap)
    perm = np.empty(n, dtype=int)
    perm[rows] = cols
    matched = overlap[np.arange(n), perm]
    bad: list[int] = []
    for i in np.flatnonzero(matched < min_overlap):
        ca = _cluster_indices(spec_a.eigenvalues, int(i), width)
        ca = ca[ca < n]
        block = overlap[np.ix_(ca, perm[ca])]
        row_mass = np.sum(block ** 2, axis=1)
        if np.min(row_mass) < min_overlap ** 2:
            bad.append(int(i))
    if bad:
        raise TrackingAmbiguityError(
            f"mode matching between k={spec_a.k} and k={spec_b.k} is "
            f"ambiguous even at cluster level: worst overlap "
            f"{float(np.min(matched[bad])):.3f} < {min_overlap}",
            float(np.min(matched[bad])), tuple(bad))
    return perm


def track_path(spectra: list[SpectrumResult], j: int,
               min_overlap: float = DEFAULT_MIN_OVERLAP) -> np.ndarray:
    """Follow mode j of spectra[0] through the list; returns its
    eigenvalue along the path."""
    idx = j
    out = [spectra[0].eigenvalues[idx]]
    for a, b in zip(spectra, spectra[1:]):
        overlap = np.abs((a.weights * a.modes[:, idx].conj()) @ b.modes)
        nxt = int(np.argmax(overlap))
        if overlap[nxt] < min_overlap:
            raise TrackingAmbiguityError(
                f"lost mode {j} between k={a.k} and k={b.k}: best overlap "
                f"{overlap[nxt]:.3f}", float(overlap[nxt]), (idx,))
        idx = nxt
        out.append(b.eigenvalues[idx])
    return np.asarray(out)


def _cluster_indices(eigenvalues: np.ndarray, j: int, width: float
                     ) -> np.ndarray:
    return np.flatnonzero(np.abs(eigenvalues - eigenvalues[j]) <= width)


@dataclass(frozen=True)
class DerivativeAtZero:
    """Central finite-difference dsigma/dk at k = 0 for one mode family.

    value is the derivative of the cluster trace mean (equal to the
    single branch derivative for a simple eigenvalue); branch_values are
    the per-branch derivatives after pairing the +h and -h spectra.
    """

    value: complex
    branch_values: np.ndarray
    cluster_indices: tuple[int, ...]
    step: float

    def __complex__(self) -> complex:
        return self.value


def eigenvalue_derivative_at_zero(
        mesh: SurfaceMesh, j: int, h: float | None = None, *,
        spectra: tuple[SpectrumResult, SpectrumResult, SpectrumResult] | None = None,
        cluster_width_ratio: float = 0.02,
        min_overlap: float = DEFAULT_MIN_OVERLAP) -> DerivativeAtZero:
    """d sigma_j / dk at k = 0 by central difference with mode tracking.

    The kernel is entire in k, so a real-axis step h (default
    1e-3/diameter) is safe.  The cluster containing mode j (eigenvalues
    within cluster_width_ratio * |sigma_0| of sigma_j at k = 0) is
    advanced as a block: its members at +-h are identified by weighted
    overlap against the k = 0 cluster subspace, branches at +h and -h
    are paired with each other by overlap, and both per-branch and
    trace-mean derivatives are returned.  Callers may pass precomputed
    spectra (at -h, 0, +h) to amortize the eigensolves.
    """
    if h is None:
        h = 1e-3 / mesh.characteristic_diameter
    if spectra is None:
        spec_m = spectrum(build_ntd(mesh, -h))
        spec_0 = spectrum(build_ntd(mesh, 0.0))
        spec_p = spectrum(build_ntd(mesh, h))
    else:
        spec_m, spec_0, spec_p = spectra
        for s, expect in ((spec_m, -h), (spec_0, 0.0), (spec_p, h)):
            if not np.isclose(complex(s.k), complex(expect)):
                raise ValueError(f"precomputed spectrum at k={s.k} does not "
                                 f"match requested step {expect}")
    width = cluster_width_ratio * float(np.max(np.abs(spec_0.eigenvalues)))
    cluster = _cluster_indices(spec_0.eigenvalues, j, width)
    m = cluster.size

    w = spec_0.weights
    basis = spec_0.modes[:, cluster]  # N x m, W-orthonormal at k=0

    def cluster_at(spec: SpectrumResult) -> np.ndarray:
        gram = np.abs((w[:, None] * basis).conj().T @ spec.modes)  # m x N
        score = np.sum(gram ** 2, axis=0)
        picked = np.argsort(score)[-m:]
        # per-branch overlaps may legitimately spread inside the cluster;
        # only the total subspace mass is required to stay put
        total = np.sum(gram[:, picked] ** 2)
        if total < m * (min_overlap ** 2):
            raise TrackingAmbiguityError(
                f"cluster subspace at k={spec.k} overlaps the k=0 cluster "
                f"only with Frobenius mass {total:.3f} of {m}",
                float(total / m), tuple(int(i) for i in cluster))
        return np.sort(picked)

    idx_p = cluster_at(spec_p)
    idx_m = cluster_at(spec_m)
    mean_deriv = (np.mean(spec_p.eigenvalues[idx_p])
                  - np.mean(spec_m.eigenvalues[idx_m])) / (2.0 * h)
    # pair +h and -h branches by mutual overlap for per-branch differences
    cross = np.abs(
        (w[:, None] * spec_p.modes[:, idx_p]).conj().T
        @ spec_m.modes[:, idx_m])
    rows, cols = linear_sum_assignment(-cross)
    branch = (spec_p.eigenvalues[idx_p[rows]]
              - spec_m.eigenvalues[idx_m[cols]]) / (2.0 * h)
    return DerivativeAtZero(value=complex(mean_deriv),
                            branch_values=branch,
                            cluster_indices=tuple(int(i) for i in cluster),
                            step=h)


@dataclass(frozen=True)
class HalfStripReport:
    """Location check of 1/sigma_j for real k: the physical modes keep
    Im(1/sigma) above -eps and Re(1/sigma) bounded."""

    k: complex
    min_im_inverse: float
    max_re_inverse: float
    violating: tuple[int, ...]
    n_checked: int
    noise_floor: float

    @property
    def ok(self) -> bool:
        return not self.violating


def half_strip_check(spec: SpectrumResult,
                     eps_disc: float = 1e-2) -> HalfStripReport:
    """Check Im(1/sigma_j) > -eps_disc for all modes above the noise
    floor |sigma_j| >= 1e-3 max|sigma|; reports extremes and violators."""
    if spec.k.imag != 0.0 or spec.k.real < 0.0:
        raise ValueError("half-strip check applies to real k >= 0")
    mags = np.abs(spec.eigenvalues)
    floor = NOISE_FLOOR_RATIO * float(np.max(mags))
    keep = np.flatnonzero(mags >= floor)
    inv = 1.0 / spec.eigenvalues[keep]
    violating = keep[inv.imag <= -eps_disc]
    return HalfStripReport(
        k=spec.k,
        min_im_inverse=float(np.min(inv.imag)),
        max_re_inverse=float(np.max(inv.real)),
        violating=tuple(int(i) for i in violating),
        n_checked=int(keep.size),
        noise_floor=floor,
    )


def write_spectrum_csv(spec: SpectrumResult, path) -> None:
    """Export j, Re sigma, Im sigma, Re c, Im c, residual as CSV."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["j", "re_sigma", "im_sigma", "re_c", "im_c",
                         "residual"])
        for j in range(spec.n_modes):
            writer.writerow([j,
                             f"{spec.eigenvalues[j].real:.16e}",
                             f"{spec.eigenvalues[j].imag:.16e}",
                             f"{spec.projections[j].real:.16e}",
                             f"{spec.projections[j].imag:.16e}",
                             f"{spec.residuals[j]:.3e}"])
