"""Plane-wave scattering solves, far fields, and cross-sections.

The impedance problem du/dn = gamma u for the total field turns into the
boundary equation (I - gamma(k) D(k)) v = f for the scattered Neumann
data v, with f = -(d/dn - gamma) e^{ik r.alpha} on the boundary; the
scattered trace is then u = D v.  The far field follows from the Green
representation

    u_inf(theta) = (1/4pi) int_boundary (u d/dn e^{-ik theta.r}
                                         - v e^{-ik theta.r}) dS,

sampled on a Gauss-Legendre x uniform-azimuth sphere grid, and the total
cross-section is computed both as sum omega_q |u_inf|^2 and from the
boundary energy flux (1/k) Im <v, u>; their agreement for real gamma is
the optical-theorem consistency check.  A near-singular boundary system
is reported as proximity to a resonance, with the offending
Neumann-to-Dirichlet eigenvalue attached.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from scipy.linalg.lapack import zgecon

from .bie import assemble_double_layer, assemble_single_layer
from .geometry import SurfaceMesh
from .impedance import Constant
from .ntd import NtDMatrix, build_ntd, spectrum

_FOUR_PI = 4.0 * math.pi

DEFAULT_N_POLAR = 16
DEFAULT_N_AZIMUTH = 32
SOLVE_RESIDUAL_LIMIT = 1e-10
SOLVE_CONDITION_LIMIT = 1e12
DIRICHLET_CONDITION_LIMIT = 1e8


class ResonanceProximityError(RuntimeError):
    """The boundary system is singular to working precision because
    1/gamma(k) sits next to an eigenvalue of D(k) — a resonance of the
    scatterer, not a solver defect."""

    def __init__(self, message: str, k: complex, gamma_value: complex,
                 nearest_sigma: complex, distance: float,
                 condition_estimate: float):
        super().__init__(message)
        self.k = k
        self.gamma_value = gamma_value
        self.nearest_sigma = nearest_sigma
        self.distance = distance
        self.condition_estimate = condition_estimate


@dataclass(frozen=True)
class PlaneWave:
    """Incident plane wave e^{ik r.alpha} with unit direction alpha."""

    alpha: np.ndarray
    k: complex

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=float).reshape(3)
        norm = float(np.linalg.norm(alpha))
        if norm == 0.0:
            raise ValueError("plane-wave direction must be nonzero")
        if abs(norm - 1.0) > 1e-8:
            raise ValueError(f"plane-wave direction must be unit (|alpha| = "
                             f"{norm:.6g})")
        object.__setattr__(self, "alpha", alpha / norm)
        object.__setattr__(self, "k", complex(self.k))
        self.alpha.setflags(write=False)

    def trace(self, points: np.ndarray) -> np.ndarray:
        """e^{ik r.alpha} sampled at the given points."""
        return np.exp(1j * self.k * (points @ self.alpha))

    def normal_derivative(self, points: np.ndarray,
                          normals: np.ndarray) -> np.ndarray:
        """d/dn e^{ik r.alpha} sampled at the given points."""
        return 1j * self.k * (normals @ self.alpha) * self.trace(points)


def farfield_directions(n_polar: int = DEFAULT_N_POLAR,
                        n_azimuth: int = DEFAULT_N_AZIMUTH
                        ) -> tuple[np.ndarray, np.ndarray]:
    """Product quadrature on the unit sphere: Gauss-Legendre in cos(theta)
    times uniform azimuth.  Returns (directions Q x 3, weights Q) with
    sum of weights = 4 pi to rounding; exact for harmonics through degree
    2 n_polar - 1 (polar) and n_azimuth - 1 (azimuthal)."""
    x, w_polar = np.polynomial.legendre.leggauss(n_polar)
    phi = 2.0 * np.pi * np.arange(n_azimuth) / n_azimuth
    st = np.sqrt(1.0 - x ** 2)
    dirs = np.empty((n_polar, n_azimuth, 3))
    dirs[:, :, 0] = st[:, None] * np.cos(phi)[None, :]
    dirs[:, :, 1] = st[:, None] * np.sin(phi)[None, :]
    dirs[:, :, 2] = x[:, None] * np.ones_like(phi)[None, :]
    weights = np.repeat(w_polar * (2.0 * np.pi / n_azimuth), n_azimuth)
    return dirs.reshape(-1, 3), weights


def antipodal_indices(n_polar: int = DEFAULT_N_POLAR,
                      n_azimuth: int = DEFAULT_N_AZIMUTH) -> np.ndarray:
    """Permutation sending each grid direction to its exact antipode;
    requires even n_azimuth (Gauss-Legendre nodes are already symmetric)."""
    if n_azimuth % 2:
        raise ValueError("antipodal map needs an even azimuth count")
    i = np.arange(n_polar)[:, None]
    j = np.arange(n_azimuth)[None, :]
    mapped = (n_polar - 1 - i) * n_azimuth + (j + n_azimuth // 2) % n_azimuth
    return mapped.reshape(-1)


@dataclass(frozen=True)
class FarField:
    """Scattering amplitude sampled on a spherical quadrature grid."""

    directions: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    k: complex

    def __post_init__(self):
        total = float(np.sum(self.weights))
        if abs(total - _FOUR_PI) > 1e-10:
            raise ValueError(f"far-field weights sum to {total!r}, not 4 pi")

    @property
    def monopole_average(self) -> complex:
        """(1/4pi) sum omega_q u_inf(theta_q), the isotropic component."""
        return complex(np.sum(self.weights * self.values) / _FOUR_PI)

    def norm(self) -> float:
        """L2(S^2) norm sqrt(sum omega_q |u_inf|^2)."""
        return float(np.sqrt(np.sum(self.weights * np.abs(self.values) ** 2)))


def far_field(mesh: SurfaceMesh, u_boundary: np.ndarray, v: np.ndarray,
              k: complex, directions: np.ndarray | None = None,
              weights: np.ndarray | None = None) -> FarField:
    """Far-field samples from boundary Cauchy data (u, v = du/dn)."""
    k = complex(k)
    if k.imag != 0.0 or k.real <= 0.0:
        raise ValueError("far field is defined for real k > 0")
    if directions is None or weights is None:
        directions, weights = farfield_directions()
    proj_c = directions @ mesh.panel_centroids.T      # Q x N
    proj_n = directions @ mesh.outward_normals.T
    phase = np.exp(-1j * k * proj_c)
    integrand = (-1j * k * proj_n * u_boundary[None, :] - v[None, :]) * phase
    values = (integrand @ mesh.panel_areas) / _FOUR_PI
    return FarField(directions=directions, weights=weights, values=values,
                    k=k)


def cross_section_farfield(ff: FarField) -> float:
    """Total cross-section sum omega_q |u_inf(theta_q)|^2."""
    return float(np.sum(ff.weights * np.abs(ff.values) ** 2))


def cross_section_flux(v: np.ndarray, u_boundary: np.ndarray,
                       w: np.ndarray, k: float) -> float:
    """Total cross-section from the boundary flux (1/k) Im <v, u>,
    with <a, b> = sum_i w_i a_i conj(b_i)."""
    k = float(k)
    if k <= 0.0:
        raise ValueError("flux cross-section needs real k > 0")
    return float(np.imag(np.sum(w * v * np.conj(u_boundary))) / k)


@dataclass(frozen=True)
class ScatterSolution:
    """Boundary data and radiated quantities of one impedance solve."""

    k: complex
    gamma_value: complex
    v: np.ndarray
    u_boundary: np.ndarray
    far_field: FarField | None
    sigma_farfield: float | None
    sigma_flux: float | None
    residual: float
    condition_estimate: float


def _gamma_value(model, k: complex) -> complex:
    if hasattr(model, "gamma"):
        return complex(model.gamma(k))
    return complex(model)


def _diagnose_resonance(ntd_matrix: NtDMatrix, gamma_value: complex,
                        cond: float, what: str) -> ResonanceProximityError:
    spec = spectrum(ntd_matrix)
    dist = np.abs(1.0 - gamma_value * spec.eigenvalues)
    j = int(np.argmin(dist))
    sigma = complex(spec.eigenvalues[j])
    return ResonanceProximityError(
        f"{what} at k = {ntd_matrix.k}: |1 - gamma sigma_j| = "
        f"{dist[j]:.3e} for sigma_j = {sigma:.6g} "
        f"(condition estimate {cond:.3g}); the wavenumber sits at a "
        f"resonance of the scatterer",
        k=ntd_matrix.k, gamma_value=gamma_value, nearest_sigma=sigma,
        distance=float(dist[j]), condition_estimate=cond)


def solve_impedance(mesh: SurfaceMesh, k: complex, model, wave: PlaneWave,
                    ntd_matrix: NtDMatrix | None = None,
                    condition_limit: float = SOLVE_CONDITION_LIMIT
                    ) -> ScatterSolution:
    """Solve the impedance scattering problem at one wavenumber.

    model is an impedance model (or a bare complex number, taken as a
    constant impedance).  A prebuilt NtDMatrix at the same k may be
    passed to amortize assembly across solves.  Raises
    ResonanceProximityError when (I - gamma D) is singular to working
    precision, carrying the nearest eigenvalue of D(k).
    """
    k = complex(k)
    if not np.isclose(complex(wave.k), k):
        raise ValueError(f"plane wave at k = {wave.k} does not match "
                         f"solve at k = {k}")
    if ntd_matrix is None:
        ntd_matrix = build_ntd(mesh, k)
    elif not np.isclose(complex(ntd_matrix.k), k):
        raise ValueError("ntd_matrix was built at a different wavenumber")
    gv = _gamma_value(model, k)
    n = mesh.n_panels
    system = np.eye(n, dtype=complex) - gv * ntd_matrix.D
    anorm = np.linalg.norm(system, 1)
    lu, piv = lu_factor(system, overwrite_a=True, check_finite=False)
    rcond, info = zgecon(lu, anorm)
    cond = math.inf if (info != 0 or rcond == 0.0) else 1.0 / float(rcond)
    if cond > condition_limit:
        raise _diagnose_resonance(ntd_matrix, gv, cond,
                                  "impedance system singular")
    rhs = -(wave.normal_derivative(mesh.panel_centroids, mesh.outward_normals)
            - gv * wave.trace(mesh.panel_centroids))
    v = lu_solve((lu, piv), rhs, check_finite=False)
    residual = float(np.linalg.norm((v - gv * (ntd_matrix.D @ v)) - rhs)
                     / np.linalg.norm(rhs))
    if residual > SOLVE_RESIDUAL_LIMIT:
        raise _diagnose_resonance(ntd_matrix, gv, cond,
                                  f"impedance solve residual {residual:.2e}")
    u = ntd_matrix.D @ v
    ff = sigma_ff = sigma_fl = None
    if k.imag == 0.0 and k.real > 0.0:
        ff = far_field(mesh, u, v, k)
        sigma_ff = cross_section_farfield(ff)
        sigma_fl = cross_section_flux(v, u, mesh.quadrature_weights, k.real)
    return ScatterSolution(k=k, gamma_value=gv, v=v, u_boundary=u,
                           far_field=ff, sigma_farfield=sigma_ff,
                           sigma_flux=sigma_fl, residual=residual,
                           condition_estimate=cond)


@dataclass(frozen=True)
class DirichletSolution:
    """First-kind solve of the Dirichlet problem: trace w given, Neumann
    data v recovered from S_k v = (K_k - I/2) w."""

    k: complex
    trace: np.ndarray
    v: np.ndarray
    far_field: FarField
    sigma_farfield: float
    sigma_flux: float
    residual: float
    condition_estimate: float


def solve_dirichlet(mesh: SurfaceMesh, k: float, wave: PlaneWave,
                    condition_limit: float = DIRICHLET_CONDITION_LIMIT
                    ) -> DirichletSolution:
    """Scattering with the sound-soft condition u = -e^{ik r.alpha} on
    the boundary, via the first-kind single-layer trace system.

    The mild ill-conditioning of the first-kind operator is acceptable in
    the validated wavenumber window at moderate panel counts; the
    condition estimate is checked and reported otherwise.
    """
    k = complex(k)
    if k.imag != 0.0 or k.real <= 0.0:
        raise ValueError("Dirichlet solve covers real k > 0")
    if not np.isclose(complex(wave.k), k):
        raise ValueError("plane wave and solve wavenumbers differ")
    single = assemble_single_layer(mesh, k)
    double = assemble_double_layer(mesh, k)
    w_trace = -wave.trace(mesh.panel_centroids)
    rhs = double.entries @ w_trace - 0.5 * w_trace
    anorm = np.linalg.norm(single.entries, 1)
    lu, piv = lu_factor(single.entries, check_finite=False)
    rcond, info = zgecon(lu, anorm)
    cond = math.inf if (info != 0 or rcond == 0.0) else 1.0 / float(rcond)
    if cond > condition_limit:
        raise RuntimeError(f"first-kind trace system condition estimate "
                           f"{cond:.3g} exceeds {condition_limit:.3g} "
                           f"at k = {k}")
    v = lu_solve((lu, piv), rhs, check_finite=False)
    residual = float(np.linalg.norm(single.entries @ v - rhs)
                     / np.linalg.norm(rhs))
    ff = far_field(mesh, w_trace, v, k)
    return DirichletSolution(
        k=k, trace=w_trace, v=v, far_field=ff,
        sigma_farfield=cross_section_farfield(ff),
        sigma_flux=cross_section_flux(v, w_trace, mesh.quadrature_weights,
                                      k.real),
        residual=residual, condition_estimate=cond)


@dataclass(frozen=True)
class DirichletLimitRow:
    t: float
    trace_distance: float
    farfield_distance: float


@dataclass(frozen=True)
class DirichletLimitTable:
    """Impedance solutions with gamma = t e^{i delta} against the
    Dirichlet solution, as t grows."""

    k: float
    delta: float
    rows: tuple[DirichletLimitRow, ...]
    trace_norm: float          # ||w|| of the Dirichlet trace data
    farfield_norm: float       # ||w_inf|| of the Dirichlet far field

    @property
    def trace_distances(self) -> np.ndarray:
        return np.array([r.trace_distance for r in self.rows])

    @property
    def farfield_distances(self) -> np.ndarray:
        return np.array([r.farfield_distance for r in self.rows])


def dirichlet_limit_sweep(mesh: SurfaceMesh, k: float, delta: float,
                          t_list, wave: PlaneWave | None = None
                          ) -> DirichletLimitTable:
    """Drive gamma = t e^{i delta} through t_list and measure the
    distance of each impedance solution to the Dirichlet one, in the
    weighted boundary L2 norm and the far-field L2(S^2) norm."""
    k = float(k)
    if abs(abs(delta) - math.pi) < 1e-9:
        raise ValueError("delta = +-pi is outside the convergence sector")
    if wave is None:
        wave = PlaneWave(alpha=np.array([0.0, 0.0, 1.0]), k=k)
    dirichlet = solve_dirichlet(mesh, k, wave)
    nd = build_ntd(mesh, k)
    w = mesh.quadrature_weights
    rows = []
    for t in t_list:
        gv = t * cmath.exp(1j * delta)
        sol = solve_impedance(mesh, k, Constant(gv), wave, ntd_matrix=nd)
        diff = sol.u_boundary - dirichlet.trace
        trace_dist = float(np.sqrt(np.sum(w * np.abs(diff) ** 2)))
        ff_diff = sol.far_field.values - dirichlet.far_field.values
        ff_dist = float(np.sqrt(np.sum(sol.far_field.weights
                                       * np.abs(ff_diff) ** 2)))
        rows.append(DirichletLimitRow(t=float(t), trace_distance=trace_dist,
                                      farfield_distance=ff_dist))
    trace_norm = float(np.sqrt(np.sum(w * np.abs(dirichlet.trace) ** 2)))
    return DirichletLimitTable(k=k, delta=float(delta), rows=tuple(rows),
                               trace_norm=trace_norm,
                               farfield_norm=dirichlet.far_field.norm())


def extract_residue(mesh: SurfaceMesh, model, phi0: np.ndarray,
                    k_values, wave_direction=(0.0, 0.0, 1.0)) -> complex:
    """Residue of the boundary field at k = 0 along the mode phi0.

    Near a quasi-resonance at the origin, u(k) = A phi0 / k + O(1); the
    projection a(k) = k <u(k), phi0>_W is fitted linearly in k over the
    given small-k grid and extrapolated to k = 0, returning A.  Compare
    against gamma(0) sigma_0(0) b_0 with b_0 = -c_0/(gamma sigma_0)'(0).
    """
    w = mesh.quadrature_weights
    alpha = np.asarray(wave_direction, dtype=float)
    ks, proj = [], []
    for k in k_values:
        k = float(k)
        sol = solve_impedance(mesh, k, model, PlaneWave(alpha=alpha, k=k))
        ks.append(k)
        proj.append(k * np.sum(w * sol.u_boundary * np.conj(phi0)))
    fit = np.polynomial.polynomial.polyfit(np.asarray(ks),
                                           np.asarray(proj), deg=1)
    return complex(fit[0])
