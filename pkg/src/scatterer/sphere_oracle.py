"""Closed-form sphere reference solutions, independent of any mesh.

Everything here is separation of variables on the sphere: spherical
Bessel functions by recurrence (Miller's downward algorithm for j_n,
upward for y_n, with overflow rescaling so complex arguments are safe),
the Neumann-to-Dirichlet eigenvalues h_n(kR)/(k h_n'(kR)), the Mie-type
series for an impedance sphere, and the diagonal scattering-matrix
entries.  These are the oracles the panel code is tested against; they
deliberately share no code with the mesh path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

_RESCALE = 1e250


def spherical_jn_yn(n_max: int, rho: complex
                    ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Spherical Bessel j_n, y_n and derivatives for n = 0..n_max.

    Returns (j, jp, y, yp) as complex arrays of length n_max + 1.  y_n is
    generated by the upward recurrence (stable for y), j_n by downward
    recurrence from a zero start well above n_max, rescaled whenever the
    iterates grow past ~1e250 and normalized against the closed forms for
    j_0 or j_1 (whichever is larger in magnitude, avoiding zeros of one).
    """
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    rho = complex(rho)
    if rho == 0.0:
        raise ValueError("rho = 0 is singular; use series limits instead")

    n_arr = n_max + 1
    sin_r, cos_r = np.sin(rho), np.cos(rho)
    j0 = sin_r / rho
    j1 = sin_r / rho ** 2 - cos_r / rho

    # downward (Miller) pass for j
    start = n_max + 16 + int(abs(rho))
    f_hi, f = 0.0 + 0.0j, 1e-30 + 0.0j
    tail = np.empty(n_arr, dtype=complex)
    for n in range(start, 0, -1):
        f_lo = (2 * n + 1) / rho * f - f_hi
        f_hi, f = f, f_lo
        if n - 1 <= n_max:
            tail[n - 1] = f
        if abs(f) > _RESCALE:
            f_hi /= _RESCALE
            f /= _RESCALE
            if n - 1 <= n_max:
                tail[n - 1:] /= _RESCALE
    if abs(j0) >= abs(j1) and tail[0] != 0.0:
        scale = j0 / tail[0]
    elif n_max >= 1:
        scale = j1 / tail[1]
    else:
        # n_max == 0 at a zero of sin: recover j0 via one upward step from
        # the un-normalized pair using the closed form for j1
        scale = j1 / ((1.0 / rho) * tail[0] - f_hi)
    j = tail * scale

    # upward pass for y
    y = np.empty(n_arr, dtype=complex)
    y[0] = -cos_r / rho
    if n_max >= 1:
        y[1] = -cos_r / rho ** 2 - sin_r / rho
    for n in range(1, n_max):
        y[n + 1] = (2 * n + 1) / rho * y[n] - y[n - 1]

    jp = np.empty(n_arr, dtype=complex)
    yp = np.empty(n_arr, dtype=complex)
    jp[0] = -j1
    yp[0] = -(-cos_r / rho ** 2 - sin_r / rho)
    for n in range(1, n_arr):
        jp[n] = j[n - 1] - (n + 1) / rho * j[n]
        yp[n] = y[n - 1] - (n + 1) / rho * y[n]
    return j, jp, y, yp


def spherical_hn(n_max: int, rho: complex) -> tuple[np.ndarray, np.ndarray]:
    """Outgoing spherical Hankel h_n = j_n + i y_n and its derivative."""
    j, jp, y, yp = spherical_jn_yn(n_max, rho)
    return j + 1j * y, jp + 1j * yp


def ntd_eigenvalue_sphere(n: int, k: complex, radius: float = 1.0) -> complex:
    """Exterior Neumann-to-Dirichlet eigenvalue on the degree-n harmonics.

    For the radius-R sphere the outgoing mode h_n(kr) Y_n gives the
    eigenvalue h_n(kR) / (k h_n'(kR)); the k -> 0 limit is -R/(n+1).
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    k = complex(k)
    if k == 0.0:
        return -radius / (n + 1.0)
    h, hp = spherical_hn(n, k * radius)
    return h[n] / (k * hp[n])


def _auto_n_terms(k: complex, radius: float) -> int:
    x = abs(k) * radius
    return max(8, int(math.ceil(x + 4.0 * x ** (1.0 / 3.0) + 8.0)))


@dataclass(frozen=True)
class MieSolution:
    """Impedance-sphere series solution at one wavenumber."""

    k: complex
    radius: float
    gamma_value: complex
    coefficients: np.ndarray  # a_n, scattered expansion in i^n (2n+1) h_n P_n

    def far_field(self, cos_theta: np.ndarray | float) -> np.ndarray:
        """Scattering amplitude u_inf at angle(s) Theta from the incidence."""
        cos_theta = np.atleast_1d(np.asarray(cos_theta, dtype=float))
        n_terms = self.coefficients.size
        # P_n(cos) by upward recurrence, accumulated on the fly
        out = np.zeros(cos_theta.shape, dtype=complex)
        p_prev = np.ones_like(cos_theta)
        p = cos_theta.copy()
        for n in range(n_terms):
            pn = p_prev if n == 0 else p
            out += (2 * n + 1) * self.coefficients[n] * pn
            if n >= 1:
                p_next = ((2 * n + 1) * cos_theta * p - n * p_prev) / (n + 1)
                p_prev, p = p, p_next
        return out / (1j * self.k)

    @property
    def cross_section(self) -> float:
        """Total scattering cross section (4 pi / k^2) sum (2n+1) |a_n|^2."""
        n = np.arange(self.coefficients.size)
        return float(4.0 * math.pi / abs(self.k) ** 2
                     * np.sum((2 * n + 1) * np.abs(self.coefficients) ** 2))

    @property
    def smatrix_eigenvalues(self) -> np.ndarray:
        """Diagonal scattering-matrix entries s_n = 1 + 2 a_n."""
        return 1.0 + 2.0 * self.coefficients


def mie_solve(k: complex, gamma_value: complex, radius: float = 1.0,
              n_terms: int | None = None) -> MieSolution:
    """Plane-wave scattering by a sphere with boundary du/dn = gamma u.

    The incident wave e^{ik r.alpha} expands over j_n; matching the Robin
    condition on the total field mode by mode gives

        a_n = -(k j_n'(kR) - gamma j_n(kR)) / (k h_n'(kR) - gamma h_n(kR)).
    """
    k = complex(k)
    if k == 0.0:
        raise ValueError("mie_solve needs k != 0")
    if n_terms is None:
        n_terms = _auto_n_terms(k, radius)
    n_max = n_terms - 1
    rho = k * radius
    j, jp, y, yp = spherical_jn_yn(n_max, rho)
    h, hp = j + 1j * y, jp + 1j * yp
    a = -(k * jp - gamma_value * j) / (k * hp - gamma_value * h)
    return MieSolution(k=k, radius=radius, gamma_value=complex(gamma_value),
                       coefficients=a)


def smatrix_diag_sphere(n_max: int, k: complex, gamma_value: complex,
                        radius: float = 1.0) -> np.ndarray:
    """Scattering-matrix eigenvalues s_n, n = 0..n_max, computed directly.

    s_n is the ratio of outgoing to incoming radial coefficients in the
    mode (h2_n + s_n h_n) Y_n satisfying the impedance condition:

        s_n = -(k h2_n'(kR) - gamma h2_n(kR)) / (k h_n'(kR) - gamma h_n(kR))

    with h2 = j - i y the incoming wave.  Identical to 1 + 2 a_n, which
    the tests exploit as a consistency check.
    """
    k = complex(k)
    j, jp, y, yp = spherical_jn_yn(n_max, k * radius)
    h, hp = j + 1j * y, jp + 1j * yp
    h2, h2p = j - 1j * y, jp - 1j * yp
    return -(k * h2p - gamma_value * h2) / (k * hp - gamma_value * h)


def smatrix_pole_equation_springy(n: int, k: complex, stiffness: float,
                                  radius: float = 1.0) -> complex:
    """Characteristic function 1 - gamma(k) sigma_n(k) for gamma = -Z k^2.

    Zeros in the lower half plane are scattering poles of the springy
    sphere, approaching +-1/sqrt(Z |sigma_n(0)|) - i c_n^2/(8 pi Z
    sigma_n(0)^2) as the stiffness parameter Z grows.
    """
    gamma_value = -stiffness * complex(k) ** 2
    return 1.0 - gamma_value * ntd_eigenvalue_sphere(n, k, radius)


def find_root_secant(f: Callable[[complex], complex], z0: complex, z1: complex,
                     tol: float = 1e-12, max_iter: int = 60) -> complex:
    """Secant iteration in the complex plane; raises if it fails to settle."""
    f0, f1 = f(z0), f(z1)
    for _ in range(max_iter):
        denom = f1 - f0
        if denom == 0.0:
            break
        z2 = z1 - f1 * (z1 - z0) / denom
        z0, f0, z1, f1 = z1, f1, z2, f(z2)
        if abs(z1 - z0) <= tol * max(1.0, abs(z1)):
            return z1
    raise RuntimeError(f"secant iteration did not converge from {z0}")
