"""Shared meshes and spectra, built once per session.

Both reference shapes have characteristic diameter 2, so the central
difference step for eigenvalue derivatives at k = 0 is 5e-4 in every
fixture that precomputes the +-h spectra.
"""

from __future__ import annotations

import numpy as np
import pytest

from scatterer.geometry import make_ellipsoid_mesh, make_sphere_mesh
from scatterer.impedance import Constant
from scatterer.ntd import build_ntd, eigenvalue_derivative_at_zero, spectrum
from scatterer.resonance import sweep_springy
from scatterer.scatter import PlaneWave, solve_impedance

ELLIPSOID_AXES = (1.0, 1.0, 0.5)
DERIV_STEP = 5e-4
RESONANT_KS = (0.005, 0.01, 0.02, 0.05)


@pytest.fixture(scope="session")
def sphere_l1():
    return make_sphere_mesh(1.0, 1)


@pytest.fixture(scope="session")
def sphere_l2():
    return make_sphere_mesh(1.0, 2)


@pytest.fixture(scope="session")
def sphere_l3():
    return make_sphere_mesh(1.0, 3)


@pytest.fixture(scope="session")
def ellipsoid_l2():
    return make_ellipsoid_mesh(ELLIPSOID_AXES, 2)


@pytest.fixture(scope="session")
def ellipsoid_l3():
    return make_ellipsoid_mesh(ELLIPSOID_AXES, 3)


@pytest.fixture(scope="session")
def spec0_l2(sphere_l2):
    return spectrum(build_ntd(sphere_l2, 0.0))


@pytest.fixture(scope="session")
def spec0_l3(sphere_l3):
    return spectrum(build_ntd(sphere_l3, 0.0))


@pytest.fixture(scope="session")
def espec0_l2(ellipsoid_l2):
    return spectrum(build_ntd(ellipsoid_l2, 0.0))


@pytest.fixture(scope="session")
def espec0_l3(ellipsoid_l3):
    return spectrum(build_ntd(ellipsoid_l3, 0.0))


@pytest.fixture(scope="session")
def sphere_deriv_spectra_l3(sphere_l3, spec0_l3):
    """(-h, 0, +h) sphere spectra for derivative-at-zero computations."""
    h = DERIV_STEP
    return (spectrum(build_ntd(sphere_l3, -h)), spec0_l3,
            spectrum(build_ntd(sphere_l3, h)))


@pytest.fixture(scope="session")
def ellipsoid_deriv_spectra_l3(ellipsoid_l3, espec0_l3):
    h = DERIV_STEP
    return (spectrum(build_ntd(ellipsoid_l3, -h)), espec0_l3,
            spectrum(build_ntd(ellipsoid_l3, h)))


@pytest.fixture(scope="session")
def sphere_deriv_spectra_l2(sphere_l2, spec0_l2):
    h = DERIV_STEP
    return (spectrum(build_ntd(sphere_l2, -h)), spec0_l2,
            spectrum(build_ntd(sphere_l2, h)))


@pytest.fixture(scope="session")
def sphere_derivs_l2(sphere_l2, sphere_deriv_spectra_l2):
    """sigma_j'(0) for the first four sphere modes from the shared
    central-difference spectra."""
    return {j: eigenvalue_derivative_at_zero(
                sphere_l2, j, spectra=sphere_deriv_spectra_l2).value
            for j in range(4)}


@pytest.fixture(scope="session")
def springy_sweep_l2(sphere_l2, spec0_l2, sphere_derivs_l2):
    """Stiffness sweep Z in {100, 400, 1600} on the level-2 sphere
    (shared by the resonance tests and the acceptance suite)."""
    return sweep_springy(sphere_l2, (100.0, 400.0, 1600.0), j_max=3,
                         spec0=spec0_l2, derivs=dict(sphere_derivs_l2))


@pytest.fixture(scope="session")
def resonant_sweep_l3(sphere_l3):
    """gamma = -1 impedance solves across the small-k grid (shared by
    the scatter tests and the acceptance suite)."""
    z_hat = np.array([0.0, 0.0, 1.0])
    return {k: solve_impedance(sphere_l3, k, Constant(-1.0),
                               PlaneWave(alpha=z_hat, k=k))
            for k in RESONANT_KS}


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
