"""Helmholtz layer potentials on flat-panel meshes at complex wavenumber.

Dense collocation assembly: off-diagonal entries are one-point centroid
quadrature times panel area, the weakly singular self term of the single
layer is integrated analytically in polar coordinates on the three
centroid sub-triangles.  The double-layer self term vanishes on flat
panels.  Sign conventions: the k=0 double layer applied to the constant
function equals -1/2 on a closed surface, and the exterior trace system
used downstream is (I/2 - K) u = -S v.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import SurfaceMesh

_FOUR_PI = 4.0 * math.pi

# row-block size for assembly; bounds peak memory at ~blocksize*n complex
_BLOCK = 512

# near-field refinement: panels closer than this many summed panel radii
# get a composite 16-point rule instead of the one-point centroid rule
NEAR_FIELD_FACTOR = 2.5


def _subdivision_barycentric(level: int = 2) -> np.ndarray:
    """Centroid barycentric coordinates (lambda1, lambda2) of the 4^level
    children of uniform triangle refinement; child areas are all equal."""
    n = 2 ** level
    cells = []
    for a in range(n):
        for b in range(n - a):
            cells.append(((a, b), (a + 1, b), (a, b + 1)))       # upward
            if a + b <= n - 2:
                cells.append(((a + 1, b), (a + 1, b + 1), (a, b + 1)))
    bary = np.array([[(p[0] + q[0] + r[0]) / (3.0 * n),
                      (p[1] + q[1] + r[1]) / (3.0 * n)]
                     for p, q, r in cells])
    return bary


_SUB_BARY = _subdivision_barycentric()
_N_SUB = _SUB_BARY.shape[0]


def _panel_subdivision(mesh: SurfaceMesh) -> tuple[np.ndarray, np.ndarray]:
    """Sub-centroids (N, n_sub, 3) and panel radii (N,) for the composite
    near-field rule; each sub-panel carries area/n_sub."""
    v = mesh.vertices
    t = mesh.triangles
    v0, v1, v2 = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
    sub = (v0[:, None, :]
           + _SUB_BARY[None, :, 0, None] * (v1 - v0)[:, None, :]
           + _SUB_BARY[None, :, 1, None] * (v2 - v0)[:, None, :])
    radii = np.max(np.linalg.norm(
        np.stack([v0, v1, v2], axis=1) - mesh.panel_centroids[:, None, :],
        axis=2), axis=1)
    return sub, radii


class WavenumberWindowError(ValueError):
    """Wavenumber outside the validated window for this mesh."""


def max_imag_wavenumber(mesh: SurfaceMesh) -> float:
    """Default |Im k| guard: 0.5 / characteristic diameter."""
    return 0.5 / mesh.characteristic_diameter


def validate_wavenumber(k: complex, mesh: SurfaceMesh,
                        im_k_max: float | None = None) -> complex:
    """Check |Im k| against the kernel-growth guard and return k as complex."""
    k = complex(k)
    limit = max_imag_wavenumber(mesh) if im_k_max is None else im_k_max
    if abs(k.imag) > limit:
        raise WavenumberWindowError(
            f"|Im k| = {abs(k.imag):.3g} exceeds the guard {limit:.3g} "
            f"for this mesh"
        )
    return k


@dataclass(frozen=True)
class LayerMatrix:
    """Dense discretization of a boundary layer operator at one wavenumber."""

    entries: np.ndarray
    kind: str  # "single" or "double"
    k: complex
    mesh: SurfaceMesh

    def __post_init__(self):
        self.entries.setflags(write=False)
        if not np.all(np.isfinite(self.entries)):
            raise ValueError(f"{self.kind}-layer matrix has non-finite entries")


def greens(k: complex, r: np.ndarray, s: np.ndarray) -> complex:
    """Free-space Helmholtz kernel e^{ik|r-s|} / (4 pi |r-s|); entire in k."""
    d = float(np.linalg.norm(np.asarray(r, dtype=float) - np.asarray(s, dtype=float)))
    if d == 0.0:
        raise ValueError("greens requires r != s")
    return np.exp(1j * complex(k) * d) / (_FOUR_PI * d)


def greens_dk(k: complex, r: np.ndarray, s: np.ndarray) -> complex:
    """Exact wavenumber derivative of greens: i e^{ik|r-s|} / (4 pi)."""
    d = float(np.linalg.norm(np.asarray(r, dtype=float) - np.asarray(s, dtype=float)))
    if d == 0.0:
        raise ValueError("greens_dk requires r != s")
    return 1j * np.exp(1j * complex(k) * d) / _FOUR_PI


def _polar_moments(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    """...(1/r) and r moments of the triangle (p, a, b) about its vertex p.

    Closed-form polar integration with the opposite edge as the radial
    cutoff; returns (int 1/r dA, int r dA).  Degenerate slivers give 0.
    """
    a = a - p
    b = b - p
    e = b - a
    length = float(np.linalg.norm(e))
    if length == 0.0:
        return 0.0, 0.0
    e_hat = e / length
    t = -float(a @ e_hat)
    foot = a + t * e_hat
    d_p = float(np.linalg.norm(foot))
    if d_p == 0.0:
        return 0.0, 0.0
    s_a, s_b = -t, length - t
    asnh_a, asnh_b = math.asinh(s_a / d_p), math.asinh(s_b / d_p)
    i_m1 = d_p * (asnh_b - asnh_a)
    i_p1 = (d_p ** 3 / 6.0) * (
        s_b * math.hypot(s_b, d_p) / d_p ** 2 + asnh_b
        - s_a * math.hypot(s_a, d_p) / d_p ** 2 - asnh_a
    )
    return i_m1, i_p1


def single_layer_self_term(mesh: SurfaceMesh, k: complex) -> np.ndarray:
    """Self-panel integrals int_panel G_k(centroid, s) dS(s) for every panel.

    The 1/r singularity is integrated exactly on the three sub-triangles
    obtained by splitting at the centroid; the smooth factor e^{ikr} is
    expanded through second order, so the local error is O((k h)^3 h^2).
    """
    k = complex(k)
    n = mesh.n_panels
    out = np.empty(n, dtype=complex)
    verts = mesh.vertices
    for i, (tri, c) in enumerate(zip(mesh.triangles, mesh.panel_centroids)):
        v0, v1, v2 = verts[tri[0]], verts[tri[1]], verts[tri[2]]
        i_m1 = i_p1 = 0.0
        for a, b in ((v0, v1), (v1, v2), (v2, v0)):
            m1, p1 = _polar_moments(c, a, b)
            i_m1 += m1
            i_p1 += p1
        out[i] = (i_m1 + 1j * k * mesh.panel_areas[i]
                  + 0.5 * (1j * k) ** 2 * i_p1) / _FOUR_PI
    return out


def assemble_single_layer(mesh: SurfaceMesh, k: complex,
                          im_k_max: float | None = None) -> LayerMatrix:
    """Dense single-layer matrix S_k, collocation at panel centroids.

    Distant entries use the one-point centroid rule; panels within
    NEAR_FIELD_FACTOR summed radii of the collocation point use the
    composite 16-point subdivision rule, and the self entry is the
    analytic integral from single_layer_self_term."""
    k = validate_wavenumber(k, mesh, im_k_max)
    c = mesh.panel_centroids
    w = mesh.panel_areas
    n = mesh.n_panels
    sub, radii = _panel_subdivision(mesh)
    entries = np.empty((n, n), dtype=complex)
    for start in range(0, n, _BLOCK):
        stop = min(start + _BLOCK, n)
        diff = c[start:stop, None, :] - c[None, :, :]
        d = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        np.fill_diagonal(d[:, start:stop], 1.0)  # masked; replaced below
        entries[start:stop] = np.exp(1j * k * d) / (_FOUR_PI * d) * w[None, :]
        near = d < NEAR_FIELD_FACTOR * (radii[start:stop, None]
                                        + radii[None, :])
        np.fill_diagonal(near[:, start:stop], False)
        rows, cols = np.nonzero(near)
        if rows.size:
            dist = np.linalg.norm(c[start + rows][:, None, :] - sub[cols],
                                  axis=2)
            vals = np.exp(1j * k * dist) / (_FOUR_PI * dist)
            entries[start + rows, cols] = (
                np.mean(vals, axis=1) * w[cols])
    np.fill_diagonal(entries, single_layer_self_term(mesh, k))
    return LayerMatrix(entries=entries, kind="single", k=k, mesh=mesh)


def assemble_double_layer(mesh: SurfaceMesh, k: complex,
                          im_k_max: float | None = None) -> LayerMatrix:
    """Dense double-layer matrix K_k with kernel dG_k/dn(s).

    Near-field entries use the same composite 16-point rule as the
    single layer.  Self entries are zero: on a flat panel the normal is
    orthogonal to every in-plane difference vector.  The trace jump is
    applied by the caller (ntd), not folded in here.
    """
    k = validate_wavenumber(k, mesh, im_k_max)
    c = mesh.panel_centroids
    nrm = mesh.outward_normals
    w = mesh.panel_areas
    n = mesh.n_panels
    sub, radii = _panel_subdivision(mesh)
    entries = np.empty((n, n), dtype=complex)
    for start in range(0, n, _BLOCK):
        stop = min(start + _BLOCK, n)
        diff = c[start:stop, None, :] - c[None, :, :]  # c_i - c_j
        d = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        np.fill_diagonal(d[:, start:stop], 1.0)
        proj = np.einsum("ijk,jk->ij", diff, nrm)  # n_j . (c_i - c_j)
        entries[start:stop] = (
            proj * (1.0 - 1j * k * d) * np.exp(1j * k * d) / (_FOUR_PI * d ** 3)
            * w[None, :]
        )
        near = d < NEAR_FIELD_FACTOR * (radii[start:stop, None]
                                        + radii[None, :])
        np.fill_diagonal(near[:, start:stop], False)
        rows, cols = np.nonzero(near)
        if rows.size:
            gap = c[start + rows][:, None, :] - sub[cols]   # P x m x 3
            dist = np.linalg.norm(gap, axis=2)
            dot = np.einsum("pmx,px->pm", gap, nrm[cols])
            vals = (dot * (1.0 - 1j * k * dist) * np.exp(1j * k * dist)
                    / (_FOUR_PI * dist ** 3))
            entries[start + rows, cols] = np.mean(vals, axis=1) * w[cols]
    np.fill_diagonal(entries, 0.0)
    return LayerMatrix(entries=entries, kind="double", k=k, mesh=mesh)
