"""Mesh construction, orientation repair, file IO, area and capacity."""

from __future__ import annotations

import math

import numpy as np
import pytest

from scatterer.geometry import (
    MeshError,
    area,
    build_mesh,
    capacity,
    ellipsoid_capacity_quadrature,
    load_mesh,
    make_ellipsoid_mesh,
    make_sphere_mesh,
    write_off,
)
from scatterer.bie import assemble_single_layer

FOUR_PI = 4.0 * math.pi

# flat-triangle area deficit of the unit icosphere, measured per level;
# each subdivision cuts it by ~4 (second order in panel size)
SPHERE_AREA_DEFICIT = {0: 0.2381, 1: 0.07166, 2: 0.01882, 3: 0.004765}

# oblate 2:1 ellipsoid (1, 1, 0.5): closed-form area and capacity
_ECC = math.sqrt(0.75)
ELLIPSOID_AREA = 2.0 * math.pi * (1.0 + 0.25 / _ECC * math.atanh(_ECC))
ELLIPSOID_CAPACITY = _ECC / math.asin(_ECC)


def test_icosahedron_base_mesh():
    mesh = make_sphere_mesh(1.0, 0)
    assert mesh.n_panels == 20
    assert mesh.vertices.shape == (12, 3)
    n_edges = 3 * mesh.triangles.shape[0] // 2
    assert mesh.vertices.shape[0] - n_edges + mesh.triangles.shape[0] == 2


def test_panel_counts_quadruple():
    for level in range(3):
        assert make_sphere_mesh(1.0, level).n_panels == 20 * 4 ** level


def test_vertices_on_sphere():
    mesh = make_sphere_mesh(2.5, 2)
    radii = np.linalg.norm(mesh.vertices, axis=1)
    assert np.max(np.abs(radii - 2.5)) < 1e-12


def test_characteristic_diameter():
    # the icosahedron has antipodal vertex pairs, so the point-set
    # diameter of every refinement is exactly 2R
    for level in (0, 2):
        mesh = make_sphere_mesh(1.5, level)
        assert mesh.characteristic_diameter == pytest.approx(3.0, abs=1e-12)


def test_sphere_area_convergence():
    deficits = []
    for level in range(4):
        mesh = make_sphere_mesh(1.0, level)
        a = area(mesh)
        assert a < FOUR_PI  # inscribed flat triangles
        deficit = (FOUR_PI - a) / FOUR_PI
        assert deficit == pytest.approx(SPHERE_AREA_DEFICIT[level], rel=1e-2)
        deficits.append(deficit)
    ratios = np.array(deficits[:-1]) / np.array(deficits[1:])
    assert np.all(ratios > 3.0) and np.all(ratios < 4.5)


def test_quadrature_weights_are_panel_areas(sphere_l2):
    assert np.array_equal(sphere_l2.quadrature_weights, sphere_l2.panel_areas)
    assert np.all(sphere_l2.panel_areas > 0.0)
    assert float(sphere_l2.panel_areas.sum()) == pytest.approx(area(sphere_l2))


def test_normals_outward_unit(sphere_l2):
    lengths = np.linalg.norm(sphere_l2.outward_normals, axis=1)
    assert np.max(np.abs(lengths - 1.0)) < 1e-12
    # star-shaped about the origin: centroid . normal > 0 on every panel
    dots = np.sum(sphere_l2.panel_centroids * sphere_l2.outward_normals,
                  axis=1)
    assert np.all(dots > 0.0)


def test_orientation_repair(rng):
    reference = make_sphere_mesh(1.0, 1)
    for _ in range(5):
        tris = reference.triangles.copy()
        flip = rng.random(tris.shape[0]) < 0.5
        tris[flip] = tris[flip][:, ::-1]
        repaired = build_mesh(reference.vertices, tris)
        dots = np.sum(repaired.panel_centroids * repaired.outward_normals,
                      axis=1)
        assert np.all(dots > 0.0)
        assert area(repaired) == pytest.approx(area(reference))


def test_non_orientable_surface_rejected():
    # antipodal quotient of the icosahedron: a 6-vertex projective plane
    ico = make_sphere_mesh(1.0, 0)
    verts = ico.vertices
    partner = np.array([int(np.argmin(np.linalg.norm(verts + v, axis=1)))
                        for v in verts])
    rep = np.minimum(np.arange(12), partner)
    keep = np.flatnonzero(rep == np.arange(12))
    relabel = -np.ones(12, dtype=int)
    relabel[keep] = np.arange(keep.size)
    faces = {frozenset(relabel[rep[tri]].tolist()) for tri in ico.triangles}
    tris = np.array([sorted(f) for f in faces])
    assert tris.shape == (10, 3)
    with pytest.raises(MeshError, match="orientable"):
        build_mesh(verts[keep], tris)


def test_open_surface_rejected():
    mesh = make_sphere_mesh(1.0, 0)
    with pytest.raises(MeshError):
        build_mesh(mesh.vertices, mesh.triangles[:-1])


def test_degenerate_triangle_rejected():
    mesh = make_sphere_mesh(1.0, 0)
    tris = mesh.triangles.copy()
    tris[0, 1] = tris[0, 0]
    with pytest.raises(MeshError):
        build_mesh(mesh.vertices, tris)


def test_out_of_range_index_rejected():
    mesh = make_sphere_mesh(1.0, 0)
    tris = mesh.triangles.copy()
    tris[3, 2] = mesh.vertices.shape[0]
    with pytest.raises(MeshError):
        build_mesh(mesh.vertices, tris)


def test_off_round_trip(tmp_path):
    mesh = make_sphere_mesh(1.0, 1)
    path = tmp_path / "sphere.off"
    write_off(path, mesh.vertices, mesh.triangles)
    loaded = load_mesh(path)
    assert np.allclose(loaded.vertices, mesh.vertices, atol=1e-15)
    assert loaded.n_panels == mesh.n_panels
    assert area(loaded) == pytest.approx(area(mesh))


def test_off_bad_header(tmp_path):
    path = tmp_path / "bad.off"
    path.write_text("PLY\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n")
    with pytest.raises(MeshError):
        load_mesh(path)


def test_off_truncated(tmp_path):
    mesh = make_sphere_mesh(1.0, 0)
    path = tmp_path / "trunc.off"
    write_off(path, mesh.vertices, mesh.triangles)
    text = path.read_text().splitlines()
    path.write_text("\n".join(text[:8]))
    with pytest.raises(MeshError):
        load_mesh(path)


def test_ellipsoid_vertices_on_surface(ellipsoid_l2):
    x, y, z = ellipsoid_l2.vertices.T
    level_set = x ** 2 + y ** 2 + (z / 0.5) ** 2
    assert np.max(np.abs(level_set - 1.0)) < 1e-12


def test_ellipsoid_area_convergence(ellipsoid_l2, ellipsoid_l3):
    # same second-order deficit as the sphere at matching levels
    d2 = (ELLIPSOID_AREA - area(ellipsoid_l2)) / ELLIPSOID_AREA
    d3 = (ELLIPSOID_AREA - area(ellipsoid_l3)) / ELLIPSOID_AREA
    assert 0.0 < d3 < d2
    assert d2 == pytest.approx(0.0188, rel=0.05)
    assert d3 == pytest.approx(0.00476, rel=0.05)


def test_capacity_sphere(sphere_l2):
    c = capacity(sphere_l2, assemble_single_layer(sphere_l2, 0.0))
    assert abs(c - 1.0) < 0.02  # measured 1.28e-2 at level 2


def test_capacity_scales_with_radius():
    mesh = make_sphere_mesh(2.0, 1)
    c = capacity(mesh, assemble_single_layer(mesh, 0.0))
    assert c == pytest.approx(2.0, rel=0.05)


def test_capacity_requires_laplace_kernel(sphere_l1):
    with pytest.raises(ValueError):
        capacity(sphere_l1, assemble_single_layer(sphere_l1, 0.1))


def test_ellipsoid_capacity_quadrature_matches_closed_form():
    assert ellipsoid_capacity_quadrature(1.0, 1.0, 0.5) == pytest.approx(
        ELLIPSOID_CAPACITY, abs=1e-8)
    # sphere degenerate case
    assert ellipsoid_capacity_quadrature(1.0, 1.0, 1.0) == pytest.approx(
        1.0, abs=1e-10)


def test_ellipsoid_capacity_bem(ellipsoid_l2):
    c = capacity(ellipsoid_l2, assemble_single_layer(ellipsoid_l2, 0.0))
    # measured relative error 1.27e-2 at level 2
    assert abs(c - ELLIPSOID_CAPACITY) / ELLIPSOID_CAPACITY < 0.02
