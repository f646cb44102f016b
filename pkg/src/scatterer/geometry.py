"""Closed triangulated surfaces: generation, OFF I/O, area and capacity.

All meshes are flat-triangle with centroid collocation nodes; quadrature
weights are the panel areas.  Lengths are whatever unit the caller uses,
wavenumbers carry the inverse unit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class MeshError(ValueError):
    """Invalid surface mesh: parse failure, open boundary, bad orientation."""


# golden-ratio icosahedron, the subdivision seed for sphere meshes
_PHI = (1.0 + math.sqrt(5.0)) / 2.0

_ICO_VERTICES = np.array(
    [
        [-1.0, _PHI, 0.0],
        [1.0, _PHI, 0.0],
        [-1.0, -_PHI, 0.0],
        [1.0, -_PHI, 0.0],
        [0.0, -1.0, _PHI],
        [0.0, 1.0, _PHI],
        [0.0, -1.0, -_PHI],
        [0.0, 1.0, -_PHI],
        [_PHI, 0.0, -1.0],
        [_PHI, 0.0, 1.0],
        [-_PHI, 0.0, -1.0],
        [-_PHI, 0.0, 1.0],
    ],
    dtype=float,
)

_ICO_FACES = np.array(
    [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [5, 4, 9], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ],
    dtype=np.int64,
)


@dataclass(frozen=True)
class SurfaceMesh:
    """Closed, outward-oriented triangulated surface.

    Attributes:
        vertices: (nv, 3) vertex positions.
        triangles: (nt, 3) vertex index triples, CCW seen from outside.
        panel_centroids: (nt, 3) collocation nodes.
        panel_areas: (nt,) flat-triangle areas; also the quadrature weights.
        outward_normals: (nt, 3) unit normals pointing away from the body.
        characteristic_diameter: largest vertex-to-vertex distance.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    panel_centroids: np.ndarray
    panel_areas: np.ndarray
    outward_normals: np.ndarray
    characteristic_diameter: float

    @property
    def quadrature_weights(self) -> np.ndarray:
        return self.panel_areas

    @property
    def n_panels(self) -> int:
        return len(self.triangles)

    def __post_init__(self):
        for arr in (self.vertices, self.triangles, self.panel_centroids,
                    self.panel_areas, self.outward_normals):
            arr.setflags(write=False)


def _point_set_diameter(points: np.ndarray) -> float:
    """Exact max pairwise distance, chunked to bound memory."""
    best = 0.0
    for start in range(0, len(points), 512):
        block = points[start:start + 512]
        d2 = np.sum((block[:, None, :] - points[None, :, :]) ** 2, axis=2)
        best = max(best, float(d2.max()))
    return math.sqrt(best)


def _signed_volume(vertices: np.ndarray, triangles: np.ndarray) -> float:
    v0 = vertices[triangles[:, 0]]
    v1 = vertices[triangles[:, 1]]
    v2 = vertices[triangles[:, 2]]
    return float(np.einsum("ij,ij->", np.cross(v0, v1), v2) / 6.0)


def _edge_incidence(triangles: np.ndarray) -> dict:
    """Map undirected edge -> list of incident face indices."""
    edges: dict = {}
    for f, (a, b, c) in enumerate(triangles):
        if a == b or b == c or c == a:
            raise MeshError(f"triangle {f} repeats a vertex")
        for u, v in ((a, b), (b, c), (c, a)):
            key = (min(u, v), max(u, v))
            edges.setdefault(key, []).append(f)
    return edges


def _orient_consistently(triangles: np.ndarray) -> np.ndarray:
    """Flip triangles until every shared edge is traversed both ways.

    Raises MeshError for open or non-manifold edges and for non-orientable
    surfaces.  Works per connected component.
    """
    tris = triangles.copy()
    edges = _edge_incidence(tris)
    for key, inc in edges.items():
        if len(inc) != 2:
            raise MeshError(
                f"surface is not closed: edge {key} belongs to {len(inc)} "
                f"triangle(s), expected 2"
            )

    n = len(tris)
    face_adjacency: list[list[int]] = [[] for _ in range(n)]
    for f1, f2 in edges.values():
        face_adjacency[f1].append(f2)
        face_adjacency[f2].append(f1)

    visited = np.zeros(n, dtype=bool)
    for seed in range(n):
        if visited[seed]:
            continue
        visited[seed] = True
        stack = [seed]
        while stack:
            f = stack.pop()
            for g in face_adjacency[f]:
                if not visited[g]:
                    if not _edge_orientations_opposite(tris, f, g):
                        tris[g, 1], tris[g, 2] = tris[g, 2], tris[g, 1]
                    visited[g] = True
                    stack.append(g)
                elif not _edge_orientations_opposite(tris, f, g):
                    raise MeshError(
                        "surface is not orientable: triangles "
                        f"{f} and {g} cannot be made consistent"
                    )
    return tris


def _edge_orientations_opposite(tris: np.ndarray, f: int, g: int) -> bool:
    """True if the shared edge of faces f and g is traversed in opposite
    directions (the orientable-consistency condition)."""
    ef = {(tris[f, i], tris[f, (i + 1) % 3]) for i in range(3)}
    eg = {(tris[g, i], tris[g, (i + 1) % 3]) for i in range(3)}
    shared_opposite = any((b, a) in eg for (a, b) in ef)
    shared_same = any((a, b) in eg for (a, b) in ef)
    return shared_opposite and not shared_same


def build_mesh(vertices: np.ndarray, triangles: np.ndarray,
               repair_orientation: bool = True) -> SurfaceMesh:
    """Validate arrays and assemble a SurfaceMesh.

    Checks closedness, repairs triangle winding to a consistent outward
    orientation (or raises), and rejects degenerate panels.
    """
    vertices = np.ascontiguousarray(vertices, dtype=float)
    triangles = np.ascontiguousarray(triangles, dtype=np.int64)
    if vertices.ndim != 2 or vertices.shape[1] != 3:
        raise MeshError("vertices must be an (n, 3) array")
    if triangles.ndim != 2 or triangles.shape[1] != 3:
        raise MeshError("triangles must be an (n, 3) array")
    if triangles.min(initial=0) < 0 or triangles.max(initial=-1) >= len(vertices):
        raise MeshError("triangle index out of range")

    if repair_orientation:
        triangles = _orient_consistently(triangles)
    if _signed_volume(vertices, triangles) < 0.0:
        triangles = triangles[:, [0, 2, 1]]

    v0 = vertices[triangles[:, 0]]
    v1 = vertices[triangles[:, 1]]
    v2 = vertices[triangles[:, 2]]
    cross = np.cross(v1 - v0, v2 - v0)
    areas = 0.5 * np.linalg.norm(cross, axis=1)
    if np.any(areas <= 0.0) or not np.all(np.isfinite(areas)):
        raise MeshError("mesh contains a degenerate (zero-area) panel")
    normals = cross / (2.0 * areas[:, None])
    centroids = (v0 + v1 + v2) / 3.0

    mesh = SurfaceMesh(
        vertices=vertices,
        triangles=triangles,
        panel_centroids=centroids,
        panel_areas=areas,
        outward_normals=normals,
        characteristic_diameter=_point_set_diameter(vertices),
    )
    # outwardness: oriented panels must open away from the centroid cloud
    center = centroids.mean(axis=0)
    flux = float(np.einsum("i,ij,ij->", areas, normals, centroids - center))
    if flux <= 0.0:
        raise MeshError("normals do not point outward after orientation repair")
    return mesh


def make_sphere_mesh(radius: float, refinement_level: int) -> SurfaceMesh:
    """Icosphere: icosahedron subdivided `refinement_level` times, vertices
    projected to the sphere of the given radius.  Panel count 20 * 4**level.
    """
    if radius <= 0.0:
        raise ValueError("radius must be positive")
    if refinement_level < 0:
        raise ValueError("refinement_level must be >= 0")

    vertices = [v / np.linalg.norm(v) for v in _ICO_VERTICES]
    faces = _ICO_FACES.tolist()
    for _ in range(refinement_level):
        midpoint_cache: dict = {}

        def midpoint(i: int, j: int) -> int:
            key = (min(i, j), max(i, j))
            if key not in midpoint_cache:
                m = vertices[i] + vertices[j]
                m /= np.linalg.norm(m)
                vertices.append(m)
                midpoint_cache[key] = len(vertices) - 1
            return midpoint_cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        faces = new_faces

    verts = radius * np.asarray(vertices)
    return build_mesh(verts, np.asarray(faces, dtype=np.int64),
                      repair_orientation=False)


def make_ellipsoid_mesh(semi_axes, refinement_level: int) -> SurfaceMesh:
    """Triangulated ellipsoid x^2/a^2 + y^2/b^2 + z^2/c^2 = 1.

    Unit icosphere vertices scaled by the semi-axes land exactly on the
    ellipsoid, so the mesh quality follows the icosphere's.
    """
    a, b, c = (float(s) for s in semi_axes)
    if min(a, b, c) <= 0.0:
        raise ValueError("semi-axes must be positive")
    unit = make_sphere_mesh(1.0, refinement_level)
    verts = unit.vertices * np.array([a, b, c])
    return build_mesh(verts, unit.triangles, repair_orientation=False)


def load_mesh(path, format: str = "OFF") -> SurfaceMesh:
    """Load a closed surface from an ASCII OFF file.

    Only the OFF format is accepted; orientation is repaired when possible
    and the mesh is rejected if open, non-orientable, or degenerate.
    """
    if format.upper() != "OFF":
        raise MeshError(f"unsupported mesh format {format!r}; only OFF is accepted")
    with open(path, "r", encoding="ascii") as fh:
        tokens = _off_tokens(fh)
        try:
            header = next(tokens)
        except StopIteration:
            raise MeshError("empty OFF file") from None
        if header != "OFF":
            raise MeshError(f"bad OFF header {header!r}")
        try:
            nv = int(next(tokens))
            nf = int(next(tokens))
            next(tokens)  # edge count, ignored
            verts = np.array([float(next(tokens))
                              for _ in range(3 * nv)]).reshape(nv, 3)
            faces = []
            for _ in range(nf):
                arity = int(next(tokens))
                if arity != 3:
                    raise MeshError(
                        f"only triangle faces supported, got arity {arity}")
                faces.append([int(next(tokens)) for _ in range(3)])
        except (StopIteration, ValueError) as exc:
            raise MeshError(f"truncated or malformed OFF file: {exc}") from None
    return build_mesh(verts, np.array(faces, dtype=np.int64))


def _off_tokens(fh):
    for line in fh:
        body = line.split("#", 1)[0]
        yield from body.split()


def write_off(path, vertices: np.ndarray, triangles: np.ndarray) -> None:
    """Write vertex/triangle arrays as an ASCII OFF file."""
    vertices = np.asarray(vertices, dtype=float)
    triangles = np.asarray(triangles, dtype=np.int64)
    with open(path, "w", encoding="ascii") as fh:
        fh.write("OFF\n")
        fh.write(f"{len(vertices)} {len(triangles)} 0\n")
        for v in vertices:
            fh.write(f"{v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
        for t in triangles:
            fh.write(f"3 {t[0]} {t[1]} {t[2]}\n")


def area(mesh: SurfaceMesh) -> float:
    """Total surface area, the sum of the quadrature weights."""
    return float(mesh.panel_areas.sum())


def capacity(mesh: SurfaceMesh, laplace_single_layer) -> float:
    """Electrostatic capacity from the equilibrium charge density.

    Solves S0 * sigma = 1 with the Laplace single-layer matrix (kernel
    1/(4 pi |r-s|), assembled at k = 0) and returns C = (1/4 pi) * sum(w * sigma),
    the coefficient of 1/|r| in the far potential.  A sphere of radius R
    gives C = R.
    """
    entries = getattr(laplace_single_layer, "entries", laplace_single_layer)
    k = getattr(laplace_single_layer, "k", 0.0)
    if abs(complex(k)) > 0.0:
        raise ValueError("capacity requires the single-layer matrix at k = 0")
    ones = np.ones(mesh.n_panels)
    try:
        sigma = np.linalg.solve(entries, ones.astype(complex))
    except np.linalg.LinAlgError as exc:
        raise MeshError(f"singular single-layer system: {exc}") from exc
    c = float(np.real(mesh.quadrature_weights @ sigma)) / (4.0 * math.pi)
    if c <= 0.0:
        raise MeshError("capacity came out non-positive; mesh is degenerate")
    return c


def ellipsoid_capacity_quadrature(a: float, b: float, c: float) -> float:
    """Classical ellipsoid capacity 2 / int_0^inf ds/sqrt((s+a^2)(s+b^2)(s+c^2)).

    1-D quadrature reference used to cross-check the boundary-element value;
    independent of any mesh.
    """
    from scipy.integrate import quad

    def integrand(s):
        return ((s + a * a) * (s + b * b) * (s + c * c)) ** -0.5

    val, _ = quad(integrand, 0.0, np.inf, limit=200)
    return 2.0 / val
