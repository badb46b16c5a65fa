"""Triangle-mesh primitives: construction, normals, area, distance, PLY export.

All coordinates are metric centimeters.  Meshes are immutable value objects;
every operation returns a new mesh.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np


# ---------------------------------------------------------------------------
# core type
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TriMesh:
    """Indexed triangle mesh with per-vertex normals and material ids."""

    vertices: np.ndarray       # (n, 3) float64, cm
    triangles: np.ndarray      # (m, 3) int32
    normals: np.ndarray = field(default=None)   # (n, 3) float64, unit
    material: np.ndarray = field(default=None)  # (n,) int32

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.vertices, dtype=np.float64))
        t = np.ascontiguousarray(np.asarray(self.triangles, dtype=np.int32))
        if v.ndim != 2 or v.shape[1] != 3:
            raise ValueError("vertices must be (n, 3)")
        if t.ndim != 2 or t.shape[1] != 3:
            raise ValueError("triangles must be (m, 3)")
        if len(t) and (t.min() < 0 or t.max() >= len(v)):
            raise ValueError("triangle index out of range")
        n = self.normals
        if n is None:
            n = compute_vertex_normals(v, t)
        n = np.ascontiguousarray(np.asarray(n, dtype=np.float64))
        m = self.material
        if m is None:
            m = np.zeros(len(v), dtype=np.int32)
        m = np.ascontiguousarray(np.asarray(m, dtype=np.int32))
        if n.shape != v.shape:
            raise ValueError("normals must match vertices")
        if m.shape != (len(v),):
            raise ValueError("material must be per-vertex")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        object.__setattr__(self, "normals", n)
        object.__setattr__(self, "material", m)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def with_vertices(self, vertices: np.ndarray, recompute_normals: bool = True) -> "TriMesh":
        """Same topology, new vertex positions."""
        normals = compute_vertex_normals(vertices, self.triangles) if recompute_normals else self.normals
        return replace(self, vertices=vertices, normals=normals)


def compute_vertex_normals(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Area-weighted vertex normals (raw cross products accumulated, then unit)."""
    vertices = np.asarray(vertices, dtype=np.float64)
    triangles = np.asarray(triangles, dtype=np.int64)
    normals = np.zeros_like(vertices)
    a = vertices[triangles[:, 0]]
    b = vertices[triangles[:, 1]]
    c = vertices[triangles[:, 2]]
    face_n = np.cross(b - a, c - a)  # magnitude = 2 * area
    for k in range(3):
        np.add.at(normals, triangles[:, k], face_n)
    length = np.linalg.norm(normals, axis=1, keepdims=True)
    # isolated vertices keep a zero normal rather than dividing by zero
    return np.where(length > 1e-30, normals / np.maximum(length, 1e-30), 0.0)


def mesh_area(mesh: TriMesh) -> float:
    """Total surface area in cm^2."""
    a = mesh.vertices[mesh.triangles[:, 0]]
    b = mesh.vertices[mesh.triangles[:, 1]]
    c = mesh.vertices[mesh.triangles[:, 2]]
    return float(0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1).sum())


def merge_meshes(first: TriMesh, second: TriMesh) -> TriMesh:
    """Concatenate two meshes into one (indices of the second are shifted)."""
    offset = first.n_vertices
    return TriMesh(
        vertices=np.vstack([first.vertices, second.vertices]),
        triangles=np.vstack([first.triangles, second.triangles + offset]),
        normals=np.vstack([first.normals, second.normals]),
        material=np.concatenate([first.material, second.material]),
    )


# ---------------------------------------------------------------------------
# primitive generators
# ---------------------------------------------------------------------------

def uv_sphere(radius: float, n_lat: int = 32, n_lon: int = 64,
              center: np.ndarray | None = None) -> TriMesh:
    """Closed UV sphere with outward normals.

    n_lat is the number of latitude bands (>= 2), n_lon the number of
    longitude segments (>= 3).  Vertex layout: north pole, (n_lat - 1) rings
    of n_lon vertices, south pole.
    """
    if n_lat < 2 or n_lon < 3:
        raise ValueError("n_lat >= 2 and n_lon >= 3 required")
    center = np.zeros(3) if center is None else np.asarray(center, dtype=np.float64)

    lat = np.pi * np.arange(1, n_lat) / n_lat           # exclusive of poles
    lon = 2.0 * np.pi * np.arange(n_lon) / n_lon
    sin_lat, cos_lat = np.sin(lat), np.cos(lat)
    ring = np.stack([
        np.outer(sin_lat, np.cos(lon)),
        np.outer(sin_lat, np.sin(lon)),
        np.outer(cos_lat, np.ones(n_lon)),
    ], axis=-1).reshape(-1, 3)
    unit = np.vstack([[0.0, 0.0, 1.0], ring, [0.0, 0.0, -1.0]])
    vertices = center + radius * unit

    tris = []
    top, bottom = 0, len(unit) - 1
    ring_at = lambda i, j: 1 + i * n_lon + (j % n_lon)
    for j in range(n_lon):
        tris.append([top, ring_at(0, j), ring_at(0, j + 1)])
    for i in range(n_lat - 2):
        for j in range(n_lon):
            a, b = ring_at(i, j), ring_at(i, j + 1)
            c, d = ring_at(i + 1, j), ring_at(i + 1, j + 1)
            tris.append([a, c, d])
            tris.append([a, d, b])
    for j in range(n_lon):
        tris.append([bottom, ring_at(n_lat - 2, j + 1), ring_at(n_lat - 2, j)])

    triangles = np.asarray(tris, dtype=np.int32)
    # outward normals are exact for a sphere; keep analytic values
    return TriMesh(vertices=vertices, triangles=triangles, normals=unit.copy())


# ---------------------------------------------------------------------------
# point-to-triangle distance (reference implementation, vectorized over faces)
# ---------------------------------------------------------------------------

def point_triangle_distances(point: np.ndarray, a: np.ndarray, b: np.ndarray,
                             c: np.ndarray) -> np.ndarray:
    """Euclidean distance from one point to each triangle (a[i], b[i], c[i]).

    Region-based closest-point computation on the triangle's plane
    parameterization; handles edge and vertex regions exactly.
    """
    p = np.asarray(point, dtype=np.float64)
    ab = b - a
    ac = c - a
    ap = p - a

    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = p - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = p - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)

    closest = np.empty_like(a)
    done = np.zeros(len(a), dtype=bool)

    def settle(mask, value):
        use = mask & ~done
        closest[use] = value[use] if value.ndim == 2 else value
        done[use] = True

    settle((d1 <= 0) & (d2 <= 0), a)                                   # vertex a
    settle((d3 >= 0) & (d4 <= d3), b)                                  # vertex b
    settle((d6 >= 0) & (d5 <= d6), c)                                  # vertex c

    vc = d1 * d4 - d3 * d2
    v_ab = d1 / np.where(d1 - d3 == 0.0, 1.0, d1 - d3)
    settle((vc <= 0) & (d1 >= 0) & (d3 <= 0), a + v_ab[:, None] * ab)  # edge ab

    vb = d5 * d2 - d1 * d6
    w_ac = d2 / np.where(d2 - d6 == 0.0, 1.0, d2 - d6)
    settle((vb <= 0) & (d2 >= 0) & (d6 <= 0), a + w_ac[:, None] * ac)  # edge ac

    va = d3 * d6 - d5 * d4
    denom_bc = (d4 - d3) + (d5 - d6)
    w_bc = (d4 - d3) / np.where(denom_bc == 0.0, 1.0, denom_bc)
    settle((va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0), b + w_bc[:, None] * (c - b))  # edge bc

    denom = va + vb + vc
    denom = np.where(denom == 0.0, 1.0, denom)
    v = (vb / denom)[:, None]
    w = (vc / denom)[:, None]
    settle(np.ones(len(a), dtype=bool), a + v * ab + w * ac)           # interior

    return np.linalg.norm(closest - p, axis=1)


def point_mesh_distance(point: np.ndarray, mesh: TriMesh) -> float:
    """Exact distance from a point to the mesh surface (checks every face)."""
    a = mesh.vertices[mesh.triangles[:, 0]]
    b = mesh.vertices[mesh.triangles[:, 1]]
    c = mesh.vertices[mesh.triangles[:, 2]]
    return float(point_triangle_distances(point, a, b, c).min())


# ---------------------------------------------------------------------------
# ASCII PLY export (float64 text, cm)
# ---------------------------------------------------------------------------

def export_ply(mesh: TriMesh, path) -> None:
    """Write the mesh as ASCII PLY (positions in cm, full float64 precision)."""
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {mesh.n_vertices}",
        "property double x",
        "property double y",
        "property double z",
        f"element face {mesh.n_triangles}",
        "property list uchar int vertex_indices",
        "end_header",
    ]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
        for v in mesh.vertices:
            fh.write(f"{v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
        for t in mesh.triangles:
            fh.write(f"3 {t[0]} {t[1]} {t[2]}\n")
