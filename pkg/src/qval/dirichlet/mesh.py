"""Triangulated planar domains with cotangent edge weights."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import Delaunay


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray   # (V, 2)
    triangles: np.ndarray  # (T, 3), counter-clockwise
    boundary: np.ndarray   # (B,) ordered boundary loop; empty for meshes without a fixed boundary
    edges: np.ndarray      # (E, 2) with edges[:, 0] < edges[:, 1]
    weights: np.ndarray    # (E,) cotangent weights: Dir(u) = sum_e w_e (u_a - u_b)^2
    tri_edges: np.ndarray  # (T, 3) edge index of the side opposite corner k
    tri_half_cot: np.ndarray  # (T, 3) half cotangent of the angle at corner k

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.boundary] = True
        return mask

    @property
    def mesh_size(self) -> float:
        """Longest edge length."""
        d = self.vertices[self.edges[:, 0]] - self.vertices[self.edges[:, 1]]
        return float(np.sqrt((d * d).sum(1)).max())

    def triangle_areas(self) -> np.ndarray:
        a, b, c = (self.vertices[self.triangles[:, k]] for k in range(3))
        return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))

    def min_angle(self) -> float:
        """Smallest interior angle, in degrees."""
        P = self.vertices[self.triangles]
        out = np.inf
        for k in range(3):
            u = P[:, (k + 1) % 3] - P[:, k]
            v = P[:, (k + 2) % 3] - P[:, k]
            cos = (u * v).sum(1) / np.linalg.norm(u, axis=1) / np.linalg.norm(v, axis=1)
            out = min(out, float(np.degrees(np.arccos(np.clip(cos, -1, 1))).min()))
        return out

    def neighbors(self) -> list[np.ndarray]:
        adj = [[] for _ in range(self.n_vertices)]
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        return [np.array(sorted(x), dtype=np.intp) for x in adj]

    def to_json(self) -> dict:
        return {
            "vertices": self.vertices.tolist(),
            "triangles": self.triangles.tolist(),
            "boundary": self.boundary.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Mesh":
        return from_triangles(np.asarray(obj["vertices"], float), np.asarray(obj["triangles"], np.intp),
                              np.asarray(obj.get("boundary", []), np.intp))


def from_triangles(vertices: np.ndarray, triangles: np.ndarray, boundary: np.ndarray) -> Mesh:
    vertices = np.asarray(vertices, dtype=float)
    triangles = np.asarray(triangles, dtype=np.intp).copy()
    P = vertices[triangles]
    signed = (P[:, 1, 0] - P[:, 0, 0]) * (P[:, 2, 1] - P[:, 0, 1]) - (P[:, 1, 1] - P[:, 0, 1]) * (P[:, 2, 0] - P[:, 0, 0])
    flip = signed < 0
    triangles[flip] = triangles[flip][:, [0, 2, 1]]
    keep = np.abs(signed) > 0
    triangles = triangles[keep]
    P = vertices[triangles]

    sides = np.stack([triangles[:, [1, 2]], triangles[:, [2, 0]], triangles[:, [0, 1]]], axis=1)  # (T, 3, 2)
    flat = np.sort(sides.reshape(-1, 2), axis=1)
    edges, inverse = np.unique(flat, axis=0, return_inverse=True)
    tri_edges = inverse.reshape(-1, 3)

    half_cot = np.empty(triangles.shape)
    for k in range(3):
        u = P[:, (k + 1) % 3] - P[:, k]
        v = P[:, (k + 2) % 3] - P[:, k]
        cross = u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]
        half_cot[:, k] = 0.5 * (u * v).sum(1) / cross
    weights = np.bincount(tri_edges.reshape(-1), weights=half_cot.reshape(-1), minlength=len(edges))
    return Mesh(vertices, triangles, np.asarray(boundary, dtype=np.intp), edges, weights, tri_edges, half_cot)


def build_disk_mesh(radius: float = 1.0, resolution: int = 16) -> Mesh:
    """Delaunay triangulation of concentric rings: ring k has 6k vertices.

    ``resolution`` is the number of rings, so the boundary carries
    6 * resolution vertices at angles 2 pi j / (6 resolution), listed
    counter-clockwise starting on the positive x-axis.
    """
    if resolution < 3:
        raise ValueError("resolution must be at least 3")
    pts = [np.zeros((1, 2))]
    for k in range(1, resolution + 1):
        m = 6 * k
        a = 2 * math.pi * np.arange(m) / m
        rk = radius * k / resolution
        pts.append(rk * np.stack([np.cos(a), np.sin(a)], axis=1))
    V = np.vstack(pts)
    nb = 6 * resolution
    boundary = np.arange(V.shape[0] - nb, V.shape[0])
    tri = Delaunay(V).simplices
    return from_triangles(V, tri, boundary)


def build_annulus_mesh(r_inner: float, r_outer: float, n_angles: int, n_layers: int) -> Mesh:
    """Polar grid on an annulus: ``n_layers + 1`` rings of ``n_angles`` vertices each.

    Vertex ``layer * n_angles + j`` sits at angle 2 pi j / n_angles; layer 0 is
    the inner circle.
    """
    ang = 2 * math.pi * np.arange(n_angles) / n_angles
    radii = np.linspace(r_inner, r_outer, n_layers + 1)
    V = np.vstack([r * np.stack([np.cos(ang), np.sin(ang)], axis=1) for r in radii])
    tris = []
    for l in range(n_layers):
        for j in range(n_angles):
            a = l * n_angles + j
            b = l * n_angles + (j + 1) % n_angles
            c = (l + 1) * n_angles + j
            d = (l + 1) * n_angles + (j + 1) % n_angles
            tris.append((a, b, d))
            tris.append((a, d, c))
    boundary = np.concatenate([np.arange(n_angles), n_layers * n_angles + np.arange(n_angles)])
    return from_triangles(V, np.array(tris), boundary)


def cot_laplacian(mesh: Mesh):
    """Sparse scalar stiffness matrix of the cotangent energy."""
    from scipy import sparse

    a, b = mesh.edges[:, 0], mesh.edges[:, 1]
    w = mesh.weights
    n = mesh.n_vertices
    L = sparse.coo_matrix((np.concatenate([w, w, -w, -w]),
                           (np.concatenate([a, b, a, b]), np.concatenate([a, b, b, a]))), shape=(n, n))
    return L.tocsr()
