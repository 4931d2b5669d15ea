"""Point location and sheet-coherent evaluation of mesh functions."""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from ..dirichlet.mesh import Mesh
from ..dirichlet.qfunction import QFunction, sheet_coherent_triangle_values, triangle_gradients


def _barycentric(mesh: Mesh, tri: np.ndarray, pts: np.ndarray) -> np.ndarray:
    P = mesh.vertices[mesh.triangles[tri]]
    e1 = P[:, 1] - P[:, 0]
    e2 = P[:, 2] - P[:, 0]
    d = pts - P[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    l1 = (d[:, 0] * e2[:, 1] - d[:, 1] * e2[:, 0]) / det
    l2 = (e1[:, 0] * d[:, 1] - e1[:, 1] * d[:, 0]) / det
    return np.stack([1 - l1 - l2, l1, l2], axis=1)


def locate(mesh: Mesh, points: np.ndarray, k: int = 16, tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Containing triangle and barycentric coordinates of every point.

    Points outside the mesh get the triangle with the least negative
    coordinate, so evaluation extrapolates slightly near curved boundaries.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    cent = mesh.vertices[mesh.triangles].mean(axis=1)
    tree = cKDTree(cent)
    k = min(k, len(cent))
    _, cand = tree.query(pts, k=k)
    cand = cand.reshape(len(pts), k)
    best_tri = cand[:, 0].copy()
    best_score = np.full(len(pts), -np.inf)
    for c in range(k):
        lam = _barycentric(mesh, cand[:, c], pts)
        score = lam.min(axis=1)
        better = score > best_score + 1e-15
        best_tri[better] = cand[better, c]
        best_score[better] = score[better]
    missing = np.nonzero(best_score < -tol)[0]
    for i in missing:
        lam = _barycentric(mesh, np.arange(len(cent)), np.broadcast_to(pts[i], (len(cent), 2)))
        t = int(np.argmax(lam.min(axis=1)))
        best_tri[i] = t
    bary = _barycentric(mesh, best_tri, pts)
    return best_tri, bary


def evaluate(f: QFunction, points: np.ndarray) -> np.ndarray:
    """Values at arbitrary points, shape (m, q, n), by barycentric interpolation of each sheet."""
    tri, lam = locate(f.mesh, points)
    vals = sheet_coherent_triangle_values(f)[tri]  # (m, 3, q, n)
    return np.einsum("mk,mkqn->mqn", lam, vals)


def evaluate_with_gradients(f: QFunction, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Values (m, q, n) and sheet gradients (m, q, n, 2) in a common labeling per point."""
    tri, lam = locate(f.mesh, points)
    vals = sheet_coherent_triangle_values(f)[tri]
    grads = triangle_gradients(f)[tri]
    return np.einsum("mk,mkqn->mqn", lam, vals), grads


def circle_points(center, r: float, m: int) -> tuple[np.ndarray, np.ndarray]:
    phi = 2 * np.pi * np.arange(m) / m
    c = np.asarray(center, dtype=float)
    return phi, c + r * np.stack([np.cos(phi), np.sin(phi)], axis=1)
