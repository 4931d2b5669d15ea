"""Q-valued functions on a mesh: values per vertex, sheet matchings per edge."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from ..aq_core import DimensionError, QPoint, best_permutations
from .mesh import Mesh


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class QFunction:
    """Sheet i at vertex ``edges[e, 0]`` continues as sheet ``perms[e, i]`` at ``edges[e, 1]``."""

    mesh: Mesh
    values: np.ndarray  # (V, q, n)
    perms: np.ndarray   # (E, q)

    def __post_init__(self):
        V = np.asarray(self.values, dtype=float)
        if V.ndim != 3 or V.shape[0] != self.mesh.n_vertices:
            raise DimensionError("values must have shape (n_vertices, q, n)")
        P = np.asarray(self.perms, dtype=np.intp)
        if P.shape != (len(self.mesh.edges), V.shape[1]):
            raise DimensionError("perms must have shape (n_edges, q)")
        object.__setattr__(self, "values", V)
        object.__setattr__(self, "perms", P)

    @property
    def q(self) -> int:
        return self.values.shape[1]

    @property
    def n(self) -> int:
        return self.values.shape[2]

    def value(self, v: int) -> QPoint:
        return QPoint(self.values[v])

    def with_values(self, values) -> "QFunction":
        return replace(self, values=np.asarray(values, dtype=float))

    @classmethod
    def identity_matched(cls, mesh: Mesh, values) -> "QFunction":
        values = np.asarray(values, dtype=float)
        perms = np.tile(np.arange(values.shape[1]), (len(mesh.edges), 1))
        return cls(mesh, values, perms)

    def to_json(self) -> dict:
        return {
            "q": self.q,
            "n": self.n,
            "mesh": self.mesh.to_json(),
            "values": self.values.tolist(),
            "matchings": self.perms.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "QFunction":
        mesh = Mesh.from_json(obj["mesh"])
        values = np.asarray(obj["values"], dtype=float).reshape(mesh.n_vertices, int(obj["q"]), int(obj["n"]))
        if "matchings" in obj:
            return cls(mesh, values, np.asarray(obj["matchings"], dtype=np.intp))
        return match_edges(cls.identity_matched(mesh, values))

    def relabel(self, labelings: np.ndarray) -> "QFunction":
        """Gauge transform: new sheet j at v is old sheet ``labelings[v, j]``."""
        lab = np.asarray(labelings, dtype=np.intp)
        vals = np.take_along_axis(self.values, lab[:, :, None], axis=1)
        inv = np.argsort(lab, axis=1)
        a, b = self.mesh.edges[:, 0], self.mesh.edges[:, 1]
        # old_perm maps old label at a to old label at b
        old = np.take_along_axis(self.perms, lab[a], axis=1)
        new = np.take_along_axis(inv[b], old, axis=1)
        return QFunction(self.mesh, vals, new)


def edge_costs(f: QFunction) -> np.ndarray:
    """sum_i |f_i(a) - f_{perm(i)}(b)|^2 for every edge (a, b)."""
    a, b = f.mesh.edges[:, 0], f.mesh.edges[:, 1]
    Vb = np.take_along_axis(f.values[b], f.perms[:, :, None], axis=1)
    d = f.values[a] - Vb
    return (d * d).sum(axis=(1, 2))


def energy(f: QFunction) -> float:
    """Discrete Dirichlet energy on the lifted sheet graph."""
    return float(f.mesh.weights @ edge_costs(f))


def triangle_energies(f: QFunction) -> np.ndarray:
    """Per-triangle share of ``energy``; sums to the total."""
    costs = edge_costs(f)
    return (f.mesh.tri_half_cot * costs[f.mesh.tri_edges]).sum(1)


def match_edges(f: QFunction) -> QFunction:
    """Replace every edge matching with an optimal assignment of the endpoint values."""
    a, b = f.mesh.edges[:, 0], f.mesh.edges[:, 1]
    perms, _ = best_permutations(f.values[a], f.values[b])
    return replace(f, perms=perms)


def lifted_laplacian(f: QFunction) -> sparse.csr_matrix:
    """Stiffness matrix on the (V*q) lifted nodes; node v*q + i is sheet i at v."""
    q = f.q
    a, b = f.mesh.edges[:, 0], f.mesh.edges[:, 1]
    w = np.maximum(f.mesh.weights, 0.0)
    ia = (a[:, None] * q + np.arange(q)[None, :]).reshape(-1)
    ib = (b[:, None] * q + f.perms).reshape(-1)
    ww = np.repeat(w, q)
    N = f.mesh.n_vertices * q
    L = sparse.coo_matrix((np.concatenate([ww, ww, -ww, -ww]),
                           (np.concatenate([ia, ib, ia, ib]), np.concatenate([ia, ib, ib, ia]))), shape=(N, N))
    return L.tocsr()


def relax_values(f: QFunction, fixed: np.ndarray | None = None) -> tuple[QFunction, float]:
    """Minimise the energy over the values at free vertices, matchings held fixed.

    Parameters
    ----------
    f : QFunction
    fixed : bool array over vertices, optional
        Vertices whose values are kept; defaults to the mesh boundary.

    Returns
    -------
    QFunction
        Function whose free values solve the lifted normal equations.
    float
        Relative residual of the linear solve.
    """
    mask = f.mesh.boundary_mask if fixed is None else np.asarray(fixed, dtype=bool)
    q, n = f.q, f.n
    L = lifted_laplacian(f)
    lifted_fixed = np.repeat(mask, q)
    free = np.nonzero(~lifted_fixed)[0]
    if free.size == 0:
        return f, 0.0
    fixd = np.nonzero(lifted_fixed)[0]
    X = f.values.reshape(-1, n).copy()
    A = L[free][:, free].tocsc()
    rhs = -(L[free][:, fixd] @ X[fixd])
    try:
        lu = splu(A)
        sol = lu.solve(rhs)
    except RuntimeError as exc:  # singular factor
        raise SolverError(f"lifted Laplacian solve failed: {exc}") from exc
    scale = max(np.abs(rhs).max(), 1e-300)
    resid = float(np.abs(A @ sol - rhs).max() / scale) if rhs.size else 0.0
    X[free] = sol
    return f.with_values(X.reshape(-1, q, n)), resid


def eta_values(f: QFunction) -> np.ndarray:
    """Barycenter of the Q values at every vertex, shape (V, n)."""
    return f.values.mean(axis=1)


def sheet_coherent_triangle_values(f: QFunction) -> np.ndarray:
    """Values at the corners of every triangle, labels transported from corner 0.

    Returns an array of shape (T, 3, q, n) whose [t, k, i] entry continues
    sheet i of corner 0 to corner k along the triangle edge 0-k.
    """
    mesh = f.mesh
    T = mesh.triangles
    q = f.q
    out = np.empty((T.shape[0], 3, q, f.n))
    out[:, 0] = f.values[T[:, 0]]
    for k in (1, 2):
        # side opposite corner (3 - k) joins corners 0 and k
        e = mesh.tri_edges[:, 3 - k]
        forward = mesh.edges[e, 0] == T[:, 0]
        perm = f.perms[e]
        inv = np.argsort(perm, axis=1)
        p = np.where(forward[:, None], perm, inv)
        out[:, k] = np.take_along_axis(f.values[T[:, k]], p[:, :, None], axis=1)
    return out


def triangle_gradients(f: QFunction) -> np.ndarray:
    """Piecewise-constant gradient of every sheet, shape (T, q, n, 2)."""
    mesh = f.mesh
    P = mesh.vertices[mesh.triangles]
    vals = sheet_coherent_triangle_values(f)
    e1 = P[:, 1] - P[:, 0]
    e2 = P[:, 2] - P[:, 0]
    J = np.stack([e1, e2], axis=1)  # (T, 2, 2): rows are edge vectors
    Jinv = np.linalg.inv(J)
    d1 = vals[:, 1] - vals[:, 0]
    d2 = vals[:, 2] - vals[:, 0]
    D = np.stack([d1, d2], axis=-1)  # (T, q, n, 2)
    # grad . e_k = d_k  =>  grad = Jinv @ d
    return np.einsum("tij,tqnj->tqni", Jinv, D)
