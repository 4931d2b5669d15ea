"""Multiplicity of values, singular vertices and Hoelder exponents of mesh functions."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from ..aq_core import best_permutations
from ..dirichlet.qfunction import QFunction

# cluster_tol = SIGMA_FACTOR * h^(1/Q); see default_cluster_tol
SIGMA_FACTOR = 1.9


def default_cluster_tol(f: QFunction) -> float:
    """1.9 h^(1/Q), h the longest mesh edge.

    Near a branch point the value gap of a discrete minimiser at the k-th
    ring of vertices is a fixed multiple of h^(1/Q) under refinement; 1.9
    lies between the gaps of the first and second rings for the square and
    cube root problems.
    """
    return SIGMA_FACTOR * f.mesh.mesh_size ** (1.0 / f.q)


def multiplicity_sigma(f: QFunction, cluster_tol: float | None = None) -> np.ndarray:
    """Number of single-linkage clusters of the Q values at every vertex."""
    tol = default_cluster_tol(f) if cluster_tol is None else cluster_tol
    if not tol > 0:
        raise ValueError("cluster_tol must be positive")
    V = f.values
    q = f.q
    D = np.sqrt(((V[:, :, None, :] - V[:, None, :, :]) ** 2).sum(-1))
    close = D <= tol
    # transitive closure of the closeness relation by repeated boolean squaring
    reach = close.copy()
    for _ in range(max(1, math.ceil(math.log2(max(q, 2))))):
        reach = np.einsum("vij,vjk->vik", reach, reach) > 0
    # a label starts a new cluster when no earlier label reaches it
    earlier = np.tril(np.ones((q, q), dtype=bool), -1)
    return (~(reach & earlier[None]).any(axis=2)).sum(axis=1)


def singular_set(f: QFunction, cluster_tol: float | None = None) -> np.ndarray:
    """Vertices whose sigma differs from that of some neighbour, sorted."""
    sigma = multiplicity_sigma(f, cluster_tol)
    a, b = f.mesh.edges[:, 0], f.mesh.edges[:, 1]
    diff = sigma[a] != sigma[b]
    return np.unique(np.concatenate([a[diff], b[diff]]))


def _components(n: int, edges: np.ndarray, keep: np.ndarray) -> tuple[int, np.ndarray]:
    a, b = edges[:, 0], edges[:, 1]
    m = keep[a] & keep[b]
    G = coo_matrix((np.ones(m.sum()), (a[m], b[m])), shape=(n, n))
    return connected_components(G, directed=False)


def singular_clusters(f: QFunction, cluster_tol: float | None = None) -> list[np.ndarray]:
    """Connected groups of singular vertices, each with the vertices it encloses.

    Components of the non-singular vertices that do not reach the mesh
    boundary are holes; a hole is added to the singular cluster it touches.
    """
    mesh = f.mesh
    n = mesh.n_vertices
    sing = np.zeros(n, dtype=bool)
    sing[singular_set(f, cluster_tol)] = True
    if not sing.any():
        return []
    _, lab = _components(n, mesh.edges, sing)
    _, hole_lab = _components(n, mesh.edges, ~sing)
    reaches = set(hole_lab[mesh.boundary][~sing[mesh.boundary]].tolist())
    a, b = mesh.edges[:, 0], mesh.edges[:, 1]
    members: dict[int, set] = {}
    for v in np.nonzero(sing)[0]:
        members.setdefault(int(lab[v]), set()).add(int(v))
    for u, w in zip(a, b):
        for s, h in ((u, w), (w, u)):
            if sing[s] and not sing[h] and hole_lab[h] not in reaches:
                members[int(lab[s])].update(np.nonzero((hole_lab == hole_lab[h]) & ~sing)[0].tolist())
    return [np.array(sorted(m)) for _, m in sorted(members.items())]


def cluster_diameter(f: QFunction, cluster: np.ndarray) -> float:
    P = f.mesh.vertices[cluster]
    if len(P) < 2:
        return 0.0
    return float(np.sqrt(((P[:, None] - P[None]) ** 2).sum(-1)).max())


@dataclass
class HolderEstimate:
    alpha_hat: float  # nan when f is constant on the ball
    seminorm: float
    bins: list  # (upper distance, max G) per dyadic bin used in the fit


def holder_estimate(f: QFunction, delta: float = 0.5, center=(0.0, 0.0), min_scale: float | None = None,
                    chunk: int = 200_000) -> HolderEstimate:
    """Log-log slope of the largest G(f(x), f(y)) over dyadic bins of |x - y|, x, y in B_delta.

    Bin k collects the pairs with delta / 2^(k+1) < |x - y| <= delta / 2^k;
    distances stop at delta so that every bin sees pairs through the center. Bins below ``min_scale`` (default
    four mesh sizes) are discarded; the seminorm is
    sup G / |x - y|^alpha_hat over the retained pairs.
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    c = np.asarray(center, dtype=float)
    idx = np.nonzero(np.linalg.norm(f.mesh.vertices - c, axis=1) < delta)[0]
    P = f.mesh.vertices[idx]
    V = f.values[idx]
    lo = 4 * f.mesh.mesh_size if min_scale is None else min_scale
    kmax = max(0, int(math.floor(math.log2(delta / lo))))
    upper = delta / 2.0 ** np.arange(kmax + 1)  # bin k: (upper[k] / 2, upper[k]]
    best = np.zeros(kmax + 1)
    kept = []
    ia, ib = np.triu_indices(len(idx), 1)
    for s in range(0, len(ia), chunk):
        a, b = ia[s:s + chunk], ib[s:s + chunk]
        d = np.linalg.norm(P[a] - P[b], axis=1)
        keep = (d > upper[-1] / 2) & (d <= delta)
        if not keep.any():
            continue
        a, b, d = a[keep], b[keep], d[keep]
        _, cost = best_permutations(V[a], V[b])
        G = np.sqrt(cost)
        k = np.clip(np.floor(np.log2(delta / d)).astype(int), 0, kmax)
        np.maximum.at(best, k, G)
        kept.append((d, G))
    use = best > 0
    bins = [(float(upper[k]), float(best[k])) for k in np.nonzero(use)[0]]
    if use.sum() < 2:
        return HolderEstimate(math.nan, 0.0, bins)
    slope, _ = np.polyfit(np.log(upper[use]), np.log(best[use]), 1)
    alpha_hat = float(slope)
    semi = max(float((G / d ** alpha_hat).max()) for d, G in kept)
    return HolderEstimate(alpha_hat, semi, bins)
