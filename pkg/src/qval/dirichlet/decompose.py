"""Splitting a minimiser whose boundary values stay near a well separated Q-point."""

from __future__ import annotations

import numpy as np

from ..aq_core import QPoint, best_permutations, collapse_point, diameter, distinct_atoms, separation
from .qfunction import QFunction, match_edges

# collapse parameter eps; alpha(Q) = eps * beta(eps, Q) = 24^(-3^Q) / 8
COLLAPSE_EPS = 1.0 / 8.0


class NotDecomposable(ValueError):
    pass


def alpha_q(q: int) -> float:
    return 24.0 ** (-(3 ** q)) / 8.0


def decompose_minimizer(f: QFunction, T: QPoint | None = None, factor: float | None = None) -> list[QFunction]:
    """Split ``f`` into pieces taking values near distinct atoms of a collapsed point.

    Parameters
    ----------
    f : QFunction
    T : QPoint, optional
        Reference point; defaults to the value at the first boundary vertex.
    factor : float, optional
        Boundary closeness required, as a fraction of d(T). Defaults to
        ``alpha_q(q)``; larger values accept coarser clusters.

    Returns
    -------
    list of QFunction
        One piece per distinct atom of the collapsed point, in first-seen
        order; the multiset union at every vertex is f.

    Raises
    ------
    NotDecomposable
        When T has a single atom, when the boundary strays farther than
        factor * d(T) from T, or when some vertex value leaves the ball of
        radius s(S)/2 around the collapsed point S.
    """
    mesh = f.mesh
    q = f.q
    if T is None:
        T = f.value(int(mesh.boundary[0]) if len(mesh.boundary) else 0)
    if T.q != q or T.n != f.n:
        raise NotDecomposable("reference point has the wrong (q, n)")
    d = diameter(T)
    if d == 0:
        raise NotDecomposable("reference point is a single atom")
    factor = alpha_q(q) if factor is None else float(factor)

    bnd = mesh.boundary
    Tb = np.broadcast_to(T.points, (len(bnd), q, f.n))
    _, costs = best_permutations(f.values[bnd], Tb)
    if np.sqrt(costs.max()) > factor * d:
        raise NotDecomposable("boundary values are not close enough to the reference point")

    S = collapse_point(T, COLLAPSE_EPS)
    s = separation(S)
    atoms, _ = distinct_atoms(S)
    if len(atoms) < 2:
        raise NotDecomposable("collapsed point has a single atom")

    SV = np.broadcast_to(S.points, f.values.shape)
    perms, costs = best_permutations(f.values, SV)
    # below s(S)/2 every atom of f(x) is strictly closest to its matched atom of S
    if np.sqrt(costs.max()) >= s / 2:
        raise NotDecomposable("values leave the ball of radius s(S)/2 around the collapsed point")

    # cluster id of every sheet: the distinct atom of S it is matched to
    atom_of_slot = np.array([next(k for k, a in enumerate(atoms) if np.array_equal(a, p)) for p in S.points])
    cluster = atom_of_slot[perms]  # (V, q)
    pieces = []
    for c in range(len(atoms)):
        mask = cluster == c
        counts = mask.sum(1)
        assert np.all(counts == counts[0])
        idx = np.nonzero(mask)[1].reshape(len(mask), counts[0])
        vals = np.take_along_axis(f.values, idx[:, :, None], axis=1)
        pieces.append(match_edges(QFunction.identity_matched(mesh, vals)))
    return pieces
