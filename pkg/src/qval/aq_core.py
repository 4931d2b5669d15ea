"""Unordered Q-tuples of points and the optimal-assignment metric between them."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import linear_sum_assignment

# Q at or below this uses exhaustive permutation search, above it the Hungarian solver.
EXHAUSTIVE_MAX_Q = 6
ORACLE_MAX_Q = 6


class DimensionError(ValueError):
    """Raised when two Q-points (or a Q-point and a basis) have incompatible shapes."""


class PreconditionError(ValueError):
    pass


@lru_cache(maxsize=None)
def permutations_table(q: int) -> np.ndarray:
    """All permutations of ``range(q)`` as rows, in lexicographic order."""
    return np.array(list(itertools.permutations(range(q))), dtype=np.intp).reshape(-1, q)


@dataclass(frozen=True, eq=False)
class QPoint:
    """An element of A_Q(R^n), stored as a (q, n) array of atoms.

    The row order is bookkeeping only; ``==`` compares as multisets.
    """

    points: np.ndarray

    def __post_init__(self):
        arr = np.array(self.points, dtype=float)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionError(f"expected a (q, n) array of points, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "points", arr)

    @property
    def q(self) -> int:
        return self.points.shape[0]

    @property
    def n(self) -> int:
        return self.points.shape[1]

    @classmethod
    def repeated(cls, point, q: int) -> "QPoint":
        """Q[[P]]: the point ``point`` with multiplicity ``q``."""
        p = np.atleast_1d(np.asarray(point, dtype=float))
        return cls(np.tile(p, (q, 1)))

    def canonical(self) -> np.ndarray:
        """Rows sorted lexicographically; equal multisets give identical arrays."""
        order = np.lexsort(self.points.T[::-1])
        return self.points[order]

    def __eq__(self, other):
        if not isinstance(other, QPoint):
            return NotImplemented
        if self.points.shape != other.points.shape:
            return False
        return bool(np.array_equal(self.canonical(), other.canonical()))

    def __hash__(self):
        return hash((self.q, self.n, self.canonical().tobytes()))

    def isclose(self, other: "QPoint", eps: float) -> bool:
        """Multiset equality up to ``eps`` in the metric G."""
        return metric_g(self, other)[0] <= eps

    def __add__(self, other: "QPoint") -> "QPoint":
        """Sum of Dirac masses: concatenates the atoms."""
        if self.n != other.n:
            raise DimensionError("cannot add Q-points living in different dimensions")
        return QPoint(np.vstack([self.points, other.points]))

    def to_json(self) -> dict:
        return {"q": self.q, "n": self.n, "points": self.points.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "QPoint":
        pts = np.asarray(obj["points"], dtype=float).reshape(-1, int(obj["n"]))
        if pts.shape[0] != int(obj["q"]):
            raise DimensionError(f"q={obj['q']} but {pts.shape[0]} points given")
        return cls(pts)

    def __repr__(self):
        return f"QPoint(q={self.q}, n={self.n}, points={self.points.tolist()})"


@dataclass(frozen=True)
class Matching:
    """Atom i of the first Q-point is paired with atom ``perm[i]`` of the second."""

    perm: tuple
    cost: float


def _check_pair(T: QPoint, S: QPoint):
    if T.q != S.q or T.n != S.n:
        raise DimensionError(f"mismatched Q-points: (q={T.q}, n={T.n}) vs (q={S.q}, n={S.n})")


def sq_dist_matrix(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """C[..., i, j] = |A[..., i, :] - B[..., j, :]|^2."""
    diff = A[..., :, None, :] - B[..., None, :, :]
    return (diff * diff).sum(-1)


def best_permutations(A: np.ndarray, B: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Optimal assignment for a batch of Q-point pairs.

    Parameters
    ----------
    A, B : ndarray, shape (m, q, n)

    Returns
    -------
    perms : ndarray, shape (m, q)
        ``perms[k, i]`` is the atom of ``B[k]`` matched to atom i of ``A[k]``;
        the lexicographically smallest optimal permutation when q is small.
    costs : ndarray, shape (m,)
        Sum of squared distances under the returned permutation.
    """
    m, q, _ = A.shape
    if q <= EXHAUSTIVE_MAX_Q:
        table = permutations_table(q)
        C = sq_dist_matrix(A, B)
        all_costs = C[:, np.arange(q), table].sum(-1)  # (m, q!)
        best = np.argmin(all_costs, axis=1)
        return table[best], all_costs[np.arange(m), best]
    perms = np.empty((m, q), dtype=np.intp)
    costs = np.empty(m)
    for k in range(m):
        C = sq_dist_matrix(A[k], B[k])
        _, cols = linear_sum_assignment(C)
        perms[k] = cols
        costs[k] = C[np.arange(q), cols].sum()
    return perms, costs


def metric_g(T: QPoint, S: QPoint) -> tuple[float, Matching]:
    """The distance G(T, S) and a matching attaining it."""
    _check_pair(T, S)
    perms, costs = best_permutations(T.points[None], S.points[None])
    cost = float(costs[0])
    return math.sqrt(cost), Matching(tuple(int(i) for i in perms[0]), cost)


def metric_g_oracle(T: QPoint, S: QPoint, cap: int = ORACLE_MAX_Q) -> float:
    """Brute-force G(T, S) by enumerating every permutation in pure Python."""
    _check_pair(T, S)
    if T.q > cap:
        raise PreconditionError(f"oracle refuses q={T.q} > cap={cap}")
    P = T.points.tolist()
    R = S.points.tolist()
    best = math.inf
    for perm in itertools.permutations(range(T.q)):
        total = 0.0
        for i, j in enumerate(perm):
            d = 0.0
            for a, b in zip(P[i], R[j]):
                d += (a - b) * (a - b)
            total += d
        best = min(best, total)
    return math.sqrt(best)


def diameter(T: QPoint) -> float:
    if T.q == 1:
        return 0.0
    return float(np.sqrt(sq_dist_matrix(T.points, T.points).max()))


def separation(T: QPoint) -> float:
    """Smallest distance between distinct atoms; +inf when T = Q[[P]]."""
    D = np.sqrt(sq_dist_matrix(T.points, T.points))
    positive = D[D > 0]
    return float(positive.min()) if positive.size else math.inf


def barycenter_eta(T: QPoint) -> np.ndarray:
    return T.points.mean(axis=0)


def distinct_atoms(T: QPoint) -> tuple[np.ndarray, np.ndarray]:
    """Exactly distinct atoms of T and their multiplicities, in first-seen order."""
    atoms: list[np.ndarray] = []
    mult: list[int] = []
    for p in T.points:
        for k, a in enumerate(atoms):
            if np.array_equal(a, p):
                mult[k] += 1
                break
        else:
            atoms.append(p)
            mult.append(1)
    return np.array(atoms), np.array(mult)


def retraction_theta(center: QPoint, r: float, S: QPoint) -> QPoint:
    """Lipschitz retraction of A_Q onto the closed ball of radius r around ``center``.

    Points within r are fixed, points at distance at least 2r go to ``center``,
    and in between each atom is pulled toward its matched atom of ``center``
    by the factor (2r - G)/G.
    """
    _check_pair(center, S)
    if not r > 0:
        raise PreconditionError("radius must be positive")
    s = separation(center)
    if not r < s / 4:
        raise PreconditionError(f"r={r} must be below s(center)/4={s / 4}")
    g, m = metric_g(S, center)
    if g <= r:
        return S
    if g >= 2 * r:
        return center
    # G < 2r < s/2: every atom of S sits within 2r of its matched center atom,
    # so the optimal matching realises the cluster decomposition S = sum S_j.
    targets = center.points[list(m.perm)]
    assert np.all(np.linalg.norm(S.points - targets, axis=1) < s / 2)
    factor = (2 * r - g) / g
    return QPoint(factor * (S.points - targets) + targets)


def separation_beta(eps: float, q: int) -> float:
    return (eps / 3.0) ** (3 ** q)


def _nearest_row(points: np.ndarray, p: np.ndarray) -> int:
    return int(np.argmin(((points - p) ** 2).sum(-1)))


def collapse_point(T: QPoint, eps: float) -> QPoint:
    """A nearby Q-point S whose separation is comparable to the diameter of T.

    Guarantees ``separation_beta(eps, q) * d(T) <= s(S)`` and
    ``G(S, T) <= eps * s(S)``. Recursive: when T is badly separated, one atom
    of a closest pair is dropped (keeping the diameter), the rest is
    collapsed with eps/3, and the dropped atom is put back on the surviving
    atom nearest to its former partner.
    """
    if not 0 < eps < 1:
        raise PreconditionError("eps must lie in (0, 1)")
    if math.isinf(separation(T)):
        raise PreconditionError("collapse_point needs T with at least two distinct atoms")
    return QPoint(_collapse(T.points, eps))


def _collapse(P: np.ndarray, eps: float) -> np.ndarray:
    q = P.shape[0]
    if q <= 2:
        return P
    T = QPoint(P)
    d = diameter(T)
    s = separation(T)
    if s >= separation_beta(eps, q) * d:
        return P

    D = np.sqrt(sq_dist_matrix(P, P))
    D_pos = np.where(D > 0, D, np.inf)
    i, j = np.unravel_index(np.argmin(D_pos), D.shape)
    pair = sorted((int(i), int(j)))
    # drop whichever of the closest pair leaves the larger diameter; ties -> lower index
    best = None
    for drop in pair:
        rest = np.delete(P, drop, axis=0)
        dd = diameter(QPoint(rest))
        if best is None or dd > best[0]:
            best = (dd, drop)
    drop = best[1]
    partner = pair[1] if drop == pair[0] else pair[0]
    rest = np.delete(P, drop, axis=0)
    partner_in_rest = partner if partner < drop else partner - 1

    S_rest = _collapse(rest, eps / 3.0)
    anchor = S_rest[_nearest_row(S_rest, rest[partner_in_rest])]
    return np.insert(S_rest, drop, anchor, axis=0)
