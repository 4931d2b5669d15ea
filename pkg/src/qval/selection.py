"""Selections and decompositions of Q-valued functions on one-dimensional domains.

Paths are finite samples: an interval path is a Q-point at each of a strictly
increasing list of parameters, a circle path the same over angles in [0, 2pi)
read cyclically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .aq_core import EXHAUSTIVE_MAX_Q, DimensionError, QPoint, best_permutations, permutations_table, sq_dist_matrix

TWO_PI = 2.0 * math.pi
# consecutive optimal matchings on a circle must beat every inequivalent competitor by this much
AMBIGUITY_MARGIN = 1e-9


class AmbiguousMatching(RuntimeError):
    """Consecutive samples admit two inequivalent optimal matchings."""


class NotIrreducible(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SampledQPath:
    params: np.ndarray
    values: np.ndarray  # (k, q, n)
    topology: str = "interval"

    def __post_init__(self):
        params = np.asarray(self.params, dtype=float).reshape(-1)
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 2:
            values = values[:, :, None]
        if values.ndim != 3 or values.shape[0] != params.shape[0]:
            raise DimensionError("values must be (k, q, n) with one Q-point per parameter")
        if self.topology not in ("interval", "circle"):
            raise ValueError(f"unknown topology {self.topology!r}")
        if params.size > 1 and np.any(np.diff(params) <= 0):
            raise ValueError("parameters must be strictly increasing")
        if self.topology == "circle" and params.size and (params[0] < 0 or params[-1] >= TWO_PI):
            raise ValueError("circle parameters must lie in [0, 2pi)")
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "values", values)

    @property
    def q(self) -> int:
        return self.values.shape[1]

    @property
    def n(self) -> int:
        return self.values.shape[2]

    def __len__(self):
        return self.params.shape[0]

    def value(self, k: int) -> QPoint:
        return QPoint(self.values[k])

    @classmethod
    def from_qpoints(cls, params, qpoints, topology="interval") -> "SampledQPath":
        qs = {(p.q, p.n) for p in qpoints}
        if len(qs) != 1:
            raise DimensionError(f"inconsistent (q, n) along the path: {sorted(qs)}")
        return cls(np.asarray(params, dtype=float), np.stack([p.points for p in qpoints]), topology)

    def to_json(self) -> dict:
        return {
            "topology": self.topology,
            "params": self.params.tolist(),
            "values": [self.value(k).to_json() for k in range(len(self))],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SampledQPath":
        pts = [QPoint.from_json(v) for v in obj["values"]]
        return cls.from_qpoints(obj["params"], pts, obj.get("topology", "interval"))


@dataclass(frozen=True, eq=False)
class Selection:
    """Q single-valued paths, ``paths[i, k]`` is branch i at parameter k."""

    params: np.ndarray
    paths: np.ndarray  # (q, k, n)

    def recombine(self) -> SampledQPath:
        return SampledQPath(self.params, np.transpose(self.paths, (1, 0, 2)), "interval")


@dataclass(frozen=True, eq=False)
class IrreduciblePiece:
    path: SampledQPath
    multiplicity: int

    @property
    def cycle_length(self) -> int:
        return self.path.q


# ---------------------------------------------------------------------------
# squad splitting


def _maximal_squad(base: np.ndarray, scale: float) -> list[int]:
    """Inclusion-maximal squad containing index 0, grown in index order."""
    q = base.shape[0]
    D = np.sqrt(sq_dist_matrix(base, base))
    squad = [0]
    grown = True
    while grown:
        grown = False
        for j in range(q):
            if j in squad:
                continue
            cand = squad + [j]
            if D[np.ix_(cand, cand)].max() <= 3 * (len(cand) - 1) * scale:
                squad = sorted(cand)
                grown = True
    return squad


def squad_split(samples, x0_index: int, lip: float, diam: float):
    """Split a Lipschitz Q-function into two pieces with disjoint supports.

    Parameters
    ----------
    samples : sequence of (domain point, QPoint)
    x0_index : int
        Sample whose values are tested for a large gap.
    lip, diam : float
        Upper bounds for the Lipschitz constant and for the domain diameter.

    Returns
    -------
    (left, right) : tuple of lists of QPoint, or None
        ``left`` holds the maximal squad through the first atom of the base
        value; None when no pair of atoms at ``x0_index`` is farther apart than
        3 (Q-1) lip diam.
    """
    values = [v for _, v in samples]
    if not values:
        raise ValueError("squad_split needs at least one sample")
    if len({(v.q, v.n) for v in values}) != 1:
        raise DimensionError("all samples must share q and n")
    V = np.stack([v.points for v in values])
    q = V.shape[1]
    base = V[x0_index]
    scale = lip * diam
    gaps = np.sqrt(sq_dist_matrix(base, base))
    if q < 2 or not gaps.max() > 3 * (q - 1) * scale:
        return None
    squad = _maximal_squad(base, scale)
    rest = [i for i in range(q) if i not in squad]
    perms, _ = best_permutations(np.broadcast_to(base, V.shape), V)
    left, right = [], []
    for k in range(V.shape[0]):
        left.append(QPoint(V[k, perms[k, squad]]))
        right.append(QPoint(V[k, perms[k, rest]]))
    return left, right


# ---------------------------------------------------------------------------
# interval selection


def select_1d(path: SampledQPath) -> Selection:
    """Piecewise-linear selection following the optimal matching on each segment."""
    if path.topology != "interval":
        raise ValueError("select_1d needs an interval path")
    if len(path) < 2:
        raise ValueError("select_1d needs at least two samples")
    V = path.values
    perms, _ = best_permutations(V[:-1], V[1:])
    k, q, n = V.shape
    out = np.empty((q, k, n))
    labels = np.arange(q)
    out[:, 0] = V[0]
    for l in range(1, k):
        labels = perms[l - 1][labels]
        out[:, l] = V[l, labels]
    return Selection(path.params.copy(), out)


# ---------------------------------------------------------------------------
# circle decomposition, rolling and unrolling


def _certified_matchings(V: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Optimal perms V[k] -> W[k], refusing near-ties between inequivalent matchings."""
    m, q, _ = V.shape
    perms, best = best_permutations(V, W)
    if q == 1 or q > EXHAUSTIVE_MAX_Q:
        return perms
    table = permutations_table(q)
    C = sq_dist_matrix(V, W)
    all_costs = C[:, np.arange(q), table].sum(-1)
    near = all_costs <= best[:, None] + AMBIGUITY_MARGIN
    for k in np.nonzero(near.sum(1) > 1)[0]:
        # perms pairing identical atoms the same way are not a real ambiguity
        seen = set()
        for p in table[near[k]]:
            pairs = sorted(tuple(V[k, i].tolist()) + tuple(W[k, p[i]].tolist()) for i in range(q))
            seen.add(tuple(pairs))
        if len(seen) > 1:
            raise AmbiguousMatching(f"samples {k} and {(k + 1) % m} admit inequivalent optimal matchings")
    return perms


def _strands(V: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Track labels around a closed sampled loop.

    Returns ``lab`` with ``lab[t, i]`` the label at sample t of the strand that
    starts at label i, and the monodromy permutation ``mono``.
    """
    k, q, _ = V.shape
    perms = _certified_matchings(V, np.roll(V, -1, axis=0))
    lab = np.empty((k, q), dtype=np.intp)
    lab[0] = np.arange(q)
    for t in range(1, k):
        lab[t] = perms[t - 1][lab[t - 1]]
    mono = perms[k - 1][lab[k - 1]]
    return lab, mono


def cycles(perm) -> list[list[int]]:
    perm = list(perm)
    seen = [False] * len(perm)
    out = []
    for i in range(len(perm)):
        if seen[i]:
            continue
        cyc = []
        j = i
        while not seen[j]:
            seen[j] = True
            cyc.append(j)
            j = perm[j]
        out.append(cyc)
    return out


def monodromy(g: SampledQPath) -> np.ndarray:
    """Permutation of the labels at the first sample after one trip around the circle."""
    if g.topology != "circle":
        raise ValueError("monodromy needs a circle path")
    return _strands(g.values)[1]


def decompose_circle(g: SampledQPath) -> list[IrreduciblePiece]:
    """Irreducible decomposition of a sampled circle Q-function.

    Each piece collects the strands of one monodromy cycle; identical pieces
    are merged and counted through ``multiplicity``.
    """
    if g.topology != "circle":
        raise ValueError("decompose_circle needs a circle path")
    V = g.values
    lab, mono = _strands(V)
    pieces: list[IrreduciblePiece] = []
    for cyc in cycles(mono):
        cols = lab[:, cyc]  # (k, len(cyc))
        vals = np.take_along_axis(V, cols[:, :, None], axis=1)
        path = SampledQPath(g.params.copy(), vals, "circle")
        for idx, piece in enumerate(pieces):
            if piece.path.q == path.q and _same_path(piece.path, path):
                pieces[idx] = IrreduciblePiece(piece.path, piece.multiplicity + 1)
                break
        else:
            pieces.append(IrreduciblePiece(path, 1))
    return pieces


def _same_path(a: SampledQPath, b: SampledQPath) -> bool:
    return all(a.value(k) == b.value(k) for k in range(len(a)))


def unroll(g: SampledQPath, q_j: int | None = None, start: int = 0) -> SampledQPath:
    """Lift an irreducible circle piece to a single-valued path on [0, 2pi q_j).

    ``start`` picks the label at the first sample where the lift begins; the
    q_j choices give the q_j distinct unrollings, which differ by whole laps.
    """
    if g.topology != "circle":
        raise ValueError("unroll needs a circle path")
    q_j = g.q if q_j is None else q_j
    if q_j != g.q:
        raise DimensionError(f"piece carries {g.q} values, not {q_j}")
    lab, mono = _strands(g.values)
    if len(cycles(mono)) != 1:
        raise NotIrreducible("monodromy is not a single cycle")
    k = len(g)
    params = np.concatenate([g.params + TWO_PI * m for m in range(q_j)])
    out = np.empty((k * q_j, 1, g.n))
    label = start
    for m in range(q_j):
        out[m * k:(m + 1) * k, 0] = g.values[np.arange(k), lab[:, label]]
        label = mono[label]
    return SampledQPath(params, out, "interval")


def roll(h: SampledQPath, q_j: int) -> SampledQPath:
    """Inverse of ``unroll``: fold a path on [0, 2pi q_j) back onto the circle."""
    total = len(h)
    if total % q_j:
        raise ValueError("unrolled path length must be a multiple of q_j")
    k = total // q_j
    base = h.params[:k]
    for m in range(1, q_j):
        if not np.allclose(h.params[m * k:(m + 1) * k] - TWO_PI * m, base, rtol=0, atol=1e-12):
            raise ValueError("unrolled parameters are not laps of a common circle sampling")
    vals = h.values[:, 0, :].reshape(q_j, k, h.n).transpose(1, 0, 2)
    return SampledQPath(base.copy(), vals, "circle")


def circle_trace(func, k: int, q: int | None = None) -> SampledQPath:
    """Sample ``func(theta) -> (q, n) array`` at k equally spaced angles."""
    theta = TWO_PI * np.arange(k) / k
    vals = np.stack([np.asarray(func(t), dtype=float) for t in theta])
    if q is not None and vals.shape[1] != q:
        raise DimensionError("sampled values do not carry q points")
    return SampledQPath(theta, vals, "circle")


def qth_root_trace(q: int, k: int, radius: float = 1.0) -> SampledQPath:
    """Boundary trace of x -> sum over z^q = x of [[z]] on the circle of given radius."""
    rr = radius ** (1.0 / q)

    def f(t):
        ang = (t + TWO_PI * np.arange(q)) / q
        return rr * np.stack([np.cos(ang), np.sin(ang)], axis=1)

    return circle_trace(f, k, q)
