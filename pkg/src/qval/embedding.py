"""Sorted-projection embeddings of A_Q(R^n) into Euclidean space.

``xi`` projects the atoms on a finite direction set and sorts each projection
list; with a direction set satisfying the separation property below it is
biLipschitz onto its image. ``xi_bw`` does the same over orthonormal frames
and is a local isometry. ``rho`` maps Euclidean vectors back to Q-points by
nearest-point projection onto the image of ``xi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .aq_core import DimensionError, QPoint, metric_g


class ConstructionError(RuntimeError):
    def __init__(self, msg, vectors=None):
        super().__init__(msg)
        self.vectors = vectors


class ConvergenceError(RuntimeError):
    def __init__(self, msg, best=None, residual=None):
        super().__init__(msg)
        self.best = best
        self.residual = residual


@dataclass(frozen=True, eq=False)
class EmbeddingBasis:
    """Direction set for ``xi`` (and, when ``frames`` is set, for ``xi_bw``).

    Every set of q**2 vectors v_k admits a direction e with
    |v_k . e| >= alpha |v_k| for all k.
    """

    n: int
    q: int
    directions: np.ndarray  # (h, n)
    alpha: float
    frames: np.ndarray | None = field(default=None)  # (h, n, n), frames[l, 0] == directions[l]

    @property
    def h(self) -> int:
        return self.directions.shape[0]

    @property
    def N(self) -> int:
        return self.q * self.h

    @property
    def M(self) -> int:
        return self.q * self.n * self.h

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "Q": self.q,
            "h": self.h,
            "alpha": self.alpha,
            "directions": self.directions.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "EmbeddingBasis":
        dirs = np.asarray(obj["directions"], dtype=float).reshape(int(obj["h"]), int(obj["n"]))
        return cls(int(obj["n"]), int(obj["Q"]), dirs, float(obj["alpha"]))


# ---------------------------------------------------------------------------
# direction sets


def _planar_lines(h: int) -> np.ndarray:
    ang = np.pi * np.arange(h) / h
    return np.stack([np.cos(ang), np.sin(ang)], axis=1)


def fibonacci_hemisphere(h: int, n: int = 3) -> np.ndarray:
    """Quasi-uniform unit vectors with nonnegative last coordinate (lines through 0)."""
    if n != 3:
        # n > 3: low-discrepancy points via a fixed-seed Gaussian cloud, repelled once
        rng = np.random.default_rng(12345)
        v = rng.normal(size=(h, n))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        v[v[:, -1] < 0] *= -1
        return v
    i = np.arange(h) + 0.5
    z = i / h  # uniform in (0, 1): equal-area on the upper hemisphere
    phi = np.pi * (1 + 5 ** 0.5) * i
    r = np.sqrt(1 - z * z)
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


@lru_cache(maxsize=64)
def build_lambda(n: int, q: int, seed: int = 0, verify_trials: int = 4000) -> EmbeddingBasis:
    """Direction set with a certified (n <= 2) or verified (n >= 3) constant alpha.

    Results are cached; the returned basis is immutable.
    """
    if n < 1 or q < 1:
        raise ValueError("n and q must be positive")
    if n == 1:
        return EmbeddingBasis(1, q, np.ones((1, 1)), 1.0)
    if n == 2:
        if q == 1:
            # worst vector bisects two of the three lines: 30 degrees off each
            return EmbeddingBasis(2, 1, _planar_lines(3), math.sqrt(3) / 2)
        # h = 2 q^2 lines at spacing pi/(2 q^2). A vector v violates the bound on a
        # line exactly when the line lies within arcsin(alpha) = pi/(8 q^2) of the
        # perpendicular of v; that open arc is narrower than the spacing, so it
        # holds at most one line. q^2 vectors exclude at most q^2 < h lines.
        h = 2 * q * q
        return EmbeddingBasis(2, q, _planar_lines(h), math.sin(math.pi / (8 * q * q)))

    h = 4 * q * q * (n - 1) + 1
    dirs = fibonacci_hemisphere(h, n)
    lo, hi = 0.0, 1.0
    for _ in range(24):
        mid = 0.5 * (lo + hi)
        res = verify_lambda(EmbeddingBasis(n, q, dirs, mid), verify_trials, seed)
        if res.passed:
            lo = mid
        else:
            hi = mid
    # half the empirical threshold: verification is randomized, not a proof
    alpha = 0.5 * lo
    final = verify_lambda(EmbeddingBasis(n, q, dirs, alpha), 4 * verify_trials, seed + 1)
    if not final.passed or alpha <= 0:
        raise ConstructionError(f"could not certify a direction set for n={n}, q={q}", final.witness)
    return EmbeddingBasis(n, q, dirs, alpha)


@dataclass
class VerifyResult:
    passed: bool
    worst_margin: float
    witness: np.ndarray | None = None


def _best_direction_score(sets: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """max over directions of min over the set of |cos(v_k, e_l)|, per set."""
    norms = np.linalg.norm(sets, axis=-1, keepdims=True)
    unit = sets / np.where(norms > 0, norms, 1.0)
    cos = np.abs(unit @ dirs.T)  # (t, k, h)
    # zero vectors satisfy the inequality trivially
    cos = np.where(norms > 0, cos, np.inf)
    return cos.min(axis=1).max(axis=1)


def _nullspace_candidates(dirs: np.ndarray, rng, count: int) -> np.ndarray:
    """Vectors orthogonal to n-1 randomly chosen (nearby) directions."""
    h, n = dirs.shape
    out = []
    for _ in range(count):
        if n == 2:
            e = dirs[rng.integers(h)]
            out.append([-e[1], e[0]])
            continue
        first = rng.integers(h)
        near = np.argsort(-np.abs(dirs @ dirs[first]))[1:4 * n]
        pick = [first] + list(rng.choice(near, size=n - 2, replace=False))
        _, _, vt = np.linalg.svd(dirs[pick])
        out.append(vt[-1])
    return np.array(out)


def _greedy_adversary(dirs: np.ndarray, alpha: float, k: int, rng, pool: int) -> np.ndarray:
    """Pick k vectors that together violate the bound on as many directions as possible."""
    h, n = dirs.shape
    cands = [rng.normal(size=(pool, n)), _nullspace_candidates(dirs, rng, pool)]
    if n == 2:
        ang = np.pi * (np.arange(8 * h) + 0.5) / (8 * h)
        cands.append(np.stack([np.cos(ang), np.sin(ang)], axis=1))
        # perpendiculars of bisectors between neighbouring lines
        mid = dirs + np.roll(dirs, -1, axis=0) * np.sign((dirs * np.roll(dirs, -1, axis=0)).sum(1))[:, None]
        cands.append(np.stack([-mid[:, 1], mid[:, 0]], axis=1))
        cands.append(mid)
    C = np.vstack(cands)
    C /= np.linalg.norm(C, axis=1, keepdims=True)
    kills = np.abs(C @ dirs.T) < alpha  # (c, h)
    alive = np.ones(h, dtype=bool)
    chosen = []
    for _ in range(k):
        gain = (kills & alive).sum(1)
        j = int(np.argmax(gain))
        chosen.append(C[j])
        alive &= ~kills[j]
    return np.array(chosen)


def verify_lambda(basis: EmbeddingBasis, trials: int = 10000, rng_seed: int = 0) -> VerifyResult:
    """Randomized and adversarial search for q^2-vector sets violating the basis property.

    ``worst_margin`` is the smallest observed (best achievable alpha for a set)
    minus the declared alpha; the check passes when it stays nonnegative.
    """
    rng = np.random.default_rng(rng_seed)
    dirs = basis.directions
    n = basis.n
    k = basis.q ** 2
    worst = np.inf
    witness = None
    chunk = max(1, min(trials, 200000 // max(1, k * basis.h)))
    done = 0
    while done < trials:
        t = min(chunk, trials - done)
        done += t
        sets = rng.normal(size=(t, k, n))
        # half of the sets cluster near the perpendiculars of random directions
        half = t // 2
        if half:
            base = dirs[rng.integers(basis.h, size=(half, k))]
            perp = rng.normal(size=(half, k, n))
            perp -= (perp * base).sum(-1, keepdims=True) * base
            scale = rng.uniform(0, 2 * max(basis.alpha, 1e-3), size=(half, k, 1))
            pn = np.linalg.norm(perp, axis=-1, keepdims=True)
            # n = 1 has no perpendicular directions
            sets[:half] = perp / np.where(pn > 0, pn, 1.0) + scale * base
        score = _best_direction_score(sets, dirs)
        i = int(np.argmin(score))
        if score[i] - basis.alpha < worst:
            worst = score[i] - basis.alpha
            witness = sets[i]
    # on a line every nonzero vector is parallel to the single direction
    for _ in range(8 if n > 1 else 0):
        adv = _greedy_adversary(dirs, basis.alpha, k, rng, pool=64 * n)
        score = _best_direction_score(adv[None], dirs)[0]
        if score - basis.alpha < worst:
            worst = score - basis.alpha
            witness = adv
    return VerifyResult(bool(worst >= 0), float(worst), witness)


def build_gamma(basis: EmbeddingBasis) -> EmbeddingBasis:
    """Complete every direction of ``basis`` to an orthonormal frame."""
    frames = np.empty((basis.h, basis.n, basis.n))
    for l, e in enumerate(basis.directions):
        # Householder reflection sending e_1 to e; its columns form an orthonormal frame
        v = e.copy()
        v[0] -= 1.0
        nv = v @ v
        H = np.eye(basis.n) if nv < 1e-30 else np.eye(basis.n) - 2.0 * np.outer(v, v) / nv
        frames[l] = H.T
        frames[l, 0] = e
    return EmbeddingBasis(basis.n, basis.q, basis.directions, basis.alpha, frames)


# ---------------------------------------------------------------------------
# the maps


def _check(T: QPoint, basis: EmbeddingBasis):
    if T.n != basis.n or T.q != basis.q:
        raise DimensionError(f"basis built for (n={basis.n}, q={basis.q}), got (n={T.n}, q={T.q})")


def xi(T: QPoint, basis: EmbeddingBasis) -> np.ndarray:
    _check(T, basis)
    proj = np.sort(T.points @ basis.directions.T, axis=0)  # (q, h)
    return proj.T.reshape(-1) / math.sqrt(basis.h)


def xi_many(V: np.ndarray, basis: EmbeddingBasis) -> np.ndarray:
    """``xi`` applied to a stack of Q-points, V of shape (m, q, n)."""
    proj = np.sort(V @ basis.directions.T, axis=1)  # (m, q, h)
    return np.swapaxes(proj, 1, 2).reshape(V.shape[0], -1) / math.sqrt(basis.h)


def _frame_vectors(basis: EmbeddingBasis) -> np.ndarray:
    if basis.frames is None:
        raise ValueError("xi_bw needs a frame basis; call build_gamma first")
    return basis.frames.reshape(-1, basis.n)


def xi_bw(T: QPoint, basis: EmbeddingBasis) -> np.ndarray:
    _check(T, basis)
    proj = np.sort(T.points @ _frame_vectors(basis).T, axis=0)
    return proj.T.reshape(-1) / math.sqrt(basis.h)


def xi_bw_many(V: np.ndarray, basis: EmbeddingBasis) -> np.ndarray:
    proj = np.sort(V @ _frame_vectors(basis).T, axis=1)
    return np.swapaxes(proj, 1, 2).reshape(V.shape[0], -1) / math.sqrt(basis.h)


def bw_delta(T: QPoint, basis: EmbeddingBasis) -> float:
    """Radius of the ball around T on which ``xi_bw`` is an isometry."""
    proj = T.points @ _frame_vectors(basis).T
    gaps = np.abs(proj[:, None, :] - proj[None, :, :])
    pos = gaps[gaps > 0]
    return float(pos.min()) / 4 if pos.size else math.inf


def _ls_points(targets: np.ndarray, dirs: np.ndarray, gram_inv: np.ndarray) -> np.ndarray:
    """Points P_j minimising sum_l (P_j . e_l - targets[j, l])^2."""
    return targets @ dirs @ gram_inv


def _assign(T: np.ndarray, blocks: np.ndarray, dirs: np.ndarray, sort_targets: bool) -> np.ndarray:
    """Targets[j, l]: the value of block l assigned to point j by sorted rank."""
    q, h = T.shape[0], dirs.shape[0]
    rank = np.argsort(np.argsort(T @ dirs.T, axis=0, kind="stable"), axis=0, kind="stable")  # (q, h)
    src = np.sort(blocks, axis=1) if sort_targets else blocks  # (h, q)
    return src[np.arange(h)[None, :], rank]


def rho(p: np.ndarray, basis: EmbeddingBasis, n_starts: int = 12, seed: int = 0,
        max_iter: int = 200, tol: float = 1e-9) -> QPoint:
    """Nearest point of xi(A_Q) to ``p``, returned as a Q-point.

    Multi-start alternating descent: with the sorting ranks frozen the
    objective is a linear least-squares problem in the atoms; ranks are then
    refreshed. Ties between starts resolve to the lowest start index.
    """
    p = np.asarray(p, dtype=float).reshape(-1)
    q, h, n = basis.q, basis.h, basis.n
    if p.size != q * h:
        raise DimensionError(f"expected a vector of length {q * h}, got {p.size}")
    dirs = basis.directions
    blocks = p.reshape(h, q) * math.sqrt(h)
    gram_inv = np.linalg.pinv(dirs.T @ dirs)
    rng = np.random.default_rng(seed)
    spread = float(np.abs(blocks).max()) + 1.0

    def objective(T):
        return float(((xi_many(T[None], basis)[0] - p) ** 2).sum())

    starts = [_ls_points(np.sort(blocks, axis=1).T, dirs, gram_inv)]
    starts += [rng.normal(scale=spread, size=(q, n)) for _ in range(n_starts - 1)]

    best_T, best_f = None, np.inf
    for T in starts:
        f = objective(T)
        for sort_targets in (True, False):
            for _ in range(max_iter):
                cand = _ls_points(_assign(T, blocks, dirs, sort_targets), dirs, gram_inv)
                fc = objective(cand)
                if fc < f - 1e-15 * max(1.0, f):
                    T, f = cand, fc
                else:
                    break
        if f < best_f:
            best_T, best_f = T, f
        if best_f <= tol ** 2:
            break
    if not np.isfinite(best_f):
        raise ConvergenceError("rho failed to produce a finite iterate", best_T, best_f)
    return QPoint(best_T)


def bilipschitz_bounds(T: QPoint, S: QPoint, basis: EmbeddingBasis) -> tuple[float, float, float]:
    """(|xi(T) - xi(S)|, G(T, S), sqrt(h)/alpha * |xi(T) - xi(S)|)."""
    d_xi = float(np.linalg.norm(xi(T, basis) - xi(S, basis)))
    g = metric_g(T, S)[0]
    return d_xi, g, math.sqrt(basis.h) / basis.alpha * d_xi
