"""Homogeneous tangent maps, Fourier expansions of circle traces and the decay exponent."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ..selection import TWO_PI, SampledQPath, decompose_circle, unroll


class UnclassifiedTangent(ValueError):
    pass


@dataclass
class TangentPiece:
    k: int
    q_star: int
    n_star: int
    L: np.ndarray  # (2, n)
    residual: float

    @property
    def alpha(self) -> Fraction:
        return Fraction(self.n_star, self.q_star)


@dataclass
class TangentModel:
    """k0 [[0]] + sum_j k_j sum_{z^Q* = x} [[L_j z^n*]]."""

    k0: int
    pieces: list = field(default_factory=list)
    residual: float = 0.0
    disjoint: bool = True

    @property
    def q(self) -> int:
        return self.k0 + sum(p.k * p.q_star for p in self.pieces)

    @property
    def alpha(self) -> Fraction | None:
        alphas = {p.alpha for p in self.pieces}
        if len(alphas) == 1:
            return alphas.pop()
        return None

    def to_json(self) -> dict:
        a = self.alpha
        return {
            "k0": self.k0,
            "alpha": None if a is None else [a.numerator, a.denominator],
            "residual": self.residual,
            "disjoint": self.disjoint,
            "pieces": [
                {"k": p.k, "Q_star": p.q_star, "n_star": p.n_star, "L": p.L.tolist(), "residual": p.residual}
                for p in self.pieces
            ],
        }


def _uniform(params: np.ndarray, period: float) -> bool:
    k = len(params)
    return np.allclose(params, params[0] + period * np.arange(k) / k, atol=1e-9, rtol=0)


def tangent_fit(g: SampledQPath, q: int | None = None, alpha_hint: float | None = None,
                zero_tol: float = 1e-8, threshold: float = 0.05) -> TangentModel:
    """Classify a circle trace as the trace of a homogeneous tangent map.

    The trace is split into irreducible pieces; pieces identically below
    ``zero_tol`` count towards k0. Each remaining piece with monodromy cycle
    length Q* is unrolled and fitted by least squares against
    phi -> (cos(n* phi / Q*), sin(n* phi / Q*)) L over candidate n* coprime
    to Q*, from 1 to ceil(alpha_hint Q) + 2. The residual is the rms misfit
    divided by the rms of the unrolled path.

    Raises
    ------
    UnclassifiedTangent
        If the best residual of some piece exceeds ``threshold``.
    """
    q = g.q if q is None else q
    if q != g.q:
        raise ValueError("q does not match the trace")
    pieces = decompose_circle(g)
    if alpha_hint is None:
        alpha_hint = 1.0
    n_max = int(math.ceil(alpha_hint * q)) + 2
    k0 = 0
    out: list[TangentPiece] = []
    worst = 0.0
    for piece in pieces:
        p = piece.path
        if np.abs(p.values).max() <= zero_tol:
            k0 += piece.multiplicity * p.q
            continue
        qs = p.q
        h = unroll(p)
        phi = h.params
        y = h.values[:, 0, :]
        scale = math.sqrt(float((y ** 2).sum(1).mean()))
        best = None
        for n_star in range(1, n_max + 1):
            if math.gcd(n_star, qs) != 1:
                continue
            B = np.column_stack([np.cos(n_star * phi / qs), np.sin(n_star * phi / qs)])
            L, *_ = np.linalg.lstsq(B, y, rcond=None)
            res = math.sqrt(float(((B @ L - y) ** 2).sum(1).mean())) / scale
            if best is None or res < best.residual - 1e-15:
                best = TangentPiece(piece.multiplicity, qs, n_star, L, res)
        if best is None or best.residual > threshold:
            raise UnclassifiedTangent(f"no homogeneous fit for a piece with Q*={qs} (residual "
                                      f"{None if best is None else best.residual:.3g})")
        worst = max(worst, best.residual)
        out.append(best)
    # supports of different pieces must be disjoint at every sample
    disjoint = True
    vals = [pc.path.values for pc in pieces]
    for a in range(len(vals)):
        for b in range(a + 1, len(vals)):
            d = np.linalg.norm(vals[a][:, :, None, :] - vals[b][:, None, :, :], axis=-1)
            if d.min() <= zero_tol:
                disjoint = False
    return TangentModel(k0, out, worst, disjoint)


# ---------------------------------------------------------------------------
# Fourier expansions


@dataclass
class FourierPiece:
    q_j: int
    multiplicity: int
    a: np.ndarray  # (l_max + 1, n); a[0] is the constant coefficient
    b: np.ndarray  # (l_max + 1, n); b[0] = 0


@dataclass
class FourierTrace:
    """Coefficients of gamma_j(phi) = a0/2 + sum_l a_l cos(l phi) + b_l sin(l phi), scaled to radius 1."""

    radius: float
    pieces: list

    def reconstruct(self, j: int, phi: np.ndarray, r: float | None = None) -> np.ndarray:
        r = self.radius if r is None else r
        pc = self.pieces[j]
        l = np.arange(pc.a.shape[0])
        w = r ** l
        C = np.cos(np.outer(phi, l)) * w
        S = np.sin(np.outer(phi, l)) * w
        C[:, 0] = 0.5
        return C @ pc.a + S @ pc.b

    def to_json(self) -> dict:
        return {
            "radius": self.radius,
            "pieces": [
                {"Q_j": p.q_j, "multiplicity": p.multiplicity, "a": p.a.tolist(), "b": p.b.tolist()}
                for p in self.pieces
            ],
        }


def fourier_coeffs(g: SampledQPath, r: float = 1.0, l_max: int | None = None) -> FourierTrace:
    """Fourier coefficients of the unrolled irreducible pieces of a trace sampled on the circle of radius r.

    gamma_j(phi) = h_j(Q_j phi) with h_j the unrolled piece; its coefficients
    are divided by r^l so that they refer to radius 1.
    """
    if not _uniform(g.params, TWO_PI):
        raise ValueError("Fourier coefficients need equally spaced samples")
    out = []
    for piece in decompose_circle(g):
        h = unroll(piece.path)
        y = h.values[:, 0, :]
        N = y.shape[0]
        c = np.fft.rfft(y, axis=0) / N
        top = (N - 1) // 2 if l_max is None else min(l_max, (N - 1) // 2)
        a = 2 * c.real[:top + 1]
        b = -2 * c.imag[:top + 1]
        b[0] = 0.0
        scale = float(r) ** np.arange(top + 1)
        out.append(FourierPiece(piece.path.q, piece.multiplicity, a / scale[:, None], b / scale[:, None]))
    return FourierTrace(float(r), out)


@dataclass
class FourierBounds:
    d_prime: float
    H: float
    d_upper: float


def fourier_bounds(ft: FourierTrace, r: float | None = None) -> FourierBounds:
    """D'(r), H(r) and the harmonic-competitor bound D_upper(r) from the coefficients."""
    r = ft.radius if r is None else float(r)
    dp = H = du = 0.0
    for p in ft.pieces:
        l = np.arange(1, p.a.shape[0])
        e = (p.a[1:] ** 2).sum(1) + (p.b[1:] ** 2).sum(1)
        k = p.multiplicity
        dp += k * 2 * math.pi * float((r ** (2 * l - 1) * l ** 2 / p.q_j * e).sum())
        H += k * math.pi * p.q_j * (r * float((p.a[0] ** 2).sum()) / 2 + float((r ** (2 * l + 1) * e).sum()))
        du += k * math.pi * float((r ** (2 * l) * l * e).sum())
    return FourierBounds(dp, H, du)


# ---------------------------------------------------------------------------
# decay exponent


def gamma_exponent(alpha, q: int) -> Fraction:
    """min over 1 <= k <= Q of (floor(alpha k) + 1 - alpha k) / k, in exact arithmetic."""
    a = Fraction(alpha).limit_denominator(10 ** 6) if isinstance(alpha, float) else Fraction(alpha)
    if q < 1:
        raise ValueError("Q must be positive")
    return min((math.floor(a * k) + 1 - a * k) / k for k in range(1, q + 1))


def mode_inequality_holds(alpha, gamma, q_j: int, l: int) -> bool:
    """gamma Q_j (l - alpha Q_j) <= (l - alpha Q_j)^2, exactly."""
    a, g = Fraction(alpha), Fraction(gamma)
    t = l - a * q_j
    return g * q_j * t <= t * t


@dataclass
class DecayCheck:
    lhs: float
    rhs: float
    residual: float  # rhs - lhs, nonnegative when the inequality holds
    modes_ok: bool
    saturating: list  # (Q_j, l) pairs with equality in the per-mode inequality


def verify_decay_inequality(ft: FourierTrace, alpha, gamma, r: float | None = None,
                            q: int | None = None) -> DecayCheck:
    """(2 alpha + gamma) D_upper <= r D'/2 + alpha (alpha + gamma) H / r, plus the per-mode check.

    Modes are checked for every Q_j <= Q and l <= ceil(2 alpha Q + gamma Q) + 1;
    beyond that (l - alpha Q_j)^2 grows faster than the left side.
    """
    r = ft.radius if r is None else float(r)
    q = max(p.q_j for p in ft.pieces) if q is None else q
    a, g = Fraction(alpha), Fraction(gamma)
    fb = fourier_bounds(ft, r)
    af, gf = float(a), float(g)
    lhs = (2 * af + gf) * fb.d_upper
    rhs = r * fb.d_prime / 2 + af * (af + gf) * fb.H / r
    l_top = math.ceil(2 * a * q + g * q) + 1
    ok = True
    sat = []
    for qj in range(1, q + 1):
        for l in range(1, l_top + 1):
            if not mode_inequality_holds(a, g, qj, l):
                ok = False
            t = l - a * qj
            if g * qj * t == t * t:
                sat.append((qj, l))
    return DecayCheck(lhs, rhs, rhs - lhs, ok, sat)
