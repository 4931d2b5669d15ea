"""Frequency function, variational identities, blow-ups and decay rates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..aq_core import PreconditionError, best_permutations
from ..dirichlet.mesh import Mesh, build_disk_mesh, from_triangles
from ..dirichlet.qfunction import QFunction, energy, match_edges, triangle_energies
from ..io import csv_rows
from .sampling import circle_points, evaluate, evaluate_with_gradients

H_SAMPLES = 512
# barycentric centroids of the m^2 congruent subtriangles, used to clip triangles by a disk
_CLIP_ORDER = 12


class DegenerateProfile(ValueError):
    """H vanishes at every radius: f is Q[[0]] near the center."""


class ZeroEnergyBall(ValueError):
    pass


def _subtriangle_centroids(m: int) -> np.ndarray:
    out = []
    for i in range(m):
        for j in range(m - i):
            out.append(((i + 1 / 3) / m, (j + 1 / 3) / m))
            if i + j < m - 1:
                out.append(((i + 2 / 3) / m, (j + 2 / 3) / m))
    uv = np.array(out)
    return np.column_stack([1 - uv.sum(1), uv])


_CLIP_BARY = _subtriangle_centroids(_CLIP_ORDER)


def disk_fractions(mesh: Mesh, center, r: float) -> np.ndarray:
    """Approximate area fraction of every triangle lying inside B_r(center)."""
    c = np.asarray(center, dtype=float)
    P = mesh.vertices[mesh.triangles]
    d = np.linalg.norm(P - c, axis=2)
    frac = np.zeros(len(P))
    inside = d.max(1) <= r
    frac[inside] = 1.0
    edge = np.linalg.norm(P - np.roll(P, 1, axis=1), axis=2).max(1)
    partial = ~inside & (d.min(1) - edge <= r)
    if partial.any():
        pts = np.einsum("sk,tkd->tsd", _CLIP_BARY, P[partial])
        frac[partial] = (np.linalg.norm(pts - c, axis=2) <= r).mean(1)
    return frac


def dirichlet_in_ball(f: QFunction, center, r: float, tri_e: np.ndarray | None = None) -> float:
    tri_e = triangle_energies(f) if tri_e is None else tri_e
    return float(tri_e @ disk_fractions(f.mesh, center, r))


def circle_h(f: QFunction, center, r: float, samples: int = H_SAMPLES) -> float:
    """Trapezoidal integral of |f|^2 = G(f, Q[[0]])^2 over the circle of radius r."""
    _, pts = circle_points(center, r, samples)
    vals = evaluate(f, pts)
    return float((vals ** 2).sum(axis=(1, 2)).sum() * 2 * math.pi * r / samples)


@dataclass
class FrequencyProfile:
    center: tuple
    radii: np.ndarray
    D: np.ndarray
    H: np.ndarray
    I: np.ndarray  # nan where H = 0

    def to_csv(self) -> str:
        rows = zip(self.radii.tolist(), self.D.tolist(), self.H.tolist(), self.I.tolist())
        return csv_rows(["r", "D", "H", "I"], rows)

    def to_json(self) -> dict:
        return {
            "center": list(self.center),
            "radii": self.radii.tolist(),
            "D": self.D.tolist(),
            "H": self.H.tolist(),
            "I": [None if math.isnan(x) else float(x) for x in self.I],
        }


def profile(f: QFunction, center=(0.0, 0.0), radii=None, samples: int = H_SAMPLES) -> FrequencyProfile:
    """D, H and I = r D / H of ``f`` around ``center``.

    D(r) sums triangle energies weighted by the area fraction inside B_r;
    H(r) integrates the squared norm on 512 circle samples, interpolating
    every sheet linearly inside its triangle.
    """
    radii = np.linspace(0.1, 0.9, 17) if radii is None else np.asarray(radii, dtype=float)
    if np.any(np.diff(radii) <= 0) or np.any(radii <= 0):
        raise ValueError("radii must be positive and increasing")
    tri_e = triangle_energies(f)
    D = np.array([dirichlet_in_ball(f, center, r, tri_e) for r in radii])
    H = np.array([circle_h(f, center, r, samples) for r in radii])
    if np.all(H == 0):
        raise DegenerateProfile("H vanishes at every radius; f is Q[[0]] around the center")
    with np.errstate(divide="ignore", invalid="ignore"):
        I = np.where(H > 0, radii * D / H, np.nan)
    return FrequencyProfile(tuple(float(x) for x in center), radii, D, H, I)


def check_monotonicity(p: FrequencyProfile, tol: float) -> tuple[bool, float]:
    """Whether I(r2) >= I(r1) - tol for all r2 > r1; also the worst drop max(I(r1) - I(r2))."""
    I = p.I[~np.isnan(p.I)]
    if I.size < 2:
        return True, 0.0
    running_max = np.maximum.accumulate(I)
    worst = float((running_max - I).max())
    return worst <= tol, worst


@dataclass
class IdentityResiduals:
    r: float
    cono: float
    perparti: float
    h_prime: float
    terms: dict = field(default_factory=dict)


def _rel(a: float, b: float, scale: float) -> float:
    if scale == 0:
        return 0.0 if a == b else math.inf
    return abs(a - b) / scale


def check_variational_identities(f: QFunction, center=(0.0, 0.0), r: float = 0.5,
                                 samples: int = H_SAMPLES, dr: float | None = None) -> IdentityResiduals:
    """Relative residuals of the three first-variation identities on the circle of radius r.

    In the plane these read 0 = r ∫|Df|^2 - 2r ∫ sum |d_nu f_i|^2,
    D(r) = ∫ sum <d_nu f_i, f_i> and H'(r) = H(r)/r + 2 D(r); each residual
    is divided by its dominant term. H' is a central difference over ``dr``
    (default: the mesh size).
    """
    c = np.asarray(center, dtype=float)
    phi, pts = circle_points(c, r, samples)
    vals, grads = evaluate_with_gradients(f, pts)
    nu = np.stack([np.cos(phi), np.sin(phi)], axis=1)
    dnu = np.einsum("mqnd,md->mqn", grads, nu)
    w = 2 * math.pi * r / samples
    E_circ = float((grads ** 2).sum() * w)
    N_circ = float((dnu ** 2).sum() * w)
    P_circ = float((dnu * vals).sum() * w)
    D = dirichlet_in_ball(f, c, r)
    H = circle_h(f, c, r, samples)
    dr = f.mesh.mesh_size if dr is None else dr
    Hp = (circle_h(f, c, r + dr, samples) - circle_h(f, c, r - dr, samples)) / (2 * dr)
    cono = _rel(r * E_circ, 2 * r * N_circ, r * E_circ)
    perparti = _rel(D, P_circ, max(abs(D), abs(P_circ)))
    hp = _rel(Hp, H / r + 2 * D, max(abs(Hp), abs(H / r + 2 * D)))
    terms = {"int_Df2": E_circ, "int_dnu2": N_circ, "int_dnu_f": P_circ, "D": D, "H": H, "H_prime": Hp}
    return IdentityResiduals(r, cono, perparti, hp, terms)


# ---------------------------------------------------------------------------
# stationarity


def bump(points: np.ndarray, radius: float) -> np.ndarray:
    s = (points ** 2).sum(-1) / radius ** 2
    return np.where(s < 1, (1 - s) ** 3, 0.0)


def _lipschitz_on_grid(X, support: float, m: int = 201) -> float:
    t = np.linspace(-support, support, m)
    g = np.stack(np.meshgrid(t, t, indexing="ij"), axis=-1)
    V = X(g)
    step = t[1] - t[0]
    dx = np.diff(V, axis=0)[:, :-1] / step
    dy = np.diff(V, axis=1)[:-1] / step
    J = np.stack([dx, dy], axis=-1)  # (m-1, m-1, 2, 2)
    return float(np.linalg.norm(J, ord=2, axis=(-2, -1)).max())


def random_inner_field(seed: int = 0, support: float = 0.8, modes: int = 3):
    """Smooth vector field vanishing outside the disk of radius ``support``, scaled to Lipschitz constant 1.

    The first variation of the energy is bounded by a multiple of
    Dir(f) sup|DX|, so the unit scaling makes derivative / energy
    comparable across fields.
    """
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((modes, modes, 2)) / (1 + np.arange(modes))[:, None, None]

    def raw(p):
        x, y = p[..., 0] / support, p[..., 1] / support
        out = np.zeros(p.shape)
        for a in range(modes):
            for b in range(modes):
                out += A[a, b] * (np.cos(a * x) * np.cos(b * y))[..., None]
        return bump(p, support)[..., None] * out

    scale = 1.0 / _lipschitz_on_grid(raw, support)

    def X(p):
        return scale * raw(p)

    return X


def random_outer_field(n: int, seed: int = 0, support: float = 0.8):
    """Map (x, u) -> bump(x) (A u + b), compactly supported in x."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    b = rng.standard_normal(n)

    def Y(p, u):
        return bump(p, support)[:, None, None] * (u @ A.T + b)

    return Y


@dataclass
class StationarityResult:
    kind: str
    derivatives: list
    derivative: float
    energy: float

    @property
    def relative(self) -> float:
        return abs(self.derivative) / self.energy if self.energy > 0 else abs(self.derivative)


def _deformed(f: QFunction, disp: np.ndarray) -> QFunction:
    m = f.mesh
    moved = from_triangles(m.vertices + disp, m.triangles, m.boundary)
    if not np.array_equal(moved.edges, m.edges):
        raise ValueError("deformation changed the mesh connectivity")
    return QFunction(moved, f.values, f.perms)


def verify_stationarity(f: QFunction, kind: str = "inner", test_field=None,
                        eps=(1e-3, 1e-4)) -> StationarityResult:
    """Central difference of the discrete energy along an inner or outer variation at 0.

    Inner variations move the mesh vertices by eps X(x) with values and
    matchings kept; outer variations replace every value u at x by
    u + eps Y(x, u).
    """
    f = match_edges(f)
    E0 = energy(f)
    V = f.mesh.vertices
    if kind == "inner":
        X = test_field or random_inner_field()
        disp = np.asarray(X(V), dtype=float)

        def at(e):
            return energy(_deformed(f, e * disp))
    elif kind == "outer":
        Y = test_field or random_outer_field(f.n)
        dv = np.asarray(Y(V, f.values), dtype=float)

        def at(e):
            return energy(f.with_values(f.values + e * dv))
    else:
        raise ValueError("kind must be 'inner' or 'outer'")
    ders = [(at(e) - at(-e)) / (2 * e) for e in eps]
    return StationarityResult(kind, ders, ders[-1], E0)


# ---------------------------------------------------------------------------
# blow-ups


def blow_up(f: QFunction, center=(0.0, 0.0), rho: float = 0.5, resolution: int = 32,
            tol: float | None = None) -> QFunction:
    """Rescaling x -> f(center + rho x) / sqrt(Dir) on a unit disk mesh, with unit discrete energy.

    Raises
    ------
    PreconditionError
        If f(center) is farther than tol * sup|f| from Q[[0]]. The default
        tol is 4 h^(1/Q), h the mesh size: discrete minimisers spread a
        branch point over the first ring of vertices, so the value at the
        center is only Q[[0]] up to that scale.
    ZeroEnergyBall
        If the resampled function has zero energy.
    """
    c = np.asarray(center, dtype=float)
    target = build_disk_mesh(1.0, resolution)
    vals = evaluate(f, c + rho * target.vertices)
    scale = float(np.sqrt((f.values ** 2).sum(axis=(1, 2))).max())
    tol = 4.0 * f.mesh.mesh_size ** (1.0 / f.q) if tol is None else tol
    at_center = float(np.sqrt((evaluate(f, c[None]) ** 2).sum()))
    if at_center > tol * max(scale, 1e-300):
        raise PreconditionError(f"f(center) is {at_center:.3g} away from Q[[0]]")
    g = match_edges(QFunction.identity_matched(target, vals))
    e = energy(g)
    if not e > 0:
        raise ZeroEnergyBall("zero energy in the blow-up ball")
    return match_edges(g.with_values(vals / math.sqrt(e)))


def blowup_distance(a: QFunction, b: QFunction, exclude_radius: float = 0.0) -> float:
    """Sup of G(a(x), b(x)) over vertices with |x| >= exclude_radius, both on the same mesh."""
    if a.mesh.n_vertices != b.mesh.n_vertices or not np.allclose(a.mesh.vertices, b.mesh.vertices):
        raise ValueError("blow-ups must live on the same mesh")
    keep = np.linalg.norm(a.mesh.vertices, axis=1) >= exclude_radius
    _, c = best_permutations(a.values[keep], b.values[keep])
    return float(np.sqrt(c.max()))


# ---------------------------------------------------------------------------
# decay rates


@dataclass
class RateFit:
    C: float
    gamma_hat: float
    H0: float
    D0: float
    converged: bool

    @property
    def ratio(self) -> float:
        return self.D0 / self.H0


def rate_check(p: FrequencyProfile, alpha: float, noise_floor: float = 1e-8) -> RateFit:
    """Fit I - alpha = C r^gamma and the limits H0, D0 of H/r^(2 alpha + 1), D/r^(2 alpha).

    Radii with I - alpha below ``noise_floor`` are dropped from the power
    fit; when fewer than two remain the profile is reported as converged and
    H0, D0 are plain averages. Otherwise H0 and D0 come from least squares
    in the basis (1, r^gamma_hat).
    """
    ok = ~np.isnan(p.I)
    r = p.radii[ok]
    x = p.I[ok] - alpha
    h = p.H[ok] / r ** (2 * alpha + 1)
    d = p.D[ok] / r ** (2 * alpha)
    sel = x > noise_floor
    if sel.sum() < 2 or sel.mean() < 0.5:
        return RateFit(0.0, math.nan, float(h.mean()), float(d.mean()), True)
    slope, icpt = np.polyfit(np.log(r[sel]), np.log(x[sel]), 1)
    gamma_hat = float(slope)
    if gamma_hat <= 0:
        return RateFit(float(math.exp(icpt)), gamma_hat, float(h.mean()), float(d.mean()), False)
    B = np.column_stack([np.ones_like(r), r ** gamma_hat])
    H0 = float(np.linalg.lstsq(B, h, rcond=None)[0][0])
    D0 = float(np.linalg.lstsq(B, d, rcond=None)[0][0])
    return RateFit(float(math.exp(icpt)), gamma_hat, H0, D0, False)
