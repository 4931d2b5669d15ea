"""Alternating minimisation of the discrete Dirichlet energy with fixed boundary values."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..aq_core import DimensionError, best_permutations
from ..io import csv_rows
from ..selection import TWO_PI, SampledQPath
from .mesh import Mesh, cot_laplacian
from .qfunction import QFunction, energy, match_edges, relax_values

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITERS = 500


@dataclass
class SolveOptions:
    tol: float = DEFAULT_TOL
    max_iters: int = DEFAULT_MAX_ITERS
    inits: tuple = ("cone", "jitter")
    seed: int = 0
    jitter: float = 0.05


@dataclass
class SolveReport:
    energy_history: list = field(default_factory=list)
    final_energy: float = math.nan
    iterations: int = 0
    converged: bool = False
    residuals: list = field(default_factory=list)
    start: str = ""
    start_energies: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)

    def history_csv(self) -> str:
        rows = ((i, float(e), float(self.residuals[i]) if i < len(self.residuals) else None)
                for i, e in enumerate(self.energy_history))
        return csv_rows(["iteration", "energy", "residual"], rows)


def interpolate_trace(g: SampledQPath, phi: np.ndarray) -> np.ndarray:
    """Values of a circle trace at arbitrary angles, by interpolation along optimal matchings.

    Returns an array of shape (len(phi), q, n).
    """
    phi = np.mod(np.asarray(phi, dtype=float), TWO_PI)
    params = g.params
    k = len(params)
    nxt = np.roll(np.arange(k), -1)
    perms, _ = best_permutations(g.values, g.values[nxt])
    idx = np.searchsorted(params, phi, side="right") - 1
    idx = np.mod(idx, k)
    start = params[idx]
    stop = np.where(idx == k - 1, params[0] + TWO_PI, params[np.minimum(idx + 1, k - 1)])
    span = stop - start
    t = np.mod(phi - start, TWO_PI) / span
    t = np.clip(t, 0.0, 1.0)
    A = g.values[idx]
    B = np.take_along_axis(g.values[nxt[idx]], perms[idx][:, :, None], axis=1)
    return (1 - t)[:, None, None] * A + t[:, None, None] * B


def boundary_angles(mesh: Mesh) -> np.ndarray:
    xy = mesh.vertices[mesh.boundary]
    return np.mod(np.arctan2(xy[:, 1], xy[:, 0]), TWO_PI)


def _check_boundary(mesh: Mesh, g: SampledQPath):
    if g.topology != "circle":
        raise ValueError("boundary trace must be a circle path")
    if len(g) != len(mesh.boundary):
        raise DimensionError(f"boundary trace has {len(g)} samples but the mesh boundary has {len(mesh.boundary)}")
    ang = boundary_angles(mesh)
    gap = np.abs(np.angle(np.exp(1j * (ang - g.params))))
    if gap.max() > 1e-6:
        raise ValueError("boundary trace angles do not match the mesh boundary vertices")


def cone_init(mesh: Mesh, g: SampledQPath) -> np.ndarray:
    """Radial competitor v + |x| (g(x/|x|) - v), v the mean barycenter of the trace."""
    V = mesh.vertices
    R = float(np.linalg.norm(V[mesh.boundary], axis=1).mean())
    v = g.values.mean(axis=(0, 1))
    rad = np.linalg.norm(V, axis=1) / R
    phi = np.arctan2(V[:, 1], V[:, 0])
    vals = interpolate_trace(g, phi)
    out = v + rad[:, None, None] * (vals - v)
    out[mesh.boundary] = g.values
    return out


def embedding_init(mesh: Mesh, g: SampledQPath, seed: int = 0) -> np.ndarray:
    """Harmonic extension of xi(g) coordinatewise, pulled back vertex by vertex with rho."""
    from scipy.sparse.linalg import spsolve

    from ..embedding import build_lambda, rho, xi_many

    basis = build_lambda(g.n, g.q, seed=seed)
    Y = np.zeros((mesh.n_vertices, basis.N))
    Y[mesh.boundary] = xi_many(g.values, basis)
    L = cot_laplacian(mesh)
    mask = mesh.boundary_mask
    free = np.nonzero(~mask)[0]
    fixd = np.nonzero(mask)[0]
    A = L[free][:, free].tocsc()
    Y[free] = spsolve(A, -(L[free][:, fixd] @ Y[fixd])).reshape(len(free), -1)
    out = np.empty((mesh.n_vertices, g.q, g.n))
    out[mesh.boundary] = g.values
    for v in free:
        out[v] = rho(Y[v], basis, n_starts=4, seed=seed).points
    return out


def descend(f: QFunction, fixed: np.ndarray, tol: float = DEFAULT_TOL,
            max_iters: int = DEFAULT_MAX_ITERS) -> tuple[QFunction, SolveReport]:
    """Alternate optimal edge matching and lifted harmonic relaxation from ``f``."""
    report = SolveReport()
    f = match_edges(f)
    e_prev = energy(f)
    report.energy_history.append(e_prev)
    report.residuals.append(0.0)
    for it in range(1, max_iters + 1):
        f, resid = relax_values(f, fixed)
        f = match_edges(f)
        e = energy(f)
        report.energy_history.append(e)
        report.residuals.append(resid)
        report.iterations = it
        if e_prev - e <= tol * max(e_prev, 1e-300):
            report.converged = True
            break
        e_prev = e
    report.final_energy = report.energy_history[-1]
    return f, report


def minimize(boundary: SampledQPath, mesh: Mesh, init: QFunction | None = None,
             options: SolveOptions | None = None) -> tuple[QFunction, SolveReport]:
    """Discrete Dirichlet minimiser with the given boundary trace.

    Runs the alternating descent from each requested initialisation and
    keeps the lowest final energy (ties: first start).
    """
    opts = options or SolveOptions()
    _check_boundary(mesh, boundary)
    q, n = boundary.q, boundary.n
    mask = mesh.boundary_mask

    flat = boundary.values.reshape(-1, n)
    if np.all(flat == flat[0]):
        vals = np.broadcast_to(flat[0], (mesh.n_vertices, q, n)).copy()
        f = QFunction.identity_matched(mesh, vals)
        return f, SolveReport([0.0], 0.0, 0, True, [0.0], "constant", {"constant": 0.0})

    starts: list[tuple[str, np.ndarray]] = []
    if init is not None:
        vals = init.values.copy()
        vals[mesh.boundary] = boundary.values
        starts.append(("given", vals))
    rng = np.random.default_rng(opts.seed)
    cone = None
    for name in opts.inits:
        if name == "cone":
            cone = cone_init(mesh, boundary) if cone is None else cone
            starts.append(("cone", cone))
        elif name == "jitter":
            cone = cone_init(mesh, boundary) if cone is None else cone
            scale = float(np.abs(boundary.values - boundary.values.mean(axis=(0, 1))).max())
            noisy = cone + opts.jitter * scale * rng.standard_normal(cone.shape)
            noisy[mesh.boundary] = boundary.values
            starts.append(("jitter", noisy))
        elif name == "embedding":
            starts.append(("embedding", embedding_init(mesh, boundary, seed=opts.seed)))
        else:
            raise ValueError(f"unknown initialisation {name!r}")

    best = None
    energies = {}
    for name, vals in starts:
        f0 = QFunction.identity_matched(mesh, vals)
        f, rep = descend(f0, mask, opts.tol, opts.max_iters)
        energies[name] = rep.final_energy
        logger.debug("start %s: energy %.12g after %d iterations", name, rep.final_energy, rep.iterations)
        if best is None or rep.final_energy < best[1].final_energy:
            rep.start = name
            best = (f, rep)
    f, rep = best
    rep.start_energies = energies
    return f, rep
