"""Exact homogeneous Q-valued maps sampled on meshes, with their boundary traces."""

from __future__ import annotations

import math

import numpy as np

from ..aq_core import PreconditionError
from ..selection import TWO_PI, SampledQPath, qth_root_trace
from .mesh import Mesh
from .qfunction import QFunction


def _as_list(L, k):
    if isinstance(L, np.ndarray) and L.ndim == 2:
        L = [L]
    L = [np.asarray(x, dtype=float) for x in L]
    if isinstance(k, (int, np.integer)):
        k = [int(k)] * len(L)
    k = [int(x) for x in k]
    if len(k) != len(L):
        raise ValueError("one multiplicity per linear map is required")
    return L, k


def analytic_example(n_star: int, q_star: int, L, k=1, mesh: Mesh | None = None, k0: int = 0):
    """Sample k0 [[0]] + sum_j k_j sum_{z^q* = x} [[L_j z^n*]] on the vertices of ``mesh``.

    Points of the plane are complex numbers, ``z^n*`` is read as the row
    vector (Re, Im) and multiplied by the 2 x n matrix ``L_j``. Edge
    matchings follow angular continuation of the roots, so crossing the
    positive real axis advances the root label by one.

    Returns
    -------
    QFunction
        Exact values with continuation matchings.
    SampledQPath
        Circle trace on the mesh boundary loop.
    """
    if mesh is None:
        raise ValueError("a mesh is required")
    if n_star < 1 or q_star < 1 or math.gcd(n_star, q_star) != 1:
        raise PreconditionError("n_star and q_star must be positive and coprime")
    L, k = _as_list(L, k)
    n = L[0].shape[1]
    for Lj in L:
        if Lj.shape != (2, n):
            raise PreconditionError("every L_j must be a 2 x n matrix")
        if np.linalg.svd(Lj, compute_uv=False).min() <= 1e-12:
            raise PreconditionError("L_j must be injective")
    if k0 < 0 or any(x < 1 for x in k):
        raise PreconditionError("multiplicities must be positive")

    V = mesh.vertices
    r = np.hypot(V[:, 0], V[:, 1])
    phi = np.mod(np.arctan2(V[:, 1], V[:, 0]), TWO_PI)
    m = np.arange(q_star)
    ang = (phi[:, None] + TWO_PI * m[None, :]) / q_star * n_star
    mod = r[:, None] ** (n_star / q_star)
    z = np.stack([mod * np.cos(ang), mod * np.sin(ang)], axis=-1)  # (V, q*, 2)

    blocks = [np.zeros((len(V), k0, n))]
    for Lj, kj in zip(L, k):
        w = z @ Lj
        blocks.extend([w] * kj)
    values = np.concatenate(blocks, axis=1)
    q = values.shape[1]

    # continuation along each edge: label shift s = (phi_a + dphi - phi_b) / 2pi
    a, b = mesh.edges[:, 0], mesh.edges[:, 1]
    dphi = np.angle(np.exp(1j * (phi[b] - phi[a])))
    shift = np.rint((phi[a] + dphi - phi[b]) / TWO_PI).astype(int)
    shift[(r[a] == 0) | (r[b] == 0)] = 0
    root_perm = np.mod(m[None, :] + shift[:, None], q_star)  # (E, q*)
    perms = [np.tile(np.arange(k0), (len(a), 1))]
    offset = k0
    for _ in range(sum(k)):
        perms.append(offset + root_perm)
        offset += q_star
    perms = np.concatenate(perms, axis=1)
    assert perms.shape == (len(a), q)

    f = QFunction(mesh, values, perms)
    bnd = mesh.boundary
    order = np.argsort(phi[bnd], kind="stable")
    trace = SampledQPath(phi[bnd][order], values[bnd][order], "circle")
    return f, trace


def sqrt_boundary(mesh: Mesh) -> SampledQPath:
    """Trace of the square-root map on the boundary loop of a disk mesh."""
    return root_boundary(2, mesh)


def root_boundary(q: int, mesh: Mesh) -> SampledQPath:
    """Trace of x -> sum over z^q = x of [[z]] on the boundary loop of a disk mesh."""
    R = float(np.linalg.norm(mesh.vertices[mesh.boundary], axis=1).mean())
    return qth_root_trace(q, len(mesh.boundary), radius=R)


def harmonic_boundary(mesh: Mesh, q: int, func=None) -> SampledQPath:
    """Trace of q copies of a harmonic function, by default the real part of z + z^2/2."""
    if func is None:
        def func(x, y):
            return np.stack([x + 0.5 * (x * x - y * y)], axis=-1)
    R = float(np.linalg.norm(mesh.vertices[mesh.boundary], axis=1).mean())
    t = TWO_PI * np.arange(len(mesh.boundary)) / len(mesh.boundary)
    vals = np.asarray(func(R * np.cos(t), R * np.sin(t)), dtype=float)
    return SampledQPath(t, np.repeat(vals[:, None, :], q, axis=1), "circle")
