"""Lipschitz extension of Q-valued functions on planar grids.

A partially defined grid function is extended by covering the undefined
region with dyadic Whitney squares, giving square corners the value of a
nearest defined node, interpolating along square edges and filling each
square with a cone-like homotopy that splits off well separated squads
first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .aq_core import DimensionError, QPoint, best_permutations
from .selection import SampledQPath, squad_split

# comparability constant of the quadtree below, measured from square centers
WHITNEY_C = 5.0 / math.sqrt(2.0)


@dataclass(frozen=True, eq=False)
class GridQFunction:
    """Q-valued function on the nodes ``origin + spacing * (i, j)`` of an nx x ny grid.

    ``values[i, j]`` is meaningful only where ``mask[i, j]`` is set.
    """

    origin: tuple
    spacing: float
    mask: np.ndarray    # (nx, ny) bool
    values: np.ndarray  # (nx, ny, q, n)

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 4 or values.shape[:2] != mask.shape:
            raise DimensionError("values must have shape (nx, ny, q, n) matching the mask")
        if not mask.any():
            raise ValueError("at least one node must be defined")
        if not self.spacing > 0:
            raise ValueError("spacing must be positive")
        values = values.copy()
        values[~mask] = np.nan
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "origin", tuple(float(x) for x in self.origin))

    @property
    def shape(self) -> tuple[int, int]:
        return self.mask.shape

    @property
    def q(self) -> int:
        return self.values.shape[2]

    @property
    def n(self) -> int:
        return self.values.shape[3]

    def positions(self) -> np.ndarray:
        nx, ny = self.shape
        I, J = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
        return np.stack([self.origin[0] + self.spacing * I, self.origin[1] + self.spacing * J], axis=-1)

    def value(self, i: int, j: int) -> QPoint:
        if not self.mask[i, j]:
            raise KeyError(f"node ({i}, {j}) is undefined")
        return QPoint(self.values[i, j])

    def to_json(self) -> dict:
        vals = np.where(self.mask[:, :, None, None], self.values, 0.0)
        return {
            "origin": list(self.origin),
            "spacing": self.spacing,
            "q": self.q,
            "n": self.n,
            "mask": self.mask.astype(int).tolist(),
            "values": vals.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "GridQFunction":
        mask = np.asarray(obj["mask"], dtype=bool)
        vals = np.asarray(obj["values"], dtype=float).reshape(mask.shape + (int(obj["q"]), int(obj["n"])))
        return cls(tuple(obj["origin"]), float(obj["spacing"]), mask, vals)


@dataclass
class WhitneyCubes:
    """Dyadic squares ``(i, j, side)`` in node units, covering the undefined part of a grid."""

    squares: list = field(default_factory=list)
    c: float = WHITNEY_C

    def __len__(self):
        return len(self.squares)

    def comparability(self, mask: np.ndarray) -> float:
        """Worst ratio max(side/dist, dist/side), dist from the square center to the defined set."""
        pts = np.argwhere(mask).astype(float)
        worst = 1.0
        for i, j, s in self.squares:
            d = _center_distance(pts, i, j, s)
            worst = max(worst, s / d, d / s)
        return worst


def _center_distance(pts: np.ndarray, i: int, j: int, s: int) -> float:
    c = np.array([i + s / 2.0, j + s / 2.0])
    return float(np.sqrt(((pts - c) ** 2).sum(1).min()))


# ---------------------------------------------------------------------------
# Whitney decomposition


def whitney_decompose(shape: tuple[int, int], mask: np.ndarray) -> WhitneyCubes:
    """Quadtree cover of the cells of an nx x ny node grid not fully inside the defined set.

    A square is kept when sqrt(2) * side <= distance from its center to the
    defined nodes; otherwise it is split. Unit cells that still fail are kept
    as the base layer unless all four corners are defined. On square grids
    with 2^k cells per side every kept square satisfies
    side / c <= dist <= c * side with c = 5 / sqrt(2); elsewhere squares
    near the rectangle's edges can be smaller, and ``c`` records the worst
    ratio observed.
    """
    mask = np.asarray(mask, dtype=bool)
    nx, ny = shape
    if mask.shape != (nx, ny):
        raise DimensionError("mask does not match the grid shape")
    if not mask.any():
        raise ValueError("defined set must be nonempty")
    pts = np.argwhere(mask).astype(float)
    cells_x, cells_y = nx - 1, ny - 1
    size = 1
    while size < max(cells_x, cells_y, 1):
        size *= 2
    out: list[tuple[int, int, int]] = []
    stack = [(0, 0, size)]
    while stack:
        i, j, s = stack.pop()
        if i >= cells_x or j >= cells_y:
            continue
        inside = i + s <= cells_x and j + s <= cells_y
        if inside and math.sqrt(2.0) * s <= _center_distance(pts, i, j, s):
            out.append((i, j, s))
            continue
        if s == 1:
            if not (mask[i, j] and mask[i + 1, j] and mask[i, j + 1] and mask[i + 1, j + 1]):
                out.append((i, j, 1))
            continue
        h = s // 2
        stack.extend([(i + h, j + h, h), (i, j + h, h), (i + h, j, h), (i, j, h)])
    out.sort()
    cubes = WhitneyCubes(out)
    # squares clipped by a thin rectangle can be small for their distance; record the worst ratio
    cubes.c = max(WHITNEY_C, cubes.comparability(mask))
    return cubes


# ---------------------------------------------------------------------------
# cone-like homotopy on a rectangle


def rectangle_boundary(sx: int, sy: int) -> np.ndarray:
    """Boundary nodes of a sx x sy cell rectangle, counter-clockwise from the corner (0, 0)."""
    bottom = [(a, 0) for a in range(sx)]
    right = [(sx, b) for b in range(sy)]
    top = [(a, sy) for a in range(sx, 0, -1)]
    left = [(0, b) for b in range(sy, 0, -1)]
    return np.array(bottom + right + top + left, dtype=np.intp)


def _perimeter_coordinate(y: np.ndarray, sx: float, sy: float) -> np.ndarray:
    a, b = y[:, 0], y[:, 1]
    tol = 1e-9
    s = np.where(np.abs(b) <= tol, a,
                 np.where(np.abs(a - sx) <= tol, sx + b,
                          np.where(np.abs(b - sy) <= tol, sx + sy + (sx - a), 2 * sx + sy + (sy - b))))
    return np.mod(s, 2 * (sx + sy))


def boundary_lipschitz(values: np.ndarray, nodes: np.ndarray, spacing: float = 1.0) -> float:
    """Largest G(h(x), h(y)) / |x - y| over pairs of boundary nodes."""
    m = len(nodes)
    if m < 2:
        return 0.0
    ia, ib = np.triu_indices(m, 1)
    _, cost = best_permutations(values[ia], values[ib])
    dist = spacing * np.linalg.norm((nodes[ia] - nodes[ib]).astype(float), axis=1)
    return float((np.sqrt(cost) / dist).max())


def _cone(boundary: np.ndarray, sx: int, sy: int) -> np.ndarray:
    B, q, n = boundary.shape
    P = boundary[0, 0]
    perms, _ = best_permutations(boundary, np.roll(boundary, -1, axis=0))
    A, Bb = np.meshgrid(np.arange(1, sx), np.arange(1, sy), indexing="ij")
    d = np.stack([A - sx / 2.0, Bb - sy / 2.0], axis=-1).reshape(-1, 2)
    t = np.maximum(np.abs(d[:, 0]) / (sx / 2.0), np.abs(d[:, 1]) / (sy / 2.0))
    safe = np.where(t > 0, t, 1.0)
    y = np.array([sx / 2.0, sy / 2.0]) + d / safe[:, None]
    s = _perimeter_coordinate(y, sx, sy)
    k = np.minimum(np.floor(s).astype(int), B - 1)
    frac = s - k
    nxt = (k + 1) % B
    h = (1 - frac)[:, None, None] * boundary[k] + frac[:, None, None] * np.take_along_axis(
        boundary[nxt], perms[k][:, :, None], axis=1)
    vals = t[:, None, None] * h + (1 - t)[:, None, None] * P
    return vals.reshape(sx - 1, sy - 1, q, n)


def homotopy_extend_square(boundary, sides, spacing: float = 1.0) -> np.ndarray:
    """Fill the interior nodes of a rectangle from the values on its boundary nodes.

    Parameters
    ----------
    boundary : array (2 (sx + sy), q, n) or list of QPoint
        Values on ``rectangle_boundary(sx, sy)``.
    sides : int or (int, int)
        Number of cells along x and y.
    spacing : float
        Grid spacing, only used for the Lipschitz test of the splitting step.

    Returns
    -------
    ndarray of shape (sx - 1, sy - 1, q, n)

    Notes
    -----
    When the value at the first boundary node has a gap above
    3 (Q - 1) Lip diam, the boundary splits into two squads that are
    extended separately. Otherwise the interior is the cone
    t h(y) + (1 - t) P over the max-norm radius t, with y the radial
    projection onto the boundary and P the first atom at the first node.
    """
    sx, sy = (sides, sides) if np.isscalar(sides) else (int(sides[0]), int(sides[1]))
    if isinstance(boundary, (list, tuple)):
        boundary = np.stack([p.points for p in boundary])
    boundary = np.asarray(boundary, dtype=float)
    if boundary.ndim != 3 or boundary.shape[0] != 2 * (sx + sy):
        raise DimensionError(f"expected {2 * (sx + sy)} boundary values of shape (q, n)")
    if sx < 1 or sy < 1:
        raise ValueError("rectangle sides must be positive")
    q, n = boundary.shape[1:]
    if sx < 2 or sy < 2:
        return np.empty((max(sx - 1, 0), max(sy - 1, 0), q, n))
    nodes = rectangle_boundary(sx, sy)
    if q > 1:
        lip = boundary_lipschitz(boundary, nodes, spacing)
        diam = spacing * math.hypot(sx, sy)
        split = squad_split([(None, QPoint(v)) for v in boundary], 0, lip, diam)
        if split is not None:
            left, right = split
            L = homotopy_extend_square(np.stack([p.points for p in left]), (sx, sy), spacing)
            R = homotopy_extend_square(np.stack([p.points for p in right]), (sx, sy), spacing)
            return np.concatenate([L, R], axis=2)
    return _cone(boundary, sx, sy)


# ---------------------------------------------------------------------------
# extension on grids


def _fill_segments(values: np.ndarray, known: np.ndarray, line: list[tuple[int, int]]):
    """Interpolate along optimal matchings between consecutive known nodes of a grid line."""
    idx = [k for k, (i, j) in enumerate(line) if known[i, j]]
    for a, b in zip(idx[:-1], idx[1:]):
        if b - a < 2:
            continue
        A = values[line[a]]
        B = values[line[b]]
        perm, _ = best_permutations(A[None], B[None])
        Bm = B[perm[0]]
        for k in range(a + 1, b):
            t = (k - a) / (b - a)
            i, j = line[k]
            values[i, j] = (1 - t) * A + t * Bm
            known[i, j] = True


def lipschitz_extend(f: GridQFunction, cubes: WhitneyCubes | None = None) -> GridQFunction:
    """Extend a partially defined grid function to every node.

    Square corners take the value of a nearest defined node (ties: lowest
    flat index i * ny + j), square edges are interpolated between their
    known nodes, smaller squares first, and square interiors are filled by
    ``homotopy_extend_square``. Defined nodes keep their values exactly.
    """
    nx, ny = f.shape
    cubes = whitney_decompose(f.shape, f.mask) if cubes is None else cubes
    values = f.values.copy()
    known = f.mask.copy()
    defined = np.argwhere(f.mask)

    # 0-skeleton
    corners = sorted({(i + a * s, j + b * s) for i, j, s in cubes.squares for a in (0, 1) for b in (0, 1)})
    for i, j in corners:
        if known[i, j]:
            continue
        d2 = ((defined - np.array([i, j])) ** 2).sum(1)
        src = defined[int(np.argmin(d2))]  # argwhere is in flat-index order
        values[i, j] = f.values[src[0], src[1]]
        known[i, j] = True

    # 1-skeleton, smaller squares first
    for i, j, s in sorted(cubes.squares, key=lambda c: (c[2], c[0], c[1])):
        if s < 2:
            continue
        lines = [
            [(i + a, j) for a in range(s + 1)],
            [(i + a, j + s) for a in range(s + 1)],
            [(i, j + b) for b in range(s + 1)],
            [(i + s, j + b) for b in range(s + 1)],
        ]
        for line in lines:
            _fill_segments(values, known, line)

    # 2-cells
    for i, j, s in cubes.squares:
        if s < 2:
            continue
        nodes = rectangle_boundary(s, s) + np.array([i, j])
        bvals = values[nodes[:, 0], nodes[:, 1]]
        inner = homotopy_extend_square(bvals, s, f.spacing)
        block = values[i + 1:i + s, j + 1:j + s]
        fill = ~known[i + 1:i + s, j + 1:j + s]
        block[fill] = inner[fill]
        known[i + 1:i + s, j + 1:j + s] = True

    if not known.all():
        raise RuntimeError("Whitney cover left nodes undefined")
    values[f.mask] = f.values[f.mask]
    return GridQFunction(f.origin, f.spacing, np.ones((nx, ny), dtype=bool), values)


def grid_lipschitz(f: GridQFunction) -> float:
    """Largest G / spacing over grid edges with both ends defined."""
    out = 0.0
    V, M = f.values, f.mask
    for A, B, ok in ((V[:-1], V[1:], M[:-1] & M[1:]), (V[:, :-1], V[:, 1:], M[:, :-1] & M[:, 1:])):
        if ok.any():
            _, c = best_permutations(A[ok], B[ok])
            out = max(out, float(np.sqrt(c.max())) / f.spacing)
    return out


def pairwise_lipschitz(f: GridQFunction, chunk: int = 4096) -> float:
    """Largest G(f(x), f(y)) / |x - y| over all pairs of defined nodes."""
    idx = np.argwhere(f.mask)
    vals = f.values[f.mask]
    m = len(idx)
    if m < 2:
        return 0.0
    ia, ib = np.triu_indices(m, 1)
    out = 0.0
    for s in range(0, len(ia), chunk):
        a, b = ia[s:s + chunk], ib[s:s + chunk]
        _, c = best_permutations(vals[a], vals[b])
        d = f.spacing * np.linalg.norm((idx[a] - idx[b]).astype(float), axis=1)
        out = max(out, float((np.sqrt(c) / d).max()))
    return out


# ---------------------------------------------------------------------------
# annulus competitor


@dataclass
class AnnulusInterpolation:
    function: object  # dirichlet.QFunction on the annulus mesh
    energy: float
    bound_terms: tuple  # (eps r [Dir(g) + Dir(f)], ∫ G(g, f)^2 / (eps r))
    constant: float     # energy / sum of the bound terms


def _circle_dirichlet(g: SampledQPath, radius: float) -> float:
    V = g.values
    _, c = best_permutations(V, np.roll(V, -1, axis=0))
    gaps = np.diff(np.concatenate([g.params, [g.params[0] + 2 * math.pi]])) * radius
    return float((c / gaps).sum())


def interpolate_annulus(g_outer: SampledQPath, g_inner: SampledQPath, r: float, eps: float):
    """Competitor on the annulus r(1 - eps) < |x| < r with the two given traces.

    The annulus is cut into angular blocks about eps r wide; radial block
    sides interpolate between the traces along the optimal matching and
    every block is filled by ``homotopy_extend_square``.

    Returns
    -------
    AnnulusInterpolation
        The function, its discrete energy, the two terms of the bound
        C eps r [Dir(g) + Dir(f)] + (C / (eps r)) ∫ G(g(x), f((1 - eps) x))^2
        and the measured constant C (0 when both terms vanish).
    """
    from .dirichlet.mesh import build_annulus_mesh
    from .dirichlet.qfunction import QFunction, energy, match_edges

    if g_outer.topology != "circle" or g_inner.topology != "circle":
        raise ValueError("both traces must be circle paths")
    if (g_outer.q, g_outer.n) != (g_inner.q, g_inner.n) or len(g_outer) != len(g_inner):
        raise DimensionError("traces must share q, n and sample count")
    if not np.allclose(g_outer.params, g_inner.params, atol=1e-12, rtol=0):
        raise ValueError("traces must be sampled at the same angles")
    if not (0 < eps < 1) or not r > 0:
        raise ValueError("need r > 0 and eps in (0, 1)")
    k, q, n = g_outer.values.shape
    dtheta = 2 * math.pi / k
    layers = max(2, int(round(eps / dtheta)))
    nblocks = max(1, k // layers)
    cuts = np.linspace(0, k, nblocks + 1).round().astype(int)

    grid = np.empty((k, layers + 1, q, n))
    grid[:, 0] = g_inner.values
    grid[:, layers] = g_outer.values
    # radial sides at block cuts
    for c in cuts[:-1]:
        A, B = g_inner.values[c], g_outer.values[c]
        perm, _ = best_permutations(A[None], B[None])
        Bm = B[perm[0]]
        for l in range(1, layers):
            t = l / layers
            grid[c, l] = (1 - t) * A + t * Bm
    for a, b in zip(cuts[:-1], cuts[1:]):
        width = b - a
        cols = np.arange(a, b + 1) % k
        nodes = rectangle_boundary(width, layers)
        bvals = grid[cols[nodes[:, 0]], nodes[:, 1]]
        inner = homotopy_extend_square(bvals, (width, layers), 1.0)
        grid[cols[1:width], 1:layers] = inner

    mesh = build_annulus_mesh(r * (1 - eps), r, k, layers)
    vals = grid.transpose(1, 0, 2, 3).reshape(-1, q, n)
    f = match_edges(QFunction.identity_matched(mesh, vals))
    e = energy(f)
    _, gap = best_permutations(g_outer.values, g_inner.values)
    tangential = eps * r * (_circle_dirichlet(g_outer, r) + _circle_dirichlet(g_inner, r * (1 - eps)))
    radial = float(gap.sum() * dtheta * r) / (eps * r)
    total = tangential + radial
    C = e / total if total > 0 else 0.0
    return AnnulusInterpolation(f, e, (tangential, radial), C)
