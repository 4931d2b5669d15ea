import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qval.aq_core import DimensionError, best_permutations
from qval.extension import (GridQFunction, WhitneyCubes, boundary_lipschitz, grid_lipschitz,
                            homotopy_extend_square, interpolate_annulus, lipschitz_extend, pairwise_lipschitz,
                            rectangle_boundary, whitney_decompose)
from qval.selection import qth_root_trace


def random_boundary(rng, s, q, n, jump=False):
    """Lipschitz boundary values on rectangle_boundary(s, s): smooth closed curves per atom."""
    nodes = rectangle_boundary(s, s)
    t = 2 * math.pi * np.arange(len(nodes)) / len(nodes)
    vals = np.empty((len(nodes), q, n))
    for i in range(q):
        c = rng.normal(size=n) * (40.0 if jump and i == 0 else 1.0)
        a, b = rng.normal(size=n), rng.normal(size=n)
        vals[:, i] = c + np.outer(np.cos(t), a) + np.outer(np.sin(t), b)
    return nodes, vals


def G_to_point(V, P):
    return np.sqrt(((V - P) ** 2).sum(-1).sum(-1))


class TestHomotopy:
    def test_constant(self):
        s = 6
        b = np.tile([1.0, -2.0], (4 * s, 3, 1))
        out = homotopy_extend_square(b, s)
        assert out.shape == (s - 1, s - 1, 3, 2)
        assert np.all(out == b[0])

    def test_splits_far_clusters(self):
        rng = np.random.default_rng(0)
        nodes, b = random_boundary(rng, 6, 2, 2, jump=True)
        b[:, 0] = b[:, 0] * 0.01 + 1000.0
        out = homotopy_extend_square(b, 6)
        # each extended piece stays near its own boundary cluster
        near = np.linalg.norm(out - 1000.0, axis=-1) < 10
        assert np.all(near.sum(-1) == 1)

    def test_shape_check(self):
        with pytest.raises(DimensionError):
            homotopy_extend_square(np.zeros((5, 2, 1)), 3)

    @given(st.integers(0, 10 ** 6))
    def test_linf_bound(self, seed):
        rng = np.random.default_rng(seed)
        q, n, s = int(rng.integers(1, 4)), int(rng.integers(1, 3)), int(rng.integers(2, 9))
        nodes, b = random_boundary(rng, s, q, n, jump=bool(rng.integers(2)))
        out = homotopy_extend_square(b, s)
        for P in (b[0, 0], rng.normal(size=n), b[int(rng.integers(len(b))), int(rng.integers(q))]):
            inner = G_to_point(out.reshape(-1, q, n), P)
            bound = G_to_point(b, P).max()
            assert inner.max() <= 2 * q * bound

    @pytest.mark.parametrize("q", [1, 2, 3])
    def test_lipschitz_ratio(self, q):
        rng = np.random.default_rng(q)
        worst = 0.0
        for _ in range(20):
            s = 8
            nodes, b = random_boundary(rng, s, q, 2)
            lip_b = boundary_lipschitz(b, nodes)
            full = np.empty((s + 1, s + 1, q, 2))
            full[nodes[:, 0], nodes[:, 1]] = b
            full[1:s, 1:s] = homotopy_extend_square(b, s)
            g = GridQFunction((0.0, 0.0), 1.0, np.ones((s + 1, s + 1), bool), full)
            worst = max(worst, pairwise_lipschitz(g) / lip_b)
        assert worst <= 12 * q * q


class TestWhitney:
    def test_single_node(self):
        mask = np.zeros((33, 33), bool)
        mask[0, 0] = True
        cubes = whitney_decompose(mask.shape, mask)
        sides = {s for _, _, s in cubes.squares}
        assert len(sides) >= 4
        # sides grow with the distance to the origin
        far = max(cubes.squares, key=lambda c: c[0] + c[1])
        near = min(cubes.squares, key=lambda c: c[0] + c[1])
        assert far[2] > near[2]
        assert cubes.comparability(mask) <= cubes.c

    @given(st.integers(0, 10 ** 6), st.integers(1, 5))
    def test_dyadic_grid_constant(self, seed, k):
        rng = np.random.default_rng(seed)
        m = 2 ** k + 1
        mask = rng.random((m, m)) < 0.05
        mask[int(rng.integers(m)), int(rng.integers(m))] = True
        assert whitney_decompose((m, m), mask).comparability(mask) <= 5 / math.sqrt(2)

    def test_full_mask(self):
        mask = np.ones((9, 9), bool)
        assert len(whitney_decompose(mask.shape, mask)) == 0

    @given(st.integers(0, 10 ** 6))
    def test_cover_and_comparability(self, seed):
        rng = np.random.default_rng(seed)
        nx, ny = int(rng.integers(2, 24)), int(rng.integers(2, 24))
        mask = rng.random((nx, ny)) < rng.uniform(0.01, 0.3)
        mask[int(rng.integers(nx)), int(rng.integers(ny))] = True
        cubes = whitney_decompose((nx, ny), mask)
        assert cubes.comparability(mask) <= cubes.c
        for i, j, s in cubes.squares:
            assert s <= cubes.c * np.sqrt(((np.argwhere(mask) - [i + s / 2, j + s / 2]) ** 2).sum(1).min())
        cover = np.zeros((nx - 1, ny - 1), int)
        for i, j, s in cubes.squares:
            cover[i:i + s, j:j + s] += 1
        full = mask[:-1, :-1] & mask[1:, :-1] & mask[:-1, 1:] & mask[1:, 1:]
        assert np.all(cover <= 1)
        assert np.all((cover == 1) | full)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            whitney_decompose((3, 3), np.ones((2, 2), bool))


class TestLipschitzExtend:
    def test_two_equal_nodes(self):
        mask = np.zeros((7, 5), bool)
        mask[0, 0] = mask[6, 4] = True
        vals = np.zeros((7, 5, 2, 2))
        vals[mask] = [[1.0, 2.0], [3.0, 4.0]]
        g = lipschitz_extend(GridQFunction((0.0, 0.0), 0.5, mask, vals))
        assert g.mask.all()
        assert np.all(np.sort(g.values, axis=2) == np.sort(vals[0, 0], axis=0))

    def test_left_edge_double_identity(self):
        s = 16
        mask = np.zeros((s + 1, s + 1), bool)
        mask[0, :] = True
        vals = np.zeros((s + 1, s + 1, 2, 2))
        y = np.arange(s + 1) / s
        vals[0, :, :, 1] = y[:, None]
        f = GridQFunction((0.0, 0.0), 1.0 / s, mask, vals)
        g = lipschitz_extend(f)
        lip_in = pairwise_lipschitz(f)
        assert lip_in == pytest.approx(math.sqrt(2))
        # regression constant for the two-sheet edge datum
        assert grid_lipschitz(g) <= 2.0 * lip_in

    @given(st.integers(0, 10 ** 6))
    def test_extension_property_and_lipschitz(self, seed):
        rng = np.random.default_rng(seed)
        q, n = int(rng.integers(1, 4)), int(rng.integers(1, 3))
        nx, ny = int(rng.integers(3, 14)), int(rng.integers(3, 14))
        mask = rng.random((nx, ny)) < 0.2
        mask[0, 0] = True
        A = rng.normal(size=(q, n, 2))
        c = rng.normal(size=(q, n))
        X = np.stack(np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij"), -1).astype(float)
        vals = c + np.einsum("qnk,ijk->ijqn", A, X)
        vals[~mask] = 0.0
        f = GridQFunction((0.0, 0.0), 1.0, mask, vals)
        g = lipschitz_extend(f)
        assert np.array_equal(g.values[mask], f.values[mask])
        lip = pairwise_lipschitz(f)
        if lip > 0:
            assert grid_lipschitz(g) <= 12 * q * q * 5 * lip

    def test_json(self):
        mask = np.zeros((3, 4), bool)
        mask[1, 2] = True
        vals = np.zeros((3, 4, 2, 1))
        vals[1, 2] = [[1.5], [-2.0]]
        f = GridQFunction((0.5, -1.0), 0.25, mask, vals)
        back = GridQFunction.from_json(f.to_json())
        assert np.array_equal(back.mask, mask) and np.array_equal(back.values[mask], vals[mask])
        assert back.origin == (0.5, -1.0) and back.spacing == 0.25


class TestAnnulus:
    def test_constant(self):
        g = qth_root_trace(1, 64)
        g.values[:] = [[2.0, 1.0]]
        out = interpolate_annulus(g, g, 1.0, 0.2)
        assert out.energy == 0 and out.constant == 0

    def test_constant_stable_in_eps(self):
        Cs = []
        for eps in (0.1, 0.2, 0.4):
            outer = qth_root_trace(2, 256, radius=1.0)
            inner = qth_root_trace(2, 256, radius=(1 - eps))
            out = interpolate_annulus(outer, inner, 1.0, eps)
            assert out.energy > 0
            Cs.append(out.constant)
        assert max(Cs) / min(Cs) < 1.5
        assert max(Cs) < 2.0

    def test_mismatch(self):
        with pytest.raises(DimensionError):
            interpolate_annulus(qth_root_trace(2, 16), qth_root_trace(3, 16), 1.0, 0.1)
