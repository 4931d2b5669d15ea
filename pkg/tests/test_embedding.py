import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qval.aq_core import DimensionError, QPoint, metric_g
from qval.embedding import (EmbeddingBasis, bilipschitz_bounds, build_gamma, build_lambda, bw_delta, rho,
                            verify_lambda, xi, xi_bw, xi_many)


class TestBuild:
    def test_planar_q1(self):
        b = build_lambda(2, 1)
        assert b.h == 3
        assert b.alpha == pytest.approx(math.sqrt(3) / 2, rel=1e-15)
        ang = np.degrees(np.arctan2(b.directions[:, 1], b.directions[:, 0]))
        assert np.allclose(np.diff(ang), 60.0)

    def test_planar_q2(self):
        b = build_lambda(2, 2)
        assert b.h == 8
        assert b.alpha == math.sin(math.pi / 32)

    @pytest.mark.parametrize("n, q", [(1, 3), (2, 1), (2, 2), (2, 3), (3, 1), (3, 2)])
    def test_passes_verification(self, n, q):
        assert verify_lambda(build_lambda(n, q), trials=20000, rng_seed=7).passed

    def test_verification_detects_large_alpha(self):
        b = build_lambda(2, 1)
        bad = EmbeddingBasis(2, 1, b.directions, math.sqrt(3) / 2 + 1e-3)
        res = verify_lambda(bad, trials=2000)
        assert not res.passed and res.witness is not None

    def test_zero_alpha_passes(self):
        b = build_lambda(2, 2)
        assert verify_lambda(EmbeddingBasis(2, 2, b.directions, 0.0), trials=500).passed

    def test_json_round_trip(self):
        b = build_lambda(2, 3)
        back = EmbeddingBasis.from_json(b.to_json())
        assert back.alpha == b.alpha and np.array_equal(back.directions, b.directions)

    def test_invalid(self):
        with pytest.raises(ValueError):
            build_lambda(0, 2)


class TestXi:
    def test_line_sorting(self):
        b = EmbeddingBasis(1, 2, np.ones((1, 1)), 1.0)
        T, S = QPoint([[3.0], [0.0]]), QPoint([[1.0], [2.0]])
        assert xi(T, b).tolist() == [0.0, 3.0]
        assert np.linalg.norm(xi(T, b) - xi(S, b)) == pytest.approx(metric_g(T, S)[0], rel=1e-15)

    def test_origin(self):
        b = build_lambda(2, 3)
        assert not xi(QPoint(np.zeros((3, 2))), b).any()

    def test_dimension_check(self):
        with pytest.raises(DimensionError):
            xi(QPoint(np.zeros((2, 3))), build_lambda(2, 2))

    def test_many_matches_single(self):
        b = build_lambda(2, 3)
        V = np.random.default_rng(0).normal(size=(5, 3, 2))
        assert np.array_equal(xi_many(V, b)[2], xi(QPoint(V[2]), b))

    @given(st.integers(0, 10 ** 6))
    def test_bilipschitz(self, seed):
        rng = np.random.default_rng(seed)
        q, n = int(rng.integers(1, 4)), int(rng.integers(1, 3))
        b = build_lambda(n, q)
        T, S = QPoint(rng.normal(size=(q, n))), QPoint(rng.normal(size=(q, n)))
        lo, g, hi = bilipschitz_bounds(T, S, b)
        assert lo <= g + 1e-9
        assert g <= hi + 1e-9


class TestXiBW:
    def test_frames_orthonormal(self):
        b = build_gamma(build_lambda(3, 2))
        for F in b.frames:
            assert np.allclose(F @ F.T, np.eye(3), atol=1e-14)

    def test_requires_frames(self):
        with pytest.raises(ValueError):
            xi_bw(QPoint(np.zeros((2, 2))), build_lambda(2, 2))

    def test_perturbed_pair(self):
        b = build_gamma(build_lambda(2, 2))
        T = QPoint([[0.0, 0.0], [1.0, 0.0]])
        S = QPoint(T.points + 1e-6 * np.array([[1.0, -0.3], [0.4, 0.8]]))
        d = np.linalg.norm(xi_bw(T, b) - xi_bw(S, b))
        assert abs(d - metric_g(T, S)[0]) < 1e-12

    def test_collapsed(self):
        b = build_gamma(build_lambda(2, 3))
        v = xi_bw(QPoint.repeated([0.3, -1.0], 3), b).reshape(-1, 3)
        assert np.all(v == v[:, :1])

    @given(st.integers(0, 10 ** 6))
    def test_global_contraction(self, seed):
        rng = np.random.default_rng(seed)
        q, n = int(rng.integers(1, 4)), int(rng.integers(1, 3))
        b = build_gamma(build_lambda(n, q))
        T, S = QPoint(rng.normal(size=(q, n))), QPoint(rng.normal(size=(q, n)))
        assert np.linalg.norm(xi_bw(T, b) - xi_bw(S, b)) <= metric_g(T, S)[0] + 1e-9


class TestRho:
    def test_left_inverse(self):
        b = build_lambda(2, 3)
        T = QPoint(np.random.default_rng(1).normal(size=(3, 2)))
        assert metric_g(rho(xi(T, b), b), T)[0] < 1e-8

    def test_improves_on_preimage(self):
        b = build_lambda(2, 2)
        rng = np.random.default_rng(2)
        for _ in range(20):
            T = QPoint(rng.normal(size=(2, 2)))
            p = xi(T, b) + 1e-2 * rng.normal(size=b.N)
            R = rho(p, b)
            assert np.linalg.norm(xi(R, b) - p) <= np.linalg.norm(xi(T, b) - p) + 1e-12

    def test_length_check(self):
        with pytest.raises(DimensionError):
            rho(np.zeros(3), build_lambda(2, 2))

    def test_lipschitz_regression(self):
        # empirical ratio on near-manifold pairs; recorded constant, not a theorem
        b = build_lambda(2, 2)
        rng = np.random.default_rng(5)
        worst = 0.0
        for _ in range(200):
            T = QPoint(rng.normal(size=(2, 2)))
            p1 = xi(T, b) + 1e-2 * rng.normal(size=b.N)
            p2 = p1 + 1e-2 * rng.normal(size=b.N)
            worst = max(worst, metric_g(rho(p1, b), rho(p2, b))[0] / np.linalg.norm(p1 - p2))
        assert worst < 30.0
