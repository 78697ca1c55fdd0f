import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from martdim import integrand as itg
from martdim.errors import DimensionMismatch, InvalidArgument
from martdim.ito import ito_integrate
from martdim.rank_dim import (COVARIATION, INTEGRAND, RankTolerance, batch_rank, covariation_rank,
                              estimate_dimension, numerical_rank, rank_equality_check)


class TestNumericalRank:
    def test_zero(self):
        assert numerical_rank(np.zeros((3, 2))) == 0

    def test_unit_projector(self):
        u = np.array([1.0, 2.0, -2.0]) / 3.0
        assert numerical_rank(np.outer(u, u)) == 1

    def test_threshold_rule(self):
        # tau = max(2, 2) * 1 * 1e-10 = 2e-10
        assert numerical_rank(np.diag([1.0, 1e-14])) == 1
        assert numerical_rank(np.diag([1.0, 3e-10])) == 2
        assert numerical_rank(np.diag([1.0, 1e-10])) == 1

    def test_custom_tolerance(self):
        assert numerical_rank(np.diag([1.0, 1e-6]), RankTolerance(1e-5)) == 1

    def test_non_finite(self):
        with pytest.raises(InvalidArgument):
            numerical_rank([[np.nan, 0.0]])

    def test_row_vector_shortcut_matches_svd(self):
        A = np.random.default_rng(0).standard_normal((1000, 1, 3))
        A[::7] = 0.0
        assert np.array_equal(batch_rank(A), (np.linalg.norm(A, axis=(-2, -1)) > 0).astype(int))

    @given(arrays(np.float64, (3, 4), elements=st.floats(-10, 10)),
           st.floats(1e-6, 1e6))
    @settings(max_examples=100, deadline=None)
    def test_scale_invariance(self, A, c):
        assert numerical_rank(c * A) == numerical_rank(A)

    @given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 4), st.integers(0, 2**32 - 1))
    @settings(max_examples=100, deadline=None)
    def test_constructed_rank(self, n, d, k, seed):
        k = min(k, n, d)
        rng = np.random.default_rng(seed)
        A = rng.standard_normal((n, k)) @ rng.standard_normal((k, d))
        assert numerical_rank(A) == k

    @given(st.integers(0, 3), st.integers(0, 2**32 - 1))
    @settings(max_examples=100, deadline=None)
    def test_covariation_basis_agrees(self, k, seed):
        # agreement is guaranteed away from the covariation floor, i.e. for
        # well-separated singular values
        rng = np.random.default_rng(seed)
        U = np.linalg.qr(rng.standard_normal((3, 3)))[0][:, :k]
        V = np.linalg.qr(rng.standard_normal((4, 4)))[0][:k]
        A = (U * rng.uniform(1e-3, 1e3, k)) @ V
        B = A @ A.T
        assert covariation_rank(B, source_shape=(3, 4)) == batch_rank(A) == k

    def test_covariation_floor_drops_tiny_directions(self):
        A = np.diag([1.0, 1e-8])
        assert batch_rank(A) == 2
        assert covariation_rank(A @ A.T, source_shape=(2, 2)) == 1


class TestEstimateDimension:
    def test_rank_one_constant(self, Z2):
        rep = estimate_dimension(ito_integrate(itg.constant([[1.0, 0.0], [0.0, 0.0]]), Z2))
        assert (rep.k_hat, rep.fraction) == (1, 1.0)

    def test_full_rank(self, Z2):
        X = ito_integrate(itg.constant(np.eye(2) / np.sqrt(2)), Z2)
        for basis in (INTEGRAND, COVARIATION):
            assert estimate_dimension(X, basis=basis).k_hat == 2

    def test_z2_dz1_deficiency_is_z2_zero(self, Z2):
        rep = estimate_dimension(ito_integrate(itg.z2_dz1(), Z2))
        assert rep.k_hat == 1
        z2 = Z2.values[:, :-1, 1]
        assert np.array_equal(rep.ranks == 0, z2 == 0)
        assert rep.deficient_fraction == pytest.approx(1 / Z2.grid.N)
        assert rep.per_step_histogram[0] == [Z2.M, 0]

    def test_flagged_when_rank_changes_on_positive_measure(self, Z2):
        vanish = itg.history(1, 2, lambda w: np.where(
            (w.t < 0.5)[None, :, None, None], np.array([[1.0, 0.0]]), 0.0), name="off_after_half")
        rep = estimate_dimension(ito_integrate(vanish, Z2))
        assert rep.flagged
        assert set(rep.histogram) == {0, 1}
        js = rep.to_json()
        assert js["flagged"] and js["basis"] == "integrand"

    def test_unknown_basis(self, Z2):
        with pytest.raises(InvalidArgument):
            estimate_dimension(ito_integrate(itg.z2_dz1(), Z2), basis="other")


class TestRankEquality:
    def test_self(self, Z2):
        H = itg.swap_row().sample(Z2)
        assert rank_equality_check(H, H).fraction == 1.0

    def test_truncated_counterexample(self):
        H = np.broadcast_to(np.eye(2), (4, 5, 2, 2))
        K = np.broadcast_to(np.array([[1.0], [0.0]]), (4, 5, 2, 1))
        rep = rank_equality_check(H, K)
        assert rep.fraction == 0.0 and rep.flagged

    def test_lattice_mismatch(self):
        with pytest.raises(DimensionMismatch):
            rank_equality_check(np.zeros((2, 3, 1, 1)), np.zeros((2, 4, 1, 1)))
