import numpy as np
import pytest

from martdim import integrand as itg
from martdim.errors import DimensionMismatch, InvalidArgument
from martdim.ito import instantaneous_covariation, ito_integrate
from martdim.rank_dim import batch_rank
from martdim.transforms import (BEURLING, TransformMatrix, beurling_annihilation_demo,
                                complex_process, homotopy_family, left_transform, right_transform)


@pytest.fixture
def X(Z2):
    return ito_integrate(itg.swap_row(), Z2)


@pytest.fixture
def Zdiag(Z2):
    return ito_integrate(itg.constant(np.eye(2)), Z2)


class TestTransformMatrix:
    def test_rejects_non_finite(self):
        with pytest.raises(InvalidArgument):
            TransformMatrix([[np.inf]])

    def test_imag_shape(self):
        with pytest.raises(InvalidArgument):
            TransformMatrix(np.eye(2), np.eye(3))

    def test_from_complex(self):
        B = TransformMatrix.from_complex([[1, 1j], [1j, -1]])
        assert B.is_complex and np.array_equal(B.imag, BEURLING.imag)
        assert not TransformMatrix.from_complex(np.eye(2)).is_complex


class TestLeft:
    def test_identity(self, X):
        assert np.array_equal(left_transform(np.eye(1), X).X, X.X)

    def test_zero(self, X):
        assert np.all(left_transform(np.zeros((1, 1)), X).X == 0)

    def test_random_matrix_times_path(self, Zdiag):
        A = np.random.default_rng(0).standard_normal((2, 2))
        Y = left_transform(A, Zdiag)
        assert np.max(np.abs(Y.X - Zdiag.X @ A.T)) <= 1e-12
        assert np.max(np.abs(Y.integrand_samples() - A @ Zdiag.integrand_samples())) <= 1e-15

    def test_linearity(self, Z3):
        X = ito_integrate(itg.graph_of(itg.z2_dz1(3)), Z3)
        rng = np.random.default_rng(1)
        A1, A2 = rng.standard_normal((2, 2, X.n))
        lhs = left_transform(A1 + A2, X).X
        rhs = left_transform(A1, X).X + left_transform(A2, X).X
        assert np.max(np.abs(lhs - rhs)) <= 1e-12

    def test_invertible_preserves_rank(self, Z3):
        X = ito_integrate(itg.graph_of(itg.z2_dz1(3)), Z3)
        A = np.random.default_rng(2).standard_normal((X.n, X.n))
        Y = left_transform(A, X)
        assert np.array_equal(batch_rank(Y.integrand_samples()), batch_rank(X.integrand_samples()))

    def test_mismatch(self, X):
        with pytest.raises(DimensionMismatch):
            left_transform(np.eye(2), X)


class TestRight:
    def test_identity(self, X):
        assert np.array_equal(right_transform(X, np.eye(2)).X, X.X)

    def test_integrand(self, X):
        B = np.array([[0.0, 2.0], [1.0, -1.0]])
        Q = right_transform(X, B)
        assert np.max(np.abs(Q.integrand_samples() - X.integrand_samples() @ B)) <= 1e-15

    def test_beurling_row(self, Z2):
        h1, h2 = 0.3 - 0.2j, 1.1 + 0.5j
        Q = right_transform(complex_process([h1, h2], Z2), BEURLING)
        H = Q.integrand_samples()[0, 0]
        got = H[0] + 1j * H[1]
        w = h1 + 1j * h2
        assert np.max(np.abs(got - np.array([w, 1j * w]))) <= 1e-15

    def test_commutes_with_left(self, Z2):
        X = ito_integrate(itg.graph_of(itg.z2_dz1()), Z2)
        rng = np.random.default_rng(4)
        A = rng.standard_normal((2, 3))
        B = rng.standard_normal((2, 2))
        a = right_transform(left_transform(A, X), B).integrand_samples()
        b = left_transform(A, right_transform(X, B)).integrand_samples()
        assert np.max(np.abs(a - b)) <= 1e-14

    def test_mismatch(self, X):
        with pytest.raises(DimensionMismatch):
            right_transform(X, np.eye(3))


class TestBeurling:
    @pytest.mark.parametrize("h", [(1, 0), (0, 1), (1, 1j), (1, -1j), (0.3 + 2j, -1.2)])
    def test_conformal_part_annihilated(self, Z2, h):
        rep = beurling_annihilation_demo(h, Z2)
        assert rep.passed and rep.annihilated

    def test_conformal_direction_fully_annihilated(self, Z2):
        assert beurling_annihilation_demo((1, 1j), Z2).fully_annihilated

    def test_real_direction_survives(self, Z2):
        rep = beurling_annihilation_demo((1, 0), Z2)
        assert rep.x1_transform_max > 0.1 and not rep.fully_annihilated

    def test_state_dependent_complex_process(self, Z2):
        from martdim.verify import _complex_state_process
        rep = beurling_annihilation_demo(_complex_state_process(Z2), Z2, chunk=7)
        assert rep.passed

    def test_chunking_is_invisible(self, Z2):
        a = beurling_annihilation_demo((0.5, 2j), Z2, chunk=5).to_json()
        b = beurling_annihilation_demo((0.5, 2j), Z2, chunk=1000).to_json()
        assert a == b

    def test_needs_d2(self, Z3):
        with pytest.raises(DimensionMismatch):
            beurling_annihilation_demo((1, 0, 0), Z3)


class TestHomotopy:
    @pytest.mark.parametrize("s, k", [(0.0, 1), (1.0, 1), (0.5, 2), (0.01, 2)])
    def test_dimension(self, Z2, s, k):
        _, rep = homotopy_family(s, Z2)
        assert rep.k_hat == k and rep.fraction == 1.0

    @pytest.mark.parametrize("s", [0.0, 0.3, 1.0])
    def test_trace_is_one(self, Z2, s):
        X, _ = homotopy_family(s, Z2)
        B = instantaneous_covariation(X).B
        assert np.max(np.abs(np.trace(B, axis1=-2, axis2=-1) - 1.0)) <= 1e-15

    def test_components(self, Z2):
        X, _ = homotopy_family(0.0, Z2)
        assert np.all(X.X[..., 0] == 0) and np.array_equal(X.X[..., 1], Z2.values[..., 1])

    @pytest.mark.parametrize("s", [-0.1, 1.5])
    def test_range(self, Z2, s):
        with pytest.raises(InvalidArgument):
            homotopy_family(s, Z2)


def test_beurling_constant_fast_path_matches_general(Z2):
    h = np.array([0.4 + 1j, -0.3 + 0.2j])
    rows = np.stack([h.real, h.imag])
    general = ito_integrate(itg.history(2, 2, lambda w: np.broadcast_to(
        rows, w.z.shape[:2] + rows.shape)), Z2)
    general.complex_pair = True
    a = beurling_annihilation_demo(h, Z2).to_json()
    b = beurling_annihilation_demo(general, Z2).to_json()
    for key in ("x_transform_max", "x1_transform_max", "scale"):
        assert a[key] == pytest.approx(b[key], rel=1e-12)
    assert a["passed"] and b["passed"]
