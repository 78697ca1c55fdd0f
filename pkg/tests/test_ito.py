import numpy as np
import pytest

from martdim import integrand as itg
from martdim.errors import DimensionMismatch, InvalidArgument
from martdim.ito import (accumulate, covariation_to_csv, instantaneous_covariation,
                         integrate_samples, ito_integrate, process_to_csv, realized_bracket,
                         realized_covariation, total_qv)
from martdim.paths import generate_brownian, make_grid, paths_from_values

from conftest import zscore


def test_identity_reproduces_driver_exactly(Z3):
    X = ito_integrate(itg.constant(np.eye(3)), Z3)
    assert np.array_equal(X.X, Z3.values)


def test_coordinate_row_is_coordinate(Z3):
    X = ito_integrate(itg.coordinate_row(1, 3), Z3)
    assert np.array_equal(X.X[..., 0], Z3.values[..., 0])


def test_z2_dz1_against_summation_oracle(Z2):
    X = ito_integrate(itg.z2_dz1(), Z2)
    z = Z2.values
    for m in range(Z2.M):
        total = 0.0
        for i in range(Z2.grid.N):
            total += z[m, i, 1] * (z[m, i + 1, 0] - z[m, i, 0])
        assert abs(X.X[m, -1, 0] - total) <= 1e-12 * max(1.0, abs(total))


def test_left_endpoint_rule(Z2):
    H = itg.swap_row()
    X = ito_integrate(H, Z2)
    dX = np.diff(X.X, axis=1)
    S = H.sample(Z2)
    assert np.allclose(dX[..., 0], np.einsum("mnd,mnd->mn", S[:, :, 0], Z2.increments),
                       rtol=0, atol=1e-15)
    assert np.all(X.X[:, 0] == 0)


def test_chunking_does_not_change_result(Z2):
    a = ito_integrate(itg.z2_dz1(), Z2, chunk=7)
    b = ito_integrate(itg.z2_dz1(), Z2, chunk=1000)
    assert np.array_equal(a.X, b.X)


def test_bilinearity(Z2):
    h1, h2 = itg.z2_dz1(), itg.sigmoid([[1.0, 2.0]])
    s = ito_integrate(h1 + h2, Z2).X
    parts = ito_integrate(h1, Z2).X + ito_integrate(h2, Z2).X
    assert np.max(np.abs(s - parts)) <= 1e-12 * max(1.0, np.max(np.abs(s)))


def test_dimension_mismatch(Z3):
    with pytest.raises(DimensionMismatch):
        ito_integrate(itg.z2_dz1(2), Z3)


def test_integrate_samples_shape_checked(Z2):
    with pytest.raises(DimensionMismatch):
        integrate_samples(np.zeros((Z2.M, 3, 1, 2)), Z2)


def test_uncached_process_resamples(Z2):
    X = ito_integrate(itg.z2_dz1(), Z2, cache=False)
    assert X.H_samples is None
    assert np.array_equal(X.integrand_samples(), itg.z2_dz1().sample(Z2))


class TestInstantaneous:
    def test_projection_trace_and_rank(self, Z3):
        P = itg.frame_projection(1, itg.random_frame(3, 5))
        B = instantaneous_covariation(ito_integrate(P, Z3)).B
        assert np.allclose(np.trace(B, axis1=-2, axis2=-1), 1.0, atol=1e-14)
        from martdim.rank_dim import covariation_rank
        assert np.all(covariation_rank(B[:1, :1]) == 1)

    def test_identity(self, Z2):
        B = instantaneous_covariation(ito_integrate(itg.constant(np.eye(2)), Z2)).B
        assert np.array_equal(B[0, 0], np.eye(2))

    def test_direct_product_oracle(self, Z2):
        H = itg.sigmoid([[1.0, -1.0], [2.0, 0.5], [0.0, 3.0]])
        est = instantaneous_covariation(ito_integrate(H, Z2))
        S = H.sample(Z2)
        oracle = np.einsum("mnad,mnbd->mnab", S, S)
        assert np.max(np.abs(est.B - oracle)) <= 1e-14 * max(1.0, np.max(np.abs(oracle)))
        assert est.symmetry_error() == 0.0
        assert est.min_eigenvalue_ratio() >= -1e-12


class TestRealized:
    def test_driver_window_n(self, Zstat):
        X = ito_integrate(itg.constant(np.eye(2)), Zstat)
        B = realized_covariation(X, Zstat.grid.N).B[:, 0]
        for i in range(2):
            for j in range(2):
                assert abs(zscore(B[:, i, j], float(i == j))) < 3

    def test_constant_increments(self):
        g = make_grid(1.0, 8)
        delta = np.array([0.3, -0.1])
        vals = (np.arange(9)[:, None] * delta)[None]
        X = ito_integrate(itg.constant(np.eye(2)), paths_from_values(g, vals))
        B = realized_covariation(X, 4).B
        assert np.allclose(B, np.outer(delta, delta) / g.dt, rtol=1e-13)

    def test_window_must_divide(self, Z2):
        X = ito_integrate(itg.constant(np.eye(2)), Z2)
        with pytest.raises(InvalidArgument):
            realized_covariation(X, 3)

    def test_complex_unit_qv(self, Zstat):
        X = ito_integrate(itg.constant(np.eye(2) / np.sqrt(2)), Zstat)
        assert abs(zscore(total_qv(X)[:, -1], 1.0)) < 3

    def test_realized_tracks_instantaneous(self):
        """Window-averaged realized density vs window-averaged H H^tr for int Z2 dZ1."""
        Z = generate_brownian(make_grid(1.0, 2**14), 2, 2000, seed=77)
        X = ito_integrate(itg.z2_dz1(), Z, cache=False)
        window = 2**10
        R = realized_covariation(X, window).B[..., 0, 0]
        z2 = Z.values[:, :-1, 1] ** 2
        inst = z2.reshape(Z.M, -1, window).mean(axis=-1)
        rel = np.abs(R.mean(axis=0) - inst.mean(axis=0)) / inst.mean(axis=0)
        assert np.all(rel <= 0.05)


class TestTotalQV:
    def test_driver(self, Zstat):
        X = ito_integrate(itg.coordinate_row(1, 2), Zstat)
        A = total_qv(X)
        assert np.all(np.diff(A, axis=1) >= 0) and np.all(A[:, 0] == 0)
        assert abs(zscore(A[:, -1], 1.0)) < 3

    def test_zero(self, Z2):
        X = ito_integrate(itg.constant(np.zeros((1, 2))), Z2)
        assert np.all(total_qv(X) == 0)

    def test_additive(self, Zstat):
        A = total_qv(ito_integrate(itg.constant(np.eye(2)), Zstat))
        assert abs(zscore(A[:, -1], 2.0)) < 3


def test_martingale_means(Zstat):
    for H in (itg.z2_dz1(), itg.swap_row(), itg.sign_z2(), itg.running_max_row(2)):
        X = ito_integrate(H, Zstat, cache=False)
        assert abs(zscore(X.X[:, -1, 0], 0.0)) < 3, H.name


def test_bracket_and_accumulate():
    dX = np.array([[[1.0], [2.0], [-1.0]]])
    X = accumulate(dX)
    assert X[0, :, 0].tolist() == [0.0, 1.0, 3.0, 2.0]
    assert realized_bracket(X)[0, -1, 0, 0] == 6.0


def test_csv_headers(Z2):
    X = ito_integrate(itg.constant(np.eye(2)), Z2)
    assert process_to_csv(X, 1).splitlines()[0] == "t,path,i,j,value"
    text = covariation_to_csv(instantaneous_covariation(X), 1)
    assert len(text.splitlines()) == 1 + Z2.grid.N * 4
