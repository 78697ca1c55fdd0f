import numpy as np
import pytest
from scipy.special import ndtri

from martdim.errors import FormatError, InvalidArgument
from martdim.paths import (HEADER_SIZE, GAUSSIAN_TRANSFORM, decode_paths, generate_brownian,
                           load_paths, make_grid, paths_to_csv, regenerate, save_paths)

from conftest import zscore


class TestGrid:
    def test_four_steps(self):
        assert make_grid(1.0, 4).times.tolist() == [0.0, 0.25, 0.5, 0.75, 1.0]

    def test_single_step(self):
        assert make_grid(2.0, 1).times.tolist() == [0.0, 2.0]

    def test_spacing(self):
        g = make_grid(1.0, 2**12)
        assert g.dt == 2.0**-12
        assert np.allclose(np.diff(g.times), g.dt, rtol=0, atol=1e-15)
        assert g.times[0] == 0.0 and g.times[-1] == 1.0

    def test_awkward_horizon_ends_exactly(self):
        g = make_grid(0.3, 7)
        assert g.times[-1] == 0.3

    @pytest.mark.parametrize("T, N", [(0.0, 4), (-1.0, 4), (1.0, 0), (float("nan"), 3)])
    def test_invalid(self, T, N):
        with pytest.raises(InvalidArgument):
            make_grid(T, N)

    def test_index_of(self):
        g = make_grid(1.0, 8)
        assert g.index_of(0.25) == 2
        assert g.index_of(1.0) == 8
        with pytest.raises(InvalidArgument):
            g.index_of(1.5)


class TestGenerate:
    def test_starts_at_origin(self, Z3):
        assert np.all(Z3.values[:, 0, :] == 0.0)

    def test_matches_counter_stream_oracle(self):
        # independent reimplementation of the documented transform
        g = make_grid(1.0, 5)
        Z = generate_brownian(g, 2, 3, seed=99)
        for m in range(3):
            raw = np.random.Philox(key=np.array([99, m], dtype=np.uint64)).random_raw(10)
            u = ((raw >> np.uint64(11)).astype(float) + 0.5) / 2.0**53
            dz = ndtri(u).reshape(5, 2) * np.sqrt(0.2)
            assert np.array_equal(Z.increments[m], dz)
            assert np.array_equal(Z.values[m, 1:], np.cumsum(dz, axis=0))

    def test_reproducible(self, grid):
        a = generate_brownian(grid, 2, 20, seed=5)
        b = generate_brownian(grid, 2, 20, seed=5)
        assert a == b
        assert a != generate_brownian(grid, 2, 20, seed=6)

    def test_schedule_independent(self, grid):
        full = generate_brownian(grid, 2, 20, seed=5)
        block = generate_brownian(grid, 2, 20, seed=5, paths=range(7, 13))
        assert np.array_equal(block.values, full.values[7:13])
        threaded = generate_brownian(grid, 2, 20, seed=5, workers=3)
        assert threaded == full

    def test_values_read_only(self, Z2):
        with pytest.raises(ValueError):
            Z2.values[0, 0, 0] = 1.0

    @pytest.mark.parametrize("kw", [dict(d=0), dict(M=0), dict(seed=-1), dict(seed=2**64)])
    def test_invalid_arguments(self, grid, kw):
        args = dict(d=2, M=3, seed=1) | kw
        with pytest.raises(InvalidArgument):
            generate_brownian(grid, **args)

    def test_bad_block(self, grid):
        with pytest.raises(InvalidArgument):
            generate_brownian(grid, 1, 5, 1, paths=range(3, 9))


@pytest.fixture(scope="module")
def big():
    return generate_brownian(make_grid(1.0, 1000), 2, 10000, seed=31337)


class TestStatistics:
    """CLT oracles: Var(Z_T) = T, independent coordinates."""

    def test_terminal_mean(self, big):
        for j in range(2):
            assert abs(zscore(big.values[:, -1, j], 0.0)) < 3

    def test_terminal_covariance(self, big):
        zT = big.values[:, -1]
        for i in range(2):
            for j in range(2):
                assert abs(zscore(zT[:, i] * zT[:, j], float(i == j))) < 3

    def test_realized_qv(self, big):
        dZ = big.increments
        for i in range(2):
            for j in range(2):
                qv = np.sum(dZ[:, :, i] * dZ[:, :, j], axis=1)
                assert abs(zscore(qv, float(i == j))) < 3


class TestPersistence:
    def test_round_trip(self, Z2, tmp_path):
        f = save_paths(Z2, tmp_path / "z.mdbp")
        back = load_paths(f)
        assert back == Z2
        assert back.transform == GAUSSIAN_TRANSFORM
        assert np.array_equal(back.values.view(np.uint64), Z2.values.view(np.uint64))

    def test_regenerate_from_file(self, Z2, tmp_path):
        back = load_paths(save_paths(Z2, tmp_path / "z.mdbp"))
        assert regenerate(back) == Z2

    def test_derived_flag_survives(self, Z2, tmp_path):
        from martdim.paths import paths_from_values
        W = paths_from_values(Z2.grid, Z2.values[:, :, :1], seed=Z2.seed)
        back = load_paths(save_paths(W, tmp_path / "w.mdbp"))
        assert back.derived
        with pytest.raises(InvalidArgument):
            regenerate(back)

    def test_truncated_payload(self, Z2, tmp_path):
        blob = (tmp_path / "z.mdbp")
        save_paths(Z2, blob)
        data = blob.read_bytes()
        with pytest.raises(FormatError) as err:
            decode_paths(data[:-8])
        assert err.value.offset == len(data) - 8

    def test_header_declares_wrong_n(self, Z2, tmp_path):
        data = bytearray(save_paths(Z2, tmp_path / "z.mdbp").read_bytes())
        data[16:24] = (Z2.grid.N + 1).to_bytes(8, "little")
        with pytest.raises(FormatError, match="payload length"):
            decode_paths(bytes(data))

    def test_bad_magic_and_short_header(self, Z2, tmp_path):
        data = save_paths(Z2, tmp_path / "z.mdbp").read_bytes()
        with pytest.raises(FormatError) as err:
            decode_paths(b"XXXX" + data[4:])
        assert err.value.offset == 0
        with pytest.raises(FormatError):
            decode_paths(data[:HEADER_SIZE - 1])

    def test_unknown_version(self, Z2, tmp_path):
        data = bytearray(save_paths(Z2, tmp_path / "z.mdbp").read_bytes())
        data[4:6] = (9).to_bytes(2, "little")
        with pytest.raises(FormatError) as err:
            decode_paths(bytes(data))
        assert err.value.offset == 4

    def test_csv(self):
        Z = generate_brownian(make_grid(1.0, 2), 2, 3, seed=1)
        lines = paths_to_csv(Z, max_paths=1).splitlines()
        assert lines[0] == "t,path,coord,value"
        assert len(lines) == 1 + 3 * 2
        t, m, c, v = lines[-1].split(",")
        assert (float(t), int(m), int(c), float(v)) == (1.0, 0, 2, Z.values[0, 2, 1])
