import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adapart.errors import (
    DuplicateEntry,
    InvalidMatrix,
    MalformedHeader,
    MatrixFormatError,
    NegativeEntry,
    NonSquare,
)
from adapart.matrixio import (
    GeneratorSpec,
    as_matrix,
    block_diagonal_matrix,
    block_layout,
    generate,
    read_matrix_market,
    uniform_matrix,
    write_matrix_market,
)


def _write(tmp_path, text, name="m.mtx"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestAsMatrix:
    def test_returns_readonly_float(self):
        m = as_matrix([[1, 2], [3, 4]])
        assert m.dtype == np.float64
        assert not m.flags.writeable

    @pytest.mark.parametrize(
        "bad",
        [np.ones((2, 3)), np.ones(3), np.zeros((0, 0)), [[1, -1], [0, 1]], [[np.nan, 1], [1, 1]], [[np.inf]]],
    )
    def test_rejects_invalid(self, bad):
        with pytest.raises(InvalidMatrix):
            as_matrix(bad)

    def test_does_not_alias_input(self):
        a = np.eye(3)
        m = as_matrix(a)
        a[0, 0] = 5
        assert m[0, 0] == 1


class TestReadMatrixMarket:
    def test_identity_coordinate(self, tmp_path):
        path = _write(tmp_path, "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n2 2 1\n")
        np.testing.assert_array_equal(read_matrix_market(path), np.eye(2))

    def test_pattern_symmetric_mirrors(self, tmp_path):
        text = "%%MatrixMarket matrix coordinate pattern symmetric\n% comment\n3 3 2\n2 1\n3 1\n"
        m = read_matrix_market(_write(tmp_path, text))
        expected = np.zeros((3, 3))
        expected[1, 0] = expected[0, 1] = expected[2, 0] = expected[0, 2] = 1
        np.testing.assert_array_equal(m, expected)

    def test_upper_triangle_symmetric_accepted(self, tmp_path):
        text = "%%MatrixMarket matrix coordinate integer symmetric\n2 2 1\n1 2 3\n"
        np.testing.assert_array_equal(read_matrix_market(_write(tmp_path, text)), [[0, 3], [3, 0]])

    def test_negative_entry_names_line(self, tmp_path):
        text = "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n2 2 -0.5\n"
        with pytest.raises(NegativeEntry) as exc:
            read_matrix_market(_write(tmp_path, text))
        assert exc.value.line == 4
        assert "line 4" in str(exc.value)

    def test_array_general_is_column_major(self, tmp_path):
        text = "%%MatrixMarket matrix array real general\n2 2\n1\n3\n2\n4\n"
        np.testing.assert_array_equal(read_matrix_market(_write(tmp_path, text)), [[1, 2], [3, 4]])

    def test_array_symmetric(self, tmp_path):
        text = "%%MatrixMarket matrix array real symmetric\n2 2\n1\n2\n3\n"
        np.testing.assert_array_equal(read_matrix_market(_write(tmp_path, text)), [[1, 2], [2, 3]])

    @pytest.mark.parametrize(
        "header",
        ["%%MatrixMarket vector coordinate real general", "%MatrixMarket matrix coordinate real general",
         "%%MatrixMarket matrix coordinate complex general", "%%MatrixMarket matrix coordinate real hermitian"],
    )
    def test_malformed_header(self, tmp_path, header):
        with pytest.raises(MalformedHeader) as exc:
            read_matrix_market(_write(tmp_path, header + "\n1 1 1\n1 1 1\n"))
        assert exc.value.line == 1

    def test_non_square(self, tmp_path):
        text = "%%MatrixMarket matrix coordinate real general\n2 3 0\n"
        with pytest.raises(NonSquare) as exc:
            read_matrix_market(_write(tmp_path, text))
        assert exc.value.line == 2

    def test_duplicate(self, tmp_path):
        text = "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n1 1 2\n"
        with pytest.raises(DuplicateEntry) as exc:
            read_matrix_market(_write(tmp_path, text))
        assert exc.value.line == 4

    def test_wrong_entry_count(self, tmp_path):
        text = "%%MatrixMarket matrix coordinate real general\n2 2 3\n1 1 1\n"
        with pytest.raises(MatrixFormatError):
            read_matrix_market(_write(tmp_path, text))

    def test_index_out_of_range(self, tmp_path):
        text = "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1\n"
        with pytest.raises(MatrixFormatError) as exc:
            read_matrix_market(_write(tmp_path, text))
        assert exc.value.line == 3


class TestWriteMatrixMarket:
    def test_identity_round_trip(self, tmp_path):
        path = tmp_path / "eye.mtx"
        write_matrix_market(np.eye(3), path)
        np.testing.assert_array_equal(read_matrix_market(path), np.eye(3))

    def test_uniform_round_trip_exact(self, tmp_path):
        m = uniform_matrix(10, 7)
        path = tmp_path / "u.mtx"
        write_matrix_market(m, path)
        back = read_matrix_market(path)
        assert np.array_equal(back, m)

    def test_zero_matrix(self, tmp_path):
        path = tmp_path / "z.mtx"
        write_matrix_market(np.zeros((2, 2)), path)
        assert path.read_text().splitlines()[-1].split() == ["2", "2", "0"]
        np.testing.assert_array_equal(read_matrix_market(path), np.zeros((2, 2)))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 8), st.integers(0, 2**32), st.floats(0.0, 1.0))
    def test_round_trip_property(self, tmp_path_factory, n, seed, density):
        rng = np.random.default_rng(seed)
        m = rng.exponential(size=(n, n)) * (rng.random((n, n)) < density)
        path = tmp_path_factory.mktemp("rt") / "m.mtx"
        write_matrix_market(m, path)
        assert np.array_equal(read_matrix_market(path), m)


class TestGenerate:
    def test_block_4_2(self):
        m = block_diagonal_matrix(4, 2, seed=0)
        support = m > 0
        expected = np.zeros((4, 4), dtype=bool)
        expected[:2, :2] = expected[2:, 2:] = True
        assert support.sum() == 8
        np.testing.assert_array_equal(support, expected)

    def test_block_5_2(self):
        m = block_diagonal_matrix(5, 2, seed=0)
        assert (m > 0).sum() == 9
        assert block_layout(5, 2) == [(0, 2), (2, 2), (4, 1)]

    def test_deterministic(self):
        spec = GeneratorSpec("uniform", 3, 1)
        np.testing.assert_array_equal(generate(spec), generate(spec))

    def test_different_seeds_differ(self):
        assert not np.array_equal(uniform_matrix(3, 1), uniform_matrix(3, 2))

    def test_uniform_range(self):
        m = uniform_matrix(50, 3)
        assert m.min() >= 0 and m.max() < 1

    @pytest.mark.parametrize("kw", [dict(kind="block-diag", n=3, k=4), dict(kind="block-diag", n=3),
                                    dict(kind="uniform", n=0), dict(kind="other", n=2)])
    def test_invalid_spec(self, kw):
        with pytest.raises(ValueError):
            GeneratorSpec(**kw)

    def test_block_support_all_layouts(self):
        for n in range(1, 65):
            for k in range(1, n + 1):
                m = block_diagonal_matrix(n, k, seed=n * 100 + k)
                expected = np.zeros((n, n), dtype=bool)
                for start in range(0, n, k):
                    stop = min(start + k, n)
                    expected[start:stop, start:stop] = True
                # uniform draws are almost surely positive inside the blocks
                np.testing.assert_array_equal(m > 0, expected)
