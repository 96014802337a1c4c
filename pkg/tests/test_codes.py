import numpy as np
import pytest

from sca.codes import AmbiguatedCode, SparseCode, TernaryCode


def test_from_dense_round_trip():
    v = np.array([0.0, 1.5, 0.0, -2.0])
    c = SparseCode.from_dense(v)
    assert c.entries() == [(1, 1.5), (3, -2.0)]
    np.testing.assert_array_equal(c.to_dense(), v)
    assert c.support == {1, 3}


@pytest.mark.parametrize(
    "indices, values",
    [([1, 1], [1.0, 2.0]), ([2, 1], [1.0, 2.0]), ([0], [0.0]), ([5], [1.0]), ([0], [np.nan])],
)
def test_invalid_codes(indices, values):
    with pytest.raises(ValueError):
        SparseCode(4, indices, values)


def test_ternary_values():
    TernaryCode(3, [0, 2], [1.0, -1.0])
    with pytest.raises(ValueError):
        TernaryCode(3, [0], [0.5])


def test_equality_ignores_subclass():
    a = SparseCode(4, [1], [2.0])
    assert AmbiguatedCode(4, [1], [2.0], noise_count=0) == a
    assert SparseCode(4, [1], [np.nextafter(2.0, 3.0)]) != a


def test_immutable():
    c = SparseCode(4, [1], [2.0])
    with pytest.raises(ValueError):
        c.values[0] = 3.0
