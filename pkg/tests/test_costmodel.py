import pytest
from hypothesis import given
from hypothesis import strategies as st

from proattn.costmodel import CostQuery, cost_rows, measured_macs, measured_ratio, op_count


def test_op_count_examples():
    assert op_count(CostQuery("pro", 64, 8, 3)) == 7 * 64 * 64 * 8 == 229376
    assert op_count(CostQuery("vanilla", 1, 1)) == 2
    assert op_count(CostQuery("kde", 3, 5)) == 2 * 9 * 5
    # (2 + 3K) N^2 D + 2K N^3 with N=4, D=2, K=1
    assert op_count(CostQuery("rkde", 4, 2, 1)) == 5 * 16 * 2 + 2 * 64 == 288


@given(st.integers(1, 300), st.integers(1, 300), st.integers(0, 50))
def test_pro_minus_vanilla(N, D, K):
    diff = op_count(CostQuery("pro", N, D, K)) - op_count(CostQuery("vanilla", N, D))
    assert diff == (2 * K - 1) * N * N * D


def test_invalid_queries():
    for args in (("bogus", 2, 2, 1), ("pro", 0, 2, 1), ("pro", 2, 2, -1)):
        with pytest.raises(ValueError):
            CostQuery(*args)


def test_counter_model():
    N, D = 16, 4
    n2d = N * N * D
    assert measured_macs("vanilla", N, D).macs == 2 * n2d
    for K in range(5):
        assert measured_macs("pro", N, D, K).macs == (2 + 2 * K) * n2d


def test_counter_slope_is_exact():
    N, D = 20, 3
    macs = [measured_macs("pro", N, D, K).macs for K in range(1, 6)]
    assert all(b - a == 2 * N * N * D for a, b in zip(macs, macs[1:]))


def test_zero_step_ratio_is_one():
    assert measured_ratio(32, 8, 0) == 1.0


def test_cost_rows():
    assert cost_rows("rkde", 4, 2, 1) == [["rkde", 4, 2, 1, 288, ""]]
    assert cost_rows("pro", 8, 2, 1) == [["pro", 8, 2, 1, 3 * 128, 4 * 128]]
