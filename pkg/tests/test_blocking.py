import itertools

import pytest
from hypothesis import given, strategies as st

from sbpc.blocking import (
    BlockedSequence,
    BlockingError,
    BlockingPolicy,
    block_index,
    block_lengths,
    eq_block_index_absolute,
    expand,
    num_blocks,
    warm_start_tail,
)


def test_figure_values():
    pol = BlockingPolicy(20)
    assert num_blocks(0, 60, pol) == 3
    assert num_blocks(20, 60, pol) == 2
    assert num_blocks(59, 60, pol) == 1


def test_block_count_drops_only_at_multiples():
    pol = BlockingPolicy(20)
    counts = [num_blocks(k, 60, pol) for k in range(60)]
    assert counts == [3] * 20 + [2] * 20 + [1] * 20


def test_single_block_and_unit_blocks():
    assert block_lengths(0, 7, BlockingPolicy(7)) == (7,)
    assert block_lengths(0, 5, BlockingPolicy(1)) == (1,) * 5


def test_partition_grid():
    # exhaustive over a desk-scale grid; the acceptance module covers k_f <= 200
    for k_f in range(1, 61):
        for L in range(1, k_f + 1):
            pol = BlockingPolicy(L)
            for k in range(k_f):
                lens = block_lengths(k, k_f, pol)
                assert sum(lens) == k_f - k
                assert len(lens) == num_blocks(k, k_f, pol)
                assert 1 <= lens[0] <= L
                assert all(n == L for n in lens[1:])


def test_block_index_matches_absolute_alignment_when_L_divides_k_f():
    for L in (1, 2, 3, 5):
        k_f = 6 * L
        pol = BlockingPolicy(L)
        for k in range(k_f):
            for j in range(k_f - k):
                assert block_index(j, k, k_f, pol) == eq_block_index_absolute(j, k, L)


def test_absolute_alignment_overcounts_when_L_does_not_divide():
    # k_f=7, L=3, k=0: absolute alignment uses intervals [0,3),[3,6),[6,7) -> 3,
    # anchored blocks use lengths (1,3,3) -> also 3; at k=1 they differ
    k_f, L = 7, 3
    absolute = {eq_block_index_absolute(j, 1, L) for j in range(k_f - 1)}
    assert len(absolute) == 3
    assert num_blocks(1, k_f, BlockingPolicy(L)) == 2


def test_block_index_consistent_with_lengths():
    for k_f, L in itertools.product(range(1, 25), range(1, 8)):
        if L > k_f:
            continue
        pol = BlockingPolicy(L)
        for k in range(k_f):
            expected = [i + 1 for i, n in enumerate(block_lengths(k, k_f, pol)) for _ in range(n)]
            assert [block_index(j, k, k_f, pol) for j in range(k_f - k)] == expected


@pytest.mark.parametrize("L", [0, -2])
def test_invalid_L(L):
    with pytest.raises(BlockingError):
        BlockingPolicy(L)


def test_out_of_range_k():
    with pytest.raises(BlockingError):
        num_blocks(10, 10, BlockingPolicy(2))
    with pytest.raises(BlockingError):
        BlockingPolicy(11).validate(10)


def test_wrong_value_count():
    with pytest.raises(BlockingError):
        BlockedSequence((1.0, 2.0), 0, BlockingPolicy(2), 6)


@given(st.integers(1, 40), st.integers(1, 10), st.data())
def test_tail_reproduces_remaining_plan(k_f, L, data):
    L = min(L, k_f)
    for variant in ("shrinking", "constant"):
        pol = BlockingPolicy(L, variant)
        k = data.draw(st.integers(0, max(0, k_f - 2)))
        if k + 1 > k_f - 1:
            continue
        n = num_blocks(k, k_f, pol)
        values = tuple(data.draw(st.lists(st.integers(-3, 3), min_size=n, max_size=n)))
        seq = BlockedSequence(values, k, pol, k_f)
        tail = warm_start_tail(seq)
        assert expand(tail) == expand(seq)[1:]


def test_tail_example():
    pol = BlockingPolicy(2)
    seq = BlockedSequence((1, 0, -1), 0, pol, 6)
    t1 = warm_start_tail(seq)
    assert t1.values == (1, 0, -1) and t1.k_origin == 1
    t2 = warm_start_tail(t1)
    assert t2.values == (0, -1)


def test_tail_wrong_step():
    seq = BlockedSequence((1, 0), 0, BlockingPolicy(2), 4)
    with pytest.raises(BlockingError):
        warm_start_tail(seq, 2)


def test_constant_variant_keeps_count_until_horizon_binds():
    pol = BlockingPolicy(4, "constant")
    counts = [num_blocks(k, 12, pol) for k in range(12)]
    assert counts == [3] * 10 + [2, 1]
    for k in range(12):
        lens = block_lengths(k, 12, pol)
        assert sum(lens) == 12 - k and all(1 <= n <= 4 for n in lens)


def test_block_index_figure_examples():
    pol = BlockingPolicy(20)
    assert block_index(0, 0, 60, pol) == 1
    assert block_index(9, 10, 60, pol) == 1 and block_index(10, 10, 60, pol) == 2
    assert block_index(14, 25, 60, pol) == 1 and block_index(15, 25, 60, pol) == 2


def test_expand_examples():
    pol = BlockingPolicy(2)
    assert expand(BlockedSequence(("a", "b"), 0, pol, 4)) == ["a", "a", "b", "b"]
    assert expand(BlockedSequence(("a", "b"), 1, pol, 4)) == ["a", "b", "b"]
    assert expand(BlockedSequence(("a",), 0, BlockingPolicy(4), 4)) == ["a"] * 4
