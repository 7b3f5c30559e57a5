import numpy as np
import pytest
from hypothesis import given, strategies as st

from bnn_ecg.bits import (
    WORD_BITS,
    PackedBitTensor,
    Tensor1D,
    mask_padding,
    n_words,
    pack_bits,
    padding_mask,
    unpack_bits,
    xnor_popcount_dot,
    xnor_popcount_matmul,
)
from bnn_ecg.errors import InvalidArgumentError

bipolar = st.lists(st.sampled_from([-1, 1]), min_size=0, max_size=4 * WORD_BITS + 3)


def test_pack_low_nibble():
    assert int(pack_bits([1, 1, -1, -1])[0]) == 0b0011


def test_all_ones_word():
    words = pack_bits(np.ones(64, dtype=int))
    assert words.shape == (1,)
    assert int(words[0]) == 2**64 - 1


def test_unpack_example():
    np.testing.assert_array_equal(unpack_bits(np.array([0b1010], dtype=np.uint64), 4), [-1, 1, -1, 1])


def test_unpack_zero_length():
    assert unpack_bits(np.array([7], dtype=np.uint64), 0).size == 0


def test_unpack_beyond_capacity():
    with pytest.raises(InvalidArgumentError):
        unpack_bits(np.zeros(1, dtype=np.uint64), 65)


def test_pack_rejects_non_bipolar():
    with pytest.raises(InvalidArgumentError):
        pack_bits([1, 0, -1])


def test_round_trip_random_n100(rng):
    for _ in range(1000):
        v = rng.choice([-1, 1], size=100)
        np.testing.assert_array_equal(unpack_bits(pack_bits(v), 100), v)


@given(bipolar)
def test_round_trip_all_alignments(v):
    v = np.array(v, dtype=int)
    words = pack_bits(v)
    assert words.size == n_words(len(v))
    np.testing.assert_array_equal(unpack_bits(words, len(v)), v)
    # padding bits stay zero
    np.testing.assert_array_equal(mask_padding(words, len(v)), words)


def test_round_trip_every_length():
    rng = np.random.default_rng(0)
    for n in range(0, 4 * WORD_BITS + 4):
        v = rng.choice([-1, 1], size=n)
        np.testing.assert_array_equal(unpack_bits(pack_bits(v), n), v)


def test_xnor_examples():
    a, b = pack_bits([1, 1, -1, -1]), pack_bits([1, -1, -1, 1])
    assert xnor_popcount_dot(a, b, 4) == 0
    v = np.random.default_rng(1).choice([-1, 1], 64)
    assert xnor_popcount_dot(pack_bits(v), pack_bits(v), 64) == 64


def test_xnor_matches_brute_force(rng):
    for _ in range(10_000):
        n = int(rng.integers(1, 513))
        a, b = rng.choice([-1, 1], n), rng.choice([-1, 1], n)
        expected = sum(int(x) * int(y) for x, y in zip(a, b)) if n < 16 else int(a @ b)
        assert xnor_popcount_dot(pack_bits(a), pack_bits(b), n) == expected


@given(st.data())
def test_xnor_dot_property(data):
    n = data.draw(st.integers(0, 300))
    a = np.array(data.draw(st.lists(st.sampled_from([-1, 1]), min_size=n, max_size=n)), dtype=int)
    b = np.array(data.draw(st.lists(st.sampled_from([-1, 1]), min_size=n, max_size=n)), dtype=int)
    assert xnor_popcount_dot(pack_bits(a), pack_bits(b), n) == int(np.dot(a, b))


def test_corrupted_padding_is_masked(rng):
    n = 70
    a, b = rng.choice([-1, 1], n), rng.choice([-1, 1], n)
    pa = pack_bits(a).copy()
    pa[-1] |= ~padding_mask(n)[-1]
    restored = mask_padding(pa, n)
    assert xnor_popcount_dot(restored, pack_bits(b), n) == int(a @ b)
    assert xnor_popcount_dot(pa, pack_bits(b), n) == int(a @ b)


def test_xnor_mismatched_length():
    with pytest.raises(InvalidArgumentError):
        xnor_popcount_dot(pack_bits(np.ones(70)), pack_bits(np.ones(10)), 70)


def test_matmul_with_validity_mask(rng):
    a = rng.choice([-1, 0, 1], size=(7, 90))
    b = rng.choice([-1, 1], size=(3, 90))
    from bnn_ecg.bits import _pack_bool

    got = xnor_popcount_matmul(_pack_bool(a > 0), _pack_bool(b > 0), 90, _pack_bool(a != 0))
    np.testing.assert_array_equal(got, a @ b.T)


def test_packed_tensor_invariants(rng):
    s = rng.choice([-1, 1], size=(3, 70))
    p = PackedBitTensor.from_signs(s)
    assert (p.channels, p.length, p.words.shape) == (3, 70, (3, 2))
    assert p.raw_bits == 210 and p.padded_bits == 384
    np.testing.assert_array_equal(p.to_signs(), s)
    bad = p.words.copy()
    bad[0, 1] |= np.uint64(1 << 63)
    with pytest.raises(InvalidArgumentError):
        PackedBitTensor(3, 70, bad)


def test_tensor1d_validation():
    t = Tensor1D(np.zeros((2, 5)))
    assert (t.channels, t.length) == (2, 5)
    with pytest.raises(InvalidArgumentError):
        Tensor1D(np.array([[np.nan]]))
    with pytest.raises(InvalidArgumentError):
        Tensor1D(np.zeros(4))
