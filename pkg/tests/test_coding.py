import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import map_by_enumeration, shift_register_encode
from opmimo import _bcjr_py, kernels
from opmimo.coding import (LengthError, bcjr_decode, constellation, deinterleave, demap_hard,
                           encode, interleave, interleaver, map_bits, trellis)
from opmimo.config import CodeSpec, Modulation

CODE_802 = CodeSpec()
TOY = CodeSpec(3, (0o5, 0o7))


def test_all_zero_info_gives_zero_codeword():
    assert not encode(np.zeros(50, int), CODE_802).any()


def test_impulse_response():
    # generator taps read MSB first: 133 = 1011011, 171 = 1111001
    expected = [1, 1, 0, 1, 1, 1, 1, 1, 0, 0, 1, 0, 1, 1]
    np.testing.assert_array_equal(encode([1] + [0] * 9, CODE_802)[:14], expected)


@pytest.mark.parametrize("n", [1, 7, 100, 2810])
def test_codeword_length(n, rng):
    assert encode(rng.integers(0, 2, n), CODE_802).size == 2 * (n + 6)


def test_encode_matches_shift_register(rng):
    for spec in (CODE_802, TOY, CodeSpec(4, (0o13, 0o15, 0o17))):
        u = rng.integers(0, 2, 40)
        np.testing.assert_array_equal(encode(u, spec), shift_register_encode(u, spec.constraint_length, spec.generators))


def test_encode_length_check():
    with pytest.raises(LengthError):
        encode(np.zeros(5, int), CODE_802, info_length=6)


def test_trellis_structure():
    tr = trellis(CODE_802)
    assert tr.num_states == 64
    # every state has exactly two predecessors
    np.testing.assert_array_equal(np.bincount(tr.next_state.ravel(), minlength=64), 2)


def test_noiseless_decoding(rng):
    u = rng.integers(0, 2, 500)
    llr = 20.0 * (1 - 2 * encode(u, CODE_802))
    dec, info_llr, coded = bcjr_decode(llr, CODE_802)
    np.testing.assert_array_equal(dec, u)
    assert info_llr.size == 500 and coded.size == llr.size


def test_zero_llrs_are_deterministic():
    a = bcjr_decode(np.zeros(40), TOY)
    b = bcjr_decode(np.zeros(40), TOY)
    np.testing.assert_array_equal(a[0], b[0])
    # uniform prior on a linear code: info bits stay uninformed
    np.testing.assert_allclose(a[1], 0.0, atol=1e-12)
    ref_info, ref_coded = map_by_enumeration(np.zeros(12), 4, 3, (0o5, 0o7))
    np.testing.assert_allclose(bcjr_decode(np.zeros(12), TOY)[2], ref_coded, atol=1e-12)


def test_toy_code_matches_enumeration(rng):
    llr = rng.normal(0, 2, 12)
    info, coded = map_by_enumeration(llr, 4, 3, (0o5, 0o7))
    _, got_info, got_coded = bcjr_decode(llr, TOY)
    np.testing.assert_allclose(got_info, info, atol=1e-9, rtol=0)
    np.testing.assert_allclose(got_coded, coded, atol=1e-9, rtol=0)


generator_sets = st.integers(2, 5).flatmap(
    lambda K: st.tuples(st.just(K), st.lists(st.integers(1, 2**K - 1), min_size=1, max_size=3)))


@settings(max_examples=60, deadline=None)
@given(code=generator_sets, k=st.integers(1, 12), seed=st.integers(0, 2**32 - 1),
       scale=st.floats(0.1, 8.0))
def test_bcjr_equals_enumeration(code, k, seed, scale):
    K, gens = code
    spec = CodeSpec(K, tuple(gens))
    r = np.random.default_rng(seed)
    n = len(gens) * (k + K - 1)
    llr = r.normal(0, scale, n)
    ref_info, ref_coded = map_by_enumeration(llr, k, K, gens)
    _, info, coded = bcjr_decode(llr, spec)
    np.testing.assert_allclose(info, ref_info, atol=1e-9, rtol=0)
    np.testing.assert_allclose(coded, ref_coded, atol=1e-9, rtol=0)


@pytest.mark.parametrize("terminated", [0, 1])
def test_backends_agree(terminated, rng):
    tr = trellis(CODE_802)
    llr = rng.normal(0, 3, (700, 2))
    a = _bcjr_py.bcjr_logmap(llr, tr.next_state, tr.outputs, terminated)
    b = kernels.bcjr_logmap(llr, tr.next_state, tr.outputs, terminated)
    for x, y in zip(a, b):
        np.testing.assert_allclose(x, y, atol=1e-9, rtol=0)


def test_llr_length_check():
    with pytest.raises(LengthError):
        bcjr_decode(np.zeros(13), TOY)


# --- interleaver and mapping ---------------------------------------------------

def test_interleaver_is_permutation():
    pos = interleaver(64, 44, 2)
    np.testing.assert_array_equal(np.sort(pos), np.arange(5632))
    np.testing.assert_array_equal(interleaver(64, 44, 2), pos)  # geometry-determined


def test_interleaver_roundtrip_many(rng):
    pos = interleaver(4, 6, 2)
    X = rng.standard_normal((100_000, pos.size))
    np.testing.assert_array_equal(deinterleave(interleave(X, pos), pos), X)


def test_interleaver_walks_diagonally():
    N, M = 8, 4
    pos = interleaver(N, M, 2)
    sym = pos[:5] // 2
    p, n = sym % N, sym // N
    np.testing.assert_array_equal(np.diff(p), 1)
    np.testing.assert_array_equal(np.diff(n) % M, 1)


def test_qpsk_gray_map():
    np.testing.assert_allclose(map_bits([0, 0, 0, 1, 1, 0, 1, 1], Modulation.QPSK),
                               np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / np.sqrt(2))


@pytest.mark.parametrize("mod", list(Modulation))
def test_alphabet_properties(mod, rng):
    c = constellation(mod)
    assert np.mean(np.abs(c.points) ** 2) == pytest.approx(1.0, abs=1e-12)
    # Gray: nearest neighbours differ in exactly one bit
    d = np.abs(c.points[:, None] - c.points[None, :])
    dmin = d[d > 0].min()
    for i, j in zip(*np.nonzero(np.isclose(d, dmin))):
        assert np.sum(c.labels[i] != c.labels[j]) == 1
    bits = rng.integers(0, 2, 4 * 2816)
    sym = map_bits(bits, mod)
    np.testing.assert_array_equal(demap_hard(sym, mod), bits)


def test_qpsk_frame_energy(rng):
    sym = map_bits(rng.integers(0, 2, 5632), Modulation.QPSK, 2816)
    assert np.mean(np.abs(sym) ** 2) == pytest.approx(1.0, abs=1e-12)


def test_map_length_check():
    with pytest.raises(LengthError):
        map_bits([0, 1, 1], Modulation.QPSK)
    with pytest.raises(LengthError):
        map_bits([0, 1], Modulation.QPSK, num_symbols=2)
