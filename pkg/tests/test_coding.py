import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fgrx.coding import (
    LLR_CLAMP,
    CodeSpec,
    Interleaver,
    LengthMismatch,
    bcjr_decode,
    bcjr_posteriors,
    bit_llrs_from_symbol_message,
    conv_encode,
    get_constellation,
    map_symbols,
    symbol_log_prior,
    symbol_prior,
)
from fgrx.numerics import DiscreteMessage, ScalarGaussian, discrete_moments
from oracles import app_by_enumeration, shift_register_encode, viterbi

QPSK = get_constellation("QPSK")
QAM16 = get_constellation("QAM16")
SPEC = CodeSpec()
bit_blocks = st.lists(st.integers(0, 1), min_size=1, max_size=40)


# -- encoder


def test_impulse_response():
    assert conv_encode([1], SPEC).tolist() == [1, 1, 1, 0, 1, 1]


def test_all_zero_input():
    assert not conv_encode(np.zeros(17, dtype=int), SPEC).any()


@given(bit_blocks)
def test_encoder_matches_shift_register(bits):
    assert np.array_equal(conv_encode(bits, SPEC), shift_register_encode(bits))


@given(st.integers(1, 40).flatmap(lambda n: st.tuples(*[st.lists(st.integers(0, 1), min_size=n, max_size=n)] * 2)))
def test_encoder_is_linear(ab):
    a, b = (np.array(v) for v in ab)
    assert np.array_equal(conv_encode(a, SPEC) ^ conv_encode(b, SPEC), conv_encode(a ^ b, SPEC))


# -- BCJR


def test_bcjr_matches_codeword_enumeration_frozen():
    llr = np.array([1.5, -0.4, 2.2, 0.3, -1.1, 0.8, 0.6, -2.0, 1.0, 0.1, -0.5, 1.7])
    info, coded = bcjr_posteriors(llr, SPEC)
    # values from exhaustive enumeration of the 16 codewords
    expect_info = [0.7764011093135554, 0.2610218715362704, -0.5222571942238147, 0.3104575131801114]
    expect_coded = [
        0.7764011093135554, 0.7764011093135554, 1.6739062501419544, 0.2610218715362704,
        -1.0550129178705485, 0.22247334067185948, 0.9281073904395658, -1.5132842384772722,
        0.7030044658106969, -0.5222571942238147, 0.3104575131801114, 0.3104575131801114,
    ]
    assert np.allclose(info, expect_info, atol=1e-9, rtol=0)
    assert np.allclose(coded, expect_coded, atol=1e-9, rtol=0)


@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_bcjr_matches_enumeration_random(n_info, seed):
    rng = np.random.default_rng(seed)
    llr = rng.normal(0, 3, SPEC.coded_length(n_info))
    info, coded = bcjr_posteriors(llr, SPEC)
    with np.errstate(divide="ignore"):
        ref_info, ref_coded = app_by_enumeration(llr, n_info)
    assert np.allclose(info, ref_info, atol=1e-9, rtol=0)
    # coded bits fixed by the zero tail have infinite LLR
    fixed = ~np.isfinite(ref_coded)
    assert np.allclose(coded[~fixed], ref_coded[~fixed], atol=1e-9, rtol=0)
    assert np.all(np.sign(coded[fixed]) == np.sign(ref_coded[fixed])) and np.all(np.abs(coded[fixed]) > 1e6)


def test_bcjr_noiseless_zero_codeword():
    info, _ = bcjr_decode(np.full(SPEC.coded_length(50), 40.0), SPEC)
    assert np.all(info > 0)


def test_bcjr_zero_llrs_are_uninformative():
    info, ext = bcjr_decode(np.zeros(SPEC.coded_length(30)), SPEC)
    assert np.allclose(info, 0, atol=1e-12)


def test_bcjr_high_snr_matches_viterbi():
    rng = np.random.default_rng(12)
    for _ in range(20):
        bits = rng.integers(0, 2, 60)
        c = conv_encode(bits, SPEC)
        llr = 4.0 * (1 - 2 * c.astype(float)) + rng.normal(0, 1.5, c.size)
        info, _ = bcjr_decode(llr, SPEC)
        assert np.array_equal((info < 0).astype(np.int8), viterbi(llr, 60))


def test_round_trip_perfect_llrs_1000_blocks():
    rng = np.random.default_rng(13)
    for _ in range(1000):
        bits = rng.integers(0, 2, rng.integers(1, 120))
        llr = LLR_CLAMP * (1 - 2 * conv_encode(bits, SPEC).astype(float))
        info, _ = bcjr_decode(llr, SPEC)
        assert np.array_equal(info < 0, bits.astype(bool))


@given(st.integers(0, 2**32 - 1))
def test_extrinsic_plus_prior_is_posterior(seed):
    rng = np.random.default_rng(seed)
    llr = rng.normal(0, 2, SPEC.coded_length(40))
    _, post = bcjr_posteriors(llr, SPEC)
    _, ext = bcjr_decode(llr, SPEC)
    inside = np.abs(post) < LLR_CLAMP
    assert np.allclose((ext + llr)[inside], post[inside], atol=1e-9, rtol=0)


def test_bcjr_length_mismatch():
    with pytest.raises(LengthMismatch):
        bcjr_decode(np.zeros(10), SPEC, n_info=10)
    with pytest.raises(LengthMismatch):
        SPEC.info_length(11)


# -- constellations and mapping


def test_qpsk_gray_table():
    s = 1 / np.sqrt(2)
    assert np.isclose(map_symbols([0, 0], QPSK)[0], s * (1 + 1j))
    expected = {(0, 0): 1 + 1j, (0, 1): -1 + 1j, (1, 1): -1 - 1j, (1, 0): 1 - 1j}
    for bits, p in expected.items():
        assert np.isclose(map_symbols(bits, QPSK)[0], s * p)
        idx = np.argmin(np.abs(QPSK.points - s * p))
        assert tuple(QPSK.labels[idx]) == bits


@pytest.mark.parametrize("const", [QPSK, QAM16])
def test_unit_energy_and_gray_neighbours(const):
    assert np.isclose(np.mean(np.abs(const.points) ** 2), 1)
    d = np.abs(const.points[:, None] - const.points[None, :])
    dmin = d[d > 0].min()
    for i, j in zip(*np.nonzero(np.isclose(d, dmin))):
        assert np.sum(const.labels[i] != const.labels[j]) == 1


@given(st.lists(st.integers(0, 1), min_size=4, max_size=64).filter(lambda b: len(b) % 4 == 0))
def test_mapping_inverts_to_labels(bits):
    for const in (QPSK, QAM16):
        syms = map_symbols(bits, const)
        idx = np.abs(syms[:, None] - const.points[None]).argmin(axis=1)
        assert np.array_equal(const.labels[idx].reshape(-1), np.array(bits))


def test_symbol_prior_examples():
    m = symbol_prior([0.5, 0.5], QPSK)
    assert np.allclose(m.weights, 0.25)
    m = symbol_prior([1.0, 1.0], QPSK)
    assert np.isclose(m.weights[0], 1) and np.isclose(QPSK.points[np.argmax(m.weights)], (1 + 1j) / np.sqrt(2))
    for const in (QPSK, QAM16):
        mean, _, _ = discrete_moments(symbol_prior(np.full(const.bits_per_symbol, 0.5), const))
        assert abs(mean) < 1e-15


def test_symbol_log_prior_matches_symbol_prior():
    rng = np.random.default_rng(14)
    llr = rng.normal(0, 2, 4 * 10)
    p0 = 1 / (1 + np.exp(-llr))
    w = symbol_prior(p0.reshape(10, 4), QAM16)
    assert np.allclose(np.exp(symbol_log_prior(llr, QAM16)), w, atol=1e-12)


# -- demapping


def test_llrs_from_gaussian_examples():
    llr = bit_llrs_from_symbol_message(ScalarGaussian(0.3, 1.0), None, QPSK)
    # 4-point enumeration: the first bit splits the imaginary axis, the second the real axis
    assert np.allclose(llr, [0.0, 0.8485281374238566], atol=1e-12)
    assert np.allclose(bit_llrs_from_symbol_message(ScalarGaussian(0, 1.0), None, QPSK), 0)
    for i, p in enumerate(QPSK.points):
        llr = bit_llrs_from_symbol_message(ScalarGaussian(p, 1e-9), None, QPSK)
        assert np.allclose(llr, LLR_CLAMP * (1 - 2 * QPSK.labels[i]))


def test_llrs_are_extrinsic_to_the_prior():
    rng = np.random.default_rng(15)
    prior_llr = rng.normal(0, 1, 4)
    prior = DiscreteMessage(QAM16.points, np.exp(symbol_log_prior(prior_llr, QAM16))[0])
    msg = DiscreteMessage(QAM16.points, rng.dirichlet(np.ones(16)))
    ext = bit_llrs_from_symbol_message(msg, prior, QAM16)
    # posterior bit marginals of msg x prior equal ext + prior_llr
    post = msg.weights * prior.weights
    for b in range(4):
        z = post[QAM16.labels[:, b] == 0].sum()
        o = post[QAM16.labels[:, b] == 1].sum()
        assert np.isclose(np.log(z / o), ext[b] + prior_llr[b], atol=1e-10)


# -- interleaver


@given(st.integers(1, 2000), st.integers(0, 2**32 - 1))
def test_interleaver_round_trip(n, seed):
    il = Interleaver(n, seed)
    x = np.arange(n)
    assert np.array_equal(il.deinterleave(il.interleave(x)), x)
    assert sorted(il.interleave(x).tolist()) == x.tolist()


def test_interleaver_length_check():
    with pytest.raises(LengthMismatch):
        Interleaver(8, 0).interleave(np.zeros(7))
