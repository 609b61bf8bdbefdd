import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import small_config
from oracles import dense_receiver_pass
from opmimo.config import Modulation, PrecoderKind, snr_from_ebn0, validate
from opmimo.metrics import BerTally, tally_ber
from opmimo.precoding import build_precoder
from opmimo.receiver import (LLR_CLIP, detect_frame, effective_gammas, first_iteration,
                             mmse_window, pic_iteration, soft_symbols, symbol_llrs)
from opmimo.sim import simulate_frame

SQ2 = np.sqrt(2)


def random_phi(rng, N, M):
    return (rng.standard_normal((N, M)) + 1j * rng.standard_normal((N, M))) / SQ2


def test_mmse_window_values():
    np.testing.assert_allclose(mmse_window(np.array([1.0, 2j, 0.0]), 1.0), [0.5, -0.4j, 0.0])
    # infinite SNR: zero-forcing with the zero element left at zero
    np.testing.assert_allclose(mmse_window(np.array([2.0, 0.0]), np.inf), [0.5, 0.0])


def test_llr_sign_and_scale():
    # alpha = (1+j)/sqrt2, gain 1, variance 1: squared-distance gap is 2
    llr = symbol_llrs(np.array([(1 + 1j) / SQ2]), 1.0, 1.0, Modulation.QPSK)
    np.testing.assert_allclose(llr, [2.0, 2.0])
    llr = symbol_llrs(np.array([10 - 10j]), 1.0, 0.01, Modulation.QPSK)
    np.testing.assert_array_equal(llr, [LLR_CLIP, -LLR_CLIP])


def test_soft_symbol_expectation():
    L = np.array([2.0, -2.0])
    expected = (np.tanh(1) - 1j * np.tanh(1)) / SQ2
    assert soft_symbols(L, Modulation.QPSK)[0] == pytest.approx(expected, abs=1e-12)
    # explicit expectation over the four symbols
    p0 = 1 / (1 + np.exp(-L))
    points = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / SQ2
    probs = [p0[0] * p0[1], p0[0] * (1 - p0[1]), (1 - p0[0]) * p0[1], (1 - p0[0]) * (1 - p0[1])]
    assert soft_symbols(L, Modulation.QPSK)[0] == pytest.approx(np.dot(probs, points), abs=1e-12)


def test_qam16_soft_symbols_follow_enumeration(rng):
    L = rng.normal(0, 3, 4 * 50)
    got = soft_symbols(L, Modulation.QAM16)
    from opmimo.coding import constellation
    c = constellation(Modulation.QAM16)
    P0 = 1 / (1 + np.exp(-L.reshape(-1, 4)))
    prob = np.prod(np.where(c.labels[None] == 0, P0[:, None], 1 - P0[:, None]), axis=2)
    np.testing.assert_allclose(got, prob @ c.points, atol=1e-12)
    assert np.all(np.abs(soft_symbols(np.zeros(4), Modulation.QAM16)) < 1e-12)


@pytest.mark.parametrize("kind", list(PrecoderKind))
@pytest.mark.parametrize("NM", [(2, 2), (4, 2), (4, 4)])
def test_first_iteration_matches_dense(kind, NM, rng):
    N, M = NM
    S = build_precoder(kind, N, M)
    Sm = S.matrix
    phi = random_phi(rng, N, M)
    phi_v = phi.ravel(order="F")
    b = rng.choice([1, -1], Sm.shape[0]) + 1j * rng.choice([1, -1], Sm.shape[0])
    rho = 3.0
    psi = phi_v * (Sm @ b) + rng.standard_normal(b.size)
    state = first_iteration(psi, phi, S, rho)
    W = np.diag(phi_v.conj() / (np.abs(phi_v) ** 2 + 1 / rho))
    R = Sm.conj().T @ W @ np.diag(phi_v) @ Sm
    Rn = Sm.conj().T @ W @ W.conj().T @ Sm
    b_hat, _, gamma = dense_receiver_pass(Sm, phi_v, psi, rho, np.zeros(b.size))
    np.testing.assert_allclose(state.alphas, b_hat, atol=1e-12)
    np.testing.assert_allclose(state.gains, np.diag(R), atol=1e-12)
    cross = np.sum(np.abs(R) ** 2, axis=1) - np.abs(np.diag(R)) ** 2
    np.testing.assert_allclose(state.noise_var, cross + np.diag(Rn).real / rho, atol=1e-12)
    np.testing.assert_allclose(state.gammas, gamma, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(kind=st.sampled_from(list(PrecoderKind)), N=st.sampled_from([1, 2, 4]),
       M=st.sampled_from([1, 2, 4]), seed=st.integers(0, 2**32 - 1))
def test_pic_matches_dense(kind, N, M, seed):
    r = np.random.default_rng(seed)
    S = build_precoder(kind, N, M)
    Sm = S.matrix
    phi = random_phi(r, N, M)
    phi_v = phi.ravel(order="F")
    psi = r.standard_normal(N * M) + 1j * r.standard_normal(N * M)
    state = first_iteration(psi, phi, S, 10.0)
    _, alpha, gamma = dense_receiver_pass(Sm, phi_v, psi, 10.0, state.soft_symbols)
    nxt = pic_iteration(state, psi, phi, S, 10.0)
    np.testing.assert_allclose(nxt.alphas, alpha, atol=1e-10)
    np.testing.assert_allclose(nxt.gammas, gamma, atol=1e-10)
    np.testing.assert_allclose(nxt.noise_var, gamma / 10.0, atol=1e-12)
    assert nxt.iteration == 2


@pytest.mark.parametrize("kind", [PrecoderKind.WHT, PrecoderKind.DSFT])
def test_constant_modulus_gamma_is_flat(kind, rng):
    S = build_precoder(kind, 8, 12)
    phi = random_phi(rng, 8, 12)
    g = effective_gammas(S, phi).real
    np.testing.assert_allclose(g, np.mean(np.abs(phi) ** 2), rtol=1e-10)


def test_no_precoding_gamma_is_elementwise(rng):
    S = build_precoder("IDENTITY", 8, 12)
    phi = random_phi(rng, 8, 12)
    np.testing.assert_allclose(effective_gammas(S, phi).real, np.abs(phi.ravel(order="F")) ** 2)


def test_perfect_feedback_leaves_gamma_b(rng):
    S = build_precoder("WHT", 4, 4)
    phi = random_phi(rng, 4, 4)
    phi_v = phi.ravel(order="F")
    b = (rng.choice([1, -1], 16) + 1j * rng.choice([1, -1], 16)) / SQ2
    psi = phi_v * (S.matrix @ b)
    state = first_iteration(psi, phi, S, np.inf)
    import dataclasses
    state = dataclasses.replace(state, soft_symbols=b)
    nxt = pic_iteration(state, psi, phi, S, np.inf)
    np.testing.assert_allclose(nxt.alphas, nxt.gammas * b, atol=1e-12)


def test_pic_noise_has_variance_gamma_over_rho(rng):
    # feedback equal to the truth: alpha - gamma b is pure filtered noise
    N, M, rho, trials = 4, 4, 2.0, 4000
    S = build_precoder("WHT", N, M)
    phi = random_phi(rng, N, M)
    phi_v = phi.ravel(order="F")
    b = np.ones(16) * (1 + 1j) / SQ2
    base = first_iteration(phi_v * (S.matrix @ b), phi, S, rho)
    import dataclasses
    base = dataclasses.replace(base, soft_symbols=b)
    resid = []
    for _ in range(trials):
        n = (rng.standard_normal(16) + 1j * rng.standard_normal(16)) / SQ2
        psi = phi_v * (S.matrix @ b) + n / np.sqrt(rho)
        resid.append(pic_iteration(base, psi, phi, S, rho).alphas - base.gammas * b)
    var = np.mean(np.abs(np.array(resid)) ** 2, axis=0)
    np.testing.assert_allclose(var / (base.gammas / rho), 1.0, atol=0.1)


def _noiseless_frame(kind):
    cfg = small_config(precoder_kind=kind, num_pic_iterations=2)
    return simulate_frame(validate(cfg), 0)[0]


@pytest.mark.parametrize("kind", list(PrecoderKind))
def test_noiseless_frame_is_error_free(kind):
    assert _noiseless_frame(kind).bit_errors == 0


def test_noiseless_paper_frame_is_error_free():
    cfg = validate(small_config(num_subcarriers=64, num_ofdm_symbols=44, cp_length=16,
                                num_antennas=8, code_spec="7:133,171", num_pic_iterations=1))
    assert simulate_frame(cfg, 3)[0].bit_errors == 0


def test_detect_frame_trace_records_each_iteration():
    cfg = validate(small_config(num_pic_iterations=3, snr=20.0))
    trace = []
    simulate_frame(cfg, 1, trace)
    assert [s.iteration for s in trace] == [1, 2, 3]
    assert all(s.decisions is not None and s.decisions.size == cfg.info_length for s in trace)


def test_iterations_do_not_hurt_on_tiny_system():
    # Common noise per frame: compare decisions after iteration 1 and 4.
    cfg = small_config(precoder_kind="WHT", num_pic_iterations=4)
    cfg = validate(cfg.replace(snr=snr_from_ebn0(6.0, cfg)))
    from opmimo import sim
    first, last = BerTally(), BerTally()
    for f in range(200):
        trace = []
        info = sim.frame_rng(cfg.config.rng_seed, f, "bits").integers(0, 2, cfg.info_length, dtype=np.int8)
        simulate_frame(cfg, f, trace)
        first = tally_ber(info, trace[0].decisions, first)
        last = tally_ber(info, trace[-1].decisions, last)
    assert first.bit_errors > 0
    assert last.ber <= first.ber


def test_detect_frame_requires_matching_config():
    cfg = validate(small_config())
    S = build_precoder("WHT", 4, 4)
    with pytest.raises(Exception):
        detect_frame(np.zeros(15, complex), np.ones((4, 4)), S, cfg)
