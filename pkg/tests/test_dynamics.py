import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from combion.dynamics import (
    Branch,
    FrameConfig,
    KickConfig,
    Tone,
    branch_angles,
    first_order_amplitudes,
    first_order_transition_amplitude,
    geometric_sum,
    kick_generator,
    kick_operator,
    min_pulses_for_resolution,
    propagate,
    reduce_angle,
    stroboscopic_map,
    to_lab_frame,
)
from combion.errors import CutoffTooSmall
from combion.hilbert import FockSpace, QuantumState, unitarity_defect

TWO_PI = 2 * np.pi
T = 1 / 80.78e6
W_T = TWO_PI * 1.64e6


def oracle_kick(theta_p, c, eta, cutoff, num_qubits):
    """exp(-i theta_p/2 sum_j (sigma+_j c D(i eta) + h.c.)) by brute-force expm."""
    a = np.diag(np.sqrt(np.arange(1, cutoff)), 1)
    disp = expm(1j * eta * (a + a.T))
    sp = np.array([[0, 0], [1, 0]])
    h = np.zeros((2**num_qubits * cutoff,) * 2, dtype=complex)
    for j in range(num_qubits):
        ops = [np.eye(2)] * num_qubits
        ops[j] = sp
        s = ops[0]
        for o in ops[1:]:
            s = np.kron(s, o)
        term = np.kron(s, c * disp)
        h += term + term.conj().T
    return expm(-0.5j * theta_p * h)


def oracle_free(omega_t, omega_q, cutoff, num_qubits):
    sz = np.zeros(2**num_qubits)
    for idx in range(2**num_qubits):
        bits = [(idx >> (num_qubits - 1 - j)) & 1 for j in range(num_qubits)]
        sz[idx] = sum(2 * b - 1 for b in bits)
    energies = (omega_q * sz / 2)[:, None] + omega_t * np.arange(cutoff)[None, :]
    return np.diag(np.exp(-1j * energies.reshape(-1) * T))


@pytest.mark.parametrize("num_qubits", [1, 2])
@pytest.mark.parametrize("theta", [0.05, 1.3, 3.0])
def test_kick_closed_form_matches_expm(num_qubits, theta):
    fock = FockSpace(10)
    cfg = KickConfig(theta, T, 0.1, (Tone(TWO_PI * 3e6, 0.4, 0.7), Tone(-TWO_PI * 1e6, 0.0, 0.3)))
    for n in (0, 5):
        k = kick_operator(cfg, n, fock, num_qubits)
        c = sum(t.weight * np.exp(1j * (t.delta_omega * n * T + t.phase)) for t in cfg.tones)
        np.testing.assert_allclose(k, oracle_kick(theta, c, 0.1, 10, num_qubits), atol=1e-10)
        np.testing.assert_allclose(k, expm(-1j * kick_generator(cfg, n, fock, num_qubits)), atol=1e-10)
        assert unitarity_defect(k) < 1e-8


@pytest.mark.parametrize("num_qubits", [1, 2])
def test_propagation_matches_dense_products(num_qubits):
    cutoff, n_pulses = 8, 40
    fock = FockSpace(cutoff)
    tones = (Tone(TWO_PI * 2.1e6, 0.0, 0.5), Tone(-TWO_PI * 2.1e6, 0.3, 0.5))
    cfg = KickConfig(0.2, T, 0.1, tones)
    frame = FrameConfig(W_T, TWO_PI * 0.4e6)
    state = QuantumState.basis([0] * num_qubits, 1, fock)
    psi = state.amplitudes.copy()
    free = oracle_free(W_T, TWO_PI * 0.4e6, cutoff, num_qubits)
    for n in range(n_pulses):
        c = sum(t.weight * np.exp(1j * (t.delta_omega * n * T + t.phase)) for t in tones)
        psi = free @ oracle_kick(0.2, c, 0.1, cutoff, num_qubits) @ psi
    out = propagate(state, cfg, frame, n_pulses, check_leakage=False)
    np.testing.assert_allclose(out.amplitudes, psi, atol=1e-10)


def test_stroboscopic_map_matches_propagate():
    fock = FockSpace(12)
    cfg = KickConfig(0.05, T, 0.1, (Tone(TWO_PI * 1.3e6),))
    frame = FrameConfig(W_T, TWO_PI * 0.2e6)
    v = stroboscopic_map(cfg, frame, fock)
    assert unitarity_defect(v) < 1e-8
    state = QuantumState.basis([0], 2, fock)
    a = np.linalg.matrix_power(v, 300) @ state.amplitudes
    b = propagate(state, cfg, frame, 300).amplitudes
    np.testing.assert_allclose(np.abs(a) ** 2, np.abs(b) ** 2, atol=1e-10)


@given(st.floats(-50.0, 50.0), st.integers(1, 3000))
def test_geometric_sum_matches_direct_sum(theta, n):
    k = np.arange(n, dtype=np.longdouble)
    phase = np.longdouble(theta) * k
    direct = complex(np.sum(np.cos(phase)), np.sum(np.sin(phase)))
    assert abs(geometric_sum(theta, n) - direct) < 1e-10


@given(st.floats(-1e4, 1e4))
def test_reduce_angle_against_multiprecision(theta):
    mp.mp.dps = 40
    two_pi = 2 * mp.pi
    exact = mp.mpf(theta) - two_pi * mp.nint(mp.mpf(theta) / two_pi)
    assert abs(reduce_angle(theta) - float(exact)) < 1e-15


def test_geometric_sum_degenerate_limit():
    assert geometric_sum(0.0, 17) == pytest.approx(17)
    assert geometric_sum(TWO_PI * 3, 17) == pytest.approx(17)


def test_resonant_carrier_flops_as_sin_squared():
    fock = FockSpace(2)
    theta = 1e-3
    cfg = KickConfig(theta, T)
    frame = FrameConfig(W_T, 0.0)
    state = QuantumState.basis([0], 0, fock)
    for n in (100, 1571, 4000):
        p = propagate(state, cfg, frame, n).spin_populations()[1]
        assert p == pytest.approx(np.sin(n * theta / 2) ** 2, abs=1e-12)


@given(st.floats(0.0, np.pi), st.integers(1, 400), st.floats(0.0, 0.3))
def test_norm_is_conserved(theta, n, eta):
    fock = FockSpace(10)
    cfg = KickConfig(theta, T, eta, (Tone(TWO_PI * 0.7e6),))
    state = QuantumState.basis([0], 0, fock)
    out = propagate(state, cfg, FrameConfig(W_T), n, check_leakage=False)
    assert abs(out.norm() - 1) < 1e-10


def test_leakage_raises():
    fock = FockSpace(4)
    frame = FrameConfig(W_T, 0.0)
    # drive the blue sideband hard so phonons pile up
    cfg = KickConfig(0.3, T, 0.5, (Tone(W_T),))
    with pytest.raises(CutoffTooSmall):
        propagate(QuantumState.basis([0], 0, fock), cfg, frame, 200)


def test_branch_angles():
    cfg = KickConfig(0.1, T)
    frame = FrameConfig(W_T, TWO_PI * 80.78e6)
    angles = branch_angles(cfg, frame, Tone(0.0))
    assert angles[Branch.CARRIER].theta == pytest.approx(0.0, abs=1e-9)
    assert angles[Branch.RED].theta == pytest.approx(TWO_PI - W_T * T)
    assert angles[Branch.BLUE].theta == pytest.approx(W_T * T)


def exact_amplitude(cfg, frame, n_pulses, n_from, n_to, cutoff=20):
    fock = FockSpace(cutoff)
    state = QuantumState.basis([0], n_from, fock)
    out = propagate(state, cfg, frame, n_pulses)
    return out.tensor()[1, n_to]


@pytest.mark.parametrize("dn", [0, -1, 1])
def test_first_order_amplitudes_against_exact(dn):
    theta, n_pulses, eta, n0 = 1e-4, 2000, 0.1, 3
    offset = dn * W_T
    cfg = KickConfig(theta, T, eta, (Tone(-offset + TWO_PI * 3e3),))
    frame = FrameConfig(W_T, 0.0)
    exact = exact_amplitude(cfg, frame, n_pulses, n0, n0 + dn)
    approx = first_order_transition_amplitude(cfg, frame, n_pulses, n0, n0 + dn, FockSpace(20))
    assert abs(approx) ** 2 == pytest.approx(abs(exact) ** 2, rel=1e-2)


def test_lamb_dicke_amplitudes_agree_to_order_eta_squared():
    theta, n_pulses, eta = 1e-4, 2000, 0.1
    frame = FrameConfig(W_T, 0.0)
    cfg = KickConfig(theta, T, eta, (Tone(W_T),))  # red sideband resonant
    ld = first_order_amplitudes(cfg, frame, n_pulses)
    full = first_order_transition_amplitude(cfg, frame, n_pulses, 1, 0, FockSpace(20))
    assert abs(ld.red) == pytest.approx(abs(full), rel=2 * eta**2)
    probs = ld.probabilities(1)
    assert probs[Branch.RED] == pytest.approx(abs(ld.red) ** 2)


def test_lamb_dicke_warning():
    with pytest.warns(RuntimeWarning):
        first_order_amplitudes(KickConfig(1e-3, T, 0.2), FrameConfig(W_T), 10, nbar=5)


def test_resolution_bound():
    assert min_pulses_for_resolution(TWO_PI * 1.64e6, 12.4e-9, 0.1) == pytest.approx(78.3, abs=0.1)
    with pytest.raises(ValueError):
        min_pulses_for_resolution(0, T, 0.1)


def test_lab_frame_keeps_populations():
    fock = FockSpace(3)
    state = QuantumState.product(np.array([1, 1]) / np.sqrt(2), [1.0], fock)
    lab = to_lab_frame(state, TWO_PI * 1e6, 1.7e-7)
    np.testing.assert_allclose(lab.spin_populations(), state.spin_populations())
    rel = lab.tensor()[1, 0] / lab.tensor()[0, 0]
    assert np.angle(rel) == pytest.approx(np.angle(np.exp(1j * TWO_PI * 1e6 * 1.7e-7)))


def test_config_validation():
    with pytest.raises(ValueError):
        KickConfig(0.1, T, tones=(Tone(0, 0, 0.4),))
    with pytest.raises(ValueError):
        KickConfig(-0.1, T)
    with pytest.raises(ValueError):
        FrameConfig(0.0)


def test_trivial_kick_and_empty_propagation():
    fock = FockSpace(6)
    np.testing.assert_allclose(kick_operator(KickConfig(0.0, T, 0.1), 3, fock), np.eye(12), atol=1e-15)
    state = QuantumState.basis([0], 2, fock)
    out = propagate(state, KickConfig(0.4, T, 0.1, (Tone(W_T),)), FrameConfig(W_T), 0)
    np.testing.assert_array_equal(out.amplitudes, state.amplitudes)


@given(st.floats(0.0, np.pi))
def test_single_pulse_without_motion_is_two_level_rotation(theta):
    fock = FockSpace(2)
    out = propagate(QuantumState.basis([0], 0, fock), KickConfig(theta, T), FrameConfig(W_T), 1)
    assert out.spin_populations()[1] == pytest.approx(np.sin(theta / 2) ** 2, abs=1e-14)


@given(st.floats(0.0, 1.0), st.floats(-np.pi, np.pi))
def test_split_tone_equals_single_tone(w, phase):
    fock = FockSpace(8)
    state = QuantumState.basis([0], 1, fock)
    frame = FrameConfig(W_T)
    dw = TWO_PI * 1.1e6
    split = KickConfig(0.3, T, 0.1, (Tone(dw, phase, w), Tone(dw, phase, 1 - w)))
    single = KickConfig(0.3, T, 0.1, (Tone(dw, phase),))
    a = propagate(state, split, frame, 50).amplitudes
    b = propagate(state, single, frame, 50).amplitudes
    np.testing.assert_allclose(a, b, atol=1e-12)


@given(st.floats(-3e6, 3e6), st.integers(1, 3000))
def test_first_order_amplitudes_ignore_comb_harmonic(offset_hz, n):
    frame = FrameConfig(W_T)
    base = KickConfig(1e-3, T, 0.1, (Tone(TWO_PI * offset_hz),))
    shifted = KickConfig(1e-3, T, 0.1, (Tone(TWO_PI * (offset_hz + 1 / T)),))
    a = first_order_amplitudes(base, frame, n)
    b = first_order_amplitudes(shifted, frame, n)
    np.testing.assert_allclose(a, b, atol=1e-12 * n)


def test_first_order_sidebands_vanish_without_motion():
    amps = first_order_amplitudes(KickConfig(1e-3, T, 0.0, (Tone(W_T),)), FrameConfig(W_T), 500)
    assert amps.red == 0 and amps.blue == 0


@given(st.integers(1, 10_000), st.floats(1e-5, 0.1))
def test_half_integer_carrier_amplitude_is_bounded(n, theta):
    # carrier angle pi: the geometric sum never exceeds one pulse
    amps = first_order_amplitudes(KickConfig(theta, T, 0.1), FrameConfig(W_T, np.pi / T), n)
    assert abs(amps.carrier) <= theta / 2 * (1 + 1e-9)


def test_resolution_bound_scaling():
    assert min_pulses_for_resolution(TWO_PI * 3.28e6, 12.4e-9, 0.1) == pytest.approx(39.2, abs=0.1)
    assert min_pulses_for_resolution(W_T, T, 0.2) == pytest.approx(min_pulses_for_resolution(W_T, T, 0.1) / 2)
