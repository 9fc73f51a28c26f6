import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from combion.errors import CutoffTooSmall, InsufficientScan
from combion.hilbert import SIGMA_Y, SpinDensityMatrix, spin_operator
from combion.msgate import (
    DD,
    UU,
    GateConfig,
    ParityScan,
    analysis_rotation,
    bell_phase,
    bell_state,
    fidelity_witness,
    fit_parity,
    gate_parameters,
    ms_evolve_analytic,
    ms_evolve_numeric,
    ms_propagate_numeric,
    overlap_fidelity,
    parity,
    parity_scan,
    witness,
)

TWO_PI = 2 * np.pi
W_T = TWO_PI * 1.64e6
T = 1 / 80.78e6
PHI = np.linspace(0, np.pi, 48, endpoint=False)


def gate(eta=0.1, rabi_hz=46.3e3, nbar=0.0):
    return GateConfig.ideal(eta, TWO_PI * rabi_hz, W_T, T, nbar)


def bell_diagonal(weights, chi):
    """Mixture of the four Bell states built on phase chi."""
    phi_p = bell_state(chi)
    phi_m = bell_state(chi + np.pi)
    psi_p = np.array([0, 1, 1, 0]) / np.sqrt(2)
    psi_m = np.array([0, 1, -1, 0]) / np.sqrt(2)
    return SpinDensityMatrix.mixture(weights, [SpinDensityMatrix.pure(v) for v in (phi_p, phi_m, psi_p, psi_m)])


def test_gate_parameters_match_reference_numbers():
    cfg = gate()
    assert cfg.delta == pytest.approx(2 * 0.1 * TWO_PI * 46.3e3)
    assert cfg.duration == pytest.approx(108e-6, rel=1e-3)
    assert GateConfig(0.1, 1.0, 1.0, 108e-6, W_T, period=12.379e-9).n_pulses == 8724


def test_gate_parameters_reject_non_positive():
    with pytest.raises(ValueError):
        gate_parameters(0.0, 1.0)


def test_analytic_gate_makes_bell_state():
    rho = ms_evolve_analytic(gate())
    target = (np.array([1, 0, 0, 0]) - 1j * np.array([0, 0, 0, 1])) / np.sqrt(2)
    assert overlap_fidelity(rho, -np.pi / 2) == pytest.approx(1.0, abs=1e-10)
    np.testing.assert_allclose(rho.entries, np.outer(target, target.conj()), atol=1e-10)


@given(st.floats(0.0, 5.0))
def test_analytic_gate_fidelity_does_not_depend_on_temperature(nbar):
    assert overlap_fidelity(ms_evolve_analytic(gate(nbar=nbar))) == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("fraction", [0.13, 0.5, 0.77, 1.0])
def test_analytic_gate_solves_spin_dependent_force_dynamics(fraction):
    """Oracle: integrate H = eta Omega S_y (a e^{-i delta t} + h.c.) directly."""
    cfg = gate()
    c = 14
    a = np.diag(np.sqrt(np.arange(1, c)), 1)
    s_y = (spin_operator(SIGMA_Y, 0, 2) + spin_operator(SIGMA_Y, 1, 2)) / 2

    def rhs(t, y):
        x = a * np.exp(-1j * cfg.delta * t)
        return -1j * (cfg.eta * cfg.omega * np.kron(s_y, x + x.conj().T)) @ y

    psi0 = np.zeros(4 * c, dtype=complex)
    psi0[0] = 1.0
    t = fraction * cfg.duration
    sol = solve_ivp(rhs, (0, t), psi0, method="DOP853", rtol=1e-10, atol=1e-12)
    psi = sol.y[:, -1].reshape(4, c)
    np.testing.assert_allclose(ms_evolve_analytic(cfg, t=t).entries, psi @ psi.conj().T, atol=1e-7)


def test_numeric_gate_agrees_with_analytic():
    cfg = gate()
    rho, leak = ms_propagate_numeric(cfg, cutoff=20)
    ana = ms_evolve_analytic(cfg)
    chi = bell_phase(ana)
    assert abs(overlap_fidelity(rho, chi) - overlap_fidelity(ana, chi)) < 1e-2
    assert leak < 1e-6


def test_numeric_gate_converges_to_analytic_map():
    # the analytic map drops the off-resonant carrier (~Omega/omega_t) and
    # the Debye-Waller loss of sideband strength (~eta^2); shrink both
    base = np.max(np.abs(ms_evolve_numeric(gate()).entries - ms_evolve_analytic(gate()).entries))
    cfg = GateConfig.ideal(0.05, TWO_PI * 46.3e3, 4 * W_T, T)
    small = np.max(np.abs(ms_evolve_numeric(cfg).entries - ms_evolve_analytic(cfg).entries))
    assert small < 1e-2
    assert small < base / 2


def test_half_gate_purity_matches_analytic():
    # smaller eta keeps the off-resonant carrier terms out of the comparison
    cfg = gate(eta=0.05)
    half = cfg.n_pulses // 2
    rho, _ = ms_propagate_numeric(cfg, cutoff=20, n_pulses=half)
    ana = ms_evolve_analytic(cfg, t=half * cfg.period)
    assert rho.purity() == pytest.approx(ana.purity(), abs=1e-3)
    assert ana.purity() < 0.9


def test_numeric_gate_with_thermal_motion():
    rho = ms_evolve_numeric(gate(nbar=0.3), cutoff=20)
    assert overlap_fidelity(rho) > 0.98


def test_numeric_gate_raises_on_tiny_cutoff():
    with pytest.raises(CutoffTooSmall):
        ms_propagate_numeric(gate(), cutoff=3)


def test_analysis_rotation_is_pi_over_two_pulse():
    r = analysis_rotation(0.0)
    np.testing.assert_allclose(np.abs(r @ [1, 0]) ** 2, [0.5, 0.5])
    np.testing.assert_allclose(r.conj().T @ r, np.eye(2), atol=1e-15)


@given(st.floats(-np.pi, np.pi), st.floats(0, 2 * np.pi))
def test_bell_state_parity_is_minus_cosine(chi, phi):
    rho = SpinDensityMatrix.pure(bell_state(chi))
    assert parity(rho, phi) == pytest.approx(-np.cos(2 * phi + chi), abs=1e-12)


@given(st.floats(0.05, 1.0), st.floats(0, 2 * np.pi), st.floats(-0.5, 0.5))
def test_fit_recovers_parameters(amp, chi, offset):
    values = offset - amp * np.cos(2 * PHI + chi)
    a, c, o = fit_parity(PHI, values)
    assert a == pytest.approx(amp, abs=1e-10)
    assert o == pytest.approx(offset, abs=1e-10)
    assert np.angle(np.exp(1j * (c - chi))) == pytest.approx(0.0, abs=1e-8)


@given(st.floats(0, 2 * np.pi))
def test_parity_scan_of_bell_state(chi):
    scan = parity_scan(SpinDensityMatrix.pure(bell_state(chi)), PHI)
    assert scan.contrast == pytest.approx(1.0, abs=1e-6)
    assert np.angle(np.exp(1j * (scan.phase_offset - chi))) == pytest.approx(0.0, abs=1e-8)


def test_detection_error_shrinks_contrast():
    rho = SpinDensityMatrix.pure(bell_state(0.3))
    e = (0.02, 0.05)
    scan = parity_scan(rho, PHI, e)
    assert scan.contrast == pytest.approx((1 - e[0] - e[1]) ** 2, abs=1e-10)


@given(
    st.lists(st.floats(0.0, 1.0), min_size=4, max_size=4).filter(lambda w: sum(w) > 1e-3),
    st.floats(0, 2 * np.pi),
)
def test_witness_reading_on_bell_diagonal_states(weights, chi):
    rho = bell_diagonal(weights, chi)
    report, _ = witness(rho, PHI)
    overlap = overlap_fidelity(rho)
    assert report.fidelity == pytest.approx(overlap, abs=1e-6)
    if abs(overlap - 0.5) > 1e-9:
        assert report.entangled == (overlap > 0.5)
    assert report.fidelity_literal == pytest.approx(
        (report.p_dd + report.p_uu) / 2 + report.contrast / 4
    )


def test_witness_reports_both_readings():
    report, _ = witness(SpinDensityMatrix.pure(bell_state(1.0)))
    assert report.fidelity == pytest.approx(1.0, abs=1e-9)
    assert report.fidelity_literal == pytest.approx(0.75, abs=1e-9)
    assert report.contrast_peak_to_peak == pytest.approx(2 * report.contrast)
    assert report.entangled


def test_witness_needs_a_full_fringe():
    rho = SpinDensityMatrix.pure(bell_state(0.0))
    scan = parity_scan(rho, np.linspace(0, 1.0, 10))
    with pytest.raises(InsufficientScan):
        fidelity_witness((0.5, 0.5), scan)


def test_bell_phase_reads_coherence():
    rho = SpinDensityMatrix.pure(bell_state(-np.pi / 2))
    assert bell_phase(rho) == pytest.approx(-np.pi / 2)
    assert rho.entries[UU, DD] == pytest.approx(-0.5j)


def test_gate_config_validation():
    with pytest.raises(ValueError):
        GateConfig(0.1, 1.0, -1.0, 1e-4, W_T)
    with pytest.warns(RuntimeWarning):
        GateConfig(0.5, W_T, 1.0, 1e-4, W_T)


def test_gate_without_drive_is_identity():
    cfg = GateConfig(0.1, 0.0, 1.0, 1e-4, W_T, period=T)
    np.testing.assert_allclose(ms_evolve_analytic(cfg).entries, np.diag([1, 0, 0, 0]), atol=1e-15)
    rho, _ = ms_propagate_numeric(gate(), n_pulses=0)
    np.testing.assert_allclose(rho.entries, np.diag([1, 0, 0, 0]), atol=1e-15)


def test_open_loop_gate_is_worse():
    closed = gate()
    half = GateConfig(closed.eta, closed.omega, closed.delta / 2, closed.duration, W_T, period=T)
    target = bell_phase(ms_evolve_analytic(closed))
    assert overlap_fidelity(ms_evolve_numeric(half), target) < overlap_fidelity(ms_evolve_numeric(closed), target)


def test_parity_of_unentangled_states_is_flat():
    product = SpinDensityMatrix.pure([1, 0, 0, 0])
    mixed = SpinDensityMatrix(np.eye(4) / 4)
    for phi in np.linspace(0, 2 * np.pi, 9):
        assert parity(product, phi) == pytest.approx(0.0, abs=1e-15)
        assert parity(mixed, phi) == pytest.approx(0.0, abs=1e-15)


def test_witness_of_empty_inputs():
    scan = ParityScan(PHI, np.zeros_like(PHI), 0.0, 0.0, 0.0)
    report = fidelity_witness((0.0, 0.0), scan)
    assert report.fidelity == 0.0 and not report.entangled


def random_density(seed):
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    rho = g @ g.conj().T
    return SpinDensityMatrix(rho / np.trace(rho))


@given(st.integers(0, 2**32 - 1), st.floats(0, 2 * np.pi))
def test_parity_is_real_and_bounded(seed, phi):
    value = parity(random_density(seed), phi)
    assert isinstance(value, float)
    assert -1 - 1e-12 <= value <= 1 + 1e-12


@given(
    st.lists(st.floats(0.0, 1.0), min_size=4, max_size=4).filter(lambda w: sum(w) > 1e-3),
    st.floats(0, 2 * np.pi),
    st.floats(0, 2 * np.pi),
)
def test_bell_diagonal_parity_has_period_pi(weights, chi, phi):
    rho = bell_diagonal(weights, chi)
    assert parity(rho, phi) == pytest.approx(parity(rho, phi + np.pi), abs=1e-10)


@given(st.integers(0, 2**32 - 1), st.floats(0, 2 * np.pi))
def test_witness_ignores_global_coherence_phase(seed, theta):
    rho = random_density(seed)
    # a z rotation on one qubit shifts the phase of the dd/uu coherence
    u = np.diag(np.exp(-1j * theta / 2 * np.array([1, 1, -1, -1])))
    turned = SpinDensityMatrix(u @ rho.entries @ u.conj().T)
    a, _ = witness(rho, PHI)
    b, _ = witness(turned, PHI)
    assert b.fidelity == pytest.approx(a.fidelity, abs=1e-10)
    assert b.contrast == pytest.approx(a.contrast, abs=1e-10)
