"""Stroboscopic evolution under a train of instantaneous Raman kicks.

Each picked pulse is treated as a delta kick

    K = exp[-i theta_p/2 (sigma_+ c D(i eta) + h.c.)],   c = sum_k w_k e^{i(dw_k t_n + phi_k)}

followed by free evolution F = exp[-i H0 T] with
H0 = omega_t a^dag a + (omega_0 + dw)/2 sigma_z, so that N pulses give
(F K)^N. Because D(i eta) is unitary, the kick generator squares to |c|^2
and the kick has the closed form cos(|c| theta/2) - i sin(|c| theta/2) M/|c|,
which is exact (no small-angle expansion). Two ions sharing one mode are
kicked together; their generators commute, so the kicks factorise.

The first-order (Lamb-Dicke, single-scattering) resummation of (F K)^N is
provided separately as :func:`first_order_amplitudes` for comparison.
"""
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

from .errors import CutoffTooSmall
from .hilbert import (
    LEAKAGE_LIMIT,
    SIGMA_MINUS,
    SIGMA_PLUS,
    QuantumState,
    displacement_operator,
    spin_operator,
)
from .units import TWO_PI


class Tone(NamedTuple):
    """One comb pair: net offset ``delta_omega`` (rad/s), phase, amplitude weight."""

    delta_omega: float
    phase: float = 0.0
    weight: float = 1.0


@dataclass(frozen=True)
class KickConfig:
    theta_p: float
    period: float
    eta: float = 0.0
    tones: tuple = (Tone(0.0),)

    def __post_init__(self):
        tones = tuple(t if isinstance(t, Tone) else Tone(*t) for t in self.tones)
        object.__setattr__(self, "tones", tones)
        if not tones:
            raise ValueError("at least one tone is required")
        if abs(sum(t.weight for t in tones) - 1.0) > 1e-9:
            raise ValueError("tone weights must sum to 1")
        if self.theta_p < 0:
            raise ValueError(f"theta_p must be >= 0, got {self.theta_p}")
        if not self.period > 0:
            raise ValueError(f"period must be positive, got {self.period}")
        if self.eta < 0:
            raise ValueError(f"eta must be >= 0, got {self.eta}")


@dataclass(frozen=True)
class FrameConfig:
    """Free-evolution frequencies in rad/s.

    Tone offsets in :class:`KickConfig` are measured relative to
    ``omega_0_plus_dw``: a single tone can carry its offset either in the
    frame or in the tone, and the populations come out the same.
    """

    omega_t: float
    omega_0_plus_dw: float = 0.0

    def __post_init__(self):
        if not self.omega_t > 0:
            raise ValueError(f"omega_t must be positive, got {self.omega_t}")


class Branch(str, Enum):
    CARRIER = "carrier"
    RED = "red"
    BLUE = "blue"


class ResonanceAngle(NamedTuple):
    theta: float
    branch: Branch


class BranchAmplitudes(NamedTuple):
    """First-order amplitudes <up, n'| V^N |down, n>, per sqrt(n) (red) or sqrt(n+1) (blue).

    The common phase of exp(-i H0 N T) is dropped.
    """

    carrier: complex
    red: complex
    blue: complex

    def probabilities(self, n):
        """Transition probabilities out of |down, n> to first order."""
        return {
            Branch.CARRIER: abs(self.carrier) ** 2,
            Branch.RED: abs(self.red) ** 2 * n,
            Branch.BLUE: abs(self.blue) ** 2 * (n + 1),
        }


def _cycles(omega, period):
    """Phase advance omega*period in units of full turns, reduced to [0, 1)."""
    return np.mod(np.asarray(omega, dtype=float) * period / TWO_PI, 1.0)


def resonance_angle(omega, period, branch=Branch.CARRIER):
    """theta = omega * period mod 2 pi, for the given branch."""
    return ResonanceAngle(float(TWO_PI * _cycles(omega, period)), Branch(branch))


def branch_angles(cfg, frame, tone):
    """Carrier, red and blue resonance angles of one tone."""
    base = frame.omega_0_plus_dw + tone.delta_omega
    return {
        Branch.CARRIER: resonance_angle(base, cfg.period, Branch.CARRIER),
        Branch.RED: resonance_angle(base - frame.omega_t, cfg.period, Branch.RED),
        Branch.BLUE: resonance_angle(base + frame.omega_t, cfg.period, Branch.BLUE),
    }


# 2 pi split so that m * _2PI_HI is exact for any realistic turn count m
_2PI_HI = 6.28125
_2PI_MID = 0.001935307179586477
_2PI_LO = -1.0033115225336665e-19


def reduce_angle(theta):
    """theta - 2 pi m in (-pi, pi], accurate to ~1e-16 absolute.

    A plain ``theta - TWO_PI * m`` inherits the rounding of TWO_PI times m,
    which N^2-sized factors in the pulse sums would amplify.
    """
    theta = np.asarray(theta, dtype=float)
    m = np.round(theta / TWO_PI)
    return ((theta - m * _2PI_HI) - m * _2PI_MID) - m * _2PI_LO


def geometric_sum(theta, n_pulses):
    """sum_{n=0}^{N-1} e^{i n theta} = e^{i theta (N-1)/2} sin(N theta/2) / sin(theta/2).

    Vectorised over ``theta``. The angle is first reduced to (-pi, pi] (the
    sum is 2 pi periodic); where |sin(theta/2)| < 1e-12 the limit N is used.
    """
    reduced = reduce_angle(theta)
    half = reduced / 2.0
    s = np.sin(half)
    degenerate = np.abs(s) < 1e-12
    ratio = np.where(degenerate, float(n_pulses), np.sin(n_pulses * half) / np.where(degenerate, 1.0, s))
    return ratio * np.exp(1j * reduced * (n_pulses - 1) / 2.0)


def tone_coefficient(cfg, pulse_index):
    """c_n = sum_k w_k exp(i (dw_k n T + phi_k))."""
    c = 0j
    for tone in cfg.tones:
        turns = np.mod(_cycles(tone.delta_omega, cfg.period) * pulse_index, 1.0)
        c += tone.weight * np.exp(1j * (TWO_PI * turns + tone.phase))
    return c


def _motion_coupling(eta, fock):
    if eta == 0:
        return np.eye(fock.cutoff, dtype=complex)
    return np.asarray(displacement_operator(1j * eta, fock))


def kick_generator(cfg, pulse_index, fock, num_qubits=1):
    """Hermitian G with kick = exp(-i G); G = theta_p/2 sum_ions (sigma_+ c D(i eta) + h.c.)."""
    a_op = _motion_coupling(cfg.eta, fock)
    c = tone_coefficient(cfg, pulse_index)
    gen = np.zeros((2**num_qubits * fock.cutoff,) * 2, dtype=complex)
    for q in range(num_qubits):
        up = np.kron(spin_operator(SIGMA_PLUS, q, num_qubits), c * a_op)
        gen += up + up.conj().T
    return cfg.theta_p / 2.0 * gen


def kick_operator(cfg, pulse_index, fock, num_qubits=1):
    """Unitary of the kick at t_n = n T, built from the closed form."""
    a_op = _motion_coupling(cfg.eta, fock)
    c = tone_coefficient(cfg, pulse_index)
    dim = 2**num_qubits * fock.cutoff
    out = np.eye(dim, dtype=complex)
    mag = abs(c)
    if mag == 0 or cfg.theta_p == 0:
        return out
    angle = mag * cfg.theta_p / 2.0
    for q in range(num_qubits):
        m = np.kron(spin_operator(SIGMA_PLUS, q, num_qubits), (c / mag) * a_op)
        m = m + m.conj().T
        out = (np.cos(angle) * np.eye(dim) - 1j * np.sin(angle) * m) @ out
    return out


def free_evolution_phases(frame, period, fock, num_qubits=1):
    """Diagonal of exp(-i H0 T) in the spin-major basis, shaped like the state tensor."""
    n = np.arange(fock.cutoff)
    motion_turns = _cycles(frame.omega_t, period) * n
    spin_turn = _cycles(frame.omega_0_plus_dw, period)
    sz = np.zeros((2,) * num_qubits)
    for q in range(num_qubits):
        shape = [1] * num_qubits
        shape[q] = 2
        sz = sz + np.array([-1.0, 1.0]).reshape(shape)
    turns = (spin_turn * sz / 2.0)[..., None] + motion_turns
    return np.exp(-1j * TWO_PI * np.mod(turns, 1.0))


def _apply_kick(psi, a_op, c, theta_p, num_qubits):
    """Apply the kick to a batch of state tensors, shape (B, 2, [2,] cutoff)."""
    mag = abs(c)
    if mag == 0 or theta_p == 0:
        return psi
    angle = mag * theta_p / 2.0
    cos_a, sin_a = np.cos(angle), np.sin(angle)
    phase = c / mag
    a_t = a_op.T
    a_h = a_op.conj()
    for q in range(num_qubits):
        axis = 1 + q
        down = np.take(psi, 0, axis=axis)
        up = np.take(psi, 1, axis=axis)
        new_up = cos_a * up - 1j * sin_a * phase * (down @ a_t)
        new_down = cos_a * down - 1j * sin_a * np.conj(phase) * (up @ a_h)
        psi = np.stack([new_down, new_up], axis=axis)
    return psi


def _top_population(psi):
    probs = np.abs(psi[..., -2:]) ** 2
    return probs.reshape(psi.shape[0], -1).sum(axis=1)


def propagate_batch(psi, cfg, frame, n_pulses, num_qubits, fock):
    """Propagate a stack of state tensors; returns (final stack, per-member max leakage)."""
    a_op = _motion_coupling(cfg.eta, fock)
    phases = free_evolution_phases(frame, cfg.period, fock, num_qubits)[None]
    leak = _top_population(psi)
    constant = all(_cycles(t.delta_omega, cfg.period) == 0 for t in cfg.tones)
    c0 = tone_coefficient(cfg, 0)
    for n in range(n_pulses):
        c = c0 if constant else tone_coefficient(cfg, n)
        psi = _apply_kick(psi, a_op, c, cfg.theta_p, num_qubits) * phases
        leak = np.maximum(leak, _top_population(psi))
    return psi, leak


def propagate(state, cfg, frame, n_pulses, check_leakage=True):
    """Apply (F K_n) for n = 0 .. N-1 to ``state``.

    The returned state records the largest top-two-level population seen
    along the way; above LEAKAGE_LIMIT a CutoffTooSmall is raised unless
    ``check_leakage`` is off. With eta = 0 the motion is a spectator and
    no leakage is recorded.
    """
    if n_pulses < 0:
        raise ValueError(f"pulse count must be >= 0, got {n_pulses}")
    psi = state.tensor()[None]
    psi, leak = propagate_batch(psi, cfg, frame, int(n_pulses), state.num_qubits, state.fock)
    leakage = max(float(leak[0]) if cfg.eta else 0.0, state.leakage)
    if check_leakage and leakage > LEAKAGE_LIMIT:
        raise CutoffTooSmall(
            f"top-two Fock population reached {leakage:.2e} (cutoff {state.fock.cutoff})",
            leakage=leakage,
        )
    return QuantumState(state.num_qubits, state.fock, psi[0].reshape(-1), leakage)


def stroboscopic_map(cfg, frame, fock, num_qubits=1):
    """One-period map V = F K as a matrix, for a single tone.

    The tone offset is folded into the frame so that V does not depend on
    the pulse index; V^N then gives the same populations as :func:`propagate`.
    """
    if len(cfg.tones) != 1:
        raise ValueError("stroboscopic_map needs a single-tone configuration")
    tone = cfg.tones[0]
    folded = FrameConfig(frame.omega_t, frame.omega_0_plus_dw + tone.delta_omega)
    still = KickConfig(cfg.theta_p, cfg.period, cfg.eta, (Tone(0.0, tone.phase, 1.0),))
    phases = free_evolution_phases(folded, cfg.period, fock, num_qubits).reshape(-1)
    return phases[:, None] * kick_operator(still, 0, fock, num_qubits)


def first_order_amplitudes(cfg, frame, n_pulses, nbar=0.0):
    """Resummed first-order amplitudes of (F K)^N for carrier, red and blue branches.

    Expanding each kick to first order in theta_p and D(i eta) to first
    order in eta turns the pulse sum into a geometric series per branch:
    the carrier goes as sin(N theta_c/2)/sin(theta_c/2), the sidebands carry
    an extra eta.
    """
    if cfg.eta * np.sqrt(nbar + 1.0) > 0.3:
        warnings.warn(
            f"eta*sqrt(nbar+1) = {cfg.eta * np.sqrt(nbar + 1.0):.3g} is outside the Lamb-Dicke regime",
            RuntimeWarning,
            stacklevel=2,
        )
    half = cfg.theta_p / 2.0
    carrier = red = blue = 0j
    for tone in cfg.tones:
        angles = branch_angles(cfg, frame, tone)
        pref = tone.weight * np.exp(1j * tone.phase)
        carrier += pref * geometric_sum(angles[Branch.CARRIER].theta, n_pulses)
        red += pref * geometric_sum(angles[Branch.RED].theta, n_pulses)
        blue += pref * geometric_sum(angles[Branch.BLUE].theta, n_pulses)
    # -i theta/2 from the kick, i eta from the displacement
    return BranchAmplitudes(
        complex(-1j * half * carrier),
        complex(half * cfg.eta * red),
        complex(half * cfg.eta * blue),
    )


def first_order_transition_amplitude(cfg, frame, n_pulses, n_from, n_to, fock):
    """<up, n_to| V^N |down, n_from> to first order in theta_p, all orders in eta.

    Uses the exact Fock matrix element of D(i eta) in place of its
    Lamb-Dicke expansion; the phonon change n_to - n_from picks the
    resonance angle theta_c + (n_to - n_from) omega_t T. The common phase of
    exp(-i H0 N T) is dropped.
    """
    element = _motion_coupling(cfg.eta, fock)[n_to, n_from]
    shift = (n_to - n_from) * frame.omega_t
    total = 0j
    for tone in cfg.tones:
        theta = resonance_angle(frame.omega_0_plus_dw + tone.delta_omega + shift, cfg.period).theta
        total += tone.weight * np.exp(1j * tone.phase) * geometric_sum(theta, n_pulses)
    return complex(-0.5j * cfg.theta_p * element * total)


def min_pulses_for_resolution(omega_t, period, eta):
    """(omega_t T eta)^-1: sidebands are resolved once N is well above this."""
    if omega_t <= 0 or period <= 0 or eta <= 0:
        raise ValueError("omega_t, period and eta must be positive")
    return 1.0 / (omega_t * period * eta)


def to_lab_frame(state, delta_omega, t):
    """Undo the rotation at the net comb offset (only spin phases change)."""
    sz = np.zeros((2,) * state.num_qubits)
    for q in range(state.num_qubits):
        shape = [1] * state.num_qubits
        shape[q] = 2
        sz = sz + np.array([-1.0, 1.0]).reshape(shape)
    phase = np.exp(0.5j * delta_omega * t * sz)[..., None]
    return QuantumState(state.num_qubits, state.fock, (state.tensor() * phase).reshape(-1), state.leakage)
