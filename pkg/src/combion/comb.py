"""Pulse-train frequency comb and comb-driven Raman coupling.

A train of identical pulses spaced by T = 1/nu_R has a spectrum made of
teeth at multiples of nu_R under the single-pulse envelope. Two teeth whose
separation matches the qubit splitting drive a stimulated Raman transition;
because every such pair contributes, the total Rabi rate is a sum over the
whole comb.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

import numpy as np

from .errors import NotOnResonance
from .units import TWO_PI, to_angular

#: default tolerance for classifying q, as a fraction of q itself
DEFAULT_TOL_Q = 1e-3

#: teeth further than this many multiples of 1/tau (in Hz) from the carrier are dropped
TOOTH_WINDOW = 5.0

#: delta-kick validity: pulse duration times effective repetition rate must stay below this
MAX_DUTY_CYCLE = 0.1

#: adiabatic elimination validity: |detuning| / linewidth must exceed this
MIN_DETUNING_RATIO = 100.0


class Envelope(str, Enum):
    SECH = "sech"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class PulseTrainSpec:
    """The mode-locked laser.

    Frequencies in Hz, durations in seconds. ``intensity_ratio`` is the
    average intensity over the saturation intensity, s = I/I_sat; the peak
    field E0 is folded into it.
    """

    rep_rate: float
    pulse_duration: float
    carrier_frequency: float = 802e12
    envelope: Envelope = Envelope.SECH
    pick_divisor: int = 1
    pulse_count: int = 0
    intensity_ratio: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "envelope", Envelope(self.envelope))
        if not self.rep_rate > 0:
            raise ValueError(f"rep_rate must be positive, got {self.rep_rate}")
        if not self.pulse_duration > 0:
            raise ValueError(f"pulse_duration must be positive, got {self.pulse_duration}")
        if int(self.pick_divisor) != self.pick_divisor or self.pick_divisor < 1:
            raise ValueError(f"pick_divisor must be an integer >= 1, got {self.pick_divisor}")
        if self.pulse_count < 0:
            raise ValueError(f"pulse_count must be >= 0, got {self.pulse_count}")
        if self.intensity_ratio < 0:
            raise ValueError(f"intensity_ratio must be >= 0, got {self.intensity_ratio}")
        duty = self.pulse_duration * self.rep_rate / self.pick_divisor
        if not duty < MAX_DUTY_CYCLE:
            raise ValueError(
                f"pulse_duration * effective rep rate = {duty:.3g} violates the "
                f"delta-kick validity bound (< {MAX_DUTY_CYCLE})"
            )

    @property
    def period(self):
        """Time between picked pulses."""
        return 1.0 / effective_rep_rate(self)


@dataclass(frozen=True)
class TrapMode:
    trap_frequency: float
    lamb_dicke: float

    def __post_init__(self):
        if not self.trap_frequency > 0:
            raise ValueError(f"trap_frequency must be positive, got {self.trap_frequency}")
        if not 0 < self.lamb_dicke < 1:
            raise ValueError(f"lamb_dicke must lie in (0, 1), got {self.lamb_dicke}")


@dataclass(frozen=True)
class IonSpec:
    """Atomic and trap parameters, all frequencies in Hz.

    ``saturation_intensity`` is in W/cm^2. The Lamb-Dicke parameter of each
    mode is stored directly, the wavevector difference never appears alone.
    """

    qubit_splitting: float
    detuning: float
    linewidth: float
    saturation_intensity: float = 0.15
    modes: tuple = field(default_factory=tuple)

    def __post_init__(self):
        modes = tuple(m if isinstance(m, TrapMode) else TrapMode(*m) for m in self.modes)
        object.__setattr__(self, "modes", modes)
        for name in ("qubit_splitting", "detuning", "linewidth", "saturation_intensity"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not abs(self.detuning) / self.linewidth > MIN_DETUNING_RATIO:
            raise ValueError(
                f"|detuning|/linewidth = {abs(self.detuning) / self.linewidth:.3g} is too small "
                f"for adiabatic elimination (need > {MIN_DETUNING_RATIO:g})"
            )


@dataclass(frozen=True)
class BeamGeometry:
    """AO drive frequencies (Hz) of the two Raman beams.

    ``tones_on_beam1`` holds (AO frequency, amplitude fraction) pairs when
    beam 1 carries several tones; when empty, beam 1 is driven at
    ``ao1_offset`` alone. The net comb offset of each tone is its AO1
    frequency minus ``ao2_offset``.
    """

    ao1_offset: float = 0.0
    ao2_offset: float = 0.0
    tones_on_beam1: tuple = ()

    def __post_init__(self):
        tones = tuple((float(f), float(a)) for f, a in self.tones_on_beam1)
        object.__setattr__(self, "tones_on_beam1", tones)
        if tones:
            total = sum(a for _, a in tones)
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"tone amplitude fractions must sum to 1, got {total}")
            if any(a < 0 for _, a in tones):
                raise ValueError("tone amplitude fractions must be non-negative")

    @property
    def net_offset(self):
        """Net comb offset Delta omega / 2 pi = nu1 - nu2 of the primary tone."""
        return self.ao1_offset - self.ao2_offset

    def tone_offsets(self):
        """List of (net offset in Hz, amplitude fraction) for every tone."""
        if not self.tones_on_beam1:
            return [(self.net_offset, 1.0)]
        return [(f - self.ao2_offset, a) for f, a in self.tones_on_beam1]


class QClass(str, Enum):
    INTEGER = "integer"
    HALF_INTEGER = "half_integer"
    OFF_RESONANT = "off_resonant"


class QParameter(NamedTuple):
    value: float
    kind: QClass

    @property
    def nominal(self):
        """Nearest integer or half-integer (meaningful unless off resonant)."""
        return round(2.0 * self.value) / 2.0


class RabiRates(NamedTuple):
    omega: float
    omega0: float
    suppression: float
    omega_discrete: float


def effective_rep_rate(spec):
    """Repetition rate after the pulse picker passes one pulse in ``pick_divisor``."""
    return spec.rep_rate / spec.pick_divisor


def q_parameter(ion, spec, tol_q=DEFAULT_TOL_Q):
    """Ratio of qubit splitting to comb spacing, and its resonance class.

    The value is computed as ``pick_divisor * (splitting / rep_rate)`` so
    that picking scales q exactly. The class is decided by the nearest
    integer or half-integer: if q lies within ``tol_q * q`` of it, q is
    ``integer`` or ``half_integer`` accordingly, otherwise ``off_resonant``.
    The tolerance is relative because repetition rates are usually quoted
    to a fixed number of significant figures.
    """
    value = spec.pick_divisor * (ion.qubit_splitting / spec.rep_rate)
    nearest = round(2.0 * value) / 2.0
    if abs(value - nearest) >= tol_q * abs(value):
        kind = QClass.OFF_RESONANT
    elif nearest == int(nearest):
        kind = QClass.INTEGER
    else:
        kind = QClass.HALF_INTEGER
    return QParameter(value, kind)


def envelope_spectrum(spec, omega):
    """Fourier transform of a single pulse envelope at angular frequency ``omega``.

    Both envelopes have unit peak field and the same zero-frequency value
    sqrt(pi/2) * tau, with f(t) = sqrt(pi/2) sech(pi t / tau) or
    f(t) = sqrt(pi/2) exp(-pi t^2 / tau^2).
    """
    tau = spec.pulse_duration
    x = np.asarray(omega, dtype=float) * tau
    if spec.envelope is Envelope.SECH:
        # sech(x/2) written to avoid overflow in cosh for very large |x|
        shape = 2.0 * np.exp(-np.abs(x) / 2) / (1.0 + np.exp(-np.abs(x)))
    else:
        shape = np.exp(-x**2 / (4.0 * np.pi))
    return np.sqrt(np.pi / 2) * tau * shape


def comb_tooth_amplitude(spec, tooth_index):
    """Comb tooth amplitude E_k = nu_R f~(2 pi k nu_R), in units of the peak field.

    Accepts a scalar or an array of (possibly fractional) tooth indices. The
    envelopes are real and even, so the amplitudes are real and E_k = E_-k.
    """
    nu = effective_rep_rate(spec)
    k = np.asarray(tooth_index, dtype=float)
    return nu * envelope_spectrum(spec, TWO_PI * k * nu)


def suppression_factor(omega0_tau, envelope=Envelope.SECH):
    """Fraction of the full comb Rabi rate left when the pulse bandwidth is finite.

    For the sech envelope this is x / (e^{x/2} - e^{-x/2}) with x = omega0 * tau.
    """
    x = np.asarray(omega0_tau, dtype=float)
    if Envelope(envelope) is Envelope.GAUSSIAN:
        return np.exp(-x**2 / (8.0 * np.pi))
    half = x / 2.0
    safe = np.where(half == 0.0, 1.0, half)
    return np.where(half == 0.0, 1.0, safe / np.sinh(safe))


def tooth_sum(spec, q, ceo_fraction=0.0):
    """Sum over comb teeth of E_l E_{l-q}, restricted to the +-5/tau window.

    ``ceo_fraction`` shifts every tooth by that fraction of the comb spacing
    (a carrier-envelope offset); the sum barely depends on it.
    """
    nu = effective_rep_rate(spec)
    half_width = int(np.ceil(TOOTH_WINDOW / (spec.pulse_duration * nu))) + abs(int(q))
    l = np.arange(-half_width, half_width + 1) + ceo_fraction
    inside = np.abs(l * nu) <= TOOTH_WINDOW / spec.pulse_duration + abs(q) * nu
    l = l[inside]
    return float(np.sum(comb_tooth_amplitude(spec, l) * comb_tooth_amplitude(spec, l - q)))


def raman_rabi_frequency(ion, spec, require_resonance=True, tol_q=DEFAULT_TOL_Q):
    """Resonant Raman Rabi frequency of the comb, in rad/s.

    Returns ``omega0`` = s gamma^2 / (2 Delta), the suppression factor for
    the finite pulse bandwidth, their product ``omega``, and the same rate
    from the explicit tooth-pair sum normalised by sum E_l^2 (the q = 0 sum,
    which is what ``omega0`` measures).

    With ``require_resonance=False`` the rate is returned even when q is not
    an integer; that is the per-pulse coupling, which only accumulates
    coherently on resonance.
    """
    q = q_parameter(ion, spec, tol_q)
    if require_resonance and q.kind is not QClass.INTEGER:
        raise NotOnResonance(f"q = {q.value:.6g} is classified {q.kind.value}, not integer")
    gamma = to_angular(ion.linewidth)
    delta = to_angular(ion.detuning)
    omega0 = spec.intensity_ratio * gamma**2 / (2.0 * delta)
    x = to_angular(ion.qubit_splitting) * spec.pulse_duration
    supp = float(suppression_factor(x, spec.envelope))
    q_int = int(round(q.value))
    discrete = omega0 * tooth_sum(spec, q_int) / tooth_sum(spec, 0)
    return RabiRates(omega0 * supp, omega0, supp, discrete)


def pulse_area(ion, spec, omega=None, require_resonance=True):
    """Bloch angle swept by one picked pulse, theta_p = Omega * T.

    ``omega`` (rad/s) overrides the rate computed from the laser and ion.
    """
    if omega is None:
        omega = raman_rabi_frequency(ion, spec, require_resonance=require_resonance).omega
    return omega * spec.period
