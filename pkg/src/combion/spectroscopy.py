"""Carrier Rabi flopping, resolved sideband spectra and sideband cooling."""
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.special import eval_genlaguerre, gammaln

from .comb import DEFAULT_TOL_Q, QClass, TrapMode, effective_rep_rate, q_parameter, raman_rabi_frequency
from .dynamics import (
    FrameConfig,
    KickConfig,
    Tone,
    min_pulses_for_resolution,
    propagate_batch,
    stroboscopic_map,
)
from .errors import CutoffTooSmall, InvalidRatio
from .hilbert import LEAKAGE_LIMIT, FockSpace, thermal_cutoff, thermal_population
from .units import TWO_PI, to_angular

#: thermal tail mass ignored when averaging spectra over initial Fock states
SPECTRUM_TAIL = 1e-8


class RabiPoint(NamedTuple):
    time: float
    n_pulses: int
    p_up: float


def carrier_rabi_scan(ion, spec, durations, lock_to_resonance=True, omega=None, tol_q=DEFAULT_TOL_Q):
    """Spin-flip probability from |down> after each probe duration (seconds).

    Motion is ignored (eta = 0). When ``lock_to_resonance`` is set and q is
    within tolerance of an integer or half-integer, the repetition rate is
    taken to be locked so that q equals that nominal value exactly, which is
    how the experiment runs; quoted repetition rates are rounded. ``omega``
    (rad/s) overrides the comb Rabi rate. Returned times are whole numbers
    of pulse periods. ``tol_q`` is the relative tolerance used to classify q.
    """
    q = q_parameter(ion, spec, tol_q)
    if lock_to_resonance and q.kind is not QClass.OFF_RESONANT:
        period = q.nominal / ion.qubit_splitting
    else:
        period = spec.period
    if omega is None:
        omega = raman_rabi_frequency(ion, spec, require_resonance=False, tol_q=tol_q).omega
    cfg = KickConfig(omega * period, period)
    frame = FrameConfig(1.0, to_angular(ion.qubit_splitting))
    fock = FockSpace(2)

    counts = np.rint(np.asarray(durations, dtype=float) / period).astype(int)
    if np.any(counts < 0):
        raise ValueError("durations must be non-negative")
    order = np.argsort(counts, kind="stable")
    psi = np.zeros((1, 2, 2), dtype=complex)
    psi[0, 0, 0] = 1.0
    done = 0
    p_up = np.empty(len(counts))
    for idx in order:
        psi, _ = propagate_batch(psi, cfg, frame, counts[idx] - done, 1, fock)
        done = counts[idx]
        p_up[idx] = float(np.sum(np.abs(psi[0, 1]) ** 2))
    return [RabiPoint(n * period, int(n), float(p)) for n, p in zip(counts, p_up)]


@dataclass(frozen=True)
class SpectrumScanConfig:
    """Sideband scan of the net comb offset.

    ``delta_omega_grid`` holds net offsets Delta omega / 2 pi in Hz (sorted),
    ``qubit_splitting`` is in Hz and ``period`` is the picked pulse period.
    """

    delta_omega_grid: tuple
    probe_duration: float
    modes: tuple
    theta_p: float
    qubit_splitting: float
    period: float
    initial_nbar: tuple = ()

    def __post_init__(self):
        grid = tuple(float(x) for x in self.delta_omega_grid)
        if not grid:
            raise ValueError("delta_omega_grid must not be empty")
        if any(b < a for a, b in zip(grid, grid[1:])):
            raise ValueError("delta_omega_grid must be sorted")
        object.__setattr__(self, "delta_omega_grid", grid)
        modes = tuple(m if isinstance(m, TrapMode) else TrapMode(*m) for m in self.modes)
        object.__setattr__(self, "modes", modes)
        nbar = tuple(float(x) for x in self.initial_nbar) or (0.0,) * len(modes)
        if len(nbar) != len(modes):
            raise ValueError("initial_nbar needs one entry per mode")
        if any(x < 0 for x in nbar):
            raise ValueError("initial_nbar must be non-negative")
        object.__setattr__(self, "initial_nbar", nbar)
        if not self.probe_duration > 0:
            raise ValueError("probe_duration must be positive")
        if not self.period > 0 or self.theta_p < 0:
            raise ValueError("period must be positive and theta_p non-negative")

    @property
    def n_pulses(self):
        return int(round(self.probe_duration / self.period))


class SpectrumRow(NamedTuple):
    delta_omega: float
    flip_probability: float
    branch_labels: tuple


@dataclass(frozen=True)
class SpectrumResult:
    rows: tuple
    n_pulses: int
    theta_p: float
    modes: tuple
    leakage: float = 0.0
    warnings: tuple = field(default=())

    @property
    def delta_omega(self):
        return np.array([r.delta_omega for r in self.rows])

    @property
    def flip_probability(self):
        return np.array([r.flip_probability for r in self.rows])


def feature_label(mode_index, dn, n_modes):
    """Phonon-change label such as '(0,0)', '(-1,0)' or '(0,+1)'."""
    parts = ["0"] * max(n_modes, 1)
    if dn:
        parts[mode_index] = f"{dn:+d}"
    return "(" + ",".join(parts) + ")"


def _features(cfg):
    """(label, phonon frequency shift in Hz) for the carrier and first sidebands."""
    feats = [(feature_label(0, 0, len(cfg.modes)), 0.0)]
    for i, mode in enumerate(cfg.modes):
        feats.append((feature_label(i, -1, len(cfg.modes)), -mode.trap_frequency))
        feats.append((feature_label(i, +1, len(cfg.modes)), +mode.trap_frequency))
    return feats


def feature_offsets(cfg, near):
    """Net offset (Hz) of each resonance closest to ``near``.

    A feature with phonon shift s is resonant when (f0 + df + s) T is an
    integer.
    """
    out = {}
    for label, shift in _features(cfg):
        k = np.round((cfg.qubit_splitting + near + shift) * cfg.period)
        out[label] = k / cfg.period - cfg.qubit_splitting - shift
    return out


def _labels_at(cfg, df):
    width = 0.5 / (cfg.n_pulses * cfg.period)
    labels = []
    for label, shift in _features(cfg):
        turns = (cfg.qubit_splitting + df + shift) * cfg.period
        if abs(turns - np.round(turns)) / cfg.period < width:
            labels.append(label)
    return tuple(labels)


def franck_condon(n_from, n_to, eta):
    """|<n_to| D(i eta) |n_from>|, elementwise over integer arrays."""
    n_from, n_to = np.broadcast_arrays(np.asarray(n_from), np.asarray(n_to))
    lo = np.minimum(n_from, n_to)
    dn = np.abs(n_to - n_from)
    x = eta**2
    ratio = np.exp(0.5 * (gammaln(lo + 1) - gammaln(lo + dn + 1)))
    out = np.exp(-x / 2) * ratio * eta**dn * np.abs(eval_genlaguerre(lo, dn, x))
    return np.where(n_to >= 0, out, 0.0)


def _rabi_flip(coupling, half_angle, n):
    """Flip probability after n pulses for per-pulse coupling g and detuning half-angle.

    g^2 / (g^2 + s^2) sin^2(n sqrt(g^2 + s^2)) with s = sin(half_angle): the
    Rabi formula for an isolated resonance, written with the periodic
    detuning so that the weak-drive limit is g^2 |G|^2 exactly.
    """
    s2 = np.sin(half_angle) ** 2
    g2 = coupling**2
    r2 = g2 + s2
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(r2 > 0, g2 / r2 * np.sin(n * np.sqrt(r2)) ** 2, 0.0)
    return out


def _first_order_spectrum(cfg):
    grid = np.asarray(cfg.delta_omega_grid)
    n = cfg.n_pulses
    half = cfg.theta_p / 2.0
    base = cfg.qubit_splitting + grid

    def half_angle(shift):
        return np.pi * np.mod((base + shift) * cfg.period, 1.0)

    carrier_angle = half_angle(0.0)
    if not cfg.modes:
        return _rabi_flip(half, carrier_angle, n)
    side_angles = [(half_angle(-m.trap_frequency), half_angle(m.trap_frequency)) for m in cfg.modes]
    levels = []
    for nbar in cfg.initial_nbar:
        cut = thermal_cutoff(nbar, SPECTRUM_TAIL)
        levels.append(thermal_population(nbar, FockSpace(cut), tail_tol=SPECTRUM_TAIL))
    weights = levels[0]
    for p in levels[1:]:
        weights = np.multiply.outer(weights, p)

    flip = np.zeros_like(grid)
    kept = 0.0
    for idx in np.ndindex(weights.shape):
        w = weights[idx]
        if w < 1e-14:
            continue
        kept += w
        stay = [franck_condon(nm, nm, m.lamb_dicke) for nm, m in zip(idx, cfg.modes)]
        total = _rabi_flip(half * np.prod(stay), carrier_angle, n)
        for k, (nm, mode) in enumerate(zip(idx, cfg.modes)):
            others = np.prod(stay[:k] + stay[k + 1 :])
            red_angle, blue_angle = side_angles[k]
            if nm > 0:
                total = total + _rabi_flip(half * others * franck_condon(nm, nm - 1, mode.lamb_dicke), red_angle, n)
            total = total + _rabi_flip(half * others * franck_condon(nm, nm + 1, mode.lamb_dicke), blue_angle, n)
        flip += w * np.minimum(total, 1.0)
    return flip / kept


def _exact_point(cfg, df, fock, levels, weights):
    mode = cfg.modes[0]
    kick = KickConfig(cfg.theta_p, cfg.period, mode.lamb_dicke, (Tone(to_angular(df)),))
    frame = FrameConfig(to_angular(mode.trap_frequency), to_angular(cfg.qubit_splitting))
    v = np.linalg.matrix_power(stroboscopic_map(kick, frame, fock), cfg.n_pulses)
    cols = v[:, levels]  # columns |down, n>
    up = np.abs(cols[fock.cutoff:, :]) ** 2
    flip = float(weights @ up.sum(axis=0))
    probs = np.abs(cols) ** 2
    top = probs[fock.cutoff - 2 : fock.cutoff].sum(axis=0) + probs[-2:].sum(axis=0)
    return flip, float(weights @ top)


def _exact_spectrum(cfg, threads=1):
    if len(cfg.modes) != 1:
        raise ValueError("exact spectra support a single motional mode")
    nbar = cfg.initial_nbar[0]
    n_max = thermal_cutoff(nbar, SPECTRUM_TAIL)
    fock = FockSpace(n_max + 12)
    p = thermal_population(nbar, FockSpace(n_max), tail_tol=SPECTRUM_TAIL)
    levels = np.flatnonzero(p > 1e-14)
    weights = p[levels] / p[levels].sum()
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(lambda df: _exact_point(cfg, df, fock, levels, weights), cfg.delta_omega_grid))
    flips = np.array([r[0] for r in results])
    leak = max(r[1] for r in results)
    if leak > LEAKAGE_LIMIT:
        raise CutoffTooSmall(f"exact spectrum leaked {leak:.2e} at cutoff {fock.cutoff}", leakage=leak)
    return flips, leak


def sideband_spectrum(cfg, exact=False, threads=1):
    """Spin-flip probability across the offset grid.

    The default engine treats the carrier and each first sideband as an
    isolated two-level resonance: for an initial Fock configuration each
    feature contributes a Rabi lineshape with its Franck-Condon coupling,
    and the result is averaged over the thermal distribution of every mode.
    Its weak-drive limit is the first-order geometric-sum amplitude. ``exact`` runs the
    stroboscopic propagator instead (single mode only).
    """
    notes = []
    for mode in cfg.modes:
        bound = min_pulses_for_resolution(to_angular(mode.trap_frequency), cfg.period, mode.lamb_dicke)
        if cfg.n_pulses <= bound:
            msg = f"N = {cfg.n_pulses} does not resolve the {mode.trap_frequency:.4g} Hz sidebands (needs N >> {bound:.3g})"
            warnings.warn(msg, RuntimeWarning, stacklevel=2)
            notes.append(msg)
    leak = 0.0
    if exact:
        flips, leak = _exact_spectrum(cfg, threads)
    else:
        flips = _first_order_spectrum(cfg)
    flips = np.clip(flips, 0.0, 1.0)
    rows = tuple(
        SpectrumRow(df, float(p), _labels_at(cfg, df)) for df, p in zip(cfg.delta_omega_grid, flips)
    )
    return SpectrumResult(rows, cfg.n_pulses, cfg.theta_p, cfg.modes, leak, tuple(notes))


def line_fwhm(x, y, center):
    """Full width at half maximum of the peak in ``y`` nearest ``center``.

    Half-maximum crossings are located by linear interpolation.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    i = int(np.argmin(np.abs(x - center)))
    # climb to the local maximum
    while 0 < i < len(y) - 1 and max(y[i - 1], y[i + 1]) > y[i]:
        i = i + 1 if y[i + 1] > y[i - 1] else i - 1
    half = y[i] / 2.0
    lo = i
    while lo > 0 and y[lo] > half:
        lo -= 1
    hi = i
    while hi < len(y) - 1 and y[hi] > half:
        hi += 1
    if y[lo] > half or y[hi] > half:
        raise ValueError("peak does not fall below half maximum inside the grid")
    left = np.interp(half, [y[lo], y[lo + 1]], [x[lo], x[lo + 1]])
    right = np.interp(half, [y[hi], y[hi - 1]], [x[hi], x[hi - 1]])
    return float(right - left)


def thermometry_nbar(red_strength, blue_strength):
    """Mean phonon number from the red/blue sideband ratio r: nbar = r / (1 - r)."""
    if blue_strength <= 0 or red_strength < 0 or red_strength >= blue_strength:
        raise InvalidRatio(
            f"need 0 <= red < blue, got red={red_strength:.3g}, blue={blue_strength:.3g}"
        )
    r = red_strength / blue_strength
    return r / (1.0 - r)


@dataclass(frozen=True)
class CoolingConfig:
    """Pulsed sideband cooling schedule.

    Every cycle runs ``pulses_per_cycle`` red-sideband pulses, each followed
    by an ideal spin reset. Pulse k of a cycle (k = 0, 1, ...) is a pi pulse
    for the n = pulses_per_cycle - k -> n - 1 transition, so the last pulse
    is the n = 1 -> 0 pi pulse. ``recoil_heating_per_cycle`` adds that many
    quanta on average after each cycle.
    """

    cycles: int
    pulses_per_cycle: int = 5
    initial_nbar: float = 10.0
    recoil_heating_per_cycle: float = 0.0

    def __post_init__(self):
        if self.cycles < 0:
            raise ValueError("cycles must be >= 0")
        if self.pulses_per_cycle < 1:
            raise ValueError("pulses_per_cycle must be >= 1")
        if self.initial_nbar < 0:
            raise ValueError("initial_nbar must be >= 0")
        if not 0 <= self.recoil_heating_per_cycle <= 1:
            raise ValueError("recoil_heating_per_cycle must lie in [0, 1]")


class CoolingPoint(NamedTuple):
    cycle: int
    nbar: float


@dataclass(frozen=True)
class CoolingResult:
    rows: tuple
    populations: np.ndarray

    def cycles_to_reach(self, target):
        """First cycle at which nbar <= target, or None."""
        for row in self.rows:
            if row.nbar <= target:
                return row.cycle
        return None

    @property
    def final_nbar(self):
        return self.rows[-1].nbar


def red_sideband_transfer(n, n_ref):
    """Transfer probability of a pulse tuned as a pi pulse for n_ref -> n_ref - 1.

    Uses the first-order sideband Rabi rate, which grows as sqrt(n).
    """
    return np.sin(np.pi * np.sqrt(n) / (2.0 * np.sqrt(n_ref))) ** 2


def sideband_cool(ion, cfg, mode=0, cutoff=None):
    """Rate model of sideband cooling on the Fock diagonal; returns the nbar trajectory.

    ``ion`` may be None; when given, its mode is checked against the
    Lamb-Dicke regime.
    """
    if ion is not None and ion.modes:
        eta = ion.modes[mode].lamb_dicke
        if eta * np.sqrt(cfg.initial_nbar + 1) > 0.3:
            warnings.warn("initial state is outside the Lamb-Dicke regime", RuntimeWarning, stacklevel=2)
    if cutoff is None:
        cutoff = thermal_cutoff(cfg.initial_nbar, 1e-6)
    fock = FockSpace(max(cutoff, cfg.pulses_per_cycle + 2))
    p = thermal_population(cfg.initial_nbar, fock)
    n = np.arange(fock.cutoff)
    transfers = [red_sideband_transfer(n, n_ref) for n_ref in range(cfg.pulses_per_cycle, 0, -1)]
    eps = cfg.recoil_heating_per_cycle

    rows = [CoolingPoint(0, float(n @ p))]
    for cycle in range(1, cfg.cycles + 1):
        for moved in transfers:
            flow = moved * p
            p = p - flow
            p[:-1] += flow[1:]
        if eps:
            up = eps * p[:-1]
            p = p.copy()
            p[:-1] -= up
            p[1:] += up
        rows.append(CoolingPoint(cycle, float(n @ p)))
    return CoolingResult(tuple(rows), p)
