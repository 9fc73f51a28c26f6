"""Dense linear algebra on qubit^m (x) truncated Fock spaces.

Basis ordering is spin-major: for m qubits and a Fock cutoff c, the
amplitude of |s_1 ... s_m, n> sits at index (s_1 ... s_m read as a binary
number) * c + n, with |down> = 0 and |up> = 1. Use :func:`basis_index` and
:meth:`QuantumState.tensor` rather than doing this arithmetic by hand.
"""
import hashlib
import threading
import warnings
from collections import OrderedDict
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import CutoffTooSmall

#: population allowed in the top two Fock levels before a result is rejected
LEAKAGE_LIMIT = 1e-6

DOWN, UP = 0, 1

SIGMA_PLUS = np.array([[0, 0], [1, 0]], dtype=complex)  # |up><down|
SIGMA_MINUS = SIGMA_PLUS.T.copy()
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, 1j], [-1j, 0]], dtype=complex)
SIGMA_Z = np.array([[-1, 0], [0, 1]], dtype=complex)


@dataclass(frozen=True)
class FockSpace:
    cutoff: int

    def __post_init__(self):
        if int(self.cutoff) != self.cutoff or self.cutoff < 2:
            raise ValueError(f"cutoff must be an integer >= 2, got {self.cutoff}")

    def annihilation(self):
        return _annihilation(self.cutoff)

    def creation(self):
        return _annihilation(self.cutoff).T.copy()

    def number(self):
        return np.diag(np.arange(self.cutoff, dtype=complex))


@lru_cache(maxsize=None)
def _annihilation(cutoff):
    a = np.diag(np.sqrt(np.arange(1, cutoff, dtype=float)), k=1).astype(complex)
    a.flags.writeable = False
    return a


def basis_index(spins, n, fock):
    """Flat index of |spins, n>; ``spins`` is a sequence of 0 (down) / 1 (up)."""
    s = 0
    for bit in spins:
        s = 2 * s + int(bit)
    if not 0 <= n < fock.cutoff:
        raise IndexError(f"Fock level {n} outside cutoff {fock.cutoff}")
    return s * fock.cutoff + n


def _frozen(array):
    array = np.array(array, dtype=complex)
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class QuantumState:
    """Pure state of m in {1, 2} qubits sharing one truncated motional mode.

    ``leakage`` carries the largest top-two-level population seen while the
    state was being propagated (0 for freshly built states).
    """

    num_qubits: int
    fock: FockSpace
    amplitudes: np.ndarray
    leakage: float = 0.0

    def __post_init__(self):
        if self.num_qubits not in (1, 2):
            raise ValueError(f"num_qubits must be 1 or 2, got {self.num_qubits}")
        amps = _frozen(self.amplitudes).reshape(-1)
        if amps.size != 2**self.num_qubits * self.fock.cutoff:
            raise ValueError(
                f"expected {2**self.num_qubits * self.fock.cutoff} amplitudes, got {amps.size}"
            )
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def basis(cls, spins, n, fock):
        amps = np.zeros(2 ** len(spins) * fock.cutoff, dtype=complex)
        amps[basis_index(spins, n, fock)] = 1.0
        return cls(len(spins), fock, amps)

    @classmethod
    def product(cls, spin_vector, motion_vector, fock):
        spin_vector = np.asarray(spin_vector, dtype=complex)
        motion = np.zeros(fock.cutoff, dtype=complex)
        motion[: len(motion_vector)] = motion_vector
        num_qubits = int(np.log2(spin_vector.size))
        return cls(num_qubits, fock, np.kron(spin_vector, motion)).normalized()

    def tensor(self):
        """Amplitudes as an array of shape (2,)*m + (cutoff,)."""
        return self.amplitudes.reshape((2,) * self.num_qubits + (self.fock.cutoff,))

    def norm(self):
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self):
        return QuantumState(self.num_qubits, self.fock, self.amplitudes / self.norm(), self.leakage)

    def top_population(self):
        """Population in the two highest Fock levels (the leakage monitor)."""
        probs = np.abs(self.amplitudes.reshape(-1, self.fock.cutoff)) ** 2
        return float(probs[:, -2:].sum())

    def spin_populations(self):
        """Probabilities of each spin configuration, in basis order."""
        probs = np.abs(self.amplitudes.reshape(-1, self.fock.cutoff)) ** 2
        return probs.sum(axis=1)

    def fock_populations(self):
        probs = np.abs(self.amplitudes.reshape(-1, self.fock.cutoff)) ** 2
        return probs.sum(axis=0)


@dataclass(frozen=True, eq=False)
class SpinDensityMatrix:
    entries: np.ndarray
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        rho = _frozen(self.entries)
        object.__setattr__(self, "entries", rho)
        dim = rho.shape[0]
        if rho.shape != (dim, dim) or dim not in (2, 4):
            raise ValueError(f"spin density matrix must be 2x2 or 4x4, got {rho.shape}")
        if not self.validate:
            return
        if np.max(np.abs(rho - rho.conj().T)) > 1e-10:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(rho) - 1.0) > 1e-10:
            raise ValueError(f"density matrix trace is {np.trace(rho).real:.12g}, not 1")
        if np.linalg.eigvalsh(rho).min() < -1e-9:
            raise ValueError("density matrix is not positive semidefinite")

    @property
    def dimension(self):
        return self.entries.shape[0]

    @property
    def num_qubits(self):
        return 1 if self.dimension == 2 else 2

    def populations(self):
        return self.entries.diagonal().real.copy()

    def purity(self):
        return float(np.real(np.trace(self.entries @ self.entries)))

    @classmethod
    def pure(cls, spin_vector):
        v = np.asarray(spin_vector, dtype=complex)
        v = v / np.linalg.norm(v)
        return cls(np.outer(v, v.conj()))

    @classmethod
    def mixture(cls, weights, matrices):
        weights = np.asarray(weights, dtype=float)
        weights = weights / weights.sum()
        total = sum(w * m.entries for w, m in zip(weights, matrices))
        return cls(total)


@dataclass(frozen=True, eq=False)
class HermitianGenerator:
    entries: np.ndarray
    key: str = field(init=False, repr=False)

    def __post_init__(self):
        h = _frozen(self.entries)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise ValueError(f"generator must be square, got shape {h.shape}")
        if np.max(np.abs(h - h.conj().T), initial=0.0) > 1e-12:
            raise ValueError("generator is not Hermitian")
        object.__setattr__(self, "entries", h)
        object.__setattr__(self, "key", hashlib.sha1(h.tobytes()).hexdigest())

    @property
    def dimension(self):
        return self.entries.shape[0]


class _UnitaryCache:
    """Bounded cache of eigendecompositions and exponentials.

    A single lock guards insertion; lookups of already cached values do
    not block on each other for long since no work is done under the lock.
    """

    def __init__(self, maxsize=256):
        self.maxsize = maxsize
        self._eig = OrderedDict()
        self._exp = OrderedDict()
        self._lock = threading.Lock()

    def _get(self, table, key, build):
        with self._lock:
            if key in table:
                table.move_to_end(key)
                return table[key]
        value = build()
        with self._lock:
            table[key] = value
            if len(table) > self.maxsize:
                table.popitem(last=False)
        return value

    def eigh(self, gen):
        return self._get(self._eig, gen.key, lambda: np.linalg.eigh(gen.entries))

    def exp(self, gen, scale):
        def build():
            w, v = self.eigh(gen)
            u = (v * np.exp(-1j * scale * w)) @ v.conj().T
            u.flags.writeable = False
            return u

        return self._get(self._exp, (gen.key, float(scale)), build)

    def clear(self):
        with self._lock:
            self._eig.clear()
            self._exp.clear()


unitary_cache = _UnitaryCache()


def unitary_exp(gen, scale):
    """exp(-i * scale * gen) via a cached eigendecomposition of ``gen``."""
    if not isinstance(gen, HermitianGenerator):
        gen = HermitianGenerator(gen)
    return unitary_cache.exp(gen, scale)


def displacement_operator(alpha, fock):
    """D(alpha) = exp(alpha a^dag - alpha^* a) on the truncated basis.

    Raises CutoffTooSmall when D(alpha)|0> puts more than LEAKAGE_LIMIT in
    the top two levels; warns when |alpha|^2 exceeds cutoff/4.
    """
    alpha = complex(alpha)
    if abs(alpha) ** 2 > fock.cutoff / 4:
        warnings.warn(
            f"|alpha|^2 = {abs(alpha) ** 2:.3g} is large for cutoff {fock.cutoff}",
            RuntimeWarning,
            stacklevel=2,
        )
    a = fock.annihilation()
    gen = 1j * (alpha * a.T - np.conj(alpha) * a)
    d = unitary_exp(HermitianGenerator(gen), 1.0)
    leak = float(np.sum(np.abs(d[-2:, 0]) ** 2))
    if leak > LEAKAGE_LIMIT:
        raise CutoffTooSmall(
            f"D({alpha:.3g})|0> leaks {leak:.2e} into the top of a cutoff-{fock.cutoff} basis",
            leakage=leak,
        )
    return d


def thermal_population(nbar, fock, tail_tol=1e-4):
    """Thermal (geometric) phonon distribution truncated to the Fock basis.

    p_n = nbar^n / (nbar + 1)^(n+1), renormalised over n < cutoff. The mass
    beyond the cutoff, (nbar / (nbar + 1))^cutoff, must stay below
    ``tail_tol`` or CutoffTooSmall is raised.
    """
    if nbar < 0:
        raise ValueError(f"nbar must be >= 0, got {nbar}")
    n = np.arange(fock.cutoff)
    if nbar == 0:
        p = np.zeros(fock.cutoff)
        p[0] = 1.0
        return p
    ratio = nbar / (nbar + 1.0)
    tail = ratio**fock.cutoff
    if tail > tail_tol:
        raise CutoffTooSmall(
            f"thermal tail beyond cutoff {fock.cutoff} is {tail:.2e} for nbar={nbar}",
            leakage=tail,
        )
    p = np.exp(n * np.log(ratio)) / (nbar + 1.0)
    return p / p.sum()


def thermal_cutoff(nbar, tail_tol=1e-4, minimum=2):
    """Smallest cutoff for which the thermal tail mass is below ``tail_tol``."""
    if nbar <= 0:
        return minimum
    ratio = nbar / (nbar + 1.0)
    return max(minimum, int(np.ceil(np.log(tail_tol) / np.log(ratio))) + 1)


def partial_trace_motion(state):
    """Reduced spin density matrix, rho[s, s'] = sum_n psi[s, n] psi[s', n]^*."""
    psi = state.amplitudes.reshape(2**state.num_qubits, state.fock.cutoff)
    return SpinDensityMatrix(psi @ psi.conj().T)


def spin_operator(op, qubit, num_qubits):
    """Embed a 2x2 operator acting on ``qubit`` into the m-qubit spin space."""
    mats = [np.eye(2, dtype=complex)] * num_qubits
    mats[qubit] = op
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def unitarity_defect(u):
    u = np.asarray(u)
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))
