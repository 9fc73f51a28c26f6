"""Trapped-ion qubits driven by an optical frequency comb.

Stroboscopic (delta-kick) simulation of comb-driven Raman transitions:
carrier Rabi flopping, resolved sideband spectra, sideband cooling, and a
Molmer-Sorensen gate with its parity-based fidelity witness.
"""

__version__ = "0.1.0"

from .comb import (
    BeamGeometry,
    Envelope,
    IonSpec,
    PulseTrainSpec,
    QClass,
    TrapMode,
    effective_rep_rate,
    pulse_area,
    q_parameter,
    raman_rabi_frequency,
    suppression_factor,
)
from .errors import (
    CombionError,
    CutoffTooSmall,
    InsufficientScan,
    InvalidRatio,
    NotOnResonance,
    SchemaError,
)
from .hilbert import FockSpace, QuantumState, SpinDensityMatrix
