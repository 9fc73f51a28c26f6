"""Experiment configuration: YAML in, validated objects out.

Frequencies are in Hz, times in seconds, intensities in W/cm^2. Structural
checks come from a JSON schema; physical invariants (delta-kick validity,
adiabatic elimination, tone fractions, grid ordering) are checked on top,
and every problem found is reported at once.
"""
import hashlib
import json
import re
from dataclasses import dataclass

import numpy as np
import yaml
from jsonschema import Draft202012Validator

from ..comb import DEFAULT_TOL_Q, MAX_DUTY_CYCLE, MIN_DETUNING_RATIO, BeamGeometry, IonSpec, PulseTrainSpec
from ..errors import SchemaError

TASKS = ("rabi", "spectrum", "cool", "msgate", "parity")

_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_grid = {
    "type": "object",
    "additionalProperties": False,
    "required": ["start", "stop", "num"],
    "properties": {"start": {"type": "number"}, "stop": {"type": "number"}, "num": {"type": "integer", "minimum": 1}},
}
_values_or_grid = {"oneOf": [{"type": "array", "items": {"type": "number"}, "minItems": 1}, _grid]}


def _block(properties, required=()):
    return {"type": "object", "additionalProperties": False, "required": list(required), "properties": properties}


_gate_props = {
    "mode": {"type": "integer", "minimum": 0},
    "rabi_frequency": _pos,
    "detuning": _pos,
    "duration": _pos,
    "initial_nbar": _nonneg,
    "cutoff": {"type": "integer", "minimum": 2},
    "method": {"enum": ["analytic", "numeric", "both"]},
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["task", "ion", "laser"],
    "properties": {
        "task": {"enum": list(TASKS)},
        "seed": {"type": "integer"},
        "tol_q": _pos,
        "ion": _block(
            {
                "qubit_splitting": _pos,
                "detuning": _pos,
                "linewidth": _pos,
                "saturation_intensity": _pos,
                "modes": {
                    "type": "array",
                    "items": _block(
                        {
                            "trap_frequency": _pos,
                            "lamb_dicke": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                        },
                        ["trap_frequency", "lamb_dicke"],
                    ),
                },
            },
            ["qubit_splitting", "detuning", "linewidth"],
        ),
        "laser": _block(
            {
                "carrier_frequency": _pos,
                "rep_rate": _pos,
                "pulse_duration": _pos,
                "envelope": {"enum": ["sech", "gaussian"]},
                "pick_divisor": {"type": "integer", "minimum": 1},
                "pulse_count": {"type": "integer", "minimum": 0},
                "intensity_ratio": _nonneg,
            },
            ["rep_rate", "pulse_duration"],
        ),
        "beams": _block(
            {
                "ao1_offset": {"type": "number"},
                "ao2_offset": {"type": "number"},
                "tones_on_beam1": {
                    "type": "array",
                    "items": _block(
                        {"offset": {"type": "number"}, "amplitude_fraction": _nonneg},
                        ["offset", "amplitude_fraction"],
                    ),
                },
            }
        ),
        "rabi": _block(
            {
                "durations": _values_or_grid,
                "lock_to_resonance": {"type": "boolean"},
                "rabi_frequency": _pos,
            },
            ["durations"],
        ),
        "spectrum": _block(
            {
                "offsets": _values_or_grid,
                "probe_duration": _pos,
                "initial_nbar": {"type": "array", "items": _nonneg},
                "theta_p": _nonneg,
                "exact": {"type": "boolean"},
            },
            ["offsets", "probe_duration"],
        ),
        "cool": _block(
            {
                "cycles": {"type": "integer", "minimum": 0},
                "pulses_per_cycle": {"type": "integer", "minimum": 1},
                "initial_nbar": _nonneg,
                "recoil_heating_per_cycle": {"type": "number", "minimum": 0, "maximum": 1},
                "mode": {"type": "integer", "minimum": 0},
                "cutoff": {"type": "integer", "minimum": 2},
            },
            ["cycles", "initial_nbar"],
        ),
        "msgate": _block(_gate_props, ["rabi_frequency"]),
        "parity": _block(
            dict(
                _gate_props,
                phases=_values_or_grid,
                detection_error={
                    "type": "array",
                    "items": {"type": "number", "minimum": 0, "maximum": 1},
                    "minItems": 2,
                    "maxItems": 2,
                },
            ),
            ["rabi_frequency"],
        ),
        "output": _block({"path": {"type": "string"}, "format": {"enum": ["csv", "json"]}}),
    },
}

_validator = Draft202012Validator(SCHEMA)


@dataclass(frozen=True)
class ExperimentConfig:
    raw: dict
    ion: IonSpec
    laser: PulseTrainSpec
    beams: BeamGeometry

    @property
    def task(self):
        return self.raw["task"]

    @property
    def block(self):
        return self.raw.get(self.task, {})

    @property
    def seed(self):
        return self.raw.get("seed", 0)

    @property
    def tol_q(self):
        return self.raw.get("tol_q", DEFAULT_TOL_Q)

    @property
    def output(self):
        return self.raw.get("output", {})

    def config_hash(self):
        canonical = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()


def expand(values):
    """A list of numbers, or a {start, stop, num} grid, as a float array."""
    if isinstance(values, dict):
        return np.linspace(values["start"], values["stop"], values["num"])
    return np.asarray(values, dtype=float)


def _path(error):
    out = ""
    for part in error.absolute_path:
        out += f"[{part}]" if isinstance(part, int) else (f".{part}" if out else str(part))
    return out or "<root>"


def _physics_errors(raw):
    errors = []
    ion, laser = raw.get("ion", {}), raw.get("laser", {})
    try:
        duty = laser["pulse_duration"] * laser["rep_rate"] / laser.get("pick_divisor", 1)
        if not duty < MAX_DUTY_CYCLE:
            errors.append(
                f"laser.pulse_duration: pulse_duration * rep_rate / pick_divisor = {duty:.3g}; "
                f"the delta-kick model needs < {MAX_DUTY_CYCLE}"
            )
    except (KeyError, TypeError, ZeroDivisionError):
        pass
    try:
        ratio = abs(ion["detuning"]) / ion["linewidth"]
        if not ratio > MIN_DETUNING_RATIO:
            errors.append(
                f"ion.detuning: |detuning|/linewidth = {ratio:.3g}; adiabatic elimination needs > {MIN_DETUNING_RATIO:g}"
            )
    except (KeyError, TypeError, ZeroDivisionError):
        pass
    tones = raw.get("beams", {}).get("tones_on_beam1") or []
    if tones:
        try:
            total = sum(t["amplitude_fraction"] for t in tones)
            if abs(total - 1.0) > 1e-9:
                errors.append(f"beams.tones_on_beam1: amplitude fractions sum to {total:g}, not 1")
        except (KeyError, TypeError):
            pass

    task = raw.get("task")
    block = raw.get(task)
    n_modes = len(ion.get("modes") or [])
    if task in TASKS and block is None:
        errors.append(f"{task}: task '{task}' needs a '{task}' block")
        return errors
    if not isinstance(block, dict):
        return errors
    try:
        if task == "spectrum":
            grid = expand(block["offsets"])
            if np.any(np.diff(grid) < 0):
                errors.append("spectrum.offsets: grid must be sorted ascending")
            if n_modes == 0:
                errors.append("ion.modes: the spectrum task needs at least one motional mode")
            nbar = block.get("initial_nbar")
            if nbar is not None and len(nbar) != n_modes:
                errors.append(f"spectrum.initial_nbar: expected {n_modes} entries, got {len(nbar)}")
            if block.get("exact") and n_modes != 1:
                errors.append("spectrum.exact: exact spectra support exactly one motional mode")
        elif task == "rabi":
            if np.any(expand(block["durations"]) < 0):
                errors.append("rabi.durations: durations must be non-negative")
        elif task in ("cool", "msgate", "parity"):
            mode = block.get("mode", 0)
            if task != "cool" or n_modes:
                if mode >= n_modes:
                    errors.append(f"{task}.mode: mode {mode} does not exist ({n_modes} modes defined)")
        if task == "parity" and "phases" in block:
            phases = expand(block["phases"])
            span = phases.max() - phases.min()
            span += span / max(len(phases) - 1, 1)
            if span < np.pi - 1e-9:
                errors.append("parity.phases: scan must cover at least pi")
    except (KeyError, TypeError, ValueError):
        pass
    return errors


def parse(raw):
    """Validate a config tree; raise SchemaError listing every problem."""
    if not isinstance(raw, dict):
        raise SchemaError(["<root>: configuration must be a mapping"])
    errors = [f"{_path(e)}: {e.message}" for e in sorted(_validator.iter_errors(raw), key=lambda e: list(map(str, e.absolute_path)))]
    errors += _physics_errors(raw)
    if errors:
        raise SchemaError(errors)
    ion = raw["ion"]
    modes = tuple((m["trap_frequency"], m["lamb_dicke"]) for m in ion.get("modes") or [])
    beams = raw.get("beams", {})
    try:
        return ExperimentConfig(
            raw,
            IonSpec(
                ion["qubit_splitting"],
                ion["detuning"],
                ion["linewidth"],
                ion.get("saturation_intensity", 0.15),
                modes,
            ),
            PulseTrainSpec(**raw["laser"]),
            BeamGeometry(
                beams.get("ao1_offset", 0.0),
                beams.get("ao2_offset", 0.0),
                tuple((t["offset"], t["amplitude_fraction"]) for t in beams.get("tones_on_beam1") or []),
            ),
        )
    except ValueError as exc:
        raise SchemaError([str(exc)]) from exc


class _Loader(yaml.SafeLoader):
    """SafeLoader that also reads 1e6 and 9.0e12 as floats (YAML 1.2 style)."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(
        r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
        |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
        |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
        |[-+]?\.(?:inf|Inf|INF)
        |\.(?:nan|NaN|NAN))$""",
        re.X,
    ),
    list("-+0123456789."),
)


def load_yaml(text):
    return yaml.load(text, Loader=_Loader)


def validate_config(text):
    """Parse YAML text into an :class:`ExperimentConfig`."""
    try:
        raw = load_yaml(text)
    except yaml.YAMLError as exc:
        raise SchemaError([f"<root>: not valid YAML ({exc})"]) from exc
    return parse(raw)
