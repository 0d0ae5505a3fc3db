"""Flat ``key = value`` run configuration with dotted sections.

Example::

    # buck, peak-current control without ramp
    converter.topology = buck
    converter.inductance = 50e-6
    converter.capacitance = 10e-6
    converter.load_resistance = 2
    converter.source_voltage = 12
    converter.period = 10e-6
    control.i_c = 2.0

All quantities are SI (H, F, ohm, V, s, A, A/s). Blank lines and ``#``
comments are ignored; unknown or repeated keys are rejected.
"""

from dataclasses import dataclass, field
from typing import Optional

from .errors import ConfigError, ValidationError
from .model import SWEEP_PARAMS, ConverterParams, SwitchingRule, build_model


@dataclass(frozen=True)
class ControlSpec:
    i_c: float
    m_c: float = 0.0
    feedback: tuple = (1.0, 0.0)

    def rule(self):
        return SwitchingRule(control_level=self.i_c, ramp_slope=self.m_c, feedback=self.feedback)


@dataclass(frozen=True)
class SolverSpec:
    tol: float = 1e-10
    max_iter: int = 50
    bisect_tol: float = 1e-12
    margin: float = 1e-8
    probe_cycles: int = 400


@dataclass(frozen=True)
class SweepSpec:
    param: str
    lo: float
    hi: float
    points: int

    def grid(self):
        step = (self.hi - self.lo) / (self.points - 1)
        return [self.lo + i * step for i in range(self.points - 1)] + [self.hi]


@dataclass(frozen=True)
class OutputSpec:
    dir: str = "out"
    format: str = "csv"


@dataclass(frozen=True)
class RunConfig:
    converter: ConverterParams
    control: ControlSpec
    solver: SolverSpec = field(default_factory=SolverSpec)
    sweep: Optional[SweepSpec] = None
    output: OutputSpec = field(default_factory=OutputSpec)

    def model(self):
        return build_model(self.converter)

    def rule(self):
        return self.control.rule()


def _feedback(text):
    parts = [p for p in text.replace(",", " ").split() if p]
    return tuple(float(p) for p in parts)


# key -> (converter field / spec field, parser, required)
_CONVERTER_KEYS = {
    "converter.topology": ("topology", str, True),
    "converter.inductance": ("inductance", float, True),
    "converter.capacitance": ("capacitance", float, True),
    "converter.load_resistance": ("load_resistance", float, True),
    "converter.source_voltage": ("source_voltage", float, True),
    "converter.period": ("period", float, True),
    "converter.esr": ("esr", float, False),
    "converter.inductor_resistance": ("inductor_resistance", float, False),
    "converter.switch_resistance": ("switch_resistance", float, False),
}
_CONTROL_KEYS = {
    "control.i_c": ("i_c", float, True),
    "control.m_c": ("m_c", float, False),
    "control.feedback": ("feedback", _feedback, False),
}
_SOLVER_KEYS = {
    "solver.tol": ("tol", float, False),
    "solver.max_iter": ("max_iter", int, False),
    "solver.bisect_tol": ("bisect_tol", float, False),
    "solver.margin": ("margin", float, False),
    "solver.probe_cycles": ("probe_cycles", int, False),
}
_SWEEP_KEYS = {
    "sweep.param": ("param", str, True),
    "sweep.lo": ("lo", float, True),
    "sweep.hi": ("hi", float, True),
    "sweep.points": ("points", int, True),
}
_OUTPUT_KEYS = {
    "output.dir": ("dir", str, False),
    "output.format": ("format", str, False),
}
_ALL_KEYS = {**_CONVERTER_KEYS, **_CONTROL_KEYS, **_SOLVER_KEYS, **_SWEEP_KEYS, **_OUTPUT_KEYS}
OUTPUT_FORMATS = ("csv", "csv+svg")


def _read_pairs(text):
    pairs = {}
    lines = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"empty key or value in {raw.strip()!r}", lineno)
        if key not in _ALL_KEYS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in pairs:
            raise ConfigError(f"duplicate key {key!r} (first set on line {lines[key]})", lineno)
        pairs[key] = value
        lines[key] = lineno
    return pairs, lines


def _section(pairs, lines, keys):
    values = {}
    for key, (name, conv, required) in keys.items():
        if key not in pairs:
            if required:
                raise ValidationError(name, f"missing required key {key!r}")
            continue
        try:
            values[name] = conv(pairs[key])
        except ValueError:
            raise ConfigError(f"cannot parse {key} = {pairs[key]!r}", lines[key]) from None
    return values


def parse_config(text):
    """Parse and validate a configuration document.

    Raises ``ConfigError`` (with the line number) for syntax problems and
    ``ValidationError`` (naming the field) for bad or missing values.
    """
    pairs, lines = _read_pairs(text)
    converter = ConverterParams(**_section(pairs, lines, _CONVERTER_KEYS))
    control = _section(pairs, lines, _CONTROL_KEYS)
    if "m_c" in control and control["m_c"] < 0:
        raise ValidationError("m_c", "ramp slope must be >= 0")
    if "feedback" in control and len(control["feedback"]) != 2:
        raise ValidationError("feedback", "expected two entries for the state [i_L, v_C]")
    control = ControlSpec(**control)
    control.rule()  # validates feedback and ramp

    solver = SolverSpec(**_section(pairs, lines, _SOLVER_KEYS))
    for name in ("tol", "bisect_tol", "margin"):
        if not getattr(solver, name) > 0:
            raise ValidationError(name, "must be positive")
    if solver.max_iter < 1 or solver.probe_cycles < 1:
        raise ValidationError("max_iter", "iteration counts must be >= 1")

    sweep = None
    if any(key.startswith("sweep.") for key in pairs):
        sweep = SweepSpec(**_section(pairs, lines, _SWEEP_KEYS))
        if sweep.param not in SWEEP_PARAMS:
            raise ValidationError("param", f"sweep.param must be one of {SWEEP_PARAMS}")
        if sweep.points < 2:
            raise ValidationError("points", "a sweep needs at least 2 points")
        if not sweep.hi > sweep.lo:
            raise ValidationError("hi", "sweep.hi must exceed sweep.lo")
        if sweep.param != "m_c" and sweep.lo <= 0:
            raise ValidationError("lo", f"{sweep.param} must stay positive over the sweep")
        if sweep.param == "m_c" and sweep.lo < 0:
            raise ValidationError("lo", "m_c must stay non-negative over the sweep")

    output = OutputSpec(**_section(pairs, lines, _OUTPUT_KEYS))
    if output.format not in OUTPUT_FORMATS:
        raise ValidationError("format", f"output.format must be one of {OUTPUT_FORMATS}")
    return RunConfig(converter, control, solver, sweep, output)


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def _fmt(value):
    if isinstance(value, tuple):
        return ", ".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize_config(config):
    """Canonical text form; ``parse_config(serialize_config(c)) == c``."""
    out = []

    def emit(keys, obj):
        for key, (name, _, _) in keys.items():
            out.append(f"{key} = {_fmt(getattr(obj, name))}")

    emit(_CONVERTER_KEYS, config.converter)
    emit(_CONTROL_KEYS, config.control)
    emit(_SOLVER_KEYS, config.solver)
    if config.sweep is not None:
        emit(_SWEEP_KEYS, config.sweep)
    emit(_OUTPUT_KEYS, config.output)
    return "\n".join(out) + "\n"


def normalize_config(text):
    return serialize_config(parse_config(text))
