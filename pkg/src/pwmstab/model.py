"""Piecewise-affine power stages and the peak-current switching rule.

A period starts with the switch on (``A1, B1``). The switch turns off at the
first instant ``d`` where the sensed signal ``F x`` meets the falling
threshold ``i_c - m_c t`` and stays off (``A2, B2``) until the next clock.

Sign convention for the threshold derivative: the crossing condition is
``F x(d) - h(d) = 0`` with ``h(t) = i_c - m_c t``. The saltation factor and
the determinant bound are written with ``F x'(d-) + h'`` where ``h' = +m_c``,
so that the classical ratio reads ``(-m2 + m_c) / (m1 + m_c)``.
"""

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import DimensionError, ValidationError
from .numerics import MAX_STATE_DIM

TOPOLOGIES = ("buck", "boost")


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ConverterParams:
    topology: str
    inductance: float
    capacitance: float
    load_resistance: float
    source_voltage: float
    period: float
    esr: float = 0.0
    inductor_resistance: float = 0.0
    switch_resistance: float = 0.0

    def __post_init__(self):
        if self.topology not in TOPOLOGIES:
            raise ValidationError("topology", f"expected one of {TOPOLOGIES}, got {self.topology!r}")
        for name in ("inductance", "capacitance", "load_resistance", "source_voltage", "period"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ValidationError(name, f"must be positive, got {value!r}")
        for name in ("esr", "inductor_resistance", "switch_resistance"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ValidationError(name, f"must be non-negative, got {value!r}")

    def replace(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class PiecewiseAffineModel:
    """Two affine vector fields sharing a state, plus the clock period.

    ``params`` is kept when the model came from a constructor so parameter
    sweeps can rebuild it.
    """

    A1: np.ndarray
    B1: np.ndarray
    A2: np.ndarray
    B2: np.ndarray
    period: float
    u: np.ndarray
    E: np.ndarray
    state_names: tuple = ("i_L", "v_C")
    params: Optional[ConverterParams] = None

    def __post_init__(self):
        for name in ("A1", "B1", "A2", "B2", "u", "E"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        if self.B1.ndim == 1:
            object.__setattr__(self, "B1", _frozen(self.B1[:, None]))
        if self.B2.ndim == 1:
            object.__setattr__(self, "B2", _frozen(self.B2[:, None]))
        object.__setattr__(self, "u", _frozen(np.atleast_1d(self.u)))
        object.__setattr__(self, "E", _frozen(np.atleast_1d(self.E).ravel()))
        n = self.A1.shape[0]
        if self.A1.shape != (n, n) or self.A2.shape != (n, n):
            raise DimensionError("A1 and A2 must be square with equal size")
        if not 1 <= n <= MAX_STATE_DIM:
            raise DimensionError(f"state dimension must be 1..{MAX_STATE_DIM}, got {n}")
        m = self.u.shape[0]
        for name in ("B1", "B2"):
            if getattr(self, name).shape != (n, m):
                raise DimensionError(f"{name} must have shape ({n}, {m})")
        if self.E.shape != (n,):
            raise DimensionError(f"E must have {n} entries")
        if len(self.state_names) != n:
            object.__setattr__(self, "state_names", tuple(f"x{i}" for i in range(n)))
        if not self.period > 0:
            raise ValidationError("period", "must be positive")

    @property
    def n(self):
        return self.A1.shape[0]

    def stage(self, stage):
        """(A, B u) of the named stage, ``"on"`` or ``"off"``."""
        if stage == "on":
            return self.A1, self.B1 @ self.u
        if stage == "off":
            return self.A2, self.B2 @ self.u
        raise ValueError(f"stage must be 'on' or 'off', got {stage!r}")

    def with_input(self, u):
        return replace(self, u=np.atleast_1d(np.asarray(u, dtype=float)))

    def with_period(self, period):
        params = self.params.replace(period=period) if self.params is not None else None
        return replace(self, period=float(period), params=params)


def vector_field(model, stage, x):
    x = np.asarray(x, dtype=float)
    if x.shape != (model.n,):
        raise DimensionError(f"state must have {model.n} entries, got shape {x.shape}")
    A, bu = model.stage(stage)
    return A @ x + bu


@dataclass(frozen=True, eq=False)
class SwitchingRule:
    """Peak-current comparator with a linear compensating ramp.

    Attributes
    ----------
    control_level : float
        Peak current command ``i_c`` in amperes.
    ramp_slope : float
        Ramp magnitude ``m_c`` in A/s; the threshold falls as ``i_c - m_c t``.
    feedback : array
        Row ``F`` picking the sensed signal from the state.
    """

    control_level: float
    ramp_slope: float = 0.0
    feedback: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0]))

    def __post_init__(self):
        object.__setattr__(self, "feedback", _frozen(np.atleast_1d(self.feedback).ravel()))
        if not np.any(self.feedback):
            raise ValidationError("feedback", "must be nonzero")
        if not np.isfinite(self.ramp_slope) or self.ramp_slope < 0:
            raise ValidationError("ramp_slope", f"must be >= 0, got {self.ramp_slope!r}")
        if not np.isfinite(self.control_level):
            raise ValidationError("control_level", "must be finite")

    def replace(self, **changes):
        return replace(self, **changes)

    def sensed(self, x):
        return float(self.feedback @ x)


def ramp_value(rule, t):
    """Switch-off threshold ``i_c - m_c t`` at time t into the period."""
    return rule.control_level - rule.ramp_slope * t


def ramp_slope(rule):
    """Slope of the threshold, ``-m_c``."""
    return -rule.ramp_slope


def threshold_rate(rule):
    """The ``h'`` entering the saltation denominator: ``+m_c`` (see module docstring)."""
    return rule.ramp_slope


def _esr_factors(p):
    # R/(R+rC) and R*rC/(R+rC): output v_o = k (v_C + rC i_C-branch) form
    R, rc = p.load_resistance, p.esr
    return R / (R + rc), R * rc / (R + rc)


def build_buck(params):
    """Buck power stage, state ``[i_L, v_C]``, input ``[v_s]``.

    With the load current taken from ``v_o = R/(R+rC) (v_C + rC i_L)``::

        L di/dt = s v_s - (r_L + s r_sw + R rC/(R+rC)) i_L - R/(R+rC) v_C
        C dv/dt = R/(R+rC) i_L - v_C/(R+rC)

    where ``s`` is 1 on the on-stage and 0 on the off-stage.
    """
    p = params
    if p.topology != "buck":
        raise ValidationError("topology", "build_buck needs topology 'buck'")
    L, C, R, rc = p.inductance, p.capacitance, p.load_resistance, p.esr
    k, r_par = _esr_factors(p)

    def state_matrix(r_series):
        return np.array([
            [-(r_series + r_par) / L, -k / L],
            [k / C, -1.0 / ((R + rc) * C)],
        ])

    A1 = state_matrix(p.inductor_resistance + p.switch_resistance)
    A2 = state_matrix(p.inductor_resistance)
    return PiecewiseAffineModel(
        A1=A1,
        B1=np.array([[1.0 / L], [0.0]]),
        A2=A2,
        B2=np.zeros((2, 1)),
        period=p.period,
        u=np.array([p.source_voltage]),
        E=np.array([r_par, k]),
        params=p,
    )


def build_boost(params):
    """Boost power stage, state ``[i_L, v_C]``, input ``[v_s]``.

    On-stage the inductor charges from the source through the switch while the
    capacitor feeds the load; off-stage the inductor current flows into the
    output node. ``E`` is the on-stage output map (samples are taken at the
    start of the on-stage).
    """
    p = params
    if p.topology != "boost":
        raise ValidationError("topology", "build_boost needs topology 'boost'")
    L, C, R, rc = p.inductance, p.capacitance, p.load_resistance, p.esr
    k, r_par = _esr_factors(p)
    A1 = np.array([
        [-(p.inductor_resistance + p.switch_resistance) / L, 0.0],
        [0.0, -1.0 / ((R + rc) * C)],
    ])
    A2 = np.array([
        [-(p.inductor_resistance + r_par) / L, -k / L],
        [k / C, -1.0 / ((R + rc) * C)],
    ])
    B = np.array([[1.0 / L], [0.0]])
    return PiecewiseAffineModel(
        A1=A1,
        B1=B,
        A2=A2,
        B2=B.copy(),
        period=p.period,
        u=np.array([p.source_voltage]),
        E=np.array([0.0, k]),
        params=p,
    )


def build_model(params):
    return build_buck(params) if params.topology == "buck" else build_boost(params)


SWEEP_PARAMS = ("m_c", "i_c", "v_s", "load_R", "period_T")


def apply_param(model, rule, name, value):
    """Return ``(model, rule)`` with one sweepable parameter replaced."""
    value = float(value)
    if name == "m_c":
        return model, rule.replace(ramp_slope=value)
    if name == "i_c":
        return model, rule.replace(control_level=value)
    if name == "v_s":
        if model.params is not None:
            return build_model(model.params.replace(source_voltage=value)), rule
        return model.with_input(np.r_[value, model.u[1:]]), rule
    if name == "period_T":
        return model.with_period(value), rule
    if name == "load_R":
        if model.params is None:
            raise ValidationError("load_R", "model was not built from ConverterParams")
        return build_model(model.params.replace(load_resistance=value)), rule
    raise ValidationError("sweep.param", f"unknown parameter {name!r}; expected one of {SWEEP_PARAMS}")
