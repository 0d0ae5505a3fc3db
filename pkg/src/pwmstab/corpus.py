"""Built-in reference configurations used by ``verify`` and the test suite."""

from .model import ConverterParams, SwitchingRule, build_model

_BUCK = dict(
    topology="buck",
    inductance=50e-6,
    capacitance=10e-6,
    load_resistance=2.0,
    source_voltage=12.0,
    period=10e-6,
)
_BOOST = dict(
    topology="boost",
    inductance=50e-6,
    capacitance=20e-6,
    load_resistance=20.0,
    source_voltage=5.0,
    period=10e-6,
)
_PARASITICS = dict(esr=0.02, inductor_resistance=0.05, switch_resistance=0.03)

# name -> (converter parameters, i_c [A], m_c [A/s])
CORPUS = {
    "buck-ideal-noramp": (ConverterParams(**_BUCK), 2.0, 0.0),
    "buck-ideal-ramp": (ConverterParams(**_BUCK), 3.2, 1.0e4),
    "buck-parasitic-noramp": (ConverterParams(**_BUCK, **_PARASITICS), 3.0, 0.0),
    "buck-parasitic-ramp": (ConverterParams(**_BUCK, **_PARASITICS), 3.5, 5.0e4),
    "boost-ideal-noramp": (ConverterParams(**_BOOST), 2.0, 0.0),
    "boost-ideal-ramp": (ConverterParams(**_BOOST), 2.0, 5.0e4),
    "boost-parasitic-noramp": (ConverterParams(**_BOOST, **_PARASITICS), 2.0, 0.0),
    "boost-parasitic-ramp": (ConverterParams(**_BOOST, **_PARASITICS), 2.0, 5.0e4),
    "buck-ideal-highduty": (ConverterParams(**_BUCK), 4.0, 0.0),
}


def corpus_case(name):
    params, i_c, m_c = CORPUS[name]
    return build_model(params), SwitchingRule(i_c, m_c)


def corpus_cases():
    """``[(name, model, rule), ...]`` in a fixed order."""
    return [(name, *corpus_case(name)) for name in CORPUS]
