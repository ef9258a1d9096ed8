from fractions import Fraction

import pytest

from ciot_battery.errors import EmptyScript, NegativeSize, ScriptError, TechnologyMismatch
from ciot_battery.linkbudget import scenario_radio_config
from ciot_battery.model import Technology, bundled_profile
from ciot_battery.procedures import (
    MessageStep,
    ProcedureScript,
    StepKind,
    attach_with_data_script,
    bundled_script,
    concat_scripts,
    dci_energy,
    load_procedure_script,
    procedure_energy,
    service_request_script,
)

N211 = bundled_profile("n211")
GOOD_NB = scenario_radio_config("good", Technology.NBIOT)


def test_bundled_scripts_start_with_preamble_where_needed():
    for tech in Technology:
        for name in ("attach", "service_request", "tau"):
            assert bundled_script(tech, name).steps[0].kind is StepKind.RAP


def test_last_delay_not_charged():
    s = bundled_script(Technology.NBIOT, "service_request")
    delays = s.delays(N211)
    assert delays[-1] == 0
    assert delays[0] == 3  # RAP->DCI


def test_payload_rides_on_one_step():
    base = bundled_script(Technology.NBIOT, "service_request")
    s = service_request_script(Technology.NBIOT, 800)
    assert s.ul_bits == base.ul_bits + 800
    assert sum(st.carries_payload for st in s.steps) == 1


def test_attach_with_data():
    plain = bundled_script(Technology.LTEM, "attach")
    assert attach_with_data_script(Technology.LTEM, 0) == plain
    s = attach_with_data_script(Technology.LTEM, 800)
    assert len(s.steps) == len(plain.steps) + 2
    assert s.ul_bits == plain.ul_bits + 800
    assert s.steps[len(plain.steps) - 1].delay_key == "Data(RX)->DCI"


def test_hand_computed_procedure():
    script = ProcedureScript("mini", Technology.NBIOT, (
        MessageStep("RAP", StepKind.RAP, delay_key="RAP->DCI"),
        MessageStep("DCI", StepKind.DCI_RX, delay_key="DCI->RAR"),
        MessageStep("RAR", StepKind.DL_DATA, 104, delay_key="RAR->RRC Request"),
    ))
    e = procedure_energy(script, N211, GOOD_NB)
    p_tx, p_rx, p_gap, p_delay = (Fraction(v) for v in ("742.858", "222.134", "177.422", "21.337"))
    expected = (
        Fraction("6.4008") * p_tx + 3 * p_delay  # preamble, delay
        + 1 * p_rx + 4 * p_delay                 # DCI, delay
        + 10 * p_rx + 5 * p_gap                  # 5 SF x 2 signalling reps, ceil(10 * 6/14) gaps
    )
    assert e.energy_uj == expected


def test_explicit_delay_wins():
    step = MessageStep("x", StepKind.UL_DATA, 8, delay_key="RAP->DCI", delay_after_ms=1.5)
    assert step.delay(N211) == 1.5


def test_dci_energy():
    radio = scenario_radio_config("bad", Technology.NBIOT)
    assert dci_energy(N211, radio, dci_sf=2).energy_uj == Fraction("222.134") * 2 * 8


def test_technology_mismatch():
    with pytest.raises(TechnologyMismatch):
        procedure_energy(bundled_script(Technology.LTEM, "tau"), N211, GOOD_NB)
    with pytest.raises(TechnologyMismatch):
        concat_scripts(bundled_script(Technology.LTEM, "tau"), bundled_script(Technology.NBIOT, "tau"))


def test_loader_bare_array():
    s = load_procedure_script('[{"name": "a", "kind": "UL_DATA", "size_bits": 16}]', "NBIOT")
    assert s.ul_bits == 16 and s.technology is Technology.NBIOT


@pytest.mark.parametrize(
    "doc, error",
    [
        ('{"technology": "NBIOT", "steps": []}', EmptyScript),
        ('[{"name": "a", "kind": "UL_DATA", "size_bits": -8}]', NegativeSize),
        ('[{"name": "a", "kind": "UL_DATA", "colour": 1}]', ScriptError),
        ('[{"name": "a", "kind": "UL_DATA"}, {"name": "b", "kind": "RAP"}]', ScriptError),
    ],
)
def test_loader_errors(doc, error):
    with pytest.raises(error):
        load_procedure_script(doc, "NBIOT")


def test_unknown_procedure():
    with pytest.raises(ScriptError):
        bundled_script(Technology.NBIOT, "handover")


def test_to_dict_round_trip():
    s = bundled_script(Technology.NBIOT, "attach")
    assert load_procedure_script(s.to_dict()) == s


def test_without_delays():
    s = bundled_script(Technology.NBIOT, "tau").without_delays()
    assert all(d == 0 for d in s.delays(N211))
