import pytest

from ciot_battery.errors import InvalidRepetitions, Unreachable
from ciot_battery.linkbudget import (
    LinkBudget,
    ScenarioName,
    combined_snr,
    get_scenario,
    load_scenarios,
    rx_snr,
    scenario_radio_config,
)
from ciot_battery.model import Technology


def test_noise_floor():
    # single-tone uplink: -174 dBm/Hz + 10log10(15 kHz) + 5 dB NF
    b = LinkBudget.for_technology(Technology.NBIOT, 140)
    assert b.noise_floor_dbm == pytest.approx(-174 + 41.7609 + 5, abs=1e-3)


@pytest.mark.parametrize(
    "tech, mcl, snr",
    [
        (Technology.NBIOT, 140, 10.24),
        (Technology.NBIOT, 160, -9.76),
        (Technology.LTEM, 150, -10.55),
    ],
)
def test_snr(tech, mcl, snr):
    assert rx_snr(LinkBudget.for_technology(tech, mcl)) == pytest.approx(snr, abs=0.01)


def test_combined_snr():
    assert combined_snr(0.0, 1) == 0.0
    assert combined_snr(-10.0, 10) == pytest.approx(0.0)
    with pytest.raises(InvalidRepetitions):
        combined_snr(0.0, 0)


def test_scenarios_loaded():
    s = load_scenarios()
    assert set(s) == set(ScenarioName)
    assert get_scenario("bad").mcl_db == 150


def test_unknown_scenario():
    with pytest.raises(ValueError):
        get_scenario("awful")


@pytest.mark.parametrize(
    "name, tech, mcs, reps",
    [
        ("good", Technology.NBIOT, 10, 1),
        ("bad", Technology.NBIOT, 2, 8),
        ("extreme", Technology.NBIOT, 0, 32),
        ("good", Technology.LTEM, 5, 2),
        ("bad", Technology.LTEM, 0, 16),
    ],
)
def test_scenario_radio(name, tech, mcs, reps):
    r = scenario_radio_config(name, tech)
    assert (r.mcs, r.rep_data_ul, r.rep_data_dl, r.rep_ctrl, r.rep_rap) == (mcs, reps, reps, reps, reps)


def test_overrides():
    assert scenario_radio_config("good", Technology.NBIOT, n_ru=4).n_ru == 4


def test_ltem_extreme_unreachable():
    with pytest.raises(Unreachable, match="160 dB"):
        scenario_radio_config("extreme", Technology.LTEM)
