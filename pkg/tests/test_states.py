from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ciot_battery.errors import ActiveWindowExceedsInterval, CycleTooShort, HeaderExceedsTbs, UnknownFormat
from ciot_battery.linkbudget import scenario_radio_config
from ciot_battery.model import GapModel, PsMode, RadioConfig, RapFormat, Technology, TimerConfig, bundled_profile
from ciot_battery.states import (
    StateEnergyReport,
    cdrx_cycle_energy,
    edrx_cycle_energy,
    idrx_cycle_energy,
    lump,
    part,
    psm_cycle_energy,
    rap_duration,
    rap_energy,
    rx_energy,
    rx_gap_time,
    segments,
    tx_energy,
    tx_gap_time,
    tx_time,
)

N211 = bundled_profile("n211")
LTEM = bundled_profile("r410m-ltem")
NB_GAPS = GapModel.for_technology(Technology.NBIOT)


def test_segments():
    assert segments(0, 872, 40) == 0
    assert segments(832, 872, 40) == 1
    assert segments(833, 872, 40) == 2
    with pytest.raises(HeaderExceedsTbs):
        segments(8, 40, 40)


def test_tx_good_nbiot():
    # 800 bits fit one 872-bit block: 5 RU x 8 ms
    radio = scenario_radio_config("good", Technology.NBIOT)
    rep = tx_energy(N211, radio, 800)
    assert tx_time(radio, 800) == 40
    assert rep.energy_uj == Fraction("29714.32")
    assert rep.gap_ms == 0


def test_tx_bad_nbiot_with_gaps():
    # 168 usable bits -> 5 blocks x 40 ms x 8 reps = 1600 ms, six 40 ms gaps
    radio = scenario_radio_config("bad", Technology.NBIOT)
    rep = tx_energy(N211, radio, 800)
    assert rep.active_ms == 1600
    assert rep.gap_ms == 240
    assert rep.energy_uj == Fraction("1188572.8") + Fraction("36864")


def test_tx_ltem_block_spans_subframes():
    # 72 bits/SF x 5 SF = 360-bit block, 320 usable -> 3 blocks x 5 SF x 2 reps
    radio = scenario_radio_config("good", Technology.LTEM)
    rep = tx_energy(LTEM, radio, 800)
    assert rep.active_ms == 30 and rep.gap_ms == 0


def test_tx_gap_time():
    assert tx_gap_time(255, NB_GAPS) == 0
    assert tx_gap_time(256, NB_GAPS) == 40
    assert tx_gap_time(1024, NB_GAPS) == 160
    assert tx_gap_time(1024, GapModel.for_technology(Technology.LTEM)) == 0
    with pytest.raises(ValueError):
        tx_gap_time(-1, NB_GAPS)


def test_rx_gap_time():
    # 14 of 20 subframes usable: 6/14 extra, rounded up
    assert rx_gap_time(5, NB_GAPS) == 3
    assert rx_gap_time(14, NB_GAPS) == 6
    assert rx_gap_time(0, NB_GAPS) == 0


def test_rx_good_nbiot():
    radio = scenario_radio_config("good", Technology.NBIOT)
    rep = rx_energy(N211, radio, 800)
    assert rep.active_ms == 5 and rep.gap_ms == 3
    assert rep.energy_uj == Fraction("222.134") * 5 + Fraction("177.422") * 3


@pytest.mark.parametrize(
    "tech, fmt, reps, ms",
    [
        (Technology.NBIOT, RapFormat.NB_FMT1, 1, Fraction("6.4008")),
        (Technology.NBIOT, RapFormat.NB_FMT0, 1, Fraction("5.6008")),
        (Technology.NBIOT, RapFormat.NB_FMT1, 4, Fraction("25.6032")),
        (Technology.LTEM, RapFormat.LTEM_FMT1, 2, Fraction("1.806")),
    ],
)
def test_rap_duration(tech, fmt, reps, ms):
    assert rap_duration(RadioConfig(tech, 0, rep_rap=reps, rap_format=fmt)) == ms


def test_rap_format_mismatch():
    with pytest.raises(UnknownFormat):
        rap_duration(RadioConfig(Technology.LTEM, 0, rap_format=RapFormat.NB_FMT0))


def test_rap_energy_has_no_gap():
    rep = rap_energy(N211, RadioConfig(Technology.NBIOT, 0, rep_rap=32))
    assert rep.gap_ms == 0
    assert rep.energy_uj == Fraction("742.858") * Fraction("6.4008") * 32


def test_cdrx_cycle():
    rep = cdrx_cycle_energy(N211, TimerConfig())
    assert rep.total_ms == 1024
    assert rep.energy_uj == 885 + Fraction("21.337") * 1016


def test_idrx_cycle_uses_measured_ondur():
    rep = idrx_cycle_energy(N211, TimerConfig())
    assert rep.total_ms == 2560
    assert rep.energy_uj == 326 + Fraction("0.0122") * (2560 - Fraction("1.445"))


def test_idrx_cycle_too_short():
    with pytest.raises(CycleTooShort):
        idrx_cycle_energy(N211, TimerConfig(idrx_cycle_ms=1))


def test_edrx_cycle():
    # PTW of 5120 ms holds two iDRX cycles, the rest of 20480 ms sleeps
    rep = edrx_cycle_energy(N211, TimerConfig())
    idrx = idrx_cycle_energy(N211, TimerConfig())
    assert rep.energy_uj == 2 * idrx.energy_uj + Fraction("0.0122") * (20480 - 5120)


def test_psm_cycle():
    # ceil(60000 / 2560) = 24 paging cycles, then deep sleep
    rep = psm_cycle_energy(N211, TimerConfig(), 3_600_000)
    idrx = idrx_cycle_energy(N211, TimerConfig()).energy_uj
    assert rep.energy_uj == 24 * idrx + Fraction("0.0095") * 3_540_000
    assert rep.energy_uj == Fraction("42203.144904")


def test_psm_edrx_mode():
    rep = psm_cycle_energy(N211, TimerConfig(), 3_600_000, PsMode.PSM_EDRX)
    edrx = edrx_cycle_energy(N211, TimerConfig()).energy_uj
    assert rep.energy_uj == 3 * edrx + Fraction("0.0095") * 3_540_000


def test_psm_window_too_long():
    with pytest.raises(ActiveWindowExceedsInterval):
        psm_cycle_energy(N211, TimerConfig(), 1000)


def test_report_arithmetic():
    a = StateEnergyReport.of(part("TX", "active", 2, 3), lump("SYNC", "active", 10, 1))
    b = StateEnergyReport.of(part("PSM_SLEEP", "sleep", Fraction(1, 2), 4))
    c = a + b
    assert c.energy_uj == 18 and c.total_ms == 8 and c.sleep_ms == 4
    assert c.breakdown == {"TX": 6, "SYNC": 10, "PSM_SLEEP": 2}
    assert a.scaled(3).energy_uj == 48
    assert c.energy_mj == pytest.approx(0.018)


@settings(max_examples=300)
@given(st.integers(0, 20_000), st.integers(0, 20_000))
def test_tx_energy_monotone_in_payload(b1, b2):
    radio = scenario_radio_config("bad", Technology.NBIOT)
    lo, hi = sorted((b1, b2))
    assert tx_energy(N211, radio, lo).energy_uj <= tx_energy(N211, radio, hi).energy_uj


@settings(max_examples=300)
@given(st.integers(0, 100_000))
def test_gap_time_bounded(t):
    g = tx_gap_time(t, NB_GAPS)
    assert g <= Fraction(t) * 40 / 256
