from dataclasses import replace
from fractions import Fraction

import pytest

from ciot_battery.lifetime import cycle_energy, make_spec
from ciot_battery.model import TimerConfig, bundled_profile
from ciot_battery.oracle import (
    Segment,
    build_timeline,
    compare,
    idle_trace,
    integrate,
    rx_trace,
    tx_burst_trace,
)

N211 = bundled_profile("n211")


def test_integrate():
    segs = [Segment(Fraction(0), "TX", Fraction(2), Fraction(3)), Segment(Fraction(3), "RX", Fraction(1), Fraction(5))]
    assert integrate(segs) == 11


def test_burst_gaps():
    t = tx_burst_trace(N211, 512)
    assert t.time("TX") == 512
    assert t.count("TX_GAP") == 2 and t.time("TX_GAP") == 80
    assert t.to_csv().splitlines()[0] == "t_start_ms,label,power_mw,duration_ms"


def test_short_burst_has_no_gap():
    assert tx_burst_trace(N211, 255).count("TX_GAP") == 0


def test_rx_grid_walk():
    # 6 of 20 subframes unavailable: 14 receptions span a whole frame pair
    t = rx_trace(N211, 14, phase=0)
    assert t.time("RX") == 14
    assert t.time("RX") + t.time("RX_GAP") == 20


def test_timeline_spans_cycle():
    spec = make_spec("n211", "good", 100, 6.0)
    t = build_timeline(spec)
    assert t.total_ms == 6 * 3_600_000
    starts = [s.t_start_ms for s in t.segments]
    assert starts == sorted(starts)


def test_components_tagged():
    t = build_timeline(make_spec("n211", "good", 100, 6.0))
    assert {s.component for s in t.segments} >= {"sync", "service_request", "release", "tau_total"}


def test_idle_trace_without_window():
    spec = make_spec("n211", "good", 100, 24.0, timers=TimerConfig(t3324_ms=0))
    t = idle_trace(spec)
    assert t.labels() == ["PSM_SLEEP"]


@pytest.mark.parametrize("device, scenario", [("n211", "bad"), ("r410m-ltem", "good"), ("r410m-nbiot", "extreme")])
def test_agreement(device, scenario):
    c = compare(make_spec(device, scenario, 200, 12.0))
    assert c.relative_error < 0.01
    assert c.tx_delta_uj == 0 and c.tx_time_delta_ms == 0
    assert c.model_uj == cycle_energy(c.spec).exact_total_uj


def test_sync_component_exact():
    c = compare(make_spec("n211", "good", 100, 24.0))
    assert c.component_delta_uj["sync"] == 0
    assert c.component_delta_uj["release"] == 0


def test_fault_injection_detected():
    # corrupting the closed-form gap constants must show up against the walk
    spec = make_spec("n211", "extreme", 100, 24.0)
    c = compare(replace(spec, tx_gap_ms=400))
    assert c.relative_error > 0.01
