"""Brute-force power timeline used to check the closed-form model.

The oracle lays a transmit cycle out segment by segment on a concrete
subframe grid and integrates it.  It shares data (profiles, scripts, TBS
tables) with the model but none of its arithmetic: segment counts come from
walking the bits, transmission gaps from a running counter, reception gaps
from an explicit availability pattern.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

from .errors import HeaderExceedsTbs
from .lifetime import COMPONENTS, connect_script, cycle_energy
from .model import CycleSpec, DeviceProfile, PsMode, RadioConfig, Technology, tbs_table, tx_power_consumption
from .procedures import MessageStep, ProcedureScript, StepKind, bundled_script
from .states import q, rap_duration

LABELS = frozenset({
    "TX", "TX_GAP", "RX", "RX_GAP", "DCI", "DELAY", "CDRX_ONDUR", "CDRX_SLEEP",
    "IDRX", "EDRX_SLEEP", "PSM_SLEEP", "SYNC", "RAP",
})

# NB-IoT uplink: 40 ms pause after every 256 ms of continuous transmission
TX_RUN_MS = 256
TX_PAUSE_MS = 40
# downlink grid: 20-subframe window with 6 subframes taken by broadcast signals
GRID = 20
UNAVAILABLE = frozenset({0, 4, 5, 9, 10, 15})
ACK_RU_MS = 2


@dataclass(frozen=True)
class Segment:
    t_start_ms: Fraction
    label: str
    power_mw: Fraction
    duration_ms: Fraction
    component: str = ""

    @property
    def energy_uj(self) -> Fraction:
        return self.power_mw * self.duration_ms


@dataclass
class PowerTrace:
    segments: list[Segment] = field(default_factory=list)
    origin: str = ""

    @property
    def total_ms(self) -> Fraction:
        return sum((s.duration_ms for s in self.segments), Fraction(0))

    @property
    def end_ms(self) -> Fraction:
        return self.segments[-1].t_start_ms + self.segments[-1].duration_ms if self.segments else Fraction(0)

    def labels(self) -> list[str]:
        return [s.label for s in self.segments]

    def count(self, label: str) -> int:
        return sum(1 for s in self.segments if s.label == label)

    def time(self, label: str) -> Fraction:
        return sum((s.duration_ms for s in self.segments if s.label == label), Fraction(0))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t_start_ms", "label", "power_mw", "duration_ms"])
        for s in self.segments:
            w.writerow([_num(s.t_start_ms), s.label, _num(s.power_mw), _num(s.duration_ms)])
        return buf.getvalue()


def _num(x: Fraction) -> str:
    if x.denominator == 1:
        return str(x.numerator)
    return f"{float(x):.6f}".rstrip("0")


def integrate(trace: PowerTrace | Iterable[Segment]) -> Fraction:
    """Exact energy of a trace in microjoules."""
    segs = trace.segments if isinstance(trace, PowerTrace) else trace
    return sum((s.energy_uj for s in segs), Fraction(0))


class _Builder:
    """Appends segments back to back, merging equal neighbours."""

    def __init__(self, component: str = "") -> None:
        self.trace = PowerTrace()
        self.t = Fraction(0)
        self.component = component

    def emit(self, label: str, power_mw, duration_ms) -> None:
        d = Fraction(duration_ms)
        if d < 0:
            raise ValueError(f"negative duration for {label}")
        if d == 0:
            return
        assert label in LABELS, label
        p = Fraction(power_mw)
        segs = self.trace.segments
        if segs and segs[-1].label == label and segs[-1].power_mw == p and segs[-1].component == self.component:
            last = segs[-1]
            segs[-1] = Segment(last.t_start_ms, label, p, last.duration_ms + d, last.component)
        else:
            segs.append(Segment(self.t, label, p, d, self.component))
        self.t += d

    def emit_energy(self, label: str, energy_uj, duration_ms) -> None:
        """A measured lump: energy spread evenly over its duration."""
        e, d = Fraction(energy_uj), Fraction(duration_ms)
        if d == 0:
            if e:
                raise ValueError(f"{label}: {float(e)} uJ with zero duration cannot be laid out")
            return
        self.emit(label, e / d, d)


# ---------------------------------------------------------------------------
# Physical layer walks
# ---------------------------------------------------------------------------


def _block_bits(radio: RadioConfig, uplink: bool) -> int:
    tech = radio.technology
    if tech is Technology.NBIOT:
        units = radio.n_ru if uplink else radio.n_sf
        per_block = tbs_table(tech).lookup(radio.mcs, units)
    else:
        units = radio.n_prb_ul if uplink else radio.n_prb_dl
        per_block = tbs_table(tech).lookup(radio.mcs, units) * radio.n_sf
    return per_block


def _blocks(payload_bits: int, block_bits: int, header_bits: int) -> int:
    room = block_bits - header_bits
    if room <= 0:
        raise HeaderExceedsTbs(f"no room for data in a {block_bits}-bit block")
    left, n = payload_bits, 0
    while left > 0:
        left -= room
        n += 1
    return n


def _transmit(b: _Builder, profile: DeviceProfile, p_tx, ms: int, gaps: bool) -> None:
    """Transmit ``ms`` subframes one by one, pausing when the run limit is hit."""
    p_gap = q(profile.p_tx_gaps_mw or 0)
    run = pending = 0
    for _ in range(ms):
        pending += 1
        run += 1
        if gaps and run == TX_RUN_MS:
            b.emit("TX", p_tx, pending)
            b.emit("TX_GAP", p_gap, TX_PAUSE_MS)
            run = pending = 0
    b.emit("TX", p_tx, pending)


def _receive(b: _Builder, profile: DeviceProfile, n_subframes: int, phase: int = 0) -> None:
    """Receive on the next ``n_subframes`` available subframes of the grid."""
    powers = {
        "RX": q(profile.p_rx_mw),
        "RX_GAP": q(profile.p_rx_mw if profile.p_rx_gaps_mw is None else profile.p_rx_gaps_mw),
    }
    got, idx = 0, phase
    label, pending = "RX", 0
    while got < n_subframes:
        now = "RX_GAP" if idx % GRID in UNAVAILABLE else "RX"
        if now != label:
            b.emit(label, powers[label], pending)
            label, pending = now, 0
        pending += 1
        got += now == "RX"
        idx += 1
    b.emit(label, powers[label], pending)


def _uplink_ms(radio: RadioConfig, payload_bits: int) -> int:
    n = _blocks(payload_bits, _block_bits(radio, True), radio.header_bits_ul)
    per_block = radio.t_ru_ms * radio.n_ru if radio.technology is Technology.NBIOT else radio.n_sf
    return per_block * radio.rep_data_ul * n


def _downlink_subframes(radio: RadioConfig, payload_bits: int) -> int:
    n = _blocks(payload_bits, _block_bits(radio, False), radio.header_bits_dl)
    return radio.n_sf * radio.rep_data_dl * n


def tx_burst_trace(profile: DeviceProfile, duration_ms: int, technology: Technology | None = None) -> PowerTrace:
    """A bare uplink burst of ``duration_ms`` subframes."""
    b = _Builder()
    tech = technology or profile.technology
    _transmit(b, profile, q(profile.p_tx_mw), duration_ms, tech is Technology.NBIOT)
    b.trace.origin = f"tx burst {duration_ms} ms"
    return b.trace


def rx_trace(profile: DeviceProfile, n_subframes: int, phase: int = 0) -> PowerTrace:
    b = _Builder()
    _receive(b, profile, n_subframes, phase)
    b.trace.origin = f"rx {n_subframes} subframes, phase {phase}"
    return b.trace


# ---------------------------------------------------------------------------
# Procedures and idle periods
# ---------------------------------------------------------------------------


def _step(b: _Builder, step: MessageStep, profile: DeviceProfile, radio: RadioConfig,
          dci_sf: int, phase: int) -> None:
    cfg = radio if step.carries_payload else radio.signalling()
    p_tx = q(tx_power_consumption(profile, radio.ul_tx_power_dbm))
    gaps = radio.technology is Technology.NBIOT
    if step.kind is StepKind.RAP:
        b.emit("RAP", p_tx, rap_duration(radio))
    elif step.kind is StepKind.DCI_RX:
        b.emit("DCI", q(profile.p_rx_mw), dci_sf * radio.rep_ctrl)
    elif step.kind is StepKind.ACK_UL:
        per = ACK_RU_MS if radio.technology is Technology.NBIOT else 1
        _transmit(b, profile, p_tx, per * radio.rep_ctrl, gaps)
    elif step.kind is StepKind.UL_DATA:
        _transmit(b, profile, p_tx, _uplink_ms(cfg, step.size_bits), gaps)
    else:
        _receive(b, profile, _downlink_subframes(cfg, step.size_bits), phase)


def _script(b: _Builder, script: ProcedureScript, profile: DeviceProfile, radio: RadioConfig,
            dci_sf: int = 1, phase: int = 0) -> None:
    p_delay = q(profile.p_rx_mw if profile.p_delay_mode.value == "AS_RX" else profile.p_cdrx_sleep_mw)
    for i, step in enumerate(script.steps):
        _step(b, step, profile, radio, dci_sf, phase)
        if i < len(script.steps) - 1:
            b.emit("DELAY", p_delay, step.delay(profile))


def script_trace(script: ProcedureScript, profile: DeviceProfile, radio: RadioConfig,
                 dci_sf: int = 1, phase: int = 0) -> PowerTrace:
    b = _Builder()
    _script(b, script, profile, radio, dci_sf, phase)
    b.trace.origin = f"script {script.name}"
    return b.trace


def _idrx_cycles(b: _Builder, profile: DeviceProfile, spec: CycleSpec, span: Fraction) -> None:
    """Paging cycles from now for ``span`` ms; the last cycle is cut at the end."""
    t = spec.timers
    cycle = q(t.idrx_cycle_ms)
    ondur = q(profile.t_edrx_ondur_ms if t.idrx_ondur_ms is None else t.idrx_ondur_ms)
    sync = q(profile.t_idrx_sync_ms)
    end = b.t + span
    while b.t < end:
        start = b.t
        b.emit_energy("SYNC", q(profile.e_idrx_sync_mj) * 1000, sync)
        b.emit_energy("IDRX", q(profile.e_paging_mj) * 1000 * t.n_paging, ondur)
        b.emit("EDRX_SLEEP", q(profile.p_edrx_sleep_mw), max(Fraction(0), min(start + cycle, end) - b.t))


def _edrx_cycles(b: _Builder, profile: DeviceProfile, spec: CycleSpec, span: Fraction) -> None:
    t = spec.timers
    cycle, ptw = q(t.edrx_cycle_ms), q(t.ptw_ms)
    idrx = q(t.idrx_cycle_ms)
    end = b.t + span
    while b.t < end:
        start = b.t
        # the paging window always runs whole iDRX cycles
        n = 0
        while n * idrx < ptw:
            n += 1
        _idrx_cycles(b, profile, spec, n * idrx)
        b.emit("EDRX_SLEEP", q(profile.p_edrx_sleep_mw), max(Fraction(0), min(start + cycle, end) - b.t))


def _idle(b: _Builder, profile: DeviceProfile, spec: CycleSpec, span: Fraction) -> None:
    end = b.t + span
    mode = spec.ps_mode
    if mode is PsMode.IDRX_ONLY:
        _idrx_cycles(b, profile, spec, span)
    elif mode is PsMode.EDRX_ONLY:
        _edrx_cycles(b, profile, spec, span)
    else:
        window = min(q(spec.timers.t3324_ms), span)
        if mode is PsMode.PSM_EDRX:
            _edrx_cycles(b, profile, spec, window)
        else:
            _idrx_cycles(b, profile, spec, window)
    b.emit("PSM_SLEEP" if mode in (PsMode.PSM_IDRX, PsMode.PSM_EDRX) else "EDRX_SLEEP",
           q(profile.p_psm_sleep_mw if mode in (PsMode.PSM_IDRX, PsMode.PSM_EDRX) else profile.p_edrx_sleep_mw),
           max(Fraction(0), end - b.t))


def _cdrx(b: _Builder, profile: DeviceProfile, spec: CycleSpec) -> None:
    t = spec.timers
    end = b.t + q(t.rrc_inactivity_ms)
    cycle = Fraction(t.cdrx_long_cycle_sf)
    ondur = Fraction(t.cdrx_ondur_sf)
    p_on = q(profile.e_cdrx_ondur_mj) * 1000 / ondur if ondur else Fraction(0)
    while b.t < end:
        start = b.t
        b.emit("CDRX_ONDUR", p_on, min(ondur, end - b.t))
        b.emit("CDRX_SLEEP", q(profile.p_cdrx_sleep_mw), min(start + cycle, end) - b.t)


def build_timeline(spec: CycleSpec, phase: int = 0) -> PowerTrace:
    """Lay out one full transmit cycle."""
    profile, radio = spec.device, spec.radio
    b = _Builder()
    cycle = q(spec.cycle_ms)
    t3412 = q(spec.timers.t3412_ms)

    def sync(component: str) -> None:
        b.component = component
        b.emit_energy("SYNC", q(profile.e_sync_mj) * 1000, q(profile.t_sync_ms))

    sync("sync")
    b.component = "service_request"
    _script(b, connect_script(spec), profile, radio, spec.dci_sf, phase)
    b.component = "cdrx_inactivity"
    _cdrx(b, profile, spec)
    b.component = "release"
    _script(b, bundled_script(spec.technology, "release"), profile, radio, spec.dci_sf, phase)

    tau = bundled_script(spec.technology, "tau")
    k = 1
    while k * t3412 < cycle:
        b.component = "psm_or_edrx_sleep"
        _idle(b, profile, spec, max(Fraction(0), k * t3412 - b.t))
        sync("tau_total")
        _script(b, tau, profile, radio, spec.dci_sf, phase)
        k += 1
    b.component = "psm_or_edrx_sleep"
    _idle(b, profile, spec, max(Fraction(0), cycle - b.t))
    b.trace.origin = _describe(spec)
    return b.trace


def idle_trace(spec: CycleSpec) -> PowerTrace:
    """Only the sleep phase of a cycle: one idle interval as long as the cycle."""
    b = _Builder("psm_or_edrx_sleep")
    _idle(b, spec.device, spec, q(spec.cycle_ms))
    b.trace.origin = f"idle {_describe(spec)}"
    return b.trace


def _describe(spec: CycleSpec) -> str:
    return (f"{spec.device.name} {spec.scenario or 'custom'} {spec.traffic.payload_bytes} B "
            f"cycle {spec.cycle_ms:g} ms T3412 {spec.timers.t3412_ms:g} ms {spec.ps_mode.value}")


# ---------------------------------------------------------------------------
# Comparison
# ---------------------------------------------------------------------------

TX_LABELS = ("TX", "TX_GAP")


@dataclass(frozen=True)
class Comparison:
    spec: CycleSpec
    model_uj: Fraction
    oracle_uj: Fraction
    component_delta_uj: dict[str, Fraction]
    label_delta_uj: dict[str, Fraction]
    tx_time_delta_ms: Fraction

    @property
    def relative_error(self) -> float:
        if self.oracle_uj == 0:
            return 0.0 if self.model_uj == 0 else float("inf")
        return float(abs(self.model_uj - self.oracle_uj) / self.oracle_uj)

    @property
    def tx_delta_uj(self) -> Fraction:
        return sum((self.label_delta_uj.get(k, Fraction(0)) for k in TX_LABELS), Fraction(0))


def compare(spec: CycleSpec, phase: int = 0) -> Comparison:
    """Closed-form cycle energy against the integrated timeline."""
    model = cycle_energy(spec)
    trace = build_timeline(spec, phase)
    comp: dict[str, Fraction] = {}
    for name in COMPONENTS:
        oracle_part = integrate(s for s in trace.segments if s.component == name)
        comp[name] = model.reports[name].energy_uj - oracle_part
    model_by_label: dict[str, Fraction] = {}
    model_time: dict[str, Fraction] = {}
    for r in model.reports.values():
        for k, v in r.breakdown.items():
            model_by_label[k] = model_by_label.get(k, Fraction(0)) + v
        for k, v in r.duration_by_label().items():
            model_time[k] = model_time.get(k, Fraction(0)) + v
    labels: dict[str, Fraction] = {}
    for label in sorted(LABELS):
        oracle_label = integrate(s for s in trace.segments if s.label == label)
        labels[label] = model_by_label.get(label, Fraction(0)) - oracle_label
    tx_dt = sum((model_time.get(k, Fraction(0)) - trace.time(k) for k in TX_LABELS), Fraction(0))
    return Comparison(spec, model.exact_total_uj, integrate(trace), comp, labels, tx_dt)
