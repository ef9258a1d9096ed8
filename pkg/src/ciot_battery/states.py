"""Closed-form time and energy of each UE state.

Durations are exact ``Fraction`` milliseconds and energies exact ``Fraction``
microjoules.  Profile decimals are read through their decimal string so
742.858 mW stays 742858/1000 rather than its binary neighbour.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

from .errors import (
    ActiveWindowExceedsInterval,
    CycleTooShort,
    HeaderExceedsTbs,
    InvalidRepetitions,
    MonitoringExceedsPeriod,
    OnDurExceedsCycle,
    PtwExceedsCycle,
    UnknownFormat,
)
from .model import (
    DeviceProfile,
    GapModel,
    PsMode,
    RadioConfig,
    RapFormat,
    Technology,
    TimerConfig,
    tbs_table,
    tx_power_consumption,
)

ACTIVE, GAP, SLEEP = "active", "gap", "sleep"

# preamble timing, ms
T_RA_SYMBOL = Fraction("0.2667")
T_CP = {RapFormat.NB_FMT0: Fraction("0.0667"), RapFormat.NB_FMT1: Fraction("0.2667")}
T_RAP_LTEM = {RapFormat.LTEM_FMT1: Fraction("0.903")}
# one subcarrier x 4 slots of 0.5 ms
T_RU_ACK_MS = 2


def q(value: float | int | Fraction) -> Fraction:
    """Exact rational of a profile number, read as written in decimal."""
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    return Fraction(repr(float(value)))


def mj(value: float) -> Fraction:
    return q(value) * 1000


@dataclass(frozen=True)
class StatePart:
    label: str
    kind: str
    duration_ms: Fraction
    energy_uj: Fraction

    @property
    def power_mw(self) -> Fraction | None:
        return self.energy_uj / self.duration_ms if self.duration_ms else None


def part(label: str, kind: str, power_mw, duration_ms) -> StatePart:
    d = Fraction(duration_ms)
    return StatePart(label, kind, d, q(power_mw) * d)


def lump(label: str, kind: str, energy_uj, duration_ms) -> StatePart:
    return StatePart(label, kind, Fraction(duration_ms), Fraction(energy_uj))


@dataclass(frozen=True)
class StateEnergyReport:
    parts: tuple[StatePart, ...] = ()

    @classmethod
    def of(cls, *parts: StatePart) -> "StateEnergyReport":
        return cls(tuple(p for p in parts if p.duration_ms or p.energy_uj))

    @classmethod
    def concat(cls, reports: Iterable["StateEnergyReport"]) -> "StateEnergyReport":
        out: list[StatePart] = []
        for r in reports:
            out.extend(r.parts)
        return cls(tuple(out))

    def __add__(self, other: "StateEnergyReport") -> "StateEnergyReport":
        return StateEnergyReport(self.parts + other.parts)

    def scaled(self, n: int | Fraction) -> "StateEnergyReport":
        n = Fraction(n)
        return StateEnergyReport(
            tuple(StatePart(p.label, p.kind, p.duration_ms * n, p.energy_uj * n) for p in self.parts)
        )

    def _time(self, kind: str) -> Fraction:
        return sum((p.duration_ms for p in self.parts if p.kind == kind), Fraction(0))

    @property
    def active_ms(self) -> Fraction:
        return self._time(ACTIVE)

    @property
    def gap_ms(self) -> Fraction:
        return self._time(GAP)

    @property
    def sleep_ms(self) -> Fraction:
        return self._time(SLEEP)

    @property
    def total_ms(self) -> Fraction:
        return sum((p.duration_ms for p in self.parts), Fraction(0))

    @property
    def energy_uj(self) -> Fraction:
        return sum((p.energy_uj for p in self.parts), Fraction(0))

    @property
    def energy_mj(self) -> float:
        return float(self.energy_uj / 1000)

    @property
    def breakdown(self) -> dict[str, Fraction]:
        out: dict[str, Fraction] = {}
        for p in self.parts:
            out[p.label] = out.get(p.label, Fraction(0)) + p.energy_uj
        return out

    def duration_by_label(self) -> dict[str, Fraction]:
        out: dict[str, Fraction] = {}
        for p in self.parts:
            out[p.label] = out.get(p.label, Fraction(0)) + p.duration_ms
        return out


def default_gaps(radio: RadioConfig, gaps: GapModel | None) -> GapModel:
    return gaps if gaps is not None else GapModel.for_technology(radio.technology)


# ---------------------------------------------------------------------------
# TX
# ---------------------------------------------------------------------------


def segments(payload_bits: int, tbs_bits: int, header_bits: int) -> int:
    """Number of transport blocks needed for ``payload_bits``."""
    usable = tbs_bits - header_bits
    if usable <= 0:
        raise HeaderExceedsTbs(f"header {header_bits} bits leaves no room in a {tbs_bits}-bit block")
    if payload_bits < 0:
        raise ValueError("payload_bits must be >= 0")
    return -(-payload_bits // usable)


def _tbs(radio: RadioConfig, units: int) -> int:
    tbs = tbs_table(radio.technology).lookup(radio.mcs, units)
    if radio.technology is Technology.LTEM:
        # an LTE-M block spans the allocated subframes, each carrying the per-subframe TBS
        return tbs * radio.n_sf
    return tbs


def ul_tbs(radio: RadioConfig) -> int:
    return _tbs(radio, radio.ul_units)


def dl_tbs(radio: RadioConfig) -> int:
    return _tbs(radio, radio.dl_units)


def ul_segments(radio: RadioConfig, payload_bits: int) -> int:
    return segments(payload_bits, ul_tbs(radio), radio.header_bits_ul)


def dl_segments(radio: RadioConfig, payload_bits: int) -> int:
    return segments(payload_bits, dl_tbs(radio), radio.header_bits_dl)


def tx_time(radio: RadioConfig, payload_bits: int) -> Fraction:
    n = ul_segments(radio, payload_bits)
    if radio.technology is Technology.NBIOT:
        return Fraction(radio.t_ru_ms * radio.n_ru * radio.rep_data_ul * n)
    return Fraction(radio.t_sf_ms * radio.n_sf * radio.rep_data_ul * n)


def tx_gap_time(t_tx_ms, gaps: GapModel) -> Fraction:
    if t_tx_ms < 0:
        raise ValueError("t_tx_ms must be >= 0")
    if not gaps.tx_gaps_enabled:
        return Fraction(0)
    return Fraction(math.floor(Fraction(t_tx_ms) / gaps.tx_max_continuous_ms) * gaps.tx_gap_ms)


def _tx_report(profile: DeviceProfile, radio: RadioConfig, t_tx: Fraction, gaps: GapModel) -> StateEnergyReport:
    p_tx = tx_power_consumption(profile, radio.ul_tx_power_dbm)
    return StateEnergyReport.of(
        part("TX", ACTIVE, p_tx, t_tx),
        part("TX_GAP", GAP, profile.tx_gap_power_mw, tx_gap_time(t_tx, gaps)),
    )


def tx_energy(profile: DeviceProfile, radio: RadioConfig, payload_bits: int,
              gaps: GapModel | None = None) -> StateEnergyReport:
    return _tx_report(profile, radio, tx_time(radio, payload_bits), default_gaps(radio, gaps))


def ack_time(radio: RadioConfig) -> Fraction:
    if radio.technology is Technology.NBIOT:
        return Fraction(T_RU_ACK_MS * radio.rep_ctrl)
    return Fraction(radio.t_sf_ms * radio.rep_ctrl)


def ack_energy(profile: DeviceProfile, radio: RadioConfig, gaps: GapModel | None = None) -> StateEnergyReport:
    return _tx_report(profile, radio, ack_time(radio), default_gaps(radio, gaps))


def rap_duration(radio: RadioConfig) -> Fraction:
    fmt = radio.rap_format
    if radio.technology is Technology.NBIOT and fmt in T_CP:
        per_rep = (T_CP[fmt] + 5 * T_RA_SYMBOL) * 4
    elif radio.technology is Technology.LTEM and fmt in T_RAP_LTEM:
        per_rep = T_RAP_LTEM[fmt]
    else:
        raise UnknownFormat(f"preamble format {fmt.value} is not defined for {radio.technology.value}")
    return per_rep * radio.rep_rap


def rap_energy(profile: DeviceProfile, radio: RadioConfig) -> StateEnergyReport:
    if radio.rep_rap < 1:
        raise InvalidRepetitions("rep_rap must be >= 1")
    p_tx = tx_power_consumption(profile, radio.ul_tx_power_dbm)
    # a preamble is sent without transmission gaps
    return StateEnergyReport.of(part("RAP", ACTIVE, p_tx, rap_duration(radio)))


# ---------------------------------------------------------------------------
# RX
# ---------------------------------------------------------------------------


def rx_time(radio: RadioConfig, payload_bits: int) -> Fraction:
    n = dl_segments(radio, payload_bits)
    return Fraction(radio.t_sf_ms * radio.n_sf * radio.rep_data_dl * n)


def rx_gap_time(t_rx_ms, gaps: GapModel) -> Fraction:
    if t_rx_ms < 0:
        raise ValueError("t_rx_ms must be >= 0")
    return Fraction(math.ceil(Fraction(t_rx_ms) * (1 / gaps.dl_availability - 1)))


def rx_energy_for_time(profile: DeviceProfile, t_rx_ms, gaps: GapModel, label: str = "RX") -> StateEnergyReport:
    return StateEnergyReport.of(
        part(label, ACTIVE, profile.p_rx_mw, t_rx_ms),
        part("RX_GAP", GAP, profile.rx_gap_power_mw, rx_gap_time(t_rx_ms, gaps)),
    )


def rx_energy(profile: DeviceProfile, radio: RadioConfig, payload_bits: int,
              gaps: GapModel | None = None) -> StateEnergyReport:
    return rx_energy_for_time(profile, rx_time(radio, payload_bits), default_gaps(radio, gaps))


# ---------------------------------------------------------------------------
# Connected and idle cycles
# ---------------------------------------------------------------------------


def uss_cycle_energy(profile: DeviceProfile, timers: TimerConfig, radio: RadioConfig,
                     gaps: GapModel | None = None) -> StateEnergyReport:
    """One period of default (non-DRX) USS monitoring."""
    monitor_sf = timers.uss_monitor_sf * radio.rep_ctrl
    if monitor_sf > timers.uss_period_sf:
        raise MonitoringExceedsPeriod(
            f"monitoring {monitor_sf} SF exceeds the {timers.uss_period_sf} SF USS period"
        )
    t_mon = monitor_sf * radio.t_sf_ms
    sleep = (timers.uss_period_sf - monitor_sf) * radio.t_sf_ms
    return rx_energy_for_time(profile, t_mon, default_gaps(radio, gaps)) + StateEnergyReport.of(
        part("CDRX_SLEEP", SLEEP, profile.p_cdrx_sleep_mw, sleep)
    )


def cdrx_cycle_energy(profile: DeviceProfile, timers: TimerConfig) -> StateEnergyReport:
    """One long-DRX cycle: measured OnDuration plus light sleep."""
    if timers.cdrx_ondur_sf > timers.cdrx_long_cycle_sf:
        raise OnDurExceedsCycle("cdrx_ondur_sf exceeds cdrx_long_cycle_sf")
    return StateEnergyReport.of(
        lump("CDRX_ONDUR", ACTIVE, mj(profile.e_cdrx_ondur_mj), timers.cdrx_ondur_sf),
        part("CDRX_SLEEP", SLEEP, profile.p_cdrx_sleep_mw, timers.cdrx_long_cycle_sf - timers.cdrx_ondur_sf),
    )


def idrx_ondur_ms(profile: DeviceProfile, timers: TimerConfig) -> Fraction:
    return q(profile.t_edrx_ondur_ms if timers.idrx_ondur_ms is None else timers.idrx_ondur_ms)


def idrx_cycle_energy(profile: DeviceProfile, timers: TimerConfig) -> StateEnergyReport:
    """One idle-mode paging cycle; idle sleep is charged at the eDRX sleep floor."""
    ondur = idrx_ondur_ms(profile, timers)
    sync = q(profile.t_idrx_sync_ms)
    sleep = q(timers.idrx_cycle_ms) - ondur - sync
    if sleep < 0:
        raise CycleTooShort(
            f"iDRX cycle {timers.idrx_cycle_ms} ms is shorter than onDuration + sync ({float(ondur + sync)} ms)"
        )
    return StateEnergyReport.of(
        lump("SYNC", ACTIVE, mj(profile.e_idrx_sync_mj), sync),
        lump("IDRX", ACTIVE, mj(profile.e_paging_mj) * timers.n_paging, ondur),
        part("EDRX_SLEEP", SLEEP, profile.p_edrx_sleep_mw, sleep),
    )


def ptw_idrx_cycles(timers: TimerConfig) -> int:
    return math.ceil(q(timers.ptw_ms) / q(timers.idrx_cycle_ms))


def edrx_cycle_energy(profile: DeviceProfile, timers: TimerConfig) -> StateEnergyReport:
    if timers.ptw_ms > timers.edrx_cycle_ms:
        raise PtwExceedsCycle("ptw_ms exceeds edrx_cycle_ms")
    n = ptw_idrx_cycles(timers)
    return idrx_cycle_energy(profile, timers).scaled(n) + StateEnergyReport.of(
        part("EDRX_SLEEP", SLEEP, profile.p_edrx_sleep_mw, q(timers.edrx_cycle_ms) - q(timers.ptw_ms))
    )


def window_cycle(profile: DeviceProfile, timers: TimerConfig, ps_mode: PsMode) -> tuple[Fraction, StateEnergyReport]:
    """Cycle length and energy of the paging cycle used in the reachable window."""
    if PsMode(ps_mode) is PsMode.PSM_EDRX:
        return q(timers.edrx_cycle_ms), edrx_cycle_energy(profile, timers)
    return q(timers.idrx_cycle_ms), idrx_cycle_energy(profile, timers)


def psm_cycle_energy(profile: DeviceProfile, timers: TimerConfig, inter_event_ms,
                     ps_mode: PsMode = PsMode.PSM_IDRX) -> StateEnergyReport:
    """Reachable window of T3324 followed by deep sleep until the next event."""
    window = q(timers.t3324_ms)
    interval = q(inter_event_ms)
    if interval < window:
        raise ActiveWindowExceedsInterval(
            f"T3324 window {timers.t3324_ms} ms exceeds the {float(interval)} ms interval"
        )
    cycle, per_cycle = window_cycle(profile, timers, ps_mode)
    n = math.ceil(window / cycle)
    return per_cycle.scaled(n) + StateEnergyReport.of(
        part("PSM_SLEEP", SLEEP, profile.p_psm_sleep_mw, interval - window)
    )
