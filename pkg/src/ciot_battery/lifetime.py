"""Transmit-cycle composition, hourly energy and battery lifetime."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from itertools import product
from typing import Sequence

from .errors import CiotError, CycleTooShort, EmptyGrid, InvalidTimer, ZeroConsumption
from .linkbudget import scenario_radio_config
from .model import (
    HOURS_PER_YEAR,
    MJ_PER_WH,
    MS_PER_HOUR,
    BatteryConfig,
    CycleSpec,
    DeviceProfile,
    PsMode,
    TimerConfig,
    TrafficProfile,
    bundled_profile,
    load_profile_file,
)
from .procedures import attach_with_data_script, bundled_script, procedure_energy, service_request_script
from .states import (
    SLEEP,
    StateEnergyReport,
    cdrx_cycle_energy,
    edrx_cycle_energy,
    idrx_cycle_energy,
    lump,
    mj,
    part,
    psm_cycle_energy,
    q,
)

COMPONENTS = ("sync", "service_request", "cdrx_inactivity", "release", "tau_total", "psm_or_edrx_sleep")


def tau_count(cycle_ms: float, t3412_ms: float) -> int:
    """TAUs per cycle; every connection restarts T3412."""
    if not t3412_ms > 0:
        raise InvalidTimer("t3412_ms must be > 0")
    ratio = cycle_ms / t3412_ms
    # absorb float noise so 24 h / 4 h counts as exactly 6
    return max(0, math.ceil(ratio - 1e-9) - 1)


@dataclass(frozen=True)
class CycleEnergyBreakdown:
    """Per-cycle energy in integer microjoules."""

    sync: int
    service_request: int
    cdrx_inactivity: int
    release: int
    tau_total: int
    psm_or_edrx_sleep: int
    total: int
    tau_count: int
    # exact reports behind each component
    reports: dict[str, StateEnergyReport] = field(default_factory=dict, compare=False, repr=False)

    @classmethod
    def from_reports(cls, reports: dict[str, StateEnergyReport], n_tau: int) -> "CycleEnergyBreakdown":
        parts = {k: round(reports[k].energy_uj) for k in COMPONENTS}
        return cls(**parts, total=sum(parts.values()), tau_count=n_tau, reports=reports)

    def components(self) -> dict[str, int]:
        return {k: getattr(self, k) for k in COMPONENTS}

    def mj(self, name: str) -> float:
        return getattr(self, name) / 1000

    @property
    def exact_total_uj(self) -> Fraction:
        return sum((r.energy_uj for r in self.reports.values()), Fraction(0))


@dataclass(frozen=True)
class CyclePlan:
    """Everything needed to lay one cycle out in time."""

    sync: StateEnergyReport
    connect: StateEnergyReport
    cdrx: StateEnergyReport
    release: StateEnergyReport
    tau: StateEnergyReport
    tau_starts: tuple[Fraction, ...]
    idle: tuple[tuple[Fraction, Fraction], ...]  # (start, length)


def sync_report(spec: CycleSpec) -> StateEnergyReport:
    d = spec.device
    return StateEnergyReport.of(lump("SYNC", "active", mj(d.e_sync_mj), q(d.t_sync_ms)))


def cdrx_inactivity_energy(spec: CycleSpec) -> StateEnergyReport:
    """cDRX from the end of data exchange until release; a partial last cycle sleeps."""
    timers = spec.timers
    cycle = Fraction(timers.cdrx_long_cycle_sf)
    span = q(timers.rrc_inactivity_ms)
    n_full = math.floor(span / cycle)
    rest = span - n_full * cycle
    return cdrx_cycle_energy(spec.device, timers).scaled(n_full) + StateEnergyReport.of(
        part("CDRX_SLEEP", SLEEP, spec.device.p_cdrx_sleep_mw, rest)
    )


def connect_script(spec: CycleSpec):
    bits = spec.traffic.payload_bits
    if spec.first_cycle_attach:
        return attach_with_data_script(spec.technology, bits)
    return service_request_script(spec.technology, bits)


def _procedure(spec: CycleSpec, script) -> StateEnergyReport:
    return procedure_energy(script, spec.device, spec.radio, spec.timers, spec.gap_model(), spec.dci_sf)


def plan_cycle(spec: CycleSpec) -> CyclePlan:
    """Lay out the cycle: connection at t=0, TAUs at multiples of T3412, idle in between.

    A TAU that would start before the previous activity has finished is
    pushed back to start right after it.
    """
    sync = sync_report(spec)
    connect = _procedure(spec, connect_script(spec))
    cdrx = cdrx_inactivity_energy(spec)
    release = _procedure(spec, bundled_script(spec.technology, "release"))
    tau = sync + _procedure(spec, bundled_script(spec.technology, "tau"))

    cycle = q(spec.cycle_ms)
    t3412 = q(spec.timers.t3412_ms)
    first_end = sync.total_ms + connect.total_ms + cdrx.total_ms + release.total_ms
    if first_end > cycle:
        raise CycleTooShort(
            f"cycle {float(cycle)} ms is shorter than the connection itself ({float(first_end)} ms)"
        )
    n_tau = tau_count(spec.cycle_ms, spec.timers.t3412_ms)
    tau_starts = []
    idle = []
    end = first_end
    for k in range(1, n_tau + 1):
        start = max(end, k * t3412)
        idle.append((end, start - end))
        tau_starts.append(start)
        end = start + tau.total_ms
    idle.append((end, max(Fraction(0), cycle - end)))
    return CyclePlan(sync, connect, cdrx, release, tau, tuple(tau_starts), tuple(idle))


def idle_energy(spec: CycleSpec, interval_ms: Fraction) -> StateEnergyReport:
    """Energy of one idle interval between two events."""
    timers, device = spec.timers, spec.device
    mode = spec.ps_mode
    if mode is PsMode.EDRX_ONLY:
        return edrx_cycle_energy(device, timers).scaled(interval_ms / q(timers.edrx_cycle_ms))
    if mode is PsMode.IDRX_ONLY:
        return idrx_cycle_energy(device, timers).scaled(interval_ms / q(timers.idrx_cycle_ms))
    window = min(q(timers.t3324_ms), interval_ms)
    return psm_cycle_energy(device, replace(timers, t3324_ms=window), interval_ms, mode)


def cycle_energy(spec: CycleSpec) -> CycleEnergyBreakdown:
    plan = plan_cycle(spec)
    n_tau = len(plan.tau_starts)
    reports = {
        "sync": plan.sync,
        "service_request": plan.connect,
        "cdrx_inactivity": plan.cdrx,
        "release": plan.release,
        "tau_total": plan.tau.scaled(n_tau),
        "psm_or_edrx_sleep": StateEnergyReport.concat(idle_energy(spec, length) for _, length in plan.idle),
    }
    return CycleEnergyBreakdown.from_reports(reports, n_tau)


def hourly_energy(spec: CycleSpec, breakdown: CycleEnergyBreakdown | None = None) -> float:
    """Average modem energy per hour, mJ."""
    breakdown = breakdown or cycle_energy(spec)
    return breakdown.total / 1000 * spec.traffic.rate_per_hour


def lifetime_hours(e_hour_mj: float, battery: BatteryConfig) -> float:
    denominator = e_hour_mj + battery.e_device_per_hour_mj
    if denominator <= 0:
        raise ZeroConsumption("hourly consumption is zero; lifetime is unbounded")
    return battery.capacity_wh * MJ_PER_WH * battery.safety_factor / denominator


def estimate_lifetime(spec: CycleSpec, battery: BatteryConfig | None = None) -> float:
    return lifetime_hours(hourly_energy(spec), battery or BatteryConfig())


# ---------------------------------------------------------------------------
# Specs by name and sweeps
# ---------------------------------------------------------------------------


def resolve_profile(device: str) -> DeviceProfile:
    if device.endswith(".json") or os.sep in device:
        return load_profile_file(device)
    return bundled_profile(device)


def make_spec(device: str, scenario: str, payload_bytes: int, cycle_hours: float,
              t3412_hours: float = 2.0, timers: TimerConfig | None = None,
              ps_mode: PsMode = PsMode.PSM_IDRX, **spec_kw) -> CycleSpec:
    """Build a spec from a bundled profile name (or a profile file path)."""
    profile = resolve_profile(device)
    radio = scenario_radio_config(scenario, profile.technology)
    timers = replace(timers or TimerConfig(), t3412_ms=t3412_hours * MS_PER_HOUR)
    traffic = TrafficProfile.from_cycle_hours(payload_bytes, cycle_hours)
    return CycleSpec(profile, radio, traffic, timers, ps_mode, scenario=scenario, **spec_kw)


SWEEP_COLUMNS = (
    "device", "technology", "scenario", "payload_bytes", "cycle_hours", "t3412_hours",
    "e_cycle_mj", "e_sync_mj", "e_sr_mj", "e_cdrx_mj", "e_release_mj", "e_tau_mj", "e_sleep_mj",
    "tau_count", "e_hour_mj", "lifetime_hours", "lifetime_years", "error",
)


@dataclass(frozen=True)
class SweepGrid:
    devices: Sequence[str] = ("n211",)
    scenarios: Sequence[str] = ("good",)
    payloads: Sequence[int] = (100,)
    cycles_hours: Sequence[float] = (24.0,)
    t3412_hours: Sequence[float] = (2.0,)
    timers: TimerConfig = field(default_factory=TimerConfig)
    battery: BatteryConfig = field(default_factory=BatteryConfig)
    ps_mode: PsMode = PsMode.PSM_IDRX

    def points(self) -> list[tuple]:
        axes = (self.devices, self.scenarios, self.payloads, self.cycles_hours, self.t3412_hours)
        if any(len(a) == 0 for a in axes):
            raise EmptyGrid("every sweep axis needs at least one value")
        return list(product(*axes))


@dataclass(frozen=True)
class SweepRow:
    device: str
    technology: str
    scenario: str
    payload_bytes: int
    cycle_hours: float
    t3412_hours: float
    breakdown: CycleEnergyBreakdown | None = None
    e_hour_mj: float | None = None
    lifetime_hours: float | None = None
    error: str = ""

    @property
    def lifetime_years(self) -> float | None:
        return None if self.lifetime_hours is None else self.lifetime_hours / HOURS_PER_YEAR

    def as_record(self) -> dict[str, str]:
        """CSV cells; fixed formatting keeps output byte-stable."""
        b = self.breakdown
        rec = {
            "device": self.device,
            "technology": self.technology,
            "scenario": self.scenario,
            "payload_bytes": str(self.payload_bytes),
            "cycle_hours": f"{self.cycle_hours:g}",
            "t3412_hours": f"{self.t3412_hours:g}",
        }
        if b is None:
            for col in SWEEP_COLUMNS[6:-1]:
                rec[col] = ""
        else:
            rec.update(
                e_cycle_mj=f"{b.total / 1000:.3f}",
                e_sync_mj=f"{b.sync / 1000:.3f}",
                e_sr_mj=f"{b.service_request / 1000:.3f}",
                e_cdrx_mj=f"{b.cdrx_inactivity / 1000:.3f}",
                e_release_mj=f"{b.release / 1000:.3f}",
                e_tau_mj=f"{b.tau_total / 1000:.3f}",
                e_sleep_mj=f"{b.psm_or_edrx_sleep / 1000:.3f}",
                tau_count=str(b.tau_count),
                e_hour_mj=f"{self.e_hour_mj:.6f}",
                lifetime_hours=f"{self.lifetime_hours:.3f}",
                lifetime_years=f"{self.lifetime_years:.6f}",
            )
        rec["error"] = self.error
        return rec


def evaluate_point(point: tuple, timers: TimerConfig, battery: BatteryConfig, ps_mode: PsMode) -> SweepRow:
    device, scenario, payload, cycle_h, t3412_h = point
    technology = ""
    try:
        technology = resolve_profile(device).technology.value
        spec = make_spec(device, scenario, payload, cycle_h, t3412_h, timers, ps_mode)
        b = cycle_energy(spec)
        e_hour = hourly_energy(spec, b)
        life = lifetime_hours(e_hour, battery)
    except (CiotError, ValueError, OSError) as exc:
        return SweepRow(device, technology, scenario, payload, cycle_h, t3412_h,
                        error=f"{type(exc).__name__}: {exc}")
    return SweepRow(device, technology, scenario, payload, cycle_h, t3412_h, b, e_hour, life)


def _evaluate_star(args) -> SweepRow:
    return evaluate_point(*args)


def sweep(grid: SweepGrid, jobs: int = 1) -> list[SweepRow]:
    """One row per grid point in axis order; failing points carry an error instead of aborting."""
    tasks = [(p, grid.timers, grid.battery, grid.ps_mode) for p in grid.points()]
    if jobs <= 1 or len(tasks) < 2:
        return [_evaluate_star(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        # map keeps submission order, so output matches the sequential run
        return list(pool.map(_evaluate_star, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
